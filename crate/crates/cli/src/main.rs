fn main() {
    std::process::exit(gainterm_cli::run(std::env::args_os()));
}
