//! Command-line front end for the `gainterm` library.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use gainterm::collision::{
    points_csv, qplus_eval, qplus_grid, radon_eval, Cutoff, KernelSpec, Output, QuadConfig, RadonVariant,
};
use gainterm::config::{env_overrides, load_config, Config};
use gainterm::grid::{norm, sample_on_grid, GridFunction, NormSpec, VelocityGrid};
use gainterm::quadrature::SphereQuadrature;
use gainterm::report::{emit_report, from_json, render, Format};
use gainterm::symbol::{symbol_compare, symbol_direct_auto, symbol_stationary, LeadingForm};
use gainterm::verify::{EstimateReport, Suite};
use gainterm::{AnalyticFn, Vec3};

const FUNCTION_GRAMMAR: &str = "\
Function specs (--f, --g, --h):
  expr   := term (('+' | '-') term)*
  term   := [number '*'] factor
  factor := gaussian[(c=x,y,z; w=num; a=num)]
          | bump[(c=x,y,z; r=num; a=num)]
          | const(num)
          | dilate(λ; expr)             v -> expr(λv)
          | translate(x,y,z; expr)      v -> expr(v + m)
          | modulate(k=x,y,z[; phase=num]; expr)
          | (expr)
  e.g. gaussian(c=0,0,0;w=1;a=1)+bump(c=1,0,0;r=2)

Norm specs (--norm): lp:P, lp:P:W (weight <v>^W), hom:A, inhom:A

Exit codes: 0 success, 1 a check failed or the computation was refused,
2 usage error.

Configuration: --config FILE (TOML); GAINTERM_<SECTION>_<KEY> environment
variables override the file.";

#[derive(Parser, Debug)]
#[command(name = "gainterm", version, about = "Gain term Q⁺, its Fourier symbol and the estimate harness", after_help = FUNCTION_GRAMMAR)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports and grid files.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the symbol a(x, ξ) and print one CSV row.
    Symbol {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        x: Vec3,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        xi: Vec3,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum, default_value = "both")]
        method: SymbolMethod,
        #[arg(long, value_enum, default_value = "corrected")]
        form: Form,
    },
    /// Evaluate Q⁺(f, g) on the configured grid or at points.
    Qplus {
        #[arg(long, value_parser = parse_fn)]
        f: AnalyticFn,
        #[arg(long, value_parser = parse_fn)]
        g: AnalyticFn,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum, default_value = "full")]
        cutoff: CutoffArg,
        /// Points `x,y,z;x,y,z;...`; without it the whole grid is written as a GFv1 file.
        #[arg(long, value_parser = parse_points, allow_hyphen_values = true)]
        at: Option<Points>,
        #[arg(long, value_enum)]
        check: Option<QplusCheck>,
    },
    /// Evaluate the Radon-type transform of h at points.
    Radon {
        #[arg(long, value_parser = parse_fn)]
        h: AnalyticFn,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum, default_value = "t")]
        variant: VariantArg,
        #[arg(long, value_parser = parse_points, allow_hyphen_values = true)]
        at: Points,
    },
    /// Norms of a function sampled on the configured grid, or of a GFv1 file.
    Norms {
        #[arg(long, value_parser = parse_fn, conflicts_with = "input")]
        f: Option<AnalyticFn>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long = "norm", value_parser = parse_norm, allow_hyphen_values = true)]
        norms: Vec<NormSpec>,
    },
    /// Run a verification suite (partition, geometry, stationary, identity,
    /// estimate, schur, region3) or `all`.
    Verify {
        suite: String,
        /// Overrides the trial count of the geometry, identity and estimate suites.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Re-render a JSON report.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: FormatArg,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SymbolMethod {
    Quadrature,
    Stationary,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Form {
    Corrected,
    Printed,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CutoffArg {
    Full,
    Small,
    Large,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum QplusCheck {
    Mass,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VariantArg {
    T,
    TSmall,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Json,
    Csv,
    Md,
}

fn parse_vec3(s: &str) -> std::result::Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok(Vec3::new(a, b, c)),
        _ => Err(format!("expected three comma-separated numbers, got `{s}`")),
    }
}

#[derive(Clone, Debug)]
struct Points(Vec<Vec3>);

fn parse_points(s: &str) -> std::result::Result<Points, String> {
    let pts: Vec<Vec3> =
        s.split(';').filter(|p| !p.trim().is_empty()).map(parse_vec3).collect::<std::result::Result<_, _>>()?;
    if pts.is_empty() {
        return Err("no points given".into());
    }
    Ok(Points(pts))
}

fn parse_fn(s: &str) -> std::result::Result<AnalyticFn, String> {
    s.parse::<AnalyticFn>().map_err(|e| e.to_string())
}

fn parse_norm(s: &str) -> std::result::Result<NormSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    match parts[..] {
        ["lp", p] => Ok(NormSpec::lp(num(p)?)),
        ["lp", p, w] => Ok(NormSpec::Lebesgue { p: num(p)?, q: num(w)? }),
        ["hom", a] => Ok(NormSpec::SobolevHom { alpha: num(a)? }),
        ["inhom", a] => Ok(NormSpec::SobolevInhom { alpha: num(a)? }),
        _ => Err(format!("unknown norm spec `{s}` (lp:P, lp:P:W, hom:A, inhom:A)")),
    }
}

fn norm_label(spec: NormSpec) -> String {
    match spec {
        NormSpec::Lebesgue { p, q: 0.0 } => format!("L^{p}"),
        NormSpec::Lebesgue { p, q } => format!("L^{p}_{q}"),
        NormSpec::SobolevHom { alpha } => format!("Hdot^{alpha}"),
        NormSpec::SobolevInhom { alpha } => format!("H^{alpha}"),
    }
}

/// Outcome of a command: whether every check passed.
type Outcome = Result<bool>;

struct Env {
    config: Config,
    out_dir: PathBuf,
}

fn vec_csv(v: Vec3) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

fn cmd_symbol(x: Vec3, xi: Vec3, gamma: f64, method: SymbolMethod, form: Form, env: &Env) -> Outcome {
    let q = &env.config.quadrature;
    let form = match form {
        Form::Corrected => LeadingForm::Corrected,
        Form::Printed => LeadingForm::Printed,
    };
    println!("x,xi,gamma,lambda,theta0,quad_re,quad_im,stat_re,stat_im,rel_err");
    let head = format!("{},{},{gamma}", vec_csv(x), vec_csv(xi));
    match method {
        SymbolMethod::Both => {
            let c = symbol_compare(x, xi, gamma, q.lambda_min, form, q.symbol_floor_c)?;
            println!(
                "{head},{},{},{},{},{},{},{}",
                c.quad.lambda,
                c.quad.theta0,
                c.quad.value.re,
                c.quad.value.im,
                c.stat.value.re,
                c.stat.value.im,
                c.rel_err
            );
        }
        SymbolMethod::Quadrature => {
            let e = symbol_direct_auto(x, xi, gamma, q.symbol_floor_c)?;
            println!("{head},{},{},{},{},,,", e.lambda, e.theta0, e.value.re, e.value.im);
        }
        SymbolMethod::Stationary => {
            let e = symbol_stationary(x, xi, gamma, q.lambda_min, form)?;
            println!("{head},{},{},,,{},{},", e.lambda, e.theta0, e.value.re, e.value.im);
        }
    }
    Ok(true)
}

fn quad_config(cfg: &Config) -> Result<QuadConfig> {
    let sphere = SphereQuadrature::hemisphere(cfg.quadrature.n_mu, cfg.quadrature.n_phi)?;
    Ok(QuadConfig::new(sphere, VelocityGrid::new(cfg.grid.vstar_n, cfg.grid.half_width)?)?)
}

fn cmd_qplus(
    f: &AnalyticFn,
    g: &AnalyticFn,
    gamma: f64,
    cutoff: CutoffArg,
    at: Option<Points>,
    check: Option<QplusCheck>,
    env: &Env,
) -> Outcome {
    let cfg = &env.config;
    let cutoff = match cutoff {
        CutoffArg::Full => Cutoff::Full,
        CutoffArg::Small => Cutoff::Small,
        CutoffArg::Large => Cutoff::Large,
    };
    let kernel = KernelSpec::new(gamma, cutoff)?.with_ramp(cfg.partitions.ramp);
    let quad = quad_config(cfg)?;
    let guard = cfg.identity.guard;
    let grid = VelocityGrid::new(cfg.grid.n, cfg.grid.half_width)?;

    if let Some(QplusCheck::Mass) = check {
        if gamma != 0.0 || cutoff != Cutoff::Full {
            bail!(UsageError("--check mass needs --gamma 0 and the full kernel".into()));
        }
        let q = qplus_grid(f, g, &grid, &[kernel], &quad, guard)?;
        let integral = q[0].integral().re;
        let fine = VelocityGrid::new(2 * cfg.grid.vstar_n, cfg.grid.half_width)?;
        let l1 = |h: &AnalyticFn| norm(&sample_on_grid(h, &fine), NormSpec::lp(1.0));
        let expected = PI * l1(f)? * l1(g)?;
        let rel = (integral - expected).abs() / expected;
        let ok = rel < cfg.identity.mass_tol;
        println!(
            "integral={integral} expected={expected} rel_err={rel:e} limit={:e} {}",
            cfg.identity.mass_tol,
            if ok { "pass" } else { "FAIL" }
        );
        return Ok(ok);
    }

    match at {
        Some(Points(points)) => {
            let vals = qplus_eval(f, g, &Output::Points(points.clone()), kernel, &quad, guard)?;
            print!("{}", points_csv(&points, &vals));
        }
        None => {
            let q = qplus_grid(f, g, &grid, &[kernel], &quad, guard)?;
            std::fs::create_dir_all(&env.out_dir)?;
            let path = env.out_dir.join("qplus.gf");
            q[0].save(&path)?;
            println!("{}", path.display());
        }
    }
    Ok(true)
}

fn cmd_radon(h: &AnalyticFn, gamma: f64, variant: VariantArg, at: &[Vec3], env: &Env) -> Outcome {
    let cfg = &env.config;
    let sphere = SphereQuadrature::hemisphere(cfg.quadrature.n_mu, cfg.quadrature.n_phi)?;
    let variant = match variant {
        VariantArg::T => RadonVariant::T,
        VariantArg::TSmall => RadonVariant::TSmall,
    };
    let vals: Vec<f64> = at
        .iter()
        .map(|&x| radon_eval(h, x, gamma, variant, &sphere, cfg.partitions.ramp))
        .collect::<gainterm::Result<_>>()?;
    print!("{}", points_csv(at, &vals));
    Ok(true)
}

fn cmd_norms(f: Option<&AnalyticFn>, input: Option<&Path>, specs: &[NormSpec], env: &Env) -> Outcome {
    let gf = match (f, input) {
        (Some(f), _) => {
            let grid = VelocityGrid::new(env.config.grid.n, env.config.grid.half_width)?;
            sample_on_grid(f, &grid)
        }
        (None, Some(p)) => GridFunction::load(p)?,
        (None, None) => bail!(UsageError("norms needs --f or --input".into())),
    };
    let defaults = [
        NormSpec::lp(1.0),
        NormSpec::lp(2.0),
        NormSpec::SobolevHom { alpha: 1.0 },
        NormSpec::SobolevInhom { alpha: 1.0 },
    ];
    let specs = if specs.is_empty() { &defaults[..] } else { specs };
    println!("norm,value");
    for &s in specs {
        println!("{},{}", norm_label(s), norm(&gf, s)?);
    }
    Ok(true)
}

fn summarize(rep: &EstimateReport) {
    let failures = rep.failures();
    if failures.is_empty() {
        println!("{}: pass ({} checks)", rep.suite(), rep.checks.len());
    } else {
        println!("{}: FAIL ({} of {} checks)", rep.suite(), failures.len(), rep.checks.len());
        for c in failures {
            println!("  failed: {} value={} limit={} {}", c.name, c.value, c.limit, c.detail);
        }
    }
}

fn cmd_verify(suite: &str, env: &Env) -> Outcome {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![Suite::parse(suite).ok_or_else(|| UsageError(format!("unknown suite `{suite}`")))?]
    };
    let mut timings = BTreeMap::new();
    let mut all_ok = true;
    for s in suites {
        let start = Instant::now();
        let rep = env.config.run_suite(s);
        timings.insert(rep.suite().to_string(), start.elapsed().as_secs_f64());
        for format in Format::ALL {
            emit_report(&rep, format, &env.out_dir)?;
        }
        summarize(&rep);
        all_ok &= rep.passed();
    }
    let path = env.out_dir.join("timings.json");
    let mut merged: BTreeMap<String, f64> =
        std::fs::read_to_string(&path).ok().and_then(|t| serde_json::from_str(&t).ok()).unwrap_or_default();
    merged.extend(timings);
    std::fs::write(&path, serde_json::to_string_pretty(&merged)? + "\n")?;
    Ok(all_ok)
}

fn cmd_report(input: &Path, format: FormatArg, out: Option<&Path>) -> Outcome {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let rep = from_json(&text)?;
    let format = match format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
        FormatArg::Md => Format::Md,
    };
    let body = render(&rep, format);
    match out {
        Some(p) => std::fs::write(p, body)?,
        None => print!("{body}"),
    }
    Ok(true)
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn build_env(cli: &Cli) -> Result<Env> {
    let usage = |e: gainterm::Error| UsageError(e.to_string());
    let mut config = load_config(cli.config.as_deref(), &env_overrides()).map_err(usage)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.display().to_string();
    }
    if let Command::Verify { trials: Some(t), .. } = cli.command {
        config.geometry.trials = t;
        config.identity.trials = t;
        config.estimate.trials = t;
    }
    config.validate().map_err(usage)?;
    let out_dir = PathBuf::from(&config.output_dir);
    Ok(Env { config, out_dir })
}

fn dispatch(cli: Cli) -> Outcome {
    let env = build_env(&cli)?;
    match cli.command {
        Command::Symbol { x, xi, gamma, method, form } => cmd_symbol(x, xi, gamma, method, form, &env),
        Command::Qplus { f, g, gamma, cutoff, at, check } => cmd_qplus(&f, &g, gamma, cutoff, at, check, &env),
        Command::Radon { h, gamma, variant, at } => cmd_radon(&h, gamma, variant, &at.0, &env),
        Command::Norms { f, input, norms } => cmd_norms(f.as_ref(), input.as_deref(), &norms, &env),
        Command::Verify { suite, .. } => cmd_verify(&suite, &env),
        Command::Report { input, format, out } => cmd_report(&input, format, out.as_deref()),
    }
}

/// Runs the command line `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code != 0 {
                eprintln!("\n{}", Cli::command().render_help());
            }
            return code;
        }
    };
    let threads = cli.threads;
    let work = move || match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}\n\n{}", Cli::command().render_help());
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => {
                eprintln!("error: {}", anyhow!(e));
                2
            }
        },
        None => work(),
    }
}
