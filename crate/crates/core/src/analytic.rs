//! Closed-form test functions on ℝ³.
//!
//! An [`AnalyticFn`] is a small expression tree. For evaluation it is
//! flattened into a sum of [`Atom`]s, each of the form
//! `amp · base((v − c)·s) · Π cos(k·v + φ)`, so dilations and translations are
//! folded into the atom parameters and cost nothing at evaluation time.
//!
//! Textual grammar (whitespace is ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := [number '*'] factor
//! factor := gaussian [ '(' params ')' ]        c=vec; w=num; a=num
//!         | bump [ '(' params ')' ]            c=vec; r=num; a=num
//!         | const '(' number ')'
//!         | dilate '(' number ';' expr ')'     v ↦ h(λv)
//!         | translate '(' vec ';' expr ')'     v ↦ h(v + m)
//!         | modulate '(' k=vec [';' phase=num] ';' expr ')'   h(v)·cos(k·v + phase)
//!         | '(' expr ')'
//! vec    := number ',' number ',' number
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Gaussian atoms are treated as zero once the exponent drops below this.
pub const GAUSSIAN_EXPONENT_CUT: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnalyticFn {
    /// `a · exp(−|v − c|² / (2w²))`
    Gaussian {
        center: Vec3,
        width: f64,
        amplitude: f64,
    },
    /// `a · exp(1 − 1/(1 − |v − c|²/r²))` inside the ball, 0 outside.
    Bump {
        center: Vec3,
        radius: f64,
        amplitude: f64,
    },
    Constant(f64),
    /// `h(v) · cos(k·v + phase)`
    Modulated {
        inner: Box<AnalyticFn>,
        wavevector: Vec3,
        phase: f64,
    },
    /// `h(λv)`
    Dilation {
        inner: Box<AnalyticFn>,
        lambda: f64,
    },
    /// `τ_m h(v) = h(v + m)`
    Translation {
        inner: Box<AnalyticFn>,
        shift: Vec3,
    },
    Scaled {
        inner: Box<AnalyticFn>,
        factor: f64,
    },
    Sum(Vec<AnalyticFn>),
}

impl AnalyticFn {
    pub fn gaussian(center: Vec3, width: f64, amplitude: f64) -> Self {
        AnalyticFn::Gaussian { center, width, amplitude }
    }

    /// Unit-amplitude, unit-width Gaussian at the origin.
    pub fn standard_gaussian() -> Self {
        AnalyticFn::gaussian(Vec3::ZERO, 1.0, 1.0)
    }

    pub fn bump(center: Vec3, radius: f64, amplitude: f64) -> Self {
        AnalyticFn::Bump { center, radius, amplitude }
    }

    pub fn zero() -> Self {
        AnalyticFn::Constant(0.0)
    }

    pub fn modulated(self, wavevector: Vec3, phase: f64) -> Self {
        AnalyticFn::Modulated { inner: Box::new(self), wavevector, phase }
    }

    pub fn dilate(self, lambda: f64) -> Self {
        AnalyticFn::Dilation { inner: Box::new(self), lambda }
    }

    pub fn translate(self, shift: Vec3) -> Self {
        AnalyticFn::Translation { inner: Box::new(self), shift }
    }

    pub fn scale(self, factor: f64) -> Self {
        AnalyticFn::Scaled { inner: Box::new(self), factor }
    }

    pub fn plus(self, other: AnalyticFn) -> Self {
        match self {
            AnalyticFn::Sum(mut v) => {
                v.push(other);
                AnalyticFn::Sum(v)
            }
            s => AnalyticFn::Sum(vec![s, other]),
        }
    }

    /// Checks parameters: positive widths and radii, nonzero dilations,
    /// finite everything.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        match self {
            AnalyticFn::Gaussian { center, width, amplitude } => {
                if !(center.is_finite() && amplitude.is_finite() && *width > 0.0 && width.is_finite()) {
                    return bad(format!("invalid gaussian parameters in `{self}`"));
                }
            }
            AnalyticFn::Bump { center, radius, amplitude } => {
                if !(center.is_finite() && amplitude.is_finite() && *radius > 0.0 && radius.is_finite()) {
                    return bad(format!("invalid bump parameters in `{self}`"));
                }
            }
            AnalyticFn::Constant(c) => {
                if !c.is_finite() {
                    return bad("non-finite constant".into());
                }
            }
            AnalyticFn::Modulated { inner, wavevector, phase } => {
                if !(wavevector.is_finite() && phase.is_finite()) {
                    return bad("non-finite modulation".into());
                }
                inner.validate()?;
            }
            AnalyticFn::Dilation { inner, lambda } => {
                if !(lambda.is_finite() && *lambda != 0.0) {
                    return bad(format!("dilation factor must be finite and nonzero, got {lambda}"));
                }
                inner.validate()?;
            }
            AnalyticFn::Translation { inner, shift } => {
                if !shift.is_finite() {
                    return bad("non-finite translation".into());
                }
                inner.validate()?;
            }
            AnalyticFn::Scaled { inner, factor } => {
                if !factor.is_finite() {
                    return bad("non-finite scale factor".into());
                }
                inner.validate()?;
            }
            AnalyticFn::Sum(v) => {
                for t in v {
                    t.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Flattened form used for evaluation.
    pub fn compile(&self) -> AtomSum {
        let mut atoms = Vec::new();
        self.collect(&mut atoms);
        atoms.retain(|a| a.amp != 0.0);
        AtomSum { atoms }
    }

    fn collect(&self, out: &mut Vec<Atom>) {
        match self {
            AnalyticFn::Gaussian { center, width, amplitude } => out.push(Atom {
                amp: *amplitude,
                base: Base::Gaussian,
                center: *center,
                scale: 1.0 / width,
                waves: Vec::new(),
            }),
            AnalyticFn::Bump { center, radius, amplitude } => out.push(Atom {
                amp: *amplitude,
                base: Base::Bump,
                center: *center,
                scale: 1.0 / radius,
                waves: Vec::new(),
            }),
            AnalyticFn::Constant(c) => {
                out.push(Atom { amp: *c, base: Base::Constant, center: Vec3::ZERO, scale: 1.0, waves: Vec::new() })
            }
            AnalyticFn::Modulated { inner, wavevector, phase } => {
                let start = out.len();
                inner.collect(out);
                for a in &mut out[start..] {
                    a.waves.push(Wave { k: *wavevector, phase: *phase });
                }
            }
            AnalyticFn::Dilation { inner, lambda } => {
                let start = out.len();
                inner.collect(out);
                for a in &mut out[start..] {
                    // base((λv − c)s) = base((v − c/λ)(λs)); cos(k·λv + φ)
                    a.center = a.center * (1.0 / lambda);
                    a.scale *= lambda;
                    for w in &mut a.waves {
                        w.k = w.k * *lambda;
                    }
                }
            }
            AnalyticFn::Translation { inner, shift } => {
                let start = out.len();
                inner.collect(out);
                for a in &mut out[start..] {
                    if a.base != Base::Constant {
                        a.center = a.center - *shift;
                    }
                    for w in &mut a.waves {
                        w.phase += w.k.dot(*shift);
                    }
                }
            }
            AnalyticFn::Scaled { inner, factor } => {
                let start = out.len();
                inner.collect(out);
                for a in &mut out[start..] {
                    a.amp *= factor;
                }
            }
            AnalyticFn::Sum(v) => {
                for t in v {
                    t.collect(out);
                }
            }
        }
    }

    /// Pointwise value. For repeated evaluation use [`AnalyticFn::compile`].
    pub fn eval(&self, v: Vec3) -> f64 {
        self.compile().eval(v)
    }

    /// True when every atom is a nonnegative Gaussian or bump without modulation.
    pub fn is_nonnegative(&self) -> bool {
        self.compile().atoms.iter().all(|a| a.amp >= 0.0 && a.waves.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    Gaussian,
    Bump,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub k: Vec3,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub amp: f64,
    pub base: Base,
    pub center: Vec3,
    pub scale: f64,
    pub waves: Vec<Wave>,
}

impl Atom {
    #[inline]
    pub fn eval(&self, v: Vec3) -> f64 {
        let b = match self.base {
            Base::Constant => 1.0,
            Base::Gaussian => {
                let r2 = ((v - self.center) * self.scale).norm2();
                if r2 > 2.0 * GAUSSIAN_EXPONENT_CUT {
                    return 0.0;
                }
                (-0.5 * r2).exp()
            }
            Base::Bump => {
                let t2 = ((v - self.center) * self.scale).norm2();
                if t2 >= 1.0 {
                    return 0.0;
                }
                (1.0 - 1.0 / (1.0 - t2)).exp()
            }
        };
        let mut m = 1.0;
        for w in &self.waves {
            m *= (w.k.dot(v) + w.phase).cos();
        }
        self.amp * b * m
    }
}

/// Flattened [`AnalyticFn`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomSum {
    pub atoms: Vec<Atom>,
}

impl AtomSum {
    #[inline]
    pub fn eval(&self, v: Vec3) -> f64 {
        let mut s = 0.0;
        for a in &self.atoms {
            s += a.eval(v);
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn has_constant(&self) -> bool {
        self.atoms.iter().any(|a| a.base == Base::Constant)
    }

    /// Smallest base exponent over the atoms at `v`: Gaussian atoms give
    /// `|(v−c)s|²/2`, bumps 0 inside their ball and ∞ outside, constants 0.
    /// Every atom is bounded by `|amp|·e^{−exponent}`.
    #[inline]
    pub fn min_exponent(&self, v: Vec3) -> f64 {
        let mut m = f64::INFINITY;
        for a in &self.atoms {
            let t2 = ((v - a.center) * a.scale).norm2();
            let e = match a.base {
                Base::Gaussian => 0.5 * t2,
                Base::Bump => {
                    if t2 >= 1.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                }
                Base::Constant => 0.0,
            };
            m = m.min(e);
        }
        m
    }

    /// Writes each atom's base exponent at `v` into `buf` and returns the
    /// minimum (see [`AtomSum::min_exponent`]).
    #[inline]
    pub fn exponents(&self, v: Vec3, buf: &mut [f64]) -> f64 {
        let mut m = f64::INFINITY;
        for (a, slot) in self.atoms.iter().zip(buf.iter_mut()) {
            let t2 = ((v - a.center) * a.scale).norm2();
            let (e, lower) = match a.base {
                Base::Gaussian => (0.5 * t2, 0.5 * t2),
                Base::Bump => {
                    if t2 >= 1.0 {
                        (f64::INFINITY, f64::INFINITY)
                    } else {
                        (1.0 - 1.0 / (1.0 - t2), 0.0)
                    }
                }
                Base::Constant => (0.0, 0.0),
            };
            *slot = e;
            if lower < m {
                m = lower;
            }
        }
        m
    }

    /// Value at `v` from exponents produced by [`AtomSum::exponents`],
    /// skipping atoms whose exponent exceeds `cut`.
    #[inline]
    pub fn eval_from(&self, v: Vec3, exps: &[f64], cut: f64) -> f64 {
        let mut s = 0.0;
        for (a, &e) in self.atoms.iter().zip(exps) {
            let b = match a.base {
                Base::Gaussian => {
                    if e > cut {
                        continue;
                    }
                    (-e).exp()
                }
                // stored as the log of the bump value
                Base::Bump => {
                    if e == f64::INFINITY {
                        continue;
                    }
                    e.exp()
                }
                Base::Constant => 1.0,
            };
            let mut m = 1.0;
            for w in &a.waves {
                m *= (w.k.dot(v) + w.phase).cos();
            }
            s += a.amp * b * m;
        }
        s
    }

    /// Lower bound of [`AtomSum::min_exponent`] over the closed ball `B(c, r)`.
    pub fn min_exponent_in_ball(&self, c: Vec3, r: f64) -> f64 {
        let mut m = f64::INFINITY;
        for a in &self.atoms {
            let d = ((c - a.center).norm() - r).max(0.0) * a.scale.abs();
            let e = match a.base {
                Base::Gaussian => 0.5 * d * d,
                Base::Bump => {
                    if d >= 1.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                }
                Base::Constant => 0.0,
            };
            m = m.min(e);
        }
        m
    }

    /// Largest |amplitude|.
    pub fn max_amplitude(&self) -> f64 {
        self.atoms.iter().map(|a| a.amp.abs()).fold(0.0, f64::max)
    }

    /// Radius of a ball about `v` outside which every atom vanishes
    /// (Gaussians beyond the exponent cut); `None` if a constant is present.
    pub fn reach(&self, v: Vec3) -> Option<f64> {
        let mut r: f64 = 0.0;
        for a in &self.atoms {
            let extent = match a.base {
                Base::Constant => return None,
                Base::Gaussian => (2.0 * GAUSSIAN_EXPONENT_CUT).sqrt() / a.scale.abs(),
                Base::Bump => 1.0 / a.scale.abs(),
            };
            r = r.max((v - a.center).norm() + extent);
        }
        Some(r)
    }
}

impl fmt::Display for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn vec(v: &Vec3) -> String {
            format!("{},{},{}", v.x, v.y, v.z)
        }
        match self {
            AnalyticFn::Gaussian { center, width, amplitude } => {
                write!(f, "gaussian(c={};w={};a={})", vec(center), width, amplitude)
            }
            AnalyticFn::Bump { center, radius, amplitude } => {
                write!(f, "bump(c={};r={};a={})", vec(center), radius, amplitude)
            }
            AnalyticFn::Constant(c) => write!(f, "const({c})"),
            AnalyticFn::Modulated { inner, wavevector, phase } => {
                write!(f, "modulate(k={};phase={};{})", vec(wavevector), phase, inner)
            }
            AnalyticFn::Dilation { inner, lambda } => write!(f, "dilate({lambda};{inner})"),
            AnalyticFn::Translation { inner, shift } => {
                write!(f, "translate({};{})", vec(shift), inner)
            }
            AnalyticFn::Scaled { inner, factor } => write!(f, "{factor}*({inner})"),
            AnalyticFn::Sum(v) => {
                if v.is_empty() {
                    return write!(f, "const(0)");
                }
                for (i, t) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for AnalyticFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut p = Parser { s: cleaned.as_bytes(), pos: 0 };
        let e = p.expr()?;
        if p.pos != p.s.len() {
            return Err(p.err("trailing input"));
        }
        e.validate()?;
        Ok(e)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        let rest = String::from_utf8_lossy(&self.s[self.pos.min(self.s.len())..]);
        Error::Parse(format!("{msg} at offset {} (near `{rest}`)", self.pos))
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<AnalyticFn> {
        let mut terms = vec![self.signed_term(false)?];
        loop {
            if self.eat(b'+') {
                terms.push(self.signed_term(false)?);
            } else if self.eat(b'-') {
                terms.push(self.signed_term(true)?);
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { AnalyticFn::Sum(terms) })
    }

    fn signed_term(&mut self, negate: bool) -> Result<AnalyticFn> {
        let negate = negate ^ self.eat(b'-');
        let t = self.term()?;
        Ok(if negate { t.scale(-1.0) } else { t })
    }

    fn term(&mut self) -> Result<AnalyticFn> {
        if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
            let k = self.number()?;
            self.expect(b'*')?;
            return Ok(self.factor()?.scale(k));
        }
        self.factor()
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic() || c == b'_') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("")
    }

    fn factor(&mut self) -> Result<AnalyticFn> {
        if self.eat(b'(') {
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        let start = self.pos;
        let name = self.ident().to_string();
        match name.as_str() {
            "gaussian" => {
                let mut g = (Vec3::ZERO, 1.0, 1.0);
                if self.eat(b'(') {
                    self.params(|p, key| {
                        match key {
                            "c" => g.0 = p.vec()?,
                            "w" => g.1 = p.number()?,
                            "a" => g.2 = p.number()?,
                            _ => return Err(p.err(&format!("unknown gaussian parameter `{key}`"))),
                        }
                        Ok(())
                    })?;
                }
                Ok(AnalyticFn::gaussian(g.0, g.1, g.2))
            }
            "bump" => {
                let mut b = (Vec3::ZERO, 1.0, 1.0);
                if self.eat(b'(') {
                    self.params(|p, key| {
                        match key {
                            "c" => b.0 = p.vec()?,
                            "r" => b.1 = p.number()?,
                            "a" => b.2 = p.number()?,
                            _ => return Err(p.err(&format!("unknown bump parameter `{key}`"))),
                        }
                        Ok(())
                    })?;
                }
                Ok(AnalyticFn::bump(b.0, b.1, b.2))
            }
            "const" => {
                self.expect(b'(')?;
                let c = self.number()?;
                self.expect(b')')?;
                Ok(AnalyticFn::Constant(c))
            }
            "dilate" => {
                self.expect(b'(')?;
                let l = self.number()?;
                self.expect(b';')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e.dilate(l))
            }
            "translate" => {
                self.expect(b'(')?;
                let m = self.vec()?;
                self.expect(b';')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e.translate(m))
            }
            "modulate" => {
                self.expect(b'(')?;
                let mut k = None;
                let mut phase = 0.0;
                loop {
                    let save = self.pos;
                    let key = self.ident().to_string();
                    if self.eat(b'=') {
                        match key.as_str() {
                            "k" => k = Some(self.vec()?),
                            "phase" => phase = self.number()?,
                            _ => return Err(self.err(&format!("unknown modulate parameter `{key}`"))),
                        }
                        self.expect(b';')?;
                    } else {
                        self.pos = save;
                        break;
                    }
                }
                let k = k.ok_or_else(|| self.err("modulate needs k=..."))?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e.modulated(k, phase))
            }
            "" => Err(self.err("expected a function")),
            other => {
                self.pos = start;
                Err(self.err(&format!("unknown function `{other}`")))
            }
        }
    }

    fn params(&mut self, mut set: impl FnMut(&mut Self, &str) -> Result<()>) -> Result<()> {
        if self.eat(b')') {
            return Ok(());
        }
        loop {
            let key = self.ident().to_string();
            self.expect(b'=')?;
            set(self, &key)?;
            if self.eat(b')') {
                return Ok(());
            }
            self.expect(b';')?;
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        if matches!(self.peek(), Some(b'-') | Some(b'+')) {
            self.pos += 1;
        }
        while let Some(c) = self.peek() {
            let exp_sign = matches!(c, b'-' | b'+') && self.pos > start && matches!(self.s[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        let v: f64 = text.parse().map_err(|_| {
            self.pos = start;
            self.err("expected a number")
        })?;
        // Allow a fraction such as 1/2.
        if self.peek() == Some(b'/') && matches!(self.s.get(self.pos + 1), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
            let d = self.number()?;
            return Ok(v / d);
        }
        Ok(v)
    }

    fn vec(&mut self) -> Result<Vec3> {
        let x = self.number()?;
        self.expect(b',')?;
        let y = self.number()?;
        self.expect(b',')?;
        let z = self.number()?;
        Ok(Vec3::new(x, y, z))
    }
}
