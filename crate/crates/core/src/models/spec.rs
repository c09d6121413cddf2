//! Model descriptors: generator distributions, retention schedules, and the
//! tag + parameters carried by every grid.
//!
//! Generators and schedules have a compact text form used by the CLI, by
//! config files and inside serialized grids:
//!
//! ```text
//! generator := "constant:" K | "binomial:" P | "pmf:" Y "=" W ("," Y "=" W)*
//! schedule  := [P ("," P)* ";"] tail
//! tail      := "const:" V
//!            | "geometric-complement:" C ":" Q     (p_n = 1 - C * Q^n)
//!            | "power-complement:" C ":" ALPHA     (p_n = 1 - C * n^-ALPHA)
//! ```
//!
//! The tail applies to every level past the explicit prefix and is evaluated
//! at the absolute level `n`.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::error::{param, Error, Result};
use crate::exact::binomial_pmf_exact;

const PMF_TOLERANCE: f64 = 1e-12;

/// Distribution of the number of retained children per retained cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GeneratorSpec {
    Constant(u32),
    /// `Bin(N^d, p)`; the trial count comes from the grid geometry.
    Binomial(f64),
    /// Weights indexed by child count, `weights[y] = P(Y = y)`.
    Pmf(Vec<f64>),
}

impl GeneratorSpec {
    pub fn validate(&self, children: u32) -> Result<()> {
        match self {
            GeneratorSpec::Constant(k) if *k > children => {
                param(format!("constant generator {k} exceeds N^d = {children}"))
            }
            GeneratorSpec::Binomial(p) if !(0.0..=1.0).contains(p) => {
                param(format!("binomial parameter {p} outside [0, 1]"))
            }
            GeneratorSpec::Pmf(w) => {
                if w.len() > children as usize + 1 {
                    return param(format!("pmf has support beyond N^d = {children}"));
                }
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return param("pmf weights must be finite and non-negative");
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > PMF_TOLERANCE {
                    return param(format!("pmf sums to {total}, not 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `P(Y = y)` for `y = 0..=children`.
    pub fn pmf(&self, children: u32) -> Vec<f64> {
        let len = children as usize + 1;
        match self {
            GeneratorSpec::Constant(k) => {
                let mut v = vec![0.0; len];
                v[*k as usize] = 1.0;
                v
            }
            GeneratorSpec::Binomial(p) => {
                let b = Binomial::new(*p, children as u64).expect("validated binomial");
                (0..len as u64).map(|y| b.pmf(y)).collect()
            }
            GeneratorSpec::Pmf(w) => {
                let mut v = w.clone();
                v.resize(len, 0.0);
                v
            }
        }
    }

    /// Exact pmf, reading each floating-point parameter as the exact binary
    /// rational it denotes.
    pub fn pmf_exact(&self, children: u32) -> Vec<BigRational> {
        match self {
            GeneratorSpec::Binomial(p) => binomial_pmf_exact(children, &exact_f64(*p)),
            _ => self.pmf(children).into_iter().map(exact_f64).collect(),
        }
    }

    /// Inverse-CDF sampler built once per grid.
    pub fn sampler(&self, children: u32) -> CountSampler {
        CountSampler::new(&self.pmf(children))
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Constant(k) => write!(f, "constant:{k}"),
            GeneratorSpec::Binomial(p) => write!(f, "binomial:{p}"),
            GeneratorSpec::Pmf(w) => {
                let parts: Vec<String> = w
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| **x > 0.0)
                    .map(|(y, x)| format!("{y}={x}"))
                    .collect();
                write!(f, "pmf:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parameter(format!("generator `{s}` lacks a `kind:` prefix")))?;
        match kind.trim() {
            "constant" => Ok(GeneratorSpec::Constant(parse_num(rest, "constant generator")?)),
            "binomial" => Ok(GeneratorSpec::Binomial(parse_num(rest, "binomial parameter")?)),
            "pmf" => {
                let mut weights = Vec::new();
                for entry in rest.split(',').filter(|e| !e.trim().is_empty()) {
                    let (y, w) = entry
                        .split_once(['=', ':'])
                        .ok_or_else(|| Error::Parameter(format!("pmf entry `{entry}` is not y=w")))?;
                    let y: usize = parse_num(y, "pmf support point")?;
                    let w: f64 = parse_num(w, "pmf weight")?;
                    if weights.len() <= y {
                        weights.resize(y + 1, 0.0);
                    }
                    weights[y] += w;
                }
                Ok(GeneratorSpec::Pmf(weights))
            }
            other => param(format!("unknown generator kind `{other}`")),
        }
    }
}

impl TryFrom<String> for GeneratorSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GeneratorSpec> for String {
    fn from(g: GeneratorSpec) -> String {
        g.to_string()
    }
}

/// Inverse-CDF lookup of a child count from one uniform.
#[derive(Clone, Debug)]
pub struct CountSampler {
    cdf: Vec<f64>,
    last_positive: u32,
}

impl CountSampler {
    pub fn new(pmf: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let last_positive = pmf.iter().rposition(|w| *w > 0.0).unwrap_or(0) as u32;
        CountSampler { cdf, last_positive }
    }

    /// Smallest `y` with `u < F(y)`.
    pub fn draw(&self, u: f64) -> u32 {
        self.cdf
            .iter()
            .position(|&c| u < c)
            .map_or(self.last_positive, |y| y as u32)
            .min(self.last_positive)
    }
}

/// Rule for `p_n` beyond the explicit prefix.
#[derive(Clone, Debug, PartialEq)]
pub enum TailRule {
    Constant(f64),
    /// `p_n = 1 - c * q^n`.
    GeometricComplement { c: f64, q: f64 },
    /// `p_n = 1 - c * n^(-alpha)`.
    PowerComplement { c: f64, alpha: f64 },
}

impl TailRule {
    fn complement(&self, n: u32) -> f64 {
        match *self {
            TailRule::Constant(v) => 1.0 - v,
            TailRule::GeometricComplement { c, q } => c * q.powi(n as i32),
            TailRule::PowerComplement { c, alpha } => c * (n as f64).powf(-alpha),
        }
    }
}

/// Non-decreasing retention probabilities `(p_n)_{n >= 1}` in `(0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RetentionSchedule {
    pub prefix: Vec<f64>,
    pub tail: TailRule,
}

impl RetentionSchedule {
    pub fn constant(p: f64) -> Self {
        RetentionSchedule { prefix: Vec::new(), tail: TailRule::Constant(p) }
    }

    pub fn geometric_complement(c: f64, q: f64) -> Self {
        RetentionSchedule { prefix: Vec::new(), tail: TailRule::GeometricComplement { c, q } }
    }

    /// `1 - p_n`, computed without cancellation for the closed-form tails.
    pub fn complement(&self, n: u32) -> f64 {
        assert!(n >= 1, "levels start at 1");
        match self.prefix.get(n as usize - 1) {
            Some(p) => 1.0 - p,
            None => self.tail.complement(n),
        }
    }

    pub fn p(&self, n: u32) -> f64 {
        assert!(n >= 1, "levels start at 1");
        match self.prefix.get(n as usize - 1) {
            Some(p) => *p,
            None => match self.tail {
                TailRule::Constant(v) => v,
                _ => 1.0 - self.tail.complement(n),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.tail {
            TailRule::Constant(v) if !(v > 0.0 && v <= 1.0) => {
                return param(format!("constant tail {v} outside (0, 1]"));
            }
            TailRule::GeometricComplement { c, q } if !(c >= 0.0 && q > 0.0 && q < 1.0) => {
                return param(format!("geometric-complement needs c >= 0 and 0 < q < 1, got c={c}, q={q}"));
            }
            TailRule::PowerComplement { c, alpha } if !(c >= 0.0 && alpha > 0.0) => {
                return param(format!("power-complement needs c >= 0 and alpha > 0, got c={c}, alpha={alpha}"));
            }
            _ => {}
        }
        // The closed-form tails are non-decreasing, so checking the prefix and
        // the first tail level covers every n.
        let upto = self.prefix.len() as u32 + 1;
        let mut prev = 0.0;
        for n in 1..=upto {
            let p = self.p(n);
            if !(p > 0.0 && p <= 1.0) {
                return param(format!("p_{n} = {p} outside (0, 1]"));
            }
            if p < prev {
                return param(format!("schedule decreases at level {n} ({prev} -> {p})"));
            }
            prev = p;
        }
        Ok(())
    }

    /// `prod_{i <= n} p_i` as an exact rational of the floating-point values.
    pub fn partial_product_exact(&self, n: u32) -> BigRational {
        (1..=n).fold(BigRational::one(), |acc, i| acc * exact_f64(self.p(i)))
    }
}

impl fmt::Display for TailRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailRule::Constant(v) => write!(f, "const:{v}"),
            TailRule::GeometricComplement { c, q } => write!(f, "geometric-complement:{c}:{q}"),
            TailRule::PowerComplement { c, alpha } => write!(f, "power-complement:{c}:{alpha}"),
        }
    }
}

impl FromStr for TailRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["const", v] => Ok(TailRule::Constant(parse_num(v, "constant tail")?)),
            ["geometric-complement", c, q] => Ok(TailRule::GeometricComplement {
                c: parse_num(c, "tail c")?,
                q: parse_num(q, "tail q")?,
            }),
            ["power-complement", c, a] => Ok(TailRule::PowerComplement {
                c: parse_num(c, "tail c")?,
                alpha: parse_num(a, "tail alpha")?,
            }),
            _ => param(format!(
                "unknown tail `{s}` (expected const:V, geometric-complement:C:Q or power-complement:C:ALPHA)"
            )),
        }
    }
}

impl fmt::Display for RetentionSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.prefix.is_empty() {
            let parts: Vec<String> = self.prefix.iter().map(f64::to_string).collect();
            write!(f, "{};", parts.join(","))?;
        }
        write!(f, "{}", self.tail)
    }
}

impl FromStr for RetentionSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (prefix, tail) = match s.rsplit_once(';') {
            Some((p, t)) => (p, t),
            None => ("", s),
        };
        let prefix = prefix
            .split(',')
            .filter(|x| !x.trim().is_empty())
            .map(|x| parse_num(x, "schedule prefix"))
            .collect::<Result<Vec<f64>>>()?;
        Ok(RetentionSchedule { prefix, tail: tail.parse()? })
    }
}

impl TryFrom<String> for RetentionSchedule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RetentionSchedule> for String {
    fn from(s: RetentionSchedule) -> String {
        s.to_string()
    }
}

/// Model tag and parameters carried by a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Model {
    Mfp { p: f64 },
    K { k: u32 },
    Gfp { generator: GeneratorSpec },
    Fat { schedule: RetentionSchedule },
    /// Dominating grid of the coupled pair: child counts drawn from the
    /// truncated conditional law of m-good children.
    Truncated { p0: f64, k: u32, m_trunc: u32 },
    /// Cells supplied directly rather than sampled.
    Explicit,
}

impl Model {
    pub fn tag(&self) -> u8 {
        match self {
            Model::Explicit => 0,
            Model::Mfp { .. } => 1,
            Model::K { .. } => 2,
            Model::Gfp { .. } => 3,
            Model::Fat { .. } => 4,
            Model::Truncated { .. } => 5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Explicit => "explicit",
            Model::Mfp { .. } => "mfp",
            Model::K { .. } => "k",
            Model::Gfp { .. } => "gfp",
            Model::Fat { .. } => "fat",
            Model::Truncated { .. } => "truncated",
        }
    }

    /// Short parameter string for tables, e.g. `k=3` or `p=0.7`.
    pub fn parameter(&self) -> String {
        match self {
            Model::Explicit => String::new(),
            Model::Mfp { p } => format!("p={p}"),
            Model::K { k } => format!("k={k}"),
            Model::Gfp { generator } => format!("generator={generator}"),
            Model::Fat { schedule } => format!("schedule={schedule}"),
            Model::Truncated { p0, k, m_trunc } => format!("p0={p0};k={k};m={m_trunc}"),
        }
    }

    pub fn validate(&self, base: u32, dim: u32) -> Result<()> {
        crate::index::check_geometry(base, dim)?;
        let children = children_per_cube(base, dim)?;
        match self {
            Model::Mfp { p } if !(0.0..=1.0).contains(p) => param(format!("p = {p} outside [0, 1]")),
            Model::K { k } if *k == 0 || *k > children => {
                param(format!("k = {k} outside 1..={children}"))
            }
            Model::Gfp { generator } => generator.validate(children),
            Model::Fat { schedule } => schedule.validate(),
            Model::Truncated { p0, k, .. } => {
                if !(0.0..=1.0).contains(p0) {
                    return param(format!("p0 = {p0} outside [0, 1]"));
                }
                if *k == 0 || *k > children {
                    return param(format!("k = {k} outside 1..={children}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// `N^d` as a `u32`.
pub fn children_per_cube(base: u32, dim: u32) -> Result<u32> {
    base.checked_pow(dim)
        .filter(|&m| m <= 1 << 20)
        .map_or_else(|| param(format!("N^d = {base}^{dim} is too large")), Ok)
}

/// The exact binary rational denoted by a finite `f64`.
pub fn exact_f64(x: f64) -> BigRational {
    if x == 0.0 {
        return BigRational::zero();
    }
    BigRational::from_float(x).expect("finite probability")
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("{what}: cannot parse `{}`", s.trim())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_text_round_trip() {
        for s in ["constant:3", "binomial:0.7", "pmf:0=0.25,4=0.75"] {
            let g: GeneratorSpec = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        assert!("gamma:1".parse::<GeneratorSpec>().is_err());
    }

    #[test]
    fn pmf_validation() {
        assert!(GeneratorSpec::Pmf(vec![0.5, 0.4]).validate(4).is_err());
        assert!(GeneratorSpec::Pmf(vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).validate(4).is_err());
        assert!(GeneratorSpec::Pmf(vec![0.0, 0.0, 0.0, 0.0, 1.0]).validate(4).is_ok());
        assert!(GeneratorSpec::Constant(5).validate(4).is_err());
        assert!(GeneratorSpec::Binomial(1.5).validate(4).is_err());
    }

    #[test]
    fn inverse_cdf_draws() {
        let s = CountSampler::new(&[0.25, 0.0, 0.75]);
        assert_eq!(s.draw(0.0), 0);
        assert_eq!(s.draw(0.2499), 0);
        assert_eq!(s.draw(0.25), 2);
        assert_eq!(s.draw(0.999_999), 2);
        let certain = CountSampler::new(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(certain.draw(0.0), 4);
    }

    #[test]
    fn schedule_text_and_values() {
        let s: RetentionSchedule = "0.5,0.6;geometric-complement:0.5:0.5".parse().unwrap();
        assert_eq!(s.p(1), 0.5);
        assert_eq!(s.p(2), 0.6);
        assert_eq!(s.p(3), 1.0 - 0.5 * 0.125);
        assert_eq!(s.to_string(), "0.5,0.6;geometric-complement:0.5:0.5");
        s.validate().unwrap();

        let g = RetentionSchedule::geometric_complement(1.0, 1.0 / 16.0);
        assert_eq!(g.complement(14), 16f64.powi(-14));
        assert_eq!(g.p(1), 1.0 - 1.0 / 16.0);
    }

    #[test]
    fn schedule_validation() {
        assert!("0.9,0.8;const:1".parse::<RetentionSchedule>().unwrap().validate().is_err());
        assert!("const:0".parse::<RetentionSchedule>().unwrap().validate().is_err());
        assert!("geometric-complement:4:0.5".parse::<RetentionSchedule>().unwrap().validate().is_err());
        assert!("0.99;const:0.5".parse::<RetentionSchedule>().unwrap().validate().is_err());
        assert!("power-complement:0.5:2".parse::<RetentionSchedule>().unwrap().validate().is_ok());
    }

    #[test]
    fn model_json_is_tagged() {
        let m = Model::Fat { schedule: RetentionSchedule::constant(0.9) };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"model":"fat","schedule":"const:0.9"}"#);
        assert_eq!(serde_json::from_str::<Model>(&s).unwrap(), m);
    }
}
