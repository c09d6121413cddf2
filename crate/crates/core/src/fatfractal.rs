//! Fat fractal statistics: cube counts, the normalized martingale, Lebesgue
//! measure of the level sets, the three product criteria and the digit shift.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::exact::to_f64;
use crate::index::CubeIndex;
use crate::models::grid::Grid;
use crate::models::spec::{children_per_cube, RetentionSchedule, TailRule};

/// Statistics of one level `m` of a fat realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FatLevel {
    pub m: u32,
    /// Retained level-`m` cubes.
    pub z: u64,
    /// `Z_m N^(-dm)`.
    pub lambda: f64,
    /// `Z_m / prod_{i <= m} (p_i N^d)`.
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FatStats {
    /// Levels `0..=n`.
    pub levels: Vec<FatLevel>,
    pub extinct: bool,
}

impl FatStats {
    pub fn at(&self, m: u32) -> &FatLevel {
        &self.levels[m as usize]
    }
}

/// `Z_m`, `lambda_m` and `W_m` for `m = 0..=n`.
///
/// `lambda_m = (prod_{i <= m} p_i) W_m` is checked in exact rational
/// arithmetic for every level; a mismatch is reported as an error.
pub fn fat_statistics(g: &Grid, sched: &RetentionSchedule) -> Result<FatStats> {
    if !g.has_tree() {
        return Err(Error::MissingTree);
    }
    sched.validate()?;
    let children = children_per_cube(g.base(), g.dim())?;
    let mut levels = Vec::with_capacity(g.depth() as usize + 1);
    let mut volume = BigInt::from(1u32);
    let mut product = BigRational::from_integer(1.into());
    for m in 0..=g.depth() {
        if m > 0 {
            volume *= children;
            product *= crate::models::spec::exact_f64(sched.p(m));
        }
        let z = g.count_at(m)? as u64;
        let z_exact = BigRational::from_integer(z.into());
        let lambda = &z_exact / BigRational::from_integer(volume.clone());
        let w = if z == 0 { BigRational::zero() } else { &lambda / &product };
        if lambda != &product * &w {
            return param(format!("measure identity fails at level {m}"));
        }
        levels.push(FatLevel { m, z, lambda: to_f64(&lambda), w: to_f64(&w) });
    }
    let extinct = levels.last().is_some_and(|l| l.z == 0);
    Ok(FatStats { levels, extinct })
}

/// Replicate means of `W_m` and `lambda_m`, overall and over the replicates
/// that survive to level `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FatSummary {
    pub replicates: usize,
    pub survivors: usize,
    pub mean_w: Vec<f64>,
    pub se_w: Vec<f64>,
    pub mean_lambda: Vec<f64>,
    pub se_lambda: Vec<f64>,
    /// Means over survivors only; empty when there are none.
    pub survivor_mean_w: Vec<f64>,
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(stats: &[FatStats]) -> Result<FatSummary> {
    let first = stats.first().ok_or_else(|| Error::Parameter("no replicates".into()))?;
    let depth = first.levels.len();
    if stats.iter().any(|s| s.levels.len() != depth) {
        return param("replicates have different depths");
    }
    let survivors: Vec<&FatStats> = stats.iter().filter(|s| !s.extinct).collect();
    let mut out = FatSummary {
        replicates: stats.len(),
        survivors: survivors.len(),
        mean_w: Vec::new(),
        se_w: Vec::new(),
        mean_lambda: Vec::new(),
        se_lambda: Vec::new(),
        survivor_mean_w: Vec::new(),
    };
    for m in 0..depth {
        let (mw, sw) = mean_se(stats.iter().map(|s| s.levels[m].w));
        let (ml, sl) = mean_se(stats.iter().map(|s| s.levels[m].lambda));
        out.mean_w.push(mw);
        out.se_w.push(sw);
        out.mean_lambda.push(ml);
        out.se_lambda.push(sl);
        if !survivors.is_empty() {
            out.survivor_mean_w.push(mean_se(survivors.iter().map(|s| s.levels[m].w)).0);
        }
    }
    Ok(out)
}

/// Limit behaviour of an infinite product as decided from the tail rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Limit {
    Positive,
    Zero,
    /// The tail parameters sit within the tolerance of the convergence
    /// boundary without being on it.
    UndeterminedAtHorizon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCriteria {
    /// `ln Pi_1(n) = sum_{i <= n} ln p_i` for `n = 1..=horizon`.
    pub log_pi1: Vec<f64>,
    /// `ln Pi_2(n) = sum_{i <= n} N^i ln p_i`.
    pub log_pi2: Vec<f64>,
    /// `ln Pi_3(n) = sum_{i <= n} N^(di) ln p_i`.
    pub log_pi3: Vec<f64>,
    pub pi1: Limit,
    pub pi2: Limit,
    pub pi3: Limit,
}

/// Neumaier-compensated running sums.
fn compensated_prefix_sums(terms: impl Iterator<Item = f64>) -> Vec<f64> {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    terms
        .map(|t| {
            let s = sum + t;
            if !s.is_finite() {
                sum = s;
                return s;
            }
            comp += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
            sum = s;
            sum + comp
        })
        .collect()
}

/// Whether `sum_i r^i` converges, with `r = ratio`: below the boundary by
/// more than `tol` converges, at or above it diverges.
fn geometric_limit(ratio: f64, tol: f64) -> Limit {
    if ratio >= 1.0 {
        Limit::Zero
    } else if 1.0 - ratio <= tol {
        Limit::UndeterminedAtHorizon
    } else {
        Limit::Positive
    }
}

/// Partial products in log domain and their limits.
///
/// A product `prod p_i^(a_i)` with `p_i -> 1` has a positive limit exactly
/// when `sum a_i (1 - p_i)` is finite; for the closed-form tails this series
/// is geometric or a p-series and is decided analytically. `tail_tol` marks
/// parameters within that distance of the boundary (excluding the boundary
/// itself) as undetermined.
pub fn schedule_products(
    sched: &RetentionSchedule,
    base: u32,
    dim: u32,
    horizon: u32,
    tail_tol: f64,
) -> Result<ScheduleCriteria> {
    crate::index::check_geometry(base, dim)?;
    sched.validate()?;
    if horizon == 0 {
        return param("horizon must be at least 1");
    }
    if tail_tol.is_nan() || tail_tol < 0.0 {
        return param(format!("tail tolerance {tail_tol} must be non-negative"));
    }
    let logs: Vec<f64> = (1..=horizon).map(|i| (-sched.complement(i)).ln_1p()).collect();
    let weighted = |scale: f64| {
        compensated_prefix_sums(logs.iter().zip(1..).map(move |(&l, i)| {
            if l == 0.0 {
                0.0
            } else {
                scale.powi(i) * l
            }
        }))
    };
    let n = base as f64;
    let nd = n.powi(dim as i32);

    let (pi1, pi2, pi3) = match sched.tail {
        TailRule::Constant(1.0) => (Limit::Positive, Limit::Positive, Limit::Positive),
        TailRule::Constant(_) => (Limit::Zero, Limit::Zero, Limit::Zero),
        TailRule::GeometricComplement { c, .. } | TailRule::PowerComplement { c, .. } if c == 0.0 => {
            (Limit::Positive, Limit::Positive, Limit::Positive)
        }
        TailRule::GeometricComplement { q, .. } => {
            (geometric_limit(q, tail_tol), geometric_limit(n * q, tail_tol), geometric_limit(nd * q, tail_tol))
        }
        TailRule::PowerComplement { alpha, .. } => {
            let pi1 = if alpha <= 1.0 {
                Limit::Zero
            } else if alpha - 1.0 <= tail_tol {
                Limit::UndeterminedAtHorizon
            } else {
                Limit::Positive
            };
            (pi1, Limit::Zero, Limit::Zero)
        }
    };
    Ok(ScheduleCriteria {
        log_pi1: weighted(1.0),
        log_pi2: weighted(n),
        log_pi3: weighted(nd),
        pi1,
        pi2,
        pi3,
    })
}

/// Levels `m` at which some retained level-`(m-1)` cube loses a child,
/// i.e. `Z_m < N^d Z_{m-1}`.
pub fn change_step_stats(g: &Grid) -> Result<Vec<u32>> {
    if !g.has_tree() {
        return Err(Error::MissingTree);
    }
    let children = children_per_cube(g.base(), g.dim())? as u64;
    let mut out = Vec::new();
    for m in 1..=g.depth() {
        if (g.count_at(m)? as u64) < children * g.count_at(m - 1)? as u64 {
            out.push(m);
        }
    }
    Ok(out)
}

/// The first `h` base-`N` digit tuples of a point of `[0, 1)^d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointDigits {
    #[serde(rename = "N")]
    pub base: u32,
    pub d: u32,
    /// `digits[j]` is the tuple of `j + 1`-th digits, one per coordinate.
    pub digits: Vec<Vec<u32>>,
}

impl PointDigits {
    pub fn new(base: u32, d: u32, digits: Vec<Vec<u32>>) -> Result<Self> {
        crate::index::check_geometry(base, d)?;
        if digits.is_empty() {
            return param("digit stream needs horizon at least 1");
        }
        for t in &digits {
            if t.len() != d as usize || t.iter().any(|&x| x >= base) {
                return param(format!("digit tuple {t:?} is not in {{0..{}}}^{d}", base - 1));
            }
        }
        Ok(PointDigits { base, d, digits })
    }

    /// Exact expansion of a rational point of `[0, 1)^d`.
    pub fn from_point(x: &[Ratio<u64>], base: u32, horizon: u32) -> Result<Self> {
        let d = x.len() as u32;
        if x.iter().any(|c| *c.numer() >= *c.denom()) {
            return param("point must lie in [0, 1)^d");
        }
        let mut rest: Vec<Ratio<u128>> =
            x.iter().map(|c| Ratio::new(*c.numer() as u128, *c.denom() as u128)).collect();
        let mut digits = Vec::with_capacity(horizon as usize);
        for _ in 0..horizon {
            let tuple = rest
                .iter_mut()
                .map(|r| {
                    let scaled = *r * base as u128;
                    let digit = scaled.to_integer();
                    *r = scaled - digit;
                    digit.to_u32().expect("digit below base")
                })
                .collect();
            digits.push(tuple);
        }
        PointDigits::new(base, d, digits)
    }

    pub fn horizon(&self) -> u32 {
        self.digits.len() as u32
    }

    /// The level-`h` cube whose half-open interior contains the point.
    pub fn cube_index(&self) -> Result<CubeIndex> {
        CubeIndex::from_tuples(self.base, self.d, &self.digits)
    }
}

/// Drops the first `steps` digit tuples: the position of the point relative
/// to its level-`steps` cube, rescaled to the unit cube.
pub fn shift_transform(p: &PointDigits, steps: u32) -> Result<PointDigits> {
    if steps == 0 || steps >= p.horizon() {
        return param(format!("shift by {steps} needs 0 < steps < horizon {}", p.horizon()));
    }
    Ok(PointDigits { base: p.base, d: p.d, digits: p.digits[steps as usize..].to_vec() })
}
