//! Monte Carlo crossing estimates, critical-value sweeps and the exact
//! enumeration oracle.

use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::connectivity::{gamma_event, set_crosses, UnionFind};
use crate::error::{param, Error, Result};
use crate::exact::binomial_row;
use crate::index::{adjacency_offsets, BoxShape};
use crate::models::grid::{level_shape, CellSet};
use crate::models::sample::{sample_fat, sample_k, sample_model, Expander};
use crate::models::spec::{children_per_cube, exact_f64, Model, RetentionSchedule};
use crate::rng::{mix64, replicate_seed, stream_uniform};

/// Version of the CSV and JSON result layouts.
pub const SCHEMA_VERSION: u32 = 1;

/// Fixed CSV column order.
pub const CSV_HEADER: [&str; 8] = ["model", "param", "n", "estimate", "ci_low", "ci_high", "replicates", "seed"];

/// Exact `(1 - level)` Clopper–Pearson interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let alpha = 1.0 - level;
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).expect("positive shape").inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).expect("positive shape").inverse_cdf(1.0 - alpha / 2.0)
    };
    let point = x / n;
    (lo.clamp(0.0, point), hi.clamp(point, 1.0))
}

/// Binomial proportion with its confidence interval and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub model: String,
    pub param: String,
    #[serde(rename = "N")]
    pub base: u32,
    pub d: u32,
    pub n: u32,
    pub point: f64,
    pub successes: u64,
    pub replicates: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub seed: u64,
}

/// One CSV row, in [`CSV_HEADER`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub model: String,
    pub param: String,
    pub n: u32,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: u64,
    pub seed: u64,
}

impl Estimate {
    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        model: impl Into<String>,
        param: impl Into<String>,
        base: u32,
        d: u32,
        n: u32,
        successes: u64,
        replicates: u64,
        seed: u64,
    ) -> Self {
        Self::with_confidence(model, param, base, d, n, successes, replicates, seed, 0.95)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_confidence(
        model: impl Into<String>,
        param: impl Into<String>,
        base: u32,
        d: u32,
        n: u32,
        successes: u64,
        replicates: u64,
        seed: u64,
        confidence: f64,
    ) -> Self {
        let (ci_low, ci_high) = clopper_pearson(successes, replicates, confidence);
        Estimate {
            model: model.into(),
            param: param.into(),
            base,
            d,
            n,
            point: successes as f64 / replicates as f64,
            successes,
            replicates,
            ci_low,
            ci_high,
            confidence,
            seed,
        }
    }

    /// Same counts, interval at another confidence level.
    pub fn at_confidence(&self, confidence: f64) -> Self {
        let mut e = self.clone();
        (e.ci_low, e.ci_high) = clopper_pearson(self.successes, self.replicates, confidence);
        e.confidence = confidence;
        e
    }

    /// Standard error of the proportion.
    pub fn se(&self) -> f64 {
        (self.point * (1.0 - self.point) / self.replicates as f64).sqrt()
    }

    pub fn row(&self) -> EstimateRow {
        EstimateRow {
            model: self.model.clone(),
            param: self.param.clone(),
            n: self.n,
            estimate: self.point,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
            replicates: self.replicates,
            seed: self.seed,
        }
    }
}

fn check_replicates(replicates: u64) -> Result<()> {
    if replicates == 0 {
        return param("replicates must be at least 1");
    }
    Ok(())
}

/// Per-replicate crossing indicators along `axis`; replicate `r` is sampled
/// with `replicate_seed(seed, r)`.
pub fn crossing_indicators(
    model: &Model,
    base: u32,
    dim: u32,
    n: u32,
    replicates: u64,
    seed: u64,
    axis: usize,
) -> Result<Vec<bool>> {
    check_replicates(replicates)?;
    model.validate(base, dim)?;
    if axis >= dim as usize {
        return param(format!("axis {axis} outside 0..{dim}"));
    }
    level_shape(base, dim, n)?;
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let g = sample_model(model, base, dim, n, replicate_seed(seed, r))?;
            Ok(set_crosses(g.cells(), axis))
        })
        .collect()
}

/// Fraction of replicates whose level-`n` set crosses along `axis`.
pub fn estimate_crossing(
    model: &Model,
    base: u32,
    dim: u32,
    n: u32,
    replicates: u64,
    seed: u64,
    axis: usize,
) -> Result<Estimate> {
    let hits = crossing_indicators(model, base, dim, n, replicates, seed, axis)?;
    let successes = hits.iter().filter(|&&h| h).count() as u64;
    Ok(Estimate::from_counts(model.name(), model.parameter(), base, dim, n, successes, replicates, seed))
}

/// Model with exact rational parameters for enumeration.
#[derive(Clone, Debug, PartialEq)]
pub enum ExactModel {
    K(u32),
    Mfp(BigRational),
    /// `P(Y = y)` for `y = 0..=N^d`.
    Gfp(Vec<BigRational>),
    /// `p_1, ..., p_n`.
    Fat(Vec<BigRational>),
}

impl ExactModel {
    /// Reads the floating-point parameters of `model` as exact binary rationals.
    pub fn from_model(model: &Model, base: u32, dim: u32, n: u32) -> Result<Self> {
        model.validate(base, dim)?;
        let children = children_per_cube(base, dim)?;
        Ok(match model {
            Model::K { k } => ExactModel::K(*k),
            Model::Mfp { p } => ExactModel::Mfp(exact_f64(*p)),
            Model::Gfp { generator } => {
                // Floating-point weights need not sum to exactly 1.
                let pmf = generator.pmf_exact(children);
                let total = pmf.iter().fold(BigRational::zero(), |a, b| a + b);
                ExactModel::Gfp(pmf.into_iter().map(|w| w / &total).collect())
            }
            Model::Fat { schedule } => ExactModel::Fat((1..=n).map(|m| exact_f64(schedule.p(m))).collect()),
            _ => return param(format!("model `{}` has no enumeration oracle", model.name())),
        })
    }

    /// Probability of one particular child subset of size `size` at `level`.
    fn subset_weight(&self, children: u32, level: u32, size: u32, choose: &[BigRational]) -> BigRational {
        let bernoulli = |p: &BigRational| {
            let q = BigRational::one() - p;
            pow(p, size) * pow(&q, children - size)
        };
        match self {
            ExactModel::K(k) => {
                if size == *k {
                    choose[size as usize].recip()
                } else {
                    BigRational::zero()
                }
            }
            ExactModel::Mfp(p) => bernoulli(p),
            ExactModel::Gfp(pmf) => pmf.get(size as usize).cloned().unwrap_or_else(BigRational::zero) / &choose[size as usize],
            ExactModel::Fat(ps) => bernoulli(&ps[level as usize - 1]),
        }
    }

    fn validate(&self, children: u32, n: u32) -> Result<()> {
        let in_unit = |p: &BigRational| *p >= BigRational::zero() && *p <= BigRational::one();
        match self {
            ExactModel::K(k) if *k == 0 || *k > children => param(format!("k = {k} outside 1..={children}")),
            ExactModel::Mfp(p) if !in_unit(p) => param(format!("p = {p} outside [0, 1]")),
            ExactModel::Gfp(pmf) => {
                if pmf.len() > children as usize + 1 || !pmf.iter().all(in_unit) {
                    return param("generator pmf must have entries in [0, 1] on 0..=N^d");
                }
                if pmf.iter().fold(BigRational::zero(), |a, b| a + b) != BigRational::one() {
                    return param("generator pmf must sum to exactly 1");
                }
                Ok(())
            }
            ExactModel::Fat(ps) => {
                if ps.len() < n as usize || !ps.iter().all(in_unit) {
                    return param(format!("fat schedule needs {n} probabilities in [0, 1]"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn pow(x: &BigRational, e: u32) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * x)
}

/// Maximum number of retained-tree configurations [`enumerate_exact`] visits.
pub const ENUMERATION_BOUND: u64 = 10_000_000;

/// Number of retained-tree configurations of positive probability.
pub fn configuration_count(model: &ExactModel, base: u32, dim: u32, n: u32) -> Result<BigUint> {
    let children = children_per_cube(base, dim)?;
    let choose = binomial_row(children);
    let choose_r: Vec<BigRational> = choose.iter().map(|c| BigRational::from_integer(c.clone())).collect();
    let mut t = BigUint::one();
    let cap = BigUint::from(ENUMERATION_BOUND) * 2u32;
    for level in (1..=n).rev() {
        let mut next = BigUint::zero();
        for size in 0..=children {
            if model.subset_weight(children, level, size, &choose_r).is_zero() {
                continue;
            }
            let subsets = choose[size as usize].to_biguint().expect("binomial is non-negative");
            // Saturate: anything past twice the bound is reported as is.
            let power = if t > cap && size > 1 { cap.clone() } else { t.pow(size) };
            next += subsets * power;
        }
        t = next;
    }
    Ok(t)
}

/// Exact crossing probability along axis 0 at level `n`, summing the
/// probability of every retained tree whose level-`n` set crosses.
pub fn enumerate_exact(model: &ExactModel, base: u32, dim: u32, n: u32) -> Result<BigRational> {
    crate::index::check_geometry(base, dim)?;
    let children = children_per_cube(base, dim)?;
    model.validate(children, n)?;
    if n == 0 {
        return param("depth n must be at least 1");
    }
    let count = configuration_count(model, base, dim, n)?;
    if count > BigUint::from(ENUMERATION_BOUND) {
        return Err(Error::TooManyConfigurations { count: count.to_string(), bound: ENUMERATION_BOUND });
    }
    let choose: Vec<BigRational> =
        binomial_row(children).into_iter().map(BigRational::from_integer).collect();
    if children > 30 {
        return param(format!("N^d = {children} children is too many to enumerate"));
    }
    // weights[level - 1][size]: probability of retaining one given subset of that size.
    let weights: Vec<Vec<BigRational>> = (1..=n)
        .map(|level| (0..=children).map(|size| model.subset_weight(children, level, size, &choose)).collect())
        .collect();
    let ex = Expander::new(base, dim)?;
    let mut e = Enumerator { base, dim, n, ex, weights, total: BigRational::zero() };
    e.level(1, &[0], BigRational::one())?;
    Ok(e.total)
}

struct Enumerator {
    base: u32,
    dim: u32,
    n: u32,
    ex: Expander,
    weights: Vec<Vec<BigRational>>,
    total: BigRational,
}

impl Enumerator {
    /// Chooses children for every parent at `level - 1`, then recurses.
    fn level(&mut self, level: u32, parents: &[u64], weight: BigRational) -> Result<()> {
        let mut chosen = Vec::new();
        self.assign(level, parents, 0, &mut chosen, weight)
    }

    fn assign(
        &mut self,
        level: u32,
        parents: &[u64],
        i: usize,
        chosen: &mut Vec<u64>,
        weight: BigRational,
    ) -> Result<()> {
        let cshape = level_shape(self.base, self.dim, level)?;
        if i == parents.len() {
            let mut cells = chosen.clone();
            cells.sort_unstable();
            if level == self.n {
                if set_crosses(&CellSet::from_sorted(cshape, cells), 0) {
                    self.total += weight;
                }
                return Ok(());
            }
            return self.level(level + 1, &cells, weight);
        }
        let pshape = level_shape(self.base, self.dim, level - 1)?;
        let parent = pshape.coords(parents[i]);
        for mask in 0u64..1 << self.ex.children {
            let w = &self.weights[level as usize - 1][mask.count_ones() as usize];
            if w.is_zero() {
                continue;
            }
            let before = chosen.len();
            for r in 0..self.ex.children {
                if mask >> r & 1 == 1 {
                    chosen.push(self.ex.child_linear(&parent, r, cshape));
                }
            }
            self.assign(level, parents, i + 1, chosen, &weight * w)?;
            chosen.truncate(before);
        }
        Ok(())
    }
}

/// Per-`k` crossing curve of the k-model and its thresholded critical value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSearchResult {
    #[serde(rename = "N")]
    pub base: u32,
    pub d: u32,
    pub n: u32,
    pub replicates: u64,
    pub seed: u64,
    pub threshold: f64,
    /// Estimates for `k = 1..=N^d`.
    pub estimates: Vec<Estimate>,
    /// Smallest `k` whose estimate exceeds the threshold.
    pub k_hat: Option<u32>,
    /// Per replicate, the smallest `k` at which it crosses.
    pub minimal_k: Vec<u32>,
}

/// Smallest `k` for which the k-model with this seed crosses along axis 0.
///
/// Retained sets grow with `k` under a fixed seed, so crossing is monotone
/// in `k` and a binary search is exact.
pub fn minimal_crossing_k(base: u32, dim: u32, n: u32, seed: u64) -> Result<u32> {
    let children = children_per_cube(base, dim)?;
    let (mut lo, mut hi) = (1u32, children);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if set_crosses(sample_k(mid, base, dim, n, seed)?.cells(), 0) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

pub fn search_kc(base: u32, dim: u32, n: u32, replicates: u64, threshold: f64, seed: u64) -> Result<CriticalSearchResult> {
    check_replicates(replicates)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return param(format!("threshold {threshold} outside (0, 1)"));
    }
    crate::index::check_geometry(base, dim)?;
    level_shape(base, dim, n)?;
    let children = children_per_cube(base, dim)?;
    let minimal_k: Vec<u32> = (0..replicates)
        .into_par_iter()
        .map(|r| minimal_crossing_k(base, dim, n, replicate_seed(seed, r)))
        .collect::<Result<_>>()?;
    let estimates: Vec<Estimate> = (1..=children)
        .map(|k| {
            let hits = minimal_k.iter().filter(|&&m| m <= k).count() as u64;
            Estimate::from_counts("k", format!("k={k}"), base, dim, n, hits, replicates, seed)
        })
        .collect();
    let k_hat = estimates.iter().position(|e| e.point > threshold).map(|i| i as u32 + 1);
    Ok(CriticalSearchResult { base, d: dim, n, replicates, seed, threshold, estimates, k_hat, minimal_k })
}

/// Site percolation sweep on the box `B_M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteSweep {
    pub d: u32,
    pub side: u64,
    pub replicates: u64,
    pub seed: u64,
    pub p_grid: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// Where the interpolated crossing curve reaches 1/2.
    pub crossing_point: Option<f64>,
}

/// Uniform attached to cell `cell` of replicate seed `rs`.
#[inline]
pub fn site_uniform(rs: u64, cell: u64) -> f64 {
    stream_uniform(mix64(rs ^ mix64(cell.wrapping_add(0x5851_F42D_4C95_7F2D))), 0)
}

/// Smallest `p` at which the cells with `site_uniform < p` connect the faces
/// `x_0 = 0` and `x_0 = M - 1`: cells are opened in increasing order of their
/// uniforms until the two faces join. Crossing at `p` holds iff the returned
/// value is `< p`.
pub fn site_threshold(dim: u32, side: u64, rs: u64) -> f64 {
    let shape = BoxShape::new(side, dim);
    let total = shape.total() as usize;
    let mut order: Vec<(f64, u64)> = (0..total as u64).map(|c| (site_uniform(rs, c), c)).collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (low, high) = (total as u32, total as u32 + 1);
    let mut uf = UnionFind::new(total + 2);
    let mut open = vec![false; total];
    let offsets = adjacency_offsets(dim);
    let mut coords = vec![0u64; dim as usize];
    for (u, c) in order {
        open[c as usize] = true;
        shape.coords_into(c, &mut coords);
        if coords[0] == 0 {
            uf.union(c as u32, low);
        }
        if coords[0] == side - 1 {
            uf.union(c as u32, high);
        }
        for off in &offsets {
            let nb: Option<Vec<u64>> = coords
                .iter()
                .zip(off)
                .map(|(&x, &o)| {
                    let v = x as i64 + o;
                    (v >= 0 && (v as u64) < side).then_some(v as u64)
                })
                .collect();
            if let Some(nb) = nb {
                let j = shape.linear(&nb);
                if open[j as usize] {
                    uf.union(c as u32, j as u32);
                }
            }
        }
        if uf.find(low) == uf.find(high) {
            return u;
        }
    }
    1.0
}

/// Crossing curve over `p_grid` with per-cell uniforms shared across `p`.
pub fn estimate_site_pc(dim: u32, side: u64, replicates: u64, p_grid: &[f64], seed: u64) -> Result<SiteSweep> {
    check_replicates(replicates)?;
    if dim < 2 {
        return param(format!("d must be at least 2, got {dim}"));
    }
    if side < 2 {
        return param(format!("box side must be at least 2, got {side}"));
    }
    if (side as u128).pow(dim) >= u32::MAX as u128 - 2 {
        return param("box too large");
    }
    if p_grid.is_empty() || p_grid.windows(2).any(|w| w[0] > w[1]) || p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return param("p grid must be a non-empty sorted list in [0, 1]");
    }
    let thresholds: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| site_threshold(dim, side, replicate_seed(seed, r)))
        .collect();
    let estimates: Vec<Estimate> = p_grid
        .iter()
        .map(|&p| {
            let hits = thresholds.iter().filter(|&&t| t < p).count() as u64;
            Estimate::from_counts("site", format!("M={side};p={p}"), 0, dim, 0, hits, replicates, seed)
        })
        .collect();
    let points: Vec<f64> = estimates.iter().map(|e| e.point).collect();
    let crossing_point = interpolate_half(p_grid, &points);
    Ok(SiteSweep { d: dim, side, replicates, seed, p_grid: p_grid.to_vec(), estimates, crossing_point })
}

/// Where the piecewise-linear curve through `(x_i, y_i)` first reaches 1/2,
/// after making `y` non-decreasing by running maxima.
pub fn interpolate_half(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let mut mono = Vec::with_capacity(ys.len());
    let mut top = f64::NEG_INFINITY;
    for &y in ys {
        top = top.max(y);
        mono.push(top);
    }
    let i = mono.iter().position(|&y| y >= 0.5)?;
    if i == 0 {
        return (mono[0] == 0.5).then_some(xs[0]);
    }
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], mono[i - 1], mono[i]);
    Some(x0 + (0.5 - y0) * (x1 - x0) / (y1 - y0))
}

/// Probability of the four-strip event around `x` under the fat model in `d = 2`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gamma(
    sched: &RetentionSchedule,
    base: u32,
    dim: u32,
    n: u32,
    x: &[Ratio<u64>; 2],
    n_x: u64,
    replicates: u64,
    seed: u64,
) -> Result<Estimate> {
    Ok(gamma_counts(sched, base, dim, n, x, n_x, replicates, seed)?.1)
}

/// Per-replicate indicators and the aggregated estimate.
#[allow(clippy::too_many_arguments)]
pub fn gamma_counts(
    sched: &RetentionSchedule,
    base: u32,
    dim: u32,
    n: u32,
    x: &[Ratio<u64>; 2],
    n_x: u64,
    replicates: u64,
    seed: u64,
) -> Result<(Vec<bool>, Estimate)> {
    check_replicates(replicates)?;
    if dim != 2 {
        return Err(Error::UnsupportedDimension { required: 2, actual: dim });
    }
    // Validate representability once before sampling.
    let probe = crate::models::grid::Grid::empty(base, 2, n)?;
    gamma_event(&probe, x, n_x)?;
    let hits: Vec<bool> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let g = sample_fat(sched, base, 2, n, replicate_seed(seed, r))?;
            gamma_event(&g, x, n_x)
        })
        .collect::<Result<_>>()?;
    let successes = hits.iter().filter(|&&h| h).count() as u64;
    let model = Model::Fat { schedule: sched.clone() };
    let param = format!("{};x=({},{});n_x={n_x}", model.parameter(), x[0], x[1]);
    Ok((hits, Estimate::from_counts("fat", param, base, 2, n, successes, replicates, seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::crossing_in_region;
    use crate::index::ratio;

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(clopper_pearson(0, 10, 0.95).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.95).1, 1.0);
        // Zero successes in n trials: upper bound 1 - (alpha/2)^(1/n).
        let (_, hi) = clopper_pearson(0, 10, 0.95);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-6);
        let (lo, hi) = clopper_pearson(37, 100, 0.95);
        assert!(lo < 0.37 && 0.37 < hi);
        // Reference values for 37/100 at 95%: (0.2755, 0.4723).
        assert!((lo - 0.2755).abs() < 5e-4 && (hi - 0.4723).abs() < 5e-4);
    }

    #[test]
    fn crossing_examples() {
        let full = estimate_crossing(&Model::K { k: 4 }, 2, 2, 3, 50, 1, 0).unwrap();
        assert_eq!(full.point, 1.0);
        let thin = estimate_crossing(&Model::K { k: 2 }, 3, 2, 1, 200, 1, 0).unwrap();
        assert_eq!(thin.point, 0.0);
        let a = estimate_crossing(&Model::Mfp { p: 0.7 }, 2, 2, 3, 100, 9, 0).unwrap();
        let b = estimate_crossing(&Model::Mfp { p: 0.7 }, 2, 2, 3, 100, 9, 0).unwrap();
        assert_eq!(a, b);
        assert!(estimate_crossing(&Model::K { k: 4 }, 2, 2, 3, 0, 1, 0).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let e = |k| enumerate_exact(&ExactModel::K(k), 2, 2, 1).unwrap();
        assert_eq!(e(1), BigRational::zero());
        assert_eq!(e(2), ratio(1, 3));
        assert_eq!(e(3), BigRational::one());
        assert_eq!(e(4), BigRational::one());
        assert_eq!(enumerate_exact(&ExactModel::Mfp(BigRational::one()), 2, 2, 2).unwrap(), BigRational::one());
        assert_eq!(enumerate_exact(&ExactModel::Mfp(BigRational::zero()), 2, 2, 2).unwrap(), BigRational::zero());
        // MFP at level 1: 4-subsets weighted by p^|S| q^(4-|S|); crossing
        // subsets are a full row (2 of size 2), any 3-set (4) and the full set.
        let p = ratio(1, 2);
        assert_eq!(enumerate_exact(&ExactModel::Mfp(p), 2, 2, 1).unwrap(), ratio(7, 16));
        assert_eq!(ratio(1, 3).to_string(), "1/3");
    }

    #[test]
    fn enumeration_agrees_across_representations() {
        // A binomial generator is Mandelbrot percolation; a constant generator is the k-model.
        let p = ratio(3, 5);
        let pmf = crate::exact::binomial_pmf_exact(4, &p);
        for n in 1..=2 {
            let a = enumerate_exact(&ExactModel::Mfp(p.clone()), 2, 2, n).unwrap();
            let b = enumerate_exact(&ExactModel::Gfp(pmf.clone()), 2, 2, n).unwrap();
            let c = enumerate_exact(&ExactModel::Fat(vec![p.clone(); n as usize]), 2, 2, n).unwrap();
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
        let mut pmf = vec![BigRational::zero(); 5];
        pmf[3] = BigRational::one();
        assert_eq!(
            enumerate_exact(&ExactModel::Gfp(pmf), 2, 2, 2).unwrap(),
            enumerate_exact(&ExactModel::K(3), 2, 2, 2).unwrap()
        );
    }

    #[test]
    fn enumeration_bound() {
        let count = configuration_count(&ExactModel::Mfp(ratio(1, 2)), 2, 2, 2).unwrap();
        assert_eq!(count, BigUint::from(83521u32));
        assert!(matches!(
            enumerate_exact(&ExactModel::Mfp(ratio(1, 2)), 2, 2, 3),
            Err(Error::TooManyConfigurations { .. })
        ));
        assert!(enumerate_exact(&ExactModel::K(9), 3, 2, 3).is_ok());
    }

    #[test]
    fn kc_search_small() {
        let r = search_kc(2, 2, 1, 2000, 0.5, 3).unwrap();
        assert_eq!(r.k_hat, Some(3));
        assert_eq!(r.estimates[0].point, 0.0);
        assert_eq!(r.estimates[2].point, 1.0);
        let r = search_kc(2, 2, 1, 2000, 0.3, 3).unwrap();
        assert_eq!(r.k_hat, Some(2));
        for w in r.estimates.windows(2) {
            assert!(w[0].point <= w[1].point);
        }
    }

    #[test]
    fn minimal_k_matches_direct_sweep() {
        for seed in 0..30 {
            let kstar = minimal_crossing_k(3, 2, 2, seed).unwrap();
            for k in 1..=9 {
                let crosses = set_crosses(sample_k(k, 3, 2, 2, seed).unwrap().cells(), 0);
                assert_eq!(crosses, k >= kstar);
            }
        }
    }

    #[test]
    fn site_threshold_matches_direct_crossing() {
        let side = 12;
        let shape = BoxShape::new(side, 2);
        for r in 0..40 {
            let rs = replicate_seed(5, r);
            let t = site_threshold(2, side, rs);
            for p in [t - 1e-12, t + 1e-12, 0.3, 0.6, 0.9] {
                let open = |c: &[u64]| site_uniform(rs, shape.linear(c)) < p;
                let sources = (0..side).map(|y| vec![0, y]);
                let direct = crossing_in_region(shape, &[0, 0], &[side, side], 0, sources, open);
                assert_eq!(direct, t < p, "replicate {r}, p {p}, threshold {t}");
            }
        }
    }

    #[test]
    fn site_sweep_ends() {
        let s = estimate_site_pc(2, 8, 50, &[0.0, 0.5, 1.0], 1).unwrap();
        assert_eq!(s.estimates[0].point, 0.0);
        assert_eq!(s.estimates[2].point, 1.0);
        assert!(s.crossing_point.is_some());
        assert!(estimate_site_pc(2, 8, 50, &[0.5, 0.1], 1).is_err());
    }

    #[test]
    fn interpolation() {
        assert_eq!(interpolate_half(&[0.0, 1.0], &[0.0, 1.0]), Some(0.5));
        assert_eq!(interpolate_half(&[0.0, 1.0], &[0.0, 0.4]), None);
        assert_eq!(interpolate_half(&[0.2, 0.4, 0.6], &[0.1, 0.3, 0.7]), Some(0.5));
    }

    #[test]
    fn gamma_examples() {
        let x = [Ratio::new(1, 2), Ratio::new(1, 2)];
        let e = estimate_gamma(&RetentionSchedule::constant(1.0), 2, 2, 3, &x, 1, 20, 0).unwrap();
        assert_eq!(e.point, 1.0);
        assert!(matches!(
            estimate_gamma(&RetentionSchedule::constant(1.0), 2, 3, 3, &x, 1, 20, 0),
            Err(Error::UnsupportedDimension { .. })
        ));
    }
}
