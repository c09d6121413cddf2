//! Subcommand bodies. Each returns the bytes of its result file; short
//! summaries go to stderr.

use std::str::FromStr;

use num_rational::{BigRational, Ratio};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use fracperc_core::connectivity::crosses;
use fracperc_core::estimators::{
    configuration_count, enumerate_exact, estimate_crossing, estimate_gamma, estimate_site_pc, search_kc,
    SCHEMA_VERSION,
};
use fracperc_core::exact::to_f64;
use fracperc_core::fatfractal::{change_step_stats, fat_statistics, schedule_products, summarize};
use fracperc_core::goodness::{
    check_nu_good, coupled_domination_sample, good_probability, good_probability_gfp, truncated_count_pmf,
};
use fracperc_core::models::io::{from_bytes, from_json, to_bytes, to_json, GridJson};
use fracperc_core::models::{children_per_cube, exact_f64, sample_fat, sample_model};
use fracperc_core::rng::replicate_seed;
use fracperc_core::{ExactModel, GeneratorSpec, Grid, Model, RetentionSchedule};

use crate::config::Flags;
use crate::render::render_ppm;
use crate::CliError;

type Out = Result<Vec<u8>, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn req<T: Clone>(v: &Option<T>, name: &str) -> Result<T, CliError> {
    Flags::require(v, name)
}

fn parse_field<T: FromStr>(s: &str, field: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse().map_err(|e| CliError::Usage(format!("field `{field}`: {e}")))
}

/// A probability given as a decimal or as a fraction `a/b`.
fn parse_probability(s: &str) -> Result<BigRational, CliError> {
    let value = if s.contains('/') {
        parse_field::<BigRational>(s, "p")?
    } else {
        let x: f64 = parse_field(s, "p")?;
        if !x.is_finite() {
            return usage("field `p`: not a finite number");
        }
        exact_f64(x)
    };
    Ok(value)
}

pub fn check_format(command: &str, cfg: &Flags) -> Result<(), CliError> {
    let allowed: &[&str] = match command {
        "sample" => &["binary", "json"],
        "render" => &["ppm"],
        _ => &["csv", "json"],
    };
    let format = cfg.format.as_deref().unwrap_or(allowed[0]);
    if !allowed.contains(&format) {
        return usage(format!("field `format`: `{format}` not one of {}", allowed.join(", ")));
    }
    Ok(())
}

fn is_json(cfg: &Flags) -> bool {
    cfg.format.as_deref() == Some("json")
}

fn model_from(cfg: &Flags) -> Result<Model, CliError> {
    let name = req(&cfg.model, "model")?;
    Ok(match name.as_str() {
        "mfp" => Model::Mfp { p: to_f64(&parse_probability(&req(&cfg.p, "p")?)?) },
        "k" => Model::K { k: req(&cfg.k, "k")? },
        "gfp" => Model::Gfp { generator: parse_field(&req(&cfg.generator, "generator")?, "generator")? },
        "fat" => Model::Fat { schedule: schedule_from(cfg)? },
        "truncated" => Model::Truncated {
            p0: req(&cfg.p0, "p0")?,
            k: req(&cfg.k, "k")?,
            m_trunc: req(&cfg.m_trunc, "m_trunc")?,
        },
        other => return usage(format!("field `model`: unknown model `{other}` (mfp, k, gfp, fat or truncated)")),
    })
}

fn schedule_from(cfg: &Flags) -> Result<RetentionSchedule, CliError> {
    parse_field(&req(&cfg.schedule, "schedule")?, "schedule")
}

fn read_grid(path: &std::path::Path) -> Result<Grid, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    if first == Some(&b'{') {
        let doc: GridJson = serde_json::from_slice(&bytes).map_err(fracperc_core::Error::from)?;
        Ok(from_json(&doc)?)
    } else {
        Ok(from_bytes(&bytes)?)
    }
}

/// The grid named by `input`, or a fresh sample of the configured model.
fn grid_from(cfg: &Flags) -> Result<Grid, CliError> {
    if let Some(path) = &cfg.input {
        if cfg.model.is_some() {
            return usage("fields `input` and `model` are mutually exclusive");
        }
        return read_grid(path);
    }
    let model = model_from(cfg)?;
    Ok(sample_model(&model, req(&cfg.base, "N")?, cfg.dim(), req(&cfg.n, "n")?, cfg.seed())?)
}

/// JSON document: schema version, command and resolved config, then the
/// result's fields.
fn json_doc(command: &str, cfg: &Flags, result: impl Serialize) -> Out {
    let mut doc = Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("command".into(), json!(command));
    doc.insert("config".into(), serde_json::to_value(cfg).map_err(fracperc_core::Error::from)?);
    match serde_json::to_value(result).map_err(fracperc_core::Error::from)? {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(doc)).map_err(fracperc_core::Error::from)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_rows<S: Serialize>(rows: impl IntoIterator<Item = S>) -> Out {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))
}

fn emit<S: Serialize, R: Serialize>(command: &str, cfg: &Flags, result: R, rows: impl IntoIterator<Item = S>) -> Out {
    if is_json(cfg) {
        json_doc(command, cfg, result)
    } else {
        csv_rows(rows)
    }
}

pub fn dispatch(command: &str, cfg: &Flags) -> Out {
    match command {
        "sample" => sample(cfg),
        "crossing-prob" => crossing_prob(cfg),
        "kc-search" => kc_search(cfg),
        "site-perc" => site_perc(cfg),
        "good-prob" => good_prob(cfg),
        "nu-good-check" => nu_good_check(cfg),
        "coupling-check" => coupling_check(cfg),
        "fat-stats" => fat_stats(cfg),
        "schedule-products" => schedule_products_cmd(cfg),
        "gamma-prob" => gamma_prob(cfg),
        "enumerate" => enumerate(cfg),
        "render" => render(cfg),
        other => usage(format!("unknown subcommand `{other}`")),
    }
}

fn sample(cfg: &Flags) -> Out {
    let g = grid_from(cfg)?;
    if is_json(cfg) {
        let mut bytes = serde_json::to_vec_pretty(&to_json(&g)).map_err(fracperc_core::Error::from)?;
        bytes.push(b'\n');
        Ok(bytes)
    } else {
        Ok(to_bytes(&g))
    }
}

fn crossing_prob(cfg: &Flags) -> Out {
    let model = model_from(cfg)?;
    let (base, n, d) = (req(&cfg.base, "N")?, req(&cfg.n, "n")?, cfg.dim());
    let axis = cfg.axis.unwrap_or(1);
    if axis == 0 || axis > d as usize {
        return usage(format!("field `axis`: {axis} outside 1..={d}"));
    }
    let e = estimate_crossing(&model, base, d, n, cfg.replicates(), cfg.seed(), axis - 1)?;
    eprintln!("crossing probability {} (95% CI {}..{})", e.point, e.ci_low, e.ci_high);
    emit("crossing-prob", cfg, &e, [e.row()])
}

fn kc_search(cfg: &Flags) -> Out {
    let r = search_kc(
        req(&cfg.base, "N")?,
        cfg.dim(),
        req(&cfg.n, "n")?,
        cfg.replicates(),
        cfg.threshold.unwrap_or(0.5),
        cfg.seed(),
    )?;
    match r.k_hat {
        Some(k) => eprintln!("k_hat = {k}"),
        None => eprintln!("no k exceeds the threshold"),
    }
    emit("kc-search", cfg, &r, r.estimates.iter().map(|e| e.row()))
}

/// `a,b,c` or `start:stop:step` (inclusive, rounded to 1e-9).
pub fn parse_p_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, h): (f64, f64, f64) =
                (parse_field(start, "p_grid")?, parse_field(stop, "p_grid")?, parse_field(step, "p_grid")?);
            if !(a.is_finite() && b.is_finite() && h.is_finite() && h > 0.0 && a <= b) {
                return usage("field `p_grid`: need start <= stop and step > 0");
            }
            let count = ((b - a) / h + 1e-9).floor() as u64;
            if count > 100_000 {
                return usage("field `p_grid`: too many points");
            }
            Ok((0..=count).map(|i| ((a + i as f64 * h) * 1e9).round() / 1e9).collect())
        }
        [list] => list.split(',').map(|v| parse_field(v, "p_grid")).collect(),
        _ => usage("field `p_grid`: expected a,b,c or start:stop:step"),
    }
}

fn site_perc(cfg: &Flags) -> Out {
    let grid = parse_p_grid(cfg.p_grid.as_deref().unwrap_or("0.55:0.65:0.005"))?;
    let sweep = estimate_site_pc(cfg.dim(), req(&cfg.side, "M")?, cfg.replicates(), &grid, cfg.seed())?;
    match sweep.crossing_point {
        Some(p) => eprintln!("crossing point {p}"),
        None => eprintln!("crossing curve stays below 1/2 on this grid"),
    }
    emit("site-perc", cfg, &sweep, sweep.estimates.iter().map(|e| e.row()))
}

#[derive(Serialize)]
struct GoodRow {
    m: usize,
    probability: f64,
}

fn good_prob(cfg: &Flags) -> Out {
    let (k, base, d, m) = (req(&cfg.k, "k")?, req(&cfg.base, "N")?, cfg.dim(), req(&cfg.m, "m")?);
    let r = match (&cfg.p0, &cfg.generator) {
        (Some(p0), None) => good_probability(*p0, k, base, d, m)?,
        (None, Some(g)) => good_probability_gfp(&parse_field::<GeneratorSpec>(g, "generator")?, k, base, d, m)?,
        _ => return usage("exactly one of the fields `p0` and `generator` is required"),
    };
    let rows: Vec<GoodRow> = r.values.iter().enumerate().map(|(m, &probability)| GoodRow { m, probability }).collect();
    emit("good-prob", cfg, &r, rows)
}

#[derive(Serialize)]
struct GoodLevelRow {
    level: u32,
    retained: usize,
    good: usize,
}

fn nu_good_check(cfg: &Flags) -> Out {
    let g = grid_from(cfg)?;
    let map = check_nu_good(&g, cfg.u.unwrap_or(1))?;
    let rows = (0..=g.depth())
        .map(|level| {
            let retained = g.count_at(level)?;
            Ok(GoodLevelRow { level, retained, good: map.good_count(level).unwrap_or(retained) })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let crossing = crosses(&g, 0)?;
    eprintln!("unit cube good: {}; crosses along axis 1: {crossing}", map.unit_good());
    let result = json!({ "unit_good": map.unit_good(), "crosses": crossing, "levels": &rows });
    emit("nu-good-check", cfg, result, rows)
}

#[derive(Serialize)]
struct CountRow {
    count: usize,
    observed: u64,
    expected: f64,
}

/// Pearson statistic after pooling bins with expectation below 5 into one.
fn chi_square(rows: &[CountRow]) -> (f64, usize) {
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for r in rows.iter().filter(|r| r.expected > 0.0 || r.observed > 0) {
        if r.expected >= 5.0 {
            stat += (r.observed as f64 - r.expected).powi(2) / r.expected;
            bins += 1;
        } else {
            pooled_obs += r.observed as f64;
            pooled_exp += r.expected;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    } else if pooled_obs > 0.0 {
        stat = f64::INFINITY;
    }
    (stat, bins.saturating_sub(1))
}

fn coupling_check(cfg: &Flags) -> Out {
    let (p0, k, base, d, n, m_trunc) =
        (req(&cfg.p0, "p0")?, req(&cfg.k, "k")?, req(&cfg.base, "N")?, cfg.dim(), req(&cfg.n, "n")?, req(&cfg.m_trunc, "m_trunc")?);
    if n == 0 {
        return usage("field `n`: must be at least 1");
    }
    let reps = cfg.replicates();
    if reps == 0 {
        return usage("field `replicates`: must be at least 1");
    }
    let pmf = truncated_count_pmf(p0, k, base, d, m_trunc)?;
    let seed = cfg.seed();
    let draws: Vec<(bool, usize, usize)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let (a, b) = coupled_domination_sample(p0, k, base, d, n, m_trunc, replicate_seed(seed, r))?;
            Ok((b.is_subset_of(&a), a.count_at(1)?, b.count_at(1)?))
        })
        .collect::<Result<_, fracperc_core::Error>>()?;
    let violations = draws.iter().filter(|t| !t.0).count();
    let k_mismatches = draws.iter().filter(|t| t.2 != k as usize).count();
    let children = children_per_cube(base, d)? as usize;
    let mut observed = vec![0u64; children + 1];
    for t in &draws {
        observed[t.1] += 1;
    }
    let rows: Vec<CountRow> = (0..=children)
        .map(|c| CountRow { count: c, observed: observed[c], expected: reps as f64 * pmf.get(c).copied().unwrap_or(0.0) })
        .collect();
    let (stat, dof) = chi_square(&rows);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|c| c.sf(stat)).unwrap_or(f64::NAN)
    };
    eprintln!(
        "containment violations: {violations}/{reps}; k-model level-1 mismatches: {k_mismatches}; chi-square {stat:.4} on {dof} dof (p = {p_value:.4})"
    );
    let result = json!({
        "replicates": reps,
        "containment_violations": violations,
        "level1_k_mismatches": k_mismatches,
        "chi_square": stat,
        "dof": dof,
        "p_value": p_value,
        "counts": &rows,
    });
    emit("coupling-check", cfg, result, rows)
}

#[derive(Serialize)]
struct FatRow {
    m: u32,
    product: f64,
    mean_lambda: f64,
    se_lambda: f64,
    mean_w: f64,
    se_w: f64,
    change_frequency: f64,
    union_term: f64,
}

fn fat_stats(cfg: &Flags) -> Out {
    let sched = schedule_from(cfg)?;
    let (base, d, n) = (req(&cfg.base, "N")?, cfg.dim(), req(&cfg.n, "n")?);
    let reps = cfg.replicates();
    if reps == 0 {
        return usage("field `replicates`: must be at least 1");
    }
    let seed = cfg.seed();
    let runs: Vec<_> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let g = sample_fat(&sched, base, d, n, replicate_seed(seed, r))?;
            Ok((fat_statistics(&g, &sched)?, change_step_stats(&g)?))
        })
        .collect::<Result<_, fracperc_core::Error>>()?;
    let stats: Vec<_> = runs.iter().map(|r| r.0.clone()).collect();
    let summary = summarize(&stats)?;
    let children = children_per_cube(base, d)? as f64;
    let mut freq = vec![0u64; n as usize + 1];
    for (_, changes) in &runs {
        for &m in changes {
            freq[m as usize] += 1;
        }
    }
    let counts: Vec<f64> = runs.iter().map(|r| r.1.len() as f64).collect();
    let mean_changes = counts.iter().sum::<f64>() / reps as f64;
    let se_changes = if reps > 1 {
        (counts.iter().map(|c| (c - mean_changes).powi(2)).sum::<f64>() / (reps - 1) as f64 / reps as f64).sqrt()
    } else {
        f64::NAN
    };
    let rows: Vec<FatRow> = (0..=n)
        .map(|m| {
            let i = m as usize;
            FatRow {
                m,
                product: to_f64(&sched.partial_product_exact(m)),
                mean_lambda: summary.mean_lambda[i],
                se_lambda: summary.se_lambda[i],
                mean_w: summary.mean_w[i],
                se_w: summary.se_w[i],
                change_frequency: freq[i] as f64 / reps as f64,
                union_term: if m == 0 { 0.0 } else { children.powi(m as i32) * sched.complement(m) },
            }
        })
        .collect();
    eprintln!(
        "survivors {}/{}; mean change levels {mean_changes} (se {se_changes})",
        summary.survivors, summary.replicates
    );
    let result = json!({
        "summary": &summary,
        "mean_changes": mean_changes,
        "se_changes": se_changes,
        "levels": &rows,
    });
    emit("fat-stats", cfg, result, rows)
}

#[derive(Serialize)]
struct ProductRow {
    n: usize,
    log_pi1: f64,
    log_pi2: f64,
    log_pi3: f64,
}

fn schedule_products_cmd(cfg: &Flags) -> Out {
    let sched = schedule_from(cfg)?;
    let c = schedule_products(
        &sched,
        req(&cfg.base, "N")?,
        cfg.dim(),
        cfg.horizon.unwrap_or(20),
        cfg.tail_tol.unwrap_or(1e-9),
    )?;
    let rows: Vec<ProductRow> = (0..c.log_pi1.len())
        .map(|i| ProductRow { n: i + 1, log_pi1: c.log_pi1[i], log_pi2: c.log_pi2[i], log_pi3: c.log_pi3[i] })
        .collect();
    let name = |l| serde_json::to_value(l).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    eprintln!("limits: pi1 {}, pi2 {}, pi3 {}", name(c.pi1), name(c.pi2), name(c.pi3));
    emit("schedule-products", cfg, &c, rows)
}

fn parse_point(s: &str) -> Result<[Ratio<u64>; 2], CliError> {
    let coords: Vec<Ratio<u64>> = s.split(',').map(|v| parse_field(v, "x")).collect::<Result<_, _>>()?;
    match coords.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => usage("field `x`: expected two coordinates `a/b,c/d`"),
    }
}

fn gamma_prob(cfg: &Flags) -> Out {
    let sched = schedule_from(cfg)?;
    let x = parse_point(&req(&cfg.x, "x")?)?;
    let e = estimate_gamma(
        &sched,
        req(&cfg.base, "N")?,
        cfg.dim(),
        req(&cfg.n, "n")?,
        &x,
        req(&cfg.n_x, "n_x")?,
        cfg.replicates(),
        cfg.seed(),
    )?;
    eprintln!("strip event probability {} (95% CI {}..{})", e.point, e.ci_low, e.ci_high);
    emit("gamma-prob", cfg, &e, [e.row()])
}

#[derive(Serialize)]
struct ExactRow {
    exact: String,
    value: f64,
    configurations: String,
}

fn enumerate(cfg: &Flags) -> Out {
    let (base, d, n) = (req(&cfg.base, "N")?, cfg.dim(), req(&cfg.n, "n")?);
    let model = match cfg.model.as_deref() {
        Some("mfp") => ExactModel::Mfp(parse_probability(&req(&cfg.p, "p")?)?),
        Some("truncated") => return usage("field `model`: `truncated` has no enumeration oracle"),
        _ => ExactModel::from_model(&model_from(cfg)?, base, d, n)?,
    };
    let configurations = configuration_count(&model, base, d, n)?;
    let exact = enumerate_exact(&model, base, d, n)?;
    let row = ExactRow { exact: exact.to_string(), value: to_f64(&exact), configurations: configurations.to_string() };
    emit("enumerate", cfg, &row, [&row])
}

fn render(cfg: &Flags) -> Out {
    if cfg.input.is_none() && cfg.dim() != 2 {
        return usage("render requires d=2");
    }
    render_ppm(&grid_from(cfg)?, cfg.color_clusters.unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_grid_forms() {
        assert_eq!(parse_p_grid("0.5:0.6:0.05").unwrap(), vec![0.5, 0.55, 0.6]);
        assert_eq!(parse_p_grid("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_p_grid("0.6:0.5:0.1").is_err());
        assert!(parse_p_grid("a:b").is_err());
    }

    #[test]
    fn probabilities_and_points() {
        assert_eq!(parse_probability("1/3").unwrap(), BigRational::new(1.into(), 3.into()));
        assert_eq!(parse_probability("0.5").unwrap(), BigRational::new(1.into(), 2.into()));
        assert!(parse_probability("x").is_err());
        assert_eq!(parse_point("1/2,1/3").unwrap(), [Ratio::new(1, 2), Ratio::new(1, 3)]);
        assert!(parse_point("1/2").is_err());
    }

    #[test]
    fn pooled_chi_square() {
        let rows = [
            CountRow { count: 0, observed: 50, expected: 50.0 },
            CountRow { count: 1, observed: 48, expected: 50.0 },
            CountRow { count: 2, observed: 2, expected: 0.0 },
        ];
        let (stat, _) = chi_square(&rows);
        assert!(stat.is_infinite());
        let rows = [CountRow { count: 0, observed: 60, expected: 50.0 }, CountRow { count: 1, observed: 40, expected: 50.0 }];
        assert_eq!(chi_square(&rows), (4.0, 1));
    }
}
