//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Seeds are fixed up front so every run is reproducible.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use fracperc_core::connectivity::{crosses, set_crosses};
use fracperc_core::estimators::{
    clopper_pearson, configuration_count, crossing_indicators, enumerate_exact, estimate_site_pc, search_kc,
    ENUMERATION_BOUND,
};
use fracperc_core::exact::to_f64;
use fracperc_core::fatfractal::{change_step_stats, fat_statistics, schedule_products, summarize, Limit};
use fracperc_core::goodness::{
    check_nu_good, coupled_domination_sample, good_depth, good_probability, good_probability_gfp,
};
use fracperc_core::models::{sample_fat, sample_k, sample_mfp};
use fracperc_core::rng::replicate_seed;
use fracperc_core::{ExactModel, GeneratorSpec, Model, RetentionSchedule};

type Check = Result<String, String>;

const SEED: u64 = 20_240_611;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent < budget, || format!("took {spent:.1?}, budget {budget:?}"))
}

fn schedule(s: &str) -> RetentionSchedule {
    s.parse().expect("valid schedule")
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let (base, dim, reps) = (2, 2, 10_000);
    let level1 = ["0", "1/3", "1", "1"];
    for k in 1..=4u32 {
        let exact = enumerate_exact(&ExactModel::K(k), base, dim, 1).map_err(|e| e.to_string())?;
        ensure(exact.to_string() == level1[k as usize - 1], || format!("k={k}: level-1 value {exact}"))?;
    }
    let mut models: Vec<Model> = (1..=4).map(|k| Model::K { k }).collect();
    models.push(Model::Mfp { p: 0.75 });
    models.push(Model::Gfp { generator: "pmf:0=0.1,2=0.3,3=0.4,4=0.2".parse().unwrap() });
    models.push(Model::Fat { schedule: schedule("0.6,0.8;const:0.9") });
    let mut checked = 0;
    for model in &models {
        for n in 1..=2 {
            let exact_model = ExactModel::from_model(model, base, dim, n).map_err(|e| e.to_string())?;
            let count = configuration_count(&exact_model, base, dim, n).map_err(|e| e.to_string())?;
            if count > ENUMERATION_BOUND.into() {
                continue;
            }
            let exact = to_f64(&enumerate_exact(&exact_model, base, dim, n).map_err(|e| e.to_string())?);
            let hits = crossing_indicators(model, base, dim, n, reps, SEED, 0).map_err(|e| e.to_string())?;
            let s = hits.iter().filter(|&&h| h).count() as u64;
            let (lo, hi) = clopper_pearson(s, reps, 0.99);
            ensure(lo <= exact && exact <= hi, || {
                format!("{} {} n={n}: exact {exact} outside 99% CI [{lo}, {hi}]", model.name(), model.parameter())
            })?;
            checked += 1;
        }
    }
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!("{checked} (model, n) pairs inside their 99% CI; level-1 k values 0, 1/3, 1, 1"))
}

struct FatRun {
    name: &'static str,
    sched: RetentionSchedule,
    mean_lambda: Vec<f64>,
    se_lambda: Vec<f64>,
    mean_w: Vec<f64>,
    se_w: Vec<f64>,
}

fn fat_runs() -> Result<Vec<FatRun>, String> {
    let (base, dim, n, reps) = (2, 2, 8, 10_000u64);
    [("p=0.9", "const:0.9"), ("p=1-2^-(n+1)", "geometric-complement:0.5:0.5")]
        .into_iter()
        .map(|(name, s)| {
            let sched = schedule(s);
            let stats: Vec<_> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let g = sample_fat(&sched, base, dim, n, replicate_seed(SEED, r))?;
                    fat_statistics(&g, &sched)
                })
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let s = summarize(&stats).map_err(|e| e.to_string())?;
            Ok(FatRun { name, sched, mean_lambda: s.mean_lambda, se_lambda: s.se_lambda, mean_w: s.mean_w, se_w: s.se_w })
        })
        .collect()
}

fn expectation_identity(runs: &[FatRun], elapsed: Duration) -> Check {
    let mut out = Vec::new();
    for r in runs {
        let product = to_f64(&r.sched.partial_product_exact(8));
        let (mean, se) = (r.mean_lambda[8], r.se_lambda[8]);
        ensure((mean - product).abs() <= 3.0 * se, || {
            format!("{}: mean lambda_8 {mean} vs product {product}, se {se}", r.name)
        })?;
        out.push(format!("{}: {mean:.5} vs {product:.5} (se {se:.5})", r.name));
    }
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(out.join("; "))
}

fn martingale(runs: &[FatRun]) -> Check {
    let mut worst = 0.0f64;
    for r in runs {
        for m in 1..=6 {
            let (mean, se) = (r.mean_w[m], r.se_w[m]);
            ensure((mean - 1.0).abs() <= 3.0 * se, || format!("{}: mean W_{m} = {mean}, se {se}", r.name))?;
            worst = worst.max((mean - 1.0).abs() / se);
        }
    }
    Ok(format!("mean W_m within {worst:.2} SE of 1 for m <= 6"))
}

fn recursion_vs_simulation() -> Check {
    let reps = 10_000u64;
    let mut worst = 0.0f64;
    for (base, dim, p0, k) in [(2u32, 2u32, 0.8, 2u32), (3, 2, 0.7, 5)] {
        let exact = good_probability(p0, k, base, dim, 4).map_err(|e| e.to_string())?;
        let via_gen =
            good_probability_gfp(&GeneratorSpec::Binomial(p0), k, base, dim, 4).map_err(|e| e.to_string())?;
        for (a, b) in exact.values.iter().zip(&via_gen.values) {
            ensure((a - b).abs() <= 1e-12, || format!("N={base}: recursions differ, {a} vs {b}"))?;
        }
        let depths: Vec<i64> = (0..reps)
            .into_par_iter()
            .map(|r| good_depth(&sample_mfp(p0, base, dim, 5, replicate_seed(SEED, r))?, k))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for m in 0..=4 {
            let freq = depths.iter().filter(|&&h| h >= m as i64).count() as f64 / reps as f64;
            let p = exact.values[m];
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            ensure((freq - p).abs() <= 3.0 * se, || {
                format!("(N={base}, p0={p0}, k={k}) m={m}: frequency {freq} vs {p}, se {se}")
            })?;
            worst = worst.max((freq - p).abs() / se);
        }
    }
    Ok(format!("all frequencies within {worst:.2} SE; generator recursion agrees to 1e-12"))
}

fn coupling_containment() -> Check {
    let reps = 10_000u64;
    let mut total = 0;
    for (p0, k, base, depth, m_trunc) in [(0.8, 2u32, 2u32, 4u32, 2u32), (0.7, 5, 3, 3, 1)] {
        let bad: Vec<String> = (0..reps)
            .into_par_iter()
            .filter_map(|r| {
                let seed = replicate_seed(SEED, r);
                let (a, b) = match coupled_domination_sample(p0, k, base, 2, depth, m_trunc, seed) {
                    Ok(pair) => pair,
                    Err(e) => return Some(e.to_string()),
                };
                let reference = sample_k(k, base, 2, depth, seed).ok()?;
                if !b.is_subset_of(&a) {
                    Some(format!("replicate {r}: B not inside A"))
                } else if b.count_at(1).ok()? != k as usize || b != reference {
                    Some(format!("replicate {r}: B differs from the k-model sample"))
                } else {
                    None
                }
            })
            .collect();
        ensure(bad.is_empty(), || format!("{} failures, first: {}", bad.len(), bad[0]))?;
        total += reps;
    }
    Ok(format!("B inside A and B equal to the k-model sample in {total}/{total} replicates"))
}

fn goodness_implies_crossing() -> Check {
    let per = 10_000u64 / 8;
    let mut good = 0;
    for n in [2u32, 3] {
        for k in 6..=9u32 {
            let found: Vec<(bool, bool)> = (0..per)
                .into_par_iter()
                .map(|r| {
                    let g = sample_k(k, 3, 2, n, replicate_seed(SEED ^ (n as u64) << 8 ^ k as u64, r))?;
                    Ok((check_nu_good(&g, 1)?.unit_good(), crosses(&g, 0)?))
                })
                .collect::<Result<_, fracperc_core::Error>>()
                .map_err(|e| e.to_string())?;
            let counter = found.iter().filter(|(g, c)| *g && !*c).count();
            ensure(counter == 0, || format!("n={n}, k={k}: {counter} good grids that do not cross"))?;
            good += found.iter().filter(|t| t.0).count();
        }
    }
    Ok(format!("0 counterexamples over {} grids ({good} declared good)", 8 * per))
}

fn monotonicity() -> Check {
    let reps = 1_000u64;
    let mut violations = 0usize;
    let seeds: Vec<u64> = (0..reps).map(|r| replicate_seed(SEED, r)).collect();
    // In k: N = 3, n = 3.
    violations += seeds
        .par_iter()
        .map(|&s| {
            let hits: Vec<bool> = (1..=9).map(|k| set_crosses(sample_k(k, 3, 2, 3, s).unwrap().cells(), 0)).collect();
            hits.windows(2).filter(|w| w[0] && !w[1]).count()
        })
        .sum::<usize>();
    // In p: N = 3, n = 3, p = 0.50, 0.55, ..., 1.
    violations += seeds
        .par_iter()
        .map(|&s| {
            let hits: Vec<bool> = (0..=10)
                .map(|i| set_crosses(sample_mfp(0.5 + 0.05 * i as f64, 3, 2, 3, s).unwrap().cells(), 0))
                .collect();
            hits.windows(2).filter(|w| w[0] && !w[1]).count()
        })
        .sum::<usize>();
    // In n: MFP p = 0.85 and the k-model k = 7, N = 3, n = 1..=4.
    violations += seeds
        .par_iter()
        .map(|&s| {
            let mfp: Vec<bool> = (1..=4).map(|n| set_crosses(sample_mfp(0.85, 3, 2, n, s).unwrap().cells(), 0)).collect();
            let km: Vec<bool> = (1..=4).map(|n| set_crosses(sample_k(7, 3, 2, n, s).unwrap().cells(), 0)).collect();
            mfp.windows(2).chain(km.windows(2)).filter(|w| !w[0] && w[1]).count()
        })
        .sum::<usize>();
    ensure(violations == 0, || format!("{violations} monotonicity violations"))?;
    Ok("0 violations over 1000 replicates per sweep (k, p, n)".into())
}

fn site_reference() -> Check {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=40).map(|i| 0.55 + 0.0025 * i as f64).collect();
    let cp = |side| -> Result<f64, String> {
        estimate_site_pc(2, side, 1_000, &grid, SEED)
            .map_err(|e| e.to_string())?
            .crossing_point
            .ok_or_else(|| format!("M={side}: curve never reaches 1/2"))
    };
    let (c64, c128) = (cp(64)?, cp(128)?);
    ensure((c64 - 0.593).abs() <= 0.02, || format!("M=64 crossing point {c64}"))?;
    ensure((c128 - c64).abs() < 0.01, || format!("drift {c64} -> {c128}"))?;
    within_budget(start, Duration::from_secs(300))?;
    Ok(format!("crossing point {c64:.4} at M=64, {c128:.4} at M=128"))
}

fn critical_k() -> Check {
    let mut out = Vec::new();
    let mut failures = Vec::new();
    for base in 2..=5u32 {
        let r = search_kc(base, 2, 4, 1_000, 0.5, SEED).map_err(|e| e.to_string())?;
        let curve: Vec<f64> = r.estimates.iter().map(|e| e.point).collect();
        ensure(curve.windows(2).all(|w| w[0] <= w[1]), || format!("N={base}: curve not monotone {curve:?}"))?;
        let shown: Vec<String> = curve.iter().map(|p| format!("{p:.3}")).collect();
        println!("  N={base} curve k=1..{}: {}", base * base, shown.join(" "));
        let ratio = r.k_hat.map(|k| k as f64 / (base * base) as f64);
        match ratio {
            Some(x) if x > 0.3 && x < 0.95 => out.push(format!("N={base}: {x:.3}")),
            _ => failures.push(format!("N={base}: k_hat {:?}, ratio {ratio:?}", r.k_hat)),
        }
    }
    ensure(failures.is_empty(), || format!("outside (0.3, 0.95): {}", failures.join("; ")))?;
    Ok(format!("curves monotone; k_hat/N^2 {}", out.join(", ")))
}

fn borel_cantelli() -> Check {
    let (base, dim, n, reps) = (2u32, 2u32, 8u32, 10_000u64);
    let sched = schedule("geometric-complement:1:0.0625");
    let counts: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| Ok(change_step_stats(&sample_fat(&sched, base, dim, n, replicate_seed(SEED, r))?)?.len() as f64))
        .collect::<Result<_, fracperc_core::Error>>()
        .map_err(|e| e.to_string())?;
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let se = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64 / reps as f64).sqrt();
    let bound: f64 = (1..=8).map(|m| 4f64.powi(m) * 16f64.powi(-m)).sum();
    ensure(mean <= bound + 3.0 * se, || format!("mean change levels {mean} > {bound} + 3*{se}"))?;
    let all = schedule_products(&sched, base, dim, 20, 1e-9).map_err(|e| e.to_string())?;
    ensure((all.pi1, all.pi2, all.pi3) == (Limit::Positive, Limit::Positive, Limit::Positive), || {
        format!("1-16^-n classified {:?}", (all.pi1, all.pi2, all.pi3))
    })?;
    let half = schedule_products(&schedule("geometric-complement:0.5:0.5"), base, dim, 20, 1e-9)
        .map_err(|e| e.to_string())?;
    ensure((half.pi1, half.pi2, half.pi3) == (Limit::Positive, Limit::Zero, Limit::Zero), || {
        format!("1-2^-(n+1) classified {:?}", (half.pi1, half.pi2, half.pi3))
    })?;
    Ok(format!("mean change levels {mean:.4} <= {bound:.4} + 3 SE; classifications as expected"))
}

fn cli_invocations(dir: &Path) -> Vec<(&'static str, Vec<String>)> {
    let grid = dir.join("grid.bin").display().to_string();
    let list = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
    vec![
        ("sample", list("--model mfp --p 0.7 --N 3 --n 3")),
        ("crossing-prob", list("--model k --k 3 --N 2 --n 4 --replicates 200")),
        ("kc-search", list("--N 3 --n 3 --replicates 100")),
        ("site-perc", list("--M 32 --replicates 100 --p-grid 0.5:0.7:0.02")),
        ("good-prob", list("--p0 0.8 --k 2 --N 2 --m 6")),
        ("nu-good-check", list(&format!("--input {grid} --u 1"))),
        ("coupling-check", list("--p0 0.8 --k 2 --N 2 --n 3 --m-trunc 2 --replicates 200")),
        ("fat-stats", list("--schedule geometric-complement:0.5:0.5 --N 2 --n 5 --replicates 200")),
        ("schedule-products", list("--schedule 0.5,0.7;power-complement:1:2 --N 2 --horizon 12")),
        ("gamma-prob", list("--schedule const:0.95 --N 2 --n 4 --x 1/2,1/2 --n-x 1 --replicates 100")),
        ("enumerate", list("--model mfp --p 1/2 --N 2 --n 2")),
        ("render", list("--model k --k 6 --N 3 --n 3 --color-clusters")),
    ]
}

fn determinism() -> Check {
    let exe = env!("CARGO_BIN_EXE_fracperc");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |cmd: &str, args: &[String], out: &Path| -> Result<Vec<u8>, String> {
        let status = Command::new(exe)
            .arg(cmd)
            .args(args)
            .arg("--seed")
            .arg("11")
            .arg("--output")
            .arg(out)
            .env_remove("FRACPERC_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr))
        })?;
        let mut bytes = std::fs::read(out).map_err(|e| e.to_string())?;
        bytes.extend(std::fs::read(format!("{}.config.toml", out.display())).map_err(|e| e.to_string())?);
        Ok(bytes)
    };
    // The grid consumed by nu-good-check.
    run("sample", &cli_invocations(dir.path())[0].1, &dir.path().join("grid.bin"))?;
    let invocations = cli_invocations(dir.path());
    for (cmd, args) in &invocations {
        let out = dir.path().join(format!("{cmd}.out"));
        let first = run(cmd, args, &out)?;
        let second = run(cmd, args, &out)?;
        ensure(first == second, || format!("{cmd}: outputs differ between runs"))?;
    }
    Ok(format!("{} subcommands byte-identical across two runs", invocations.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |i: u32, name: &str, result: Check, spent: Duration| {
        match result {
            Ok(detail) => println!("PASS criterion {i} ({name}, {spent:.1?}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {i} ({name}, {spent:.1?}): {detail}");
            }
        }
    };
    let timed = |f: &dyn Fn() -> Check| {
        let t = Instant::now();
        let r = f();
        (r, t.elapsed())
    };

    let (r, t) = timed(&oracle_equivalence);
    report(1, "oracle equivalence", r, t);

    let t = Instant::now();
    let runs = fat_runs();
    let fat_time = t.elapsed();
    match &runs {
        Ok(runs) => {
            report(2, "expectation identity", expectation_identity(runs, fat_time), fat_time);
            report(3, "martingale", martingale(runs), fat_time);
        }
        Err(e) => {
            report(2, "expectation identity", Err(e.clone()), fat_time);
            report(3, "martingale", Err(e.clone()), fat_time);
        }
    }

    let (r, t) = timed(&recursion_vs_simulation);
    report(4, "recursion vs simulation", r, t);
    let (r, t) = timed(&coupling_containment);
    report(5, "coupling containment", r, t);
    let (r, t) = timed(&goodness_implies_crossing);
    report(6, "goodness implies crossing", r, t);
    let (r, t) = timed(&monotonicity);
    report(7, "monotonicity", r, t);
    let (r, t) = timed(&site_reference);
    report(8, "site percolation reference", r, t);
    let (r, t) = timed(&critical_k);
    report(9, "critical k corridor", r, t);
    let (r, t) = timed(&borel_cantelli);
    report(10, "finitely many change levels", r, t);
    let (r, t) = timed(&determinism);
    report(11, "CLI determinism", r, t);

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
