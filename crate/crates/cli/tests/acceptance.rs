//! The acceptance criteria, one line each. Runs without the test harness so
//! the pass/fail lines always print.

use std::process::{Command, ExitCode};
use std::time::Instant;

use lpplab::bounds::{
    frechet_envelope, generic_bound, harmonic, shape_convex_bound, shape_rost, shape_table, worst_case_law,
    SubsetSystem,
};
use lpplab::couplings::{is_flat, sample_maximally_dependent};
use lpplab::lattice::enumerate_paths;
use lpplab::rng::replicate;
use lpplab::stats::{
    convex_dominates, default_levels, empirical_premium, ks_critical, ks_critical_two, ks_distance, ks_two_sample,
    moment_summary, pooled_grid,
};
use lpplab::*;
use lpplab_cli::{mix, simulate, MixArgs, SimulateArgs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn sample(marginal: &str, lattice: &str, coupling: &str, reps: u64, seed: u64) -> Vec<f64> {
    simulate(&SimulateArgs::new(marginal, lattice, coupling, reps, seed))
        .unwrap_or_else(|e| panic!("{coupling} on {lattice}: {e:#}"))
        .values
}

fn within(label: &str, value: f64, target: f64, se: f64, k: f64) -> Check {
    let z = (value - target) / se;
    let msg = format!("{label} {value:.6} vs {target:.6} ({z:+.2} se)");
    if z.abs() < k {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn all(parts: Vec<Check>) -> Check {
    let ok = parts.iter().all(Result::is_ok);
    let text = parts
        .into_iter()
        .map(|p| match p {
            Ok(s) => s,
            Err(s) => format!("FAILED {s}"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn closed_form_worst_case() -> Check {
    let v = sample("exp:theta=1", "line:10", "flat:polya", 100_000, 1);
    let s = moment_summary(&v).unwrap();
    all(vec![
        within("mean", s.mean, 10.0 + ln_factorial(10), s.se_mean, 4.0),
        within("var", s.variance, 100.0, s.se_variance, 4.0),
    ])
}

fn line_equals_complete() -> Check {
    let mut parts = Vec::new();
    for (i, f) in ["exp:theta=1", "unif", "pareto1:alpha=2"].into_iter().enumerate() {
        let a = EmpiricalSample::new(sample(f, "line:8", "flat:polya", 100_000, 10 + i as u64)).unwrap();
        let b = EmpiricalSample::new(sample(f, "complete:8", "convexmax", 100_000, 20 + i as u64)).unwrap();
        let d = ks_two_sample(&a, &b);
        let c = ks_critical_two(0.01, a.len(), b.len());
        let msg = format!("{f} D={d:.5} < {c:.5}");
        parts.push(if d < c { Ok(msg) } else { Err(msg) });
    }
    all(parts)
}

fn exact_flatness() -> Check {
    let mut parts = Vec::new();
    for n in 1..=6 {
        let ok = is_flat(couplings::WalkKind::Polya, &LatticeSpec::line(n).unwrap()).unwrap();
        parts.push(if ok { Ok(format!("polya {n}")) } else { Err(format!("polya {n}")) });
    }
    for (n, m) in [(5, 3), (6, 4)] {
        let ok = is_flat(couplings::WalkKind::Rectangle, &LatticeSpec::point(n, m).unwrap()).unwrap();
        let msg = format!("rectangle ({n},{m})");
        parts.push(if ok { Ok(msg) } else { Err(msg) });
    }
    all(parts)
}

fn generic_matches_closed_form() -> Check {
    let f = Marginal::exponential(1.0).unwrap();
    let mut parts = Vec::new();
    for n in [3usize, 4] {
        let lattice = LatticeSpec::complete(n).unwrap();
        let law = worst_case_law(&lattice, &f).unwrap();
        let grid = law.grid(&default_levels());
        let sys = SubsetSystem::from_paths(&lattice, &f).unwrap();
        let curve = match generic_bound(&sys, &grid) {
            Ok(c) => c,
            Err(e) => return Err(format!("C_{n}: {e}")),
        };
        let err = grid
            .iter()
            .zip(&curve.b)
            .map(|(&x, &b)| (b - law.premium(x)).abs())
            .fold(0.0f64, f64::max);
        let msg = format!("C_{n} max error {err:.2e} over {} points", grid.len());
        parts.push(if err < 1e-6 { Ok(msg) } else { Err(msg) });
    }
    all(parts)
}

fn frechet_attainment() -> Check {
    let f = Marginal::exponential(1.0).unwrap();
    let reps = 100_000u64;
    let maxima = replicate(30, reps, |rng, _| {
        sample_maximally_dependent(&f, 4, rng).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max)
    });
    let s = EmpiricalSample::new(maxima).unwrap();
    let env = frechet_envelope(&f, 4).unwrap();
    let d = ks_distance(&s, &env.law);
    let c = ks_critical(0.01, s.len());
    let ks = format!("KS {d:.5} < {c:.5}");
    let iid = replicate(31, reps, |rng, _| (0..4).map(|_| f.draw(rng)).fold(f64::NEG_INFINITY, f64::max));
    let m = moment_summary(&iid).unwrap();
    all(vec![
        if d < c { Ok(ks) } else { Err(ks) },
        within("iid max mean", m.mean, 25.0 / 12.0, m.se_mean, 4.0),
    ])
}

fn convex_dominance() -> Check {
    let mut parts = Vec::new();
    let levels = default_levels();
    for (i, (f, lattice)) in [("exp:theta=1", "line:10"), ("unif", "line:10"), ("pareto1:alpha=2", "line:8")]
        .into_iter()
        .enumerate()
    {
        let iid = EmpiricalSample::new(sample(f, lattice, "iid", 100_000, 40 + i as u64)).unwrap();
        let worst = EmpiricalSample::new(sample(f, lattice, "convexmax", 100_000, 50 + i as u64)).unwrap();
        let grid = pooled_grid(&[&iid, &worst], &levels).unwrap();
        let r = convex_dominates(&empirical_premium(&worst, &grid), &empirical_premium(&iid, &grid), 4.0).unwrap();
        let msg = format!("{f} {lattice}: {} violations of {}", r.violations, grid.len());
        parts.push(if r.holds() { Ok(msg) } else { Err(msg) });
    }
    let f = Marginal::exponential(1.0).unwrap();
    let lattice = LatticeSpec::point(9, 3).unwrap();
    let law = worst_case_law(&lattice, &f).unwrap();
    let iid = EmpiricalSample::new(sample("exp:theta=1", "point:9:3", "iid", 100_000, 60)).unwrap();
    let grid = pooled_grid(&[&iid], &levels).unwrap();
    let r = convex_dominates(&PremiumCurve::analytic(&law, &grid), &empirical_premium(&iid, &grid), 4.0).unwrap();
    let msg = format!("point 9,3 vs law: {} violations of {}", r.violations, grid.len());
    parts.push(if r.holds() { Ok(msg) } else { Err(msg) });
    all(parts)
}

fn oracle_equivalence() -> Check {
    let mut specs = Vec::new();
    specs.extend((2..=8).map(|n| LatticeSpec::line(n).unwrap()));
    specs.extend([(4, 2), (5, 3), (6, 2)].map(|(n, m)| LatticeSpec::point(n, m).unwrap()));
    specs.extend((2..=6).map(|n| LatticeSpec::complete(n).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut mismatches = Vec::new();
    for spec in &specs {
        let paths: Vec<LatticePath> = enumerate_paths(spec).unwrap().into_iter().filter(|p| p.is_valid_for(spec)).collect();
        for _ in 0..1000 {
            let w = WeightField::from_fn(spec.n, |_| rng.random::<f64>());
            let brute = paths.iter().map(|p| p.weight(&w)).fold(f64::NEG_INFINITY, f64::max);
            if lpp(spec, &w) != brute {
                mismatches.push(spec.to_string());
                break;
            }
        }
    }
    if mismatches.is_empty() {
        Ok(format!("{} lattices x 1000 fields exact", specs.len()))
    } else {
        Err(format!("mismatch on {}", mismatches.join(", ")))
    }
}

fn mixing_variance() -> Check {
    let mut args = MixArgs {
        marginal: "exp:theta=1".into(),
        b: vec![3.0, 5.0, 7.0],
        n: Vec::new(),
        reps: 100_000,
        seed: 80,
        atoms: None,
        out: None,
    };
    let (_, rows) = mix(&args).map_err(|e| e.to_string())?;
    let mut parts: Vec<Check> = rows
        .iter()
        .map(|r| {
            let se = (r.stderr.powi(2) + r.residual_stderr.powi(2)).sqrt();
            within(&format!("b={} V", r.b.unwrap()), r.empirical_v, r.analytic_v + r.residual_v, se, 4.0)
        })
        .collect();
    args.marginal = "unif".into();
    args.b.clear();
    args.n = vec![2, 4, 8];
    let (_, rows) = mix(&args).map_err(|e| e.to_string())?;
    for r in rows {
        let msg = format!("uniform N={} V={}", r.n, r.empirical_v);
        parts.push(if r.empirical_v == 0.0 { Ok(msg) } else { Err(msg) });
    }
    all(parts)
}

fn iid_trends() -> Check {
    let v = sample("exp:theta=1", "line:200", "iid", 1000, 90);
    let ratio = v.iter().map(|r| r / 200.0).sum::<f64>() / v.len() as f64;
    let band = format!("R/N mean {ratio:.4} in (1.7, 2.0)");
    let u = sample("unif", "complete:50", "iid", 10_000, 91);
    let s = moment_summary(&u).unwrap();
    all(vec![
        if ratio > 1.7 && ratio < 2.0 { Ok(band) } else { Err(band) },
        within("uniform complete:50 mean", s.mean, 51.0 - harmonic(51), s.se_mean, 4.0),
    ])
}

fn shape_functions() -> Check {
    let c = shape_convex_bound(0.5).unwrap();
    let r = shape_rost(0.5).unwrap();
    let rows = shape_table(99);
    let asym = (0..rows.len())
        .map(|k| {
            let (p, q) = (&rows[k], &rows[rows.len() - 1 - k]);
            (p.convex_shape - q.convex_shape).abs().max((p.rost_shape - q.rost_shape).abs())
        })
        .fold(0.0f64, f64::max);
    let ok = (c - (-1.0 - 2f64.ln())).abs() < 1e-12 && (r - 2.0).abs() < 1e-12 && asym < 1e-12;
    let msg = format!("convex(1/2) = {c}, rost(1/2) = {r}, asymmetry {asym:.1e}");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn max_mean_mixed() -> Check {
    let v = sample("exp:theta=1", "complete:16", "maxmeanmixed", 100_000, 100);
    let s = moment_summary(&v).unwrap();
    let var = format!("var {:.4} <= 64", s.variance);
    all(vec![
        within("mean", s.mean, 16.0 + ln_factorial(16), s.se_mean, 4.0),
        if s.variance * 4.0 <= 256.0 { Ok(var) } else { Err(var) },
    ])
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_lpplab"))
        .args(["selftest", "--dir"])
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout).lines().next().unwrap_or("").to_string();
    let a = std::fs::read(dir.path().join("selftest-1-threads.csv")).map_err(|e| e.to_string())?;
    let b = std::fs::read(dir.path().join("selftest-8-threads.csv")).map_err(|e| e.to_string())?;
    if out.status.success() && a == b {
        Ok(format!("{text} ({} bytes)", a.len()))
    } else {
        Err(format!("exit {:?}: {text}", out.status.code()))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("closed-form worst case, exp line:10", closed_form_worst_case),
        ("line:8 and complete:8 worst cases agree", line_equals_complete),
        ("exact flatness of the walks", exact_flatness),
        ("generic bound matches the closed form", generic_matches_closed_form),
        ("Frechet attainment", frechet_attainment),
        ("convex dominance over iid", convex_dominance),
        ("DP equals brute force", oracle_equivalence),
        ("block-scheme mixing variance", mixing_variance),
        ("iid trend checks", iid_trends),
        ("shape functions", shape_functions),
        ("max-mean mixed coupling", max_mean_mixed),
        ("determinism across thread counts", determinism),
    ];
    // `cargo test` passes harness flags; a bare word filters by name
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) && *f != (i + 1).to_string() {
                continue;
            }
        }
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("criterion {:>2} PASS [{secs:6.1}s] {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL [{secs:6.1}s] {name}: {msg}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
