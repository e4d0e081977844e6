use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use lpplab::bounds::{generic_bound, shape_table, worst_case_law, BoundCurve, SubsetSystem, WorstCaseLaw};
use lpplab::mixing::{block_atoms, mixable_sum_uniform, n_for_threshold, threshold_for_n, variance_law, BlockScheme};
use lpplab::rng::{derive_seed, replicate};
use lpplab::stats::{
    convex_dominates, empirical_premium, ks_critical, ks_critical_two, ks_distance, ks_two_sample, levels,
    moment_summary, pooled_grid, stochastic_dominates, stochastic_dominates_law, ComparisonRow, DominanceReport,
    EmpiricalSample, PremiumCurve, Verdict,
};
use lpplab::{Coupling, CouplingKind, CouplingSpec, LatticeSpec, Law, Marginal};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::output::{num, sample_from_file, with_output, write_json, write_samples, write_table};
use crate::{BoundArgs, DominanceArgs, MixArgs, SelftestArgs, ShapeArgs, SimulateArgs};

const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

fn parse_marginal(s: &str) -> Result<Marginal> {
    s.parse().with_context(|| format!("bad --marginal `{s}`"))
}

fn parse_lattice(s: &str) -> Result<LatticeSpec> {
    s.parse().with_context(|| format!("bad --lattice `{s}`"))
}

// ---- simulate ----

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub n: u64,
    pub mean: f64,
    /// `None` for a single replicate.
    pub var: Option<f64>,
    pub se_mean: Option<f64>,
    /// At 1, 5, 25, 50, 75, 95 and 99 percent.
    pub quantiles: [f64; 7],
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ExperimentConfig,
    /// In replicate order.
    pub values: Vec<f64>,
    pub summary: Summary,
}

pub fn simulate_config(a: &SimulateArgs) -> ExperimentConfig {
    ExperimentConfig {
        marginal: Some(a.marginal.clone()),
        lattice: Some(a.lattice.clone()),
        coupling: Some(a.coupling.clone()),
        reps: Some(a.reps),
        seed: Some(a.seed),
        format: Some(a.format),
        ..ExperimentConfig::new("simulate")
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<Simulation> {
    ensure!(a.reps >= 1, "--reps must be at least 1");
    let marginal = parse_marginal(&a.marginal)?;
    let lattice = parse_lattice(&a.lattice)?;
    let kind: CouplingKind = a.coupling.parse().with_context(|| format!("bad --coupling `{}`", a.coupling))?;
    let coupling = Coupling::new(CouplingSpec::new(kind, marginal, lattice))?;
    let values = coupling.simulate(a.seed, a.reps)?;
    let config = simulate_config(a);
    let summary = summarize(&config, &values);
    Ok(Simulation {
        config,
        values,
        summary,
    })
}

fn summarize(config: &ExperimentConfig, values: &[f64]) -> Summary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let (var, se_mean, quantiles) = match EmpiricalSample::new(values.to_vec()) {
        Ok(s) => {
            let m = moment_summary(values).expect("two or more values");
            (Some(m.variance), Some(m.se_mean), QUANTILE_LEVELS.map(|p| s.quantile(p)))
        }
        Err(_) => (None, None, [values[0]; 7]),
    };
    Summary {
        config: config.clone(),
        n: n as u64,
        mean,
        var,
        se_mean,
        quantiles,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_summary(path: Option<&Path>, s: &Summary, format: Format) -> Result<()> {
    with_output(path, |w| match format {
        Format::Json => write_json(w, s),
        Format::Csv => {
            let mut row = vec![s.n.to_string(), num(s.mean), opt(s.var), opt(s.se_mean)];
            row.extend(s.quantiles.iter().map(|&q| num(q)));
            write_table(
                w,
                &s.config,
                &["n", "mean", "var", "se_mean", "q01", "q05", "q25", "q50", "q75", "q95", "q99"],
                [row],
            )
        }
    })
}

pub fn run_simulate(a: &SimulateArgs) -> Result<Simulation> {
    let sim = simulate(a)?;
    if let Some(p) = &a.out {
        with_output(Some(p), |w| write_samples(w, &sim.config, &sim.values))?;
    }
    write_summary(a.summary.as_deref(), &sim.summary, a.format)?;
    Ok(sim)
}

// ---- bound ----

#[derive(Debug, Clone)]
pub struct BoundOutput {
    pub config: ExperimentConfig,
    pub curve: BoundCurve,
}

fn even_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

pub fn bound(a: &BoundArgs) -> Result<BoundOutput> {
    ensure!(a.grid >= 1, "--grid must be at least 1");
    let marginal = parse_marginal(&a.marginal)?;
    let mut config = ExperimentConfig {
        marginal: Some(a.marginal.clone()),
        lattice: a.lattice.clone(),
        grid: Some(a.grid),
        ..ExperimentConfig::new("bound")
    };
    config.extra.extend(a.x_min.map(|x| format!("x_min={x}")));
    config.extra.extend(a.x_max.map(|x| format!("x_max={x}")));

    let curve = if let Some(path) = &a.system {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read system file {}", path.display()))?;
        let sys = SubsetSystem::parse(&text, &marginal)?;
        config.extra.push(format!("system={}", text.trim_end().replace('\n', ";")));
        let (lo, hi) = system_range(&sys);
        let grid = even_grid(a.x_min.unwrap_or(lo), a.x_max.unwrap_or(hi), a.grid);
        generic_bound(&sys, &grid)?
    } else {
        let lattice = parse_lattice(a.lattice.as_deref().expect("clap requires --lattice or --system"))?;
        let law = worst_case_law(&lattice, &marginal)?;
        let grid = match (a.x_min, a.x_max) {
            (None, None) => law.grid(&levels(a.grid)),
            (lo, hi) => even_grid(
                lo.unwrap_or(law.quantile(0.001)),
                hi.unwrap_or(law.quantile(0.999)),
                a.grid,
            ),
        };
        analytic_curve(&law, grid)
    };
    Ok(BoundOutput { config, curve })
}

// From the largest sum of infima up to a union-bound 99.9% point of the
// largest subset sum.
fn system_range(sys: &SubsetSystem) -> (f64, f64) {
    let f = sys.marginals();
    let level = 1e-3 / f.len() as f64;
    let per = |pick: &dyn Fn(&Marginal) -> f64| {
        sys.subsets()
            .iter()
            .map(|k| k.iter().map(|&n| pick(&f[n])).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let lo = per(&|m| m.infimum());
    let hi = per(&|m| m.sample(level));
    (lo, hi.max(lo + 1.0))
}

fn analytic_curve(law: &WorstCaseLaw, grid: Vec<f64>) -> BoundCurve {
    let b = grid.iter().map(|&x| law.premium(x)).collect();
    let slope = grid.iter().map(|&x| -law.survival(x)).collect();
    let k = grid.len();
    // linear with slope -1 below the infimum
    let x0 = law.infimum();
    BoundCurve {
        b0: law.premium(x0),
        x: grid,
        b,
        slope,
        lambda: vec![Vec::new(); k],
        v: vec![Vec::new(); k],
        x0,
    }
}

fn write_curve(path: Option<&Path>, out: &BoundOutput) -> Result<()> {
    with_output(path, |w| {
        let mut buf = Vec::new();
        out.curve.write_csv(&mut buf)?;
        let mut head = Vec::new();
        crate::output::write_header(&mut head, &out.config)?;
        w.write_all(&head)?;
        w.write_all(&buf)?;
        Ok(())
    })
}

pub fn run_bound(a: &BoundArgs) -> Result<BoundOutput> {
    let out = bound(a)?;
    write_curve(a.out.as_deref(), &out)?;
    Ok(out)
}

// ---- shape ----

pub fn shape(a: &ShapeArgs) -> Result<(ExperimentConfig, Vec<lpplab::bounds::ShapeRow>)> {
    ensure!(a.grid >= 1, "--grid must be at least 1");
    let config = ExperimentConfig {
        grid: Some(a.grid),
        ..ExperimentConfig::new("shape")
    };
    Ok((config, shape_table(a.grid)))
}

pub fn run_shape(a: &ShapeArgs) -> Result<()> {
    let (config, rows) = shape(a)?;
    with_output(a.out.as_deref(), |w| {
        let rows = rows
            .iter()
            .map(|r| vec![num(r.gamma), num(r.convex_shape), num(r.rost_shape)]);
        write_table(w, &config, &["gamma", "convex_shape", "rost_shape"], rows)
    })
}

// ---- dominance ----

#[derive(Debug, Clone, Serialize)]
pub struct OrderVerdict {
    pub verdict: Verdict,
    pub slack: f64,
    pub violations: usize,
    pub points: usize,
    pub worst: Option<ComparisonRow>,
}

impl From<&DominanceReport> for OrderVerdict {
    fn from(r: &DominanceReport) -> Self {
        Self {
            verdict: r.verdict,
            slack: r.slack,
            violations: r.violations,
            points: r.rows.len(),
            worst: r.worst,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceOutput {
    pub config: ExperimentConfig,
    pub stochastic: OrderVerdict,
    pub convex: OrderVerdict,
    /// KS statistic (two-sample, or against the law) and its 1% critical value.
    pub ks: f64,
    pub ks_critical: f64,
    #[serde(skip)]
    pub rows: Vec<ComparisonRow>,
}

pub fn dominance(a: &DominanceArgs) -> Result<DominanceOutput> {
    ensure!(a.grid >= 1, "--grid must be at least 1");
    let sa = sample_from_file(&a.a)?;
    let mut config = ExperimentConfig {
        grid: Some(a.grid),
        ..ExperimentConfig::new("dominance")
    };
    config.extra.push(format!("a={}", a.a.display()));
    config.extra.extend(a.b.as_ref().map(|b| format!("b={}", b.display())));
    config.extra.push(format!("slack={}", a.slack));
    let lv = levels(a.grid);
    let (stochastic, convex, ks, ks_crit) = match (&a.b, &a.law) {
        (Some(pb), _) => {
            let sb = sample_from_file(pb)?;
            let grid = pooled_grid(&[&sa, &sb], &lv)?;
            let convex = convex_dominates(&empirical_premium(&sa, &grid), &empirical_premium(&sb, &grid), a.slack)?;
            (
                stochastic_dominates(&sa, &sb, a.slack),
                convex,
                ks_two_sample(&sa, &sb),
                ks_critical_two(0.01, sa.len(), sb.len()),
            )
        }
        (None, Some(lattice)) => {
            let marginal = parse_marginal(&a.marginal)?;
            let law = worst_case_law(&parse_lattice(lattice)?, &marginal)?;
            config.marginal = Some(a.marginal.clone());
            config.lattice = Some(lattice.clone());
            let grid = pooled_grid(&[&sa], &lv)?;
            let convex = convex_dominates(&empirical_premium(&sa, &grid), &PremiumCurve::analytic(&law, &grid), a.slack)?;
            (
                stochastic_dominates_law(&sa, &law, a.slack),
                convex,
                ks_distance(&sa, &law),
                ks_critical(0.01, sa.len()),
            )
        }
        (None, None) => bail!("give --b or --law"),
    };
    Ok(DominanceOutput {
        config,
        stochastic: (&stochastic).into(),
        convex: (&convex).into(),
        ks,
        ks_critical: ks_crit,
        rows: convex.rows,
    })
}

pub fn run_dominance(a: &DominanceArgs) -> Result<DominanceOutput> {
    let out = dominance(a)?;
    if let Some(p) = &a.out {
        with_output(Some(p), |w| {
            let rows = out.rows.iter().map(|r| {
                vec![num(r.x), num(r.a), num(r.se_a), num(r.b), num(r.se_b), num(r.margin_in_se)]
            });
            write_table(w, &out.config, &["x", "H_a", "se_a", "H_b", "se_b", "margin_in_se"], rows)
        })?;
    }
    with_output(a.report.as_deref(), |w| write_json(w, &out))?;
    Ok(out)
}

// ---- mix ----

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MixRow {
    pub n: usize,
    /// Empty for the antithetic uniform construction.
    pub b: Option<f64>,
    pub analytic_v: f64,
    pub empirical_v: f64,
    pub stderr: f64,
    /// Measured variance of the sum inside the balanced block, with its se.
    pub residual_v: f64,
    pub residual_stderr: f64,
}

pub fn mix(a: &MixArgs) -> Result<(ExperimentConfig, Vec<MixRow>)> {
    ensure!(a.reps >= 3, "--reps must be at least 3");
    ensure!(!(a.b.is_empty() && a.n.is_empty()), "give --b or --n");
    let f = parse_marginal(&a.marginal)?;
    let mut config = ExperimentConfig {
        marginal: Some(a.marginal.clone()),
        reps: Some(a.reps),
        seed: Some(a.seed),
        ..ExperimentConfig::new("mix")
    };
    if !a.b.is_empty() {
        config.extra.push(format!("b={}", a.b.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",")));
    }
    if !a.n.is_empty() {
        config.extra.push(format!("n={}", a.n.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")));
    }
    config.extra.extend(a.atoms.map(|m| format!("atoms={m}")));

    let mut rows = Vec::new();
    let plans: Vec<(Option<f64>, Option<usize>)> = if a.b.is_empty() {
        a.n.iter().map(|&n| (None, Some(n))).collect()
    } else {
        a.b.iter().map(|&b| (Some(b), None)).collect()
    };
    for (i, (b, n)) in plans.into_iter().enumerate() {
        let seed = derive_seed(a.seed, i as u64);
        if let (None, Some(n)) = (b, n) {
            if f.is_uniform() {
                let sums = replicate(seed, a.reps, |rng, _| {
                    mixable_sum_uniform(n, rng).map(|w| w.iter().sum::<f64>())
                })
                .into_iter()
                .collect::<lpplab::Result<Vec<f64>>>()?;
                let s = moment_summary(&sums)?;
                rows.push(MixRow {
                    n,
                    b: None,
                    analytic_v: 0.0,
                    empirical_v: s.variance,
                    stderr: s.se_variance,
                    residual_v: 0.0,
                    residual_stderr: 0.0,
                });
                continue;
            }
        }
        let (b, n) = match (b, n) {
            (Some(b), _) => (b, n_for_threshold(&f, b)?),
            (None, Some(n)) => (threshold_for_n(&f, n)?, n),
            (None, None) => unreachable!(),
        };
        let scheme = BlockScheme::new(f.clone(), b, n, a.atoms.unwrap_or_else(|| block_atoms(n)))?;
        let sums = replicate(seed, a.reps, |rng, _| scheme.sample_weights(rng).map(|w| w.iter().sum::<f64>()))
            .into_iter()
            .collect::<lpplab::Result<Vec<f64>>>()?;
        let s = moment_summary(&sums)?;
        let resid = scheme.measure_residual(derive_seed(seed, 0x5eed), a.reps);
        rows.push(MixRow {
            n,
            b: Some(b),
            analytic_v: variance_law(&f, b, n)?,
            empirical_v: s.variance,
            stderr: s.se_variance,
            residual_v: resid.variance,
            residual_stderr: resid.se_variance,
        });
    }
    Ok((config, rows))
}

pub fn run_mix(a: &MixArgs) -> Result<Vec<MixRow>> {
    let (config, rows) = mix(a)?;
    with_output(a.out.as_deref(), |w| {
        let table = rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                opt(r.b),
                num(r.analytic_v),
                num(r.empirical_v),
                num(r.stderr),
                num(r.residual_v),
                num(r.residual_stderr),
            ]
        });
        write_table(
            w,
            &config,
            &["N", "b", "analytic_V", "empirical_V", "stderr", "residual_V", "residual_stderr"],
            table,
        )
    })?;
    Ok(rows)
}

// ---- selftest ----

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub files: Vec<PathBuf>,
    pub identical: bool,
    pub mean: f64,
    pub se_mean: f64,
    pub target_mean: f64,
    pub var: f64,
    pub se_var: f64,
    pub target_var: f64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.identical
            && (self.mean - self.target_mean).abs() < 4.0 * self.se_mean
            && (self.var - self.target_var).abs() < 4.0 * self.se_var
    }
}

/// The exponential line:10 worst case, sampled on one and on eight worker
/// threads into two files that must match byte for byte.
pub fn selftest(a: &SelftestArgs, dir: &Path) -> Result<SelftestReport> {
    let args = SimulateArgs::new("exp:theta=1", "line:10", "flat:polya", a.reps, a.seed);
    let mut files = Vec::new();
    let mut last = None;
    for threads in [1usize, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        let sim = pool.install(|| simulate(&args))?;
        let path = dir.join(format!("selftest-{threads}-threads.csv"));
        with_output(Some(&path), |w| write_samples(w, &sim.config, &sim.values))?;
        files.push(path);
        last = Some(sim);
    }
    let sim = last.expect("two runs");
    let bytes: Vec<Vec<u8>> = files.iter().map(fs::read).collect::<std::io::Result<_>>()?;
    let m = moment_summary(&sim.values)?;
    let ln_fact: f64 = (1..=10).map(|k| (k as f64).ln()).sum();
    Ok(SelftestReport {
        identical: bytes[0] == bytes[1],
        files,
        mean: m.mean,
        se_mean: m.se_mean,
        target_mean: 10.0 + ln_fact,
        var: m.variance,
        se_var: m.se_variance,
        target_var: 100.0,
    })
}

pub fn run_selftest(a: &SelftestArgs) -> Result<bool> {
    let tmp;
    let dir = match &a.dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            d.clone()
        }
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };
    let r = selftest(a, &dir)?;
    println!(
        "{} sample files identical across 1 and 8 threads",
        if r.identical { "PASS" } else { "FAIL" }
    );
    println!(
        "mean {:.4} (se {:.4}) vs {:.4}; var {:.3} (se {:.3}) vs {}",
        r.mean, r.se_mean, r.target_mean, r.var, r.se_var, r.target_var
    );
    println!("{}", if r.passed() { "selftest passed" } else { "selftest FAILED" });
    Ok(r.passed())
}
