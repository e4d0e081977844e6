//! Empirical samples, premium curves, dominance verdicts, KS distances and
//! moment summaries.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::marginals::Law;

/// Mean and unbiased variance with jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    /// `NaN` for fewer than three values.
    pub se_variance: f64,
}

/// Summarizes at least two values.
pub fn moment_summary(values: &[f64]) -> Result<MomentSummary> {
    let n = values.len();
    if n < 2 {
        return Err(invalid("sample", "needs at least two values"));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let variance = ss / (nf - 1.0);
    // jackknife of the mean reduces to sd / sqrt(n)
    let se_mean = (variance / nf).sqrt();
    let se_variance = if n < 3 {
        f64::NAN
    } else {
        // leave-one-out variances in O(n)
        let loo = |v: f64| (ss - nf / (nf - 1.0) * (v - mean) * (v - mean)) / (nf - 2.0);
        let avg = values.iter().map(|&v| loo(v)).sum::<f64>() / nf;
        let spread: f64 = values.iter().map(|&v| (loo(v) - avg).powi(2)).sum();
        ((nf - 1.0) / nf * spread).sqrt()
    };
    Ok(MomentSummary {
        n,
        mean,
        variance,
        se_mean,
        se_variance,
    })
}

/// A sorted sample with optional provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    pub seed: Option<u64>,
    pub provenance: Option<String>,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid("sample", "needs at least two values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sample", "contains non-finite values"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            values,
            seed: None,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, seed: u64, provenance: impl Into<String>) -> Self {
        self.seed = Some(seed);
        self.provenance = Some(provenance.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn survival(&self, x: f64) -> f64 {
        let above = self.values.len() - self.values.partition_point(|&v| v <= x);
        above as f64 / self.values.len() as f64
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// Type-7 sample quantile at probability `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        self.values[lo] + (h - lo as f64) * (self.values[hi] - self.values[lo])
    }

    pub fn summary(&self) -> MomentSummary {
        moment_summary(&self.values).expect("at least two values")
    }

    /// Shifts every value by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
            seed: self.seed,
            provenance: self.provenance.clone(),
        }
    }
}

/// `99` evenly spaced probability levels from `0.001` to `0.999`.
pub fn default_levels() -> Vec<f64> {
    levels(99)
}

/// `count` evenly spaced probability levels from `0.001` to `0.999`.
pub fn levels(count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5];
    }
    let step = 0.998 / (count - 1) as f64;
    (0..count).map(|i| 0.001 + step * i as f64).collect()
}

/// Pooled-sample quantiles at the given levels, deduplicated and sorted.
pub fn pooled_grid(samples: &[&EmpiricalSample], levels: &[f64]) -> Result<Vec<f64>> {
    let pooled: Vec<f64> = samples.iter().flat_map(|s| s.values().iter().copied()).collect();
    let pooled = EmpiricalSample::new(pooled)?;
    let mut grid: Vec<f64> = levels.iter().map(|&p| pooled.quantile(p)).collect();
    grid.dedup();
    Ok(grid)
}

/// A grid of premiums `E[(V - x)^+]`, with standard errors (zero when analytic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumCurve {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub se: Vec<f64>,
}

impl PremiumCurve {
    pub fn analytic<L: Law + ?Sized>(law: &L, grid: &[f64]) -> Self {
        Self {
            x: grid.to_vec(),
            h: grid.iter().map(|&x| law.premium(x)).collect(),
            se: vec![0.0; grid.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Empirical premium on `grid` with jackknife standard errors.
pub fn empirical_premium(s: &EmpiricalSample, grid: &[f64]) -> PremiumCurve {
    let v = s.values();
    let nf = v.len() as f64;
    let mut h = Vec::with_capacity(grid.len());
    let mut se = Vec::with_capacity(grid.len());
    for &x in grid {
        let start = v.partition_point(|&t| t <= x);
        let tail = &v[start..];
        let sum: f64 = tail.iter().map(|t| t - x).sum();
        let mean = sum / nf;
        let k = tail.len() as f64;
        // zeros below x contribute mean² each
        let ss: f64 = tail.iter().map(|t| (t - x - mean).powi(2)).sum::<f64>() + (nf - k) * mean * mean;
        h.push(mean);
        se.push((ss / (nf - 1.0) / nf).sqrt());
    }
    PremiumCurve {
        x: grid.to_vec(),
        h,
        se,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Dominates,
    Dominated,
    Crossing,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Dominates => "dominates",
            Verdict::Dominated => "dominated",
            Verdict::Crossing => "crossing",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// One grid point of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub x: f64,
    pub a: f64,
    pub se_a: f64,
    pub b: f64,
    pub se_b: f64,
    /// `(a - b) / sqrt(se_a² + se_b²)`; `±∞` for exact curves that differ.
    pub margin_in_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub verdict: Verdict,
    pub slack: f64,
    pub rows: Vec<ComparisonRow>,
    /// Grid points where `a` falls below `b` by more than the slack.
    pub violations: usize,
    /// Row with the smallest margin.
    pub worst: Option<ComparisonRow>,
}

impl DominanceReport {
    /// `a ≥ b` everywhere up to the slack.
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

// Differences this small are treated as exact ties between analytic values.
fn tie_tolerance(a: f64, b: f64) -> f64 {
    1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn compare(rows: Vec<ComparisonRow>, slack: f64) -> DominanceReport {
    let mut below = 0;
    let mut above = 0;
    let mut ties = 0;
    for r in &rows {
        let diff = r.a - r.b;
        let se = (r.se_a * r.se_a + r.se_b * r.se_b).sqrt();
        let band = slack * se + tie_tolerance(r.a, r.b);
        if diff.abs() <= tie_tolerance(r.a, r.b) {
            ties += 1;
        }
        if diff < -band {
            below += 1;
        } else if diff > band {
            above += 1;
        }
    }
    let verdict = if ties == rows.len() {
        Verdict::Dominates
    } else {
        match (below, above) {
            (0, 0) => Verdict::Inconclusive,
            (0, _) => Verdict::Dominates,
            (_, 0) => Verdict::Dominated,
            _ => Verdict::Crossing,
        }
    };
    let worst = rows
        .iter()
        .copied()
        .min_by(|p, q| p.margin_in_se.total_cmp(&q.margin_in_se));
    DominanceReport {
        verdict,
        slack,
        rows,
        violations: below,
        worst,
    }
}

fn margin(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let diff = a - b;
    let se = (se_a * se_a + se_b * se_b).sqrt();
    if diff.abs() <= tie_tolerance(a, b) {
        0.0
    } else if se == 0.0 {
        diff.signum() * f64::INFINITY
    } else {
        diff / se
    }
}

/// Whether `a` is convexly bigger than `b`, pointwise on the shared grid.
pub fn convex_dominates(a: &PremiumCurve, b: &PremiumCurve, slack: f64) -> Result<DominanceReport> {
    if a.x.len() != b.x.len() || a.x.iter().zip(&b.x).any(|(p, q)| p != q) {
        return Err(Error::GridMismatch(format!(
            "grids of {} and {} points differ",
            a.x.len(),
            b.x.len()
        )));
    }
    let rows = (0..a.len())
        .map(|i| ComparisonRow {
            x: a.x[i],
            a: a.h[i],
            se_a: a.se[i],
            b: b.h[i],
            se_b: b.se[i],
            margin_in_se: margin(a.h[i], a.se[i], b.h[i], b.se[i]),
        })
        .collect();
    Ok(compare(rows, slack))
}

/// Whether `a` is stochastically bigger than `b`: survival functions compared
/// on the merged support with binomial standard errors.
pub fn stochastic_dominates(a: &EmpiricalSample, b: &EmpiricalSample, slack: f64) -> DominanceReport {
    let mut grid: Vec<f64> = a.values().iter().chain(b.values()).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let rows = grid
        .into_iter()
        .map(|x| {
            let sa = a.survival(x);
            let sb = b.survival(x);
            let se_a = (sa * (1.0 - sa) / na).sqrt();
            let se_b = (sb * (1.0 - sb) / nb).sqrt();
            ComparisonRow {
                x,
                a: sa,
                se_a,
                b: sb,
                se_b,
                margin_in_se: margin(sa, se_a, sb, se_b),
            }
        })
        .collect();
    compare(rows, slack)
}

/// [`stochastic_dominates`] against an exact law, on the sample's support.
pub fn stochastic_dominates_law<L: Law + ?Sized>(a: &EmpiricalSample, law: &L, slack: f64) -> DominanceReport {
    let mut grid = a.values().to_vec();
    grid.dedup();
    let na = a.len() as f64;
    let rows = grid
        .into_iter()
        .map(|x| {
            let sa = a.survival(x);
            let sb = law.survival(x);
            let se_a = (sa * (1.0 - sa) / na).sqrt();
            ComparisonRow {
                x,
                a: sa,
                se_a,
                b: sb,
                se_b: 0.0,
                margin_in_se: margin(sa, se_a, sb, 0.0),
            }
        })
        .collect();
    compare(rows, slack)
}

/// `sup_x |F_n(x) - F(x)|` against a continuous law.
pub fn ks_distance<L: Law + ?Sized>(s: &EmpiricalSample, law: &L) -> f64 {
    let v = s.values();
    let nf = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        // step over ties as one jump
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = law.cdf(v[i]);
        d = d.max(f - i as f64 / nf).max((j + 1) as f64 / nf - f);
        i = j + 1;
    }
    d
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &EmpiricalSample, b: &EmpiricalSample) -> f64 {
    let (x, y) = (a.values(), b.values());
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic KS constant `c(α) = sqrt(-ln(α/2) / 2)`.
pub fn ks_constant(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

/// One-sample critical value at level `alpha` for `n` draws.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    ks_constant(alpha) / (n as f64).sqrt()
}

/// Two-sample critical value at level `alpha`.
pub fn ks_critical_two(alpha: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_constant(alpha) * ((n + m) / (n * m)).sqrt()
}
