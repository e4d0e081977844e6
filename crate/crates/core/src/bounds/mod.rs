//! Analytic convex upper bounds on LPP times: Fréchet envelopes, the law of
//! the convexly maximal LPP time, its linear closed forms for memoryless
//! marginals, asymptotic shape functions and the generic subset bound.

pub mod generic;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::lattice::{LatticeKind, LatticeSpec};
use crate::marginals::{Law, Marginal};
use crate::quad;

pub use generic::{generic_bound, pointwise_chain, pointwise_chain_check, BoundCurve, SolverOptions, SubsetSystem};

/// The law of `a W + b` with `W ~ F`.
#[derive(Debug, Clone)]
pub struct LinearLaw {
    pub a: f64,
    pub b: f64,
    pub marginal: Marginal,
}

impl LinearLaw {
    pub fn new(a: f64, b: f64, marginal: Marginal) -> Result<Self> {
        if !(a > 0.0) || !b.is_finite() {
            return Err(invalid("a", format!("need a > 0 and finite b, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b, marginal })
    }

    pub fn infimum(&self) -> f64 {
        self.a * self.marginal.infimum() + self.b
    }

    pub fn supremum(&self) -> f64 {
        self.a * self.marginal.supremum() + self.b
    }

    pub fn variance(&self) -> Option<f64> {
        self.marginal.variance().map(|v| self.a * self.a * v)
    }

    /// Upper quantile `a Q_F(u) + b`.
    pub fn sample(&self, u: f64) -> f64 {
        self.a * self.marginal.sample(u) + self.b
    }
}

impl Law for LinearLaw {
    fn cdf(&self, x: f64) -> f64 {
        self.marginal.cdf((x - self.b) / self.a)
    }

    fn survival(&self, x: f64) -> f64 {
        self.marginal.survival((x - self.b) / self.a)
    }

    /// `a H_F((x - b) / a)`, which is `E[aW + b] - x` below the support.
    fn premium(&self, x: f64) -> f64 {
        self.a * self.marginal.premium((x - self.b) / self.a)
    }

    fn mean(&self) -> f64 {
        self.a * self.marginal.mean() + self.b
    }
}

/// `T(U) = Σ_t m_t Q_F(U / j_t)` with `U` uniform, evaluated numerically.
#[derive(Debug, Clone)]
pub struct QuantileSumLaw {
    /// `(m_t, j_t)` pairs.
    pub terms: Vec<(f64, usize)>,
    pub marginal: Marginal,
}

impl QuantileSumLaw {
    pub fn new(terms: Vec<(f64, usize)>, marginal: Marginal) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(|&(_, j)| j == 0) {
            return Err(invalid("terms", "need at least one term with j ≥ 1"));
        }
        Ok(Self { terms, marginal })
    }

    /// `T(u)`, nonincreasing in `u`.
    pub fn sample(&self, u: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(m, j)| m * self.marginal.sample(u / j as f64))
            .sum()
    }

    pub fn infimum(&self) -> f64 {
        self.sample(1.0)
    }

    pub fn supremum(&self) -> f64 {
        self.sample(0.0)
    }

    // u with T(u) = x, for x strictly inside the support
    fn level(&self, x: f64) -> f64 {
        let (mut lo, mut hi) = (-745.0f64, 0.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.sample(mid.exp()) > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }
}

impl Law for QuantileSumLaw {
    fn cdf(&self, x: f64) -> f64 {
        if x <= self.infimum() {
            return 0.0;
        }
        if x >= self.supremum() {
            return 1.0;
        }
        1.0 - self.level(x)
    }

    fn premium(&self, x: f64) -> f64 {
        if x <= self.infimum() {
            return self.mean() - x;
        }
        if x >= self.supremum() {
            return 0.0;
        }
        let u = self.level(x);
        // ∫_0^u (T(s) - x) ds with s = u e^{-t}
        let f = |t: f64| {
            let w = (-t).exp();
            let s = u * w;
            if s <= 0.0 {
                return 0.0;
            }
            (self.sample(s) - x).max(0.0) * w
        };
        u * quad::integrate_to_infinity(f, 0.0, 1e-12)
    }

    /// `Σ m_t E[Q_F(U / j)]`, with `E[Q_F(U/j)] = j H_F(w_j) + w_j`.
    fn mean(&self) -> f64 {
        self.terms
            .iter()
            .map(|&(m, j)| {
                let w = self.marginal.critical_quantile(j);
                let ev = if j == 1 {
                    self.marginal.mean()
                } else {
                    j as f64 * self.marginal.premium(w) + w
                };
                m * ev
            })
            .sum()
    }
}

/// Law of the convexly maximal LPP time.
#[derive(Debug, Clone)]
pub enum WorstCaseLaw {
    Linear(LinearLaw),
    QuantileSum(QuantileSumLaw),
}

impl WorstCaseLaw {
    /// The value of the time when `W(1,1) = Q_F(u)`.
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            WorstCaseLaw::Linear(l) => l.sample(u),
            WorstCaseLaw::QuantileSum(q) => q.sample(u),
        }
    }

    pub fn infimum(&self) -> f64 {
        self.sample(1.0)
    }

    pub fn supremum(&self) -> f64 {
        self.sample(0.0)
    }

    /// `x` with `P(T ≤ x) = p`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.sample(1.0 - p)
    }

    pub fn as_linear(&self) -> Option<&LinearLaw> {
        match self {
            WorstCaseLaw::Linear(l) => Some(l),
            WorstCaseLaw::QuantileSum(_) => None,
        }
    }

    pub fn variance(&self) -> Option<f64> {
        self.as_linear().and_then(LinearLaw::variance)
    }

    /// Grid of quantiles at the given cdf levels.
    pub fn grid(&self, levels: &[f64]) -> Vec<f64> {
        levels.iter().map(|&p| self.quantile(p)).collect()
    }
}

impl Law for WorstCaseLaw {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            WorstCaseLaw::Linear(l) => l.cdf(x),
            WorstCaseLaw::QuantileSum(q) => q.cdf(x),
        }
    }

    fn premium(&self, x: f64) -> f64 {
        match self {
            WorstCaseLaw::Linear(l) => l.premium(x),
            WorstCaseLaw::QuantileSum(q) => q.premium(x),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            WorstCaseLaw::Linear(l) => l.mean(),
            WorstCaseLaw::QuantileSum(q) => q.mean(),
        }
    }
}

/// Multiplicities of `Q_F(U / j)` in the convexly maximal time: one term per
/// anti-diagonal with `j` the diagonal's section length.
pub fn worst_case_terms(lattice: &LatticeSpec) -> Vec<(f64, usize)> {
    let mut counts = vec![0usize; lattice.n + 1];
    for d in 1..=lattice.n {
        counts[lattice.section(d).len()] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(j, c)| (c as f64, j))
        .collect()
}

/// Exact law of the convexly maximal LPP time on `lattice`; linear in
/// `W(1,1)` when `F` is memoryless up to scaling.
pub fn worst_case_law(lattice: &LatticeSpec, f: &Marginal) -> Result<WorstCaseLaw> {
    let terms = worst_case_terms(lattice);
    match f.memoryless() {
        Some(p) => {
            let loc = p.location;
            let mut a = 0.0;
            let mut b = 0.0;
            let mut total = 0.0;
            for &(m, j) in &terms {
                let w = f.critical_quantile(j) - loc;
                a += m * (1.0 + p.c * w);
                b += m * w;
                total += m;
            }
            b += (total - a) * loc;
            Ok(WorstCaseLaw::Linear(LinearLaw::new(a, b, f.clone())?))
        }
        None => Ok(WorstCaseLaw::QuantileSum(QuantileSumLaw::new(terms, f.clone())?)),
    }
}

/// `J_n = Σ_{i ≤ n} 1/i`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Uniform point-to-point coefficients for `M ≤ (N+1)/2`: slope
/// `N/M + 2(J_M - 1)`, intercept `N - slope`.
pub fn uniform_point_coefficients(n: usize, m: usize) -> Result<(f64, f64)> {
    if m < 1 || 2 * m > n + 1 {
        return Err(invalid("M", format!("{m} must lie in 1..=(N+1)/2 for N = {n}")));
    }
    let a = n as f64 / m as f64 + 2.0 * (harmonic(m) - 1.0);
    Ok((a, n as f64 - a))
}

/// Closed-form worst-case law for uniform weights; point-to-point lattices
/// with `M > (N+1)/2` are mirrored first.
pub fn worst_case_law_uniform(lattice: &LatticeSpec) -> Result<LinearLaw> {
    let n = lattice.n;
    let (a, b) = match lattice.kind {
        LatticeKind::Complete | LatticeKind::Line => {
            let j = harmonic(n);
            (j, n as f64 - j)
        }
        LatticeKind::PointToPoint { m } => uniform_point_coefficients(n, m.min(n + 1 - m))?,
    };
    LinearLaw::new(a, b, Marginal::uniform())
}

/// Survival `min(1, n F*(x))` of the maximum of `n` copies of `F`, attained
/// by the maximally dependent coupling.
#[derive(Debug, Clone)]
pub struct FrechetEnvelope {
    pub law: Marginal,
    /// `Q_F(1/n)`, below which the envelope is 1.
    pub x0: f64,
}

impl FrechetEnvelope {
    pub fn survival(&self, x: f64) -> f64 {
        self.law.survival(x)
    }
}

pub fn frechet_envelope(f: &Marginal, n: usize) -> Result<FrechetEnvelope> {
    Ok(FrechetEnvelope {
        law: f.conditional_right(n)?,
        x0: f.critical_quantile(n),
    })
}

/// Worst-case point-to-point shape `log(m) - 2m`, `m = min(γ, 1-γ)`.
pub fn shape_convex_bound(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("{gamma} is not in (0, 1)")));
    }
    let m = gamma.min(1.0 - gamma);
    if m == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(m.ln() - 2.0 * m)
}

/// Rost's i.i.d. shape `(√γ + √(1-γ))²`.
pub fn shape_rost(gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid("gamma", format!("{gamma} is not in [0, 1]")));
    }
    let s = gamma.sqrt() + (1.0 - gamma).sqrt();
    Ok(s * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeRow {
    pub gamma: f64,
    pub convex_shape: f64,
    pub rost_shape: f64,
}

/// Both shape functions on `count` interior points `k / (count + 1)`.
pub fn shape_table(count: usize) -> Vec<ShapeRow> {
    (1..=count)
        .map(|k| {
            let gamma = k as f64 / (count + 1) as f64;
            ShapeRow {
                gamma,
                convex_shape: shape_convex_bound(gamma).expect("interior point"),
                rost_shape: shape_rost(gamma).expect("interior point"),
            }
        })
        .collect()
}

/// Intercept gap between the exponential point-to-line time and the central
/// point-to-point time, `log C(N, N/2)` for even `N`.
pub fn exponential_center_gap(n: usize) -> Result<f64> {
    if n < 2 || n % 2 == 1 {
        return Err(invalid("N", "must be even and at least 2"));
    }
    let e = Marginal::exponential(1.0)?;
    let line = worst_case_law(&LatticeSpec::line(n)?, &e)?;
    let point = worst_case_law(&LatticeSpec::point(n, n / 2)?, &e)?;
    Ok(line.as_linear().unwrap().b - point.as_linear().unwrap().b)
}
