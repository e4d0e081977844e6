//! Continuous weight distributions and the functions that characterize them:
//! cdf, survival, upper quantile, premium `E[(T - x)^+]` and mean residual
//! life. Conditional laws above and below a cut point are themselves
//! marginals, so they compose with everything else in the crate.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Open01;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};

/// Anything with a cdf and a premium function.
pub trait Law {
    fn cdf(&self, x: f64) -> f64;

    fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// `E[(T - x)^+]`.
    fn premium(&self, x: f64) -> f64;

    fn mean(&self) -> f64;
}

/// Parameters of a law satisfying `F*(x + s + c x s) = F*(x) F*(s)` once the
/// support is shifted to start at `location`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemorylessParams {
    /// `c < 0` for the β family, `0` for exponential, `c > 0` for Pareto.
    pub c: f64,
    /// β, θ or α depending on the sign of `c`.
    pub shape: f64,
    /// Essential infimum of the support.
    pub location: f64,
}

impl MemorylessParams {
    /// The scaling function `g(x) = 1 + c x`, with `x` measured from the location.
    pub fn g(&self, x: f64) -> f64 {
        1.0 + self.c * (x - self.location)
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    /// Survival `exp(-θ x)` on `(0, ∞)`.
    Exponential { theta: f64 },
    /// Survival `(1 - k x)^β` on `(0, 1/k)`; `k = |c|`. Uniform is `k = β = 1`.
    Beta { k: f64, beta: f64 },
    /// Survival `(1 + c x)^(-α)` on `(0, ∞)`.
    Pareto { alpha: f64, c: f64 },
    /// Survival `t^(-α)` on `(1, ∞)`.
    ParetoUnit { alpha: f64 },
    /// Normal law. Not a valid lattice weight, only used for copula work.
    Gaussian { mu: f64, sigma: f64 },
    /// Step-function law of a sorted sample.
    Empirical(Arc<EmpiricalLaw>),
    /// `T | T > cut`; `scale = 1 / F*(cut)`.
    Above {
        base: Box<Marginal>,
        cut: f64,
        scale: f64,
    },
    /// `T | T < cut`; `tail = F*(cut)`, `mass = 1 - tail`.
    Below {
        base: Box<Marginal>,
        cut: f64,
        tail: f64,
        mass: f64,
    },
}

#[derive(Debug)]
pub struct EmpiricalLaw {
    sorted: Vec<f64>,
    // suffix[i] = sum of sorted[i..]
    suffix: Vec<f64>,
}

impl EmpiricalLaw {
    fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sample", "needs at least one finite value"));
        }
        values.sort_by(f64::total_cmp);
        let mut suffix = vec![0.0; values.len() + 1];
        for i in (0..values.len()).rev() {
            suffix[i] = suffix[i + 1] + values[i];
        }
        Ok(Self {
            sorted: values,
            suffix,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    fn n(&self) -> f64 {
        self.sorted.len() as f64
    }

    fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }

    fn upper_quantile(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let pos = (1.0 - u) * n as f64;
        let k = pos.floor();
        let idx = (k as usize).min(n - 1);
        // Exactly on a jump: split the difference.
        if k == pos && idx > 0 {
            0.5 * (self.sorted[idx - 1] + self.sorted[idx])
        } else {
            self.sorted[idx]
        }
    }

    fn premium(&self, x: f64) -> f64 {
        let i = self.count_le(x);
        let above = (self.sorted.len() - i) as f64;
        (self.suffix[i] - x * above) / self.n()
    }
}

/// An immutable continuous marginal law.
#[derive(Debug, Clone)]
pub struct Marginal {
    family: Family,
}

impl Marginal {
    pub fn exponential(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid("theta", "must be positive"));
        }
        Ok(Self::from_family(Family::Exponential { theta }))
    }

    pub fn uniform() -> Self {
        Self::from_family(Family::Beta { k: 1.0, beta: 1.0 })
    }

    /// β family with survival `(1 - k x)^β` on `(0, 1/k)`.
    pub fn beta(k: f64, beta: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid("c", "|c| must be positive"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", "must be positive"));
        }
        Ok(Self::from_family(Family::Beta { k, beta }))
    }

    /// Pareto with survival `(1 + c x)^(-α)` on `(0, ∞)`.
    pub fn pareto(alpha: f64, c: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(invalid("alpha", "must exceed 1 for a finite mean"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("c", "must be positive"));
        }
        Ok(Self::from_family(Family::Pareto { alpha, c }))
    }

    /// Pareto with survival `t^(-α)` on `(1, ∞)`.
    pub fn pareto_unit(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(invalid("alpha", "must exceed 1 for a finite mean"));
        }
        Ok(Self::from_family(Family::ParetoUnit { alpha }))
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(invalid("sigma", "must be positive"));
        }
        Ok(Self::from_family(Family::Gaussian { mu, sigma }))
    }

    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        Ok(Self::from_family(Family::Empirical(Arc::new(
            EmpiricalLaw::new(values)?,
        ))))
    }

    fn from_family(family: Family) -> Self {
        Self { family }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self.family, Family::Exponential { .. })
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.family, Family::Beta { k, beta } if k == 1.0 && beta == 1.0)
    }

    /// Essential infimum `Q_F(1)`.
    pub fn infimum(&self) -> f64 {
        match &self.family {
            Family::Exponential { .. } | Family::Beta { .. } | Family::Pareto { .. } => 0.0,
            Family::ParetoUnit { .. } => 1.0,
            Family::Gaussian { .. } => f64::NEG_INFINITY,
            Family::Empirical(e) => e.sorted[0],
            Family::Above { cut, .. } => *cut,
            Family::Below { base, .. } => base.infimum(),
        }
    }

    /// Essential supremum `Q_F(0)`.
    pub fn supremum(&self) -> f64 {
        match &self.family {
            Family::Beta { k, .. } => 1.0 / k,
            Family::Empirical(e) => e.sorted[e.sorted.len() - 1],
            Family::Above { base, .. } => base.supremum(),
            Family::Below { cut, .. } => *cut,
            _ => f64::INFINITY,
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        match &self.family {
            Family::Exponential { theta } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-theta * x).exp()
                }
            }
            Family::Beta { k, beta } => {
                if x <= 0.0 {
                    1.0
                } else if x >= 1.0 / k {
                    0.0
                } else {
                    (1.0 - k * x).powf(*beta)
                }
            }
            Family::Pareto { alpha, c } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (1.0 + c * x).powf(-alpha)
                }
            }
            Family::ParetoUnit { alpha } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-alpha)
                }
            }
            Family::Gaussian { mu, sigma } => normal().cdf(-(x - mu) / sigma),
            Family::Empirical(e) => 1.0 - e.count_le(x) as f64 / e.n(),
            Family::Above { base, scale, .. } => (scale * base.survival(x)).min(1.0),
            Family::Below {
                base,
                cut,
                tail,
                mass,
            } => {
                if x >= *cut {
                    0.0
                } else {
                    ((base.survival(x) - tail) / mass).clamp(0.0, 1.0)
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian { mu, sigma } => normal().cdf((x - mu) / sigma),
            Family::Empirical(e) => e.count_le(x) as f64 / e.n(),
            Family::Below { base, cut, mass, .. } => {
                if x >= *cut {
                    1.0
                } else {
                    (base.cdf(x) / mass).min(1.0)
                }
            }
            _ => 1.0 - self.survival(x),
        }
    }

    /// Density where one exists; `None` for empirical laws.
    pub fn density(&self, x: f64) -> Option<f64> {
        let inside = x > self.infimum() && x < self.supremum();
        Some(match &self.family {
            _ if !inside => 0.0,
            Family::Exponential { theta } => theta * (-theta * x).exp(),
            Family::Beta { k, beta } => beta * k * (1.0 - k * x).powf(beta - 1.0),
            Family::Pareto { alpha, c } => alpha * c * (1.0 + c * x).powf(-alpha - 1.0),
            Family::ParetoUnit { alpha } => alpha * x.powf(-alpha - 1.0),
            Family::Gaussian { mu, sigma } => normal().pdf((x - mu) / sigma) / sigma,
            Family::Empirical(_) => return None,
            Family::Above { base, scale, .. } => scale * base.density(x)?,
            Family::Below { base, mass, .. } => base.density(x)? / mass,
        })
    }

    /// `Q_F(u) = (F*)^{-1}(u)`; rejects `u` outside `(0, 1)`.
    pub fn upper_quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(invalid("u", format!("{u} is not in (0, 1)")));
        }
        Ok(self.sample(u))
    }

    /// Inverse-transform sample: `Q_F(u)` for `u ∈ (0, 1)`, clamped at the
    /// support endpoints otherwise.
    pub fn sample(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.supremum();
        }
        if u >= 1.0 {
            return self.infimum();
        }
        match &self.family {
            Family::Exponential { theta } => -u.ln() / theta,
            Family::Beta { k, beta } => (1.0 - u.powf(1.0 / beta)) / k,
            Family::Pareto { alpha, c } => (u.powf(-1.0 / alpha) - 1.0) / c,
            Family::ParetoUnit { alpha } => u.powf(-1.0 / alpha),
            Family::Gaussian { mu, sigma } => mu - sigma * normal().inverse_cdf(u),
            Family::Empirical(e) => e.upper_quantile(u),
            Family::Above { base, scale, .. } => base.sample(u / scale),
            Family::Below {
                base, tail, mass, ..
            } => base.sample(tail + u * mass),
        }
    }

    /// One inverse-transform draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng.sample::<f64, _>(Open01))
    }

    /// `H_F(x) = E[(T - x)^+]`.
    pub fn premium(&self, x: f64) -> f64 {
        let inf = self.infimum();
        if x <= inf && inf.is_finite() {
            return self.mean() - x;
        }
        if x >= self.supremum() {
            return 0.0;
        }
        match &self.family {
            Family::Exponential { theta } => (-theta * x).exp() / theta,
            Family::Beta { k, beta } => (1.0 - k * x).powf(beta + 1.0) / (k * (beta + 1.0)),
            Family::Pareto { alpha, c } => (1.0 + c * x).powf(1.0 - alpha) / (c * (alpha - 1.0)),
            Family::ParetoUnit { alpha } => x.powf(1.0 - alpha) / (alpha - 1.0),
            Family::Gaussian { mu, sigma } => {
                let z = (x - mu) / sigma;
                let n = normal();
                sigma * (n.pdf(z) - z * n.cdf(-z))
            }
            Family::Empirical(e) => e.premium(x),
            Family::Above { base, cut, scale } => scale * base.premium(x.max(*cut)) + (cut - x).max(0.0),
            Family::Below {
                base,
                cut,
                tail,
                mass,
            } => ((base.premium(x) - base.premium(*cut) - (cut - x) * tail) / mass).max(0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.family {
            Family::Exponential { theta } => 1.0 / theta,
            Family::Beta { k, beta } => 1.0 / (k * (beta + 1.0)),
            Family::Pareto { alpha, c } => 1.0 / (c * (alpha - 1.0)),
            Family::ParetoUnit { alpha } => alpha / (alpha - 1.0),
            Family::Gaussian { mu, .. } => *mu,
            Family::Empirical(e) => e.suffix[0] / e.n(),
            Family::Above { base, cut, scale } => cut + scale * base.premium(*cut),
            Family::Below {
                base,
                cut,
                tail,
                mass,
            } => (base.mean() - cut * tail - base.premium(*cut)) / mass,
        }
    }

    /// Variance, when finite and available in closed form.
    pub fn variance(&self) -> Option<f64> {
        match &self.family {
            Family::Exponential { theta } => Some(1.0 / (theta * theta)),
            Family::Beta { k, beta } => {
                let b = *beta;
                Some(b / ((1.0 + b) * (1.0 + b) * (2.0 + b)) / (k * k))
            }
            Family::Pareto { alpha, c } if *alpha > 2.0 => {
                let a = *alpha;
                Some(a / ((a - 1.0) * (a - 1.0) * (a - 2.0)) / (c * c))
            }
            Family::ParetoUnit { alpha } if *alpha > 2.0 => {
                let a = *alpha;
                Some(a / ((a - 1.0) * (a - 1.0) * (a - 2.0)))
            }
            Family::Gaussian { sigma, .. } => Some(sigma * sigma),
            Family::Empirical(e) => {
                let m = self.mean();
                Some(e.sorted.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / e.n())
            }
            _ => None,
        }
    }

    /// `g_F(x) = H_F(x) / F*(x)`; rejects `x` at or above the supremum.
    pub fn mean_residual(&self, x: f64) -> Result<f64> {
        let s = self.survival(x);
        if x >= self.supremum() || s <= 0.0 {
            return Err(invalid("x", format!("{x} is not below the essential supremum")));
        }
        Ok(self.premium(x) / s)
    }

    /// `w_n = Q_F(1/n)`.
    pub fn critical_quantile(&self, n: usize) -> f64 {
        if n <= 1 {
            return self.infimum();
        }
        self.sample(1.0 / n as f64)
    }

    /// Law of `T` given `T > w_n`; survival `min(1, n F*(x))`.
    pub fn conditional_right(&self, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(invalid("n", "must be at least 1"));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        Ok(Self::from_family(Family::Above {
            base: Box::new(self.clone()),
            cut: self.critical_quantile(n),
            scale: n as f64,
        }))
    }

    /// Law of `T` given `T < v`; cdf `min(1, F(t) / F(v))`.
    pub fn conditional_left(&self, v: f64) -> Result<Self> {
        if !(v > self.infimum() && v < self.supremum()) {
            return Err(invalid("v", format!("{v} is outside the open support")));
        }
        let tail = self.survival(v);
        Ok(self.below_with_tail(v, tail))
    }

    /// Law of `T` given `T < w_n`, with the tail mass set to exactly `1/n`.
    pub fn conditional_left_at(&self, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", "must be at least 2"));
        }
        Ok(self.below_with_tail(self.critical_quantile(n), 1.0 / n as f64))
    }

    /// Law of `T` given `T > v`.
    pub fn conditional_above(&self, v: f64) -> Result<Self> {
        if !(v >= self.infimum() && v < self.supremum()) {
            return Err(invalid("v", format!("{v} is outside the support")));
        }
        let s = self.survival(v);
        Ok(Self::from_family(Family::Above {
            base: Box::new(self.clone()),
            cut: v,
            scale: 1.0 / s,
        }))
    }

    fn below_with_tail(&self, cut: f64, tail: f64) -> Self {
        Self::from_family(Family::Below {
            base: Box::new(self.clone()),
            cut,
            tail,
            mass: 1.0 - tail,
        })
    }

    /// Memoryless-up-to-scaling parameters, if the law has them.
    pub fn memoryless(&self) -> Option<MemorylessParams> {
        match &self.family {
            Family::Exponential { theta } => Some(MemorylessParams {
                c: 0.0,
                shape: *theta,
                location: 0.0,
            }),
            Family::Beta { k, beta } => Some(MemorylessParams {
                c: -k,
                shape: *beta,
                location: 0.0,
            }),
            Family::Pareto { alpha, c } => Some(MemorylessParams {
                c: *c,
                shape: *alpha,
                location: 0.0,
            }),
            Family::ParetoUnit { alpha } => Some(MemorylessParams {
                c: 1.0,
                shape: *alpha,
                location: 1.0,
            }),
            _ => None,
        }
    }

    /// `sup |F*(x + s + c x s) - F*(x) F*(s)|` over the grid, with `x` and `s`
    /// measured from the support's infimum.
    pub fn verify_memoryless_identity(&self, grid: &[(f64, f64)]) -> Result<f64> {
        let p = self.memoryless().ok_or_else(|| {
            Error::Unsupported(format!("{self} is not memoryless up to scaling"))
        })?;
        let loc = p.location;
        Ok(grid
            .iter()
            .map(|&(x, s)| {
                let lhs = self.survival(loc + x + s + p.c * x * s);
                let rhs = self.survival(loc + x) * self.survival(loc + s);
                (lhs - rhs).abs()
            })
            .fold(0.0, f64::max))
    }

    /// Whether the law can weight lattice sites (nonnegative support).
    pub fn is_nonnegative(&self) -> bool {
        self.infimum() >= 0.0
    }
}

fn normal() -> Normal {
    Normal::standard()
}

impl Law for Marginal {
    fn cdf(&self, x: f64) -> f64 {
        Marginal::cdf(self, x)
    }

    fn survival(&self, x: f64) -> f64 {
        Marginal::survival(self, x)
    }

    fn premium(&self, x: f64) -> f64 {
        Marginal::premium(self, x)
    }

    fn mean(&self) -> f64 {
        Marginal::mean(self)
    }
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Exponential { theta } => write!(f, "exp:theta={theta}"),
            Family::Beta { k, beta } if *k == 1.0 && *beta == 1.0 => write!(f, "unif"),
            Family::Beta { k, beta } => write!(f, "beta:c={k},beta={beta}"),
            Family::Pareto { alpha, c } => write!(f, "pareto:alpha={alpha},c={c}"),
            Family::ParetoUnit { alpha } => write!(f, "pareto1:alpha={alpha}"),
            Family::Gaussian { mu, sigma } => write!(f, "gauss:mu={mu},sigma={sigma}"),
            Family::Empirical(e) => write!(f, "empirical(n={})", e.sorted.len()),
            Family::Above { base, cut, .. } => write!(f, "({base} | > {cut})"),
            Family::Below { base, cut, .. } => write!(f, "({base} | < {cut})"),
        }
    }
}

impl FromStr for Marginal {
    type Err = Error;

    /// `family[:key=value,...]`, e.g. `exp:theta=1`, `unif`, `pareto:alpha=2`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason: String| Error::Parse {
            input: s.to_string(),
            reason,
        };
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = Vec::new();
        for kv in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(format!("`{kv}` is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("`{v}` is not a number")))?;
            params.push((k.trim(), v));
        }
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| parse_err(format!("missing parameter `{key}`")))
        };
        let allowed: &[&str] = match name.trim() {
            "exp" | "exponential" => &["theta"],
            "unif" | "uniform" => &[],
            "beta" => &["c", "beta"],
            "pareto" => &["alpha", "c"],
            "pareto1" => &["alpha"],
            "gauss" | "normal" => &["mu", "sigma"],
            other => return Err(parse_err(format!("unknown family `{other}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(parse_err(format!("unknown parameter `{k}`")));
        }
        match name.trim() {
            "exp" | "exponential" => Marginal::exponential(get("theta", Some(1.0))?),
            "unif" | "uniform" => Ok(Marginal::uniform()),
            "beta" => Marginal::beta(get("c", Some(1.0))?.abs(), get("beta", Some(1.0))?),
            "pareto" => Marginal::pareto(get("alpha", None)?, get("c", Some(1.0))?),
            "pareto1" => Marginal::pareto_unit(get("alpha", None)?),
            _ => Marginal::gaussian(get("mu", Some(0.0))?, get("sigma", Some(1.0))?),
        }
    }
}
