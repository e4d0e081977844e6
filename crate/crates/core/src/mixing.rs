//! Low-variance cross-diagonal copulas for minimal-mean LPP.
//!
//! All copulas emit a vector of uniforms on the survival scale: coordinate
//! `i` becomes the weight `Q_F(U_i)`. The constant-sum constructions are
//! antithetic pairs, the exchangeable Gaussian, a rearrangement-balanced
//! table of equiprobable quantile atoms, and the exponential block scheme
//! that recurses on the tail above a threshold `b`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::marginals::Marginal;
use crate::rng;
use crate::stats::{moment_summary, MomentSummary};

/// Default atom count for balanced tables.
pub const DEFAULT_ATOMS: usize = 999;
/// Heads in a row allowed before the block scheme gives up.
pub const MAX_BLOCK_DEPTH: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CopulaKind {
    Independent,
    Comonotone,
    AntitheticPairs,
    GaussianExchangeable,
    MixableBlock,
    QuantileBalancer,
}

impl CopulaKind {
    fn trivial(self) -> bool {
        matches!(self, CopulaKind::Independent | CopulaKind::Comonotone)
    }
}

impl fmt::Display for CopulaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CopulaKind::Independent => "independent",
            CopulaKind::Comonotone => "comonotone",
            CopulaKind::AntitheticPairs => "antithetic",
            CopulaKind::GaussianExchangeable => "gaussian",
            CopulaKind::MixableBlock => "mixable-block",
            CopulaKind::QuantileBalancer => "balancer",
        })
    }
}

impl FromStr for CopulaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "independent" | "iid" => CopulaKind::Independent,
            "comonotone" => CopulaKind::Comonotone,
            "antithetic" | "antithetic-pairs" => CopulaKind::AntitheticPairs,
            "gaussian" | "gaussian-exchangeable" => CopulaKind::GaussianExchangeable,
            "mixable-block" | "block" => CopulaKind::MixableBlock,
            "balancer" | "quantile-balancer" => CopulaKind::QuantileBalancer,
            _ => {
                return Err(Error::Parse {
                    input: s.to_string(),
                    reason: "unknown copula".into(),
                })
            }
        })
    }
}

/// A named dependence structure for `N` uniforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixCopula {
    pub kind: CopulaKind,
    pub n: usize,
    /// Block threshold; defaults to [`threshold_for_n`] of the unit exponential.
    pub threshold: Option<f64>,
    /// Atom count for balanced tables.
    pub atoms: Option<usize>,
}

impl MixCopula {
    pub fn new(kind: CopulaKind, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(invalid("N", "must be at least 1"));
        }
        if n < 2 && !kind.trivial() {
            return Err(invalid("N", format!("{kind} needs at least two coordinates")));
        }
        if kind == CopulaKind::MixableBlock && n < 3 {
            return Err(invalid("N", "the block scheme needs N ≥ 3; use antithetic pairs for N = 2"));
        }
        Ok(Self {
            kind,
            n,
            threshold: None,
            atoms: None,
        })
    }

    pub fn with_threshold(mut self, b: f64) -> Self {
        self.threshold = Some(b);
        self
    }

    pub fn with_atoms(mut self, m: usize) -> Self {
        self.atoms = Some(m);
        self
    }

    /// Precomputes whatever the copula needs: the balancer works on uniform
    /// atoms and the block scheme on unit exponentials.
    pub fn build(&self) -> Result<CopulaSampler> {
        self.build_inner(&Marginal::uniform(), &Marginal::exponential(1.0)?)
    }

    /// Like [`build`](Self::build), but balances sums of `f`-distributed
    /// weights instead.
    pub fn build_for(&self, f: &Marginal) -> Result<CopulaSampler> {
        self.build_inner(f, f)
    }

    fn build_inner(&self, table_law: &Marginal, block_law: &Marginal) -> Result<CopulaSampler> {
        let n = self.n;
        let inner = match self.kind {
            CopulaKind::Independent => Inner::Independent,
            CopulaKind::Comonotone => Inner::Comonotone,
            CopulaKind::AntitheticPairs => Inner::Antithetic,
            CopulaKind::GaussianExchangeable => Inner::Gaussian,
            CopulaKind::QuantileBalancer => {
                let m = self.atoms.unwrap_or(DEFAULT_ATOMS);
                Inner::Table(BalancedTable::for_marginal(table_law, n, m)?)
            }
            CopulaKind::MixableBlock => {
                let b = match self.threshold {
                    Some(b) => b,
                    None => threshold_for_n(block_law, n)?,
                };
                let m = self.atoms.unwrap_or_else(|| block_atoms(n));
                Inner::Block(Box::new(BlockScheme::new(block_law.clone(), b, n, m)?))
            }
        };
        Ok(CopulaSampler { n, inner })
    }
}

/// Atom count used by the block scheme when none is given. The within-cell
/// residual scales like `N / m`, so `m` grows like `N²` to keep it shrinking.
pub fn block_atoms(n: usize) -> usize {
    (64 * n * n).max(DEFAULT_ATOMS)
}

#[derive(Debug, Clone)]
enum Inner {
    Independent,
    Comonotone,
    Antithetic,
    Gaussian,
    Table(BalancedTable),
    Block(Box<BlockScheme>),
}

/// A ready-to-sample copula.
#[derive(Debug, Clone)]
pub struct CopulaSampler {
    n: usize,
    inner: Inner,
}

impl CopulaSampler {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let n = self.n;
        Ok(match &self.inner {
            Inner::Independent => (0..n).map(|_| open01(rng)).collect(),
            Inner::Comonotone => vec![open01(rng); n],
            Inner::Antithetic => {
                let mut out = Vec::with_capacity(n);
                if n % 2 == 1 {
                    out.extend(gaussian_exchangeable(3, rng).into_iter().map(phi));
                }
                while out.len() < n {
                    let u = open01(rng);
                    out.push(u);
                    out.push(1.0 - u);
                }
                out
            }
            Inner::Gaussian => gaussian_exchangeable(n, rng).into_iter().map(phi).collect(),
            Inner::Table(t) => t.draw(rng),
            Inner::Block(b) => b.sample_uniforms(rng)?,
        })
    }
}

/// One draw of the copula `c`.
pub fn sample_copula<R: Rng + ?Sized>(c: &MixCopula, rng: &mut R) -> Result<Vec<f64>> {
    c.build()?.sample(rng)
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

fn phi(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Standard normals `(N Z_i - ΣZ) / sqrt(N (N-1))`, which sum to zero and have
/// pairwise correlation `-1/(N-1)`.
pub fn gaussian_exchangeable<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let total: f64 = z.iter().sum();
    let nf = n as f64;
    let scale = (nf * (nf - 1.0)).sqrt();
    z.iter().map(|zi| (nf * zi - total) / scale).collect()
}

/// The antithetic pair `(Q_F(U), Q_F(1-U))`, the minimal-variance coupling of two
/// copies of `F`.
pub fn min_variance_pair<R: Rng + ?Sized>(f: &Marginal, rng: &mut R) -> (f64, f64) {
    let u = open01(rng);
    (f.sample(u), f.sample(1.0 - u))
}

/// `N` uniform(0,1) weights with near-constant sum `N/2`: antithetic pairs,
/// plus one balanced triple (999 atoms) when `N` is odd.
pub fn mixable_sum_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(invalid("N", "must be at least 2"));
    }
    let unif = Marginal::uniform();
    let mut out = Vec::with_capacity(n);
    if n % 2 == 1 {
        let table = BalancedTable::for_marginal(&unif, 3, DEFAULT_ATOMS)?;
        out.extend(table.draw(rng).into_iter().map(|u| unif.sample(u)));
    }
    while out.len() < n {
        let (a, b) = min_variance_pair(&unif, rng);
        out.push(a);
        out.push(b);
    }
    Ok(out)
}

/// `m` equiprobable cells of a law arranged into an `m × N` table whose
/// columns are permutations of the cells, with row sums of the cell means
/// made as equal as the rearrangement algorithm manages. Drawing a uniform
/// row and jittering uniformly inside each cell reproduces the law exactly
/// in every column.
///
/// Cell `c` covers survival levels `[c/m, (c+1)/m)`.
#[derive(Debug, Clone)]
pub struct BalancedTable {
    m: usize,
    n: usize,
    atoms: Vec<f64>,
    // row-major: cells[r * n + col]
    cells: Vec<u32>,
}

impl BalancedTable {
    pub fn for_marginal(law: &Marginal, n: usize, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid("m", "need at least two atoms"));
        }
        if n < 1 {
            return Err(invalid("N", "need at least one column"));
        }
        Ok(Self::balance(cell_means(law, m), n))
    }

    /// Rearranges columns of the given atoms (one per cell).
    pub fn balance(atoms: Vec<f64>, n: usize) -> Self {
        let m = atoms.len();
        let mut by_value: Vec<u32> = (0..m as u32).collect();
        by_value.sort_by(|&a, &b| atoms[b as usize].total_cmp(&atoms[a as usize]));

        let mut cols: Vec<Vec<u32>> = Vec::with_capacity(n);
        let mut sums = vec![0.0f64; m];
        // Greedy start: the rows furthest below target take the largest atoms.
        let mut order: Vec<usize> = (0..m).collect();
        for _ in 0..n {
            order.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)));
            let mut col = vec![0u32; m];
            for (rank, &row) in order.iter().enumerate() {
                col[row] = by_value[rank];
            }
            for r in 0..m {
                sums[r] += atoms[col[r] as usize];
            }
            cols.push(col);
        }

        // Rearrangement: make each column oppositely ordered to the sum of the others.
        let spread = |s: &[f64]| {
            let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        };
        let mut best = spread(&sums);
        let mut stale = 0;
        let mut other = vec![0.0f64; m];
        for _ in 0..200 {
            let mut changed = false;
            for col in cols.iter_mut() {
                for r in 0..m {
                    other[r] = sums[r] - atoms[col[r] as usize];
                }
                order.sort_by(|&a, &b| other[a].total_cmp(&other[b]).then(a.cmp(&b)));
                for (rank, &row) in order.iter().enumerate() {
                    let cell = by_value[rank];
                    if col[row] != cell {
                        changed = true;
                        col[row] = cell;
                    }
                }
                for r in 0..m {
                    sums[r] = other[r] + atoms[col[r] as usize];
                }
            }
            let s = spread(&sums);
            if s < best - 1e-15 * best.abs().max(1.0) {
                best = s;
                stale = 0;
            } else {
                stale += 1;
            }
            if !changed || stale >= 3 {
                break;
            }
        }

        let mut cells = vec![0u32; m * n];
        for (c, col) in cols.iter().enumerate() {
            for r in 0..m {
                cells[r * n + c] = col[r];
            }
        }
        Self { m, n, atoms, cells }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.cells[r * self.n..(r + 1) * self.n]
            .iter()
            .map(|&c| self.atoms[c as usize])
            .sum()
    }

    /// Largest `|row sum - target|` over rows.
    pub fn max_deviation(&self, target: f64) -> f64 {
        (0..self.m)
            .map(|r| (self.row_sum(r) - target).abs())
            .fold(0.0, f64::max)
    }

    /// A uniform row, jittered uniformly within each cell (survival scale).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let r = rng.random_range(0..self.m);
        let mf = self.m as f64;
        self.cells[r * self.n..(r + 1) * self.n]
            .iter()
            .map(|&c| {
                let j: f64 = rng.sample(Open01);
                (c as f64 + j) / mf
            })
            .collect()
    }

    /// Checks every column is a permutation of the cells.
    pub fn columns_are_permutations(&self) -> bool {
        (0..self.n).all(|c| {
            let mut seen = vec![false; self.m];
            (0..self.m).all(|r| {
                let cell = self.cells[r * self.n + c] as usize;
                !std::mem::replace(&mut seen[cell], true)
            })
        })
    }
}

/// Conditional means of `law` over its `m` equiprobable survival cells.
pub fn cell_means(law: &Marginal, m: usize) -> Vec<f64> {
    let mf = m as f64;
    (0..m)
        .map(|c| {
            let lo = law.sample((c + 1) as f64 / mf);
            if c == 0 {
                // E[X | X > lo] on the top cell
                return lo + mf * law.premium(lo);
            }
            let hi = law.sample(c as f64 / mf);
            let inside = law.premium(lo) - law.premium(hi) - (hi - lo) * (c as f64 / mf);
            (lo + mf * inside).clamp(lo, hi)
        })
        .collect()
}

/// `E[W | W ≤ b]`.
pub fn mean_below(f: &Marginal, b: f64) -> Result<f64> {
    Ok(f.conditional_left(b)?.mean())
}

/// `E[W | W > b]`.
pub fn mean_above(f: &Marginal, b: f64) -> Result<f64> {
    Ok(f.conditional_above(b)?.mean())
}

/// `N = b / E[W | W < b]`, rounded to the nearest integer and at least 2.
pub fn n_for_threshold(f: &Marginal, b: f64) -> Result<usize> {
    let ratio = b / mean_below(f, b)?;
    Ok((ratio.round() as usize).max(2))
}

/// The threshold `b` with `b / E[W | W < b] = N` (for `N ≥ 3`).
pub fn threshold_for_n(f: &Marginal, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(invalid("N", "no threshold gives a ratio below 3 reliably"));
    }
    let target = n as f64;
    let ratio = |b: f64| b / mean_below(f, b).unwrap_or(f64::NAN);
    let inf = f.infimum();
    let sup = f.supremum();
    let mut lo = inf + 1e-9 * (1.0 + inf.abs());
    let mut hi = if sup.is_finite() { sup - 1e-12 } else { inf + 1.0 };
    while sup.is_infinite() && ratio(hi) < target {
        hi = inf + 2.0 * (hi - inf);
        if hi > 1e12 {
            return Err(invalid("N", "no threshold reaches the requested ratio"));
        }
    }
    if !(ratio(hi) >= target) {
        return Err(invalid("N", "no threshold reaches the requested ratio"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Between/within decomposition of the block scheme's variance, assuming a
/// constant sum below the threshold: `N² P(W > b) (E[W|W>b] - E[W|W≤b])²`.
pub fn variance_law(f: &Marginal, b: f64, n: usize) -> Result<f64> {
    let p = f.survival(b);
    let gap = mean_above(f, b)? - mean_below(f, b)?;
    let nf = n as f64;
    Ok(nf * nf * p * gap * gap)
}

/// Coin with `P(H) = P(W > b)`: heads shifts every coordinate into the tail
/// above `b` and recurses, tails draws a balanced table of `W | W < b`.
#[derive(Debug, Clone)]
pub struct BlockScheme {
    marginal: Marginal,
    b: f64,
    n: usize,
    tail: f64,
    table: BalancedTable,
}

impl BlockScheme {
    pub fn new(marginal: Marginal, b: f64, n: usize, atoms: usize) -> Result<Self> {
        if !(b > marginal.infimum() && b < marginal.supremum()) {
            return Err(invalid("b", format!("{b} is outside the open support")));
        }
        if n < 2 {
            return Err(invalid("N", "must be at least 2"));
        }
        let below = marginal.conditional_left(b)?;
        let table = BalancedTable::for_marginal(&below, n, atoms)?;
        let tail = marginal.survival(b);
        Ok(Self {
            marginal,
            b,
            n,
            tail,
            table,
        })
    }

    /// The scheme for unit exponentials with `N = round(b / E[W|W<b])`.
    pub fn exponential(b: f64) -> Result<Self> {
        let exp = Marginal::exponential(1.0)?;
        let n = n_for_threshold(&exp, b)?;
        Self::new(exp, b, n, block_atoms(n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn threshold(&self) -> f64 {
        self.b
    }

    pub fn marginal(&self) -> &Marginal {
        &self.marginal
    }

    pub fn table(&self) -> &BalancedTable {
        &self.table
    }

    /// Analytic variance of the sum under a perfectly constant tails branch.
    pub fn variance_law(&self) -> Result<f64> {
        variance_law(&self.marginal, self.b, self.n)
    }

    /// Survival-scale uniforms of one draw.
    pub fn sample_uniforms<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let p = self.tail;
        let mut scale = 1.0;
        let mut depth = 0;
        while rng.random::<f64>() < p {
            // heads: U = p U' with U' from the same scheme
            scale *= p;
            depth += 1;
            if depth > MAX_BLOCK_DEPTH {
                return Err(Error::DepthExceeded(MAX_BLOCK_DEPTH));
            }
        }
        Ok(self
            .table
            .draw(rng)
            .into_iter()
            .map(|v| scale * (p + (1.0 - p) * v))
            .collect())
    }

    /// One weight vector, each coordinate marginally `F`.
    pub fn sample_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self
            .sample_uniforms(rng)?
            .into_iter()
            .map(|u| self.marginal.sample(u))
            .collect())
    }

    /// Variance of the sum inside the tails branch, estimated from `reps`
    /// draws of the balanced table; zero for an exactly mixable table.
    pub fn measure_residual(&self, seed: u64, reps: u64) -> MomentSummary {
        let below = self.marginal.conditional_left(self.b).expect("validated threshold");
        let sums = rng::replicate(seed, reps, |r, _| {
            self.table.draw(r).into_iter().map(|v| below.sample(v)).sum::<f64>()
        });
        moment_summary(&sums).expect("at least two replicates")
    }
}

/// Draws from the exponential block scheme for threshold `b`; returns the
/// weights (their count is `N`).
pub fn block_scheme_exponential<R: Rng + ?Sized>(b: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(b > 0.0) {
        return Err(invalid("b", "must be positive"));
    }
    BlockScheme::exponential(b)?.sample_weights(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn exp1() -> Marginal {
        Marginal::exponential(1.0).unwrap()
    }

    #[test]
    fn antithetic_pair() {
        let c = MixCopula::new(CopulaKind::AntitheticPairs, 2).unwrap();
        let u = sample_copula(&c, &mut rng(1)).unwrap();
        assert_eq!(u[1], 1.0 - u[0]);
    }

    #[test]
    fn comonotone_coordinates_equal() {
        let c = MixCopula::new(CopulaKind::Comonotone, 5).unwrap().build().unwrap();
        let u = c.sample(&mut rng(2)).unwrap();
        assert!(u.iter().all(|&x| x == u[0]));
        assert!(MixCopula::new(CopulaKind::Comonotone, 1).is_ok());
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(MixCopula::new(CopulaKind::AntitheticPairs, 1).is_err());
        assert!(MixCopula::new(CopulaKind::GaussianExchangeable, 1).is_err());
        assert!(MixCopula::new(CopulaKind::MixableBlock, 2).is_err());
        assert!("weird".parse::<CopulaKind>().is_err());
    }

    #[test]
    fn gaussian_triple_sums_to_zero() {
        let mut r = rng(3);
        for _ in 0..100 {
            let w = gaussian_exchangeable(3, &mut r);
            assert!(w.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_exchangeable_correlation() {
        let n = 4;
        let reps = 20_000;
        let mut r = rng(4);
        let draws: Vec<Vec<f64>> = (0..reps).map(|_| gaussian_exchangeable(n, &mut r)).collect();
        let prod: Vec<f64> = draws.iter().map(|w| w[0] * w[1]).collect();
        let s = moment_summary(&prod).unwrap();
        // unit variances, so E[W0 W1] is the correlation
        assert!((s.mean + 1.0 / (n as f64 - 1.0)).abs() < 3.0 * s.se_mean);
        let var0 = moment_summary(&draws.iter().map(|w| w[0]).collect::<Vec<_>>()).unwrap();
        assert!((var0.variance - 1.0).abs() < 0.05);
    }

    #[test]
    fn odd_antithetic_uses_gaussian_triple() {
        let g = Marginal::gaussian(0.0, 1.0).unwrap();
        let c = MixCopula::new(CopulaKind::AntitheticPairs, 5).unwrap().build().unwrap();
        let mut r = rng(5);
        for _ in 0..50 {
            let s: f64 = c.sample(&mut r).unwrap().into_iter().map(|u| g.sample(u)).sum();
            assert!(s.abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_mixable_sums() {
        let mut r = rng(6);
        for _ in 0..100 {
            let w2 = mixable_sum_uniform(2, &mut r).unwrap();
            assert_abs_diff_eq!(w2.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
            let w4 = mixable_sum_uniform(4, &mut r).unwrap();
            assert_abs_diff_eq!(w4.iter().sum::<f64>(), 2.0, epsilon = 1e-15);
        }
        let m = DEFAULT_ATOMS as f64;
        for _ in 0..2000 {
            let w3 = mixable_sum_uniform(3, &mut r).unwrap();
            assert!((w3.iter().sum::<f64>() - 1.5).abs() <= 3.0 / m);
        }
    }

    #[test]
    fn balanced_table_columns_are_permutations() {
        let t = BalancedTable::for_marginal(&exp1().conditional_left(4.0).unwrap(), 5, 301).unwrap();
        assert!(t.columns_are_permutations());
        let t = BalancedTable::for_marginal(&Marginal::uniform(), 3, 999).unwrap();
        assert!(t.columns_are_permutations());
        // atom row sums within one atom gap of N/2
        assert!(t.max_deviation(1.5) <= 1.5 / 999.0 + 1e-12, "{}", t.max_deviation(1.5));
    }

    #[test]
    fn cell_means_average_to_mean() {
        for law in [Marginal::uniform(), exp1().conditional_left(5.0).unwrap(), exp1()] {
            let atoms = cell_means(&law, 500);
            let avg = atoms.iter().sum::<f64>() / 500.0;
            assert_abs_diff_eq!(avg, law.mean(), epsilon = 1e-9);
        }
    }

    #[test]
    fn truncated_exponential_means() {
        let e = exp1();
        let b: f64 = 5.0;
        let below = mean_below(&e, b).unwrap();
        let oracle = quad::integrate(|x| x * (-x).exp(), 0.0, b, 1e-14) / (1.0 - (-b).exp());
        assert_abs_diff_eq!(below, oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(below, (1.0 - (1.0 + b) * (-b).exp()) / (1.0 - (-b).exp()), epsilon = 1e-12);
        assert_abs_diff_eq!(below, 0.9661, epsilon = 1e-4);
        assert_abs_diff_eq!(mean_above(&e, b).unwrap(), b + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn variance_law_examples() {
        let v = variance_law(&exp1(), 5.0, 5).unwrap();
        assert_abs_diff_eq!(v, 4.268, epsilon = 1e-3);
        // V / (N^4 e^{-N}) approaches a constant along the self-consistent b(N)
        let ratio = |n: usize| {
            let b = threshold_for_n(&exp1(), n).unwrap();
            variance_law(&exp1(), b, n).unwrap() / ((n as f64).powi(4) * (-(n as f64)).exp())
        };
        let (r40, r80, r160) = (ratio(40), ratio(80), ratio(160));
        assert!((r80 - r160).abs() < (r40 - r80).abs());
        assert!((r160 - 1.0).abs() < 0.1);
    }

    #[test]
    fn pareto_variance_trend() {
        let p = Marginal::pareto_unit(3.0).unwrap();
        let pts: Vec<(f64, f64)> = [20.0, 40.0, 80.0, 160.0]
            .iter()
            .map(|&b| {
                let n = b / mean_below(&p, b).unwrap();
                let nf = n; // continuous N for the trend
                let v = variance_law(&p, b, 1).unwrap() * nf * nf;
                (nf.ln(), v.ln())
            })
            .collect();
        let slope = (pts[3].1 - pts[0].1) / (pts[3].0 - pts[0].0);
        assert!((slope - 1.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn threshold_round_trip() {
        let e = exp1();
        for n in [3usize, 4, 8, 16] {
            let b = threshold_for_n(&e, n).unwrap();
            assert_eq!(n_for_threshold(&e, b).unwrap(), n);
        }
        assert_eq!(n_for_threshold(&e, 3.0).unwrap(), 4);
        assert_eq!(n_for_threshold(&e, 5.0).unwrap(), 5);
        assert_eq!(n_for_threshold(&e, 7.0).unwrap(), 7);
    }

    #[test]
    fn block_scheme_mean_and_marginal() {
        let scheme = BlockScheme::exponential(3.0).unwrap();
        assert_eq!(scheme.n(), 4);
        let mut r = rng(9);
        let draws: Vec<Vec<f64>> = (0..40_000).map(|_| scheme.sample_weights(&mut r).unwrap()).collect();
        let sums: Vec<f64> = draws.iter().map(|w| w.iter().sum()).collect();
        let s = moment_summary(&sums).unwrap();
        assert!((s.mean - 4.0).abs() < 4.0 * s.se_mean);
        for c in 0..4 {
            let col = crate::stats::EmpiricalSample::new(draws.iter().map(|w| w[c]).collect()).unwrap();
            let ks = crate::stats::ks_distance(&col, &exp1());
            assert!(ks < crate::stats::ks_critical(0.01, 40_000), "column {c}: {ks}");
        }
    }

    #[test]
    fn min_variance_pair_exponential() {
        let mut r = rng(10);
        let sums: Vec<f64> = (0..200_000)
            .map(|_| {
                let (a, b) = min_variance_pair(&exp1(), &mut r);
                a + b
            })
            .collect();
        let s = moment_summary(&sums).unwrap();
        // oracle: Var[-ln U - ln(1-U)] by quadrature
        // symmetric about 1/2, so integrate the left half only
        let m1 = 2.0 * quad::integrate(|u: f64| -(u * (1.0 - u)).ln(), 0.0, 0.5, 1e-13);
        let m2 = 2.0 * quad::integrate(|u: f64| (u * (1.0 - u)).ln().powi(2), 0.0, 0.5, 1e-13);
        let exact = m2 - m1 * m1;
        assert_abs_diff_eq!(exact, 4.0 - std::f64::consts::PI.powi(2) / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(exact, 0.7101, epsilon = 1e-4);
        assert!((s.variance - exact).abs() < 4.0 * s.se_variance);
        let (a, b) = min_variance_pair(&Marginal::uniform(), &mut r);
        assert_abs_diff_eq!(a + b, 1.0, epsilon = 1e-15);
        let g = Marginal::gaussian(0.0, 1.0).unwrap();
        let (a, b) = min_variance_pair(&g, &mut r);
        assert_abs_diff_eq!(a + b, 0.0, epsilon = 1e-9);
    }
}
