//! Convex bound on `max_k Σ_{n ∈ I_k} X_n` from the marginals alone:
//!
//! `B(x) = min Σ_n H_n(v_n)` subject to `Σ_{n ∈ I_k} v_n ≤ x` for every `k`,
//!
//! solved through its concave dual in the multipliers `λ_k ≥ 0`. Given
//! `s_n = Σ_{k ∋ n} λ_k`, the inner minimizer is `v_n = Q_n(min(1, s_n))`
//! and the dual gradient is `S_k(v) - x`. Below the point `x_0` where
//! `Σ λ_k` reaches 1 the curve continues with slope `-1`.

use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{enumerate_paths, LatticeSpec, Site, WeightField};
use crate::marginals::Marginal;

/// Subsets `I_1..I_K` of the elements `0..N`, each element with its own law.
#[derive(Debug, Clone)]
pub struct SubsetSystem {
    marginals: Vec<Marginal>,
    subsets: Vec<Vec<usize>>,
}

impl SubsetSystem {
    /// `subsets` hold 0-based element indices.
    pub fn new(marginals: Vec<Marginal>, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if subsets.is_empty() {
            return Err(invalid("system", "needs at least one subset"));
        }
        if let Some(k) = subsets.iter().position(Vec::is_empty) {
            return Err(invalid("system", format!("subset {} is empty", k + 1)));
        }
        let n = marginals.len();
        if subsets.iter().flatten().any(|&e| e >= n) {
            return Err(invalid("system", format!("element ids must be below {n}")));
        }
        for f in &marginals {
            if !f.infimum().is_finite() {
                return Err(invalid("marginal", format!("{f} has no finite infimum")));
            }
        }
        Ok(Self { marginals, subsets })
    }

    /// `{1}, ..., {n}` with identical marginals.
    pub fn singletons(f: &Marginal, n: usize) -> Result<Self> {
        Self::new(vec![f.clone(); n], (0..n).map(|e| vec![e]).collect())
    }

    /// The single subset of all elements.
    pub fn whole(marginals: Vec<Marginal>) -> Result<Self> {
        let all = (0..marginals.len()).collect();
        Self::new(marginals, vec![all])
    }

    /// One subset per admissible path of `lattice`; elements are the sites
    /// of the triangle in the weight field's order.
    pub fn from_paths(lattice: &LatticeSpec, f: &Marginal) -> Result<Self> {
        let field = WeightField::zeros(lattice.n);
        let subsets = enumerate_paths(lattice)?
            .iter()
            .map(|p| p.vertices().iter().map(|&s| field.index(s)).collect())
            .collect();
        Self::new(vec![f.clone(); field.as_slice().len()], subsets)
    }

    /// Parses lines `k: n1 n2 ...` (1-based ids). Blank lines and `#`
    /// comments are skipped; the ground set is `1..=max id`.
    pub fn parse(text: &str, f: &Marginal) -> Result<Self> {
        let mut subsets = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| Error::Parse {
                input: raw.to_string(),
                reason: format!("line {}: {reason}", lineno + 1),
            };
            let (_, ids) = line.split_once(':').ok_or_else(|| err("expected `k: n1 n2 ...`"))?;
            let ids: Vec<usize> = ids
                .split_whitespace()
                .map(|t| match t.parse::<usize>() {
                    Ok(0) | Err(_) => Err(err("element ids are positive integers")),
                    Ok(v) => Ok(v - 1),
                })
                .collect::<Result<_>>()?;
            subsets.push(ids);
        }
        let n = subsets.iter().flatten().map(|&e| e + 1).max().unwrap_or(0);
        Self::new(vec![f.clone(); n], subsets)
    }

    pub fn n(&self) -> usize {
        self.marginals.len()
    }

    pub fn k(&self) -> usize {
        self.subsets.len()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    /// `max_k Σ_{n ∈ I_k} values[n]`.
    pub fn max_sum(&self, values: &[f64]) -> f64 {
        self.subsets
            .iter()
            .map(|s| s.iter().map(|&e| values[e]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the subset attaining [`max_sum`](Self::max_sum) (first on ties).
    pub fn argmax(&self, values: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, s) in self.subsets.iter().enumerate() {
            let t: f64 = s.iter().map(|&e| values[e]).sum();
            if t > best.1 {
                best = (k, t);
            }
        }
        best.0
    }

    // smallest x for which the constraints can hold
    fn feasibility_edge(&self) -> f64 {
        let inf: Vec<f64> = self.marginals.iter().map(Marginal::infimum).collect();
        self.max_sum(&inf)
    }

    // at or above this x every v_n may sit at its supremum
    fn saturation(&self) -> f64 {
        let sup: Vec<f64> = self.marginals.iter().map(Marginal::supremum).collect();
        self.max_sum(&sup)
    }
}

/// For a field written row-major, the element values of a path system built
/// by [`SubsetSystem::from_paths`].
pub fn field_values(field: &WeightField) -> Vec<f64> {
    field.as_slice().to_vec()
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Largest allowed `max_k (S_k - x)^+`.
    pub violation_tol: f64,
    /// Largest allowed `|Σ λ_k (S_k - x)|`.
    pub gap_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            violation_tol: 1e-10,
            gap_tol: 1e-8,
        }
    }
}

/// `B` on a grid with the optimal `v` and multipliers at every point.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCurve {
    pub x: Vec<f64>,
    pub b: Vec<f64>,
    pub slope: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Where `Σ λ_k` reaches 1; the curve is linear with slope -1 below it.
    pub x0: f64,
    pub b0: f64,
}

impl BoundCurve {
    /// CSV `x,B,slope,lambda_1..lambda_K`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.lambda.first().map_or(0, Vec::len);
        let mut header = vec!["x".to_string(), "B".to_string(), "slope".to_string()];
        header.extend((1..=k).map(|i| format!("lambda_{i}")));
        w.write_record(&header)?;
        for i in 0..self.x.len() {
            let mut row = vec![fmt_num(self.x[i]), fmt_num(self.b[i]), fmt_num(self.slope[i])];
            row.extend(self.lambda[i].iter().map(|&l| fmt_num(l)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

struct Point {
    b: f64,
    lambda: Vec<f64>,
    v: Vec<f64>,
    sum_lambda: f64,
}

struct Solver<'a> {
    sys: &'a SubsetSystem,
    opts: SolverOptions,
    // element -> subsets containing it
    owners: Vec<Vec<usize>>,
}

struct Eval {
    g: f64,
    grad: Vec<f64>,
    v: Vec<f64>,
    primal: f64,
}

impl<'a> Solver<'a> {
    fn new(sys: &'a SubsetSystem, opts: SolverOptions) -> Self {
        let mut owners = vec![Vec::new(); sys.n()];
        for (k, s) in sys.subsets.iter().enumerate() {
            for &e in s {
                owners[e].push(k);
            }
        }
        Self { sys, opts, owners }
    }

    fn eval(&self, lambda: &[f64], x: f64) -> Eval {
        let mut v = vec![0.0; self.sys.n()];
        let mut phi = 0.0;
        let mut primal = 0.0;
        for (e, f) in self.sys.marginals.iter().enumerate() {
            let s: f64 = self.owners[e].iter().map(|&k| lambda[k]).sum();
            let inf = f.infimum();
            let (ve, h) = if s >= 1.0 {
                (inf, f.mean() - inf)
            } else if s <= 0.0 {
                let sup = f.supremum();
                (sup, 0.0)
            } else {
                let ve = f.sample(s);
                (ve, f.premium(ve))
            };
            v[e] = ve;
            primal += h;
            // s v is zero when s = 0, even for an infinite supremum
            phi += h + if s > 0.0 { s * ve } else { 0.0 };
        }
        let grad: Vec<f64> = self
            .sys
            .subsets
            .iter()
            .map(|sub| sub.iter().map(|&e| v[e]).sum::<f64>() - x)
            .collect();
        let g = phi - x * lambda.iter().sum::<f64>();
        Eval { g, grad, v, primal }
    }

    fn solve(&self, x: f64, start: &[f64]) -> Result<Point> {
        self.solve_with(x, start, self.opts.gap_tol)
    }

    fn solve_with(&self, x: f64, start: &[f64], gap_tol: f64) -> Result<Point> {
        let k = self.sys.k();
        let mut lambda = start.to_vec();
        let mut cur = self.eval(&lambda, x);
        if cur.grad.iter().any(|r| !r.is_finite()) {
            // some subset holds only unconstrained elements; start inside
            lambda = vec![1.0 / k as f64; k];
            cur = self.eval(&lambda, x);
        }
        let mut step = 1.0;
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut violation = f64::INFINITY;
        let mut gap = f64::INFINITY;
        for _ in 0..self.opts.max_iterations {
            violation = cur.grad.iter().fold(0.0f64, |m, &r| m.max(r));
            gap = lambda.iter().zip(&cur.grad).map(|(l, r)| l * r).sum::<f64>().abs();
            if violation < self.opts.violation_tol && gap < gap_tol {
                let sum_lambda = lambda.iter().sum();
                return Ok(Point {
                    b: cur.primal,
                    lambda,
                    v: cur.v,
                    sum_lambda,
                });
            }
            if let Some((pl, pg)) = &prev {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..k {
                    let dl = lambda[i] - pl[i];
                    ss += dl * dl;
                    sy += dl * (cur.grad[i] - pg[i]);
                }
                // ascent on a concave function: sy ≤ 0, and sy = 0 on flat pieces
                if sy < 0.0 && ss > 0.0 {
                    step = (ss / -sy).clamp(1e-12, 1e12);
                } else {
                    step = (4.0 * step).min(1e12);
                }
            }
            // projected step, halved until it increases the dual enough and
            // keeps every subset's sum finite
            let mut t = step;
            let mut accepted = None;
            for _ in 0..80 {
                let trial: Vec<f64> = lambda
                    .iter()
                    .zip(&cur.grad)
                    .map(|(l, r)| (l + t * r).max(0.0))
                    .collect();
                let next = self.eval(&trial, x);
                let dir: f64 = trial.iter().zip(&lambda).zip(&cur.grad).map(|((a, b), r)| (a - b) * r).sum();
                let finite = next.grad.iter().all(|r| r.is_finite());
                if finite && next.g >= cur.g + 1e-4 * dir - 1e-15 * cur.g.abs().max(1.0) {
                    accepted = Some((trial, next));
                    break;
                }
                t *= 0.5;
            }
            let Some((trial, next)) = accepted else { break };
            if trial == lambda {
                break;
            }
            prev = Some((std::mem::replace(&mut lambda, trial), std::mem::replace(&mut cur, next).grad));
        }
        Err(Error::NoConvergence {
            x,
            iterations: self.opts.max_iterations,
            violation,
            gap,
        })
    }
}

/// The convex bound `B` on `grid` (sorted or not).
pub fn generic_bound(sys: &SubsetSystem, grid: &[f64]) -> Result<BoundCurve> {
    generic_bound_with(sys, grid, SolverOptions::default())
}

pub fn generic_bound_with(sys: &SubsetSystem, grid: &[f64], opts: SolverOptions) -> Result<BoundCurve> {
    let solver = Solver::new(sys, opts);
    let k = sys.k();
    let lo = sys.feasibility_edge();
    let hi = sys.saturation();
    let uniform_start = vec![1.0 / k as f64; k];

    // x_0 by bisection on Σλ(x) = 1, solved more tightly than the grid
    // points since the slope is read off the multipliers. Solves that fail
    // right at the feasibility edge sit where Σλ is large, so they count as
    // lying below x_0.
    let tight = opts.gap_tol * 1e-3;
    let scale = 1.0 + lo.abs();
    let above = |x: f64, guess: &[f64]| -> Result<Option<Point>> {
        match solver.solve_with(x, guess, tight) {
            Ok(p) if p.sum_lambda <= 1.0 => Ok(Some(p)),
            Ok(_) => Ok(None),
            Err(e) if x - lo < 1e-3 * scale => {
                let _ = e;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    let mut b = if hi.is_finite() { 0.5 * (lo + hi) } else { lo + scale };
    let mut guess = uniform_start.clone();
    let mut pb = loop {
        match above(b, &guess)? {
            Some(p) => break p,
            None if hi.is_finite() && hi - b < 1e-12 * scale => {
                return Err(invalid("system", "the slope stays below -1 up to saturation"));
            }
            None if hi.is_finite() => b = 0.5 * (b + hi),
            None => b = lo + 2.0 * (b - lo),
        }
    };
    guess.clone_from(&pb.lambda);
    let mut a = lo;
    // shrink toward the edge until a point below x_0 turns up
    loop {
        let mid = lo + 0.5 * (b - lo);
        if mid - lo < 1e-9 * scale {
            break;
        }
        match above(mid, &guess)? {
            Some(p) => {
                b = mid;
                guess.clone_from(&p.lambda);
                pb = p;
            }
            None => {
                a = mid;
                break;
            }
        }
    }
    if a > lo {
        for _ in 0..100 {
            if b - a <= 1e-13 * scale {
                break;
            }
            let mid = 0.5 * (a + b);
            match above(mid, &guess)? {
                Some(p) => {
                    b = mid;
                    guess.clone_from(&p.lambda);
                    pb = p;
                }
                None => a = mid,
            }
        }
    }
    let (x0, p0) = (b, pb);

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| grid[i].total_cmp(&grid[j]));
    let mut out: Vec<Option<(f64, f64, Vec<f64>, Vec<f64>)>> = vec![None; grid.len()];
    let mut warm = p0.lambda.clone();
    for i in order {
        let x = grid[i];
        let row = if x <= x0 {
            (p0.b + (x0 - x), -1.0, p0.lambda.clone(), p0.v.clone())
        } else if x >= hi {
            (0.0, 0.0, vec![0.0; k], sys.marginals.iter().map(Marginal::supremum).collect())
        } else {
            let p = solver.solve(x, &warm)?;
            warm.clone_from(&p.lambda);
            (p.b, -p.sum_lambda, p.lambda, p.v)
        };
        out[i] = Some(row);
    }
    let mut curve = BoundCurve {
        x: grid.to_vec(),
        b: Vec::with_capacity(grid.len()),
        slope: Vec::with_capacity(grid.len()),
        lambda: Vec::with_capacity(grid.len()),
        v: Vec::with_capacity(grid.len()),
        x0,
        b0: p0.b,
    };
    for row in out.into_iter().map(Option::unwrap) {
        curve.b.push(row.0);
        curve.slope.push(row.1);
        curve.lambda.push(row.2);
        curve.v.push(row.3);
    }
    Ok(curve)
}

/// Both sides of `(max_k S_k - x)^+ ≤ Σ (X_n - v_n)^+ + (max_k Σ_{I_k} v_n - x)^+`.
pub fn pointwise_chain(sys: &SubsetSystem, values: &[f64], v: &[f64], x: f64) -> (f64, f64) {
    let lhs = (sys.max_sum(values) - x).max(0.0);
    let excess: f64 = values.iter().zip(v).map(|(a, b)| (a - b).max(0.0)).sum();
    let rhs = excess + (sys.max_sum(v) - x).max(0.0);
    (lhs, rhs)
}

/// Whether the pointwise inequality holds (up to rounding).
pub fn pointwise_chain_check(sys: &SubsetSystem, values: &[f64], v: &[f64], x: f64) -> bool {
    let (lhs, rhs) = pointwise_chain(sys, values, v, x);
    lhs <= rhs + 1e-12 * (1.0 + lhs.abs())
}

impl FromStr for SubsetSystem {
    type Err = Error;

    /// Parses the file format with unit exponential marginals.
    fn from_str(s: &str) -> Result<Self> {
        SubsetSystem::parse(s, &Marginal::exponential(1.0)?)
    }
}

/// The site of element `e` in a path system over an `N`-triangle.
pub fn element_site(n: usize, e: usize) -> Site {
    WeightField::zeros(n).sites().nth(e).expect("element inside the triangle")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{frechet_envelope, worst_case_law};
    use crate::marginals::Law;
    use crate::stats::levels;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn exp1() -> Marginal {
        Marginal::exponential(1.0).unwrap()
    }

    #[test]
    fn parse_system() {
        let sys = SubsetSystem::parse("1: 1 2\n# comment\n2: 2 3\n\n3: 3", &exp1()).unwrap();
        assert_eq!(sys.n(), 3);
        assert_eq!(sys.subsets(), &[vec![0, 1], vec![1, 2], vec![2]]);
        assert!(SubsetSystem::parse("1 2 3", &exp1()).is_err());
        assert!(SubsetSystem::parse("1: 0 2", &exp1()).is_err());
        assert!(SubsetSystem::parse("1:", &exp1()).is_err());
        assert!(SubsetSystem::parse("", &exp1()).is_err());
    }

    #[test]
    fn singletons_give_frechet_premium() {
        for n in [2usize, 4] {
            let sys = SubsetSystem::singletons(&exp1(), n).unwrap();
            let env = frechet_envelope(&exp1(), n).unwrap();
            let grid: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
            let curve = generic_bound(&sys, &grid).unwrap();
            assert_abs_diff_eq!(curve.x0, (n as f64).ln(), epsilon = 1e-8);
            for (i, &x) in grid.iter().enumerate() {
                assert_abs_diff_eq!(curve.b[i], env.law.premium(x), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn whole_set_gives_comonotone_sum() {
        let fs = vec![exp1(), Marginal::uniform(), Marginal::exponential(2.0).unwrap()];
        let sys = SubsetSystem::whole(fs.clone()).unwrap();
        // comonotone sum T(u) = Σ Q_n(u); premium by quadrature over u
        let t = |u: f64| fs.iter().map(|f| f.sample(u)).sum::<f64>();
        let grid = [0.2, 0.8, 1.5, 2.5, 4.0];
        let curve = generic_bound(&sys, &grid).unwrap();
        for (i, &x) in grid.iter().enumerate() {
            let oracle = crate::quad::integrate(|u| (t(u) - x).max(0.0), 0.0, 1.0, 1e-12);
            assert_abs_diff_eq!(curve.b[i], oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn complete_graph_matches_closed_form() {
        for n in [3usize, 4] {
            let lattice = LatticeSpec::complete(n).unwrap();
            let law = worst_case_law(&lattice, &exp1()).unwrap();
            let grid = law.grid(&levels(99));
            let sys = SubsetSystem::from_paths(&lattice, &exp1()).unwrap();
            let curve = generic_bound(&sys, &grid).unwrap();
            for (i, &x) in grid.iter().enumerate() {
                assert_abs_diff_eq!(curve.b[i], law.premium(x), epsilon = 1e-6);
                // Σλ is the survival of the extremal law
                assert_abs_diff_eq!(-curve.slope[i], law.survival(x), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn below_x0_is_linear() {
        let sys = SubsetSystem::singletons(&exp1(), 3).unwrap();
        let curve = generic_bound(&sys, &[0.0, 0.5, 3f64.ln()]).unwrap();
        assert_eq!(curve.slope[0], -1.0);
        assert_abs_diff_eq!(curve.b[0] - curve.b[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(curve.b[0], 1.0 + 3f64.ln(), epsilon = 1e-7);
    }

    #[test]
    fn bounded_support_saturates() {
        let sys = SubsetSystem::singletons(&Marginal::uniform(), 2).unwrap();
        let curve = generic_bound(&sys, &[1.0, 2.0]).unwrap();
        assert_eq!(curve.b, vec![0.0, 0.0]);
    }

    #[test]
    fn chain_inequality_on_random_fields() {
        use rand::SeedableRng;
        let lattice = LatticeSpec::complete(3).unwrap();
        let sys = SubsetSystem::from_paths(&lattice, &exp1()).unwrap();
        let x = 3.0;
        let curve = generic_bound(&sys, &[x]).unwrap();
        let v = &curve.v[0];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let values: Vec<f64> = (0..sys.n()).map(|_| exp1().draw(&mut rng)).collect();
            assert!(pointwise_chain_check(&sys, &values, v, x));
            assert!(pointwise_chain_check(&sys, &values, &vec![0.0; sys.n()], x));
        }
        // the worst-case field turns the chain into equalities
        for _ in 0..1000 {
            let w = crate::couplings::sample_convex_max(&exp1(), &lattice, &mut rng).unwrap();
            let (lhs, rhs) = pointwise_chain(&sys, &field_values(&w), v, x);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn element_sites_follow_layout() {
        assert_eq!(element_site(3, 0), Site::new(1, 1));
        assert_eq!(element_site(3, 3), Site::new(2, 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn bound_is_convex_and_nonincreasing(
            subsets in prop::collection::vec(prop::collection::btree_set(0usize..4, 1..4), 1..5),
            theta in 0.5f64..2.0,
        ) {
            let f = Marginal::exponential(theta).unwrap();
            let subsets: Vec<Vec<usize>> = subsets.into_iter().map(|s| s.into_iter().collect()).collect();
            let sys = SubsetSystem::new(vec![f; 4], subsets).unwrap();
            let grid: Vec<f64> = (0..30).map(|i| 0.25 * i as f64).collect();
            let c = generic_bound(&sys, &grid).unwrap();
            for i in 0..grid.len() {
                prop_assert!(c.slope[i] >= -1.0 - 1e-9 && c.slope[i] <= 1e-12);
                prop_assert!(c.lambda[i].iter().all(|&l| l >= 0.0));
            }
            for w in c.b.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            for w in c.b.windows(3) {
                prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-7);
            }
        }
    }
}
