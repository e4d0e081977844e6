//! Flat random walks: paths whose position on every anti-diagonal (or
//! rectangle section) is uniformly distributed.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{LatticeKind, LatticePath, LatticeSpec, Site};

/// Exact probabilities.
pub type Prob = Ratio<u64>;

/// Largest `N` accepted by the exact enumerations.
pub const MAX_EXACT_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WalkKind {
    /// Independent uniform vertex on every anti-diagonal of `C_N`.
    NaturalComplete,
    /// Independent uniform vertex on every section of the `P_{N,M}` rectangle.
    NaturalPoint,
    /// Uniform terminal on anti-diagonal N, then a uniformly shuffled urn of steps.
    Polya,
    /// Uniform vertex on a sub-diagonal, a vertical run, and two urns.
    Rectangle,
}

impl fmt::Display for WalkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WalkKind::NaturalComplete => "natural-complete",
            WalkKind::NaturalPoint => "natural-point",
            WalkKind::Polya => "polya",
            WalkKind::Rectangle => "rectangle",
        })
    }
}

impl WalkKind {
    /// Checks the walk can run on `spec` as given (no transposition).
    pub fn check(self, spec: &LatticeSpec) -> Result<()> {
        let ok = match (self, spec.kind) {
            (WalkKind::NaturalComplete, LatticeKind::Complete) => true,
            (WalkKind::NaturalPoint, LatticeKind::PointToPoint { .. }) => true,
            (WalkKind::Polya, LatticeKind::Line) => true,
            (WalkKind::Rectangle, LatticeKind::PointToPoint { m }) => 2 * m > spec.n,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("the {self} walk does not run on {spec}")))
        }
    }

    /// The walk used by the convexly maximal coupling of `spec`.
    pub fn default_for(spec: &LatticeSpec) -> Self {
        match spec.kind {
            LatticeKind::Complete => WalkKind::NaturalComplete,
            LatticeKind::Line => WalkKind::Polya,
            LatticeKind::PointToPoint { .. } => WalkKind::Rectangle,
        }
    }
}

/// A realized walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatWalk {
    pub kind: WalkKind,
    pub path: LatticePath,
}

fn polya_path(steps: &[bool]) -> LatticePath {
    LatticePath::from_steps(steps.iter().copied())
}

// Rectangle with K = N + 1 - M columns and M ≥ K rows: lower urn to
// (i, K + 1 - i), M - K up steps, upper urn to (K, M).
fn rectangle_path(lower: &[bool], rise: usize, upper: &[bool]) -> LatticePath {
    let steps = lower
        .iter()
        .copied()
        .chain(std::iter::repeat_n(true, rise))
        .chain(upper.iter().copied());
    LatticePath::from_steps(steps)
}

fn urn(ups: usize, rights: usize) -> Vec<bool> {
    let mut v = vec![true; ups];
    v.extend(std::iter::repeat_n(false, rights));
    v
}

fn rectangle_dims(spec: &LatticeSpec) -> (usize, usize) {
    let m = match spec.kind {
        LatticeKind::PointToPoint { m } => m,
        _ => unreachable!("checked by WalkKind::check"),
    };
    (spec.n + 1 - m, m)
}

/// Draws one walk of `kind` on `spec`. The Rectangle walk needs
/// `M ≥ (N+1)/2`; transpose the lattice first otherwise.
pub fn sample_flat_walk<R: Rng + ?Sized>(kind: WalkKind, spec: &LatticeSpec, rng: &mut R) -> Result<FlatWalk> {
    kind.check(spec)?;
    let n = spec.n;
    let path = match kind {
        WalkKind::NaturalComplete | WalkKind::NaturalPoint => {
            let vertices = (1..=n)
                .map(|d| {
                    let section = spec.section(d);
                    section[rng.random_range(0..section.len())]
                })
                .collect();
            LatticePath::new(vertices)?
        }
        WalkKind::Polya => {
            let o = rng.random_range(1..=n);
            let mut steps = urn(o - 1, n - o);
            steps.shuffle(rng);
            // read backwards from the terminal
            steps.reverse();
            polya_path(&steps)
        }
        WalkKind::Rectangle => {
            let (k, m) = rectangle_dims(spec);
            let i = rng.random_range(1..=k);
            let mut lower = urn(k - i, i - 1);
            lower.shuffle(rng);
            lower.reverse();
            let mut upper = urn(i - 1, k - i);
            upper.shuffle(rng);
            rectangle_path(&lower, m - k, &upper)
        }
    };
    Ok(FlatWalk { kind, path })
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, t| acc * (n - t) as u64 / (t + 1) as u64)
}

// Every distinct arrangement of `ups` trues among `len` slots.
fn arrangements(len: usize, ups: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..len).combinations(ups).map(move |pos| {
        let mut v = vec![false; len];
        for p in pos {
            v[p] = true;
        }
        v
    })
}

/// Exact law of the walk's path, by enumeration.
pub fn path_law(kind: WalkKind, spec: &LatticeSpec) -> Result<Vec<(LatticePath, Prob)>> {
    kind.check(spec)?;
    let n = spec.n;
    if n > MAX_EXACT_N {
        return Err(invalid("N", format!("exact enumeration is capped at {MAX_EXACT_N}")));
    }
    let mut out = Vec::new();
    match kind {
        WalkKind::NaturalComplete | WalkKind::NaturalPoint => {
            let sections: Vec<Vec<Site>> = (1..=n).map(|d| spec.section(d)).collect();
            let p = Prob::new(1, sections.iter().map(|s| s.len() as u64).product());
            for vertices in sections.into_iter().multi_cartesian_product() {
                out.push((LatticePath::new(vertices)?, p));
            }
        }
        WalkKind::Polya => {
            for o in 1..=n {
                let p = Prob::new(1, n as u64 * binomial(n - 1, o - 1));
                for steps in arrangements(n - 1, o - 1) {
                    out.push((polya_path(&steps), p));
                }
            }
        }
        WalkKind::Rectangle => {
            let (k, m) = rectangle_dims(spec);
            for i in 1..=k {
                let p = Prob::new(1, k as u64 * binomial(k - 1, i - 1) * binomial(k - 1, k - i));
                for lower in arrangements(k - 1, k - i) {
                    for upper in arrangements(k - 1, i - 1) {
                        out.push((rectangle_path(&lower, m - k, &upper), p));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact distribution of the walk's vertex on each anti-diagonal `1..=N`.
pub fn position_law(kind: WalkKind, spec: &LatticeSpec) -> Result<Vec<BTreeMap<Site, Prob>>> {
    let mut law = vec![BTreeMap::new(); spec.n];
    for (path, p) in path_law(kind, spec)? {
        for (d, &s) in path.vertices().iter().enumerate() {
            *law[d].entry(s).or_insert_with(|| Prob::from_integer(0)) += p;
        }
    }
    Ok(law)
}

/// Whether every anti-diagonal position is exactly uniform on its section.
pub fn is_flat(kind: WalkKind, spec: &LatticeSpec) -> Result<bool> {
    let law = position_law(kind, spec)?;
    Ok(law.iter().enumerate().all(|(d, dist)| {
        let section = spec.section(d + 1);
        let uniform = Prob::new(1, section.len() as u64);
        dist.len() == section.len() && section.iter().all(|s| dist.get(s) == Some(&uniform))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polya_small_cases() {
        let spec = LatticeSpec::line(2).unwrap();
        let law = path_law(WalkKind::Polya, &spec).unwrap();
        assert_eq!(law.len(), 2);
        assert!(law.iter().all(|(_, p)| *p == Prob::new(1, 2)));

        let spec = LatticeSpec::line(4).unwrap();
        let pos = position_law(WalkKind::Polya, &spec).unwrap();
        assert_eq!(pos[1][&Site::new(1, 2)], Prob::new(1, 2));
        let total: Prob = path_law(WalkKind::Polya, &spec).unwrap().iter().map(|(_, p)| *p).sum();
        assert_eq!(total, Prob::from_integer(1));
    }

    #[test]
    fn walks_are_flat() {
        for n in 1..=6 {
            assert!(is_flat(WalkKind::Polya, &LatticeSpec::line(n).unwrap()).unwrap(), "polya {n}");
            assert!(is_flat(WalkKind::NaturalComplete, &LatticeSpec::complete(n).unwrap()).unwrap());
            for m in 1..=n {
                let spec = LatticeSpec::point(n, m).unwrap();
                assert!(is_flat(WalkKind::NaturalPoint, &spec).unwrap());
                if 2 * m > n {
                    assert!(is_flat(WalkKind::Rectangle, &spec).unwrap(), "rectangle {n},{m}");
                }
            }
        }
    }

    #[test]
    fn rectangle_paths_reach_the_corner() {
        let spec = LatticeSpec::point(6, 4).unwrap();
        for (path, _) in path_law(WalkKind::Rectangle, &spec).unwrap() {
            assert!(path.is_valid_for(&spec), "{path}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let w = sample_flat_walk(WalkKind::Rectangle, &spec, &mut rng).unwrap();
            assert!(w.path.is_valid_for(&spec));
        }
    }

    #[test]
    fn kind_mismatches_are_rejected() {
        let line = LatticeSpec::line(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(sample_flat_walk(WalkKind::Rectangle, &line, &mut rng).is_err());
        assert!(sample_flat_walk(WalkKind::NaturalComplete, &line, &mut rng).is_err());
        let low = LatticeSpec::point(5, 2).unwrap();
        assert!(sample_flat_walk(WalkKind::Rectangle, &low, &mut rng).is_err());
        assert!(sample_flat_walk(WalkKind::Polya, &LatticeSpec::complete(3).unwrap(), &mut rng).is_err());
    }

    #[test]
    fn sampled_polya_matches_exact_law() {
        let spec = LatticeSpec::line(4).unwrap();
        let exact: BTreeMap<LatticePath, f64> = path_law(WalkKind::Polya, &spec)
            .unwrap()
            .into_iter()
            .map(|(p, q)| (p, *q.numer() as f64 / *q.denom() as f64))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reps = 80_000;
        let mut counts: BTreeMap<LatticePath, usize> = BTreeMap::new();
        for _ in 0..reps {
            let w = sample_flat_walk(WalkKind::Polya, &spec, &mut rng).unwrap();
            *counts.entry(w.path).or_default() += 1;
        }
        for (path, p) in exact {
            let f = counts.get(&path).copied().unwrap_or(0) as f64 / reps as f64;
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((f - p).abs() < 5.0 * se, "{path}: {f} vs {p}");
        }
    }
}
