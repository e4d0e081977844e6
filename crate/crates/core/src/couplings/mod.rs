//! Joint laws for the site weights. Every recipe keeps each site marginally
//! distributed as the given law; they differ only in how sites depend on
//! each other.
//!
//! The convexly maximal coupling puts `Q_F(U / n_d)` on one site per
//! anti-diagonal section (chosen by a flat walk) and the conditional law
//! below `w_{n_d}` on the rest, all driven by one uniform `U`.

pub mod walk;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{lpp, LatticeKind, LatticePath, LatticeSpec, Site, WeightField};
use crate::marginals::Marginal;
use crate::mixing::{CopulaKind, CopulaSampler, MixCopula};

pub use walk::{is_flat, path_law, position_law, sample_flat_walk, FlatWalk, Prob, WalkKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingKind {
    Iid,
    ConvexMax,
    /// Flat-walk coupling with an explicit walk. The natural walk is written
    /// `NaturalComplete` and resolved per lattice.
    Flat(WalkKind),
    /// Constant weight on each anti-diagonal, diagonals coupled by the copula.
    MinMean(CopulaKind),
    /// Convexly maximal per diagonal, diagonal uniforms coupled by the copula.
    MaxMeanMixed(CopulaKind),
}

impl fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingKind::Iid => f.write_str("iid"),
            CouplingKind::ConvexMax => f.write_str("convexmax"),
            CouplingKind::Flat(WalkKind::NaturalComplete | WalkKind::NaturalPoint) => f.write_str("flat:natural"),
            CouplingKind::Flat(k) => write!(f, "flat:{k}"),
            CouplingKind::MinMean(c) => write!(f, "minmean:{c}"),
            CouplingKind::MaxMeanMixed(CopulaKind::MixableBlock) => f.write_str("maxmeanmixed"),
            CouplingKind::MaxMeanMixed(c) => write!(f, "maxmeanmixed:{c}"),
        }
    }
}

impl FromStr for CouplingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse {
            input: s.to_string(),
            reason: "expected iid, convexmax, flat:<walk>, minmean:<copula> or maxmeanmixed[:<copula>]".into(),
        };
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        Ok(match (head, tail) {
            ("iid", None) => CouplingKind::Iid,
            ("convexmax", None) => CouplingKind::ConvexMax,
            ("flat", Some("polya")) => CouplingKind::Flat(WalkKind::Polya),
            ("flat", Some("rectangle")) => CouplingKind::Flat(WalkKind::Rectangle),
            ("flat", Some("natural")) => CouplingKind::Flat(WalkKind::NaturalComplete),
            ("minmean", Some(c)) => CouplingKind::MinMean(c.parse()?),
            ("maxmeanmixed", None) => CouplingKind::MaxMeanMixed(CopulaKind::MixableBlock),
            ("maxmeanmixed", Some(c)) => CouplingKind::MaxMeanMixed(c.parse()?),
            _ => return Err(err()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    pub marginal: Marginal,
    pub lattice: LatticeSpec,
}

impl CouplingSpec {
    pub fn new(kind: CouplingKind, marginal: Marginal, lattice: LatticeSpec) -> Self {
        Self {
            kind,
            marginal,
            lattice,
        }
    }
}

/// One generated field, with the walk that drove it when there is one.
#[derive(Debug, Clone)]
pub struct CouplingDraw {
    pub field: WeightField,
    pub walk: Option<LatticePath>,
}

#[derive(Debug, Clone)]
enum Plan {
    Iid,
    // walk kind after resolution; `transpose` when the walk runs on the mirrored lattice
    Flat { walk: WalkKind, transpose: bool },
    MinMean(CopulaSampler),
    MaxMeanMixed(CopulaSampler),
}

/// A validated coupling with its precomputed tables, ready to sample.
#[derive(Debug, Clone)]
pub struct Coupling {
    spec: CouplingSpec,
    plan: Plan,
}

fn resolve_walk(requested: WalkKind, lattice: &LatticeSpec) -> Result<(WalkKind, bool)> {
    let walk = match (requested, lattice.kind) {
        (WalkKind::NaturalComplete | WalkKind::NaturalPoint, LatticeKind::PointToPoint { .. }) => WalkKind::NaturalPoint,
        (WalkKind::NaturalComplete | WalkKind::NaturalPoint, _) => WalkKind::NaturalComplete,
        (k, _) => k,
    };
    let transpose = matches!(
        (walk, lattice.kind),
        (WalkKind::Rectangle, LatticeKind::PointToPoint { m }) if 2 * m < lattice.n + 1
    );
    let target = if transpose { lattice.transposed() } else { *lattice };
    walk.check(&target)?;
    Ok((walk, transpose))
}

impl Coupling {
    pub fn new(spec: CouplingSpec) -> Result<Self> {
        if !spec.marginal.is_nonnegative() {
            return Err(invalid("marginal", format!("{} can take negative values", spec.marginal)));
        }
        let n = spec.lattice.n;
        let plan = match spec.kind {
            CouplingKind::Iid => Plan::Iid,
            CouplingKind::ConvexMax => {
                let (walk, transpose) = resolve_walk(WalkKind::default_for(&spec.lattice), &spec.lattice)?;
                Plan::Flat { walk, transpose }
            }
            CouplingKind::Flat(k) => {
                let (walk, transpose) = resolve_walk(k, &spec.lattice)?;
                Plan::Flat { walk, transpose }
            }
            CouplingKind::MinMean(c) => {
                let copula = MixCopula::new(c, n)?;
                Plan::MinMean(copula.build_for(&spec.marginal)?)
            }
            CouplingKind::MaxMeanMixed(c) => {
                if !spec.marginal.is_exponential() {
                    return Err(Error::Unsupported(
                        "the mixed maximal-mean coupling is only defined for exponential weights".into(),
                    ));
                }
                if spec.lattice.kind != LatticeKind::Complete {
                    return Err(Error::Unsupported(
                        "the mixed maximal-mean coupling is only defined on the complete graph".into(),
                    ));
                }
                Plan::MaxMeanMixed(MixCopula::new(c, n)?.build()?)
            }
        };
        Ok(Self { spec, plan })
    }

    pub fn spec(&self) -> &CouplingSpec {
        &self.spec
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CouplingDraw> {
        let f = &self.spec.marginal;
        let lattice = &self.spec.lattice;
        let n = lattice.n;
        Ok(match &self.plan {
            Plan::Iid => CouplingDraw {
                field: WeightField::from_fn(n, |_| f.draw(rng)),
                walk: None,
            },
            Plan::Flat { walk, transpose } => {
                let target = if *transpose { lattice.transposed() } else { *lattice };
                let w = sample_flat_walk(*walk, &target, rng)?;
                let u: f64 = rng.sample(rand_distr::Open01);
                let us = vec![u; n];
                let field = flat_field(f, &target, &w.path, &us, rng);
                if *transpose {
                    CouplingDraw {
                        field: field.transposed(),
                        walk: Some(w.path.transposed()),
                    }
                } else {
                    CouplingDraw {
                        field,
                        walk: Some(w.path),
                    }
                }
            }
            Plan::MinMean(copula) => {
                let us = copula.sample(rng)?;
                let values: Vec<f64> = us.iter().map(|&u| f.sample(u)).collect();
                CouplingDraw {
                    field: WeightField::from_fn(n, |s| values[s.diagonal() - 1]),
                    walk: None,
                }
            }
            Plan::MaxMeanMixed(copula) => {
                let us = copula.sample(rng)?;
                let w = sample_flat_walk(WalkKind::NaturalComplete, lattice, rng)?;
                let field = flat_field(f, lattice, &w.path, &us, rng);
                CouplingDraw {
                    field,
                    walk: Some(w.path),
                }
            }
        })
    }

    pub fn sample_field<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WeightField> {
        Ok(self.sample(rng)?.field)
    }

    /// LPP times of `reps` replicates, each on its own stream of `seed`,
    /// in replicate order.
    pub fn simulate(&self, seed: u64, reps: u64) -> Result<Vec<f64>> {
        let lattice = self.spec.lattice;
        crate::rng::replicate(seed, reps, |rng, _| self.sample_field(rng).map(|w| lpp(&lattice, &w)))
            .into_iter()
            .collect()
    }
}

// On-walk site of section d gets Q_F(u_d / n_d), the rest of the section
// Q_F(1/n_d + u_d (1 - 1/n_d)). Sites outside the lattice region are iid.
fn flat_field<R: Rng + ?Sized>(
    f: &Marginal,
    spec: &LatticeSpec,
    path: &LatticePath,
    us: &[f64],
    rng: &mut R,
) -> WeightField {
    let n = spec.n;
    let mut w = WeightField::zeros(n);
    for d in 1..=n {
        let section = spec.section(d);
        let nd = section.len() as f64;
        let u = us[d - 1];
        let on = path.at(d);
        let top = f.sample(u / nd);
        let rest = f.sample(1.0 / nd + u * (1.0 - 1.0 / nd));
        for s in section {
            w.set(s, if s == on { top } else { rest });
        }
    }
    if matches!(spec.kind, LatticeKind::PointToPoint { .. }) {
        let outside: Vec<Site> = w.sites().filter(|&s| !spec.contains(s)).collect();
        for s in outside {
            w.set(s, f.draw(rng));
        }
    }
    w
}

pub fn sample_iid<R: Rng + ?Sized>(marginal: &Marginal, lattice: &LatticeSpec, rng: &mut R) -> Result<WeightField> {
    Coupling::new(CouplingSpec::new(CouplingKind::Iid, marginal.clone(), *lattice))?.sample_field(rng)
}

pub fn sample_convex_max<R: Rng + ?Sized>(
    marginal: &Marginal,
    lattice: &LatticeSpec,
    rng: &mut R,
) -> Result<WeightField> {
    Coupling::new(CouplingSpec::new(CouplingKind::ConvexMax, marginal.clone(), *lattice))?.sample_field(rng)
}

/// Field and walk of the flat-walk coupling.
pub fn sample_flat_coupling<R: Rng + ?Sized>(
    walk: WalkKind,
    marginal: &Marginal,
    lattice: &LatticeSpec,
    rng: &mut R,
) -> Result<(WeightField, LatticePath)> {
    let draw = Coupling::new(CouplingSpec::new(CouplingKind::Flat(walk), marginal.clone(), *lattice))?.sample(rng)?;
    Ok((draw.field, draw.walk.expect("flat couplings record their walk")))
}

pub fn sample_min_mean<R: Rng + ?Sized>(
    marginal: &Marginal,
    lattice: &LatticeSpec,
    copula: CopulaKind,
    rng: &mut R,
) -> Result<WeightField> {
    Coupling::new(CouplingSpec::new(CouplingKind::MinMean(copula), marginal.clone(), *lattice))?.sample_field(rng)
}

/// Exponential weights on `C_N` with diagonal uniforms from the block scheme.
pub fn sample_max_mean_mixed<R: Rng + ?Sized>(
    marginal: &Marginal,
    lattice: &LatticeSpec,
    rng: &mut R,
) -> Result<WeightField> {
    let kind = CouplingKind::MaxMeanMixed(CopulaKind::MixableBlock);
    Coupling::new(CouplingSpec::new(kind, marginal.clone(), *lattice))?.sample_field(rng)
}

/// `n` copies of `f` of which exactly one exceeds `w_n`; their maximum has
/// survival `min(1, n F*(x))`.
pub fn sample_maximally_dependent<R: Rng + ?Sized>(f: &Marginal, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(invalid("n", "must be at least 1"));
    }
    let u: f64 = rng.sample(rand_distr::Open01);
    let k = rng.random_range(0..n);
    let nf = n as f64;
    let top = f.sample(u / nf);
    let rest = f.sample(1.0 / nf + u * (1.0 - 1.0 / nf));
    Ok((0..n).map(|i| if i == k { top } else { rest }).collect())
}
