//! Last-passage percolation under dependent weights: marginal laws, oriented
//! lattices, couplings that make LPP times large or small, analytic convex
//! bounds and the statistics used to check them by simulation.

pub mod bounds;
pub mod couplings;
pub mod error;
pub mod lattice;
pub mod marginals;
pub mod mixing;
pub mod quad;
pub mod rng;
pub mod stats;

pub use bounds::{generic_bound, worst_case_law, BoundCurve, LinearLaw, QuantileSumLaw, SubsetSystem, WorstCaseLaw};
pub use couplings::{Coupling, CouplingDraw, CouplingKind, CouplingSpec, FlatWalk, WalkKind};
pub use error::{Error, Result};
pub use lattice::{lpp, LatticeKind, LatticePath, LatticeSpec, Site, WeightField};
pub use marginals::{Law, Marginal, MemorylessParams};
pub use mixing::{CopulaKind, MixCopula};
pub use stats::{EmpiricalSample, MomentSummary, PremiumCurve, Verdict};
