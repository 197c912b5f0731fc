//! Long-run average impulse control of Lévy processes.
//!
//! The pipeline runs model → ladder characteristics → gain rate → threshold
//! solver, with a renewal-reward simulator to check the result:
//!
//! ```
//! use levy_impulse::prelude::*;
//!
//! let model = LevyModelF64::brownian(1.0, 2.0).unwrap();
//! let payoff = PayoffSpec::new(Gamma::Linear { c: 1.0 }, RunningCost::monomial(2, 1.0), 4.0 / 3.0).unwrap();
//! let sol = solve(&model, &payoff, &SolveOptions::default()).unwrap();
//! assert!((sol.rho_star + 1.0).abs() < 1e-6);
//! ```
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below name the double-precision instantiations.

// `!(x > 0)` is used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ladder;
pub mod numerics;
pub mod potential;
pub mod process;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod solver;
pub mod tail;
pub mod transform;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LevyModelF64 = process::LevyModel<f64>;
pub type LevyModelF32 = process::LevyModel<f32>;
pub type LadderSystemF64 = ladder::LadderSystem<f64>;
pub type LadderSystemF32 = ladder::LadderSystem<f32>;
pub type PayoffSpecF64 = transform::PayoffSpec<f64>;
pub type PayoffSpecF32 = transform::PayoffSpec<f32>;
pub type GainRateF64 = transform::GainRate<f64>;
pub type PolicySolutionF64 = solver::PolicySolution<f64>;
pub type PolicySolutionF32 = solver::PolicySolution<f32>;
pub type SimulationReportF64 = simulate::SimulationReport<f64>;

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::ladder::{build_ladder_system, DescendingRep, LadderOptions, LadderSystem};
    pub use crate::potential::{potential_density, PotentialDensity};
    pub use crate::process::{JumpLaw, LevyModel, SpectralClass};
    pub use crate::scalar::Scalar;
    pub use crate::simulate::{run_policy, SimOptions, SimulationReport, Strategy};
    pub use crate::solver::{solve, solve_fixed_restart, Degeneracy, PolicySolution, SolveOptions};
    pub use crate::transform::{gain_rate, GainRate, Gamma, PayoffSpec, Restart, RunningCost};
    pub use crate::{LevyModelF32, LevyModelF64};
}
