//! Suspension flows, additive/subadditive/matrix cocycles over them, and
//! estimators for limits in density: exceptional time sets of finite
//! measure, Birkhoff and Kingman-type averages, Lyapunov spectra with
//! Oseledets subspaces and regularity diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cocycle;
pub mod config;
pub mod density;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod met;
pub mod numeric;
pub mod timeset;

pub use cocycle::{AdditiveCocycle, MatrixCocycle, SubadditiveCocycle};
pub use error::{Error, Result};
pub use flow::{BaseSystem, FiberPoint, RoofFunction, SuspensionFlow};
pub use timeset::{DensityEstimate, Interval, TimeSet};
