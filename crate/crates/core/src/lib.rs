//! Streaming and offline maximization of non-negative submodular functions
//! under matroid and p-system constraints in the random-order model.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod boosting;
pub mod constraints;
pub mod error;
pub mod filtering;
pub mod generators;
pub mod hardness;
pub mod objectives;
pub mod pipelines;
pub mod scalar;
pub mod seed;
pub mod stream;

pub use constraints::{Constraint, ConstraintKind, IndependenceOracle, RankInfo, SwapChoice};
pub use error::{Error, Result};
pub use objectives::{FMode, MultilinearOracle, Objective, ObjectiveKind, ValueOracle};
pub use scalar::Scalar;
pub use stream::{BlockPlan, StreamOrder, WindowPlan};

pub type Objective64 = objectives::Objective<f64>;
pub type ValueOracle64 = objectives::ValueOracle<f64>;
pub type MultilinearOracle64<'a> = objectives::MultilinearOracle<'a, f64>;
pub type FilterOutput64 = filtering::FilterOutput<f64>;
pub type BoostRun64 = boosting::BoostRun<f64>;
pub type PipelineResult64 = pipelines::PipelineResult<f64>;
