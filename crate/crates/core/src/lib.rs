//! Contextual inverse linear programming.
//!
//! Given contexts `z_i` and observed optimal decisions `x*_i` of a linear (or
//! portfolio quadratic) program with known constraints, learn a linear map
//! `c = z theta` whose predicted costs reproduce the decisions. Each
//! observation defines a convex set of cost vectors satisfying the KKT
//! conditions of `x*_i`; learning reduces to finding a model in the
//! intersection of those sets with the model's range, either by alternating
//! projections or by first-order minimization of the mean squared distance
//! to the sets.

pub mod data;
pub mod error;
pub mod feasibility;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod problem;
pub mod qp;
pub mod tol;
pub mod training;

pub use data::{Dataset, DecisionSample, GeneratorConfig};
pub use error::{Error, Result};
pub use feasibility::{make_portfolio_projector, make_projector, project_onto_f, KktProjector, Projection};
pub use lp::{LpInstance, LpKind, LpStatus, SimplexResult};
pub use metrics::{MetricsRecord, Split};
pub use model::{LinearModel, ModelFile};
pub use numerics::Mat;
pub use problem::{Problem, ProblemSpec};
pub use training::{Method, PreparedSet, StepRule, TrainConfig, TrainLog};
