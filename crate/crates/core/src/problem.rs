//! The forward optimization problem a dataset is drawn from: a standard-form
//! LP or the simplex-constrained portfolio QP.
//!
//! Costs come in two flavours. The *user* cost is what a dataset stores
//! (item returns for knapsack, edge costs for paths, asset returns for the
//! portfolio). The *model* cost is what a [`LinearModel`](crate::LinearModel)
//! predicts and what the feasible sets live in: the minimization-form cost for
//! LPs and the return vector itself for the portfolio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{make_portfolio_projector, make_projector, simplex_residual, KktProjector};
use crate::lp::{build_grid_sp, build_knapsack, build_perfect_matching, LpInstance, LpKind};
use crate::numerics::{dot, Mat};
use crate::qp::PortfolioSolver;

/// Default margin for LP families.
pub const DEFAULT_LP_MARGIN: f64 = 1.0;
/// Default margin for the portfolio QP.
pub const DEFAULT_PORTFOLIO_MARGIN: f64 = 0.0;

#[derive(Clone, Debug)]
pub struct Portfolio {
    q: Mat,
    gamma: f64,
    solver: PortfolioSolver,
}

impl Portfolio {
    pub fn new(q: Mat, gamma: f64) -> Result<Self> {
        let solver = PortfolioSolver::new(&q, gamma)?;
        Ok(Self { q, gamma, solver })
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn solver(&self) -> &PortfolioSolver {
        &self.solver
    }
}

impl PartialEq for Portfolio {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.gamma == other.gamma
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Lp(LpInstance),
    Portfolio(Portfolio),
}

/// Serialized form of a [`Problem`]: builder parameters for the known
/// families, explicit data otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    Generic { a: Vec<Vec<f64>>, b: Vec<f64> },
    GridShortestPath { grid_size: usize },
    Knapsack { weights: Vec<f64>, capacity: f64 },
    PerfectMatching { grid_size: usize },
    Portfolio { q: Vec<Vec<f64>>, gamma: f64 },
}

impl Problem {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        Ok(match spec {
            ProblemSpec::Generic { a, b } => Problem::Lp(LpInstance::new(Mat::from_rows(a)?, b.clone())?),
            ProblemSpec::GridShortestPath { grid_size } => Problem::Lp(build_grid_sp(*grid_size)?),
            ProblemSpec::Knapsack { weights, capacity } => Problem::Lp(build_knapsack(weights, *capacity)?),
            ProblemSpec::PerfectMatching { grid_size } => Problem::Lp(build_perfect_matching(*grid_size)?),
            ProblemSpec::Portfolio { q, gamma } => Problem::Portfolio(Portfolio::new(Mat::from_rows(q)?, *gamma)?),
        })
    }

    pub fn to_spec(&self) -> ProblemSpec {
        match self {
            Problem::Lp(inst) => match inst.kind() {
                LpKind::Generic => ProblemSpec::Generic {
                    a: inst.a().to_rows(),
                    b: inst.b().to_vec(),
                },
                LpKind::GridShortestPath { grid_size } => ProblemSpec::GridShortestPath { grid_size: *grid_size },
                LpKind::Knapsack { weights, capacity } => ProblemSpec::Knapsack {
                    weights: weights.clone(),
                    capacity: *capacity,
                },
                LpKind::PerfectMatching { grid_size } => ProblemSpec::PerfectMatching { grid_size: *grid_size },
            },
            Problem::Portfolio(p) => ProblemSpec::Portfolio {
                q: p.q.to_rows(),
                gamma: p.gamma,
            },
        }
    }

    /// Length of decision and cost vectors.
    pub fn dim(&self) -> usize {
        match self {
            Problem::Lp(inst) => inst.m(),
            Problem::Portfolio(p) => p.q.rows(),
        }
    }

    pub fn default_margin(&self) -> f64 {
        match self {
            Problem::Lp(_) => DEFAULT_LP_MARGIN,
            Problem::Portfolio(_) => DEFAULT_PORTFOLIO_MARGIN,
        }
    }

    pub fn as_lp(&self) -> Option<&LpInstance> {
        match self {
            Problem::Lp(inst) => Some(inst),
            Problem::Portfolio(_) => None,
        }
    }

    /// Model-space cost for a user-facing cost.
    pub fn model_cost(&self, user_cost: &[f64]) -> Vec<f64> {
        match self {
            Problem::Lp(inst) => inst.to_min_form(user_cost),
            Problem::Portfolio(_) => user_cost.to_vec(),
        }
    }

    /// `x_hat(c)` for a model-space cost.
    pub fn decide(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_len(c, "decide (cost)")?;
        match self {
            Problem::Lp(inst) => inst.decide(c),
            Problem::Portfolio(p) => p.solver.solve(c),
        }
    }

    /// Objective minimized by `x_hat(c)`, evaluated at `x`.
    pub fn objective(&self, c: &[f64], x: &[f64]) -> f64 {
        match self {
            Problem::Lp(_) => dot(c, x),
            Problem::Portfolio(p) => p.solver.objective(c, x),
        }
    }

    /// Largest violation of the constraints by `x`.
    pub fn feasibility_residual(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x, "feasibility_residual")?;
        match self {
            Problem::Lp(inst) => inst.feasibility_residual(x),
            Problem::Portfolio(_) => Ok(simplex_residual(x)),
        }
    }

    /// Feasible cost set of `x_star` with margin `chi`.
    pub fn projector(&self, x_star: &[f64], chi: f64) -> Result<KktProjector> {
        match self {
            Problem::Lp(inst) => make_projector(inst, x_star, chi),
            Problem::Portfolio(p) => make_portfolio_projector(&p.q, p.gamma, x_star, chi),
        }
    }

    fn check_len(&self, v: &[f64], context: &'static str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }
}
