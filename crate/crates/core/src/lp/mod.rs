//! Standard-form linear programs `min <c, x> s.t. A x = b, x >= 0`: the
//! instance type, builders for the graph and knapsack families, and a revised
//! simplex solver that reports the optimal basis and duals.

mod builders;
mod simplex;

pub use builders::{build_grid_sp, build_knapsack, build_perfect_matching, drop_redundant_rows, grid_edges};
pub use simplex::{basis_reduced_costs, feasibility_residual, solve_lp, solve_standard, LpStatus, SimplexResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Mat;

/// Which family an instance was built from. Builders are deterministic, so
/// the tag plus its parameters reproduce `A` and `b` exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LpKind {
    Generic,
    GridShortestPath { grid_size: usize },
    Knapsack { weights: Vec<f64>, capacity: f64 },
    PerfectMatching { grid_size: usize },
}

/// Natural optimization sense of the user-facing cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpInstance {
    a: Mat,
    b: Vec<f64>,
    kind: LpKind,
}

impl LpInstance {
    /// A generic instance from raw constraint data.
    pub fn new(a: Mat, b: Vec<f64>) -> Result<Self> {
        Self::with_kind(a, b, LpKind::Generic)
    }

    pub(crate) fn with_kind(a: Mat, b: Vec<f64>, kind: LpKind) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "LpInstance (b)",
                expected: a.rows(),
                got: b.len(),
            });
        }
        if a.rows() > a.cols() {
            return Err(Error::InvalidInput(format!(
                "standard form needs n <= m, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if !a.is_finite() || !b.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("constraint data must be finite".into()));
        }
        Ok(Self { a, b, kind })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn kind(&self) -> &LpKind {
        &self.kind
    }

    /// Number of equality rows.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Number of variables.
    pub fn m(&self) -> usize {
        self.a.cols()
    }

    pub fn sense(&self) -> Sense {
        match self.kind {
            LpKind::Knapsack { .. } => Sense::Maximize,
            _ => Sense::Minimize,
        }
    }

    /// Maps a user-facing cost (returns, for maximization families) to the
    /// minimization-form cost the solver and the feasibility sets work with.
    pub fn to_min_form(&self, user_cost: &[f64]) -> Vec<f64> {
        match self.sense() {
            Sense::Minimize => user_cost.to_vec(),
            Sense::Maximize => user_cost.iter().map(|v| -v).collect(),
        }
    }

    /// Largest violation of `A x = b, x >= 0`.
    pub fn feasibility_residual(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.m() {
            return Err(Error::DimensionMismatch {
                context: "LpInstance::feasibility_residual",
                expected: self.m(),
                got: x.len(),
            });
        }
        Ok(feasibility_residual(&self.a, &self.b, x))
    }

    /// `x_hat(c)` for a minimization-form cost; errors unless the LP is solved to optimality.
    pub fn decide(&self, c: &[f64]) -> Result<Vec<f64>> {
        Ok(solve_lp(self, c)?.into_optimal()?.x)
    }
}
