//! Evaluation: estimate loss (regret under the true cost), decision loss,
//! the scale-invariant sub-optimality `Gamma`, the margin lower bound
//! `delta`, and the PL constant of the feature matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{KktProjector, Projection};
use crate::lp::LpInstance;
use crate::model::LinearModel;
use crate::numerics::{dist_sq, dot, norm, pseudo_inverse, smallest_eigenvalue, Mat};
use crate::problem::Problem;
use crate::tol;
use crate::training::{loss_h, PreparedSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub split: Split,
    pub h: f64,
    /// `None` when the split carries no true costs.
    pub estimate_loss: Option<f64>,
    pub decision_loss: f64,
    /// `None` when some projection has zero norm.
    pub subopt_mean: Option<f64>,
    pub mu: f64,
}

/// `sum_i f_{c*_i}(x_hat(z_i theta)) - f_{c*_i}(x*_i)`; for LPs this is `<c*_i, x_hat - x*_i>`.
pub fn estimate_loss(set: &PreparedSet, model: &LinearModel) -> Result<f64> {
    let c_stars = set
        .c_stars()
        .ok_or(Error::Undefined("estimate loss without true costs"))?;
    let decisions = decide_all(set, model)?;
    Ok(decisions
        .iter()
        .zip(c_stars)
        .zip(set.x_stars())
        .map(|((x_hat, c), x)| regret(set.problem(), c, x_hat, x))
        .sum())
}

/// `sum_i ||x_hat(z_i theta) - x*_i||^2`.
pub fn decision_loss(set: &PreparedSet, model: &LinearModel) -> Result<f64> {
    let decisions = decide_all(set, model)?;
    Ok(decisions.iter().zip(set.x_stars()).map(|(a, b)| dist_sq(a, b)).sum())
}

fn decide_all(set: &PreparedSet, model: &LinearModel) -> Result<Vec<Vec<f64>>> {
    let predictions = model.predict_all(set.z())?;
    (0..set.len())
        .into_par_iter()
        .map(|i| set.problem().decide(predictions.row(i)).map_err(|e| e.at_sample(i)))
        .collect()
}

fn regret(problem: &Problem, c_star: &[f64], x_hat: &[f64], x_star: &[f64]) -> f64 {
    problem.objective(c_star, x_hat) - problem.objective(c_star, x_star)
}

/// `Gamma = <P_C(c) / ||P_C(c)||, x_hat(c) - x*>` for a model-space cost `c`.
pub fn suboptimality(problem: &Problem, projector: &KktProjector, c_theta: &[f64]) -> Result<f64> {
    let proj = projector.project(c_theta)?;
    let x_hat = problem.decide(c_theta)?;
    gamma_from(&proj, &x_hat, projector.x_star())
}

fn gamma_from(proj: &Projection, x_hat: &[f64], x_star: &[f64]) -> Result<f64> {
    let scale = norm(&proj.point);
    if scale <= 1e-12 {
        return Err(Error::Undefined("sub-optimality at a zero-norm projection"));
    }
    let gap: Vec<f64> = x_hat.iter().zip(x_star).map(|(a, b)| a - b).collect();
    Ok(dot(&proj.point, &gap) / scale)
}

/// Lower bound on `||c||` over the margin set of `x*`:
/// `(chi / sqrt(m)) max_{j in M} min(1, min_{p in B} 1/|tau_pj|)` with `tau = A_B^+ A_M`.
pub fn delta_lower_bound(inst: &LpInstance, x_star: &[f64], chi: f64) -> Result<f64> {
    if x_star.len() != inst.m() {
        return Err(Error::DimensionMismatch {
            context: "delta_lower_bound (x_star)",
            expected: inst.m(),
            got: x_star.len(),
        });
    }
    if !(chi >= 0.0 && chi.is_finite()) {
        return Err(Error::InvalidInput(format!("margin must be >= 0, got {chi}")));
    }
    let m = inst.m();
    let (support, inactive): (Vec<usize>, Vec<usize>) = (0..m).partition(|&j| x_star[j] > tol::SUPPORT);
    if inactive.is_empty() {
        return Err(Error::Undefined("delta lower bound with no zero coordinates"));
    }
    let tau = pseudo_inverse(&inst.a().select_columns(&support)).matmul(&inst.a().select_columns(&inactive))?;
    let best = (0..inactive.len())
        .map(|k| {
            (0..support.len())
                .map(|p| 1.0 / tau[(p, k)].abs())
                .fold(1.0_f64, f64::min)
        })
        .fold(0.0_f64, f64::max);
    Ok(chi / (m as f64).sqrt() * best)
}

/// `lambda_min(Z'Z / N)`.
pub fn pl_constant(z: &Mat) -> Result<f64> {
    if z.rows() == 0 {
        return Err(Error::InvalidInput("PL constant needs at least one sample".into()));
    }
    smallest_eigenvalue(&z.gram().scaled(1.0 / z.rows() as f64))
}

/// All metrics of `model` on one split. Samples are processed in parallel
/// and summed in sample order.
pub fn evaluate(set: &PreparedSet, model: &LinearModel, split: Split) -> Result<MetricsRecord> {
    let eval = loss_h(model, set)?;
    let per_sample: Vec<(f64, Option<f64>, Option<f64>)> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let c = eval.predictions.row(i);
            let x_hat = set.problem().decide(c).map_err(|e| e.at_sample(i))?;
            let x_star = &set.x_stars()[i];
            let dec = dist_sq(&x_hat, x_star);
            let est = set.c_stars().map(|cs| regret(set.problem(), &cs[i], &x_hat, x_star));
            let gamma = gamma_from(&eval.projections[i], &x_hat, x_star).ok();
            Ok((dec, est, gamma))
        })
        .collect::<Result<_>>()?;

    let decision_loss = per_sample.iter().map(|s| s.0).sum();
    let estimate_loss = per_sample.iter().map(|s| s.1).sum::<Option<f64>>();
    let subopt_mean = per_sample
        .iter()
        .map(|s| s.2)
        .sum::<Option<f64>>()
        .map(|total| total / set.len() as f64);
    Ok(MetricsRecord {
        split,
        h: eval.value,
        estimate_loss,
        decision_loss,
        subopt_mean,
        mu: pl_constant(set.z())?,
    })
}
