//! The squared-distance loss `h(theta) = 1/(2N) sum_i dist(z_i theta, C_i)^2`,
//! its gradient, and the optimizers built on them: alternating projections,
//! gradient descent, stochastic gradient descent and preconditioned gradient
//! descent, with constant, Armijo or `1/(mu (t+1))` step sizes.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::feasibility::{project_all, KktProjector, Projection};
use crate::metrics::{evaluate, MetricsRecord, Split};
use crate::model::LinearModel;
use crate::numerics::{dist_sq, dot, LeastSquares, Mat};
use crate::problem::Problem;

/// A dataset with its feasible sets built, ready for training or evaluation.
#[derive(Clone, Debug)]
pub struct PreparedSet {
    problem: Problem,
    z: Mat,
    x_stars: Vec<Vec<f64>>,
    /// True costs in model space.
    c_stars: Option<Vec<Vec<f64>>>,
    projectors: Vec<KktProjector>,
    margin: f64,
    ls: LeastSquares,
}

impl PreparedSet {
    pub fn new(ds: &Dataset, margin: f64) -> Result<Self> {
        let c_stars = ds.has_costs().then(|| {
            ds.samples
                .iter()
                .map(|s| ds.problem.model_cost(s.c_star.as_deref().unwrap_or_default()))
                .collect()
        });
        Self::from_parts(
            ds.problem.clone(),
            ds.feature_matrix(),
            ds.samples.iter().map(|s| s.x_star.clone()).collect(),
            c_stars,
            margin,
        )
    }

    /// Builds from raw parts; `c_stars` are model-space costs.
    pub fn from_parts(
        problem: Problem,
        z: Mat,
        x_stars: Vec<Vec<f64>>,
        c_stars: Option<Vec<Vec<f64>>>,
        margin: f64,
    ) -> Result<Self> {
        if z.rows() != x_stars.len() || z.rows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "PreparedSet (samples)",
                expected: z.rows(),
                got: x_stars.len(),
            });
        }
        if let Some(c) = &c_stars {
            if c.len() != x_stars.len() || c.iter().any(|v| v.len() != problem.dim()) {
                return Err(Error::InvalidInput("true costs do not match the samples".into()));
            }
        }
        let projectors = x_stars
            .par_iter()
            .enumerate()
            .map(|(i, x)| problem.projector(x, margin).map_err(|e| e.at_sample(i)))
            .collect::<Result<Vec<_>>>()?;
        let ls = LeastSquares::new(&z);
        Ok(Self {
            problem,
            z,
            x_stars,
            c_stars,
            projectors,
            margin,
            ls,
        })
    }

    pub fn len(&self) -> usize {
        self.z.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.rows() == 0
    }

    pub fn features(&self) -> usize {
        self.z.cols()
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn z(&self) -> &Mat {
        &self.z
    }

    pub fn x_stars(&self) -> &[Vec<f64>] {
        &self.x_stars
    }

    pub fn c_stars(&self) -> Option<&[Vec<f64>]> {
        self.c_stars.as_deref()
    }

    pub fn projectors(&self) -> &[KktProjector] {
        &self.projectors
    }

    /// Exact projection onto the model set: `argmin_theta ||Z theta - targets||`.
    pub fn fit(&self, targets: &Mat) -> Result<LinearModel> {
        LinearModel::new(self.ls.solve_columns(targets)?)
    }

    fn check_model(&self, model: &LinearModel) -> Result<()> {
        if model.features() != self.features() || model.outputs() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "model shape",
                expected: self.features() * self.dim(),
                got: model.features() * model.outputs(),
            });
        }
        Ok(())
    }
}

/// `h` at one model together with the projections it was computed from.
#[derive(Clone, Debug)]
pub struct LossEval {
    pub value: f64,
    pub predictions: Mat,
    pub projections: Vec<Projection>,
}

impl LossEval {
    /// Projected points stacked as an `N x m` matrix.
    pub fn targets(&self) -> Mat {
        let m = self.predictions.cols();
        Mat::from_fn(self.projections.len(), m, |i, j| self.projections[i].point[j])
    }
}

pub fn loss_h(model: &LinearModel, set: &PreparedSet) -> Result<LossEval> {
    set.check_model(model)?;
    let predictions = model.predict_all(&set.z)?;
    let projections = project_all(&set.projectors, &predictions)?;
    let total: f64 = projections.iter().map(|p| p.distance_sq).sum();
    Ok(LossEval {
        value: total / (2.0 * set.len() as f64),
        predictions,
        projections,
    })
}

/// `(1/N) Z'(Z theta - Q)` with `Q` the projections of the current predictions.
pub fn grad_h(model: &LinearModel, set: &PreparedSet, projections: &[Projection]) -> Result<Mat> {
    let residual = fresh_residual(model, set, projections)?;
    Ok(set.z.transpose().matmul(&residual)?.scaled(1.0 / set.len() as f64))
}

/// `Z theta - Q`, after checking that `projections` belong to `model`.
fn fresh_residual(model: &LinearModel, set: &PreparedSet, projections: &[Projection]) -> Result<Mat> {
    set.check_model(model)?;
    if projections.len() != set.len() {
        return Err(Error::DimensionMismatch {
            context: "grad_h (projections)",
            expected: set.len(),
            got: projections.len(),
        });
    }
    let mut residual = model.predict_all(&set.z)?;
    for (i, p) in projections.iter().enumerate() {
        let row = residual.row_mut(i);
        let mismatch = (dist_sq(row, &p.point) - p.distance_sq).abs();
        if mismatch > 1e-6 * p.distance_sq.max(1.0) {
            return Err(Error::StaleProjection { index: i, mismatch });
        }
        for (r, q) in row.iter_mut().zip(&p.point) {
            *r -= q;
        }
    }
    Ok(residual)
}

fn gd_direction(model: &LinearModel, set: &PreparedSet, eval: &LossEval) -> Result<(Mat, Mat)> {
    let grad = grad_h(model, set, &eval.projections)?;
    let dir = grad.scaled(-1.0);
    Ok((grad, dir))
}

fn precond_direction(model: &LinearModel, set: &PreparedSet, eval: &LossEval) -> Result<(Mat, Mat)> {
    let residual = fresh_residual(model, set, &eval.projections)?;
    let grad = set.z.transpose().matmul(&residual)?.scaled(1.0 / set.len() as f64);
    let dir = set.ls.solve_columns(&residual)?.scaled(-1.0);
    Ok((grad, dir))
}

fn moved(model: &LinearModel, dir: &Mat, t: f64) -> Result<LinearModel> {
    LinearModel::new(model.theta.add(&dir.scaled(t))?)
}

/// One full-batch gradient step `theta - eta grad h(theta)`.
pub fn step_gd(model: &LinearModel, set: &PreparedSet, eta: f64) -> Result<LinearModel> {
    let eval = loss_h(model, set)?;
    let (_, dir) = gd_direction(model, set, &eval)?;
    moved(model, &dir, eta)
}

/// One preconditioned step `theta - eta (Z'Z)^+ Z'(Z theta - Q)`.
pub fn step_precond_gd(model: &LinearModel, set: &PreparedSet, eta: f64) -> Result<LinearModel> {
    let eval = loss_h(model, set)?;
    let (_, dir) = precond_direction(model, set, &eval)?;
    moved(model, &dir, eta)
}

/// Per-sample gradient `z_i'(z_i theta - q_i)` and the sample's squared distance.
fn sample_grad(model: &LinearModel, set: &PreparedSet, i: usize) -> Result<(Mat, f64)> {
    let z = set.z.row(i);
    let pred = model.predict(z)?;
    let proj = set.projectors[i].project(&pred).map_err(|e| e.at_sample(i))?;
    let r: Vec<f64> = pred.iter().zip(&proj.point).map(|(a, b)| a - b).collect();
    let grad = Mat::from_fn(z.len(), r.len(), |a, b| z[a] * r[b]);
    Ok((grad, proj.distance_sq))
}

/// One stochastic step on sample `i`.
pub fn step_sgd(model: &LinearModel, set: &PreparedSet, i: usize, eta: f64) -> Result<LinearModel> {
    set.check_model(model)?;
    if i >= set.len() {
        return Err(Error::InvalidInput(format!("sample index {i} out of range")));
    }
    let (grad, _) = sample_grad(model, set, i)?;
    moved(model, &grad, -eta)
}

/// `theta_{t+1} = argmin_theta 1/(2N) sum ||q_i - z_i theta||^2` from the
/// projections already computed at `theta_t`.
fn pocs_update(set: &PreparedSet, eval: &LossEval) -> Result<LinearModel> {
    set.fit(&eval.targets())
}

#[derive(Clone, Debug)]
pub struct PocsRun {
    pub model: LinearModel,
    /// `h` at every iterate, starting with `model0`.
    pub h: Vec<f64>,
}

/// Alternating projections: project each prediction onto its set, then
/// regress the projections back onto the model set.
pub fn run_pocs(set: &PreparedSet, model0: &LinearModel, iters: usize) -> Result<PocsRun> {
    let mut model = model0.clone();
    let mut eval = loss_h(&model, set)?;
    let mut h = vec![eval.value];
    for _ in 0..iters {
        model = pocs_update(set, &eval)?;
        eval = loss_h(&model, set)?;
        h.push(eval.value);
    }
    Ok(PocsRun { model, h })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pocs,
    Gd,
    Sgd,
    PrecondGd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Armijo {
    pub c1: f64,
    pub backtrack: f64,
    pub init: f64,
}

impl Default for Armijo {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            backtrack: 0.5,
            init: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StepRule {
    Constant {
        eta: f64,
    },
    Armijo(Armijo),
    /// `eta_t = 1 / (mu (t + 1))`, `t` counting updates from zero.
    InverseT {
        mu: f64,
    },
}

impl StepRule {
    fn eta(&self, t: usize) -> f64 {
        match *self {
            StepRule::Constant { eta } => eta,
            StepRule::Armijo(a) => a.init,
            StepRule::InverseT { mu } => 1.0 / (mu * (t as f64 + 1.0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub step: StepRule,
    pub epochs: usize,
    pub margin: f64,
    pub seed: u64,
    /// SGD samples a fresh permutation each epoch instead of drawing with replacement.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Pocs,
            step: StepRule::Constant { eta: 1.0 },
            epochs: 50,
            margin: 1.0,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be >= 0, got {}", self.margin));
        }
        match self.step {
            StepRule::Constant { eta } if !(eta > 0.0 && eta.is_finite()) => {
                bad(format!("step size must be positive, got {eta}"))
            }
            StepRule::InverseT { mu } if !(mu > 0.0 && mu.is_finite()) => bad(format!("mu must be positive, got {mu}")),
            StepRule::Armijo(a)
                if !(a.c1 > 0.0 && a.c1 < 1.0 && a.backtrack > 0.0 && a.backtrack < 1.0 && a.init > 0.0) =>
            {
                bad("Armijo parameters need 0 < c1 < 1, 0 < backtrack < 1, init > 0".into())
            }
            _ => Ok(()),
        }
    }
}

/// One metrics row: an evaluated split after an epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    #[serde(flatten)]
    pub record: MetricsRecord,
    /// Training wall time accumulated up to the end of the epoch.
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Metrics of the starting model, one per split.
    pub initial: Vec<MetricsRecord>,
    /// One row per epoch and split.
    pub rows: Vec<LogRow>,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: LinearModel,
    pub log: TrainLog,
}

const MAX_BACKTRACKS: usize = 60;

/// Armijo backtracking along `dir`; returns the accepted model and its loss,
/// or the unchanged point when no step is accepted.
fn armijo_search(
    a: &Armijo,
    model: &LinearModel,
    set: &PreparedSet,
    eval: LossEval,
    grad: &Mat,
    dir: &Mat,
) -> Result<(LinearModel, LossEval)> {
    let slope = dot(grad.as_slice(), dir.as_slice());
    if slope >= 0.0 {
        return Ok((model.clone(), eval));
    }
    let mut t = a.init;
    for _ in 0..MAX_BACKTRACKS {
        let trial = moved(model, dir, t)?;
        let trial_eval = loss_h(&trial, set)?;
        if trial_eval.value <= eval.value + a.c1 * t * slope {
            return Ok((trial, trial_eval));
        }
        t *= a.backtrack;
    }
    Ok((model.clone(), eval))
}

/// Trains from `theta = 0` on `train`, evaluating every set in `evals` after each epoch.
pub fn run_trainer(train: &PreparedSet, evals: &[(Split, &PreparedSet)], cfg: &TrainConfig) -> Result<TrainOutput> {
    run_trainer_from(train, evals, cfg, &LinearModel::zeros(train.features(), train.dim()))
}

pub fn run_trainer_from(
    train: &PreparedSet,
    evals: &[(Split, &PreparedSet)],
    cfg: &TrainConfig,
    model0: &LinearModel,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if (train.margin() - cfg.margin).abs() > 0.0 {
        return Err(Error::InvalidInput(format!(
            "training set was prepared with margin {} but the config asks for {}",
            train.margin(),
            cfg.margin
        )));
    }
    train.check_model(model0)?;
    let mut log = TrainLog::default();
    for (split, set) in evals {
        log.initial.push(evaluate(set, model0, *split)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = model0.clone();
    let mut eval: Option<LossEval> = None;
    let mut step_count = 0usize;
    let mut wall_ms = 0.0;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        match cfg.method {
            Method::Pocs => {
                let current = take_or_eval(&mut eval, &model, train)?;
                model = pocs_update(train, &current)?;
            }
            Method::Gd | Method::PrecondGd => {
                let current = take_or_eval(&mut eval, &model, train)?;
                let (grad, dir) = if cfg.method == Method::Gd {
                    gd_direction(&model, train, &current)?
                } else {
                    precond_direction(&model, train, &current)?
                };
                match &cfg.step {
                    StepRule::Armijo(a) => {
                        let (next, next_eval) = armijo_search(a, &model, train, current, &grad, &dir)?;
                        model = next;
                        eval = Some(next_eval);
                    }
                    rule => model = moved(&model, &dir, rule.eta(step_count))?,
                }
                step_count += 1;
            }
            Method::Sgd => {
                let n = train.len();
                let order: Vec<usize> = if cfg.shuffle {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut rng);
                    idx
                } else {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                };
                for i in order {
                    let (grad, dist) = sample_grad(&model, train, i)?;
                    model = match &cfg.step {
                        StepRule::Armijo(a) => sgd_armijo(a, &model, train, i, &grad, dist)?,
                        rule => moved(&model, &grad, -rule.eta(step_count))?,
                    };
                    step_count += 1;
                }
            }
        }
        wall_ms += started.elapsed().as_secs_f64() * 1e3;
        for (split, set) in evals {
            log.rows.push(LogRow {
                epoch,
                record: evaluate(set, &model, *split)?,
                wall_ms,
            });
        }
    }
    Ok(TrainOutput { model, log })
}

fn take_or_eval(cache: &mut Option<LossEval>, model: &LinearModel, set: &PreparedSet) -> Result<LossEval> {
    match cache.take() {
        Some(e) => Ok(e),
        None => loss_h(model, set),
    }
}

/// Armijo on the single-sample loss `1/2 dist(z_i theta, C_i)^2`.
fn sgd_armijo(
    a: &Armijo,
    model: &LinearModel,
    set: &PreparedSet,
    i: usize,
    grad: &Mat,
    dist: f64,
) -> Result<LinearModel> {
    let f0 = 0.5 * dist;
    let slope = -dot(grad.as_slice(), grad.as_slice());
    if slope >= 0.0 {
        return Ok(model.clone());
    }
    let mut t = a.init;
    for _ in 0..MAX_BACKTRACKS {
        let trial = moved(model, grad, -t)?;
        let pred = trial.predict(set.z.row(i))?;
        let f = 0.5
            * set.projectors[i]
                .project(&pred)
                .map_err(|e| e.at_sample(i))?
                .distance_sq;
        if f <= f0 + a.c1 * t * slope {
            return Ok(trial);
        }
        t *= a.backtrack;
    }
    Ok(model.clone())
}
