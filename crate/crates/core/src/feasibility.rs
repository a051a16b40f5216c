//! KKT-derived feasible cost sets and Euclidean projections onto them.
//!
//! For an observed decision `x*`, the set of costs that make `x*` optimal is
//! described by stationarity rows that are affine in the cost,
//!
//! ```text
//! c = offset + U' nu + s * lambda,    lambda_B = 0,  lambda_M >= chi,
//! ```
//!
//! where `B = {j : x*_j > 0}`, `M = {j : x*_j = 0}` and `chi >= 0` is the
//! margin. For a standard-form LP `U = A`, `offset = 0`, `s = +1`; for the
//! portfolio QP `U = 1'`, `offset = gamma Q_sym x*` and `s = -1` (with the
//! multiplier signs flipped so that `nu` and `lambda` match the usual KKT
//! statement). Eliminating `c` turns the projection into a least-squares
//! problem over `(nu, lambda_M)` with lower bounds on `lambda_M`, solved by the
//! QP solver. Degenerate decisions need no basis choice: zero coordinates
//! simply land in `M`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::LpInstance;
use crate::model::LinearModel;
use crate::numerics::{dist_sq, norm_inf, LeastSquares, Mat};
use crate::qp::{QpConfig, QpSolver};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectorKind {
    Lp,
    PortfolioQp,
}

/// Feasible cost set of one observation, ready for repeated projections.
#[derive(Clone, Debug)]
pub struct KktProjector {
    kind: ProjectorKind,
    x_star: Vec<f64>,
    support: Vec<usize>,
    inactive: Vec<usize>,
    chi: f64,
    offset: Vec<f64>,
    /// `m x (n_nu + |M|)`: columns for `nu`, then for `lambda_M`.
    basis: Mat,
    n_nu: usize,
    solver: QpSolver,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub distance_sq: f64,
    /// Full-length multiplier vector; zero on the support of `x*`.
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Projector for a standard-form LP observation `x*` with margin `chi`.
pub fn make_projector(inst: &LpInstance, x_star: &[f64], chi: f64) -> Result<KktProjector> {
    if x_star.len() != inst.m() {
        return Err(Error::DimensionMismatch {
            context: "make_projector (x_star)",
            expected: inst.m(),
            got: x_star.len(),
        });
    }
    let residual = inst.feasibility_residual(x_star)?;
    if residual > tol::DECISION_FEASIBILITY {
        return Err(Error::InfeasibleDecision { residual });
    }
    let m = inst.m();
    let offset = vec![0.0; m];
    let nu_cols = inst.a().transpose();
    KktProjector::build(ProjectorKind::Lp, x_star, chi, offset, nu_cols, 1.0)
}

/// Projector for the portfolio QP `min -<c,x> + gamma/2 x'Qx` over the simplex,
/// with `Q` fixed and the set taken over `c` only.
pub fn make_portfolio_projector(q_risk: &Mat, gamma: f64, x_star: &[f64], chi: f64) -> Result<KktProjector> {
    let m = x_star.len();
    if q_risk.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            context: "make_portfolio_projector (Q)",
            expected: m,
            got: q_risk.rows(),
        });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let residual = simplex_residual(x_star);
    if residual > tol::DECISION_FEASIBILITY {
        return Err(Error::InfeasibleDecision { residual });
    }
    let offset = q_risk.symmetrized().scaled(gamma).matvec(x_star)?;
    let nu_cols = Mat::from_vec(m, 1, vec![-1.0; m])?;
    KktProjector::build(ProjectorKind::PortfolioQp, x_star, chi, offset, nu_cols, -1.0)
}

/// `max(|sum x - 1|, max_j (-x_j)_+)`.
pub fn simplex_residual(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().sum();
    let neg = x.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
    (sum - 1.0).abs().max(neg)
}

impl KktProjector {
    fn build(
        kind: ProjectorKind,
        x_star: &[f64],
        chi: f64,
        offset: Vec<f64>,
        nu_cols: Mat,
        lambda_sign: f64,
    ) -> Result<Self> {
        if !(chi >= 0.0 && chi.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "margin must be finite and >= 0, got {chi}"
            )));
        }
        let m = x_star.len();
        let (support, inactive): (Vec<usize>, Vec<usize>) = (0..m).partition(|&j| x_star[j] > tol::SUPPORT);
        let n_nu = nu_cols.cols();
        let v = n_nu + inactive.len();
        let mut basis = Mat::zeros(m, v);
        for i in 0..m {
            basis.row_mut(i)[..n_nu].copy_from_slice(nu_cols.row(i));
        }
        for (k, &j) in inactive.iter().enumerate() {
            basis[(j, n_nu + k)] = lambda_sign;
        }
        let mut g = Mat::zeros(inactive.len(), v);
        for k in 0..inactive.len() {
            g[(k, n_nu + k)] = 1.0;
        }
        let solver = QpSolver::new(
            basis.gram(),
            g,
            vec![chi; inactive.len()],
            vec![f64::INFINITY; inactive.len()],
            QpConfig::default(),
        )?;
        Ok(Self {
            kind,
            x_star: x_star.to_vec(),
            support,
            inactive,
            chi,
            offset,
            basis,
            n_nu,
            solver,
        })
    }

    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    /// Coordinates with `x*_j > 0`.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Coordinates with `x*_j = 0`, where the margin applies.
    pub fn inactive(&self) -> &[usize] {
        &self.inactive
    }

    pub fn margin(&self) -> f64 {
        self.chi
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    /// Euclidean projection of `q` onto the set.
    pub fn project(&self, q: &[f64]) -> Result<Projection> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "project_onto_C (q)",
                expected: self.dim(),
                got: q.len(),
            });
        }
        let shift: Vec<f64> = self.offset.iter().zip(q).map(|(o, qi)| o - qi).collect();
        let lin = self.basis.tr_matvec(&shift)?;
        let w = self.solver.solve(&lin)?.into_solved()?.x;

        let mut point = self.basis.matvec(&w)?;
        for (p, o) in point.iter_mut().zip(&self.offset) {
            *p += o;
        }
        let nu = w[..self.n_nu].to_vec();
        let mut lambda = vec![0.0; self.dim()];
        for (k, &j) in self.inactive.iter().enumerate() {
            lambda[j] = w[self.n_nu + k];
        }
        let distance_sq = dist_sq(&point, q);
        Ok(Projection {
            point,
            distance_sq,
            lambda,
            nu,
        })
    }

    /// Largest violation of the membership conditions by `(c, lambda, nu)`:
    /// stationarity, `lambda_B = 0` and `lambda_M >= chi`.
    pub fn membership_residual(&self, c: &[f64], lambda: &[f64], nu: &[f64]) -> Result<f64> {
        if c.len() != self.dim() || lambda.len() != self.dim() || nu.len() != self.n_nu {
            return Err(Error::DimensionMismatch {
                context: "membership_residual",
                expected: self.dim(),
                got: c.len(),
            });
        }
        let nu_part = self
            .basis
            .select_columns(&(0..self.n_nu).collect::<Vec<_>>())
            .matvec(nu)?;
        let sign = match self.kind {
            ProjectorKind::Lp => 1.0,
            ProjectorKind::PortfolioQp => -1.0,
        };
        let stationarity: Vec<f64> = (0..self.dim())
            .map(|j| self.offset[j] + nu_part[j] + sign * lambda[j] - c[j])
            .collect();
        let mut worst = norm_inf(&stationarity);
        for &j in &self.support {
            worst = worst.max(lambda[j].abs());
        }
        for &j in &self.inactive {
            worst = worst.max(self.chi - lambda[j]);
        }
        Ok(worst)
    }

    /// Squared distance from `q` to the set.
    pub fn distance_sq(&self, q: &[f64]) -> Result<f64> {
        Ok(self.project(q)?.distance_sq)
    }
}

/// Projections of every row of `costs` onto the matching projector, run in
/// parallel and returned in sample order.
pub fn project_all(projectors: &[KktProjector], costs: &Mat) -> Result<Vec<Projection>> {
    if projectors.len() != costs.rows() {
        return Err(Error::DimensionMismatch {
            context: "project_all",
            expected: projectors.len(),
            got: costs.rows(),
        });
    }
    projectors
        .par_iter()
        .enumerate()
        .map(|(i, p)| p.project(costs.row(i)).map_err(|e| e.at_sample(i)))
        .collect()
}

/// `argmin_theta 1/2 ||targets - Z theta||^2`, minimum-norm when `Z` is rank deficient.
pub fn project_onto_f(z: &Mat, targets: &Mat) -> Result<LinearModel> {
    if z.rows() != targets.rows() {
        return Err(Error::DimensionMismatch {
            context: "project_onto_F",
            expected: z.rows(),
            got: targets.rows(),
        });
    }
    LinearModel::new(LeastSquares::new(z).solve_columns(targets)?)
}
