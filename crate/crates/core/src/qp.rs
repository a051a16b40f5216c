//! Convex QP `min 1/2 x'Px + q'x s.t. l <= Gx <= u` by operator splitting
//! (ADMM with over-relaxation), followed by an exact active-set polish.
//!
//! The iteration matrix `P + sigma I + G' diag(rho) G` is factored once per
//! problem; [`QpSolver`] keeps the factor so that problems sharing `P`, `G`
//! and the bounds can be re-solved for many linear terms `q`.

use crate::error::{Error, Result};
use crate::numerics::{dot, norm_inf, Cholesky, Ldlt, Mat};
use crate::tol;

/// Rows with `l == u` get this multiple of `rho`.
const EQUALITY_RHO_SCALE: f64 = 1e3;
const CHECK_EVERY: usize = 10;
const POLISH_DELTA: f64 = 1e-7;
const POLISH_REFINE_STEPS: usize = 50;

#[derive(Clone, Debug)]
pub struct QpProblem {
    pub p: Mat,
    pub q: Vec<f64>,
    pub g: Mat,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct QpConfig {
    pub eps_abs: f64,
    pub rho: f64,
    pub sigma: f64,
    pub max_iters: usize,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    pub polish: bool,
}

impl Default for QpConfig {
    fn default() -> Self {
        Self {
            eps_abs: tol::QP_EPS_ABS,
            rho: 1.0,
            sigma: 1e-6,
            max_iters: 20_000,
            alpha: 1.6,
            polish: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct QpResult {
    pub x: Vec<f64>,
    /// Constraint multipliers, `P x + q + G' y = 0`; negative at active lower bounds.
    pub y: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: QpStatus,
    pub polished: bool,
}

impl QpResult {
    pub fn into_solved(self) -> Result<Self> {
        match self.status {
            QpStatus::Solved => Ok(self),
            QpStatus::MaxIters => Err(Error::SolverAccuracy {
                iterations: self.iterations,
                primal: self.primal_residual,
                dual: self.dual_residual,
            }),
        }
    }
}

/// Solver prepared for fixed `P`, `G`, `l`, `u`.
#[derive(Clone, Debug)]
pub struct QpSolver {
    p: Mat,
    g: Mat,
    l: Vec<f64>,
    u: Vec<f64>,
    rho: Vec<f64>,
    cfg: QpConfig,
    factor: Cholesky,
}

impl QpSolver {
    pub fn new(p: Mat, g: Mat, l: Vec<f64>, u: Vec<f64>, cfg: QpConfig) -> Result<Self> {
        let v = p.rows();
        if !p.is_square() {
            return Err(Error::NotSquare {
                rows: p.rows(),
                cols: p.cols(),
            });
        }
        if g.cols() != v && g.rows() > 0 {
            return Err(Error::DimensionMismatch {
                context: "QpProblem (G columns)",
                expected: v,
                got: g.cols(),
            });
        }
        for (what, vec) in [("QpProblem (l)", &l), ("QpProblem (u)", &u)] {
            if vec.len() != g.rows() {
                return Err(Error::DimensionMismatch {
                    context: what,
                    expected: g.rows(),
                    got: vec.len(),
                });
            }
        }
        let asym = p.asymmetry();
        if asym > tol::SYMMETRY * p.max_abs().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        if l.iter().zip(&u).any(|(lo, hi)| lo > hi || lo.is_nan() || hi.is_nan()) {
            return Err(Error::InvalidInput("QP bounds need l <= u".into()));
        }
        if !(cfg.alpha > 0.0 && cfg.alpha < 2.0 && cfg.rho > 0.0 && cfg.sigma > 0.0) {
            return Err(Error::InvalidInput(
                "QP config needs rho, sigma > 0 and alpha in (0, 2)".into(),
            ));
        }

        let rho: Vec<f64> = l
            .iter()
            .zip(&u)
            .map(|(lo, hi)| {
                if lo == hi {
                    cfg.rho * EQUALITY_RHO_SCALE
                } else {
                    cfg.rho
                }
            })
            .collect();

        let mut kkt = p.clone();
        for i in 0..v {
            kkt[(i, i)] += cfg.sigma;
        }
        for (r, &rr) in rho.iter().enumerate() {
            let row = g.row(r);
            for (i, &gi) in row.iter().enumerate() {
                if gi == 0.0 {
                    continue;
                }
                for (j, &gj) in row.iter().enumerate() {
                    kkt[(i, j)] += rr * gi * gj;
                }
            }
        }
        let factor = Cholesky::new(&kkt)?;
        let g = if g.rows() == 0 { Mat::zeros(0, v) } else { g };
        Ok(Self {
            p,
            g,
            l,
            u,
            rho,
            cfg,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    pub fn solve(&self, q: &[f64]) -> Result<QpResult> {
        let v = self.dim();
        if q.len() != v {
            return Err(Error::DimensionMismatch {
                context: "QpSolver::solve (q)",
                expected: v,
                got: q.len(),
            });
        }
        let r = self.g.rows();
        let alpha = self.cfg.alpha;
        let sigma = self.cfg.sigma;

        let mut x = vec![0.0; v];
        let mut z = vec![0.0; r];
        let mut y = vec![0.0; r];
        let mut last_attempt: Option<Vec<i8>> = None;
        let mut best: Option<QpResult> = None;

        for iter in 1..=self.cfg.max_iters {
            let w: Vec<f64> = (0..r).map(|i| self.rho[i] * z[i] - y[i]).collect();
            let gtw = self.g.tr_matvec(&w)?;
            let rhs: Vec<f64> = (0..v).map(|i| sigma * x[i] - q[i] + gtw[i]).collect();
            let x_tilde = self.factor.solve(&rhs);
            let z_tilde = self.g.matvec(&x_tilde)?;
            for i in 0..v {
                x[i] = alpha * x_tilde[i] + (1.0 - alpha) * x[i];
            }
            for i in 0..r {
                let z_relaxed = alpha * z_tilde[i] + (1.0 - alpha) * z[i];
                let z_new = (z_relaxed + y[i] / self.rho[i]).clamp(self.l[i], self.u[i]);
                y[i] += self.rho[i] * (z_relaxed - z_new);
                z[i] = z_new;
            }

            if iter % CHECK_EVERY != 0 && iter != self.cfg.max_iters {
                continue;
            }
            let (rp, rd) = self.admm_residuals(&x, &z, &y, q)?;
            let converged = rp <= self.cfg.eps_abs && rd <= self.cfg.eps_abs;

            if self.cfg.polish {
                let active = self.guess_active(&z, &y);
                if converged || last_attempt.as_ref() != Some(&active) {
                    if let Some(mut polished) = self.polish(q, &active)? {
                        polished.iterations = iter;
                        return Ok(polished);
                    }
                    last_attempt = Some(active);
                }
            }
            if converged {
                return Ok(QpResult {
                    x,
                    y,
                    primal_residual: rp,
                    dual_residual: rd,
                    iterations: iter,
                    status: QpStatus::Solved,
                    polished: false,
                });
            }
            if iter == self.cfg.max_iters {
                best = Some(QpResult {
                    x: x.clone(),
                    y: y.clone(),
                    primal_residual: rp,
                    dual_residual: rd,
                    iterations: iter,
                    status: QpStatus::MaxIters,
                    polished: false,
                });
            }
        }
        Ok(best.unwrap_or(QpResult {
            x,
            y,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iterations: self.cfg.max_iters,
            status: QpStatus::MaxIters,
            polished: false,
        }))
    }

    fn admm_residuals(&self, x: &[f64], z: &[f64], y: &[f64], q: &[f64]) -> Result<(f64, f64)> {
        let gx = self.g.matvec(x)?;
        let rp = gx.iter().zip(z).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        Ok((rp, self.stationarity(x, y, q)?))
    }

    fn stationarity(&self, x: &[f64], y: &[f64], q: &[f64]) -> Result<f64> {
        let px = self.p.matvec(x)?;
        let gty = self.g.tr_matvec(y)?;
        Ok(norm_inf(
            &px.iter()
                .zip(q)
                .zip(&gty)
                .map(|((a, b), c)| a + b + c)
                .collect::<Vec<_>>(),
        ))
    }

    /// -1 lower bound active, +1 upper bound active, 2 equality row, 0 inactive.
    fn guess_active(&self, z: &[f64], y: &[f64]) -> Vec<i8> {
        (0..self.g.rows())
            .map(|i| {
                if self.l[i] == self.u[i] {
                    2
                } else if z[i] - self.l[i] < -y[i] {
                    -1
                } else if self.u[i] - z[i] < y[i] {
                    1
                } else {
                    0
                }
            })
            .collect()
    }

    /// Solves the equality-constrained problem on the guessed active set and
    /// returns it if it satisfies every KKT condition of the original problem.
    fn polish(&self, q: &[f64], active: &[i8]) -> Result<Option<QpResult>> {
        let v = self.dim();
        let rows: Vec<usize> = (0..active.len()).filter(|&i| active[i] != 0).collect();
        let k = v + rows.len();
        let mut kkt = Mat::zeros(k, k);
        let mut rhs = vec![0.0; k];
        for i in 0..v {
            kkt.row_mut(i)[..v].copy_from_slice(self.p.row(i));
            rhs[i] = -q[i];
        }
        for (a, &ri) in rows.iter().enumerate() {
            let grow = self.g.row(ri);
            for j in 0..v {
                kkt[(v + a, j)] = grow[j];
                kkt[(j, v + a)] = grow[j];
            }
            rhs[v + a] = if active[ri] == 1 { self.u[ri] } else { self.l[ri] };
        }
        let Some(sol) = refined_kkt_solve(&kkt, v, &rhs)? else {
            return Ok(None);
        };
        let x = sol[..v].to_vec();
        let mut y = vec![0.0; self.g.rows()];
        for (a, &ri) in rows.iter().enumerate() {
            y[ri] = sol[v + a];
        }

        let eps = self.cfg.eps_abs;
        let gx = self.g.matvec(&x)?;
        let mut primal: f64 = 0.0;
        for i in 0..gx.len() {
            primal = primal.max(self.l[i] - gx[i]).max(gx[i] - self.u[i]);
        }
        let dual_sign_ok = rows.iter().all(|&ri| match active[ri] {
            -1 => y[ri] <= eps,
            1 => y[ri] >= -eps,
            _ => true,
        });
        let dual = self.stationarity(&x, &y, q)?;
        if primal <= eps && dual <= eps && dual_sign_ok && x.iter().all(|v| v.is_finite()) {
            Ok(Some(QpResult {
                x,
                y,
                primal_residual: primal.max(0.0),
                dual_residual: dual,
                iterations: 0,
                status: QpStatus::Solved,
                polished: true,
            }))
        } else {
            Ok(None)
        }
    }
}

/// Solves the (possibly singular) KKT system through the quasi-definite
/// regularization `[[P + dI, G'], [G, -dI]]` followed by iterative refinement
/// against the unregularized matrix. Returns `None` when refinement stalls,
/// which happens when the system is inconsistent.
fn refined_kkt_solve(kkt: &Mat, v: usize, rhs: &[f64]) -> Result<Option<Vec<f64>>> {
    let k = kkt.rows();
    let mut reg = kkt.clone();
    for i in 0..k {
        reg[(i, i)] += if i < v { POLISH_DELTA } else { -POLISH_DELTA };
    }
    let Ok(factor) = Ldlt::new(&reg) else {
        return Ok(None);
    };
    let scale = 1.0 + norm_inf(rhs);
    let mut sol = vec![0.0; k];
    for _ in 0..POLISH_REFINE_STEPS {
        let ks = kkt.matvec(&sol)?;
        let resid: Vec<f64> = rhs.iter().zip(&ks).map(|(b, a)| b - a).collect();
        if norm_inf(&resid) <= 1e-13 * scale {
            return Ok(Some(sol));
        }
        let step = factor.solve(&resid);
        for (s, d) in sol.iter_mut().zip(&step) {
            *s += d;
        }
    }
    Ok(sol.iter().all(|x| x.is_finite()).then_some(sol))
}

/// One-shot solve; factors the iteration matrix and runs ADMM.
pub fn solve_qp(problem: &QpProblem, cfg: &QpConfig) -> Result<QpResult> {
    QpSolver::new(
        problem.p.clone(),
        problem.g.clone(),
        problem.l.clone(),
        problem.u.clone(),
        *cfg,
    )?
    .solve(&problem.q)
}

/// `argmin_{x >= 0, sum x = 1} -<c, x> + (gamma/2) x'Qx`.
pub fn solve_portfolio(q_risk: &Mat, gamma: f64, c: &[f64]) -> Result<Vec<f64>> {
    PortfolioSolver::new(q_risk, gamma)?.solve(c)
}

/// Portfolio decision map with the risk matrix factored once.
#[derive(Clone, Debug)]
pub struct PortfolioSolver {
    solver: QpSolver,
}

impl PortfolioSolver {
    pub fn new(q_risk: &Mat, gamma: f64) -> Result<Self> {
        if !q_risk.is_square() {
            return Err(Error::NotSquare {
                rows: q_risk.rows(),
                cols: q_risk.cols(),
            });
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        let m = q_risk.rows();
        let p = q_risk.symmetrized().scaled(gamma);
        let mut g = Mat::zeros(m + 1, m);
        for j in 0..m {
            g[(0, j)] = 1.0;
            g[(j + 1, j)] = 1.0;
        }
        let mut l = vec![0.0; m + 1];
        let mut u = vec![f64::INFINITY; m + 1];
        l[0] = 1.0;
        u[0] = 1.0;
        Ok(Self {
            solver: QpSolver::new(p, g, l, u, QpConfig::default())?,
        })
    }

    pub fn solve(&self, c: &[f64]) -> Result<Vec<f64>> {
        let q: Vec<f64> = c.iter().map(|v| -v).collect();
        Ok(self.solver.solve(&q)?.into_solved()?.x)
    }

    /// `-<c, x> + (gamma/2) x'Qx`.
    pub fn objective(&self, c: &[f64], x: &[f64]) -> f64 {
        let px = self.solver.p.matvec(x).expect("dimension");
        0.5 * dot(x, &px) - dot(c, x)
    }
}
