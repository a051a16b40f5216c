//! Dense revised simplex with Bland's rule.
//!
//! Two phases: Phase 1 minimizes the sum of one artificial per row starting
//! from the all-artificial basis, then artificials are pivoted out where
//! possible. Rows whose artificial cannot leave are linearly dependent on the
//! others; the artificial stays basic at level zero for the rest of the solve
//! and never re-enters the pricing loop.

use crate::error::{Error, Result};
use crate::numerics::{dot, invert, norm_inf, Mat};
use crate::tol;

use super::LpInstance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    /// Primal solution (the last basic feasible solution when not optimal).
    pub x: Vec<f64>,
    /// Structural basic columns, sorted. Has `n` entries unless `A` has dependent rows.
    pub basis: Vec<usize>,
    /// Equality-row multipliers `nu` with `A^T nu + reduced_costs = c`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
}

impl SimplexResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Errors unless the status is `Optimal`.
    pub fn into_optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Unbounded => Err(Error::LpStatus("unbounded")),
            LpStatus::Infeasible => Err(Error::LpStatus("infeasible")),
        }
    }
}

/// Solves `min <c, x> s.t. A x = b, x >= 0` for the instance constraints.
///
/// `c` is in minimization form; see [`LpInstance::to_min_form`] for
/// instances whose natural sense is maximization.
pub fn solve_lp(inst: &LpInstance, c: &[f64]) -> Result<SimplexResult> {
    solve_standard(inst.a(), inst.b(), c)
}

/// Standard-form solve on raw data.
pub fn solve_standard(a: &Mat, b: &[f64], c: &[f64]) -> Result<SimplexResult> {
    let (n, m) = a.shape();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_lp (b)",
            expected: n,
            got: b.len(),
        });
    }
    if c.len() != m {
        return Err(Error::DimensionMismatch {
            context: "solve_lp (c)",
            expected: m,
            got: c.len(),
        });
    }
    if !c.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("cost vector has non-finite entries".into()));
    }

    let mut s = Simplex::new(a, b);

    // Phase 1
    let phase1_cost: Vec<f64> = (0..m + n).map(|j| if j < m { 0.0 } else { 1.0 }).collect();
    s.run(&phase1_cost)?;
    let infeasibility: f64 = s
        .basis
        .iter()
        .zip(&s.xb)
        .filter(|(&j, _)| j >= m)
        .map(|(_, &v)| v)
        .sum();
    if infeasibility > tol::LP_FEASIBILITY {
        let x = s.primal();
        let objective = dot(c, &x);
        return Ok(SimplexResult {
            x,
            basis: s.structural_basis(),
            duals: vec![0.0; n],
            reduced_costs: c.to_vec(),
            objective,
            status: LpStatus::Infeasible,
        });
    }
    s.drive_out_artificials();

    // Phase 2
    let mut phase2_cost = c.to_vec();
    phase2_cost.resize(m + n, 0.0);
    let outcome = s.run(&phase2_cost)?;

    let x = s.primal();
    let duals = s.duals(&phase2_cost);
    let reduced_costs = reduced_costs(a, &duals, c);
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
    };
    let objective = match status {
        LpStatus::Unbounded => f64::NEG_INFINITY,
        _ => dot(c, &x),
    };
    Ok(SimplexResult {
        x,
        basis: s.structural_basis(),
        duals,
        reduced_costs,
        objective,
        status,
    })
}

/// Duals and reduced costs `c - A^T nu` of a given square basis, with
/// `nu = A_B^{-T} c_B`. For an optimal basis these are the values reported by
/// [`solve_lp`]; for any basis the non-basic entries equal
/// `c_M - c_B A_B^{-1} A_M`.
pub fn basis_reduced_costs(a: &Mat, basis: &[usize], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.rows();
    if basis.len() != n {
        return Err(Error::DimensionMismatch {
            context: "basis_reduced_costs (basis size)",
            expected: n,
            got: basis.len(),
        });
    }
    if c.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            context: "basis_reduced_costs (c)",
            expected: a.cols(),
            got: c.len(),
        });
    }
    let ab = a.select_columns(basis);
    let inv = invert(&ab)?;
    let cb: Vec<f64> = basis.iter().map(|&j| c[j]).collect();
    let nu = inv.tr_matvec(&cb)?;
    let r = reduced_costs(a, &nu, c);
    Ok((nu, r))
}

fn reduced_costs(a: &Mat, nu: &[f64], c: &[f64]) -> Vec<f64> {
    let atnu = a.tr_matvec(nu).expect("dual length matches rows");
    c.iter().zip(&atnu).map(|(ci, ai)| ci - ai).collect()
}

enum Outcome {
    Optimal,
    Unbounded,
}

const REFACTOR_EVERY: usize = 50;

struct Simplex<'a> {
    a: &'a Mat,
    /// +1 / -1 per row so that the working right-hand side is non-negative.
    row_sign: Vec<f64>,
    b: Vec<f64>,
    n: usize,
    m: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Mat,
    xb: Vec<f64>,
    pivots: usize,
    pivot_limit: usize,
}

impl<'a> Simplex<'a> {
    fn new(a: &'a Mat, b: &[f64]) -> Self {
        let (n, m) = a.shape();
        let row_sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = b.iter().zip(&row_sign).map(|(v, s)| v * s).collect();
        let basis: Vec<usize> = (m..m + n).collect();
        let mut is_basic = vec![false; m + n];
        for &j in &basis {
            is_basic[j] = true;
        }
        Self {
            a,
            row_sign,
            xb: b.clone(),
            b,
            n,
            m,
            basis,
            is_basic,
            binv: Mat::identity(n),
            pivots: 0,
            pivot_limit: 10_000 + 200 * (n + m),
        }
    }

    /// Column `j` of the sign-adjusted constraint matrix `[A | I]`.
    fn column(&self, j: usize) -> Vec<f64> {
        if j < self.m {
            (0..self.n).map(|i| self.a[(i, j)] * self.row_sign[i]).collect()
        } else {
            let mut e = vec![0.0; self.n];
            e[j - self.m] = 1.0;
            e
        }
    }

    /// Simplex multipliers for the working (sign-adjusted) rows.
    fn working_duals(&self, cost: &[f64]) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.binv.tr_matvec(&cb).expect("basis size")
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        self.working_duals(cost)
            .iter()
            .zip(&self.row_sign)
            .map(|(y, s)| y * s)
            .collect()
    }

    fn run(&mut self, cost: &[f64]) -> Result<Outcome> {
        loop {
            let y = self.working_duals(cost);
            // Bland: lowest-index structural column with negative reduced cost
            let entering =
                (0..self.m).find(|&j| !self.is_basic[j] && cost[j] - dot(&y, &self.column(j)) < -tol::LP_OPTIMALITY);
            let Some(j) = entering else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.binv.matvec(&self.column(j))?;

            let mut leave: Option<(usize, f64)> = None;
            for (i, &ai) in alpha.iter().enumerate() {
                if ai <= tol::LP_PIVOT {
                    continue;
                }
                let ratio = (self.xb[i] / ai).max(0.0);
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * best.max(1.0);
                        if (tie && self.basis[i] < self.basis[r]) || (!tie && ratio < best) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(r, j, &alpha)?;
        }
    }

    fn pivot(&mut self, r: usize, j: usize, alpha: &[f64]) -> Result<()> {
        self.pivots += 1;
        if self.pivots > self.pivot_limit {
            return Err(Error::PivotLimit(self.pivot_limit));
        }
        let theta = (self.xb[r] / alpha[r]).max(0.0);
        for (i, &ai) in alpha.iter().enumerate() {
            if i != r {
                self.xb[i] -= theta * ai;
                if self.xb[i] < 0.0 && self.xb[i] > -tol::LP_FEASIBILITY {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = theta;

        let pr = alpha[r];
        for v in self.binv.row_mut(r) {
            *v /= pr;
        }
        let pivot_row = self.binv.row(r).to_vec();
        for (i, &ai) in alpha.iter().enumerate() {
            if i != r && ai != 0.0 {
                for (v, p) in self.binv.row_mut(i).iter_mut().zip(&pivot_row) {
                    *v -= ai * p;
                }
            }
        }

        self.is_basic[self.basis[r]] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;

        if self.pivots.is_multiple_of(REFACTOR_EVERY) {
            self.refactor()?;
        }
        Ok(())
    }

    fn refactor(&mut self) -> Result<()> {
        let mut bmat = Mat::zeros(self.n, self.n);
        for (k, &j) in self.basis.iter().enumerate() {
            bmat.set_column(k, &self.column(j));
        }
        self.binv = invert(&bmat)?;
        self.xb = self.binv.matvec(&self.b)?;
        for v in &mut self.xb {
            if *v < 0.0 && *v > -tol::LP_FEASIBILITY {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.n {
            if self.basis[r] < self.m {
                continue;
            }
            self.xb[r] = 0.0;
            let row = self.binv.row(r).to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.m {
                if self.is_basic[j] {
                    continue;
                }
                let v = dot(&row, &self.column(j)).abs();
                if v > tol::LP_PIVOT && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.binv.matvec(&self.column(j)).expect("basis size");
                // a failed pivot only leaves the artificial in place
                let _ = self.pivot(r, j, &alpha);
            }
        }
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.m];
        for (&j, &v) in self.basis.iter().zip(&self.xb) {
            if j < self.m {
                x[j] = v;
            }
        }
        x
    }

    fn structural_basis(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.basis.iter().copied().filter(|&j| j < self.m).collect();
        b.sort_unstable();
        b
    }
}

/// `max(||A x - b||_inf, max_j (-x_j)_+)`.
pub fn feasibility_residual(a: &Mat, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.matvec(x).expect("dimensions checked by caller");
    let eq = norm_inf(&ax.iter().zip(b).map(|(l, r)| l - r).collect::<Vec<_>>());
    let neg = x.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
    eq.max(neg)
}
