use super::mat::{dot, norm, Mat};
use crate::error::{Error, Result};
use crate::tol;

const MAX_JACOBI_SWEEPS: usize = 100;

/// Householder QR with column pivoting, `M P = Q R`.
#[derive(Clone, Debug)]
struct PivotedQr {
    rows: usize,
    cols: usize,
    /// R in the upper triangle.
    r: Mat,
    /// Householder vectors (full length `rows - k`) and their scale factors.
    reflectors: Vec<(Vec<f64>, f64)>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    fn new(m: &Mat) -> Self {
        let (rows, cols) = m.shape();
        let mut a = m.clone();
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut reflectors = Vec::with_capacity(rows.min(cols));
        let steps = rows.min(cols);

        for k in 0..steps {
            // pivot on the largest remaining column norm
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..cols {
                let s: f64 = (k..rows).map(|i| a[(i, j)] * a[(i, j)]).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                for i in 0..rows {
                    let tmp = a[(i, k)];
                    a[(i, k)] = a[(i, best)];
                    a[(i, best)] = tmp;
                }
                perm.swap(k, best);
            }

            let mut v: Vec<f64> = (k..rows).map(|i| a[(i, k)]).collect();
            let xnorm = norm(&v);
            if xnorm == 0.0 {
                reflectors.push((v, 0.0));
                continue;
            }
            let alpha = if v[0] >= 0.0 { -xnorm } else { xnorm };
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            a[(k, k)] = alpha;
            for i in k + 1..rows {
                a[(i, k)] = 0.0;
            }
            for j in k + 1..cols {
                let s: f64 = (k..rows).map(|i| v[i - k] * a[(i, j)]).sum::<f64>() * beta;
                if s != 0.0 {
                    for i in k..rows {
                        a[(i, j)] -= s * v[i - k];
                    }
                }
            }
            reflectors.push((v, beta));
        }

        let r00 = if steps > 0 { a[(0, 0)].abs() } else { 0.0 };
        let cutoff = tol::RANK_RELATIVE * (rows.max(cols) as f64) * r00;
        let rank = (0..steps)
            .take_while(|&k| a[(k, k)].abs() > cutoff && a[(k, k)] != 0.0)
            .count();

        Self {
            rows,
            cols,
            r: a,
            reflectors,
            perm,
            rank,
        }
    }

    /// Least-squares solve; requires full column rank.
    fn solve(&self, y: &[f64]) -> Vec<f64> {
        let mut qty = y.to_vec();
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            if *beta == 0.0 {
                continue;
            }
            let s = dot(v, &qty[k..]) * beta;
            for (qi, vi) in qty[k..].iter_mut().zip(v) {
                *qi -= s * vi;
            }
        }
        let n = self.cols;
        let mut w = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = qty[k];
            for j in k + 1..n {
                s -= self.r[(k, j)] * w[j];
            }
            w[k] = s / self.r[(k, k)];
        }
        let mut out = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = w[k];
        }
        debug_assert_eq!(self.rows, y.len());
        out
    }
}

/// Prepared least-squares solver for a fixed design matrix.
///
/// Uses pivoted QR when the matrix has full column rank and the
/// Moore-Penrose pseudo-inverse otherwise, so the returned solution is always
/// the minimum-norm minimizer of `||M w - y||`.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    rows: usize,
    kind: LsKind,
}

#[derive(Clone, Debug)]
enum LsKind {
    Qr(PivotedQr),
    Pinv(Mat),
}

impl LeastSquares {
    pub fn new(m: &Mat) -> Self {
        let qr = PivotedQr::new(m);
        let kind = if qr.rank == m.cols() {
            LsKind::Qr(qr)
        } else {
            LsKind::Pinv(pseudo_inverse(m))
        };
        Self { rows: m.rows(), kind }
    }

    pub fn is_rank_deficient(&self) -> bool {
        matches!(self.kind, LsKind::Pinv(_))
    }

    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "least_squares",
                expected: self.rows,
                got: y.len(),
            });
        }
        Ok(match &self.kind {
            LsKind::Qr(qr) => qr.solve(y),
            LsKind::Pinv(p) => p.matvec(y)?,
        })
    }

    /// Column-by-column solve for a matrix right-hand side.
    pub fn solve_columns(&self, y: &Mat) -> Result<Mat> {
        if y.rows() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "least_squares",
                expected: self.rows,
                got: y.rows(),
            });
        }
        let mut out: Option<Mat> = None;
        for j in 0..y.cols() {
            let col = self.solve(&y.column(j))?;
            let o = out.get_or_insert_with(|| Mat::zeros(col.len(), y.cols()));
            o.set_column(j, &col);
        }
        Ok(out.unwrap_or_else(|| Mat::zeros(self.solution_len(), 0)))
    }

    fn solution_len(&self) -> usize {
        match &self.kind {
            LsKind::Qr(qr) => qr.cols,
            LsKind::Pinv(p) => p.rows(),
        }
    }
}

/// `argmin_w ||M w - y||_2`, minimum-norm when `M` is rank deficient.
pub fn least_squares(m: &Mat, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != m.rows() {
        return Err(Error::DimensionMismatch {
            context: "least_squares",
            expected: m.rows(),
            got: y.len(),
        });
    }
    LeastSquares::new(m).solve(y)
}

/// Thin SVD `M = U diag(s) V^T` for `rows >= cols`, by one-sided Jacobi rotations.
fn jacobi_svd_tall(m: &Mat) -> (Mat, Vec<f64>, Mat) {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols);
    // work on columns: store transposed so columns are contiguous
    let mut u = m.transpose();
    let mut v = Mat::identity(cols);

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(u.row(p), u.row(p));
                let beta = dot(u.row(q), u.row(q));
                let gamma = dot(u.row(p), u.row(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut u, p, q, c, s);
                rotate_rows(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma = Vec::with_capacity(cols);
    for j in 0..cols {
        let s = norm(u.row(j));
        sigma.push(s);
        if s > 0.0 {
            for x in u.row_mut(j) {
                *x /= s;
            }
        }
    }
    // u holds U^T, v holds V^T
    (u.transpose(), sigma, v.transpose())
}

fn rotate_rows(m: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.cols() {
        let a = m[(p, k)];
        let b = m[(q, k)];
        m[(p, k)] = c * a - s * b;
        m[(q, k)] = s * a + c * b;
    }
}

/// Moore-Penrose pseudo-inverse via Jacobi SVD.
pub fn pseudo_inverse(m: &Mat) -> Mat {
    let (rows, cols) = m.shape();
    if rows < cols {
        return pseudo_inverse(&m.transpose()).transpose();
    }
    if cols == 0 {
        return Mat::zeros(0, rows);
    }
    let (u, s, v) = jacobi_svd_tall(m);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cutoff = tol::RANK_RELATIVE * (rows.max(cols) as f64) * smax;
    // V diag(1/s) U^T
    Mat::from_fn(cols, rows, |i, j| {
        (0..cols)
            .filter(|&k| s[k] > cutoff)
            .map(|k| v[(i, k)] * u[(j, k)] / s[k])
            .sum()
    })
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(s: &Mat) -> Result<Vec<f64>> {
    if !s.is_square() {
        return Err(Error::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let scale = s.max_abs().max(1.0);
    let asym = s.asymmetry();
    if asym > tol::SYMMETRY * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let n = s.rows();
    let mut a = s.symmetrized();

    for _ in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= f64::EPSILON * a.frobenius_norm() || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    Ok(eig)
}

/// `lambda_min(S)` for symmetric `S`.
pub fn smallest_eigenvalue(s: &Mat) -> Result<f64> {
    let eig = symmetric_eigenvalues(s)?;
    eig.first().copied().ok_or(Error::InvalidInput("empty matrix".into()))
}

/// Dense Cholesky factor `S = L L^T`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    pub fn new(s: &Mat) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::NotSquare {
                rows: s.rows(),
                cols: s.cols(),
            });
        }
        let n = s.rows();
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = s[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Singular);
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut v = s[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let s = y[i] - dot(&row[..i], &y[..i]);
            y[i] = s / row[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

/// Dense `S = L D L^T` without pivoting, for symmetric quasi-definite
/// matrices (`[[A, B'], [B, -C]]` with `A`, `C` positive definite), where it
/// always exists.
#[derive(Clone, Debug)]
pub struct Ldlt {
    l: Mat,
    d: Vec<f64>,
}

impl Ldlt {
    pub fn new(s: &Mat) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::NotSquare {
                rows: s.rows(),
                cols: s.cols(),
            });
        }
        let n = s.rows();
        let mut l = Mat::identity(n);
        let mut d = vec![0.0; n];
        // w[k] = L[j,k] d[k] for the current row j
        let mut w = vec![0.0; n];
        for j in 0..n {
            for k in 0..j {
                w[k] = l[(j, k)] * d[k];
            }
            let dj = s[(j, j)] - dot(&l.row(j)[..j], &w[..j]);
            if dj == 0.0 || !dj.is_finite() {
                return Err(Error::Singular);
            }
            d[j] = dj;
            for i in j + 1..n {
                let v = s[(i, j)] - dot(&l.row(i)[..j], &w[..j]);
                l[(i, j)] = v / dj;
            }
        }
        Ok(Self { l, d })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut y = b.to_vec();
        for i in 0..n {
            y[i] -= dot(&self.l.row(i)[..i], &y[..i]);
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s;
        }
        y
    }
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(m: &Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = Mat::identity(n);
    let scale = m.max_abs();
    for k in 0..n {
        let (p, pv) = (k..n)
            .map(|i| (i, a[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pv <= 1e-14 * scale || pv == 0.0 {
            return Err(Error::Singular);
        }
        if p != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = t;
                let t = inv[(k, j)];
                inv[(k, j)] = inv[(p, j)];
                inv[(p, j)] = t;
            }
        }
        let d = a[(k, k)];
        for j in 0..n {
            a[(k, j)] /= d;
            inv[(k, j)] /= d;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[(i, k)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[(i, j)] -= f * a[(k, j)];
                inv[(i, j)] -= f * inv[(k, j)];
            }
        }
    }
    Ok(inv)
}

/// Numerical rank via pivoted QR.
pub fn rank(m: &Mat) -> usize {
    PivotedQr::new(m).rank
}
