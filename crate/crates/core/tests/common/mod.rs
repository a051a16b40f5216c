//! Random instance builders and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use cilp_core::{LinearModel, LpInstance, Mat, PreparedSet, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Point with positive entries summing to one.
pub fn interior_simplex_point(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Feasible LP whose first row is `sum x = 1`, so the polytope is bounded
/// and every feasible point lies in `[0, 1]^m`.
pub fn random_bounded_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LpInstance {
    let mut a = gaussian_mat(rng, n, m);
    for j in 0..m {
        a[(0, j)] = 1.0;
    }
    let x0 = interior_simplex_point(rng, m);
    let b = a.matvec(&x0).unwrap();
    LpInstance::new(a, b).unwrap()
}

/// Rows scaled so the largest norm is one.
pub fn normalized_features(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Mat {
    let z = gaussian_mat(rng, n, d);
    let scale = (0..n)
        .map(|i| z.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    z.scaled(1.0 / scale)
}

/// Random linear instance: bounded LP with `rows` constraints, costs
/// `z theta* + noise`, decisions solved from those costs.
pub fn random_linear_set(rng: &mut ChaCha8Rng, n: usize, d: usize, rows: usize, m: usize, chi: f64) -> PreparedSet {
    let inst = random_bounded_lp(rng, rows, m);
    let z = normalized_features(rng, n, d);
    let theta = gaussian_mat(rng, d, m);
    let mut costs = z.matmul(&theta).unwrap();
    for i in 0..n {
        for j in 0..m {
            let e: f64 = rng.sample(StandardNormal);
            costs[(i, j)] += 0.3 * e;
        }
    }
    let problem = Problem::Lp(inst);
    let x_stars: Vec<Vec<f64>> = (0..n).map(|i| problem.decide(costs.row(i)).unwrap()).collect();
    PreparedSet::from_parts(problem, z, x_stars, Some(costs.to_rows()), chi).unwrap()
}

pub fn random_model(rng: &mut ChaCha8Rng, d: usize, m: usize, scale: f64) -> LinearModel {
    LinearModel::new(gaussian_mat(rng, d, m).scaled(scale)).unwrap()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Solves the square system by Gaussian elimination with partial pivoting.
pub fn solve_square(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = a.row(i).to_vec();
            r.push(b[i]);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..=n {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Best objective over all basic feasible solutions of a full-row-rank
/// standard-form LP, by enumerating every basis.
pub fn brute_force_lp(a: &Mat, b: &[f64], c: &[f64]) -> Option<f64> {
    let (n, m) = a.shape();
    let mut best: Option<f64> = None;
    for basis in subsets(m, n) {
        let Some(xb) = solve_square(&a.select_columns(&basis), b) else {
            continue;
        };
        if xb.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let obj: f64 = basis.iter().zip(&xb).map(|(&j, v)| c[j] * v).sum();
        best = Some(best.map_or(obj, |cur: f64| cur.min(obj)));
    }
    best
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &v) in u.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k as f64 + 1.0);
        if v - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|v| (v - tau).max(0.0)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
