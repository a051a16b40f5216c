use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Mat};

use super::{LpInstance, LpKind};

/// Edges of a `k x k` grid between 4-neighbours, as `(from, to)` vertex
/// pairs with vertices numbered row-major. Per vertex, the edge to the right
/// comes first, then the edge downwards. For directed uses these are the
/// only orientations.
pub fn grid_edges(k: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(2 * k * k.saturating_sub(1));
    for r in 0..k {
        for c in 0..k {
            let v = r * k + c;
            if c + 1 < k {
                edges.push((v, v + 1));
            }
            if r + 1 < k {
                edges.push((v, v + k));
            }
        }
    }
    edges
}

/// Shortest path from the top-left to the bottom-right vertex of a `k x k`
/// grid whose edges point right or down (`2k(k-1)` edges).
///
/// Rows: flow conservation at every other vertex, one outgoing unit at the
/// source, one incoming unit at the target. The target row is implied by the
/// others and is removed.
pub fn build_grid_sp(k: usize) -> Result<LpInstance> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("grid size must be >= 2, got {k}")));
    }
    let edges = grid_edges(k);
    let nv = k * k;
    let (source, target) = (0, nv - 1);
    let mut a = Mat::zeros(nv, edges.len());
    let mut b = vec![0.0; nv];
    for (e, &(from, to)) in edges.iter().enumerate() {
        // out-flow counts +1 everywhere except at the target, whose row counts in-flow
        if from != target {
            a[(from, e)] += 1.0;
        }
        if to == target {
            a[(to, e)] += 1.0;
        } else if to != source {
            a[(to, e)] -= 1.0;
        }
    }
    b[source] = 1.0;
    b[target] = 1.0;
    let (a, b) = drop_redundant_rows(&a, &b);
    LpInstance::with_kind(a, b, LpKind::GridShortestPath { grid_size: k })
}

/// Fractional knapsack `max <r, x> s.t. <w, x> <= W, 0 <= x <= 1` in
/// standard form.
///
/// Variables: `[x_1..x_k, s_cap, s_1..s_k]` (so `m = 2k + 1`). Rows: the
/// capacity row `<w, x> + s_cap = W` followed by `x_i + s_i = 1` per item.
/// The instance is tagged as a maximization; use
/// [`LpInstance::to_min_form`] on returns before solving.
pub fn build_knapsack(weights: &[f64], capacity: f64) -> Result<LpInstance> {
    let k = weights.len();
    if k == 0 {
        return Err(Error::InvalidInput("knapsack needs at least one item".into()));
    }
    if !weights.iter().all(|w| w.is_finite() && *w > 0.0) {
        return Err(Error::InvalidInput("knapsack weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(capacity > 0.0 && capacity < total) {
        return Err(Error::InvalidInput(format!(
            "capacity must lie in (0, {total}), got {capacity}"
        )));
    }
    let m = 2 * k + 1;
    let mut a = Mat::zeros(k + 1, m);
    let mut b = vec![1.0; k + 1];
    for (i, &w) in weights.iter().enumerate() {
        a[(0, i)] = w;
        a[(i + 1, i)] = 1.0;
        a[(i + 1, k + 1 + i)] = 1.0;
    }
    a[(0, k)] = 1.0;
    b[0] = capacity;
    LpInstance::with_kind(
        a,
        b,
        LpKind::Knapsack {
            weights: weights.to_vec(),
            capacity,
        },
    )
}

/// Min-cost perfect matching on the `k x k` grid graph (undirected 4-neighbour
/// edges, ordered as in [`grid_edges`]), one row `sum_{j in N(i)} x_ij = 1` per
/// vertex.
///
/// The vertex-edge incidence matrix of a connected bipartite graph has rank
/// one less than the vertex count; all rows are kept and the simplex handles
/// the dependency.
pub fn build_perfect_matching(k: usize) -> Result<LpInstance> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "perfect matching on a k x k grid needs even k >= 2, got {k}"
        )));
    }
    let edges = grid_edges(k);
    let mut a = Mat::zeros(k * k, edges.len());
    for (e, &(u, v)) in edges.iter().enumerate() {
        a[(u, e)] = 1.0;
        a[(v, e)] = 1.0;
    }
    LpInstance::with_kind(a, vec![1.0; k * k], LpKind::PerfectMatching { grid_size: k })
}

/// Removes rows that are linear combinations of earlier rows (modified
/// Gram-Schmidt on the rows of `A`).
pub fn drop_redundant_rows(a: &Mat, b: &[f64]) -> (Mat, Vec<f64>) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for i in 0..a.rows() {
        let row = a.row(i);
        let scale = norm(row);
        if scale == 0.0 {
            continue;
        }
        let mut r = row.to_vec();
        for q in &basis {
            let p = dot(q, &r);
            for (x, y) in r.iter_mut().zip(q) {
                *x -= p * y;
            }
        }
        let rn = norm(&r);
        if rn > 1e-10 * scale {
            for x in &mut r {
                *x /= rn;
            }
            basis.push(r);
            keep.push(i);
        }
    }
    let b = keep.iter().map(|&i| b[i]).collect();
    (a.select_rows(&keep), b)
}
