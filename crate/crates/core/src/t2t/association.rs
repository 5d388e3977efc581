use nalgebra::{Matrix2, Matrix3, Vector3};

use super::TrackState;
use crate::circstats::circ_distance;
use crate::error::{Error, Result};

/// χ² 99.9% quantile for 2 dof, shifted by the log-determinant term.
pub const DEFAULT_GATE: f64 = 13.8;

/// Log-likelihood distance `Δᵀ S⁻¹ Δ + ln det S` with `S = P_a + P_b`.
///
/// Position only by default; with `use_heading` the circular heading
/// difference enters as an extra diagonal block with variance
/// `σ²_a + σ²_b`. The `ln det S` term bounds what a covariance can buy:
/// shrinking `S` no longer only inflates the Mahalanobis term, and a vague
/// track no longer wins just by being vague.
pub fn association_distance(a: &TrackState, b: &TrackState, use_heading: bool) -> Result<f64> {
    let s2: Matrix2<f64> = a.cov.fixed_view::<2, 2>(0, 0) + b.cov.fixed_view::<2, 2>(0, 0);
    let dp = a.pos - b.pos;
    if !use_heading {
        let chol = s2
            .cholesky()
            .ok_or(Error::DegenerateCovariance("singular innovation covariance"))?;
        let m = dp.dot(&chol.solve(&dp));
        return Ok(m + chol.determinant().ln());
    }
    let hv = a.heading_dispersion.as_variance()? + b.heading_dispersion.as_variance()?;
    let mut s3 = Matrix3::zeros();
    s3.fixed_view_mut::<2, 2>(0, 0).copy_from(&s2);
    s3[(2, 2)] = hv;
    let d = Vector3::new(dp.x, dp.y, circ_distance(a.heading, b.heading));
    let chol = s3
        .cholesky()
        .ok_or(Error::DegenerateCovariance("singular innovation covariance"))?;
    Ok(d.dot(&chol.solve(&d)) + chol.determinant().ln())
}

/// Result of a gated one-to-one assignment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(row, column)` pairs in ascending row order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    /// Sum of the matched costs, in row order.
    pub total_cost: f64,
}

/// Global nearest neighbour assignment.
///
/// Pairs with cost above `gate` (or NaN / +∞) are never matched. Among the
/// remaining partial matchings the one minimising `Σ (cost − gate)` is chosen,
/// i.e. every admissible match is preferred over leaving both tracks
/// unmatched. Solved exactly with the Hungarian method on the `(n+m)²`
/// matrix augmented with one dummy per row and column.
pub fn gnn_associate(costs: &[Vec<f64>], gate: f64) -> Assignment {
    let n = costs.len();
    let m = costs.first().map_or(0, Vec::len);
    let admissible = |c: f64| c <= gate;
    if n == 0 || m == 0 {
        return Assignment {
            unmatched_rows: (0..n).collect(),
            unmatched_cols: (0..m).collect(),
            ..Default::default()
        };
    }
    let size = n + m;
    let max_abs = costs
        .iter()
        .flatten()
        .filter(|c| admissible(**c))
        .fold(gate.abs(), |a, c| a.max(c.abs()));
    // Any assignment using a forbidden cell costs more than the all-dummy one.
    let forbidden = 1.0 + 2.0 * size as f64 * (max_abs + 1.0);
    let mut a = vec![vec![0.0; size]; size];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = match (i < n, j < m) {
                (true, true) => {
                    let c = costs[i][j];
                    if admissible(c) {
                        c
                    } else {
                        forbidden
                    }
                }
                (true, false) => {
                    if j - m == i {
                        gate
                    } else {
                        forbidden
                    }
                }
                (false, true) => {
                    if i - n == j {
                        0.0
                    } else {
                        forbidden
                    }
                }
                (false, false) => 0.0,
            };
        }
    }
    let col_of_row = hungarian(&a);

    let mut out = Assignment::default();
    let mut col_used = vec![false; m];
    for (i, &j) in col_of_row.iter().enumerate().take(n) {
        if j < m && admissible(costs[i][j]) {
            out.pairs.push((i, j));
            out.total_cost += costs[i][j];
            col_used[j] = true;
        } else {
            out.unmatched_rows.push(i);
        }
    }
    out.unmatched_cols = (0..m).filter(|&j| !col_used[j]).collect();
    out
}

/// Square min-cost perfect matching; returns the column of each row.
fn hungarian(a: &[Vec<f64>]) -> Vec<usize> {
    let n = a.len();
    // 1-based potentials with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        col_of_row[p[j] - 1] = j - 1;
    }
    col_of_row
}
