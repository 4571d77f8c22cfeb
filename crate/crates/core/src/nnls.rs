//! Lawson–Hanson nonnegative least squares for small dense systems.

use nalgebra::{DMatrix, DVector};

const MAX_OUTER: usize = 500;

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// `‖A x - b‖₂`
    pub residual: f64,
}

/// `argmin ‖A x - b‖₂` subject to `x ≥ 0`, where `a` is row-major with
/// `rows` rows.
pub fn nnls(a: &[f64], rows: usize, b: &[f64]) -> NnlsSolution {
    assert!(rows > 0 && a.len().is_multiple_of(rows), "matrix shape");
    assert_eq!(b.len(), rows, "right-hand side length");
    let cols = a.len() / rows;
    let a = DMatrix::from_row_slice(rows, cols, a);
    let b = DVector::from_column_slice(b);
    let tol = 1e-12 * a.iter().fold(1.0f64, |s, v| s.max(v.abs())) * (rows.max(cols) as f64);

    let mut x = DVector::zeros(cols);
    let mut passive = vec![false; cols];

    for _ in 0..MAX_OUTER {
        let w = a.transpose() * (&b - &a * &x);
        let candidate = (0..cols)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = candidate else { break };
        passive[t] = true;

        loop {
            let idx: Vec<usize> = (0..cols).filter(|&j| passive[j]).collect();
            let z = solve_subset(&a, &b, &idx);
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            // Step toward z until the first passive variable hits zero.
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = x[j] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
            }
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }

    let residual = (&a * &x - &b).norm();
    NnlsSolution {
        x: x.iter().copied().collect(),
        residual,
    }
}

fn solve_subset(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> Vec<f64> {
    let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
    let svd = sub.svd(true, true);
    match svd.solve(b, 1e-14) {
        Ok(z) => z.iter().copied().collect(),
        Err(_) => vec![0.0; idx.len()],
    }
}

/// Convex weights reproducing `target` from `points` (each of length `m`).
/// Returns `None` when `target` is outside their hull by more than `tol`.
pub fn convex_weights(points: &[&[f64]], target: &[f64], tol: f64) -> Option<Vec<f64>> {
    let m = target.len();
    let k = points.len();
    if k == 0 || points.iter().any(|p| p.len() != m) {
        return None;
    }
    // Rows: coordinates, then Σ w = 1 with extra weight.
    let rows = m + 1;
    let mut a = vec![0.0; rows * k];
    for (j, p) in points.iter().enumerate() {
        for r in 0..m {
            a[r * k + j] = p[r];
        }
        a[m * k + j] = 1.0;
    }
    let mut b = target.to_vec();
    b.push(1.0);
    let sol = nnls(&a, rows, &b);
    if sol.residual > tol {
        return None;
    }
    let total: f64 = sol.x.iter().sum();
    Some(sol.x.iter().map(|w| w / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_optimum_is_returned_when_positive() {
        // Square system with solution (1, 2).
        let s = nnls(&[2.0, 1.0, 1.0, 3.0], 2, &[4.0, 7.0]);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn active_constraint() {
        // Unconstrained solution is (-1, 2); the NNLS answer clamps x0 = 0
        // and fits x1 alone: x1 = (a1·b)/(a1·a1) with a1 = (0, 1), b = (-1, 2).
        let s = nnls(&[1.0, 0.0, 0.0, 1.0], 2, &[-1.0, 2.0]);
        assert_eq!(s.x[0], 0.0);
        assert!((s.x[1] - 2.0).abs() < 1e-12);
        assert!((s.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convex_weights_inside_and_outside() {
        let pts: Vec<&[f64]> = vec![&[0.0, 1.0], &[1.0, 0.0]];
        let w = convex_weights(&pts, &[0.3, 0.7], 1e-9).unwrap();
        assert!((w[0] - 0.7).abs() < 1e-12 && (w[1] - 0.3).abs() < 1e-12);

        let pts: Vec<&[f64]> = vec![&[0.2, 0.8], &[0.4, 0.6]];
        assert!(convex_weights(&pts, &[0.1, 0.9], 1e-9).is_none());
    }

    #[test]
    fn ternary_barycentric() {
        let e: Vec<&[f64]> = vec![&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]];
        let w = convex_weights(&e, &[0.2, 0.3, 0.5], 1e-9).unwrap();
        for (a, b) in w.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
