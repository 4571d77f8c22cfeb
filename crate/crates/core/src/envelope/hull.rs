//! Andrew's monotone chain, lower half only, on points with abscissa `i / N`.

/// Indices of the lower hull vertices of `(i / N, values[i])`, left to
/// right. Collinear points are dropped: a vertex is kept only on a strict
/// left turn (cross product above `tol`).
pub(crate) fn lower_hull(values: &[f64], tol: f64) -> Vec<usize> {
    let n = (values.len().max(2) - 1) as f64;
    let cross = |o: usize, a: usize, b: usize| {
        let (ox, ax, bx) = (o as f64 / n, a as f64 / n, b as f64 / n);
        (ax - ox) * (values[b] - values[o]) - (values[a] - values[o]) * (bx - ox)
    };
    let mut hull: Vec<usize> = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= tol {
            hull.pop();
        }
        hull.push(i);
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_sequence_keeps_every_point() {
        let v: Vec<f64> = (0..9).map(|i| ((i as f64) - 4.0).powi(2)).collect();
        assert_eq!(lower_hull(&v, 1e-12), (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn concave_sequence_keeps_endpoints() {
        let v: Vec<f64> = (0..9).map(|i| -((i as f64) - 4.0).powi(2)).collect();
        assert_eq!(lower_hull(&v, 1e-12), vec![0, 8]);
    }

    #[test]
    fn collinear_points_are_dropped() {
        let v: Vec<f64> = (0..5).map(|i| 2.0 * i as f64 + 1.0).collect();
        assert_eq!(lower_hull(&v, 1e-12), vec![0, 4]);
    }
}
