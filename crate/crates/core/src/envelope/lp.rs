//! Revised simplex for the lattice envelope LP
//!
//! ```text
//!   minimize  Σ_j α_j c_j
//!   s.t.      Σ_j α_j a_j = b,  α ≥ 0
//! ```
//!
//! where `a_j = (p_j1, …, p_j(m-1), 1)` is lattice point `j` in free
//! coordinates plus a row for `Σ α = 1`. An optimal basis is a lower facet
//! of the lifted point set; its basic columns are the support of the convex
//! envelope at `b`. There are only `m ≤ 4` rows, so the basis inverse is
//! recomputed from scratch on every pivot.

use nalgebra::{DMatrix, DVector};

const MAX_PIVOTS: usize = 10_000;
const BLAND_AFTER: usize = 200;
const MAX_DUAL_PIVOTS: usize = 64;
const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-13;

pub(crate) struct LatticeLp<'a> {
    rows: usize,
    columns: &'a [f64],
    costs: &'a [f64],
    cold: Vec<usize>,
    cost_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LpVertex {
    pub basis: Vec<usize>,
    /// Basic weights, clamped to be nonnegative and renormalized.
    pub weights: Vec<f64>,
    pub value: f64,
}

impl<'a> LatticeLp<'a> {
    /// `columns` holds `costs.len()` columns of `rows` entries; `cold` is a
    /// basis that is feasible for every right-hand side in the simplex.
    pub fn new(rows: usize, columns: &'a [f64], costs: &'a [f64], cold: Vec<usize>) -> Self {
        debug_assert_eq!(columns.len(), rows * costs.len());
        let scale = costs.iter().fold(1.0f64, |s, c| s.max(c.abs()));
        LatticeLp {
            rows,
            columns,
            costs,
            cold,
            cost_tol: 1e-12 * scale,
        }
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.rows..(j + 1) * self.rows]
    }

    fn inverse(&self, basis: &[usize]) -> Option<DMatrix<f64>> {
        let b = DMatrix::from_fn(self.rows, self.rows, |r, c| self.column(basis[c])[r]);
        b.try_inverse()
    }

    fn duals(&self, basis: &[usize], binv: &DMatrix<f64>) -> DVector<f64> {
        let cb = DVector::from_iterator(self.rows, basis.iter().map(|&j| self.costs[j]));
        binv.transpose() * cb
    }

    fn reduced_cost(&self, j: usize, y: &DVector<f64>) -> f64 {
        let col = self.column(j);
        self.costs[j] - col.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Solves for `rhs`, optionally warm-starting from a previous basis.
    pub fn solve(&self, rhs: &[f64], warm: Option<&[usize]>) -> LpVertex {
        let b = DVector::from_column_slice(rhs);
        if let Some(warm) = warm {
            if let Some(binv) = self.inverse(warm) {
                let xb = &binv * &b;
                if xb.iter().all(|&x| x >= -FEAS_TOL) {
                    if let Some(v) = self.primal(&b, warm.to_vec()) {
                        return v;
                    }
                } else if let Some(v) = self.dual(&b, warm.to_vec()) {
                    return v;
                }
            }
        }
        self.primal(&b, self.cold.clone())
            .expect("cold basis is primal feasible and the LP is bounded")
    }

    fn primal(&self, b: &DVector<f64>, mut basis: Vec<usize>) -> Option<LpVertex> {
        for iter in 0..MAX_PIVOTS {
            let binv = self.inverse(&basis)?;
            let xb = &binv * b;
            let y = self.duals(&basis, &binv);
            let bland = iter >= BLAND_AFTER;
            let mut entering = None;
            let mut best = -self.cost_tol;
            for j in 0..self.costs.len() {
                let d = self.reduced_cost(j, &y);
                if d < best {
                    if basis.contains(&j) {
                        continue;
                    }
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(e) = entering else {
                return Some(self.finish(basis, xb));
            };
            let u = &binv * DVector::from_column_slice(self.column(e));
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                if u[i] > PIVOT_TOL {
                    let t = xb[i].max(0.0) / u[i];
                    let better = match leave {
                        None => true,
                        Some((li, lt)) => t < lt || (t == lt && basis[i] < basis[li]),
                    };
                    if better {
                        leave = Some((i, t));
                    }
                }
            }
            let (r, _) = leave?;
            basis[r] = e;
        }
        None
    }

    /// Dual simplex from a dual-feasible basis.
    fn dual(&self, b: &DVector<f64>, mut basis: Vec<usize>) -> Option<LpVertex> {
        for _ in 0..MAX_DUAL_PIVOTS {
            let binv = self.inverse(&basis)?;
            let xb = &binv * b;
            let (r, xr) = xb
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, x)| (i, *x))?;
            let y = self.duals(&basis, &binv);
            if xr >= -FEAS_TOL {
                // Verify dual feasibility before declaring optimality.
                let ok = (0..self.costs.len()).all(|j| self.reduced_cost(j, &y) >= -self.cost_tol);
                return ok.then(|| self.finish(basis, xb));
            }
            let rho = binv.row(r);
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.costs.len() {
                if basis.contains(&j) {
                    continue;
                }
                let col = self.column(j);
                let alpha: f64 = rho.iter().zip(col).map(|(a, b)| a * b).sum();
                if alpha < -PIVOT_TOL {
                    let d = self.reduced_cost(j, &y);
                    if d < -self.cost_tol {
                        return None;
                    }
                    let ratio = d.max(0.0) / -alpha;
                    if entering.is_none_or(|(_, best)| ratio < best) {
                        entering = Some((j, ratio));
                    }
                }
            }
            let (e, _) = entering?;
            basis[r] = e;
        }
        None
    }

    fn finish(&self, basis: Vec<usize>, xb: DVector<f64>) -> LpVertex {
        let mut weights: Vec<f64> = xb.iter().map(|&x| x.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let value = basis
            .iter()
            .zip(&weights)
            .map(|(&j, w)| w * self.costs[j])
            .sum();
        LpVertex {
            basis,
            weights,
            value,
        }
    }
}
