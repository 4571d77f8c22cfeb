use std::collections::HashMap;

use crate::prob::Distribution;

use super::EnvelopeError;

/// Upper bound on the number of lattice points we are willing to build.
pub const MAX_LATTICE_POINTS: usize = 4_000_000;

/// Default resolution per alphabet size: 4096 for binary, 128 for ternary,
/// 32 for quaternary inputs.
pub fn default_resolution(m: usize) -> Option<u32> {
    match m {
        2 => Some(4096),
        3 => Some(128),
        4 => Some(32),
        _ => None,
    }
}

/// `C(n, k)` as f64; only used for sizing checks.
fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All compositions `(k_1, …, k_m) / N` with `Σ k_i = N`, in lexicographic
/// order of the counts. For `m = 2` the points are `[i/N, 1 - i/N]`.
#[derive(Debug, Clone)]
pub struct SimplexLattice {
    m: usize,
    resolution: u32,
    counts: Vec<u32>,
    probs: Vec<f64>,
    index: HashMap<Vec<u32>, usize>,
}

impl SimplexLattice {
    pub fn new(m: usize, resolution: u32) -> Result<Self, EnvelopeError> {
        if m < 2 {
            return Err(EnvelopeError::Dimension(m));
        }
        if resolution == 0 {
            return Err(EnvelopeError::Resolution(resolution));
        }
        let expected = binomial(resolution as u64 + m as u64 - 1, m as u64 - 1);
        if expected > MAX_LATTICE_POINTS as f64 {
            return Err(EnvelopeError::LatticeTooLarge {
                m,
                resolution,
                points: expected,
            });
        }
        let mut counts = Vec::with_capacity(expected as usize * m);
        let mut current = vec![0u32; m];
        enumerate(&mut current, 0, resolution, &mut counts);
        let n = resolution as f64;
        let probs = counts.iter().map(|&k| k as f64 / n).collect();
        let index = counts
            .chunks(m)
            .enumerate()
            .map(|(i, c)| (c.to_vec(), i))
            .collect();
        Ok(SimplexLattice {
            m,
            resolution,
            counts,
            probs,
            index,
        })
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.counts.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self, i: usize) -> &[u32] {
        &self.counts[i * self.m..(i + 1) * self.m]
    }

    pub fn probs(&self, i: usize) -> &[f64] {
        &self.probs[i * self.m..(i + 1) * self.m]
    }

    pub fn point(&self, i: usize) -> Distribution {
        Distribution::new(self.probs(i).to_vec()).expect("lattice points are stochastic")
    }

    pub fn index_of(&self, counts: &[u32]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    /// Index of the vertex `e_j`.
    pub fn vertex(&self, j: usize) -> usize {
        let mut c = vec![0; self.m];
        c[j] = self.resolution;
        self.index_of(&c).expect("vertices are lattice points")
    }

    /// Nearest lattice point by largest-remainder rounding of `N q`.
    pub fn snap(&self, q: &Distribution) -> Result<usize, EnvelopeError> {
        if q.len() != self.m {
            return Err(EnvelopeError::Mismatch(self.m, q.len()));
        }
        let n = self.resolution as f64;
        let scaled: Vec<f64> = q.probs().iter().map(|p| p * n).collect();
        let mut counts: Vec<u32> = scaled.iter().map(|s| s.floor() as u32).collect();
        let assigned: u32 = counts.iter().sum();
        let mut order: Vec<usize> = (0..self.m).collect();
        order.sort_by(|&a, &b| {
            let ra = scaled[a] - scaled[a].floor();
            let rb = scaled[b] - scaled[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &j in order
            .iter()
            .take(self.resolution.saturating_sub(assigned) as usize)
        {
            counts[j] += 1;
        }
        Ok(self.index_of(&counts).expect("snapped counts sum to N"))
    }
}

fn enumerate(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<u32>) {
    let m = current.len();
    if pos == m - 1 {
        current[pos] = remaining;
        out.extend_from_slice(current);
        return;
    }
    for k in 0..=remaining {
        current[pos] = k;
        enumerate(current, pos + 1, remaining - k, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_counts_match_binomial() {
        for (m, n) in [(2, 7), (3, 5), (4, 6), (3, 1)] {
            let lat = SimplexLattice::new(m, n).unwrap();
            assert_eq!(lat.len() as f64, binomial(n as u64 + m as u64 - 1, m as u64 - 1));
            for i in 0..lat.len() {
                let s: f64 = lat.probs(i).iter().sum();
                assert!((s - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn binary_lattice_is_ordered() {
        let lat = SimplexLattice::new(2, 4).unwrap();
        let firsts: Vec<f64> = (0..lat.len()).map(|i| lat.probs(i)[0]).collect();
        assert_eq!(firsts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(lat.probs(1), &[0.25, 0.75]);
    }

    #[test]
    fn snapping() {
        let lat = SimplexLattice::new(2, 4096).unwrap();
        let i = lat.snap(&Distribution::binary(0.1).unwrap()).unwrap();
        assert_eq!(lat.counts(i), &[3686, 410]);
        let lat = SimplexLattice::new(3, 10).unwrap();
        let i = lat.snap(&Distribution::new(vec![0.33, 0.33, 0.34]).unwrap()).unwrap();
        assert_eq!(lat.counts(i), &[3, 3, 4]);
        assert_eq!(lat.counts(lat.vertex(1)), &[0, 10, 0]);
    }

    #[test]
    fn rejects_oversized_lattices() {
        assert!(matches!(
            SimplexLattice::new(4, 5000),
            Err(EnvelopeError::LatticeTooLarge { .. })
        ));
        assert!(SimplexLattice::new(1, 5).is_err());
    }
}
