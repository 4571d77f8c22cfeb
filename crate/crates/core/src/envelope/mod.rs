//! Convex envelopes of `φ(p, λ) = g(Tp) - λ f(p)` over a discretized simplex.
//!
//! The lower convex envelope of `φ(·, λ)` at `q` is the conjugate value
//! `min { y - λx }` over the achievable set; where it separates from `φ`
//! the supporting lattice points are the atoms of an optimal `P_{X|W}`.
//! Binary inputs go through an exact monotone-chain hull; three- and
//! four-letter inputs solve a small LP per query point.

mod hull;
mod lattice;
mod lp;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{Channel, Distribution, ProbError, SimplexFunctional};

pub use lattice::{default_resolution, SimplexLattice, MAX_LATTICE_POINTS};

/// Gap below which `φ(q)` is considered to touch its envelope.
pub const EPS_ENV: f64 = 1e-7;

/// Cross-product tolerance for the monotone chain.
const HULL_TOL: f64 = 1e-12;

/// Largest alphabet the envelope code handles.
pub const MAX_ENVELOPE_DIMENSION: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvelopeError {
    #[error("alphabet size {0} is not supported here")]
    Dimension(usize),
    #[error("lattice resolution must be positive, got {0}")]
    Resolution(u32),
    #[error("lattice with m = {m}, N = {resolution} would have {points} points")]
    LatticeTooLarge {
        m: usize,
        resolution: u32,
        points: f64,
    },
    #[error("dimension mismatch: expected {0}, got {1}")]
    Mismatch(usize, usize),
    #[error("evaluating {side} at lattice point {point:?} failed: {source}")]
    Evaluation {
        side: &'static str,
        point: Vec<f64>,
        source: ProbError,
    },
    #[error("the simplex solver did not converge at lattice point {0}")]
    Solver(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Lower => "lower",
            Direction::Upper => "upper",
        }
    }

    /// `+1` for lower, `-1` for upper: multiply values by this to turn an
    /// upper problem into a lower one.
    fn sign(&self) -> f64 {
        match self {
            Direction::Lower => 1.0,
            Direction::Upper => -1.0,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `φ(·, λ)` tabulated on a lattice, along with its two ingredients.
#[derive(Debug, Clone)]
pub struct PhiGraph {
    lattice: Arc<SimplexLattice>,
    lambda: f64,
    values: Vec<f64>,
    x_values: Arc<[f64]>,
    y_values: Arc<[f64]>,
}

/// Tabulates `x_i = f(p_i)`, `y_i = g(T p_i)` and `φ = y - λ x`.
pub fn build_phi_graph(
    f: &SimplexFunctional,
    g: &SimplexFunctional,
    channel: &Channel,
    lambda: f64,
    lattice: Arc<SimplexLattice>,
) -> Result<PhiGraph, EnvelopeError> {
    if channel.inputs() != lattice.dimension() {
        return Err(EnvelopeError::Mismatch(lattice.dimension(), channel.inputs()));
    }
    let mut xs = Vec::with_capacity(lattice.len());
    let mut ys = Vec::with_capacity(lattice.len());
    for i in 0..lattice.len() {
        let p = lattice.probs(i);
        let x = f.eval(p).map_err(|source| EnvelopeError::Evaluation {
            side: "f",
            point: p.to_vec(),
            source,
        })?;
        let y = g
            .eval(&channel.apply(p))
            .map_err(|source| EnvelopeError::Evaluation {
                side: "g",
                point: p.to_vec(),
                source,
            })?;
        xs.push(x);
        ys.push(y);
    }
    PhiGraph::from_parts(lattice, lambda, xs, ys)
}

impl PhiGraph {
    pub fn from_parts(
        lattice: Arc<SimplexLattice>,
        lambda: f64,
        x_values: Vec<f64>,
        y_values: Vec<f64>,
    ) -> Result<Self, EnvelopeError> {
        if x_values.len() != lattice.len() {
            return Err(EnvelopeError::Mismatch(lattice.len(), x_values.len()));
        }
        if y_values.len() != lattice.len() {
            return Err(EnvelopeError::Mismatch(lattice.len(), y_values.len()));
        }
        let values = y_values
            .iter()
            .zip(&x_values)
            .map(|(y, x)| y - lambda * x)
            .collect();
        Ok(PhiGraph {
            lattice,
            lambda,
            values,
            x_values: x_values.into(),
            y_values: y_values.into(),
        })
    }

    /// Same `f`, `g` tables at a different slope.
    pub fn with_lambda(&self, lambda: f64) -> PhiGraph {
        PhiGraph {
            lattice: Arc::clone(&self.lattice),
            lambda,
            values: self
                .y_values
                .iter()
                .zip(self.x_values.iter())
                .map(|(y, x)| y - lambda * x)
                .collect(),
            x_values: Arc::clone(&self.x_values),
            y_values: Arc::clone(&self.y_values),
        }
    }

    pub fn lattice(&self) -> &SimplexLattice {
        &self.lattice
    }

    pub fn lattice_arc(&self) -> Arc<SimplexLattice> {
        Arc::clone(&self.lattice)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x_values
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y_values
    }

    fn scale(&self) -> f64 {
        self.values.iter().fold(1.0f64, |s, v| s.max(v.abs()))
    }

    /// Debug dump with columns `p_1..p_m, f, g, phi, envelope, touches`.
    pub fn write_csv<W: Write>(&self, env: &EnvelopeResult, out: W) -> csv::Result<()> {
        let m = self.lattice.dimension();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=m).map(|i| format!("p_{i}")).collect();
        header.extend(["f", "g", "phi", "envelope", "touches"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.lattice.len() {
            let mut rec: Vec<String> = self.lattice.probs(i).iter().map(f64::to_string).collect();
            rec.push(self.x_values[i].to_string());
            rec.push(self.y_values[i].to_string());
            rec.push(self.values[i].to_string());
            rec.push(env.envelope_values[i].to_string());
            rec.push(env.touches[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lattice indices and barycentric weights realizing an envelope value.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Support {
    fn single(i: usize) -> Self {
        Support {
            indices: vec![i],
            weights: vec![1.0],
        }
    }

    fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let (indices, weights) = pairs.into_iter().filter(|(_, w)| *w > 0.0).unzip();
        Support { indices, weights }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub direction: Direction,
    pub envelope_values: Vec<f64>,
    pub supports: Vec<Support>,
    pub touches: Vec<bool>,
}

/// Envelope at a single lattice point.
#[derive(Debug, Clone)]
pub struct PointEnvelope {
    pub index: usize,
    pub value: f64,
    pub support: Support,
    pub touches: bool,
}

fn envelope_1d(graph: &PhiGraph, direction: Direction) -> Result<EnvelopeResult, EnvelopeError> {
    let m = graph.lattice.dimension();
    if m != 2 {
        return Err(EnvelopeError::Dimension(m));
    }
    let s = direction.sign();
    let signed: Vec<f64> = graph.values.iter().map(|v| s * v).collect();
    let scale = graph.scale();
    let hull = hull::lower_hull(&signed, HULL_TOL * scale);
    let touch_tol = HULL_TOL * scale;

    let n = signed.len();
    let mut env = vec![0.0; n];
    let mut supports = Vec::with_capacity(n);
    let mut touches = vec![false; n];
    for seg in hull.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        for i in a..b {
            if i == a {
                env[i] = signed[i];
                supports.push(Support::single(i));
                touches[i] = true;
                continue;
            }
            let wa = (b - i) as f64 / (b - a) as f64;
            let wb = (i - a) as f64 / (b - a) as f64;
            let value = wa * signed[a] + wb * signed[b];
            if (signed[i] - value).abs() <= touch_tol {
                env[i] = signed[i];
                supports.push(Support::single(i));
                touches[i] = true;
            } else {
                env[i] = value;
                supports.push(Support::from_pairs([(a, wa), (b, wb)]));
            }
        }
    }
    let last = *hull.last().expect("lattice is non-empty");
    env[last] = signed[last];
    supports.push(Support::single(last));
    touches[last] = true;

    env.iter_mut().for_each(|v| *v *= s);
    Ok(EnvelopeResult {
        direction,
        envelope_values: env,
        supports,
        touches,
    })
}

/// Exact lower convex envelope for binary inputs.
pub fn lower_envelope_1d(graph: &PhiGraph) -> Result<EnvelopeResult, EnvelopeError> {
    envelope_1d(graph, Direction::Lower)
}

/// Exact upper concave envelope for binary inputs.
pub fn upper_envelope_1d(graph: &PhiGraph) -> Result<EnvelopeResult, EnvelopeError> {
    envelope_1d(graph, Direction::Upper)
}

/// Columns `(p_1, …, p_{m-1}, 1)` and the vertex basis for the LP.
fn lp_columns(lattice: &SimplexLattice) -> (Vec<f64>, Vec<usize>) {
    let m = lattice.dimension();
    let mut cols = Vec::with_capacity(lattice.len() * m);
    for i in 0..lattice.len() {
        let p = lattice.probs(i);
        cols.extend_from_slice(&p[..m - 1]);
        cols.push(1.0);
    }
    (cols, (0..m).map(|j| lattice.vertex(j)).collect())
}

fn check_general_dimension(lattice: &SimplexLattice) -> Result<(), EnvelopeError> {
    let m = lattice.dimension();
    if !(2..=MAX_ENVELOPE_DIMENSION).contains(&m) {
        return Err(EnvelopeError::Dimension(m));
    }
    Ok(())
}

fn to_point_envelope(
    graph: &PhiGraph,
    index: usize,
    signed_value: f64,
    basis: &[usize],
    weights: &[f64],
    direction: Direction,
    touch_tol: f64,
) -> PointEnvelope {
    let s = direction.sign();
    let own = s * graph.values[index];
    if own - signed_value <= touch_tol {
        PointEnvelope {
            index,
            value: graph.values[index],
            support: Support::single(index),
            touches: true,
        }
    } else {
        PointEnvelope {
            index,
            value: s * signed_value,
            support: Support::from_pairs(basis.iter().copied().zip(weights.iter().copied())),
            touches: false,
        }
    }
}

/// Envelope on the whole lattice via one LP per point, each warm-started from
/// its predecessor's optimal facet.
pub fn envelope_general(
    graph: &PhiGraph,
    direction: Direction,
) -> Result<EnvelopeResult, EnvelopeError> {
    check_general_dimension(&graph.lattice)?;
    let lattice = &graph.lattice;
    let m = lattice.dimension();
    let s = direction.sign();
    let costs: Vec<f64> = graph.values.iter().map(|v| s * v).collect();
    let (cols, cold) = lp_columns(lattice);
    let lp = lp::LatticeLp::new(m, &cols, &costs, cold);
    let touch_tol = HULL_TOL * graph.scale();

    let mut out = EnvelopeResult {
        direction,
        envelope_values: Vec::with_capacity(lattice.len()),
        supports: Vec::with_capacity(lattice.len()),
        touches: Vec::with_capacity(lattice.len()),
    };
    let mut warm: Option<Vec<usize>> = None;
    for i in 0..lattice.len() {
        let rhs = &cols[i * m..(i + 1) * m];
        let v = lp.solve(rhs, warm.as_deref());
        let pe = to_point_envelope(graph, i, v.value, &v.basis, &v.weights, direction, touch_tol);
        out.envelope_values.push(pe.value);
        out.supports.push(pe.support);
        out.touches.push(pe.touches);
        warm = Some(v.basis);
    }
    Ok(out)
}

/// Envelope at one lattice point. Binary inputs use the exact hull; larger
/// alphabets solve a single LP.
pub fn envelope_at_point(
    graph: &PhiGraph,
    index: usize,
    direction: Direction,
) -> Result<PointEnvelope, EnvelopeError> {
    let lattice = &graph.lattice;
    if index >= lattice.len() {
        return Err(EnvelopeError::Mismatch(lattice.len(), index));
    }
    if lattice.dimension() == 2 {
        let env = envelope_1d(graph, direction)?;
        return Ok(PointEnvelope {
            index,
            value: env.envelope_values[index],
            support: env.supports[index].clone(),
            touches: env.touches[index],
        });
    }
    check_general_dimension(lattice)?;
    let m = lattice.dimension();
    let s = direction.sign();
    let costs: Vec<f64> = graph.values.iter().map(|v| s * v).collect();
    let (cols, cold) = lp_columns(lattice);
    let lp = lp::LatticeLp::new(m, &cols, &costs, cold);
    let v = lp.solve(&cols[index * m..(index + 1) * m], None);
    Ok(to_point_envelope(
        graph,
        index,
        v.value,
        &v.basis,
        &v.weights,
        direction,
        HULL_TOL * graph.scale(),
    ))
}

/// Outcome of the trivial-case test at `q`.
#[derive(Debug, Clone)]
pub struct GapReport {
    /// Lattice index `q` was snapped to.
    pub index: usize,
    pub snapped: Distribution,
    /// `|φ(q, λ) - envelope(q)|`
    pub gap: f64,
    pub support: Vec<(f64, Distribution)>,
}

impl GapReport {
    pub fn is_trivial(&self) -> bool {
        self.gap <= EPS_ENV
    }
}

/// Snaps `q` onto the lattice and compares `φ` with its envelope there. When
/// the gap is at most [`EPS_ENV`] the support collapses to `{(1, q)}`.
pub fn envelope_gap_at(
    result: &EnvelopeResult,
    graph: &PhiGraph,
    q: &Distribution,
) -> Result<GapReport, EnvelopeError> {
    let lattice = graph.lattice();
    if result.envelope_values.len() != lattice.len() {
        return Err(EnvelopeError::Mismatch(
            lattice.len(),
            result.envelope_values.len(),
        ));
    }
    let index = lattice.snap(q)?;
    let snapped = lattice.point(index);
    let gap = (graph.values[index] - result.envelope_values[index]).abs();
    let support = if gap <= EPS_ENV {
        vec![(1.0, snapped.clone())]
    } else {
        let s = &result.supports[index];
        s.indices
            .iter()
            .zip(&s.weights)
            .map(|(&j, &w)| (w, lattice.point(j)))
            .collect()
    };
    Ok(GapReport {
        index,
        snapped,
        gap,
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{binary_entropy, star, DivergenceKernel};
    use std::f64::consts::LN_2;

    fn entropy_graph(delta: f64, lambda: f64, n: u32) -> PhiGraph {
        let lattice = Arc::new(SimplexLattice::new(2, n).unwrap());
        build_phi_graph(
            &SimplexFunctional::Entropy,
            &SimplexFunctional::Entropy,
            &Channel::bsc(delta).unwrap(),
            lambda,
            lattice,
        )
        .unwrap()
    }

    fn custom_graph(m: usize, n: u32, phi: impl Fn(&[f64]) -> f64) -> PhiGraph {
        let lattice = Arc::new(SimplexLattice::new(m, n).unwrap());
        let ys: Vec<f64> = (0..lattice.len()).map(|i| phi(lattice.probs(i))).collect();
        PhiGraph::from_parts(lattice, 0.0, vec![0.0; ys.len()], ys).unwrap()
    }

    #[test]
    fn phi_graph_entropy_values() {
        let delta = 0.1;
        let g = entropy_graph(delta, 1.0, 4);
        for i in 0..5 {
            // Lattice point i is [i/4, 1 - i/4]; P(X = 1) = 1 - i/4.
            let p1 = 1.0 - i as f64 / 4.0;
            let expected =
                (binary_entropy(star(delta, p1).unwrap()).unwrap() - binary_entropy(p1).unwrap()) * LN_2;
            assert!((g.values()[i] - expected).abs() < 1e-14);
        }
        let g0 = g.with_lambda(0.0);
        assert_eq!(g0.values(), g0.y_values());
    }

    #[test]
    fn phi_graph_chi_squared_is_zero_at_reference() {
        let lattice = Arc::new(SimplexLattice::new(2, 10).unwrap());
        let q = lattice.point(3);
        let t = Channel::bsc(0.2).unwrap();
        let tq = t.push_forward(&q).unwrap();
        let f = SimplexFunctional::resolve(DivergenceKernel::ChiSquared, &q).unwrap();
        let g = SimplexFunctional::resolve(DivergenceKernel::ChiSquared, &tq).unwrap();
        let graph = build_phi_graph(&f, &g, &t, 0.7, lattice).unwrap();
        assert!(graph.values()[3].abs() < 1e-15);
    }

    #[test]
    fn phi_graph_reports_failing_point() {
        let lattice = Arc::new(SimplexLattice::new(2, 4).unwrap());
        let q = Distribution::new(vec![1.0, 0.0]).unwrap();
        let f = SimplexFunctional::resolve(DivergenceKernel::KullbackLeibler, &q).unwrap();
        let err = build_phi_graph(&f, &SimplexFunctional::Entropy, &Channel::bsc(0.1).unwrap(), 1.0, lattice)
            .unwrap_err();
        assert!(matches!(err, EnvelopeError::Evaluation { side: "f", .. }));
    }

    #[test]
    fn convex_phi_touches_everywhere() {
        let delta = 0.1;
        let lambda = (1.0 - 2.0 * delta) * (1.0f64 - 2.0 * delta);
        let env = lower_envelope_1d(&entropy_graph(delta, lambda, 64)).unwrap();
        assert!(env.touches.iter().all(|&t| t));
    }

    #[test]
    fn concave_bump_gives_endpoint_chord() {
        // φ = h(p): lower envelope is the chord between the vertices, which
        // is 0 everywhere.
        let g = custom_graph(2, 4, crate::prob::entropy_of);
        let env = lower_envelope_1d(&g).unwrap();
        assert_eq!(env.touches, vec![true, false, false, false, true]);
        for i in 1..4 {
            assert!(env.envelope_values[i].abs() < 1e-15);
            assert_eq!(env.supports[i].indices, vec![0, 4]);
            let w = &env.supports[i].weights;
            assert!((w[0] - (4 - i) as f64 / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_lattice_is_its_own_envelope() {
        let g = custom_graph(2, 1, |p| p[0] * 3.0 - 1.0);
        for env in [lower_envelope_1d(&g).unwrap(), upper_envelope_1d(&g).unwrap()] {
            assert_eq!(env.envelope_values, g.values());
            assert!(env.touches.iter().all(|&t| t));
        }
    }

    #[test]
    fn upper_envelope_cases() {
        let g = custom_graph(2, 16, crate::prob::entropy_of);
        assert!(upper_envelope_1d(&g).unwrap().touches.iter().all(|&t| t));

        // φ = h_b(δ ⋆ p) at λ = 0 is concave.
        let g = entropy_graph(0.1, 0.0, 128);
        assert!(upper_envelope_1d(&g).unwrap().touches.iter().all(|&t| t));

        // Mr. Gerber regime with φ(1/2) < h_b(δ): chord between vertices.
        let delta = 0.1;
        let lambda = 0.6;
        let g = entropy_graph(delta, lambda, 64);
        assert!(g.values()[32] < g.values()[0]);
        let env = upper_envelope_1d(&g).unwrap();
        for i in 1..64 {
            assert_eq!(env.supports[i].indices, vec![0, 64]);
        }
    }

    #[test]
    fn affine_phi_touches_everywhere_in_general_path() {
        let g = custom_graph(3, 6, |p| 2.0 * p[0] - p[1] + 0.5);
        for d in [Direction::Lower, Direction::Upper] {
            let env = envelope_general(&g, d).unwrap();
            assert!(env.touches.iter().all(|&t| t));
        }
    }

    #[test]
    fn ternary_entropy_lower_envelope_is_flat() {
        // Concave φ = h: the lower envelope is the plane through the three
        // vertices, all at 0.
        let g = custom_graph(3, 2, crate::prob::entropy_of);
        let env = envelope_general(&g, Direction::Lower).unwrap();
        for i in 0..g.lattice().len() {
            assert!(env.envelope_values[i].abs() < 1e-14);
            let is_vertex = g.lattice().counts(i).contains(&2);
            assert_eq!(env.touches[i], is_vertex);
            let s = &env.supports[i];
            assert!(s.len() <= 3);
            for &j in &s.indices {
                assert!(g.lattice().counts(j).contains(&2));
            }
        }
    }

    #[test]
    fn general_path_matches_1d_path() {
        for (lambda, delta) in [(0.3, 0.1), (0.5, 0.2), (0.0, 0.05), (0.9, 0.3)] {
            let g = entropy_graph(delta, lambda, 200);
            for d in [Direction::Lower, Direction::Upper] {
                let a = envelope_1d(&g, d).unwrap();
                let b = envelope_general(&g, d).unwrap();
                for i in 0..g.lattice().len() {
                    assert!(
                        (a.envelope_values[i] - b.envelope_values[i]).abs() < 1e-12,
                        "λ={lambda} {d} i={i}: {} vs {}",
                        a.envelope_values[i],
                        b.envelope_values[i]
                    );
                    assert_eq!(a.touches[i], b.touches[i]);
                }
            }
        }
    }

    #[test]
    fn gap_report_trivial_and_non_trivial() {
        let delta = 0.1;
        let g = entropy_graph(delta, 0.9, 256);
        let env = lower_envelope_1d(&g).unwrap();
        let q = Distribution::binary(0.1).unwrap();
        let rep = envelope_gap_at(&env, &g, &q).unwrap();
        assert!(rep.is_trivial());
        assert_eq!(rep.support.len(), 1);

        let g = entropy_graph(delta, 0.45, 256);
        let env = lower_envelope_1d(&g).unwrap();
        let rep = envelope_gap_at(&env, &g, &q).unwrap();
        assert!(!rep.is_trivial());
        assert_eq!(rep.support.len(), 2);
        let mut mixed = [0.0; 2];
        for (w, p) in &rep.support {
            mixed[0] += w * p.probs()[0];
            mixed[1] += w * p.probs()[1];
        }
        assert!((mixed[0] - rep.snapped.probs()[0]).abs() < 1e-9);
        // Matched atoms are mirror images: {r, 1 - r}.
        let (a, b) = (&rep.support[0].1, &rep.support[1].1);
        assert!((a.probs()[0] - b.probs()[1]).abs() < 1e-12);
    }

    #[test]
    fn chi_squared_support_straddles_reference() {
        // KL-type f with an entropy-type g gives a non-convex φ around q.
        let lattice = Arc::new(SimplexLattice::new(2, 100).unwrap());
        let q = lattice.point(50);
        let f = SimplexFunctional::resolve(DivergenceKernel::ChiSquared, &q).unwrap();
        let graph = build_phi_graph(&f, &SimplexFunctional::Entropy, &Channel::bsc(0.1).unwrap(), 0.05, lattice)
            .unwrap();
        let env = lower_envelope_1d(&graph).unwrap();
        let rep = envelope_gap_at(&env, &graph, &q).unwrap();
        assert!(!rep.is_trivial());
        let firsts: Vec<f64> = rep.support.iter().map(|(_, p)| p.probs()[0]).collect();
        assert!(firsts.iter().any(|&x| x < 0.5) && firsts.iter().any(|&x| x > 0.5));
    }

    #[test]
    fn general_dimension_cap() {
        let g = custom_graph(5, 2, |p| p[0]);
        assert!(matches!(
            envelope_general(&g, Direction::Lower),
            Err(EnvelopeError::Dimension(5))
        ));
        let g = custom_graph(3, 2, |p| p[0]);
        assert!(matches!(lower_envelope_1d(&g), Err(EnvelopeError::Dimension(3))));
    }

    #[test]
    fn csv_dump_has_expected_columns() {
        let g = custom_graph(3, 2, |p| p[0]);
        let env = envelope_general(&g, Direction::Lower).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&env, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("p_1,p_2,p_3,f,g,phi,envelope,touches\n"));
        assert_eq!(text.lines().count(), 1 + g.lattice().len());
    }

    fn refinement_violation(m: usize, n: u32, channel: &Channel, lambda: f64, upper: bool) -> f64 {
        let graph = |res: u32| {
            let lattice = Arc::new(SimplexLattice::new(m, res).unwrap());
            build_phi_graph(&SimplexFunctional::Entropy, &SimplexFunctional::Entropy, channel, lambda, lattice)
                .unwrap()
        };
        let (coarse, fine) = (graph(n), graph(2 * n));
        let dir = if upper { Direction::Upper } else { Direction::Lower };
        let (ec, ef) = if m == 2 {
            (envelope_1d(&coarse, dir).unwrap(), envelope_1d(&fine, dir).unwrap())
        } else {
            (envelope_general(&coarse, dir).unwrap(), envelope_general(&fine, dir).unwrap())
        };
        let s = if upper { -1.0 } else { 1.0 };
        let mut worst = f64::NEG_INFINITY;
        for i in 0..coarse.lattice().len() {
            let doubled: Vec<u32> = coarse.lattice().counts(i).iter().map(|c| 2 * c).collect();
            let j = fine.lattice().index_of(&doubled).unwrap();
            worst = worst.max(s * (ef.envelope_values[j] - ec.envelope_values[i]));
        }
        worst
    }

    proptest::proptest! {
        #[test]
        fn refinement_never_worsens_binary_envelopes(
            delta in 0.0f64..0.5,
            lambda in 0.0f64..2.0,
            n in 2u32..120,
            upper in proptest::bool::ANY,
        ) {
            let ch = Channel::bsc(delta).unwrap();
            proptest::prop_assert!(refinement_violation(2, n, &ch, lambda, upper) <= 1e-9);
        }

        #[test]
        fn refinement_never_worsens_ternary_envelopes(
            raw in proptest::collection::vec(0.05f64..1.0, 6),
            lambda in 0.0f64..2.0,
            n in 2u32..8,
            upper in proptest::bool::ANY,
        ) {
            let columns = raw
                .chunks(2)
                .map(|c| Distribution::new(vec![c[0] / (c[0] + c[1]), c[1] / (c[0] + c[1])]).unwrap())
                .collect();
            let ch = Channel::from_columns(columns).unwrap();
            proptest::prop_assert!(refinement_violation(3, n, &ch, lambda, upper) <= 1e-9);
        }
    }
}
