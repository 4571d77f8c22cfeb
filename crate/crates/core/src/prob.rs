//! Probability-simplex primitives.
//!
//! Entropies and divergences are computed in nats. The binary entropy
//! `h_b` and its inverse are the exception: they work in bits so that
//! `h_b(1/2) = 1`, which is the convention the binary-symmetric closed forms
//! use.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inputs this close to stochastic are renormalized; anything further off
/// is rejected.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Tolerance for `Σ α_w p_w = q` and `Σ α_w = 1` checks on mixtures.
pub const MIXTURE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("a distribution needs at least two symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("entry {index} is not a valid probability: {value}")]
    InvalidEntry { index: usize, value: f64 },
    #[error("entries sum to {sum}, more than {STOCHASTIC_TOL} away from 1")]
    NotNormalized { sum: f64 },
    #[error("{name} = {value} lies outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("alphabet sizes differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("absolute continuity violated at index {index}: p = {p} where the reference is 0")]
    NotAbsolutelyContinuous { index: usize, p: f64 },
    #[error("{0} is not an f-divergence kernel")]
    NotADivergence(DivergenceKernel),
    #[error("inconsistent mixture: {0}")]
    InconsistentMixture(String),
    #[error("joint distribution has no mass")]
    EmptyJoint,
    #[error("norm order beta = {0} must be at least 2")]
    InvalidBeta(f64),
    #[error("malformed joint distribution: {0}")]
    Malformed(String),
}

pub type Result<T, E = ProbError> = std::result::Result<T, E>;

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ProbError::OutOfRange {
            name,
            value,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// Clamps tiny negative noise, checks the sum and renormalizes.
fn normalize(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    for (index, p) in probs.iter_mut().enumerate() {
        if !p.is_finite() || *p < -STOCHASTIC_TOL {
            return Err(ProbError::InvalidEntry { index, value: *p });
        }
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(ProbError::NotNormalized { sum });
    }
    if sum != 1.0 {
        probs.iter_mut().for_each(|p| *p /= sum);
    }
    Ok(probs)
}

/// A probability vector on an `m`-point alphabet, `m ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(ProbError::TooFewSymbols(probs.len()));
        }
        normalize(probs).map(Distribution)
    }

    /// `[1 - p, p]`, i.e. `p = P(X = 1)`.
    pub fn binary(p: f64) -> Result<Self> {
        check_unit_interval("p", p)?;
        Ok(Distribution(vec![1.0 - p, p]))
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0 / m as f64; m])
    }

    pub fn point_mass(m: usize, index: usize) -> Result<Self> {
        if m < 2 {
            return Err(ProbError::TooFewSymbols(m));
        }
        let mut probs = vec![0.0; m];
        probs[index] = 1.0;
        Ok(Distribution(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Distribution::new(v).map_err(serde::de::Error::custom)
    }
}

/// Column-stochastic `n × m` matrix with `T[i][j] = P(Y = i | X = j)`,
/// stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    columns: Vec<Distribution>,
}

impl Channel {
    pub fn from_columns(columns: Vec<Distribution>) -> Result<Self> {
        if columns.is_empty() {
            return Err(ProbError::TooFewSymbols(0));
        }
        let n = columns[0].len();
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(ProbError::DimensionMismatch(n, c.len()));
        }
        Ok(Channel { columns })
    }

    /// Builds the channel from `n` rows of `m` entries each.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(ProbError::DimensionMismatch(m, r.len()));
        }
        let columns = (0..m)
            .map(|j| Distribution::new(rows.iter().map(|r| r[j]).collect()))
            .collect::<Result<Vec<_>>>()?;
        if n < 2 {
            return Err(ProbError::TooFewSymbols(n));
        }
        Self::from_columns(columns)
    }

    /// Binary symmetric channel with crossover probability `delta`.
    pub fn bsc(delta: f64) -> Result<Self> {
        check_unit_interval("delta", delta)?;
        Self::from_columns(vec![
            Distribution(vec![1.0 - delta, delta]),
            Distribution(vec![delta, 1.0 - delta]),
        ])
    }

    /// Input alphabet size `m`.
    pub fn inputs(&self) -> usize {
        self.columns.len()
    }

    /// Output alphabet size `n`.
    pub fn outputs(&self) -> usize {
        self.columns[0].len()
    }

    pub fn column(&self, j: usize) -> &Distribution {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Distribution] {
        &self.columns
    }

    /// `T p` for a raw probability vector over the inputs.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs()];
        for (pj, col) in p.iter().zip(&self.columns) {
            if *pj == 0.0 {
                continue;
            }
            for (o, t) in out.iter_mut().zip(col.probs()) {
                *o += pj * t;
            }
        }
        out
    }

    pub fn push_forward(&self, p: &Distribution) -> Result<Distribution> {
        if p.len() != self.inputs() {
            return Err(ProbError::DimensionMismatch(self.inputs(), p.len()));
        }
        Distribution::new(self.apply(p.probs()))
    }

    /// Keeps only the listed input columns.
    pub fn restrict_inputs(&self, keep: &[usize]) -> Result<Self> {
        Self::from_columns(keep.iter().map(|&j| self.columns[j].clone()).collect())
    }

    /// `n` rows of `m` entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.outputs())
            .map(|i| self.columns.iter().map(|c| c.probs()[i]).collect())
            .collect()
    }
}

/// Joint law of `(X, Y)` as an `m × n` matrix, rows indexed by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    p_xy: Vec<f64>,
}

/// On-disk form of a joint distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JointSpec {
    Joint {
        p_xy: Vec<Vec<f64>>,
    },
    MarginalChannel {
        q: Vec<f64>,
        #[serde(rename = "T")]
        t: Vec<Vec<f64>>,
    },
}

impl JointDistribution {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(ProbError::DimensionMismatch(n, r.len()));
        }
        if m == 0 || n == 0 {
            return Err(ProbError::EmptyJoint);
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if flat.iter().all(|&p| p == 0.0) {
            return Err(ProbError::EmptyJoint);
        }
        let p_xy = normalize(flat)?;
        Ok(JointDistribution {
            rows: m,
            cols: n,
            p_xy,
        })
    }

    pub fn from_marginal_channel(q: &Distribution, channel: &Channel) -> Result<Self> {
        if q.len() != channel.inputs() {
            return Err(ProbError::DimensionMismatch(q.len(), channel.inputs()));
        }
        let rows: Vec<Vec<f64>> = q
            .probs()
            .iter()
            .zip(channel.columns())
            .map(|(qx, col)| col.probs().iter().map(|t| qx * t).collect())
            .collect();
        Self::new(&rows)
    }

    pub fn from_spec(spec: &JointSpec) -> Result<Self> {
        match spec {
            JointSpec::Joint { p_xy } => Self::new(p_xy),
            JointSpec::MarginalChannel { q, t } => {
                let q = Distribution::new(q.clone())?;
                let channel = Channel::from_rows(t)?;
                Self::from_marginal_channel(&q, &channel)
            }
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: JointSpec =
            serde_json::from_str(s).map_err(|e| ProbError::Malformed(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn x_size(&self) -> usize {
        self.rows
    }

    pub fn y_size(&self) -> usize {
        self.cols
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.p_xy[x * self.cols + y]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.p_xy.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.p_xy.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.p_xy.chunks(self.cols) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }

    pub fn to_spec(&self) -> JointSpec {
        JointSpec::Joint { p_xy: self.rows() }
    }
}

/// Result of splitting a joint law into `(q, T)` on the support of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub marginal: Distribution,
    pub channel: Channel,
    /// Original `x` indices that survived support restriction.
    pub support: Vec<usize>,
}

/// Splits `P_XY` into the `X` marginal and `P_{Y|X}`, dropping symbols of
/// `X` with zero probability.
pub fn decompose_joint(joint: &JointDistribution) -> Result<Decomposition> {
    let qx = joint.marginal_x();
    let support: Vec<usize> = (0..joint.x_size()).filter(|&x| qx[x] > 0.0).collect();
    if support.is_empty() {
        return Err(ProbError::EmptyJoint);
    }
    if support.len() < 2 {
        return Err(ProbError::TooFewSymbols(support.len()));
    }
    let marginal = Distribution::new(support.iter().map(|&x| qx[x]).collect())?;
    let columns = support
        .iter()
        .map(|&x| {
            let row: Vec<f64> = (0..joint.y_size())
                .map(|y| joint.get(x, y) / qx[x])
                .collect();
            Distribution::new(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Decomposition {
        marginal,
        channel: Channel::from_columns(columns)?,
        support,
    })
}

/// Shannon entropy in nats, `0 log 0 = 0`.
pub fn entropy(p: &Distribution) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    h.max(0.0)
}

/// Binary entropy `h_b(q)` in bits.
pub fn binary_entropy(q: f64) -> Result<f64> {
    check_unit_interval("q", q)?;
    Ok(entropy_of(&[q, 1.0 - q]) / LN_2)
}

/// Inverse of `h_b` restricted to `[0, 1/2]`, input in bits.
pub fn binary_entropy_inv(y: f64) -> Result<f64> {
    check_unit_interval("y", y)?;
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(0.5);
    }
    let h = |r: f64| entropy_of(&[r, 1.0 - r]) / LN_2;
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    // h_b is increasing on [0, 1/2]; bisect until the bracket stops shrinking.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if (h(lo) - y).abs() <= (h(hi) - y).abs() {
        lo
    } else {
        hi
    })
}

/// Binary convolution `a ⋆ b = (1 - a) b + (1 - b) a`.
pub fn star(a: f64, b: f64) -> Result<f64> {
    check_unit_interval("a", a)?;
    check_unit_interval("b", b)?;
    Ok((1.0 - a) * b + (1.0 - b) * a)
}

/// The convex function behind an f-divergence, or one of the direct simplex
/// functionals (entropy, `ℓ^β` norm) that take its place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DivergenceKernel {
    /// `f(t) = t log t`
    KullbackLeibler,
    /// `f(t) = t² - 1`
    ChiSquared,
    /// `f(t) = |t - 1| / 2`
    TotalVariation,
    /// `p ↦ h(p)` in nats.
    Entropy,
    /// `p ↦ ‖p‖_β`, `β ≥ 2`.
    NormBeta(f64),
}

impl std::fmt::Display for DivergenceKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DivergenceKernel::KullbackLeibler => write!(f, "kl"),
            DivergenceKernel::ChiSquared => write!(f, "chi2"),
            DivergenceKernel::TotalVariation => write!(f, "tv"),
            DivergenceKernel::Entropy => write!(f, "entropy"),
            DivergenceKernel::NormBeta(b) => write!(f, "norm({b})"),
        }
    }
}

impl DivergenceKernel {
    pub fn norm_beta(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(DivergenceKernel::NormBeta(beta))
    }

    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            DivergenceKernel::KullbackLeibler
                | DivergenceKernel::ChiSquared
                | DivergenceKernel::TotalVariation
        )
    }

    /// The scalar generator `f(t)`, for divergence kinds.
    pub fn generator(&self, t: f64) -> Option<f64> {
        match self {
            DivergenceKernel::KullbackLeibler => Some(if t == 0.0 { 0.0 } else { t * t.ln() }),
            DivergenceKernel::ChiSquared => Some(t * t - 1.0),
            DivergenceKernel::TotalVariation => Some(0.5 * (t - 1.0).abs()),
            _ => None,
        }
    }

    /// `r f(p / r)` with `0 f(0/0) = 0`. Algebraically simplified per kernel
    /// so that `p == r` gives exactly zero.
    fn perspective(&self, index: usize, p: f64, r: f64) -> Result<f64> {
        if r == 0.0 {
            return if p == 0.0 {
                Ok(0.0)
            } else {
                Err(ProbError::NotAbsolutelyContinuous { index, p })
            };
        }
        Ok(match self {
            DivergenceKernel::KullbackLeibler => {
                if p == 0.0 {
                    0.0
                } else {
                    p * (p / r).ln()
                }
            }
            DivergenceKernel::ChiSquared => {
                let d = p - r;
                d * d / r
            }
            DivergenceKernel::TotalVariation => 0.5 * (p - r).abs(),
            other => return Err(ProbError::NotADivergence(*other)),
        })
    }

    fn divergence_of(&self, p: &[f64], r: &[f64]) -> Result<f64> {
        if !self.is_divergence() {
            return Err(ProbError::NotADivergence(*self));
        }
        if p.len() != r.len() {
            return Err(ProbError::DimensionMismatch(p.len(), r.len()));
        }
        let mut total = 0.0;
        for (index, (&pi, &ri)) in p.iter().zip(r).enumerate() {
            total += self.perspective(index, pi, ri)?;
        }
        Ok(total.max(0.0))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 2.0 {
        Ok(())
    } else {
        Err(ProbError::InvalidBeta(beta))
    }
}

/// `D_f(p ‖ r) = Σ r_i f(p_i / r_i)`.
pub fn f_divergence(kernel: DivergenceKernel, p: &Distribution, r: &Distribution) -> Result<f64> {
    kernel.divergence_of(p.probs(), r.probs())
}

/// `I_f(X; Y) = D_f(P_XY ‖ P_X P_Y)`.
pub fn f_information(kernel: DivergenceKernel, joint: &JointDistribution) -> Result<f64> {
    let qx = joint.marginal_x();
    let qy = joint.marginal_y();
    let product: Vec<f64> = qx
        .iter()
        .flat_map(|a| qy.iter().map(move |b| a * b))
        .collect();
    kernel.divergence_of(&joint.p_xy, &product)
}

fn check_mixture(weights: &[f64], conditionals: &[Distribution]) -> Result<()> {
    if weights.len() != conditionals.len() {
        return Err(ProbError::DimensionMismatch(weights.len(), conditionals.len()));
    }
    if weights.is_empty() {
        return Err(ProbError::InconsistentMixture("no atoms".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(ProbError::InconsistentMixture(format!("negative weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > MIXTURE_TOL {
        return Err(ProbError::InconsistentMixture(format!(
            "weights sum to {total}"
        )));
    }
    let m = conditionals[0].len();
    if let Some(c) = conditionals.iter().find(|c| c.len() != m) {
        return Err(ProbError::DimensionMismatch(m, c.len()));
    }
    Ok(())
}

/// `Σ_w α_w p_w`.
pub fn mixture(weights: &[f64], conditionals: &[Distribution]) -> Result<Vec<f64>> {
    check_mixture(weights, conditionals)?;
    let mut out = vec![0.0; conditionals[0].len()];
    for (w, c) in weights.iter().zip(conditionals) {
        for (o, p) in out.iter_mut().zip(c.probs()) {
            *o += w * p;
        }
    }
    Ok(out)
}

/// `Σ_w α_w D_f(p_w ‖ q)`, which equals `I_f(W; X)` when the mixture of the
/// conditionals is `q`.
pub fn conditional_f_information(
    kernel: DivergenceKernel,
    weights: &[f64],
    conditionals: &[Distribution],
    marginal: &Distribution,
) -> Result<f64> {
    let mixed = mixture(weights, conditionals)?;
    if mixed.len() != marginal.len() {
        return Err(ProbError::DimensionMismatch(mixed.len(), marginal.len()));
    }
    let gap = mixed
        .iter()
        .zip(marginal.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if gap > MIXTURE_TOL {
        return Err(ProbError::InconsistentMixture(format!(
            "mixture of conditionals differs from the marginal by {gap:e}"
        )));
    }
    let mut total = 0.0;
    for (w, c) in weights.iter().zip(conditionals) {
        total += w * f_divergence(kernel, c, marginal)?;
    }
    Ok(total)
}

/// `‖p‖_β`, the single-distribution form of `K_β`.
pub fn arimoto_k(beta: f64, p: &Distribution) -> Result<f64> {
    check_beta(beta)?;
    Ok(norm_beta(beta, p.probs()))
}

pub(crate) fn norm_beta(beta: f64, p: &[f64]) -> f64 {
    // Factor out the max entry so small probabilities do not underflow.
    let max = p.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let s: f64 = p.iter().map(|x| (x / max).powf(beta)).sum();
    max * s.powf(1.0 / beta)
}

/// Arimoto conditional entropy `β/(1-β) log Σ_w α_w ‖p_w‖_β`, in nats.
pub fn arimoto_conditional_entropy(
    beta: f64,
    weights: &[f64],
    conditionals: &[Distribution],
) -> Result<f64> {
    check_beta(beta)?;
    check_mixture(weights, conditionals)?;
    let k: f64 = weights
        .iter()
        .zip(conditionals)
        .map(|(w, c)| w * norm_beta(beta, c.probs()))
        .sum();
    Ok(beta / (1.0 - beta) * k.ln())
}

/// A kernel bound to its reference measure: a real function on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub enum SimplexFunctional {
    Entropy,
    Divergence {
        kernel: DivergenceKernel,
        reference: Distribution,
    },
    Norm {
        beta: f64,
    },
}

impl SimplexFunctional {
    /// Divergence kinds measure distance to `reference`; the direct
    /// functionals ignore it.
    pub fn resolve(kernel: DivergenceKernel, reference: &Distribution) -> Result<Self> {
        Ok(match kernel {
            DivergenceKernel::Entropy => SimplexFunctional::Entropy,
            DivergenceKernel::NormBeta(beta) => {
                check_beta(beta)?;
                SimplexFunctional::Norm { beta }
            }
            kernel => SimplexFunctional::Divergence {
                kernel,
                reference: reference.clone(),
            },
        })
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        match self {
            SimplexFunctional::Entropy => Ok(entropy_of(p)),
            SimplexFunctional::Divergence { kernel, reference } => {
                kernel.divergence_of(p, reference.probs())
            }
            SimplexFunctional::Norm { beta } => Ok(norm_beta(*beta, p)),
        }
    }

    /// True when the functional changes with the reference marginal.
    pub fn depends_on_reference(&self) -> bool {
        matches!(self, SimplexFunctional::Divergence { .. })
    }
}
