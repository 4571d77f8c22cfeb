//! Slope sweeps over `φ(·, λ)`: boundary points with witness channels,
//! assembled curves, frame changes and matched channels.

use std::f64::consts::LN_2;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{
    self, build_phi_graph, default_resolution, Direction, EnvelopeError, PhiGraph,
    SimplexLattice, EPS_ENV,
};
use crate::nnls::convex_weights;
use crate::prob::{
    entropy, mixture, Channel, DivergenceKernel, Distribution, ProbError, SimplexFunctional,
    MIXTURE_TOL,
};

/// Default number of slopes in a sweep.
pub const DEFAULT_LAMBDA_STEPS: usize = 256;

/// Two x values closer than this are treated as the same boundary abscissa.
const DEDUP_TOL: f64 = 1e-12;

/// Tolerance on `y - λx = envelope(q)` for matched-channel checks.
pub const SUPPORT_LINE_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("the slope grid is empty")]
    EmptyGrid,
    #[error("slope {0} is not finite")]
    NonFiniteLambda(f64),
    #[error("no default lattice resolution for an alphabet of size {0}")]
    NoDefaultResolution(usize),
    #[error("snapping the marginal to the lattice (N = {resolution}) drops symbol {symbol}")]
    SupportLost { resolution: u32, symbol: usize },
    #[error("expected a {expected} curve, got a {found} curve")]
    WrongDirection {
        expected: Direction,
        found: Direction,
    },
    #[error("{0}")]
    WrongFrame(String),
    #[error("the curve has no points")]
    EmptyCurve,
    #[error("matched channels need functionals that do not depend on the input marginal; {0} does")]
    ReferenceDependent(DivergenceKernel),
    #[error("a matched channel needs at least two atoms")]
    SingleAtom,
    #[error("the witness atoms do not cover the marginal {0:?}")]
    NotCovered(Vec<f64>),
    #[error("point misses the supporting line of slope {lambda} by {deviation:e}")]
    NotOnBoundary { lambda: f64, deviation: f64 },
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
    #[error("boundary point has no slope")]
    NoSlope,
}

pub type Result<T, E = SweepError> = std::result::Result<T, E>;

/// One `(α_i, p_i)` pair of a witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "alpha")]
    pub weight: f64,
    #[serde(rename = "p")]
    pub conditional: Distribution,
}

/// An explicit `P_W`, `P_{X|W}` pair with `Σ α_i p_i = q`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessChannel {
    atoms: Vec<Atom>,
    marginal: Distribution,
}

#[derive(Serialize, Deserialize)]
struct WitnessJson {
    atoms: Vec<Atom>,
}

impl WitnessChannel {
    /// Drops zero-weight atoms and checks the mixture against `marginal`.
    pub fn new(atoms: Vec<Atom>, marginal: Distribution) -> Result<Self> {
        let atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.weight != 0.0).collect();
        let m = marginal.len();
        if atoms.is_empty() {
            return Err(SweepError::InvalidWitness("no atoms".into()));
        }
        if atoms.len() > m + 1 {
            return Err(SweepError::InvalidWitness(format!(
                "{} atoms exceed the bound m + 1 = {}",
                atoms.len(),
                m + 1
            )));
        }
        if let Some(a) = atoms.iter().find(|a| a.weight.is_nan() || a.weight <= 0.0) {
            return Err(SweepError::InvalidWitness(format!("weight {}", a.weight)));
        }
        let (w, c) = split(&atoms);
        let mixed = mixture(&w, &c)?;
        if mixed.len() != m {
            return Err(ProbError::DimensionMismatch(m, mixed.len()).into());
        }
        let gap = mixed
            .iter()
            .zip(marginal.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap > MIXTURE_TOL {
            return Err(SweepError::InvalidWitness(format!(
                "mixture misses the marginal by {gap:e}"
            )));
        }
        Ok(WitnessChannel { atoms, marginal })
    }

    /// The constant `W`: one atom equal to `q`.
    pub fn trivial(q: &Distribution) -> Self {
        WitnessChannel {
            atoms: vec![Atom {
                weight: 1.0,
                conditional: q.clone(),
            }],
            marginal: q.clone(),
        }
    }

    /// `W = X`: the vertices `e_i` with weights `q_i`.
    pub fn deterministic(q: &Distribution) -> Result<Self> {
        let atoms = q
            .probs()
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                Ok(Atom {
                    weight: w,
                    conditional: Distribution::point_mass(q.len(), i)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        WitnessChannel::new(atoms, q.clone())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn marginal(&self) -> &Distribution {
        &self.marginal
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn conditionals(&self) -> Vec<Distribution> {
        self.atoms.iter().map(|a| a.conditional.clone()).collect()
    }

    /// `(Σ α_i f(p_i), Σ α_i g(T p_i))`
    pub fn evaluate(
        &self,
        f: &SimplexFunctional,
        g: &SimplexFunctional,
        channel: &Channel,
    ) -> Result<(f64, f64)> {
        let mut x = 0.0;
        let mut y = 0.0;
        for a in &self.atoms {
            let p = a.conditional.probs();
            x += a.weight * f.eval(p)?;
            y += a.weight * g.eval(&channel.apply(p))?;
        }
        Ok((x, y))
    }

    /// `{"atoms":[{"alpha":a,"p":[...]}, ...]}`
    pub fn to_json(&self) -> String {
        serde_json::to_string(&WitnessJson {
            atoms: self.atoms.clone(),
        })
        .expect("witness serializes")
    }

    /// Parses the JSON form; the marginal is the mixture of the atoms.
    pub fn from_json(s: &str) -> Result<Self> {
        let parsed: WitnessJson = serde_json::from_str(s)
            .map_err(|e| SweepError::InvalidWitness(e.to_string()))?;
        let (w, c) = split(&parsed.atoms);
        let marginal = Distribution::new(mixture(&w, &c)?)?;
        WitnessChannel::new(parsed.atoms, marginal)
    }

    fn same_atoms(&self, other: &WitnessChannel) -> bool {
        self.atoms.len() == other.atoms.len()
            && self.atoms.iter().all(|a| {
                other
                    .atoms
                    .iter()
                    .any(|b| a.conditional.max_abs_diff(&b.conditional) <= 1e-12)
            })
    }
}

fn split(atoms: &[Atom]) -> (Vec<f64>, Vec<Distribution>) {
    atoms
        .iter()
        .map(|a| (a.weight, a.conditional.clone()))
        .unzip()
}

/// True when both witnesses use the same conditionals (weights may differ).
pub fn same_atom_set(a: &WitnessChannel, b: &WitnessChannel) -> bool {
    a.same_atoms(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    /// Supporting slope; `None` for the forced endpoints.
    pub lambda: Option<f64>,
    pub x: f64,
    pub y: f64,
    pub witness: WitnessChannel,
    pub trivial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemTag {
    Generic,
    Ib,
    Pf,
    Eb,
    Epf,
    Arimoto(f64),
}

impl ProblemTag {
    /// Information bottleneck and privacy funnel sit on opposite boundaries
    /// depending on the frame: KL upper and entropy lower are the bottleneck.
    pub fn infer(f: DivergenceKernel, g: DivergenceKernel, direction: Direction) -> Self {
        use DivergenceKernel::*;
        match (f, g, direction) {
            (KullbackLeibler, KullbackLeibler, Direction::Upper)
            | (Entropy, Entropy, Direction::Lower) => ProblemTag::Ib,
            (KullbackLeibler, KullbackLeibler, Direction::Lower)
            | (Entropy, Entropy, Direction::Upper) => ProblemTag::Pf,
            (ChiSquared, ChiSquared, Direction::Upper) => ProblemTag::Eb,
            (ChiSquared, ChiSquared, Direction::Lower) => ProblemTag::Epf,
            (NormBeta(a), NormBeta(b), _) if a == b => ProblemTag::Arimoto(a),
            _ => ProblemTag::Generic,
        }
    }
}

impl std::fmt::Display for ProblemTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProblemTag::Generic => write!(f, "generic"),
            ProblemTag::Ib => write!(f, "ib"),
            ProblemTag::Pf => write!(f, "pf"),
            ProblemTag::Eb => write!(f, "eb"),
            ProblemTag::Epf => write!(f, "epf"),
            ProblemTag::Arimoto(b) => write!(f, "arimoto({b})"),
        }
    }
}

/// Coordinates a curve is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Frame {
    /// `(E f(p_w), E g(T p_w))` as swept.
    Raw,
    /// `(h(q) - x, h(Tq) - y)` for entropy kernels: mutual informations.
    EntropyComplement,
    /// `β/(1-β) log` applied to a `K_β` curve: Arimoto conditional entropies.
    ArimotoEntropy { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    fn per_nat(&self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => 1.0 / LN_2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    pub direction: Direction,
    pub problem: ProblemTag,
    pub frame: Frame,
    pub units: Units,
    pub kernels: (DivergenceKernel, DivergenceKernel),
    /// The (snapped) marginal the curve was computed for.
    pub marginal: Distribution,
    /// Sorted by `x`.
    pub points: Vec<BoundaryPoint>,
}

/// A curve value between two swept points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated {
    pub value: f64,
    /// `x` lay outside the curve's domain and was clamped to it.
    pub clamped: bool,
    /// Slopes of the bracketing points.
    pub lambda_bracket: (Option<f64>, Option<f64>),
}

impl BoundaryCurve {
    pub fn x_range(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.x, self.points.last()?.x))
    }

    /// Piecewise-linear interpolation; outside the domain the nearest
    /// endpoint value is returned with `clamped` set.
    pub fn interpolate(&self, x: f64) -> Result<Interpolated> {
        let pts = &self.points;
        let first = pts.first().ok_or(SweepError::EmptyCurve)?;
        let last = pts.last().expect("non-empty");
        if x <= first.x || x >= last.x {
            let p = if x <= first.x { first } else { last };
            let clamped = x < first.x || x > last.x;
            return Ok(Interpolated {
                value: p.y,
                clamped,
                lambda_bracket: (p.lambda, p.lambda),
            });
        }
        let k = pts.partition_point(|p| p.x <= x);
        let (a, b) = (&pts[k - 1], &pts[k]);
        let t = (x - a.x) / (b.x - a.x);
        Ok(Interpolated {
            value: a.y + t * (b.y - a.y),
            clamped: false,
            lambda_bracket: (a.lambda, b.lambda),
        })
    }

    /// Same curve with both coordinates scaled from nats to `units`.
    pub fn in_units(&self, units: Units) -> Result<BoundaryCurve> {
        if self.units == units {
            return Ok(self.clone());
        }
        let logarithmic = |k: DivergenceKernel| {
            matches!(k, DivergenceKernel::Entropy | DivergenceKernel::KullbackLeibler)
        };
        let arimoto_entropy = matches!(self.frame, Frame::ArimotoEntropy { .. });
        if !(logarithmic(self.kernels.0) && logarithmic(self.kernels.1)) && !arimoto_entropy {
            return Err(SweepError::WrongFrame(format!(
                "{}/{} values carry no logarithmic unit",
                self.kernels.0, self.kernels.1
            )));
        }
        let factor = units.per_nat() / self.units.per_nat();
        let mut out = self.clone();
        out.units = units;
        for p in &mut out.points {
            p.x *= factor;
            p.y *= factor;
        }
        Ok(out)
    }

    /// Applies `map` to both coordinates and re-sorts by `x`.
    fn mapped(&self, frame: Frame, map: impl Fn(f64, f64) -> (f64, f64)) -> BoundaryCurve {
        let mut out = self.clone();
        out.frame = frame;
        for p in &mut out.points {
            (p.x, p.y) = map(p.x, p.y);
        }
        out.points.sort_by(|a, b| a.x.total_cmp(&b.x));
        out
    }

    /// `K_β` curve to Arimoto conditional entropies, in the curve's units.
    pub fn to_arimoto_entropy(&self) -> Result<BoundaryCurve> {
        let ProblemTag::Arimoto(beta) = self.problem else {
            return Err(SweepError::WrongFrame("not a K-frame curve".into()));
        };
        if self.frame != Frame::Raw {
            return Err(SweepError::WrongFrame("curve is not in the K frame".into()));
        }
        let s = self.units.per_nat();
        let c = beta / (1.0 - beta);
        Ok(self.mapped(Frame::ArimotoEntropy { beta }, |x, y| {
            (s * c * x.ln(), s * c * y.ln())
        }))
    }

    /// One CSV row per point: `problem, direction, lambda, x, y, trivial,
    /// witness_json`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        write_curve_header(&mut w)?;
        self.write_rows(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        for p in &self.points {
            w.write_record([
                self.problem.to_string(),
                self.direction.to_string(),
                p.lambda.map(|l| l.to_string()).unwrap_or_default(),
                p.x.to_string(),
                p.y.to_string(),
                p.trivial.to_string(),
                p.witness.to_json(),
            ])?;
        }
        Ok(())
    }
}

pub fn write_curve_header<W: Write>(w: &mut csv::Writer<W>) -> csv::Result<()> {
    w.write_record(["problem", "direction", "lambda", "x", "y", "trivial", "witness_json"])
}

/// `B(x)`: the upper curve at `x`.
pub fn bottleneck_value(curve: &BoundaryCurve, x: f64) -> Result<Interpolated> {
    if curve.direction != Direction::Upper {
        return Err(SweepError::WrongDirection {
            expected: Direction::Upper,
            found: curve.direction,
        });
    }
    curve.interpolate(x)
}

/// `F(x)`: the lower curve at `x`.
pub fn funnel_value(curve: &BoundaryCurve, x: f64) -> Result<Interpolated> {
    if curve.direction != Direction::Lower {
        return Err(SweepError::WrongDirection {
            expected: Direction::Lower,
            found: curve.direction,
        });
    }
    curve.interpolate(x)
}

/// `(x, y) ↦ (h(q) - x, h(Tq) - y)` for entropy-kernel curves. Applying it
/// twice gives back the original curve.
pub fn transform_entropy_frame(
    curve: &BoundaryCurve,
    q: &Distribution,
    channel: &Channel,
) -> Result<BoundaryCurve> {
    if curve.kernels != (DivergenceKernel::Entropy, DivergenceKernel::Entropy) {
        return Err(SweepError::WrongFrame(format!(
            "entropy-frame transform needs entropy kernels, got {}/{}",
            curve.kernels.0, curve.kernels.1
        )));
    }
    let target = match curve.frame {
        Frame::Raw => Frame::EntropyComplement,
        Frame::EntropyComplement => Frame::Raw,
        Frame::ArimotoEntropy { .. } => {
            return Err(SweepError::WrongFrame("Arimoto-frame curve".into()))
        }
    };
    let s = curve.units.per_nat();
    let hx = s * entropy(q);
    let hy = s * entropy(&channel.push_forward(q)?);
    Ok(curve.mapped(target, |x, y| (hx - x, hy - y)))
}

/// `f`, `g`, `T` and `q` on a fixed lattice, with `f` and `g` tabulated once.
#[derive(Debug, Clone)]
pub struct BoundaryProblem {
    kernels: (DivergenceKernel, DivergenceKernel),
    f: SimplexFunctional,
    g: SimplexFunctional,
    channel: Channel,
    marginal: Distribution,
    q_index: usize,
    base: PhiGraph,
}

impl BoundaryProblem {
    /// Snaps `q` to the lattice (default resolution if `None`) and resolves
    /// divergence references against the snapped `q` and `T q`.
    pub fn new(
        f_kernel: DivergenceKernel,
        g_kernel: DivergenceKernel,
        channel: &Channel,
        q: &Distribution,
        resolution: Option<u32>,
    ) -> Result<Self> {
        let m = q.len();
        if channel.inputs() != m {
            return Err(ProbError::DimensionMismatch(channel.inputs(), m).into());
        }
        let n = match resolution {
            Some(n) => n,
            None => default_resolution(m).ok_or(SweepError::NoDefaultResolution(m))?,
        };
        let lattice = Arc::new(SimplexLattice::new(m, n)?);
        Self::on_lattice(f_kernel, g_kernel, channel, q, lattice)
    }

    pub fn on_lattice(
        f_kernel: DivergenceKernel,
        g_kernel: DivergenceKernel,
        channel: &Channel,
        q: &Distribution,
        lattice: Arc<SimplexLattice>,
    ) -> Result<Self> {
        let q_index = lattice.snap(q)?;
        if let Some(symbol) = (0..q.len()).find(|&i| q.probs()[i] > 0.0 && lattice.counts(q_index)[i] == 0) {
            return Err(SweepError::SupportLost {
                resolution: lattice.resolution(),
                symbol,
            });
        }
        let marginal = lattice.point(q_index);
        let f = SimplexFunctional::resolve(f_kernel, &marginal)?;
        let g = SimplexFunctional::resolve(g_kernel, &channel.push_forward(&marginal)?)?;
        let base = build_phi_graph(&f, &g, channel, 0.0, lattice)?;
        Ok(BoundaryProblem {
            kernels: (f_kernel, g_kernel),
            f,
            g,
            channel: channel.clone(),
            marginal,
            q_index,
            base,
        })
    }

    pub fn marginal(&self) -> &Distribution {
        &self.marginal
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn kernels(&self) -> (DivergenceKernel, DivergenceKernel) {
        self.kernels
    }

    pub fn functionals(&self) -> (&SimplexFunctional, &SimplexFunctional) {
        (&self.f, &self.g)
    }

    pub fn lattice(&self) -> &SimplexLattice {
        self.base.lattice()
    }

    pub fn resolution(&self) -> u32 {
        self.lattice().resolution()
    }

    pub fn graph(&self, lambda: f64) -> PhiGraph {
        self.base.with_lambda(lambda)
    }

    pub fn evaluate(&self, witness: &WitnessChannel) -> Result<(f64, f64)> {
        witness.evaluate(&self.f, &self.g, &self.channel)
    }

    /// `(f(q), g(Tq))` from the constant `W`.
    pub fn trivial_point(&self) -> BoundaryPoint {
        BoundaryPoint {
            lambda: None,
            x: self.base.x_values()[self.q_index],
            y: self.base.y_values()[self.q_index],
            witness: WitnessChannel::trivial(&self.marginal),
            trivial: true,
        }
    }

    /// The `W = X` endpoint.
    pub fn deterministic_point(&self) -> Result<BoundaryPoint> {
        let witness = WitnessChannel::deterministic(&self.marginal)?;
        let (x, y) = self.evaluate(&witness)?;
        Ok(BoundaryPoint {
            lambda: None,
            x,
            y,
            witness,
            trivial: false,
        })
    }

    /// The supporting point of slope `λ`: trivial when `φ(q, λ)` touches its
    /// envelope, otherwise the mixture of the envelope's support atoms.
    pub fn boundary_point_at_lambda(&self, lambda: f64, direction: Direction) -> Result<BoundaryPoint> {
        if !lambda.is_finite() {
            return Err(SweepError::NonFiniteLambda(lambda));
        }
        let graph = self.base.with_lambda(lambda);
        let pe = envelope::envelope_at_point(&graph, self.q_index, direction)?;
        let gap = (graph.values()[self.q_index] - pe.value).abs();
        if pe.touches || gap <= EPS_ENV {
            let mut p = self.trivial_point();
            p.lambda = Some(lambda);
            return Ok(p);
        }
        let lattice = graph.lattice();
        let mut x = 0.0;
        let mut y = 0.0;
        let mut atoms = Vec::with_capacity(pe.support.len());
        for (&j, &w) in pe.support.indices.iter().zip(&pe.support.weights) {
            x += w * self.base.x_values()[j];
            y += w * self.base.y_values()[j];
            atoms.push(Atom {
                weight: w,
                conditional: lattice.point(j),
            });
        }
        Ok(BoundaryPoint {
            lambda: Some(lambda),
            x,
            y,
            witness: WitnessChannel::new(atoms, self.marginal.clone())?,
            trivial: false,
        })
    }

    /// Points at every slope in `lambdas` plus both forced endpoints, sorted
    /// by `x` with duplicates merged toward the extremal `y`.
    pub fn sweep(&self, direction: Direction, lambdas: &[f64]) -> Result<BoundaryCurve> {
        if lambdas.is_empty() {
            return Err(SweepError::EmptyGrid);
        }
        let swept: Vec<BoundaryPoint> = lambdas
            .par_iter()
            .map(|&l| self.boundary_point_at_lambda(l, direction))
            .collect::<Result<_>>()?;
        let mut points = vec![self.trivial_point(), self.deterministic_point()?];
        points.extend(swept);
        points.sort_by(|a, b| a.x.total_cmp(&b.x));

        let better = |a: &BoundaryPoint, b: &BoundaryPoint| match direction {
            Direction::Lower => a.y < b.y,
            Direction::Upper => a.y > b.y,
        };
        let mut merged: Vec<BoundaryPoint> = Vec::with_capacity(points.len());
        for p in points {
            match merged.last_mut() {
                Some(last) if (p.x - last.x).abs() <= DEDUP_TOL * last.x.abs().max(1.0) => {
                    // Prefer the forced endpoints' exact witnesses on ties.
                    if better(&p, last) && (p.y - last.y).abs() > DEDUP_TOL {
                        *last = p;
                    }
                }
                _ => merged.push(p),
            }
        }
        Ok(BoundaryCurve {
            direction,
            problem: ProblemTag::infer(self.kernels.0, self.kernels.1, direction),
            frame: Frame::Raw,
            units: Units::Nats,
            kernels: self.kernels,
            marginal: self.marginal.clone(),
            points: merged,
        })
    }

    /// Sweep with [`default_lambda_grid`].
    pub fn sweep_default(
        &self,
        direction: Direction,
        steps: usize,
        landmarks: &[f64],
    ) -> Result<BoundaryCurve> {
        let grid = self.default_lambda_grid(direction, steps, landmarks)?;
        self.sweep(direction, &grid)
    }

    /// `steps` slopes spaced geometrically over `[λ_max / 1000, λ_max]`, plus
    /// 0, the endpoint chord slope and `landmarks`. `λ_max` starts at twice
    /// the chord slope and is doubled until it reaches the far endpoint
    /// (maximal `x` for lower curves, minimal `x` for upper ones).
    pub fn default_lambda_grid(
        &self,
        direction: Direction,
        steps: usize,
        landmarks: &[f64],
    ) -> Result<Vec<f64>> {
        if steps == 0 {
            return Err(SweepError::EmptyGrid);
        }
        let a = self.trivial_point();
        let b = self.deterministic_point()?;
        let chord = if (a.x - b.x).abs() > DEDUP_TOL {
            ((a.y - b.y) / (a.x - b.x)).abs()
        } else {
            0.0
        };
        let far_x = match direction {
            Direction::Lower => a.x.max(b.x),
            Direction::Upper => a.x.min(b.x),
        };
        let mut lambda_max = if chord > 0.0 { 2.0 * chord } else { 1.0 };
        for _ in 0..60 {
            let p = self.boundary_point_at_lambda(lambda_max, direction)?;
            if (p.x - far_x).abs() <= 1e-9 * far_x.abs().max(1.0) {
                break;
            }
            lambda_max *= 2.0;
        }
        let lo = lambda_max * 1e-3;
        let mut grid: Vec<f64> = if steps == 1 {
            vec![lambda_max]
        } else {
            let r = (lambda_max / lo).ln() / (steps - 1) as f64;
            (0..steps).map(|i| lo * (r * i as f64).exp()).collect()
        };
        grid.push(0.0);
        grid.push(chord);
        grid.extend(landmarks.iter().copied().filter(|l| l.is_finite() && *l >= 0.0));
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(grid)
    }

    /// The witness of a boundary point as a matched channel, when there is
    /// one. Only meaningful when `f` and `g` do not depend on `q`.
    pub fn matched_channel_extract(&self, point: &BoundaryPoint) -> Result<Option<WitnessChannel>> {
        self.require_marginal_free()?;
        Ok((point.witness.len() >= 2).then(|| point.witness.clone()))
    }

    fn require_marginal_free(&self) -> Result<()> {
        for (k, func) in [(self.kernels.0, &self.f), (self.kernels.1, &self.g)] {
            if func.depends_on_reference() {
                return Err(SweepError::ReferenceDependent(k));
            }
        }
        Ok(())
    }

    /// Reweights the atoms of `point`'s witness to a new marginal `q'`
    /// (snapped to this lattice) and checks that the result still lies on the
    /// `direction` envelope's supporting line of the same slope for `q'`.
    pub fn matched_channel_invariance_check(
        &self,
        point: &BoundaryPoint,
        direction: Direction,
        q_prime: &Distribution,
    ) -> Result<InvarianceReport> {
        self.require_marginal_free()?;
        if point.witness.len() < 2 {
            return Err(SweepError::SingleAtom);
        }
        let lambda = point.lambda.ok_or(SweepError::NoSlope)?;
        let shifted = BoundaryProblem::on_lattice(
            self.kernels.0,
            self.kernels.1,
            &self.channel,
            q_prime,
            self.base.lattice_arc(),
        )?;
        let target = shifted.marginal.probs();
        let atoms = point.witness.conditionals();
        let refs: Vec<&[f64]> = atoms.iter().map(|c| c.probs()).collect();
        let weights = convex_weights(&refs, target, MIXTURE_TOL)
            .ok_or_else(|| SweepError::NotCovered(target.to_vec()))?;
        let witness = WitnessChannel::new(
            weights
                .iter()
                .zip(atoms)
                .map(|(&weight, conditional)| Atom {
                    weight,
                    conditional,
                })
                .collect(),
            shifted.marginal.clone(),
        )?;
        let (x, y) = shifted.evaluate(&witness)?;
        let graph = shifted.base.with_lambda(lambda);
        let env = envelope::envelope_at_point(&graph, shifted.q_index, direction)?;
        let deviation = (y - lambda * x - env.value).abs();
        if deviation > SUPPORT_LINE_TOL {
            return Err(SweepError::NotOnBoundary { lambda, deviation });
        }
        Ok(InvarianceReport {
            point: BoundaryPoint {
                lambda: Some(lambda),
                x,
                y,
                trivial: witness.len() == 1,
                witness,
            },
            deviation,
        })
    }
}

#[derive(Debug, Clone)]
pub struct InvarianceReport {
    /// The reweighted point for `q'`.
    pub point: BoundaryPoint,
    /// `|y' - λ x' - envelope(q')|`
    pub deviation: f64,
}
