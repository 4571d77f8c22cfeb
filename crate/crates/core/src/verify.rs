//! Verification suites: sweeps checked against closed forms, the oracle,
//! matched-channel invariance, χ² endpoints and randomized properties.

use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closed_forms::{
    arimoto_mgl, arimoto_mr_gerber, mgl, mr_gerber, mr_gerber_param, BscInstance,
};
use crate::envelope::{
    build_phi_graph, envelope_general, lower_envelope_1d, upper_envelope_1d, Direction,
    EnvelopeResult, PhiGraph, SimplexLattice,
};
use crate::oracle::oracle_exhaustive_binary;
use crate::prob::{
    binary_entropy, f_information, Channel, DivergenceKernel, Distribution, JointDistribution,
    SimplexFunctional,
};
use crate::sweep::{
    same_atom_set, BoundaryCurve, BoundaryProblem, SweepError, Units, DEFAULT_LAMBDA_STEPS,
};

const CLOSED_FORM_TOL: f64 = 2e-3;
const ORACLE_TOL: f64 = 5e-3;
const MATCHED_TOL: f64 = 5e-3;
const CHI2_ENDPOINT_TOL: f64 = 1e-6;
const PROPERTY_TOL: f64 = 1e-9;
const DPI_TOL: f64 = 1e-7;

/// Instance shared by the entropy suites: `q = P(X = 1) = 0.1` through a
/// BSC with crossover 0.1.
const BSC_Q: f64 = 0.1;
const BSC_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Mgl,
    Mrgl,
    Arimoto,
    OracleCross,
    Matched,
    Chi2,
    Properties,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Mgl,
        Suite::Mrgl,
        Suite::Arimoto,
        Suite::OracleCross,
        Suite::Matched,
        Suite::Chi2,
        Suite::Properties,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Mgl => "mgl",
            Suite::Mrgl => "mrgl",
            Suite::Arimoto => "arimoto",
            Suite::OracleCross => "oracle-cross",
            Suite::Matched => "matched",
            Suite::Chi2 => "chi2",
            Suite::Properties => "properties",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    /// Passes when `measured ≤ tolerance`.
    fn at_most(name: impl Into<String>, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail: detail.into(),
        }
    }

    fn count(name: impl Into<String>, violations: usize, detail: impl Into<String>) -> Self {
        CheckReport::at_most(name, violations as f64, 0.0, detail)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: measured {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, "; {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<CheckReport>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        write!(
            f,
            "suite {}: {} in {:.2} s",
            self.suite.as_str(),
            if self.passed() { "PASS" } else { "FAIL" },
            self.seconds
        )
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport, SweepError> {
    let start = Instant::now();
    let checks = match suite {
        Suite::Mgl => suite_mgl()?,
        Suite::Mrgl => suite_mrgl()?,
        Suite::Arimoto => suite_arimoto()?,
        Suite::OracleCross => suite_oracle_cross()?,
        Suite::Matched => suite_matched()?,
        Suite::Chi2 => suite_chi2()?,
        Suite::Properties => suite_properties(seed)?,
    };
    Ok(SuiteReport {
        suite,
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn bsc_problem(kernel: DivergenceKernel, q: f64, delta: f64) -> Result<BoundaryProblem, SweepError> {
    BoundaryProblem::new(
        kernel,
        kernel,
        &Channel::bsc(delta)?,
        &Distribution::binary(q)?,
        None,
    )
}

/// Slope at which `φ(·, λ)` becomes convex for entropy kernels on a BSC.
pub fn bsc_convexity_slope(delta: f64) -> f64 {
    (1.0 - 2.0 * delta) * (1.0 - 2.0 * delta)
}

fn entropy_curve(direction: Direction) -> Result<(BoundaryCurve, BscInstance), SweepError> {
    let pr = bsc_problem(DivergenceKernel::Entropy, BSC_Q, BSC_DELTA)?;
    let landmarks = entropy_landmarks(BSC_DELTA);
    let curve = pr
        .sweep_default(direction, DEFAULT_LAMBDA_STEPS, &landmarks)?
        .in_units(Units::Bits)?;
    let inst = BscInstance::new(pr.marginal().probs()[1], BSC_DELTA).expect("valid instance");
    Ok((curve, inst))
}

/// Slopes worth including for entropy kernels on a BSC: where `φ` turns
/// convex, and the slope of the upper boundary's linear piece.
pub fn entropy_landmarks(delta: f64) -> Vec<f64> {
    vec![
        bsc_convexity_slope(delta),
        1.0 - binary_entropy(delta).expect("delta in [0, 1]"),
    ]
}

fn snapped_note(inst: &BscInstance) -> String {
    format!("snapped q = {}", inst.q())
}

fn suite_mgl() -> Result<Vec<CheckReport>, SweepError> {
    let (curve, inst) = entropy_curve(Direction::Lower)?;
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for k in 0..=100 {
        let x = inst.max_x() * k as f64 / 100.0;
        let d = (curve.interpolate(x)?.value - mgl(&inst, x).expect("x in domain")).abs();
        if d > worst {
            worst = d;
            at = x;
        }
    }
    Ok(vec![CheckReport::at_most(
        "lower entropy sweep vs Mrs. Gerber's Lemma (bits)",
        worst,
        CLOSED_FORM_TOL,
        format!("worst at x = {at:.4}; {}", snapped_note(&inst)),
    )])
}

fn suite_mrgl() -> Result<Vec<CheckReport>, SweepError> {
    let (curve, inst) = entropy_curve(Direction::Upper)?;
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for k in 0..=100 {
        let alpha = k as f64 / 100.0;
        let p = mr_gerber_param(&inst, alpha).expect("alpha in [0, 1]");
        let d = (curve.interpolate(p.x)?.value - p.y).abs();
        if d > worst {
            worst = d;
            at = alpha;
        }
    }
    Ok(vec![CheckReport::at_most(
        "upper entropy sweep vs Mr. Gerber's Lemma (bits)",
        worst,
        CLOSED_FORM_TOL,
        format!("worst at alpha = {at:.2}; {}", snapped_note(&inst)),
    )])
}

fn suite_arimoto() -> Result<Vec<CheckReport>, SweepError> {
    let (q, delta, beta) = (0.4, 0.2, 2.0);
    let pr = bsc_problem(DivergenceKernel::NormBeta(beta), q, delta)?;
    let inst = BscInstance::new(pr.marginal().probs()[1], delta).expect("valid instance");
    let lower = pr.sweep_default(Direction::Lower, DEFAULT_LAMBDA_STEPS, &[])?;
    let upper = pr.sweep_default(Direction::Upper, DEFAULT_LAMBDA_STEPS, &[])?;
    let mut worst_lo = 0.0f64;
    let mut worst_up = 0.0f64;
    for k in 0..=100 {
        let t = k as f64 / 100.0;
        let (x, y) = arimoto_mgl(&inst, beta, inst.q() * t).expect("valid parameters");
        worst_lo = worst_lo.max((lower.interpolate(x)?.value - y).abs());
        let (x, y) = arimoto_mr_gerber(&inst, beta, t).expect("valid parameters");
        worst_up = worst_up.max((upper.interpolate(x)?.value - y).abs());
    }
    Ok(vec![
        CheckReport::at_most(
            "lower K-frame sweep vs Arimoto's Mrs. Gerber's Lemma, beta = 2",
            worst_lo,
            CLOSED_FORM_TOL,
            snapped_note(&inst),
        ),
        CheckReport::at_most(
            "upper K-frame sweep vs Arimoto's Mr. Gerber's Lemma, beta = 2",
            worst_up,
            CLOSED_FORM_TOL,
            snapped_note(&inst),
        ),
    ])
}

/// Resolution and atom budget of the exhaustive oracle in the cross check.
pub const ORACLE_CROSS_RESOLUTION: u32 = 512;
pub const ORACLE_CROSS_BUDGET: usize = 3;

fn suite_oracle_cross() -> Result<Vec<CheckReport>, SweepError> {
    let mut checks = Vec::new();
    for kernel in [DivergenceKernel::Entropy, DivergenceKernel::ChiSquared] {
        let pr = bsc_problem(kernel, BSC_Q, BSC_DELTA)?;
        let (landmarks, units) = match kernel {
            DivergenceKernel::Entropy => (entropy_landmarks(BSC_DELTA), Units::Bits),
            _ => (vec![], Units::Nats),
        };
        let scale = if units == Units::Bits { 1.0 / LN_2 } else { 1.0 };
        let lower = pr.sweep_default(Direction::Lower, DEFAULT_LAMBDA_STEPS, &landmarks)?;
        let upper = pr.sweep_default(Direction::Upper, DEFAULT_LAMBDA_STEPS, &landmarks)?;
        let x_max = lower.x_range().expect("non-empty").1.min(match kernel {
            DivergenceKernel::Entropy => binary_entropy(BSC_Q)? * LN_2,
            _ => 1.0,
        });
        let xs: Vec<f64> = (0..=20).map(|k| x_max * k as f64 / 20.0).collect();
        let run = |dir| {
            oracle_exhaustive_binary(
                kernel,
                kernel,
                BSC_DELTA,
                BSC_Q,
                &xs,
                dir,
                ORACLE_CROSS_RESOLUTION,
                ORACLE_CROSS_BUDGET,
            )
        };
        let o_lo = run(Direction::Lower)?;
        let o_up = run(Direction::Upper)?;

        let infeasible = o_lo.iter().chain(&o_up).filter(|r| !r.feasible).count();
        checks.push(CheckReport::count(
            format!("{kernel}: oracle finds a feasible witness at every x"),
            infeasible,
            "",
        ));
        let mut lo_gap = 0.0f64;
        let mut up_gap = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            // One-sided: the restricted oracle cannot beat the true boundary.
            lo_gap = lo_gap.max(scale * (lower.interpolate(x)?.value - o_lo[i].best_y));
            up_gap = up_gap.max(scale * (o_up[i].best_y - upper.interpolate(x)?.value));
        }
        checks.push(CheckReport::at_most(
            format!("{kernel}: oracle lower >= sweep lower - tol"),
            lo_gap.max(0.0),
            ORACLE_TOL,
            "",
        ));
        checks.push(CheckReport::at_most(
            format!("{kernel}: oracle upper <= sweep upper + tol"),
            up_gap.max(0.0),
            ORACLE_TOL,
            "",
        ));
        if kernel == DivergenceKernel::Entropy {
            let inst = BscInstance::new(BSC_Q, BSC_DELTA).expect("valid instance");
            let mut lo_cf = 0.0f64;
            let mut up_cf = 0.0f64;
            for (i, &x) in xs.iter().enumerate() {
                let xb = (x / LN_2).min(inst.max_x());
                lo_cf = lo_cf.max((o_lo[i].best_y / LN_2 - mgl(&inst, xb).expect("in domain")).abs());
                up_cf = up_cf.max((o_up[i].best_y / LN_2 - mr_gerber(&inst, xb).expect("in domain")).abs());
            }
            checks.push(CheckReport::at_most(
                "entropy: oracle lower vs Mrs. Gerber's Lemma (bits)",
                lo_cf,
                ORACLE_TOL,
                "",
            ));
            checks.push(CheckReport::at_most(
                "entropy: oracle upper vs Mr. Gerber's Lemma (bits)",
                up_cf,
                ORACLE_TOL,
                "",
            ));
        }
    }
    Ok(checks)
}

/// Perturbation applied to `q` in the matched-channel suite.
const MATCHED_SHIFT: f64 = 0.01;

fn suite_matched() -> Result<Vec<CheckReport>, SweepError> {
    let pr = bsc_problem(DivergenceKernel::Entropy, BSC_Q, BSC_DELTA)?;
    let landmarks = entropy_landmarks(BSC_DELTA);
    let curve = pr.sweep_default(Direction::Lower, DEFAULT_LAMBDA_STEPS, &landmarks)?;
    let q = pr.marginal().probs()[1];
    // Atoms {r, 1 - r} must cover both shifted marginals.
    let candidates: Vec<_> = curve
        .points
        .iter()
        .filter(|p| p.lambda.is_some() && !p.trivial && p.witness.len() >= 2)
        .filter(|p| {
            p.witness
                .atoms()
                .iter()
                .map(|a| a.conditional.probs()[1])
                .fold(1.0, f64::min)
                < q - MATCHED_SHIFT
        })
        .collect();
    let chosen: Vec<_> = if candidates.len() <= 10 {
        candidates
    } else {
        (0..10)
            .map(|i| candidates[i * (candidates.len() - 1) / 9])
            .collect()
    };

    let mut fresh = Vec::new();
    for shift in [-MATCHED_SHIFT, MATCHED_SHIFT] {
        let shifted = Distribution::binary(BSC_Q + shift)?;
        let pr2 = BoundaryProblem::new(
            DivergenceKernel::Entropy,
            DivergenceKernel::Entropy,
            pr.channel(),
            &shifted,
            Some(pr.resolution()),
        )?;
        let c2 = pr2.sweep_default(Direction::Lower, DEFAULT_LAMBDA_STEPS, &landmarks)?;
        fresh.push((shifted, pr2, c2));
    }

    let mut worst_value = 0.0f64;
    let mut worst_line = 0.0f64;
    let mut atom_mismatch = 0;
    let mut failures = 0;
    for point in &chosen {
        let lambda = point.lambda.expect("filtered");
        for (shifted, pr2, c2) in &fresh {
            match pr.matched_channel_invariance_check(point, Direction::Lower, shifted) {
                Ok(rep) => {
                    worst_line = worst_line.max(rep.deviation);
                    let v = c2.interpolate(rep.point.x)?.value;
                    worst_value = worst_value.max((v - rep.point.y).abs() / LN_2);
                    let direct = pr2.boundary_point_at_lambda(lambda, Direction::Lower)?;
                    if !same_atom_set(&direct.witness, &rep.point.witness) {
                        atom_mismatch += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    Ok(vec![
        CheckReport::count(
            "ten non-trivial points available",
            10usize.saturating_sub(chosen.len()),
            format!("{} usable points", chosen.len()),
        ),
        CheckReport::count("invariance checks completed", failures, ""),
        CheckReport::at_most(
            "reweighted points stay on the supporting line",
            worst_line,
            crate::sweep::SUPPORT_LINE_TOL,
            "",
        ),
        CheckReport::at_most(
            "reweighted points vs fresh sweep at q +/- 0.01 (bits)",
            worst_value,
            MATCHED_TOL,
            "",
        ),
        CheckReport::count("atom sets identical to a fresh solve", atom_mismatch, ""),
    ])
}

fn suite_chi2() -> Result<Vec<CheckReport>, SweepError> {
    let ternary = Channel::from_rows(&[
        vec![0.7, 0.2, 0.1],
        vec![0.2, 0.6, 0.3],
        vec![0.1, 0.2, 0.6],
    ])?;
    let instances = [
        ("BSC(0.1), q = 0.1", Channel::bsc(BSC_DELTA)?, Distribution::binary(BSC_Q)?),
        (
            "ternary channel",
            ternary,
            Distribution::new(vec![0.5, 0.3, 0.2])?,
        ),
    ];
    let chi = DivergenceKernel::ChiSquared;
    let mut checks = Vec::new();
    for (name, channel, q) in instances {
        let pr = BoundaryProblem::new(chi, chi, &channel, &q, None)?;
        let m = q.len() as f64;
        let joint = JointDistribution::from_marginal_channel(pr.marginal(), &channel)?;
        let chi_xy = f_information(chi, &joint)?;
        let eb = pr.sweep_default(Direction::Upper, DEFAULT_LAMBDA_STEPS, &[])?;
        let epf = pr.sweep_default(Direction::Lower, DEFAULT_LAMBDA_STEPS, &[])?;
        let end = eb.points.last().expect("non-empty");
        checks.push(CheckReport::at_most(
            format!("{name}: EB endpoint x = m - 1"),
            (end.x - (m - 1.0)).abs(),
            CHI2_ENDPOINT_TOL,
            "",
        ));
        checks.push(CheckReport::at_most(
            format!("{name}: EB at x = m - 1 equals chi2(X;Y)"),
            (eb.interpolate(m - 1.0)?.value - chi_xy).abs(),
            CHI2_ENDPOINT_TOL,
            format!("chi2(X;Y) = {chi_xy:.6}"),
        ));
        let over = eb
            .points
            .iter()
            .chain(&epf.points)
            .filter(|p| p.x > m - 1.0 + PROPERTY_TOL)
            .count();
        checks.push(CheckReport::count(format!("{name}: x <= m - 1"), over, ""));
        let origin = eb
            .points
            .first()
            .into_iter()
            .chain(epf.points.first())
            .map(|p| p.x.abs().max(p.y.abs()))
            .fold(0.0, f64::max);
        checks.push(CheckReport::at_most(
            format!("{name}: EB and EPF pass through the origin"),
            origin,
            PROPERTY_TOL,
            "",
        ));
    }
    Ok(checks)
}

/// Number of random instances in the property suite.
pub const PROPERTY_INSTANCES: usize = 200;

#[derive(Default)]
struct Violations {
    dominance: usize,
    idempotence: usize,
    convexity: usize,
    support: usize,
    witness: usize,
    curve_shape: usize,
    dpi: usize,
    cardinality: usize,
    sandwich: usize,
}

fn random_distribution(rng: &mut ChaCha8Rng, m: usize, floor: f64) -> Distribution {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(floor..1.0)).collect();
    let s: f64 = raw.iter().sum();
    Distribution::new(raw.iter().map(|v| v / s).collect()).expect("normalized")
}

fn random_kernels(rng: &mut ChaCha8Rng) -> (DivergenceKernel, DivergenceKernel) {
    use DivergenceKernel::*;
    const PAIRS: [(DivergenceKernel, DivergenceKernel); 7] = [
        (KullbackLeibler, KullbackLeibler),
        (ChiSquared, ChiSquared),
        (TotalVariation, TotalVariation),
        (Entropy, Entropy),
        (NormBeta(2.0), NormBeta(2.0)),
        (KullbackLeibler, ChiSquared),
        (ChiSquared, KullbackLeibler),
    ];
    PAIRS[rng.gen_range(0..PAIRS.len())]
}

fn envelope_any(graph: &PhiGraph, direction: Direction) -> Result<EnvelopeResult, SweepError> {
    Ok(match (graph.lattice().dimension(), direction) {
        (2, Direction::Lower) => lower_envelope_1d(graph)?,
        (2, Direction::Upper) => upper_envelope_1d(graph)?,
        _ => envelope_general(graph, direction)?,
    })
}

/// Unit moves `e_i - e_j` between lattice points.
fn lattice_lines(lattice: &SimplexLattice) -> Vec<(usize, usize, usize)> {
    let m = lattice.dimension();
    let mut out = Vec::new();
    for k in 0..lattice.len() {
        let c = lattice.counts(k);
        for i in 0..m {
            for j in 0..m {
                if i == j || c[j] == 0 || c[i] == 0 {
                    continue;
                }
                let mut fwd = c.to_vec();
                fwd[i] += 1;
                fwd[j] -= 1;
                let mut back = c.to_vec();
                back[i] -= 1;
                back[j] += 1;
                if let (Some(a), Some(b)) = (lattice.index_of(&fwd), lattice.index_of(&back)) {
                    out.push((b, k, a));
                }
            }
        }
    }
    out
}

fn check_envelope(
    graph: &PhiGraph,
    direction: Direction,
    v: &mut Violations,
) -> Result<(), SweepError> {
    let s = if direction == Direction::Lower { 1.0 } else { -1.0 };
    let env = envelope_any(graph, direction)?;
    let lattice = graph.lattice();
    let scale = graph.values().iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let tol = PROPERTY_TOL * scale;
    for i in 0..lattice.len() {
        if s * (env.envelope_values[i] - graph.values()[i]) > 1e-12 * scale {
            v.dominance += 1;
        }
        let sup = &env.supports[i];
        let wsum: f64 = sup.weights.iter().sum();
        let mut bary = vec![0.0; lattice.dimension()];
        let mut val = 0.0;
        for (&j, &w) in sup.indices.iter().zip(&sup.weights) {
            for (b, p) in bary.iter_mut().zip(lattice.probs(j)) {
                *b += w * p;
            }
            val += w * graph.values()[j];
        }
        let off = bary
            .iter()
            .zip(lattice.probs(i))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if sup.len() > lattice.dimension()
            || (wsum - 1.0).abs() > PROPERTY_TOL
            || off > PROPERTY_TOL
            || (val - env.envelope_values[i]).abs() > tol
            || sup.weights.iter().any(|&w| w < 0.0)
            || (env.touches[i] && sup.indices != [i])
        {
            v.support += 1;
        }
    }
    for (a, b, c) in lattice_lines(lattice) {
        let e = &env.envelope_values;
        if s * (e[a] + e[c] - 2.0 * e[b]) < -tol {
            v.convexity += 1;
        }
    }
    let again = PhiGraph::from_parts(
        graph.lattice_arc(),
        0.0,
        vec![0.0; lattice.len()],
        env.envelope_values.clone(),
    )?;
    let env2 = envelope_any(&again, direction)?;
    if env2
        .envelope_values
        .iter()
        .zip(&env.envelope_values)
        .any(|(a, b)| (a - b).abs() > tol)
    {
        v.idempotence += 1;
    }
    Ok(())
}

fn check_instance(seed: u64, v: &mut Violations) -> Result<(), SweepError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=3usize);
    let n = rng.gen_range(2..=3usize);
    let columns: Vec<Distribution> = (0..m).map(|_| random_distribution(&mut rng, n, 0.05)).collect();
    let channel = Channel::from_columns(columns)?;
    let q = random_distribution(&mut rng, m, 0.5);
    let (fk, gk) = random_kernels(&mut rng);
    let resolution = if m == 2 { 64 } else { 12 };

    let pr = BoundaryProblem::new(fk, gk, &channel, &q, Some(resolution))?;
    let lambda = rng.gen_range(0.0..2.0);
    let lattice = Arc::new(SimplexLattice::new(m, resolution)?);
    let (f, g) = pr.functionals();
    let graph = build_phi_graph(f, g, &channel, lambda, lattice)?;
    for dir in [Direction::Lower, Direction::Upper] {
        check_envelope(&graph, dir, v)?;
    }

    let dpi_bound = match g {
        SimplexFunctional::Divergence { kernel, .. } => {
            let joint = JointDistribution::from_marginal_channel(pr.marginal(), &channel)?;
            Some(f_information(*kernel, &joint)?)
        }
        _ => None,
    };
    for dir in [Direction::Lower, Direction::Upper] {
        let curve = pr.sweep_default(dir, 16, &[])?;
        for p in &curve.points {
            let (x, y) = pr.evaluate(&p.witness)?;
            if (x - p.x).abs() > PROPERTY_TOL || (y - p.y).abs() > PROPERTY_TOL {
                v.witness += 1;
            }
            if p.witness.len() > m + 1 {
                v.cardinality += 1;
            }
            if let Some(bound) = dpi_bound {
                if p.y > bound + DPI_TOL {
                    v.dpi += 1;
                }
            }
        }
        let s = if dir == Direction::Lower { 1.0 } else { -1.0 };
        for w in curve.points.windows(3) {
            let t = (w[1].x - w[0].x) / (w[2].x - w[0].x);
            let chord = w[0].y + t * (w[2].y - w[0].y);
            if s * (chord - w[1].y) < -PROPERTY_TOL {
                v.curve_shape += 1;
            }
        }
    }

    let inst = BscInstance::new(rng.gen_range(0.01..0.5), rng.gen_range(0.0..0.5)).expect("in range");
    let top = inst.max_x();
    for k in 0..=50 {
        let x = top * k as f64 / 50.0;
        let lo = mgl(&inst, x).expect("in domain");
        let up = mr_gerber(&inst, x).expect("in domain");
        let endpoint = k == 0 || k == 50;
        if lo > up + PROPERTY_TOL || (endpoint && (up - lo).abs() > PROPERTY_TOL) {
            v.sandwich += 1;
        }
    }
    Ok(())
}

fn suite_properties(seed: u64) -> Result<Vec<CheckReport>, SweepError> {
    let mut v = Violations::default();
    for i in 0..PROPERTY_INSTANCES as u64 {
        check_instance(seed.wrapping_mul(1_000_003).wrapping_add(i), &mut v)?;
    }
    let detail = format!("{PROPERTY_INSTANCES} random instances, m <= 3");
    Ok(vec![
        CheckReport::count("envelope dominance", v.dominance, detail.clone()),
        CheckReport::count("envelope idempotence", v.idempotence, detail.clone()),
        CheckReport::count("envelope convexity along lattice lines", v.convexity, detail.clone()),
        CheckReport::count("support sets reproduce point and value", v.support, detail.clone()),
        CheckReport::count("witnesses reproduce boundary points", v.witness, detail.clone()),
        CheckReport::count("lower curves convex, upper concave", v.curve_shape, detail.clone()),
        CheckReport::count("data-processing bound", v.dpi, detail.clone()),
        CheckReport::count("witness cardinality <= m + 1", v.cardinality, detail.clone()),
        CheckReport::count("mgl <= mr_gerber with equal endpoints", v.sandwich, detail),
    ])
}
