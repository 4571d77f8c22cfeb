//! `bottleneck-lab`: boundary curves, closed-form tables and verification
//! suites from the command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bottleneck_core::closed_forms::{
    closed_form_table, write_table_csv, BscInstance, ClosedFormError, ClosedFormLaw,
};
use bottleneck_core::envelope::{Direction, EnvelopeError};
use bottleneck_core::prob::{
    decompose_joint, Channel, DivergenceKernel, Distribution, JointDistribution, ProbError,
};
use bottleneck_core::sweep::{write_curve_header, BoundaryProblem, SweepError, Units};
use bottleneck_core::verify::{entropy_landmarks, run_suite, Suite};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const THREADS_ENV: &str = "BOTTLENECK_LAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Failed(_) | CliError::Io(_) => EXIT_FAILED,
        }
    }
}

impl From<ProbError> for CliError {
    fn from(e: ProbError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<EnvelopeError> for CliError {
    fn from(e: EnvelopeError) -> Self {
        match e {
            EnvelopeError::Dimension(_) | EnvelopeError::LatticeTooLarge { .. } => {
                CliError::Infeasible(e.to_string())
            }
            EnvelopeError::Resolution(_) | EnvelopeError::Mismatch(..) => {
                CliError::Invalid(e.to_string())
            }
            EnvelopeError::Evaluation { .. } | EnvelopeError::Solver(_) => {
                CliError::Failed(e.to_string())
            }
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Prob(p) => p.into(),
            SweepError::Envelope(p) => p.into(),
            SweepError::NoDefaultResolution(_) => CliError::Infeasible(e.to_string()),
            SweepError::SupportLost { .. } | SweepError::WrongFrame(_) => {
                CliError::Invalid(e.to_string())
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ClosedFormError> for CliError {
    fn from(e: ClosedFormError) -> Self {
        match e {
            ClosedFormError::Witness(w) => w.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

/// Written next to every output file as `<output>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the input file, or of the `--bsc` argument.
    pub input_digest: String,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    pub seed: u64,
}

impl RunManifest {
    fn new(command: &str, input_digest: String, parameters: BTreeMap<String, Value>) -> Self {
        RunManifest {
            command: command.into(),
            input_digest,
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: 0,
        }
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Debug, Parser)]
#[command(name = "bottleneck-lab", version, about = "Boundaries of (I_f(W;X), I_g(W;Y)) regions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep a boundary curve and write it as CSV.
    Curve(CurveArgs),
    /// Tabulate a closed-form binary symmetric boundary.
    ClosedForm(ClosedFormArgs),
    /// Run a verification suite and report each check.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    Ib,
    Pf,
    Eb,
    Epf,
    Arimoto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Lower,
    Upper,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    Finfo,
    Entropy,
    #[value(name = "K")]
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitsArg {
    Nats,
    Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawArg {
    Mgl,
    Mrgl,
    ArimotoMgl,
    ArimotoMrgl,
}

impl From<LawArg> for ClosedFormLaw {
    fn from(l: LawArg) -> Self {
        match l {
            LawArg::Mgl => ClosedFormLaw::Mgl,
            LawArg::Mrgl => ClosedFormLaw::Mrgl,
            LawArg::ArimotoMgl => ClosedFormLaw::ArimotoMgl,
            LawArg::ArimotoMrgl => ClosedFormLaw::ArimotoMrgl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Mgl,
    Mrgl,
    Arimoto,
    OracleCross,
    Matched,
    Chi2,
    Properties,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Mgl => Suite::Mgl,
            SuiteArg::Mrgl => Suite::Mrgl,
            SuiteArg::Arimoto => Suite::Arimoto,
            SuiteArg::OracleCross => Suite::OracleCross,
            SuiteArg::Matched => Suite::Matched,
            SuiteArg::Chi2 => Suite::Chi2,
            SuiteArg::Properties => Suite::Properties,
        }
    }
}

/// `q,delta` for a uniform-crossover binary channel with `P(X = 1) = q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BscArg {
    pub q: f64,
    pub delta: f64,
}

fn parse_bsc(s: &str) -> Result<BscArg, String> {
    let (q, d) = s
        .split_once(',')
        .ok_or_else(|| format!("expected q,delta, got {s:?}"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| format!("{v:?}: {e}"))
    };
    Ok(BscArg {
        q: num(q)?,
        delta: num(d)?,
    })
}

impl BscArg {
    fn spec(&self) -> String {
        format!("{},{}", self.q, self.delta)
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["input", "bsc"]))]
pub struct CurveArgs {
    /// Joint distribution as JSON: {"p_xy": [[..]]} or {"q": [..], "T": [[..]]}.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Binary symmetric channel shorthand: P(X=1),crossover.
    #[arg(long, value_parser = parse_bsc)]
    pub bsc: Option<BscArg>,
    #[arg(long, value_enum)]
    pub problem: ProblemArg,
    /// Order of the Arimoto problem (at least 2).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Defaults to the boundary the problem names; `both` for arimoto.
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub lambda_steps: u64,
    /// Lattice resolution N; defaults by alphabet size.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub resolution: Option<u32>,
    /// Defaults to finfo, or K for arimoto.
    #[arg(long, value_enum)]
    pub frame: Option<FrameArg>,
    #[arg(long, value_enum, default_value_t = UnitsArg::Nats)]
    pub units: UnitsArg,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClosedFormArgs {
    #[arg(long, value_parser = parse_bsc)]
    pub bsc: BscArg,
    #[arg(long, value_enum)]
    pub law: LawArg,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u64).range(2..))]
    pub points: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: SuiteArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_INVALID,
            };
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Curve(a) => cmd_curve(a),
        Command::ClosedForm(a) => cmd_closed_form(a),
        Command::Verify(a) => cmd_verify(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Invalid(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A pool may already exist when `run` is called repeatedly in-process.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct LoadedInput {
    marginal: Distribution,
    channel: Channel,
    digest: String,
    source: Value,
    bsc: Option<BscArg>,
}

fn load_input(input: Option<&Path>, bsc: Option<BscArg>) -> Result<LoadedInput, CliError> {
    match (input, bsc) {
        (Some(path), None) => {
            let bytes = fs::read(path)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            let joint = JointDistribution::from_json_str(text)?;
            let d = decompose_joint(&joint)?;
            Ok(LoadedInput {
                marginal: d.marginal,
                channel: d.channel,
                digest: sha256_hex(&bytes),
                source: json!({ "input": path.display().to_string() }),
                bsc: None,
            })
        }
        (None, Some(b)) => {
            let spec = b.spec();
            Ok(LoadedInput {
                marginal: Distribution::binary(b.q)?,
                channel: Channel::bsc(b.delta)?,
                digest: sha256_hex(format!("bsc:{spec}").as_bytes()),
                source: json!({ "bsc": spec }),
                bsc: Some(b),
            })
        }
        _ => Err(CliError::Invalid("give exactly one of --input and --bsc".into())),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn write_outputs(output: &Path, csv: &[u8], manifest: &RunManifest) -> Result<(), CliError> {
    let mut json = serde_json::to_vec_pretty(manifest)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    json.push(b'\n');
    write_atomic(output, csv)?;
    write_atomic(&manifest_path(output), &json)
}

fn default_direction(problem: ProblemArg, frame: FrameArg) -> DirectionArg {
    // In conditional-entropy coordinates the bottleneck is the lower curve.
    let flip = frame == FrameArg::Entropy;
    match (problem, flip) {
        (ProblemArg::Ib, false) | (ProblemArg::Pf, true) | (ProblemArg::Eb, _) => DirectionArg::Upper,
        (ProblemArg::Ib, true) | (ProblemArg::Pf, false) | (ProblemArg::Epf, _) => DirectionArg::Lower,
        (ProblemArg::Arimoto, _) => DirectionArg::Both,
    }
}

fn directions(d: DirectionArg) -> Vec<Direction> {
    match d {
        DirectionArg::Lower => vec![Direction::Lower],
        DirectionArg::Upper => vec![Direction::Upper],
        DirectionArg::Both => vec![Direction::Lower, Direction::Upper],
    }
}

fn arg_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

pub fn cmd_curve(a: &CurveArgs) -> Result<i32, CliError> {
    let input = load_input(a.input.as_deref(), a.bsc)?;
    let m = input.marginal.len();
    let frame = a.frame.unwrap_or(if a.problem == ProblemArg::Arimoto {
        FrameArg::K
    } else {
        FrameArg::Finfo
    });
    if a.beta.is_some() && a.problem != ProblemArg::Arimoto {
        return Err(CliError::Invalid("--beta only applies to --problem arimoto".into()));
    }
    let kernel = match (a.problem, frame) {
        (ProblemArg::Ib | ProblemArg::Pf, FrameArg::Finfo) => DivergenceKernel::KullbackLeibler,
        (ProblemArg::Ib | ProblemArg::Pf, FrameArg::Entropy) => DivergenceKernel::Entropy,
        (ProblemArg::Eb | ProblemArg::Epf, FrameArg::Finfo) => DivergenceKernel::ChiSquared,
        (ProblemArg::Arimoto, FrameArg::K | FrameArg::Entropy) => {
            let beta = a
                .beta
                .ok_or_else(|| CliError::Invalid("--problem arimoto needs --beta".into()))?;
            DivergenceKernel::norm_beta(beta)?
        }
        (p, f) => {
            return Err(CliError::Invalid(format!(
                "frame {} does not apply to problem {}",
                arg_name(&f),
                arg_name(&p)
            )))
        }
    };
    if a.problem == ProblemArg::Arimoto && m > 2 {
        return Err(CliError::Infeasible(format!(
            "arimoto boundaries are binary only, input has {m} symbols"
        )));
    }
    let direction = a.direction.unwrap_or(default_direction(a.problem, frame));
    let problem = BoundaryProblem::new(kernel, kernel, &input.channel, &input.marginal, a.resolution)?;

    let landmarks = match (input.bsc, kernel) {
        (Some(b), DivergenceKernel::Entropy | DivergenceKernel::KullbackLeibler) => {
            entropy_landmarks(b.delta)
        }
        _ => Vec::new(),
    };
    let units = match a.units {
        UnitsArg::Nats => Units::Nats,
        UnitsArg::Bits => Units::Bits,
    };

    let mut csv_writer = csv::Writer::from_writer(Vec::new());
    write_curve_header(&mut csv_writer).map_err(|e| CliError::Failed(e.to_string()))?;
    for dir in directions(direction) {
        let mut curve = problem.sweep_default(dir, a.lambda_steps as usize, &landmarks)?;
        if a.problem == ProblemArg::Arimoto && frame == FrameArg::Entropy {
            curve = curve.to_arimoto_entropy()?;
        }
        curve = curve.in_units(units)?;
        curve
            .write_rows(&mut csv_writer)
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let csv = csv_writer
        .into_inner()
        .map_err(|e| CliError::Failed(e.to_string()))?;

    let mut params = BTreeMap::new();
    if let Value::Object(src) = input.source {
        params.extend(src);
    }
    params.insert("problem".into(), json!(arg_name(&a.problem)));
    params.insert("beta".into(), json!(a.beta));
    params.insert("direction".into(), json!(arg_name(&direction)));
    params.insert("lambda_steps".into(), json!(a.lambda_steps));
    params.insert("resolution".into(), json!(problem.resolution()));
    params.insert("frame".into(), json!(arg_name(&frame)));
    params.insert("units".into(), json!(arg_name(&a.units)));
    params.insert("snapped_q".into(), json!(problem.marginal().probs()));
    params.insert("landmarks".into(), json!(landmarks));
    let manifest = RunManifest::new("curve", input.digest, params);
    write_outputs(&a.output, &csv, &manifest)?;
    Ok(EXIT_OK)
}

pub fn cmd_closed_form(a: &ClosedFormArgs) -> Result<i32, CliError> {
    let law: ClosedFormLaw = a.law.into();
    if law.needs_beta() {
        match a.beta {
            None => return Err(CliError::Invalid(format!("--law {} needs --beta", law.as_str()))),
            Some(b) if !(b >= 2.0 && b.is_finite()) => {
                return Err(CliError::Invalid(format!("beta must be at least 2, got {b}")))
            }
            _ => {}
        }
    } else if a.beta.is_some() {
        return Err(CliError::Invalid(format!("--law {} takes no --beta", law.as_str())));
    }
    let inst = BscInstance::new(a.bsc.q, a.bsc.delta)?;
    let rows = closed_form_table(law, &inst, a.beta, a.points as usize)?;
    let mut csv = Vec::new();
    write_table_csv(&rows, &mut csv).map_err(|e| CliError::Failed(e.to_string()))?;

    let spec = a.bsc.spec();
    let mut params = BTreeMap::new();
    params.insert("bsc".into(), json!(spec));
    params.insert("law".into(), json!(law.as_str()));
    params.insert("beta".into(), json!(a.beta));
    params.insert("points".into(), json!(a.points));
    let manifest = RunManifest::new("closed-form", sha256_hex(format!("bsc:{spec}").as_bytes()), params);
    write_outputs(&a.output, &csv, &manifest)?;
    Ok(EXIT_OK)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32, CliError> {
    let report = run_suite(a.suite.into(), a.seed)?;
    println!("{report}");
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILED })
}
