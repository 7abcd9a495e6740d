//! Commands behind the `divwitness` binary. Each command returns the text it
//! would print together with its exit code, so tests can drive them in-process.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use divwitness::channel::{validate_cptp, QuantumChannel};
use divwitness::discrimination::{guessing_trace, pguess, GuessingTrace, PGUESS_TOL};
use divwitness::divisibility::{
    check_classical, check_divisible_with, classical_chain_of, witness_search, ClassicalStep, PropagatorCertificate,
    Route, RouteUsed, Verdict, WitnessMode, WitnessOptions, WitnessReport, COND_LIMIT, EXACT_ACCEPT, EXACT_REJECT,
    RECOMPOSE_TOL, WITNESS_THRESHOLD,
};
use divwitness::dynamics::{generate, FamilyDescriptor};
use divwitness::io::{matrix_from_json, ChannelJson, EnsembleJson, MappingJson};
use divwitness::mapping::IDENTITY_TOL;
use divwitness::matrix::HermitianOperator;
use divwitness::{DynamicalMapping, Error};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SEED_ENV: &str = "DIVWITNESS_SEED";
pub const DEFAULT_SEED: u64 = 0;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence(_) | Error::Undecided(_) | Error::Internal(_) | Error::NonFinite => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Printed text plus the process exit code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub output: String,
    pub code: u8,
}

/// Flag, then `DIVWITNESS_SEED`, then the default.
pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_mapping(path: &Path) -> CliResult<DynamicalMapping> {
    let text = read_text(path)?;
    let json: MappingJson = parse_json(path, &text)?;
    json.to_mapping().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// SHA-256 of the canonical (compact, re-serialized) mapping JSON.
pub fn mapping_digest(m: &DynamicalMapping) -> String {
    let canonical = serde_json::to_string(&MappingJson::from_mapping(m)).expect("mapping serializes");
    format!("sha256:{:x}", Sha256::digest(canonical.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub sdp: f64,
    pub pguess: f64,
    pub recompose: f64,
    pub exact_accept: f64,
    pub exact_reject: f64,
    pub cond_limit: f64,
    pub witness: f64,
}

impl Tolerances {
    pub fn with_sdp(sdp: f64) -> Self {
        Self {
            sdp,
            pguess: PGUESS_TOL,
            recompose: RECOMPOSE_TOL,
            exact_accept: EXACT_ACCEPT,
            exact_reject: EXACT_REJECT,
            cond_limit: COND_LIMIT,
            witness: WITNESS_THRESHOLD,
        }
    }
}

// ---------------------------------------------------------------- validate

#[derive(Clone, Debug, Serialize)]
pub struct ChannelCheck {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub dim_in: usize,
    pub dim_out: usize,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cp_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tp_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub kind: &'static str,
    pub valid: bool,
    pub channels: Vec<ChannelCheck>,
    /// Mapping-level problems (identity at index 0, dimensions).
    pub problems: Vec<String>,
    pub tool_version: &'static str,
}

fn check_channel(index: Option<usize>, c: &ChannelJson) -> (ChannelCheck, Option<QuantumChannel>) {
    let mut check =
        ChannelCheck { index, dim_in: c.dim_in, dim_out: c.dim_out, valid: false, cp_residual: None, tp_residual: None, problem: None };
    let channel = matrix_from_json(&c.choi, "choi")
        .and_then(HermitianOperator::new)
        .and_then(|h| QuantumChannel::from_choi(c.dim_in, c.dim_out, h));
    let n = match channel {
        Ok(n) => n,
        Err(e) => {
            check.problem = Some(e.to_string());
            return (check, None);
        }
    };
    match validate_cptp(&n) {
        Ok(r) => {
            check.cp_residual = Some(r.cp_residual);
            check.tp_residual = Some(r.tp_residual);
            check.valid = r.ok;
            if !r.ok {
                check.problem = Some("not CPTP".into());
            }
        }
        Err(e) => check.problem = Some(e.to_string()),
    }
    (check, Some(n))
}

/// CPTP residuals of a channel file or of every channel in a mapping file.
pub fn cmd_validate(path: &Path) -> CliResult<Outcome> {
    let text = read_text(path)?;
    let value: serde_json::Value = parse_json(path, &text)?;
    let report = if value.get("channels").is_some() {
        let json: MappingJson = parse_json(path, &text)?;
        let mut problems = Vec::new();
        let mut checks = Vec::new();
        let mut channels = Vec::new();
        for (k, c) in json.channels.iter().enumerate() {
            let (check, n) = check_channel(Some(k), c);
            checks.push(check);
            channels.push(n);
        }
        if json.channels.is_empty() {
            problems.push("mapping has no channels".into());
        }
        for (k, c) in json.channels.iter().enumerate() {
            if c.dim_in != json.system_dim || c.dim_out != json.system_dim {
                problems.push(format!("channel {k} is {}→{}, system_dim is {}", c.dim_in, c.dim_out, json.system_dim));
            }
        }
        if let Some(Some(n0)) = channels.first() {
            if n0.dim_in() == n0.dim_out() {
                let dist = n0.choi_distance(&QuantumChannel::identity(n0.dim_in()));
                if dist > IDENTITY_TOL {
                    problems.push(format!("channel 0 differs from the identity by {dist:.3e}"));
                }
            }
        }
        let valid = problems.is_empty() && checks.iter().all(|c| c.valid);
        ValidationReport { kind: "mapping", valid, channels: checks, problems, tool_version: TOOL_VERSION }
    } else {
        let json: ChannelJson = parse_json(path, &text)?;
        let (check, _) = check_channel(None, &json);
        ValidationReport { kind: "channel", valid: check.valid, channels: vec![check], problems: vec![], tool_version: TOOL_VERSION }
    };
    let code = if report.valid { EXIT_OK } else { EXIT_NEGATIVE };
    Ok(Outcome { output: to_json(&report), code })
}

// ---------------------------------------------------------------- divide

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClassicalSummary {
    Divisible { t: Vec<Vec<f64>>, residual: f64 },
    NotDivisible { certificate: Vec<f64>, max_lhs: f64, rhs: f64 },
}

impl From<&ClassicalStep> for ClassicalSummary {
    fn from(s: &ClassicalStep) -> Self {
        match s {
            ClassicalStep::Divisible { t, residual } => ClassicalSummary::Divisible { t: t.rows(), residual: *residual },
            ClassicalStep::NotDivisible { certificate, max_lhs, rhs } => {
                ClassicalSummary::NotDivisible { certificate: certificate.clone(), max_lhs: *max_lhs, rhs: *rhs }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepSummary {
    pub step: usize,
    pub status: divwitness::divisibility::StepStatus,
    pub route: RouteUsed,
    pub negativity: Option<f64>,
    pub residual: f64,
    pub condition_number: Option<f64>,
    pub propagator: Option<ChannelJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalSummary>,
}

impl StepSummary {
    fn new(step: usize, c: &PropagatorCertificate) -> Self {
        let method = match c.route {
            RouteUsed::Exact => "exact-inverse",
            RouteUsed::Sdp => "sdp",
        };
        Self {
            step,
            status: c.status,
            route: c.route,
            negativity: c.negativity,
            residual: c.residual,
            condition_number: c.condition_number,
            propagator: c.propagator.as_ref().map(|p| ChannelJson::from_channel(p, Some(method))),
            classical: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessSummary {
    pub step: usize,
    pub mode: WitnessMode,
    pub pguess_before: f64,
    pub pguess_after: f64,
    pub delta: f64,
    pub evaluations: usize,
    pub seed: u64,
    pub ensemble: EnsembleJson,
}

impl From<&WitnessReport> for WitnessSummary {
    fn from(w: &WitnessReport) -> Self {
        Self {
            step: w.step,
            mode: w.mode,
            pguess_before: w.pguess_before,
            pguess_after: w.pguess_after,
            delta: w.delta,
            evaluations: w.evaluations,
            seed: w.seed,
            ensemble: EnsembleJson::from_ensemble(&w.ensemble),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub mapping_digest: String,
    pub system_dim: usize,
    pub route: Route,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub verdict: Verdict,
    /// LP verdict when every channel after `N^0` is classical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical_verdict: Option<Verdict>,
    pub per_step: Vec<StepSummary>,
    pub witnesses: Vec<WitnessSummary>,
    pub guessing_traces: Vec<GuessingTrace>,
}

#[derive(Clone, Copy, Debug)]
pub struct DivideOptions {
    pub route: Route,
    pub tol: f64,
    pub strict: bool,
    pub seed: u64,
    /// Witness search budget for each non-divisible step; 0 skips the search.
    pub witness_budget: usize,
}

impl Default for DivideOptions {
    fn default() -> Self {
        Self { route: Route::Auto, tol: divwitness::sdp::DEFAULT_TOL, strict: false, seed: DEFAULT_SEED, witness_budget: 2000 }
    }
}

pub fn analyse(mapping: &DynamicalMapping, opts: &DivideOptions) -> CliResult<AnalysisReport> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(CliError::Input(format!("--tol must be positive, got {}", opts.tol)));
    }
    let report = check_divisible_with(mapping, opts.route, opts.tol)?;
    let mut per_step: Vec<StepSummary> =
        report.steps.iter().enumerate().map(|(k, c)| StepSummary::new(k + 1, c)).collect();

    let mut classical_verdict = None;
    if mapping.steps() > 0 {
        if let Some(chain) = classical_chain_of(mapping) {
            let steps = check_classical(&chain)?;
            let all = steps.iter().all(|s| matches!(s, ClassicalStep::Divisible { .. }));
            classical_verdict = Some(if all { Verdict::Divisible } else { Verdict::NotDivisible });
            for (summary, s) in per_step.iter_mut().zip(&steps) {
                summary.classical = Some(s.into());
            }
        }
    }

    let mut witnesses = Vec::new();
    let mut guessing_traces = Vec::new();
    if opts.witness_budget > 0 {
        let mode = if classical_verdict.is_some() { WitnessMode::Separable } else { WitnessMode::Entangled };
        for s in per_step.iter().filter(|s| s.status == divwitness::divisibility::StepStatus::NotDivisibleStep) {
            let wopts = WitnessOptions { mode, budget: opts.witness_budget, seed: opts.seed, ensemble_size: 2 };
            if let Some(w) = witness_search(mapping, s.step, &wopts)? {
                guessing_traces.push(guessing_trace(mapping, &w.ensemble, true)?);
                witnesses.push(WitnessSummary::from(&w));
            }
        }
    }

    Ok(AnalysisReport {
        tool_version: TOOL_VERSION,
        command: "divide",
        mapping_digest: mapping_digest(mapping),
        system_dim: mapping.system_dim(),
        route: opts.route,
        seed: opts.seed,
        tolerances: Tolerances::with_sdp(opts.tol),
        verdict: report.verdict,
        classical_verdict,
        per_step,
        witnesses,
        guessing_traces,
    })
}

/// Under `strict`, a non-divisible verdict exits 1 and an undecided one exits 3.
pub fn cmd_divide(path: &Path, opts: &DivideOptions) -> CliResult<Outcome> {
    let mapping = load_mapping(path)?;
    let report = analyse(&mapping, opts)?;
    let code = match (opts.strict, report.verdict) {
        (true, Verdict::NotDivisible) => EXIT_NEGATIVE,
        (true, Verdict::Undecided) => EXIT_NUMERICAL,
        _ => EXIT_OK,
    };
    Ok(Outcome { output: to_json(&report), code })
}

// ---------------------------------------------------------------- witness

#[derive(Clone, Debug, Serialize)]
pub struct WitnessOutput {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub mapping_digest: String,
    pub seed: u64,
    pub mode: WitnessMode,
    pub budget: usize,
    pub steps_searched: Vec<usize>,
    pub tolerances: Tolerances,
    pub found: bool,
    pub witness: Option<WitnessSummary>,
    pub guessing_trace: Option<GuessingTrace>,
}

#[derive(Clone, Copy, Debug)]
pub struct WitnessCmdOptions {
    /// `None` searches every step in order and stops at the first witness.
    pub step: Option<usize>,
    pub mode: WitnessMode,
    pub budget: usize,
    pub ensemble_size: usize,
    pub seed: u64,
}

pub fn trace_csv(trace: &GuessingTrace) -> String {
    let mut s = String::from("index,pguess\n");
    for (k, v) in trace.values.iter().enumerate() {
        writeln!(s, "{k},{v}").expect("writing to a String");
    }
    s
}

/// Exit 0 with a witness, 1 when none was found.
pub fn cmd_witness(path: &Path, opts: &WitnessCmdOptions, trace_csv_path: Option<&Path>) -> CliResult<Outcome> {
    let mapping = load_mapping(path)?;
    let steps: Vec<usize> = match opts.step {
        Some(k) => vec![k],
        None => (1..=mapping.steps()).collect(),
    };
    let wopts = WitnessOptions { mode: opts.mode, budget: opts.budget, seed: opts.seed, ensemble_size: opts.ensemble_size };
    let mut searched = Vec::new();
    let mut found = None;
    for &k in &steps {
        searched.push(k);
        if let Some(w) = witness_search(&mapping, k, &wopts)? {
            found = Some(w);
            break;
        }
    }
    let trace = match &found {
        Some(w) => Some(guessing_trace(&mapping, &w.ensemble, true)?),
        None => None,
    };
    if let (Some(p), Some(t)) = (trace_csv_path, &trace) {
        std::fs::write(p, trace_csv(t)).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    let out = WitnessOutput {
        tool_version: TOOL_VERSION,
        command: "witness",
        mapping_digest: mapping_digest(&mapping),
        seed: opts.seed,
        mode: opts.mode,
        budget: opts.budget,
        steps_searched: searched,
        tolerances: Tolerances::with_sdp(divwitness::sdp::DEFAULT_TOL),
        found: found.is_some(),
        witness: found.as_ref().map(WitnessSummary::from),
        guessing_trace: trace,
    };
    let code = if out.found { EXIT_OK } else { EXIT_NEGATIVE };
    Ok(Outcome { output: to_json(&out), code })
}

// ---------------------------------------------------------------- pguess

#[derive(Clone, Debug, Serialize)]
pub struct PguessOutput {
    pub tool_version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mapping_digest: Option<String>,
    pub tolerances: Tolerances,
    pub extended: bool,
    pub values: Vec<f64>,
    pub max_increase: f64,
}

/// Guessing probability of an ensemble, or its trace along a mapping.
pub fn cmd_pguess(ensemble_path: &Path, mapping_path: Option<&Path>, extended: bool, csv: bool) -> CliResult<Outcome> {
    let text = read_text(ensemble_path)?;
    let json: EnsembleJson = parse_json(ensemble_path, &text)?;
    let ensemble = json.to_ensemble().map_err(|e| CliError::Input(format!("{}: {e}", ensemble_path.display())))?;
    let (trace, digest) = match mapping_path {
        Some(p) => {
            let mapping = load_mapping(p)?;
            (guessing_trace(&mapping, &ensemble, extended)?, Some(mapping_digest(&mapping)))
        }
        None => (GuessingTrace { values: vec![pguess(&ensemble)?], extended, ensemble: None }, None),
    };
    let output = if csv {
        trace_csv(&trace)
    } else {
        to_json(&PguessOutput {
            tool_version: TOOL_VERSION,
            command: "pguess",
            mapping_digest: digest,
            tolerances: Tolerances::with_sdp(divwitness::sdp::DEFAULT_TOL),
            extended,
            max_increase: trace.max_increase(),
            values: trace.values,
        })
    };
    Ok(Outcome { output, code: EXIT_OK })
}

// ---------------------------------------------------------------- simulate

#[derive(Clone, Debug, Serialize)]
pub struct SimulateOutput {
    pub system_dim: usize,
    pub channels: Vec<ChannelJson>,
    pub generator: FamilyDescriptor,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical_chain: Option<Vec<Vec<Vec<f64>>>>,
    pub tool_version: &'static str,
}

pub fn load_descriptor(path: &Path) -> CliResult<FamilyDescriptor> {
    let text = read_text(path)?;
    parse_json(path, &text)
}

/// Mapping JSON for a family; the resolved seed is written into `generator`.
pub fn cmd_simulate(desc: &FamilyDescriptor, seed: u64) -> CliResult<Outcome> {
    let mut desc = desc.clone();
    desc.seed = Some(desc.seed.unwrap_or(seed));
    let generated = generate(&desc, seed)?;
    let json = MappingJson::from_mapping(&generated.mapping);
    let out = SimulateOutput {
        system_dim: json.system_dim,
        channels: json.channels,
        generator: desc,
        classical_chain: generated.chain.map(|c| c.iter().map(|p| p.rows()).collect()),
        tool_version: TOOL_VERSION,
    };
    Ok(Outcome { output: to_json(&out), code: EXIT_OK })
}
