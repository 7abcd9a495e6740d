//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns a JSON string. Failures come back as
//! `{"error": "..."}` so the page never has to catch exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use divwitness::channel::embed_stochastic;
use divwitness::discrimination::{guessing_trace, helstrom, pguess};
use divwitness::divisibility::{
    check_classical, check_divisible, find_step_propagator, witness_search, ClassicalStep, StepStatus, Verdict,
    WitnessOptions,
};
use divwitness::dynamics::{classical_chain, dephasing_family};
use divwitness::{ComplexMatrix, DensityMatrix, Ensemble, HermitianOperator, QuantumChannel, Result, C64};

/// Witness search budget used by the page; small enough to stay interactive.
pub const DEMO_BUDGET: usize = 400;

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn status_name(s: StepStatus) -> &'static str {
    match s {
        StepStatus::DivisibleStep => "divisible",
        StepStatus::NotDivisibleStep => "not_divisible",
        StepStatus::Undecided => "undecided",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DephasingStep {
    pub step: usize,
    pub status: &'static str,
    pub negativity: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoWitness {
    pub step: usize,
    pub pguess_before: f64,
    pub pguess_after: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DephasingReport {
    pub verdict: Verdict,
    pub steps: Vec<DephasingStep>,
    /// Extended guessing trace of the Bell pair `{Φ+, Φ-}`.
    pub bell_trace: Vec<f64>,
    pub witness: Option<DemoWitness>,
}

/// Divisibility, Bell-pair guessing trace and a backflow witness for qubit
/// dephasing with coherence factors `gammas` (the first must be 1).
pub fn explore_dephasing(gammas: &[f64], seed: u64) -> Result<DephasingReport> {
    let m = dephasing_family(gammas)?;
    let report = check_divisible(&m)?;
    let steps = report
        .steps
        .iter()
        .enumerate()
        .map(|(k, c)| DephasingStep { step: k + 1, status: status_name(c.status), negativity: c.negativity })
        .collect();

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (o, z) = (C64::new(h, 0.0), C64::new(0.0, 0.0));
    let plus = DensityMatrix::pure(&[o, z, z, o])?;
    let minus = DensityMatrix::pure(&[o, z, z, -o])?;
    let bell_trace = guessing_trace(&m, &Ensemble::uniform(vec![plus, minus])?, true)?.values;

    let mut witness = None;
    if let Some(k) = report.steps.iter().position(|c| c.status == StepStatus::NotDivisibleStep) {
        let opts = WitnessOptions { budget: DEMO_BUDGET, seed, ..WitnessOptions::default() };
        witness = witness_search(&m, k + 1, &opts)?.map(|w| DemoWitness {
            step: w.step,
            pguess_before: w.pguess_before,
            pguess_after: w.pguess_after,
            delta: w.delta,
        });
    }
    Ok(DephasingReport { verdict: report.verdict, steps, bell_trace, witness })
}

/// Qubit state `(1 + r·σ)/2` from a Bloch vector.
pub fn bloch_state(r: [f64; 3]) -> Result<DensityMatrix> {
    let m = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => C64::new(0.5 * (1.0 + r[2]), 0.0),
        (1, 1) => C64::new(0.5 * (1.0 - r[2]), 0.0),
        (0, 1) => C64::new(0.5 * r[0], -0.5 * r[1]),
        _ => C64::new(0.5 * r[0], 0.5 * r[1]),
    });
    DensityMatrix::new(HermitianOperator::new(m)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct PguessReport {
    pub helstrom: f64,
    pub sdp: f64,
    /// Both quantities after dephasing the states with factor `gamma`.
    pub helstrom_dephased: f64,
    pub sdp_dephased: f64,
}

/// Two-state discrimination with prior `p` on `ρ0`: the closed form next to the SDP value.
pub fn explore_pguess(p: f64, r0: [f64; 3], r1: [f64; 3], gamma: f64) -> Result<PguessReport> {
    let (rho0, rho1) = (bloch_state(r0)?, bloch_state(r1)?);
    let e = Ensemble::new(vec![(p, rho0.clone()), (1.0 - p, rho1.clone())])?;
    let n = QuantumChannel::dephasing(gamma)?;
    let ed = e.mapped(&n)?;
    let (d0, d1) = (&ed.states()[0].1, &ed.states()[1].1);
    Ok(PguessReport {
        helstrom: helstrom(p, &rho0, &rho1)?,
        sdp: pguess(&e)?,
        helstrom_dephased: helstrom(p, d0, d1)?,
        sdp_dephased: pguess(&ed)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainStep {
    pub step: usize,
    pub divisible: bool,
    /// `T` in row-major order when the step is divisible.
    pub t: Option<Vec<f64>>,
    /// Value `yᵀb` of the Farkas certificate otherwise.
    pub certificate_rhs: Option<f64>,
    /// Verdict of the quantum test on the embedded channels.
    pub embedded: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub steps: Vec<ChainStep>,
}

/// Binary symmetric channel chain `BSC(f_0 = 0), BSC(f_1), ...`: the LP per step
/// next to the SDP verdict for the embedded channels.
pub fn explore_bsc_chain(flips: &[f64]) -> Result<ChainReport> {
    let (chain, _) = classical_chain(flips)?;
    let lp = check_classical(&chain)?;
    let mut steps = Vec::with_capacity(lp.len());
    for (k, s) in lp.into_iter().enumerate() {
        let q = find_step_propagator(&embed_stochastic(&chain[k]), &embed_stochastic(&chain[k + 1]))?;
        let embedded = status_name(q.status);
        steps.push(match s {
            ClassicalStep::Divisible { t, .. } => {
                let d = t.dim();
                let row_major = (0..d * d).map(|i| t.get(i / d, i % d)).collect();
                ChainStep { step: k + 1, divisible: true, t: Some(row_major), certificate_rhs: None, embedded }
            }
            ClassicalStep::NotDivisible { rhs, .. } => {
                ChainStep { step: k + 1, divisible: false, t: None, certificate_rhs: Some(rhs), embedded }
            }
        });
    }
    Ok(ChainReport { steps })
}

#[wasm_bindgen(js_name = dephasingExplorer)]
pub fn dephasing_explorer(gammas: &[f64], seed: u32) -> String {
    to_json(explore_dephasing(gammas, u64::from(seed)))
}

#[wasm_bindgen(js_name = pguessExplorer)]
pub fn pguess_explorer(p: f64, r0: &[f64], r1: &[f64], gamma: f64) -> String {
    let vec3 = |v: &[f64]| -> Option<[f64; 3]> { v.try_into().ok() };
    match (vec3(r0), vec3(r1)) {
        (Some(a), Some(b)) => to_json(explore_pguess(p, a, b, gamma)),
        _ => error_json("Bloch vectors need three components"),
    }
}

#[wasm_bindgen(js_name = bscChain)]
pub fn bsc_chain(flips: &[f64]) -> String {
    to_json(explore_bsc_chain(flips))
}
