//! Guessing probabilities of ensembles and their behavior along dynamical mappings.

use serde::{Deserialize, Serialize};

use crate::channel::{apply, tensor_with_identity, DensityMatrix, Povm, QuantumChannel};
use crate::error::{Error, Result};
use crate::mapping::DynamicalMapping;
use crate::matrix::{trace_norm, weyl, ComplexMatrix, C64};
use crate::random::{random_uniform_average_ensemble, seeded, uniform_average_ensemble};
use crate::sdp::{solve_min_trace_dominating, MinTraceResult, SdpStatus, DEFAULT_MAX_ITER};

/// Probabilities must sum to one within this tolerance.
pub const PROB_TOL: f64 = 1e-10;
/// Duality gap requested from the solver when computing guessing probabilities.
pub const PGUESS_TOL: f64 = 1e-9;

/// An ensemble `{p(x), ρ^x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    states: Vec<(f64, DensityMatrix)>,
}

impl Ensemble {
    pub fn new(states: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::InvalidEnsemble("no states".into()))?;
        let d = first.1.dim();
        let mut total = 0.0;
        for (p, rho) in &states {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(Error::InvalidEnsemble(format!("probability {p} outside (0, 1]")));
            }
            if rho.dim() != d {
                return Err(Error::DimensionMismatch("ensemble states differ in dimension".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidEnsemble(format!("probabilities sum to {total}")));
        }
        Ok(Self { states })
    }

    /// Equal priors.
    pub fn uniform(states: Vec<DensityMatrix>) -> Result<Self> {
        let p = 1.0 / states.len().max(1) as f64;
        Self::new(states.into_iter().map(|s| (p, s)).collect())
    }

    pub fn dim(&self) -> usize {
        self.states[0].1.dim()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[(f64, DensityMatrix)] {
        &self.states
    }

    pub fn max_prior(&self) -> f64 {
        self.states.iter().map(|(p, _)| *p).fold(0.0, f64::max)
    }

    /// `Σ_x p(x) ρ^x`.
    pub fn average_state(&self) -> ComplexMatrix {
        let d = self.dim();
        let mut avg = ComplexMatrix::zeros(d, d);
        for (p, rho) in &self.states {
            avg += &rho.matrix().matrix().scale_real(*p);
        }
        avg
    }

    /// `{p(x), N(ρ^x)}`.
    pub fn mapped(&self, n: &QuantumChannel) -> Result<Self> {
        if n.dim_in() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "channel input {} for ensemble of dimension {}",
                n.dim_in(),
                self.dim()
            )));
        }
        let states = self.states.iter().map(|(p, rho)| Ok((*p, apply(n, rho)?))).collect::<Result<_>>()?;
        Ok(Self { states })
    }
}

/// `max_POVM Σ_x p(x) Tr[P^x ρ^x]` via the min-trace domination SDP.
pub fn pguess(e: &Ensemble) -> Result<f64> {
    let r = pguess_detailed(e, PGUESS_TOL)?;
    if r.sdp.status != SdpStatus::Optimal {
        return Err(Error::Undecided(format!(
            "guessing probability not certified: gap {:.3e} after {} iterations",
            r.sdp.gap.unwrap_or(f64::NAN),
            r.sdp.iterations
        )));
    }
    // Both bounds are valid; report their midpoint clamped to the admissible range.
    let value = 0.5 * (r.value + r.primal_value);
    Ok(value.clamp(e.max_prior(), 1.0))
}

/// Solver output including the optimal POVM and both bounds.
pub fn pguess_detailed(e: &Ensemble, tol: f64) -> Result<MinTraceResult> {
    solve_min_trace_dominating(e.states(), tol, DEFAULT_MAX_ITER)
}

/// `½ + ½ ||p ρ0 − (1 − p) ρ1||_1`.
pub fn helstrom(p: f64, rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("prior {p} outside [0, 1]")));
    }
    if rho0.dim() != rho1.dim() {
        return Err(Error::DimensionMismatch("Helstrom states differ in dimension".into()));
    }
    helstrom_operators(p, rho0.matrix().matrix(), rho1.matrix().matrix())
}

pub(crate) fn helstrom_operators(p: f64, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let diff = &a.scale_real(p) - &b.scale_real(1.0 - p);
    Ok(0.5 + 0.5 * trace_norm(&diff.hermitian_part())?)
}

/// Guessing probabilities `P_guess(N^i(E))` for every time index of a mapping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessingTrace {
    pub values: Vec<f64>,
    pub extended: bool,
    #[serde(skip)]
    pub ensemble: Option<Ensemble>,
}

impl GuessingTrace {
    /// Largest increase `values[k] − values[k−1]` over all steps (0 if none).
    pub fn max_increase(&self) -> f64 {
        self.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// The guessing trace of `e` along `mapping`. In extended mode the ensemble
/// lives on `ancilla ⊗ system` with both of the system dimension and the
/// mapping acts as `id ⊗ N^i`.
pub fn guessing_trace(mapping: &DynamicalMapping, e: &Ensemble, extended: bool) -> Result<GuessingTrace> {
    let d = mapping.system_dim();
    let expected = if extended { d * d } else { d };
    if e.dim() != expected {
        let what = if extended { "ancilla ⊗ system with ancilla dimension equal to the system's" } else { "the system" };
        return Err(Error::DimensionMismatch(format!(
            "ensemble of dimension {} does not live on {what} ({expected})",
            e.dim()
        )));
    }
    let mut values = Vec::with_capacity(mapping.len());
    for n in mapping.channels() {
        let n = if extended { tensor_with_identity(n, d)? } else { n.clone() };
        values.push(pguess(&e.mapped(&n)?)?);
    }
    Ok(GuessingTrace { values, extended, ensemble: Some(e.clone()) })
}

/// Outcome of the randomized test of `N ⪰ N'`.
#[derive(Clone, Debug)]
pub enum InformativeVerdict {
    /// No probe found `N'` more useful; `max_gap` is the largest observed
    /// `pguess(N'(E)) − pguess(N(E))`.
    Holds { trials: usize, max_gap: f64 },
    /// `N'(E)` is strictly easier to discriminate than `N(E)`.
    Violated { ensemble: Ensemble, gap: f64 },
    Undecided { reason: String },
}

/// Gap above which a probe counts as a violation.
pub const VIOLATION_GAP: f64 = 1e-6;

/// Randomized falsifier for "N is more informative than N'" using ensembles
/// with maximally mixed average. With `extended`, both channels act as
/// `id ⊗ ·` on an ancilla of the input dimension.
pub fn is_more_informative(
    n: &QuantumChannel,
    nprime: &QuantumChannel,
    trials: usize,
    extended: bool,
    seed: u64,
) -> Result<InformativeVerdict> {
    if n.dim_in() != nprime.dim_in() {
        return Err(Error::DimensionMismatch("channels have different input dimensions".into()));
    }
    let d = n.dim_in();
    let (a, b) = if extended {
        (tensor_with_identity(n, d)?, tensor_with_identity(nprime, d)?)
    } else {
        (n.clone(), nprime.clone())
    };
    let dim = a.dim_in();
    let mut probes = structured_probes(dim)?;
    let mut rng = seeded(seed);
    let mut max_gap = f64::NEG_INFINITY;
    let mut failures = 0;
    for t in 0..trials + probes.len() {
        let e = if let Some(e) = probes.pop() {
            e
        } else {
            let size = 2 + t % 3;
            random_uniform_average_ensemble(dim, size, &mut rng)?
        };
        let (pa, pb) = match (pguess(&e.mapped(&a)?), pguess(&e.mapped(&b)?)) {
            (Ok(pa), Ok(pb)) => (pa, pb),
            _ => {
                failures += 1;
                continue;
            }
        };
        let gap = pb - pa;
        if gap > VIOLATION_GAP {
            return Ok(InformativeVerdict::Violated { ensemble: e, gap });
        }
        max_gap = max_gap.max(gap);
    }
    if failures > 0 {
        return Ok(InformativeVerdict::Undecided { reason: format!("{failures} probes left the solver undecided") });
    }
    Ok(InformativeVerdict::Holds { trials, max_gap })
}

/// Projective measurements in the computational, Fourier and (for square
/// dimensions) generalized Bell bases, as uniform-average ensembles.
fn structured_probes(dim: usize) -> Result<Vec<Ensemble>> {
    let omega = |k: usize| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / dim as f64);
    let norm = 1.0 / (dim as f64).sqrt();
    let fourier = ComplexMatrix::from_fn(dim, dim, |r, c| omega(r * c % dim) * norm);
    let mut probes = vec![uniform_average_ensemble(&Povm::computational(dim))?];
    probes.push(uniform_average_ensemble(&Povm::from_basis(&fourier)?)?);
    let k = (dim as f64).sqrt().round() as usize;
    if k > 1 && k * k == dim {
        probes.push(uniform_average_ensemble(&Povm::from_basis(&bell_basis(k))?)?);
    }
    Ok(probes)
}

/// Columns `(1 ⊗ U_{ab}) |Φ+>` for the Weyl operators `U_{ab}`, ordered `a * d + b`.
pub fn bell_basis(d: usize) -> ComplexMatrix {
    let norm = 1.0 / (d as f64).sqrt();
    let mut m = ComplexMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let u = weyl(d, a, b);
            for i in 0..d {
                for r in 0..d {
                    m[(i * d + r, a * d + b)] = u[(r, i)] * norm;
                }
            }
        }
    }
    m
}
