//! Generators of dynamical mappings: collision models, analytic families,
//! classical chains and seeded random instances.

use serde::{Deserialize, Serialize};

use crate::channel::{compose, embed_stochastic, DensityMatrix, QuantumChannel, StochasticMatrix};
use crate::error::{Error, Result};
use crate::mapping::DynamicalMapping;
use crate::matrix::{kron, partial_trace, ComplexMatrix, HermitianOperator, Keep, C64, ONE};
use crate::random::{haar_unitary, random_channel, seeded};

/// Sequential interactions of the system with environment units.
#[derive(Clone, Debug)]
pub struct CollisionModel {
    pub system_dim: usize,
    pub env_unit_dim: usize,
    /// State of every environment unit before its collision.
    pub env_state: DensityMatrix,
    /// Unitaries on `system ⊗ unit`, used cyclically if there are fewer than steps.
    pub interactions: Vec<ComplexMatrix>,
}

impl CollisionModel {
    fn validate(&self) -> Result<()> {
        let n = self.system_dim * self.env_unit_dim;
        if self.env_state.dim() != self.env_unit_dim {
            return Err(Error::DimensionMismatch("environment state does not match the unit dimension".into()));
        }
        if self.interactions.is_empty() {
            return Err(Error::InvalidParameter("collision model without interactions".into()));
        }
        for (k, u) in self.interactions.iter().enumerate() {
            if u.rows() != n || u.cols() != n {
                return Err(Error::DimensionMismatch(format!("interaction {k} is not {n}x{n}")));
            }
            let residual = u.adjoint().matmul(u).distance(&ComplexMatrix::identity(n));
            if residual > 1e-10 {
                return Err(Error::InvalidParameter(format!("interaction {k} is not unitary (residual {residual:.3e})")));
            }
        }
        Ok(())
    }

    fn interaction(&self, k: usize) -> &ComplexMatrix {
        &self.interactions[k % self.interactions.len()]
    }

    /// `ρ -> Tr_E[W (ρ ⊗ σ) W^†]` for a joint unitary `W`.
    fn reduced_channel(&self, w: &ComplexMatrix) -> Result<QuantumChannel> {
        let (d, e) = (self.system_dim, self.env_unit_dim);
        let sigma = self.env_state.matrix().matrix();
        let mut choi = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let mut unit = ComplexMatrix::zeros(d, d);
                unit[(i, j)] = ONE;
                let joint = kron(&unit, sigma).conjugate_by(w);
                let out = partial_trace(&joint, [d, e], Keep::First)?;
                for r in 0..d {
                    for s in 0..d {
                        choi[(i * d + r, j * d + s)] = out[(r, s)];
                    }
                }
            }
        }
        QuantumChannel::from_choi(d, d, HermitianOperator::from_hermitian_part(&choi))
    }
}

/// `N^0 = id, ..., N^steps`. Fresh units make every collision a separate
/// channel; with `memory` one persistent unit carries correlations between steps.
pub fn collision_mapping(m: &CollisionModel, steps: usize, memory: bool) -> Result<DynamicalMapping> {
    if steps == 0 {
        return Err(Error::InvalidParameter("collision mapping needs at least one step".into()));
    }
    m.validate()?;
    let d = m.system_dim;
    let mut channels = vec![QuantumChannel::identity(d)];
    if memory {
        let mut w = ComplexMatrix::identity(d * m.env_unit_dim);
        for k in 0..steps {
            w = m.interaction(k).matmul(&w);
            channels.push(m.reduced_channel(&w)?);
        }
    } else {
        let mut acc = QuantumChannel::identity(d);
        for k in 0..steps {
            let step = m.reduced_channel(m.interaction(k))?;
            acc = compose(&step, &acc)?;
            channels.push(acc.clone());
        }
    }
    DynamicalMapping::new(channels)
}

/// SWAP on `d ⊗ d`.
pub fn swap(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d * d, d * d, |r, c| if r == (c % d) * d + c / d { ONE } else { C64::new(0.0, 0.0) })
}

/// `cos θ · 1 + i sin θ · SWAP`; θ = π/2 is a full swap up to phase.
pub fn partial_swap(d: usize, theta: f64) -> ComplexMatrix {
    let s = swap(d).scale(C64::new(0.0, theta.sin()));
    &ComplexMatrix::identity(d * d).scale_real(theta.cos()) + &s
}

/// Qubit collision model with partial-SWAP interactions and units in `|0>`.
pub fn partial_swap_model(thetas: &[f64]) -> CollisionModel {
    CollisionModel {
        system_dim: 2,
        env_unit_dim: 2,
        env_state: DensityMatrix::basis(2, 0),
        interactions: thetas.iter().map(|&t| partial_swap(2, t)).collect(),
    }
}

fn check_first(values: &[f64], want: f64, what: &str) -> Result<()> {
    match values.first() {
        Some(&v) if (v - want).abs() <= 1e-12 => Ok(()),
        Some(v) => Err(Error::InvalidParameter(format!("{what} must start at {want}, got {v}"))),
        None => Err(Error::InvalidParameter(format!("{what} is empty"))),
    }
}

/// Qubit dephasing channels scaling the coherences by `γ_i`.
pub fn dephasing_family(gammas: &[f64]) -> Result<DynamicalMapping> {
    check_first(gammas, 1.0, "dephasing factors")?;
    let channels = gammas.iter().map(|&g| QuantumChannel::dephasing(g)).collect::<Result<_>>()?;
    DynamicalMapping::new(channels)
}

/// Qubit amplitude damping with survival probabilities `η_i`.
pub fn amplitude_damping_family(etas: &[f64]) -> Result<DynamicalMapping> {
    check_first(etas, 1.0, "survival probabilities")?;
    let channels = etas.iter().map(|&e| QuantumChannel::amplitude_damping(e)).collect::<Result<_>>()?;
    DynamicalMapping::new(channels)
}

/// Binary symmetric transition matrices `P_i = BSC(f_i)` and the mapping
/// `N^0 = id, N^i = embed(P_i)`.
pub fn classical_chain(flips: &[f64]) -> Result<(Vec<StochasticMatrix>, DynamicalMapping)> {
    check_first(flips, 0.0, "flip probabilities")?;
    let chain = flips.iter().map(|&f| StochasticMatrix::bsc(f)).collect::<Result<Vec<_>>>()?;
    let later = chain[1..].iter().map(embed_stochastic).collect();
    Ok((chain, DynamicalMapping::from_steps(2, later)?))
}

/// Cumulative products of random CPTP steps; divisible by construction.
pub fn random_divisible(d: usize, steps: usize, seed: u64) -> Result<DynamicalMapping> {
    if !(2..=3).contains(&d) || steps > 8 {
        return Err(Error::InvalidParameter("random_divisible supports d in {2, 3} and at most 8 steps".into()));
    }
    let mut rng = seeded(seed);
    let mut acc = QuantumChannel::identity(d);
    let mut later = Vec::with_capacity(steps);
    for _ in 0..steps {
        acc = compose(&random_channel(d, &mut rng)?, &acc)?;
        later.push(acc.clone());
    }
    DynamicalMapping::from_steps(d, later)
}

/// `N^i(ρ) = U_i ρ U_i^†` with Haar-random `U_i`.
pub fn random_unitary_family(d: usize, steps: usize, seed: u64) -> Result<DynamicalMapping> {
    let mut rng = seeded(seed);
    let later = (0..steps).map(|_| QuantumChannel::unitary(&haar_unitary(d, &mut rng))).collect::<Result<_>>()?;
    DynamicalMapping::from_steps(d, later)
}

/// JSON description of a generated family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub memory: bool,
}

/// Mapping plus the classical chain when the family has one.
#[derive(Clone, Debug)]
pub struct Generated {
    pub mapping: DynamicalMapping,
    pub chain: Option<Vec<StochasticMatrix>>,
}

pub const FAMILIES: [&str; 6] = ["dephasing", "amplitude_damping", "bsc", "collision", "random_divisible", "random_unitary"];

fn int_param(params: &[f64], k: usize, name: &str) -> Result<usize> {
    let v = *params.get(k).ok_or_else(|| Error::InvalidParameter(format!("missing parameter {name}")))?;
    if v < 0.0 || v.fract() != 0.0 || v > 1e6 {
        return Err(Error::InvalidParameter(format!("{name} must be a non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

/// Builds a family. Parameters: factors for `dephasing`, survival
/// probabilities for `amplitude_damping`, flip probabilities for `bsc`,
/// partial-SWAP angles for `collision`, `[dim, steps]` for the random families.
pub fn generate(desc: &FamilyDescriptor, default_seed: u64) -> Result<Generated> {
    let seed = desc.seed.unwrap_or(default_seed);
    let p = &desc.params;
    let mapping = match desc.family.as_str() {
        "dephasing" => dephasing_family(p)?,
        "amplitude_damping" => amplitude_damping_family(p)?,
        "bsc" => {
            let (chain, mapping) = classical_chain(p)?;
            return Ok(Generated { mapping, chain: Some(chain) });
        }
        "collision" => collision_mapping(&partial_swap_model(p), p.len(), desc.memory)?,
        "random_divisible" => random_divisible(int_param(p, 0, "dim")?, int_param(p, 1, "steps")?, seed)?,
        "random_unitary" => random_unitary_family(int_param(p, 0, "dim")?, int_param(p, 1, "steps")?, seed)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown family {other:?} (expected one of {})",
                FAMILIES.join(", ")
            )))
        }
    };
    Ok(Generated { mapping, chain: None })
}
