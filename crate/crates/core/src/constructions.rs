//! Explicit propagators from POVM simulation: the measure-and-prepare
//! construction for abelian-output channels and the teleportation-based one
//! for completely information decreasing steps.

use crate::channel::{compose, qc_channel, validate_cptp, DensityMatrix, Povm, QuantumChannel};
use crate::discrimination::bell_basis;
use crate::divisibility::RECOMPOSE_TOL;
use crate::error::{Error, Result};
use crate::matrix::{psd_inv_sqrt, weyl, ComplexMatrix, HermitianOperator, C64, ONE, ZERO};
use crate::sdp::{solve_feasibility, AffinePsdProblem, SdpResult, SdpStatus, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// `Tr[N(ρ) P^y] = Tr[N'(ρ) Q^y]` for all inputs and outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct PovmSimulation {
    pub target_povm: Povm,
    pub simulating_povm: Povm,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub enum SimulationOutcome {
    Simulated(PovmSimulation),
    /// No POVM on the output of `N` reproduces the statistics: `N ⪰ N'` fails.
    Infeasible { residual: f64 },
}

/// Rescales PSD blocks so that they sum to the identity exactly.
fn renormalize(blocks: &[HermitianOperator]) -> Result<Vec<HermitianOperator>> {
    let d = blocks[0].dim();
    let mut total = ComplexMatrix::zeros(d, d);
    for b in blocks {
        total += b.matrix();
    }
    let fix = psd_inv_sqrt(&HermitianOperator::from_hermitian_part(&total), 1e-300)?;
    Ok(blocks.iter().map(|b| HermitianOperator::from_hermitian_part(&b.matrix().conjugate_by(fix.matrix()))).collect())
}

fn undecided(what: &str, r: &SdpResult) -> Error {
    Error::Undecided(format!("{what}: residual {:.3e} after {} iterations", r.residual, r.iterations))
}

/// Adds `Σ_y P^y = 1` over `count` blocks of dimension `m`.
fn add_completeness(problem: &mut AffinePsdProblem, count: usize, m: usize) -> Result<()> {
    for r in 0..m {
        for s in r..m {
            let terms: Vec<(usize, usize, C64)> = (0..count).map(|y| (y * m + r, y * m + s, ONE)).collect();
            if r == s {
                problem.add_real_part_constraint(&terms, 1.0)?;
            } else {
                problem.add_complex_constraint(&terms, ZERO)?;
            }
        }
    }
    Ok(())
}

/// Finds `{P^y}` on the output of `n` with `N^†(P^y) = N'^†(Q^y)`.
pub fn simulate_povm(n: &QuantumChannel, nprime: &QuantumChannel, q: &Povm) -> Result<SimulationOutcome> {
    if n.dim_in() != nprime.dim_in() {
        return Err(Error::DimensionMismatch("channels have different input dimensions".into()));
    }
    if q.dim() != nprime.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "POVM on dimension {} for a channel with output {}",
            q.dim(),
            nprime.dim_out()
        )));
    }
    let (din, m, outcomes) = (n.dim_in(), n.dim_out(), q.len());
    let mut problem = AffinePsdProblem::block_diagonal(&vec![m; outcomes]);
    let images: Vec<ComplexMatrix> = (0..din * din).map(|ij| n.image_of_unit(ij / din, ij % din)).collect();
    let targets: Vec<Vec<C64>> = q
        .elements()
        .iter()
        .map(|qy| (0..din * din).map(|ij| nprime.image_of_unit(ij / din, ij % din).trace_product(qy.matrix())).collect())
        .collect();
    for y in 0..outcomes {
        let off = y * m;
        for i in 0..din {
            for j in i..din {
                // Tr[N(|i><j|) P] = Σ_rs N(|i><j|)_{rs} P_{sr}
                let img = &images[i * din + j];
                let mut terms = Vec::new();
                for r in 0..m {
                    for s in 0..m {
                        if img[(r, s)] != ZERO {
                            terms.push((off + s, off + r, img[(r, s)]));
                        }
                    }
                }
                let value = targets[y][i * din + j];
                if i == j {
                    problem.add_real_part_constraint(&terms, value.re)?;
                } else {
                    problem.add_complex_constraint(&terms, value)?;
                }
            }
        }
    }
    add_completeness(&mut problem, outcomes, m)?;
    let result = solve_feasibility(&problem, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    match result.status {
        SdpStatus::Infeasible => Ok(SimulationOutcome::Infeasible { residual: result.residual }),
        SdpStatus::Undecided => Err(undecided("POVM simulation", &result)),
        SdpStatus::Feasible | SdpStatus::Optimal => {
            let elements = renormalize(&result.blocks)?;
            let simulating_povm = Povm::new(elements)?;
            let mut residual: f64 = 0.0;
            for (y, p) in simulating_povm.elements().iter().enumerate() {
                for (ij, img) in images.iter().enumerate() {
                    residual = residual.max((img.trace_product(p.matrix()) - targets[y][ij]).norm());
                }
            }
            Ok(SimulationOutcome::Simulated(PovmSimulation { target_povm: q.clone(), simulating_povm, residual }))
        }
    }
}

/// Propagator `C` with `C ∘ N = qc_channel(povm)` where `povm` acts on the
/// input of `N`: simulate the outcome projectors of the qc output, then
/// measure-and-prepare with the simulating POVM.
pub fn build_qc_propagator(n: &QuantumChannel, povm: &Povm) -> Result<QuantumChannel> {
    if povm.dim() != n.dim_in() {
        return Err(Error::DimensionMismatch("POVM must act on the input of the channel".into()));
    }
    let nprime = qc_channel(povm)?;
    let projectors = Povm::computational(povm.len());
    let sim = match simulate_povm(n, &nprime, &projectors)? {
        SimulationOutcome::Simulated(s) => s,
        SimulationOutcome::Infeasible { residual } => {
            return Err(Error::OrderingViolation(format!(
                "no POVM on the channel output simulates the measurement (distance {residual:.3e})"
            )))
        }
    };
    let c = qc_channel(&sim.simulating_povm)?;
    verify_propagator(&c, n, &nprime)?;
    Ok(c)
}

fn verify_propagator(c: &QuantumChannel, n: &QuantumChannel, nprime: &QuantumChannel) -> Result<()> {
    let report = validate_cptp(c)?;
    if report.cp_residual > RECOMPOSE_TOL || report.tp_residual > RECOMPOSE_TOL {
        return Err(Error::Internal(format!(
            "assembled propagator is not CPTP (cp {:.3e}, tp {:.3e})",
            report.cp_residual, report.tp_residual
        )));
    }
    let residual = compose(c, n)?.choi_distance(nprime);
    if residual > RECOMPOSE_TOL {
        return Err(Error::Internal(format!("propagator recomposes with residual {residual:.3e}")));
    }
    Ok(())
}

/// Generalized teleportation data in dimension `d`.
#[derive(Clone, Debug)]
pub struct TeleportKit {
    pub dim: usize,
    /// `Q^y = (1 ⊗ U_y) Φ+ (1 ⊗ U_y)^†`, `y = a * d + b`.
    pub bell_povm: Povm,
    pub correction_unitaries: Vec<ComplexMatrix>,
    /// Normalized `Φ+`.
    pub max_ent_state: DensityMatrix,
}

pub fn make_teleport_kit(d: usize) -> Result<TeleportKit> {
    if d < 2 {
        return Err(Error::InvalidParameter("teleportation needs d >= 2".into()));
    }
    let bell = bell_basis(d);
    let bell_povm = Povm::from_basis(&bell)?;
    let correction_unitaries = (0..d * d).map(|y| weyl(d, y / d, y % d)).collect();
    Ok(TeleportKit { dim: d, bell_povm, correction_unitaries, max_ent_state: DensityMatrix::max_entangled(d) })
}

impl TeleportKit {
    /// `Σ_y U_y Tr_{12}[(Φ+_{01} ⊗ X_2)(1_0 ⊗ P^y_{12})] U_y^†` for a POVM `{P^y}` on
    /// `d ⊗ dim(X)`. With `P = Q` this is the teleportation identity.
    pub fn assemble(&self, povm: &[HermitianOperator], x: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d, d);
        for (y, p) in povm.iter().enumerate() {
            let r = contract(d, p.matrix(), x);
            out += &r.conjugate_by(&self.correction_unitaries[y]);
        }
        out
    }

    pub fn teleport(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        self.assemble(self.bell_povm.elements(), rho)
    }
}

/// Propagator `C` with `C ∘ N = N'` built from a POVM on `ancilla ⊗ output(N)`
/// that simulates the Bell measurement on `ancilla ⊗ output(N')`.
pub fn build_teleport_propagator(n: &QuantumChannel, nprime: &QuantumChannel) -> Result<QuantumChannel> {
    if n.dim_in() != nprime.dim_in() {
        return Err(Error::DimensionMismatch("channels have different input dimensions".into()));
    }
    let (da, db, d) = (n.dim_in(), n.dim_out(), nprime.dim_out());
    let kit = make_teleport_kit(d)?;
    let outcomes = d * d;
    let block = d * db;
    let mut problem = AffinePsdProblem::block_diagonal(&vec![block; outcomes]);

    for a in 0..da {
        for b in a..da {
            let x = n.image_of_unit(a, b);
            let xp = nprime.image_of_unit(a, b);
            for (y, qy) in kit.bell_povm.elements().iter().enumerate() {
                let target = contract(d, qy.matrix(), &xp);
                let off = y * block;
                for k in 0..d {
                    for l in 0..d {
                        if a == b && l < k {
                            continue;
                        }
                        let mut terms = Vec::new();
                        for beta in 0..db {
                            for delta in 0..db {
                                let c = x[(beta, delta)];
                                if c != ZERO {
                                    terms.push((off + l * db + delta, off + k * db + beta, c / d as f64));
                                }
                            }
                        }
                        if a == b && k == l {
                            problem.add_real_part_constraint(&terms, target[(k, l)].re)?;
                        } else {
                            problem.add_complex_constraint(&terms, target[(k, l)])?;
                        }
                    }
                }
            }
        }
    }
    add_completeness(&mut problem, outcomes, block)?;
    let result = solve_feasibility(&problem, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let blocks = match result.status {
        SdpStatus::Feasible | SdpStatus::Optimal => renormalize(&result.blocks)?,
        SdpStatus::Infeasible => {
            return Err(Error::OrderingViolation(format!(
                "no POVM simulates the Bell measurement: the step is not completely information decreasing (distance {:.3e})",
                result.residual
            )))
        }
        SdpStatus::Undecided => return Err(undecided("teleportation POVM", &result)),
    };

    let mut choi = ComplexMatrix::zeros(db * d, db * d);
    for i in 0..db {
        for j in 0..db {
            let mut unit = ComplexMatrix::zeros(db, db);
            unit[(i, j)] = ONE;
            let img = kit.assemble(&blocks, &unit);
            for r in 0..d {
                for s in 0..d {
                    choi[(i * d + r, j * d + s)] = img[(r, s)];
                }
            }
        }
    }
    let c = QuantumChannel::from_choi(db, d, HermitianOperator::from_hermitian_part(&choi))?;
    verify_propagator(&c, n, nprime)?;
    Ok(c)
}

/// `Tr_{12}[(Φ+_{01} ⊗ X_2)(1_0 ⊗ P_{12})]`, entrywise
/// `(1/d) Σ_{βδ} X_{βδ} P[(l,δ),(k,β)]`.
fn contract(d: usize, p: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    let db = x.rows();
    ComplexMatrix::from_fn(d, d, |k, l| {
        let mut acc = ZERO;
        for beta in 0..db {
            for delta in 0..db {
                acc += x[(beta, delta)] * p[(l * db + delta, k * db + beta)];
            }
        }
        acc / d as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Povm;
    use crate::divisibility::exact_candidate;
    use crate::random::{random_state, seeded};

    fn pm() -> Povm {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]);
        Povm::from_basis(&u).unwrap()
    }

    #[test]
    fn teleportation_identity() {
        let mut rng = seeded(3);
        for d in [2, 3] {
            let kit = make_teleport_kit(d).unwrap();
            assert_eq!(kit.correction_unitaries.len(), d * d);
            for _ in 0..5 {
                let rho = random_state(d, &mut rng);
                let out = kit.teleport(rho.matrix().matrix());
                assert!(out.distance(rho.matrix().matrix()) < 1e-12);
            }
        }
    }

    #[test]
    fn simulation_examples() {
        let d8 = QuantumChannel::dephasing(0.8).unwrap();
        let d5 = QuantumChannel::dephasing(0.5).unwrap();
        match simulate_povm(&d8, &d5, &pm()).unwrap() {
            SimulationOutcome::Simulated(s) => {
                // P± = ½(1 ± 0.625 X)
                let p0 = s.simulating_povm.elements()[0].matrix();
                assert!((p0[(0, 1)].re - 0.3125).abs() < 1e-6, "{p0:?}");
                assert!(s.residual < 1e-6);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(simulate_povm(&d5, &d8, &pm()).unwrap(), SimulationOutcome::Infeasible { .. }));
        let id = QuantumChannel::identity(2);
        match simulate_povm(&id, &d5, &Povm::computational(2)).unwrap() {
            SimulationOutcome::Simulated(s) => {
                assert!(s.simulating_povm.elements()[0].matrix().distance(&ComplexMatrix::from_diag(&[1.0, 0.0])) < 1e-6)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn qc_propagator_examples() {
        let id = QuantumChannel::identity(2);
        let c = build_qc_propagator(&id, &pm()).unwrap();
        assert!(c.choi_distance(&qc_channel(&pm()).unwrap()) < 1e-6);
        let d8 = QuantumChannel::dephasing(0.8).unwrap();
        let c = build_qc_propagator(&d8, &Povm::computational(2)).unwrap();
        assert!(c.choi_distance(&qc_channel(&Povm::computational(2)).unwrap()) < 1e-6);
    }

    #[test]
    fn teleport_propagator_examples() {
        let id = QuantumChannel::identity(2);
        let c = build_teleport_propagator(&id, &id).unwrap();
        assert!(c.choi_distance(&id) < 1e-6);
        let d8 = QuantumChannel::dephasing(0.8).unwrap();
        let d5 = QuantumChannel::dephasing(0.5).unwrap();
        let c = build_teleport_propagator(&d8, &d5).unwrap();
        assert!(c.choi_distance(&QuantumChannel::dephasing(0.625).unwrap()) < 1e-6);
        assert!(c.choi_distance(&exact_candidate(&d8, &d5).unwrap()) < 1e-6);
        assert!(matches!(build_teleport_propagator(&d5, &d8), Err(Error::OrderingViolation(_))));
    }
}
