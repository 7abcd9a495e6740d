use divwitness::channel::{compose, qc_channel, validate_cptp};
use divwitness::constructions::{build_qc_propagator, build_teleport_propagator, make_teleport_kit, simulate_povm, SimulationOutcome};
use divwitness::divisibility::exact_candidate;
use divwitness::random::{random_channel, random_channel_with_rank, random_povm, random_state, seeded};
use divwitness::{Error, HermitianOperator, Povm, QuantumChannel};

/// `{N†(Q_y)}`: the POVM on the input that `qc(Q) ∘ N` measures.
fn pulled_back(n: &QuantumChannel, q: &Povm) -> Povm {
    Povm::new(q.elements().iter().map(|e| HermitianOperator::from_hermitian_part(&n.adjoint_apply(e.matrix()).unwrap())).collect())
        .unwrap()
}

#[test]
fn qc_propagator_recomposes() {
    let mut rng = seeded(31);
    for k in 0..12 {
        let d = 2 + k % 2;
        let n = random_channel(d, &mut rng).unwrap();
        let q = random_povm(d, 2 + k % 3, &mut rng).unwrap();
        let target = compose(&qc_channel(&q).unwrap(), &n).unwrap();
        let c = build_qc_propagator(&n, &pulled_back(&n, &q)).unwrap();
        assert!(validate_cptp(&c).unwrap().ok);
        assert!(compose(&c, &n).unwrap().choi_distance(&target) <= 1e-6, "instance {k}");
    }
}

#[test]
fn qc_propagator_rejects_unreachable_measurements() {
    // A completely depolarizing N cannot be post-processed into a basis measurement.
    let n = QuantumChannel::depolarizing(2, 0.0).unwrap();
    let err = build_qc_propagator(&n, &Povm::computational(2)).unwrap_err();
    assert!(matches!(err, Error::OrderingViolation(_)), "{err:?}");
}

#[test]
fn simulation_of_a_measurement_through_a_unitary() {
    let mut rng = seeded(32);
    let u = divwitness::random::haar_unitary(3, &mut rng);
    let n = QuantumChannel::unitary(&u).unwrap();
    let q = random_povm(3, 3, &mut rng).unwrap();
    // Through a unitary every POVM is simulable, by U Q U†.
    match simulate_povm(&n, &QuantumChannel::identity(3), &q).unwrap() {
        SimulationOutcome::Simulated(s) => assert!(s.residual <= 1e-6),
        other => panic!("{other:?}"),
    }
}

#[test]
fn teleportation_identity() {
    let mut rng = seeded(33);
    for d in [2, 3] {
        let kit = make_teleport_kit(d).unwrap();
        for _ in 0..20 {
            let rho = random_state(d, &mut rng);
            assert!(kit.teleport(rho.matrix().matrix()).distance(rho.matrix().matrix()) < 1e-9);
        }
    }
}

#[test]
fn teleport_propagator_matches_the_exact_one() {
    let mut rng = seeded(34);
    for k in 0..6 {
        let d = if k < 4 { 2 } else { 3 };
        let a = random_channel_with_rank(d, d, d * d, &mut rng).unwrap();
        let b = compose(&random_channel(d, &mut rng).unwrap(), &a).unwrap();
        let l = build_teleport_propagator(&a, &b).unwrap();
        assert!(validate_cptp(&l).unwrap().ok);
        assert!(l.choi_distance(&exact_candidate(&a, &b).unwrap()) <= 1e-5, "instance {k}");
    }
}

#[test]
fn teleport_propagator_detects_backflow() {
    let a = QuantumChannel::dephasing(0.5).unwrap();
    let b = QuantumChannel::dephasing(0.8).unwrap();
    assert!(matches!(build_teleport_propagator(&a, &b), Err(Error::OrderingViolation(_))));
}
