use divwitness::channel::{apply, choi_from_kraus, compose, embed_stochastic, qc_channel, validate_cptp};
use divwitness::discrimination::{helstrom, pguess, pguess_detailed, PGUESS_TOL};
use divwitness::divisibility::{find_step_propagator_with, Route, StepStatus};
use divwitness::random::{
    haar_unitary, random_channel, random_ensemble, random_povm, random_simplex, random_state, seeded,
};
use divwitness::sdp::{solve_feasibility, AffinePsdProblem, SdpStatus, DEFAULT_MAX_ITER, DEFAULT_TOL};
use divwitness::{ComplexMatrix, DensityMatrix, Ensemble, HermitianOperator, QuantumChannel, StochasticMatrix};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn dim() -> impl Strategy<Value = usize> {
    2usize..=3
}

fn random_stochastic(d: usize, seed: u64) -> StochasticMatrix {
    let mut rng = seeded(seed);
    let cols: Vec<Vec<f64>> = (0..d).map(|_| random_simplex(d, &mut rng)).collect();
    StochasticMatrix::new(d, (0..d * d).map(|k| cols[k % d][k / d]).collect()).unwrap()
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn composition_is_associative(d in dim(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let (a, b, c) = (random_channel(d, &mut rng).unwrap(), random_channel(d, &mut rng).unwrap(), random_channel(d, &mut rng).unwrap());
        let left = compose(&compose(&c, &b).unwrap(), &a).unwrap();
        let right = compose(&c, &compose(&b, &a).unwrap()).unwrap();
        prop_assert!(left.choi_distance(&right) < 1e-12);
        prop_assert!(validate_cptp(&left).unwrap().ok);
    }

    #[test]
    fn composition_matches_sequential_application(d in dim(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let (a, b) = (random_channel(d, &mut rng).unwrap(), random_channel(d, &mut rng).unwrap());
        let rho = random_state(d, &mut rng);
        let once = apply(&compose(&b, &a).unwrap(), &rho).unwrap();
        let twice = apply(&b, &apply(&a, &rho).unwrap()).unwrap();
        prop_assert!(once.matrix().matrix().distance(twice.matrix().matrix()) < 1e-12);
    }

    #[test]
    fn kraus_and_transfer_round_trips(d in dim(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = random_channel(d, &mut rng).unwrap();
        let k = n.kraus().unwrap();
        prop_assert!(k.len() <= d * d);
        prop_assert!(choi_from_kraus(&k).unwrap().choi_distance(&n) < 1e-10);
        let back = QuantumChannel::from_transfer_matrix(d, d, &n.transfer_matrix()).unwrap();
        prop_assert!(back.choi_distance(&n) < 1e-12);
    }

    #[test]
    fn qc_outputs_commute(d in dim(), outcomes in 2usize..=4, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let q = qc_channel(&random_povm(d, outcomes, &mut rng).unwrap()).unwrap();
        let a = apply(&q, &random_state(d, &mut rng)).unwrap();
        let b = apply(&q, &random_state(d, &mut rng)).unwrap();
        prop_assert!(a.matrix().matrix().commutator(b.matrix().matrix()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn embedding_respects_products(d in dim(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (random_stochastic(d, s1), random_stochastic(d, s2));
        let lhs = embed_stochastic(&a.matmul(&b));
        let rhs = compose(&embed_stochastic(&a), &embed_stochastic(&b)).unwrap();
        prop_assert!(lhs.choi_distance(&rhs) < 1e-12);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn pguess_obeys_data_processing(d in dim(), size in 2usize..=4, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let e = random_ensemble(d, size, &mut rng);
        let n = random_channel(d, &mut rng).unwrap();
        let before = pguess(&e).unwrap();
        let after = pguess(&e.mapped(&n).unwrap()).unwrap();
        prop_assert!(after <= before + 1e-8, "{before} -> {after}");
        prop_assert!(before >= e.max_prior() - 1e-12 && before <= 1.0);
    }

    #[test]
    fn pguess_is_unitarily_invariant(d in dim(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let e = random_ensemble(d, 3, &mut rng);
        let u = QuantumChannel::unitary(&haar_unitary(d, &mut rng)).unwrap();
        let a = pguess(&e).unwrap();
        let b = pguess(&e.mapped(&u).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-7);
    }

    #[test]
    fn two_state_pguess_matches_helstrom(d in dim(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let e = random_ensemble(d, 2, &mut rng);
        let s = e.states();
        let h = helstrom(s[0].0, &s[0].1, &s[1].1).unwrap();
        prop_assert!((pguess(&e).unwrap() - h).abs() < 1e-6);
    }

    #[test]
    fn weak_duality_and_dual_feasibility(d in dim(), size in 2usize..=4, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let e = random_ensemble(d, size, &mut rng);
        let r = pguess_detailed(&e, PGUESS_TOL).unwrap();
        prop_assert_eq!(r.sdp.status, SdpStatus::Optimal);
        prop_assert!(r.primal_value <= r.value + 1e-9);
        // Any POVM is a lower bound on the dual value.
        let m = random_povm(d, size, &mut rng).unwrap();
        let lower: f64 = e.states().iter().zip(m.elements()).map(|((p, rho), mx)| p * rho.matrix().matrix().trace_product(mx.matrix()).re).sum();
        prop_assert!(lower <= r.value + 1e-9);
        let k = r.sdp.solution.as_ref().unwrap();
        for (p, rho) in e.states() {
            prop_assert!(k.sub(&rho.matrix().scale(*p)).min_eigenvalue().unwrap() >= -1e-9);
        }
    }

    #[test]
    fn feasible_systems_are_recognized(n in 2usize..=4, m in 1usize..=5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let x0 = random_state(n, &mut rng);
        let mut p = AffinePsdProblem::new(n);
        for _ in 0..m {
            let g = divwitness::random::ginibre(n, n, &mut rng);
            let a = HermitianOperator::from_hermitian_part(&g);
            let b = x0.matrix().matrix().trace_product(a.matrix()).re;
            p.add_trace_constraint(&a, b).unwrap();
        }
        let r = solve_feasibility(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert_eq!(r.status, SdpStatus::Feasible);
        let (min_eig, residual) = p.check_solution(r.solution.as_ref().unwrap()).unwrap();
        prop_assert!(min_eig >= -1e-9 && residual <= 1e-6, "{min_eig} {residual}");
    }

    #[test]
    fn sdp_route_recomposes_divisible_steps(d in dim(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let a = random_channel(d, &mut rng).unwrap();
        let b = compose(&random_channel(d, &mut rng).unwrap(), &a).unwrap();
        let c = find_step_propagator_with(&a, &b, Route::Sdp, DEFAULT_TOL).unwrap();
        prop_assert_eq!(c.status, StepStatus::DivisibleStep);
        let l = c.propagator.unwrap();
        prop_assert!(validate_cptp(&l).unwrap().ok);
        prop_assert!(compose(&l, &a).unwrap().choi_distance(&b) <= 1e-6);
    }
}

#[test]
fn unit_trace_states_are_not_more_than_certain() {
    let e = Ensemble::uniform(vec![DensityMatrix::basis(3, 0), DensityMatrix::basis(3, 1), DensityMatrix::basis(3, 2)]).unwrap();
    assert!((pguess(&e).unwrap() - 1.0).abs() < 1e-9);
    let flat = Ensemble::uniform(vec![DensityMatrix::maximally_mixed(3); 3]).unwrap();
    assert!((pguess(&flat).unwrap() - 1.0 / 3.0).abs() < 1e-9);
    let _ = ComplexMatrix::identity(1);
}
