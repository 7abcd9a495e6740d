use divwitness::channel::{compose, embed_stochastic, validate_cptp};
use divwitness::discrimination::guessing_trace;
use divwitness::divisibility::{
    check_classical, check_divisible, classical_chain_of, classical_step_propagator, detect_reversible,
    find_step_propagator, find_step_propagator_with, witness_search, ClassicalStep, Route, RouteUsed, StepStatus,
    Verdict, WitnessMode, WitnessOptions,
};
use divwitness::dynamics::{
    amplitude_damping_family, classical_chain, collision_mapping, dephasing_family, partial_swap_model,
    random_divisible, random_unitary_family,
};
use divwitness::io::MappingJson;
use divwitness::random::{random_channel, random_simplex, random_uniform_average_ensemble, seeded};
use divwitness::sdp::DEFAULT_TOL;
use divwitness::StochasticMatrix;
use rand::Rng;

fn random_stochastic<R: Rng>(d: usize, rng: &mut R) -> StochasticMatrix {
    let cols: Vec<Vec<f64>> = (0..d).map(|_| random_simplex(d, rng)).collect();
    StochasticMatrix::new(d, (0..d * d).map(|k| cols[k % d][k / d]).collect()).unwrap()
}

#[test]
fn exact_and_sdp_routes_agree() {
    let mut rng = seeded(21);
    let mut compared = 0;
    for k in 0..100 {
        let d = if k % 4 == 3 { 3 } else { 2 };
        let a = random_channel(d, &mut rng).unwrap();
        let b = if k % 2 == 0 {
            compose(&random_channel(d, &mut rng).unwrap(), &a).unwrap()
        } else {
            random_channel(d, &mut rng).unwrap()
        };
        let exact = match find_step_propagator_with(&a, &b, Route::Exact, DEFAULT_TOL) {
            Ok(c) => c,
            Err(_) => continue, // ill-conditioned draw
        };
        let sdp = find_step_propagator_with(&a, &b, Route::Sdp, DEFAULT_TOL).unwrap();
        assert_eq!(sdp.route, RouteUsed::Sdp);
        if exact.status == StepStatus::Undecided || sdp.status == StepStatus::Undecided {
            continue;
        }
        assert_eq!(exact.status, sdp.status, "instance {k}: negativity {:?}", exact.negativity);
        if let (Some(l1), Some(l2)) = (&exact.propagator, &sdp.propagator) {
            // Invertible N_i: the propagator is unique.
            assert!(l1.choi_distance(l2) < 1e-5);
        }
        compared += 1;
    }
    assert!(compared >= 90, "only {compared} decided comparisons");
}

#[test]
fn divisible_mappings_never_gain_information() {
    for seed in 0..8u64 {
        let d = 2 + (seed % 2) as usize;
        let m = random_divisible(d, 4, seed).unwrap();
        assert_eq!(check_divisible(&m).unwrap().verdict, Verdict::Divisible);
        let mut rng = seeded(seed + 100);
        for _ in 0..3 {
            let e = random_uniform_average_ensemble(d * d, 3, &mut rng).unwrap();
            assert!(guessing_trace(&m, &e, true).unwrap().max_increase() <= 1e-6);
        }
    }
}

#[test]
fn backflow_witness_for_dephasing() {
    let m = dephasing_family(&[1.0, 0.5, 0.8]).unwrap();
    let r = check_divisible(&m).unwrap();
    assert_eq!(r.verdict, Verdict::NotDivisible);
    assert_eq!(r.steps[0].status, StepStatus::DivisibleStep);
    assert!((r.steps[1].negativity.unwrap() - 0.6).abs() < 1e-8);
    let w = witness_search(&m, 2, &WitnessOptions::default()).unwrap().expect("witness");
    assert!((w.pguess_before - 0.75).abs() < 1e-4);
    assert!((w.pguess_after - 0.9).abs() < 1e-4);
    assert!((w.delta - 0.15).abs() < 1e-4);
    // No witness where the step is divisible.
    assert!(witness_search(&m, 1, &WitnessOptions { budget: 300, ..WitnessOptions::default() }).unwrap().is_none());
}

#[test]
fn classical_and_embedded_verdicts_agree() {
    let mut rng = seeded(22);
    for k in 0..100 {
        let d = 2 + k % 2;
        let p_i = random_stochastic(d, &mut rng);
        let p_j = if k % 3 == 0 { random_stochastic(d, &mut rng).matmul(&p_i) } else { random_stochastic(d, &mut rng) };
        let lp = classical_step_propagator(&p_i, &p_j).unwrap();
        let q = find_step_propagator(&embed_stochastic(&p_i), &embed_stochastic(&p_j)).unwrap();
        let lp_divisible = matches!(lp, ClassicalStep::Divisible { .. });
        match q.status {
            StepStatus::DivisibleStep => assert!(lp_divisible, "instance {k}"),
            StepStatus::NotDivisibleStep => assert!(!lp_divisible, "instance {k}"),
            StepStatus::Undecided => {}
        }
        if k % 3 == 0 {
            assert!(lp_divisible);
        }
    }
}

#[test]
fn bsc_chains() {
    let (chain, m) = classical_chain(&[0.0, 0.25, 0.4]).unwrap();
    assert_eq!(classical_chain_of(&m).unwrap().len(), 3);
    let steps = check_classical(&chain).unwrap();
    match &steps[1] {
        ClassicalStep::Divisible { t, residual } => {
            assert!(t.max_abs_diff(&StochasticMatrix::bsc(0.3).unwrap()) < 1e-12);
            assert!(*residual <= 1e-10);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(check_divisible(&m).unwrap().verdict, Verdict::Divisible);

    let (chain, m) = classical_chain(&[0.0, 0.4, 0.25]).unwrap();
    assert!(matches!(check_classical(&chain).unwrap()[1], ClassicalStep::NotDivisible { .. }));
    assert_eq!(check_divisible(&m).unwrap().verdict, Verdict::NotDivisible);
    let opts = WitnessOptions { mode: WitnessMode::Separable, ..WitnessOptions::default() };
    let w = witness_search(&m, 2, &opts).unwrap().expect("separable witness");
    assert!((w.pguess_before - 0.6).abs() < 1e-4 && (w.pguess_after - 0.75).abs() < 1e-4);
}

#[test]
fn fresh_collisions_are_divisible() {
    let mut rng = seeded(23);
    for _ in 0..6 {
        let thetas: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..std::f64::consts::PI)).collect();
        let m = collision_mapping(&partial_swap_model(&thetas), 4, false).unwrap();
        assert_eq!(check_divisible(&m).unwrap().verdict, Verdict::Divisible);
    }
    let half = std::f64::consts::FRAC_PI_2;
    let memory = collision_mapping(&partial_swap_model(&[half, half]), 2, true).unwrap();
    assert_eq!(check_divisible(&memory).unwrap().verdict, Verdict::NotDivisible);
}

#[test]
fn non_invertible_steps_use_the_sdp_route() {
    let m = amplitude_damping_family(&[1.0, 0.5, 0.0, 0.0]).unwrap();
    let r = check_divisible(&m).unwrap();
    assert_eq!(r.verdict, Verdict::Divisible);
    for (k, c) in r.steps.iter().enumerate().skip(2) {
        assert_eq!(c.route, RouteUsed::Sdp, "step {}", k + 1);
        let l = c.propagator.as_ref().unwrap();
        assert!(validate_cptp(l).unwrap().ok);
        assert!(compose(l, m.channel(k)).unwrap().choi_distance(m.channel(k + 1)) <= 1e-6);
    }
    assert!(find_step_propagator_with(m.channel(2), m.channel(3), Route::Exact, DEFAULT_TOL).is_err());
}

#[test]
fn reversibility() {
    for seed in 0..4 {
        let r = detect_reversible(&random_unitary_family(2 + (seed % 2) as usize, 3, seed).unwrap()).unwrap();
        assert!(r.reversible && r.unitary.iter().all(|&u| u));
    }
    let m = dephasing_family(&[1.0, 0.5, 0.25]).unwrap();
    assert_eq!(check_divisible(&m).unwrap().verdict, Verdict::Divisible);
    assert!(!detect_reversible(&m).unwrap().reversible);
}

#[test]
fn generator_is_deterministic() {
    let a = serde_json::to_string(&MappingJson::from_mapping(&random_divisible(2, 3, 42).unwrap())).unwrap();
    let b = serde_json::to_string(&MappingJson::from_mapping(&random_divisible(2, 3, 42).unwrap())).unwrap();
    assert_eq!(a, b);
    assert_eq!(random_divisible(3, 0, 1).unwrap().len(), 1);
}
