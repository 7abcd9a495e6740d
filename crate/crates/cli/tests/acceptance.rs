//! Acceptance gate: one PASS/FAIL line per criterion, with timing.
//! Runs without the libtest harness so the lines always reach the output.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use divwitness::channel::{compose, linear_map_rank, qc_channel, validate_cptp};
use divwitness::constructions::{build_qc_propagator, build_teleport_propagator, make_teleport_kit};
use divwitness::discrimination::{guessing_trace, pguess};
use divwitness::divisibility::{
    check_classical, check_divisible, classical_chain_of, detect_reversible, exact_candidate, find_step_propagator_with,
    witness_search, ClassicalStep, Route, RouteUsed, StepStatus, Verdict, WitnessMode, WitnessOptions,
};
use divwitness::dynamics::{amplitude_damping_family, classical_chain, dephasing_family, random_divisible, random_unitary_family};
use divwitness::random::{random_channel, random_channel_with_rank, random_ensemble, random_povm, random_state, seeded};
use divwitness::sdp::DEFAULT_TOL;
use divwitness::{ComplexMatrix, DensityMatrix, Ensemble, Error, HermitianOperator, Povm, QuantumChannel, StochasticMatrix, C64};
use divwitness_cli::{cmd_divide, cmd_witness, DivideOptions, WitnessCmdOptions};

struct Check {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Check {
    Check { ok, detail: detail.into() }
}

type Outcome = Result<Check, String>;

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---- independent oracles

/// Eigenvalues of a 2×2 or 3×3 Hermitian matrix in closed form.
fn small_eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    let n = a.rows();
    let re = |i: usize, j: usize| a[(i, j)].re;
    if n == 2 {
        let tr = re(0, 0) + re(1, 1);
        let det = (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).re;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        return vec![(tr + disc) / 2.0, (tr - disc) / 2.0];
    }
    assert_eq!(n, 3);
    // Trigonometric solution of the characteristic cubic.
    let q = (re(0, 0) + re(1, 1) + re(2, 2)) / 3.0;
    let off = a[(0, 1)].norm_sqr() + a[(0, 2)].norm_sqr() + a[(1, 2)].norm_sqr();
    let p2 = (re(0, 0) - q).powi(2) + (re(1, 1) - q).powi(2) + (re(2, 2) - q).powi(2) + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    if p < 1e-300 {
        return vec![q; 3];
    }
    let b = ComplexMatrix::from_fn(3, 3, |i, j| {
        let shift = if i == j { q } else { 0.0 };
        (a[(i, j)] - C64::new(shift, 0.0)) / p
    });
    let det = (b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
        - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
        + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]))
        .re;
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let third = 2.0 * std::f64::consts::PI / 3.0;
    (0..3).map(|k| q + 2.0 * p * (phi + third * k as f64).cos()).collect()
}

/// ½ + ½‖p ρ₀ − (1 − p) ρ₁‖₁.
fn helstrom_oracle(p: f64, r0: &DensityMatrix, r1: &DensityMatrix) -> f64 {
    let a = &r0.matrix().matrix().scale_real(p) - &r1.matrix().matrix().scale_real(1.0 - p);
    0.5 + 0.5 * small_eigenvalues(&a).iter().map(|l| l.abs()).sum::<f64>()
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

// ---- criteria

fn c1_helstrom() -> Outcome {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(s, 0.0)]).map_err(e2s)?;
    let e = Ensemble::uniform(vec![DensityMatrix::basis(2, 0), plus]).map_err(e2s)?;
    let base = (pguess(&e).map_err(e2s)? - (0.5 + 2f64.sqrt() / 4.0)).abs();
    let mut rng = seeded(1001);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let e = random_ensemble(2 + k % 2, 2, &mut rng);
        let st = e.states();
        let want = helstrom_oracle(st[0].0, &st[0].1, &st[1].1);
        worst = worst.max((pguess(&e).map_err(e2s)? - want).abs());
    }
    Ok(check(base <= 1e-6 && worst <= 1e-6, format!("|0>/|+> error {base:.2e}; max error over 200 random pairs {worst:.2e}")))
}

fn c2_monotonicity() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut traces = 0;
    for k in 0..100u64 {
        let d = 2 + (k % 2) as usize;
        let steps = 1 + (k % 5) as usize;
        let m = random_divisible(d, steps, 5000 + k).map_err(e2s)?;
        let mut rng = seeded(9000 + k);
        for j in 0..10 {
            let e = random_ensemble(d * d, 2 + j % 3, &mut rng);
            let t = guessing_trace(&m, &e, true).map_err(e2s)?;
            worst = worst.max(t.max_increase());
            traces += 1;
        }
    }
    Ok(check(worst <= 1e-6, format!("{traces} extended traces, largest increase {worst:.2e}")))
}

fn c3_dephasing() -> Outcome {
    let m = dephasing_family(&[1.0, 0.5, 0.8]).map_err(e2s)?;
    let r = check_divisible(&m).map_err(e2s)?;
    let step = &r.steps[1];
    let neg = step.negativity.unwrap_or(f64::NAN);
    let certified = step.status == StepStatus::NotDivisibleStep && step.route == RouteUsed::Exact && (neg - 0.6).abs() <= 1e-8;
    let w = witness_search(&m, 2, &WitnessOptions::default()).map_err(e2s)?;
    let Some(w) = w else { return Ok(check(false, format!("negativity {neg}; no witness found"))) };
    let extended = w.ensemble.dim() == 4;
    let ok = certified
        && extended
        && (w.pguess_before - 0.75).abs() <= 1e-4
        && (w.pguess_after - 0.9).abs() <= 1e-4
        && (w.delta - 0.15).abs() <= 1e-4;
    Ok(check(
        ok,
        format!(
            "step 2 negativity {neg:.10}; witness pguess {:.6} -> {:.6}, delta {:.6}",
            w.pguess_before, w.pguess_after, w.delta
        ),
    ))
}

fn c4_classical() -> Outcome {
    let (chain, m) = classical_chain(&[0.0, 0.25, 0.4]).map_err(e2s)?;
    let steps = check_classical(&chain).map_err(e2s)?;
    let (t_ok, t_err) = match &steps[1] {
        ClassicalStep::Divisible { t, residual } => {
            let err = t.max_abs_diff(&StochasticMatrix::bsc(0.3).map_err(e2s)?);
            (*residual <= 1e-10 && err <= 1e-10, err)
        }
        ClassicalStep::NotDivisible { .. } => (false, f64::NAN),
    };
    let forward_agree = check_divisible(&m).map_err(e2s)?.verdict == Verdict::Divisible
        && classical_chain_of(&m).is_some_and(|c| c.len() == 3);

    let (rchain, rm) = classical_chain(&[0.0, 0.4, 0.25]).map_err(e2s)?;
    let rsteps = check_classical(&rchain).map_err(e2s)?;
    let infeasible = matches!(rsteps[1], ClassicalStep::NotDivisible { max_lhs, rhs, .. } if max_lhs <= 1e-9 && rhs > 1e-9);
    let reverse_agree = check_divisible(&rm).map_err(e2s)?.verdict == Verdict::NotDivisible;

    // {½δ₀, ½δ₁} tensored with an ancilla in |0>.
    let delta = Ensemble::uniform(vec![
        DensityMatrix::product(&DensityMatrix::basis(2, 0), &DensityMatrix::basis(2, 0)),
        DensityMatrix::product(&DensityMatrix::basis(2, 0), &DensityMatrix::basis(2, 1)),
    ])
    .map_err(e2s)?;
    let trace = guessing_trace(&rm, &delta, true).map_err(e2s)?;
    let (pb, pa) = (trace.values[1], trace.values[2]);
    let opts = WitnessOptions { mode: WitnessMode::Separable, ..WitnessOptions::default() };
    let found = witness_search(&rm, 2, &opts).map_err(e2s)?;
    let search_ok = found.as_ref().is_some_and(|w| (w.delta - 0.15).abs() <= 1e-4);
    let ok = t_ok && forward_agree && infeasible && reverse_agree && (pb - 0.6).abs() <= 1e-6 && (pa - 0.75).abs() <= 1e-6 && search_ok;
    Ok(check(
        ok,
        format!(
            "T error {t_err:.1e}; reversed chain infeasible: {infeasible}; separable witness {pb:.6} -> {pa:.6}; verdicts agree: {}",
            forward_agree && reverse_agree
        ),
    ))
}

fn c5_qc_propagator() -> Outcome {
    let mut rng = seeded(1005);
    let mut worst: f64 = 0.0;
    let mut all_cptp = true;
    for k in 0..50 {
        let d = 2 + k % 2;
        let n = random_channel(d, &mut rng).map_err(e2s)?;
        let q = random_povm(d, 2 + k % 3, &mut rng).map_err(e2s)?;
        let target = compose(&qc_channel(&q).map_err(e2s)?, &n).map_err(e2s)?;
        let pulled = Povm::new(
            q.elements()
                .iter()
                .map(|e| n.adjoint_apply(e.matrix()).map(|m| HermitianOperator::from_hermitian_part(&m)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(e2s)?,
        )
        .map_err(e2s)?;
        let c = build_qc_propagator(&n, &pulled).map_err(e2s)?;
        all_cptp &= validate_cptp(&c).map_err(e2s)?.ok;
        worst = worst.max(compose(&c, &n).map_err(e2s)?.choi_distance(&target));
    }
    Ok(check(worst <= 1e-6 && all_cptp, format!("50 pairs, max recomposition error {worst:.2e}, all CPTP: {all_cptp}")))
}

fn c6_teleport_propagator() -> Outcome {
    let mut rng = seeded(1006);
    let mut tele: f64 = 0.0;
    for d in [2, 3] {
        let kit = make_teleport_kit(d).map_err(e2s)?;
        for _ in 0..20 {
            let rho = random_state(d, &mut rng);
            tele = tele.max(kit.teleport(rho.matrix().matrix()).distance(rho.matrix().matrix()));
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..25 {
        let d = if k < 15 { 2 } else { 3 };
        let a = random_channel_with_rank(d, d, d * d, &mut rng).map_err(e2s)?;
        let b = compose(&random_channel(d, &mut rng).map_err(e2s)?, &a).map_err(e2s)?;
        let l = build_teleport_propagator(&a, &b).map_err(e2s)?;
        worst = worst.max(l.choi_distance(&exact_candidate(&a, &b).map_err(e2s)?));
    }
    let violation = matches!(
        build_teleport_propagator(&QuantumChannel::dephasing(0.5).map_err(e2s)?, &QuantumChannel::dephasing(0.8).map_err(e2s)?),
        Err(Error::OrderingViolation(_))
    );
    Ok(check(
        tele <= 1e-9 && worst <= 1e-5 && violation,
        format!("teleport error {tele:.2e}; 25 steps, max distance to exact propagator {worst:.2e}; dephasing 0.5->0.8 ordering violation: {violation}"),
    ))
}

fn c7_non_invertible() -> Outcome {
    let m = amplitude_damping_family(&[1.0, 0.5, 0.0, 0.0]).map_err(e2s)?;
    let (n_i, n_j) = (m.channel(2), m.channel(3));
    let exact_refused = find_step_propagator_with(n_i, n_j, Route::Exact, DEFAULT_TOL).is_err();
    let c = find_step_propagator_with(n_i, n_j, Route::Auto, DEFAULT_TOL).map_err(e2s)?;
    let Some(l) = c.propagator else { return Ok(check(false, format!("route B status {:?}", c.status))) };
    let residual = compose(&l, n_i).map_err(e2s)?.choi_distance(n_j);
    let cptp = validate_cptp(&l).map_err(e2s)?.ok;
    let whole = check_divisible(&m).map_err(e2s)?.verdict == Verdict::Divisible;
    Ok(check(
        exact_refused && c.route == RouteUsed::Sdp && cptp && residual <= 1e-6 && whole,
        format!(
            "condition number {:?}; route A refused: {exact_refused}; route B residual {residual:.2e}, CPTP: {cptp}",
            c.condition_number
        ),
    ))
}

fn c8_reversibility() -> Outcome {
    let mut all = true;
    for seed in 0..6u64 {
        let r = detect_reversible(&random_unitary_family(2 + (seed % 2) as usize, 3, seed).map_err(e2s)?).map_err(e2s)?;
        all &= r.reversible && r.unitary.iter().all(|&u| u);
    }
    let m = dephasing_family(&[1.0, 0.5, 0.25]).map_err(e2s)?;
    let divisible = check_divisible(&m).map_err(e2s)?.verdict == Verdict::Divisible;
    let reversible = detect_reversible(&m).map_err(e2s)?.reversible;
    Ok(check(
        all && divisible && !reversible,
        format!("6 unitary families reversible with rank-1 Choi: {all}; dephasing (1, 0.5, 0.25) divisible {divisible}, reversible {reversible}"),
    ))
}

fn c9_completeness() -> Outcome {
    let mut ok = true;
    let mut ranks = Vec::new();
    for eps in [1e-3, 0.1, 1.0, 0.0] {
        let r = linear_map_rank(&QuantumChannel::depolarizing(2, eps).map_err(e2s)?).map_err(e2s)?;
        ok &= r.is_complete == (eps != 0.0);
        ranks.push(format!("eps={eps}: rank {}", r.rank));
    }
    Ok(check(ok, ranks.join(", ")))
}

fn c10_determinism() -> Outcome {
    let opts = DivideOptions { seed: 7, ..DivideOptions::default() };
    let mut same = true;
    for name in ["dephasing.json", "bsc_reversed.json", "random_divisible.json"] {
        let a = cmd_divide(&data(name), &opts).map_err(e2s)?;
        let b = cmd_divide(&data(name), &opts).map_err(e2s)?;
        same &= a == b;
    }
    let wopts = WitnessCmdOptions { step: Some(2), mode: WitnessMode::Entangled, budget: 2000, ensemble_size: 3, seed: 7 };
    let a = cmd_witness(&data("dephasing.json"), &wopts, None).map_err(e2s)?;
    let b = cmd_witness(&data("dephasing.json"), &wopts, None).map_err(e2s)?;
    same &= a == b;
    let bin = env!("CARGO_BIN_EXE_divwitness");
    let run = || {
        std::process::Command::new(bin)
            .args(["witness", data("bsc_reversed.json").to_str().unwrap(), "--mode", "separable", "--seed", "7"])
            .output()
            .map(|o| o.stdout)
    };
    same &= run().map_err(e2s)? == run().map_err(e2s)?;
    Ok(check(same, "divide x3 and witness x2 (in-process and binary) reproduced byte for byte"))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("Helstrom agreement", Duration::from_secs(30), c1_helstrom),
        ("data-processing monotonicity", Duration::from_secs(600), c2_monotonicity),
        ("dephasing backflow", Duration::from_secs(60), c3_dephasing),
        ("classical equivalence", Duration::from_secs(10), c4_classical),
        ("qc propagator construction", Duration::from_secs(300), c5_qc_propagator),
        ("teleportation propagator", Duration::from_secs(600), c6_teleport_propagator),
        ("non-invertible route", Duration::from_secs(600), c7_non_invertible),
        ("reversibility", Duration::from_secs(600), c8_reversibility),
        ("completeness", Duration::from_secs(600), c9_completeness),
        ("determinism", Duration::from_secs(600), c10_determinism),
    ];
    let mut failed = 0;
    for (k, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(c) => (c.ok && elapsed <= *budget, c.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.2} s, budget {} s]",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
