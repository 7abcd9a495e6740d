use divwitness_web::{bsc_chain, dephasing_explorer, explore_bsc_chain, explore_dephasing, explore_pguess, pguess_explorer};
use serde_json::Value;

#[test]
fn dephasing_trace_follows_the_coherence() {
    let gammas = [1.0, 0.5, 0.8, -0.3];
    let r = explore_dephasing(&gammas, 0).unwrap();
    // Φ+ and Φ- differ only in the coherence, so P_guess = (1 + |γ|)/2.
    for (v, g) in r.bell_trace.iter().zip(gammas) {
        assert!((v - 0.5 * (1.0 + g.abs())).abs() < 1e-6);
    }
    assert_eq!(r.steps[1].status, "not_divisible");
    assert!((r.steps[1].negativity.unwrap() - 0.6).abs() < 1e-8);
    let w = r.witness.unwrap();
    assert_eq!(w.step, 2);
    assert!((w.delta - 0.15).abs() < 1e-4);
}

#[test]
fn divisible_dephasing_has_no_witness() {
    let r = explore_dephasing(&[1.0, 0.9, 0.5], 3).unwrap();
    assert!(r.witness.is_none());
    assert!(r.steps.iter().all(|s| s.status == "divisible"));
}

#[test]
fn pguess_matches_closed_forms() {
    for (p, gamma) in [(0.5, 0.5), (0.3, 1.0), (0.8, -0.2)] {
        let r = explore_pguess(p, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], gamma).unwrap();
        // p ρ0 − (1−p) ρ1 = ((2p−1) 1 + v·σ)/2 has trace norm max(|2p−1|, |v|).
        let norm = |a: [f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let want = |r1x: f64| {
            let v = [-(1.0 - p) * r1x, 0.0, p];
            0.5 + 0.5 * (2.0 * p - 1.0).abs().max(norm(v))
        };
        assert!((r.helstrom - want(1.0)).abs() < 1e-12);
        assert!((r.sdp - want(1.0)).abs() < 1e-6);
        assert!((r.helstrom_dephased - want(gamma)).abs() < 1e-12);
        assert!((r.sdp_dephased - want(gamma)).abs() < 1e-6);
    }
}

#[test]
fn bsc_steps_are_binary_symmetric() {
    let flips = [0.0, 0.25, 0.4, 0.3];
    let r = explore_bsc_chain(&flips).unwrap();
    for (k, s) in r.steps.iter().enumerate() {
        let (fi, fj) = (flips[k], flips[k + 1]);
        assert_eq!(s.divisible, fj >= fi);
        assert_eq!(s.embedded, if s.divisible { "divisible" } else { "not_divisible" });
        if let Some(t) = &s.t {
            let q = (fj - fi) / (1.0 - 2.0 * fi);
            for (x, want) in t.iter().zip([1.0 - q, q, q, 1.0 - q]) {
                assert!((x - want).abs() < 1e-12);
            }
        } else {
            assert!(s.certificate_rhs.unwrap() > 0.0);
        }
    }
}

#[test]
fn exported_functions_report_errors_as_json() {
    let v: Value = serde_json::from_str(&dephasing_explorer(&[0.5, 0.2], 0)).unwrap();
    assert!(v["error"].as_str().unwrap().contains("start at 1"));
    let v: Value = serde_json::from_str(&pguess_explorer(0.5, &[0.0, 1.0], &[1.0, 0.0, 0.0], 1.0)).unwrap();
    assert!(v["error"].is_string());
    let v: Value = serde_json::from_str(&pguess_explorer(0.5, &[0.0, 0.0, 2.0], &[1.0, 0.0, 0.0], 1.0)).unwrap();
    assert!(v["error"].is_string());
    let v: Value = serde_json::from_str(&bsc_chain(&[0.0, 0.1])).unwrap();
    assert_eq!(v["steps"][0]["divisible"], true);
}
