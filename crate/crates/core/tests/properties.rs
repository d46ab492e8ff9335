use std::f64::consts::PI;

use gkp_forge::circuit::{fidelity_gradient, BlockParams, CircuitParams, GateSet};
use gkp_forge::fock::{gate, hermite_functions, FockVector, GateKind};
use gkp_forge::logical::{apply_logical, correction_for, fold_centered, phase_gate_params, LogicalGate};
use gkp_forge::metrics::{fidelity, fold_to_cell, zak_overlap, ErrorProbabilityConfig};
use gkp_forge::optimizer::format_g12;
use num_complex::Complex64;
use proptest::prelude::*;

const SQRT_PI: f64 = 1.772_453_850_905_516;

fn kind() -> impl Strategy<Value = GateKind> {
    prop::sample::select(GateKind::ALL.to_vec())
}

fn state(cutoff: usize) -> impl Strategy<Value = FockVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), cutoff).prop_filter_map("nonzero", |v| {
        let amps: Vec<Complex64> = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        FockVector::new(amps).ok()?.normalized().ok()
    })
}

fn low_energy_state(cutoff: usize, occupied: usize) -> impl Strategy<Value = FockVector> {
    state(occupied).prop_map(move |s| s.resized(cutoff).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gates_are_unitary_one_parameter_groups(k in kind(), n in 2usize..24, a in -1.5f64..1.5, b in -1.5f64..1.5) {
        let g = gate(k, n).unwrap();
        let ua = g.unitary(a);
        prop_assert!(ua.is_unitary(1e-10));
        let prod = ua.matmul(&g.unitary(b)).unwrap();
        prop_assert!(prod.max_abs_diff(&g.unitary(a + b)).unwrap() < 1e-10);
        let inv = ua.matmul(&g.unitary(-a)).unwrap();
        prop_assert!(inv.max_abs_diff(&g.unitary(0.0)).unwrap() < 1e-10);
    }

    #[test]
    fn applying_a_gate_keeps_the_norm(k in kind(), s in state(16), t in -2.0f64..2.0) {
        let out = gate(k, 16).unwrap().apply(t, &s).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_functions_obey_the_uniform_bound(x in -40.0f64..40.0) {
        let mut h = vec![0.0; 300];
        hermite_functions(x, &mut h);
        let bound = PI.powf(-0.25) + 1e-12;
        prop_assert!(h.iter().all(|v| v.is_finite() && v.abs() <= bound));
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in state(12), b in state(12)) {
        let f = fidelity(&a, &b);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        prop_assert!((f - fidelity(&b, &a)).abs() < 1e-14);
        prop_assert!((fidelity(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn folded_corrections_stay_in_the_half_open_interval(p in -50.0f64..50.0) {
        let c = correction_for(p);
        prop_assert!(c > -SQRT_PI / 2.0 && c <= SQRT_PI / 2.0);
        let k = (p + c) / SQRT_PI;
        prop_assert!((k - k.round()).abs() < 1e-9);
        prop_assert!(fold_centered(p) > -SQRT_PI / 2.0 && fold_centered(p) <= SQRT_PI / 2.0);
    }

    #[test]
    fn cell_folding_lands_in_the_cell(u in -30.0f64..30.0, v in -30.0f64..30.0) {
        let (uu, vv, phase) = fold_to_cell(u, v);
        prop_assert!(uu > -SQRT_PI && uu <= SQRT_PI);
        prop_assert!(vv > -SQRT_PI / 2.0 && vv <= SQRT_PI / 2.0);
        prop_assert!((phase.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zak_overlap_is_quasi_periodic(s in low_energy_state(30, 6), u in -1.5f64..1.5, v in -0.8f64..0.8, k in -2i32..=2) {
        let cfg = ErrorProbabilityConfig::default();
        let base = zak_overlap(&s, u, v, &cfg).unwrap();
        let shifted = zak_overlap(&s, u + 2.0 * SQRT_PI * k as f64, v, &cfg).unwrap();
        let expected = Complex64::from_polar(1.0, -2.0 * SQRT_PI * k as f64 * v) * base;
        prop_assert!((shifted - expected).norm() < 1e-10);
        let v_shifted = zak_overlap(&s, u, v + SQRT_PI * k as f64, &cfg).unwrap();
        prop_assert!((v_shifted - base).norm() < 1e-10);
    }

    #[test]
    fn phase_gate_parameters_satisfy_the_decomposition(s in -20.0f64..20.0) {
        let d = phase_gate_params(s).unwrap();
        prop_assert!((2.0 * d.r.sinh() - s).abs() < 1e-10 * s.abs().max(1.0));
        prop_assert!(d.theta > 0.0 && d.theta < PI / 2.0);
        prop_assert!((d.theta.tan() - d.r.exp()).abs() < 1e-9 * d.r.exp());
    }

    #[test]
    fn fourier_composes_to_parity(s in state(20)) {
        let twice = apply_logical(&apply_logical(&s, LogicalGate::Fourier).unwrap(), LogicalGate::Fourier).unwrap();
        let parity = FockVector::new(
            s.amplitudes().iter().enumerate().map(|(n, a)| if n % 2 == 0 { *a } else { -*a }).collect(),
        ).unwrap();
        prop_assert!((fidelity(&twice, &parity) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn g12_formatting_round_trips(x in prop::num::f64::NORMAL) {
        let back: f64 = format_g12(x).parse().unwrap();
        prop_assert!(((back - x) / x).abs() < 1e-11);
    }

    #[test]
    fn circuit_json_round_trips(seed in any::<u64>(), v in prop::collection::vec(-2.0f64..2.0, 12)) {
        let blocks = v.chunks(4).map(BlockParams::from_slice).collect();
        let p = CircuitParams::new(0.3, 20, seed, blocks).unwrap();
        prop_assert_eq!(CircuitParams::from_json(&p.to_json().unwrap()).unwrap(), p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn gradient_matches_central_differences(v in prop::collection::vec(-0.4f64..0.4, 20), t in low_energy_state(30, 10)) {
        let mut blocks: Vec<BlockParams> = v.chunks(4).map(BlockParams::from_slice).collect();
        for b in &mut blocks {
            b.k *= 0.1;
        }
        let p = CircuitParams::new(0.3, 30, 0, blocks).unwrap();
        let g = fidelity_gradient(&p, &t).unwrap();
        let gates = GateSet::new(30).unwrap();
        let theta = p.to_vector();
        let f = |th: &[f64]| t.inner(&gates.forward(th).unwrap()).norm_sqr();
        let h = 1e-5;
        for j in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let fd = (f(&tp) - f(&tm)) / (2.0 * h);
            let scale = fd.abs().max(1e-3);
            prop_assert!((g[j] - fd).abs() / scale < 1e-5, "param {}: {} vs {}", j, g[j], fd);
        }
    }
}
