mod common;

use common::*;
use gridobs::benchmark::{self, delta_index, omega_index};
use gridobs::control;
use gridobs::estimation::{self, Observer};
use gridobs::model::{LtiModel, ModelParts};
use gridobs::nalgebra::{DMatrix, DVector};
use gridobs::simulate::{self, Pulse, DEFAULT_PULSE};
use gridobs::{Error, Model};

fn no_input(m: &Model) -> impl Fn(f64) -> DVector<f64> {
    let k = m.inputs();
    move |_| DVector::zeros(k)
}

#[test]
fn zero_state_and_input_stay_at_rest() {
    let model: Model = benchmark::default_benchmark();
    let x0 = DVector::zeros(8);
    let tr = simulate::simulate_plant(&model, no_input(&model), None, &x0, 2.0, 1e-3).unwrap();
    assert!(tr.x.iter().all(|x| x.amax() == 0.0));
    assert_eq!(tr.len(), 2001);
}

#[test]
fn real_mode_decays_at_its_eigenvalue() {
    let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.5, 0.0, 0.0, -2.0, 1.0, 0.0, 0.0, -0.5]);
    let model = LtiModel::new(ModelParts { a, ..random_model(&mut rng(3), 3).into_parts() }).unwrap();
    let lam = -0.5;
    let mut v = (model.a() - DMatrix::identity(3, 3) * lam).svd(true, true).v_t.unwrap().row(2).transpose();
    v /= v.norm();
    let tr = simulate::simulate_plant(&model, no_input(&model), None, &v, 4.0, 1e-3).unwrap();
    for (t, x) in tr.t.iter().zip(&tr.x) {
        assert!((x.norm() - (lam * t).exp()).abs() <= 1e-8);
    }
}

#[test]
fn misaligned_pulse_is_rejected() {
    let model: Model = benchmark::default_benchmark();
    let p = Pulse::new(1.0, 0.5, 0.05, 0).unwrap();
    let r = simulate::simulate_plant(&model, no_input(&model), Some(&p), &DVector::zeros(8), 2.0, 0.3);
    assert!(matches!(r, Err(Error::GridMisaligned(_))));
}

#[test]
fn swing_energy_never_increases() {
    let p = benchmark::default_params::<f64>();
    let model = benchmark::build_two_area(&p).unwrap();
    let k = p.stiffness_matrix();
    let mut x0 = DVector::zeros(8);
    x0[omega_index(2)] = 1e-3;
    x0[delta_index(3)] = 0.02;
    let tr = simulate::simulate_plant(&model, no_input(&model), None, &x0, 10.0, 1e-3).unwrap();
    let energy = |x: &DVector<f64>| {
        let d = DVector::from_fn(4, |i, _| x[delta_index(i + 1)]);
        let w = DVector::from_fn(4, |i, _| x[omega_index(i + 1)]);
        (0..4).map(|i| p.h[i] * w[i] * w[i]).sum::<f64>() + (d.transpose() * &k * &d)[(0, 0)] / (2.0 * p.omega_base)
    };
    let e0 = energy(&x0);
    for w in tr.x.windows(2) {
        assert!(energy(&w[1]) <= energy(&w[0]) + 1e-14 * e0);
    }
}

#[test]
fn observers_with_exact_initial_estimate_stay_exact() {
    let model: Model = benchmark::default_benchmark();
    let x0 = DVector::zeros(8);
    let (luen, _) = estimation::design_luenberger(&model, 1.0).unwrap();
    let (uio, _) = estimation::design_uio(&model).unwrap();
    let tr = simulate::simulate_estimation(&model, &Observer::Luenberger(luen), None, &x0, &x0, 5.0, 1e-3).unwrap();
    assert!(tr.error_norms().iter().all(|&e| e == 0.0));
    let tr = simulate::simulate_estimation(&model, &Observer::Uio(uio), Some(&DEFAULT_PULSE), &x0, &x0, 5.0, 1e-3).unwrap();
    let pk = tr.y_r.iter().fold(0.0f64, |m, y| m.max(y.amax()));
    assert!(tr.error_norms().iter().all(|&e| e <= 1e-9 * pk.max(1e-12)));
}

#[test]
fn zero_gain_loop_is_the_open_loop_plant() {
    let model: Model = benchmark::default_benchmark();
    let sel = benchmark::default_selector();
    let (uio, _) = estimation::design_uio(&model).unwrap();
    let x0 = DVector::zeros(8);
    let cl = simulate::simulate_closed_loop(&model, &uio, &sel, 0.0, Some(&DEFAULT_PULSE), &x0, &x0, 10.0, 1e-3).unwrap();
    let ol = simulate::simulate_plant(&model, no_input(&model), Some(&DEFAULT_PULSE), &x0, 10.0, 1e-3).unwrap();
    for (a, b) in cl.x.iter().zip(&ol.x) {
        assert!((a - b).amax() <= 1e-14);
    }
}

#[test]
fn exact_estimate_matches_full_information_feedback() {
    let model: Model = benchmark::default_benchmark();
    let sel = benchmark::default_selector();
    let (uio, _) = estimation::design_uio(&model).unwrap();
    let k = 20.0;
    let x0 = DVector::zeros(8);
    let cl = simulate::simulate_closed_loop(&model, &uio, &sel, k, Some(&DEFAULT_PULSE), &x0, &x0, 10.0, 1e-3).unwrap();
    let ideal = LtiModel::new(ModelParts { a: control::plant_block(&model, &sel, k), ..model.parts().clone() }).unwrap();
    let fi = simulate::simulate_plant(&ideal, no_input(&ideal), Some(&DEFAULT_PULSE), &x0, 10.0, 1e-3).unwrap();
    let scale = fi.x.iter().fold(0.0f64, |m, x| m.max(x.amax()));
    for (a, b) in cl.x.iter().zip(&fi.x) {
        assert!((a - b).amax() <= 1e-8 * scale);
    }
}

#[test]
fn closed_loop_records_synthesized_signal() {
    let model: Model = benchmark::default_benchmark();
    let sel = benchmark::default_selector();
    let (uio, _) = estimation::design_uio(&model).unwrap();
    let x0 = DVector::zeros(8);
    let cl = simulate::simulate_closed_loop(&model, &uio, &sel, 10.0, Some(&DEFAULT_PULSE), &x0, &x0, 5.0, 1e-3).unwrap();
    let (li, ri) = (sel.local_rows[0], sel.remote_rows[0]);
    let truth = cl.output_difference(li, ri);
    let synth = cl.synthesized_difference(li, ri);
    let pk = truth.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(pk > 0.0);
    assert!(truth.iter().zip(&synth).all(|(a, b)| (a - b).abs() <= 1e-9 * pk));
    let u = cl.u.iter().map(|u| u[sel.input_index]).collect::<Vec<_>>();
    assert!(u.iter().zip(&truth).all(|(u, s)| (u + 10.0 * s).abs() <= 1e-9 * pk * 10.0));
}

#[test]
fn csv_uses_full_precision() {
    let s = simulate::csv_table(&[0.0, 0.5], &["y".to_string()], &[vec![-0.1, 1.0]]);
    assert_eq!(s, "t,y\n0.0000000000000000e0,-1.0000000000000001e-1\n5.0000000000000000e-1,1.0000000000000000e0\n");
}
