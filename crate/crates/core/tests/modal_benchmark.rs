use gridobs::benchmark::{self, delta_index, omega_index};
use gridobs::linalg;
use gridobs::modal::{self, damping_ratio, SWING_BAND, SWING_THRESHOLD};
use gridobs::nalgebra::Complex;
use gridobs::Model;

fn bench() -> Model {
    benchmark::default_benchmark()
}

#[test]
fn reported_damping_ratios() {
    assert!((damping_ratio(Complex::new(-0.037f64, 3.90)).unwrap() - 0.00949).abs() < 5e-6);
    assert!((damping_ratio(Complex::new(-1.03f64, 6.8)).unwrap() - 0.1498).abs() < 5e-5);
    assert_eq!(damping_ratio(Complex::new(-1.0f64, 0.0)).unwrap(), 1.0);
}

#[test]
fn eigenvector_residuals_on_benchmark() {
    let m = bench();
    let a = linalg::complexify(m.a());
    let scale = linalg::norm2(m.a());
    for mode in modal::eigenmodes(m.a()).unwrap().modes {
        let lam = mode.eigenvalue;
        let r = &a * &mode.right - &mode.right * lam;
        assert!(linalg::cnorm(&r) <= 1e-9 * scale * linalg::cnorm(&mode.right));
        let l = a.adjoint() * &mode.left - &mode.left * lam.conj();
        assert!(linalg::cnorm(&l) <= 1e-9 * scale * linalg::cnorm(&mode.left));
        let dot = mode.left.dotc(&mode.right);
        assert!((dot - Complex::new(1.0, 0.0)).norm() <= 1e-9);
    }
}

#[test]
fn first_area_machines_dominate_inter_area_participation() {
    let m = bench();
    let m1 = &modal::identify_swing_modes(&m, SWING_BAND, SWING_THRESHOLD).unwrap()[0];
    let machine = |i: usize| m1.participation[delta_index(i)] + m1.participation[omega_index(i)];
    assert!(machine(1) + machine(3) > machine(2) + machine(4));
}

#[test]
fn best_loop_is_g2_with_dw24() {
    let m = bench();
    let m1 = &modal::identify_swing_modes(&m, SWING_BAND, SWING_THRESHOLD).unwrap()[0];
    let ranked = modal::rank_loops(&m, m1).unwrap();
    assert_eq!(ranked.len(), 4 * 6);
    assert_eq!(ranked[0].input_index, 1);
    assert_eq!(ranked[0].output, "dw2-dw4");
    assert!(ranked.windows(2).all(|w| w[0].value >= w[1].value));
}

#[test]
fn inter_area_mode_is_lightly_damped() {
    let m = bench();
    let swing = modal::identify_swing_modes(&m, SWING_BAND, SWING_THRESHOLD).unwrap();
    assert_eq!(swing.len(), 3);
    assert!((swing[0].damping - 0.009).abs() <= 0.003);
    assert!(swing.iter().all(|s| s.is_swing));
}
