mod common;

use common::*;
use gridobs::benchmark::{default_benchmark, omega_index};
use gridobs::certify::{self, RiccatiWeights};
use gridobs::nalgebra::{DMatrix, DVector};
use gridobs::simulate::{self, Pulse};
use gridobs::Model;

#[test]
fn lyapunov_matches_kronecker_solution() {
    let mut r = rng(11);
    for n in 1..=7 {
        let a = random_hurwitz(&mut r, n, 0.3);
        let g = random_matrix(&mut r, n, n);
        let q = &g * g.transpose() + DMatrix::identity(n, n);
        let p = certify::solve_lyapunov(&a, &q).unwrap();
        let oracle = kronecker_lyapunov(&a, &q);
        assert!(max_abs(&(&p - &oracle)) <= 1e-9 * max_abs(&oracle), "n = {n}");
    }
}

#[test]
fn lyapunov_residual_on_benchmark() {
    let model: Model = default_benchmark();
    let q = DMatrix::identity(8, 8);
    let p = certify::solve_lyapunov(model.a(), &q).unwrap();
    let a = model.a();
    let res = max_abs(&(a.transpose() * &p + &p * a + &q));
    assert!(res <= 1e-9 * (max_abs(&p) * max_abs(a) + 1.0));
}

#[test]
fn riccati_solution_satisfies_equation_and_stabilizes() {
    let mut r = rng(5);
    for n in 2..=6 {
        let a = random_matrix(&mut r, n, n) * 2.0;
        let c = random_matrix(&mut r, 2, n);
        let l = certify::stabilizing_output_injection(&a, &c, &RiccatiWeights::identity(n, 2)).unwrap();
        let acl = &a - &l * &c;
        assert!(certify::is_hurwitz(&acl).unwrap().stable);
        // The Riccati solution also solves A_cl X + X A_clᵀ = −(Q + L Lᵀ).
        let x = kronecker_lyapunov(&acl.transpose(), &(DMatrix::identity(n, n) + &l * l.transpose()));
        assert!(max_abs(&(&x * c.transpose() - &l)) <= 1e-6 * max_abs(&l).max(1.0), "n = {n}");
    }
}

#[test]
fn zoh_matches_rk4_on_benchmark() {
    let model: Model = default_benchmark();
    let n = model.n();
    let mut x0 = DVector::zeros(n);
    x0[omega_index(1)] = 1e-3;
    x0[omega_index(3)] = -5e-4;
    let pulse = Pulse::new(1.0, 0.5, 0.05, 0).unwrap();
    let tr = simulate::simulate_plant(&model, |_| DVector::zeros(1.max(model.inputs())), Some(&pulse), &x0, 10.0, 1e-3)
        .unwrap();
    let e = model.e().column(0).into_owned();
    let oracle = rk4(model.a(), |t| if (1.0..1.5).contains(&t) { &e * 0.05 } else { DVector::zeros(n) }, &x0, 10.0, 1e-4);
    let scale = oracle.iter().fold(0.0f64, |m, x| m.max(x.amax()));
    let worst = tr
        .x
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (k, x)| m.max((x - &oracle[k * 10]).amax()));
    assert!(worst <= 1e-6 * scale, "relative deviation {}", worst / scale);
}

#[test]
fn matrix_exponential_semigroup() {
    let mut r = rng(2);
    let a = random_matrix(&mut r, 5, 5);
    let e1 = simulate::matrix_exponential(&a, 0.3).unwrap();
    let e2 = simulate::matrix_exponential(&a, 0.6).unwrap();
    assert!(max_abs(&(&e1 * &e1 - &e2)) <= 1e-12 * max_abs(&e2));
}

#[test]
fn exponential_rate_bound_on_random_systems() {
    let mut r = rng(99);
    for case in 0..100 {
        let n = 2 + case % 5;
        let a = random_hurwitz(&mut r, n, 0.1 + 0.02 * (case % 10) as f64);
        let cert = certify::exponential_rate(&a).unwrap();
        let x0 = random_matrix(&mut r, n, 1).column(0).into_owned();
        let dt = 0.01;
        let step = simulate::matrix_exponential(&a, dt).unwrap();
        let v = |x: &DVector<f64>| (x.transpose() * &cert.p * x)[(0, 0)];
        let v0 = v(&x0);
        let mut x = x0.clone();
        for k in 1..=500 {
            x = &step * x;
            let bound = (-2.0 * cert.alpha * k as f64 * dt).exp() * v0;
            assert!(v(&x) <= bound * (1.0 + 1e-9), "case {case}, step {k}");
        }
    }
}
