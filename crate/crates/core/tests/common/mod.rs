#![allow(dead_code)]

use gridobs::model::{LtiModel, ModelParts, StateLabel};
use gridobs::nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Random matrix shifted so that its spectral abscissa is `-margin`.
pub fn random_hurwitz(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    let abscissa = a
        .complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |m, z| m.max(z.re));
    a - DMatrix::identity(n, n) * (abscissa + margin)
}

/// `vec(P)` from `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = −vec(Q)`.
pub fn kronecker_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let i = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = i.kronecker(&at) + at.kronecker(&i);
    let rhs = DVector::from_column_slice(q.as_slice()) * -1.0;
    let x = op.lu().solve(&rhs).expect("nonsingular Lyapunov operator");
    DMatrix::from_column_slice(n, n, x.as_slice())
}

/// Classical fourth-order Runge–Kutta for `ẋ = A x + g`, with `g` sampled at
/// each step midpoint and held over the step.
pub fn rk4(a: &DMatrix<f64>, g: impl Fn(f64) -> DVector<f64>, x0: &DVector<f64>, t_end: f64, h: f64) -> Vec<DVector<f64>> {
    let steps = (t_end / h).round() as usize;
    let mut x = x0.clone();
    let mut out = vec![x.clone()];
    for k in 0..steps {
        let gk = g((k as f64 + 0.5) * h);
        let f = |x: &DVector<f64>| a * x + &gk;
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(x.clone());
    }
    out
}

/// Random model with one disturbance, two local outputs and one remote output.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize) -> LtiModel<f64> {
    LtiModel::new(ModelParts {
        a: random_hurwitz(rng, n, 0.2),
        b: random_matrix(rng, n, 1),
        e: random_matrix(rng, n, 1),
        cl: random_matrix(rng, 2, n),
        cr: random_matrix(rng, 1, n),
        state_labels: (0..n).map(|i| StateLabel::other(format!("x{i}"))).collect(),
    })
    .expect("random model is valid")
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}
