//! Reduced classical-model two-area, four-machine benchmark and its
//! calibration to prescribed swing modes.
//!
//! States are ordered `(δ₁, Δω₁, …, δ₄, Δω₄)`. Machines 1–2 form area 1 and
//! machines 3–4 form area 2. Each machine obeys
//!
//! ```text
//! δ̇ᵢ = Ω_b Δωᵢ
//! 2Hᵢ Δω̇ᵢ = uᵢ + dᵢ − Σⱼ K_s[i][j] δⱼ − Dᵢ Δωᵢ − Σⱼ D_r[i][j] Δωⱼ
//! ```
//!
//! where `D_r` is a Laplacian coupling the speed deviations of machines in
//! the same area.

use nalgebra::{Complex, ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LtiModel, ModelParts, SignalSelector, StateLabel};
use crate::scalar::Real;

pub const MACHINES: usize = 4;
/// Machine pairs joined across the tie corridor, zero-based.
pub const TIE_PAIRS: [(usize, usize); 4] = [(0, 2), (0, 3), (1, 2), (1, 3)];
/// Swing modes of the reference study: inter-area M₁ and the two local modes.
pub const REFERENCE_MODES: [(f64, f64); 3] = [(-0.037, 3.90), (-1.03, 6.8), (-0.81, 7.2)];
/// Acceptance threshold on the relative complex-modulus error of each mode.
pub const CALIBRATION_TOL: f64 = 0.05;

const LM_MAX_ITER: usize = 200;
const LM_STEP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoAreaParams<T: Real> {
    /// Inertia constants `Hᵢ` (s).
    pub h: [T; 4],
    /// Speed damping to the synchronous reference `Dᵢ`.
    pub d: [T; 4],
    /// Intra-area speed-coupling damping, one per area.
    pub intra_damping: [T; 2],
    /// Intra-area synchronizing stiffness `k_a`, one per area.
    pub intra_stiffness: [T; 2],
    /// Total tie-line stiffness `k_t`.
    pub tie_stiffness: T,
    /// Share of `k_t` carried by each entry of [`TIE_PAIRS`].
    pub tie_weights: [T; 4],
    /// Stiffness of each rotor angle to the infinite-bus reference.
    pub ground_stiffness: [T; 4],
    /// Base angular speed `Ω_b` (rad/s).
    pub omega_base: T,
}

fn add_branch<T: Real>(m: &mut DMatrix<T>, i: usize, j: usize, k: T) {
    m[(i, i)] += k;
    m[(j, j)] += k;
    m[(i, j)] -= k;
    m[(j, i)] -= k;
}

impl<T: Real> TwoAreaParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .h
            .iter()
            .chain(&self.d)
            .chain(&self.intra_damping)
            .chain(&self.intra_stiffness)
            .chain(&self.tie_weights)
            .chain(&self.ground_stiffness)
            .chain([&self.tie_stiffness, &self.omega_base]);
        let fail = |msg: &str| Err(Error::InvalidParams(msg.into()));
        if all.clone().any(|x| !x.is_finite_value()) {
            return fail("non-finite parameter");
        }
        if self.h.iter().any(|&h| h <= T::zero()) {
            return fail("inertia must be positive");
        }
        if self.omega_base <= T::zero() {
            return fail("base speed must be positive");
        }
        let nonneg = self
            .d
            .iter()
            .chain(&self.intra_damping)
            .chain(&self.tie_weights)
            .chain(&self.ground_stiffness)
            .chain([&self.tie_stiffness]);
        if nonneg.into_iter().any(|&x| x < T::zero()) {
            return fail("damping, stiffness and tie weights must be non-negative");
        }
        if self.intra_stiffness.iter().any(|&k| k <= T::zero()) {
            return fail("intra-area stiffness must be positive");
        }
        let weak = self.intra_stiffness[0].min(self.intra_stiffness[1]);
        if self.tie_stiffness >= weak {
            return fail("tie stiffness must be below the intra-area stiffness");
        }
        Ok(())
    }

    /// Synchronizing stiffness matrix `K_s`.
    pub fn stiffness_matrix(&self) -> DMatrix<T> {
        let mut k = DMatrix::zeros(MACHINES, MACHINES);
        add_branch(&mut k, 0, 1, self.intra_stiffness[0]);
        add_branch(&mut k, 2, 3, self.intra_stiffness[1]);
        for (&(i, j), &w) in TIE_PAIRS.iter().zip(&self.tie_weights) {
            add_branch(&mut k, i, j, self.tie_stiffness * w);
        }
        for (i, &g) in self.ground_stiffness.iter().enumerate() {
            k[(i, i)] += g;
        }
        k
    }

    /// Full damping matrix `diag(D) + D_r`.
    pub fn damping_matrix(&self) -> DMatrix<T> {
        let mut d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&self.d));
        add_branch(&mut d, 0, 1, self.intra_damping[0]);
        add_branch(&mut d, 2, 3, self.intra_damping[1]);
        d
    }

    pub fn cast<U: Real>(&self) -> TwoAreaParams<U> {
        let c4 = |a: &[T; 4]| a.map(|x| U::of(x.as_f64()));
        let c2 = |a: &[T; 2]| a.map(|x| U::of(x.as_f64()));
        TwoAreaParams {
            h: c4(&self.h),
            d: c4(&self.d),
            intra_damping: c2(&self.intra_damping),
            intra_stiffness: c2(&self.intra_stiffness),
            tie_stiffness: U::of(self.tie_stiffness.as_f64()),
            tie_weights: c4(&self.tie_weights),
            ground_stiffness: c4(&self.ground_stiffness),
            omega_base: U::of(self.omega_base.as_f64()),
        }
    }
}

pub fn delta_index(machine: usize) -> usize {
    2 * (machine - 1)
}

pub fn omega_index(machine: usize) -> usize {
    2 * (machine - 1) + 1
}

pub fn build_two_area<T: Real>(p: &TwoAreaParams<T>) -> Result<LtiModel<T>> {
    p.validate()?;
    let n = 2 * MACHINES;
    let ks = p.stiffness_matrix();
    let dm = p.damping_matrix();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, MACHINES);
    for i in 0..MACHINES {
        let inv = T::one() / (T::of(2.0) * p.h[i]);
        a[(2 * i, 2 * i + 1)] = p.omega_base;
        for j in 0..MACHINES {
            a[(2 * i + 1, 2 * j)] = -ks[(i, j)] * inv;
            a[(2 * i + 1, 2 * j + 1)] = -dm[(i, j)] * inv;
        }
        b[(2 * i + 1, i)] = inv;
    }
    let e = b.columns(1, 1).into_owned();
    let mut cl = DMatrix::zeros(2, n);
    cl[(0, delta_index(2))] = T::one();
    cl[(1, omega_index(2))] = T::one();
    let mut cr = DMatrix::zeros(1, n);
    cr[(0, omega_index(4))] = T::one();
    let state_labels = (1..=MACHINES)
        .flat_map(|i| [StateLabel::delta(i), StateLabel::omega(i)])
        .collect();
    LtiModel::new(ModelParts { a, b, e, cl, cr, state_labels })
}

/// Wide-area loop of the benchmark: input at G₂, feedback `Δω₂ − Δω₄`.
pub fn default_selector() -> SignalSelector {
    SignalSelector { input_index: 1, local_rows: vec![1], remote_rows: vec![0] }
}

/// The three oscillatory eigenvalues in the swing band, upper half-plane,
/// sorted by frequency.
pub fn swing_eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let (lo, hi) = crate::modal::SWING_BAND;
    let mut out: Vec<Complex<T>> = linalg::eigenvalues(a)?
        .into_iter()
        .filter(|z| z.im >= T::of(lo) && z.im <= T::of(hi))
        .collect();
    out.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Largest relative complex-modulus error between model and target modes.
pub fn mode_error<T: Real>(model: &[Complex<T>], targets: &[Complex<T>]) -> T {
    if model.len() != targets.len() {
        return T::max_value().unwrap_or(T::one());
    }
    model
        .iter()
        .zip(targets)
        .fold(T::zero(), |m, (z, t)| m.max((*z - *t).modulus() / t.modulus()))
}

/// Free parameters of the calibration in log coordinates:
/// `(k_a1, k_a2, k_t, D_r1, D_r2, D-scale)`.
fn unpack<T: Real>(base: &TwoAreaParams<T>, y: &[T; 6]) -> TwoAreaParams<T> {
    let e = y.map(|v| v.exp());
    TwoAreaParams {
        intra_stiffness: [e[0], e[1]],
        tie_stiffness: e[2],
        intra_damping: [e[3], e[4]],
        d: base.d.map(|x| x * e[5]),
        ..base.clone()
    }
}

fn pack<T: Real>(p: &TwoAreaParams<T>) -> [T; 6] {
    let floor = T::of(1e-12);
    [
        p.intra_stiffness[0].ln(),
        p.intra_stiffness[1].ln(),
        p.tie_stiffness.max(floor).ln(),
        p.intra_damping[0].max(floor).ln(),
        p.intra_damping[1].max(floor).ln(),
        T::zero(),
    ]
}

fn residual_vector<T: Real>(p: &TwoAreaParams<T>, targets: &[Complex<T>]) -> Option<[T; 6]> {
    let model = build_two_area(p).ok()?;
    let modes = swing_eigenvalues(model.a()).ok()?;
    if modes.len() != 3 {
        return None;
    }
    let mut r = [T::zero(); 6];
    for (k, (z, t)) in modes.iter().zip(targets).enumerate() {
        let s = t.modulus();
        r[2 * k] = (z.re - t.re) / s;
        r[2 * k + 1] = (z.im - t.im) / s;
    }
    Some(r)
}

fn sq_norm<T: Real>(r: &[T; 6]) -> T {
    r.iter().fold(T::zero(), |a, &x| a + x * x)
}

/// Outcome of [`calibrate_from`].
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<T: Real> {
    pub params: TwoAreaParams<T>,
    pub modes: Vec<Complex<T>>,
    /// Largest relative complex-modulus error over the three modes.
    pub error: T,
    pub iterations: usize,
}

/// Levenberg–Marquardt fit of the stiffnesses, intra-area dampings and a
/// common scale on `D` so that the swing modes of `base` move onto
/// `targets`. Inertias, tie weights, ground stiffness and the shape of `D`
/// are kept from `base`.
pub fn calibrate_from<T: Real>(base: &TwoAreaParams<T>, targets: &[Complex<T>]) -> Result<Calibration<T>> {
    base.validate()?;
    let mut targets = targets.to_vec();
    if targets.len() != 3 || targets.iter().any(|t| !(t.re < T::zero()) || !(t.im > T::zero())) {
        return Err(Error::InvalidParams("targets must be three stable upper-half-plane eigenvalues".into()));
    }
    targets.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal));
    if targets.windows(2).any(|w| w[0].im == w[1].im) {
        return Err(Error::InvalidParams("target frequencies must be distinct".into()));
    }

    let mut y = pack(base);
    let mut r = residual_vector(base, &targets).ok_or(Error::CalibrationFailed {
        residual: f64::INFINITY,
        iterations: 0,
    })?;
    let mut cost = sq_norm(&r);
    let mut mu = T::of(1e-3);
    let h = T::tol(1e-7);
    let mut iterations = 0;
    while iterations < LM_MAX_ITER && cost > T::of(1e-28) {
        iterations += 1;
        let mut jac = DMatrix::<T>::zeros(6, 6);
        for k in 0..6 {
            let mut yp = y;
            yp[k] += h;
            let rp = residual_vector(&unpack(base, &yp), &targets).unwrap_or([T::of(10.0); 6]);
            for i in 0..6 {
                jac[(i, k)] = (rp[i] - r[i]) / h;
            }
        }
        let rv = nalgebra::DVector::from_row_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for k in 0..6 {
                lhs[(k, k)] += mu * (jtj[(k, k)] + T::one());
            }
            let Some(step) = lhs.lu().solve(&(-&g)) else {
                mu *= T::of(10.0);
                continue;
            };
            let mut yn = y;
            for k in 0..6 {
                yn[k] += step[k];
            }
            if let Some(rn) = residual_vector(&unpack(base, &yn), &targets) {
                let cn = sq_norm(&rn);
                if cn < cost {
                    let small = step.amax() < T::of(LM_STEP_TOL);
                    y = yn;
                    r = rn;
                    cost = cn;
                    mu = (mu * T::of(0.3)).max(T::of(1e-12));
                    improved = !small;
                    break;
                }
            }
            mu *= T::of(10.0);
        }
        if !improved {
            break;
        }
    }

    let params = unpack(base, &y);
    let modes = swing_eigenvalues(build_two_area(&params)?.a())?;
    let error = mode_error(&modes, &targets);
    if !(error <= T::of(CALIBRATION_TOL)) {
        return Err(Error::CalibrationFailed { residual: error.as_f64(), iterations });
    }
    Ok(Calibration { params, modes, error, iterations })
}

/// Calibrates the shipped template to `targets`.
pub fn calibrate_two_area<T: Real>(targets: &[Complex<T>]) -> Result<TwoAreaParams<T>> {
    Ok(calibrate_from(&template_params(), targets)?.params)
}

pub fn reference_targets<T: Real>() -> [Complex<T>; 3] {
    REFERENCE_MODES.map(|(re, im)| Complex::new(T::of(re), T::of(im)))
}

fn params_from(values: &ParamTable) -> TwoAreaParams<f64> {
    TwoAreaParams {
        h: values.h,
        d: values.d,
        intra_damping: values.intra_damping,
        intra_stiffness: values.intra_stiffness,
        tie_stiffness: values.tie_stiffness,
        tie_weights: values.tie_weights,
        ground_stiffness: values.ground_stiffness,
        omega_base: 2.0 * std::f64::consts::PI * 60.0,
    }
}

struct ParamTable {
    h: [f64; 4],
    d: [f64; 4],
    intra_damping: [f64; 2],
    intra_stiffness: [f64; 2],
    tie_stiffness: f64,
    tie_weights: [f64; 4],
    ground_stiffness: [f64; 4],
}

// Starting point of the calibration. Only the stiffnesses, the intra-area
// dampings and the scale of `d` are refitted.
const TEMPLATE: ParamTable = ParamTable {
    h: [2.72263, 4.80005, 3.97951, 2.25493],
    d: [0.807445, 0.236341, 0.311848, 12.1598],
    intra_damping: [3.3, 2.7],
    intra_stiffness: [0.6, 0.17],
    tie_stiffness: 0.15,
    tie_weights: [0.0288453, 0.342407, 0.618814, 0.00993339],
    ground_stiffness: [0.00120995, 0.000807327, 0.00279582, 0.000130752],
};

// Output of `calibrate_two_area(&reference_targets())` from the template.
const CALIBRATED: ParamTable = ParamTable {
    h: [2.72263, 4.80005, 3.97951, 2.25493],
    d: [0.1007280584670048, 0.02948333331205269, 0.03890276560857832, 1.5169244287190895],
    intra_damping: [3.1156511939582674, 7.357316020145684],
    intra_stiffness: [0.39737496257694643, 0.3229244953199943],
    tie_stiffness: 0.27380710995789037,
    tie_weights: [0.0288453, 0.342407, 0.618814, 0.00993339],
    ground_stiffness: [0.00120995, 0.000807327, 0.00279582, 0.000130752],
};

pub fn template_params<T: Real>() -> TwoAreaParams<T> {
    params_from(&TEMPLATE).cast()
}

pub fn default_params<T: Real>() -> TwoAreaParams<T> {
    params_from(&CALIBRATED).cast()
}

pub fn default_benchmark<T: Real>() -> LtiModel<T> {
    build_two_area(&default_params()).expect("shipped parameters are valid")
}
