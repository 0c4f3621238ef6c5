//! Exact zero-order-hold simulation of the plant, its observers and the
//! wide-area closed loop under pulse disturbances.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimation::{LuenbergerObserver, Observer, UnknownInputObserver};
use crate::linalg;
use crate::model::{LtiModel, SignalSelector};
use crate::scalar::Real;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 25.0;
pub const DEFAULT_PULSE: Pulse<f64> = Pulse { start: 1.0, width: 0.5, amplitude: 0.05, channel: 0 };

/// State-norm threshold beyond which a closed-loop run is declared divergent.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// `exp(A h)` by scaling and squaring with a Padé approximant.
pub fn matrix_exponential<T: Real>(a: &DMatrix<T>, h: T) -> Result<DMatrix<T>> {
    if !linalg::all_finite(a) || !h.is_finite_value() {
        return Err(Error::NonFinite("matrix exponential argument".into()));
    }
    let out = (a * h).exp();
    if !linalg::all_finite(&out) {
        return Err(Error::Overflow);
    }
    Ok(out)
}

/// Sampled-data form `x⁺ = Φ x + Γ w` of `ẋ = A x + G w` with `w` held
/// constant over each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete<T: Real> {
    pub phi: DMatrix<T>,
    pub gamma: DMatrix<T>,
}

/// Exact ZOH via `exp([[A, G], [0, 0]] Δt) = [[Φ, Γ], [0, I]]`.
pub fn discretize<T: Real>(a: &DMatrix<T>, g: &DMatrix<T>, dt: T) -> Result<Discrete<T>> {
    let n = a.nrows();
    let m = g.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(g);
    let ex = matrix_exponential(&aug, dt)?;
    Ok(Discrete {
        phi: ex.view((0, 0), (n, n)).into_owned(),
        gamma: ex.view((0, n), (n, m)).into_owned(),
    })
}

/// `(Φ, Γ_B, Γ_E)` of the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantZoh<T: Real> {
    pub phi: DMatrix<T>,
    pub gamma_b: DMatrix<T>,
    pub gamma_e: DMatrix<T>,
}

pub fn discretize_zoh<T: Real>(model: &LtiModel<T>, dt: T) -> Result<PlantZoh<T>> {
    if !(dt > T::zero()) {
        return Err(Error::GridMisaligned("time step must be positive".into()));
    }
    let d = discretize(model.a(), &hstack(model.b(), model.e()), dt)?;
    let m = model.inputs();
    Ok(PlantZoh {
        gamma_b: d.gamma.columns(0, m).into_owned(),
        gamma_e: d.gamma.columns(m, model.disturbances()).into_owned(),
        phi: d.phi,
    })
}

fn hstack<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn block2<T: Real>(a11: &DMatrix<T>, a12: &DMatrix<T>, a21: &DMatrix<T>, a22: &DMatrix<T>) -> DMatrix<T> {
    let (r1, c1) = a11.shape();
    let (r2, c2) = a22.shape();
    let mut out = DMatrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a11);
    out.view_mut((0, c1), (r1, c2)).copy_from(a12);
    out.view_mut((r1, 0), (r2, c1)).copy_from(a21);
    out.view_mut((r1, c1), (r2, c2)).copy_from(a22);
    out
}

fn vstack<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Rectangular disturbance pulse on one disturbance channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse<T> {
    pub start: T,
    pub width: T,
    pub amplitude: T,
    pub channel: usize,
}

impl<T: Real> Pulse<T> {
    pub fn new(start: T, width: T, amplitude: T, channel: usize) -> Result<Self> {
        if !(width > T::zero()) || !start.is_finite_value() || !amplitude.is_finite_value() {
            return Err(Error::InvalidParams("pulse needs finite start and amplitude and positive width".into()));
        }
        Ok(Self { start, width, amplitude, channel })
    }

    pub fn cast<U: Real>(&self) -> Pulse<U> {
        Pulse {
            start: U::of(self.start.as_f64()),
            width: U::of(self.width.as_f64()),
            amplitude: U::of(self.amplitude.as_f64()),
            channel: self.channel,
        }
    }

    pub fn end(&self) -> T {
        self.start + self.width
    }

    pub fn value(&self, t: T) -> T {
        if t >= self.start && t < self.end() {
            self.amplitude
        } else {
            T::zero()
        }
    }

    /// Step indices `[k₀, k₁)` over which the pulse is active.
    pub fn steps(&self, dt: T) -> Result<(usize, usize)> {
        let k0 = grid_index(self.start, dt, "pulse start")?;
        let k1 = grid_index(self.end(), dt, "pulse end")?;
        Ok((k0, k1))
    }
}

fn grid_index<T: Real>(t: T, dt: T, what: &str) -> Result<usize> {
    let k = (t / dt).round();
    let tol = T::tol(1e-9) * t.abs().max(T::one());
    if t < T::zero() || (k * dt - t).abs() > tol {
        return Err(Error::GridMisaligned(format!(
            "{what} {} is not a multiple of Δt = {}",
            t.as_f64(),
            dt.as_f64()
        )));
    }
    k.to_usize().ok_or_else(|| Error::GridMisaligned(format!("{what} out of range")))
}

/// Uniform grid `t_k = k Δt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub dt: T,
    pub steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_end: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !(t_end > T::zero()) {
            return Err(Error::GridMisaligned("t_end and Δt must be positive".into()));
        }
        Ok(Self { dt, steps: grid_index(t_end, dt, "t_end")? })
    }

    pub fn time(&self, k: usize) -> T {
        T::of(k as f64) * self.dt
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// Disturbance vector held over step `k`.
fn disturbance_at<T: Real>(q: usize, pulse: Option<&Pulse<T>>, window: (usize, usize), k: usize) -> DVector<T> {
    let mut d = DVector::zeros(q);
    if let Some(p) = pulse {
        if k >= window.0 && k < window.1 {
            d[p.channel] = p.amplitude;
        }
    }
    d
}

fn pulse_window<T: Real>(model: &LtiModel<T>, pulse: Option<&Pulse<T>>, dt: T) -> Result<(usize, usize)> {
    match pulse {
        Some(p) => {
            if p.channel >= model.disturbances() {
                return Err(Error::IndexOutOfRange(format!(
                    "pulse channel {} with {} disturbance columns",
                    p.channel,
                    model.disturbances()
                )));
            }
            p.steps(dt)
        }
        None => Ok((0, 0)),
    }
}

fn check_len<T: Real>(v: &DVector<T>, n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!("{what} has length {}, expected {n}", v.len())));
    }
    Ok(())
}

/// Observer-side series of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates<T: Real> {
    pub x_hat: Vec<DVector<T>>,
    /// `e = x − x̂`.
    pub e: Vec<DVector<T>>,
    pub y_r_hat: Vec<DVector<T>>,
}

/// Uniformly sampled simulation record. Every series has one entry per grid
/// point; `u[k]` is the input held over `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub t: Vec<T>,
    pub x: Vec<DVector<T>>,
    pub u: Vec<DVector<T>>,
    pub d: Vec<DVector<T>>,
    pub y_l: Vec<DVector<T>>,
    pub y_r: Vec<DVector<T>>,
    pub estimates: Option<Estimates<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `‖e(t_k)‖₂`, empty without an observer.
    pub fn error_norms(&self) -> Vec<T> {
        self.estimates
            .as_ref()
            .map(|est| est.e.iter().map(|e| e.norm()).collect())
            .unwrap_or_default()
    }

    /// Difference between row `i` of `y_l` and row `j` of `y_r`.
    pub fn output_difference(&self, i: usize, j: usize) -> Vec<T> {
        self.y_l.iter().zip(&self.y_r).map(|(l, r)| l[i] - r[j]).collect()
    }

    /// Difference between row `i` of `y_l` and row `j` of `ŷ_r`.
    pub fn synthesized_difference(&self, i: usize, j: usize) -> Vec<T> {
        match &self.estimates {
            Some(est) => self.y_l.iter().zip(&est.y_r_hat).map(|(l, r)| l[i] - r[j]).collect(),
            None => Vec::new(),
        }
    }
}

/// Plant response to an input signal sampled at `t_k` and a pulse.
pub fn simulate_plant<T: Real>(
    model: &LtiModel<T>,
    u: impl Fn(T) -> DVector<T>,
    pulse: Option<&Pulse<T>>,
    x0: &DVector<T>,
    t_end: T,
    dt: T,
) -> Result<Trajectory<T>> {
    let n = model.n();
    check_len(x0, n, "x0")?;
    let grid = TimeGrid::new(t_end, dt)?;
    let window = pulse_window(model, pulse, dt)?;
    let zoh = discretize_zoh(model, dt)?;
    let mut traj = Trajectory::with_capacity(grid.steps + 1);
    let mut x = x0.clone();
    for k in 0..=grid.steps {
        let t = grid.time(k);
        let uk = u(t);
        check_len(&uk, model.inputs(), "u(t)")?;
        let dk = disturbance_at(model.disturbances(), pulse, window, k);
        traj.push(model, t, x.clone(), uk.clone(), dk.clone(), None);
        if k < grid.steps {
            x = &zoh.phi * &x + &zoh.gamma_b * uk + &zoh.gamma_e * dk;
        }
    }
    Ok(traj)
}

impl<T: Real> Trajectory<T> {
    fn with_capacity(cap: usize) -> Self {
        Self {
            t: Vec::with_capacity(cap),
            x: Vec::with_capacity(cap),
            u: Vec::with_capacity(cap),
            d: Vec::with_capacity(cap),
            y_l: Vec::with_capacity(cap),
            y_r: Vec::with_capacity(cap),
            estimates: None,
        }
    }

    fn push(&mut self, model: &LtiModel<T>, t: T, x: DVector<T>, u: DVector<T>, d: DVector<T>, x_hat: Option<DVector<T>>) {
        self.y_l.push(model.cl() * &x);
        self.y_r.push(model.cr() * &x);
        if let Some(xh) = x_hat {
            let est = self.estimates.get_or_insert_with(|| Estimates { x_hat: Vec::new(), e: Vec::new(), y_r_hat: Vec::new() });
            est.e.push(&x - &xh);
            est.y_r_hat.push(model.cr() * &xh);
            est.x_hat.push(xh);
        }
        self.t.push(t);
        self.x.push(x);
        self.u.push(u);
        self.d.push(d);
    }
}

/// Observer realization as an augmented LTI system in `(x, ξ)` where `ξ`
/// is the observer's own state.
struct Coupled<T: Real> {
    a: DMatrix<T>,
    g_e: DMatrix<T>,
    /// Initial observer state from `(x₀, x̂₀)`.
    xi0: DVector<T>,
    /// `x̂ = P x + Q ξ`.
    p: DMatrix<T>,
    q: DMatrix<T>,
}

fn luenberger_coupled<T: Real>(model: &LtiModel<T>, obs: &LuenbergerObserver<T>, x_hat0: &DVector<T>) -> Coupled<T> {
    let n = model.n();
    let lc = &obs.l * model.cl();
    Coupled {
        a: block2(model.a(), &DMatrix::zeros(n, n), &lc, &(model.a() - &lc)),
        g_e: vstack(model.e(), &DMatrix::zeros(n, model.disturbances())),
        xi0: x_hat0.clone(),
        p: DMatrix::zeros(n, n),
        q: DMatrix::identity(n, n),
    }
}

fn uio_coupled<T: Real>(model: &LtiModel<T>, uio: &UnknownInputObserver<T>, x0: &DVector<T>, x_hat0: &DVector<T>) -> Coupled<T> {
    let n = model.n();
    let hc = &uio.h * model.cl();
    Coupled {
        a: block2(model.a(), &DMatrix::zeros(n, n), &(&uio.k * model.cl()), &uio.f),
        g_e: vstack(model.e(), &DMatrix::zeros(n, model.disturbances())),
        // x̂ = z − H C_l x, so z₀ = x̂₀ + H C_l x₀.
        xi0: x_hat0 + &hc * x0,
        p: -hc,
        q: DMatrix::identity(n, n),
    }
}

fn run_coupled<T: Real>(
    model: &LtiModel<T>,
    sys: &Coupled<T>,
    pulse: Option<&Pulse<T>>,
    x0: &DVector<T>,
    grid: TimeGrid<T>,
    window: (usize, usize),
    input: Option<(&DMatrix<T>, usize)>,
) -> Result<Trajectory<T>> {
    let n = model.n();
    let disc = discretize(&sys.a, &sys.g_e, grid.dt)?;
    let mut w = DVector::zeros(2 * n);
    w.rows_mut(0, n).copy_from(x0);
    w.rows_mut(n, n).copy_from(&sys.xi0);
    let mut traj = Trajectory::with_capacity(grid.steps + 1);
    let guard = T::of(OVERFLOW_GUARD);
    for k in 0..=grid.steps {
        let t = grid.time(k);
        let x = w.rows(0, n).into_owned();
        let xi = w.rows(n, n).into_owned();
        if !(w.norm() <= guard) {
            return Err(Error::UnstableClosedLoop(t.as_f64()));
        }
        let x_hat = &sys.p * &x + &sys.q * &xi;
        let mut u = DVector::zeros(model.inputs());
        if let Some((law, channel)) = input {
            u[channel] = (law * &w)[0];
        }
        let dk = disturbance_at(model.disturbances(), pulse, window, k);
        if k < grid.steps {
            w = &disc.phi * &w + &disc.gamma * &dk;
        }
        traj.push(model, t, x, u, dk, Some(x_hat));
    }
    Ok(traj)
}

/// Co-simulates plant and observer with `u ≡ 0`.
pub fn simulate_estimation<T: Real>(
    model: &LtiModel<T>,
    observer: &Observer<T>,
    pulse: Option<&Pulse<T>>,
    x0: &DVector<T>,
    x_hat0: &DVector<T>,
    t_end: T,
    dt: T,
) -> Result<Trajectory<T>> {
    let n = model.n();
    check_len(x0, n, "x0")?;
    check_len(x_hat0, n, "x̂0")?;
    let grid = TimeGrid::new(t_end, dt)?;
    let window = pulse_window(model, pulse, dt)?;
    let sys = match observer {
        Observer::Luenberger(o) => luenberger_coupled(model, o, x_hat0),
        Observer::Uio(o) => uio_coupled(model, o, x0, x_hat0),
    };
    run_coupled(model, &sys, pulse, x0, grid, window, None)
}

/// Wide-area loop closed through the unknown-input observer:
/// `u_c = −k (y_l,sel − ŷ_r,sel)` on the selector's input channel `c`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_closed_loop<T: Real>(
    model: &LtiModel<T>,
    uio: &UnknownInputObserver<T>,
    selector: &SignalSelector,
    k: T,
    pulse: Option<&Pulse<T>>,
    x0: &DVector<T>,
    x_hat0: &DVector<T>,
    t_end: T,
    dt: T,
) -> Result<Trajectory<T>> {
    let n = model.n();
    check_len(x0, n, "x0")?;
    check_len(x_hat0, n, "x̂0")?;
    if !k.is_finite_value() {
        return Err(Error::NonFinite("feedback gain".into()));
    }
    let grid = TimeGrid::new(t_end, dt)?;
    let window = pulse_window(model, pulse, dt)?;
    let bc = selector.input_column(model);
    let cl = selector.local_row(model);
    let cr = selector.remote_row(model);

    // u = −k (c_l x − c_r (z − H C_l x)) = s_x x + s_z z.
    let s_x = -(&cl + &cr * &uio.h * model.cl()) * k;
    let s_z = &cr * k;
    let mut sys = uio_coupled(model, uio, x0, x_hat0);
    let tb = &uio.t * &bc;
    let mut a = sys.a.clone();
    a.view_mut((0, 0), (n, n)).add_assign(&(&bc * &s_x));
    a.view_mut((0, n), (n, n)).add_assign(&(&bc * &s_z));
    a.view_mut((n, 0), (n, n)).add_assign(&(&tb * &s_x));
    a.view_mut((n, n), (n, n)).add_assign(&(&tb * &s_z));
    sys.a = a;
    let mut law = DMatrix::zeros(1, 2 * n);
    law.view_mut((0, 0), (1, n)).copy_from(&s_x);
    law.view_mut((0, n), (1, n)).copy_from(&s_z);
    run_coupled(model, &sys, pulse, x0, grid, window, Some((&law, selector.input_index)))
}

trait AddAssignView<T> {
    fn add_assign(&mut self, rhs: &DMatrix<T>);
}

impl<T: Real> AddAssignView<T> for nalgebra::DMatrixViewMut<'_, T> {
    fn add_assign(&mut self, rhs: &DMatrix<T>) {
        for (a, &b) in self.iter_mut().zip(rhs.iter()) {
            *a += b;
        }
    }
}

/// Fixed-format CSV: header `t,<names>`, one row per sample, values with
/// 17 significant digits.
pub fn csv_table<T: Real>(t: &[T], names: &[String], columns: &[Vec<T>]) -> String {
    let mut out = String::from("t");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (k, tk) in t.iter().enumerate() {
        write_value(&mut out, *tk);
        for col in columns {
            out.push(',');
            write_value(&mut out, col[k]);
        }
        out.push('\n');
    }
    out
}

fn write_value<T: Real>(out: &mut String, v: T) {
    let _ = write!(out, "{:.16e}", v.as_f64());
}

/// Largest `|s(t)|` over samples with `t ≥ from`.
pub fn peak_after<T: Real>(t: &[T], s: &[T], from: T) -> T {
    t.iter()
        .zip(s)
        .filter(|(tk, _)| **tk >= from)
        .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
}

/// Two-cycle envelope test: `|s|` stays below `fraction · max|s|` from
/// `settle_from` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeVerdict<T> {
    pub peak: T,
    pub residual_peak: T,
    pub ratio: T,
    pub pass: bool,
}

pub fn envelope_verdict<T: Real>(t: &[T], s: &[T], settle_from: T, fraction: T) -> EnvelopeVerdict<T> {
    let peak = s.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let residual_peak = peak_after(t, s, settle_from);
    let ratio = if peak > T::zero() { residual_peak / peak } else { T::zero() };
    EnvelopeVerdict { peak, residual_peak, ratio, pass: peak > T::zero() && ratio <= fraction }
}
