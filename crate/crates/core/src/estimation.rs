//! Luenberger and unknown-input observers reconstructing the remote output
//! from local measurements.
//!
//! Error dynamics follow `ė = (A − L C_l) e` for the Luenberger observer and
//! `ė = F e` with `F = M A − L C_l` for the unknown-input observer.

use nalgebra::{Complex, DMatrix, DVector};
use serde_json::{json, Value};

use crate::certify::{self, RiccatiWeights, StabilityCertificate};
use crate::error::{Error, Result};
use crate::linalg::{self, max_abs};
use crate::model::{matrix_json, LtiModel};
use crate::scalar::Real;

/// Relative singular-value cut-off for ranks and pseudo-inverses.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LuenbergerObserver<T: Real> {
    /// `n × p_l` output-injection gain.
    pub l: DMatrix<T>,
}

impl<T: Real> LuenbergerObserver<T> {
    /// Wraps a user gain after checking that `A − L C_l` is Hurwitz.
    pub fn from_gain(model: &LtiModel<T>, l: DMatrix<T>) -> Result<Self> {
        if l.shape() != (model.n(), model.local_outputs()) {
            return Err(Error::DimensionMismatch(format!(
                "L must be {}×{}",
                model.n(),
                model.local_outputs()
            )));
        }
        let obs = Self { l };
        let h = certify::is_hurwitz(&obs.error_matrix(model))?;
        if !h.stable {
            return Err(Error::NotHurwitz(h.abscissa.as_f64()));
        }
        Ok(obs)
    }

    /// `A − L C_l`.
    pub fn error_matrix(&self, model: &LtiModel<T>) -> DMatrix<T> {
        model.a() - &self.l * model.cl()
    }

    pub fn to_json(&self) -> Value {
        json!({ "L": matrix_json(&self.l) })
    }
}

/// Margin below zero inside which an unobservable eigenvalue still counts
/// as marginal.
fn marginal_re<T: Real>(a: &DMatrix<T>) -> T {
    -T::of(certify::PBH_TOL).max(T::eps() * T::of(100.0)) * max_abs(a).max(T::one())
}

/// Observer gain placing every observable pole left of `−alpha`.
pub fn design_luenberger<T: Real>(
    model: &LtiModel<T>,
    alpha: T,
) -> Result<(LuenbergerObserver<T>, StabilityCertificate<T>)> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParams("decay rate must be positive".into()));
    }
    let a = model.a();
    let c = model.cl();
    let n = model.n();
    if let Some(z) = certify::unobservable_modes(a, c, marginal_re(a))?.first() {
        return Err(Error::NotDetectable { re: z.re.as_f64(), im: z.im.as_f64() });
    }
    if let Some(z) = certify::unobservable_modes(a, c, -alpha)?.first() {
        return Err(Error::RateInfeasible { alpha: alpha.as_f64(), re: z.re.as_f64() });
    }
    let shifted = a + DMatrix::identity(n, n) * alpha;
    let l = certify::stabilizing_output_injection(&shifted, c, &RiccatiWeights::identity(n, c.nrows()))?;
    let obs = LuenbergerObserver { l };
    let cert = certify::exponential_rate(&obs.error_matrix(model))?;
    Ok((obs, cert))
}

/// Ackermann pole placement for a single-output observable pair. `poles`
/// must be closed under conjugation.
pub fn place_siso<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>, poles: &[Complex<T>]) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if c.nrows() != 1 || c.ncols() != n || poles.len() != n {
        return Err(Error::DimensionMismatch("pole placement needs one output and n poles".into()));
    }
    // Monic characteristic polynomial, highest degree first.
    let mut coeffs = vec![Complex::new(T::one(), T::zero())];
    for &p in poles {
        let mut next = vec![Complex::new(T::zero(), T::zero()); coeffs.len() + 1];
        for (i, &ci) in coeffs.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * p;
        }
        coeffs = next;
    }
    let mut phi = DMatrix::<T>::zeros(n, n);
    for ci in &coeffs {
        phi = &phi * a + DMatrix::identity(n, n) * ci.re;
    }
    let mut obs = DMatrix::<T>::zeros(n, n);
    let mut row = c.clone();
    for i in 0..n {
        obs.row_mut(i).copy_from(&row.row(0));
        row = &row * a;
    }
    let mut en = DVector::<T>::zeros(n);
    en[n - 1] = T::one();
    let x = obs
        .lu()
        .solve(&en)
        .ok_or(Error::NotDetectable { re: 0.0, im: 0.0 })?;
    let l = phi * x;
    Ok(DMatrix::from_column_slice(n, 1, l.as_slice()))
}

/// Outcome of the unknown-input observer existence test.
#[derive(Debug, Clone, PartialEq)]
pub struct UioDiagnosis<T: Real> {
    /// `H = −E (C_l E)⁺`.
    pub h: DMatrix<T>,
    /// `M = I + H C_l`.
    pub m: DMatrix<T>,
    pub rank_ce: usize,
    pub rank_e: usize,
    /// Eigenvalues of `M A` in the closed right half-plane that are not
    /// observable through `C_l`.
    pub unobservable: Vec<Complex<T>>,
}

impl<T: Real> UioDiagnosis<T> {
    pub fn rank_condition(&self) -> bool {
        self.rank_ce == self.rank_e
    }

    pub fn detectable(&self) -> bool {
        self.unobservable.is_empty()
    }

    pub fn accepted(&self) -> bool {
        self.rank_condition() && self.detectable()
    }

    /// Human-readable reasons for a rejection; empty when accepted.
    pub fn reasons(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.rank_condition() {
            out.push(format!(
                "rank(C_l E) = {} differs from rank(E) = {}",
                self.rank_ce, self.rank_e
            ));
        }
        for z in &self.unobservable {
            out.push(format!(
                "(M A, C_l) has an unobservable mode at {:+e}{:+e}i",
                z.re.as_f64(),
                z.im.as_f64()
            ));
        }
        out
    }
}

pub fn check_uio_existence<T: Real>(model: &LtiModel<T>) -> Result<UioDiagnosis<T>> {
    let n = model.n();
    let e = model.e();
    let c = model.cl();
    let ce = c * e;
    let tol = T::tol(RANK_TOL);
    let h = -(e * linalg::pinv(&ce, tol));
    let m = DMatrix::identity(n, n) + &h * c;
    let ma = &m * model.a();
    let unobservable = certify::unobservable_modes(&ma, c, marginal_re(&ma))?;
    Ok(UioDiagnosis { rank_ce: linalg::rank(&ce, tol), rank_e: linalg::rank(e, tol), h, m, unobservable })
}

/// Unknown-input observer `ż = F z + T B u + K y_l`, `x̂ = z − H y_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownInputObserver<T: Real> {
    pub f: DMatrix<T>,
    pub t: DMatrix<T>,
    pub k: DMatrix<T>,
    pub h: DMatrix<T>,
    pub m: DMatrix<T>,
    pub l: DMatrix<T>,
}

/// Residuals of the defining identities of an unknown-input observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UioResiduals<T> {
    /// `max |M E|`.
    pub decoupling: T,
    /// `max |M B − T B|`.
    pub input: T,
    /// `max |M A − K C_l − F M|`.
    pub sylvester: T,
}

impl<T: Real> UnknownInputObserver<T> {
    pub fn residuals(&self, model: &LtiModel<T>) -> UioResiduals<T> {
        let b = model.b();
        UioResiduals {
            decoupling: max_abs(&(&self.m * model.e())),
            input: max_abs(&(&self.m * b - &self.t * b)),
            sylvester: max_abs(&(&self.m * model.a() - &self.k * model.cl() - &self.f * &self.m)),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "F": matrix_json(&self.f),
            "T": matrix_json(&self.t),
            "K": matrix_json(&self.k),
            "H": matrix_json(&self.h),
            "M": matrix_json(&self.m),
            "L": matrix_json(&self.l),
        })
    }
}

fn require_existence<T: Real>(model: &LtiModel<T>) -> Result<UioDiagnosis<T>> {
    let diag = check_uio_existence(model)?;
    if !diag.rank_condition() {
        return Err(Error::UioExistence(diag.reasons().join("; ")));
    }
    Ok(diag)
}

pub fn synthesize_uio<T: Real>(model: &LtiModel<T>, l: &DMatrix<T>) -> Result<UnknownInputObserver<T>> {
    let diag = require_existence(model)?;
    if !diag.detectable() {
        return Err(Error::UioExistence(diag.reasons().join("; ")));
    }
    if l.shape() != (model.n(), model.local_outputs()) {
        return Err(Error::DimensionMismatch(format!(
            "L must be {}×{}",
            model.n(),
            model.local_outputs()
        )));
    }
    let c = model.cl();
    let f = &diag.m * model.a() - l * c;
    let verdict = certify::is_hurwitz(&f)?;
    if !verdict.stable {
        return Err(Error::NotHurwitz(verdict.abscissa.as_f64()));
    }
    let k = l - &f * &diag.h;
    Ok(UnknownInputObserver { t: diag.m.clone(), f, k, h: diag.h, m: diag.m, l: l.clone() })
}

/// Gain `L` stabilizing `M A − L C_l` with an LMI certificate `(P, R = P L)`.
pub fn design_uio_gain<T: Real>(model: &LtiModel<T>) -> Result<(DMatrix<T>, StabilityCertificate<T>)> {
    let diag = require_existence(model)?;
    if let Some(z) = diag.unobservable.first() {
        return Err(Error::NotDetectable { re: z.re.as_f64(), im: z.im.as_f64() });
    }
    let n = model.n();
    let c = model.cl();
    let ma = &diag.m * model.a();
    let l = certify::stabilizing_output_injection(&ma, c, &RiccatiWeights::identity(n, c.nrows()))?;
    let q = DMatrix::identity(n, n);
    let p = certify::solve_lyapunov(&(&ma - &l * c), &q)?;
    let r = &p * &l;
    let lmi = certify::verify_uio_lmi(&p, &r, &diag.m, model.a(), c);
    let (_, pmax) = linalg::sym_eig_range(&p);
    let cert = StabilityCertificate {
        alpha: T::one() / (T::of(2.0) * pmax),
        p,
        q: Some(q),
        r: Some(r),
        lmi_max_eig: Some(lmi),
    };
    Ok((l, cert))
}

/// Existence check, gain design and synthesis in one step.
pub fn design_uio<T: Real>(model: &LtiModel<T>) -> Result<(UnknownInputObserver<T>, StabilityCertificate<T>)> {
    let (l, cert) = design_uio_gain(model)?;
    Ok((synthesize_uio(model, &l)?, cert))
}

/// Either observer kind, for simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum Observer<T: Real> {
    Luenberger(LuenbergerObserver<T>),
    Uio(UnknownInputObserver<T>),
}

impl<T: Real> Observer<T> {
    pub fn to_json(&self) -> Value {
        match self {
            Observer::Luenberger(o) => o.to_json(),
            Observer::Uio(o) => o.to_json(),
        }
    }
}
