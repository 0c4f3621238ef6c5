//! Stability certificates: Hurwitz tests, continuous Lyapunov equations,
//! output-injection Riccati design and the observer LMI check.

use nalgebra::{Complex, ComplexField, DMatrix, Schur, SymmetricEigen};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, complexify, max_abs, CMatrix};
use crate::model::matrix_json;
use crate::scalar::Real;

/// Relative residual accepted from a Lyapunov solve.
pub const LYAPUNOV_TOL: f64 = 1e-9;
/// Relative residual accepted from a Riccati solve.
pub const RICCATI_TOL: f64 = 1e-8;
/// Relative PBH singular-value threshold below which a mode is unobservable.
pub const PBH_TOL: f64 = 1e-8;

const SIGN_MAX_ITER: usize = 100;
const NEWTON_MAX_ITER: usize = 30;

/// Quadratic Lyapunov certificate `V(e) = eᵀ P e`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate<T: Real> {
    pub p: DMatrix<T>,
    /// `Q` with `A_clᵀ P + P A_cl + Q = 0`, when the certificate came from a
    /// Lyapunov solve.
    pub q: Option<DMatrix<T>>,
    /// `R = P L`, for observer-LMI certificates.
    pub r: Option<DMatrix<T>>,
    /// Certified decay rate: `V(e(t)) ≤ e^{−2αt} V(e(0))`.
    pub alpha: T,
    pub lmi_max_eig: Option<T>,
}

impl<T: Real> StabilityCertificate<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "P": matrix_json(&self.p),
            "Q": self.q.as_ref().map(matrix_json),
            "R": self.r.as_ref().map(matrix_json),
            "alpha": self.alpha.as_f64(),
            "lmi_max_eig": self.lmi_max_eig.map(|x| x.as_f64()),
        })
    }

    /// `√(λ_max(P)/λ_min(P))`, the transient constant in
    /// `‖e(t)‖ ≤ κ e^{−αt} ‖e(0)‖`.
    pub fn overshoot(&self) -> T {
        let (lo, hi) = linalg::sym_eig_range(&self.p);
        (hi / lo).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzVerdict<T> {
    pub stable: bool,
    pub abscissa: T,
}

pub fn is_hurwitz<T: Real>(a_cl: &DMatrix<T>) -> Result<HurwitzVerdict<T>> {
    let abscissa = linalg::spectral_abscissa(a_cl)?;
    Ok(HurwitzVerdict { stable: abscissa < T::zero(), abscissa })
}

/// Solves `Aᵀ P + P A = −Q` by Bartels–Stewart on the complex Schur form,
/// without structural checks on `Q`.
pub(crate) fn lyapunov_schur<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let schur = Schur::try_new(complexify(a), T::eps(), 10_000).ok_or(Error::ConvergenceFailure)?;
    let (z, u) = schur.unpack();
    // Uᴴ Y + Y U = G with G = −Zᴴ Q Z and P = Z Y Zᴴ.
    let g: CMatrix<T> = -(z.adjoint() * complexify(q) * &z);
    let mut y = CMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = g[(i, j)];
            for k in 0..i {
                acc -= u[(k, i)].conj() * y[(k, j)];
            }
            for k in 0..j {
                acc -= y[(i, k)] * u[(k, j)];
            }
            let den = u[(i, i)].conj() + u[(j, j)];
            if den.modulus() == T::zero() {
                return Err(Error::IllConditioned("singular Lyapunov operator".into()));
            }
            y[(i, j)] = acc / den;
        }
    }
    let p = (&z * y * z.adjoint()).map(|c| c.re);
    Ok(linalg::sym(&p))
}

fn lyapunov_residual<T: Real>(a: &DMatrix<T>, p: &DMatrix<T>, q: &DMatrix<T>) -> T {
    max_abs(&(a.transpose() * p + p * a + q))
}

fn is_spd<T: Real>(m: &DMatrix<T>) -> bool {
    let (lo, _) = linalg::sym_eig_range(m);
    lo > T::zero() && max_abs(&(m - m.transpose())) <= T::tol(1e-12) * max_abs(m).max(T::one())
}

/// Solves `A_clᵀ P + P A_cl = −Q` for Hurwitz `A_cl` and SPD `Q`.
pub fn solve_lyapunov<T: Real>(a_cl: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a_cl.nrows();
    if a_cl.ncols() != n || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch("Lyapunov operands must be n×n".into()));
    }
    let h = is_hurwitz(a_cl)?;
    if !h.stable {
        return Err(Error::NotHurwitz(h.abscissa.as_f64()));
    }
    if !is_spd(q) {
        return Err(Error::IllConditioned("Q is not symmetric positive definite".into()));
    }
    let p = lyapunov_schur(a_cl, q)?;
    let res = lyapunov_residual(a_cl, &p, q);
    let scale = max_abs(&p) * max_abs(a_cl) + max_abs(q);
    if res > T::tol(LYAPUNOV_TOL) * scale {
        return Err(Error::IllConditioned(format!(
            "residual {:e} exceeds tolerance",
            res.as_f64()
        )));
    }
    if !is_spd(&p) {
        return Err(Error::IllConditioned("solution is not positive definite".into()));
    }
    Ok(p)
}

/// `P = lyap(A_cl, I)` and `α = 1/(2 λ_max(P))`, so `V̇ ≤ −2αV`.
pub fn exponential_rate<T: Real>(a_cl: &DMatrix<T>) -> Result<StabilityCertificate<T>> {
    let n = a_cl.nrows();
    let q = DMatrix::identity(n, n);
    let p = solve_lyapunov(a_cl, &q)?;
    let (_, pmax) = linalg::sym_eig_range(&p);
    Ok(StabilityCertificate {
        alpha: T::one() / (T::of(2.0) * pmax),
        p,
        q: Some(q),
        r: None,
        lmi_max_eig: None,
    })
}

/// Eigenvalues of `A` with real part `≥ min_re` that fail the PBH rank
/// test `rank [A − λI; C] = n`.
pub fn unobservable_modes<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>, min_re: T) -> Result<Vec<Complex<T>>> {
    let n = a.nrows();
    let scale = max_abs(a).max(max_abs(c)).max(T::one());
    let ac = complexify(a);
    let cc = complexify(c);
    let mut out: Vec<Complex<T>> = Vec::new();
    for lam in linalg::eigenvalues(a)? {
        if lam.re < min_re || lam.im < T::zero() {
            continue;
        }
        if out.iter().any(|z| (*z - lam).modulus() <= T::tol(1e-9) * scale) {
            continue;
        }
        let mut stacked = CMatrix::<T>::zeros(n + c.nrows(), n);
        stacked
            .view_mut((0, 0), (n, n))
            .copy_from(&(&ac - CMatrix::identity(n, n) * lam));
        stacked.view_mut((n, 0), (c.nrows(), n)).copy_from(&cc);
        if linalg::smallest_singular_value(&stacked) <= T::tol(PBH_TOL) * scale {
            out.push(lam);
        }
    }
    Ok(out)
}

/// Weights of the dual Riccati design.
#[derive(Debug, Clone)]
pub struct RiccatiWeights<T: Real> {
    /// State weight, `n × n` SPD.
    pub state: DMatrix<T>,
    /// Output weight, `p × p` SPD.
    pub output: DMatrix<T>,
}

impl<T: Real> RiccatiWeights<T> {
    pub fn identity(n: usize, p: usize) -> Self {
        Self { state: DMatrix::identity(n, n), output: DMatrix::identity(p, p) }
    }
}

fn riccati_residual<T: Real>(a: &DMatrix<T>, g: &DMatrix<T>, q: &DMatrix<T>, x: &DMatrix<T>) -> T {
    let r = a * x + x * a.transpose() - x * g * x + q;
    let scale = T::of(2.0) * max_abs(a) * max_abs(x) + max_abs(x) * max_abs(x) * max_abs(g) + max_abs(q);
    max_abs(&r) / scale.max(T::eps())
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign<T: Real>(h: &DMatrix<T>) -> Result<DMatrix<T>> {
    let dim = h.nrows();
    let mut z = h.clone();
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let zinv = lu
            .try_inverse()
            .ok_or_else(|| Error::RiccatiFailure("Hamiltonian has eigenvalues on the imaginary axis".into()))?;
        let ldet = det.abs().ln();
        let c = if ldet.is_finite_value() {
            (-ldet / T::of(dim as f64)).exp()
        } else {
            T::one()
        };
        let next = (&z * c + zinv * (T::one() / c)) * T::of(0.5);
        let delta = max_abs(&(&next - &z));
        let done = delta <= T::tol(1e-13) * max_abs(&next).max(T::one());
        z = next;
        if done {
            return Ok(z);
        }
    }
    Err(Error::RiccatiFailure("sign iteration did not converge".into()))
}

/// Gain `L` with `A − L C` Hurwitz from the stabilizing solution of the
/// dual Riccati equation `A X + X Aᵀ − X Cᵀ R⁻¹ C X + Q = 0`, `L = X Cᵀ R⁻¹`.
pub fn stabilizing_output_injection<T: Real>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    weights: &RiccatiWeights<T>,
) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let p = c.nrows();
    if c.ncols() != n || weights.state.shape() != (n, n) || weights.output.shape() != (p, p) {
        return Err(Error::DimensionMismatch("output-injection operands".into()));
    }
    if let Some(z) = unobservable_modes(a, c, T::zero())?.first() {
        return Err(Error::NotDetectable { re: z.re.as_f64(), im: z.im.as_f64() });
    }
    if p == 0 || c.iter().all(|&x| x == T::zero()) {
        return Ok(DMatrix::zeros(n, p));
    }
    let rinv = weights
        .output
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RiccatiFailure("output weight is singular".into()))?;
    let g = c.transpose() * &rinv * c;
    let q = &weights.state;

    // Hamiltonian of the dual problem: [[Aᵀ, −G], [−Q, −A]].
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a.transpose());
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a));
    let w = matrix_sign(&h)?;
    let eye = DMatrix::<T>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let mut x = lhs
        .svd(true, true)
        .solve(&rhs, T::eps())
        .map_err(|e| Error::RiccatiFailure(e.to_string()))?;
    x = linalg::sym(&x);

    let mut res = riccati_residual(a, &g, q, &x);
    let mut iter = 0;
    while res > T::tol(RICCATI_TOL * 1e-3) && iter < NEWTON_MAX_ITER {
        // Kleinman step: (A − X G) X⁺ + X⁺ (A − X G)ᵀ = −(Q + X G X).
        let ak = a - &x * &g;
        if !is_hurwitz(&ak)?.stable {
            break;
        }
        let rhs = q + &x * &g * &x;
        let next = lyapunov_schur(&ak.transpose(), &rhs)?;
        let next_res = riccati_residual(a, &g, q, &next);
        if next_res >= res {
            break;
        }
        x = next;
        res = next_res;
        iter += 1;
    }
    if res > T::tol(RICCATI_TOL) {
        return Err(Error::RiccatiFailure(format!("residual {:e}", res.as_f64())));
    }
    let l = &x * c.transpose() * rinv;
    let verdict = is_hurwitz(&(a - &l * c))?;
    if !verdict.stable {
        return Err(Error::RiccatiFailure(format!(
            "solution not stabilizing (abscissa {:e})",
            verdict.abscissa.as_f64()
        )));
    }
    Ok(l)
}

/// Most-positive eigenvalue of `sym(AᵀMᵀP + P M A − CᵀRᵀ − R C)`.
pub fn verify_uio_lmi<T: Real>(
    p: &DMatrix<T>,
    r: &DMatrix<T>,
    m: &DMatrix<T>,
    a: &DMatrix<T>,
    c: &DMatrix<T>,
) -> T {
    let ma = m * a;
    let rc = r * c;
    let s = ma.transpose() * p + p * &ma - rc.transpose() - rc;
    SymmetricEigen::new(linalg::sym(&s))
        .eigenvalues
        .iter()
        .fold(T::min_value().unwrap_or(-T::one()), |acc, &x| acc.max(x))
}
