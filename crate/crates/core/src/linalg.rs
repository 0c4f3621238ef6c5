//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

const SCHUR_MAX_ITER: usize = 10_000;

pub fn complexify<T: Real>(a: &DMatrix<T>) -> CMatrix<T> {
    a.map(|x| Complex::new(x, T::zero()))
}

/// Largest absolute entry.
pub fn max_abs<T: Real>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Induced 2-norm (largest singular value).
pub fn norm2<T: Real>(a: &DMatrix<T>) -> T {
    if a.is_empty() {
        return T::zero();
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |m, &s| m.max(s))
}

pub fn sym<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * T::of(0.5)
}

/// All eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur =
        Schur::try_new(a.clone(), T::eps(), SCHUR_MAX_ITER).ok_or(Error::ConvergenceFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa<T: Real>(a: &DMatrix<T>) -> Result<T> {
    Ok(eigenvalues(a)?
        .iter()
        .fold(T::min_value().unwrap_or(-T::one()), |m, z| m.max(z.re)))
}

/// Extreme eigenvalues `(min, max)` of the symmetric part of `a`.
pub fn sym_eig_range<T: Real>(a: &DMatrix<T>) -> (T, T) {
    let e = SymmetricEigen::new(sym(a)).eigenvalues;
    let lo = e.iter().fold(T::max_value().unwrap_or(T::one()), |m, &x| m.min(x));
    let hi = e.iter().fold(T::min_value().unwrap_or(-T::one()), |m, &x| m.max(x));
    (lo, hi)
}

/// Numerical rank with a relative singular-value tolerance.
pub fn rank<T: Real>(a: &DMatrix<T>, rel_tol: T) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = a.clone().svd(false, false).singular_values;
    let smax = s.iter().fold(T::zero(), |m, &x| m.max(x));
    if smax == T::zero() {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Moore–Penrose pseudo-inverse with a relative cut-off.
pub fn pinv<T: Real>(a: &DMatrix<T>, rel_tol: T) -> DMatrix<T> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(T::zero(), |m, &x| m.max(x));
    let cut = rel_tol * smax;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > T::zero() {
            let vk = vt.row(k).transpose();
            let uk = u.column(k);
            out += (vk * uk.transpose()) * (T::one() / s);
        }
    }
    out
}

/// Orthonormal basis of the numerical null space of a complex matrix,
/// returned as the right singular vectors whose singular values fall below
/// `abs_tol`, at most `max_dim` of them (smallest first).
pub fn complex_null_space<T: Real>(a: &CMatrix<T>, abs_tol: T, max_dim: usize) -> Vec<CVector<T>> {
    let ncols = a.ncols();
    // Pad short matrices so the SVD returns a full set of right vectors.
    let padded = if a.nrows() < ncols {
        let mut p = CMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (a.nrows(), ncols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^H");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| {
        svd.singular_values[i]
            .partial_cmp(&svd.singular_values[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx.into_iter()
        .take(max_dim)
        .filter(|&i| svd.singular_values[i] <= abs_tol)
        .map(|i| vt.row(i).adjoint())
        .collect()
}

/// Smallest singular value of a complex matrix.
pub fn smallest_singular_value<T: Real>(a: &CMatrix<T>) -> T {
    let ncols = a.ncols();
    if a.nrows() < ncols {
        return T::zero();
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::max_value().unwrap_or(T::one()), |m, &x| m.min(x))
}

pub fn cnorm<T: Real>(v: &CVector<T>) -> T {
    v.iter()
        .fold(T::zero(), |acc, z| acc + z.norm_sqr())
        .sqrt()
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij != T::zero() {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * aij));
            }
        }
    }
    out
}

pub fn all_finite<T: Real>(a: &DMatrix<T>) -> bool {
    a.iter().all(|x| x.is_finite_value())
}
