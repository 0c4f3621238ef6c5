//! Eigen-analysis of the state matrix: modes, damping ratios, participation
//! factors, swing-mode identification and loop-selection-index ranking.
//!
//! Right eigenvectors are scaled to unit 2-norm with their largest-magnitude
//! entry rotated onto the positive real axis. Left eigenvectors are the
//! columns of `V⁻ᴴ`, so `v_lᴴ v_r = 1` for every mode and the participation
//! factors `Re(conj(v_l,k) v_r,k)` of each mode sum to one.

use std::cmp::Ordering;

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, cnorm, complexify, CMatrix, CVector};
use crate::model::LtiModel;
use crate::scalar::Real;

/// Default swing-mode frequency band, rad/s.
pub const SWING_BAND: (f64, f64) = (1.0, 15.0);
/// Default minimum electromechanical participation of a swing mode.
pub const SWING_THRESHOLD: f64 = 0.5;

/// Eigenvector-matrix condition estimate above which the decomposition is
/// treated as defective.
const DEFECTIVE_COND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T: Real> {
    pub eigenvalue: Complex<T>,
    /// |Im λ|, rad/s.
    pub frequency: T,
    /// −Re λ / |λ|; zero for a zero eigenvalue.
    pub damping: T,
    pub right: CVector<T>,
    pub left: CVector<T>,
    pub participation: DVector<T>,
    pub is_swing: bool,
    /// True for the negative-frequency member of a complex pair.
    pub is_conjugate: bool,
}

impl<T: Real> Mode<T> {
    pub fn is_oscillatory(&self) -> bool {
        self.eigenvalue.im != T::zero()
    }
}

#[derive(Debug, Clone)]
pub struct ModalDecomposition<T: Real> {
    pub modes: Vec<Mode<T>>,
}

impl<T: Real> ModalDecomposition<T> {
    /// Modes with `ω ≥ 0`, one representative per complex pair.
    pub fn representatives(&self) -> impl Iterator<Item = &Mode<T>> {
        self.modes.iter().filter(|m| !m.is_conjugate)
    }

    /// `n × n` participation matrix, column `i` belonging to `modes[i]`.
    pub fn participation_matrix(&self) -> DMatrix<T> {
        let n = self.modes.len();
        DMatrix::from_fn(n, n, |k, i| self.modes[i].participation[k])
    }

    /// Representative mode whose eigenvalue is nearest `target`.
    pub fn nearest(&self, target: Complex<T>) -> Option<&Mode<T>> {
        self.representatives().min_by(|a, b| {
            (a.eigenvalue - target)
                .modulus()
                .partial_cmp(&(b.eigenvalue - target).modulus())
                .unwrap_or(Ordering::Equal)
        })
    }
}

pub fn damping_ratio<T: Real>(lambda: Complex<T>) -> Result<T> {
    let r = lambda.modulus();
    if r == T::zero() {
        return Err(Error::ZeroEigenvalue);
    }
    Ok(-lambda.re / r)
}

fn order_key<T: Real>(a: &Complex<T>, b: &Complex<T>) -> Ordering {
    let fa = a.im.abs();
    let fb = b.im.abs();
    fa.partial_cmp(&fb)
        .unwrap_or(Ordering::Equal)
        .then(b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal))
        .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
}

/// Unit 2-norm, largest entry real-positive (first index wins ties).
fn normalize_right<T: Real>(v: &mut CVector<T>) {
    let norm = cnorm(v);
    if norm == T::zero() {
        return;
    }
    let mut best = 0;
    let mut best_mag = T::zero();
    for (i, z) in v.iter().enumerate() {
        let m = z.modulus();
        if m > best_mag * (T::one() + T::of(1e-12)) {
            best = i;
            best_mag = m;
        }
    }
    let phase = v[best] / Complex::new(v[best].modulus(), T::zero());
    let scale = phase.conj() / Complex::new(norm, T::zero());
    v.iter_mut().for_each(|z| *z *= scale);
    v[best] = Complex::new(v[best].re, T::zero());
}

/// Full eigendecomposition of a real square matrix.
pub fn eigenmodes<T: Real>(a: &DMatrix<T>) -> Result<ModalDecomposition<T>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(ModalDecomposition { modes: Vec::new() });
    }
    let scale = linalg::max_abs(a).max(T::one());
    let real_tol = T::tol(1e-10) * scale;
    let cluster_tol = T::tol(1e-7) * scale;

    let mut lambdas = linalg::eigenvalues(a)?;
    // Clean the pairing: real eigenvalues get exactly zero imaginary part and
    // each complex eigenvalue points to an exact conjugate partner.
    for z in lambdas.iter_mut() {
        if z.im.abs() <= real_tol {
            z.im = T::zero();
        }
    }
    let mut upper: Vec<Complex<T>> = lambdas.iter().copied().filter(|z| z.im > T::zero()).collect();
    let mut reals: Vec<Complex<T>> = lambdas.iter().copied().filter(|z| z.im == T::zero()).collect();
    let lower_count = lambdas.iter().filter(|z| z.im < T::zero()).count();
    if lower_count != upper.len() {
        return Err(Error::ConvergenceFailure);
    }
    upper.sort_by(order_key);
    reals.sort_by(order_key);

    // Eigenvectors for each representative, processing clusters together so
    // that repeated eigenvalues get independent vectors.
    let ac = complexify(a);
    let eigvecs_for = |group: &[Complex<T>]| -> Vec<CVector<T>> {
        let mean = group.iter().fold(Complex::new(T::zero(), T::zero()), |s, z| s + z)
            / Complex::new(T::of(group.len() as f64), T::zero());
        let shifted = &ac - CMatrix::identity(n, n) * mean;
        linalg::complex_null_space(&shifted, T::max_value().unwrap_or(T::one()), group.len())
    };
    let mut reps: Vec<(Complex<T>, CVector<T>)> = Vec::with_capacity(n);
    for list in [&reals, &upper] {
        let mut i = 0;
        while i < list.len() {
            let mut j = i + 1;
            while j < list.len() && (list[j] - list[i]).modulus() <= cluster_tol {
                j += 1;
            }
            let vecs = eigvecs_for(&list[i..j]);
            for mut v in vecs {
                normalize_right(&mut v);
                let lam = if j - i == 1 {
                    list[i]
                } else {
                    // Rayleigh quotient separates nearly equal members.
                    let av = &ac * &v;
                    let rq = v.dotc(&av);
                    if list[i].im == T::zero() { Complex::new(rq.re, T::zero()) } else { rq }
                };
                let res = cnorm(&(&ac * &v - &v * lam));
                if res > T::tol(1e-8) * scale {
                    return Err(Error::DefectiveMatrix(f64::INFINITY));
                }
                reps.push((lam, v));
            }
            i = j;
        }
    }

    // Assemble all n columns: reals, then each complex pair (upper, conj).
    let mut ordered: Vec<(Complex<T>, CVector<T>, bool)> = Vec::with_capacity(n);
    for (lam, v) in reps {
        if lam.im == T::zero() {
            ordered.push((lam, v, false));
        } else {
            let vc = v.map(|z| z.conj());
            ordered.push((lam, v, false));
            ordered.push((lam.conj(), vc, true));
        }
    }
    let mut idx: Vec<usize> = (0..ordered.len()).collect();
    idx.sort_by(|&i, &j| order_key(&ordered[i].0, &ordered[j].0));
    let ordered: Vec<_> = idx.into_iter().map(|i| ordered[i].clone()).collect();
    if ordered.len() != n {
        return Err(Error::ConvergenceFailure);
    }

    let vmat = CMatrix::from_columns(&ordered.iter().map(|(_, v, _)| v.clone()).collect::<Vec<_>>());
    let vinv = vmat.clone().try_inverse().ok_or(Error::DefectiveMatrix(f64::INFINITY))?;
    let cond = linalg_norm_c(&vmat) * linalg_norm_c(&vinv);
    if !cond.is_finite_value() || cond.as_f64() > DEFECTIVE_COND {
        return Err(Error::DefectiveMatrix(cond.as_f64()));
    }
    let wmat = vinv.adjoint();

    let mut modes = Vec::with_capacity(n);
    for (i, (lam, v, conj)) in ordered.into_iter().enumerate() {
        let w = wmat.column(i).into_owned();
        let participation = DVector::from_fn(n, |k, _| (w[k].conj() * v[k]).re);
        modes.push(Mode {
            eigenvalue: lam,
            frequency: lam.im.abs(),
            damping: damping_ratio(lam).unwrap_or_else(|_| T::zero()),
            right: v,
            left: w,
            participation,
            is_swing: false,
            is_conjugate: conj,
        });
    }
    // Exact conjugate symmetry for the pair partners.
    for i in 0..n {
        if modes[i].is_conjugate && i > 0 && !modes[i - 1].is_conjugate {
            let (head, tail) = modes.split_at_mut(i);
            let rep = &head[i - 1];
            tail[0].left = rep.left.map(|z| z.conj());
            tail[0].participation = rep.participation.clone();
        }
    }
    Ok(ModalDecomposition { modes })
}

/// Frobenius norm of a complex matrix.
fn linalg_norm_c<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt()
}

/// Participation matrix `P_f[k][i] = Re(conj(v_l,k,i) v_r,k,i)`.
pub fn participation_matrix<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    Ok(eigenmodes(a)?.participation_matrix())
}

/// Modes with frequency in `band` whose summed participation over rotor-angle
/// and speed states is at least `threshold`, sorted by frequency.
pub fn identify_swing_modes<T: Real>(model: &LtiModel<T>, band: (T, T), threshold: T) -> Result<Vec<Mode<T>>> {
    let dec = eigenmodes(model.a())?;
    Ok(swing_modes_of(&dec, model, band, threshold))
}

pub(crate) fn swing_modes_of<T: Real>(
    dec: &ModalDecomposition<T>,
    model: &LtiModel<T>,
    band: (T, T),
    threshold: T,
) -> Vec<Mode<T>> {
    let em: Vec<usize> = model
        .state_labels()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.kind.is_electromechanical())
        .map(|(i, _)| i)
        .collect();
    if em.is_empty() {
        return Vec::new();
    }
    let mut out: Vec<Mode<T>> = dec
        .representatives()
        .filter(|m| m.is_oscillatory() && m.frequency >= band.0 && m.frequency <= band.1)
        .filter(|m| em.iter().fold(T::zero(), |s, &k| s + m.participation[k]) >= threshold)
        .cloned()
        .map(|mut m| {
            m.is_swing = true;
            m
        })
        .collect();
    out.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).unwrap_or(Ordering::Equal));
    out
}

/// Geometric loop score of one input/output pair for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopScore<T: Real> {
    pub input_index: usize,
    /// Output signal name, e.g. `dw2-dw4`.
    pub output: String,
    pub value: T,
}

/// `|bᵀ v_l| |c v_r| / (‖b‖ ‖v_l‖ ‖c‖ ‖v_r‖)` on complex vectors.
pub fn geometric_index<T: Real>(b: &CVector<T>, vl: &CVector<T>, c: &CVector<T>, vr: &CVector<T>) -> Result<T> {
    let (nb, nc, nl, nr) = (cnorm(b), cnorm(c), cnorm(vl), cnorm(vr));
    if nb == T::zero() {
        return Err(Error::ZeroVector("input column"));
    }
    if nc == T::zero() {
        return Err(Error::ZeroVector("output row"));
    }
    if nl == T::zero() || nr == T::zero() {
        return Err(Error::ZeroVector("eigenvector"));
    }
    let ctrl = b.iter().zip(vl.iter()).fold(Complex::new(T::zero(), T::zero()), |s, (x, y)| s + *x * *y);
    let obs = c.iter().zip(vr.iter()).fold(Complex::new(T::zero(), T::zero()), |s, (x, y)| s + *x * *y);
    let v = ctrl.modulus() * obs.modulus() / (nb * nl * nc * nr);
    Ok(v.min(T::one()))
}

pub fn loop_selection_index<T: Real>(
    model: &LtiModel<T>,
    mode: &Mode<T>,
    input: usize,
    output_row: &DMatrix<T>,
    output_name: impl Into<String>,
) -> Result<LoopScore<T>> {
    if input >= model.inputs() {
        return Err(Error::IndexOutOfRange(format!("input {input} >= m={}", model.inputs())));
    }
    if output_row.len() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "output row has {} entries, expected {}",
            output_row.len(),
            model.n()
        )));
    }
    let b = complexify(&model.b().columns(input, 1).into_owned()).column(0).into_owned();
    let c = CVector::from_iterator(model.n(), output_row.iter().map(|&x| Complex::new(x, T::zero())));
    let value = geometric_index(&b, &mode.left, &c, &mode.right)?;
    Ok(LoopScore { input_index: input, output: output_name.into(), value })
}

/// Speed-difference rows `Δω_i − Δω_j` for every labeled machine pair `i < j`.
pub fn speed_difference_rows<T: Real>(model: &LtiModel<T>) -> Vec<(String, DMatrix<T>)> {
    let machines = model.omega_machines();
    let mut out = Vec::new();
    for (a, &i) in machines.iter().enumerate() {
        for &j in &machines[a + 1..] {
            let mut row = DMatrix::zeros(1, model.n());
            let si = model.state_index(crate::model::StateKind::Omega, i).expect("labeled");
            let sj = model.state_index(crate::model::StateKind::Omega, j).expect("labeled");
            row[(0, si)] = T::one();
            row[(0, sj)] = -T::one();
            out.push((format!("dw{i}-dw{j}"), row));
        }
    }
    out
}

/// Scores every (input, pairwise speed difference) loop, best first. Ties
/// resolve by input index, then output name.
pub fn rank_loops<T: Real>(model: &LtiModel<T>, mode: &Mode<T>) -> Result<Vec<LoopScore<T>>> {
    let rows = speed_difference_rows(model);
    let mut out = Vec::with_capacity(rows.len() * model.inputs());
    for input in 0..model.inputs() {
        if model.b().column(input).iter().all(|&x| x == T::zero()) {
            continue;
        }
        for (name, row) in &rows {
            out.push(loop_selection_index(model, mode, input, row, name.clone())?);
        }
    }
    sort_scores(&mut out);
    Ok(out)
}

pub fn sort_scores<T: Real>(scores: &mut [LoopScore<T>]) {
    scores.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap_or(Ordering::Equal)
            .then(a.input_index.cmp(&b.input_index))
            .then(a.output.cmp(&b.output))
    });
}
