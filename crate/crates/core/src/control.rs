//! Static wide-area stabilizer `u_c = −k (y_l,sel − ŷ_r,sel)` closed through
//! the unknown-input observer.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimation::UnknownInputObserver;
use crate::linalg;
use crate::modal::{self, SWING_BAND, SWING_THRESHOLD};
use crate::model::{LtiModel, ModelParts, SignalSelector};
use crate::scalar::Real;

/// Objective label written into tuning reports.
pub const OBJECTIVE: &str = "maximize the minimum swing-mode damping ratio of the e = 0 plant block";

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StaticWapss<T> {
    pub k: T,
    pub selector: SignalSelector,
}

/// `A − B_c k (c_l − c_r)`: the plant under ideal remote feedback.
pub fn plant_block<T: Real>(model: &LtiModel<T>, selector: &SignalSelector, k: T) -> DMatrix<T> {
    let bc = selector.input_column(model);
    let diff = selector.local_row(model) - selector.remote_row(model);
    model.a() - bc * diff * k
}

/// Closed loop in `(x, e)` coordinates:
/// `[[A − B_c k (c_l − c_r), −B_c k c_r], [0, F]]`.
pub fn closed_loop_model<T: Real>(
    model: &LtiModel<T>,
    uio: &UnknownInputObserver<T>,
    selector: &SignalSelector,
    k: T,
) -> DMatrix<T> {
    let n = model.n();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&plant_block(model, selector, k));
    let coupling = -(selector.input_column(model) * selector.remote_row(model) * k);
    out.view_mut((0, n), (n, n)).copy_from(&coupling);
    out.view_mut((n, n), (n, n)).copy_from(&uio.f);
    out
}

/// Evaluation of one candidate gain.
#[derive(Debug, Clone, PartialEq)]
pub struct GainEvaluation<T> {
    pub k: T,
    /// Damping ratios of the swing modes, by ascending frequency.
    pub swing_dampings: Vec<T>,
    pub abscissa: T,
}

impl<T: Real> GainEvaluation<T> {
    pub fn stable(&self) -> bool {
        self.abscissa < T::zero()
    }

    /// Smallest swing damping, or `None` without swing modes.
    pub fn min_damping(&self) -> Option<T> {
        self.swing_dampings.iter().copied().reduce(|a, b| a.min(b))
    }

    /// Lexicographic score: minimum swing damping, then decay rate.
    fn better_than(&self, other: &Self) -> bool {
        let tol = T::tol(TIE_TOL);
        let inf = T::max_value().unwrap_or(T::one());
        let (a, b) = (self.min_damping().unwrap_or(inf), other.min_damping().unwrap_or(inf));
        if (a - b).abs() > tol {
            return a > b;
        }
        let (da, db) = (-self.abscissa, -other.abscissa);
        if (da - db).abs() > tol * da.abs().max(T::one()) {
            return da > db;
        }
        self.k.abs() < other.k.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningReport<T> {
    pub evaluations: Vec<GainEvaluation<T>>,
    pub selected: usize,
    /// Spectral abscissa of the full `(x, e)` closed loop at the selected gain.
    pub augmented_abscissa: T,
}

impl<T: Real> TuningReport<T> {
    pub fn best(&self) -> &GainEvaluation<T> {
        &self.evaluations[self.selected]
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .evaluations
            .iter()
            .map(|e| {
                json!({
                    "k": e.k.as_f64(),
                    "swing_dampings": e.swing_dampings.iter().map(|z| z.as_f64()).collect::<Vec<_>>(),
                    "abscissa": e.abscissa.as_f64(),
                })
            })
            .collect();
        let best = self.best();
        json!({
            "objective": OBJECTIVE,
            "evaluations": rows,
            "selected_k": best.k.as_f64(),
            "selected_min_damping": best.min_damping().map(|z| z.as_f64()),
            "augmented_abscissa": self.augmented_abscissa.as_f64(),
        })
    }
}

fn with_dynamics<T: Real>(model: &LtiModel<T>, a: DMatrix<T>) -> Result<LtiModel<T>> {
    let p = model.parts();
    LtiModel::new(ModelParts { a, ..p.clone() })
}

/// Swing-mode dampings of `a` given the labels of `model`. Falls back to
/// every in-band oscillatory eigenvalue when the eigenvectors are too
/// ill-conditioned for participation analysis.
pub fn swing_dampings<T: Real>(model: &LtiModel<T>, a: &DMatrix<T>) -> Result<Vec<T>> {
    let band = (T::of(SWING_BAND.0), T::of(SWING_BAND.1));
    let probe = with_dynamics(model, a.clone())?;
    match modal::identify_swing_modes(&probe, band, T::of(SWING_THRESHOLD)) {
        Ok(modes) => Ok(modes.iter().map(|m| m.damping).collect()),
        Err(Error::DefectiveMatrix(_)) => {
            let mut lams: Vec<_> = linalg::eigenvalues(a)?
                .into_iter()
                .filter(|z| z.im >= band.0 && z.im <= band.1)
                .collect();
            lams.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap_or(Ordering::Equal));
            lams.into_iter().map(modal::damping_ratio).collect()
        }
        Err(e) => Err(e),
    }
}

pub fn evaluate_gain<T: Real>(model: &LtiModel<T>, selector: &SignalSelector, k: T) -> Result<GainEvaluation<T>> {
    let a = plant_block(model, selector, k);
    Ok(GainEvaluation {
        k,
        swing_dampings: swing_dampings(model, &a)?,
        abscissa: linalg::spectral_abscissa(&a)?,
    })
}

/// Grid search for the stabilizing gain with the best minimum swing
/// damping; ties go to the larger decay rate, then to the smaller `|k|`.
pub fn tune_static_gain<T: Real>(
    model: &LtiModel<T>,
    uio: &UnknownInputObserver<T>,
    selector: &SignalSelector,
    k_grid: &[T],
) -> Result<(StaticWapss<T>, TuningReport<T>)> {
    if k_grid.is_empty() {
        return Err(Error::InvalidParams("empty gain grid".into()));
    }
    let evaluations = k_grid
        .iter()
        .map(|&k| evaluate_gain(model, selector, k))
        .collect::<Result<Vec<_>>>()?;
    let mut selected: Option<usize> = None;
    for (i, ev) in evaluations.iter().enumerate() {
        if !ev.stable() {
            continue;
        }
        if selected.is_none_or(|s| ev.better_than(&evaluations[s])) {
            selected = Some(i);
        }
    }
    let selected = selected.ok_or(Error::NoStabilizingGain)?;
    let k = evaluations[selected].k;
    let augmented_abscissa = linalg::spectral_abscissa(&closed_loop_model(model, uio, selector, k))?;
    if !(augmented_abscissa < T::zero()) {
        return Err(Error::NoStabilizingGain);
    }
    Ok((
        StaticWapss { k, selector: selector.clone() },
        TuningReport { evaluations, selected, augmented_abscissa },
    ))
}

/// `start, start + step, …` up to and including `end` (within half a step).
pub fn gain_grid<T: Real>(start: T, step: T, end: T) -> Result<Vec<T>> {
    if !(step > T::zero()) || !(end >= start) {
        return Err(Error::InvalidParams("gain grid needs step > 0 and end ≥ start".into()));
    }
    let count = ((end - start) / step + T::of(0.5)).floor().to_usize().unwrap_or(0);
    Ok((0..=count).map(|i| start + step * T::of(i as f64)).collect())
}
