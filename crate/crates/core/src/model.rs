//! The linearized plant `ẋ = A x + B u + E d`, `y_l = C_l x`, `y_r = C_r x`
//! and its JSON file format.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Kind of a state variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    /// Rotor angle δ_i.
    Delta,
    /// Speed deviation Δω_i.
    Omega,
    Other,
}

impl StateKind {
    pub fn is_electromechanical(self) -> bool {
        matches!(self, StateKind::Delta | StateKind::Omega)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateLabel {
    pub name: String,
    pub kind: StateKind,
    /// Machine index, 1-based. Ignored for [`StateKind::Other`].
    pub machine: usize,
}

impl StateLabel {
    pub fn delta(machine: usize) -> Self {
        Self { name: format!("delta{machine}"), kind: StateKind::Delta, machine }
    }

    pub fn omega(machine: usize) -> Self {
        Self { name: format!("dw{machine}"), kind: StateKind::Omega, machine }
    }

    pub fn other(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: StateKind::Other, machine: 0 }
    }
}

/// Unvalidated model matrices. Use [`validate_model`] or [`LtiModel::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParts<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub e: DMatrix<T>,
    pub cl: DMatrix<T>,
    pub cr: DMatrix<T>,
    pub state_labels: Vec<StateLabel>,
}

/// A validated linear time-invariant plant. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel<T: Real> {
    parts: ModelParts<T>,
}

/// One violated model invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DimensionMismatch(String),
    NonFinite(String),
    InvalidLabels(String),
}

impl From<Violation> for Error {
    fn from(v: Violation) -> Self {
        match v {
            Violation::DimensionMismatch(s) => Error::DimensionMismatch(s),
            Violation::NonFinite(s) => Error::NonFinite(s),
            Violation::InvalidLabels(s) => Error::InvalidLabels(s),
        }
    }
}

/// Checks every model invariant and lists each violation. Empty means valid.
pub fn validate_model<T: Real>(p: &ModelParts<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = p.a.nrows();
    if p.a.ncols() != n {
        out.push(Violation::DimensionMismatch(format!(
            "A is {}x{}, expected square",
            p.a.nrows(),
            p.a.ncols()
        )));
    }
    for (name, rows, m) in [("B", true, &p.b), ("E", true, &p.e), ("Cl", false, &p.cl), ("Cr", false, &p.cr)] {
        let got = if rows { m.nrows() } else { m.ncols() };
        if got != n {
            let what = if rows { "rows" } else { "columns" };
            out.push(Violation::DimensionMismatch(format!("{name} has {got} {what}, expected n={n}")));
        }
    }
    for (name, m) in [("A", &p.a), ("B", &p.b), ("E", &p.e), ("Cl", &p.cl), ("Cr", &p.cr)] {
        if let Some(pos) = m.iter().position(|x| !x.is_finite_value()) {
            out.push(Violation::NonFinite(format!(
                "{name}[{}][{}]",
                pos % m.nrows().max(1),
                pos / m.nrows().max(1)
            )));
        }
    }
    if p.state_labels.len() != n {
        out.push(Violation::InvalidLabels(format!(
            "{} state labels for n={n}",
            p.state_labels.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for l in &p.state_labels {
        if l.kind.is_electromechanical() {
            if l.machine == 0 || l.machine > n {
                out.push(Violation::InvalidLabels(format!(
                    "label {:?} has machine index {} outside 1..={n}",
                    l.name, l.machine
                )));
            } else if !seen.insert((l.kind, l.machine)) {
                out.push(Violation::InvalidLabels(format!(
                    "duplicate {:?} label for machine {}",
                    l.kind, l.machine
                )));
            }
        }
    }
    out
}

impl<T: Real> LtiModel<T> {
    pub fn new(parts: ModelParts<T>) -> Result<Self> {
        match validate_model(&parts).into_iter().next() {
            Some(v) => Err(v.into()),
            None => Ok(Self { parts }),
        }
    }

    pub fn n(&self) -> usize {
        self.parts.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.parts.b.ncols()
    }
    pub fn disturbances(&self) -> usize {
        self.parts.e.ncols()
    }
    pub fn local_outputs(&self) -> usize {
        self.parts.cl.nrows()
    }
    pub fn remote_outputs(&self) -> usize {
        self.parts.cr.nrows()
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.parts.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.parts.b
    }
    pub fn e(&self) -> &DMatrix<T> {
        &self.parts.e
    }
    pub fn cl(&self) -> &DMatrix<T> {
        &self.parts.cl
    }
    pub fn cr(&self) -> &DMatrix<T> {
        &self.parts.cr
    }
    pub fn state_labels(&self) -> &[StateLabel] {
        &self.parts.state_labels
    }
    pub fn parts(&self) -> &ModelParts<T> {
        &self.parts
    }
    pub fn into_parts(self) -> ModelParts<T> {
        self.parts
    }

    /// State index of the `kind` state of a machine, if labeled.
    pub fn state_index(&self, kind: StateKind, machine: usize) -> Option<usize> {
        self.parts
            .state_labels
            .iter()
            .position(|l| l.kind == kind && l.machine == machine)
    }

    /// Machines that have a speed-deviation state, ascending.
    pub fn omega_machines(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .parts
            .state_labels
            .iter()
            .filter(|l| l.kind == StateKind::Omega)
            .map(|l| l.machine)
            .collect();
        v.sort_unstable();
        v
    }

    /// Converts every matrix to another scalar type.
    pub fn cast<U: Real>(&self) -> LtiModel<U> {
        let c = |m: &DMatrix<T>| m.map(|x| U::of(x.as_f64()));
        LtiModel {
            parts: ModelParts {
                a: c(&self.parts.a),
                b: c(&self.parts.b),
                e: c(&self.parts.e),
                cl: c(&self.parts.cl),
                cr: c(&self.parts.cr),
                state_labels: self.parts.state_labels.clone(),
            },
        }
    }
}

/// Which input column drives the wide-area loop and which output rows form
/// the feedback signal `y_l[local] − y_r[remote]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalSelector {
    pub input_index: usize,
    pub local_rows: Vec<usize>,
    pub remote_rows: Vec<usize>,
}

impl SignalSelector {
    pub fn new<T: Real>(
        model: &LtiModel<T>,
        input_index: usize,
        local_rows: Vec<usize>,
        remote_rows: Vec<usize>,
    ) -> Result<Self> {
        if input_index >= model.inputs() {
            return Err(Error::IndexOutOfRange(format!(
                "input {input_index} >= m={}",
                model.inputs()
            )));
        }
        if let Some(r) = local_rows.iter().find(|&&r| r >= model.local_outputs()) {
            return Err(Error::IndexOutOfRange(format!("local row {r} >= p_l={}", model.local_outputs())));
        }
        if let Some(r) = remote_rows.iter().find(|&&r| r >= model.remote_outputs()) {
            return Err(Error::IndexOutOfRange(format!("remote row {r} >= p_r={}", model.remote_outputs())));
        }
        if local_rows.len() != remote_rows.len() || local_rows.is_empty() {
            return Err(Error::DimensionMismatch(
                "local and remote feedback rows must pair up one-to-one".into(),
            ));
        }
        Ok(Self { input_index, local_rows, remote_rows })
    }

    /// Guesses the loop for a model without an explicit selector: the first
    /// local row that picks out a single speed state, the first such remote
    /// row, and the input column of the local machine.
    pub fn infer<T: Real>(model: &LtiModel<T>) -> Result<Self> {
        let speed_row = |c: &DMatrix<T>| -> Option<(usize, usize)> {
            (0..c.nrows()).find_map(|r| {
                let nz: Vec<usize> = (0..c.ncols()).filter(|&j| c[(r, j)] != T::zero()).collect();
                match nz.as_slice() {
                    [j] if model.state_labels()[*j].kind == StateKind::Omega => {
                        Some((r, model.state_labels()[*j].machine))
                    }
                    _ => None,
                }
            })
        };
        let (local, machine) = speed_row(model.cl()).unwrap_or((0, 1));
        let (remote, _) = speed_row(model.cr()).unwrap_or((0, 0));
        let input = if machine >= 1 && machine <= model.inputs() { machine - 1 } else { 0 };
        Self::new(model, input, vec![local], vec![remote])
    }

    /// Row vector of the local feedback signal (sum over selected rows).
    pub fn local_row<T: Real>(&self, model: &LtiModel<T>) -> DMatrix<T> {
        sum_rows(model.cl(), &self.local_rows)
    }

    pub fn remote_row<T: Real>(&self, model: &LtiModel<T>) -> DMatrix<T> {
        sum_rows(model.cr(), &self.remote_rows)
    }

    pub fn input_column<T: Real>(&self, model: &LtiModel<T>) -> DMatrix<T> {
        model.b().columns(self.input_index, 1).into_owned()
    }
}

fn sum_rows<T: Real>(c: &DMatrix<T>, rows: &[usize]) -> DMatrix<T> {
    let mut out = DMatrix::zeros(1, c.ncols());
    for &r in rows {
        out += c.rows(r, 1);
    }
    out
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    n: usize,
    m: usize,
    q: usize,
    p_l: usize,
    p_r: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "Cl")]
    cl: Vec<Vec<f64>>,
    #[serde(rename = "Cr")]
    cr: Vec<Vec<f64>>,
    state_labels: Vec<StateLabel>,
}

fn to_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].as_f64()).collect())
        .collect()
}

/// Builds a matrix from nested rows, with `cols` used when there are no rows.
fn from_rows<T: Real>(name: &str, rows: &[Vec<f64>], rows_expected: usize, cols: usize) -> Result<DMatrix<T>> {
    if rows.len() != rows_expected {
        return Err(Error::DimensionMismatch(format!(
            "{name} has {} rows, header says {rows_expected}",
            rows.len()
        )));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!(
            "{name} row {i} has {} entries, expected {cols}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(rows_expected, cols, |i, j| T::of(rows[i][j])))
}

/// Parses and validates a model document.
pub fn load_model<T: Real>(source: &[u8]) -> Result<LtiModel<T>> {
    let doc: ModelDocument =
        serde_json::from_slice(source).map_err(|e| Error::Parse(e.to_string()))?;
    let parts = ModelParts {
        a: from_rows("A", &doc.a, doc.n, doc.n)?,
        b: from_rows("B", &doc.b, doc.n, doc.m)?,
        e: from_rows("E", &doc.e, doc.n, doc.q)?,
        cl: from_rows("Cl", &doc.cl, doc.p_l, doc.n)?,
        cr: from_rows("Cr", &doc.cr, doc.p_r, doc.n)?,
        state_labels: doc.state_labels,
    };
    LtiModel::new(parts)
}

/// Serializes a model. Output is a deterministic function of the model.
pub fn save_model<T: Real>(model: &LtiModel<T>) -> Vec<u8> {
    let p = model.parts();
    let doc = ModelDocument {
        n: model.n(),
        m: model.inputs(),
        q: model.disturbances(),
        p_l: model.local_outputs(),
        p_r: model.remote_outputs(),
        a: to_rows(&p.a),
        b: to_rows(&p.b),
        e: to_rows(&p.e),
        cl: to_rows(&p.cl),
        cr: to_rows(&p.cr),
        state_labels: p.state_labels.clone(),
    };
    let mut out = serde_json::to_vec(&doc).expect("model documents always serialize");
    out.push(b'\n');
    out
}

/// JSON array-of-rows form of a matrix, shared by observer and certificate
/// documents.
pub fn matrix_json<T: Real>(m: &DMatrix<T>) -> serde_json::Value {
    serde_json::Value::from(to_rows(m))
}
