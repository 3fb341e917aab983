//! The five noise models and noisy-version construction.

use crate::linalg::HermitianMatrix;
use crate::povm::{MeasurementSet, Povm, PovmError};
use crate::povm::{multi_indices, total_outcomes};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error(transparent)]
    Povm(#[from] PovmError),
}

/// The five noise models ordering the robustness measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseModelKind {
    Depolarising,
    Random,
    Probabilistic,
    JointlyMeasurable,
    Generalised,
}

impl NoiseModelKind {
    pub const ALL: [NoiseModelKind; 5] = [
        NoiseModelKind::Depolarising,
        NoiseModelKind::Random,
        NoiseModelKind::Probabilistic,
        NoiseModelKind::JointlyMeasurable,
        NoiseModelKind::Generalised,
    ];

    pub fn short_name(&self) -> &'static str {
        match self {
            NoiseModelKind::Depolarising => "d",
            NoiseModelKind::Random => "r",
            NoiseModelKind::Probabilistic => "p",
            NoiseModelKind::JointlyMeasurable => "jm",
            NoiseModelKind::Generalised => "g",
        }
    }

    pub fn parse(text: &str) -> Option<NoiseModelKind> {
        match text {
            "d" | "depolarising" | "depolarizing" => Some(NoiseModelKind::Depolarising),
            "r" | "random" => Some(NoiseModelKind::Random),
            "p" | "probabilistic" => Some(NoiseModelKind::Probabilistic),
            "jm" | "jointly-measurable" => Some(NoiseModelKind::JointlyMeasurable),
            "g" | "generalised" | "generalized" => Some(NoiseModelKind::Generalised),
        _ => None,
        }
    }
}

impl std::fmt::Display for NoiseModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Kind-specific payload certifying membership of a concrete noise set.
#[derive(Debug, Clone)]
pub enum NoisePayload {
    /// Depolarising / Random: the set is a single canonical element.
    Canonical,
    /// Per-measurement probability vectors.
    Probabilities(Vec<Vec<f64>>),
    /// Parent POVM of the noise set (outcomes in row-major multi-index order).
    Parent(Povm),
    /// Generalised noise: any valid measurement set.
    Explicit,
}

/// A concrete element of a noise set, with its certificate.
#[derive(Debug, Clone)]
pub struct NoiseInstance {
    pub kind: NoiseModelKind,
    pub measurements: MeasurementSet,
    pub payload: NoisePayload,
}

/// The canonical element of the noise set: the depolarised set for the
/// depolarising model, the trivial uniform set otherwise.
pub fn canonical_noise(kind: NoiseModelKind, s: &MeasurementSet) -> NoiseInstance {
    let d = s.dim();
    let measurements = match kind {
        NoiseModelKind::Depolarising => {
            let measurements = s
                .measurements()
                .iter()
                .map(|m| {
                    let elements = m
                        .elements()
                        .iter()
                        .map(|e| HermitianMatrix::identity(d).scale(e.trace() / d as f64))
                        .collect();
                    Povm::new_unchecked(d, elements).expect("canonical noise shapes")
                })
                .collect();
            MeasurementSet::new(measurements).expect("canonical noise set")
        }
        _ => MeasurementSet::new(
            s.outcome_counts()
                .iter()
                .map(|&n| Povm::trivial(d, n))
                .collect(),
        )
        .expect("canonical noise set"),
    };
    let payload = match kind {
        NoiseModelKind::Depolarising | NoiseModelKind::Random => NoisePayload::Canonical,
        NoiseModelKind::Probabilistic => NoisePayload::Probabilities(
            s.outcome_counts()
                .iter()
                .map(|&n| vec![1.0 / n as f64; n])
                .collect(),
        ),
        NoiseModelKind::JointlyMeasurable => {
            NoisePayload::Parent(product_parent(&s.outcome_counts(), d))
        }
        NoiseModelKind::Generalised => NoisePayload::Explicit,
    };
    NoiseInstance {
        kind,
        measurements,
        payload,
    }
}

/// Product parent of trivial measurements: every element `1/(prod n_x)`.
fn product_parent(counts: &[usize], d: usize) -> Povm {
    let total = total_outcomes(counts);
    let e = HermitianMatrix::identity(d).scale(1.0 / total as f64);
    Povm::new_unchecked(d, vec![e; total]).expect("product parent")
}

/// Noisy version `eta * s + (1 - eta) * noise`, elementwise.
pub fn mix(
    s: &MeasurementSet,
    noise: &MeasurementSet,
    eta: f64,
) -> Result<MeasurementSet, NoiseError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(NoiseError::Domain(format!("eta = {eta} outside [0, 1]")));
    }
    if s.dim() != noise.dim() || s.outcome_counts() != noise.outcome_counts() {
        return Err(NoiseError::ShapeMismatch(
            "noise must match the measurement shapes".into(),
        ));
    }
    Ok(s.mix_with(noise, 1.0 - eta)?)
}

/// Structural membership of `candidate` in the noise set `N_kind(s)`.
///
/// Jointly-measurable candidates are certified constructively: a parent must
/// be supplied in the payload (marginals and positivity are verified here),
/// otherwise the caller should find one by a feasibility solve first.
pub fn membership_check(
    kind: NoiseModelKind,
    s: &MeasurementSet,
    candidate: &NoiseInstance,
    tol: f64,
) -> bool {
    let d = s.dim();
    let shapes_match = candidate.measurements.dim() == d
        && candidate.measurements.outcome_counts() == s.outcome_counts();
    if !shapes_match {
        return false;
    }
    let m = &candidate.measurements;
    let valid = m
        .measurements()
        .iter()
        .all(|p| p.validate().is_valid(tol.max(1e-10)));
    if !valid {
        return false;
    }
    match kind {
        NoiseModelKind::Depolarising => {
            let canon = canonical_noise(kind, s).measurements;
            sets_close(m, &canon, tol)
        }
        NoiseModelKind::Random => {
            let canon = canonical_noise(kind, s).measurements;
            sets_close(m, &canon, tol)
        }
        NoiseModelKind::Probabilistic => m.measurements().iter().all(|p| {
            p.elements().iter().all(|e| {
                let t = e.trace() / d as f64;
                t >= -tol
                    && e.sub(&HermitianMatrix::identity(d).scale(t)).norm_frobenius()
                        <= tol * (1.0 + t.abs())
            })
        }),
        NoiseModelKind::JointlyMeasurable => match &candidate.payload {
            NoisePayload::Parent(parent) => parent_matches(parent, m, tol),
            _ => false,
        },
        NoiseModelKind::Generalised => true,
    }
}

/// Marginals of a parent POVM over row-major multi-index outcomes.
pub fn parent_marginal(
    parent: &Povm,
    counts: &[usize],
    x: usize,
    a: usize,
) -> HermitianMatrix {
    let mut acc = HermitianMatrix::zeros(parent.dim());
    for (flat, idx) in multi_indices(counts).enumerate() {
        if idx[x] == a {
            acc = acc.add(parent.element(flat));
        }
    }
    acc
}

/// Checks PSD elements and marginals of a claimed parent for `m`.
pub fn parent_matches(parent: &Povm, m: &MeasurementSet, tol: f64) -> bool {
    let counts = m.outcome_counts();
    if parent.n_outcomes() != total_outcomes(&counts) || parent.dim() != m.dim() {
        return false;
    }
    if parent
        .elements()
        .iter()
        .any(|e| e.min_eigenvalue() < -tol * (1.0 + e.norm_spectral()))
    {
        return false;
    }
    for x in 0..m.k() {
        for a in 0..counts[x] {
            let marg = parent_marginal(parent, &counts, x, a);
            if marg.sub(m.element(x, a)).norm_frobenius() > tol * (m.dim() as f64) {
                return false;
            }
        }
    }
    true
}

fn sets_close(a: &MeasurementSet, b: &MeasurementSet, tol: f64) -> bool {
    a.measurements()
        .iter()
        .zip(b.measurements())
        .all(|(p, q)| {
            p.elements()
                .iter()
                .zip(q.elements())
                .all(|(e, f)| e.sub(f).norm_frobenius() <= tol * (1.0 + f.norm_frobenius()))
        })
}
