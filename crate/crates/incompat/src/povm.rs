//! POVMs, measurement sets, named constructions and the classical
//! pre/post-processing transforms.

use crate::linalg::{C64, CMat, HermitianMatrix};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PovmError {
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("{0} is not prime")]
    NotPrime(usize),
    #[error("unknown named construction `{0}`")]
    UnknownId(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("pre-processing map is not unital (residual {0:.3e})")]
    NonUnital(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid POVM: {0}")]
    Invalid(String),
    #[error("JSON: {0}")]
    Json(String),
}

/// Ordered list of PSD operators summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<HermitianMatrix>,
}

/// Per-element PSD residuals and the normalisation residual of a candidate POVM.
#[derive(Debug, Clone, Serialize)]
pub struct PovmReport {
    /// `max(0, -min_eig)` for each element.
    pub psd_residuals: Vec<f64>,
    /// Frobenius distance of the element sum from the identity.
    pub normalization_residual: f64,
}

impl PovmReport {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.normalization_residual <= tol && self.psd_residuals.iter().all(|&r| r <= tol)
    }
}

impl Povm {
    /// Validating constructor: elements PSD within 1e-10 (relative) and
    /// summing to the identity within 1e-10 Frobenius.
    pub fn new(dim: usize, elements: Vec<HermitianMatrix>) -> Result<Self, PovmError> {
        let p = Self::new_unchecked(dim, elements)?;
        let report = p.validate();
        if !report.is_valid(1e-10) {
            return Err(PovmError::Invalid(format!(
                "normalization residual {:.3e}, worst PSD residual {:.3e}",
                report.normalization_residual,
                report.psd_residuals.iter().cloned().fold(0.0f64, f64::max)
            )));
        }
        Ok(p)
    }

    /// Shape checks only; invariants are the caller's responsibility
    /// (solver output with small residuals, intentionally broken inputs in
    /// tests).
    pub fn new_unchecked(dim: usize, elements: Vec<HermitianMatrix>) -> Result<Self, PovmError> {
        if dim == 0 {
            return Err(PovmError::Domain("dimension must be positive".into()));
        }
        if elements.is_empty() {
            return Err(PovmError::Domain("a POVM needs at least one outcome".into()));
        }
        for e in &elements {
            if e.dim() != dim {
                return Err(PovmError::DimensionMismatch(format!(
                    "element dimension {} != {}",
                    e.dim(),
                    dim
                )));
            }
        }
        Ok(Povm { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, a: usize) -> &HermitianMatrix {
        &self.elements[a]
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    /// Per-element PSD residuals and normalisation residual (report only).
    pub fn validate(&self) -> PovmReport {
        let psd_residuals = self
            .elements
            .iter()
            .map(|e| (-e.min_eigenvalue()).max(0.0))
            .collect();
        let mut sum = HermitianMatrix::zeros(self.dim);
        for e in &self.elements {
            sum = sum.add(e);
        }
        let normalization_residual = sum
            .sub(&HermitianMatrix::identity(self.dim))
            .norm_frobenius();
        PovmReport {
            psd_residuals,
            normalization_residual,
        }
    }

    /// Trivial measurement `{1/n}` with `n` outcomes.
    pub fn trivial(dim: usize, n: usize) -> Self {
        let e = HermitianMatrix::identity(dim).scale(1.0 / n as f64);
        Povm {
            dim,
            elements: vec![e; n],
        }
    }

    /// Projective measurement onto the columns of a unitary.
    pub fn from_basis(u: &CMat) -> Self {
        let dim = u.nrows();
        let elements = (0..dim)
            .map(|b| {
                let col = DVector::from_iterator(dim, (0..dim).map(|i| u[(i, b)]));
                HermitianMatrix::projector(&col)
            })
            .collect();
        Povm { dim, elements }
    }

    pub fn computational(dim: usize) -> Self {
        Self::from_basis(&CMat::identity(dim, dim))
    }

    /// Every element proportional to a rank-one projector (zero elements allowed).
    pub fn is_rank_one(&self, tol: f64) -> bool {
        self.elements.iter().all(|e| {
            let t = e.trace();
            let e2 = HermitianMatrix::symmetrize(e.as_matrix() * e.as_matrix());
            e2.sub(&e.scale(t)).norm_frobenius() <= tol * (1.0 + t * t)
        })
    }

    /// Every element a projector.
    pub fn is_projective(&self, tol: f64) -> bool {
        self.elements.iter().all(|e| {
            let e2 = HermitianMatrix::symmetrize(e.as_matrix() * e.as_matrix());
            e2.sub(e).norm_frobenius() <= tol
        })
    }

    /// Every element proportional to the identity.
    pub fn is_trivial(&self, tol: f64) -> bool {
        self.elements.iter().all(|e| {
            let t = e.trace() / self.dim as f64;
            e.sub(&HermitianMatrix::identity(self.dim).scale(t))
                .norm_frobenius()
                <= tol
        })
    }

    pub fn conjugate_by(&self, u: &CMat) -> Self {
        Povm {
            dim: u.nrows(),
            elements: self.elements.iter().map(|e| e.conjugate_by(u)).collect(),
        }
    }

    /// Elementwise convex combination `(1-p) self + p other`.
    pub fn mix_with(&self, other: &Povm, p: f64) -> Result<Self, PovmError> {
        if self.dim != other.dim || self.n_outcomes() != other.n_outcomes() {
            return Err(PovmError::ShapeMismatch(
                "mixing requires equal dimension and outcome count".into(),
            ));
        }
        let elements = self
            .elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| a.scale(1.0 - p).add(&b.scale(p)))
            .collect();
        Ok(Povm {
            dim: self.dim,
            elements,
        })
    }
}

/// `k >= 2` POVMs on a shared dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    dim: usize,
    measurements: Vec<Povm>,
}

impl MeasurementSet {
    pub fn new(measurements: Vec<Povm>) -> Result<Self, PovmError> {
        if measurements.len() < 2 {
            return Err(PovmError::Domain(
                "a measurement set needs at least two measurements".into(),
            ));
        }
        let dim = measurements[0].dim();
        for m in &measurements {
            if m.dim() != dim {
                return Err(PovmError::DimensionMismatch(
                    "all measurements must share the dimension".into(),
                ));
            }
        }
        Ok(MeasurementSet { dim, measurements })
    }

    pub fn pair(a: Povm, b: Povm) -> Result<Self, PovmError> {
        Self::new(vec![a, b])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.measurements.len()
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.measurements.iter().map(|m| m.n_outcomes()).collect()
    }

    pub fn measurement(&self, x: usize) -> &Povm {
        &self.measurements[x]
    }

    pub fn measurements(&self) -> &[Povm] {
        &self.measurements
    }

    pub fn element(&self, x: usize, a: usize) -> &HermitianMatrix {
        self.measurements[x].element(a)
    }

    pub fn conjugate_by(&self, u: &CMat) -> Self {
        MeasurementSet {
            dim: u.nrows(),
            measurements: self
                .measurements
                .iter()
                .map(|m| m.conjugate_by(u))
                .collect(),
        }
    }

    pub fn mix_with(&self, other: &MeasurementSet, p: f64) -> Result<Self, PovmError> {
        if self.k() != other.k() {
            return Err(PovmError::ShapeMismatch("measurement counts differ".into()));
        }
        let measurements = self
            .measurements
            .iter()
            .zip(&other.measurements)
            .map(|(a, b)| a.mix_with(b, p))
            .collect::<Result<_, _>>()?;
        MeasurementSet::new(measurements)
    }

    pub fn is_rank_one(&self, tol: f64) -> bool {
        self.measurements.iter().all(|m| m.is_rank_one(tol))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SetJson::from(self)).expect("measurement set serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, PovmError> {
        let raw: SetJson =
            serde_json::from_str(text).map_err(|e| PovmError::Json(e.to_string()))?;
        raw.try_into()
    }
}

/// Wire format: `{ "dim": d, "measurements": [ [ [ [re, im], ... ], ... ], ... ] }`
/// indexed as `measurements[x][a][row][col]`.
#[derive(Serialize, Deserialize)]
struct SetJson {
    dim: usize,
    measurements: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

impl From<&MeasurementSet> for SetJson {
    fn from(s: &MeasurementSet) -> Self {
        let d = s.dim();
        let measurements = s
            .measurements
            .iter()
            .map(|m| {
                m.elements()
                    .iter()
                    .map(|e| {
                        (0..d)
                            .map(|i| {
                                (0..d)
                                    .map(|j| {
                                        let z = e.as_matrix()[(i, j)];
                                        [z.re, z.im]
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        SetJson {
            dim: d,
            measurements,
        }
    }
}

impl TryFrom<SetJson> for MeasurementSet {
    type Error = PovmError;

    fn try_from(raw: SetJson) -> Result<Self, PovmError> {
        let d = raw.dim;
        let mut measurements = Vec::new();
        for m in raw.measurements {
            let mut elements = Vec::new();
            for e in m {
                if e.len() != d || e.iter().any(|row| row.len() != d) {
                    return Err(PovmError::Json("element is not dim x dim".into()));
                }
                let mut mat = CMat::zeros(d, d);
                for (i, row) in e.iter().enumerate() {
                    for (j, z) in row.iter().enumerate() {
                        mat[(i, j)] = C64::new(z[0], z[1]);
                    }
                }
                elements.push(
                    HermitianMatrix::new(mat)
                        .map_err(|e| PovmError::Json(format!("non-Hermitian element: {e}")))?,
                );
            }
            measurements.push(Povm::new_unchecked(d, elements)?);
        }
        MeasurementSet::new(measurements)
    }
}

/// Outcome relabelling `A'_{a'} = sum_a beta(a'|a) A_a`.
///
/// `matrix[a'][a] = beta(a'|a)`; every column is a probability distribution.
#[derive(Debug, Clone)]
pub struct PostProcessing {
    matrix: Vec<Vec<f64>>,
}

impl PostProcessing {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self, PovmError> {
        if matrix.is_empty() || matrix[0].is_empty() {
            return Err(PovmError::Domain("empty post-processing".into()));
        }
        let n_in = matrix[0].len();
        if matrix.iter().any(|row| row.len() != n_in) {
            return Err(PovmError::ShapeMismatch("ragged post-processing".into()));
        }
        for a in 0..n_in {
            let col: f64 = matrix.iter().map(|row| row[a]).sum();
            if (col - 1.0).abs() > 1e-12 {
                return Err(PovmError::Invalid(format!(
                    "column {a} sums to {col}, expected 1"
                )));
            }
            if matrix.iter().any(|row| row[a] < 0.0) {
                return Err(PovmError::Invalid(format!("negative entry in column {a}")));
            }
        }
        Ok(PostProcessing { matrix })
    }

    pub fn identity(n: usize) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        PostProcessing { matrix }
    }

    pub fn n_in(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn n_out(&self) -> usize {
        self.matrix.len()
    }

    pub fn weight(&self, a_out: usize, a_in: usize) -> f64 {
        self.matrix[a_out][a_in]
    }
}

pub fn apply_post_processing(p: &Povm, beta: &PostProcessing) -> Result<Povm, PovmError> {
    if beta.n_in() != p.n_outcomes() {
        return Err(PovmError::ShapeMismatch(format!(
            "post-processing expects {} outcomes, POVM has {}",
            beta.n_in(),
            p.n_outcomes()
        )));
    }
    let elements = (0..beta.n_out())
        .map(|a_out| {
            let mut acc = HermitianMatrix::zeros(p.dim());
            for a_in in 0..beta.n_in() {
                let w = beta.weight(a_out, a_in);
                if w != 0.0 {
                    acc = acc.add(&p.element(a_in).scale(w));
                }
            }
            acc
        })
        .collect();
    Povm::new_unchecked(p.dim(), elements)
}

/// Unital positive map acting on effects, `Λ(X) = sum_i K_i X K_i†` with
/// `sum_i K_i K_i† = 1` on the output space.
#[derive(Debug, Clone)]
pub struct PreProcessing {
    kraus: Vec<CMat>,
    dim_in: usize,
    dim_out: usize,
}

impl PreProcessing {
    pub fn new(kraus: Vec<CMat>) -> Result<Self, PovmError> {
        if kraus.is_empty() {
            return Err(PovmError::Domain("empty Kraus list".into()));
        }
        let dim_out = kraus[0].nrows();
        let dim_in = kraus[0].ncols();
        for k in &kraus {
            if k.nrows() != dim_out || k.ncols() != dim_in {
                return Err(PovmError::ShapeMismatch("Kraus factor shapes differ".into()));
            }
        }
        let mut sum = CMat::zeros(dim_out, dim_out);
        for k in &kraus {
            sum += k * k.adjoint();
        }
        let residual = (&sum - CMat::identity(dim_out, dim_out))
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual > 1e-10 {
            return Err(PovmError::NonUnital(residual));
        }
        Ok(PreProcessing {
            kraus,
            dim_in,
            dim_out,
        })
    }

    pub fn unitary(u: CMat) -> Result<Self, PovmError> {
        Self::new(vec![u])
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn apply(&self, x: &HermitianMatrix) -> HermitianMatrix {
        let mut acc = CMat::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            acc += k * x.as_matrix() * k.adjoint();
        }
        HermitianMatrix::symmetrize(acc)
    }
}

pub fn apply_pre_processing(
    s: &MeasurementSet,
    lambda: &PreProcessing,
) -> Result<MeasurementSet, PovmError> {
    if lambda.dim_in() != s.dim() {
        return Err(PovmError::DimensionMismatch(format!(
            "map expects dimension {}, set has {}",
            lambda.dim_in(),
            s.dim()
        )));
    }
    let measurements = s
        .measurements()
        .iter()
        .map(|m| {
            let elements = m.elements().iter().map(|e| lambda.apply(e)).collect();
            Povm::new_unchecked(lambda.dim_out(), elements)
        })
        .collect::<Result<_, _>>()?;
    MeasurementSet::new(measurements)
}

/// The rank-one projective qubit pair with half-angle `theta` between the
/// Bloch vectors and the z axis.
pub fn qubit_theta_pair(theta: f64) -> Result<MeasurementSet, PovmError> {
    if !(0.0..=std::f64::consts::FRAC_PI_4 + 1e-15).contains(&theta) {
        return Err(PovmError::Domain(format!("theta = {theta} outside [0, pi/4]")));
    }
    let element = |sign: f64, sx_sign: f64| {
        let mut m = CMat::identity(2, 2) * C64::new(0.5, 0.0);
        m[(0, 0)] += C64::new(sign * 0.5 * theta.cos(), 0.0);
        m[(1, 1)] -= C64::new(sign * 0.5 * theta.cos(), 0.0);
        m[(0, 1)] += C64::new(sign * sx_sign * 0.5 * theta.sin(), 0.0);
        m[(1, 0)] += C64::new(sign * sx_sign * 0.5 * theta.sin(), 0.0);
        HermitianMatrix::new(m).unwrap()
    };
    let a = Povm::new(2, vec![element(-1.0, 1.0), element(1.0, 1.0)])?;
    let b = Povm::new(2, vec![element(-1.0, -1.0), element(1.0, -1.0)])?;
    MeasurementSet::pair(a, b)
}

/// Computational basis paired with the discrete Fourier basis (a MUB pair in
/// every dimension).
pub fn mub_pair(d: usize) -> Result<MeasurementSet, PovmError> {
    if d < 2 {
        return Err(PovmError::Domain("MUB pair needs d >= 2".into()));
    }
    let mut f = CMat::zeros(d, d);
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    for l in 0..d {
        for b in 0..d {
            f[(l, b)] = C64::from_polar(1.0 / (d as f64).sqrt(), omega * (l * b) as f64);
        }
    }
    MeasurementSet::pair(Povm::computational(d), Povm::from_basis(&f))
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut q = 2;
    while q * q <= n {
        if n % q == 0 {
            return false;
        }
        q += 1;
    }
    true
}

/// First `k` bases of the standard mutually unbiased set in prime dimension:
/// the computational basis followed by the quadratic-phase bases
/// `|psi^x_a> = d^{-1/2} sum_l w^{x l^2 + a l} |l>`. Dimension two uses the
/// Z/X/Y eigenbases.
pub fn prime_mub_set(d: usize, k: usize) -> Result<MeasurementSet, PovmError> {
    if !is_prime(d) {
        return Err(PovmError::NotPrime(d));
    }
    if !(2..=d + 1).contains(&k) {
        return Err(PovmError::Domain(format!(
            "k = {k} outside 2..={} for d = {d}",
            d + 1
        )));
    }
    if d == 2 {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let x_basis = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(inv, 0.0),
                C64::new(inv, 0.0),
                C64::new(inv, 0.0),
                C64::new(-inv, 0.0),
            ],
        );
        let y_basis = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(inv, 0.0),
                C64::new(inv, 0.0),
                C64::new(0.0, inv),
                C64::new(0.0, -inv),
            ],
        );
        let bases = [
            Povm::computational(2),
            Povm::from_basis(&x_basis),
            Povm::from_basis(&y_basis),
        ];
        return MeasurementSet::new(bases[..k].to_vec());
    }
    let mut measurements = vec![Povm::computational(d)];
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    for x in 0..(k - 1) {
        let mut u = CMat::zeros(d, d);
        for a in 0..d {
            for l in 0..d {
                let phase = omega * ((x * l * l + a * l) % d) as f64;
                u[(l, a)] = C64::from_polar(1.0 / (d as f64).sqrt(), phase);
            }
        }
        measurements.push(Povm::from_basis(&u));
    }
    MeasurementSet::new(measurements)
}

/// Computational basis paired with a basis holding a qubit MUB on
/// `span{|0>,|1>}` and computational vectors on the rest.
pub fn qmub_pair(d: usize) -> Result<MeasurementSet, PovmError> {
    if d < 3 {
        return Err(PovmError::Domain("qMUB pair needs d >= 3".into()));
    }
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = CMat::identity(d, d);
    u[(0, 0)] = C64::new(inv, 0.0);
    u[(1, 0)] = C64::new(inv, 0.0);
    u[(0, 1)] = C64::new(inv, 0.0);
    u[(1, 1)] = C64::new(-inv, 0.0);
    MeasurementSet::pair(Povm::computational(d), Povm::from_basis(&u))
}

/// The qutrit pair whose second basis deviates slightly from a qubit MUB
/// embedding.
pub fn dev3_pair() -> MeasurementSet {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let u = CMat::from_row_slice(
        3,
        3,
        &[
            C64::new(inv, 0.0),
            C64::new(0.5, 0.0),
            C64::new(0.5, 0.0),
            C64::new(inv, 0.0),
            C64::new(-0.5, 0.0),
            C64::new(-0.5, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-inv, 0.0),
            C64::new(inv, 0.0),
        ],
    );
    MeasurementSet::pair(Povm::computational(3), Povm::from_basis(&u)).unwrap()
}

/// Computational basis paired with qubit MUBs on each of the `d/2`
/// two-dimensional blocks (even `d`).
pub fn block_qmub_pair(d: usize) -> Result<MeasurementSet, PovmError> {
    if d < 4 || d % 2 != 0 {
        return Err(PovmError::Domain(
            "block qMUB construction needs even d >= 4".into(),
        ));
    }
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = CMat::zeros(d, d);
    for blk in 0..d / 2 {
        let o = 2 * blk;
        u[(o, o)] = C64::new(inv, 0.0);
        u[(o + 1, o)] = C64::new(inv, 0.0);
        u[(o, o + 1)] = C64::new(inv, 0.0);
        u[(o + 1, o + 1)] = C64::new(-inv, 0.0);
    }
    MeasurementSet::pair(Povm::computational(d), Povm::from_basis(&u))
}

/// Named pairs: `qMUB3`, `dev3`, `qMUB4`, and `qMUB:<d>` for any `d >= 3`.
pub fn named_pair(id: &str) -> Result<MeasurementSet, PovmError> {
    match id {
        "qMUB3" => qmub_pair(3),
        "dev3" => Ok(dev3_pair()),
        "qMUB4" => block_qmub_pair(4),
        other => {
            if let Some(rest) = other.strip_prefix("qMUB:") {
                if let Ok(d) = rest.parse::<usize>() {
                    return qmub_pair(d);
                }
            }
            Err(PovmError::UnknownId(other.into()))
        }
    }
}

/// Row-major flat index of a multi-outcome combination.
pub fn flat_index(idx: &[usize], counts: &[usize]) -> usize {
    debug_assert_eq!(idx.len(), counts.len());
    let mut flat = 0;
    for (j, n) in idx.iter().zip(counts) {
        debug_assert!(j < n);
        flat = flat * n + j;
    }
    flat
}

/// Inverse of [`flat_index`].
pub fn unflatten_index(mut flat: usize, counts: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; counts.len()];
    for pos in (0..counts.len()).rev() {
        idx[pos] = flat % counts[pos];
        flat /= counts[pos];
    }
    idx
}

pub fn total_outcomes(counts: &[usize]) -> usize {
    counts.iter().product()
}

/// Iterates all outcome combinations in row-major order.
pub fn multi_indices(counts: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total = total_outcomes(counts);
    (0..total).map(move |flat| unflatten_index(flat, counts))
}

/// Block-diagonal embedding of a rank-one projective pair, with POVMs `m`, `n`
/// on the orthogonal complement. `None` complements give the identity
/// embedding.
pub fn embed_pair(
    inner: &MeasurementSet,
    m: Option<&Povm>,
    n: Option<&Povm>,
) -> Result<MeasurementSet, PovmError> {
    if inner.k() != 2 {
        return Err(PovmError::ShapeMismatch("embedding takes a pair".into()));
    }
    if !inner.is_rank_one(1e-10)
        || !inner.measurements()[0].is_projective(1e-10)
        || !inner.measurements()[1].is_projective(1e-10)
    {
        return Err(PovmError::Invalid(
            "inner pair must be rank-one projective".into(),
        ));
    }
    let d_i = inner.dim();
    match (m, n) {
        (None, None) => Ok(inner.clone()),
        (Some(m), Some(n)) => {
            if m.dim() != n.dim() {
                return Err(PovmError::DimensionMismatch(
                    "complement POVMs must share a dimension".into(),
                ));
            }
            let d_c = m.dim();
            let d_f = d_i + d_c;
            let pad_inner = |e: &HermitianMatrix| {
                let mut big = CMat::zeros(d_f, d_f);
                for i in 0..d_i {
                    for j in 0..d_i {
                        big[(i, j)] = e.as_matrix()[(i, j)];
                    }
                }
                HermitianMatrix::symmetrize(big)
            };
            let pad_outer = |e: &HermitianMatrix| {
                let mut big = CMat::zeros(d_f, d_f);
                for i in 0..d_c {
                    for j in 0..d_c {
                        big[(d_i + i, d_i + j)] = e.as_matrix()[(i, j)];
                    }
                }
                HermitianMatrix::symmetrize(big)
            };
            let assemble = |x: usize, outer: &Povm| {
                let mut elements: Vec<HermitianMatrix> = inner.measurements()[x]
                    .elements()
                    .iter()
                    .map(pad_inner)
                    .collect();
                elements.extend(outer.elements().iter().map(pad_outer));
                Povm::new(d_f, elements)
            };
            MeasurementSet::pair(assemble(0, m)?, assemble(1, n)?)
        }
        _ => Err(PovmError::DimensionMismatch(
            "complement POVMs must both be present or both absent".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn overlap_sq(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
        // |<phi|psi>|^2 for rank-one projectors equals tr(ab).
        a.inner(b)
    }

    #[test]
    fn validate_flags_bad_normalization() {
        let over = HermitianMatrix::identity(1).scale(0.6);
        let p = Povm::new_unchecked(1, vec![over.clone(), over]).unwrap();
        let report = p.validate();
        assert!(report.normalization_residual > 0.1);
        assert!(!report.is_valid(1e-10));
        assert!(Povm::new(1, p.elements().to_vec()).is_err());
    }

    #[test]
    fn trivial_and_computational_valid() {
        assert!(Povm::trivial(3, 5).validate().is_valid(1e-14));
        assert!(Povm::computational(4).validate().is_valid(1e-14));
    }

    #[test]
    fn theta_pair_limits() {
        let s = qubit_theta_pair(0.0).unwrap();
        for (a, b) in s.measurements()[0]
            .elements()
            .iter()
            .zip(s.measurements()[1].elements())
        {
            assert!(a.sub(b).norm_frobenius() < 1e-14);
        }
        // theta = pi/4 gives a qubit MUB pair: all squared overlaps 1/2.
        let s = qubit_theta_pair(std::f64::consts::FRAC_PI_4).unwrap();
        for a in s.measurements()[0].elements() {
            for b in s.measurements()[1].elements() {
                assert_abs_diff_eq!(overlap_sq(a, b), 0.5, epsilon = 1e-12);
            }
        }
        // trace oracle at pi/6: tr(A_1 B_1) = (1 + cos(pi/3))/2.
        let s = qubit_theta_pair(std::f64::consts::FRAC_PI_6).unwrap();
        assert_abs_diff_eq!(
            s.element(0, 0).inner(s.element(1, 0)),
            (1.0 + std::f64::consts::FRAC_PI_3.cos()) / 2.0,
            epsilon = 1e-12
        );
        assert!(qubit_theta_pair(1.0).is_err());
    }

    #[test]
    fn mub_pair_overlaps() {
        for d in 2..=5 {
            let s = mub_pair(d).unwrap();
            for a in s.measurements()[0].elements() {
                for b in s.measurements()[1].elements() {
                    assert_abs_diff_eq!(overlap_sq(a, b), 1.0 / d as f64, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn prime_mub_sets_unbiased() {
        for (d, k) in [(2usize, 3usize), (3, 4), (5, 4), (5, 6), (7, 3)] {
            let s = prime_mub_set(d, k).unwrap();
            assert_eq!(s.k(), k);
            for x in 0..k {
                assert!(s.measurements()[x].validate().is_valid(1e-10));
                for y in (x + 1)..k {
                    for a in s.measurements()[x].elements() {
                        for b in s.measurements()[y].elements() {
                            assert_abs_diff_eq!(
                                overlap_sq(a, b),
                                1.0 / d as f64,
                                epsilon = 1e-12
                            );
                        }
                    }
                }
            }
        }
        assert!(matches!(prime_mub_set(4, 2), Err(PovmError::NotPrime(4))));
        assert!(prime_mub_set(3, 5).is_err());
    }

    #[test]
    fn named_pairs() {
        let q3 = named_pair("qMUB3").unwrap();
        assert_eq!(q3.dim(), 3);
        assert_abs_diff_eq!(
            q3.element(1, 0).inner(q3.element(0, 0)),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            q3.element(1, 2).inner(q3.element(0, 2)),
            1.0,
            epsilon = 1e-12
        );

        // dev3 second basis reproduced entrywise from its unitary columns.
        let dev = named_pair("dev3").unwrap();
        let b1 = dev.element(1, 1).as_matrix();
        let expect_diag = [0.25, 0.25, 0.5];
        for (i, e) in expect_diag.iter().enumerate() {
            assert_abs_diff_eq!(b1[(i, i)].re, *e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(b1[(0, 2)].re, -0.5 * std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);

        let q4 = named_pair("qMUB4").unwrap();
        assert_eq!(q4.dim(), 4);
        assert_abs_diff_eq!(
            q4.element(1, 2).inner(q4.element(0, 2)),
            0.5,
            epsilon = 1e-12
        );

        let q5 = named_pair("qMUB:5").unwrap();
        assert_eq!(q5.dim(), 5);
        for b in 2..5 {
            assert_abs_diff_eq!(
                q5.element(1, b).inner(q5.element(0, b)),
                1.0,
                epsilon = 1e-12
            );
        }
        assert!(named_pair("nope").is_err());
    }

    #[test]
    fn post_processing_binning_and_splitting() {
        let s = mub_pair(3).unwrap();
        let a = &s.measurements()[0];
        let binning =
            PostProcessing::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let binned = apply_post_processing(a, &binning).unwrap();
        assert_eq!(binned.n_outcomes(), 2);
        assert!(
            binned
                .element(1)
                .sub(&a.element(1).add(a.element(2)))
                .norm_frobenius()
                < 1e-14
        );

        // splitting: A^b_1 = A^b_2 = A_1/2, A^b_3 = A_2.
        let qubit = mub_pair(2).unwrap();
        let split =
            PostProcessing::new(vec![vec![0.5, 0.0], vec![0.5, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = apply_post_processing(&qubit.measurements()[0], &split).unwrap();
        assert!(
            out.element(0)
                .sub(&qubit.element(0, 0).scale(0.5))
                .norm_frobenius()
                < 1e-14
        );
        assert!(out.element(2).sub(qubit.element(0, 1)).norm_frobenius() < 1e-14);
        assert!(out.validate().is_valid(1e-12));

        let identity = PostProcessing::identity(3);
        let same = apply_post_processing(a, &identity).unwrap();
        assert!(same.element(0).sub(a.element(0)).norm_frobenius() < 1e-15);

        assert!(apply_post_processing(a, &PostProcessing::identity(2)).is_err());
    }

    #[test]
    fn pre_processing_examples() {
        // The qubit-to-qutrit map duplicating the last diagonal entry.
        let k1 = CMat::from_row_slice(
            3,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let k2 = CMat::from_row_slice(
            3,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
            ],
        );
        let lambda = PreProcessing::new(vec![k1, k2]).unwrap();
        let s = mub_pair(2).unwrap();
        let lifted = apply_pre_processing(&s, &lambda).unwrap();
        assert_eq!(lifted.dim(), 3);
        assert_abs_diff_eq!(lifted.element(0, 1).trace(), 2.0, epsilon = 1e-14);
        for m in lifted.measurements() {
            assert!(m.validate().is_valid(1e-12));
        }

        // Unitary conjugation.
        let u = crate::linalg::haar_unitary_seeded(2, 3);
        let conj = apply_pre_processing(&s, &PreProcessing::unitary(u.clone()).unwrap()).unwrap();
        assert!(
            conj.element(0, 0)
                .sub(&s.element(0, 0).conjugate_by(&u))
                .norm_frobenius()
                < 1e-12
        );

        // Non-unital rejection.
        let bad = CMat::identity(2, 2) * C64::new(1.1, 0.0);
        assert!(matches!(
            PreProcessing::new(vec![bad]),
            Err(PovmError::NonUnital(_))
        ));
    }

    #[test]
    fn embedding_cases() {
        let inner = qubit_theta_pair(std::f64::consts::FRAC_PI_4).unwrap();
        let same = embed_pair(&inner, None, None).unwrap();
        assert_eq!(same.dim(), 2);

        // Computational/Fourier qubit MUB into d = 3 with computational
        // complement reproduces qMUB3 elementwise.
        let comp1 = Povm::computational(1);
        let zmub = mub_pair(2).unwrap();
        let e3 = embed_pair(&zmub, Some(&comp1), Some(&comp1)).unwrap();
        let q3 = named_pair("qMUB3").unwrap();
        for meas in 0..2 {
            for (e, f) in e3.measurements()[meas]
                .elements()
                .iter()
                .zip(q3.measurements()[meas].elements())
            {
                assert!(e.sub(f).norm_frobenius() < 1e-12);
            }
        }

        // Overlap multiset for the d = 4 embedding (derived by enumerating
        // inner products directly).
        let comp2 = Povm::computational(2);
        let e4 = embed_pair(&inner, Some(&comp2), Some(&comp2)).unwrap();
        let mut overlaps: Vec<f64> = Vec::new();
        for a in e4.measurements()[0].elements() {
            for b in e4.measurements()[1].elements() {
                overlaps.push(overlap_sq(a, b).max(0.0).sqrt());
            }
        }
        overlaps.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, half, half, half, half, 1.0, 1.0,
        ];
        for (o, e) in overlaps.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(*o, *e, epsilon = 1e-10);
        }

        assert!(embed_pair(&inner, Some(&comp1), None).is_err());
        let trivial = MeasurementSet::pair(Povm::trivial(2, 2), Povm::trivial(2, 2)).unwrap();
        assert!(embed_pair(&trivial, Some(&comp1), Some(&comp1)).is_err());
    }

    #[test]
    fn json_round_trip_exact() {
        let s = prime_mub_set(3, 3).unwrap();
        let text = s.to_json();
        let back = MeasurementSet::from_json(&text).unwrap();
        for x in 0..s.k() {
            for a in 0..3 {
                assert_eq!(
                    s.element(x, a).as_matrix(),
                    back.element(x, a).as_matrix(),
                    "round trip must be bit exact"
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn post_processing_preserves_invariants(seed in 0u64..1000, n_out in 1usize..5) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let u = crate::linalg::haar_unitary(3, &mut rng);
            let p = Povm::from_basis(&u);
            // random column-stochastic map
            let mut cols: Vec<Vec<f64>> = Vec::new();
            for _ in 0..3 {
                let raw: Vec<f64> = (0..n_out).map(|_| rng.gen_range(0.0..1.0f64)).collect();
                let total: f64 = raw.iter().sum::<f64>().max(1e-9);
                cols.push(raw.into_iter().map(|v| v / total).collect());
            }
            let matrix: Vec<Vec<f64>> = (0..n_out)
                .map(|a_out| (0..3).map(|a_in| cols[a_in][a_out]).collect())
                .collect();
            let beta = PostProcessing::new(matrix).unwrap();
            let out = apply_post_processing(&p, &beta).unwrap();
            prop_assert!(out.validate().is_valid(1e-12));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn mixtures_stay_valid(seed in 0u64..1000, p in 0.0f64..1.0) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let a = Povm::from_basis(&crate::linalg::haar_unitary(3, &mut rng));
            let b = Povm::from_basis(&crate::linalg::haar_unitary(3, &mut rng));
            let mixed = a.mix_with(&b, p).unwrap();
            prop_assert!(mixed.validate().is_valid(1e-12));
        }
    }
}
