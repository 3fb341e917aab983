//! Dense complex Hermitian linear algebra.
//!
//! Everything in the crate runs on small dense operators (dimension a few
//! dozen at most), so the eigensolver is a cyclic Jacobi iteration: slow in
//! the asymptotic sense, but simple, extremely accurate and bitwise
//! deterministic, which the conic solver relies on.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub type C64 = num_complex::Complex<f64>;
pub type CMat = DMatrix<C64>;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NonHermitian { residual: f64 },
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("eigenphase within {margin:.3e} of the branch cut at -pi")]
    BranchAmbiguity { margin: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Dense complex Hermitian matrix.
///
/// Construction symmetrises the input, so stored entries satisfy
/// `m[(i,j)] == conj(m[(j,i)])` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    data: CMat,
}

impl HermitianMatrix {
    /// Validates hermiticity (1e-12 absolute per entry) and symmetrises.
    pub fn new(m: CMat) -> Result<Self, LinalgError> {
        let residual = hermiticity_residual(&m);
        if residual > 1e-12 {
            return Err(LinalgError::NonHermitian { residual });
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrises `(m + m†)/2` without checking the residual.
    pub fn symmetrize(m: CMat) -> Self {
        let adj = m.adjoint();
        let mut data = (m + adj) * C64::new(0.5, 0.0);
        for i in 0..data.nrows() {
            data[(i, i)] = C64::new(data[(i, i)].re, 0.0);
        }
        HermitianMatrix { data }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            data: CMat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix {
            data: CMat::identity(dim, dim),
        }
    }

    /// Rank-one projector |v><v| / <v|v>.
    pub fn projector(v: &nalgebra::DVector<C64>) -> Self {
        let norm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        let mut data = CMat::zeros(v.len(), v.len());
        for i in 0..v.len() {
            for j in 0..v.len() {
                data[(i, j)] = v[i] * v[j].conj() / norm2;
            }
        }
        HermitianMatrix { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.data
    }

    pub fn into_matrix(self) -> CMat {
        self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)].re).sum()
    }

    /// Real Frobenius inner product `tr(a b)`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                // tr(ab) = sum_ij a_ij b_ji = sum_ij a_ij conj(b_ij)
                acc += (self.data[(i, j)] * other.data[(i, j)].conj()).re;
            }
        }
        acc
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, factor: f64) -> Self {
        HermitianMatrix {
            data: &self.data * C64::new(factor, 0.0),
        }
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix {
            data: &self.data + &other.data,
        }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix {
            data: &self.data - &other.data,
        }
    }

    /// `self + t * identity`.
    pub fn add_scaled_identity(&self, t: f64) -> Self {
        let mut data = self.data.clone();
        for i in 0..self.dim() {
            data[(i, i)] += C64::new(t, 0.0);
        }
        HermitianMatrix { data }
    }

    /// Conjugation `u self u†` by an arbitrary matrix `u` (dimensions may change).
    pub fn conjugate_by(&self, u: &CMat) -> Self {
        HermitianMatrix::symmetrize(u * &self.data * u.adjoint())
    }

    pub fn spectrum(&self) -> Spectrum {
        jacobi_eigh(&self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum().eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.spectrum().eigenvalues.last().unwrap()
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn norm_spectral(&self) -> f64 {
        let s = self.spectrum();
        s.eigenvalues[0]
            .abs()
            .max(s.eigenvalues.last().unwrap().abs())
    }

    /// `true` iff `min eig >= -tol * (1 + spectral norm)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let s = self.spectrum();
        let scale = 1.0 + s.eigenvalues[0].abs().max(s.eigenvalues.last().unwrap().abs());
        s.eigenvalues[0] >= -tol * scale
    }

    /// PSD square root, clipping slightly negative eigenvalues to zero.
    pub fn sqrt_psd(&self) -> Self {
        let s = self.spectrum();
        s.apply(|x| x.max(0.0).sqrt())
    }

    /// `e^{i t self}` (a unitary matrix).
    pub fn exp_i(&self, t: f64) -> CMat {
        let s = self.spectrum();
        let d = self.dim();
        let mut diag = CMat::zeros(d, d);
        for (k, &ev) in s.eigenvalues.iter().enumerate() {
            diag[(k, k)] = C64::from_polar(1.0, t * ev);
        }
        &s.eigenvectors * diag * s.eigenvectors.adjoint()
    }
}

/// Full spectral decomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors, in eigenvalue order.
    pub eigenvectors: CMat,
}

impl Spectrum {
    /// Rebuild `V f(Λ) V†` for a scalar function of the eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let d = self.eigenvalues.len();
        let mut diag = CMat::zeros(d, d);
        for (k, &ev) in self.eigenvalues.iter().enumerate() {
            diag[(k, k)] = C64::new(f(ev), 0.0);
        }
        HermitianMatrix::symmetrize(&self.eigenvectors * diag * self.eigenvectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.apply(|x| x)
    }
}

pub fn hermiticity_residual(m: &CMat) -> f64 {
    let mut residual: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            residual = residual.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    residual
}

/// Spectral decomposition of a matrix expected to be Hermitian.
///
/// Fails if the hermiticity residual exceeds 1e-9; below that the matrix is
/// symmetrised before diagonalisation.
pub fn eigh(m: &CMat) -> Result<Spectrum, LinalgError> {
    let residual = hermiticity_residual(m);
    if residual > 1e-9 {
        return Err(LinalgError::NonHermitian { residual });
    }
    Ok(HermitianMatrix::symmetrize(m.clone()).spectrum())
}

pub fn min_eigenvalue(m: &CMat) -> Result<f64, LinalgError> {
    Ok(eigh(m)?.eigenvalues[0])
}

pub fn max_eigenvalue(m: &CMat) -> Result<f64, LinalgError> {
    Ok(*eigh(m)?.eigenvalues.last().unwrap())
}

pub fn is_psd(m: &CMat, tol: f64) -> Result<bool, LinalgError> {
    let residual = hermiticity_residual(m);
    if residual > 1e-9 {
        return Err(LinalgError::NonHermitian { residual });
    }
    Ok(HermitianMatrix::symmetrize(m.clone()).is_psd(tol))
}

/// Cyclic Jacobi diagonalisation of a Hermitian matrix.
///
/// Quadratically convergent; off-diagonal mass is driven below
/// `1e-14 * ||m||_F` (typically 5-8 sweeps).
fn jacobi_eigh(m: &CMat) -> Spectrum {
    let n = m.nrows();
    if n == 0 {
        return Spectrum {
            eigenvalues: vec![],
            eigenvectors: CMat::zeros(0, 0),
        };
    }
    let mut a = m.clone();
    let mut v = CMat::identity(n, n);
    let frob = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let threshold = 1e-15 * (1.0 + frob);

    for _sweep in 0..60 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= threshold / (n as f64) {
                    continue;
                }
                let phase = apq / mag; // e^{i phi}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Plane rotation: columns p,q of the unitary are
                //   J[p][p] = c, J[p][q] = s*phase, J[q][p] = -s*conj(phase), J[q][q] = c
                let cs = C64::new(c, 0.0);
                let s_phase = phase * s;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * cs - akq * s_phase.conj();
                    a[(k, q)] = akp * s_phase + akq * cs;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * cs - aqk * s_phase;
                    a[(q, k)] = apk * s_phase.conj() + aqk * cs;
                }
                // Clean up rounding on the eliminated pair.
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * cs - vkq * s_phase.conj();
                    v[(k, q)] = vkp * s_phase + vkq * cs;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut eigenvectors = CMat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[(k, new_col)] = v[(k, old_col)];
        }
    }
    Spectrum {
        eigenvalues,
        eigenvectors,
    }
}

pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.nrows();
    let gram = u.adjoint() * u;
    let mut res: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            res += (gram[(i, j)] - target).norm_sqr();
        }
    }
    res.sqrt()
}

/// Principal matrix logarithm of a unitary: Hermitian `H` with `e^{iH} = u`
/// and the spectrum of `H` in `(-pi, pi]`.
///
/// A unitary is normal, so it is diagonalised by diagonalising a Hermitian
/// combination `cos(phi) (u+u†)/2 + sin(phi) (u-u†)/(2i)`; an unlucky `phi`
/// can merge distinct eigenphases, in which case the next candidate angle is
/// tried. Genuinely degenerate eigenphases are harmless.
pub fn principal_log(u: &CMat) -> Result<HermitianMatrix, LinalgError> {
    let residual = unitarity_residual(u);
    if residual > 1e-10 {
        return Err(LinalgError::NotUnitary { residual });
    }
    let n = u.nrows();
    let re = HermitianMatrix::symmetrize((u + u.adjoint()) * C64::new(0.5, 0.0));
    let im = HermitianMatrix::symmetrize((u - u.adjoint()) * C64::new(0.0, -0.5));

    let angles: [f64; 6] = [0.0, 0.5742, 1.9113, 2.7771, 0.2331, 1.1178];
    let mut best: Option<(f64, CMat)> = None;
    for &phi in &angles {
        let combo = re.scale(phi.cos()).add(&im.scale(phi.sin()));
        let spec = combo.spectrum();
        let d = spec.eigenvectors.adjoint() * u * &spec.eigenvectors;
        let mut off: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += d[(i, j)].norm_sqr();
                }
            }
        }
        let off = off.sqrt();
        if best.as_ref().map_or(true, |(b, _)| off < *b) {
            best = Some((off, spec.eigenvectors));
        }
        if off <= 1e-11 * (n as f64) {
            break;
        }
    }
    let (off, vectors) = best.unwrap();
    if off > 1e-8 {
        return Err(LinalgError::NotUnitary { residual: off });
    }

    let d = vectors.adjoint() * u * &vectors;
    let mut log = CMat::zeros(n, n);
    for k in 0..n {
        let eigenphase = d[(k, k)];
        let theta = eigenphase.im.atan2(eigenphase.re);
        let margin = std::f64::consts::PI - theta.abs();
        if margin < 1e-12 {
            return Err(LinalgError::BranchAmbiguity { margin });
        }
        log[(k, k)] = C64::new(theta, 0.0);
    }
    Ok(HermitianMatrix::symmetrize(&vectors * log * vectors.adjoint()))
}

/// Haar-random unitary via a complex Ginibre matrix and phase-corrected QR.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let normal = StandardNormal;
    let mut g = CMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let re: f64 = normal.sample(rng);
            let im: f64 = normal.sample(rng);
            g[(i, j)] = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let mag = rjj.norm();
        let phase = if mag > 0.0 { rjj / mag } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_unitary_seeded(dim: usize, seed: u64) -> CMat {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    haar_unitary(dim, &mut rng)
}

pub fn anticommutator(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    let ab = a.as_matrix() * b.as_matrix();
    let adj = ab.adjoint();
    HermitianMatrix::symmetrize(ab + adj)
}
