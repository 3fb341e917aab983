//! Generic conic programs over complex Hermitian PSD blocks, nonnegative
//! scalars and free scalars, with affine equality rows and a linear
//! objective.
//!
//! Operator constraints are scalarised against an orthonormal basis of the
//! Hermitian matrices, so rows carry plain sparse real coefficients; PSD
//! blocks round-trip between their matrix form and the `svec` coordinates.

mod solver;

pub use solver::{solve, SolverOptions};

use crate::linalg::{C64, CMat, HermitianMatrix};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("program construction: {0}")]
    Build(String),
    #[error("solver failure: {0}")]
    Solve(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// Complex Hermitian PSD matrices of the given dimension.
    HermPsd(usize),
    /// Entrywise nonnegative vector.
    NonNeg(usize),
    /// Unconstrained vector.
    Free(usize),
}

impl Cone {
    /// Number of real coordinates of the block.
    pub fn vec_len(&self) -> usize {
        match *self {
            Cone::HermPsd(d) => d * d,
            Cone::NonNeg(n) | Cone::Free(n) => n,
        }
    }

    pub fn barrier_degree(&self) -> usize {
        match *self {
            Cone::HermPsd(d) => d,
            Cone::NonNeg(n) => n,
            Cone::Free(_) => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone)]
pub struct VarBlock {
    pub name: String,
    pub cone: Cone,
    /// Offset of the block in the global coordinate vector.
    pub offset: usize,
}

/// One term of an operator-valued equality.
pub enum OpTerm {
    /// `sign * X` for a Hermitian matrix block `X`.
    MatrixVar(f64),
    /// `K * v[idx]` for a scalar component of a nonneg/free block.
    ScalarTimes(HermitianMatrix, usize),
}

/// Values assigned to every block, for feasibility checking and for reading
/// solutions.
#[derive(Debug, Clone)]
pub enum BlockValue {
    Matrix(HermitianMatrix),
    Scalars(Vec<f64>),
}

impl BlockValue {
    pub fn as_matrix(&self) -> &HermitianMatrix {
        match self {
            BlockValue::Matrix(m) => m,
            BlockValue::Scalars(_) => panic!("expected a matrix block"),
        }
    }

    pub fn as_scalars(&self) -> &[f64] {
        match self {
            BlockValue::Scalars(v) => v,
            BlockValue::Matrix(_) => panic!("expected a scalar block"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    /// Relative equality-constraint residual.
    pub primal: f64,
    /// Relative dual residual.
    pub dual: f64,
    /// `|primal objective - dual objective| / (1 + |primal objective|)`.
    pub gap: f64,
    /// Cone complementarity `<x, z>`.
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Objective value in the user's sense.
    pub objective: f64,
    /// Dual objective value in the user's sense.
    pub dual_objective: f64,
    pub primal: Vec<BlockValue>,
    /// Equality multipliers, one per row, in the internal `min` convention:
    /// stationarity reads `c - A^T y - z = 0`.
    pub dual_y: Vec<f64>,
    /// Cone duals, one per block (zero for free blocks).
    pub dual_z: Vec<BlockValue>,
    pub residuals: Residuals,
    pub iterations: usize,
}

pub(crate) struct Row {
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
}

pub struct ConicProgram {
    pub(crate) blocks: Vec<VarBlock>,
    pub(crate) rows: Vec<Row>,
    /// Objective in the user's sense, sparse over global coordinates.
    pub(crate) objective: Vec<(usize, f64)>,
    pub(crate) sense: Sense,
    pub(crate) n_cols: usize,
}

impl ConicProgram {
    pub fn new(sense: Sense) -> Self {
        ConicProgram {
            blocks: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            sense,
            n_cols: 0,
        }
    }

    pub fn add_block(&mut self, name: impl Into<String>, cone: Cone) -> BlockId {
        let id = BlockId(self.blocks.len());
        self.blocks.push(VarBlock {
            name: name.into(),
            cone,
            offset: self.n_cols,
        });
        self.n_cols += cone.vec_len();
        id
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn block(&self, id: BlockId) -> &VarBlock {
        &self.blocks[id.0]
    }

    /// Linear objective term on a scalar coordinate of a block.
    pub fn objective_scalar(&mut self, id: BlockId, idx: usize, coeff: f64) {
        let off = self.blocks[id.0].offset;
        self.objective.push((off + idx, coeff));
    }

    /// Linear objective term `<K, X>` on a matrix block.
    pub fn objective_matrix(&mut self, id: BlockId, k: &HermitianMatrix) {
        let off = self.blocks[id.0].offset;
        let v = mat_to_vec(k);
        for (i, &c) in v.iter().enumerate() {
            if c != 0.0 {
                self.objective.push((off + i, c));
            }
        }
    }

    /// A single scalar equality row `sum coeff * coordinate = rhs`.
    pub fn add_scalar_row(&mut self, entries: Vec<(BlockId, usize, f64)>, rhs: f64) {
        let entries = entries
            .into_iter()
            .map(|(id, idx, c)| (self.blocks[id.0].offset + idx, c))
            .collect();
        self.rows.push(Row { entries, rhs });
    }

    /// Operator equality `sum_i term_i = rhs`, expanded against the Hermitian
    /// basis into `d^2` scalar rows.
    pub fn add_operator_eq(
        &mut self,
        dim: usize,
        terms: &[(BlockId, OpTerm)],
        rhs: &HermitianMatrix,
    ) -> Result<(), SdpError> {
        if rhs.dim() != dim {
            return Err(SdpError::Build("operator equality rhs dimension".into()));
        }
        let rhs_vec = mat_to_vec(rhs);
        let mut scalar_coeffs: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut matrix_vars: Vec<(usize, f64)> = Vec::new();
        for (id, term) in terms {
            let blk = &self.blocks[id.0];
            match term {
                OpTerm::MatrixVar(sign) => {
                    if blk.cone.vec_len() != dim * dim || !matches!(blk.cone, Cone::HermPsd(_)) {
                        return Err(SdpError::Build(format!(
                            "block {} is not a {dim}x{dim} matrix variable",
                            blk.name
                        )));
                    }
                    matrix_vars.push((blk.offset, *sign));
                }
                OpTerm::ScalarTimes(k, idx) => {
                    if k.dim() != dim {
                        return Err(SdpError::Build("scalar weight dimension".into()));
                    }
                    if *idx >= blk.cone.vec_len() {
                        return Err(SdpError::Build("scalar index out of range".into()));
                    }
                    scalar_coeffs.push((blk.offset + idx, mat_to_vec(k)));
                }
            }
        }
        for e in 0..dim * dim {
            let mut entries: Vec<(usize, f64)> = Vec::new();
            for &(off, sign) in &matrix_vars {
                entries.push((off + e, sign));
            }
            for (col, kv) in &scalar_coeffs {
                if kv[e] != 0.0 {
                    entries.push((*col, kv[e]));
                }
            }
            self.rows.push(Row {
                entries,
                rhs: rhs_vec[e],
            });
        }
        Ok(())
    }

    /// Objective functional evaluated on an assignment, in the user's sense.
    pub fn objective_value(&self, assignment: &[BlockValue]) -> f64 {
        let x = self.flatten(assignment);
        self.objective.iter().map(|&(col, c)| c * x[col]).sum()
    }

    pub(crate) fn flatten(&self, assignment: &[BlockValue]) -> Vec<f64> {
        assert_eq!(assignment.len(), self.blocks.len());
        let mut x = vec![0.0; self.n_cols];
        for (blk, value) in self.blocks.iter().zip(assignment) {
            match (blk.cone, value) {
                (Cone::HermPsd(d), BlockValue::Matrix(m)) => {
                    assert_eq!(m.dim(), d);
                    let v = mat_to_vec(m);
                    x[blk.offset..blk.offset + d * d].copy_from_slice(&v);
                }
                (Cone::NonNeg(n), BlockValue::Scalars(v))
                | (Cone::Free(n), BlockValue::Scalars(v)) => {
                    assert_eq!(v.len(), n);
                    x[blk.offset..blk.offset + n].copy_from_slice(v);
                }
                _ => panic!("assignment shape does not match block {}", blk.name),
            }
        }
        x
    }

    pub(crate) fn unflatten(&self, x: &[f64]) -> Vec<BlockValue> {
        self.blocks
            .iter()
            .map(|blk| match blk.cone {
                Cone::HermPsd(d) => {
                    BlockValue::Matrix(vec_to_mat(&x[blk.offset..blk.offset + d * d], d))
                }
                Cone::NonNeg(n) | Cone::Free(n) => {
                    BlockValue::Scalars(x[blk.offset..blk.offset + n].to_vec())
                }
            })
            .collect()
    }

    /// Per-row and per-cone residuals of a primal assignment.
    pub fn check_feasible(&self, assignment: &[BlockValue], tol: f64) -> FeasibilityReport {
        let x = self.flatten(assignment);
        let row_residuals: Vec<f64> = self
            .rows
            .iter()
            .map(|row| {
                let lhs: f64 = row.entries.iter().map(|&(col, c)| c * x[col]).sum();
                (lhs - row.rhs).abs()
            })
            .collect();
        let cone_violations: Vec<f64> = self
            .blocks
            .iter()
            .zip(assignment)
            .map(|(blk, value)| match (blk.cone, value) {
                (Cone::HermPsd(_), BlockValue::Matrix(m)) => (-m.min_eigenvalue()).max(0.0),
                (Cone::NonNeg(_), BlockValue::Scalars(v)) => {
                    v.iter().cloned().fold(0.0f64, |acc, t| acc.max(-t)).max(0.0)
                }
                (Cone::Free(_), _) => 0.0,
                _ => f64::INFINITY,
            })
            .collect();
        let max_row = row_residuals.iter().cloned().fold(0.0f64, f64::max);
        let max_cone = cone_violations.iter().cloned().fold(0.0f64, f64::max);
        FeasibilityReport {
            objective: self.objective_value(assignment),
            row_residuals,
            cone_violations,
            feasible: max_row <= tol && max_cone <= tol,
        }
    }

    /// Plain-text listing of the variables and scalarised rows, for
    /// cross-checking against external solvers.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{:?} objective:", self.sense);
        for &(col, c) in &self.objective {
            let _ = writeln!(out, "  {c:+.17e} * {}", self.col_name(col));
        }
        let _ = writeln!(out, "variables:");
        for blk in &self.blocks {
            let _ = writeln!(out, "  {} : {:?}", blk.name, blk.cone);
        }
        let _ = writeln!(out, "equality rows:");
        for (r, row) in self.rows.iter().enumerate() {
            let mut line = format!("  [{r}] ");
            for &(col, c) in &row.entries {
                line.push_str(&format!("{c:+.17e}*{} ", self.col_name(col)));
            }
            line.push_str(&format!("= {:+.17e}", row.rhs));
            let _ = writeln!(out, "{line}");
        }
        out
    }

    fn col_name(&self, col: usize) -> String {
        for blk in &self.blocks {
            let len = blk.cone.vec_len();
            if col >= blk.offset && col < blk.offset + len {
                return format!("{}[{}]", blk.name, col - blk.offset);
            }
        }
        format!("col{col}")
    }

    /// The same program with every Hermitian block replaced by its real
    /// symmetric embedding `[[Re, -Im], [Im, Re]]` (dimension doubled, right
    /// hand sides doubled). Objectives agree with the original program.
    pub fn real_embedding(&self) -> ConicProgram {
        let mut prog = ConicProgram::new(self.sense);
        // Map old column -> list of (new column, scale) pairs.
        let mut col_map: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_cols];
        for blk in &self.blocks {
            match blk.cone {
                Cone::HermPsd(d) => {
                    let id = prog.add_block(format!("{}_re", blk.name), Cone::HermPsd(2 * d));
                    let new_off = prog.blocks[id.0].offset;
                    // For each old basis element E_e, the embedded constraint
                    // coefficient is S(E_e); expand it in the 2d basis.
                    for e in 0..d * d {
                        let mut unit = vec![0.0; d * d];
                        unit[e] = 1.0;
                        let mat = vec_to_mat(&unit, d);
                        let emb = real_embed_matrix(&mat);
                        let big = mat_to_vec(&emb);
                        let targets: Vec<(usize, f64)> = big
                            .iter()
                            .enumerate()
                            .filter(|(_, &v)| v.abs() > 1e-300)
                            .map(|(i, &v)| (new_off + i, v))
                            .collect();
                        col_map[blk.offset + e] = targets;
                    }
                }
                cone => {
                    let id = prog.add_block(blk.name.clone(), cone);
                    let new_off = prog.blocks[id.0].offset;
                    for i in 0..cone.vec_len() {
                        // Scalar rows keep their scale; operator rows double
                        // through the rhs, and scalar coefficients that feed
                        // operator rows are embedded via their K matrices,
                        // which happens below through the row expansion.
                        col_map[blk.offset + i] = vec![(new_off + i, 1.0)];
                    }
                }
            }
        }
        // Rows: a row over Herm(d) coordinates becomes <S(C), X'> = 2b; rows
        // with only scalar columns are copied as-is. Detecting "operator"
        // rows: any entry touching a PSD column.
        for row in &self.rows {
            let touches_psd = row.entries.iter().any(|&(col, _)| {
                self.blocks.iter().any(|blk| {
                    matches!(blk.cone, Cone::HermPsd(_))
                        && col >= blk.offset
                        && col < blk.offset + blk.cone.vec_len()
                })
            });
            let scale = if touches_psd { 2.0 } else { 1.0 };
            let mut acc: std::collections::BTreeMap<usize, f64> = Default::default();
            for &(col, c) in &row.entries {
                let is_psd_col = !col_map[col].is_empty() && col_map[col].len() > 1
                    || (col_map[col].len() == 1 && col_map[col][0].1 != 1.0);
                for &(new_col, s) in &col_map[col] {
                    // PSD coefficients pick up <S(E_e), .>; scalar columns in
                    // an operator row must double like the rhs.
                    let factor = if is_psd_col { s } else { s * scale };
                    *acc.entry(new_col).or_insert(0.0) += c * factor;
                }
            }
            prog.rows.push(Row {
                entries: acc.into_iter().filter(|&(_, v)| v != 0.0).collect(),
                rhs: row.rhs * scale,
            });
        }
        for &(col, c) in &self.objective {
            let is_psd_col = col_map[col].len() > 1;
            for &(new_col, s) in &col_map[col] {
                // <C_obj, X> = <S(C_obj), X'>/2 on the embedded block.
                let factor = if is_psd_col { s * 0.5 } else { s };
                prog.objective.push((new_col, c * factor));
            }
        }
        prog
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub objective: f64,
    pub row_residuals: Vec<f64>,
    pub cone_violations: Vec<f64>,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn max_row_residual(&self) -> f64 {
        self.row_residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_cone_violation(&self) -> f64 {
        self.cone_violations.iter().cloned().fold(0.0, f64::max)
    }
}

/// Orthonormal `svec` coordinates of a Hermitian matrix: diagonal entries,
/// then `sqrt(2) Re` and `sqrt(2) Im` of each above-diagonal entry.
pub fn mat_to_vec(m: &HermitianMatrix) -> Vec<f64> {
    let d = m.dim();
    let a = m.as_matrix();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(a[(i, i)].re);
    }
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            v.push(s * a[(i, j)].re);
            v.push(s * a[(i, j)].im);
        }
    }
    v
}

pub fn vec_to_mat(v: &[f64], d: usize) -> HermitianMatrix {
    assert_eq!(v.len(), d * d);
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut idx = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let re = v[idx] * s;
            let im = v[idx + 1] * s;
            idx += 2;
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
        }
    }
    HermitianMatrix::symmetrize(m)
}

/// `[[Re M, -Im M], [Im M, Re M]]`, real symmetric when `M` is Hermitian.
pub fn real_embed_matrix(m: &HermitianMatrix) -> HermitianMatrix {
    let d = m.dim();
    let a = m.as_matrix();
    let mut big = CMat::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = a[(i, j)];
            big[(i, j)] = C64::new(z.re, 0.0);
            big[(i, j + d)] = C64::new(-z.im, 0.0);
            big[(i + d, j)] = C64::new(z.im, 0.0);
            big[(i + d, j + d)] = C64::new(z.re, 0.0);
        }
    }
    HermitianMatrix::symmetrize(big)
}
