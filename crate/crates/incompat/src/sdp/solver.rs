//! Primal-dual interior-point solver with Nesterov-Todd scaling.
//!
//! Internal form: `min c.x  s.t.  A x = b, x in K`, where `K` is a product of
//! complex Hermitian PSD blocks, nonnegative orthants and free blocks. The
//! per-iteration KKT system is reduced to a Schur complement on the equality
//! multipliers, bordered by the free columns. Everything is dense and
//! deterministic: fixed inputs and options reproduce iterates bitwise.

use super::{Cone, ConicProgram, ConicSolution, Residuals, SdpError, Sense, SolveStatus};
use super::{mat_to_vec, vec_to_mat};
use crate::linalg::{C64, CMat, HermitianMatrix};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Scale of the initial cone point (`x0 = s 1`, `z0 = 1/s`); retrying a
    /// stalled solve from a different scale moves the central path away from
    /// an ill-conditioned face.
    pub init_scale: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 120,
            init_scale: 1.0,
        }
    }
}

struct ConeBlock {
    cone: Cone,
    offset: usize,
}

/// Per-iteration Nesterov-Todd scaling data of one cone block.
enum Scaling {
    Psd {
        r: CMat,
        r_inv: CMat,
        lambda: Vec<f64>,
        /// dense `d^2 x d^2` matrix of `U -> T U T`, `T = R R†`.
        hinv: DMatrix<f64>,
    },
    NonNeg {
        lambda: Vec<f64>,
        /// `sqrt(x/z)` per coordinate (the scalar `r^2`).
        r2: Vec<f64>,
        hinv: Vec<f64>,
    },
}

/// Complementarity target of one block, in scaled coordinates.
enum Target {
    Psd(CMat),
    NonNeg(Vec<f64>),
}

pub fn solve(prog: &ConicProgram, opts: &SolverOptions) -> Result<ConicSolution, SdpError> {
    let n = prog.n_cols();
    let m = prog.n_rows();
    if m == 0 {
        return Err(SdpError::Build("program has no equality rows".into()));
    }

    // Internal minimisation objective.
    let sign = match prog.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut c = vec![0.0; n];
    for &(col, v) in &prog.objective {
        c[col] += sign * v;
    }
    let b: Vec<f64> = prog.rows.iter().map(|r| r.rhs).collect();

    // Column layout: cone blocks and free blocks.
    let mut cone_blocks: Vec<ConeBlock> = Vec::new();
    let mut free_cols: Vec<usize> = Vec::new();
    let mut is_cone_col = vec![false; n];
    for blk in &prog.blocks {
        match blk.cone {
            Cone::HermPsd(_) | Cone::NonNeg(_) => {
                for i in 0..blk.cone.vec_len() {
                    is_cone_col[blk.offset + i] = true;
                }
                cone_blocks.push(ConeBlock {
                    cone: blk.cone,
                    offset: blk.offset,
                });
            }
            Cone::Free(_) => {
                for i in 0..blk.cone.vec_len() {
                    free_cols.push(blk.offset + i);
                }
            }
        }
    }
    let nu: usize = cone_blocks.iter().map(|b| b.cone.barrier_degree()).sum();
    if nu == 0 {
        return Err(SdpError::Build("program has no cone variables".into()));
    }
    let n_f = free_cols.len();

    // Sparse columns of A for fast A^T y.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, row) in prog.rows.iter().enumerate() {
        for &(col, v) in &row.entries {
            cols[col].push((r, v));
        }
    }
    let a_mul = |x: &[f64]| -> Vec<f64> {
        prog.rows
            .iter()
            .map(|row| row.entries.iter().map(|&(col, v)| v * x[col]).sum())
            .collect()
    };
    let at_mul = |y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (col, entries) in cols.iter().enumerate() {
            out[col] = entries.iter().map(|&(r, v)| v * y[r]).sum();
        }
        out
    };

    // Start at the cone identity.
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut y = vec![0.0; m];
    let s0 = opts.init_scale.max(1e-6);
    for blk in &cone_blocks {
        match blk.cone {
            Cone::HermPsd(d) => {
                for i in 0..d {
                    x[blk.offset + i] = s0;
                    z[blk.offset + i] = 1.0 / s0;
                }
            }
            Cone::NonNeg(len) => {
                for i in 0..len {
                    x[blk.offset + i] = s0;
                    z[blk.offset + i] = 1.0 / s0;
                }
            }
            Cone::Free(_) => unreachable!(),
        }
    }

    let norm_b = 1.0 + b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_c = 1.0 + c.iter().map(|v| v * v).sum::<f64>().sqrt();

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(p, q)| p * q).sum() };
    let cone_dot = |u: &[f64], v: &[f64]| -> f64 {
        cone_blocks
            .iter()
            .map(|blk| {
                let len = blk.cone.vec_len();
                dot(
                    &u[blk.offset..blk.offset + len],
                    &v[blk.offset..blk.offset + len],
                )
            })
            .sum()
    };

    let mut iterations = 0;
    let mut status = SolveStatus::MaxIter;
    // Ill-conditioned endgames can throw an iterate off the central path;
    // the best iterate seen is kept and returned in that case.
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    for iter in 0..opts.max_iter {
        iterations = iter;

        // Residuals.
        let ax = a_mul(&x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
        let aty = at_mul(&y);
        let rd: Vec<f64> = (0..n).map(|i| c[i] - aty[i] - z[i]).collect();
        let rel_p = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_b;
        let rel_d = rd.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_c;
        let obj_p = dot(&c, &x);
        let obj_d = dot(&b, &y);
        let compl = cone_dot(&x, &z);
        let obj_scale = 1.0 + obj_p.abs().max(obj_d.abs());
        let gap_rel = (obj_p - obj_d).abs() / obj_scale;
        let compl_rel = compl / obj_scale;

        let merit = rel_p.max(rel_d).max(gap_rel).max(compl_rel);
        match &best {
            Some((m, ..)) if *m <= merit => {
                // The iterate degraded badly: stop polishing and fall back.
                if merit > 1e3 * *m {
                    break;
                }
            }
            _ => best = Some((merit, x.clone(), y.clone(), z.clone())),
        }

        if rel_p <= opts.tol && rel_d <= opts.tol && gap_rel <= opts.tol && compl_rel <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }

        // Farkas-style infeasibility certificate: A^T y nearly in -K* with
        // b.y > 0 scales to unbounded dual objective.
        let y_norm = y.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        if y_norm > 1e4 && obj_d > 1e-8 * y_norm {
            let mut cert = 0.0f64;
            for (col, &v) in aty.iter().enumerate() {
                if !is_cone_col[col] {
                    cert = cert.max(v.abs());
                }
            }
            for blk in &cone_blocks {
                match blk.cone {
                    Cone::HermPsd(d) => {
                        let s = vec_to_mat(&aty[blk.offset..blk.offset + d * d], d);
                        cert = cert.max(s.max_eigenvalue().max(0.0));
                    }
                    Cone::NonNeg(len) => {
                        for i in 0..len {
                            cert = cert.max(aty[blk.offset + i].max(0.0));
                        }
                    }
                    Cone::Free(_) => unreachable!(),
                }
            }
            if cert <= 1e-7 * y_norm {
                status = SolveStatus::Infeasible;
                break;
            }
        }

        let mu = compl / nu as f64;

        // Nesterov-Todd scalings.
        let mut scalings = Vec::with_capacity(cone_blocks.len());
        let mut scaling_failed = false;
        for blk in &cone_blocks {
            match blk.cone {
                Cone::HermPsd(d) => {
                    let xm = vec_to_mat(&x[blk.offset..blk.offset + d * d], d);
                    let zm = vec_to_mat(&z[blk.offset..blk.offset + d * d], d);
                    match nt_scaling_psd(&xm, &zm) {
                        Some(s) => scalings.push(s),
                        None => {
                            scaling_failed = true;
                            break;
                        }
                    }
                }
                Cone::NonNeg(len) => {
                    let mut lambda = Vec::with_capacity(len);
                    let mut r2 = Vec::with_capacity(len);
                    let mut hinv = Vec::with_capacity(len);
                    for i in 0..len {
                        let (xi, zi) = (x[blk.offset + i], z[blk.offset + i]);
                        if xi <= 0.0 || zi <= 0.0 {
                            scaling_failed = true;
                            break;
                        }
                        lambda.push((xi * zi).sqrt());
                        r2.push((xi / zi).sqrt());
                        hinv.push(xi / zi);
                    }
                    if scaling_failed {
                        break;
                    }
                    scalings.push(Scaling::NonNeg { lambda, r2, hinv });
                }
                Cone::Free(_) => unreachable!(),
            }
        }
        if scaling_failed {
            status = SolveStatus::MaxIter;
            break;
        }

        // A_C Hinv rows, reused by both direction solves.
        // u_r = Hinv a_r over cone columns (free columns left at zero).
        let mut u_rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        for row in &prog.rows {
            let mut u = vec![0.0; n];
            for &(col, v) in &row.entries {
                if !is_cone_col[col] {
                    continue;
                }
                // locate the block (blocks are ordered by offset)
                let bi = cone_blocks
                    .partition_point(|blk| blk.offset + blk.cone.vec_len() <= col)
                    .min(cone_blocks.len() - 1);
                let blk = &cone_blocks[bi];
                let local = col - blk.offset;
                match &scalings[bi] {
                    Scaling::Psd { hinv, .. } => {
                        let w = blk.cone.vec_len();
                        for e in 0..w {
                            u[blk.offset + e] += v * hinv[(e, local)];
                        }
                    }
                    Scaling::NonNeg { hinv, .. } => {
                        u[col] += v * hinv[local];
                    }
                }
            }
            u_rows.push(u);
        }

        // Schur complement M = A_C Hinv A_C^T plus the free border.
        let mut m_mat = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            for k in j..m {
                let mut acc = 0.0;
                for &(col, v) in &prog.rows[k].entries {
                    if is_cone_col[col] {
                        acc += v * u_rows[j][col];
                    }
                }
                m_mat[(j, k)] = acc;
                m_mat[(k, j)] = acc;
            }
        }
        let mut a_free = DMatrix::<f64>::zeros(m, n_f);
        for (fi, &col) in free_cols.iter().enumerate() {
            for &(r, v) in &cols[col] {
                a_free[(r, fi)] = v;
            }
        }

        let chol = match cholesky_with_ridge(&m_mat) {
            Some(c) => c,
            None => {
                status = SolveStatus::MaxIter;
                break;
            }
        };

        // Solves the reduced KKT system for given residuals and
        // complementarity target. By construction the dual and
        // complementarity equations hold exactly; the defect concentrates in
        // `A dx = rp`, which iterative refinement below knocks down.
        let solve_direction_raw = |rd: &[f64], rp: &[f64], targets: Option<&[Target]>| -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
            // w = vec(R^{-t} L_lambda^{-1}(V) R^{-1}) per block.
            let mut w = vec![0.0; n];
            if let Some(targets) = targets {
            for (bi, blk) in cone_blocks.iter().enumerate() {
                match (&scalings[bi], &targets[bi]) {
                    (Scaling::Psd { r_inv, lambda, .. }, Target::Psd(v)) => {
                        let d = lambda.len();
                        let mut vhat = v.clone();
                        for i in 0..d {
                            for j in 0..d {
                                vhat[(i, j)] *= C64::new(2.0 / (lambda[i] + lambda[j]), 0.0);
                            }
                        }
                        let wm = r_inv.adjoint() * vhat * r_inv;
                        let wv = mat_to_vec(&HermitianMatrix::symmetrize(wm));
                        w[blk.offset..blk.offset + d * d].copy_from_slice(&wv);
                    }
                    (Scaling::NonNeg { lambda, r2, .. }, Target::NonNeg(v)) => {
                        for i in 0..lambda.len() {
                            w[blk.offset + i] = v[i] / lambda[i] / r2[i];
                        }
                    }
                    _ => unreachable!(),
                }
            }
            }
            // rhs1 = rp - A_C Hinv (w - rd_C)
            let mut g = vec![0.0; n];
            for col in 0..n {
                if is_cone_col[col] {
                    g[col] = w[col] - rd[col];
                }
            }
            let mut rhs1 = DVector::<f64>::zeros(m);
            for r in 0..m {
                rhs1[r] = rp[r] - dot(&u_rows[r], &g);
            }
            let dy;
            let mut dxf = vec![0.0; n_f];
            if n_f > 0 {
                let u_border = chol.solve_mat(&a_free);
                let s_small = a_free.transpose() * &u_border;
                let t = chol.solve_vec(&rhs1);
                let mut rhs_f = DVector::<f64>::zeros(n_f);
                for (fi, &col) in free_cols.iter().enumerate() {
                    rhs_f[fi] = (a_free.transpose() * &t)[fi] - rd[col];
                }
                let s_lu = s_small.lu();
                let dxf_v = s_lu.solve(&rhs_f)?;
                let dy_v = t - &u_border * &dxf_v;
                for fi in 0..n_f {
                    dxf[fi] = dxf_v[fi];
                }
                dy = dy_v;
            } else {
                dy = chol.solve_vec(&rhs1);
            }
            let dy_slice: Vec<f64> = dy.iter().cloned().collect();
            let at_dy = at_mul(&dy_slice);
            let mut dx = vec![0.0; n];
            for (bi, blk) in cone_blocks.iter().enumerate() {
                let len = blk.cone.vec_len();
                match &scalings[bi] {
                    Scaling::Psd { hinv, .. } => {
                        for e in 0..len {
                            let mut acc = 0.0;
                            for f in 0..len {
                                acc += hinv[(e, f)]
                                    * (at_dy[blk.offset + f] + w[blk.offset + f]
                                        - rd[blk.offset + f]);
                            }
                            dx[blk.offset + e] = acc;
                        }
                    }
                    Scaling::NonNeg { hinv, .. } => {
                        for i in 0..len {
                            dx[blk.offset + i] = hinv[i]
                                * (at_dy[blk.offset + i] + w[blk.offset + i] - rd[blk.offset + i]);
                        }
                    }
                }
            }
            for (fi, &col) in free_cols.iter().enumerate() {
                dx[col] = dxf[fi];
            }
            let mut dz = vec![0.0; n];
            for col in 0..n {
                if is_cone_col[col] {
                    dz[col] = rd[col] - at_dy[col];
                }
            }
            Some((dx, dy_slice, dz))
        };

        // Two refinement passes against the primal equation.
        let solve_direction = |targets: &[Target]| -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
            let (mut dx, mut dy, mut dz) = solve_direction_raw(&rd, &rp, Some(targets))?;
            for _ in 0..2 {
                let adx = a_mul(&dx);
                let e1: Vec<f64> = rp.iter().zip(&adx).map(|(r, a)| r - a).collect();
                let defect = e1.iter().map(|v| v * v).sum::<f64>().sqrt();
                if defect <= 1e-14 * norm_b {
                    break;
                }
                let zero_rd = vec![0.0; n];
                let (cx, cy, cz) = solve_direction_raw(&zero_rd, &e1, None)?;
                for i in 0..n {
                    dx[i] += cx[i];
                    dz[i] += cz[i];
                }
                for r in 0..m {
                    dy[r] += cy[r];
                }
            }
            Some((dx, dy, dz))
        };

        // Affine direction.
        let affine_targets: Vec<Target> = scalings
            .iter()
            .map(|s| match s {
                Scaling::Psd { lambda, .. } => {
                    let d = lambda.len();
                    let mut v = CMat::zeros(d, d);
                    for i in 0..d {
                        v[(i, i)] = C64::new(-lambda[i] * lambda[i], 0.0);
                    }
                    Target::Psd(v)
                }
                Scaling::NonNeg { lambda, .. } => {
                    Target::NonNeg(lambda.iter().map(|l| -l * l).collect())
                }
            })
            .collect();
        let (dx_a, _dy_a, dz_a) = match solve_direction(&affine_targets) {
            Some(d) => d,
            None => {
                status = SolveStatus::MaxIter;
                break;
            }
        };

        let alpha_xa = max_step(&cone_blocks, &scalings, &x, &dx_a, true);
        let alpha_za = max_step(&cone_blocks, &scalings, &z, &dz_a, false);
        let ax_step = alpha_xa.min(1.0);
        let az_step = alpha_za.min(1.0);
        let mut mu_aff = 0.0;
        for blk in &cone_blocks {
            let len = blk.cone.vec_len();
            for i in blk.offset..blk.offset + len {
                mu_aff += (x[i] + ax_step * dx_a[i]) * (z[i] + az_step * dz_a[i]);
            }
        }
        mu_aff /= nu as f64;
        let sigma = (mu_aff / mu).max(0.0).powi(3).clamp(1e-10, 1.0);

        // Corrector target: sigma mu I - Lambda^2 - sym(dXhat dZhat).
        let mut corr_targets: Vec<Target> = Vec::with_capacity(cone_blocks.len());
        for (bi, blk) in cone_blocks.iter().enumerate() {
            match &scalings[bi] {
                Scaling::Psd { r, r_inv, lambda, .. } => {
                    let d = lambda.len();
                    let dxm = vec_to_mat(&dx_a[blk.offset..blk.offset + d * d], d);
                    let dzm = vec_to_mat(&dz_a[blk.offset..blk.offset + d * d], d);
                    let dx_hat = r_inv * dxm.as_matrix() * r_inv.adjoint();
                    let dz_hat = r.adjoint() * dzm.as_matrix() * r;
                    let cross = (&dx_hat * &dz_hat + &dz_hat * &dx_hat) * C64::new(0.5, 0.0);
                    let mut v = cross * C64::new(-1.0, 0.0);
                    for i in 0..d {
                        v[(i, i)] += C64::new(sigma * mu - lambda[i] * lambda[i], 0.0);
                    }
                    corr_targets.push(Target::Psd(v));
                }
                Scaling::NonNeg { lambda, .. } => {
                    let len = lambda.len();
                    let mut v = Vec::with_capacity(len);
                    for i in 0..len {
                        let cross = dx_a[blk.offset + i] * dz_a[blk.offset + i];
                        v.push(sigma * mu - lambda[i] * lambda[i] - cross);
                    }
                    corr_targets.push(Target::NonNeg(v));
                }
            }
        }
        let (dx, dy, dz) = match solve_direction(&corr_targets) {
            Some(d) => d,
            None => {
                status = SolveStatus::MaxIter;
                break;
            }
        };

        let step_x = max_step(&cone_blocks, &scalings, &x, &dx, true);
        let step_z = max_step(&cone_blocks, &scalings, &z, &dz, false);
        let alpha = (0.98 * step_x.min(step_z)).min(1.0);
        if std::env::var("INCOMPAT_SDP_TRACE").is_ok() {
            eprintln!(
                "iter {iter:3} mu {mu:9.2e} sigma {sigma:8.2e} alpha {alpha:8.2e} rel_p {rel_p:8.2e} rel_d {rel_d:8.2e} gap {gap_rel:8.2e}"
            );
        }
        if alpha < 1e-10 {
            status = SolveStatus::MaxIter;
            break;
        }
        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for r in 0..m {
            y[r] += alpha * dy[r];
        }
        for i in 0..n {
            z[i] += alpha * dz[i];
        }
    }

    // Fall back to the best iterate when the final one is worse.
    if status != SolveStatus::Infeasible {
        let merit_of = |xv: &[f64], yv: &[f64], zv: &[f64]| -> f64 {
            let ax = a_mul(xv);
            let rp: f64 = b
                .iter()
                .zip(&ax)
                .map(|(bi, axi)| (bi - axi) * (bi - axi))
                .sum::<f64>()
                .sqrt();
            let aty = at_mul(yv);
            let rd: f64 = (0..n)
                .map(|i| (c[i] - aty[i] - zv[i]) * (c[i] - aty[i] - zv[i]))
                .sum::<f64>()
                .sqrt();
            let obj_p = dot(&c, xv);
            let obj_d = dot(&b, yv);
            let scale = 1.0 + obj_p.abs().max(obj_d.abs());
            (rp / norm_b)
                .max(rd / norm_c)
                .max((obj_p - obj_d).abs() / scale)
                .max(cone_dot(xv, zv) / scale)
        };
        if let Some((_, bx, by, bz)) = best {
            if merit_of(&bx, &by, &bz) < merit_of(&x, &y, &z) {
                x = bx;
                y = by;
                z = bz;
            }
        }
    }

    // Final residuals.
    let ax = a_mul(&x);
    let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let aty = at_mul(&y);
    let rd: Vec<f64> = (0..n).map(|i| c[i] - aty[i] - z[i]).collect();
    let rel_p = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_b;
    let rel_d = rd.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_c;
    let obj_p = dot(&c, &x);
    let obj_d = dot(&b, &y);
    let compl = cone_dot(&x, &z);
    let obj_scale = 1.0 + obj_p.abs().max(obj_d.abs());
    let gap_rel = (obj_p - obj_d).abs() / obj_scale;
    // A stalled endgame may still satisfy the tolerances.
    if status == SolveStatus::MaxIter
        && rel_p <= opts.tol
        && rel_d <= opts.tol
        && gap_rel <= opts.tol
        && compl / obj_scale <= opts.tol
    {
        status = SolveStatus::Optimal;
    }

    Ok(ConicSolution {
        status,
        objective: match prog.sense {
            Sense::Minimize => obj_p,
            Sense::Maximize => -obj_p,
        },
        dual_objective: match prog.sense {
            Sense::Minimize => obj_d,
            Sense::Maximize => -obj_d,
        },
        primal: prog.unflatten(&x),
        dual_y: y,
        dual_z: prog.unflatten(&z),
        residuals: Residuals {
            primal: rel_p,
            dual: rel_d,
            gap: gap_rel,
            complementarity: compl,
        },
        iterations: iterations + 1,
    })
}

/// NT scaling of one PSD block: factor `R` with
/// `R† Z R = R^{-1} X R^{-†} = diag(lambda)`.
fn nt_scaling_psd(xm: &HermitianMatrix, zm: &HermitianMatrix) -> Option<Scaling> {
    let d = xm.dim();
    let lx = cholesky_psd(xm)?;
    // M† M = L_x† Z L_x; eigendecompose for the singular values of L_z† L_x.
    let mid = HermitianMatrix::symmetrize(lx.adjoint() * zm.as_matrix() * &lx);
    let spec = mid.spectrum();
    let mut lambda = Vec::with_capacity(d);
    let mut sigma_inv_sqrt = CMat::zeros(d, d);
    let mut sigma_sqrt = CMat::zeros(d, d);
    for i in 0..d {
        let s2 = spec.eigenvalues[i];
        if s2 <= 0.0 {
            return None;
        }
        let s = s2.sqrt();
        lambda.push(s);
        sigma_inv_sqrt[(i, i)] = C64::new(1.0 / s.sqrt(), 0.0);
        sigma_sqrt[(i, i)] = C64::new(s.sqrt(), 0.0);
    }
    let r = &lx * &spec.eigenvectors * &sigma_inv_sqrt;
    let lx_inv = invert_lower_triangular(&lx)?;
    let r_inv = &sigma_sqrt * spec.eigenvectors.adjoint() * &lx_inv;
    // T = R R†, then the inverse NT Hessian as a dense matrix on svec
    // coordinates via outer products of T's columns.
    let t = &r * r.adjoint();
    let hinv = nt_hessian_inv(&t);
    Some(Scaling::Psd {
        r,
        r_inv,
        lambda,
        hinv,
    })
}

/// Dense matrix of `U -> T U T` in svec coordinates.
fn nt_hessian_inv(t: &CMat) -> DMatrix<f64> {
    let d = t.nrows();
    let n = d * d;
    let mut out = DMatrix::<f64>::zeros(n, n);
    let col = |i: usize| -> Vec<C64> { (0..d).map(|k| t[(k, i)]).collect() };
    let mut write_col = |f: usize, w: &CMat| {
        let wv = mat_to_vec(&HermitianMatrix::symmetrize(w.clone()));
        for e in 0..n {
            out[(e, f)] = wv[e];
        }
    };
    // Basis order must match mat_to_vec: diagonals first, then (re, im)
    // pairs above the diagonal.
    for i in 0..d {
        // E = e_i e_i^T: T E T = t_i t_i†
        let ti = col(i);
        let mut w = CMat::zeros(d, d);
        for p in 0..d {
            for q in 0..d {
                w[(p, q)] = ti[p] * ti[q].conj();
            }
        }
        write_col(i, &w);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut f = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let ti = col(i);
            let tj = col(j);
            // re basis: (e_i e_j^T + e_j e_i^T)/sqrt2
            let mut w = CMat::zeros(d, d);
            for p in 0..d {
                for q in 0..d {
                    w[(p, q)] = (ti[p] * tj[q].conj() + tj[p] * ti[q].conj()) * C64::new(s, 0.0);
                }
            }
            write_col(f, &w);
            // im basis: (i e_i e_j^T - i e_j e_i^T)/sqrt2
            let mut w = CMat::zeros(d, d);
            for p in 0..d {
                for q in 0..d {
                    w[(p, q)] = (ti[p] * tj[q].conj() * C64::new(0.0, 1.0)
                        + tj[p] * ti[q].conj() * C64::new(0.0, -1.0))
                        * C64::new(s, 0.0);
                }
            }
            write_col(f + 1, &w);
            f += 2;
        }
    }
    out
}

/// Lower-triangular Cholesky factor of a Hermitian PD matrix.
fn cholesky_psd(m: &HermitianMatrix) -> Option<CMat> {
    let d = m.dim();
    let a = m.as_matrix();
    let mut l = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)].conj();
            }
            if i == j {
                if sum.re <= 0.0 {
                    return None;
                }
                l[(i, j)] = C64::new(sum.re.sqrt(), 0.0);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Some(l)
}

fn invert_lower_triangular(l: &CMat) -> Option<CMat> {
    let d = l.nrows();
    let mut inv = CMat::zeros(d, d);
    for j in 0..d {
        if l[(j, j)].norm() == 0.0 {
            return None;
        }
        inv[(j, j)] = C64::new(1.0, 0.0) / l[(j, j)];
        for i in (j + 1)..d {
            let mut sum = C64::new(0.0, 0.0);
            for k in j..i {
                sum += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -sum / l[(i, i)];
        }
    }
    Some(inv)
}

struct SchurFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SchurFactor {
    fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    fn solve_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }
}

fn cholesky_with_ridge(m: &DMatrix<f64>) -> Option<SchurFactor> {
    let n = m.nrows();
    let mean_diag = (0..n).map(|i| m[(i, i)].abs()).sum::<f64>() / n as f64;
    let mut ridge = 0.0;
    for attempt in 0..8 {
        let mut trial = m.clone();
        if ridge > 0.0 {
            for i in 0..n {
                trial[(i, i)] += ridge;
            }
        }
        if let Some(chol) = trial.cholesky() {
            return Some(SchurFactor { chol });
        }
        ridge = if attempt == 0 {
            1e-13 * (1.0 + mean_diag)
        } else {
            ridge * 100.0
        };
    }
    None
}

/// Largest `alpha` keeping `v + alpha dv` in the cone (scaled eigenvalue
/// test for PSD blocks).
fn max_step(
    cone_blocks: &[ConeBlock],
    scalings: &[Scaling],
    v: &[f64],
    dv: &[f64],
    primal: bool,
) -> f64 {
    let mut alpha = f64::INFINITY;
    for (bi, blk) in cone_blocks.iter().enumerate() {
        match &scalings[bi] {
            Scaling::Psd { r, r_inv, lambda, .. } => {
                let d = lambda.len();
                let dm = vec_to_mat(&dv[blk.offset..blk.offset + d * d], d);
                let scaled = if primal {
                    r_inv * dm.as_matrix() * r_inv.adjoint()
                } else {
                    r.adjoint() * dm.as_matrix() * r
                };
                let mut n = scaled;
                for i in 0..d {
                    for j in 0..d {
                        n[(i, j)] *= C64::new(1.0 / (lambda[i].sqrt() * lambda[j].sqrt()), 0.0);
                    }
                }
                let min_eig = HermitianMatrix::symmetrize(n).min_eigenvalue();
                if min_eig < -1e-14 {
                    alpha = alpha.min(-1.0 / min_eig);
                }
            }
            Scaling::NonNeg { .. } => {
                let len = blk.cone.vec_len();
                for i in blk.offset..blk.offset + len {
                    if dv[i] < 0.0 {
                        alpha = alpha.min(-v[i] / dv[i]);
                    }
                }
            }
        }
    }
    alpha
}
