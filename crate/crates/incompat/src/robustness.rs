//! Assembly and solution of the five robustness programs, with certified
//! results: optimal visibility, parent POVM, reconstructed noise and a dual
//! certificate that independently upper-bounds the optimum.

use crate::linalg::HermitianMatrix;
use crate::noise::{
    canonical_noise, NoiseInstance, NoiseModelKind, NoisePayload, parent_marginal,
};
use crate::povm::{
    flat_index, multi_indices, total_outcomes, MeasurementSet, Povm, PovmError,
};
use crate::sdp::{
    self, BlockId, Cone, ConicProgram, OpTerm, SdpError, Sense, SolveStatus,
    SolverOptions,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RobustnessError {
    #[error("outcome product {0} exceeds the configured cap {1}")]
    TooLarge(usize, usize),
    #[error("solver failure ({status:?}): primal {primal:.2e}, dual {dual:.2e}, gap {gap:.2e}")]
    SolverFailure {
        status: SolveStatus,
        primal: f64,
        dual: f64,
        gap: f64,
    },
    #[error(transparent)]
    Povm(#[from] PovmError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Cap on the product of outcome counts (parent POVM size).
    pub outcome_cap: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 120,
            outcome_cap: 4096,
        }
    }
}

/// Dual variables in the conventions of the five dual programs.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// `X_{a|x}`, indexed `[x][a]`.
    pub x: Vec<Vec<HermitianMatrix>>,
    /// `N` for the jointly-measurable and generalised measures.
    pub n: Option<HermitianMatrix>,
    /// Per-measurement trace bounds for the probabilistic measure.
    pub xi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// Worst marginal-equation residual (Frobenius; operator-inequality
    /// violation for the generalised measure).
    pub primal_marginal: f64,
    /// Worst parent PSD violation.
    pub parent_psd: f64,
    /// Normalisation residual of the parent (jm/g) or of the marginals (d/r/p).
    pub normalization: f64,
    /// Worst dual cone violation.
    pub dual_feasibility: f64,
    /// Violation of the dual scalar constraint.
    pub dual_scalar: f64,
    /// `|dual objective - eta| / (1 + eta)`.
    pub gap: f64,
}

impl ResidualReport {
    pub fn worst(&self) -> f64 {
        self.primal_marginal
            .max(self.parent_psd)
            .max(self.normalization)
            .max(self.dual_feasibility)
            .max(self.dual_scalar)
            .max(self.gap)
    }
}

#[derive(Debug, Clone)]
pub struct RobustnessResult {
    pub measure: NoiseModelKind,
    pub eta: f64,
    /// Parent POVM of the optimal noisy set, outcomes in row-major
    /// multi-index order.
    pub parent: Povm,
    pub outcome_counts: Vec<usize>,
    /// The optimal noise, reconstructed from the solution.
    pub noise: NoiseInstance,
    pub dual: DualCertificate,
    /// Value certified by the dual point.
    pub dual_objective: f64,
    pub gap: f64,
    pub residuals: ResidualReport,
    pub iterations: usize,
}

/// Solves the robustness program of the given noise model.
pub fn solve_robustness(
    s: &MeasurementSet,
    kind: NoiseModelKind,
    opts: &SolveOptions,
) -> Result<RobustnessResult, RobustnessError> {
    let counts = s.outcome_counts();
    let total = total_outcomes(&counts);
    if total > opts.outcome_cap {
        return Err(RobustnessError::TooLarge(total, opts.outcome_cap));
    }
    let lowered = lower_program(s, kind)?;
    let accept = opts.tol.max(1e-7);
    let acceptable = |sol: &sdp::ConicSolution| {
        sol.status == SolveStatus::Optimal
            || (sol.residuals.primal <= accept
                && sol.residuals.dual <= accept
                && sol.residuals.gap <= accept)
    };
    // A stalled endgame near an ill-conditioned face usually resolves when
    // the central path is approached from a different initial scale.
    let mut sol: Option<sdp::ConicSolution> = None;
    for init_scale in [1.0, 0.2, 5.0] {
        let solver_opts = SolverOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            init_scale,
        };
        let attempt = sdp::solve(&lowered.program, &solver_opts)?;
        let good = acceptable(&attempt);
        let better = match &sol {
            Some(prev) => attempt.residuals.gap < prev.residuals.gap,
            None => true,
        };
        if better {
            sol = Some(attempt);
        }
        if good {
            break;
        }
    }
    let sol = sol.expect("at least one attempt");
    if !acceptable(&sol) {
        return Err(RobustnessError::SolverFailure {
            status: sol.status,
            primal: sol.residuals.primal,
            dual: sol.residuals.dual,
            gap: sol.residuals.gap,
        });
    }
    extract_result(s, kind, &lowered, &sol)
}

/// Feasibility of joint measurability, via the jointly-measurable robustness
/// program: compatible within `tol` iff the optimal visibility reaches
/// `1 - tol`. Returns the parent on success.
pub fn is_jointly_measurable(
    s: &MeasurementSet,
    tol: f64,
    opts: &SolveOptions,
) -> Result<(bool, Option<Povm>), RobustnessError> {
    let r = solve_robustness(s, NoiseModelKind::JointlyMeasurable, opts)?;
    if r.eta >= 1.0 - tol.max(1e-7) {
        Ok((true, Some(r.parent)))
    } else {
        Ok((false, None))
    }
}

/// Membership of a candidate in the jointly-measurable noise set when no
/// parent is supplied: finds one by the feasibility solve.
pub fn certify_jm_membership(
    s: &MeasurementSet,
    candidate: &NoiseInstance,
    opts: &SolveOptions,
) -> Result<bool, RobustnessError> {
    if candidate.measurements.dim() != s.dim()
        || candidate.measurements.outcome_counts() != s.outcome_counts()
    {
        return Ok(false);
    }
    if crate::noise::membership_check(
        NoiseModelKind::JointlyMeasurable,
        s,
        candidate,
        opts.tol.max(1e-8),
    ) {
        return Ok(true);
    }
    let (feasible, _) = is_jointly_measurable(&candidate.measurements, 1e-7, opts)?;
    Ok(feasible)
}

/// Everything `verify_result` recomputes from scratch.
pub fn verify_result(s: &MeasurementSet, r: &RobustnessResult) -> ResidualReport {
    let counts = s.outcome_counts();
    let eta = r.eta;

    // Parent cone and normalisation.
    let parent_psd = r
        .parent
        .elements()
        .iter()
        .map(|e| (-e.min_eigenvalue()).max(0.0))
        .fold(0.0f64, f64::max);
    let mut parent_sum = HermitianMatrix::zeros(s.dim());
    for e in r.parent.elements() {
        parent_sum = parent_sum.add(e);
    }
    let normalization = parent_sum
        .sub(&HermitianMatrix::identity(s.dim()))
        .norm_frobenius();

    // Marginal residuals against the reconstructed noise.
    let mut primal_marginal = 0.0f64;
    for x in 0..s.k() {
        for a in 0..counts[x] {
            let marg = parent_marginal(&r.parent, &counts, x, a);
            match r.measure {
                NoiseModelKind::Generalised => {
                    // marginal >= eta A
                    let diff = marg.sub(&s.element(x, a).scale(eta));
                    primal_marginal = primal_marginal.max((-diff.min_eigenvalue()).max(0.0));
                }
                NoiseModelKind::JointlyMeasurable => {
                    // marginal(G) - marginal(Htilde) = eta A, with
                    // Htilde = (1 - eta) H reconstructed from the noise parent.
                    let target = match &r.noise.payload {
                        NoisePayload::Parent(h) => {
                            let hm = parent_marginal(h, &counts, x, a).scale(1.0 - eta);
                            s.element(x, a).scale(eta).add(&hm)
                        }
                        _ => s.element(x, a).scale(eta),
                    };
                    primal_marginal =
                        primal_marginal.max(marg.sub(&target).norm_frobenius());
                }
                _ => {
                    let noise_el = r.noise.measurements.element(x, a);
                    let target = s.element(x, a).scale(eta).add(&noise_el.scale(1.0 - eta));
                    primal_marginal =
                        primal_marginal.max(marg.sub(&target).norm_frobenius());
                }
            }
        }
    }

    let (dual_feasibility, dual_scalar, dual_objective) = check_dual_point(s, r.measure, &r.dual);
    let gap = (dual_objective - eta).abs() / (1.0 + eta.abs());

    ResidualReport {
        primal_marginal,
        parent_psd,
        normalization,
        dual_feasibility,
        dual_scalar,
        gap,
    }
}

/// Feasibility residuals and objective of a dual point, straight from the
/// dual constraint systems (independent of the conic lowering).
///
/// Returns `(worst cone violation, scalar-constraint violation, objective)`.
pub fn check_dual_point(
    s: &MeasurementSet,
    kind: NoiseModelKind,
    dual: &DualCertificate,
) -> (f64, f64, f64) {
    let counts = s.outcome_counts();
    let d = s.dim();
    let k = s.k();
    let mut cone_violation = 0.0f64;

    // sum over measurements of X_{j_x|x} for every outcome combination
    let combo_sum = |idx: &[usize]| -> HermitianMatrix {
        let mut acc = HermitianMatrix::zeros(d);
        for x in 0..k {
            acc = acc.add(&dual.x[x][idx[x]]);
        }
        acc
    };

    match kind {
        NoiseModelKind::Depolarising | NoiseModelKind::Random | NoiseModelKind::Probabilistic => {
            for idx in multi_indices(&counts) {
                cone_violation = cone_violation.max((-combo_sum(&idx).min_eigenvalue()).max(0.0));
            }
        }
        NoiseModelKind::JointlyMeasurable => {
            let n = dual.n.as_ref().expect("jm dual carries N");
            for idx in multi_indices(&counts) {
                let sum = combo_sum(&idx);
                cone_violation = cone_violation.max((-sum.min_eigenvalue()).max(0.0));
                cone_violation =
                    cone_violation.max((-n.sub(&sum).min_eigenvalue()).max(0.0));
            }
        }
        NoiseModelKind::Generalised => {
            let n = dual.n.as_ref().expect("g dual carries N");
            for x in 0..k {
                for a in 0..counts[x] {
                    cone_violation =
                        cone_violation.max((-dual.x[x][a].min_eigenvalue()).max(0.0));
                }
            }
            for idx in multi_indices(&counts) {
                cone_violation =
                    cone_violation.max((-n.sub(&combo_sum(&idx)).min_eigenvalue()).max(0.0));
            }
        }
    }

    let trace_term: f64 = (0..k)
        .map(|x| {
            (0..counts[x])
                .map(|a| dual.x[x][a].inner(s.element(x, a)))
                .sum::<f64>()
        })
        .sum();

    let (dual_scalar, objective) = match kind {
        NoiseModelKind::Depolarising => {
            let lhs = 1.0 + trace_term;
            let rhs: f64 = (0..k)
                .map(|x| {
                    (0..counts[x])
                        .map(|a| s.element(x, a).trace() / d as f64 * dual.x[x][a].trace())
                        .sum::<f64>()
                })
                .sum();
            ((rhs - lhs).max(0.0), lhs)
        }
        NoiseModelKind::Random => {
            let lhs = 1.0 + trace_term;
            let rhs: f64 = (0..k)
                .map(|x| {
                    (0..counts[x])
                        .map(|a| dual.x[x][a].trace() / counts[x] as f64)
                        .sum::<f64>()
                })
                .sum();
            ((rhs - lhs).max(0.0), lhs)
        }
        NoiseModelKind::Probabilistic => {
            let lhs = 1.0 + trace_term;
            let xi = dual.xi.as_ref().expect("p dual carries xi");
            let mut violation = (xi.iter().sum::<f64>() - lhs).max(0.0);
            for x in 0..k {
                for a in 0..counts[x] {
                    violation = violation.max(dual.x[x][a].trace() - xi[x]);
                }
            }
            (violation.max(0.0), lhs)
        }
        NoiseModelKind::JointlyMeasurable | NoiseModelKind::Generalised => {
            let n = dual.n.as_ref().expect("dual carries N");
            ((1.0 - trace_term).max(0.0), n.trace())
        }
    };

    (cone_violation, dual_scalar, objective)
}

/// A lowered robustness program together with the bookkeeping needed to read
/// the solution back.
pub struct LoweredProgram {
    pub program: ConicProgram,
    counts: Vec<usize>,
    dim: usize,
    /// Outcomes kept after presolve, per measurement.
    kept: Vec<Vec<usize>>,
    /// Kept multi-indices (over kept outcomes), row-major over the original
    /// index space.
    kept_flat: Vec<usize>,
    g_blocks: Vec<BlockId>,
    h_blocks: Vec<BlockId>,
    slack_blocks: Vec<Vec<BlockId>>,
    eta_block: BlockId,
    ptilde_block: Option<BlockId>,
    /// Row ranges of the marginal constraints: `marginal_rows[x][a]` is
    /// `Some(start)` when the constraint was materialised.
    marginal_rows: Vec<Vec<Option<usize>>>,
    /// Row range of the parent normalisation constraint (jm/g).
    norm_row: Option<usize>,
    /// Scalar row indices, per measurement, for the probabilistic measure.
    scalar_rows: Vec<usize>,
}

/// Builds the conic program of the given measure.
pub fn lower_program(
    s: &MeasurementSet,
    kind: NoiseModelKind,
) -> Result<LoweredProgram, RobustnessError> {
    let d = s.dim();
    let k = s.k();
    let counts = s.outcome_counts();

    // Structurally zero outcomes force zero parent blocks under the
    // depolarising model; dropping them restores a strictly feasible
    // interior.
    let kept: Vec<Vec<usize>> = (0..k)
        .map(|x| {
            (0..counts[x])
                .filter(|&a| {
                    kind != NoiseModelKind::Depolarising
                        || s.element(x, a).norm_frobenius() > 1e-12
                })
                .collect()
        })
        .collect();
    let kept_counts: Vec<usize> = kept.iter().map(|v| v.len()).collect();
    if kept_counts.iter().any(|&n| n == 0) {
        return Err(RobustnessError::Povm(PovmError::Invalid(
            "a measurement has no nonzero elements".into(),
        )));
    }

    let mut prog = ConicProgram::new(Sense::Maximize);
    let mut g_blocks = Vec::new();
    let mut kept_flat = Vec::new();
    for idx in multi_indices(&kept_counts) {
        let orig: Vec<usize> = idx.iter().enumerate().map(|(x, &i)| kept[x][i]).collect();
        let flat = flat_index(&orig, &counts);
        kept_flat.push(flat);
        g_blocks.push(prog.add_block(format!("G{flat}"), Cone::HermPsd(d)));
    }
    let mut h_blocks = Vec::new();
    if kind == NoiseModelKind::JointlyMeasurable {
        for &flat in &kept_flat {
            h_blocks.push(prog.add_block(format!("H{flat}"), Cone::HermPsd(d)));
        }
    }
    let mut slack_blocks: Vec<Vec<BlockId>> = Vec::new();
    if kind == NoiseModelKind::Generalised {
        for x in 0..k {
            let mut row = Vec::new();
            for a in 0..counts[x] {
                row.push(prog.add_block(format!("S{x}_{a}"), Cone::HermPsd(d)));
            }
            slack_blocks.push(row);
        }
    }
    let eta_block = prog.add_block("eta", Cone::Free(1));
    let ptilde_block = if kind == NoiseModelKind::Probabilistic {
        Some(prog.add_block("ptilde", Cone::NonNeg(counts.iter().sum())))
    } else {
        None
    };
    let slack_one = if matches!(kind, NoiseModelKind::Depolarising | NoiseModelKind::Random) {
        Some(prog.add_block("one_minus_eta", Cone::NonNeg(1)))
    } else {
        None
    };
    prog.objective_scalar(eta_block, 0, 1.0);

    let identity = HermitianMatrix::identity(d);
    let blocks_with = |x: usize, a: usize| -> Vec<usize> {
        kept_flat
            .iter()
            .enumerate()
            .filter(|(_, &flat)| crate::povm::unflatten_index(flat, &counts)[x] == a)
            .map(|(i, _)| i)
            .collect()
    };

    // Parent normalisation for jm/g.
    let mut norm_row = None;
    if matches!(
        kind,
        NoiseModelKind::JointlyMeasurable | NoiseModelKind::Generalised
    ) {
        norm_row = Some(prog.program_rows());
        let terms: Vec<(BlockId, OpTerm)> = g_blocks
            .iter()
            .map(|&b| (b, OpTerm::MatrixVar(1.0)))
            .collect();
        prog.add_operator_eq(d, &terms, &identity)?;
    }

    // Marginal constraints. One redundant outcome per measurement beyond the
    // first is dropped for the equality measures (the constraint is implied);
    // the matching dual variable is the zero matrix.
    let mut marginal_rows: Vec<Vec<Option<usize>>> =
        (0..k).map(|x| vec![None; counts[x]]).collect();
    let mut scalar_rows = Vec::new();
    let equality_measure = !matches!(kind, NoiseModelKind::Generalised);
    for x in 0..k {
        for (pos, &a) in kept[x].iter().enumerate() {
            if equality_measure && x > 0 && pos == kept[x].len() - 1 {
                continue;
            }
            let mut terms: Vec<(BlockId, OpTerm)> = blocks_with(x, a)
                .into_iter()
                .map(|i| (g_blocks[i], OpTerm::MatrixVar(1.0)))
                .collect();
            let element = s.element(x, a);
            let rhs;
            match kind {
                NoiseModelKind::Depolarising => {
                    let noise = identity.scale(element.trace() / d as f64);
                    terms.push((
                        eta_block,
                        OpTerm::ScalarTimes(element.sub(&noise).scale(-1.0), 0),
                    ));
                    rhs = noise;
                }
                NoiseModelKind::Random => {
                    let noise = identity.scale(1.0 / counts[x] as f64);
                    terms.push((
                        eta_block,
                        OpTerm::ScalarTimes(element.sub(&noise).scale(-1.0), 0),
                    ));
                    rhs = noise;
                }
                NoiseModelKind::Probabilistic => {
                    terms.push((eta_block, OpTerm::ScalarTimes(element.scale(-1.0), 0)));
                    let pt_idx: usize = counts[..x].iter().sum::<usize>() + a;
                    terms.push((
                        ptilde_block.unwrap(),
                        OpTerm::ScalarTimes(identity.scale(-1.0), pt_idx),
                    ));
                    rhs = HermitianMatrix::zeros(d);
                }
                NoiseModelKind::JointlyMeasurable => {
                    for i in blocks_with(x, a) {
                        terms.push((h_blocks[i], OpTerm::MatrixVar(-1.0)));
                    }
                    terms.push((eta_block, OpTerm::ScalarTimes(element.scale(-1.0), 0)));
                    rhs = HermitianMatrix::zeros(d);
                }
                NoiseModelKind::Generalised => {
                    terms.push((eta_block, OpTerm::ScalarTimes(element.scale(-1.0), 0)));
                    terms.push((slack_blocks[x][a], OpTerm::MatrixVar(-1.0)));
                    rhs = HermitianMatrix::zeros(d);
                }
            }
            marginal_rows[x][a] = Some(prog.program_rows());
            prog.add_operator_eq(d, &terms, &rhs)?;
        }
    }

    // Scalar rows: eta <= 1 for d/r, subnormalised weights for p.
    match kind {
        NoiseModelKind::Depolarising | NoiseModelKind::Random => {
            prog.add_scalar_row(
                vec![(eta_block, 0, 1.0), (slack_one.unwrap(), 0, 1.0)],
                1.0,
            );
        }
        NoiseModelKind::Probabilistic => {
            for x in 0..k {
                scalar_rows.push(prog.program_rows());
                let mut entries = vec![(eta_block, 0, 1.0)];
                for a in 0..counts[x] {
                    let pt_idx: usize = counts[..x].iter().sum::<usize>() + a;
                    entries.push((ptilde_block.unwrap(), pt_idx, 1.0));
                }
                prog.add_scalar_row(entries, 1.0);
            }
        }
        _ => {}
    }

    Ok(LoweredProgram {
        program: prog,
        counts,
        dim: d,
        kept,
        kept_flat,
        g_blocks,
        h_blocks,
        slack_blocks,
        eta_block,
        ptilde_block,
        marginal_rows,
        norm_row,
        scalar_rows,
    })
}

impl ConicProgram {
    fn program_rows(&self) -> usize {
        self.n_rows()
    }
}

fn extract_result(
    s: &MeasurementSet,
    kind: NoiseModelKind,
    lowered: &LoweredProgram,
    sol: &sdp::ConicSolution,
) -> Result<RobustnessResult, RobustnessError> {
    let d = lowered.dim;
    let k = s.k();
    let counts = &lowered.counts;
    let total = total_outcomes(counts);

    let eta_raw = sol.primal[lowered.eta_block.0].as_scalars()[0];
    let eta = eta_raw.clamp(0.0, 1.0);

    // Parent POVM, zero blocks reinserted.
    let mut parent_elements = vec![HermitianMatrix::zeros(d); total];
    for (i, &flat) in lowered.kept_flat.iter().enumerate() {
        parent_elements[flat] = sol.primal[lowered.g_blocks[i].0].as_matrix().clone();
    }
    let parent = Povm::new_unchecked(d, parent_elements)?;

    // Dual certificate. Dropped marginal rows correspond to a zero dual
    // variable; outcomes removed by presolve get a large multiple of the
    // identity, which keeps every dual cone constraint satisfied without
    // touching the objective (their elements have zero trace).
    let mut x_dual: Vec<Vec<HermitianMatrix>> = (0..k)
        .map(|x| vec![HermitianMatrix::zeros(d); counts[x]])
        .collect();
    let flip = matches!(
        kind,
        NoiseModelKind::Depolarising | NoiseModelKind::Random | NoiseModelKind::Probabilistic
    );
    for x in 0..k {
        for a in 0..counts[x] {
            if let Some(start) = lowered.marginal_rows[x][a] {
                let yv = &sol.dual_y[start..start + d * d];
                let m = sdp::vec_to_mat(yv, d);
                x_dual[x][a] = if flip { m.scale(-1.0) } else { m };
            }
        }
    }
    if kind == NoiseModelKind::Depolarising {
        let bound: f64 = x_dual
            .iter()
            .flatten()
            .map(|m| m.norm_spectral())
            .sum::<f64>()
            + 1.0;
        for x in 0..k {
            for (a, row) in lowered.marginal_rows[x].iter().enumerate() {
                let dropped_by_presolve =
                    row.is_none() && !lowered.kept[x].contains(&a);
                if dropped_by_presolve {
                    x_dual[x][a] = HermitianMatrix::identity(d).scale(bound);
                }
            }
        }
    }
    let n_dual = lowered.norm_row.map(|start| {
        let yv = &sol.dual_y[start..start + d * d];
        sdp::vec_to_mat(yv, d).scale(-1.0)
    });
    let xi = if kind == NoiseModelKind::Probabilistic {
        Some(
            lowered
                .scalar_rows
                .iter()
                .map(|&r| -sol.dual_y[r])
                .collect::<Vec<f64>>(),
        )
    } else {
        None
    };
    let dual = DualCertificate {
        x: x_dual,
        n: n_dual,
        xi,
    };

    // Reconstructed optimal noise.
    let noise = reconstruct_noise(s, kind, lowered, sol, eta)?;

    let mut result = RobustnessResult {
        measure: kind,
        eta,
        parent,
        outcome_counts: counts.clone(),
        noise,
        dual,
        dual_objective: sol.dual_objective,
        gap: sol.residuals.gap,
        residuals: ResidualReport {
            primal_marginal: 0.0,
            parent_psd: 0.0,
            normalization: 0.0,
            dual_feasibility: 0.0,
            dual_scalar: 0.0,
            gap: 0.0,
        },
        iterations: sol.iterations,
    };
    result.residuals = verify_result(s, &result);
    Ok(result)
}

fn reconstruct_noise(
    s: &MeasurementSet,
    kind: NoiseModelKind,
    lowered: &LoweredProgram,
    sol: &sdp::ConicSolution,
    eta: f64,
) -> Result<NoiseInstance, RobustnessError> {
    let d = lowered.dim;
    let k = s.k();
    let counts = &lowered.counts;
    let total = total_outcomes(counts);
    let stray = 1.0 - eta;

    match kind {
        NoiseModelKind::Depolarising | NoiseModelKind::Random => Ok(canonical_noise(kind, s)),
        NoiseModelKind::Probabilistic => {
            let pt = sol.primal[lowered.ptilde_block.unwrap().0].as_scalars();
            let mut probs = Vec::with_capacity(k);
            for x in 0..k {
                let base: usize = counts[..x].iter().sum();
                let row: Vec<f64> = if stray > 1e-9 {
                    (0..counts[x])
                        .map(|a| (pt[base + a] / stray).clamp(0.0, 1.0))
                        .collect()
                } else {
                    vec![1.0 / counts[x] as f64; counts[x]]
                };
                // renormalise the recovered distribution exactly
                let total_p: f64 = row.iter().sum();
                probs.push(row.into_iter().map(|p| p / total_p).collect::<Vec<f64>>());
            }
            let measurements = MeasurementSet::new(
                probs
                    .iter()
                    .map(|row| {
                        Povm::new_unchecked(
                            d,
                            row.iter()
                                .map(|&p| HermitianMatrix::identity(d).scale(p))
                                .collect(),
                        )
                    })
                    .collect::<Result<_, _>>()?,
            )?;
            Ok(NoiseInstance {
                kind,
                measurements,
                payload: NoisePayload::Probabilities(probs),
            })
        }
        NoiseModelKind::JointlyMeasurable => {
            if stray <= 1e-9 {
                return Ok(canonical_noise(kind, s));
            }
            let mut h_elements = vec![HermitianMatrix::zeros(d); total];
            for (i, &flat) in lowered.kept_flat.iter().enumerate() {
                h_elements[flat] = sol.primal[lowered.h_blocks[i].0]
                    .as_matrix()
                    .scale(1.0 / stray);
            }
            let parent = Povm::new_unchecked(d, h_elements)?;
            let measurements = MeasurementSet::new(
                (0..k)
                    .map(|x| {
                        let elements = (0..counts[x])
                            .map(|a| parent_marginal(&parent, counts, x, a))
                            .collect();
                        Povm::new_unchecked(d, elements)
                    })
                    .collect::<Result<_, _>>()?,
            )?;
            Ok(NoiseInstance {
                kind,
                measurements,
                payload: NoisePayload::Parent(parent),
            })
        }
        NoiseModelKind::Generalised => {
            if stray <= 1e-9 {
                return Ok(canonical_noise(kind, s));
            }
            let mut measurements = Vec::with_capacity(k);
            for x in 0..k {
                let mut elements: Vec<HermitianMatrix> = (0..counts[x])
                    .map(|a| {
                        sol.primal[lowered.slack_blocks[x][a].0]
                            .as_matrix()
                            .scale(1.0 / stray)
                    })
                    .collect();
                // spread the normalisation defect uniformly
                let mut sum = HermitianMatrix::zeros(d);
                for e in &elements {
                    sum = sum.add(e);
                }
                let defect = HermitianMatrix::identity(d)
                    .sub(&sum)
                    .scale(1.0 / counts[x] as f64);
                for e in &mut elements {
                    *e = e.add(&defect);
                }
                measurements.push(Povm::new_unchecked(d, elements)?);
            }
            Ok(NoiseInstance {
                kind,
                measurements: MeasurementSet::new(measurements)?,
                payload: NoisePayload::Explicit,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{mub_pair, named_pair, prime_mub_set, qubit_theta_pair};
    use approx::assert_abs_diff_eq;

    fn eta_of(s: &MeasurementSet, kind: NoiseModelKind) -> f64 {
        solve_robustness(s, kind, &SolveOptions::default())
            .unwrap()
            .eta
    }

    #[test]
    fn commuting_diagonal_pair_is_compatible() {
        // Diagonal d = 3 POVMs commute pairwise.
        let diag =
            |v: [f64; 3]| {
                HermitianMatrix::new(crate::linalg::CMat::from_diagonal(
                    &nalgebra::DVector::from_iterator(
                        3,
                        v.iter().map(|&t| crate::linalg::C64::new(t, 0.0)),
                    ),
                ))
                .unwrap()
            };
        let a = Povm::new(3, vec![diag([0.7, 0.2, 0.5]), diag([0.3, 0.8, 0.5])]).unwrap();
        let b = Povm::new(3, vec![diag([0.1, 0.6, 0.4]), diag([0.9, 0.4, 0.6])]).unwrap();
        let s = MeasurementSet::pair(a.clone(), b.clone()).unwrap();
        let r = solve_robustness(&s, NoiseModelKind::Depolarising, &SolveOptions::default())
            .unwrap();
        assert!(r.eta >= 1.0 - 1e-7, "eta = {}", r.eta);

        let (jm, parent) = is_jointly_measurable(&s, 1e-7, &SolveOptions::default()).unwrap();
        assert!(jm);
        // The product parent G_ab = A_a B_b is a mathematical witness.
        let mut witness: Vec<HermitianMatrix> = Vec::new();
        for ai in 0..2 {
            for bi in 0..2 {
                witness.push(HermitianMatrix::symmetrize(
                    a.element(ai).as_matrix() * b.element(bi).as_matrix(),
                ));
            }
        }
        let witness = Povm::new(3, witness).unwrap();
        assert!(crate::noise::parent_matches(&witness, &s, 1e-10));
        let _ = parent;
    }

    #[test]
    fn theta_pair_closed_forms() {
        let theta = std::f64::consts::FRAC_PI_4;
        let s = qubit_theta_pair(theta).unwrap();
        let expect_d = 1.0 / (theta.cos() + theta.sin());
        assert_abs_diff_eq!(eta_of(&s, NoiseModelKind::Depolarising), expect_d, epsilon = 1e-6);
        let expect_jm = 2.0 / (1.0 + theta.cos() + theta.sin());
        assert_abs_diff_eq!(
            eta_of(&s, NoiseModelKind::JointlyMeasurable),
            expect_jm,
            epsilon = 1e-6
        );
        let s2 = std::f64::consts::SQRT_2;
        let expect_g = (s2 + 1.0) / (s2 + theta.cos() + theta.sin());
        assert_abs_diff_eq!(eta_of(&s, NoiseModelKind::Generalised), expect_g, epsilon = 1e-6);
    }

    #[test]
    fn theta_pi6_generalised() {
        // Evaluate the closed form directly as the oracle.
        let theta = std::f64::consts::FRAC_PI_6;
        let s = qubit_theta_pair(theta).unwrap();
        let s2 = std::f64::consts::SQRT_2;
        let expect = (s2 + 1.0) / (s2 + theta.cos() + theta.sin());
        assert_abs_diff_eq!(eta_of(&s, NoiseModelKind::Generalised), expect, epsilon = 1e-6);
    }

    #[test]
    fn qmub3_depolarising() {
        let s = named_pair("qMUB3").unwrap();
        let expect = 0.5 * (1.0 + std::f64::consts::SQRT_2 / (3.0 + std::f64::consts::SQRT_2));
        assert_abs_diff_eq!(eta_of(&s, NoiseModelKind::Depolarising), expect, epsilon = 1e-6);
    }

    #[test]
    fn mub3_probabilistic() {
        let s = mub_pair(3).unwrap();
        let expect = 0.5 * (1.0 + 1.0 / (3.0f64.sqrt() + 1.0));
        let r =
            solve_robustness(&s, NoiseModelKind::Probabilistic, &SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(r.eta, expect, epsilon = 1e-6);
        // Recovered weights are a distribution.
        if let NoisePayload::Probabilities(p) = &r.noise.payload {
            for row in p {
                assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            }
        } else {
            panic!("probabilistic result must carry weights");
        }
    }

    #[test]
    fn qubit_triple_generalised() {
        let s = prime_mub_set(2, 3).unwrap();
        let expect = 0.5 * (1.0 + 1.0 / 3.0f64.sqrt());
        assert_abs_diff_eq!(eta_of(&s, NoiseModelKind::Generalised), expect, epsilon = 1e-6);
    }

    #[test]
    fn mub_mixture_compatibility_threshold() {
        let s = mub_pair(2).unwrap();
        let noise = canonical_noise(NoiseModelKind::Depolarising, &s).measurements;
        let below = crate::noise::mix(&s, &noise, 0.70).unwrap();
        let (jm, parent) = is_jointly_measurable(&below, 1e-7, &SolveOptions::default()).unwrap();
        assert!(jm);
        assert!(parent.is_some());
        let above = crate::noise::mix(&s, &noise, 0.72).unwrap();
        let (jm, _) = is_jointly_measurable(&above, 1e-7, &SolveOptions::default()).unwrap();
        assert!(!jm);
        // At the threshold 1/sqrt2 the mixture is compatible.
        let at = crate::noise::mix(&s, &noise, std::f64::consts::FRAC_1_SQRT_2 - 1e-9).unwrap();
        let (jm, _) = is_jointly_measurable(&at, 1e-6, &SolveOptions::default()).unwrap();
        assert!(jm);
    }

    #[test]
    fn incompatible_mub_pair_detected() {
        let s = mub_pair(2).unwrap();
        let (jm, _) = is_jointly_measurable(&s, 1e-7, &SolveOptions::default()).unwrap();
        assert!(!jm);
    }

    #[test]
    fn certificates_verify_and_tampering_is_flagged() {
        let theta = std::f64::consts::FRAC_PI_6;
        let s = qubit_theta_pair(theta).unwrap();
        let r =
            solve_robustness(&s, NoiseModelKind::Depolarising, &SolveOptions::default()).unwrap();
        let report = verify_result(&s, &r);
        assert!(report.worst() <= 1e-7, "residuals {report:?}");
        assert!(r.dual_objective >= r.eta - 1e-6);

        let mut tampered = r.clone();
        tampered.eta += 0.01;
        let report = verify_result(&s, &tampered);
        assert!(report.primal_marginal > 5e-3);
    }

    #[test]
    fn paper_dual_point_for_theta_family() {
        // The known optimal dual point of the depolarising program on the
        // theta pair: X_a = (1 +- (sz + sx)) / (4 (cos + sin)) and the same
        // for Y with sz - sx.
        let theta = 0.4f64;
        let s = qubit_theta_pair(theta).unwrap();
        let scale = 1.0 / (4.0 * (theta.cos() + theta.sin()));
        let pm = |z: f64, x: f64| {
            let mut m = crate::linalg::CMat::identity(2, 2);
            m[(0, 0)] += crate::linalg::C64::new(z, 0.0);
            m[(1, 1)] -= crate::linalg::C64::new(z, 0.0);
            m[(0, 1)] += crate::linalg::C64::new(x, 0.0);
            m[(1, 0)] += crate::linalg::C64::new(x, 0.0);
            HermitianMatrix::new(m * crate::linalg::C64::new(scale, 0.0)).unwrap()
        };
        let dual = DualCertificate {
            x: vec![
                vec![pm(1.0, 1.0), pm(-1.0, -1.0)],
                vec![pm(1.0, -1.0), pm(-1.0, 1.0)],
            ],
            n: None,
            xi: None,
        };
        let (cone, scalar, objective) =
            check_dual_point(&s, NoiseModelKind::Depolarising, &dual);
        assert!(cone <= 1e-12);
        assert!(scalar <= 1e-12);
        assert_abs_diff_eq!(objective, 1.0 / (theta.cos() + theta.sin()), epsilon = 1e-12);
    }

    #[test]
    fn zero_outcome_padding_random_measure() {
        // Padding with zero outcomes lowers the random robustness.
        let base = mub_pair(2).unwrap();
        let pad = |p: &Povm, n: usize| {
            let mut elements = p.elements().to_vec();
            elements.resize(n, HermitianMatrix::zeros(2));
            Povm::new_unchecked(2, elements).unwrap()
        };
        let padded = MeasurementSet::pair(
            pad(&base.measurements()[0], 4),
            pad(&base.measurements()[1], 4),
        )
        .unwrap();
        let eta_base = eta_of(&base, NoiseModelKind::Random);
        let eta_padded = eta_of(&padded, NoiseModelKind::Random);
        assert!(eta_padded < eta_base - 1e-3);
        // The depolarising value is untouched by zero padding (presolve).
        let eta_d = eta_of(&padded, NoiseModelKind::Depolarising);
        assert_abs_diff_eq!(eta_d, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-6);
    }

    #[test]
    fn appending_a_trivial_measurement_keeps_the_optimum() {
        // Heterogeneous outcome counts at k = 3: a trivial third measurement
        // never changes the depolarising or probabilistic optimum.
        let pair = mub_pair(2).unwrap();
        let extended = MeasurementSet::new(vec![
            pair.measurements()[0].clone(),
            pair.measurements()[1].clone(),
            Povm::trivial(2, 3),
        ])
        .unwrap();
        for kind in [NoiseModelKind::Depolarising, NoiseModelKind::Probabilistic] {
            let r = solve_robustness(&extended, kind, &SolveOptions::default()).unwrap();
            assert_abs_diff_eq!(r.eta, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-6);
            assert_eq!(r.parent.n_outcomes(), 12);
        }
    }

    #[test]
    fn too_large_is_rejected(){
        let s = mub_pair(2).unwrap();
        let opts = SolveOptions { outcome_cap: 3, ..Default::default() };
        assert!(matches!(
            solve_robustness(&s, NoiseModelKind::Random, &opts),
            Err(RobustnessError::TooLarge(4, 3))
        ));
    }
}

#[cfg(test)]
mod feasibility_tests {
    use super::*;
    use crate::bounds::{cloning_bound, cloning_parent, generalised_parent};
    use crate::povm::mub_pair;
    use crate::sdp::BlockValue;
    use approx::assert_abs_diff_eq;

    /// The cloning-based parent is a feasible point of the depolarising
    /// primal at its universal visibility.
    #[test]
    fn cloning_parent_feasible_in_the_lowered_program() {
        let s = mub_pair(3).unwrap();
        let lowered = lower_program(&s, NoiseModelKind::Depolarising).unwrap();
        let (parent, _) =
            cloning_parent(&s.measurements()[0], &s.measurements()[1]).unwrap();
        let eta = cloning_bound(3);
        let mut assignment = Vec::new();
        for &flat in &lowered.kept_flat {
            assignment.push(BlockValue::Matrix(parent.element(flat).clone()));
        }
        assignment.push(BlockValue::Scalars(vec![eta])); // eta
        assignment.push(BlockValue::Scalars(vec![1.0 - eta])); // slack
        let report = lowered.program.check_feasible(&assignment, 1e-10);
        assert!(report.feasible, "max row {:.2e}, cone {:.2e}",
            report.max_row_residual(), report.max_cone_violation());
        assert_abs_diff_eq!(report.objective, eta, epsilon = 1e-12);

        // a scaled-up parent breaks normalisation visibly
        let mut tampered = Vec::new();
        for &flat in &lowered.kept_flat {
            tampered.push(BlockValue::Matrix(parent.element(flat).scale(1.01)));
        }
        tampered.push(BlockValue::Scalars(vec![eta]));
        tampered.push(BlockValue::Scalars(vec![1.0 - eta]));
        let report = lowered.program.check_feasible(&tampered, 1e-10);
        assert!(!report.feasible);
        assert!(report.max_row_residual() > 5e-3);
    }

    /// The dual ansatz of the generalised measure is feasible on a MUB pair
    /// with objective lambda/f.
    #[test]
    fn generalised_dual_ansatz_objective() {
        let s = mub_pair(4).unwrap();
        let q = crate::bounds::compute_quantities(&s);
        let d = 4.0;
        let x: Vec<Vec<HermitianMatrix>> = (0..2)
            .map(|m| {
                (0..4)
                    .map(|a| s.element(m, a).scale(1.0 / (q.f * d)))
                    .collect()
            })
            .collect();
        let n = HermitianMatrix::identity(4).scale(q.lambda / (q.f * d));
        let dual = DualCertificate {
            x,
            n: Some(n),
            xi: None,
        };
        let (cone, scalar, objective) =
            check_dual_point(&s, NoiseModelKind::Generalised, &dual);
        assert!(cone <= 1e-12, "cone {cone:.2e}");
        assert!(scalar <= 1e-12, "scalar {scalar:.2e}");
        assert_abs_diff_eq!(objective, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(objective, q.lambda / q.f, epsilon = 1e-12);
    }

    /// Mixing two compatible pairs stays compatible, witnessed by mixing the
    /// parents.
    #[test]
    fn parent_mixture_witnesses_mixture_compatibility() {
        let s0 = mub_pair(3).unwrap();
        let s1 = {
            let u = crate::linalg::haar_unitary_seeded(3, 99);
            mub_pair(3).unwrap().conjugate_by(&u)
        };
        let noise0 = crate::noise::canonical_noise(NoiseModelKind::Depolarising, &s0);
        let noise1 = crate::noise::canonical_noise(NoiseModelKind::Depolarising, &s1);
        let eta = 0.6;
        let m0 = crate::noise::mix(&s0, &noise0.measurements, eta).unwrap();
        let m1 = crate::noise::mix(&s1, &noise1.measurements, eta).unwrap();
        let (ok0, p0) = is_jointly_measurable(&m0, 1e-7, &SolveOptions::default()).unwrap();
        let (ok1, p1) = is_jointly_measurable(&m1, 1e-7, &SolveOptions::default()).unwrap();
        assert!(ok0 && ok1);
        let mixed_set = m0.mix_with(&m1, 0.5).unwrap();
        let mixed_parent = p0.unwrap().mix_with(&p1.unwrap(), 0.5).unwrap();
        assert!(crate::noise::parent_matches(&mixed_parent, &mixed_set, 1e-6));
    }

    #[test]
    fn jm_membership_found_by_feasibility_solve() {
        use crate::noise::{NoiseInstance, NoisePayload};
        let s = mub_pair(3).unwrap();
        // the anticommutator-based noise pair, handed over without a parent
        let noise = MeasurementSet::new(
            s.measurements()
                .iter()
                .map(|m| {
                    let elements = m
                        .elements()
                        .iter()
                        .map(|e| HermitianMatrix::identity(3).sub(e).scale(0.5))
                        .collect();
                    Povm::new_unchecked(3, elements).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let candidate = NoiseInstance {
            kind: NoiseModelKind::JointlyMeasurable,
            measurements: noise,
            payload: NoisePayload::Explicit,
        };
        assert!(certify_jm_membership(&s, &candidate, &SolveOptions::default()).unwrap());
        // an incompatible candidate is rejected
        let bad = NoiseInstance {
            kind: NoiseModelKind::JointlyMeasurable,
            measurements: s.clone(),
            payload: NoisePayload::Explicit,
        };
        assert!(!certify_jm_membership(&s, &bad, &SolveOptions::default()).unwrap());
    }

    /// The generalised-measure ansatz parent lives in the lowered program's
    /// feasible set too (inequality slacks recovered from the marginals).
    #[test]
    fn program_dump_lists_rows() {
        let s = mub_pair(2).unwrap();
        let lowered = lower_program(&s, NoiseModelKind::Depolarising).unwrap();
        let text = lowered.program.dump();
        assert!(text.contains("Maximize objective"));
        assert!(text.contains("G0"));
        assert!(text.contains("equality rows:"));
        let _ = generalised_parent(&s.measurements()[0], &s.measurements()[1]);
    }
}
