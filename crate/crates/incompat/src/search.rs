//! Randomised search for maximally incompatible measurement sets, the
//! one-parameter qutrit path, and figure-curve tabulation.

use crate::linalg::{haar_unitary, principal_log, C64, CMat, HermitianMatrix};
use crate::noise::NoiseModelKind;
use crate::povm::{MeasurementSet, Povm, PovmError};
use crate::robustness::{solve_robustness, RobustnessError, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Robustness(#[from] RobustnessError),
    #[error(transparent)]
    Povm(#[from] PovmError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Restriction {
    RankOneProjective,
    RankOne,
    GeneralExtremalFree,
}

impl Restriction {
    pub fn parse(text: &str) -> Option<Restriction> {
        match text {
            "rank-one-projective" | "projective" => Some(Restriction::RankOneProjective),
            "rank-one" => Some(Restriction::RankOne),
            "general" | "general-extremal-free" => Some(Restriction::GeneralExtremalFree),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub dim: usize,
    pub outcome_counts: Vec<usize>,
    pub measures: Vec<NoiseModelKind>,
    pub samples: u64,
    pub seed: u64,
    pub restriction: Restriction,
    /// Worker threads; sampling is derived per sample index, so any worker
    /// count reproduces the same records (1 = strictly sequential).
    pub workers: usize,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: u64,
    pub solve: SolveOptions,
    /// Explicit candidates evaluated ahead of the random stream (named
    /// constructions worth comparing against, resumed runs, etc.).
    pub seeded_candidates: Vec<MeasurementSet>,
}

impl SearchConfig {
    pub fn new(dim: usize, outcome_counts: Vec<usize>, measures: Vec<NoiseModelKind>) -> Self {
        SearchConfig {
            dim,
            outcome_counts,
            measures,
            samples: 1000,
            seed: 0,
            restriction: Restriction::RankOneProjective,
            workers: 1,
            checkpoint: None,
            checkpoint_every: 500,
            solve: SolveOptions::default(),
            seeded_candidates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestRecord {
    pub eta: f64,
    pub sample_index: u64,
    pub set_json: String,
}

impl BestRecord {
    pub fn set(&self) -> Result<MeasurementSet, PovmError> {
        MeasurementSet::from_json(&self.set_json)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchRecord {
    pub dim: usize,
    pub outcome_counts: Vec<usize>,
    pub measures: Vec<NoiseModelKind>,
    pub seed: u64,
    pub restriction: Restriction,
    pub samples_done: u64,
    /// Best (lowest) visibility seen per measure; ties resolved toward the
    /// lower sample index, making the record independent of scheduling.
    pub best: Vec<(NoiseModelKind, BestRecord)>,
}

impl SearchRecord {
    /// The search estimate of the most-incompatible value per measure.
    pub fn chi_estimate(&self, kind: NoiseModelKind) -> Option<f64> {
        self.best
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, rec)| rec.eta)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), SearchError> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| SearchError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| SearchError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SearchError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SearchError::Checkpoint(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| SearchError::Checkpoint(e.to_string()))
    }
}

/// Deterministic per-sample generator: the stream index is the sample index,
/// so any scheduling of workers visits identical draws.
fn sample_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// One random measurement set under the configured restriction.
pub fn sample_set(cfg: &SearchConfig, index: u64) -> Result<MeasurementSet, SearchError> {
    let mut rng = sample_rng(cfg.seed, index);
    let d = cfg.dim;
    let mut measurements = Vec::with_capacity(cfg.outcome_counts.len());
    for &n in &cfg.outcome_counts {
        let povm = match cfg.restriction {
            Restriction::RankOneProjective => {
                if n != d {
                    return Err(SearchError::Config(format!(
                        "rank-one projective sampling needs n = d, got n = {n}, d = {d}"
                    )));
                }
                Povm::from_basis(&haar_unitary(d, &mut rng))
            }
            Restriction::RankOne => {
                if n < d {
                    return Err(SearchError::Config(
                        "rank-one POVMs need at least d outcomes".into(),
                    ));
                }
                // Columns of a Haar isometry from C^d into C^n.
                let u = haar_unitary(n, &mut rng);
                let elements = (0..n)
                    .map(|a| {
                        let v = nalgebra::DVector::from_iterator(
                            d,
                            (0..d).map(|i| u[(a, i)].conj()),
                        );
                        let p = HermitianMatrix::projector(&v);
                        let norm2: f64 = (0..d).map(|i| u[(a, i)].norm_sqr()).sum();
                        p.scale(norm2)
                    })
                    .collect();
                Povm::new_unchecked(d, elements)?
            }
            Restriction::GeneralExtremalFree => {
                // Normalised random PSD operators.
                let mut qs = Vec::with_capacity(n);
                let mut total = CMat::zeros(d, d);
                for _ in 0..n {
                    let mut g = CMat::zeros(d, d);
                    for i in 0..d {
                        for j in 0..d {
                            g[(i, j)] = C64::new(
                                rng.gen_range(-1.0..1.0f64),
                                rng.gen_range(-1.0..1.0f64),
                            );
                        }
                    }
                    let q = HermitianMatrix::symmetrize(&g * g.adjoint());
                    total += q.as_matrix();
                    qs.push(q);
                }
                let total = HermitianMatrix::symmetrize(total);
                let spec = total.spectrum();
                let inv_sqrt = spec.apply(|t| 1.0 / t.max(1e-12).sqrt());
                let elements = qs
                    .into_iter()
                    .map(|q| {
                        HermitianMatrix::symmetrize(
                            inv_sqrt.as_matrix() * q.as_matrix() * inv_sqrt.as_matrix(),
                        )
                    })
                    .collect();
                Povm::new_unchecked(d, elements)?
            }
        };
        measurements.push(povm);
    }
    Ok(MeasurementSet::new(measurements)?)
}

fn effective_workers(cfg: &SearchConfig) -> usize {
    let env_cap = std::env::var("INCOMPAT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(usize::MAX);
    cfg.workers.clamp(1, 64).min(env_cap.max(1))
}

/// Randomised lowest-visibility search; resumable from a checkpoint record.
pub fn estimate_chi(
    cfg: &SearchConfig,
    resume: Option<SearchRecord>,
) -> Result<SearchRecord, SearchError> {
    if cfg.samples == 0 {
        return Err(SearchError::Config("sample count must be positive".into()));
    }
    if cfg.measures.is_empty() {
        return Err(SearchError::Config("no measures requested".into()));
    }
    let record = match resume {
        Some(rec) => {
            if rec.dim != cfg.dim
                || rec.outcome_counts != cfg.outcome_counts
                || rec.seed != cfg.seed
                || rec.restriction != cfg.restriction
            {
                return Err(SearchError::Config(
                    "checkpoint does not match the configuration".into(),
                ));
            }
            rec
        }
        None => SearchRecord {
            dim: cfg.dim,
            outcome_counts: cfg.outcome_counts.clone(),
            measures: cfg.measures.clone(),
            seed: cfg.seed,
            restriction: cfg.restriction,
            samples_done: 0,
            best: Vec::new(),
        },
    };
    let start = record.samples_done;
    if start >= cfg.samples {
        return Ok(record);
    }

    // Named candidates first; they carry indices past the random stream so
    // ties and resume arithmetic stay untouched.
    let mut record = record;
    if start == 0 {
        for (ci, set) in cfg.seeded_candidates.iter().enumerate() {
            for &kind in &cfg.measures {
                let r = solve_robustness(set, kind, &cfg.solve)?;
                let idx = u64::MAX - ci as u64;
                let better = match record.best.iter().position(|(k, _)| *k == kind) {
                    Some(pos) => r.eta < record.best[pos].1.eta - 1e-15,
                    None => true,
                };
                if better {
                    let entry = BestRecord {
                        eta: r.eta,
                        sample_index: idx,
                        set_json: set.to_json(),
                    };
                    match record.best.iter().position(|(k, _)| *k == kind) {
                        Some(pos) => record.best[pos].1 = entry,
                        None => record.best.push((kind, entry)),
                    }
                }
            }
        }
    }

    let next = AtomicU64::new(start);
    let shared = Mutex::new(record);
    let workers = effective_workers(cfg);
    let error: Mutex<Option<SearchError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cfg.samples {
                    break;
                }
                let outcome = (|| -> Result<Vec<(NoiseModelKind, f64, MeasurementSet)>, SearchError> {
                    let set = sample_set(cfg, i)?;
                    let mut etas = Vec::new();
                    for &kind in &cfg.measures {
                        let r = solve_robustness(&set, kind, &cfg.solve)?;
                        etas.push((kind, r.eta, set.clone()));
                    }
                    Ok(etas)
                })();
                match outcome {
                    Ok(etas) => {
                        let mut rec = shared.lock().unwrap();
                        for (kind, eta, set) in etas {
                            let better = match rec.best.iter().position(|(k, _)| *k == kind) {
                                Some(pos) => {
                                    let cur = &rec.best[pos].1;
                                    if eta < cur.eta - 1e-15
                                        || (eta <= cur.eta + 1e-15 && i < cur.sample_index)
                                    {
                                        Some(pos)
                                    } else {
                                        None
                                    }
                                }
                                None => {
                                    rec.best.push((
                                        kind,
                                        BestRecord {
                                            eta,
                                            sample_index: i,
                                            set_json: set.to_json(),
                                        },
                                    ));
                                    None
                                }
                            };
                            if let Some(pos) = better {
                                rec.best[pos].1 = BestRecord {
                                    eta,
                                    sample_index: i,
                                    set_json: set.to_json(),
                                };
                            }
                        }
                        rec.samples_done = rec.samples_done.max(i + 1);
                        if let Some(path) = &cfg.checkpoint {
                            if cfg.checkpoint_every > 0
                                && (i + 1) % cfg.checkpoint_every == 0
                            {
                                let _ = rec.save(path);
                            }
                        }
                    }
                    Err(e) => {
                        *error.lock().unwrap() = Some(e);
                        next.store(cfg.samples, Ordering::SeqCst);
                        break;
                    }
                }
            });
        }
    });

    if let Some(e) = error.into_inner().unwrap() {
        return Err(e);
    }
    let mut record = shared.into_inner().unwrap();
    record.samples_done = cfg.samples;
    record
        .best
        .sort_by_key(|(k, _)| NoiseModelKind::ALL.iter().position(|x| x == k));
    if let Some(path) = &cfg.checkpoint {
        record.save(path)?;
    }
    Ok(record)
}

/// Second basis of the first path leg, `theta` in `[pi/4, pi/2]`: from the
/// deviated basis at `pi/4` to the embedded qubit MUB at `pi/2`.
pub fn devil_leg_theta(theta: f64) -> Result<MeasurementSet, SearchError> {
    if !(std::f64::consts::FRAC_PI_4 - 1e-12..=std::f64::consts::FRAC_PI_2 + 1e-12)
        .contains(&theta)
    {
        return Err(SearchError::Config(format!(
            "theta = {theta} outside [pi/4, pi/2]"
        )));
    }
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let (sin, cos) = (theta.sin(), theta.cos());
    let u = CMat::from_row_slice(
        3,
        3,
        &[
            C64::new(inv, 0.0),
            C64::new(sin * inv, 0.0),
            C64::new(cos * inv, 0.0),
            C64::new(inv, 0.0),
            C64::new(-sin * inv, 0.0),
            C64::new(-cos * inv, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-cos, 0.0),
            C64::new(sin, 0.0),
        ],
    );
    Ok(MeasurementSet::pair(Povm::computational(3), Povm::from_basis(&u))?)
}

/// The unitary connecting the embedded qubit MUB basis to the Fourier MUB
/// basis on the second path leg.
pub fn devil_connecting_unitary() -> CMat {
    let s2 = std::f64::consts::SQRT_2;
    let s3 = 3.0f64.sqrt();
    CMat::from_row_slice(
        3,
        3,
        &[
            C64::new(s2 / s3, 0.0),
            C64::new(s3 / (6.0 * s2), 3.0 / (6.0 * s2)),
            C64::new(s3 / (6.0 * s2), -3.0 / (6.0 * s2)),
            C64::new(0.0, 0.0),
            C64::new(s3 / (2.0 * s2), -1.0 / (2.0 * s2)),
            C64::new(s3 / (2.0 * s2), 1.0 / (2.0 * s2)),
            C64::new(1.0 / s3, 0.0),
            C64::new(-s3 / 6.0, -0.5),
            C64::new(-s3 / 6.0, 0.5),
        ],
    )
}

/// The MUB endpoint of the path (a specific phase convention of the Fourier
/// pair).
pub fn devil_mub_pair() -> MeasurementSet {
    let s3 = 3.0f64.sqrt();
    let w = |k: i32| C64::from_polar(1.0 / s3, 2.0 * std::f64::consts::PI * k as f64 / 3.0);
    let u = CMat::from_row_slice(
        3,
        3,
        &[w(0), w(0), w(0), w(0), w(2), w(1), w(0), w(1), w(2)],
    );
    MeasurementSet::pair(Povm::computational(3), Povm::from_basis(&u)).unwrap()
}

/// Second basis of the matrix-logarithm leg, `t` in `[0, 1]`:
/// `e^{itH} B e^{-itH}` with `e^{iH}` the connecting unitary.
pub fn devil_leg_log(t: f64) -> Result<MeasurementSet, SearchError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(SearchError::Config(format!("t = {t} outside [0, 1]")));
    }
    // The connecting unitary acts by adjoint conjugation on the basis.
    let v = devil_connecting_unitary();
    let h = principal_log(&v).map_err(|e| SearchError::Config(e.to_string()))?;
    let rot = h.exp_i(-t);
    let base = devil_leg_theta(std::f64::consts::FRAC_PI_2)?;
    Ok(MeasurementSet::pair(
        Povm::computational(3),
        base.measurements()[1].conjugate_by(&rot),
    )?)
}

/// The full path from the deviated basis through the embedded qubit MUB to
/// the Fourier MUB. The parameter runs over `[0, 2]`: the rotation leg on
/// `[0, 1]`, the logarithm leg on `[1, 2]`.
pub fn devil_path(resolution: usize) -> Result<Vec<(f64, MeasurementSet)>, SearchError> {
    if resolution < 2 {
        return Err(SearchError::Config("resolution must be at least 2".into()));
    }
    let mut out = Vec::new();
    for i in 0..resolution {
        let frac = i as f64 / (resolution - 1) as f64;
        let theta = std::f64::consts::FRAC_PI_4 * (1.0 + frac);
        out.push((frac, devil_leg_theta(theta)?));
    }
    for i in 1..resolution {
        let t = i as f64 / (resolution - 1) as f64;
        out.push((1.0 + t, devil_leg_log(t)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureTarget {
    Runex,
    Devil,
    Chi,
}

impl FigureTarget {
    pub fn parse(text: &str) -> Option<FigureTarget> {
        match text {
            "fig-runex" | "fig_runex" => Some(FigureTarget::Runex),
            "fig-devil" | "fig_devil" => Some(FigureTarget::Devil),
            "fig-chi" | "fig_chi" => Some(FigureTarget::Chi),
            _ => None,
        }
    }
}

/// CSV-ready table: named columns, one row per grid point. Missing entries
/// are `None` (empty CSV cells).
#[derive(Debug, Clone, Serialize)]
pub struct FigureData {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl FigureData {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Some(x) => format!("{x:.11e}"),
                    None => String::new(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn figure_curves(
    target: FigureTarget,
    resolution: usize,
    opts: &SolveOptions,
) -> Result<FigureData, SearchError> {
    if resolution < 2 {
        return Err(SearchError::Config("resolution must be at least 2".into()));
    }
    match target {
        FigureTarget::Runex => {
            let columns = vec![
                "theta".into(),
                "closed_drp".into(),
                "closed_jm".into(),
                "closed_g".into(),
                "sdp_d".into(),
                "sdp_r".into(),
                "sdp_p".into(),
                "sdp_jm".into(),
                "sdp_g".into(),
            ];
            let mut rows = Vec::new();
            for i in 0..resolution {
                let theta =
                    std::f64::consts::FRAC_PI_4 * i as f64 / (resolution - 1) as f64;
                let s = crate::povm::qubit_theta_pair(theta)?;
                let cs = theta.cos() + theta.sin();
                let mut row = vec![
                    Some(theta),
                    Some(1.0 / cs),
                    Some(2.0 / (1.0 + cs)),
                    Some((std::f64::consts::SQRT_2 + 1.0) / (std::f64::consts::SQRT_2 + cs)),
                ];
                for kind in NoiseModelKind::ALL {
                    row.push(Some(solve_robustness(&s, kind, opts)?.eta));
                }
                rows.push(row);
            }
            Ok(FigureData { columns, rows })
        }
        FigureTarget::Devil => {
            let columns = vec![
                "param".into(),
                "eta_d".into(),
                "eta_p".into(),
                "eta_jm".into(),
                "eta_g".into(),
            ];
            let mut rows = Vec::new();
            for (param, s) in devil_path(resolution)? {
                let mut row = vec![Some(param)];
                for kind in [
                    NoiseModelKind::Depolarising,
                    NoiseModelKind::Probabilistic,
                    NoiseModelKind::JointlyMeasurable,
                    NoiseModelKind::Generalised,
                ] {
                    row.push(Some(solve_robustness(&s, kind, opts)?.eta));
                }
                rows.push(row);
            }
            Ok(FigureData { columns, rows })
        }
        FigureTarget::Chi => {
            let columns = vec![
                "d".into(),
                "mub_drp".into(),
                "mub_jm".into(),
                "mub_g".into(),
                "qmub_d".into(),
                "p_best".into(),
                "lower_d".into(),
            ];
            let d_max = (1 + resolution).min(16);
            let mut rows = Vec::new();
            for d in 2..=d_max {
                let df = d as f64;
                let qmub = 0.5 * (1.0 + std::f64::consts::SQRT_2 / (df + std::f64::consts::SQRT_2));
                let p_best = if d == 2 {
                    Some(std::f64::consts::FRAC_1_SQRT_2)
                } else if d % 2 == 0 {
                    Some(qmub)
                } else if d <= 5 {
                    // deviated qutrit block plus qubit MUB blocks
                    let s = odd_p_construction(d)?;
                    Some(solve_robustness(&s, NoiseModelKind::Probabilistic, opts)?.eta)
                } else {
                    None
                };
                rows.push(vec![
                    Some(df),
                    Some(crate::bounds::mub_closed_form(d, NoiseModelKind::Depolarising).unwrap()),
                    Some(crate::bounds::mub_closed_form(d, NoiseModelKind::JointlyMeasurable).unwrap()),
                    Some(crate::bounds::mub_closed_form(d, NoiseModelKind::Generalised).unwrap()),
                    Some(if d == 2 { std::f64::consts::FRAC_1_SQRT_2 } else { qmub }),
                    p_best,
                    Some(
                        crate::bounds::universal_lower_bound(
                            NoiseModelKind::Depolarising,
                            d,
                            &[d, d],
                            2,
                        )
                        .unwrap(),
                    ),
                ]);
            }
            Ok(FigureData { columns, rows })
        }
    }
}

/// The odd-dimension construction outperforming MUBs for the probabilistic
/// measure: the deviated qutrit pair on one block, qubit MUBs on the rest.
fn odd_p_construction(d: usize) -> Result<MeasurementSet, SearchError> {
    if d == 3 {
        return Ok(crate::povm::dev3_pair());
    }
    if d % 2 == 0 || d < 3 {
        return Err(SearchError::Config("odd d >= 3 required".into()));
    }
    let mut u = CMat::identity(d, d);
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let dev_u = CMat::from_row_slice(
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
    for i in 0..3 {
        for j in 0..3 {
            u[(i, j)] = dev_u[(i, j)];
        }
    }

    for blk in 0..(d - 3) / 2 {
        let o = 3 + 2 * blk;
        u[(o, o)] = C64::new(inv, 0.0);
        u[(o + 1, o)] = C64::new(inv, 0.0);
        u[(o, o + 1)] = C64::new(inv, 0.0);
        u[(o + 1, o + 1)] = C64::new(-inv, 0.0);
    }
    Ok(MeasurementSet::pair(
        Povm::computational(d),
        Povm::from_basis(&u),
    )?)
}
