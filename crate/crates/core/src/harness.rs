//! Parameter sweeps over synthetic scenes, emitted as long-format CSV.
//!
//! Each scene is generated once per (noise, shift, index) and shared by
//! every algorithm and secant length, so columns compare like with like.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    decompose_f, rotation_error, translation_error, ModelKind, Point2, TimeModel, TwoViewModel,
};
use crate::robust::{build_pool, ransac_estimate, residuals, RansacParams, SolverKind};
use crate::solvers::SolverCandidate;
use crate::sync::{iterative_sync, Direction, IterParams, SyncError};
use crate::synth::{generate_scene, Scene, SceneSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep config: {0}")]
    Schema(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the iterative search picks its range of secant lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PRange {
    /// `d = 2^0 ..= 2^p_max`.
    Max(u32),
    /// The tightest range with `2^p_min <= |beta_gt| < 2^p_max`.
    Bracket,
}

impl PRange {
    pub fn bounds(&self, beta_gt: f64) -> (u32, u32) {
        match *self {
            PRange::Max(p) => (0, p),
            PRange::Bracket => {
                let b = beta_gt.abs();
                if b < 1.0 {
                    (0, 0)
                } else {
                    let lo = b.log2().floor() as u32;
                    (lo, lo + 1)
                }
            }
        }
    }
}

/// A solver in a single RANSAC run, or inside the iterative search.
/// Written as `F-GEP`, `F-GEP-iter-pmax6` or `F-GEP-iter-pmaxvar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    Single(SolverKind),
    Iterative { kind: SolverKind, range: PRange },
}

impl Algorithm {
    pub fn kind(&self) -> SolverKind {
        match *self {
            Algorithm::Single(k) | Algorithm::Iterative { kind: k, .. } => k,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Single(k) => f.write_str(k.name()),
            Algorithm::Iterative {
                kind,
                range: PRange::Max(p),
            } => write!(f, "{}-iter-pmax{p}", kind.name()),
            Algorithm::Iterative {
                kind,
                range: PRange::Bracket,
            } => write!(f, "{}-iter-pmaxvar", kind.name()),
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || format!("unknown algorithm `{s}`");
        let Some((solver, rest)) = s.split_once("-iter-") else {
            return SolverKind::from_name(s)
                .map(Algorithm::Single)
                .ok_or_else(unknown);
        };
        let kind = SolverKind::from_name(solver).ok_or_else(unknown)?;
        let range = match rest.strip_prefix("pmax").ok_or_else(unknown)? {
            "var" => PRange::Bracket,
            p => PRange::Max(p.parse().map_err(|_| unknown())?),
        };
        Ok(Algorithm::Iterative { kind, range })
    }
}

impl TryFrom<String> for Algorithm {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
    /// Secant lengths for single-run algorithms.
    pub ds: Vec<i64>,
    pub scenes: usize,
    pub noise: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub outlier_fraction: f64,
    /// Template; seed, shift and noise are set per scene.
    pub scene: SceneSpec,
    /// Template; seed, `d` and `beta0` are set per run.
    pub ransac: RansacParams,
    pub k_max: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            betas: Vec::new(),
            ds: vec![1],
            scenes: 0,
            noise: vec![0.5],
            algorithms: Vec::new(),
            seed: 0,
            outlier_fraction: 0.0,
            scene: SceneSpec::default(),
            ransac: RansacParams::default(),
            k_max: IterParams::default().k_max,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Schema(m.to_string()));
        if self.betas.is_empty() {
            return bad("`betas` must list at least one shift");
        }
        if self.scenes == 0 {
            return bad("`scenes` must be at least 1");
        }
        if self.noise.is_empty() {
            return bad("`noise` must list at least one level");
        }
        if self.algorithms.is_empty() {
            return bad("`algorithms` must list at least one algorithm");
        }
        let single = self
            .algorithms
            .iter()
            .any(|a| matches!(a, Algorithm::Single(_)));
        if single && self.ds.is_empty() {
            return bad("`ds` must list at least one secant length");
        }
        if self.ds.contains(&0) {
            return bad("`ds` must not contain 0");
        }
        if self.betas.iter().chain(&self.noise).any(|x| !x.is_finite()) {
            return bad("shifts and noise levels must be finite");
        }
        if self.noise.iter().any(|&s| s < 0.0) {
            return bad("noise levels must be non-negative");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("`outlier_fraction` must be in [0, 1)");
        }
        if self.k_max == 0 {
            return bad("`k_max` must be at least 1");
        }
        self.ransac
            .validate()
            .map_err(|e| HarnessError::Schema(e.to_string()))
    }
}

/// One run of one algorithm on one scene. Empty fields mean "not
/// applicable" or "failed" (see `status`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scene_id: usize,
    pub beta_gt: f64,
    pub d: Option<i64>,
    pub algorithm: String,
    pub noise: f64,
    pub beta_est: Option<f64>,
    pub inlier_fraction: Option<f64>,
    pub rot_err_deg: Option<f64>,
    pub trans_err: Option<f64>,
    pub ransac_count: usize,
    pub accepted_steps: Option<usize>,
    pub status: String,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn abs_error(&self) -> Option<f64> {
        self.beta_est.map(|b| (b - self.beta_gt).abs())
    }
}

/// One attempt of an iterative run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub scene_id: usize,
    pub beta_gt: f64,
    pub algorithm: String,
    pub noise: f64,
    pub attempt: usize,
    pub k: usize,
    pub d: i64,
    pub direction: Option<Direction>,
    pub inliers: usize,
    pub beta_k: Option<f64>,
    pub accepted: bool,
    pub offset: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub logs: Vec<LogRow>,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

/// Seed of scene `index` in the (noise, shift) cell.
pub fn scene_seed(master: u64, noise_idx: usize, beta_idx: usize, index: usize) -> u64 {
    derive(master, &[noise_idx as u64, beta_idx as u64, index as u64])
}

/// Rotation and translation error of an F model against the scene's true
/// relative pose, using the given correspondences to resolve cheirality.
pub fn pose_errors(
    model: &TwoViewModel,
    scene: &Scene,
    probes: &[(Point2, Point2)],
) -> Option<(f64, f64)> {
    if model.kind() != ModelKind::Fundamental {
        return None;
    }
    let cams = &scene.truth.cameras;
    let (r, t) = decompose_f(model, &cams[0].k, &cams[1].k, probes).ok()?;
    let (r_gt, t_gt) = scene.truth.relative_pose();
    Some((
        rotation_error(&r, &r_gt),
        translation_error(&t, &t_gt).ok()?,
    ))
}

/// Inlier correspondences of a candidate on a pool, as point pairs.
fn inlier_probes(
    cand: &SolverCandidate,
    scene: &Scene,
    beta0: f64,
    rho: f64,
    d: i64,
    threshold: f64,
) -> Vec<(Point2, Point2)> {
    let Ok(anchor) = TimeModel::new(beta0, rho) else {
        return Vec::new();
    };
    let Ok(pool) = build_pool(&scene.cam1, &scene.cam2, &anchor, d) else {
        return Vec::new();
    };
    residuals(cand, &pool.items)
        .iter()
        .zip(&pool.items)
        .filter(|(r, _)| **r <= threshold)
        .map(|(_, c)| (c.x1(), c.predict(cand.beta)))
        .collect()
}

struct Job {
    noise_idx: usize,
    beta_idx: usize,
    index: usize,
}

fn failed_row(base: &SweepRow, msg: impl fmt::Display) -> SweepRow {
    SweepRow {
        status: format!("failed: {msg}"),
        ..base.clone()
    }
}

fn run_scene(cfg: &SweepConfig, job: &Job) -> SweepOutput {
    let seed = scene_seed(cfg.seed, job.noise_idx, job.beta_idx, job.index);
    let beta_gt = cfg.betas[job.beta_idx];
    let noise = cfg.noise[job.noise_idx];
    let spec = SceneSpec {
        seed,
        beta_gt,
        noise_sigma: noise,
        ..cfg.scene.clone()
    };
    let scene = generate_scene(&spec).and_then(|s| {
        if cfg.outlier_fraction > 0.0 {
            s.with_outliers(cfg.outlier_fraction, mix(seed))
        } else {
            Ok(s)
        }
    });
    let mut out = SweepOutput::default();
    for (alg_idx, alg) in cfg.algorithms.iter().enumerate() {
        let ds: Vec<Option<i64>> = match alg {
            Algorithm::Single(_) => cfg.ds.iter().map(|&d| Some(d)).collect(),
            Algorithm::Iterative { .. } => vec![None],
        };
        for d in ds {
            let base = SweepRow {
                scene_id: job.index,
                beta_gt,
                d,
                algorithm: alg.to_string(),
                noise,
                beta_est: None,
                inlier_fraction: None,
                rot_err_deg: None,
                trans_err: None,
                ransac_count: 0,
                accepted_steps: None,
                status: "ok".to_string(),
            };
            let scene = match &scene {
                Ok(s) => s,
                Err(e) => {
                    out.rows.push(failed_row(&base, e));
                    continue;
                }
            };
            let run_seed = derive(seed, &[alg_idx as u64, d.unwrap_or(0) as u64]);
            let ransac = RansacParams {
                seed: run_seed,
                rho: spec.rho,
                ..cfg.ransac
            };
            match *alg {
                Algorithm::Single(kind) => {
                    let d = d.expect("single runs have a secant length");
                    let params = RansacParams { d, ..ransac };
                    match ransac_estimate(&scene.cam1, &scene.cam2, kind, &params) {
                        Ok(r) => {
                            let probes: Vec<(Point2, Point2)> = r
                                .correspondences
                                .iter()
                                .zip(&r.inlier_mask)
                                .filter(|(_, m)| **m)
                                .map(|(c, _)| (c.x1(), c.predict(r.best.beta)))
                                .collect();
                            let pose = pose_errors(&r.best.model, scene, &probes);
                            out.rows.push(SweepRow {
                                beta_est: Some(r.best.beta),
                                inlier_fraction: Some(r.inlier_fraction()),
                                rot_err_deg: pose.map(|p| p.0),
                                trans_err: pose.map(|p| p.1),
                                ransac_count: 1,
                                ..base
                            });
                        }
                        Err(e) => out.rows.push(SweepRow {
                            ransac_count: 1,
                            ..failed_row(&base, e)
                        }),
                    }
                }
                Algorithm::Iterative { kind, range } => {
                    let (p_min, p_max) = range.bounds(beta_gt);
                    let params = IterParams {
                        k_max: cfg.k_max,
                        p_min,
                        p_max,
                        ransac,
                        kind,
                    };
                    let (run, log) = match iterative_sync(&scene.cam1, &scene.cam2, &params) {
                        Ok(run) => {
                            let log = run.iterations.clone();
                            (Ok(run), log)
                        }
                        Err(SyncError::NeverImproved { log }) => {
                            let n = log.len();
                            (
                                Err((SyncError::NeverImproved { log: Vec::new() }, 2 * n)),
                                Vec::new(),
                            )
                        }
                        Err(e) => (Err((e, 0)), Vec::new()),
                    };
                    out.logs.extend(log.iter().map(|l| LogRow {
                        scene_id: job.index,
                        beta_gt,
                        algorithm: alg.to_string(),
                        noise,
                        attempt: l.attempt,
                        k: l.k,
                        d: l.d,
                        direction: l.direction,
                        inliers: l.inlier_count,
                        beta_k: l.beta_k,
                        accepted: l.accepted,
                        offset: l.j_after,
                    }));
                    match run {
                        Ok(run) => {
                            let cand = SolverCandidate {
                                beta: run.beta_total,
                                model: run.model,
                                algebraic_residual: 0.0,
                                imag_leak: 0.0,
                            };
                            let probes = inlier_probes(
                                &cand,
                                scene,
                                run.anchor_beta,
                                spec.rho,
                                run.anchor_d,
                                ransac.threshold,
                            );
                            let pose = pose_errors(&run.model, scene, &probes);
                            out.rows.push(SweepRow {
                                beta_est: Some(run.beta_total),
                                inlier_fraction: Some(
                                    run.inlier_count as f64 / run.total.max(1) as f64,
                                ),
                                rot_err_deg: pose.map(|p| p.0),
                                trans_err: pose.map(|p| p.1),
                                ransac_count: run.ransac_invocations,
                                accepted_steps: Some(run.accepted_steps()),
                                ..base
                            });
                        }
                        Err((e, count)) => out.rows.push(SweepRow {
                            ransac_count: count,
                            ..failed_row(&base, e)
                        }),
                    }
                }
            }
        }
    }
    out
}

/// Runs the whole grid. Cells run in parallel; the output order is
/// noise, shift, scene, algorithm, secant length regardless of scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput, HarnessError> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for noise_idx in 0..cfg.noise.len() {
        for beta_idx in 0..cfg.betas.len() {
            for index in 0..cfg.scenes {
                jobs.push(Job {
                    noise_idx,
                    beta_idx,
                    index,
                });
            }
        }
    }
    let parts: Vec<SweepOutput> = jobs.par_iter().map(|j| run_scene(cfg, j)).collect();
    let mut out = SweepOutput::default();
    for p in parts {
        out.rows.extend(p.rows);
        out.logs.extend(p.logs);
    }
    Ok(out)
}

pub fn write_rows<T: Serialize>(writer: impl Write, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Median of the finite values; `None` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for name in [
            "F-GEP",
            "H-min",
            "F-7pt",
            "F-min-iter-pmax6",
            "F-GEP-iter-pmaxvar",
        ] {
            let a: Algorithm = name.parse().unwrap();
            assert_eq!(a.to_string(), name);
        }
        assert!("F-GEP-iter-x".parse::<Algorithm>().is_err());
        assert!("G-GEP".parse::<Algorithm>().is_err());
    }

    #[test]
    fn bracket_contains_shift() {
        for b in [1.0, 1.5, 2.0, 7.9, 8.0, 50.0, -12.0] {
            let (lo, hi) = PRange::Bracket.bounds(b);
            assert!(2f64.powi(lo as i32) <= b.abs() && b.abs() < 2f64.powi(hi as i32));
        }
        assert_eq!(PRange::Bracket.bounds(0.3), (0, 0));
    }

    #[test]
    fn empty_grid_is_a_schema_error() {
        let err = SweepConfig::default().validate().unwrap_err();
        assert!(matches!(err, HarnessError::Schema(_)));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median([3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median([4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median([]), None);
    }
}
