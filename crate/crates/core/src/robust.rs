//! Seeded RANSAC over linearized correspondences. Hypotheses `(beta, model)`
//! are scored on every correspondence at the point predicted by
//! `u + beta * v`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    linearize, GeometryError, LinearizedCorrespondence, ModelScorer, TimeModel, Trajectory,
};
pub use crate::solvers::SolverKind;
use crate::solvers::{refit, CorrSet, SolverCandidate, SolverError, SolverOptions};

/// Iterations evaluated per parallel batch. Results are reduced in
/// iteration order, so this only affects wasted work past the stop.
const BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RansacError {
    #[error("invalid RANSAC parameters: {0}")]
    InvalidParams(&'static str),
    #[error("need at least {needed} correspondences, found {available}")]
    NotEnoughCorrespondences { needed: usize, available: usize },
    #[error("every sampled set was degenerate")]
    AllDegenerate,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Inlier threshold in pixels.
    pub threshold: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub seed: u64,
    /// Secant length in camera-2 frames; negative looks backwards.
    pub d: i64,
    /// Shift the linearization is anchored at.
    pub beta0: f64,
    pub rho: f64,
    pub solver: SolverOptions,
    /// Re-linearize at the winning shift before computing the final mask.
    pub reanchor: bool,
    /// Re-estimate the winner by least squares on its inliers, keeping the
    /// result while it does not lose inliers.
    pub refine: bool,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            max_iterations: 1000,
            confidence: 0.995,
            seed: 0,
            d: 1,
            beta0: 0.0,
            rho: 1.0,
            solver: SolverOptions::default(),
            reanchor: false,
            refine: false,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), RansacError> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(RansacError::InvalidParams("threshold must be positive"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(RansacError::InvalidParams("confidence must be in (0, 1)"));
        }
        if self.d == 0 {
            return Err(RansacError::InvalidParams("d must be non-zero"));
        }
        if self.max_iterations == 0 {
            return Err(RansacError::InvalidParams(
                "max_iterations must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub best: SolverCandidate,
    /// One entry per scored correspondence.
    pub inlier_mask: Vec<bool>,
    pub inlier_count: usize,
    /// Iterations drawn, degenerate ones included.
    pub iterations_run: usize,
    /// The scored correspondences, aligned with `inlier_mask`.
    pub correspondences: Vec<LinearizedCorrespondence>,
}

impl RansacResult {
    pub fn total(&self) -> usize {
        self.inlier_mask.len()
    }

    pub fn inlier_fraction(&self) -> f64 {
        if self.inlier_mask.is_empty() {
            0.0
        } else {
            self.inlier_count as f64 / self.inlier_mask.len() as f64
        }
    }
}

/// Inlier count of one candidate generated during the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditEntry {
    pub iteration: usize,
    pub beta: f64,
    pub inliers: usize,
}

/// Correspondences available to a RANSAC run: all of them are scored, only
/// those linearized with the requested `d` are sampled.
#[derive(Debug, Clone)]
pub struct CorrespondencePool {
    pub items: Vec<LinearizedCorrespondence>,
    pub samplable: Vec<usize>,
}

/// Pairs tracks by id and linearizes every camera-1 sample at `anchor`.
/// Samples whose forward window is missing fall back to the opposite
/// direction for scoring only.
pub fn build_pool(
    cam1: &[Trajectory],
    cam2: &[Trajectory],
    anchor: &TimeModel,
    d: i64,
) -> Result<CorrespondencePool, RansacError> {
    if d == 0 {
        return Err(GeometryError::ZeroInterpolationDistance.into());
    }
    let mut items = Vec::new();
    let mut samplable = Vec::new();
    for t1 in cam1 {
        let Some(t2) = cam2.iter().find(|t| t.track_id() == t1.track_id()) else {
            continue;
        };
        for s in t1.samples() {
            if let Ok(c) = linearize(t2, s, anchor, d) {
                samplable.push(items.len());
                items.push(c);
            } else if let Ok(c) = linearize(t2, s, anchor, -d) {
                items.push(c);
            }
        }
    }
    Ok(CorrespondencePool { items, samplable })
}

/// Residuals of `cand` on every correspondence.
pub fn residuals(cand: &SolverCandidate, items: &[LinearizedCorrespondence]) -> Vec<f64> {
    match ModelScorer::new(&cand.model) {
        Ok(scorer) => items
            .iter()
            .map(|c| scorer.residual(&c.x1(), &c.predict(cand.beta)))
            .collect(),
        Err(_) => vec![f64::INFINITY; items.len()],
    }
}

#[derive(Debug, Clone, Copy)]
struct Score {
    inliers: usize,
    residual_sum: f64,
}

impl Score {
    /// Total order: more inliers, then smaller residual sum.
    fn beats(&self, other: &Score) -> bool {
        self.inliers > other.inliers
            || (self.inliers == other.inliers && self.residual_sum < other.residual_sum)
    }
}

fn score(cand: &SolverCandidate, items: &[LinearizedCorrespondence], threshold: f64) -> Score {
    let Ok(scorer) = ModelScorer::new(&cand.model) else {
        return Score {
            inliers: 0,
            residual_sum: f64::INFINITY,
        };
    };
    let mut inliers = 0;
    let mut residual_sum = 0.0;
    for c in items {
        let r = scorer.residual(&c.x1(), &c.predict(cand.beta));
        if r <= threshold {
            inliers += 1;
            residual_sum += r;
        }
    }
    Score {
        inliers,
        residual_sum,
    }
}

enum Outcome {
    Degenerate,
    Hypotheses(Vec<(SolverCandidate, Score)>),
}

fn run_iteration(
    iteration: usize,
    kind: SolverKind,
    pool: &CorrespondencePool,
    params: &RansacParams,
) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ iteration as u64);
    let picks = sample(&mut rng, pool.samplable.len(), kind.sample_size());
    let items = picks
        .iter()
        .map(|k| pool.items[pool.samplable[k]])
        .collect();
    let Ok(corr) = CorrSet::new(items) else {
        return Outcome::Degenerate;
    };
    match kind.solve(&corr, &params.solver) {
        Ok(cands) => Outcome::Hypotheses(
            cands
                .into_iter()
                .map(|c| {
                    let s = score(&c, &pool.items, params.threshold);
                    (c, s)
                })
                .collect(),
        ),
        Err(SolverError::NoRealSolution) => Outcome::Hypotheses(Vec::new()),
        Err(_) => Outcome::Degenerate,
    }
}

/// Iterations needed to draw an all-inlier sample with the given confidence.
fn required_iterations(inlier_ratio: f64, sample_size: usize, confidence: f64) -> f64 {
    let good = inlier_ratio.powi(sample_size as i32);
    if good <= 0.0 {
        f64::INFINITY
    } else if good >= 1.0 {
        0.0
    } else {
        (1.0 - confidence).ln() / (1.0 - good).ln()
    }
}

/// Hypothesize-and-verify estimation of `(beta, model)` from two camera
/// track sets matched by track id.
pub fn ransac_estimate(
    cam1: &[Trajectory],
    cam2: &[Trajectory],
    kind: SolverKind,
    params: &RansacParams,
) -> Result<RansacResult, RansacError> {
    ransac_estimate_audited(cam1, cam2, kind, params).map(|(r, _)| r)
}

/// [`ransac_estimate`] that also returns the inlier count of every
/// candidate it generated.
pub fn ransac_estimate_audited(
    cam1: &[Trajectory],
    cam2: &[Trajectory],
    kind: SolverKind,
    params: &RansacParams,
) -> Result<(RansacResult, Vec<AuditEntry>), RansacError> {
    params.validate()?;
    let anchor = TimeModel::new(params.beta0, params.rho)?;
    let pool = build_pool(cam1, cam2, &anchor, params.d)?;
    let (result, audit) = ransac_on_pool(&pool, kind, params)?;
    if !params.reanchor {
        return Ok((result, audit));
    }
    // secants taken next to the winning shift predict the camera-2 point
    // with less curvature error
    let anchor = TimeModel::new(result.best.beta, params.rho)?;
    let pool = build_pool(cam1, cam2, &anchor, params.d)?;
    let mut best = (
        result.best,
        score(&result.best, &pool.items, params.threshold),
    );
    if params.refine {
        best = refine(best, kind, &pool.items, params.threshold);
    }
    let result = finalize(best.0, pool.items, result.iterations_run, params.threshold);
    Ok((result, audit))
}

/// Runs the search on a prepared pool (`reanchor` is ignored here).
pub fn ransac_on_pool(
    pool: &CorrespondencePool,
    kind: SolverKind,
    params: &RansacParams,
) -> Result<(RansacResult, Vec<AuditEntry>), RansacError> {
    params.validate()?;
    let m = kind.sample_size();
    if pool.samplable.len() < m {
        return Err(RansacError::NotEnoughCorrespondences {
            needed: m,
            available: pool.samplable.len(),
        });
    }
    let total = pool.items.len();
    let mut best: Option<(SolverCandidate, Score)> = None;
    let mut audit = Vec::new();
    let mut valid = 0usize;
    let mut drawn = 0usize;
    let mut needed = f64::INFINITY;
    'search: while drawn < params.max_iterations {
        let end = (drawn + BATCH).min(params.max_iterations);
        let outcomes: Vec<Outcome> = (drawn..end)
            .into_par_iter()
            .map(|it| run_iteration(it, kind, pool, params))
            .collect();
        for (offset, outcome) in outcomes.into_iter().enumerate() {
            let iteration = drawn + offset;
            let Outcome::Hypotheses(hyps) = outcome else {
                continue;
            };
            valid += 1;
            for (cand, s) in hyps {
                audit.push(AuditEntry {
                    iteration,
                    beta: cand.beta,
                    inliers: s.inliers,
                });
                if best.as_ref().is_none_or(|(_, b)| s.beats(b)) {
                    best = Some((cand, s));
                    let ratio = s.inliers as f64 / total as f64;
                    needed = required_iterations(ratio, m, params.confidence);
                }
            }
            if valid as f64 >= needed {
                drawn = iteration + 1;
                break 'search;
            }
        }
        drawn = end;
    }
    if valid == 0 {
        return Err(RansacError::AllDegenerate);
    }
    let Some(mut best) = best else {
        return Err(RansacError::AllDegenerate);
    };
    if params.refine {
        best = refine(best, kind, &pool.items, params.threshold);
    }
    Ok((
        finalize(best.0, pool.items.clone(), drawn, params.threshold),
        audit,
    ))
}

const REFINE_ROUNDS: usize = 10;

fn refine(
    mut best: (SolverCandidate, Score),
    kind: SolverKind,
    items: &[LinearizedCorrespondence],
    threshold: f64,
) -> (SolverCandidate, Score) {
    for _ in 0..REFINE_ROUNDS {
        let inliers: Vec<LinearizedCorrespondence> = residuals(&best.0, items)
            .iter()
            .zip(items)
            .filter(|(r, _)| **r <= threshold)
            .map(|(_, c)| *c)
            .collect();
        let Ok(corr) = CorrSet::new(inliers) else {
            break;
        };
        let Ok(cand) = refit(kind, &corr, best.0.beta) else {
            break;
        };
        let s = score(&cand, items, threshold);
        if s.inliers < best.1.inliers {
            break;
        }
        let converged = s.inliers == best.1.inliers;
        best = (cand, s);
        if converged {
            break;
        }
    }
    best
}

fn finalize(
    best: SolverCandidate,
    correspondences: Vec<LinearizedCorrespondence>,
    iterations_run: usize,
    threshold: f64,
) -> RansacResult {
    let inlier_mask: Vec<bool> = residuals(&best, &correspondences)
        .into_iter()
        .map(|r| r <= threshold)
        .collect();
    let inlier_count = inlier_mask.iter().filter(|b| **b).count();
    RansacResult {
        best,
        inlier_mask,
        inlier_count,
        iterations_run,
        correspondences,
    }
}
