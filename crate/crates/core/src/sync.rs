//! Iterative synchronization for large offsets: re-anchor the camera-2
//! frame mapping at each accepted estimate and line-search the secant
//! length `d` over powers of two, in both temporal directions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{TimeModel, Trajectory, TwoViewModel};
use crate::robust::{build_pool, ransac_estimate, RansacError, RansacParams, RansacResult};
use crate::solvers::SolverKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyncError {
    #[error("invalid iteration parameters: {0}")]
    InvalidParams(&'static str),
    #[error("no step improved on zero inliers")]
    NeverImproved { log: Vec<IterationLog> },
    #[error(transparent)]
    Ransac(#[from] RansacError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterParams {
    /// The loop runs while the accepted-step counter `k` (starting at 1)
    /// is below `k_max`.
    pub k_max: usize,
    pub p_min: u32,
    pub p_max: u32,
    /// Template for every RANSAC call; `d` and `beta0` are overwritten.
    pub ransac: RansacParams,
    pub kind: SolverKind,
}

impl Default for IterParams {
    fn default() -> Self {
        Self {
            k_max: 20,
            p_min: 0,
            p_max: 5,
            ransac: RansacParams::default(),
            kind: SolverKind::FGep,
        }
    }
}

impl IterParams {
    pub fn validate(&self) -> Result<(), SyncError> {
        if self.k_max < 1 {
            return Err(SyncError::InvalidParams("k_max must be at least 1"));
        }
        if self.p_min > self.p_max {
            return Err(SyncError::InvalidParams("p_min must not exceed p_max"));
        }
        if self.p_max > 30 {
            return Err(SyncError::InvalidParams("p_max too large"));
        }
        self.ransac.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(&self) -> i64 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

/// One attempt: a pair of RANSAC runs at `+d` and `-d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub attempt: usize,
    /// Accepted-step counter when the attempt ran.
    pub k: usize,
    pub d: i64,
    /// Direction of the better run; `None` when both failed.
    pub direction: Option<Direction>,
    pub inlier_count: usize,
    /// Estimated shift relative to the current offset `j - i`.
    pub beta_k: Option<f64>,
    pub accepted: bool,
    /// Offset `j - i` after the attempt.
    pub j_after: i64,
    pub skipped_after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncRun {
    pub beta_total: f64,
    pub model: TwoViewModel,
    pub inlier_count: usize,
    pub total: usize,
    pub iterations: Vec<IterationLog>,
    pub ransac_invocations: usize,
    /// Final offset `j - i`.
    pub offset: i64,
    /// Linearization of the accepted run that produced `model`: anchor
    /// shift and signed secant length.
    pub anchor_beta: f64,
    pub anchor_d: i64,
}

impl SyncRun {
    pub fn accepted_steps(&self) -> usize {
        self.iterations.iter().filter(|l| l.accepted).count()
    }
}

/// Recomputes the returned shift from a log: the offset before the last
/// accepted step plus that step's estimate.
pub fn replay_beta(log: &[IterationLog]) -> Option<f64> {
    let mut offset = 0;
    let mut beta = None;
    for entry in log {
        if entry.accepted {
            beta = entry.beta_k.map(|b| offset as f64 + b);
            offset = entry.j_after;
        }
    }
    beta
}

/// SplitMix64 finalizer used to derive per-run seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of a directional run, from the accepted-step counter `k`.
fn derived_seed(seed: u64, k: usize, dir: Direction) -> u64 {
    mix(seed ^ mix(k as u64 * 2 + (dir == Direction::Backward) as u64))
}

struct Attempt {
    result: RansacResult,
    direction: Direction,
}

fn run_direction(
    cam1: &[Trajectory],
    cam2: &[Trajectory],
    params: &IterParams,
    offset: i64,
    d: i64,
    k: usize,
    dir: Direction,
) -> Result<Attempt, RansacError> {
    let ransac = RansacParams {
        d: d * dir.sign(),
        beta0: offset as f64,
        seed: derived_seed(params.ransac.seed, k, dir),
        ..params.ransac
    };
    let result = ransac_estimate(cam1, cam2, params.kind, &ransac)?;
    Ok(Attempt {
        result,
        direction: dir,
    })
}

/// Whether an offset leaves enough correspondences to run the solver.
fn in_overlap(
    cam1: &[Trajectory],
    cam2: &[Trajectory],
    params: &IterParams,
    offset: i64,
    d: i64,
) -> bool {
    let Ok(anchor) = TimeModel::new(offset as f64, params.ransac.rho) else {
        return false;
    };
    let m = params.kind.sample_size();
    [d, -d]
        .iter()
        .any(|&dd| build_pool(cam1, cam2, &anchor, dd).is_ok_and(|p| p.samplable.len() >= m))
}

/// Greedy inlier-following synchronization starting from `j = i`.
pub fn iterative_sync(
    cam1: &[Trajectory],
    cam2: &[Trajectory],
    params: &IterParams,
) -> Result<SyncRun, SyncError> {
    params.validate()?;
    let m = params.kind.sample_size();
    let d0 = 1i64 << params.p_min;
    let start = TimeModel::new(0.0, params.ransac.rho).map_err(RansacError::from)?;
    let available = [d0, -d0]
        .iter()
        .map(|&d| build_pool(cam1, cam2, &start, d).map(|p| p.samplable.len()))
        .collect::<Result<Vec<_>, _>>()?;
    let available = available.into_iter().max().unwrap_or(0);
    if available < m {
        return Err(RansacError::NotEnoughCorrespondences {
            needed: m,
            available,
        }
        .into());
    }

    let mut k = 1;
    let mut p = params.p_min;
    let mut d = d0;
    let mut offset = 0i64;
    let mut skipped = 0usize;
    let mut best_inliers = 0usize;
    let mut accepted: Option<(RansacResult, f64, f64, i64)> = None;
    let mut log = Vec::new();
    let mut invocations = 0;
    while k < params.k_max {
        if skipped > params.p_max as usize {
            break;
        }
        let attempt = log.len();
        let d_used = d;
        let k_used = k;
        let (fwd, bwd) = rayon::join(
            || run_direction(cam1, cam2, params, offset, d, k, Direction::Forward),
            || run_direction(cam1, cam2, params, offset, d, k, Direction::Backward),
        );
        invocations += 2;
        // the forward run wins ties
        let better = match (fwd, bwd) {
            (Ok(f), Ok(b)) => Some(if b.result.inlier_count > f.result.inlier_count {
                b
            } else {
                f
            }),
            (Ok(f), Err(_)) => Some(f),
            (Err(_), Ok(b)) => Some(b),
            (Err(_), Err(_)) => None,
        };
        let inliers = better.as_ref().map_or(0, |a| a.result.inlier_count);
        let beta_k = better.as_ref().map(|a| a.result.best.beta - offset as f64);
        let next_offset = beta_k.map(|b| offset + b.round() as i64);
        let improves = inliers > best_inliers
            && next_offset.is_some_and(|o| in_overlap(cam1, cam2, params, o, d));
        let direction = better.as_ref().map(|a| a.direction);
        if improves {
            let attempt = better.expect("improvement has a result");
            let b = beta_k.expect("improvement has a shift");
            let signed_d = d * attempt.direction.sign();
            let anchor = attempt
                .result
                .correspondences
                .first()
                .map_or(offset as f64, |c| c.beta0);
            accepted = Some((attempt.result, offset as f64 + b, anchor, signed_d));
            offset = next_offset.expect("improvement has an offset");
            best_inliers = inliers;
            skipped = 0;
            k += 1;
        } else {
            p = if p < params.p_max { p + 1 } else { 0 };
            d = 1i64 << p;
            skipped += 1;
        }
        log.push(IterationLog {
            attempt,
            k: k_used,
            d: d_used,
            direction,
            inlier_count: inliers,
            beta_k,
            accepted: improves,
            j_after: offset,
            skipped_after: skipped,
        });
    }
    let Some((result, beta_total, anchor_beta, anchor_d)) = accepted else {
        return Err(SyncError::NeverImproved { log });
    };
    Ok(SyncRun {
        beta_total,
        model: result.best.model,
        inlier_count: result.inlier_count,
        total: result.total(),
        iterations: log,
        ransac_invocations: invocations,
        offset,
        anchor_beta,
        anchor_d,
    })
}
