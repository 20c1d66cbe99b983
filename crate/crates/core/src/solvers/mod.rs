//! Closed-form solvers that turn a handful of linearized correspondences
//! into `(beta, model)` hypotheses.
//!
//! | solver | samples | unknowns |
//! |---|---|---|
//! | [`solve_gep_f_beta`] | 9 | F (not rank constrained), beta |
//! | [`solve_min_f_beta`] | 8 | rank-2 F, beta |
//! | [`solve_min_h_beta`] | 5 (4.5) | H, beta |
//! | [`solve_7pt_f`] | 7 | rank-2 F |
//! | [`solve_4pt_h`] | 4 | H |
//!
//! All solvers work on isotropically normalized coordinates and return
//! models in pixel coordinates. The shift-aware solvers measure `beta` in
//! camera-2 frames (the tangents carry per-frame velocity).

mod classic;
mod gep_f;
mod min_f;
mod min_h;
mod normalize;
pub mod poly;
mod refit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LinearizedCorrespondence, ModelKind, TwoViewModel};

pub use classic::{solve_4pt_h, solve_7pt_f};
pub use gep_f::{gep_eigenvalues, gep_pencil, solve_gep_f_beta};
pub use min_f::{min_f_det_polynomial, solve_min_f_beta};
pub use min_h::solve_min_h_beta;
pub use refit::refit;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("solver needs {expected} correspondences, got {got}")]
    WrongSize { expected: usize, got: usize },
    #[error("duplicate camera-1 sample in correspondence set")]
    DuplicateSample,
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("no real solution")]
    NoRealSolution,
}

/// A `(beta, model)` hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverCandidate {
    /// Shift in camera-2 frames, on the same absolute scale as the
    /// correspondences' `beta0`.
    pub beta: f64,
    pub model: TwoViewModel,
    /// Largest absolute constraint value over the input set, evaluated in
    /// normalized coordinates with a unit-norm model.
    pub algebraic_residual: f64,
    /// Magnitude of the discarded imaginary part of the root.
    pub imag_leak: f64,
}

/// Which row of the cross-product constraint the fifth sample contributes
/// to the minimal homography solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FifthRow {
    #[default]
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Isotropic normalization of both images before solving.
    pub normalize: bool,
    /// Roots with `|imag| <= imag_tol * (1 + |real|)` are treated as real.
    pub imag_tol: f64,
    /// Candidates farther than this from the linearization shift are
    /// dropped; `None` uses `10 * max(|d|, 1)`.
    pub beta_max: Option<f64>,
    /// Project GEP fundamental matrices to rank 2.
    pub rank2: bool,
    /// Candidates whose algebraic residual exceeds this are dropped.
    pub residual_tol: f64,
    pub fifth_row: FifthRow,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            normalize: true,
            imag_tol: 1e-6,
            beta_max: None,
            rank2: false,
            residual_tol: 1e-6,
            fifth_row: FifthRow::First,
        }
    }
}

impl SolverOptions {
    pub(crate) fn is_real(&self, re: f64, im: f64) -> bool {
        re.is_finite() && im.abs() <= self.imag_tol * (1.0 + re.abs())
    }

    pub(crate) fn beta_limit(&self, corr: &CorrSet) -> f64 {
        self.beta_max.unwrap_or_else(|| {
            let d = corr
                .iter()
                .map(|c| c.d.unsigned_abs())
                .max()
                .unwrap_or(1)
                .max(1);
            10.0 * d as f64
        })
    }
}

/// A set of linearized correspondences handed to a solver.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrSet {
    items: Vec<LinearizedCorrespondence>,
}

impl CorrSet {
    /// Rejects repeated camera-1 samples (same frame and position).
    pub fn new(items: Vec<LinearizedCorrespondence>) -> Result<Self, SolverError> {
        for (k, a) in items.iter().enumerate() {
            if items[..k].iter().any(|b| b.sample == a.sample) {
                return Err(SolverError::DuplicateSample);
            }
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LinearizedCorrespondence> {
        self.items.iter()
    }

    pub fn as_slice(&self) -> &[LinearizedCorrespondence] {
        &self.items
    }

    pub(crate) fn expect_len(&self, n: usize) -> Result<(), SolverError> {
        if self.items.len() != n {
            return Err(SolverError::WrongSize {
                expected: n,
                got: self.items.len(),
            });
        }
        Ok(())
    }
}

/// Solver selector used by the robust estimator and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    /// Nine-point generalized eigenvalue solver for F and beta.
    FGep,
    /// Eight-point minimal solver for rank-2 F and beta.
    FMin,
    /// 4.5-point minimal solver for H and beta.
    HMin,
    /// Classical seven-point F (no shift).
    F7pt,
    /// Classical four-point H (no shift).
    H4pt,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::FGep,
        SolverKind::FMin,
        SolverKind::HMin,
        SolverKind::F7pt,
        SolverKind::H4pt,
    ];

    pub fn sample_size(&self) -> usize {
        match self {
            SolverKind::FGep => 9,
            SolverKind::FMin => 8,
            SolverKind::HMin => 5,
            SolverKind::F7pt => 7,
            SolverKind::H4pt => 4,
        }
    }

    pub fn model_kind(&self) -> ModelKind {
        match self {
            SolverKind::FGep | SolverKind::FMin | SolverKind::F7pt => ModelKind::Fundamental,
            SolverKind::HMin | SolverKind::H4pt => ModelKind::Homography,
        }
    }

    /// Whether the solver estimates the shift.
    pub fn estimates_shift(&self) -> bool {
        matches!(self, SolverKind::FGep | SolverKind::FMin | SolverKind::HMin)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::FGep => "F-GEP",
            SolverKind::FMin => "F-min",
            SolverKind::HMin => "H-min",
            SolverKind::F7pt => "F-7pt",
            SolverKind::H4pt => "H-4pt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(name))
    }

    /// Runs the solver. Shift-free solvers report `beta` equal to the
    /// linearization shift of the first correspondence.
    pub fn solve(
        &self,
        corr: &CorrSet,
        opts: &SolverOptions,
    ) -> Result<Vec<SolverCandidate>, SolverError> {
        match self {
            SolverKind::FGep => solve_gep_f_beta(corr, opts),
            SolverKind::FMin => solve_min_f_beta(corr, opts),
            SolverKind::HMin => solve_min_h_beta(corr, opts),
            SolverKind::F7pt => classic::seven_point_candidates(corr, opts),
            SolverKind::H4pt => classic::four_point_candidates(corr, opts),
        }
    }
}
