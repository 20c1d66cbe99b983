use nalgebra::{SMatrix, SVector};

use super::normalize::{reshape3, Normalized};
use super::{CorrSet, SolverCandidate, SolverError, SolverKind};
use crate::geometry::{model_rank2, ModelKind, TwoViewModel};

type M9 = SMatrix<f64, 9, 9>;
type V9 = SVector<f64, 9>;

/// Half-width, in frames, of the interval searched around the start shift.
const SEARCH_HALF_WIDTH: f64 = 1.0;
const GRID: usize = 16;
const GOLDEN_STEPS: usize = 40;
/// Sampson reweighting passes after the plain algebraic fit.
const REWEIGHT_PASSES: usize = 3;

/// Gram matrix of the constraint rows as a quadratic in the shift:
/// `A + delta B + delta^2 C`.
struct Quadratic {
    a: M9,
    b: M9,
    c: M9,
}

impl Quadratic {
    fn new(rows: &[(V9, V9)], weights: &[f64]) -> Self {
        let mut q = Quadratic {
            a: M9::zeros(),
            b: M9::zeros(),
            c: M9::zeros(),
        };
        for ((r0, r1), w) in rows.iter().zip(weights) {
            q.a += r0 * r0.transpose() * *w;
            q.b += (r0 * r1.transpose() + r1 * r0.transpose()) * *w;
            q.c += r1 * r1.transpose() * *w;
        }
        q
    }

    fn at(&self, delta: f64) -> M9 {
        self.a + self.b * delta + self.c * (delta * delta)
    }

    /// Smallest eigenvalue and its eigenvector.
    fn min_eigen(&self, delta: f64) -> (f64, V9) {
        let eig = self.at(delta).symmetric_eigen();
        let k = eig.eigenvalues.imin();
        (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
    }
}

/// Constraint rows, each split into the part constant in the shift and the
/// part multiplying it.
fn rows(norm: &Normalized, kind: ModelKind) -> Vec<(V9, V9)> {
    let mut out = Vec::with_capacity(2 * norm.len());
    for k in 0..norm.len() {
        let s = &norm.x1[k];
        let a = &norm.anchor[k];
        let v = &norm.tangent[k];
        match kind {
            ModelKind::Fundamental => {
                let (mut r0, mut r1) = (V9::zeros(), V9::zeros());
                for c in 0..3 {
                    r0[c] = a.x * s[c];
                    r0[3 + c] = a.y * s[c];
                    r0[6 + c] = s[c];
                    r1[c] = v.x * s[c];
                    r1[3 + c] = v.y * s[c];
                }
                out.push((r0, r1));
            }
            ModelKind::Homography => {
                let (mut f0, mut f1, mut g0, mut g1) =
                    (V9::zeros(), V9::zeros(), V9::zeros(), V9::zeros());
                for c in 0..3 {
                    f0[3 + c] = -s[c];
                    f0[6 + c] = a.y * s[c];
                    f1[6 + c] = v.y * s[c];
                    g0[c] = s[c];
                    g0[6 + c] = -a.x * s[c];
                    g1[6 + c] = -v.x * s[c];
                }
                out.push((f0, f1));
                out.push((g0, g1));
            }
        }
    }
    out
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_STEPS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Shift minimizing the smallest eigenvalue near `start` (or `0` for
/// shift-free kinds), with that eigenvalue and its eigenvector.
fn solve(q: &Quadratic, kind: SolverKind, start: f64) -> (f64, f64, V9) {
    let delta = if kind.estimates_shift() {
        let cost = |d: f64| q.min_eigen(d).0;
        let (lo, hi) = (start - SEARCH_HALF_WIDTH, start + SEARCH_HALF_WIDTH);
        let step = (hi - lo) / GRID as f64;
        let best = (0..=GRID)
            .map(|k| lo + step * k as f64)
            .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
            .expect("non-empty grid");
        golden(cost, (best - step).max(lo), (best + step).min(hi))
    } else {
        0.0
    };
    let (value, w) = q.min_eigen(delta);
    (delta, value, w)
}

/// Least-squares re-estimation of a `(beta, model)` hypothesis from a
/// consensus set of any size: the algebraic error of the linearized
/// constraints is minimized over the model for each shift, and over the
/// shift within a frame of `beta_start`. F fits are then reweighted by the
/// Sampson gradient of the previous pass. Shift-free kinds keep the
/// linearization shift. Rank-2 kinds are projected to rank 2.
pub fn refit(
    kind: SolverKind,
    corr: &CorrSet,
    beta_start: f64,
) -> Result<SolverCandidate, SolverError> {
    if corr.len() < kind.sample_size() {
        return Err(SolverError::WrongSize {
            expected: kind.sample_size(),
            got: corr.len(),
        });
    }
    let norm = Normalized::new(corr, true);
    let kind_m = kind.model_kind();
    let rows = rows(&norm, kind_m);
    let start = beta_start - norm.beta_ref;
    let mut weights = vec![1.0; rows.len()];
    let mut fit = solve(&Quadratic::new(&rows, &weights), kind, start);
    if kind_m == ModelKind::Fundamental {
        for _ in 0..REWEIGHT_PASSES {
            let f = reshape3(fit.2.as_slice());
            for (k, w) in weights.iter_mut().enumerate() {
                let l1 = f * norm.x1[k];
                let l2 = f.transpose() * norm.x2(k, fit.0);
                let g = l1.x * l1.x + l1.y * l1.y + l2.x * l2.x + l2.y * l2.y;
                *w = if g > 0.0 { 1.0 / g } else { 0.0 };
            }
            fit = solve(&Quadratic::new(&rows, &weights), kind, start);
        }
    }
    let (delta, value, w) = fit;
    if !value.is_finite() {
        return Err(SolverError::DegenerateInput("refit system is not finite"));
    }
    let mut m = reshape3(w.as_slice());
    let model = match kind {
        SolverKind::HMin | SolverKind::H4pt => TwoViewModel::homography(norm.denormalize_h(&m)),
        SolverKind::FGep => TwoViewModel::fundamental(norm.denormalize_f(&m)),
        SolverKind::FMin | SolverKind::F7pt => {
            m = model_rank2(&m);
            TwoViewModel::fundamental(norm.denormalize_f(&m))
        }
    }
    .map_err(|_| SolverError::DegenerateInput("refit model is zero"))?;
    Ok(SolverCandidate {
        beta: norm.beta_ref + delta,
        model,
        algebraic_residual: (value.max(0.0) / corr.len() as f64).sqrt(),
        imag_leak: 0.0,
    })
}
