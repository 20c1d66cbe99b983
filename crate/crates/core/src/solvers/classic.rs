//! Shift-free baselines: the seven-point fundamental matrix and the
//! four-point homography. They see each camera-2 point at the linearization
//! shift and never move it.

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::gep_f::finish;
use super::min_h::has_collinear_triple;
use super::normalize::{reshape3, Normalized};
use super::{poly, CorrSet, SolverCandidate, SolverError, SolverOptions};
use crate::geometry::TwoViewModel;

const RANK_TOL: f64 = 1e-10;

fn padded_svd(rows: &[[f64; 9]]) -> (Vec<f64>, DMatrix<f64>) {
    let mut m = DMatrix::<f64>::zeros(9, 9);
    for (r, row) in rows.iter().enumerate() {
        for c in 0..9 {
            m[(r, c)] = row[c];
        }
    }
    let svd = m.svd(false, true);
    (
        svd.singular_values.iter().copied().collect(),
        svd.v_t.expect("requested"),
    )
}

fn seven_point_normalized(
    norm: &Normalized,
    imag_tol: f64,
) -> Result<Vec<Matrix3<f64>>, SolverError> {
    let rows: Vec<[f64; 9]> = (0..norm.len())
        .map(|k| {
            let x1 = &norm.x1[k];
            let x2 = norm.x2(k, 0.0);
            let mut row = [0.0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    row[3 * r + c] = x2[r] * x1[c];
                }
            }
            row
        })
        .collect();
    let (s, v_t) = padded_svd(&rows);
    if s[6] <= RANK_TOL * s[0] {
        return Err(SolverError::DegenerateInput(
            "seven-point system is rank deficient",
        ));
    }
    let f1 = reshape3(v_t.row(7).transpose().as_slice());
    let f2 = reshape3(v_t.row(8).transpose().as_slice());
    let g = |lambda: f64| (f2 + (f1 - f2) * lambda).determinant();
    let (g0, g1, gm1, g2) = (g(0.0), g(1.0), g(-1.0), g(2.0));
    let c0 = g0;
    let c2 = 0.5 * (g1 + gm1) - c0;
    let odd = 0.5 * (g1 - gm1);
    let c3 = ((g2 - c0 - 4.0 * c2) - 2.0 * odd) / 6.0;
    let c1 = odd - c3;
    let out: Vec<Matrix3<f64>> = poly::roots(&[c0, c1, c2, c3])
        .into_iter()
        .filter(|z| z.re.is_finite() && z.im.abs() <= imag_tol * (1.0 + z.re.abs()))
        .map(|z| f2 + (f1 - f2) * z.re)
        .collect();
    if out.is_empty() {
        return Err(SolverError::NoRealSolution);
    }
    Ok(out)
}

/// Classical seven-point algorithm on `(sample, u + beta0 v)` pairs.
/// Returns one or three rank-2 fundamental matrices.
pub fn solve_7pt_f(corr: &CorrSet, opts: &SolverOptions) -> Result<Vec<TwoViewModel>, SolverError> {
    corr.expect_len(7)?;
    let norm = Normalized::new(corr, opts.normalize);
    Ok(seven_point_normalized(&norm, opts.imag_tol)?
        .iter()
        .filter_map(|f| TwoViewModel::fundamental(norm.denormalize_f(f)).ok())
        .collect())
}

pub(crate) fn seven_point_candidates(
    corr: &CorrSet,
    opts: &SolverOptions,
) -> Result<Vec<SolverCandidate>, SolverError> {
    corr.expect_len(7)?;
    let norm = Normalized::new(corr, opts.normalize);
    let mut out = Vec::new();
    for f in seven_point_normalized(&norm, opts.imag_tol)? {
        let Ok(model) = TwoViewModel::fundamental(norm.denormalize_f(&f)) else {
            continue;
        };
        out.push(SolverCandidate {
            beta: norm.beta_ref,
            model,
            algebraic_residual: norm.epipolar_residual(&f, 0.0),
            imag_leak: 0.0,
        });
    }
    finish(out)
}

fn four_point_normalized(norm: &Normalized) -> Result<Matrix3<f64>, SolverError> {
    let x2: Vec<Vector3<f64>> = (0..norm.len()).map(|k| norm.x2(k, 0.0)).collect();
    if has_collinear_triple(&norm.x1) || has_collinear_triple(&x2) {
        return Err(SolverError::DegenerateInput("three collinear points"));
    }
    let mut rows = Vec::with_capacity(8);
    for (s, p) in norm.x1.iter().zip(&x2) {
        let mut first = [0.0; 9];
        let mut second = [0.0; 9];
        for c in 0..3 {
            first[3 + c] = -s[c];
            first[6 + c] = p.y * s[c];
            second[c] = s[c];
            second[6 + c] = -p.x * s[c];
        }
        rows.push(first);
        rows.push(second);
    }
    let (s, v_t) = padded_svd(&rows);
    if s[7] <= RANK_TOL * s[0] {
        return Err(SolverError::DegenerateInput(
            "four-point system is rank deficient",
        ));
    }
    Ok(reshape3(v_t.row(8).transpose().as_slice()))
}

/// Direct linear transform from four pairs `(sample, u + beta0 v)`.
pub fn solve_4pt_h(corr: &CorrSet, opts: &SolverOptions) -> Result<TwoViewModel, SolverError> {
    corr.expect_len(4)?;
    let norm = Normalized::new(corr, opts.normalize);
    let h = four_point_normalized(&norm)?;
    TwoViewModel::homography(norm.denormalize_h(&h))
        .map_err(|_| SolverError::DegenerateInput("zero homography"))
}

pub(crate) fn four_point_candidates(
    corr: &CorrSet,
    opts: &SolverOptions,
) -> Result<Vec<SolverCandidate>, SolverError> {
    corr.expect_len(4)?;
    let norm = Normalized::new(corr, opts.normalize);
    let h = four_point_normalized(&norm)?;
    let model = TwoViewModel::homography(norm.denormalize_h(&h))
        .map_err(|_| SolverError::DegenerateInput("zero homography"))?;
    let hn = h / h.norm();
    let residual = (0..norm.len())
        .map(|k| (norm.x2(k, 0.0).cross(&(hn * norm.x1[k]))).amax())
        .fold(0.0, f64::max);
    Ok(vec![SolverCandidate {
        beta: norm.beta_ref,
        model,
        algebraic_residual: residual,
        imag_leak: 0.0,
    }])
}
