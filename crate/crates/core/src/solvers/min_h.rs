use nalgebra::{DMatrix, Matrix3, SMatrix, Vector3};

use super::gep_f::finish;
use super::normalize::{reshape3, Normalized};
use super::{poly, CorrSet, FifthRow, SolverCandidate, SolverError, SolverOptions};
use crate::geometry::TwoViewModel;

const NULL_TOL: f64 = 1e-10;

/// Rows of `[x2(delta)]_x H x1 = 0` as coefficients of the twelve monomials
/// `[h11..h33, delta h31, delta h32, delta h33]`.
fn constraint_rows(norm: &Normalized, k: usize) -> [[f64; 12]; 2] {
    let s = &norm.x1[k];
    let a = &norm.anchor[k];
    let v = &norm.tangent[k];
    let mut first = [0.0; 12];
    let mut second = [0.0; 12];
    for c in 0..3 {
        // -(h2 . s) + y2 (h3 . s)
        first[3 + c] = -s[c];
        first[6 + c] = a.y * s[c];
        first[9 + c] = v.y * s[c];
        // (h1 . s) - x2 (h3 . s)
        second[c] = s[c];
        second[6 + c] = -a.x * s[c];
        second[9 + c] = -v.x * s[c];
    }
    [first, second]
}

fn stacked_rows(norm: &Normalized, fifth: FifthRow) -> Vec<[f64; 12]> {
    let mut rows = Vec::with_capacity(9);
    for k in 0..norm.len() {
        let [first, second] = constraint_rows(norm, k);
        if k < 4 {
            rows.push(first);
            rows.push(second);
        } else {
            rows.push(match fifth {
                FifthRow::First => first,
                FifthRow::Second => second,
            });
        }
    }
    rows
}

fn collinear(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> bool {
    let area = (b - a).cross(&(c - a)).norm();
    let scale = (b - a).norm() * (c - a).norm();
    area <= 1e-9 * scale.max(f64::MIN_POSITIVE)
}

pub(crate) fn has_collinear_triple(points: &[Vector3<f64>]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if collinear(&points[i], &points[j], &points[k]) {
                    return true;
                }
            }
        }
    }
    false
}

/// Gauss-Jordan elimination with partial pivoting on the first three
/// columns of a 3x6 matrix. Returns `[I | C]`'s right block `C`.
fn gauss_jordan_3x6(mut m: SMatrix<f64, 3, 6>) -> Option<Matrix3<f64>> {
    let scale = m.amax();
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[(a, col)].abs().total_cmp(&m[(b, col)].abs()))
            .expect("non-empty");
        if m[(pivot, col)].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap_rows(col, pivot);
        let p = m[(col, col)];
        for c in 0..6 {
            m[(col, c)] /= p;
        }
        for r in 0..3 {
            if r != col {
                let factor = m[(r, col)];
                for c in 0..6 {
                    m[(r, c)] -= factor * m[(col, c)];
                }
            }
        }
    }
    Some(m.fixed_view::<3, 3>(0, 3).into_owned())
}

/// Minimal solver for a homography and the shift from 4.5 samples (both
/// constraint rows of four samples and one row of the fifth).
pub fn solve_min_h_beta(
    corr: &CorrSet,
    opts: &SolverOptions,
) -> Result<Vec<SolverCandidate>, SolverError> {
    corr.expect_len(5)?;
    let norm = Normalized::new(corr, opts.normalize);
    if has_collinear_triple(&norm.x1) {
        return Err(SolverError::DegenerateInput("collinear camera-1 points"));
    }
    let rows = stacked_rows(&norm, opts.fifth_row);
    let mut padded = DMatrix::<f64>::zeros(12, 12);
    for (r, row) in rows.iter().enumerate() {
        for c in 0..12 {
            padded[(r, c)] = row[c];
        }
    }
    let svd = padded.svd(false, true);
    let s = &svd.singular_values;
    if s[8] <= NULL_TOL * s[0] {
        return Err(SolverError::DegenerateInput(
            "null space dimension exceeds three",
        ));
    }
    let v_t = svd.v_t.expect("requested");
    // singular values are sorted in decreasing order; the last three rows
    // of V^T span the null space
    let basis: Vec<Vec<f64>> = (9..12)
        .map(|r| v_t.row(r).iter().copied().collect())
        .collect();

    // w_{10+l} = beta w_{7+l}, monomials [b g1, b g2, b, g1, g2, 1]
    let mut coeffs = SMatrix::<f64, 3, 6>::zeros();
    for l in 0..3 {
        for (i, n) in basis.iter().enumerate() {
            coeffs[(l, i)] = -n[6 + l];
            coeffs[(l, 3 + i)] = n[9 + l];
        }
    }
    let reduced =
        gauss_jordan_3x6(coeffs).ok_or(SolverError::DegenerateInput("singular elimination"))?;
    // beta [g1, g2, 1]^T = action [g1, g2, 1]^T
    let action = -reduced;

    let limit = opts.beta_limit(corr);
    let mut out = Vec::new();
    let eig = poly::eigenvalues(DMatrix::from_column_slice(3, 3, action.as_slice()))
        .ok_or(SolverError::DegenerateInput("eigenvalues"))?;
    for z in eig.iter() {
        if !opts.is_real(z.re, z.im) || z.re.abs() > limit {
            continue;
        }
        let delta = z.re;
        let shifted = action - Matrix3::identity() * delta;
        let svd = shifted.svd(false, true);
        let (idx, _) = svd.singular_values.argmin();
        let g = svd.v_t.expect("requested").row(idx).transpose();
        if g[2].abs() < 1e-12 * g.norm() {
            continue;
        }
        let (g1, g2) = (g[0] / g[2], g[1] / g[2]);
        let w: Vec<f64> = (0..12)
            .map(|c| g1 * basis[0][c] + g2 * basis[1][c] + basis[2][c])
            .collect();
        let h = reshape3(&w);
        let residual = homography_residual(&norm, opts.fifth_row, &h, delta);
        if residual.is_nan() || residual > opts.residual_tol {
            continue;
        }
        let Ok(model) = TwoViewModel::homography(norm.denormalize_h(&h)) else {
            continue;
        };
        out.push(SolverCandidate {
            beta: norm.beta_ref + delta,
            model,
            algebraic_residual: residual,
            imag_leak: z.im.abs(),
        });
    }
    finish(out)
}

/// Largest constraint value over the rows the solver used, with unit-norm H.
fn homography_residual(norm: &Normalized, fifth: FifthRow, h: &Matrix3<f64>, delta: f64) -> f64 {
    let h = h / h.norm();
    let mut worst = 0.0_f64;
    for k in 0..norm.len() {
        let x2 = norm.x2(k, delta);
        let hx = h * norm.x1[k];
        let first = -hx.y + x2.y * hx.z;
        let second = hx.x - x2.x * hx.z;
        let used = if k < 4 {
            first.abs().max(second.abs())
        } else {
            match fifth {
                FifthRow::First => first.abs(),
                FifthRow::Second => second.abs(),
            }
        };
        worst = worst.max(used);
    }
    worst
}
