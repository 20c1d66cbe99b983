use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

use super::gep_f::{finish, null_vector};
use super::normalize::{reshape3, Normalized};
use super::{poly, CorrSet, SolverCandidate, SolverError, SolverOptions};
use crate::geometry::TwoViewModel;

/// Evaluation points on the circle; more than enough for the degree bound.
const N_SAMPLES: usize = 32;
/// det F(delta) has degree at most 16: the rows of F built from the
/// cofactors carry degree 5, 5 and 6 in delta because three columns of the
/// shift block vanish.
const DEGREE: usize = 16;
const DET_TOL: f64 = 1e-8;

fn system_at<T>(norm: &Normalized, delta: T) -> DMatrix<T>
where
    T: nalgebra::ComplexField + Copy + From<f64>,
{
    let mut m = DMatrix::from_element(norm.len(), 9, T::from(0.0));
    for k in 0..norm.len() {
        let x1 = &norm.x1[k];
        let a = &norm.anchor[k];
        let v = &norm.tangent[k];
        let xx = T::from(a.x) + delta * T::from(v.x);
        let yy = T::from(a.y) + delta * T::from(v.y);
        for c in 0..3 {
            let s = T::from(x1[c]);
            m[(k, c)] = xx * s;
            m[(k, 3 + c)] = yy * s;
            m[(k, 6 + c)] = s;
        }
    }
    m
}

/// Null vector of the 8x9 system via signed 8x8 minors.
fn cofactor_f<T>(m: &DMatrix<T>) -> [T; 9]
where
    T: nalgebra::ComplexField + Copy + From<f64>,
{
    let mut out = [T::from(0.0); 9];
    for (k, slot) in out.iter_mut().enumerate() {
        let minor = m.clone().remove_column(k);
        let det = minor.determinant();
        *slot = if k % 2 == 0 { det } else { -det };
    }
    out
}

fn det3<T: nalgebra::ComplexField + Copy>(f: &[T; 9]) -> T {
    f[0] * (f[4] * f[8] - f[5] * f[7]) - f[1] * (f[3] * f[8] - f[5] * f[6])
        + f[2] * (f[3] * f[7] - f[4] * f[6])
}

/// Sampling circles from the search limit down to below one frame, each a
/// quarter of the previous. Interpolation on a circle is accurate for roots
/// near it, so every circle contributes only the roots in its annulus.
fn radii(limit: f64) -> Vec<f64> {
    let mut out = vec![limit.max(1.0)];
    while *out.last().unwrap() > 1.0 {
        let next = out.last().unwrap() / 4.0;
        out.push(next);
    }
    out
}

/// Coefficients of `det F(delta)` in the scaled variable `delta / radius`,
/// recovered from samples on the circle `|delta| = radius` by a discrete
/// Fourier transform.
fn scaled_det_polynomial(norm: &Normalized, radius: f64) -> Vec<f64> {
    let values: Vec<Complex64> = (0..N_SAMPLES)
        .map(|n| {
            let theta = 2.0 * PI * n as f64 / N_SAMPLES as f64;
            let delta = Complex64::from_polar(radius, theta);
            det3(&cofactor_f(&system_at(norm, delta)))
        })
        .collect();
    (0..=DEGREE)
        .map(|m| {
            let acc = values
                .iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (n, p)| {
                    let theta = -2.0 * PI * (n * m) as f64 / N_SAMPLES as f64;
                    acc + p * Complex64::from_polar(1.0, theta)
                });
            acc.re / N_SAMPLES as f64
        })
        .collect()
}

/// Coefficients (ascending in the shift relative to the first
/// correspondence's `beta0`) of the univariate polynomial whose roots are
/// the candidate shifts of the eight-point problem.
pub fn min_f_det_polynomial(corr: &CorrSet, normalize: bool) -> Result<Vec<f64>, SolverError> {
    corr.expect_len(8)?;
    let norm = Normalized::new(corr, normalize);
    let radius = radii(SolverOptions::default().beta_limit(corr))[0];
    let scaled = scaled_det_polynomial(&norm, radius);
    Ok(scaled
        .iter()
        .enumerate()
        .map(|(m, c)| c / radius.powi(m as i32))
        .collect())
}

/// Eight-point solver: hidden-variable elimination of F. For fixed shift the
/// linearized epipolar constraints are linear in F; their cofactor null
/// vector substituted into `det F = 0` leaves a univariate polynomial whose
/// real roots are the shifts.
pub fn solve_min_f_beta(
    corr: &CorrSet,
    opts: &SolverOptions,
) -> Result<Vec<SolverCandidate>, SolverError> {
    corr.expect_len(8)?;
    let norm = Normalized::new(corr, opts.normalize);
    let limit = opts.beta_limit(corr);
    let mut roots: Vec<(f64, f64)> = Vec::new();
    let circles = radii(limit);
    let mut constant = true;
    for (k, &radius) in circles.iter().enumerate() {
        let scaled = scaled_det_polynomial(&norm, radius);
        if poly::effective_degree(&scaled, 1e-12).is_some_and(|d| d > 0) {
            constant = false;
        }
        // each circle is trusted in an annulus around its own radius
        let inner = if k + 1 == circles.len() {
            0.0
        } else {
            radius / 6.0
        };
        for z in poly::roots(&scaled) {
            let z = z * radius;
            if z.norm() > 1.5 * radius || z.norm() < inner {
                continue;
            }
            // roots away from the circle carry absolute error, so polish in
            // the complex plane before judging realness
            let root = polish(&norm, &scaled, radius, z);
            let (delta, im) = (root.re, root.im);
            if !opts.is_real(delta, im) || delta.abs() > limit {
                continue;
            }
            if !roots
                .iter()
                .any(|(r, _)| (r - delta).abs() <= 1e-8 * (1.0 + delta.abs()))
            {
                roots.push((delta, im.abs()));
            }
        }
    }
    if constant {
        return Err(SolverError::DegenerateInput("shift polynomial is constant"));
    }
    let mut out = Vec::new();
    for (delta, imag_leak) in roots {
        let f = null_vector(&system_at(&norm, delta));
        let fmat: Matrix3<f64> = reshape3(f.as_slice());
        if fmat.determinant().abs() > DET_TOL * fmat.norm().powi(3) {
            continue;
        }
        let Some(residual) = opts.epipolar_gate(&norm, &fmat, delta) else {
            continue;
        };
        let Ok(model) = TwoViewModel::fundamental(norm.denormalize_f(&fmat)) else {
            continue;
        };
        out.push(SolverCandidate {
            beta: norm.beta_ref + delta,
            model,
            algebraic_residual: residual,
            imag_leak,
        });
    }
    finish(out)
}

fn det_complex(norm: &Normalized, delta: Complex64) -> Complex64 {
    det3(&cofactor_f(&system_at(norm, delta)))
}

/// Newton steps on the exactly evaluated determinant, kept while they
/// reduce its magnitude.
fn polish(norm: &Normalized, scaled: &[f64], radius: f64, start: Complex64) -> Complex64 {
    let mut delta = start;
    let mut value = det_complex(norm, delta);
    for _ in 0..8 {
        let slope = complex_derivative(scaled, delta / radius) / radius;
        if slope.norm() == 0.0 || !slope.is_finite() {
            break;
        }
        let next = delta - value / slope;
        let next_value = det_complex(norm, next);
        // NaN stops too
        if next_value.norm().is_nan() || next_value.norm() >= value.norm() {
            break;
        }
        delta = next;
        value = next_value;
    }
    delta
}

fn complex_derivative(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, (m, c)| {
            acc * z + c * m as f64
        })
}
