//! Univariate polynomial helpers. Coefficients are stored in ascending
//! order: `c[0] + c[1] x + ... + c[n] x^n`.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Horner evaluation.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_derivative(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
}

/// Degree after dropping leading coefficients below `rel_tol * max|c|`.
pub fn effective_degree(coeffs: &[f64], rel_tol: f64) -> Option<usize> {
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return None;
    }
    coeffs.iter().rposition(|c| c.abs() > rel_tol * scale)
}

/// All complex roots as eigenvalues of the companion matrix.
pub fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let Some(n) = effective_degree(coeffs, 1e-14) else {
        return Vec::new();
    };
    if n == 0 {
        return Vec::new();
    }
    let lead = coeffs[n];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        companion[(k, k - 1)] = 1.0;
    }
    for k in 0..n {
        companion[(k, n - 1)] = -coeffs[k] / lead;
    }
    eigenvalues(companion).unwrap_or_default()
}

/// Eigenvalues of a square matrix, or `None` when it is not finite or the
/// QR iteration fails to converge within a generous budget.
pub fn eigenvalues(m: DMatrix<f64>) -> Option<Vec<Complex64>> {
    if m.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let budget = 64 * m.nrows().max(1);
    let schur = nalgebra::Schur::try_new(m, f64::EPSILON, budget)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn from_roots(rs: &[f64]) -> Vec<f64> {
        let mut c = vec![1.0];
        for &r in rs {
            let mut next = vec![0.0; c.len() + 1];
            for (k, &a) in c.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= r * a;
            }
            c = next;
        }
        c
    }

    #[test]
    fn recovers_known_roots() {
        let truth = [-3.0, -0.5, 0.25, 1.0, 2.0, 7.5];
        let c = from_roots(&truth);
        let mut found: Vec<f64> = roots(&c).iter().map(|z| z.re).collect();
        found.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in found.iter().zip(truth.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn complex_pair() {
        // x^2 + 1
        let r = roots(&[1.0, 0.0, 1.0]);
        assert_eq!(r.len(), 2);
        for z in r {
            assert_abs_diff_eq!(z.re, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(z.im.abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn trailing_zero_leading_coefficients() {
        let r = roots(&[-2.0, 1.0, 0.0, 0.0]);
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0].re, 2.0, epsilon = 1e-12);
        assert!(roots(&[3.0]).is_empty());
        assert!(roots(&[0.0, 0.0]).is_empty());
    }

    #[test]
    fn horner_and_derivative() {
        let c = [1.0, -2.0, 3.0];
        assert_eq!(eval(&c, 2.0), 9.0);
        assert_eq!(eval_derivative(&c, 2.0), 10.0);
    }
}
