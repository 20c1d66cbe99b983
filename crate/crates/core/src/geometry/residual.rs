use nalgebra::{Matrix3, Vector3};

use super::{GeometryError, ModelKind, Point2, TwoViewModel};

#[inline]
fn lift(p: &Point2) -> Vector3<f64> {
    Vector3::new(p.x, p.y, 1.0)
}

/// First-order geometric distance of `(x1, x2)` to the variety
/// `x2^T F x1 = 0`, in pixels.
pub fn sampson_distance(f: &Matrix3<f64>, x1: &Point2, x2: &Point2) -> Result<f64, GeometryError> {
    let p1 = lift(x1);
    let p2 = lift(x2);
    let fx1 = f * p1;
    let ftx2 = f.transpose() * p2;
    let algebraic = p2.dot(&fx1);
    let grad2 = fx1.x * fx1.x + fx1.y * fx1.y + ftx2.x * ftx2.x + ftx2.y * ftx2.y;
    if grad2 == 0.0 {
        return Err(GeometryError::DegenerateGradient);
    }
    Ok(algebraic.abs() / grad2.sqrt())
}

/// Sampson distance under a (normalized) fundamental matrix; a vanishing
/// gradient yields `f64::INFINITY`.
pub fn epipolar_residual(model: &TwoViewModel, s1: &Point2, s2: &Point2) -> f64 {
    sampson_distance(model.matrix(), s1, s2).unwrap_or(f64::INFINITY)
}

#[inline]
fn dehomogenize(p: &Vector3<f64>) -> Option<Point2> {
    let scale = p.x.abs().max(p.y.abs()).max(1.0);
    if p.z.abs() <= 1e-14 * scale {
        None
    } else {
        Some(Point2::new(p.x / p.z, p.y / p.z))
    }
}

/// Mean of forward and backward transfer distances.
pub fn symmetric_transfer_error(
    h: &Matrix3<f64>,
    h_inv: &Matrix3<f64>,
    s1: &Point2,
    s2: &Point2,
) -> Result<f64, GeometryError> {
    let fwd = dehomogenize(&(h * lift(s1))).ok_or(GeometryError::PointAtInfinity)?;
    let bwd = dehomogenize(&(h_inv * lift(s2))).ok_or(GeometryError::PointAtInfinity)?;
    Ok(0.5 * ((fwd - s2).norm() + (bwd - s1).norm()))
}

/// Symmetric transfer error under a homography. A singular model is an
/// error; a transfer onto the line at infinity yields `f64::INFINITY`.
pub fn homography_residual(
    model: &TwoViewModel,
    s1: &Point2,
    s2: &Point2,
) -> Result<f64, GeometryError> {
    let h = model.matrix();
    let h_inv = invert_homography(h)?;
    Ok(symmetric_transfer_error(h, &h_inv, s1, s2).unwrap_or(f64::INFINITY))
}

fn invert_homography(h: &Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    let scale = h.norm();
    if h.determinant().abs() <= 1e-12 * scale * scale * scale {
        return Err(GeometryError::SingularModel);
    }
    h.try_inverse().ok_or(GeometryError::SingularModel)
}

/// Precomputed residual evaluator for repeated scoring of one model.
#[derive(Debug, Clone, Copy)]
pub enum ModelScorer {
    Fundamental(Matrix3<f64>),
    Homography {
        h: Matrix3<f64>,
        h_inv: Matrix3<f64>,
    },
}

impl ModelScorer {
    pub fn new(model: &TwoViewModel) -> Result<Self, GeometryError> {
        match model.kind() {
            ModelKind::Fundamental => Ok(Self::Fundamental(*model.matrix())),
            ModelKind::Homography => Ok(Self::Homography {
                h: *model.matrix(),
                h_inv: invert_homography(model.matrix())?,
            }),
        }
    }

    /// Residual in pixels, `f64::INFINITY` where undefined.
    #[inline]
    pub fn residual(&self, s1: &Point2, s2: &Point2) -> f64 {
        match self {
            Self::Fundamental(f) => sampson_distance(f, s1, s2).unwrap_or(f64::INFINITY),
            Self::Homography { h, h_inv } => {
                symmetric_transfer_error(h, h_inv, s1, s2).unwrap_or(f64::INFINITY)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn translation_f() -> Matrix3<f64> {
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
    }

    #[test]
    fn zero_on_epipolar_line() {
        let f = TwoViewModel::fundamental(translation_f()).unwrap();
        // pure x-translation: corresponding points share the row
        let r = epipolar_residual(&f, &Point2::new(12.0, 40.0), &Point2::new(-3.0, 40.0));
        assert_eq!(r, 0.0);
    }

    #[test]
    fn sampson_matches_hand_formula() {
        // x1 = (0,0,1), x2 = (0,1,1): F x1 = (0,-1,0), F^T x2 = (0,1,-1),
        // x2^T F x1 = -1, so d^2 = 1 / (1 + 1) for the raw matrix; the
        // distance is invariant to the matrix scale.
        let f = TwoViewModel::fundamental(translation_f()).unwrap();
        let r = epipolar_residual(&f, &Point2::new(0.0, 0.0), &Point2::new(0.0, 1.0));
        assert_abs_diff_eq!(r, (0.5_f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn residuals_are_scale_invariant() {
        let m = Matrix3::new(0.1, -0.3, 2.0, 0.4, 0.05, -1.0, -2.0, 1.5, 0.3);
        let a = TwoViewModel::fundamental(m).unwrap();
        let b = TwoViewModel::fundamental(m * 5.0).unwrap();
        let (x1, x2) = (Point2::new(3.0, -2.0), Point2::new(1.5, 7.0));
        assert_abs_diff_eq!(
            epipolar_residual(&a, &x1, &x2),
            epipolar_residual(&b, &x1, &x2),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            sampson_distance(&m, &x1, &x2).unwrap(),
            sampson_distance(&(m * 5.0), &x1, &x2).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn degenerate_gradient_is_infinite() {
        let f = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(
            sampson_distance(&f, &Point2::new(1.0, 1.0), &Point2::new(2.0, 2.0)),
            Err(GeometryError::DegenerateGradient)
        );
        let model = TwoViewModel::fundamental(f).unwrap();
        assert_eq!(
            epipolar_residual(&model, &Point2::new(1.0, 1.0), &Point2::new(2.0, 2.0)),
            f64::INFINITY
        );
    }

    #[test]
    fn homography_identity_cases() {
        let h = TwoViewModel::homography(Matrix3::identity()).unwrap();
        let p = Point2::new(3.0, 7.0);
        assert_abs_diff_eq!(
            homography_residual(&h, &p, &p).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let r = homography_residual(&h, &Point2::new(0.0, 0.0), &Point2::new(3.0, 4.0)).unwrap();
        assert_abs_diff_eq!(r, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn homography_forward_construction() {
        let m = Matrix3::new(1.2, 0.1, 30.0, -0.05, 0.9, -12.0, 1e-4, -2e-4, 1.0);
        let h = TwoViewModel::homography(m).unwrap();
        for p in [
            Point2::new(10.0, 20.0),
            Point2::new(-300.0, 450.0),
            Point2::new(800.0, 5.0),
        ] {
            let q = m * Vector3::new(p.x, p.y, 1.0);
            let q = Point2::new(q.x / q.z, q.y / q.z);
            assert!(homography_residual(&h, &p, &q).unwrap() < 1e-10);
        }
    }

    #[test]
    fn homography_errors() {
        let singular = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        let h = TwoViewModel::homography(singular).unwrap();
        assert_eq!(
            homography_residual(&h, &Point2::zeros(), &Point2::zeros()),
            Err(GeometryError::SingularModel)
        );
        // third row sends (1, 0) to infinity
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0);
        let h = TwoViewModel::homography(m).unwrap();
        let r = homography_residual(&h, &Point2::new(1.0, 0.0), &Point2::new(0.0, 0.0)).unwrap();
        assert_eq!(r, f64::INFINITY);
    }
}
