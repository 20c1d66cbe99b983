use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, ModelKind, Point2, TwoViewModel};

/// Pinhole camera: a world point `X` maps to `K (R X + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraCalib {
    pub k: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl CameraCalib {
    pub fn new(k: Matrix3<f64>, r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self, GeometryError> {
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(GeometryError::InvalidCalibration(
                "K must be upper triangular",
            ));
        }
        if k.determinant().abs() < 1e-12 {
            return Err(GeometryError::InvalidCalibration("K must be invertible"));
        }
        if (r.transpose() * r - Matrix3::identity()).norm() > 1e-9 || r.determinant() < 0.0 {
            return Err(GeometryError::InvalidCalibration("R must be a rotation"));
        }
        Ok(Self { k, r, t })
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.r.transpose() * self.t)
    }

    pub fn to_camera(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.r * x + self.t
    }

    /// Pixel projection; `None` behind or on the camera plane.
    pub fn project(&self, x: &Vector3<f64>) -> Option<Point2> {
        let pc = self.to_camera(x);
        if pc.z <= 1e-12 {
            return None;
        }
        let p = self.k * pc;
        Some(Point2::new(p.x / p.z, p.y / p.z))
    }

    /// Viewing ray of a pixel, in world coordinates (not normalized).
    pub fn ray(&self, p: &Point2) -> Vector3<f64> {
        let kinv = self.k.try_inverse().expect("K validated invertible");
        self.r.transpose() * (kinv * Vector3::new(p.x, p.y, 1.0))
    }

    /// Relative pose `(R, t)` of `other` with respect to `self`.
    pub fn relative_to(&self, other: &CameraCalib) -> (Matrix3<f64>, Vector3<f64>) {
        let r = other.r * self.r.transpose();
        let t = other.t - r * self.t;
        (r, t)
    }
}

fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

pub fn essential_from_pose(r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix3<f64> {
    skew(t) * r
}

/// Fundamental matrix with `x2^T F x1 = 0` for pixels of `cam1`, `cam2`.
pub fn fundamental_from_calib(cam1: &CameraCalib, cam2: &CameraCalib) -> Matrix3<f64> {
    let (r, t) = cam1.relative_to(cam2);
    let k1inv = cam1.k.try_inverse().expect("K validated invertible");
    let k2inv = cam2.k.try_inverse().expect("K validated invertible");
    k2inv.transpose() * essential_from_pose(&r, &t) * k1inv
}

/// Linear triangulation with `P1 = [I | 0]`, `P2 = [R | t]` on normalized
/// image coordinates. Returns the point in camera-1 coordinates, or `None`
/// when it lies at infinity.
pub fn triangulate(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    x1: &Point2,
    x2: &Point2,
) -> Option<Vector3<f64>> {
    let p2 = |row: usize, col: usize| if col < 3 { r[(row, col)] } else { t[row] };
    let p1 = |row: usize, col: usize| if col == row { 1.0 } else { 0.0 };
    let mut a = Matrix4::zeros();
    for c in 0..4 {
        a[(0, c)] = x1.x * p1(2, c) - p1(0, c);
        a[(1, c)] = x1.y * p1(2, c) - p1(1, c);
        a[(2, c)] = x2.x * p2(2, c) - p2(0, c);
        a[(3, c)] = x2.y * p2(2, c) - p2(1, c);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let (min_idx, _) = svd.singular_values.argmin();
    let h = v_t.row(min_idx);
    if h[3].abs() < 1e-12 * h.norm() {
        return None;
    }
    Some(Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

/// Recovers relative rotation and unit translation from a fundamental
/// matrix with known intrinsics, picking the pose candidate that places a
/// strict majority of the probe correspondences in front of both cameras.
pub fn decompose_f(
    model: &TwoViewModel,
    k1: &Matrix3<f64>,
    k2: &Matrix3<f64>,
    probes: &[(Point2, Point2)],
) -> Result<(Matrix3<f64>, Vector3<f64>), GeometryError> {
    if model.kind() != ModelKind::Fundamental {
        return Err(GeometryError::InvalidModel);
    }
    if probes.is_empty() {
        return Err(GeometryError::NoProbes);
    }
    let k1inv = k1
        .try_inverse()
        .ok_or(GeometryError::InvalidCalibration("K must be invertible"))?;
    let k2inv = k2
        .try_inverse()
        .ok_or(GeometryError::InvalidCalibration("K must be invertible"))?;
    let e = k2.transpose() * model.matrix() * k1;
    let svd = e.svd(true, true);
    let mut u = svd.u.ok_or(GeometryError::InvalidModel)?;
    let mut v_t = svd.v_t.ok_or(GeometryError::InvalidModel)?;
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let ra = u * w * v_t;
    let rb = u * w.transpose() * v_t;
    let t: Vector3<f64> = u.column(2).into_owned();
    let candidates = [(ra, t), (ra, -t), (rb, t), (rb, -t)];

    let normalized: Vec<(Point2, Point2)> = probes
        .iter()
        .map(|(a, b)| {
            let pa = k1inv * Vector3::new(a.x, a.y, 1.0);
            let pb = k2inv * Vector3::new(b.x, b.y, 1.0);
            (
                Point2::new(pa.x / pa.z, pa.y / pa.z),
                Point2::new(pb.x / pb.z, pb.y / pb.z),
            )
        })
        .collect();

    let counts: Vec<usize> = candidates
        .iter()
        .map(|(r, t)| {
            normalized
                .iter()
                .filter(|(a, b)| match triangulate(r, t, a, b) {
                    Some(x) => x.z > 0.0 && (r * x + t).z > 0.0,
                    None => false,
                })
                .count()
        })
        .collect();
    let (best, &best_count) = counts
        .iter()
        .enumerate()
        .max_by_key(|(_, c)| **c)
        .expect("four candidates");
    let runner_up = counts
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, c)| *c)
        .max()
        .unwrap_or(0);
    if 2 * best_count <= probes.len() || best_count == runner_up {
        return Err(GeometryError::CheiralityAmbiguous);
    }
    let (r, t) = candidates[best];
    Ok((r, t.normalize()))
}

/// Angle of `R^T R_gt` in degrees.
pub fn rotation_error(r: &Matrix3<f64>, r_gt: &Matrix3<f64>) -> f64 {
    let e = r.transpose() * r_gt;
    let cos = 0.5 * (e.trace() - 1.0);
    let axis = Vector3::new(
        e[(2, 1)] - e[(1, 2)],
        e[(0, 2)] - e[(2, 0)],
        e[(1, 0)] - e[(0, 1)],
    );
    let sin = 0.5 * axis.norm();
    sin.atan2(cos).to_degrees()
}

/// Distance between unit directions, minimized over the sign of `t`.
pub fn translation_error(t: &Vector3<f64>, t_gt: &Vector3<f64>) -> Result<f64, GeometryError> {
    let (nt, ngt) = (t.norm(), t_gt.norm());
    if nt == 0.0 || ngt == 0.0 {
        return Err(GeometryError::ZeroVector);
    }
    let a = t / nt;
    let b = t_gt / ngt;
    Ok((b - a).norm().min((b + a).norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Rotation3, Unit};

    fn k() -> Matrix3<f64> {
        Matrix3::new(800.0, 0.0, 500.0, 0.0, 800.0, 500.0, 0.0, 0.0, 1.0)
    }

    fn probes(r: &Matrix3<f64>, t: &Vector3<f64>) -> Vec<(Point2, Point2)> {
        let mut out = Vec::new();
        for i in 0..12 {
            let x = Vector3::new(
                (i as f64 * 0.37).sin(),
                (i as f64 * 0.73).cos(),
                4.0 + (i as f64 * 0.51).sin(),
            );
            let p1 = k() * x;
            let p2 = k() * (r * x + t);
            out.push((
                Point2::new(p1.x / p1.z, p1.y / p1.z),
                Point2::new(p2.x / p2.z, p2.y / p2.z),
            ));
        }
        out
    }

    #[test]
    fn rotation_error_cases() {
        let r = Rotation3::from_euler_angles(0.1, -0.4, 0.7).into_inner();
        assert_abs_diff_eq!(rotation_error(&r, &r), 0.0, epsilon = 1e-12);
        let axis = Unit::new_normalize(Vector3::new(0.3, -1.0, 0.2));
        let d = Rotation3::from_axis_angle(&axis, 10f64.to_radians()).into_inner();
        assert_abs_diff_eq!(rotation_error(&r, &(r * d)), 10.0, epsilon = 1e-10);
    }

    #[test]
    fn translation_error_cases() {
        let a = Vector3::new(1.0, 2.0, 3.0);
        assert_abs_diff_eq!(
            translation_error(&a, &(a * 4.0)).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(translation_error(&a, &(-a)).unwrap(), 0.0, epsilon = 1e-15);
        let e = translation_error(&Vector3::x(), &Vector3::y()).unwrap();
        assert_abs_diff_eq!(e, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(
            translation_error(&Vector3::zeros(), &a),
            Err(GeometryError::ZeroVector)
        );
    }

    #[test]
    fn decompose_pure_translation() {
        let r = Matrix3::identity();
        let t = Vector3::new(-1.0, 0.0, 0.0);
        let f = k().try_inverse().unwrap().transpose()
            * essential_from_pose(&r, &t)
            * k().try_inverse().unwrap();
        let model = TwoViewModel::fundamental(f).unwrap();
        let (r_est, t_est) = decompose_f(&model, &k(), &k(), &probes(&r, &t)).unwrap();
        assert!(rotation_error(&r_est, &r) < 0.1);
        assert_abs_diff_eq!(t_est, t.normalize(), epsilon = 1e-9);
    }

    #[test]
    fn decompose_general_pose() {
        let r = Rotation3::from_euler_angles(0.05, 0.3, -0.1).into_inner();
        let t = Vector3::new(-1.0, 0.2, 0.1);
        let f = k().try_inverse().unwrap().transpose()
            * essential_from_pose(&r, &t)
            * k().try_inverse().unwrap();
        let model = TwoViewModel::fundamental(f).unwrap();
        let (r_est, t_est) = decompose_f(&model, &k(), &k(), &probes(&r, &t)).unwrap();
        assert!(rotation_error(&r_est, &r) < 1e-8);
        assert!(translation_error(&t_est, &t).unwrap() < 1e-8);
        // probes sit in front of both cameras for the true pose only
        assert_abs_diff_eq!(t_est.dot(&t.normalize()), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn single_probe_selects_the_only_valid_candidate() {
        let r = Rotation3::from_euler_angles(-0.2, 0.1, 0.05).into_inner();
        let t = Vector3::new(0.8, -0.1, 0.3);
        let f = essential_from_pose(&r, &t);
        let model = TwoViewModel::fundamental(f).unwrap();
        let x = Vector3::new(0.2, -0.1, 3.0);
        let y = r * x + t;
        let probe = (
            Point2::new(x.x / x.z, x.y / x.z),
            Point2::new(y.x / y.z, y.y / y.z),
        );
        let id = Matrix3::identity();
        let (r_est, t_est) = decompose_f(&model, &id, &id, &[probe]).unwrap();
        assert!(rotation_error(&r_est, &r) < 1e-8);
        assert_abs_diff_eq!(t_est, t.normalize(), epsilon = 1e-9);
    }

    #[test]
    fn ambiguous_without_majority() {
        let r = Matrix3::identity();
        let t = Vector3::new(-1.0, 0.0, 0.0);
        let model = TwoViewModel::fundamental(essential_from_pose(&r, &t)).unwrap();
        let project = |x: Vector3<f64>| {
            let y = r * x + t;
            (
                Point2::new(x.x / x.z, x.y / x.z),
                Point2::new(y.x / y.z, y.y / y.z),
            )
        };
        // two probes in front of both cameras, two behind both: the true pose
        // and its translation-flipped twin tie
        let pts = vec![
            project(Vector3::new(0.2, 0.1, 4.0)),
            project(Vector3::new(-0.4, 0.3, 5.0)),
            project(Vector3::new(0.3, -0.2, -4.0)),
            project(Vector3::new(-0.1, 0.5, -3.0)),
        ];
        let id = Matrix3::identity();
        assert_eq!(
            decompose_f(&model, &id, &id, &pts),
            Err(GeometryError::CheiralityAmbiguous)
        );
        assert_eq!(
            decompose_f(&model, &id, &id, &[]),
            Err(GeometryError::NoProbes)
        );
    }
}
