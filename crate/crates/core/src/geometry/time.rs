use serde::{Deserialize, Serialize};

use super::{GeometryError, ImageSample, Point2, Trajectory};

/// Affine map from camera-1 frame index to camera-2 time: `j = beta + rho * i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeModel {
    /// Shift in camera-2 frames.
    pub beta: f64,
    /// Frame-rate ratio (camera-1 period over camera-2 period).
    pub rho: f64,
}

impl TimeModel {
    pub fn new(beta: f64, rho: f64) -> Result<Self, GeometryError> {
        if !beta.is_finite() {
            return Err(GeometryError::InvalidTimeModel("beta must be finite"));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(GeometryError::InvalidTimeModel("rho must be positive"));
        }
        Ok(Self { beta, rho })
    }

    pub fn synchronized() -> Self {
        Self {
            beta: 0.0,
            rho: 1.0,
        }
    }
}

impl Default for TimeModel {
    fn default() -> Self {
        Self::synchronized()
    }
}

/// Camera-2 time of camera-1 frame `i`.
#[inline]
pub fn time_map(i: i64, model: &TimeModel) -> f64 {
    model.beta + model.rho * i as f64
}

/// A camera-1 sample paired with the secant approximation of the camera-2
/// track around its predicted position.
///
/// The camera-2 point that corresponds to `sample` at shift `beta` is
/// approximated by `u_vec + beta * v_vec`. `v_vec` is the secant over `d`
/// frames divided by `d`, so `beta` is always measured in camera-2 frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizedCorrespondence {
    pub sample: ImageSample,
    pub u_vec: Point2,
    pub v_vec: Point2,
    pub j0: i64,
    pub d: i64,
    /// Shift the linearization was anchored at.
    pub beta0: f64,
}

impl LinearizedCorrespondence {
    /// Predicted camera-2 point at shift `beta`.
    #[inline]
    pub fn predict(&self, beta: f64) -> Point2 {
        self.u_vec + self.v_vec * beta
    }

    /// Predicted camera-2 point at the anchoring shift.
    #[inline]
    pub fn anchor(&self) -> Point2 {
        self.predict(self.beta0)
    }

    #[inline]
    pub fn x1(&self) -> Point2 {
        self.sample.point()
    }
}

/// Linearizes the camera-2 track `traj2` around the time predicted for the
/// camera-1 `sample` by `anchor` (its `beta` is the initial shift `beta0`).
pub fn linearize(
    traj2: &Trajectory,
    sample: &ImageSample,
    anchor: &TimeModel,
    d: i64,
) -> Result<LinearizedCorrespondence, GeometryError> {
    if d == 0 {
        return Err(GeometryError::ZeroInterpolationDistance);
    }
    let t = time_map(sample.frame, anchor);
    // tolerate round-off just below an integer
    let j0 = (t + 1e-9).floor() as i64;
    let jd = j0 + d;
    let (Some(s0), Some(sd)) = (traj2.sample_at(j0), traj2.sample_at(jd)) else {
        let frame = if traj2.sample_at(j0).is_none() {
            j0
        } else {
            jd
        };
        return Err(GeometryError::MissingFrame { anchor: j0, frame });
    };
    if !traj2.contiguous(j0, jd) {
        return Err(GeometryError::MissingFrame {
            anchor: j0,
            frame: jd,
        });
    }
    let v_vec = (sd.point() - s0.point()) / d as f64;
    // s'(t) on the secant, shifted back to beta = 0
    let u_vec = s0.point() + v_vec * (t - j0 as f64) - v_vec * anchor.beta;
    Ok(LinearizedCorrespondence {
        sample: *sample,
        u_vec,
        v_vec,
        j0,
        d,
        beta0: anchor.beta,
    })
}

/// Linearizes every camera-1 sample against the camera-2 track with the
/// same track id. Samples whose forward window `[j0, j0 + d]` is not
/// available fall back to the backward window `[j0 - d, j0]`; samples with
/// neither are skipped. Output order follows `cam1`.
pub fn linearize_tracks(
    cam1: &[Trajectory],
    cam2: &[Trajectory],
    anchor: &TimeModel,
    d: i64,
) -> Result<Vec<LinearizedCorrespondence>, GeometryError> {
    if d == 0 {
        return Err(GeometryError::ZeroInterpolationDistance);
    }
    let mut out = Vec::new();
    for t1 in cam1 {
        let Some(t2) = cam2.iter().find(|t| t.track_id() == t1.track_id()) else {
            continue;
        };
        for s in t1.samples() {
            if let Ok(c) = linearize(t2, s, anchor, d).or_else(|_| linearize(t2, s, anchor, -d)) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line_track(a: Point2, w: Point2, frames: std::ops::Range<i64>) -> Trajectory {
        let samples = frames
            .map(|j| {
                let p = a + w * j as f64;
                ImageSample::new(j, p.x, p.y).unwrap()
            })
            .collect();
        Trajectory::new("cam2", "t0", samples).unwrap()
    }

    #[test]
    fn time_map_examples() {
        assert_eq!(time_map(0, &TimeModel::new(0.0, 1.0).unwrap()), 0.0);
        assert_eq!(time_map(10, &TimeModel::new(2.5, 1.0).unwrap()), 12.5);
        assert_eq!(time_map(4, &TimeModel::new(0.0, 0.5).unwrap()), 2.0);
    }

    #[test]
    fn time_model_validation() {
        assert!(TimeModel::new(0.0, 0.0).is_err());
        assert!(TimeModel::new(f64::INFINITY, 1.0).is_err());
        assert!(TimeModel::new(1.0, -2.0).is_err());
    }

    #[test]
    fn exact_line_prediction() {
        let a = Point2::new(100.0, 200.0);
        let w = Point2::new(7.5, -3.25);
        let traj = line_track(a, w, 0..40);
        for &rho in &[1.0, 0.5, 1.0 / 3.0] {
            for i in [3_i64, 10, 17] {
                let s = ImageSample::new(i, 0.0, 0.0).unwrap();
                let lin = linearize(&traj, &s, &TimeModel::new(0.0, rho).unwrap(), 1).unwrap();
                assert_abs_diff_eq!(lin.v_vec, w, epsilon = 1e-12);
                for beta in [-1.0, -0.3, 0.0, 0.7, 1.0] {
                    let expected = a + w * (i as f64 * rho + beta);
                    assert_abs_diff_eq!(lin.predict(beta), expected, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn secant_is_normalized_by_distance() {
        let a = Point2::new(-4.0, 9.0);
        let w = Point2::new(2.0, 1.0);
        let traj = line_track(a, w, 0..30);
        let s = ImageSample::new(5, 0.0, 0.0).unwrap();
        let m = TimeModel::synchronized();
        let v1 = linearize(&traj, &s, &m, 1).unwrap().v_vec;
        let v4 = linearize(&traj, &s, &m, 4).unwrap().v_vec;
        let vm4 = linearize(&traj, &s, &m, -4).unwrap().v_vec;
        assert_abs_diff_eq!(v1, w, epsilon = 1e-12);
        assert_abs_diff_eq!(v4, w, epsilon = 1e-12);
        assert_abs_diff_eq!(vm4, w, epsilon = 1e-12);
    }

    #[test]
    fn nonzero_beta0_keeps_absolute_shift() {
        let a = Point2::new(0.0, 0.0);
        let w = Point2::new(3.0, 4.0);
        let traj = line_track(a, w, 0..100);
        let s = ImageSample::new(10, 0.0, 0.0).unwrap();
        let lin = linearize(&traj, &s, &TimeModel::new(37.0, 1.0).unwrap(), 2).unwrap();
        assert_eq!(lin.j0, 47);
        assert_abs_diff_eq!(lin.anchor(), a + w * 47.0, epsilon = 1e-9);
        assert_abs_diff_eq!(lin.predict(38.5), a + w * 48.5, epsilon = 1e-9);
    }

    #[test]
    fn missing_frames() {
        let traj = line_track(Point2::zeros(), Point2::new(1.0, 0.0), 0..10);
        let s = ImageSample::new(8, 0.0, 0.0).unwrap();
        let m = TimeModel::synchronized();
        assert!(matches!(
            linearize(&traj, &s, &m, 2),
            Err(GeometryError::MissingFrame { frame: 10, .. })
        ));
        assert!(matches!(
            linearize(&traj, &s, &m, 0),
            Err(GeometryError::ZeroInterpolationDistance)
        ));
        let gap = Trajectory::new(
            "c",
            "t",
            [0, 1, 2, 4, 5]
                .iter()
                .map(|&f| ImageSample::new(f, 0.0, 0.0).unwrap())
                .collect(),
        )
        .unwrap();
        let s = ImageSample::new(1, 0.0, 0.0).unwrap();
        assert!(linearize(&gap, &s, &m, 1).is_ok());
        assert!(linearize(&gap, &s, &m, 3).is_err());
    }
}
