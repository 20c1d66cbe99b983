use nalgebra::{Matrix3, Vector3};

use super::CorrSet;
use crate::geometry::Point2;

/// `p -> scale * (p - center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Similarity {
    pub scale: f64,
    pub center: Point2,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            center: Point2::zeros(),
        }
    }

    /// Centroid to the origin, RMS distance sqrt(2).
    pub fn fit<'a>(points: impl Iterator<Item = &'a Point2> + Clone) -> Self {
        let n = points.clone().count();
        if n == 0 {
            return Self::identity();
        }
        let center = points.clone().fold(Point2::zeros(), |acc, p| acc + p) / n as f64;
        let ms = points.map(|p| (p - center).norm_squared()).sum::<f64>() / n as f64;
        let scale = if ms > 0.0 { (2.0 / ms).sqrt() } else { 1.0 };
        Self { scale, center }
    }

    #[inline]
    pub fn apply(&self, p: &Point2) -> Point2 {
        (p - self.center) * self.scale
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let s = self.scale;
        Matrix3::new(
            s,
            0.0,
            -s * self.center.x,
            0.0,
            s,
            -s * self.center.y,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let inv = 1.0 / self.scale;
        Matrix3::new(
            inv,
            0.0,
            self.center.x,
            0.0,
            inv,
            self.center.y,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// Correspondences in normalized coordinates. The camera-2 point at shift
/// `beta_ref + delta` is `anchor + delta * tangent`.
#[derive(Debug, Clone)]
pub(crate) struct Normalized {
    pub x1: Vec<Vector3<f64>>,
    pub anchor: Vec<Point2>,
    pub tangent: Vec<Point2>,
    pub t1: Similarity,
    pub t2: Similarity,
    pub beta_ref: f64,
}

impl Normalized {
    pub fn new(corr: &CorrSet, normalize: bool) -> Self {
        let beta_ref = corr.iter().next().map(|c| c.beta0).unwrap_or(0.0);
        let raw1: Vec<Point2> = corr.iter().map(|c| c.x1()).collect();
        let raw2: Vec<Point2> = corr.iter().map(|c| c.predict(beta_ref)).collect();
        let (t1, t2) = if normalize {
            (Similarity::fit(raw1.iter()), Similarity::fit(raw2.iter()))
        } else {
            (Similarity::identity(), Similarity::identity())
        };
        Self {
            x1: raw1
                .iter()
                .map(|p| {
                    let q = t1.apply(p);
                    Vector3::new(q.x, q.y, 1.0)
                })
                .collect(),
            anchor: raw2.iter().map(|p| t2.apply(p)).collect(),
            tangent: corr.iter().map(|c| c.v_vec * t2.scale).collect(),
            t1,
            t2,
            beta_ref,
        }
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    /// Normalized camera-2 point of correspondence `k` at offset `delta`.
    #[inline]
    pub fn x2(&self, k: usize, delta: f64) -> Vector3<f64> {
        let p = self.anchor[k] + self.tangent[k] * delta;
        Vector3::new(p.x, p.y, 1.0)
    }

    /// Pixel-space fundamental matrix from a normalized one.
    pub fn denormalize_f(&self, f: &Matrix3<f64>) -> Matrix3<f64> {
        self.t2.matrix().transpose() * f * self.t1.matrix()
    }

    /// Pixel-space homography from a normalized one.
    pub fn denormalize_h(&self, h: &Matrix3<f64>) -> Matrix3<f64> {
        self.t2.inverse_matrix() * h * self.t1.matrix()
    }

    /// `max_k |x2_k(delta)^T F x1_k|` for a unit-norm normalized `F`.
    pub fn epipolar_residual(&self, f: &Matrix3<f64>, delta: f64) -> f64 {
        let f = f / f.norm();
        (0..self.len())
            .map(|k| self.x2(k, delta).dot(&(f * self.x1[k])).abs())
            .fold(0.0, f64::max)
    }
}

/// Row-major 3x3 from a 9-vector slice.
pub(crate) fn reshape3(w: &[f64]) -> Matrix3<f64> {
    Matrix3::from_row_slice(&w[..9])
}
