use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Fundamental,
    Homography,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Fundamental => "F",
            ModelKind::Homography => "H",
        }
    }
}

/// A fundamental matrix or homography in canonical scale: unit Frobenius
/// norm with its largest-magnitude entry positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoViewModel {
    kind: ModelKind,
    m: Matrix3<f64>,
}

impl TwoViewModel {
    pub fn new(kind: ModelKind, m: Matrix3<f64>) -> Result<Self, GeometryError> {
        Ok(Self {
            kind,
            m: canonical_scale(&m).ok_or(GeometryError::InvalidModel)?,
        })
    }

    pub fn fundamental(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::new(ModelKind::Fundamental, m)
    }

    pub fn homography(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::new(ModelKind::Homography, m)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[3 * r + c] = self.m[(r, c)];
            }
        }
        out
    }

    pub fn from_row_major(kind: ModelKind, entries: &[f64; 9]) -> Result<Self, GeometryError> {
        Self::new(kind, Matrix3::from_row_slice(entries))
    }

    /// Nearest rank-2 matrix (smallest singular value zeroed), renormalized.
    pub fn rank2_projected(&self) -> Result<Self, GeometryError> {
        Self::new(self.kind, rank2_projection(&self.m))
    }

    /// Frobenius distance between canonical representatives, minimized over
    /// the overall sign so near-ties in the largest entry do not matter.
    pub fn distance(&self, other: &TwoViewModel) -> f64 {
        (self.m - other.m).norm().min((self.m + other.m).norm())
    }
}

pub(crate) fn canonical_scale(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let norm = m.norm();
    if !norm.is_finite() || norm == 0.0 {
        return None;
    }
    let mut out = m / norm;
    let largest = out
        .iter()
        .copied()
        .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if largest < 0.0 {
        out = -out;
    }
    Some(out)
}

pub(crate) fn rank2_projection(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let mut s = svd.singular_values;
    // nalgebra sorts singular values in decreasing order
    s[2] = 0.0;
    svd.u.unwrap() * Matrix3::from_diagonal(&s) * svd.v_t.unwrap()
}
