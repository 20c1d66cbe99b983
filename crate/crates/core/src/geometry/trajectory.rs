use serde::{Deserialize, Serialize};

use super::{GeometryError, Point2};

/// One tracked image point observed at an integer frame index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSample {
    pub frame: i64,
    pub u: f64,
    pub v: f64,
}

impl ImageSample {
    pub fn new(frame: i64, u: f64, v: f64) -> Result<Self, GeometryError> {
        let sample = Self { frame, u, v };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.frame < 0 {
            return Err(GeometryError::InvalidSample {
                frame: self.frame,
                reason: "negative frame index",
            });
        }
        if !self.u.is_finite() || !self.v.is_finite() {
            return Err(GeometryError::InvalidSample {
                frame: self.frame,
                reason: "non-finite coordinate",
            });
        }
        Ok(())
    }

    #[inline]
    pub fn point(&self) -> Point2 {
        Point2::new(self.u, self.v)
    }
}

/// A time-ordered image track of one physical point in one camera.
///
/// Frames are strictly increasing but need not be consecutive; a missing
/// frame splits the track into contiguous segments and no query ever
/// interpolates across such a gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    camera_id: String,
    track_id: String,
    samples: Vec<ImageSample>,
}

impl Trajectory {
    pub fn new(
        camera_id: impl Into<String>,
        track_id: impl Into<String>,
        samples: Vec<ImageSample>,
    ) -> Result<Self, GeometryError> {
        for s in &samples {
            s.validate()?;
        }
        for w in samples.windows(2) {
            if w[1].frame <= w[0].frame {
                return Err(GeometryError::NonIncreasingFrames {
                    previous: w[0].frame,
                    frame: w[1].frame,
                });
            }
        }
        Ok(Self {
            camera_id: camera_id.into(),
            track_id: track_id.into(),
            samples,
        })
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn track_id(&self) -> &str {
        &self.track_id
    }

    pub fn samples(&self) -> &[ImageSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_frame(&self) -> Option<i64> {
        self.samples.first().map(|s| s.frame)
    }

    pub fn last_frame(&self) -> Option<i64> {
        self.samples.last().map(|s| s.frame)
    }

    fn index_of(&self, frame: i64) -> Option<usize> {
        self.samples.binary_search_by_key(&frame, |s| s.frame).ok()
    }

    pub fn sample_at(&self, frame: i64) -> Option<&ImageSample> {
        self.index_of(frame).map(|idx| &self.samples[idx])
    }

    /// Both frames exist and every frame between them is present.
    pub fn contiguous(&self, a: i64, b: i64) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(ia), Some(ib)) => (b - a).unsigned_abs() as usize == ia.abs_diff(ib),
            _ => false,
        }
    }

    /// Maximal runs of consecutive frames.
    pub fn segments(&self) -> Vec<&[ImageSample]> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.samples.len() {
            if k == self.samples.len() || self.samples[k].frame != self.samples[k - 1].frame + 1 {
                if k > start {
                    out.push(&self.samples[start..k]);
                }
                start = k;
            }
        }
        out
    }
}
