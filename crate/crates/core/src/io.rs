//! Trajectory CSV and synchronization report JSON.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    linearize, GeometryError, ImageSample, ModelKind, ModelScorer, TimeModel, Trajectory,
    TwoViewModel,
};
use crate::sync::{IterationLog, SyncRun};

pub const TRAJECTORY_HEADER: [&str; 5] = ["camera_id", "track_id", "frame", "u", "v"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("header must be `{}`", TRAJECTORY_HEADER.join(","))]
    BadHeader,
    #[error("exactly two cameras required, found {0}")]
    CameraCount(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn csv_error(line: u64, message: impl Into<String>) -> IoError {
    IoError::Csv {
        line,
        message: message.into(),
    }
}

/// Parses a trajectory CSV. Tracks come out grouped by camera in order of
/// first appearance, and samples within a track are sorted by frame.
pub fn read_trajectories(reader: impl Read) -> Result<Vec<Trajectory>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(1, e.to_string()))?;
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(IoError::BadHeader);
    }
    // (camera, track) -> frame -> (line, sample)
    let mut tracks: BTreeMap<(usize, usize), BTreeMap<i64, ImageSample>> = BTreeMap::new();
    let mut cameras: Vec<String> = Vec::new();
    let mut track_names: Vec<String> = Vec::new();
    let mut track_index: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 5 {
            return Err(csv_error(
                line,
                format!("expected 5 fields, found {}", record.len()),
            ));
        }
        let camera = &record[0];
        let track = &record[1];
        if camera.is_empty() || track.is_empty() {
            return Err(csv_error(line, "camera_id and track_id must be non-empty"));
        }
        let frame: i64 = record[2]
            .parse()
            .map_err(|_| csv_error(line, format!("frame `{}` is not an integer", &record[2])))?;
        let u: f64 = record[3]
            .parse()
            .map_err(|_| csv_error(line, format!("u `{}` is not a number", &record[3])))?;
        let v: f64 = record[4]
            .parse()
            .map_err(|_| csv_error(line, format!("v `{}` is not a number", &record[4])))?;
        let sample = ImageSample::new(frame, u, v).map_err(|e| csv_error(line, e.to_string()))?;
        let cam = match cameras.iter().position(|c| c == camera) {
            Some(k) => k,
            None => {
                cameras.push(camera.to_string());
                cameras.len() - 1
            }
        };
        let next = track_names.len();
        let trk = *track_index.entry(track.to_string()).or_insert(next);
        if trk == next {
            track_names.push(track.to_string());
        }
        let samples = tracks.entry((cam, trk)).or_default();
        if samples.insert(frame, sample).is_some() {
            return Err(csv_error(
                line,
                format!("duplicate sample for camera {camera}, track {track}, frame {frame}"),
            ));
        }
    }
    tracks
        .into_iter()
        .map(|((cam, trk), samples)| {
            Trajectory::new(
                &cameras[cam],
                &track_names[trk],
                samples.into_values().collect(),
            )
            .map_err(IoError::from)
        })
        .collect()
}

/// Splits tracks into the two cameras, the first camera to appear being
/// camera 1.
pub fn split_cameras(
    tracks: Vec<Trajectory>,
) -> Result<(Vec<Trajectory>, Vec<Trajectory>), IoError> {
    let mut ids: Vec<String> = Vec::new();
    for t in &tracks {
        if !ids.iter().any(|c| c == t.camera_id()) {
            ids.push(t.camera_id().to_string());
        }
    }
    if ids.len() != 2 {
        return Err(IoError::CameraCount(ids.len()));
    }
    Ok(tracks.into_iter().partition(|t| t.camera_id() == ids[0]))
}

/// Writes tracks in the given order. Coordinates carry 17 significant
/// digits so parsing restores them exactly.
pub fn write_trajectories<'a>(
    writer: impl Write,
    tracks: impl IntoIterator<Item = &'a Trajectory>,
) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(TRAJECTORY_HEADER)
        .map_err(|e| IoError::Io(e.into()))?;
    for t in tracks {
        for s in t.samples() {
            w.write_record([
                t.camera_id(),
                t.track_id(),
                &s.frame.to_string(),
                &format!("{:.16e}", s.u),
                &format!("{:.16e}", s.v),
            ])
            .map_err(|e| IoError::Io(e.into()))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    /// `F` or `H`.
    pub kind: String,
    /// Row-major, unit Frobenius norm.
    pub matrix: [f64; 9],
}

impl ModelReport {
    pub fn from_model(model: &TwoViewModel) -> Self {
        Self {
            kind: model.kind().as_str().to_string(),
            matrix: model.to_row_major(),
        }
    }

    pub fn to_model(&self) -> Result<TwoViewModel, GeometryError> {
        let kind = match self.kind.as_str() {
            "F" => ModelKind::Fundamental,
            "H" => ModelKind::Homography,
            _ => return Err(GeometryError::InvalidModel),
        };
        TwoViewModel::from_row_major(kind, &self.matrix)
    }
}

/// Where the reported model was scored: correspondences linearized at
/// `beta0` with secant length `d`, inliers within `threshold` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scoring {
    pub beta0: f64,
    pub d: i64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub beta: f64,
    pub rho: f64,
    /// `beta` in seconds of camera 2, when its frame rate is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_seconds: Option<f64>,
    pub model: ModelReport,
    pub inliers: usize,
    pub total: usize,
    pub log: Vec<IterationLog>,
    pub seed: u64,
    pub scoring: Scoring,
    pub config: serde_json::Value,
}

impl SyncReport {
    pub fn from_run(
        run: &SyncRun,
        rho: f64,
        threshold: f64,
        seed: u64,
        fps2: Option<f64>,
        config: serde_json::Value,
    ) -> Self {
        Self {
            beta: run.beta_total,
            rho,
            beta_seconds: fps2.map(|f| run.beta_total / f),
            model: ModelReport::from_model(&run.model),
            inliers: run.inlier_count,
            total: run.total,
            log: run.iterations.clone(),
            seed,
            scoring: Scoring {
                beta0: run.anchor_beta,
                d: run.anchor_d,
                threshold,
            },
            config,
        }
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Inlier count and number of scored correspondences of the reported model
/// over the given tracks.
pub fn rescore(
    report: &SyncReport,
    cam1: &[Trajectory],
    cam2: &[Trajectory],
) -> Result<(usize, usize), IoError> {
    let model = report.model.to_model()?;
    let scorer = ModelScorer::new(&model)?;
    let anchor = TimeModel::new(report.scoring.beta0, report.rho)?;
    let d = report.scoring.d;
    let (mut inliers, mut total) = (0, 0);
    for t1 in cam1 {
        let Some(t2) = cam2.iter().find(|t| t.track_id() == t1.track_id()) else {
            continue;
        };
        for s in t1.samples() {
            let Ok(c) = linearize(t2, s, &anchor, d).or_else(|_| linearize(t2, s, &anchor, -d))
            else {
                continue;
            };
            total += 1;
            if scorer.residual(&c.x1(), &c.predict(report.beta)) <= report.scoring.threshold {
                inliers += 1;
            }
        }
    }
    Ok((inliers, total))
}
