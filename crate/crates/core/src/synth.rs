//! Synthetic scenes: smooth 3D point trajectories seen by two cameras that
//! sample them at shifted times, with ground truth for every quantity the
//! estimators recover.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{fundamental_from_calib, CameraCalib, ImageSample, Point2, Trajectory};

pub const CAMERA_1: &str = "cam1";
pub const CAMERA_2: &str = "cam2";

/// Distance of the cameras from the scene center, in scene units.
const CAMERA_DISTANCE: f64 = 4.5;
/// Radius of the ball (or disk) the trajectories live in.
const SCENE_RADIUS: f64 = 1.0;
const MAX_ATTEMPTS: usize = 200;
/// Turn allowed near the scene boundary, as a multiple of the regular limit.
const STEER_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(&'static str),
    #[error("cannot reach a mean image speed of {0} px/frame")]
    UnreachableSpeed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Motion {
    /// Smooth random 3D curves through waypoints.
    SmoothRandom,
    /// Constant image velocity in camera 2 with a non-planar 3D path; the
    /// linearized model holds exactly for every shift.
    ExactLinearImage,
    /// Smooth random curves confined to a world plane.
    PlanarSmooth,
    /// Constant image velocity in camera 2 on a world plane.
    ExactLinearPlanar,
}

impl Motion {
    pub fn is_planar(&self) -> bool {
        matches!(self, Motion::PlanarSmooth | Motion::ExactLinearPlanar)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Motion::ExactLinearImage | Motion::ExactLinearPlanar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    /// Frames per camera (indices `0..n_frames`).
    pub n_frames: usize,
    /// Independent moving points.
    pub n_tracks: usize,
    pub beta_gt: f64,
    pub rho: f64,
    pub noise_sigma: f64,
    /// Width and height in pixels.
    pub image_size: [f64; 2],
    pub speed_px_per_frame: f64,
    pub motion: Motion,
    /// Fixed rig; `None` draws one from the seed.
    pub cameras: Option<[CameraCalib; 2]>,
    pub min_triangulation_deg: f64,
    /// Largest heading change between consecutive waypoints of a smooth
    /// trajectory; bounds the image curvature.
    pub max_turn_deg: f64,
    /// Lifetime of each track in camera-2 frames, placed at a random offset
    /// inside the scene's time span; `None` spans all of it.
    pub track_length: Option<usize>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 100,
            n_tracks: 10,
            beta_gt: 0.0,
            rho: 1.0,
            noise_sigma: 0.0,
            image_size: [1000.0, 1000.0],
            speed_px_per_frame: 8.0,
            motion: Motion::SmoothRandom,
            cameras: None,
            min_triangulation_deg: 10.0,
            max_turn_deg: 20.0,
            track_length: Some(60),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.n_frames < 10 {
            return Err(SceneError::InvalidSpec("n_frames must be at least 10"));
        }
        if self.n_tracks == 0 {
            return Err(SceneError::InvalidSpec("n_tracks must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SceneError::InvalidSpec("noise_sigma must be non-negative"));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(SceneError::InvalidSpec("rho must be positive"));
        }
        if !self.beta_gt.is_finite() {
            return Err(SceneError::InvalidSpec("beta_gt must be finite"));
        }
        if !(self.speed_px_per_frame > 0.0 && self.speed_px_per_frame.is_finite()) {
            return Err(SceneError::InvalidSpec("speed must be positive"));
        }
        if !(self.image_size[0] > 0.0 && self.image_size[1] > 0.0) {
            return Err(SceneError::InvalidSpec("image size must be positive"));
        }
        if self.track_length.is_some_and(|l| l < 2) {
            return Err(SceneError::InvalidSpec("track_length must be at least 2"));
        }
        if !(0.0..=180.0).contains(&self.max_turn_deg) {
            return Err(SceneError::InvalidSpec("max_turn_deg must be in [0, 180]"));
        }
        if !(0.0..90.0).contains(&self.min_triangulation_deg) {
            return Err(SceneError::InvalidSpec(
                "min_triangulation_deg must be in [0, 90)",
            ));
        }
        Ok(())
    }

    /// Camera-2 time interval covered by either camera's frames.
    fn time_span(&self) -> (f64, f64) {
        let last = (self.n_frames - 1) as f64;
        let first1 = self.beta_gt;
        let last1 = self.beta_gt + self.rho * last;
        (first1.min(0.0), last1.max(last))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `x2^T F x1 = 0` for synchronized pixel projections.
    pub f_gt: Matrix3<f64>,
    /// Present for planar motions.
    pub h_gt: Option<Matrix3<f64>>,
    pub beta_gt: f64,
    pub rho: f64,
    pub cameras: [CameraCalib; 2],
    /// Noise-free projections, per track, aligned with the trajectories.
    pub clean1: Vec<Vec<Point2>>,
    pub clean2: Vec<Vec<Point2>>,
    /// Per camera-2 sample: replaced by a gross outlier.
    pub outliers: Vec<Vec<bool>>,
}

impl GroundTruth {
    /// Relative pose of camera 2 with respect to camera 1.
    pub fn relative_pose(&self) -> (Matrix3<f64>, Vector3<f64>) {
        self.cameras[0].relative_to(&self.cameras[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cam1: Vec<Trajectory>,
    pub cam2: Vec<Trajectory>,
    pub truth: GroundTruth,
}

fn look_at(center: &Vector3<f64>, roll: f64) -> Matrix3<f64> {
    let z = (-center).normalize();
    let helper = if z.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let x0 = helper.cross(&z).normalize();
    let y0 = z.cross(&x0);
    let (s, c) = roll.sin_cos();
    let x = x0 * c + y0 * s;
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

/// Two cameras looking at the scene center from `CAMERA_DISTANCE`, their
/// viewing directions separated by at least `min_tri` degrees.
pub fn random_rig(rng: &mut impl Rng, image_size: [f64; 2], min_tri_deg: f64) -> [CameraCalib; 2] {
    let half = 0.5 * image_size[0].min(image_size[1]);
    // the scene ball (with spline overshoot margin) spans 90% of the half-size
    let angular = (1.2 * SCENE_RADIUS / CAMERA_DISTANCE).asin().tan();
    let focal = 0.9 * half / angular;
    let k = Matrix3::new(
        focal,
        0.0,
        0.5 * image_size[0],
        0.0,
        focal,
        0.5 * image_size[1],
        0.0,
        0.0,
        1.0,
    );
    let dir1 = Vector3::from(UnitSphere.sample(rng));
    let axis = loop {
        let a = Vector3::from(UnitSphere.sample(rng)).cross(&dir1);
        if a.norm() > 1e-3 {
            break Unit::new_normalize(a);
        }
    };
    let angle = (min_tri_deg + rng.random_range(0.0..30.0)).to_radians();
    let dir2 = Rotation3::from_axis_angle(&axis, angle) * dir1;
    let make = |dir: Vector3<f64>, roll: f64| {
        let c = dir * CAMERA_DISTANCE;
        let r = look_at(&c, roll);
        CameraCalib::new(k, r, -(r * c)).expect("valid rig")
    };
    let roll1 = rng.random_range(-0.3..0.3);
    let roll2 = rng.random_range(-0.3..0.3);
    [make(dir1, roll1), make(dir2, roll2)]
}

/// Uniform Catmull-Rom spline through waypoints, parameter in `[0, n-1]`.
#[derive(Debug, Clone)]
struct Spline {
    points: Vec<Vector3<f64>>,
}

impl Spline {
    fn segments(&self) -> usize {
        self.points.len() - 1
    }

    fn eval(&self, s: f64) -> Vector3<f64> {
        let n = self.points.len();
        let seg = (s.floor() as isize).clamp(0, n as isize - 2) as usize;
        let u = s - seg as f64;
        let p = |i: isize| -> Vector3<f64> {
            if i < 0 {
                self.points[0] * 2.0 - self.points[1]
            } else if i as usize >= n {
                self.points[n - 1] * 2.0 - self.points[n - 2]
            } else {
                self.points[i as usize]
            }
        };
        let i = seg as isize;
        let (p0, p1, p2, p3) = (p(i - 1), p(i), p(i + 1), p(i + 2));
        (p1 * 2.0
            + (p2 - p0) * u
            + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * (u * u)
            + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * (u * u * u))
            * 0.5
    }
}

/// Waypoints of a persistent random walk inside the scene ball (or in the
/// plane spanned by `plane`), turning at most `max_turn_deg` per step.
fn random_waypoints(
    rng: &mut impl Rng,
    count: usize,
    step: f64,
    plane: Option<(Vector3<f64>, Vector3<f64>)>,
    max_turn_deg: f64,
) -> Option<Vec<Vector3<f64>>> {
    let max_turn = max_turn_deg.to_radians();
    let random_dir = |rng: &mut ChaCha8Rng| -> Vector3<f64> {
        match plane {
            Some((e1, e2)) => {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                e1 * a.cos() + e2 * a.sin()
            }
            None => Vector3::from(UnitSphere.sample(rng)),
        }
    };
    // a direction within `max_turn` of `heading`
    let turn = |rng: &mut ChaCha8Rng, heading: &Vector3<f64>| -> Vector3<f64> {
        let axis = match plane {
            Some((e1, e2)) => e1.cross(&e2),
            None => loop {
                let a = heading.cross(&random_dir(rng));
                if a.norm() > 1e-6 {
                    break a;
                }
            },
        };
        let angle = if max_turn > 0.0 {
            rng.random_range(-max_turn..=max_turn)
        } else {
            0.0
        };
        Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle) * heading
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.random());
    let rng = &mut local;
    for _ in 0..MAX_ATTEMPTS {
        // start off-center and head roughly through the middle of the ball
        let start = random_dir(rng) * (SCENE_RADIUS * rng.random_range(0.6..0.95));
        let inward = -start.normalize();
        let mut heading = loop {
            let h = random_dir(rng);
            if h.dot(&inward) > 0.85 {
                break h;
            }
        };
        let mut pts = vec![start];
        while pts.len() < count {
            let last = *pts.last().unwrap();
            let len = step * rng.random_range(0.85..1.15);
            let mut dir = turn(rng, &heading);
            let mut next = last + dir * len;
            if next.norm() > SCENE_RADIUS {
                // steer back towards the centre with a sharper turn
                let inward = -last.normalize();
                let Some(axis) = Unit::try_new(heading.cross(&inward), 1e-9) else {
                    break;
                };
                let angle = heading.angle(&inward).min(STEER_FACTOR * max_turn);
                dir = Rotation3::from_axis_angle(&axis, angle) * heading;
                next = last + dir * len;
                if next.norm() > SCENE_RADIUS {
                    break;
                }
            }
            pts.push(next);
            heading = dir;
        }
        if pts.len() == count {
            return Some(pts);
        }
    }
    None
}

fn in_image(p: &Point2, size: [f64; 2]) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= size[0] && p.y <= size[1]
}

/// Frames of each camera that observe one track, with their camera-2 times.
#[derive(Debug, Clone)]
struct Window {
    start: f64,
    end: f64,
    frames1: Vec<(i64, f64)>,
    frames2: Vec<(i64, f64)>,
}

impl Window {
    fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames1.iter().chain(&self.frames2).map(|(_, t)| *t)
    }
}

fn draw_window(rng: &mut impl Rng, spec: &SceneSpec) -> Result<Window, SceneError> {
    let (t_min, t_max) = spec.time_span();
    let length = spec
        .track_length
        .map_or(t_max - t_min, |l| (l as f64).min(t_max - t_min));
    for _ in 0..MAX_ATTEMPTS {
        let start = if t_max - length > t_min {
            rng.random_range(t_min..=t_max - length)
        } else {
            t_min
        };
        let end = start + length;
        let inside = |t: f64| t >= start - 1e-9 && t <= end + 1e-9;
        let frames1: Vec<(i64, f64)> = (0..spec.n_frames as i64)
            .map(|i| (i, spec.beta_gt + spec.rho * i as f64))
            .filter(|(_, t)| inside(*t))
            .collect();
        let frames2: Vec<(i64, f64)> = (0..spec.n_frames as i64)
            .map(|j| (j, j as f64))
            .filter(|(_, t)| inside(*t))
            .collect();
        if frames1.len() >= 2 && frames2.len() >= 2 {
            return Ok(Window {
                start,
                end,
                frames1,
                frames2,
            });
        }
    }
    Err(SceneError::InvalidSpec("camera time ranges do not overlap"))
}

/// One track as a function of camera-2 time.
enum TrackCurve {
    /// Arc-length parameterized: constant camera-2 image speed.
    Smooth {
        spline: Spline,
        t0: f64,
        speed: f64,
        /// Cumulative camera-2 arc length at spline parameter `k / step`.
        arc: Vec<f64>,
        step: f64,
    },
    Linear {
        cam2: CameraCalib,
        a: Point2,
        w: Point2,
        depth: DepthProfile,
    },
}

enum DepthProfile {
    Quadratic { z: [f64; 3], mid: f64, span: f64 },
    Plane { normal: Vector3<f64> },
}

impl TrackCurve {
    fn position(&self, tau: f64) -> Vector3<f64> {
        match self {
            TrackCurve::Smooth {
                spline,
                t0,
                speed,
                arc,
                step,
            } => {
                let length = (tau - t0) * speed;
                let k = arc.partition_point(|&c| c < length).clamp(1, arc.len() - 1);
                let frac = (length - arc[k - 1]) / (arc[k] - arc[k - 1]).max(f64::MIN_POSITIVE);
                spline.eval((k as f64 - 1.0 + frac) / step)
            }
            TrackCurve::Linear { cam2, a, w, depth } => {
                let p = a + w * tau;
                let ray = cam2.ray(&p);
                let center = cam2.center();
                let lambda = match depth {
                    DepthProfile::Quadratic { z, mid, span } => {
                        let x = (tau - mid) / span;
                        z[0] + z[1] * x + z[2] * x * x
                    }
                    DepthProfile::Plane { normal } => -normal.dot(&center) / normal.dot(&ray),
                };
                center + ray * lambda
            }
        }
    }

    /// Exact camera-2 pixel for linear tracks (avoids projection round-off).
    fn cam2_pixel(&self, tau: f64, cam2: &CameraCalib) -> Option<Point2> {
        match self {
            TrackCurve::Linear { a, w, .. } => Some(a + w * tau),
            TrackCurve::Smooth { .. } => cam2.project(&self.position(tau)),
        }
    }
}

/// Image pixels per scene unit at the scene center.
fn pixels_per_unit(cams: &[CameraCalib; 2]) -> f64 {
    cams[1].k[(0, 0)] / CAMERA_DISTANCE
}

fn smooth_track(
    rng: &mut impl Rng,
    spec: &SceneSpec,
    cams: &[CameraCalib; 2],
    window: &Window,
    plane: Option<(Vector3<f64>, Vector3<f64>)>,
) -> Result<TrackCurve, SceneError> {
    let needed = spec.speed_px_per_frame * (window.end - window.start).max(1.0);
    // 3D length that projects to roughly the needed image length
    let mut length = 1.1 * needed / pixels_per_unit(cams);
    for attempt in 0..MAX_ATTEMPTS {
        let count = ((length / (0.6 * SCENE_RADIUS)).ceil() as usize + 1).max(3);
        let step = length / (count - 1) as f64;
        let Some(points) = random_waypoints(rng, count, step, plane, spec.max_turn_deg) else {
            return Err(SceneError::UnreachableSpeed(spec.speed_px_per_frame));
        };
        let spline = Spline { points };
        // image arc length in camera 2 along the spline parameter
        let per_segment = 512;
        let mut arc = vec![0.0];
        let mut prev = cams[1].project(&spline.eval(0.0));
        let steps = spline.segments() * per_segment;
        for k in 1..=steps {
            let s = k as f64 / per_segment as f64;
            let p = cams[1].project(&spline.eval(s));
            let inc = match (prev, p) {
                (Some(a), Some(b)) => (b - a).norm(),
                _ => f64::INFINITY,
            };
            arc.push(arc.last().unwrap() + inc);
            prev = p;
        }
        let total = *arc.last().unwrap();
        if !total.is_finite() {
            continue;
        }
        if total < needed {
            // mostly a walk along the line of sight; redraw, and lengthen
            // only if that keeps happening
            if attempt % 10 == 9 {
                length *= 1.05;
            }
            continue;
        }
        let curve = TrackCurve::Smooth {
            spline,
            t0: window.start,
            speed: spec.speed_px_per_frame,
            arc,
            step: per_segment as f64,
        };
        if track_visible(&curve, spec, cams, window) {
            return Ok(curve);
        }
    }
    Err(SceneError::UnreachableSpeed(spec.speed_px_per_frame))
}

fn track_visible(
    curve: &TrackCurve,
    spec: &SceneSpec,
    cams: &[CameraCalib; 2],
    window: &Window,
) -> bool {
    let ok = |cam: &CameraCalib, t: f64| {
        cam.project(&curve.position(t))
            .is_some_and(|p| in_image(&p, spec.image_size))
    };
    window.frames1.iter().all(|(_, t)| ok(&cams[0], *t))
        && window.frames2.iter().all(|(_, t)| ok(&cams[1], *t))
}

fn linear_track(
    rng: &mut impl Rng,
    spec: &SceneSpec,
    cams: &[CameraCalib; 2],
    window: &Window,
    plane_normal: Option<Vector3<f64>>,
) -> Result<TrackCurve, SceneError> {
    let mid = 0.5 * (window.start + window.end);
    let span = (window.end - window.start).max(1.0);
    let [w_px, h_px] = spec.image_size;
    for _ in 0..MAX_ATTEMPTS {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let w = Point2::new(angle.cos(), angle.sin()) * spec.speed_px_per_frame;
        let center = Point2::new(
            w_px * rng.random_range(0.3..0.7),
            h_px * rng.random_range(0.3..0.7),
        );
        let a = center - w * mid;
        let depth = match plane_normal {
            Some(normal) => DepthProfile::Plane { normal },
            None => DepthProfile::Quadratic {
                z: [
                    CAMERA_DISTANCE + rng.random_range(-0.5..0.5),
                    rng.random_range(-0.8..0.8),
                    rng.random_range(-0.8..0.8),
                ],
                mid,
                span,
            },
        };
        let curve = TrackCurve::Linear {
            cam2: cams[1],
            a,
            w,
            depth,
        };
        // the exact oracle only needs points in front of both cameras
        let front = window.times().all(|t| {
            let x = curve.position(t);
            x.norm() < 4.0 * SCENE_RADIUS
                && cams[0].to_camera(&x).z > 0.1
                && cams[1].to_camera(&x).z > 0.1
        });
        if front {
            return Ok(curve);
        }
    }
    Err(SceneError::UnreachableSpeed(spec.speed_px_per_frame))
}

/// Plane through the scene center whose normal is within 60 degrees of
/// both viewing directions.
fn random_plane(rng: &mut impl Rng, cams: &[CameraCalib; 2]) -> Vector3<f64> {
    let v1 = cams[0].center().normalize();
    let v2 = cams[1].center().normalize();
    let mean = (v1 + v2).normalize();
    loop {
        let n = Vector3::from(UnitSphere.sample(rng));
        let n = if n.dot(&mean) < 0.0 { -n } else { n };
        if n.dot(&v1) > 0.5 && n.dot(&v2) > 0.5 {
            return n;
        }
    }
}

fn plane_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

/// Homography induced by the world plane `n^T X = 0`.
pub fn plane_homography(cams: &[CameraCalib; 2], normal: &Vector3<f64>) -> Matrix3<f64> {
    let (r, t) = cams[0].relative_to(&cams[1]);
    let n1 = cams[0].r * normal;
    let e = n1.dot(&cams[0].t);
    let k1inv = cams[0].k.try_inverse().expect("valid K");
    cams[1].k * (r + t * n1.transpose() / e) * k1inv
}

/// Generates the two camera track sets and their ground truth.
/// Deterministic for a given spec.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SceneError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cams = match spec.cameras {
        Some(c) => c,
        None => random_rig(&mut rng, spec.image_size, spec.min_triangulation_deg),
    };
    let normal = spec
        .motion
        .is_planar()
        .then(|| random_plane(&mut rng, &cams));
    let mut tracks = Vec::with_capacity(spec.n_tracks);
    for _ in 0..spec.n_tracks {
        let window = draw_window(&mut rng, spec)?;
        let curve = match spec.motion {
            Motion::SmoothRandom => smooth_track(&mut rng, spec, &cams, &window, None)?,
            Motion::PlanarSmooth => {
                let basis = plane_basis(normal.as_ref().expect("planar"));
                smooth_track(&mut rng, spec, &cams, &window, Some(basis))?
            }
            Motion::ExactLinearImage => linear_track(&mut rng, spec, &cams, &window, None)?,
            Motion::ExactLinearPlanar => linear_track(&mut rng, spec, &cams, &window, normal)?,
        };
        tracks.push((window, curve));
    }

    let noise = Normal::new(0.0, spec.noise_sigma).expect("valid sigma");
    let mut cam1 = Vec::new();
    let mut cam2 = Vec::new();
    let mut clean1 = Vec::new();
    let mut clean2 = Vec::new();
    for (k, (window, curve)) in tracks.iter().enumerate() {
        let track_id = format!("t{k}");
        let c1: Vec<(i64, Point2)> = window
            .frames1
            .iter()
            .map(|&(f, t)| (f, cams[0].project(&curve.position(t)).expect("in front")))
            .collect();
        let c2: Vec<(i64, Point2)> = window
            .frames2
            .iter()
            .map(|&(f, t)| (f, curve.cam2_pixel(t, &cams[1]).expect("in front")))
            .collect();
        let mut noisy = |pts: &[(i64, Point2)]| -> Vec<ImageSample> {
            pts.iter()
                .map(|&(frame, p)| {
                    let (du, dv) = if spec.noise_sigma > 0.0 {
                        (noise.sample(&mut rng), noise.sample(&mut rng))
                    } else {
                        (0.0, 0.0)
                    };
                    ImageSample {
                        frame,
                        u: p.x + du,
                        v: p.y + dv,
                    }
                })
                .collect()
        };
        let s1 = noisy(&c1);
        let s2 = noisy(&c2);
        cam1.push(Trajectory::new(CAMERA_1, track_id.clone(), s1).expect("valid track"));
        cam2.push(Trajectory::new(CAMERA_2, track_id, s2).expect("valid track"));
        clean1.push(c1.into_iter().map(|(_, p)| p).collect::<Vec<_>>());
        clean2.push(c2.into_iter().map(|(_, p)| p).collect::<Vec<_>>());
    }
    let outliers = clean2.iter().map(|c| vec![false; c.len()]).collect();
    let truth = GroundTruth {
        f_gt: fundamental_from_calib(&cams[0], &cams[1]),
        h_gt: normal.map(|n| plane_homography(&cams, &n)),
        beta_gt: spec.beta_gt,
        rho: spec.rho,
        cameras: cams,
        clean1,
        clean2,
        outliers,
    };
    Ok(Scene { cam1, cam2, truth })
}

/// Replaces `floor(fraction * n)` camera-2 samples, chosen uniformly, with
/// uniform random image points. Returns the new tracks and per-sample
/// outlier labels.
pub fn inject_outliers(
    cam2: &[Trajectory],
    fraction: f64,
    seed: u64,
    image_size: [f64; 2],
) -> Result<(Vec<Trajectory>, Vec<Vec<bool>>), SceneError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(SceneError::InvalidSpec(
            "outlier fraction must be in [0, 1)",
        ));
    }
    let total: usize = cam2.iter().map(|t| t.len()).sum();
    let count = (fraction * total as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample_indices(&mut rng, total, count).into_vec();
    chosen.sort_unstable();
    let mut labels: Vec<Vec<bool>> = cam2.iter().map(|t| vec![false; t.len()]).collect();
    let mut samples: Vec<Vec<ImageSample>> = cam2.iter().map(|t| t.samples().to_vec()).collect();
    for flat in chosen {
        let mut rem = flat;
        let mut track = 0;
        while rem >= samples[track].len() {
            rem -= samples[track].len();
            track += 1;
        }
        labels[track][rem] = true;
        let s = &mut samples[track][rem];
        s.u = rng.random_range(0.0..image_size[0]);
        s.v = rng.random_range(0.0..image_size[1]);
    }
    let tracks = cam2
        .iter()
        .zip(samples)
        .map(|(t, s)| Trajectory::new(t.camera_id(), t.track_id(), s).expect("valid track"))
        .collect();
    Ok((tracks, labels))
}

impl Scene {
    /// Applies [`inject_outliers`] to camera 2 and records the labels.
    pub fn with_outliers(mut self, fraction: f64, seed: u64) -> Result<Self, SceneError> {
        let size = [
            2.0 * self.truth.cameras[1].k[(0, 2)],
            2.0 * self.truth.cameras[1].k[(1, 2)],
        ];
        let (tracks, labels) = inject_outliers(&self.cam2, fraction, seed, size)?;
        self.cam2 = tracks;
        self.truth.outliers = labels;
        Ok(self)
    }
}
