//! Joint estimation of two-view geometry and temporal offset for
//! unsynchronized cameras.
//!
//! Two cameras observe the same moving points but sample them at different
//! instants. Camera-1 frame `i` corresponds to camera-2 time `beta + rho * i`.
//! Linearizing the camera-2 image track around an initial guess turns the
//! epipolar constraint (or the homography relation) into a small polynomial
//! system in the unknown shift `beta` and the geometry, which is solved by the
//! closed-form solvers in [`solvers`] and made robust by [`robust`]. Large
//! offsets are handled by the iterative search in [`sync`].
//!
//! ```no_run
//! use twoview_sync::robust::{ransac_estimate, RansacParams, SolverKind};
//! use twoview_sync::synth::{generate_scene, SceneSpec};
//!
//! let spec = SceneSpec { beta_gt: 2.0, ..SceneSpec::default() };
//! let scene = generate_scene(&spec).unwrap();
//! let params = RansacParams { d: 4, ..RansacParams::default() };
//! let result = ransac_estimate(&scene.cam1, &scene.cam2, SolverKind::FGep, &params).unwrap();
//! println!("beta = {:.3}", result.best.beta);
//! ```

pub mod geometry;
pub mod harness;
pub mod io;
pub mod robust;
pub mod solvers;
pub mod sync;
pub mod synth;

pub use geometry::{
    ImageSample, LinearizedCorrespondence, ModelKind, TimeModel, Trajectory, TwoViewModel,
};
