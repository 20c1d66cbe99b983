//! Every solver recovers the ground-truth shift and model from noise-free
//! data for which the linearized model is exact.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twoview_sync::geometry::{linearize_tracks, TimeModel, TwoViewModel};
use twoview_sync::solvers::{CorrSet, SolverKind, SolverOptions};
use twoview_sync::synth::{generate_scene, Motion, Scene, SceneSpec};
use twoview_sync::LinearizedCorrespondence;

fn exact_scene(motion: Motion, beta: f64, rho: f64, seed: u64) -> Scene {
    let spec = SceneSpec {
        seed,
        beta_gt: beta,
        rho,
        motion,
        n_tracks: 12,
        n_frames: 60,
        ..SceneSpec::default()
    };
    generate_scene(&spec).unwrap()
}

/// Correspondences grouped by track.
fn pool(scene: &Scene, beta0: f64, d: i64) -> Vec<Vec<LinearizedCorrespondence>> {
    let anchor = TimeModel::new(beta0, scene.truth.rho).unwrap();
    scene
        .cam1
        .iter()
        .zip(&scene.cam2)
        .map(|(a, b)| {
            linearize_tracks(std::slice::from_ref(a), std::slice::from_ref(b), &anchor, d).unwrap()
        })
        .collect()
}

/// One sample from each of `n` distinct tracks: three samples of one
/// straight camera-2 track would be collinear.
fn pick(pool: &[Vec<LinearizedCorrespondence>], n: usize, rng: &mut ChaCha8Rng) -> CorrSet {
    let tracks = sample(rng, pool.len(), n);
    let items = tracks
        .iter()
        .map(|t| pool[t][rng.random_range(0..pool[t].len())])
        .collect();
    CorrSet::new(items).unwrap()
}

/// Runs `kind` on random minimal samples and counts the trials in which a
/// candidate matches both the shift and the model.
fn recovered(kind: SolverKind, scene: &Scene, beta0: f64, d: i64, trials: usize) -> usize {
    let truth = match kind.model_kind() {
        twoview_sync::ModelKind::Fundamental => TwoViewModel::fundamental(scene.truth.f_gt),
        twoview_sync::ModelKind::Homography => {
            TwoViewModel::homography(scene.truth.h_gt.expect("planar scene"))
        }
    }
    .unwrap();
    let expected_beta = if kind.estimates_shift() {
        scene.truth.beta_gt
    } else {
        beta0
    };
    let pool = pool(scene, beta0, d);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    // 12.5 lies outside the default plausibility window for d = 1
    let opts = SolverOptions {
        beta_max: Some(50.0),
        ..SolverOptions::default()
    };
    (0..trials)
        .filter(|_| {
            let corr = pick(&pool, kind.sample_size(), &mut rng);
            kind.solve(&corr, &opts).is_ok_and(|cands| {
                cands.iter().any(|c| {
                    (c.beta - expected_beta).abs() < 1e-6 * (1.0 + expected_beta.abs())
                        && c.model.distance(&truth) < 1e-6
                })
            })
        })
        .count()
}

#[test]
fn gep_f_recovers_shift() {
    for (k, &beta) in [-7.3, 0.0, 0.4, 3.0, 12.5].iter().enumerate() {
        let scene = exact_scene(Motion::ExactLinearImage, beta, 1.0, k as u64);
        assert_eq!(
            recovered(SolverKind::FGep, &scene, 0.0, 1, 20),
            20,
            "beta {beta}"
        );
    }
}

#[test]
fn min_f_recovers_shift() {
    for (k, &beta) in [-7.3, 0.0, 0.4, 3.0, 12.5].iter().enumerate() {
        let scene = exact_scene(Motion::ExactLinearImage, beta, 1.0, k as u64);
        assert_eq!(
            recovered(SolverKind::FMin, &scene, 0.0, 1, 20),
            20,
            "beta {beta}"
        );
    }
}

#[test]
fn min_h_recovers_shift() {
    for (k, &beta) in [-7.3, 0.0, 0.4, 3.0, 12.5].iter().enumerate() {
        let scene = exact_scene(Motion::ExactLinearPlanar, beta, 1.0, k as u64);
        assert_eq!(
            recovered(SolverKind::HMin, &scene, 0.0, 1, 20),
            20,
            "beta {beta}"
        );
    }
}

#[test]
fn shift_is_absolute_for_any_anchor() {
    let scene = exact_scene(Motion::ExactLinearImage, 7.2, 1.0, 3);
    for kind in [SolverKind::FGep, SolverKind::FMin] {
        assert_eq!(recovered(kind, &scene, 5.0, 2, 10), 10, "{}", kind.name());
    }
    let scene = exact_scene(Motion::ExactLinearPlanar, 7.2, 1.0, 3);
    assert_eq!(recovered(SolverKind::HMin, &scene, 5.0, 2, 10), 10);
}

#[test]
fn frame_rate_ratio_is_supported() {
    for rho in [0.5, 1.0 / 3.0, 2.0] {
        let scene = exact_scene(Motion::ExactLinearImage, 2.5, rho, 11);
        assert_eq!(
            recovered(SolverKind::FGep, &scene, 0.0, 1, 10),
            10,
            "rho {rho}"
        );
        assert_eq!(
            recovered(SolverKind::FMin, &scene, 0.0, 1, 10),
            10,
            "rho {rho}"
        );
        let scene = exact_scene(Motion::ExactLinearPlanar, 2.5, rho, 11);
        assert_eq!(
            recovered(SolverKind::HMin, &scene, 0.0, 1, 10),
            10,
            "rho {rho}"
        );
    }
}

#[test]
fn classic_solvers_recover_synchronized_models() {
    let scene = exact_scene(Motion::ExactLinearImage, 0.0, 1.0, 5);
    assert_eq!(recovered(SolverKind::F7pt, &scene, 0.0, 1, 20), 20);
    let scene = exact_scene(Motion::ExactLinearPlanar, 0.0, 1.0, 5);
    assert_eq!(recovered(SolverKind::H4pt, &scene, 0.0, 1, 20), 20);
}

#[test]
fn default_window_discards_far_shifts() {
    let scene = exact_scene(Motion::ExactLinearImage, 12.5, 1.0, 4);
    let pools = pool(&scene, 0.0, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let corr = pick(&pools, 9, &mut rng);
        if let Ok(cands) = SolverKind::FGep.solve(&corr, &SolverOptions::default()) {
            assert!(cands.iter().all(|c| c.beta.abs() <= 10.0));
        }
    }
}
