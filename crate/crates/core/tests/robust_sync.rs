use proptest::prelude::*;
use twoview_sync::geometry::TimeModel;
use twoview_sync::robust::{
    build_pool, ransac_estimate, ransac_estimate_audited, residuals, RansacError, RansacParams,
    SolverKind,
};
use twoview_sync::sync::{iterative_sync, replay_beta, IterParams, SyncError};
use twoview_sync::synth::{generate_scene, Motion, Scene, SceneSpec};
use twoview_sync::LinearizedCorrespondence;

fn scene(motion: Motion, beta: f64, noise: f64, seed: u64) -> Scene {
    generate_scene(&SceneSpec {
        seed,
        beta_gt: beta,
        noise_sigma: noise,
        motion,
        n_frames: 50,
        track_length: None,
        ..SceneSpec::default()
    })
    .unwrap()
}

/// Clean iff every camera-2 sample weighted in the prediction at the true
/// shift is clean.
fn oracle_labels(scene: &Scene, items: &[LinearizedCorrespondence]) -> Vec<bool> {
    items
        .iter()
        .map(|c| {
            let k = scene
                .cam1
                .iter()
                .position(|t| t.samples().contains(&c.sample))
                .unwrap();
            let t2 = &scene.cam2[k];
            let outlier = |frame: i64| {
                let idx = t2.samples().iter().position(|s| s.frame == frame).unwrap();
                scene.truth.outliers[k][idx]
            };
            let j = scene.truth.beta_gt + scene.truth.rho * c.sample.frame as f64;
            let w = (j - c.j0 as f64) / c.d as f64;
            !((1.0 - w).abs() > 1e-9 && outlier(c.j0)) && !(w.abs() > 1e-9 && outlier(c.j0 + c.d))
        })
        .collect()
}

#[test]
fn exact_data_is_all_inlier() {
    let cases = [
        (SolverKind::FGep, Motion::ExactLinearImage, 2.0),
        (SolverKind::FMin, Motion::ExactLinearImage, 2.0),
        (SolverKind::HMin, Motion::ExactLinearPlanar, 2.0),
        // shift-free solvers are exact only when the anchor is the truth
        (SolverKind::F7pt, Motion::ExactLinearImage, 0.0),
        (SolverKind::H4pt, Motion::ExactLinearPlanar, 0.0),
    ];
    for (kind, motion, beta) in cases {
        let s = scene(motion, beta, 0.0, 3);
        let params = RansacParams {
            d: 2,
            ..RansacParams::default()
        };
        let r = ransac_estimate(&s.cam1, &s.cam2, kind, &params).unwrap();
        assert_eq!(r.inlier_count, r.total(), "{}", kind.name());
        assert!(
            (r.best.beta - beta).abs() < 1e-6,
            "{} beta {}",
            kind.name(),
            r.best.beta
        );
    }
}

#[test]
fn outliers_are_separated_exactly_on_exact_data() {
    for kind in [SolverKind::HMin, SolverKind::FGep] {
        let motion = if kind == SolverKind::HMin {
            Motion::ExactLinearPlanar
        } else {
            Motion::ExactLinearImage
        };
        let s = scene(motion, 2.0, 0.0, 5).with_outliers(0.3, 9).unwrap();
        let params = RansacParams {
            d: 2,
            max_iterations: 30_000,
            ..RansacParams::default()
        };
        let r = ransac_estimate(&s.cam1, &s.cam2, kind, &params).unwrap();
        assert_eq!(
            r.inlier_mask,
            oracle_labels(&s, &r.correspondences),
            "{}",
            kind.name()
        );
        assert!(
            (r.best.beta - 2.0).abs() < 1e-6,
            "{} beta {}",
            kind.name(),
            r.best.beta
        );
    }
}

#[test]
fn same_seed_same_result() {
    let s = scene(Motion::SmoothRandom, 3.0, 0.5, 8)
        .with_outliers(0.2, 1)
        .unwrap();
    for params in [
        RansacParams {
            d: 4,
            seed: 11,
            ..RansacParams::default()
        },
        RansacParams {
            d: 4,
            seed: 11,
            refine: true,
            reanchor: true,
            ..RansacParams::default()
        },
    ] {
        let a = ransac_estimate_audited(&s.cam1, &s.cam2, SolverKind::FGep, &params).unwrap();
        let b = ransac_estimate_audited(&s.cam1, &s.cam2, SolverKind::FGep, &params).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn refinement_never_loses_inliers() {
    for seed in 0..6 {
        let s = scene(Motion::SmoothRandom, 1.4, 0.5, seed)
            .with_outliers(0.2, seed)
            .unwrap();
        let plain = RansacParams {
            d: 2,
            seed,
            ..RansacParams::default()
        };
        let refined = RansacParams {
            refine: true,
            ..plain
        };
        let a = ransac_estimate(&s.cam1, &s.cam2, SolverKind::FGep, &plain).unwrap();
        let b = ransac_estimate(&s.cam1, &s.cam2, SolverKind::FGep, &refined).unwrap();
        assert!(
            b.inlier_count >= a.inlier_count,
            "seed {seed}: {} < {}",
            b.inlier_count,
            a.inlier_count
        );
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let s = scene(Motion::SmoothRandom, 0.0, 0.0, 1);
    for params in [
        RansacParams {
            threshold: 0.0,
            ..RansacParams::default()
        },
        RansacParams {
            confidence: 1.0,
            ..RansacParams::default()
        },
        RansacParams {
            d: 0,
            ..RansacParams::default()
        },
    ] {
        let e = ransac_estimate(&s.cam1, &s.cam2, SolverKind::FGep, &params).unwrap_err();
        assert!(matches!(e, RansacError::InvalidParams(_)), "{e}");
    }
    // no camera-2 tracks, so nothing pairs up
    let e = ransac_estimate(&s.cam1, &[], SolverKind::FGep, &RansacParams::default()).unwrap_err();
    assert_eq!(
        e,
        RansacError::NotEnoughCorrespondences {
            needed: 9,
            available: 0
        }
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mask_is_sound_and_best_dominates_the_audit(
        seed in 0u64..1000,
        beta in -3.0..3.0f64,
        outliers in 0.0..0.3f64,
        refine in any::<bool>(),
    ) {
        let s = scene(Motion::SmoothRandom, beta, 0.5, seed).with_outliers(outliers, seed).unwrap();
        let params = RansacParams { d: 2, seed, refine, max_iterations: 200, ..RansacParams::default() };
        let (r, audit) = ransac_estimate_audited(&s.cam1, &s.cam2, SolverKind::FGep, &params).unwrap();
        let res = residuals(&r.best, &r.correspondences);
        let mask: Vec<bool> = res.iter().map(|e| *e <= params.threshold).collect();
        prop_assert_eq!(&mask, &r.inlier_mask);
        prop_assert_eq!(r.inlier_count, mask.iter().filter(|m| **m).count());
        prop_assert!(audit.iter().all(|a| a.inliers <= r.inlier_count));
        prop_assert!(!audit.is_empty());
    }

    #[test]
    fn pool_scores_every_sample_with_a_window(seed in 0u64..1000, d in 1i64..8) {
        let s = scene(Motion::SmoothRandom, 0.0, 0.0, seed);
        let anchor = TimeModel::new(0.0, 1.0).unwrap();
        let pool = build_pool(&s.cam1, &s.cam2, &anchor, d).unwrap();
        prop_assert!(pool.samplable.iter().all(|&k| pool.items[k].d == d));
        prop_assert!(pool.items.iter().all(|c| c.d.abs() == d));
        let samples: usize = s.cam1.iter().map(|t| t.len()).sum();
        prop_assert_eq!(pool.items.len(), samples);
    }
}

fn sync_scene(beta: f64, seed: u64) -> Scene {
    generate_scene(&SceneSpec {
        seed,
        beta_gt: beta,
        speed_px_per_frame: 4.0,
        track_length: None,
        ..SceneSpec::default()
    })
    .unwrap()
}

fn sync_params(seed: u64) -> IterParams {
    IterParams {
        ransac: RansacParams {
            seed,
            ..RansacParams::default()
        },
        ..IterParams::default()
    }
}

/// Checks the bookkeeping invariants of a finished run.
fn check_run(run: &twoview_sync::sync::SyncRun, params: &IterParams) {
    assert_eq!(replay_beta(&run.iterations), Some(run.beta_total));
    let accepted: Vec<usize> = run
        .iterations
        .iter()
        .filter(|l| l.accepted)
        .map(|l| l.inlier_count)
        .collect();
    assert!(accepted.windows(2).all(|w| w[0] < w[1]), "{accepted:?}");
    let skipped = run.iterations.len() - accepted.len();
    assert!(run.ransac_invocations <= 2 * (accepted.len() + skipped));
    let mut streak = 0;
    for l in &run.iterations {
        streak = if l.accepted { 0 } else { streak + 1 };
        assert!(streak <= params.p_max as usize + 1);
        assert_eq!(streak, l.skipped_after);
    }
}

#[test]
fn large_forward_shift_converges() {
    let s = sync_scene(50.0, 2);
    let params = sync_params(2);
    let run = iterative_sync(&s.cam1, &s.cam2, &params).unwrap();
    assert!(
        (run.beta_total - 50.0).abs() < 1.0,
        "beta {}",
        run.beta_total
    );
    assert!(run.accepted_steps() <= 12, "{} steps", run.accepted_steps());
    check_run(&run, &params);
}

#[test]
fn backward_shift_converges() {
    let s = sync_scene(-10.0, 4);
    let params = sync_params(4);
    let run = iterative_sync(&s.cam1, &s.cam2, &params).unwrap();
    assert!(
        (run.beta_total + 10.0).abs() < 1.0,
        "beta {}",
        run.beta_total
    );
    check_run(&run, &params);
}

#[test]
fn synchronized_input_stays_near_zero() {
    let s = sync_scene(0.0, 6);
    let params = sync_params(6);
    let run = iterative_sync(&s.cam1, &s.cam2, &params).unwrap();
    assert!(run.beta_total.abs() < 1.0, "beta {}", run.beta_total);
    check_run(&run, &params);
}

#[test]
fn sync_is_deterministic() {
    let s = sync_scene(12.0, 7);
    let params = sync_params(7);
    let a = iterative_sync(&s.cam1, &s.cam2, &params).unwrap();
    let b = iterative_sync(&s.cam1, &s.cam2, &params).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sync_rejects_bad_parameters() {
    let s = sync_scene(0.0, 1);
    let bad = IterParams {
        p_min: 3,
        p_max: 2,
        ..IterParams::default()
    };
    assert!(matches!(
        iterative_sync(&s.cam1, &s.cam2, &bad),
        Err(SyncError::InvalidParams(_))
    ));
    let bad = IterParams {
        k_max: 0,
        ..IterParams::default()
    };
    assert!(matches!(
        iterative_sync(&s.cam1, &s.cam2, &bad),
        Err(SyncError::InvalidParams(_))
    ));
}
