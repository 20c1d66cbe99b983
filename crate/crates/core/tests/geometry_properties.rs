use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use twoview_sync::geometry::{
    decompose_f, epipolar_residual, essential_from_pose, homography_residual, linearize,
    rotation_error, time_map, translation_error, Point2,
};
use twoview_sync::{ImageSample, TimeModel, Trajectory, TwoViewModel};

fn intrinsics(focal: f64) -> Matrix3<f64> {
    Matrix3::new(focal, 0.0, 500.0, 0.0, focal, 500.0, 0.0, 0.0, 1.0)
}

fn matrix() -> impl Strategy<Value = Matrix3<f64>> {
    prop::array::uniform9(-1.0..1.0f64).prop_map(|a| Matrix3::from_row_slice(&a))
}

fn point() -> impl Strategy<Value = Point2> {
    (0.0..1000.0f64, 0.0..1000.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

proptest! {
    #[test]
    fn time_map_is_affine(i in -1000i64..1000, beta in -100.0..100.0f64, rho in 0.1..4.0f64) {
        let m = TimeModel::new(beta, rho).unwrap();
        let step = time_map(i + 1, &m) - time_map(i, &m);
        prop_assert!((step - rho).abs() < 1e-9);
    }

    #[test]
    fn linearization_is_exact_on_linear_tracks(
        start in (0.0..1000.0f64, 0.0..1000.0f64),
        vel in (-8.0..8.0f64, -8.0..8.0f64),
        frame in 20i64..80,
        beta0 in -10.0..10.0f64,
        d in prop::sample::select(vec![-8i64, -4, -2, -1, 1, 2, 4, 8]),
        offset in -1.0..1.0f64,
    ) {
        let at = |j: f64| Point2::new(start.0 + vel.0 * j, start.1 + vel.1 * j);
        let samples = (0..100)
            .map(|j| ImageSample { frame: j, u: at(j as f64).x, v: at(j as f64).y })
            .collect();
        let track = Trajectory::new("b", "t", samples).unwrap();
        let s = ImageSample { frame, u: 1.0, v: 2.0 };
        let c = linearize(&track, &s, &TimeModel::new(beta0, 1.0).unwrap(), d).unwrap();
        let beta = beta0 + offset * d.abs() as f64;
        let truth = at(beta + frame as f64);
        let err = (c.predict(beta) - truth).norm();
        // relative to the pixel magnitudes
        prop_assert!(err < 1e-12 * (1.0 + truth.norm()), "{err:e}");
        prop_assert!(c.v_vec.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn residuals_ignore_model_scale(m in matrix(), scale in 1e-3..1e3f64, a in point(), b in point()) {
        let f1 = TwoViewModel::fundamental(m);
        prop_assume!(f1.is_ok());
        let f1 = f1.unwrap();
        let f2 = TwoViewModel::fundamental(m * -scale).unwrap();
        let (r1, r2) = (epipolar_residual(&f1, &a, &b), epipolar_residual(&f2, &a, &b));
        prop_assert!(r1 >= 0.0);
        prop_assert!((r1 - r2).abs() <= 1e-9 * (1.0 + r1) || (r1.is_infinite() && r2.is_infinite()));

        let h1 = TwoViewModel::homography(m).unwrap();
        let h2 = TwoViewModel::homography(m * scale).unwrap();
        if let (Ok(e1), Ok(e2)) = (homography_residual(&h1, &a, &b), homography_residual(&h2, &a, &b)) {
            prop_assert!(e1 >= 0.0);
            prop_assert!((e1 - e2).abs() <= 1e-9 * (1.0 + e1) || (e1.is_infinite() && e2.is_infinite()));
        }
    }

    #[test]
    fn decomposition_inverts_composition(
        angles in (-0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64),
        dir in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        focal in 300.0..1500.0f64,
        depths in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, 4.0..8.0f64), 8..16),
    ) {
        let t = Vector3::new(dir.0, dir.1, dir.2);
        prop_assume!(t.norm() > 0.1);
        let r = Rotation3::from_euler_angles(angles.0, angles.1, angles.2).into_inner();
        let k = intrinsics(focal);
        let kinv = k.try_inverse().unwrap();
        let f = kinv.transpose() * essential_from_pose(&r, &t) * kinv;
        let pixel = |x: Vector3<f64>| {
            let p = k * x;
            Point2::new(p.x / p.z, p.y / p.z)
        };
        let probes: Vec<(Point2, Point2)> = depths
            .iter()
            .map(|&(x, y, z)| Vector3::new(x, y, z))
            .filter(|x| (r * x + t).z > 0.5)
            .map(|x| (pixel(x), pixel(r * x + t)))
            .collect();
        prop_assume!(probes.len() >= 8);
        let (r_est, t_est) = decompose_f(&TwoViewModel::fundamental(f).unwrap(), &k, &k, &probes).unwrap();
        prop_assert!(rotation_error(&r_est, &r) < 1e-8);
        prop_assert!(translation_error(&t_est, &t).unwrap() < 1e-8);
    }
}
