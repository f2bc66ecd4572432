use action_exit::kinematics::{rollout_bicycle, ControlSample, VehicleState, DEFAULT_WHEELBASE};

/// Largest distance from the rollout points to the exact turning circle of a
/// vehicle starting at the origin heading +x with constant steering `alpha`.
fn max_radial_deviation(alpha: f64, speed: f64, duration: f64, dt: f64) -> f64 {
    let steps = (duration / dt).round() as usize;
    let controls = vec![ControlSample::new(speed, alpha).unwrap(); steps];
    let start = VehicleState::new(0.0, 0.0, 0.0, DEFAULT_WHEELBASE).unwrap();
    let traj = rollout_bicycle(&start, &controls, dt).unwrap();
    let radius = DEFAULT_WHEELBASE / alpha.tan();
    traj.points()
        .iter()
        .map(|p| (p.x.hypot(p.y - radius) - radius).abs())
        .fold(0.0, f64::max)
}

#[test]
fn arc_error_is_first_order_in_dt() {
    for alpha in [0.1, 0.2, 0.4] {
        let mut dt = 0.2;
        let mut prev = max_radial_deviation(alpha, 8.0, 4.0, dt);
        for _ in 0..4 {
            dt /= 2.0;
            let next = max_radial_deviation(alpha, 8.0, 4.0, dt);
            assert!(
                next <= 0.5 * prev * 1.1,
                "alpha {alpha} dt {dt}: {next} vs {prev}"
            );
            prev = next;
        }
        // deviation is about half a step length
        assert!(prev < 8.0 * dt, "alpha {alpha}: {prev}");
    }
}

#[test]
fn points_stay_near_the_circle() {
    // O(dt): deviation bounded by a couple of step lengths
    for alpha in [0.1, 0.2, 0.4] {
        let dev = max_radial_deviation(alpha, 10.0, 3.0, 0.05);
        assert!(dev < 2.0 * 10.0 * 0.05, "alpha {alpha}: {dev}");
    }
}

#[test]
fn rollout_scores_against_a_reference() {
    let straight = vec![ControlSample::new(10.0, 0.0).unwrap(); 6];
    let turning = vec![ControlSample::new(10.0, 0.05).unwrap(); 6];
    let start = VehicleState::new(0.0, 0.0, 0.0, DEFAULT_WHEELBASE).unwrap();
    let reference = rollout_bicycle(&start, &straight, 0.5).unwrap();
    let plan = rollout_bicycle(&start, &turning, 0.5).unwrap();
    let d = action_exit::l2_dissimilarity(&plan, &reference)
        .unwrap()
        .value();
    assert!(d > 0.0);
    let at2 = action_exit::displacement_at(&plan, &reference, 2.0).unwrap();
    assert!(at2 > 0.0 && at2 < 5.0, "{at2}");
}
