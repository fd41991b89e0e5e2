use frontlab::*;

fn bistable_wave() -> WaveProfile {
    bistable_front(&build_cubic_bistable(1.0, 0.3).unwrap(), 1e-8).unwrap()
}

/// A one-snapshot trajectory holding `phi(x + 5)`.
fn shifted_wave_run(phi: &WaveProfile) -> Trajectory {
    let p = Problem::new(
        HeterogeneousField::uniform(Reaction::Inert, 5.0),
        0.0,
        -40.0,
        40.0,
    )
    .with_grow(GrowPolicy::Fixed);
    let u0 = InitialDatum::sample(-40.0, 40.0, 0.1, |x| phi.eval(x + 5.0));
    integrate(&p, &u0, 0.1, 1.0).unwrap()
}

#[test]
fn self_match_recovers_shift() {
    let phi = bistable_wave();
    let traj = shifted_wave_run(&phi);
    let m = match_profile(
        &traj,
        0.0,
        &phi,
        phi.speed,
        (-20.0, 20.0),
        Orientation::Direct,
    )
    .unwrap();
    assert!((m.shift - 5.0).abs() < 1e-6, "{}", m.shift);
    assert!(m.sup_error <= 1e-10, "{:e}", m.sup_error);
}

#[test]
fn kpp_profile_does_not_match_bistable_snapshot() {
    let phi = bistable_wave();
    let traj = shifted_wave_run(&phi);
    let fm = build_kpp(0.7).unwrap();
    let psi = kpp_front(&fm, kpp_min_speed(&fm).unwrap(), 1e-8).unwrap();
    let m = match_profile(&traj, 0.0, &psi, 0.0, (-20.0, 20.0), Orientation::Direct).unwrap();
    assert!(m.sup_error > 0.1, "{}", m.sup_error);
}

#[test]
fn match_window_must_lie_in_domain() {
    let phi = bistable_wave();
    let traj = shifted_wave_run(&phi);
    let r = match_profile(&traj, 0.0, &phi, 0.0, (-50.0, 0.0), Orientation::Direct);
    assert!(matches!(r, Err(Error::WindowOutsideDomain { .. })));
}

#[test]
fn two_levels_give_one_speed() {
    let p = Problem::new(reference_field(1.0, 0.3, 5.0).unwrap(), 0.0, -60.0, 60.0);
    let opts = RunOptions::new(1.0).levels(&[0.3, 0.7]);
    let traj = integrate_with(
        &p,
        &InitialDatum::plateau(0.9, 10.0, 0.0, 2.0),
        150.0,
        &opts,
        |_| false,
    )
    .unwrap();
    let lo = fit_speed(traj.trace(0.3, Side::Right).unwrap(), (75.0, 150.0)).unwrap();
    let hi = fit_speed(traj.trace(0.7, Side::Right).unwrap(), (75.0, 150.0)).unwrap();
    let tol = 2.0 * (lo.stderr + hi.stderr);
    assert!(
        (lo.speed - hi.speed).abs() <= tol,
        "{} vs {} (tol {tol:e})",
        lo.speed,
        hi.speed
    );
}

#[test]
fn log_fit_on_pure_line_finds_no_log() {
    let mut tr = FrontTrace::new(0.5, Side::Left);
    for i in 0..=6000 {
        let t = 100.0 + i as f64 * 0.1;
        tr.push(t, Some(-1.5 * t + 3.0 + 0.01 * (0.7 * t).sin()));
    }
    let fit = fit_log_delay(&tr, (100.0, 700.0), Some(-1.5)).unwrap();
    assert!(fit.b.abs() <= 0.1, "{}", fit.b);
    assert!(fit.frozen.unwrap().b.abs() <= 0.1);
}

#[test]
fn retreating_kpp_edge_lags_logarithmically() {
    let c = 2.0;
    let c_m = 2.0 * 0.7f64.sqrt();
    let p = Problem::new(reference_field(1.0, 0.3, 5.0).unwrap(), c, -60.0, 60.0);
    let traj = integrate(&p, &InitialDatum::plateau(0.9, 10.0, 0.0, 2.0), 300.0, 1.0).unwrap();
    let fit = fit_log_delay(
        traj.trace(0.5, Side::Right).unwrap(),
        (100.0, 300.0),
        Some(c_m - c),
    )
    .unwrap();
    let lag = -fit.frozen.unwrap().b;
    assert!(lag >= 1.0, "lag {lag}");
}

#[test]
fn positions_left_of_left_crossing_are_below_level() {
    let p = Problem::new(reference_field(1.0, 0.3, 5.0).unwrap(), 0.5, -60.0, 60.0);
    let traj = integrate(&p, &InitialDatum::plateau(0.9, 10.0, 0.0, 2.0), 30.0, 1.0).unwrap();
    let tr = trace_level(&traj, 0.5, Side::Left).unwrap();
    for (s, pos) in traj.snapshots.iter().zip(&tr.positions) {
        let Some(x) = pos else { continue };
        assert!(*x >= s.x_lo && *x <= s.x_hi(traj.dx));
        for (i, &u) in s.values.iter().enumerate() {
            if s.x(i, traj.dx) < x - traj.dx {
                assert!(u < 0.5);
            }
        }
    }
}
