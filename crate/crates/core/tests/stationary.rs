use frontlab::stationary::ProbeRegime;
use frontlab::*;

fn blocking_problem() -> Problem {
    Problem::new(reference_field(1.0, 0.3, 5.0).unwrap(), 1.0, -80.0, 80.0)
}

#[test]
fn profile_is_a_steady_state_of_the_stepper() {
    let p = blocking_problem();
    let u = solve_blocking_profile(&p, 80.0, 1e-10).unwrap();
    assert!(u.residual_max <= 1e-10);
    let mid = u.eval(0.0);
    assert!(mid > 0.0 && mid < 1.0);

    let q = Problem::new(p.field.clone(), p.c, u.x_lo, u.x_hi()).with_grow(GrowPolicy::Fixed);
    let u0 = InitialDatum::sample(u.x_lo, u.x_hi(), u.dx, |x| u.eval(x));
    let traj = integrate(&q, &u0, 50.0, 5.0).unwrap();
    for s in &traj.snapshots {
        let drift = s
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - u.eval(s.x(i, traj.dx))).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-6, "t = {}: drift {drift:e}", s.t);
    }
}

#[test]
fn profile_matches_long_time_limit() {
    let p = blocking_problem();
    let u = solve_blocking_profile(&p, 80.0, 1e-10).unwrap();
    let traj = integrate(&p, &InitialDatum::plateau(0.9, 10.0, 0.0, 2.0), 300.0, 10.0).unwrap();
    let last = traj.last();
    let gap = last
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| (last.x(i, traj.dx), v))
        .filter(|(x, _)| x.abs() <= 40.0)
        .map(|(x, v)| (v - u.eval(x)).abs())
        .fold(0.0, f64::max);
    assert!(gap <= 1e-3, "gap {gap:e}");
}

#[test]
fn tail_rates_for_unit_advection() {
    let (eta, zeta) = tail_rates(
        &build_kpp(0.7).unwrap(),
        &build_cubic_bistable(1.0, 0.3).unwrap(),
        1.0,
    );
    assert!((eta - (-1.0 + 3.8f64.sqrt()) / 2.0).abs() < 1e-12);
    assert!((zeta - (1.0 + 2.2f64.sqrt()) / 2.0).abs() < 1e-12);
}

#[test]
fn probe_finds_one_blocking_state() {
    let rep = uniqueness_probe(&blocking_problem(), 4).unwrap();
    assert_eq!(rep.regime, ProbeRegime::Blocking);
    assert!(rep.consistent, "{rep:?}");
    assert_eq!(rep.clusters, 1);
}

#[test]
fn probe_below_bistable_speed_gives_one() {
    let p = Problem::new(reference_field(1.0, 0.3, 5.0).unwrap(), 0.0, -80.0, 80.0);
    let rep = uniqueness_probe(&p, 3).unwrap();
    assert_eq!(rep.regime, ProbeRegime::Invasion);
    assert!(rep.consistent, "{rep:?}");
}

#[test]
fn semi_persistence_examples() {
    let p = blocking_problem();
    let traj = integrate(&p, &InitialDatum::plateau(0.9, 10.0, 0.0, 2.0), 100.0, 1.0).unwrap();
    assert!(semi_persistence_check(&traj, 0.0));

    let traj = integrate(&p, &InitialDatum::Zero, 20.0, 1.0).unwrap();
    assert!(!semi_persistence_check(&traj, 0.0));

    let dying = Problem::new(reference_field(1.0, 0.6, 5.0).unwrap(), -1.5, -60.0, 60.0)
        .with_bc(BoundaryCondition::DirichletFarfield);
    let traj = integrate(
        &dying,
        &InitialDatum::plateau(0.9, 10.0, 0.0, 2.0),
        100.0,
        1.0,
    )
    .unwrap();
    assert!(!semi_persistence_check(&traj, 0.0));
}
