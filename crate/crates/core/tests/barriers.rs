use frontlab::*;

/// Runs the bistable equation from the bare wave below a Fife-McLeod supersolution
/// and returns the worst `u - w` over all snapshots.
fn supersolution_gap(direction: Direction, c: f64) -> f64 {
    let (k, theta) = (1.0, 0.3);
    let fb = build_cubic_bistable(k, theta).unwrap();
    let c_m = kpp_min_speed(&build_kpp(k * (1.0 - theta)).unwrap()).unwrap();
    let phi = bistable_front(&fb, 1e-8).unwrap();
    let params = fm_params(&phi, c, c_m, direction).unwrap();
    let t_span = 60.0;
    let (_, xs) = params.certification_grid(t_span, 0.25, 20.0);
    // The field is homogeneous, so the certified strip is translated to sit right of the origin.
    let shift = xs[0] + 20.0;
    let (x_lo, x_hi) = (xs[0] - shift, *xs.last().unwrap() - shift);
    let w = |t: f64, x: f64| {
        params.barrier_value(&fb, &phi, BarrierKind::Super, params.t0 + t, x + shift)
    };

    let dx = 0.1;
    let u0 = InitialDatum::sample(x_lo, x_hi - 1.0, dx, |x| {
        (w(0.0, x) - params.delta).clamp(0.0, 1.0)
    });
    let p = Problem::new(HeterogeneousField::uniform(fb.clone(), 5.0), c, x_lo, x_hi)
        .with_bc(BoundaryCondition::DirichletFarfield)
        .with_grow(GrowPolicy::Fixed);
    let traj = integrate(&p, &u0, t_span, 1.0).unwrap();
    traj.snapshots
        .iter()
        .flat_map(|s| {
            s.values
                .iter()
                .enumerate()
                .map(move |(i, &u)| u - w(s.t, s.x(i, dx)))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn rightward_supersolution_bounds_the_run() {
    let gap = supersolution_gap(Direction::Rightward, 0.0);
    assert!(gap <= 1e-8, "{gap:e}");
}

#[test]
fn leftward_supersolution_bounds_the_run() {
    let gap = supersolution_gap(Direction::Leftward, -2.0);
    assert!(gap <= 1e-8, "{gap:e}");
}

#[test]
fn emitted_params_pass_recipe_checks() {
    let fb = build_cubic_bistable(1.0, 0.3).unwrap();
    let phi = bistable_front(&fb, 1e-8).unwrap();
    let c_m = 2.0 * 0.7f64.sqrt();
    for (direction, c) in [
        (Direction::Rightward, 0.0),
        (Direction::Rightward, -1.0),
        (Direction::Leftward, -2.0),
    ] {
        let p = fm_params(&phi, c, c_m, direction).unwrap();
        for r in p.recipe_checks(&fb, &phi) {
            assert!(
                r.holds,
                "{direction:?} c={c}: {} margin {}",
                r.name, r.margin
            );
        }
    }
}

#[test]
fn verify_reports_every_case() {
    for case in BarrierCase::ALL {
        let rep = verify_case(case, 1.0, 0.3, None).unwrap();
        assert!(!rep.inequalities.is_empty());
        let expected = case != BarrierCase::RightwardOmegaTenth;
        assert_eq!(rep.passed, expected, "{}", case.name());
    }
}
