#![allow(dead_code)]

use frontlab::*;

/// Sup of `u - v` over nodes shared by the two snapshots.
pub fn sup_excess(a: &Snapshot, b: &Snapshot, dx: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (i, &u) in a.values.iter().enumerate() {
        let x = a.x(i, dx);
        if x < b.x_lo - 1e-9 || x > b.x_hi(dx) + 1e-9 {
            continue;
        }
        worst = worst.max(u - b.value_at(x, dx));
    }
    worst
}

/// Worst `u - v` over all snapshot times for two runs of the same problem.
pub fn comparison_gap(
    problem: &Problem,
    lower: &InitialDatum,
    upper: &InitialDatum,
    t_end: f64,
) -> f64 {
    let a = integrate(problem, lower, t_end, 1.0).unwrap();
    let b = integrate(problem, upper, t_end, 1.0).unwrap();
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(s, r)| sup_excess(s, r, a.dx))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sum of two plateau bumps, sampled on `[-30, 30]`; `scale >= 1` gives an ordered pair.
pub fn two_bumps(p: [f64; 6], scale: f64) -> InitialDatum {
    let a = InitialDatum::plateau(p[0], p[1], p[2], 1.0);
    let b = InitialDatum::plateau(p[3], p[4], p[5], 1.0);
    InitialDatum::sample(-30.0, 30.0, 0.1, move |x| scale * a.eval(x).max(b.eval(x)))
}

/// `(e1, e2)`: sup differences between grid levels `h, h/2` and `h/2, h/4` at `t_end`,
/// with `dt` scaled like `h`.
pub fn refinement_gaps(theta: f64, c: f64, t_end: f64) -> (f64, f64) {
    let runs: Vec<Trajectory> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&h| {
            let p = Problem::new(reference_field(1.0, theta, 5.0).unwrap(), c, -40.0, 40.0)
                .with_steps(h, h / 5.0)
                .with_grow(GrowPolicy::Fixed);
            integrate(
                &p,
                &InitialDatum::plateau(0.9, 10.0, 0.0, 2.0),
                t_end,
                t_end,
            )
            .unwrap()
        })
        .collect();
    let gap = |a: &Trajectory, b: &Trajectory| {
        let (s, r) = (a.last(), b.last());
        s.values
            .iter()
            .enumerate()
            .map(|(i, &u)| (u - r.value_at(s.x(i, a.dx), b.dx)).abs())
            .fold(0.0, f64::max)
    };
    (gap(&runs[0], &runs[1]), gap(&runs[1], &runs[2]))
}

/// Sup distance between the moving-frame view of an advected homogeneous KPP run and the
/// unadvected run. Snapshot times are chosen so the frame shift lands on grid nodes.
pub fn frame_shift_gap(c: f64, dx: f64) -> f64 {
    let field = HeterogeneousField::uniform(build_kpp(0.7).unwrap(), 5.0);
    let every = dx / c.abs();
    let run = |c: f64| {
        let p = Problem::new(field.clone(), c, -80.0, 80.0)
            .with_steps(dx, dx / 5.0)
            .with_grow(GrowPolicy::Fixed);
        integrate(
            &p,
            &InitialDatum::plateau(0.9, 8.0, 0.0, 1.0),
            100.0 * every,
            every,
        )
        .unwrap()
    };
    let moved = frame_shift(&run(c));
    let still = run(0.0);
    moved
        .snapshots
        .iter()
        .zip(&still.snapshots)
        .map(|(m, s)| {
            let a = sup_excess(m, s, dx);
            let b = sup_excess(s, m, dx);
            a.max(b)
        })
        .fold(0.0, f64::max)
}
