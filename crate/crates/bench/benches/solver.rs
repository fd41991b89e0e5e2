use criterion::{black_box, criterion_group, criterion_main, Criterion};
use frontlab::{integrate, reference_field, InitialDatum, Problem};

fn solver(c: &mut Criterion) {
    let problem = Problem::new(reference_field(1.0, 0.3, 5.0).unwrap(), 0.5, -60.0, 60.0);
    let u0 = InitialDatum::plateau(0.9, 10.0, 0.0, 2.0);

    // 50 steps of dt = 0.02 on 1201 nodes.
    c.bench_function("integrate_50_steps", |b| {
        b.iter(|| integrate(black_box(&problem), &u0, 1.0, 1.0).unwrap())
    });

    let fine = problem.clone().with_steps(0.05, 0.005);
    c.bench_function("integrate_fine_200_steps", |b| {
        b.iter(|| integrate(black_box(&fine), &u0, 1.0, 1.0).unwrap())
    });
}

criterion_group!(benches, solver);
criterion_main!(benches);
