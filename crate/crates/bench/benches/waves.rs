use criterion::{black_box, criterion_group, criterion_main, Criterion};
use frontlab::{bistable_front, build_cubic_bistable, build_kpp, kpp_front, kpp_min_speed};

fn waves(c: &mut Criterion) {
    let fb = build_cubic_bistable(1.0, 0.3).unwrap();
    c.bench_function("bistable_shooting", |b| {
        b.iter(|| bistable_front(black_box(&fb), 1e-8).unwrap())
    });

    let fm = build_kpp(0.7).unwrap();
    let c_m = kpp_min_speed(&fm).unwrap();
    c.bench_function("kpp_front_critical", |b| {
        b.iter(|| kpp_front(black_box(&fm), c_m, 1e-8).unwrap())
    });
}

criterion_group!(benches, waves);
criterion_main!(benches);
