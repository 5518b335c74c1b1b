use std::hint::black_box;

use bumpsim::contact::contact_wrench_only;
use bumpsim::{
    contact_wrench, step, step_with, ConfigurationName, HornConfiguration, VehicleParams, VehicleState, Wrench,
};
use bumpsim_bench::{pressing_state, wall};
use criterion::{criterion_group, criterion_main, Criterion};

fn rk4(c: &mut Criterion) {
    let p = VehicleParams::default();
    let s = VehicleState::at_rest(0.0, 1.0);
    c.bench_function("rk4 step, free flight", |b| {
        b.iter(|| step(black_box(&s), &p, p.hover_thrust(), 0.01, Wrench::ZERO, 1e-3))
    });

    let cfg = HornConfiguration::preset(ConfigurationName::FullSoft);
    let w = wall();
    let s = pressing_state(&cfg);
    c.bench_function("rk4 step, in contact", |b| {
        b.iter(|| {
            step_with(
                black_box(&s),
                &p,
                p.hover_thrust(),
                0.0,
                |st| contact_wrench_only(&cfg, st, &w),
                1e-3,
            )
        })
    });
}

fn wrench(c: &mut Criterion) {
    let w = wall();
    for name in ConfigurationName::ALL {
        let cfg = HornConfiguration::preset(name);
        let s = pressing_state(&cfg);
        c.bench_function(&format!("contact wrench {}", name.as_str()), |b| {
            b.iter(|| contact_wrench(&cfg, black_box(&s), &w))
        });
    }
}

criterion_group!(benches, rk4, wrench);
criterion_main!(benches);
