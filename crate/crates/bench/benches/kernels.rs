use std::hint::black_box;

use cim_core::crystal::{self, CrystalState};
use cim_core::ising::{enumerate_brute_force, generate_sk1};
use cim_core::noise::StreamNoise;
use cim_core::sampling::{run_trajectory, RecordOptions};
use cim_core::{derive_params, GaussianMode, Machine, UserParams};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn crystal_propagate(c: &mut Criterion) {
    let input = CrystalState::from_signal(&GaussianMode::vacuum(), 2.0);
    c.bench_function("crystal/propagate_reduced_rk4_16", |b| {
        b.iter(|| crystal::propagate_reduced(black_box(&input), 0.05, crystal::DEFAULT_STEPS).unwrap())
    });
}

fn roundtrip(c: &mut Criterion) {
    let mut g = c.benchmark_group("machine/step");
    for n in [16, 64] {
        let problem = generate_sk1(n, 1).unwrap();
        let machine = Machine::new(derive_params(&UserParams::fig4(), problem.coupling_abs_sum()).unwrap(), &problem);
        let mut noise = StreamNoise::new(1, 0);
        let mut w = vec![0.0; n];
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut state = cim_core::MachineState::vacuum(n);
            b.iter(|| {
                machine.step(&mut state, &mut noise, &mut w).unwrap();
                // keep the state in the transient regime
                if state.k >= 100 {
                    state = cim_core::MachineState::vacuum(n);
                }
            })
        });
    }
    g.finish();
}

fn trajectory(c: &mut Criterion) {
    let problem = generate_sk1(16, 1000).unwrap();
    let user = UserParams::fig4();
    c.bench_function("sampling/trajectory_n16_t400", |b| {
        b.iter(|| run_trajectory(&problem, &user, 7, 0, 400, RecordOptions::default()).unwrap())
    });
}

fn brute_force(c: &mut Criterion) {
    let mut g = c.benchmark_group("ising/brute_force");
    g.sample_size(10);
    for n in [16, 20] {
        let problem = generate_sk1(n, 1).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &problem, |b, p| b.iter(|| enumerate_brute_force(p, 2).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, crystal_propagate, roundtrip, trajectory, brute_force);
criterion_main!(benches);
