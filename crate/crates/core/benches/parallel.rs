//! Parallel versus sequential execution of the two data-parallel kernels:
//! CRAB multistart restarts and per-route propagation of a timeline.

use std::hint::black_box;

use clsnet::crab::{optimize_crab, ControlProblem, CrabOptions};
use clsnet::evolve::RunOptions;
use clsnet::lattice::build_dll;
use clsnet::nelder_mead::NelderMeadOptions;
use clsnet::par::Execution;
use clsnet::routing::{plan_route, schedule_multi, simulate_route, JumpTiming};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn crab_restarts(c: &mut Criterion) {
    let problem = ControlProblem::star_transfer();
    let template = problem.published_params();
    let mut group = c.benchmark_group("crab-restarts");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = CrabOptions {
            n_restarts: 4,
            seed: 7,
            nelder_mead: NelderMeadOptions { max_evals: 60, ..Default::default() },
            execution,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| black_box(optimize_crab(&problem, &template, opts).unwrap().infidelity))
        });
    }
    group.finish();
}

fn route_propagation(c: &mut Criterion) {
    let l = build_dll(2, 2, 0.25, 0.5).unwrap();
    let timing = JumpTiming::default();
    let dimer = |cx, cy, y| l.graph.dimers()[l.dimer_at(cx, cy, y).unwrap()];
    let routes = vec![
        plan_route(&l, dimer(0, 0, false), dimer(1, 0, true), &timing).unwrap(),
        plan_route(&l, dimer(0, 1, true), dimer(1, 1, false), &timing).unwrap(),
    ];
    let timeline = schedule_multi(&routes).unwrap();
    let opts = RunOptions::default();
    let mut group = c.benchmark_group("route-propagation");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(simulate_route(&l, &timeline, &opts, exec).unwrap().duration))
        });
    }
    group.finish();
}

criterion_group!(benches, crab_restarts, route_propagation);
criterion_main!(benches);
