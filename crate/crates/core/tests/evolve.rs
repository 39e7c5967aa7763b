mod common;

use std::f64::consts::PI;

use clsnet::error::Error;
use clsnet::evolve::*;
use clsnet::lattice::{build_star, uniform_star, Pulse, TimedHamiltonian};
use clsnet::state::{fidelity, StateVector};
use common::{dimer, overlap, propagate, rk4};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_symmetric(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

#[test]
fn eigenvectors_only_pick_up_a_phase() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(2..8);
        let h = random_symmetric(&mut rng, n);
        let eig = SymmetricEigen::new(h.clone());
        let k = rng.random_range(0..n);
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let psi = StateVector::from_real(&v);
        let t = rng.random_range(0.0..20.0);
        let out = evolve_static(&h, &psi, t).unwrap();
        assert!((fidelity(&out, &psi).unwrap() - 1.0).abs() < 1e-12);
        let phase = psi.inner(&out).unwrap();
        assert!((phase.arg() + eig.eigenvalues[k] * t).sin().abs() < 1e-10);
    }
}

#[test]
fn static_evolution_matches_taylor_oracle() {
    let h = uniform_star(0.25, 0.5).evaluate_at(0.0);
    let l = dimer(5, 0, 1, 1.0);
    let r = dimer(5, 3, 4, 1.0);
    assert!(1.0 - overlap(&r, &evolve_static(&h, &l, 2.0 * PI).unwrap()) < 1e-12);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for t in [PI, 0.1, 13.7] {
        let a = evolve_static(&h, &l, t).unwrap();
        assert!(a.max_abs_diff(&propagate(&h, &l, t)) < 1e-12);
        let m = random_symmetric(&mut rng, 6);
        let psi = StateVector::basis(6, 2);
        assert!(evolve_static(&m, &psi, t).unwrap().max_abs_diff(&propagate(&m, &psi, t)) < 1e-12);
    }
    assert!(matches!(
        evolve_static(&h, &StateVector::basis(4, 0), 1.0),
        Err(Error::DimensionMismatch { expected: 5, got: 4 })
    ));
}

#[test]
fn constant_pulses_match_static_evolution() {
    let h = uniform_star(0.25, 0.5);
    let mut driven = h.clone();
    for e in [(0, 2), (1, 2), (2, 3), (2, 4)] {
        driven = driven.attach_pulse(e, Pulse::constant(0.25)).unwrap();
    }
    assert!(!driven.is_static());
    let l = dimer(5, 0, 1, 1.0);
    for tol in [1e-8, 1e-10, 1e-12] {
        let a = evolve_timedep(&driven, &l, 0.0, 2.0 * PI, tol).unwrap();
        let b = propagate(h.base(), &l, 2.0 * PI);
        assert!(a.max_abs_diff(&b) <= tol * 2.0 * PI, "tol {tol}");
    }
}

fn driven_star() -> TimedHamiltonian {
    uniform_star(0.25, 0.5)
        .attach_pulse((2, 3), Pulse::CrabStar { floor: 0.25, x: 0.6, xp: -0.3, omega: 1.3 })
        .unwrap()
        .attach_pulse((0, 2), Pulse::ramp(0.25, -0.1, 0.0, 2.0 * PI))
        .unwrap()
}

#[test]
fn driven_evolution_converges_as_tolerance_halves() {
    let h = driven_star();
    let l = dimer(5, 0, 1, 1.0);
    let reference = rk4(|t| h.evaluate_at(t), &l, 0.0, 2.0 * PI, 40_000);
    let mut tol = 1e-8;
    let mut prev = f64::INFINITY;
    while tol >= 1e-11 {
        let psi = evolve_timedep(&h, &l, 0.0, 2.0 * PI, tol).unwrap();
        let err = psi.max_abs_diff(&reference);
        assert!(err <= tol * 2.0 * PI + 1e-13, "tol {tol}: error {err}");
        assert!(err <= prev * 1.01 + 1e-13);
        prev = err;
        tol /= 2.0;
    }
}

#[test]
fn symmetric_driving_of_a_dimer_keeps_its_cls() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let i = dimer(5, 0, 1, -1.0);
    for _ in 0..5 {
        let (a, w, phi) = (rng.random_range(-1.0..1.0), rng.random_range(0.2..3.0), rng.random_range(0.0..PI));
        let pulse = Pulse::CrabStar { floor: 0.25, x: a, xp: phi, omega: w };
        let other = Pulse::ramp(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0, 2.0 * PI);
        let h = build_star([0.25; 4], [0.5; 5])
            .attach_pulse((0, 2), pulse.clone())
            .unwrap()
            .attach_pulse((1, 2), pulse)
            .unwrap()
            .attach_pulse((2, 3), other)
            .unwrap();
        let out = evolve_timedep(&h, &i, 0.0, 2.0 * PI, 1e-10).unwrap();
        assert!(1.0 - overlap(&i, &out) < 1e-10);
    }
}

#[test]
fn norm_is_conserved() {
    let h = driven_star();
    let l = dimer(5, 0, 1, 1.0);
    let psi = evolve_timedep(&h, &l, 0.0, 20.0, 1e-10).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-11, "{:e}", psi.norm() - 1.0);
    let psi = evolve_static(h.base(), &l, 1e4).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn fidelity_examples() {
    let a = dimer(5, 0, 1, 1.0);
    let b = dimer(5, 0, 1, -1.0);
    assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
    assert!(fidelity(&a, &b).unwrap().abs() < 1e-15);
    assert!((fidelity(&a, &a.clone().with_phase(1.2)).unwrap() - 1.0).abs() < 1e-15);
    assert!((fidelity(&a, &StateVector::basis(5, 0)).unwrap() - 0.5).abs() < 1e-15);
    assert!(matches!(fidelity(&a, &StateVector::basis(3, 0)), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn step_underflow_is_reported() {
    let h = driven_star();
    let l = dimer(5, 0, 1, 1.0);
    let integ = Integrator { tol: 1e-14, initial_step: 1.0, min_step: 0.5 };
    assert!(matches!(integ.evolve(&h, &l, 0.0, 10.0), Err(Error::StepUnderflow { .. })));
}

#[test]
fn fixed_steps_reach_fourth_order() {
    let h = driven_star();
    let l = dimer(5, 0, 1, 1.0);
    let reference = rk4(|t| h.evaluate_at(t), &l, 0.0, 2.0, 40_000);
    let e1 = Integrator::fixed_steps(&h, &l, 0.0, 2.0, 20).unwrap().max_abs_diff(&reference);
    let e2 = Integrator::fixed_steps(&h, &l, 0.0, 2.0, 40).unwrap().max_abs_diff(&reference);
    let order = (e1 / e2).log2();
    assert!(order > 3.7, "observed order {order}");
}

#[test]
fn schedule_trajectory_samples_and_events() {
    let h = driven_star();
    let l = dimer(5, 0, 1, 1.0);
    let s = clsnet::protocols::ProtocolSchedule {
        name: "driven".into(),
        initial: l.clone(),
        target: l.clone(),
        target_dimer: None,
        events: vec![
            clsnet::protocols::Event::PhaseFlip { t: 0.0, site: 1 },
            clsnet::protocols::Event::Segment { start: 0.0, end: PI, hamiltonian: h.clone() },
        ],
    };
    let opts = RunOptions { sample_interval: PI / 8.0, ..Default::default() };
    let traj = run_schedule(&s, &l, &opts).unwrap();
    assert_eq!(traj.times.len(), 9);
    assert_eq!(traj.events.len(), 2);
    assert!(traj.norm_drift() < 1e-12, "{:e}", traj.norm_drift());
    let flipped = clsnet::protocols::phase_flip(&l, 1).unwrap();
    let oracle = rk4(|t| h.evaluate_at(t), &flipped, 0.0, PI, 40_000);
    assert!(traj.final_state().max_abs_diff(&oracle) < 1e-9);
}
