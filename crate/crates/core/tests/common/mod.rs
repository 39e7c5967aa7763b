//! Independent numerical references used by the integration tests.
#![allow(dead_code)]

use clsnet::state::StateVector;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `e^{−iHt}` by scaling and squaring of a truncated Taylor series.
pub fn expm_minus_i(h: &DMatrix<f64>, t: f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let a: DMatrix<Complex64> = h.map(|x| Complex64::new(0.0, -x * t));
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let a = a / Complex64::new(2f64.powi(s), 0.0);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn propagate(h: &DMatrix<f64>, psi: &StateVector, t: f64) -> StateVector {
    StateVector::from_amplitudes(expm_minus_i(h, t) * psi.amplitudes())
}

/// Classical fourth-order Runge–Kutta for `ψ̇ = −iH(t)ψ`.
pub fn rk4(h: impl Fn(f64) -> DMatrix<f64>, psi0: &StateVector, t0: f64, t1: f64, n: usize) -> StateVector {
    let rhs = |t: f64, y: &DVector<Complex64>| -> DVector<Complex64> {
        h(t).map(|x| Complex64::new(0.0, -x)) * y
    };
    let dt = (t1 - t0) / n as f64;
    let mut y = psi0.amplitudes().clone();
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        let c = Complex64::new(dt, 0.0);
        let half = Complex64::new(0.5, 0.0);
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * dt, &(&y + &k1 * c * half));
        let k3 = rhs(t + 0.5 * dt, &(&y + &k2 * c * half));
        let k4 = rhs(t + dt, &(&y + &k3 * c));
        y += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * c / Complex64::new(6.0, 0.0);
    }
    StateVector::from_amplitudes(y)
}

/// `|⟨a|b⟩|²` computed directly.
pub fn overlap(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes().iter().zip(b.amplitudes().iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}

/// Dimer state `(|a⟩ + s|b⟩)/√2` built by hand.
pub fn dimer(n: usize, a: usize, b: usize, s: f64) -> StateVector {
    let mut v = vec![0.0; n];
    v[a] = 1.0 / 2f64.sqrt();
    v[b] = s / 2f64.sqrt();
    StateVector::from_real(&v)
}
