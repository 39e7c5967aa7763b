//! Reference propagator independent of the eigensolver path: `e^{−iHt}`
//! by scaling and squaring a truncated Taylor series.

use clsnet::state::StateVector;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn expm_minus_i(h: &DMatrix<f64>, t: f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let a: DMatrix<Complex64> = h.map(|x| Complex64::new(0.0, -x * t));
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let a = a.unscale(2f64.powi(s));
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = (&term * &a).unscale(k as f64);
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
