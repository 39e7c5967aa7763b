use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Index;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex amplitudes over the sites of a network, one excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<[f64; 2]>", try_from = "Vec<[f64; 2]>")]
pub struct StateVector(DVector<Complex64>);

impl StateVector {
    /// Wraps raw amplitudes without normalizing.
    pub fn from_amplitudes(amps: DVector<Complex64>) -> Self {
        StateVector(amps)
    }

    pub fn from_real(values: &[f64]) -> Self {
        StateVector(DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| Complex64::new(v, 0.0)),
        ))
    }

    pub fn zeros(n: usize) -> Self {
        StateVector(DVector::zeros(n))
    }

    /// Single-site excitation `|site⟩`.
    pub fn basis(n: usize, site: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[site] = Complex64::new(1.0, 0.0);
        StateVector(v)
    }

    /// `(|a⟩ + sign |b⟩)/√2`.
    pub fn dimer(n: usize, a: usize, b: usize, sign: f64) -> Self {
        let mut v = DVector::zeros(n);
        v[a] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        v[b] = Complex64::new(sign * FRAC_1_SQRT_2, 0.0);
        StateVector(v)
    }

    /// Antisymmetric dimer state `(|a⟩ − |b⟩)/√2`, the compact localized state of a dimer.
    pub fn dimer_cls(n: usize, a: usize, b: usize) -> Self {
        Self::dimer(n, a, b, -1.0)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn amplitudes_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.0
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.0.unscale_mut(n);
        }
        self
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    /// Multiplies by `e^{iθ}`.
    pub fn with_phase(mut self, theta: f64) -> Self {
        let p = Complex64::from_polar(1.0, theta);
        self.0.iter_mut().for_each(|a| *a *= p);
        self
    }

    pub fn conj(&self) -> Self {
        StateVector(self.0.map(|c| c.conj()))
    }

    /// Site-wise `|ψ_i|`.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.norm()).collect()
    }

    /// Sum of `|ψ_i|²` over the given sites.
    pub fn weight_on(&self, sites: &[usize]) -> f64 {
        sites.iter().map(|&s| self.0[s].norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl Index<usize> for StateVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl From<StateVector> for Vec<[f64; 2]> {
    fn from(s: StateVector) -> Self {
        s.0.iter().map(|c| [c.re, c.im]).collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for StateVector {
    type Error = String;
    fn try_from(v: Vec<[f64; 2]>) -> std::result::Result<Self, String> {
        if v.iter().flatten().any(|x| !x.is_finite()) {
            return Err("state amplitudes must be finite".into());
        }
        Ok(StateVector(DVector::from_iterator(
            v.len(),
            v.into_iter().map(|[re, im]| Complex64::new(re, im)),
        )))
    }
}

/// `|⟨φ|ψ⟩|²`.
pub fn fidelity(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    Ok(phi.inner(psi)?.norm_sqr().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimer_states() {
        let i = StateVector::dimer_cls(5, 0, 1);
        let f = StateVector::dimer_cls(5, 3, 4);
        assert!((i.norm() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&i, &i).unwrap(), 1.0);
        assert_eq!(fidelity(&i, &f).unwrap(), 0.0);
    }

    #[test]
    fn fidelity_ignores_global_phase() {
        let l = StateVector::dimer(5, 0, 1, 1.0);
        for k in 0..8 {
            let rotated = l.clone().with_phase(0.7 * k as f64);
            assert!((fidelity(&l, &rotated).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = StateVector::basis(3, 0);
        let b = StateVector::basis(4, 0);
        assert!(matches!(fidelity(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn serde_pairs() {
        let s = StateVector::dimer(3, 0, 2, -1.0).with_phase(0.3);
        let v: Vec<[f64; 2]> = s.clone().into();
        let back = StateVector::try_from(v).unwrap();
        assert_eq!(back, s);
    }
}
