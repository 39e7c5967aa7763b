//! Time evolution `ψ(t) = e^{−iHt}ψ₀` under static and driven Hamiltonians,
//! and execution of protocol schedules.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Entry, TimedHamiltonian};
use crate::protocols::{phase_flip, Event, ProtocolSchedule};
use crate::spectral::{spectrum, Spectrum};
use crate::state::StateVector;

static PROPAGATOR_FAULT: AtomicBool = AtomicBool::new(false);

/// Test hook: when set, every propagator uses `e^{+iHt}` instead of `e^{−iHt}`.
#[doc(hidden)]
pub fn inject_propagator_fault(on: bool) {
    PROPAGATOR_FAULT.store(on, Ordering::SeqCst);
}

/// Sign `s` in `e^{s·iHt}`; `−1` unless a fault is injected.
fn exponent_sign() -> f64 {
    if PROPAGATOR_FAULT.load(Ordering::Relaxed) {
        1.0
    } else {
        -1.0
    }
}

/// `ψ ← V e^{s·iλt} Vᵀ ψ` for real orthonormal `V`.
fn apply_phases(vectors: &DMatrix<f64>, values: &[f64], t: f64, psi: &mut DVector<Complex64>) {
    let s = exponent_sign();
    let re = psi.map(|c| c.re);
    let im = psi.map(|c| c.im);
    let mut cr = vectors.tr_mul(&re);
    let mut ci = vectors.tr_mul(&im);
    for k in 0..values.len() {
        let (sin, cos) = (s * values[k] * t).sin_cos();
        let (r, i) = (cr[k], ci[k]);
        cr[k] = r * cos - i * sin;
        ci[k] = r * sin + i * cos;
    }
    let nr = vectors * cr;
    let ni = vectors * ci;
    for k in 0..psi.len() {
        psi[k] = Complex64::new(nr[k], ni[k]);
    }
}

/// Reusable exact propagator of a static Hamiltonian.
#[derive(Debug, Clone)]
pub struct Propagator {
    spectrum: Spectrum,
}

impl Propagator {
    pub fn new(h: &DMatrix<f64>) -> Result<Self> {
        Ok(Propagator { spectrum: spectrum(h)? })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `e^{−iHt}ψ`.
    pub fn apply(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        if psi.dim() != self.spectrum.dim() {
            return Err(Error::DimensionMismatch { expected: self.spectrum.dim(), got: psi.dim() });
        }
        let mut amps = psi.amplitudes().clone();
        apply_phases(&self.spectrum.eigenvectors, &self.spectrum.eigenvalues, t, &mut amps);
        Ok(StateVector::from_amplitudes(amps))
    }
}

/// `e^{−iHt}ψ₀` from the eigendecomposition of `H`.
pub fn evolve_static(h: &DMatrix<f64>, psi0: &StateVector, t: f64) -> Result<StateVector> {
    Propagator::new(h)?.apply(psi0, t)
}

/// Fourth-order commutator-free exponential integrator with a fixed step
/// chosen by a self-convergence check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Integrator {
    /// Admissible error per unit time.
    pub tol: f64,
    /// First step size tried by the convergence check.
    pub initial_step: f64,
    /// Smallest step size before giving up.
    pub min_step: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator { tol: 1e-10, initial_step: 2.0 * PI / 4096.0, min_step: 1e-6 }
    }
}

/// Differences below this are indistinguishable from accumulated roundoff.
const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;

const CF4_C1: f64 = 0.5 - 0.288_675_134_594_812_9;
const CF4_C2: f64 = 0.5 + 0.288_675_134_594_812_9;
const CF4_A1: f64 = 0.25 + 0.288_675_134_594_812_9;
const CF4_A2: f64 = 0.25 - 0.288_675_134_594_812_9;

/// Scratch buffers for repeated steps on one Hamiltonian.
struct Workspace {
    h1: DMatrix<f64>,
    h2: DMatrix<f64>,
    a: DMatrix<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace { h1: DMatrix::zeros(n, n), h2: DMatrix::zeros(n, n), a: DMatrix::zeros(n, n) }
    }
}

/// One Newton–Schulz step `V ← V(3I − VᵀV)/2` towards the nearest
/// orthogonal matrix; removes the eigensolver's `O(nε)` loss of
/// orthogonality, which would otherwise accumulate as norm drift over
/// many steps.
fn reorthogonalize(v: &mut DMatrix<f64>) {
    let n = v.ncols();
    let mut g = v.tr_mul(v) * -0.5;
    for k in 0..n {
        g[(k, k)] += 1.5;
    }
    *v = &*v * g;
}

fn exp_apply(a: &DMatrix<f64>, dt: f64, psi: &mut DVector<Complex64>) {
    let mut eig = SymmetricEigen::new(a.clone());
    reorthogonalize(&mut eig.eigenvectors);
    apply_phases(&eig.eigenvectors, eig.eigenvalues.as_slice(), dt, psi);
}

fn cf4_step(h: &TimedHamiltonian, t: f64, dt: f64, psi: &mut DVector<Complex64>, ws: &mut Workspace) -> Result<()> {
    h.evaluate_into(&mut ws.h1, t + CF4_C1 * dt);
    h.evaluate_into(&mut ws.h2, t + CF4_C2 * dt);
    // The eigensolver need not terminate on non-finite input.
    if !ws.h1.iter().chain(ws.h2.iter()).all(|x| x.is_finite()) {
        return Err(Error::NonFiniteHamiltonian { t });
    }
    ws.a.copy_from(&ws.h1);
    ws.a.scale_mut(CF4_A1);
    ws.a += &ws.h2 * CF4_A2;
    exp_apply(&ws.a, dt, psi);
    ws.a.copy_from(&ws.h1);
    ws.a.scale_mut(CF4_A2);
    ws.a += &ws.h2 * CF4_A1;
    exp_apply(&ws.a, dt, psi);
    Ok(())
}

impl Integrator {
    pub fn with_tol(tol: f64) -> Self {
        Integrator { tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-14..=1e-6).contains(&self.tol) {
            return Err(Error::InvalidParameters(format!("tolerance {} outside [1e-14, 1e-6]", self.tol)));
        }
        if !(self.initial_step > 0.0) || !(self.min_step > 0.0) {
            return Err(Error::InvalidParameters("step sizes must be positive".into()));
        }
        Ok(())
    }

    /// `n` equal CF4 steps over `[t0, t1]`.
    pub fn fixed_steps(h: &TimedHamiltonian, psi0: &StateVector, t0: f64, t1: f64, n: usize) -> Result<StateVector> {
        if psi0.dim() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), got: psi0.dim() });
        }
        let mut psi = psi0.amplitudes().clone();
        let mut ws = Workspace::new(h.dim());
        let dt = (t1 - t0) / n.max(1) as f64;
        for k in 0..n {
            cf4_step(h, t0 + k as f64 * dt, dt, &mut psi, &mut ws)?;
        }
        Ok(StateVector::from_amplitudes(psi))
    }

    /// Number of steps over `[t0, t1]` whose result differs from the
    /// half-step run by at most `tol·(t1 − t0)`, together with that
    /// (finer) result.
    pub fn calibrate(&self, h: &TimedHamiltonian, psi0: &StateVector, t0: f64, t1: f64) -> Result<(usize, StateVector)> {
        self.validate()?;
        let span = t1 - t0;
        let mut n = ((span / self.initial_step).ceil() as usize).max(1);
        let mut coarse = Self::fixed_steps(h, psi0, t0, t1, n)?;
        loop {
            if n > 1 && span / ((2 * n) as f64) < self.min_step {
                return Err(Error::StepUnderflow { t0, t1, steps: 2 * n, tol: self.tol });
            }
            let fine = Self::fixed_steps(h, psi0, t0, t1, 2 * n)?;
            // Spans far below one time unit would otherwise ask for less than roundoff.
            if coarse.max_abs_diff(&fine) <= self.tol * span + ROUNDOFF_FLOOR {
                return Ok((2 * n, fine));
            }
            n *= 2;
            coarse = fine;
        }
    }

    /// `ψ(t1)` from `ψ(t0) = ψ0`; exact for static Hamiltonians.
    pub fn evolve(&self, h: &TimedHamiltonian, psi0: &StateVector, t0: f64, t1: f64) -> Result<StateVector> {
        if !(t1 >= t0) {
            return Err(Error::InvalidParameters(format!("evolution interval [{t0}, {t1}] is reversed")));
        }
        if t1 == t0 {
            return Ok(psi0.clone());
        }
        if h.is_static() {
            return evolve_static(h.base(), psi0, t1 - t0);
        }
        Ok(self.calibrate(h, psi0, t0, t1)?.1)
    }
}

/// Solves `iψ̇ = H(t)ψ` on `[t0, t1]` with error at most `tol` per unit time.
pub fn evolve_timedep(h: &TimedHamiltonian, psi0: &StateVector, t0: f64, t1: f64, tol: f64) -> Result<StateVector> {
    if !(t1 > t0) {
        return Err(Error::InvalidParameters(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    let integ = Integrator::with_tol(tol);
    integ.validate()?;
    integ.evolve(h, psi0, t0, t1)
}

/// Event marker recorded along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMark {
    pub t: f64,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub events: Vec<EventMark>,
}

impl Trajectory {
    fn start(psi0: StateVector, t0: f64) -> Self {
        Trajectory { times: vec![t0], states: vec![psi0], events: Vec::new() }
    }

    /// Appends a sample, replacing the last one if it has the same time.
    fn record(&mut self, t: f64, psi: StateVector) {
        if self.times.last().is_some_and(|&l| (t - l).abs() <= crate::protocols::TIME_EPS) {
            *self.states.last_mut().expect("non-empty") = psi;
        } else {
            self.times.push(t);
            self.states.push(psi);
        }
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// Largest `|‖ψ‖ − 1|` over all samples.
    pub fn norm_drift(&self) -> f64 {
        self.states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `|ψ_i(t)|` per sample.
    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.magnitudes()).collect()
    }
}

/// Sampling and integration settings for [`run_schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub integrator: Integrator,
    /// Spacing of recorded samples inside segments.
    pub sample_interval: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { integrator: Integrator::default(), sample_interval: PI / 32.0 }
    }
}

fn sample_grid(start: f64, end: f64, interval: f64) -> Vec<f64> {
    let span = end - start;
    let k = ((span / interval).ceil() as usize).max(1);
    (1..=k).map(|i| if i == k { end } else { start + span * i as f64 / k as f64 }).collect()
}

/// Evolves one segment, recording samples on a uniform grid.
fn run_segment(
    h: &TimedHamiltonian,
    psi: StateVector,
    start: f64,
    end: f64,
    opts: &RunOptions,
    traj: &mut Trajectory,
) -> Result<StateVector> {
    if end <= start {
        return Ok(psi);
    }
    let grid = sample_grid(start, end, opts.sample_interval);
    if h.is_static() {
        let prop = Propagator::new(h.base())?;
        let mut last = psi.clone();
        for &t in &grid {
            last = prop.apply(&psi, t - start)?;
            traj.record(t, last.clone());
        }
        return Ok(last);
    }
    let (n, fine) = opts.integrator.calibrate(h, &psi, 0.0, end - start)?;
    if grid.len() == 1 {
        traj.record(end, fine.clone());
        return Ok(fine);
    }
    let dt = (end - start) / n as f64;
    let mut cur = psi;
    let mut prev = start;
    for &t in &grid {
        let steps = (((t - prev) / dt).round() as usize).max(1);
        cur = Integrator::fixed_steps(h, &cur, prev - start, t - start, steps)?;
        traj.record(t, cur.clone());
        prev = t;
    }
    Ok(cur)
}

/// Executes a schedule: flips exactly, segments by exact or CF4 propagation.
///
/// Hopping flips stay in force until the same coupling is flipped again and
/// apply to every segment in between.
pub fn run_schedule(s: &ProtocolSchedule, psi0: &StateVector, opts: &RunOptions) -> Result<Trajectory> {
    s.validate()?;
    if psi0.dim() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: psi0.dim() });
    }
    let mut traj = Trajectory::start(psi0.clone(), 0.0);
    let mut psi = psi0.clone();
    let mut flipped: Vec<Entry> = Vec::new();
    for e in &s.events {
        match e {
            Event::PhaseFlip { t, site } => {
                psi = phase_flip(&psi, *site)?;
                traj.record(*t, psi.clone());
                traj.events.push(EventMark { t: *t, kind: e.kind().into(), detail: format!("site={site}") });
            }
            Event::HoppingFlip { t, entry } => {
                let key = crate::lattice::normalize_entry(*entry);
                match flipped.iter().position(|&f| f == key) {
                    Some(k) => {
                        flipped.remove(k);
                    }
                    None => flipped.push(key),
                }
                traj.events.push(EventMark {
                    t: *t,
                    kind: e.kind().into(),
                    detail: format!("entry=({},{})", key.0, key.1),
                });
            }
            Event::Segment { start, end, hamiltonian } => {
                let mut h = hamiltonian.clone();
                for &f in &flipped {
                    h = h.negate_entry(f)?;
                }
                traj.events.push(EventMark {
                    t: *start,
                    kind: e.kind().into(),
                    detail: format!("end={end}"),
                });
                psi = run_segment(&h, psi, *start, *end, opts, &mut traj)?;
            }
        }
    }
    Ok(traj)
}
