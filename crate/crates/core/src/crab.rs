//! CRAB pulse ansätze, infidelity objectives and seeded multistart
//! Nelder–Mead optimization.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Integrator;
use crate::lattice::{build_seven, build_star, Entry, Pulse, TimedHamiltonian};
use crate::nelder_mead::{nelder_mead_try, NelderMeadOptions};
use crate::par::{map_indexed, Execution};
use crate::state::{fidelity, StateVector};

/// Published pulse families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzKind {
    /// `J{1 + sin(t/2)[x sin ωt + x′ cos ωt]²}` on the four star couplings.
    StarTransfer,
    /// `J{1 + sin(t/4)[x sin ωt + x′ cos ωt]²}` on the four seven-site dimer couplings.
    SevenTransfer,
    /// `{1 + x sin ωt + x′ sin ω′t}·J·(1 − t/T)` on one star coupling.
    StarCreation,
    /// `J{1 + sin(t/2)[x sin ωt + x′ cos ωt]}` on the two seven-site source couplings.
    SevenCreation,
}

impl AnsatzKind {
    /// Lengths of `(x, x′, ω)`.
    pub fn arity(self) -> (usize, usize, usize) {
        match self {
            AnsatzKind::StarTransfer | AnsatzKind::SevenTransfer => (4, 4, 4),
            AnsatzKind::StarCreation => (1, 1, 2),
            AnsatzKind::SevenCreation => (2, 2, 2),
        }
    }

    /// Whether pulse values are bounded below by the floor coupling.
    pub fn has_floor(self) -> bool {
        matches!(self, AnsatzKind::StarTransfer | AnsatzKind::SevenTransfer)
    }
}

/// Amplitudes `x`, `x′`, frequencies `ω`, floor (or scale) `J` and horizon `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrabParams {
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
    pub omega: Vec<f64>,
    pub floor: f64,
    pub horizon: f64,
}

impl CrabParams {
    pub fn validate(&self, kind: AnsatzKind) -> Result<()> {
        let (a, b, c) = kind.arity();
        if (self.x.len(), self.xp.len(), self.omega.len()) != (a, b, c) {
            return Err(Error::InvalidParameters(format!(
                "{kind:?} expects x/x'/omega of lengths {a}/{b}/{c}, got {}/{}/{}",
                self.x.len(),
                self.xp.len(),
                self.omega.len()
            )));
        }
        if !(self.horizon >= 0.0) {
            return Err(Error::InvalidParameters("horizon must be non-negative".into()));
        }
        if self.x.iter().chain(&self.xp).chain(&self.omega).chain([&self.floor]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("pulse parameters must be finite".into()));
        }
        Ok(())
    }

    /// Star transfer: `J = 1/4`, `T = 2π`.
    pub fn published_star_transfer() -> Self {
        CrabParams {
            x: vec![0.5850, 2.4015, 2.5033, 0.2199],
            xp: vec![2.9997, 0.5954, 0.4555, 2.8103],
            omega: vec![1.4452, 1.3069, 1.1680, 1.3510],
            floor: 0.25,
            horizon: 2.0 * PI,
        }
    }

    /// Star creation: scale `3√2`, `T = π`.
    pub fn published_star_creation() -> Self {
        CrabParams {
            x: vec![0.8292],
            xp: vec![1.5246],
            omega: vec![1.7638, 1.9434],
            floor: 3.0 * SQRT_2,
            horizon: PI,
        }
    }

    /// Seven-site transfer: `J = 1/(4√2)`, `T = 4π`.
    pub fn published_seven_transfer() -> Self {
        CrabParams {
            x: vec![4.1435, 3.2435, 2.5509, 4.7169],
            xp: vec![2.2124, 3.3942, 3.3221, 1.9491],
            omega: vec![1.9171, 0.9476, 0.4496, 0.9671],
            floor: 1.0 / (4.0 * SQRT_2),
            horizon: 4.0 * PI,
        }
    }

    /// Seven-site creation: `J = 1/(4√2)`, `T = 2π`.
    pub fn published_seven_creation() -> Self {
        CrabParams {
            x: vec![6.9763, 4.1098],
            xp: vec![2.1072, 6.4490],
            omega: vec![1.7465, 0.7946],
            floor: 1.0 / (4.0 * SQRT_2),
            horizon: 2.0 * PI,
        }
    }
}

/// Pulse driving channel `n` of the ansatz.
pub fn channel_pulse(kind: AnsatzKind, n: usize, p: &CrabParams) -> Result<Pulse> {
    p.validate(kind)?;
    let (a, _, _) = kind.arity();
    if n >= a {
        return Err(Error::InvalidParameters(format!("{kind:?} has {a} channels, asked for {n}")));
    }
    let (floor, x, xp) = (p.floor, p.x[n], p.xp[n]);
    Ok(match kind {
        AnsatzKind::StarTransfer => Pulse::CrabStar { floor, x, xp, omega: p.omega[n] },
        AnsatzKind::SevenTransfer => Pulse::CrabSeven { floor, x, xp, omega: p.omega[n] },
        AnsatzKind::StarCreation => Pulse::CreationStar {
            scale: floor,
            x,
            xp,
            omega: p.omega[0],
            omega_p: p.omega[1],
            horizon: p.horizon,
        },
        AnsatzKind::SevenCreation => Pulse::CreationSeven { floor, x, xp, omega: p.omega[n] },
    })
}

/// Value of channel `n` at time `t`.
pub fn eval_pulse(kind: AnsatzKind, n: usize, t: f64, p: &CrabParams) -> Result<f64> {
    Ok(channel_pulse(kind, n, p)?.eval(t))
}

/// State-to-state control problem with CRAB-driven couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    pub name: String,
    pub kind: AnsatzKind,
    /// Fixed part of the Hamiltonian, possibly with its own pulses.
    pub base: TimedHamiltonian,
    /// Couplings driven by the ansatz channels, in channel order.
    pub channels: Vec<Entry>,
    pub initial: StateVector,
    pub target: StateVector,
    /// Run the ansatz backwards in time, `p(T − t)`.
    pub time_reversed: bool,
    /// Include the frequencies in the simplex, not only the amplitudes.
    pub optimize_frequencies: bool,
}

impl ControlProblem {
    /// `|I⟩ → |F⟩` on the star with all four couplings driven, `v = 1/2`.
    pub fn star_transfer() -> Self {
        ControlProblem {
            name: "star-transfer".into(),
            kind: AnsatzKind::StarTransfer,
            base: build_star([0.25; 4], [0.5; 5]),
            channels: vec![(0, 2), (1, 2), (2, 3), (2, 4)],
            initial: StateVector::dimer_cls(5, 0, 1),
            target: StateVector::dimer_cls(5, 3, 4),
            time_reversed: false,
            optimize_frequencies: false,
        }
    }

    /// `|I⟩ → |F⟩` on the seven-site unit, `J₃ = J₄ = 3`, `v = 1/2`.
    pub fn seven_transfer() -> Self {
        let j = 1.0 / (4.0 * SQRT_2);
        ControlProblem {
            name: "seven-transfer".into(),
            kind: AnsatzKind::SevenTransfer,
            base: build_seven([j, j, 3.0, 3.0, j, j], [0.5; 7]),
            channels: vec![(0, 2), (1, 2), (4, 5), (4, 6)],
            initial: StateVector::dimer_cls(7, 0, 1),
            target: StateVector::dimer_cls(7, 5, 6),
            time_reversed: false,
            optimize_frequencies: false,
        }
    }

    /// `|c⟩ → |I⟩` on the star with the target dimer decoupled, `v = 1/2`.
    ///
    /// The published creation pulse vanishes at `t = T` and drives the reverse
    /// process `|I⟩ → |c⟩`; creation runs it backwards, so both dimer
    /// couplings ramp up from zero. The second dimer coupling carries the
    /// bare ramp.
    pub fn star_creation() -> Self {
        let p = CrabParams::published_star_creation();
        let ramp = Pulse::CreationStar { scale: p.floor, x: 0.0, xp: 0.0, omega: 0.0, omega_p: 0.0, horizon: p.horizon };
        let base = build_star([0.0; 4], [0.5; 5])
            .attach_pulse((1, 2), ramp.reversed(p.horizon))
            .expect("entry in range");
        ControlProblem {
            name: "star-creation".into(),
            kind: AnsatzKind::StarCreation,
            base,
            channels: vec![(0, 2)],
            initial: StateVector::basis(5, 2),
            target: StateVector::dimer_cls(5, 0, 1),
            time_reversed: true,
            optimize_frequencies: true,
        }
    }

    /// `|connector⟩ → |I⟩` on the seven-site unit with `J₃ = t/(2π)`, `J₄ = 0`.
    pub fn seven_creation() -> Self {
        let j = 1.0 / (4.0 * SQRT_2);
        let base = build_seven([j, j, 0.0, 0.0, j, j], [0.5; 7])
            .attach_pulse((2, 3), Pulse::ramp(0.0, 1.0, 0.0, 2.0 * PI))
            .expect("entry in range");
        ControlProblem {
            name: "seven-creation".into(),
            kind: AnsatzKind::SevenCreation,
            base,
            channels: vec![(0, 2), (1, 2)],
            initial: StateVector::basis(7, 3),
            target: StateVector::dimer_cls(7, 0, 1),
            time_reversed: false,
            optimize_frequencies: false,
        }
    }

    /// Published parameters matching this problem's ansatz.
    pub fn published_params(&self) -> CrabParams {
        match self.kind {
            AnsatzKind::StarTransfer => CrabParams::published_star_transfer(),
            AnsatzKind::SevenTransfer => CrabParams::published_seven_transfer(),
            AnsatzKind::StarCreation => CrabParams::published_star_creation(),
            AnsatzKind::SevenCreation => CrabParams::published_seven_creation(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.base.dim();
        for s in [&self.initial, &self.target] {
            if s.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.dim() });
            }
        }
        if self.channels.len() != self.kind.arity().0 {
            return Err(Error::InvalidParameters(format!(
                "{:?} needs {} channels, got {}",
                self.kind,
                self.kind.arity().0,
                self.channels.len()
            )));
        }
        for &(i, j) in &self.channels {
            if i >= n || j >= n {
                return Err(Error::EntryOutOfBounds { row: i, col: j, dim: n });
            }
        }
        Ok(())
    }

    /// Hamiltonian with every channel bound to its pulse.
    pub fn hamiltonian(&self, p: &CrabParams) -> Result<TimedHamiltonian> {
        let mut h = self.base.clone();
        for (n, &entry) in self.channels.iter().enumerate() {
            let mut pulse = channel_pulse(self.kind, n, p)?;
            if self.time_reversed {
                pulse = pulse.reversed(p.horizon);
            }
            h = h.attach_pulse(entry, pulse)?;
        }
        Ok(h)
    }

    /// Final state after the horizon with `steps` CF4 steps.
    pub fn propagate_fixed(&self, p: &CrabParams, steps: usize) -> Result<StateVector> {
        if p.horizon == 0.0 {
            return Ok(self.initial.clone());
        }
        Integrator::fixed_steps(&self.hamiltonian(p)?, &self.initial, 0.0, p.horizon, steps)
    }

    pub fn infidelity_fixed(&self, p: &CrabParams, steps: usize) -> Result<f64> {
        normalized_infidelity(&self.propagate_fixed(p, steps)?, &self.target)
    }

    /// Step count meeting `integrator`'s self-convergence check at `p`.
    pub fn calibrate(&self, p: &CrabParams, integrator: &Integrator) -> Result<usize> {
        if p.horizon == 0.0 {
            return Ok(0);
        }
        Ok(integrator.calibrate(&self.hamiltonian(p)?, &self.initial, 0.0, p.horizon)?.0)
    }

    /// Free parameters in simplex order: `x`, `x′`, then `ω` if optimized.
    pub fn to_vector(&self, p: &CrabParams) -> Vec<f64> {
        let mut v: Vec<f64> = p.x.iter().chain(&p.xp).copied().collect();
        if self.optimize_frequencies {
            v.extend(&p.omega);
        }
        v
    }

    pub fn from_vector(&self, v: &[f64], template: &CrabParams) -> CrabParams {
        let (a, b, c) = self.kind.arity();
        let mut p = template.clone();
        p.x.copy_from_slice(&v[..a]);
        p.xp.copy_from_slice(&v[a..a + b]);
        if self.optimize_frequencies {
            p.omega.copy_from_slice(&v[a + b..a + b + c]);
        }
        p
    }
}

/// Infidelity of `ψ/‖ψ‖`, so that roundoff-level norm growth can never be
/// mistaken for an improvement by the optimizer.
fn normalized_infidelity(psi: &StateVector, target: &StateVector) -> Result<f64> {
    Ok(1.0 - fidelity(&psi.clone().normalized(), target)?)
}

/// `1 − |⟨target|ψ(T)⟩|²` with the step size chosen by `integrator`.
pub fn infidelity_objective(problem: &ControlProblem, p: &CrabParams, integrator: &Integrator) -> Result<f64> {
    problem.validate()?;
    if p.horizon == 0.0 {
        return Ok(1.0 - fidelity(&problem.initial, &problem.target)?);
    }
    let h = problem.hamiltonian(p)?;
    let psi = integrator.evolve(&h, &problem.initial, 0.0, p.horizon)?;
    normalized_infidelity(&psi, &problem.target)
}

/// Settings for [`optimize_crab`] and [`refine`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrabOptions {
    pub n_restarts: usize,
    pub seed: u64,
    pub omega_range: (f64, f64),
    /// Range for the random initial amplitudes.
    pub amplitude_range: (f64, f64),
    pub nelder_mead: NelderMeadOptions,
    /// Integrator used while searching (looser, fixed step after calibration).
    pub search: Integrator,
    /// Integrator used to verify each restart's best point.
    pub verify: Integrator,
    pub execution: Execution,
}

impl Default for CrabOptions {
    fn default() -> Self {
        CrabOptions {
            n_restarts: 32,
            seed: 0,
            omega_range: (0.4, 2.6),
            amplitude_range: (0.0, 3.0),
            nelder_mead: NelderMeadOptions::default(),
            search: Integrator { tol: 1e-8, initial_step: 2.0 * PI / 256.0, ..Integrator::default() },
            verify: Integrator::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub index: usize,
    pub start: CrabParams,
    pub best: CrabParams,
    /// Verified infidelity of `best`.
    pub infidelity: f64,
    /// Infidelity at the fixed search step.
    pub search_infidelity: f64,
    pub evaluations: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_params: CrabParams,
    pub infidelity: f64,
    pub evaluations: usize,
    pub restarts_used: usize,
    pub seed: u64,
    pub restarts: Vec<RestartReport>,
}

/// Nelder–Mead from `start`, then verification at the tight tolerance.
fn run_restart(problem: &ControlProblem, start: &CrabParams, index: usize, opts: &CrabOptions) -> Result<RestartReport> {
    let steps = problem.calibrate(start, &opts.search)?;
    let x0 = problem.to_vector(start);
    let objective = |v: &[f64]| problem.infidelity_fixed(&problem.from_vector(v, start), steps);
    let m = nelder_mead_try(objective, &x0, &opts.nelder_mead)?;
    let best = problem.from_vector(&m.x, start);
    let infidelity = infidelity_objective(problem, &best, &opts.verify)?;
    Ok(RestartReport {
        index,
        start: start.clone(),
        best,
        infidelity,
        search_infidelity: m.f,
        evaluations: m.evaluations,
        steps,
    })
}

fn merge(reports: Vec<RestartReport>, seed: u64) -> OptResult {
    let best = reports
        .iter()
        .min_by(|a, b| a.infidelity.total_cmp(&b.infidelity).then(a.index.cmp(&b.index)))
        .expect("at least one restart");
    OptResult {
        best_params: best.best.clone(),
        infidelity: best.infidelity,
        evaluations: reports.iter().map(|r| r.evaluations).sum(),
        restarts_used: reports.len(),
        seed,
        restarts: reports,
    }
}

/// Local Nelder–Mead refinement from a given parameter set.
pub fn refine(problem: &ControlProblem, start: &CrabParams, opts: &CrabOptions) -> Result<OptResult> {
    problem.validate()?;
    start.validate(problem.kind)?;
    Ok(merge(vec![run_restart(problem, start, 0, opts)?], opts.seed))
}

/// Random starting point of restart `index`, drawn from its own stream.
pub fn restart_start(template: &CrabParams, index: usize, opts: &CrabOptions) -> CrabParams {
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let (lo, hi) = opts.amplitude_range;
    let (wlo, whi) = opts.omega_range;
    let mut p = template.clone();
    for v in p.omega.iter_mut() {
        *v = rng.random_range(wlo..=whi);
    }
    for v in p.x.iter_mut().chain(p.xp.iter_mut()) {
        *v = rng.random_range(lo..=hi);
    }
    p
}

/// Multistart search: each restart draws frequencies and amplitudes from a
/// generator seeded by `(seed, restart index)` and runs Nelder–Mead. The
/// best verified restart wins, ties going to the lower index.
pub fn optimize_crab(problem: &ControlProblem, template: &CrabParams, opts: &CrabOptions) -> Result<OptResult> {
    problem.validate()?;
    template.validate(problem.kind)?;
    if opts.n_restarts == 0 {
        return Err(Error::InvalidParameters("n_restarts must be at least 1".into()));
    }
    let (wlo, whi) = opts.omega_range;
    if !(wlo.is_finite() && whi.is_finite() && wlo <= whi) {
        return Err(Error::InvalidParameters("omega_range must be a finite, ordered pair".into()));
    }
    let reports = map_indexed(opts.execution, opts.n_restarts, |k| {
        run_restart(problem, &restart_start(template, k, opts), k, opts)
    });
    Ok(merge(reports.into_iter().collect::<Result<Vec<_>>>()?, opts.seed))
}

/// Uniform samples `(t, J₀(t), J₁(t), …)` of the bound channel pulses.
pub fn pulse_table(problem: &ControlProblem, p: &CrabParams, samples: usize) -> Result<Vec<Vec<f64>>> {
    let h = problem.hamiltonian(p)?;
    let samples = samples.max(2);
    Ok((0..samples)
        .map(|k| {
            let t = p.horizon * k as f64 / (samples - 1) as f64;
            std::iter::once(t).chain(problem.channels.iter().map(|&e| h.entry_at(e, t))).collect()
        })
        .collect())
}
