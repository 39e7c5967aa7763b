//! Scenario configuration: a TOML document with `system`, `parameters`,
//! `action`, `integrator`, `seed` and `output` sections.

use std::f64::consts::PI;
use std::path::PathBuf;

use clsnet::crab::{ControlProblem, CrabParams};
use clsnet::evolve::{Integrator, RunOptions};
use clsnet::lattice::{build_dll, build_seven, build_star, Dimer, Lattice, TimedHamiltonian};
use clsnet::routing::JumpTiming;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Required whenever the action draws random numbers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub system: SystemSpec,
    #[serde(default)]
    pub parameters: Parameters,
    pub action: Action,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    Star,
    Seven,
    Dll { cells_x: usize, cells_y: usize },
}

/// Couplings and potentials. `j` and `v` set uniform values; `couplings`
/// and `potentials` list them per edge and per site (star and seven only).
/// On the seven-site graph `jp` is the hub–connector coupling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potentials: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Action {
    Spectrum(SpectrumSpec),
    Simulate(SimulateSpec),
    Optimize(OptimizeSpec),
    Route(RouteSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    /// Largest CLS support searched for.
    #[serde(default = "default_support")]
    pub max_support: usize,
}

fn default_support() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Free evolution of `initial` for `duration`.
    Free,
    PhaseFlipTransfer,
    HoppingFlipTransfer,
    Generation,
    ReverseGeneration,
    PiecewiseTransfer,
    /// A control problem driven by its CRAB pulses.
    Crab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    StarTransfer,
    StarCreation,
    SevenTransfer,
    SevenCreation,
}

impl ProblemName {
    pub fn problem(self) -> ControlProblem {
        match self {
            ProblemName::StarTransfer => ControlProblem::star_transfer(),
            ProblemName::StarCreation => ControlProblem::star_creation(),
            ProblemName::SevenTransfer => ControlProblem::seven_transfer(),
            ProblemName::SevenCreation => ControlProblem::seven_creation(),
        }
    }

    fn system(self) -> SystemSpec {
        match self {
            ProblemName::StarTransfer | ProblemName::StarCreation => SystemSpec::Star,
            ProblemName::SevenTransfer | ProblemName::SevenCreation => SystemSpec::Seven,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub protocol: Protocol,
    /// Evolution time; derived from the parameters when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    /// Flip the upper instead of the lower dimer sites.
    #[serde(default)]
    pub flip_upper: bool,
    /// Sites of the initial state for `free`: one site or a dimer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemName>,
    /// Pulse parameters for `crab`; the published ones when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crab: Option<CrabParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizeMode {
    /// Evaluate the starting parameters only.
    Evaluate,
    /// Nelder–Mead from the starting parameters.
    Refine,
    /// Seeded multistart search.
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    pub problem: ProblemName,
    pub mode: OptimizeMode,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<usize>,
    /// Starting point for `evaluate` and `refine`, template for `search`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<CrabParams>,
    /// Rows of the pulse table.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_restarts() -> usize {
    32
}

fn default_samples() -> usize {
    257
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    X,
    Y,
}

/// Dimer to the right (`x`) or above (`y`) of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimerRef {
    pub cell: [usize; 2],
    pub axis: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteRequest {
    pub from: DimerRef,
    pub to: DimerRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    #[serde(default)]
    pub timing: JumpTiming,
    pub routes: Vec<RouteRequest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSpec {
    pub tol: f64,
    pub step: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        let i = Integrator::default();
        IntegratorSpec { tol: i.tol, step: i.initial_step }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Spacing of trajectory rows inside evolution segments.
    pub sample_interval: f64,
    pub trajectory: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out"), sample_interval: PI / 32.0, trajectory: true }
    }
}

/// First line (1-based) whose key is `key`.
fn line_of(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|k| k + 1)
}

fn invalid(src: Option<&str>, key: &str, msg: impl Into<String>) -> CliError {
    let msg = msg.into();
    match src.and_then(|s| line_of(s, key)) {
        Some(line) => CliError::Config(format!("line {line}: {msg}")),
        None => CliError::Config(msg),
    }
}

impl ScenarioConfig {
    /// Parses and validates a TOML document.
    pub fn parse(src: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check(Some(src))?;
        Ok(cfg)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// SHA-256 of the emitted document without the output directory, which
    /// does not affect any result.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let hash = Sha256::digest(c.emit().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.check(None)
    }

    fn check(&self, src: Option<&str>) -> Result<(), CliError> {
        let it = &self.integrator;
        if !(1e-14..=1e-6).contains(&it.tol) {
            return Err(invalid(src, "tol", format!("integrator tolerance {} outside [1e-14, 1e-6]", it.tol)));
        }
        if !(it.step > 0.0 && it.step.is_finite()) {
            return Err(invalid(src, "step", "integrator step must be positive"));
        }
        if !(self.output.sample_interval > 0.0) {
            return Err(invalid(src, "sample_interval", "sample interval must be positive"));
        }
        let p = &self.parameters;
        let counts = match self.system {
            SystemSpec::Star => Some((4, 5)),
            SystemSpec::Seven => Some((6, 7)),
            SystemSpec::Dll { cells_x, cells_y } => {
                if cells_x == 0 || cells_y == 0 {
                    return Err(invalid(src, "cells_x", "lattice needs at least one cell along each axis"));
                }
                if p.couplings.is_some() || p.potentials.is_some() || p.jp.is_some() {
                    return Err(invalid(src, "couplings", "a decorated Lieb lattice takes only uniform j and v"));
                }
                None
            }
        };
        if let Some((nc, np)) = counts {
            if let Some(c) = &p.couplings {
                if c.len() != nc {
                    return Err(invalid(src, "couplings", format!("expected {nc} couplings, got {}", c.len())));
                }
            }
            if let Some(v) = &p.potentials {
                if v.len() != np {
                    return Err(invalid(src, "potentials", format!("expected {np} potentials, got {}", v.len())));
                }
            }
        }
        let values = p.j.iter().chain(&p.jp).chain(&p.v).chain(p.couplings.iter().flatten()).chain(p.potentials.iter().flatten());
        if values.into_iter().any(|x| !x.is_finite()) {
            return Err(invalid(src, "j", "parameters must be finite"));
        }
        let n = self.n_sites();
        match &self.action {
            Action::Spectrum(s) => {
                if s.max_support == 0 {
                    return Err(invalid(src, "max_support", "max_support must be at least 1"));
                }
            }
            Action::Simulate(s) => {
                if let Some(d) = s.duration {
                    if !(d >= 0.0 && d.is_finite()) {
                        return Err(invalid(src, "duration", "duration must be finite and non-negative"));
                    }
                }
                match s.protocol {
                    Protocol::Free => {
                        let sites = s.initial.as_deref().unwrap_or(&[]);
                        if !(1..=2).contains(&sites.len()) {
                            return Err(invalid(src, "initial", "free evolution needs one or two initial sites"));
                        }
                        if let Some(&k) = sites.iter().find(|&&k| k >= n) {
                            return Err(invalid(src, "initial", format!("site {k} is outside a system of {n} sites")));
                        }
                        if s.duration.is_none() {
                            return Err(invalid(src, "protocol", "free evolution needs a duration"));
                        }
                    }
                    Protocol::Crab => {
                        let Some(problem) = s.problem else {
                            return Err(invalid(src, "protocol", "the crab protocol needs a problem"));
                        };
                        if problem.system() != self.system {
                            return Err(invalid(src, "problem", format!("{problem:?} does not live on the declared system")));
                        }
                        if let Some(c) = &s.crab {
                            c.validate(problem.problem().kind).map_err(|e| invalid(src, "crab", e.to_string()))?;
                        }
                    }
                    Protocol::PhaseFlipTransfer | Protocol::HoppingFlipTransfer => {
                        if matches!(self.system, SystemSpec::Dll { .. }) {
                            return Err(invalid(src, "protocol", "flip transfers run on the star or seven-site graph"));
                        }
                    }
                    Protocol::Generation | Protocol::ReverseGeneration | Protocol::PiecewiseTransfer => {
                        if self.system != SystemSpec::Star {
                            return Err(invalid(src, "protocol", "generation protocols run on the star"));
                        }
                    }
                }
            }
            Action::Optimize(o) => {
                if o.problem.system() != self.system {
                    return Err(invalid(src, "problem", format!("{:?} does not live on the declared system", o.problem)));
                }
                if let Some(c) = &o.start {
                    c.validate(o.problem.problem().kind).map_err(|e| invalid(src, "start", e.to_string()))?;
                }
                if o.mode == OptimizeMode::Search {
                    if self.seed.is_none() {
                        return Err(invalid(src, "mode", "a multistart search needs a seed"));
                    }
                    if o.restarts == 0 {
                        return Err(invalid(src, "restarts", "restarts must be at least 1"));
                    }
                }
            }
            Action::Route(r) => {
                let SystemSpec::Dll { cells_x, cells_y } = self.system else {
                    return Err(invalid(src, "kind", "routes need a decorated Lieb lattice"));
                };
                if r.routes.is_empty() {
                    return Err(invalid(src, "routes", "no routes requested"));
                }
                for req in &r.routes {
                    for d in [req.from, req.to] {
                        if d.cell[0] >= cells_x || d.cell[1] >= cells_y {
                            return Err(invalid(
                                src,
                                "cell",
                                format!("cell {:?} is outside the {cells_x}x{cells_y} lattice", d.cell),
                            ));
                        }
                    }
                }
                if !(r.timing.ramp > 0.0 && r.timing.ramp.is_finite()) {
                    return Err(invalid(src, "ramp", "ramp duration must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        match self.system {
            SystemSpec::Star => 5,
            SystemSpec::Seven => 7,
            SystemSpec::Dll { cells_x, cells_y } => 5 * cells_x * cells_y,
        }
    }

    /// Uniform coupling, with a system-dependent default.
    pub fn j(&self) -> f64 {
        self.parameters.j.unwrap_or(match self.system {
            SystemSpec::Seven => 1.0,
            _ => 0.25,
        })
    }

    pub fn v(&self) -> f64 {
        self.parameters.v.unwrap_or(match self.system {
            SystemSpec::Seven => 0.0,
            _ => 0.5,
        })
    }

    /// Per-edge couplings of the star or seven-site graph.
    pub fn couplings(&self) -> Vec<f64> {
        if let Some(c) = &self.parameters.couplings {
            return c.clone();
        }
        let j = self.j();
        match self.system {
            SystemSpec::Seven => {
                let jp = self.parameters.jp.unwrap_or(3f64.sqrt());
                vec![j, j, jp, jp, j, j]
            }
            _ => vec![j; 4],
        }
    }

    pub fn potentials(&self) -> Vec<f64> {
        self.parameters.potentials.clone().unwrap_or_else(|| vec![self.v(); self.n_sites()])
    }

    pub fn hamiltonian(&self) -> Result<TimedHamiltonian, CliError> {
        Ok(match self.system {
            SystemSpec::Star => {
                let (c, p) = (self.couplings(), self.potentials());
                build_star([c[0], c[1], c[2], c[3]], [p[0], p[1], p[2], p[3], p[4]])
            }
            SystemSpec::Seven => {
                let (c, p) = (self.couplings(), self.potentials());
                build_seven(c.try_into().expect("validated"), p.try_into().expect("validated"))
            }
            SystemSpec::Dll { .. } => self.lattice()?.hamiltonian,
        })
    }

    pub fn lattice(&self) -> Result<Lattice, CliError> {
        match self.system {
            SystemSpec::Dll { cells_x, cells_y } => Ok(build_dll(cells_x, cells_y, self.j(), self.v())?),
            _ => Err(CliError::Config("only the decorated Lieb lattice is a routing network".into())),
        }
    }

    pub fn dimer(&self, lattice: &Lattice, d: DimerRef) -> Result<Dimer, CliError> {
        let k = lattice
            .dimer_at(d.cell[0], d.cell[1], d.axis == Axis::Y)
            .ok_or_else(|| CliError::Config(format!("cell {:?} is outside the lattice", d.cell)))?;
        Ok(lattice.graph.dimers()[k])
    }

    pub fn integrator(&self) -> Integrator {
        Integrator { tol: self.integrator.tol, initial_step: self.integrator.step, ..Integrator::default() }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { integrator: self.integrator(), sample_interval: self.output.sample_interval }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locates_keys() {
        let src = "seed = 1\n[integrator]\n  tol = 5.0\n";
        assert_eq!(line_of(src, "tol"), Some(3));
        assert_eq!(line_of(src, "to"), None);
    }
}
