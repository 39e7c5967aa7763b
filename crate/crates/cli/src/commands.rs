//! The `spectrum`, `simulate`, `optimize` and `route` commands. Each returns
//! its artifacts in memory; [`Artifacts::write`] puts them on disk.

use std::f64::consts::SQRT_2;
use std::path::Path;

use clsnet::crab::{infidelity_objective, optimize_crab, pulse_table, refine, CrabOptions, OptResult};
use clsnet::evolve::{run_schedule, Trajectory};
use clsnet::lattice::SiteGraph;
use clsnet::nelder_mead::NelderMeadOptions;
use clsnet::par::Execution;
use clsnet::protocols::{
    build_schedule, solve_generation_params, solve_transfer_params, Event, FlipChoice, GenerationBranch, GenerationParams,
    GraphKind, ProtocolParams, ProtocolSchedule, SevenParams, TransferParams, Variant,
};
use clsnet::routing::{plan_route, schedule_multi, simulate_route, timeline_schedule};
use clsnet::spectral::{equitable_blocks_star, find_cls_preferring, nonequitable_blocks_seven, spectrum, Permutation};
use clsnet::state::{fidelity, StateVector};
use serde_json::{json, Value};

use crate::config::{Action, OptimizeMode, Protocol, ScenarioConfig, SimulateSpec, SystemSpec};
use crate::output::{json, table_csv, trajectory_csv, write};
use crate::CliError;

/// Summary plus any tables a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub summary: Value,
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn summary_json(&self) -> String {
        json(&self.summary)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write(dir, "summary.json", &self.summary_json())?;
        for (name, contents) in &self.files {
            write(dir, name, contents)?;
        }
        Ok(())
    }
}

/// Runs whatever the config's action asks for.
pub fn run(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    cfg.validate()?;
    let mut a = match &cfg.action {
        Action::Spectrum(s) => cmd_spectrum(cfg, s.max_support)?,
        Action::Simulate(s) => cmd_simulate(cfg, s)?,
        Action::Optimize(_) => cmd_optimize(cfg)?,
        Action::Route(_) => cmd_route(cfg)?,
    };
    let obj = a.summary.as_object_mut().expect("summaries are objects");
    obj.insert("seed".into(), json!(cfg.seed));
    obj.insert("digest".into(), json!(cfg.digest()));
    Ok(a)
}

fn cmd_spectrum(cfg: &ScenarioConfig, max_support: usize) -> Result<Artifacts, CliError> {
    let h = cfg.hamiltonian()?.evaluate_at(0.0);
    let s = spectrum(&h)?;
    let graph = match cfg.system {
        SystemSpec::Star => SiteGraph::star(),
        SystemSpec::Seven => SiteGraph::seven(),
        SystemSpec::Dll { .. } => cfg.lattice()?.graph,
    };
    let dimers: Vec<Vec<usize>> = graph.dimers().iter().map(|d| d.sites().to_vec()).collect();
    let cls = find_cls_preferring(&h, max_support, &dimers)?;
    let cls: Vec<Value> = cls
        .iter()
        .map(|c| json!({"energy": c.energy, "support": c.support, "amplitudes": c.support_amplitudes(), "protected": c.protected}))
        .collect();
    let blocks = match cfg.system {
        SystemSpec::Star => equitable_blocks_star(&h, &Permutation::cycle(5, &[0, 1, 3, 4])?).ok(),
        SystemSpec::Seven => nonequitable_blocks_seven(&h).ok(),
        SystemSpec::Dll { .. } => None,
    };
    let partition = blocks.map(|b| {
        let list: Vec<Value> = b
            .blocks
            .iter()
            .map(|k| json!({"label": k.label, "size": k.matrix.nrows(), "eigenvalues": k.spectrum().eigenvalues}))
            .collect();
        json!({"blocks": list, "union": b.union_eigenvalues(), "xi": b.xi})
    });
    let summary = json!({
        "command": "spectrum",
        "sites": h.nrows(),
        "eigenvalues": s.eigenvalues,
        "max_residual": s.max_residual(&h),
        "cls": cls,
        "partition": partition,
    });
    Ok(Artifacts { summary, files: Vec::new() })
}

fn matches_v(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn uniform(values: &[f64], what: &str) -> Result<f64, CliError> {
    let first = values[0];
    if values.iter().any(|&x| x != first) {
        return Err(CliError::Config(format!("this protocol needs uniform {what}, got {values:?}")));
    }
    Ok(first)
}

/// Shortest flip transfer for the configured `J` and `v`.
fn star_transfer_params(cfg: &ScenarioConfig, duration: Option<f64>) -> Result<TransferParams, CliError> {
    let j = uniform(&cfg.couplings(), "couplings")?;
    let v = uniform(&cfg.potentials(), "potentials")?;
    let found = (0..=8)
        .flat_map(|k2| (-16..=16).map(move |k1| (k1, k2)))
        .filter_map(|(k1, k2)| solve_transfer_params(k1, k2, j).ok())
        .filter(|p| matches_v(p.v, v))
        .min_by(|a, b| a.t.total_cmp(&b.t));
    match (found, duration) {
        (Some(p), None) => Ok(TransferParams { v, ..p }),
        (found, Some(t)) => Ok(TransferParams { j, v, t, k1: found.map_or(0, |p| p.k1), k2: found.map_or(0, |p| p.k2) }),
        (None, None) => Err(CliError::Config(format!(
            "v = {v} admits no flip transfer for J = {j}; give an explicit duration"
        ))),
    }
}

/// Shortest generation run for `J′ = j` and the configured `v`.
fn generation_params(cfg: &ScenarioConfig, duration: Option<f64>) -> Result<GenerationParams, CliError> {
    let jp = cfg.j();
    let v = uniform(&cfg.potentials(), "potentials")?;
    let found = [GenerationBranch::One, GenerationBranch::Two]
        .into_iter()
        .flat_map(|b| (-8..=8).flat_map(move |k1| (-8..=8).map(move |k2| (b, k1, k2))))
        .filter_map(|(b, k1, k2)| solve_generation_params(b, k1, k2, jp).ok())
        .filter(|p| matches_v(p.v, v))
        .min_by(|a, b| a.t.total_cmp(&b.t));
    match (found, duration) {
        (Some(p), None) => Ok(GenerationParams { v, ..p }),
        (Some(p), Some(t)) => Ok(GenerationParams { v, t, ..p }),
        (None, Some(t)) => Ok(GenerationParams { branch: GenerationBranch::One, k1p: 0, k2p: 0, jp, v, t }),
        (None, None) => Err(CliError::Config(format!(
            "v = {v} admits no generation run for J' = {jp}; give an explicit duration"
        ))),
    }
}

fn seven_params(cfg: &ScenarioConfig, duration: Option<f64>) -> Result<SevenParams, CliError> {
    let c = cfg.couplings();
    if c[0] != c[1] || c[1] != c[4] || c[4] != c[5] || c[2] != c[3] {
        return Err(CliError::Config(format!("seven-site flip transfer needs couplings [J, J, J', J', J, J], got {c:?}")));
    }
    let (j, jp) = (c[0], c[2]);
    let v = uniform(&cfg.potentials(), "potentials")?;
    let t = match duration {
        Some(t) => t,
        // Spectrum {0, ±√2 J, ±2√2 J} when J′ = √3 J.
        None if matches_v(jp, 3f64.sqrt() * j) => std::f64::consts::PI / (SQRT_2 * j.abs()),
        None => return Err(CliError::Config("give an explicit duration for this seven-site parameter set".into())),
    };
    Ok(SevenParams { j, jp, v, t })
}

/// The schedule a `simulate` action describes, with its parameters.
pub fn simulate_schedule(cfg: &ScenarioConfig, s: &SimulateSpec) -> Result<(ProtocolSchedule, Value), CliError> {
    let choice = FlipChoice { upper: s.flip_upper };
    let graph = match cfg.system {
        SystemSpec::Seven => GraphKind::Seven,
        _ => GraphKind::Star,
    };
    let built = |variant, p: ProtocolParams| -> Result<(ProtocolSchedule, Value), CliError> {
        Ok((build_schedule(graph, variant, &p, choice)?, serde_json::to_value(p).expect("serializable")))
    };
    match s.protocol {
        Protocol::Free => {
            let n = cfg.n_sites();
            let sites = s.initial.as_deref().expect("validated");
            let psi = match sites {
                [a] => StateVector::basis(n, *a),
                [a, b] => StateVector::dimer_cls(n, *a, *b),
                _ => unreachable!("validated"),
            };
            let t = s.duration.expect("validated");
            let events = if t > 0.0 {
                vec![Event::Segment { start: 0.0, end: t, hamiltonian: cfg.hamiltonian()? }]
            } else {
                Vec::new()
            };
            let schedule = ProtocolSchedule { name: "free".into(), initial: psi.clone(), target: psi, target_dimer: None, events };
            Ok((schedule, json!({"family": "free", "t": t})))
        }
        Protocol::PhaseFlipTransfer | Protocol::HoppingFlipTransfer => {
            let variant =
                if s.protocol == Protocol::PhaseFlipTransfer { Variant::PhaseFlipTransfer } else { Variant::HoppingFlipTransfer };
            match cfg.system {
                SystemSpec::Seven => built(variant, ProtocolParams::Seven(seven_params(cfg, s.duration)?)),
                _ => built(variant, ProtocolParams::Transfer(star_transfer_params(cfg, s.duration)?)),
            }
        }
        Protocol::Generation | Protocol::ReverseGeneration | Protocol::PiecewiseTransfer => {
            let variant = match s.protocol {
                Protocol::Generation => Variant::Generation,
                Protocol::ReverseGeneration => Variant::ReverseGeneration,
                _ => Variant::PiecewiseTransfer,
            };
            built(variant, ProtocolParams::Generation(generation_params(cfg, s.duration)?))
        }
        Protocol::Crab => {
            let problem = s.problem.expect("validated").problem();
            let p = s.crab.clone().unwrap_or_else(|| problem.published_params());
            let events = vec![Event::Segment { start: 0.0, end: p.horizon, hamiltonian: problem.hamiltonian(&p)? }];
            let schedule = ProtocolSchedule {
                name: problem.name.clone(),
                initial: problem.initial.clone(),
                target: problem.target.clone(),
                target_dimer: None,
                events,
            };
            Ok((schedule, json!({"family": "crab", "problem": problem.name, "crab": p})))
        }
    }
}

fn cmd_simulate(cfg: &ScenarioConfig, s: &SimulateSpec) -> Result<Artifacts, CliError> {
    let (schedule, params) = simulate_schedule(cfg, s)?;
    let traj = run_schedule(&schedule, &schedule.initial, &cfg.run_options())?;
    let f = fidelity(traj.final_state(), &schedule.target)?;
    let summary = json!({
        "command": "simulate",
        "protocol": schedule.name,
        "fidelity": f,
        "infidelity": 1.0 - f,
        "norm_drift": traj.norm_drift(),
        "T": schedule.duration(),
        "samples": traj.times.len(),
        "parameters": params,
    });
    Ok(Artifacts { summary, files: trajectory_file(cfg, &traj) })
}

fn trajectory_file(cfg: &ScenarioConfig, traj: &Trajectory) -> Vec<(String, String)> {
    if cfg.output.trajectory {
        vec![("trajectory.csv".into(), trajectory_csv(traj))]
    } else {
        Vec::new()
    }
}

fn cmd_optimize(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let Action::Optimize(o) = &cfg.action else { unreachable!("dispatched on the action") };
    let problem = o.problem.problem();
    let start = o.start.clone().unwrap_or_else(|| problem.published_params());
    let mut nm = NelderMeadOptions::default();
    if let Some(m) = o.max_evals {
        nm.max_evals = m;
    }
    let opts = CrabOptions {
        n_restarts: o.restarts,
        seed: cfg.seed.unwrap_or(0),
        nelder_mead: nm,
        verify: cfg.integrator(),
        execution: Execution::Parallel,
        ..CrabOptions::default()
    };
    let result = match o.mode {
        OptimizeMode::Evaluate => {
            let inf = infidelity_objective(&problem, &start, &cfg.integrator())?;
            OptResult { best_params: start.clone(), infidelity: inf, evaluations: 1, restarts_used: 0, seed: opts.seed, restarts: vec![] }
        }
        OptimizeMode::Refine => refine(&problem, &start, &opts)?,
        OptimizeMode::Search => optimize_crab(&problem, &start, &opts)?,
    };
    let best = &result.best_params;
    let steps = problem.calibrate(best, &cfg.integrator())?;
    let drift = (problem.propagate_fixed(best, steps)?.norm() - 1.0).abs();
    let table = pulse_table(&problem, best, o.samples)?;
    let mut header = vec!["t".to_string()];
    header.extend(problem.channels.iter().map(|(a, b)| format!("J_{a}_{b}")));
    let summary = json!({
        "command": "optimize",
        "problem": problem.name,
        "mode": o.mode,
        "fidelity": 1.0 - result.infidelity,
        "infidelity": result.infidelity,
        "norm_drift": drift,
        "T": best.horizon,
        "parameters": best,
        "min_pulse": table.iter().flat_map(|r| r[1..].iter().copied()).fold(f64::INFINITY, f64::min),
        "result": result,
    });
    Ok(Artifacts { summary, files: vec![("pulses.csv".into(), table_csv(&header, &table))] })
}

fn cmd_route(cfg: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let Action::Route(r) = &cfg.action else { unreachable!("dispatched on the action") };
    let lattice = cfg.lattice()?;
    let plans = r
        .routes
        .iter()
        .map(|req| {
            let (a, b) = (cfg.dimer(&lattice, req.from)?, cfg.dimer(&lattice, req.to)?);
            Ok(plan_route(&lattice, a, b, &r.timing)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let timeline = schedule_multi(&plans)?;
    let opts = cfg.run_options();
    let report = simulate_route(&lattice, &timeline, &opts, Execution::Parallel)?;
    let routes: Vec<Value> = report
        .routes
        .iter()
        .zip(&timeline.waits)
        .zip(&timeline.slots)
        .map(|((o, wait), slots)| {
            json!({
                "source": o.source,
                "destination": o.destination,
                "jumps": slots.len(),
                "slots": slots,
                "wait": wait,
                "jump_fidelities": o.jump_fidelities,
                "fidelity": o.fidelity,
                "infidelity": 1.0 - o.fidelity,
                "norm_drift": o.norm_drift,
            })
        })
        .collect();
    let worst = report.routes.iter().map(|o| o.fidelity).fold(1.0, f64::min);
    let drift = report.routes.iter().map(|o| o.norm_drift).fold(0.0, f64::max);
    let mut files = Vec::new();
    if cfg.output.trajectory {
        let n = lattice.n_sites();
        let mut psi = StateVector::zeros(n);
        for p in &timeline.routes {
            *psi.amplitudes_mut() += StateVector::dimer_cls(n, p.source.upper, p.source.lower).amplitudes();
        }
        let traj = run_schedule(&timeline_schedule(&lattice, &timeline)?, &psi.normalized(), &opts)?;
        files = trajectory_file(cfg, &traj);
    }
    files.push(("timeline.json".into(), json(&serde_json::to_value(&timeline).expect("serializable"))));
    let summary = json!({
        "command": "route",
        "fidelity": worst,
        "infidelity": 1.0 - worst,
        "norm_drift": drift,
        "T": report.duration,
        "parameters": {"j": cfg.j(), "v": cfg.v(), "timing": r.timing},
        "routes": routes,
    });
    Ok(Artifacts { summary, files })
}
