//! Analytic flip-based transfer and generation protocols for the star and
//! seven-site graphs, and the schedule type that executes them.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_seven, build_star, normalize_entry, Entry, TimedHamiltonian, STAR_CENTER};
use crate::state::StateVector;

/// Slack for comparing event times.
pub const TIME_EPS: f64 = 1e-12;

/// Free-evolution parameters for star transfer between the two dimers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferParams {
    pub k1: i64,
    pub k2: i64,
    pub j: f64,
    pub v: f64,
    pub t: f64,
}

/// `v = J(4k₁/(1+2k₂) − 2)`, `T = π(1+2k₂)/(2J)`.
///
/// These make `e^{−iET}` equal `−1` on the degenerate level `v` relative to
/// `+1` on both `v ± 2J`, which maps `|L⟩` onto `|R⟩` up to a global phase.
pub fn solve_transfer_params(k1: i64, k2: i64, j: f64) -> Result<TransferParams> {
    if !j.is_finite() || j == 0.0 {
        return Err(Error::InvalidParameters(format!("coupling must be finite and nonzero, got {j}")));
    }
    let d = (1 + 2 * k2) as f64;
    let t = PI * d / (2.0 * j);
    if !(t > 0.0) {
        return Err(Error::InvalidParameters(format!("(k1={k1}, k2={k2}) gives non-positive duration {t}")));
    }
    let v = j * (4.0 * k1 as f64 / d - 2.0);
    Ok(TransferParams { k1, k2, j, v, t })
}

/// Transfer parameters with the shortest duration; ties prefer the smallest
/// `|v|`, then non-negative `v`, then the smaller `k₁`.
pub fn fastest_transfer(j: f64) -> Result<TransferParams> {
    let mut best: Option<TransferParams> = None;
    for k2 in -4..=4 {
        for k1 in -8..=8 {
            let Ok(p) = solve_transfer_params(k1, k2, j) else { continue };
            let better = match &best {
                None => true,
                Some(b) => {
                    let key = |q: &TransferParams| (q.t, q.v.abs(), q.v < 0.0, q.k1);
                    let (a, c) = (key(&p), key(b));
                    a.0.total_cmp(&c.0)
                        .then(a.1.total_cmp(&c.1))
                        .then(a.2.cmp(&c.2))
                        .then(a.3.cmp(&c.3))
                        .is_lt()
                }
            };
            if better {
                best = Some(p);
            }
        }
    }
    best.ok_or_else(|| Error::InvalidParameters("no admissible transfer parameters".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenerationBranch {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

/// Free-evolution parameters for `|c⟩ → |L⟩` on one dimer coupled with `J′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub branch: GenerationBranch,
    pub k1p: i64,
    pub k2p: i64,
    pub jp: f64,
    pub v: f64,
    pub t: f64,
}

/// Branch 1: `v = √2J′(4k′₁−1)/(1+4k′₂)`, `T = π(4k′₁−1)/(2v)`;
/// branch 2: `v = √2J′(4k′₁+1)/(4k′₂−1)`, `T = π(4k′₁+1)/(2v)`.
pub fn solve_generation_params(branch: GenerationBranch, k1p: i64, k2p: i64, jp: f64) -> Result<GenerationParams> {
    if !jp.is_finite() || jp == 0.0 {
        return Err(Error::InvalidParameters(format!("coupling must be finite and nonzero, got {jp}")));
    }
    let (num, den) = match branch {
        GenerationBranch::One => (4 * k1p - 1, 1 + 4 * k2p),
        GenerationBranch::Two => (4 * k1p + 1, 4 * k2p - 1),
    };
    let v = SQRT_2 * jp * num as f64 / den as f64;
    let t = PI * num as f64 / (2.0 * v);
    if v == 0.0 || !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameters(format!(
            "(k1'={k1p}, k2'={k2p}) gives v={v}, T={t}; need v ≠ 0 and T > 0"
        )));
    }
    Ok(GenerationParams { branch, k1p, k2p, jp, v, t })
}

/// Seven-site flip-transfer parameters: dimer coupling `J`, hub–connector
/// couplings `J₃ = J₄ = J′`, uniform potential `v`, duration `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SevenParams {
    pub j: f64,
    pub jp: f64,
    pub v: f64,
    pub t: f64,
}

impl SevenParams {
    /// `J = 1`, `J′ = √3`, `v = 0`, `T = π/√2`.
    pub fn reference() -> Self {
        SevenParams { j: 1.0, jp: 3f64.sqrt(), v: 0.0, t: PI / SQRT_2 }
    }

    pub fn hamiltonian(&self) -> TimedHamiltonian {
        let (j, jp) = (self.j, self.jp);
        build_seven([j, j, jp, jp, j, j], [self.v; 7])
    }
}

/// Negates one amplitude.
pub fn phase_flip(psi: &StateVector, site: usize) -> Result<StateVector> {
    if site >= psi.dim() {
        return Err(Error::SiteOutOfBounds { site, dim: psi.dim() });
    }
    let mut out = psi.clone();
    let a = &mut out.amplitudes_mut()[site];
    *a = -*a;
    Ok(out)
}

/// Negates one off-diagonal coupling (and its mirror).
pub fn hopping_flip(h: &TimedHamiltonian, entry: Entry) -> Result<TimedHamiltonian> {
    if entry.0 == entry.1 {
        return Err(Error::DiagonalFlip(entry.0));
    }
    h.negate_entry(entry)
}

/// One item of a protocol timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Event {
    /// Instantaneous sign change of one amplitude.
    PhaseFlip { t: f64, site: usize },
    /// Instantaneous sign change of one coupling, lasting until flipped back.
    HoppingFlip { t: f64, entry: Entry },
    /// Evolution over `[start, end]`; pulses see the local time `t − start`.
    Segment { start: f64, end: f64, hamiltonian: TimedHamiltonian },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::PhaseFlip { t, .. } | Event::HoppingFlip { t, .. } => *t,
            Event::Segment { start, .. } => *start,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Event::PhaseFlip { .. } => "phase-flip",
            Event::HoppingFlip { .. } => "hopping-flip",
            Event::Segment { .. } => "segment",
        }
    }
}

/// Ordered timeline of flips and evolution segments with declared endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    pub name: String,
    pub initial: StateVector,
    pub target: StateVector,
    /// Dimer holding the target state; its local symmetry must hold at the end.
    pub target_dimer: Option<[usize; 2]>,
    pub events: Vec<Event>,
}

impl ProtocolSchedule {
    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// Time of the last event or segment end.
    pub fn duration(&self) -> f64 {
        self.events
            .iter()
            .map(|e| match e {
                Event::Segment { end, .. } => *end,
                e => e.time(),
            })
            .fold(0.0, f64::max)
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, &TimedHamiltonian)> {
        self.events.iter().filter_map(|e| match e {
            Event::Segment { start, end, hamiltonian } => Some((*start, *end, hamiltonian)),
            _ => None,
        })
    }

    /// Checks ordering, contiguity, bounds and same-instant conflicts.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.target.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.target.dim() });
        }
        let conflict = |t: f64, reason: String| Err(Error::ScheduleConflict { t, reason });
        let mut clock = 0.0f64;
        let mut last_end: Option<f64> = None;
        let mut instant: Vec<&Event> = Vec::new();
        for e in &self.events {
            let t = e.time();
            if !t.is_finite() || t < 0.0 {
                return conflict(t, format!("{} at invalid time", e.kind()));
            }
            if t < clock - TIME_EPS {
                return conflict(t, format!("{} precedes the current time {clock}", e.kind()));
            }
            if t > clock + TIME_EPS {
                instant.clear();
            }
            match e {
                Event::PhaseFlip { site, .. } => {
                    if *site >= n {
                        return Err(Error::SiteOutOfBounds { site: *site, dim: n });
                    }
                }
                Event::HoppingFlip { entry, .. } => {
                    if entry.0 == entry.1 {
                        return Err(Error::DiagonalFlip(entry.0));
                    }
                    if entry.0 >= n || entry.1 >= n {
                        return Err(Error::EntryOutOfBounds { row: entry.0, col: entry.1, dim: n });
                    }
                }
                Event::Segment { start, end, hamiltonian } => {
                    if !(end >= start) || !end.is_finite() {
                        return conflict(*start, format!("segment [{start}, {end}] is reversed"));
                    }
                    if hamiltonian.dim() != n {
                        return Err(Error::DimensionMismatch { expected: n, got: hamiltonian.dim() });
                    }
                    if let Some(prev) = last_end {
                        if (start - prev).abs() > TIME_EPS {
                            return conflict(*start, format!("segment starts at {start} but previous ended at {prev}"));
                        }
                    }
                    last_end = Some(*end);
                }
            }
            if instant.iter().any(|o| same_target(o, e)) {
                return conflict(t, format!("two {} events on the same target", e.kind()));
            }
            instant.push(e);
            clock = match e {
                Event::Segment { end, .. } => *end,
                _ => t.max(clock),
            };
            if let Event::Segment { start, end, .. } = e {
                if end > start {
                    instant.clear();
                }
            }
        }
        Ok(())
    }

    /// Conjugate time reversal: running the result from `ψ(T)*` returns `ψ(0)*`.
    pub fn reversed(&self) -> Self {
        let d = self.duration();
        let events = self
            .events
            .iter()
            .rev()
            .map(|e| match e {
                Event::PhaseFlip { t, site } => Event::PhaseFlip { t: d - t, site: *site },
                Event::HoppingFlip { t, entry } => Event::HoppingFlip { t: d - t, entry: *entry },
                Event::Segment { start, end, hamiltonian } => Event::Segment {
                    start: d - end,
                    end: d - start,
                    hamiltonian: hamiltonian.time_reversed(end - start),
                },
            })
            .collect();
        ProtocolSchedule {
            name: format!("{}-reversed", self.name),
            initial: self.target.conj(),
            target: self.initial.conj(),
            target_dimer: None,
            events,
        }
    }

    /// Hamiltonian of the last segment (in its local time), with the hopping
    /// flips still active at the end applied.
    pub fn final_hamiltonian(&self) -> Option<TimedHamiltonian> {
        let (_, _, h) = self.segments().last()?;
        let mut h = h.clone();
        for e in self.active_flips() {
            h = h.negate_entry(e).ok()?;
        }
        Some(h)
    }

    /// Couplings whose sign is flipped after all events.
    pub fn active_flips(&self) -> Vec<Entry> {
        let mut active: Vec<Entry> = Vec::new();
        for e in &self.events {
            if let Event::HoppingFlip { entry, .. } = e {
                let key = normalize_entry(*entry);
                if let Some(k) = active.iter().position(|&a| a == key) {
                    active.remove(k);
                } else {
                    active.push(key);
                }
            }
        }
        active
    }

    /// Whether the final Hamiltonian treats both target-dimer sites alike:
    /// equal potentials and equal couplings to every other site.
    pub fn target_symmetry_restored(&self) -> bool {
        let (Some([a, b]), Some((start, end, _))) = (self.target_dimer, self.segments().last()) else {
            return true;
        };
        let Some(h) = self.final_hamiltonian() else { return true };
        let m = h.evaluate_at(end - start);
        let n = m.nrows();
        let tol = 1e-12 * m.amax().max(1.0);
        (m[(a, a)] - m[(b, b)]).abs() <= tol
            && (0..n).filter(|&k| k != a && k != b).all(|k| (m[(a, k)] - m[(b, k)]).abs() <= tol)
    }
}

fn same_target(a: &Event, b: &Event) -> bool {
    match (a, b) {
        (Event::PhaseFlip { site: x, .. }, Event::PhaseFlip { site: y, .. }) => x == y,
        (Event::HoppingFlip { entry: x, .. }, Event::HoppingFlip { entry: y, .. }) => {
            normalize_entry(*x) == normalize_entry(*y)
        }
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Star,
    Seven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    PhaseFlipTransfer,
    HoppingFlipTransfer,
    Generation,
    ReverseGeneration,
    PiecewiseTransfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ProtocolParams {
    Transfer(TransferParams),
    Generation(GenerationParams),
    Seven(SevenParams),
}

/// Which site of each dimer is flipped.
///
/// By default phase flips act on the lower dimer sites and hopping flips on
/// the upper dimer couplings; `upper = true` swaps both. All four choices
/// are gauge-equivalent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlipChoice {
    pub upper: bool,
}

impl FlipChoice {
    fn phase_site(&self, dimer: [usize; 2]) -> usize {
        if self.upper {
            dimer[0]
        } else {
            dimer[1]
        }
    }

    fn hopping_site(&self, dimer: [usize; 2]) -> usize {
        if self.upper {
            dimer[1]
        } else {
            dimer[0]
        }
    }
}

pub const STAR_IN: [usize; 2] = [0, 1];
pub const STAR_OUT: [usize; 2] = [3, 4];
pub const SEVEN_IN: [usize; 2] = [0, 1];
pub const SEVEN_OUT: [usize; 2] = [5, 6];

/// Hub coupled to each dimer of the seven-site unit.
const SEVEN_HUBS: [usize; 2] = [2, 4];

fn flip_transfer(
    name: &str,
    h: TimedHamiltonian,
    dims: ([usize; 2], [usize; 2]),
    hubs: (usize, usize),
    t: f64,
    hopping: bool,
    choice: FlipChoice,
) -> ProtocolSchedule {
    let n = h.dim();
    let (din, dout) = dims;
    let (a, b) = if hopping {
        let e_in = normalize_entry((choice.hopping_site(din), hubs.0));
        let e_out = normalize_entry((choice.hopping_site(dout), hubs.1));
        (
            vec![Event::HoppingFlip { t: 0.0, entry: e_in }, Event::HoppingFlip { t: 0.0, entry: e_out }],
            vec![Event::HoppingFlip { t, entry: e_in }, Event::HoppingFlip { t, entry: e_out }],
        )
    } else {
        (
            vec![Event::PhaseFlip { t: 0.0, site: choice.phase_site(din) }],
            vec![Event::PhaseFlip { t, site: choice.phase_site(dout) }],
        )
    };
    let mut events = a;
    events.push(Event::Segment { start: 0.0, end: t, hamiltonian: h });
    events.extend(b);
    ProtocolSchedule {
        name: name.to_string(),
        initial: StateVector::dimer_cls(n, din[0], din[1]),
        target: StateVector::dimer_cls(n, dout[0], dout[1]),
        target_dimer: Some(dout),
        events,
    }
}

/// Star with one dimer coupled by `J′` and the other decoupled.
fn generation_star(jp: f64, v: f64, lower: bool) -> TimedHamiltonian {
    let j = if lower { [jp, jp, 0.0, 0.0] } else { [0.0, 0.0, jp, jp] };
    build_star(j, [v; 5])
}

/// Builds a ready-to-run schedule for an analytic protocol.
pub fn build_schedule(
    graph: GraphKind,
    variant: Variant,
    params: &ProtocolParams,
    choice: FlipChoice,
) -> Result<ProtocolSchedule> {
    let mismatch = || {
        Err(Error::InvalidParameters(format!(
            "variant {variant:?} on the {graph:?} graph does not accept {} parameters",
            match params {
                ProtocolParams::Transfer(_) => "transfer",
                ProtocolParams::Generation(_) => "generation",
                ProtocolParams::Seven(_) => "seven-site",
            }
        )))
    };
    let c = STAR_CENTER;
    match (graph, variant, params) {
        (GraphKind::Star, Variant::PhaseFlipTransfer | Variant::HoppingFlipTransfer, ProtocolParams::Transfer(p)) => {
            let hopping = variant == Variant::HoppingFlipTransfer;
            let h = build_star([p.j; 4], [p.v; 5]);
            let name = if hopping { "star-hopping-flip-transfer" } else { "star-phase-flip-transfer" };
            Ok(flip_transfer(name, h, (STAR_IN, STAR_OUT), (c, c), p.t, hopping, choice))
        }
        (GraphKind::Seven, Variant::PhaseFlipTransfer | Variant::HoppingFlipTransfer, ProtocolParams::Seven(p)) => {
            let hopping = variant == Variant::HoppingFlipTransfer;
            let name = if hopping { "seven-hopping-flip-transfer" } else { "seven-phase-flip-transfer" };
            let hubs = (SEVEN_HUBS[0], SEVEN_HUBS[1]);
            Ok(flip_transfer(name, p.hamiltonian(), (SEVEN_IN, SEVEN_OUT), hubs, p.t, hopping, choice))
        }
        (GraphKind::Star, Variant::Generation, ProtocolParams::Generation(p)) => {
            let site = choice.phase_site(STAR_IN);
            Ok(ProtocolSchedule {
                name: "star-generation".into(),
                initial: StateVector::basis(5, c),
                target: StateVector::dimer_cls(5, STAR_IN[0], STAR_IN[1]),
                target_dimer: Some(STAR_IN),
                events: vec![
                    Event::Segment { start: 0.0, end: p.t, hamiltonian: generation_star(p.jp, p.v, true) },
                    Event::PhaseFlip { t: p.t, site },
                ],
            })
        }
        (GraphKind::Star, Variant::ReverseGeneration, ProtocolParams::Generation(p)) => {
            let site = choice.phase_site(STAR_IN);
            Ok(ProtocolSchedule {
                name: "star-reverse-generation".into(),
                initial: StateVector::dimer_cls(5, STAR_IN[0], STAR_IN[1]),
                target: StateVector::basis(5, c),
                target_dimer: None,
                events: vec![
                    Event::PhaseFlip { t: 0.0, site },
                    Event::Segment { start: 0.0, end: p.t, hamiltonian: generation_star(p.jp, p.v, true) },
                ],
            })
        }
        (GraphKind::Star, Variant::PiecewiseTransfer, ProtocolParams::Generation(p)) => Ok(ProtocolSchedule {
            name: "star-piecewise-transfer".into(),
            initial: StateVector::dimer_cls(5, STAR_IN[0], STAR_IN[1]),
            target: StateVector::dimer_cls(5, STAR_OUT[0], STAR_OUT[1]),
            target_dimer: Some(STAR_OUT),
            events: vec![
                Event::PhaseFlip { t: 0.0, site: choice.phase_site(STAR_IN) },
                Event::Segment { start: 0.0, end: p.t, hamiltonian: generation_star(p.jp, p.v, true) },
                Event::Segment { start: p.t, end: 2.0 * p.t, hamiltonian: generation_star(p.jp, p.v, false) },
                Event::PhaseFlip { t: 2.0 * p.t, site: choice.phase_site(STAR_OUT) },
            ],
        }),
        _ => mismatch(),
    }
}
