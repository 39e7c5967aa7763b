//! CLS transport across a decorated Lieb lattice by consecutive dimer jumps.
//!
//! A jump isolates the star formed by a hub and two of its dimers by ramping
//! every coupling that leaves the star to zero, runs a flip transfer inside
//! the star, and ramps the couplings back. All ramps are linear and every
//! boundary coupling of a dimer ramps together with its partner, so CLSs
//! stored anywhere in the lattice keep their local symmetry throughout.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{run_schedule, RunOptions};
use crate::lattice::{normalize_entry, Dimer, Entry, Lattice, Pulse, SiteRole, TimedHamiltonian};
use crate::par::{map_indexed, Execution};
use crate::protocols::{solve_transfer_params, Event, ProtocolSchedule, TransferParams, TIME_EPS};
use crate::state::{fidelity, StateVector};

/// A hub with the two dimers taking part in one jump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarView {
    pub center: usize,
    pub dimer_in: Dimer,
    pub dimer_out: Dimer,
    /// Every coupling between a star site and a site outside the star.
    pub boundary_entries: Vec<Entry>,
}

impl StarView {
    /// Star sites in the native star order `(in upper, in lower, hub, out upper, out lower)`.
    pub fn sites(&self) -> [usize; 5] {
        [self.dimer_in.upper, self.dimer_in.lower, self.center, self.dimer_out.upper, self.dimer_out.lower]
    }

    /// The 5×5 block of a lattice matrix on the star sites.
    pub fn restrict(&self, m: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        let s = self.sites();
        nalgebra::DMatrix::from_fn(5, 5, |i, j| m[(s[i], s[j])])
    }

    /// Amplitudes of a lattice state on the star sites.
    pub fn restrict_state(&self, psi: &StateVector) -> StateVector {
        let s = self.sites();
        StateVector::from_amplitudes(nalgebra::DVector::from_iterator(5, s.iter().map(|&k| psi[k])))
    }
}

/// Isolates the star around `center` spanned by two of its dimers.
pub fn extract_star(lattice: &Lattice, center: usize, dimer_in: Dimer, dimer_out: Dimer) -> Result<StarView> {
    let g = &lattice.graph;
    if center >= g.n_sites() {
        return Err(Error::SiteOutOfBounds { site: center, dim: g.n_sites() });
    }
    if g.role(center) != SiteRole::Hub {
        return Err(Error::NotAHub(center));
    }
    let adjacent = g.dimers_at(center);
    if adjacent.len() < 2 {
        return Err(Error::TooFewDimers { hub: center, count: adjacent.len() });
    }
    for d in [dimer_in, dimer_out] {
        let k = g
            .dimer_index(d)
            .ok_or_else(|| Error::InvalidParameters(format!("({}, {}) is not a dimer", d.upper, d.lower)))?;
        if !adjacent.contains(&k) || !g.has_edge(d.upper, center) || !g.has_edge(d.lower, center) {
            return Err(Error::InvalidParameters(format!(
                "dimer ({}, {}) is not fully coupled to hub {center}",
                d.upper, d.lower
            )));
        }
    }
    if dimer_in == dimer_out {
        return Err(Error::InvalidParameters("a jump needs two distinct dimers".into()));
    }
    let star = [dimer_in.upper, dimer_in.lower, center, dimer_out.upper, dimer_out.lower];
    for (i, &a) in star.iter().enumerate() {
        for &b in &star[i + 1..] {
            if a != center && b != center && g.has_edge(a, b) {
                return Err(Error::InvalidParameters(format!("star sites {a} and {b} are coupled directly")));
            }
        }
    }
    let boundary: BTreeSet<Entry> = star
        .iter()
        .flat_map(|&s| g.neighbors(s).into_iter().filter(|n| !star.contains(n)).map(move |n| normalize_entry((s, n))))
        .collect();
    Ok(StarView { center, dimer_in, dimer_out, boundary_entries: boundary.into_iter().collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampDirection {
    Down,
    Up,
}

/// Linear ramp of `entries` between their stored values and zero over `[0, dt]`.
///
/// Both members of every pair get the same profile, which requires them to
/// share a stored value.
pub fn build_ramp(
    h: &TimedHamiltonian,
    entries: &[Entry],
    direction: RampDirection,
    dt: f64,
    paired: &[(Entry, Entry)],
) -> Result<Event> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameters(format!("ramp duration must be positive, got {dt}")));
    }
    let keys: Vec<Entry> = entries.iter().map(|&e| normalize_entry(e)).collect();
    for &(a, b) in paired {
        let (a, b) = (normalize_entry(a), normalize_entry(b));
        for e in [a, b] {
            if !keys.contains(&e) {
                return Err(Error::InvalidParameters(format!("paired entry ({}, {}) is not being ramped", e.0, e.1)));
            }
        }
        if h.base_value(a) != h.base_value(b) {
            return Err(Error::InvalidParameters(format!(
                "paired entries ({}, {}) and ({}, {}) have different stored values",
                a.0, a.1, b.0, b.1
            )));
        }
    }
    let mut out = h.clone();
    for &e in &keys {
        let base = h.base_value(e);
        let pulse = match direction {
            RampDirection::Down => Pulse::ramp(base, 0.0, 0.0, dt),
            RampDirection::Up => Pulse::ramp(0.0, base, 0.0, dt),
        };
        out = out.attach_pulse(e, pulse)?;
    }
    Ok(Event::Segment { start: 0.0, end: dt, hamiltonian: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpVariant {
    #[default]
    PhaseFlip,
    HoppingFlip,
}

/// How each jump is executed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JumpTiming {
    /// Duration of each down and up ramp.
    pub ramp: f64,
    pub variant: JumpVariant,
    /// Ramp couplings away from the stored CLS in the first half of the
    /// down-ramp (and those away from the delivered CLS in the second half of
    /// the up-ramp) instead of over the whole interval.
    pub stagger: bool,
}

impl Default for JumpTiming {
    fn default() -> Self {
        JumpTiming { ramp: 1.0, variant: JumpVariant::PhaseFlip, stagger: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub star: StarView,
    pub variant: JumpVariant,
    pub ramp: f64,
    pub stagger: bool,
    /// Flip transfer used inside the isolated star.
    pub transfer: TransferParams,
}

impl Jump {
    pub fn duration(&self) -> f64 {
        2.0 * self.ramp + self.transfer.t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub source: Dimer,
    pub destination: Dimer,
    pub jumps: Vec<Jump>,
}

impl RoutePlan {
    /// Checks that consecutive jumps hand the CLS over dimer by dimer.
    pub fn validate(&self) -> Result<()> {
        let mut at = self.source;
        for (k, j) in self.jumps.iter().enumerate() {
            if j.star.dimer_in != at {
                return Err(Error::InvalidParameters(format!("jump {k} does not start where the previous one ended")));
            }
            if !(j.ramp > 0.0 && j.ramp.is_finite() && j.transfer.t > 0.0) {
                return Err(Error::InvalidParameters(format!("jump {k} has invalid timing")));
            }
            at = j.star.dimer_out;
        }
        if at != self.destination {
            return Err(Error::InvalidParameters("route does not end at its destination".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.jumps.iter().map(Jump::duration).sum()
    }
}

/// Fastest flip transfer matching the uniform coupling and potential of a star.
pub fn star_transfer(lattice: &Lattice, star: &StarView) -> Result<TransferParams> {
    let h = &lattice.hamiltonian;
    if !h.is_static() {
        return Err(Error::InvalidParameters("routing needs a static lattice Hamiltonian".into()));
    }
    let s = star.sites();
    let c = star.center;
    let j = h.base_value((s[0], c));
    let v = h.base_value((c, c));
    let uniform = [s[0], s[1], s[3], s[4]].iter().all(|&d| h.base_value((d, c)) == j && h.base_value((d, d)) == v);
    if !uniform {
        return Err(Error::InvalidParameters(format!("star around hub {c} is not uniform")));
    }
    let mut best: Option<TransferParams> = None;
    for k2 in 0..=8 {
        for k1 in -16..=16 {
            let Ok(p) = solve_transfer_params(k1, k2, j) else { continue };
            if (p.v - v).abs() <= 1e-12 * j.abs().max(1.0) && best.is_none_or(|b| p.t < b.t) {
                best = Some(p);
            }
        }
    }
    best.ok_or_else(|| {
        Error::InvalidParameters(format!("no flip transfer exists for coupling {j} and potential {v} on hub {c}"))
    })
}

/// Shortest chain of jumps from `src` to `dst`.
///
/// Path length counts jumps; among shortest chains the one whose sequence of
/// hubs is lexicographically smallest wins, then the smaller dimer indices.
pub fn plan_route(lattice: &Lattice, src: Dimer, dst: Dimer, timing: &JumpTiming) -> Result<RoutePlan> {
    let g = &lattice.graph;
    let index = |d: Dimer| {
        g.dimer_index(d).ok_or_else(|| Error::InvalidParameters(format!("({}, {}) is not a dimer", d.upper, d.lower)))
    };
    let (a, b) = (index(src)?, index(dst)?);
    // Moves from a dimer: (hub, next dimer), both fully coupled to the hub.
    let moves = |d: usize| -> Vec<(usize, usize)> {
        let dim = g.dimers()[d];
        let mut out = Vec::new();
        for hub in g.hubs_of(d) {
            if !(g.has_edge(dim.upper, hub) && g.has_edge(dim.lower, hub)) {
                continue;
            }
            for e in g.dimers_at(hub) {
                let de = g.dimers()[e];
                if e != d && g.has_edge(de.upper, hub) && g.has_edge(de.lower, hub) {
                    out.push((hub, e));
                }
            }
        }
        out.sort_unstable();
        out
    };
    let n = g.dimers().len();
    let mut dist = vec![usize::MAX; n];
    dist[b] = 0;
    let mut queue = VecDeque::from([b]);
    while let Some(d) = queue.pop_front() {
        for (_, e) in moves(d) {
            if dist[e] == usize::MAX {
                dist[e] = dist[d] + 1;
                queue.push_back(e);
            }
        }
    }
    if dist[a] == usize::MAX {
        return Err(Error::NoPath { from: a, to: b });
    }
    let mut jumps = Vec::with_capacity(dist[a]);
    let mut cur = a;
    while cur != b {
        let (hub, next) = moves(cur)
            .into_iter()
            .find(|&(_, e)| dist[e] + 1 == dist[cur])
            .expect("a neighbour one step closer exists");
        let star = extract_star(lattice, hub, g.dimers()[cur], g.dimers()[next])?;
        let transfer = star_transfer(lattice, &star)?;
        jumps.push(Jump { star, variant: timing.variant, ramp: timing.ramp, stagger: timing.stagger, transfer });
        cur = next;
    }
    let plan = RoutePlan { source: src, destination: dst, jumps };
    plan.validate()?;
    Ok(plan)
}

/// One jump placed on the absolute time axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub start: f64,
    pub end: f64,
}

/// Routes with the absolute interval of every jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub routes: Vec<RoutePlan>,
    /// `slots[r][k]` is when jump `k` of route `r` occupies its star.
    pub slots: Vec<Vec<Slot>>,
    /// Total waiting inserted into each route.
    pub waits: Vec<f64>,
}

fn overlaps(a: Slot, b: Slot) -> bool {
    a.start < b.end - TIME_EPS && b.start < a.end - TIME_EPS
}

/// Sites a jump works on: its hub and both of its dimers.
fn footprint(j: &Jump) -> [usize; 5] {
    j.star.sites()
}

fn shares_sites(a: &Jump, b: &Jump) -> bool {
    let fb = footprint(b);
    footprint(a).iter().any(|s| fb.contains(s))
}

impl Timeline {
    pub fn duration(&self) -> f64 {
        self.slots.iter().flatten().map(|s| s.end).fold(0.0, f64::max)
    }

    /// Intervals during which route `r` leaves its CLS parked on a dimer.
    fn resting(&self, r: usize) -> Vec<(Dimer, Slot)> {
        let plan = &self.routes[r];
        let mut out = Vec::new();
        let mut at = (plan.source, 0.0);
        for (j, s) in plan.jumps.iter().zip(&self.slots[r]) {
            out.push((at.0, Slot { start: at.1, end: s.start }));
            at = (j.star.dimer_out, s.end);
        }
        out.push((at.0, Slot { start: at.1, end: f64::INFINITY }));
        out
    }

    /// Re-checks every invariant: chained jumps in order, no star shared by
    /// two routes at once, and no jump touching a dimer where another
    /// route's CLS is parked.
    pub fn verify(&self) -> Result<()> {
        if self.slots.len() != self.routes.len() || self.waits.len() != self.routes.len() {
            return Err(Error::TimelineConflict("slot table does not match the routes".into()));
        }
        for (r, (plan, slots)) in self.routes.iter().zip(&self.slots).enumerate() {
            plan.validate()?;
            if slots.len() != plan.jumps.len() {
                return Err(Error::TimelineConflict(format!("route {r} has {} slots for {} jumps", slots.len(), plan.jumps.len())));
            }
            let mut clock = 0.0;
            for (k, (s, j)) in slots.iter().zip(&plan.jumps).enumerate() {
                if s.start < clock - TIME_EPS || (s.end - s.start - j.duration()).abs() > TIME_EPS * s.end.max(1.0) {
                    return Err(Error::TimelineConflict(format!("route {r} jump {k} is mistimed")));
                }
                clock = s.end;
            }
        }
        for r in 0..self.routes.len() {
            for q in 0..self.routes.len() {
                if q == r {
                    continue;
                }
                for (k, (j, s)) in self.routes[r].jumps.iter().zip(&self.slots[r]).enumerate() {
                    if q > r {
                        for (m, (oj, os)) in self.routes[q].jumps.iter().zip(&self.slots[q]).enumerate() {
                            if overlaps(*s, *os) && shares_sites(j, oj) {
                                return Err(Error::TimelineConflict(format!(
                                    "route {r} jump {k} and route {q} jump {m} use hub {} / {} at the same time",
                                    j.star.center, oj.star.center
                                )));
                            }
                        }
                    }
                    for (d, rest) in self.resting(q) {
                        if overlaps(*s, rest) && (j.star.dimer_in == d || j.star.dimer_out == d) {
                            return Err(Error::TimelineConflict(format!(
                                "route {r} jump {k} passes dimer ({}, {}) while route {q} keeps its CLS there",
                                d.upper, d.lower
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Places routes greedily in request order, delaying each jump until the
/// sites it needs are free of earlier routes.
pub fn schedule_multi(routes: &[RoutePlan]) -> Result<Timeline> {
    let mut slots: Vec<Vec<Slot>> = Vec::with_capacity(routes.len());
    let mut waits = Vec::with_capacity(routes.len());
    for (r, plan) in routes.iter().enumerate() {
        plan.validate()?;
        let mut mine = Vec::with_capacity(plan.jumps.len());
        let mut clock = 0.0f64;
        let mut waited = 0.0;
        for j in &plan.jumps {
            let mut start = clock;
            loop {
                let s = Slot { start, end: start + j.duration() };
                let blocking = (0..r)
                    .flat_map(|q| routes[q].jumps.iter().zip(&slots[q]))
                    .filter(|(oj, os)| overlaps(s, **os) && shares_sites(j, oj))
                    .map(|(_, os)| os.end)
                    .fold(f64::NEG_INFINITY, f64::max);
                if blocking == f64::NEG_INFINITY {
                    break;
                }
                start = blocking;
            }
            waited += start - clock;
            let s = Slot { start, end: start + j.duration() };
            mine.push(s);
            clock = s.end;
        }
        slots.push(mine);
        waits.push(waited);
    }
    let timeline = Timeline { routes: routes.to_vec(), slots, waits };
    timeline.verify()?;
    Ok(timeline)
}

/// Piecewise-linear coupling factor of one jump: 1 → 0 → 0 → 1.
#[derive(Debug, Clone, Copy)]
struct Factor([f64; 4]);

impl Factor {
    fn at(&self, t: f64) -> f64 {
        let [a, b, c, d] = self.0;
        if t <= a || t >= d {
            1.0
        } else if t >= b && t <= c {
            0.0
        } else if t < b {
            1.0 - (t - a) / (b - a)
        } else {
            (t - c) / (d - c)
        }
    }
}

/// Ramp factors of every boundary entry touched by a jump starting at `s`.
fn jump_factors(j: &Jump, s: f64) -> Vec<(Entry, Factor)> {
    let (dt, t) = (j.ramp, j.transfer.t);
    let full = Factor([s, s + dt, s + dt + t, s + 2.0 * dt + t]);
    let in_sites = j.star.dimer_in.sites();
    let out_sites = j.star.dimer_out.sites();
    j.star
        .boundary_entries
        .iter()
        .map(|&e| {
            if !j.stagger {
                return (e, full);
            }
            let touches = |d: [usize; 2]| d.contains(&e.0) || d.contains(&e.1);
            let down_end = if touches(in_sites) { s + dt } else { s + 0.5 * dt };
            let up_start = if touches(out_sites) { s + dt + t } else { s + 1.5 * dt + t };
            (e, Factor([s, down_end, up_start, s + 2.0 * dt + t]))
        })
        .collect()
}

/// Compiles a timeline into one schedule on the full lattice.
pub fn timeline_schedule(lattice: &Lattice, timeline: &Timeline) -> Result<ProtocolSchedule> {
    timeline.verify()?;
    let h0 = &lattice.hamiltonian;
    if !h0.is_static() {
        return Err(Error::InvalidParameters("routing needs a static lattice Hamiltonian".into()));
    }
    let n = lattice.n_sites();
    let mut factors: Vec<(Entry, Factor)> = Vec::new();
    let mut flips: Vec<(f64, Event)> = Vec::new();
    let mut knots = vec![0.0];
    for (plan, slots) in timeline.routes.iter().zip(&timeline.slots) {
        for (j, s) in plan.jumps.iter().zip(slots) {
            knots.extend([s.start, s.start + j.ramp, s.start + j.ramp + j.transfer.t, s.end]);
            for (e, f) in jump_factors(j, s.start) {
                knots.extend(f.0);
                factors.push((e, f));
            }
            let (t_in, t_out) = (s.start + j.ramp, s.start + j.ramp + j.transfer.t);
            let (din, dout, c) = (j.star.dimer_in, j.star.dimer_out, j.star.center);
            match j.variant {
                JumpVariant::PhaseFlip => {
                    flips.push((t_in, Event::PhaseFlip { t: t_in, site: din.lower }));
                    flips.push((t_out, Event::PhaseFlip { t: t_out, site: dout.lower }));
                }
                JumpVariant::HoppingFlip => {
                    for t in [t_in, t_out] {
                        for d in [din, dout] {
                            flips.push((t, Event::HoppingFlip { t, entry: normalize_entry((d.upper, c)) }));
                        }
                    }
                }
            }
        }
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
    flips.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut events = Vec::new();
    let mut pending = flips.into_iter().peekable();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        while let Some((t, _)) = pending.peek() {
            if *t > a + TIME_EPS {
                break;
            }
            events.push(pending.next().expect("peeked").1.clone_at(a));
        }
        let mut h = h0.clone();
        let touched: BTreeSet<Entry> = factors.iter().map(|(e, _)| *e).collect();
        for e in touched {
            let active: Vec<&Factor> = factors.iter().filter(|(k, _)| *k == e).map(|(_, f)| f).collect();
            let base = h0.base_value(e);
            let (still, moving): (Vec<&Factor>, Vec<&Factor>) = active.iter().partition(|f| f.at(a) == f.at(b));
            let scale = base * still.iter().map(|f| f.at(a)).product::<f64>();
            if moving.is_empty() || scale == 0.0 {
                h.set(e, scale)?;
            } else {
                let mut parts = vec![Pulse::constant(scale)];
                parts.extend(moving.iter().map(|f| Pulse::ramp(f.at(a), f.at(b), 0.0, b - a)));
                h = h.attach_pulse(e, Pulse::Product { factors: parts })?;
            }
        }
        events.push(Event::Segment { start: a, end: b, hamiltonian: h });
    }
    let end = *knots.last().expect("knots start at zero");
    events.extend(pending.map(|(_, e)| e.clone_at(end)));
    let first = timeline.routes.first();
    let (initial, target) = match first {
        Some(p) => (
            StateVector::dimer_cls(n, p.source.upper, p.source.lower),
            StateVector::dimer_cls(n, p.destination.upper, p.destination.lower),
        ),
        None => (StateVector::basis(n, 0), StateVector::basis(n, 0)),
    };
    Ok(ProtocolSchedule {
        name: "route".into(),
        initial,
        target,
        target_dimer: first.map(|p| [p.destination.upper, p.destination.lower]),
        events,
    })
}

impl Event {
    /// The same event snapped to time `t` (flips only).
    fn clone_at(self, t: f64) -> Event {
        match self {
            Event::PhaseFlip { site, .. } => Event::PhaseFlip { t, site },
            Event::HoppingFlip { entry, .. } => Event::HoppingFlip { t, entry },
            seg => seg,
        }
    }
}

/// Outcome for one route of a simulated timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteOutcome {
    pub source: Dimer,
    pub destination: Dimer,
    /// Fidelity to the CLS on each jump's output dimer when the jump ends.
    pub jump_fidelities: Vec<f64>,
    pub fidelity: f64,
    pub norm_drift: f64,
    pub final_state: StateVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteReport {
    pub duration: f64,
    pub routes: Vec<RouteOutcome>,
    /// Final state for the equal-weight superposition of all source CLSs.
    pub final_state: StateVector,
}

/// Runs a timeline on the full lattice.
///
/// The dynamics is linear, so each route's source CLS is propagated as its
/// own vector under the shared time-dependent Hamiltonian and flips; the
/// superposition of all sources ends in the normalized sum of these.
pub fn simulate_route(lattice: &Lattice, timeline: &Timeline, opts: &RunOptions, exec: Execution) -> Result<RouteReport> {
    let schedule = timeline_schedule(lattice, timeline)?;
    // Jump fidelities only need the segment endpoints, which are always sampled.
    let opts = &RunOptions { sample_interval: opts.sample_interval.max(timeline.duration()), ..*opts };
    let n = lattice.n_sites();
    let outcomes: Vec<Result<RouteOutcome>> = map_indexed(exec, timeline.routes.len(), |r| {
        let plan = &timeline.routes[r];
        let psi0 = StateVector::dimer_cls(n, plan.source.upper, plan.source.lower);
        let traj = run_schedule(&schedule, &psi0, opts)?;
        let at = |t: f64| {
            let k = traj.times.iter().position(|&s| (s - t).abs() <= TIME_EPS * t.max(1.0));
            k.map(|k| &traj.states[k]).ok_or_else(|| Error::TimelineConflict(format!("no sample at t = {t}")))
        };
        let mut jump_fidelities = Vec::with_capacity(plan.jumps.len());
        for (j, s) in plan.jumps.iter().zip(&timeline.slots[r]) {
            let d = j.star.dimer_out;
            jump_fidelities.push(fidelity(at(s.end)?, &StateVector::dimer_cls(n, d.upper, d.lower))?);
        }
        let final_state = traj.final_state().clone();
        let target = StateVector::dimer_cls(n, plan.destination.upper, plan.destination.lower);
        Ok(RouteOutcome {
            source: plan.source,
            destination: plan.destination,
            jump_fidelities,
            fidelity: fidelity(&final_state, &target)?,
            norm_drift: traj.norm_drift(),
            final_state,
        })
    });
    let routes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let mut sum = StateVector::zeros(n);
    for o in &routes {
        *sum.amplitudes_mut() += o.final_state.amplitudes();
    }
    let final_state = if routes.is_empty() { sum } else { sum.normalized() };
    Ok(RouteReport { duration: timeline.duration(), routes, final_state })
}
