//! Site graphs, pulses and time-dependent Hamiltonians.
//!
//! All matrices are real symmetric (real hoppings, real potentials, ħ = 1).
//! The five-site star uses the site order `(1, 2, c, 3, 4)`, so the central
//! node sits at index 2. The seven-site unit uses the order `1..7` with the
//! hubs at indices 2 and 4 and the connector at index 3.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matrix entry, always stored with `row <= col`.
pub type Entry = (usize, usize);

pub fn normalize_entry((i, j): Entry) -> Entry {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Index of the central node of the five-site star.
pub const STAR_CENTER: usize = 2;

/// Star coupling entries `J_1..J_4` in site-index form.
pub const STAR_COUPLINGS: [Entry; 4] = [(0, 2), (1, 2), (2, 3), (2, 4)];

/// Seven-site coupling entries `J_1..J_6`.
pub const SEVEN_COUPLINGS: [Entry; 6] = [(0, 2), (1, 2), (2, 3), (3, 4), (4, 5), (4, 6)];

/// Index of the connector site (site 4) in the seven-site unit.
pub const SEVEN_CONNECTOR: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteRole {
    DimerUpper,
    DimerLower,
    Hub,
    Connector,
}

/// A pair of sites hosting one compact localized state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dimer {
    pub upper: usize,
    pub lower: usize,
}

impl Dimer {
    pub fn sites(&self) -> [usize; 2] {
        [self.upper, self.lower]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteGraph {
    n_sites: usize,
    edges: Vec<Entry>,
    roles: Vec<SiteRole>,
    geometry: Option<Vec<[f64; 2]>>,
    dimers: Vec<Dimer>,
}

impl SiteGraph {
    pub fn new(
        n_sites: usize,
        edges: Vec<Entry>,
        roles: Vec<SiteRole>,
        geometry: Option<Vec<[f64; 2]>>,
        dimers: Vec<Dimer>,
    ) -> Result<Self> {
        let mut normalized: Vec<Entry> = Vec::with_capacity(edges.len());
        for &e in &edges {
            let (i, j) = normalize_entry(e);
            if j >= n_sites {
                return Err(Error::EntryOutOfBounds { row: i, col: j, dim: n_sites });
            }
            if i == j {
                return Err(Error::InvalidParameters(format!("self-edge on site {i}")));
            }
            if normalized.contains(&(i, j)) {
                return Err(Error::InvalidParameters(format!("duplicate edge ({i}, {j})")));
            }
            normalized.push((i, j));
        }
        if roles.len() != n_sites {
            return Err(Error::DimensionMismatch { expected: n_sites, got: roles.len() });
        }
        if let Some(g) = &geometry {
            if g.len() != n_sites {
                return Err(Error::DimensionMismatch { expected: n_sites, got: g.len() });
            }
        }
        for d in &dimers {
            if d.upper >= n_sites || d.lower >= n_sites || d.upper == d.lower {
                return Err(Error::InvalidParameters(format!("bad dimer {d:?}")));
            }
        }
        Ok(SiteGraph { n_sites, edges: normalized, roles, geometry, dimers })
    }

    pub fn star() -> Self {
        use SiteRole::*;
        SiteGraph::new(
            5,
            STAR_COUPLINGS.to_vec(),
            vec![DimerUpper, DimerLower, Hub, DimerUpper, DimerLower],
            None,
            vec![Dimer { upper: 0, lower: 1 }, Dimer { upper: 3, lower: 4 }],
        )
        .expect("star graph is well formed")
    }

    pub fn seven() -> Self {
        use SiteRole::*;
        SiteGraph::new(
            7,
            SEVEN_COUPLINGS.to_vec(),
            vec![DimerUpper, DimerLower, Hub, Connector, Hub, DimerUpper, DimerLower],
            None,
            vec![Dimer { upper: 0, lower: 1 }, Dimer { upper: 5, lower: 6 }],
        )
        .expect("seven-site graph is well formed")
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn edges(&self) -> &[Entry] {
        &self.edges
    }

    pub fn roles(&self) -> &[SiteRole] {
        &self.roles
    }

    pub fn role(&self, site: usize) -> SiteRole {
        self.roles[site]
    }

    pub fn geometry(&self) -> Option<&[[f64; 2]]> {
        self.geometry.as_deref()
    }

    pub fn dimers(&self) -> &[Dimer] {
        &self.dimers
    }

    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(i, j)| {
                if i == site {
                    Some(j)
                } else if j == site {
                    Some(i)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&normalize_entry((a, b)))
    }

    pub fn hubs(&self) -> Vec<usize> {
        (0..self.n_sites).filter(|&s| self.roles[s] == SiteRole::Hub).collect()
    }

    /// Dimers with at least one site coupled to `hub`, in dimer-index order.
    pub fn dimers_at(&self, hub: usize) -> Vec<usize> {
        self.dimers
            .iter()
            .enumerate()
            .filter(|(_, d)| self.has_edge(d.upper, hub) || self.has_edge(d.lower, hub))
            .map(|(k, _)| k)
            .collect()
    }

    /// Hubs coupled to a dimer, ascending.
    pub fn hubs_of(&self, dimer: usize) -> Vec<usize> {
        let d = self.dimers[dimer];
        let mut hubs: Vec<usize> = self
            .neighbors(d.upper)
            .into_iter()
            .chain(self.neighbors(d.lower))
            .filter(|&s| self.roles[s] == SiteRole::Hub)
            .collect();
        hubs.sort_unstable();
        hubs.dedup();
        hubs
    }

    pub fn dimer_index(&self, d: Dimer) -> Option<usize> {
        self.dimers.iter().position(|&x| x == d || (x.upper == d.lower && x.lower == d.upper))
    }
}

/// Scalar function of time driving one matrix entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Pulse {
    Constant {
        value: f64,
    },
    /// Holds `from` before `start`, moves linearly, holds `to` from `end` on.
    LinearRamp {
        from: f64,
        to: f64,
        start: f64,
        end: f64,
    },
    /// `floor·{1 + sin(t/2)[x sin(ωt) + x′ cos(ωt)]²}`.
    CrabStar {
        floor: f64,
        x: f64,
        xp: f64,
        omega: f64,
    },
    /// `floor·{1 + sin(t/4)[x sin(ωt) + x′ cos(ωt)]²}`.
    CrabSeven {
        floor: f64,
        x: f64,
        xp: f64,
        omega: f64,
    },
    /// `{1 + x sin(ωt) + x′ sin(ω′t)}·scale·(1 − t/horizon)`.
    CreationStar {
        scale: f64,
        x: f64,
        xp: f64,
        omega: f64,
        omega_p: f64,
        horizon: f64,
    },
    /// `floor·{1 + sin(t/2)[x sin(ωt) + x′ cos(ωt)]}`.
    CreationSeven {
        floor: f64,
        x: f64,
        xp: f64,
        omega: f64,
    },
    /// Piecewise-linear interpolation, clamped outside the table.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    /// `inner(horizon − t)`.
    TimeReversed {
        horizon: f64,
        inner: Box<Pulse>,
    },
    /// `factor·inner(t)`.
    Scaled {
        factor: f64,
        inner: Box<Pulse>,
    },
    /// Product of several pulses.
    Product {
        factors: Vec<Pulse>,
    },
}

impl Pulse {
    pub fn constant(value: f64) -> Self {
        Pulse::Constant { value }
    }

    pub fn ramp(from: f64, to: f64, start: f64, end: f64) -> Self {
        Pulse::LinearRamp { from, to, start, end }
    }

    pub fn reversed(self, horizon: f64) -> Self {
        Pulse::TimeReversed { horizon, inner: Box::new(self) }
    }

    pub fn scaled(self, factor: f64) -> Self {
        match self {
            Pulse::Scaled { factor: f0, inner } => Pulse::Scaled { factor: f0 * factor, inner },
            p => Pulse::Scaled { factor, inner: Box::new(p) },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameters(msg.to_string()));
        match self {
            Pulse::LinearRamp { from, to, start, end } => {
                if !(from.is_finite() && to.is_finite() && start.is_finite() && end.is_finite()) {
                    return bad("ramp parameters must be finite");
                }
                if end < start {
                    return bad("ramp end precedes its start");
                }
            }
            Pulse::CreationStar { horizon, .. } if *horizon <= 0.0 => {
                return bad("creation horizon must be positive");
            }
            Pulse::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return bad("pulse table needs matching, non-empty times and values");
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("pulse table times must be strictly increasing");
                }
            }
            Pulse::TimeReversed { inner, .. } | Pulse::Scaled { inner, .. } => inner.validate()?,
            Pulse::Product { factors } => {
                for f in factors {
                    f.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Pulse::Constant { value } => *value,
            Pulse::LinearRamp { from, to, start, end } => {
                if t >= *end {
                    *to
                } else if t <= *start {
                    *from
                } else {
                    from + (to - from) * (t - start) / (end - start)
                }
            }
            Pulse::CrabStar { floor, x, xp, omega } => {
                let b = x * (omega * t).sin() + xp * (omega * t).cos();
                floor * (1.0 + (0.5 * t).sin() * b * b)
            }
            Pulse::CrabSeven { floor, x, xp, omega } => {
                let b = x * (omega * t).sin() + xp * (omega * t).cos();
                floor * (1.0 + (0.25 * t).sin() * b * b)
            }
            Pulse::CreationStar { scale, x, xp, omega, omega_p, horizon } => {
                (1.0 + x * (omega * t).sin() + xp * (omega_p * t).sin()) * scale * (1.0 - t / horizon)
            }
            Pulse::CreationSeven { floor, x, xp, omega } => {
                let b = x * (omega * t).sin() + xp * (omega * t).cos();
                floor * (1.0 + (0.5 * t).sin() * b)
            }
            Pulse::Table { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let (t0, t1) = (times[k - 1], times[k]);
                    values[k - 1] + (values[k] - values[k - 1]) * (t - t0) / (t1 - t0)
                }
            }
            Pulse::TimeReversed { horizon, inner } => inner.eval(horizon - t),
            Pulse::Scaled { factor, inner } => factor * inner.eval(t),
            Pulse::Product { factors } => factors.iter().map(|f| f.eval(t)).product(),
        }
    }
}

/// Real symmetric Hamiltonian with optional time-dependent entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "HamiltonianRepr", try_from = "HamiltonianRepr")]
pub struct TimedHamiltonian {
    base: DMatrix<f64>,
    overrides: BTreeMap<Entry, Pulse>,
}

impl TimedHamiltonian {
    pub fn from_static(base: DMatrix<f64>) -> Result<Self> {
        if !base.is_square() {
            return Err(Error::DimensionMismatch { expected: base.nrows(), got: base.ncols() });
        }
        let asym = max_asymmetry(&base);
        if !asym.is_finite() || asym > 0.0 {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        Ok(TimedHamiltonian { base, overrides: BTreeMap::new() })
    }

    pub fn zeros(n: usize) -> Self {
        TimedHamiltonian { base: DMatrix::zeros(n, n), overrides: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn base(&self) -> &DMatrix<f64> {
        &self.base
    }

    pub fn overrides(&self) -> &BTreeMap<Entry, Pulse> {
        &self.overrides
    }

    pub fn is_static(&self) -> bool {
        self.overrides.is_empty()
    }

    fn check_entry(&self, (i, j): Entry) -> Result<Entry> {
        let n = self.dim();
        if i >= n || j >= n {
            return Err(Error::EntryOutOfBounds { row: i, col: j, dim: n });
        }
        Ok(normalize_entry((i, j)))
    }

    /// Sets a static entry (and its mirror), dropping any pulse on it.
    pub fn set(&mut self, entry: Entry, value: f64) -> Result<()> {
        let (i, j) = self.check_entry(entry)?;
        self.base[(i, j)] = value;
        self.base[(j, i)] = value;
        self.overrides.remove(&(i, j));
        Ok(())
    }

    pub fn with_entry(mut self, entry: Entry, value: f64) -> Result<Self> {
        self.set(entry, value)?;
        Ok(self)
    }

    /// Static value of an entry, ignoring pulses.
    pub fn base_value(&self, entry: Entry) -> f64 {
        self.base[entry]
    }

    pub fn pulse(&self, entry: Entry) -> Option<&Pulse> {
        self.overrides.get(&normalize_entry(entry))
    }

    /// Returns a copy whose `entry` (and its mirror) follows `pulse`.
    pub fn attach_pulse(&self, entry: Entry, pulse: Pulse) -> Result<Self> {
        let key = self.check_entry(entry)?;
        pulse.validate()?;
        let mut out = self.clone();
        out.overrides.insert(key, pulse);
        Ok(out)
    }

    /// Value of one entry at time `t`.
    pub fn entry_at(&self, entry: Entry, t: f64) -> f64 {
        match self.overrides.get(&normalize_entry(entry)) {
            Some(p) => p.eval(t),
            None => self.base[entry],
        }
    }

    /// Dense snapshot `H(t)`.
    pub fn evaluate_at(&self, t: f64) -> DMatrix<f64> {
        let mut m = self.base.clone();
        self.write_overrides(&mut m, t);
        m
    }

    /// Writes `H(t)` into an existing buffer of the right shape.
    pub fn evaluate_into(&self, out: &mut DMatrix<f64>, t: f64) {
        out.copy_from(&self.base);
        self.write_overrides(out, t);
    }

    fn write_overrides(&self, m: &mut DMatrix<f64>, t: f64) {
        for (&(i, j), p) in &self.overrides {
            let v = p.eval(t);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }

    /// Negates an entry, static or pulsed.
    pub fn negate_entry(&self, entry: Entry) -> Result<Self> {
        let key = self.check_entry(entry)?;
        let mut out = self.clone();
        let (i, j) = key;
        out.base[(i, j)] = -out.base[(i, j)];
        if i != j {
            out.base[(j, i)] = -out.base[(j, i)];
        }
        if let Some(p) = out.overrides.remove(&key) {
            let flipped = match p {
                Pulse::Scaled { factor: -1.0, inner } => *inner,
                p => p.scaled(-1.0),
            };
            out.overrides.insert(key, flipped);
        }
        Ok(out)
    }

    /// Replaces every pulse `p(t)` by `p(horizon − t)`.
    pub fn time_reversed(&self, horizon: f64) -> Self {
        let mut out = self.clone();
        for p in out.overrides.values_mut() {
            *p = std::mem::replace(p, Pulse::constant(0.0)).reversed(horizon);
        }
        out
    }

    /// Returns a copy with all sites relabelled: new index `perm[i]` for old `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.dim();
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: perm.len() });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidPermutation(n));
            }
            seen[p] = true;
        }
        let mut base = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                base[(perm[i], perm[j])] = self.base[(i, j)];
            }
        }
        let overrides = self
            .overrides
            .iter()
            .map(|(&(i, j), p)| (normalize_entry((perm[i], perm[j])), p.clone()))
            .collect();
        Ok(TimedHamiltonian { base, overrides })
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if !d.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(d);
        }
        if !m[(i, i)].is_finite() {
            return f64::INFINITY;
        }
    }
    worst
}

#[derive(Serialize, Deserialize)]
struct HamiltonianRepr {
    sites: usize,
    /// Upper-triangle nonzero entries `[row, col, value]`.
    entries: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pulses: Vec<PulseBinding>,
}

#[derive(Serialize, Deserialize)]
struct PulseBinding {
    row: usize,
    col: usize,
    pulse: Pulse,
}

impl From<TimedHamiltonian> for HamiltonianRepr {
    fn from(h: TimedHamiltonian) -> Self {
        let n = h.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = h.base[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        let pulses = h
            .overrides
            .into_iter()
            .map(|((row, col), pulse)| PulseBinding { row, col, pulse })
            .collect();
        HamiltonianRepr { sites: n, entries, pulses }
    }
}

impl TryFrom<HamiltonianRepr> for TimedHamiltonian {
    type Error = Error;
    fn try_from(r: HamiltonianRepr) -> Result<Self> {
        let mut h = TimedHamiltonian::zeros(r.sites);
        for (i, j, v) in r.entries {
            if !v.is_finite() {
                return Err(Error::InvalidParameters(format!("entry ({i}, {j}) is not finite")));
            }
            h.set((i, j), v)?;
        }
        for b in r.pulses {
            h = h.attach_pulse((b.row, b.col), b.pulse)?;
        }
        Ok(h)
    }
}

/// Five-site star: outer nodes coupled only to the central node.
pub fn build_star(couplings: [f64; 4], potentials: [f64; 5]) -> TimedHamiltonian {
    let mut h = TimedHamiltonian::zeros(5);
    for (k, v) in potentials.iter().enumerate() {
        h.base[(k, k)] = *v;
    }
    for (&(i, j), &c) in STAR_COUPLINGS.iter().zip(couplings.iter()) {
        h.base[(i, j)] = c;
        h.base[(j, i)] = c;
    }
    h
}

/// Star with all couplings `j` and all potentials `v`.
pub fn uniform_star(j: f64, v: f64) -> TimedHamiltonian {
    build_star([j; 4], [v; 5])
}

/// Seven-site unit: two dimers attached to hubs 3 and 5, joined through site 4.
pub fn build_seven(couplings: [f64; 6], potentials: [f64; 7]) -> TimedHamiltonian {
    let mut h = TimedHamiltonian::zeros(7);
    for (k, v) in potentials.iter().enumerate() {
        h.base[(k, k)] = *v;
    }
    for (&(i, j), &c) in SEVEN_COUPLINGS.iter().zip(couplings.iter()) {
        h.base[(i, j)] = c;
        h.base[(j, i)] = c;
    }
    h
}

/// A site graph together with its Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub graph: SiteGraph,
    pub hamiltonian: TimedHamiltonian,
    /// Unit cells along x and y, when built as a decorated Lieb lattice.
    pub cells: Option<(usize, usize)>,
}

impl Lattice {
    pub fn star(couplings: [f64; 4], potentials: [f64; 5]) -> Self {
        Lattice { graph: SiteGraph::star(), hamiltonian: build_star(couplings, potentials), cells: None }
    }

    pub fn n_sites(&self) -> usize {
        self.graph.n_sites()
    }

    /// Hub site of cell `(cx, cy)` in a decorated Lieb lattice.
    pub fn hub_at(&self, cx: usize, cy: usize) -> Option<usize> {
        let (nx, ny) = self.cells?;
        (cx < nx && cy < ny).then(|| 5 * (cy * nx + cx) + 2)
    }

    /// Dimer to the right (`x`) or above (`y`) of cell `(cx, cy)`.
    pub fn dimer_at(&self, cx: usize, cy: usize, along_y: bool) -> Option<usize> {
        let (nx, ny) = self.cells?;
        (cx < nx && cy < ny).then(|| 2 * (cy * nx + cx) + usize::from(along_y))
    }
}

/// Decorated Lieb lattice with open boundaries.
///
/// Each cell holds one hub and two dimers: one to its right (`x`) and one
/// above it (`y`). A dimer couples to the hub of its own cell and, when it
/// exists, to the next hub along its direction. Dimer sites never couple to
/// each other. Cell `(cx, cy)` occupies sites `5·(cy·nx + cx) + [0..5]` in
/// the order `(x upper, x lower, hub, y upper, y lower)`, so a single cell
/// is exactly the star in its native ordering.
pub fn build_dll(cells_x: usize, cells_y: usize, j: f64, v: f64) -> Result<Lattice> {
    if cells_x == 0 || cells_y == 0 {
        return Err(Error::InvalidParameters("lattice needs at least one cell per direction".into()));
    }
    let n = 5 * cells_x * cells_y;
    let cell = |cx: usize, cy: usize| 5 * (cy * cells_x + cx);
    let mut edges = Vec::new();
    let mut roles = Vec::with_capacity(n);
    let mut geometry = Vec::with_capacity(n);
    let mut dimers = Vec::new();
    for cy in 0..cells_y {
        for cx in 0..cells_x {
            let b = cell(cx, cy);
            let hub = b + 2;
            let (x, y) = (cx as f64, cy as f64);
            roles.extend([
                SiteRole::DimerUpper,
                SiteRole::DimerLower,
                SiteRole::Hub,
                SiteRole::DimerUpper,
                SiteRole::DimerLower,
            ]);
            geometry.extend([[x + 0.5, y + 0.15], [x + 0.5, y - 0.15], [x, y], [x - 0.15, y + 0.5], [x + 0.15, y + 0.5]]);
            dimers.push(Dimer { upper: b, lower: b + 1 });
            dimers.push(Dimer { upper: b + 3, lower: b + 4 });
            for s in [b, b + 1, b + 3, b + 4] {
                edges.push((s.min(hub), s.max(hub)));
            }
            if cx + 1 < cells_x {
                let next = cell(cx + 1, cy) + 2;
                edges.push((b, next));
                edges.push((b + 1, next));
            }
            if cy + 1 < cells_y {
                let next = cell(cx, cy + 1) + 2;
                edges.push((b + 3, next));
                edges.push((b + 4, next));
            }
        }
    }
    let graph = SiteGraph::new(n, edges, roles, Some(geometry), dimers)?;
    let mut h = TimedHamiltonian::zeros(n);
    for s in 0..n {
        h.base[(s, s)] = v;
    }
    for &(a, b) in graph.edges() {
        h.base[(a, b)] = j;
        h.base[(b, a)] = j;
    }
    Ok(Lattice { graph, hamiltonian: h, cells: Some((cells_x, cells_y)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn star_layout() {
        let h = build_star([1.0, 2.0, 3.0, 4.0], [0.0; 5]);
        let m = h.evaluate_at(0.0);
        assert_eq!(m[(0, 2)], 1.0);
        assert_eq!(m[(1, 2)], 2.0);
        assert_eq!(m[(3, 2)], 3.0);
        assert_eq!(m[(4, 2)], 4.0);
        let off: f64 = (0..5)
            .flat_map(|i| (0..5).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && i != 2 && j != 2)
            .map(|e| m[e].abs())
            .sum();
        assert_eq!(off, 0.0);
        assert_eq!(build_star([0.0; 4], [0.0; 5]).evaluate_at(1.0), DMatrix::zeros(5, 5));
    }

    #[test]
    fn published_star_values() {
        let m = uniform_star(0.25, 0.5).evaluate_at(0.0);
        for k in 0..5 {
            assert_eq!(m[(k, k)], 0.5);
        }
        for &(i, j) in &STAR_COUPLINGS {
            assert_eq!(m[(i, j)], 0.25);
            assert_eq!(m[(j, i)], 0.25);
        }
    }

    #[test]
    fn seven_layout() {
        let s3 = 3f64.sqrt();
        let m = build_seven([1.0, 1.0, s3, s3, 1.0, 1.0], [0.0; 7]).evaluate_at(0.0);
        assert_eq!(m[(2, 3)], s3);
        assert_eq!(m[(3, 4)], s3);
        assert_eq!(m[(4, 6)], 1.0);
        assert_eq!(m[(0, 1)], 0.0);
        let d = build_seven([0.0; 6], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).evaluate_at(0.0);
        assert_eq!(d, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])));
    }

    #[test]
    fn seven_with_ramp() {
        let h = build_seven([1.0; 6], [0.0; 7])
            .attach_pulse((2, 3), Pulse::ramp(0.0, 1.0, 0.0, 2.0 * PI))
            .unwrap();
        assert_eq!(h.evaluate_at(0.0)[(2, 3)], 0.0);
        assert!((h.evaluate_at(PI)[(3, 2)] - 0.5).abs() < 1e-15);
        assert_eq!(h.evaluate_at(2.0 * PI)[(2, 3)], 1.0);
        assert_eq!(h.evaluate_at(1.3)[(3, 4)], 1.0);
    }

    #[test]
    fn dll_counts() {
        let l = build_dll(2, 2, 1.0, 0.0).unwrap();
        assert_eq!(l.n_sites(), 20);
        assert_eq!(l.graph.dimers().len(), 8);
        assert_eq!(l.graph.hubs().len(), 4);
        for d in l.graph.dimers() {
            assert!(!l.graph.has_edge(d.upper, d.lower));
        }
        assert!(build_dll(0, 3, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_cell_is_the_star() {
        let l = build_dll(1, 1, 0.25, 0.5).unwrap();
        assert_eq!(l.hamiltonian, uniform_star(0.25, 0.5));
        // relabelled copy compares equal after undoing the relabelling
        let perm = [3, 0, 4, 1, 2];
        let shuffled = l.hamiltonian.permuted(&perm).unwrap();
        let mut inverse = [0; 5];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        assert_eq!(shuffled.permuted(&inverse).unwrap(), uniform_star(0.25, 0.5));
    }

    #[test]
    fn attach_and_evaluate() {
        let h = uniform_star(0.25, 0.5);
        let c = h.attach_pulse((2, 0), Pulse::constant(0.25)).unwrap();
        assert_eq!(c.evaluate_at(17.0)[(0, 2)], 0.25);
        let r = h.attach_pulse((0, 2), Pulse::ramp(0.25, 0.0, 0.0, 1.5)).unwrap();
        assert_eq!(r.evaluate_at(1.5)[(0, 2)], 0.0);
        assert_eq!(r.evaluate_at(0.75)[(2, 0)], 0.125);
        assert!(h.is_static());
        assert!(matches!(
            h.attach_pulse((0, 5), Pulse::constant(1.0)),
            Err(Error::EntryOutOfBounds { .. })
        ));
        assert_eq!(h.evaluate_at(3.0), h.base().clone());
    }

    #[test]
    fn crab_pulse_endpoints() {
        let p = Pulse::CrabStar { floor: 0.25, x: 0.585, xp: 2.9997, omega: 1.4452 };
        assert_eq!(p.eval(0.0), 0.25);
        assert!((p.eval(2.0 * PI) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn negate_round_trip() {
        let h = uniform_star(0.25, 0.5).attach_pulse((2, 3), Pulse::ramp(0.0, 1.0, 0.0, 1.0)).unwrap();
        let twice = h.negate_entry((0, 2)).unwrap().negate_entry((0, 2)).unwrap();
        assert_eq!(twice, h);
        let p = h.negate_entry((3, 2)).unwrap().negate_entry((3, 2)).unwrap();
        assert_eq!(p, h);
        assert_eq!(h.negate_entry((3, 2)).unwrap().evaluate_at(0.5)[(2, 3)], -0.5);
    }

    #[test]
    fn table_pulse() {
        let p = Pulse::Table { times: vec![0.0, 1.0, 3.0], values: vec![0.0, 2.0, 0.0] };
        assert_eq!(p.eval(-1.0), 0.0);
        assert_eq!(p.eval(0.5), 1.0);
        assert_eq!(p.eval(2.0), 1.0);
        assert_eq!(p.eval(5.0), 0.0);
        assert!(Pulse::Table { times: vec![1.0, 1.0], values: vec![0.0, 0.0] }.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let h = uniform_star(0.25, 0.5).attach_pulse((0, 2), Pulse::ramp(0.25, 0.0, 0.0, 1.0)).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        let back: TimedHamiltonian = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
    }
}
