mod common;

use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use clsnet::error::Error;
use clsnet::evolve::{run_schedule, RunOptions};
use clsnet::lattice::{build_dll, Dimer, Entry, Lattice, SiteGraph, SiteRole, TimedHamiltonian};
use clsnet::par::Execution;
use clsnet::protocols::{build_schedule, Event, FlipChoice, GraphKind, ProtocolParams, ProtocolSchedule, Variant};
use clsnet::routing::*;
use clsnet::state::{fidelity, StateVector};
use common::{overlap, propagate, rk4};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn x_dimer(l: &Lattice, cx: usize, cy: usize) -> Dimer {
    l.graph.dimers()[l.dimer_at(cx, cy, false).unwrap()]
}

fn y_dimer(l: &Lattice, cx: usize, cy: usize) -> Dimer {
    l.graph.dimers()[l.dimer_at(cx, cy, true).unwrap()]
}

fn cls(n: usize, d: Dimer) -> StateVector {
    StateVector::dimer_cls(n, d.upper, d.lower)
}

/// Couplings with exactly one end in `sites`, read straight off the matrix.
fn leaving(h: &DMatrix<f64>, sites: &[usize]) -> BTreeSet<Entry> {
    let n = h.nrows();
    let mut out = BTreeSet::new();
    for &a in sites {
        for b in 0..n {
            if !sites.contains(&b) && h[(a, b)] != 0.0 {
                out.insert((a.min(b), a.max(b)));
            }
        }
    }
    out
}

/// Full-lattice reference for a timeline: the Hamiltonian is rebuilt from
/// the lattice matrix and the slot times, and integrated with RK4 between
/// flips.
fn oracle(lattice: &Lattice, timeline: &Timeline, psi0: &StateVector, dt: f64) -> StateVector {
    let h0 = lattice.hamiltonian.base().clone();
    struct J {
        s: f64,
        ramp: f64,
        t: f64,
        boundary: BTreeSet<Entry>,
        flip_in: usize,
        flip_out: usize,
    }
    let mut jumps = Vec::new();
    for (plan, slots) in timeline.routes.iter().zip(&timeline.slots) {
        for (j, s) in plan.jumps.iter().zip(slots) {
            let sites = j.star.sites();
            jumps.push(J {
                s: s.start,
                ramp: j.ramp,
                t: j.transfer.t,
                boundary: leaving(&h0, &sites),
                flip_in: j.star.dimer_in.lower,
                flip_out: j.star.dimer_out.lower,
            });
        }
    }
    let h_at = |t: f64| {
        let mut h = h0.clone();
        for j in &jumps {
            let (a, b, c, d) = (j.s, j.s + j.ramp, j.s + j.ramp + j.t, j.s + 2.0 * j.ramp + j.t);
            let f = if t <= a || t >= d {
                1.0
            } else if t < b {
                (b - t) / j.ramp
            } else if t <= c {
                0.0
            } else {
                (t - c) / j.ramp
            };
            for &(p, q) in &j.boundary {
                h[(p, q)] *= f;
                h[(q, p)] *= f;
            }
        }
        h
    };
    let mut flips: Vec<(f64, usize)> = jumps
        .iter()
        .flat_map(|j| [(j.s + j.ramp, j.flip_in), (j.s + j.ramp + j.t, j.flip_out)])
        .collect();
    flips.sort_by(|a, b| a.0.total_cmp(&b.0));
    let end = timeline.duration();
    let mut psi = psi0.clone();
    let mut clock = 0.0;
    for (t, site) in flips.into_iter().chain([(end, usize::MAX)]) {
        if t > clock {
            let n = ((t - clock) / dt).ceil() as usize;
            psi = rk4(h_at, &psi, clock, t, n);
            clock = t;
        }
        if site != usize::MAX {
            psi.amplitudes_mut()[site] *= -1.0;
        }
    }
    psi
}

#[test]
fn single_cell_star_matches_native_star() {
    let l = build_dll(1, 1, 0.25, 0.5).unwrap();
    let s = extract_star(&l, 2, x_dimer(&l, 0, 0), y_dimer(&l, 0, 0)).unwrap();
    assert!(s.boundary_entries.is_empty());
    let star = clsnet::lattice::uniform_star(0.25, 0.5);
    assert_eq!(s.restrict(l.hamiltonian.base()), *star.base());
}

#[test]
fn interior_hub_boundary() {
    let l = build_dll(2, 2, 0.25, 0.5).unwrap();
    let hub = l.hub_at(1, 1).unwrap();
    // Both dimers of the jump continue to another hub, as inside a larger lattice.
    let (din, dout) = (x_dimer(&l, 0, 1), y_dimer(&l, 1, 0));
    let s = extract_star(&l, hub, din, dout).unwrap();
    let expect = leaving(l.hamiltonian.base(), &s.sites());
    assert_eq!(s.boundary_entries.iter().copied().collect::<BTreeSet<_>>(), expect);
    assert_eq!(s.boundary_entries.len(), 8);
    // Two couplings to each far hub, four from the hub to its other dimers.
    let far_in = l.hub_at(0, 1).unwrap();
    let far_out = l.hub_at(1, 0).unwrap();
    let count = |site: usize| s.boundary_entries.iter().filter(|e| e.0 == site || e.1 == site).count();
    assert_eq!((count(far_in), count(far_out), count(hub)), (2, 2, 4));
    let restricted = s.restrict(l.hamiltonian.base());
    assert_eq!(restricted, *clsnet::lattice::uniform_star(0.25, 0.5).base());
}

#[test]
fn star_extraction_errors() {
    let l = build_dll(2, 2, 0.25, 0.5).unwrap();
    let (a, b) = (x_dimer(&l, 0, 0), y_dimer(&l, 0, 0));
    assert!(matches!(extract_star(&l, a.upper, a, b), Err(Error::NotAHub(_))));
    // The x dimer of cell (1, 0) does not touch the hub of cell (0, 0).
    assert!(extract_star(&l, l.hub_at(0, 0).unwrap(), a, x_dimer(&l, 1, 0)).is_err());
    // A hub with a single dimer.
    let g = SiteGraph::new(
        3,
        vec![(0, 2), (1, 2)],
        vec![SiteRole::DimerUpper, SiteRole::DimerLower, SiteRole::Hub],
        None,
        vec![Dimer { upper: 0, lower: 1 }],
    )
    .unwrap();
    let mut h = TimedHamiltonian::zeros(3);
    h.set((0, 2), 1.0).unwrap();
    h.set((1, 2), 1.0).unwrap();
    let tiny = Lattice { graph: g, hamiltonian: h, cells: None };
    let d = Dimer { upper: 0, lower: 1 };
    assert!(matches!(extract_star(&tiny, 2, d, d), Err(Error::TooFewDimers { hub: 2, count: 1 })));
}

fn network_star(l: &Lattice) -> StarView {
    extract_star(l, l.hub_at(1, 1).unwrap(), x_dimer(l, 0, 1), y_dimer(l, 1, 0)).unwrap()
}

fn ramp_pairs(h: &TimedHamiltonian, entries: &[Entry]) -> Vec<(Entry, Entry)> {
    // Pair couplings that share their non-dimer end and have equal values.
    let mut pairs = Vec::new();
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            let shared = a.0 == b.0 || a.1 == b.1 || a.0 == b.1 || a.1 == b.0;
            if shared && h.base_value(*a) == h.base_value(*b) {
                pairs.push((*a, *b));
            }
        }
    }
    pairs
}

#[test]
fn ramp_profiles() {
    let l = build_dll(2, 2, 0.25, 0.5).unwrap();
    let s = network_star(&l);
    let pairs = ramp_pairs(&l.hamiltonian, &s.boundary_entries);
    let Event::Segment { hamiltonian: down, end, .. } =
        build_ramp(&l.hamiltonian, &s.boundary_entries, RampDirection::Down, 1.0, &pairs).unwrap()
    else {
        panic!("expected a segment")
    };
    assert_eq!(end, 1.0);
    for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
        for &(a, b) in &pairs {
            assert_eq!(down.entry_at(a, t), down.entry_at(b, t));
        }
        for &e in &s.boundary_entries {
            assert!((down.entry_at(e, t) - 0.25 * (1.0 - t)).abs() < 1e-15);
        }
    }
    for &e in &s.boundary_entries {
        assert_eq!(down.entry_at(e, 1.0), 0.0);
    }
    let Event::Segment { hamiltonian: up, .. } =
        build_ramp(&l.hamiltonian, &s.boundary_entries, RampDirection::Up, 2.5, &pairs).unwrap()
    else {
        panic!("expected a segment")
    };
    assert_eq!(up.evaluate_at(2.5), *l.hamiltonian.base());
    assert_eq!(up.evaluate_at(0.0), {
        let mut m = l.hamiltonian.base().clone();
        for &(a, b) in &s.boundary_entries {
            m[(a, b)] = 0.0;
            m[(b, a)] = 0.0;
        }
        m
    });
    // Pairs must refer to ramped entries.
    let bogus = [((0, 2), (1, 2))];
    assert!(build_ramp(&l.hamiltonian, &s.boundary_entries[..2], RampDirection::Down, 1.0, &bogus).is_err());
    assert!(build_ramp(&l.hamiltonian, &s.boundary_entries, RampDirection::Down, 0.0, &pairs).is_err());
}

fn ramp_schedule(seg: Event, psi: &StateVector) -> ProtocolSchedule {
    ProtocolSchedule { name: "ramp".into(), initial: psi.clone(), target: psi.clone(), target_dimer: None, events: vec![seg] }
}

#[test]
fn symmetric_ramps_keep_stored_cls() {
    // Two cells: the star around the right hub, with the left hub beyond its input dimer.
    let l = build_dll(2, 1, 0.25, 0.5).unwrap();
    let s = extract_star(&l, l.hub_at(1, 0).unwrap(), x_dimer(&l, 0, 0), y_dimer(&l, 1, 0)).unwrap();
    assert_eq!(s.boundary_entries.len(), 4);
    let pairs = ramp_pairs(&l.hamiltonian, &s.boundary_entries);
    let n = l.n_sites();
    // The CLS inside the star and one parked on the hub's other dimer.
    let stored = [s.dimer_in, x_dimer(&l, 1, 0)];
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for k in 0..50 {
        let dt: f64 = rng.random_range(0.01..10.0);
        let dir = if rng.random_bool(0.5) { RampDirection::Down } else { RampDirection::Up };
        let seg = build_ramp(&l.hamiltonian, &s.boundary_entries, dir, dt, &pairs).unwrap();
        let psi = cls(n, stored[k % 2]);
        let opts = RunOptions { sample_interval: dt / 4.0, ..Default::default() };
        let traj = run_schedule(&ramp_schedule(seg, &psi), &psi, &opts).unwrap();
        assert_eq!(traj.states.len(), 5);
        for st in &traj.states {
            assert!(1.0 - overlap(&psi, st) < 1e-10, "dt={dt}");
        }
    }
}

#[test]
fn instantaneous_decoupling_limit() {
    let l = build_dll(2, 2, 0.25, 0.5).unwrap();
    let s = network_star(&l);
    let pairs = ramp_pairs(&l.hamiltonian, &s.boundary_entries);
    let psi = cls(l.n_sites(), s.dimer_in);
    let seg = build_ramp(&l.hamiltonian, &s.boundary_entries, RampDirection::Down, 1e-9, &pairs).unwrap();
    let traj = run_schedule(&ramp_schedule(seg, &psi), &psi, &RunOptions::default()).unwrap();
    assert!(1.0 - fidelity(traj.final_state(), &psi).unwrap() < 1e-14);
}

#[test]
fn asymmetric_ramp_leaks() {
    let l = build_dll(2, 2, 0.25, 0.5).unwrap();
    let s = network_star(&l);
    let far = l.hub_at(0, 1).unwrap();
    let d = s.dimer_in;
    let tol = 1e-10;
    // One coupling of the stored dimer ramps 10% faster than its partner.
    let h = l
        .hamiltonian
        .attach_pulse((d.upper, far), clsnet::lattice::Pulse::ramp(0.25, 0.0, 0.0, 1.0))
        .unwrap()
        .attach_pulse((d.lower, far), clsnet::lattice::Pulse::ramp(0.25, 0.0, 0.0, 0.9))
        .unwrap();
    let psi = cls(l.n_sites(), d);
    let opts = RunOptions { integrator: clsnet::evolve::Integrator::with_tol(tol), ..Default::default() };
    let seg = Event::Segment { start: 0.0, end: 1.0, hamiltonian: h.clone() };
    let out = run_schedule(&ramp_schedule(seg, &psi), &psi, &opts).unwrap();
    let leak = 1.0 - overlap(&psi, out.final_state());
    let reference = rk4(|t| h.evaluate_at(t), &psi, 0.0, 1.0, 4000);
    let leak_ref = 1.0 - overlap(&psi, &reference);
    assert!(leak > 100.0 * tol, "{leak}");
    assert!((leak - leak_ref).abs() < 1e-9 * leak_ref.max(1.0), "{leak} vs {leak_ref}");
}

#[test]
fn isolated_star_evolves_alone() {
    let l = build_dll(2, 2, 0.25, 0.5).unwrap();
    let s = network_star(&l);
    let mut h = l.hamiltonian.base().clone();
    for &(a, b) in &s.boundary_entries {
        h[(a, b)] = 0.0;
        h[(b, a)] = 0.0;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..10 {
        let mut amps = nalgebra::DVector::from_element(l.n_sites(), Complex64::new(0.0, 0.0));
        for &k in &s.sites() {
            amps[k] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        let psi = StateVector::from_amplitudes(amps).normalized();
        let t = rng.random_range(0.1..20.0);
        let full = clsnet::evolve::evolve_static(&h, &psi, t).unwrap();
        let star = propagate(&s.restrict(&h), &s.restrict_state(&psi), t);
        assert!(s.restrict_state(&full).max_abs_diff(&star) < 1e-10);
        assert!((s.restrict_state(&full).norm() - 1.0).abs() < 1e-10);
    }
}

/// All shortest jump chains by exhaustive search, as (hub sequence, dimer sequence).
fn shortest_chains(l: &Lattice, a: usize, b: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let g = &l.graph;
    let h = l.hamiltonian.base();
    let hubs: Vec<usize> = (0..g.n_sites()).filter(|&s| g.role(s) == SiteRole::Hub).collect();
    let touches = |d: usize, hub: usize| {
        let dm = g.dimers()[d];
        h[(dm.upper, hub)] != 0.0 && h[(dm.lower, hub)] != 0.0
    };
    let n = g.dimers().len();
    let mut dist = vec![usize::MAX; n];
    dist[a] = 0;
    let mut q = VecDeque::from([a]);
    while let Some(d) = q.pop_front() {
        for &hub in &hubs {
            if !touches(d, hub) {
                continue;
            }
            for e in 0..n {
                if e != d && touches(e, hub) && dist[e] == usize::MAX {
                    dist[e] = dist[d] + 1;
                    q.push_back(e);
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut stack = vec![(vec![], vec![a])];
    while let Some((hs, ds)) = stack.pop() {
        let d = *ds.last().unwrap();
        if d == b {
            out.push((hs, ds));
            continue;
        }
        for &hub in &hubs {
            if !touches(d, hub) {
                continue;
            }
            for e in 0..n {
                if e != d && touches(e, hub) && dist[e] == dist[d] + 1 && dist[e] <= dist[b] {
                    let mut hs2: Vec<usize> = hs.clone();
                    hs2.push(hub);
                    let mut ds2 = ds.clone();
                    ds2.push(e);
                    stack.push((hs2, ds2));
                }
            }
        }
    }
    out
}

#[test]
fn route_planning() {
    let l = build_dll(3, 3, 0.25, 0.5).unwrap();
    let t = JumpTiming::default();
    let a = x_dimer(&l, 0, 0);
    assert!(plan_route(&l, a, a, &t).unwrap().jumps.is_empty());
    let one = plan_route(&l, a, y_dimer(&l, 1, 0), &t).unwrap();
    assert_eq!(one.jumps.len(), 1);
    assert_eq!(one.jumps[0].star.center, l.hub_at(1, 0).unwrap());
    let ia = l.graph.dimer_index(a).unwrap();
    for k in 0..l.graph.dimers().len() {
        let plan = plan_route(&l, a, l.graph.dimers()[k], &t).unwrap();
        let chains = shortest_chains(&l, ia, k);
        let best = chains.iter().min().unwrap();
        assert_eq!(plan.jumps.len(), best.0.len());
        let hubs: Vec<usize> = plan.jumps.iter().map(|j| j.star.center).collect();
        assert_eq!(hubs, best.0, "to dimer {k}");
        let dimers: Vec<usize> = std::iter::once(ia)
            .chain(plan.jumps.iter().map(|j| l.graph.dimer_index(j.star.dimer_out).unwrap()))
            .collect();
        assert_eq!(dimers, best.1);
        for j in &plan.jumps {
            assert_eq!(j.transfer.t, 2.0 * std::f64::consts::PI);
        }
    }
}

#[test]
fn disconnected_lattice_has_no_route() {
    let mut edges = Vec::new();
    let mut roles = Vec::new();
    let mut dimers = Vec::new();
    for b in [0, 5] {
        roles.extend([SiteRole::DimerUpper, SiteRole::DimerLower, SiteRole::Hub, SiteRole::DimerUpper, SiteRole::DimerLower]);
        for s in [0, 1, 3, 4] {
            edges.push((b + s, b + 2));
        }
        dimers.push(Dimer { upper: b, lower: b + 1 });
        dimers.push(Dimer { upper: b + 3, lower: b + 4 });
    }
    let g = SiteGraph::new(10, edges.clone(), roles, None, dimers.clone()).unwrap();
    let mut h = TimedHamiltonian::zeros(10);
    for e in edges {
        h.set(e, 0.25).unwrap();
    }
    for s in 0..10 {
        h.set((s, s), 0.5).unwrap();
    }
    let l = Lattice { graph: g, hamiltonian: h, cells: None };
    assert!(plan_route(&l, dimers[0], dimers[1], &JumpTiming::default()).is_ok());
    assert!(matches!(plan_route(&l, dimers[0], dimers[3], &JumpTiming::default()), Err(Error::NoPath { from: 0, to: 3 })));
}

#[test]
fn lattice_without_flip_transfer_is_rejected() {
    let l = build_dll(2, 1, 0.25, 0.35).unwrap();
    let err = plan_route(&l, x_dimer(&l, 0, 0), y_dimer(&l, 0, 0), &JumpTiming::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidParameters(_)));
}

#[test]
fn single_jump_matches_star_protocol() {
    let l = build_dll(1, 1, 0.25, 0.5).unwrap();
    let plan = plan_route(&l, x_dimer(&l, 0, 0), y_dimer(&l, 0, 0), &JumpTiming::default()).unwrap();
    let tl = schedule_multi(&[plan]).unwrap();
    let report = simulate_route(&l, &tl, &RunOptions::default(), Execution::Sequential).unwrap();
    let f = report.routes[0].fidelity;
    assert!(1.0 - f < 1e-10, "{f}");
    let p = clsnet::protocols::fastest_transfer(0.25).unwrap();
    let star = build_schedule(GraphKind::Star, Variant::PhaseFlipTransfer, &ProtocolParams::Transfer(p), FlipChoice::default())
        .unwrap();
    let direct = run_schedule(&star, &star.initial, &RunOptions::default()).unwrap();
    let fd = fidelity(direct.final_state(), &star.target).unwrap();
    assert!((f - fd).abs() < 1e-13, "{f} vs {fd}");
}

#[test]
fn three_jump_route_against_full_lattice_reference() {
    let start = Instant::now();
    let l = build_dll(3, 3, 0.25, 0.5).unwrap();
    let src = x_dimer(&l, 0, 0);
    let dst = y_dimer(&l, 2, 1);
    let plan = plan_route(&l, src, dst, &JumpTiming::default()).unwrap();
    assert_eq!(plan.jumps.len(), 3);
    let tl = schedule_multi(&[plan]).unwrap();
    let report = simulate_route(&l, &tl, &RunOptions::default(), Execution::Parallel).unwrap();
    let out = &report.routes[0];
    assert!(1.0 - out.fidelity < 1e-8, "{}", out.fidelity);
    for f in &out.jump_fidelities {
        assert!(1.0 - f < 1e-8, "{f}");
    }
    assert!(out.norm_drift < 1e-9);
    let reference = oracle(&l, &tl, &cls(l.n_sites(), src), 2e-3);
    assert!(1.0 - overlap(&cls(l.n_sites(), dst), &reference) < 1e-8);
    assert!(out.final_state.max_abs_diff(&reference) < 1e-7, "{}", out.final_state.max_abs_diff(&reference));
    assert!(start.elapsed().as_secs() < 120);
}

/// Two routes crossing at the central hub of a 3×3 lattice.
fn crossing(l: &Lattice, timing: &JumpTiming) -> Vec<RoutePlan> {
    vec![
        plan_route(l, x_dimer(l, 0, 1), x_dimer(l, 2, 1), timing).unwrap(),
        plan_route(l, y_dimer(l, 1, 0), y_dimer(l, 1, 2), timing).unwrap(),
    ]
}

#[test]
fn crossing_routes_share_the_network() {
    let l = build_dll(3, 3, 0.25, 0.5).unwrap();
    let routes = crossing(&l, &JumpTiming::default());
    let tl = schedule_multi(&routes).unwrap();
    let d = routes[0].jumps[0].duration();
    assert_eq!(tl.waits[0], 0.0);
    assert!((tl.waits[1] - d).abs() < 1e-12, "second route waits for the shared hub");
    // While the second route uses the central hub, the first is already one star further.
    assert!(tl.slots[1][0].start >= tl.slots[0][0].end);
    assert_eq!(tl.slots[1][0].start, tl.slots[0][1].start);
    tl.verify().unwrap();
    let report = simulate_route(&l, &tl, &RunOptions::default(), Execution::Parallel).unwrap();
    for r in &report.routes {
        assert!(1.0 - r.fidelity < 1e-8, "{}", r.fidelity);
    }
    let n = l.n_sites();
    let both = StateVector::from_amplitudes(
        (cls(n, routes[0].destination).into_amplitudes() + cls(n, routes[1].destination).into_amplitudes())
            / Complex64::new(2f64.sqrt(), 0.0),
    );
    assert!(1.0 - overlap(&both, &report.final_state) < 1e-8);
    for (r, plan) in routes.iter().enumerate() {
        let reference = oracle(&l, &tl, &cls(n, plan.source), 2e-3);
        assert!(report.routes[r].final_state.max_abs_diff(&reference) < 1e-7);
    }
}

#[test]
fn disjoint_routes_do_not_wait() {
    let l = build_dll(3, 3, 0.25, 0.5).unwrap();
    let t = JumpTiming::default();
    let routes = [
        plan_route(&l, x_dimer(&l, 0, 0), y_dimer(&l, 1, 0), &t).unwrap(),
        plan_route(&l, x_dimer(&l, 1, 2), y_dimer(&l, 2, 2), &t).unwrap(),
    ];
    let tl = schedule_multi(&routes).unwrap();
    assert_eq!(tl.waits, vec![0.0, 0.0]);
    assert_eq!(tl.slots[0][0].start, tl.slots[1][0].start);
}

#[test]
fn one_route_may_reuse_a_star() {
    let l = build_dll(1, 1, 0.25, 0.5).unwrap();
    let (x, y) = (x_dimer(&l, 0, 0), y_dimer(&l, 0, 0));
    let there = plan_route(&l, x, y, &JumpTiming::default()).unwrap();
    let back = plan_route(&l, y, x, &JumpTiming::default()).unwrap();
    let round = RoutePlan { source: x, destination: x, jumps: [there.jumps, back.jumps].concat() };
    let tl = schedule_multi(&[round]).unwrap();
    assert_eq!(tl.waits, vec![0.0]);
    assert_eq!(tl.slots[0][1].start, tl.slots[0][0].end);
    let report = simulate_route(&l, &tl, &RunOptions::default(), Execution::Sequential).unwrap();
    assert!(1.0 - report.routes[0].fidelity < 1e-10);
}

#[test]
fn crossing_a_parked_cls_is_rejected() {
    let l = build_dll(3, 1, 0.25, 0.5).unwrap();
    let t = JumpTiming::default();
    let routes = [
        plan_route(&l, x_dimer(&l, 0, 0), x_dimer(&l, 2, 0), &t).unwrap(),
        plan_route(&l, x_dimer(&l, 1, 0), y_dimer(&l, 1, 0), &t).unwrap(),
    ];
    assert!(matches!(schedule_multi(&routes), Err(Error::TimelineConflict(_))));
}

#[test]
fn tampered_timeline_fails_verification() {
    let l = build_dll(3, 3, 0.25, 0.5).unwrap();
    let mut tl = schedule_multi(&crossing(&l, &JumpTiming::default())).unwrap();
    let shift = tl.slots[1][0].start;
    for s in &mut tl.slots[1] {
        s.start -= shift;
        s.end -= shift;
    }
    assert!(matches!(tl.verify(), Err(Error::TimelineConflict(_))));
    assert!(simulate_route(&l, &tl, &RunOptions::default(), Execution::Sequential).is_err());
}

#[test]
fn hopping_and_staggered_jumps() {
    let l = build_dll(2, 2, 0.25, 0.5).unwrap();
    for timing in [
        JumpTiming { variant: JumpVariant::HoppingFlip, ..Default::default() },
        JumpTiming { stagger: true, ramp: 0.5, ..Default::default() },
    ] {
        let plan = plan_route(&l, x_dimer(&l, 0, 1), y_dimer(&l, 1, 0), &timing).unwrap();
        let tl = schedule_multi(&[plan]).unwrap();
        let r = simulate_route(&l, &tl, &RunOptions::default(), Execution::Sequential).unwrap();
        assert!(1.0 - r.routes[0].fidelity < 1e-8, "{timing:?}: {}", r.routes[0].fidelity);
    }
}

#[test]
fn execution_modes_agree_and_timelines_serialize() {
    let l = build_dll(2, 2, 0.25, 0.5).unwrap();
    let t = JumpTiming::default();
    let routes = [
        plan_route(&l, x_dimer(&l, 0, 0), y_dimer(&l, 1, 0), &t).unwrap(),
        plan_route(&l, y_dimer(&l, 0, 0), x_dimer(&l, 0, 1), &t).unwrap(),
    ];
    let tl = schedule_multi(&routes).unwrap();
    assert_eq!(tl.waits, vec![0.0, 0.0]);
    let json = serde_json::to_string(&tl).unwrap();
    let back: Timeline = serde_json::from_str(&json).unwrap();
    assert_eq!(back, tl);
    let a = simulate_route(&l, &tl, &RunOptions::default(), Execution::Parallel).unwrap();
    let b = simulate_route(&l, &tl, &RunOptions::default(), Execution::Sequential).unwrap();
    assert_eq!(a, b);
    for r in &a.routes {
        assert!(1.0 - r.fidelity < 1e-8);
    }
}
