use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use crate::error::{FrogError, Result};
use crate::laws::InitLaw;
use crate::stream::{tag, RandomStream};
use crate::walk::{direction_at, WalkerScope};

use super::policy::VisitContext;
use super::{SimConfig, StopReason};

pub type Site = Vec<i64>;

/// Occupancy of site `site`, drawn from the site's own stream. Shared by the
/// engine and the construction harness so that both see the same environment.
pub fn site_eta(seed: u64, mu: &InitLaw, site: &[i64]) -> u64 {
    let mut path = Vec::with_capacity(site.len() + 2);
    path.push(tag::ETA);
    path.push(site.len() as i64);
    path.extend_from_slice(site);
    mu.sample_eta(&mut RandomStream::derive(seed, &path))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SiteState {
    pub eta: Option<u64>,
    pub first_visit_time: Option<f64>,
    pub activation_time: Option<f64>,
    /// The policy suppressed activation of this site.
    pub blocked: bool,
}

#[derive(Clone, Debug)]
pub struct Walker {
    pub home: Site,
    /// 1-based index among the walkers of `home`.
    pub index: u64,
    pub position: Site,
    pub activation_time: f64,
    pub next_jump_time: f64,
    pub jump_count: u64,
    wait: RandomStream,
    dir: RandomStream,
}

pub type WalkerId = usize;

#[derive(Clone, Copy, Debug)]
enum Pending {
    Activate { site_slot: usize },
    Jump { walker: WalkerId },
}

#[derive(Clone, Copy, Debug)]
struct QueuedEvent {
    time: f64,
    // activations (0) sort before jumps (1) at equal times
    class: u8,
    id: u64,
    seq: u64,
    what: Pending,
}

impl QueuedEvent {
    fn key(&self) -> (f64, u8, u64, u64) {
        (self.time, self.class, self.id, self.seq)
    }
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueuedEvent {}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueuedEvent {
    // Reversed so that BinaryHeap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, ca, ia, sa) = self.key();
        let (tb, cb, ib, sb) = other.key();
        tb.total_cmp(&ta).then(cb.cmp(&ca)).then(ib.cmp(&ia)).then(sb.cmp(&sa))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    Jump { walker: WalkerId, jump_index: u64, from: Site, to: Site },
    /// A delayed activation coming due.
    Activation { site: Site },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    /// Site whose sleepers woke during this event.
    pub activated_site: Option<Site>,
    pub newly_activated: u64,
    /// Site first visited during this event.
    pub first_visit: Option<Site>,
    /// Set when an activation was refused because it would exceed
    /// `max_active`; holds the active count the activation would have reached.
    pub refused_activation: Option<u64>,
}

/// Full state of one simulation run.
#[derive(Clone, Debug)]
pub struct SimState {
    pub clock: f64,
    pub config: SimConfig,
    sites: HashMap<Site, usize>,
    site_states: Vec<SiteState>,
    site_order: Vec<Site>,
    walkers: Vec<Walker>,
    queue: BinaryHeap<QueuedEvent>,
    frontier_max: Vec<i64>,
    frontier_min: Vec<i64>,
    /// First-visit time of each hyperplane, per axis.
    projections: Vec<BTreeMap<i64, f64>>,
    events: u64,
    activation_seq: u64,
    origin_added: bool,
    halted: Option<u64>,
}

impl SimState {
    /// Creates the initial state: the origin is visited and active at time 0.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let dim = config.dim;
        let mut state = SimState {
            clock: 0.0,
            sites: HashMap::new(),
            site_states: Vec::new(),
            site_order: Vec::new(),
            walkers: Vec::new(),
            queue: BinaryHeap::new(),
            frontier_max: vec![0; dim],
            frontier_min: vec![0; dim],
            projections: vec![BTreeMap::new(); dim],
            events: 0,
            activation_seq: 0,
            origin_added: false,
            halted: None,
            config,
        };
        let origin = vec![0; dim];
        let slot = state.visit(&origin, 0.0);
        let eta = state.site_states[slot].eta.unwrap_or(0);
        state.origin_added = eta == 0;
        let count = eta.max(1);
        if state.config.stop.max_active.is_some_and(|cap| count > cap) {
            state.halted = Some(count);
        } else {
            state.spawn(slot, count, 0.0);
        }
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    pub fn n_visited(&self) -> usize {
        self.site_order.len()
    }

    pub fn active_count(&self) -> u64 {
        self.walkers.len() as u64
    }

    pub fn walkers(&self) -> &[Walker] {
        &self.walkers
    }

    pub fn frontier_max(&self) -> &[i64] {
        &self.frontier_max
    }

    pub fn frontier_min(&self) -> &[i64] {
        &self.frontier_min
    }

    /// Largest sup-norm of a visited site.
    pub fn radius(&self) -> i64 {
        self.frontier_max.iter().chain(self.frontier_min.iter()).map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn site(&self, site: &[i64]) -> Option<&SiteState> {
        self.sites.get(site).map(|&i| &self.site_states[i])
    }

    /// Visited sites with their first-visit times, in visit order.
    pub fn visited(&self) -> impl Iterator<Item = (&Site, f64)> + '_ {
        self.site_order.iter().zip(&self.site_states).map(|(s, st)| (s, st.first_visit_time.unwrap_or(0.0)))
    }

    pub fn is_visited(&self, site: &[i64]) -> bool {
        self.sites.contains_key(site)
    }

    /// Number of walkers a perfectly conserved run must have: the occupancies
    /// of activated sites plus one walker added at an empty origin.
    pub fn expected_active(&self) -> u64 {
        let woken: u64 = self
            .site_states
            .iter()
            .filter(|s| s.activation_time.is_some_and(|t| t <= self.clock))
            .map(|s| s.eta.unwrap_or(0))
            .sum();
        woken + u64::from(self.origin_added)
    }

    /// First-visit time of each coordinate value along `axis` (0-based).
    pub fn projection_times(&self, axis: usize) -> &BTreeMap<i64, f64> {
        &self.projections[axis]
    }

    /// Coordinates along `axis` (1-based) of visited sites.
    pub fn project_visited(&self, axis: usize) -> Result<BTreeSet<i64>> {
        if axis == 0 || axis > self.dim() {
            return Err(FrogError::AxisOutOfRange { axis, dim: self.dim() });
        }
        Ok(self.projections[axis - 1].keys().copied().collect())
    }

    pub fn next_event_time(&self) -> Option<f64> {
        self.queue.peek().map(|e| e.time)
    }

    /// Active count a refused activation would have produced, if the run
    /// hit `max_active`.
    pub fn halted_at(&self) -> Option<u64> {
        self.halted
    }

    fn visit(&mut self, site: &[i64], time: f64) -> usize {
        let slot = self.site_states.len();
        let eta = site_eta(self.config.seed, &self.config.mu, site);
        self.site_states.push(SiteState {
            eta: Some(eta),
            first_visit_time: Some(time),
            activation_time: None,
            blocked: false,
        });
        self.site_order.push(site.to_vec());
        self.sites.insert(site.to_vec(), slot);
        for (axis, &c) in site.iter().enumerate() {
            self.frontier_max[axis] = self.frontier_max[axis].max(c);
            self.frontier_min[axis] = self.frontier_min[axis].min(c);
            self.projections[axis].entry(c).or_insert(time);
        }
        slot
    }

    fn spawn(&mut self, slot: usize, count: u64, time: f64) {
        self.site_states[slot].activation_time = Some(time);
        let home = self.site_order[slot].clone();
        let scope = WalkerScope::lattice(self.config.seed, &home);
        for index in 1..=count {
            let (mut wait, dir) = scope.streams(index);
            let next = time + self.config.pi.sample_wait(&mut wait);
            let id = self.walkers.len();
            self.walkers.push(Walker {
                home: home.clone(),
                index,
                position: home.clone(),
                activation_time: time,
                next_jump_time: next,
                jump_count: 0,
                wait,
                dir,
            });
            self.queue.push(QueuedEvent { time: next, class: 1, id: id as u64, seq: 0, what: Pending::Jump { walker: id } });
        }
    }

    /// Wakes the sleepers of `slot` unless that would exceed `max_active`.
    /// Returns `(woken, refused_total)`.
    fn activate(&mut self, slot: usize, time: f64) -> (u64, Option<u64>) {
        let eta = self.site_states[slot].eta.unwrap_or(0);
        let total = self.active_count() + eta;
        if self.config.stop.max_active.is_some_and(|cap| total > cap) {
            self.halted = Some(total);
            return (0, Some(total));
        }
        self.spawn(slot, eta, time);
        (eta, None)
    }

    /// Processes the earliest pending event.
    pub fn step(&mut self) -> Result<EventRecord> {
        if self.halted.is_some() {
            return Err(FrogError::Precondition("run halted at max_active".into()));
        }
        let ev = self.queue.pop().ok_or(FrogError::Exhausted)?;
        debug_assert!(ev.time >= self.clock);
        self.clock = ev.time;
        self.events += 1;
        match ev.what {
            Pending::Activate { site_slot } => {
                let (woken, refused) = self.activate(site_slot, ev.time);
                let site = self.site_order[site_slot].clone();
                Ok(EventRecord {
                    time: ev.time,
                    kind: EventKind::Activation { site: site.clone() },
                    activated_site: (refused.is_none()).then_some(site),
                    newly_activated: woken,
                    first_visit: None,
                    refused_activation: refused,
                })
            }
            Pending::Jump { walker } => self.jump(walker, ev.time),
        }
    }

    fn jump(&mut self, id: WalkerId, time: f64) -> Result<EventRecord> {
        let dim = self.dim();
        let w = &mut self.walkers[id];
        let jump_index = w.jump_count;
        let (axis, sign) = direction_at(&w.dir, jump_index, dim);
        let from = w.position.clone();
        w.position[axis] += sign;
        w.jump_count += 1;
        w.next_jump_time = time + self.config.pi.sample_wait(&mut w.wait);
        let next = w.next_jump_time;
        let to = w.position.clone();
        self.queue.push(QueuedEvent {
            time: next,
            class: 1,
            id: id as u64,
            seq: jump_index + 1,
            what: Pending::Jump { walker: id },
        });

        let mut record = EventRecord {
            time,
            kind: EventKind::Jump { walker: id, jump_index, from, to: to.clone() },
            activated_site: None,
            newly_activated: 0,
            first_visit: None,
            refused_activation: None,
        };
        if self.sites.contains_key(&to) {
            return Ok(record);
        }
        let seen: Vec<bool> = to.iter().enumerate().map(|(a, c)| self.projections[a].contains_key(c)).collect();
        let slot = self.visit(&to, time);
        record.first_visit = Some(to.clone());
        let ctx = VisitContext { site: &to, time, hyperplane_seen: &seen };
        match self.config.policy.activation_time(&ctx) {
            None => self.site_states[slot].blocked = true,
            Some(t) if t <= time => {
                let (woken, refused) = self.activate(slot, time);
                record.newly_activated = woken;
                record.refused_activation = refused;
                if refused.is_none() {
                    record.activated_site = Some(to);
                }
            }
            Some(t) => {
                self.activation_seq += 1;
                self.queue.push(QueuedEvent {
                    time: t,
                    class: 0,
                    id: self.activation_seq,
                    seq: 0,
                    what: Pending::Activate { site_slot: slot },
                });
            }
        }
        Ok(record)
    }

    /// Steps until a stop criterion fires, handing every event to `observe`.
    pub fn run_observed<F>(&mut self, mut observe: F) -> StopReason
    where
        F: FnMut(&SimState, &EventRecord),
    {
        let stop = self.config.stop.clone();
        loop {
            if self.halted.is_some() {
                return StopReason::MaxActive;
            }
            if stop.max_radius.is_some_and(|r| self.radius() > r) {
                return StopReason::MaxRadius;
            }
            if stop.max_events.is_some_and(|m| self.events >= m) {
                return StopReason::MaxEvents;
            }
            let Some(next) = self.next_event_time() else {
                return StopReason::Exhausted;
            };
            if let Some(t_max) = stop.t_max {
                if next > t_max {
                    self.clock = self.clock.max(t_max);
                    return StopReason::TMax;
                }
            }
            match self.step() {
                Ok(rec) => observe(self, &rec),
                Err(_) => return StopReason::Exhausted,
            }
        }
    }

    /// Processes every event at time `<= t` (subject to the other stop
    /// criteria); returns the reason if a criterion other than time fired.
    pub fn advance_to(&mut self, t: f64) -> Option<StopReason> {
        let saved = self.config.stop.t_max;
        self.config.stop.t_max = Some(saved.map_or(t, |s| s.min(t)));
        let reason = self.run_observed(|_, _| {});
        self.config.stop.t_max = saved;
        match reason {
            StopReason::TMax if saved.is_none_or(|s| t < s) => None,
            other => Some(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ActivationPolicy, StopCriteria};
    use crate::laws::JumpLaw;

    fn config(mu: InitLaw, pi: JumpLaw) -> SimConfig {
        SimConfig {
            dim: 1,
            pi,
            mu,
            seed: 42,
            policy: ActivationPolicy::Null,
            stop: StopCriteria { t_max: Some(10.0), max_active: None, max_radius: None, max_events: None },
        }
    }

    #[test]
    fn origin_occupancy() {
        let s = SimState::new(config(InitLaw::deterministic(3), JumpLaw::exponential(1.0))).unwrap();
        assert_eq!(s.active_count(), 3);
        assert_eq!(s.n_visited(), 1);
        let s = SimState::new(config(InitLaw::deterministic(0), JumpLaw::exponential(1.0))).unwrap();
        assert_eq!(s.active_count(), 1);
        assert_eq!(s.expected_active(), 1);
    }

    #[test]
    fn initial_schedule_is_deterministic() {
        let a = SimState::new(config(InitLaw::deterministic(1), JumpLaw::exponential(1.0))).unwrap();
        let b = SimState::new(config(InitLaw::deterministic(1), JumpLaw::exponential(1.0))).unwrap();
        assert_eq!(a.walkers()[0].next_jump_time, b.walkers()[0].next_jump_time);
    }

    #[test]
    fn atom_at_zero_rejected() {
        let err = SimState::new(config(InitLaw::deterministic(1), JumpLaw::point_mass(0.0))).unwrap_err();
        assert_eq!(err, FrogError::AtomAtZero);
    }

    #[test]
    fn degenerate_first_event() {
        let mut s = SimState::new(config(InitLaw::deterministic(0), JumpLaw::point_mass(1.0))).unwrap();
        let rec = s.step().unwrap();
        assert_eq!(rec.time, 1.0);
        assert_eq!(s.clock, 1.0);
        match rec.kind {
            EventKind::Jump { ref to, .. } => assert_eq!(to[0].abs(), 1),
            _ => panic!("expected a jump"),
        }
        assert_eq!(s.n_visited(), 2);
    }

    #[test]
    fn first_event_wakes_neighbours() {
        // Both origin walkers jump at t = 1; the first one reaches a fresh
        // site and wakes its two sleepers.
        let mut s = SimState::new(config(InitLaw::deterministic(2), JumpLaw::point_mass(1.0))).unwrap();
        assert_eq!(s.active_count(), 2);
        let rec = s.step().unwrap();
        assert_eq!(rec.newly_activated, 2);
        assert_eq!(s.active_count(), 4);
        assert_eq!(s.active_count(), s.expected_active());
    }

    #[test]
    fn delayed_grid_defers_activation() {
        let mut cfg = config(InitLaw::deterministic(1), JumpLaw::point_mass(0.4));
        cfg.policy = ActivationPolicy::DelayedGrid { times: (1..=20).map(f64::from).collect() };
        let mut s = SimState::new(cfg).unwrap();
        let rec = s.step().unwrap();
        assert_eq!(rec.time, 0.4);
        let site = rec.first_visit.clone().unwrap();
        assert_eq!(rec.newly_activated, 0);
        assert_eq!(s.active_count(), 1);
        s.advance_to(1.0);
        assert_eq!(s.site(&site).unwrap().activation_time, Some(1.0));
        assert!(s.active_count() >= 2);
    }

    #[test]
    fn max_active_refuses_whole_activation() {
        let mut cfg = config(InitLaw::deterministic(5), JumpLaw::exponential(1.0));
        cfg.stop.max_active = Some(7);
        let mut s = SimState::new(cfg).unwrap();
        let reason = s.run_observed(|_, _| {});
        assert_eq!(reason, StopReason::MaxActive);
        assert_eq!(s.active_count(), 5);
        assert_eq!(s.halted_at(), Some(10));
    }

    #[test]
    fn queue_pops_in_key_order() {
        let mut h = BinaryHeap::new();
        let ev = |time, class, id, seq| QueuedEvent { time, class, id, seq, what: Pending::Jump { walker: 0 } };
        h.push(ev(1.0, 1, 2, 0));
        h.push(ev(1.0, 1, 1, 5));
        h.push(ev(1.0, 0, 9, 0));
        h.push(ev(0.5, 1, 3, 0));
        let order: Vec<_> = std::iter::from_fn(|| h.pop()).map(|e| (e.time, e.class, e.id)).collect();
        assert_eq!(order, vec![(0.5, 1, 3), (1.0, 0, 9), (1.0, 1, 1), (1.0, 1, 2)]);
    }
}
