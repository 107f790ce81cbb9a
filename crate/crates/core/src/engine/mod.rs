//! Event-driven simulation of the frog model on `Z^d`.
//!
//! Sites are materialised lazily on first visit, when their occupancy is drawn
//! from a stream keyed by the site coordinates. Walker `j` of home site `x`
//! draws its waits and jump directions from streams keyed by `(x, j)`, and its
//! first wait is drawn when it activates. Two runs with the same seed
//! therefore share every walk `S^(x, j)` as a function of the time since
//! activation, which is what makes the slowing couplings pathwise.

mod coupling;
mod policy;
mod result;
mod state;

use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::laws::{InitLaw, JumpLaw};

pub use coupling::{couple_projection, couple_runs, CouplingReport, CouplingViolation};
pub use policy::{ActivationPolicy, SitePredicate, VisitContext};
pub use result::{SeriesRow, SimResult, SimSummary};
pub use state::{site_eta, EventKind, EventRecord, SimState, Site, SiteState, Walker, WalkerId};

pub const DEFAULT_T_MAX: f64 = 10.0;
pub const DEFAULT_MAX_ACTIVE: u64 = 1_000_000;
pub const DEFAULT_MAX_EVENTS: u64 = 100_000_000;

/// When to stop a run. `None` disables a criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopCriteria {
    pub t_max: Option<f64>,
    pub max_active: Option<u64>,
    pub max_radius: Option<i64>,
    pub max_events: Option<u64>,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            t_max: Some(DEFAULT_T_MAX),
            max_active: Some(DEFAULT_MAX_ACTIVE),
            max_radius: None,
            max_events: Some(DEFAULT_MAX_EVENTS),
        }
    }
}

impl StopCriteria {
    pub fn until(t_max: f64) -> Self {
        Self { t_max: Some(t_max), max_active: None, max_radius: None, max_events: None }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.t_max {
            if !(t.is_finite() && t > 0.0) {
                return Err(FrogError::invalid("t_max", "must be positive and finite"));
            }
        }
        if self.max_active == Some(0) {
            return Err(FrogError::invalid("max_active", "must be positive"));
        }
        if self.max_radius.is_some_and(|r| r <= 0) {
            return Err(FrogError::invalid("max_radius", "must be positive"));
        }
        if self.t_max.is_none() && self.max_events.is_none() && self.max_radius.is_none() && self.max_active.is_none() {
            return Err(FrogError::invalid("stop", "at least one stop criterion must be set"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TMax,
    MaxActive,
    MaxRadius,
    MaxEvents,
    Exhausted,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::TMax => "t_max",
            StopReason::MaxActive => "max_active",
            StopReason::MaxRadius => "max_radius",
            StopReason::MaxEvents => "max_events",
            StopReason::Exhausted => "exhausted",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dim: usize,
    pub pi: JumpLaw,
    pub mu: InitLaw,
    pub seed: u64,
    #[serde(default)]
    pub policy: ActivationPolicy,
    #[serde(default)]
    pub stop: StopCriteria,
}

impl SimConfig {
    pub fn new(dim: usize, pi: JumpLaw, mu: InitLaw, seed: u64) -> Self {
        Self { dim, pi, mu, seed, policy: ActivationPolicy::Null, stop: StopCriteria::default() }
    }

    pub fn with_policy(mut self, policy: ActivationPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_stop(mut self, stop: StopCriteria) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(FrogError::invalid("dim", "must be at least 1"));
        }
        self.pi.validate()?;
        self.mu.validate()?;
        self.policy.validate(self.dim)?;
        self.stop.validate()
    }
}

/// Builds the initial state for `config`.
pub fn init_sim(config: SimConfig) -> Result<SimState> {
    SimState::new(config)
}

/// Runs `state` until one of its stop criteria fires, recording the series
/// after every event (plus the initial snapshot).
pub fn run_until(mut state: SimState, stop: StopCriteria) -> Result<SimResult> {
    stop.validate()?;
    state.config.stop = stop;
    let mut series = vec![SeriesRow::snapshot(&state)];
    let reason = state.run_observed(|s, _| series.push(SeriesRow::snapshot(s)));
    Ok(SimResult { series, stop_reason: reason, state })
}

/// Convenience: initialise and run with the configuration's own stop criteria.
pub fn simulate(config: SimConfig) -> Result<SimResult> {
    let stop = config.stop.clone();
    run_until(init_sim(config)?, stop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{direction_at, WalkerScope};

    fn base(pi: JumpLaw, mu: InitLaw) -> SimConfig {
        SimConfig::new(1, pi, mu, 5).with_stop(StopCriteria::until(10.0))
    }

    #[test]
    fn zero_events_gives_initial_snapshot() {
        let cfg = base(JumpLaw::exponential(1.0), InitLaw::deterministic(1));
        let stop = StopCriteria { t_max: None, max_active: None, max_radius: None, max_events: Some(0) };
        let res = run_until(init_sim(cfg).unwrap(), stop).unwrap();
        assert_eq!(res.series.len(), 1);
        assert_eq!(res.stop_reason, StopReason::MaxEvents);
        assert_eq!(res.stop_reason.as_str(), "max_events");
    }

    #[test]
    fn point_mass_run_stays_in_box() {
        let cfg = base(JumpLaw::point_mass(0.5), InitLaw::deterministic(2));
        let res = run_until(init_sim(cfg).unwrap(), StopCriteria::until(2.3)).unwrap();
        assert_eq!(res.stop_reason, StopReason::TMax);
        assert!(res.state.visited().all(|(s, _)| s[0].abs() <= 5));
        assert_eq!(res.state.clock, 2.3);
    }

    #[test]
    fn lone_walker_matches_direct_walk() {
        // With no sleepers anywhere the only walker is the one added at the
        // origin; the visited set is the range of its walk.
        let pi = JumpLaw::exponential(1.0);
        let cfg = base(pi.clone(), InitLaw::deterministic(0)).with_seed(99);
        let res = simulate(cfg).unwrap();
        let scope = WalkerScope::lattice(99, &[0]);
        let (mut wait, dir) = scope.streams(1);
        let mut t = pi.sample_wait(&mut wait);
        let mut pos = 0i64;
        let mut seen = std::collections::BTreeSet::from([0i64]);
        let mut k = 0;
        while t <= 10.0 {
            pos += direction_at(&dir, k, 1).1;
            seen.insert(pos);
            k += 1;
            t += pi.sample_wait(&mut wait);
        }
        assert_eq!(res.state.n_visited(), seen.len());
        assert_eq!(res.state.project_visited(1).unwrap(), seen);
        assert_eq!(res.state.active_count(), 1);
    }

    #[test]
    fn identical_configs_identical_series() {
        let cfg = base(JumpLaw::uniform(1.0), InitLaw::atom_list(vec![(0, 0.3), (2, 0.7)]));
        let a = simulate(cfg.clone()).unwrap();
        let b = simulate(cfg).unwrap();
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn visited_set_and_clock_monotone_with_conservation() {
        let cfg = SimConfig::new(2, JumpLaw::exponential(1.0), InitLaw::atom_list(vec![(0, 0.5), (1, 0.3), (4, 0.2)]), 3)
            .with_stop(StopCriteria::until(6.0));
        let mut state = init_sim(cfg).unwrap();
        let mut last_t = 0.0;
        let mut last_n = state.n_visited();
        state.run_observed(|s, rec| {
            assert!(rec.time >= last_t);
            assert!(s.n_visited() >= last_n);
            assert_eq!(s.active_count(), s.expected_active());
            last_t = rec.time;
            last_n = s.n_visited();
        });
    }

    #[test]
    fn projection_examples() {
        let cfg = SimConfig::new(2, JumpLaw::exponential(1.0), InitLaw::deterministic(0), 1);
        let state = init_sim(cfg).unwrap();
        assert_eq!(state.project_visited(1).unwrap(), [0].into());
        assert!(state.project_visited(3).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = base(JumpLaw::exponential(1.0), InitLaw::deterministic(1));
        cfg.dim = 0;
        assert!(cfg.validate().is_err());
        let cfg = base(JumpLaw::exponential(1.0), InitLaw::deterministic(1))
            .with_stop(StopCriteria { t_max: None, max_active: None, max_radius: None, max_events: None });
        assert!(cfg.validate().is_err());
    }
}
