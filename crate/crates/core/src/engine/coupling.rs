use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};

use super::policy::ActivationPolicy;
use super::state::{SimState, Site};
use super::{init_sim, SimConfig, StopCriteria, StopReason};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingViolation {
    /// Time at which the restricted run visited `site` ahead of the other run.
    pub time: f64,
    pub site: Site,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    /// `A_t(a) ⊆ A_t(b)` at every time up to the horizon.
    pub subset_holds: bool,
    /// Both runs visited the same sites at the same times.
    pub identical: bool,
    pub first_violation: Option<CouplingViolation>,
    pub visited_a: usize,
    pub visited_b: usize,
}

fn run_to(config: SimConfig, horizon: f64) -> Result<SimState> {
    let max_events = config.stop.max_events;
    let mut state = init_sim(config.with_stop(StopCriteria { max_events, ..StopCriteria::until(horizon) }))?;
    match state.run_observed(|_, _| {}) {
        StopReason::TMax => Ok(state),
        other => Err(FrogError::Precondition(format!("coupled run stopped early ({other}) before the horizon"))),
    }
}

/// Checks `inner ⊆ outer` as first-visit maps: every key of `inner` must be
/// in `outer` with an earlier-or-equal time. Returns the earliest offender.
fn first_violation<K>(
    inner: impl Iterator<Item = (K, f64)>,
    outer_time: impl Fn(&K) -> Option<f64>,
) -> Option<(f64, K)> {
    inner
        .filter(|(k, t)| outer_time(k).is_none_or(|tb| tb > *t))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, t)| (t, k))
}

/// Runs `config` under `policy_a` and `policy_b` with identical randomness and
/// compares the visited sets pathwise up to `horizon`. `policy_a` must be at
/// least as restrictive as `policy_b`.
pub fn couple_runs(
    config: &SimConfig,
    policy_a: &ActivationPolicy,
    policy_b: &ActivationPolicy,
    horizon: f64,
) -> Result<CouplingReport> {
    policy_a.restricts(policy_b)?;
    let a = run_to(config.clone().with_policy(policy_a.clone()), horizon)?;
    let b = run_to(config.clone().with_policy(policy_b.clone()), horizon)?;

    let violation = first_violation(a.visited().map(|(s, t)| (s.clone(), t)), |s| {
        b.site(s).and_then(|st| st.first_visit_time)
    });
    let identical = a.n_visited() == b.n_visited()
        && a.visited().all(|(s, t)| b.site(s).and_then(|st| st.first_visit_time) == Some(t));
    Ok(CouplingReport {
        subset_holds: violation.is_none(),
        identical,
        first_violation: violation.map(|(time, site)| CouplingViolation { time, site }),
        visited_a: a.n_visited(),
        visited_b: b.n_visited(),
    })
}

/// Couples a `d`-dimensional run with the one-dimensional frog model driven by
/// the projected waiting law, realised inside the same randomness by letting
/// only the first visited site of each hyperplane `x_1 = k` activate. Checks
/// that the projection of the full run contains the one-dimensional visited
/// set at all times up to `horizon`.
pub fn couple_projection(config: &SimConfig, horizon: f64) -> Result<CouplingReport> {
    let restricted = ActivationPolicy::Composite {
        policies: vec![config.policy.clone(), ActivationPolicy::FirstInHyperplane { axis: 1 }],
    };
    let one_d = run_to(config.clone().with_policy(restricted), horizon)?;
    let full = run_to(config.clone(), horizon)?;
    let inner = one_d.projection_times(0);
    let outer = full.projection_times(0);
    let violation = first_violation(inner.iter().map(|(&k, &t)| (k, t)), |k| outer.get(k).copied());
    let identical = inner == outer;
    Ok(CouplingReport {
        subset_holds: violation.is_none(),
        identical,
        first_violation: violation.map(|(time, k)| CouplingViolation { time, site: vec![k] }),
        visited_a: inner.len(),
        visited_b: outer.len(),
    })
}
