//! Staged chain-of-sites construction for a one-dimensional frog model.
//!
//! A stage starts from a single active particle at `X_0`. Step `n` looks for
//! the leftmost site `k` in the window `[X_n + a_{n+1}, X_n + 2 a_{n+1}]` with
//! at least `b_{n+1}` sleepers, and requires that one of the particles woken at
//! `X_n` has moved at least `2 a_{n+1}` to the right after `Δ_n` time units.
//! Sites outside the chain never wake, and chain sites wake only at the grid
//! times `t_n`, so the chain is a pathwise lower bound for the unmodified
//! process. When a step fails at index `κ`, the stage ends at the time `σ` when
//! the particles of `X_{κ-1}` first reach `X_{κ-1} + 2 a_κ + 1`, and the next
//! stage restarts from the rightmost particle at that time.
//!
//! Occupancies are read from the same site-keyed environment as the engine
//! ([`site_eta`]); counts and thresholds are saturated at the schedule's `cap`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::engine::site_eta;
use crate::error::{FrogError, Result};
use crate::laws::{g_bound, InitLaw, JumpLaw};
use crate::stream::tag;
use crate::walk::{Walk1d, WalkerScope};

/// Cap on counts used by the desk-scale preset.
pub const DESK_CAP: u64 = 100_000;

/// Jump budget for the `σ` search before it is reported as censored.
pub const SIGMA_JUMP_BUDGET: u64 = 100_000_000;

/// Target and rate sequences of the construction. Sequences indexed from 1
/// (`a`, `b`, `A`) are stored at offset `n - 1`; `delta` and `times` start at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Number of chain steps a stage attempts.
    pub n_max: usize,
    pub targets: Vec<f64>,
    /// `t_0 = 0, t_1, ..., t_{L}`.
    pub times: Vec<f64>,
    /// `None` when `t_n` grows without bound (or the limit was not declared).
    pub t_inf: Option<f64>,
    pub a: Vec<u64>,
    /// `Δ_0, ..., Δ_{L}`.
    pub delta: Vec<f64>,
    /// Uncapped `b_n`; may be astronomically large.
    pub b: Vec<f64>,
    pub cap: u64,
    pub pi: JumpLaw,
    /// First `n` with `mu([min(b_{n+1}, cap), ∞)) < n / a_n`, if any.
    pub tail_condition_failure: Option<usize>,
}

impl Schedule {
    pub fn a(&self, n: usize) -> u64 {
        self.a[n - 1]
    }

    pub fn b(&self, n: usize) -> f64 {
        self.b[n - 1]
    }

    /// `b_n` saturated at the cap.
    pub fn b_capped(&self, n: usize) -> u64 {
        let b = self.b(n);
        if b >= self.cap as f64 {
            self.cap
        } else {
            b as u64
        }
    }

    pub fn is_capped(&self, n: usize) -> bool {
        self.b(n) > self.cap as f64
    }

    pub fn delta(&self, n: usize) -> f64 {
        self.delta[n]
    }

    pub fn t(&self, n: usize) -> f64 {
        self.times[n]
    }

    /// Largest `n` with `a_n`, `b_n` defined.
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `Σ_{n ≥ 1} Δ_n` when the time limit is finite.
    pub fn tail_duration(&self) -> Option<f64> {
        self.t_inf.map(|t| t - self.t(1))
    }

    /// Re-checks the structural invariants: `a_n ≥ n²`, `Σ_{i≤n} a_i ≥ A_n`,
    /// positive increments and increasing times.
    pub fn validate(&self) -> Result<()> {
        let mut sum = 0u64;
        for n in 1..=self.len() {
            let a = self.a(n);
            if a < (n * n) as u64 {
                return Err(FrogError::invalid("a", format!("a_{n} = {a} < {}", n * n)));
            }
            sum = sum.saturating_add(a);
            if (sum as f64) < self.targets[n - 1] {
                return Err(FrogError::invalid("a", format!("partial sum of a up to {n} is below A_{n}")));
            }
            if !(self.b(n) >= 1.0) {
                return Err(FrogError::invalid("b", format!("b_{n} must be at least 1")));
            }
        }
        if self.delta.iter().any(|d| !(*d > 0.0)) {
            return Err(FrogError::invalid("delta", "increments must be positive"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FrogError::invalid("t_seq", "times must be strictly increasing"));
        }
        if self.n_max + 1 > self.len() + 1 || self.n_max == 0 {
            return Err(FrogError::invalid("n_max", "inconsistent with sequence lengths"));
        }
        Ok(())
    }
}

/// Builds a schedule from targets `A_1..A_L` and times `t_1..t_{L+1}`:
/// `a_n = max(A_n, n²)` rounded up, `Δ_n = t_{n+1} - t_n` with `t_0 = 0`, and
/// `b_n = ⌈n / g(Δ_n, 2 a_n)⌉`. A stage then runs `L - 1` steps so that every
/// step inequality has its `n + 1` terms. Fails when some `g` vanishes.
pub fn build_schedule(targets: &[f64], t_seq: &[f64], pi: &JumpLaw, mu: &InitLaw, cap: u64) -> Result<Schedule> {
    pi.validate()?;
    mu.validate()?;
    let len = targets.len();
    if len < 2 {
        return Err(FrogError::invalid("A_seq", "need at least two targets"));
    }
    if t_seq.len() < len + 1 {
        return Err(FrogError::invalid("t_seq", format!("need {} times for {len} targets", len + 1)));
    }
    if targets.windows(2).any(|w| w[1] <= w[0]) || targets[0] <= 0.0 {
        return Err(FrogError::invalid("A_seq", "targets must be positive and increasing"));
    }
    let mut times = Vec::with_capacity(len + 1);
    times.push(0.0);
    times.extend_from_slice(&t_seq[..len]);
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FrogError::invalid("t_seq", "times must be positive and increasing"));
    }
    let mut delta: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    delta.push(t_seq[len] - t_seq[len - 1]);
    if !(delta[len] > 0.0) {
        return Err(FrogError::invalid("t_seq", "times must be positive and increasing"));
    }
    let a: Vec<u64> = (1..=len).map(|n| targets[n - 1].max((n * n) as f64).ceil() as u64).collect();
    let mut b = Vec::with_capacity(len);
    for n in 1..=len {
        let g = g_bound(pi, delta[n], 2 * a[n - 1])?;
        if g <= 0.0 {
            return Err(FrogError::GappedSchedule { n });
        }
        let bn = (n as f64 / g).ceil();
        if !bn.is_finite() {
            return Err(FrogError::UnboundedSchedule { n });
        }
        b.push(bn);
    }
    let mut schedule = Schedule {
        n_max: len - 1,
        targets: targets.to_vec(),
        times,
        t_inf: None,
        a,
        delta,
        b,
        cap,
        pi: pi.clone(),
        tail_condition_failure: None,
    };
    schedule.tail_condition_failure = tail_condition_failure(&schedule, mu);
    schedule.validate()?;
    Ok(schedule)
}

/// First `n` violating `mu([b_{n+1}, ∞)) ≥ n / a_n` (thresholds capped).
pub fn tail_condition_failure(schedule: &Schedule, mu: &InitLaw) -> Option<usize> {
    (1..schedule.len()).find(|&n| mu.tail_mass(schedule.b_capped(n + 1)) < n as f64 / schedule.a(n) as f64)
}

/// The explicit unit-exponential schedule: `a_n = n²`, `Δ_n = 1/n²` for
/// `n ≥ 1` and `b_n = 2^(4n²+1) n^(8n²+1)`. `Δ_0 = t_1` is not pinned down by
/// these formulas and is taken to be 1, so `t_∞ = 1 + π²/6`.
pub fn summable_preset(n_max: usize) -> Result<Schedule> {
    if n_max == 0 {
        return Err(FrogError::invalid("n_max", "must be at least 1"));
    }
    let len = n_max + 1;
    let mut delta = vec![1.0];
    delta.extend((1..=len).map(|n| 1.0 / (n * n) as f64));
    let mut times = vec![0.0];
    for n in 0..len {
        times.push(times[n] + delta[n]);
    }
    let a: Vec<u64> = (1..=len).map(|n| (n * n) as u64).collect();
    let b = (1..=len)
        .map(|n| {
            let n2 = (n * n) as f64;
            let nf = n as f64;
            ((4.0 * n2 + 1.0) * 2f64.ln() + (8.0 * n2 + 1.0) * nf.ln()).exp()
        })
        .collect();
    let mut partial = 0.0;
    let targets = a
        .iter()
        .map(|&x| {
            partial += x as f64;
            partial
        })
        .collect();
    let basel = std::f64::consts::PI.powi(2) / 6.0;
    let schedule = Schedule {
        n_max,
        targets,
        times,
        t_inf: Some(1.0 + basel),
        a,
        delta,
        b,
        cap: crate::laws::DEFAULT_CAP,
        pi: JumpLaw::exponential(1.0),
        tail_condition_failure: None,
    };
    schedule.validate()?;
    Ok(schedule)
}

/// Desk-scale variant: `a_n = n²`, `Δ_n = 1` (so `t_n = n`), unit exponential
/// waits, `b_n = ⌈n / g(1, 2n²)⌉` saturated at `cap`.
pub fn desk_preset(n_max: usize, cap: u64) -> Result<Schedule> {
    if n_max == 0 {
        return Err(FrogError::invalid("n_max", "must be at least 1"));
    }
    let len = n_max + 1;
    let targets: Vec<f64> = (1..=len).map(|n| (n * n) as f64).collect();
    let times: Vec<f64> = (1..=len + 1).map(|n| n as f64).collect();
    build_schedule(&targets, &times, &JumpLaw::exponential(1.0), &desk_mu(cap), cap)
}

/// Occupancy law meeting the tail condition of [`desk_preset`] exactly.
pub fn desk_mu(cap: u64) -> InitLaw {
    InitLaw::deterministic(cap)
}

/// Maximum terminal displacement after `duration` of `min(n_walkers, sim_cap)`
/// independent one-dimensional walks from `scope` (walker indices `1..`).
/// Capping makes the result a stochastic lower bound of the true maximum.
pub fn max_displacement(n_walkers: u64, duration: f64, pi: &JumpLaw, scope: &WalkerScope, sim_cap: u64) -> Result<i64> {
    if n_walkers == 0 {
        return Err(FrogError::invalid("n_walkers", "must be at least 1"));
    }
    if !(duration > 0.0) {
        return Err(FrogError::invalid("duration", "must be positive"));
    }
    let n = n_walkers.min(sim_cap).max(1);
    Ok((1..=n).map(|j| Walk1d::new(pi, scope, j).advance_to(pi, duration)).max().unwrap_or(0))
}

/// Particles woken at one chain site.
#[derive(Clone, Debug)]
struct WalkerGroup {
    home: i64,
    /// Wake-up time relative to the start of the stage.
    activation: f64,
    walks: Vec<Walk1d>,
}

impl WalkerGroup {
    fn new(home: i64, activation: f64, count: u64, pi: &JumpLaw, scope: &WalkerScope) -> Self {
        Self { home, activation, walks: (1..=count).map(|j| Walk1d::new(pi, scope, j)).collect() }
    }

    fn max_at(&mut self, pi: &JumpLaw, local_t: f64) -> i64 {
        self.walks.iter_mut().map(|w| w.advance_to(pi, local_t)).max().unwrap_or(0)
    }

    /// First local time `≥ from` at which some walk is at or beyond
    /// `level`; `None` if the jump budget runs out.
    fn first_reach(&mut self, pi: &JumpLaw, from: f64, level: i64, budget: u64) -> Option<f64> {
        if self.max_at(pi, from) >= level {
            return Some(from);
        }
        #[derive(PartialEq)]
        struct Next(f64, usize);
        impl Eq for Next {}
        impl PartialOrd for Next {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Next {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        let mut heap: BinaryHeap<Next> = self.walks.iter().enumerate().map(|(i, w)| Next(w.next_jump, i)).collect();
        let mut used = 0u64;
        while let Some(Next(t, i)) = heap.pop() {
            if used >= budget {
                return None;
            }
            used += 1;
            let w = &mut self.walks[i];
            w.jump(pi);
            if w.position >= level {
                return Some(t);
            }
            heap.push(Next(w.next_jump, i));
        }
        None
    }
}

/// Outcome of one stage of the construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    /// Absolute time at which the stage started (`σ_{m-1}`).
    pub start_time: f64,
    /// `X_0, X_1, ...`; `None` marks the first infinite entry.
    pub chain: Vec<Option<i64>>,
    /// First index with an infinite chain entry.
    pub kappa: Option<usize>,
    /// Absolute end time of the stage; `None` when the chain is complete or
    /// the search ran out of budget.
    pub sigma: Option<f64>,
    pub sigma_censored: bool,
    /// Per step `n = 0..`: whether the walkers of `X_n` reached `2 a_{n+1}`.
    pub displacement_ok: Vec<bool>,
    /// Per step: whether the window held a site with at least `b_{n+1}` sleepers.
    pub window_ok: Vec<bool>,
    /// `Q_{n+1}`: the chain is finite through index `n + 1`.
    pub success_flags: Vec<bool>,
    /// Rightmost particle at `σ`, where the next stage starts.
    pub next_start: Option<i64>,
    /// The stage had no start site (`κ = 0`).
    pub degenerate: bool,
}

impl StageRecord {
    pub fn completed(&self) -> bool {
        self.kappa.is_none() && !self.degenerate
    }

    /// `X_1 - X_0`, or `None` if `X_1` is infinite.
    pub fn first_increment(&self) -> Option<i64> {
        match (self.chain.first(), self.chain.get(1)) {
            (Some(Some(x0)), Some(Some(x1))) => Some(x1 - x0),
            _ => None,
        }
    }
}

/// Runs stage `m` from `start_site` at absolute time `start_time`.
pub fn run_stage(
    schedule: &Schedule,
    m: usize,
    seed: u64,
    mu: &InitLaw,
    start_site: Option<i64>,
    start_time: f64,
) -> StageRecord {
    let mut record = StageRecord {
        stage: m,
        start_time,
        chain: vec![start_site],
        kappa: None,
        sigma: None,
        sigma_censored: false,
        displacement_ok: Vec::new(),
        window_ok: Vec::new(),
        success_flags: Vec::new(),
        next_start: None,
        degenerate: false,
    };
    let Some(x0) = start_site else {
        record.kappa = Some(0);
        record.sigma = Some(0.0);
        record.degenerate = true;
        return record;
    };
    let pi = &schedule.pi;
    let scope = |home: i64| WalkerScope::new(seed, vec![tag::STAGE, m as i64, home]);
    let mut groups = vec![WalkerGroup::new(x0, 0.0, 1, pi, &scope(x0))];
    let mut x = x0;
    for n in 0..schedule.n_max {
        let a_next = schedule.a(n + 1) as i64;
        let reach = groups[n].max_at(pi, schedule.delta(n)) >= 2 * a_next;
        let need = schedule.b_capped(n + 1);
        let site = (x + a_next..=x + 2 * a_next).find(|&k| site_eta(seed, mu, &[k]).min(schedule.cap) >= need);
        record.displacement_ok.push(reach);
        record.window_ok.push(site.is_some());
        match site.filter(|_| reach) {
            Some(k) => {
                record.success_flags.push(true);
                record.chain.push(Some(k));
                let eta = site_eta(seed, mu, &[k]).min(schedule.cap);
                groups.push(WalkerGroup::new(k, schedule.t(n + 1), eta, pi, &scope(k)));
                x = k;
            }
            None => {
                record.success_flags.push(false);
                record.chain.push(None);
                let kappa = n + 1;
                record.kappa = Some(kappa);
                let level = 2 * a_next + 1;
                let group = &mut groups[n];
                let Some(local) = group.first_reach(pi, schedule.delta(n), level, SIGMA_JUMP_BUDGET) else {
                    record.sigma_censored = true;
                    return record;
                };
                let sigma_rel = group.activation + local;
                record.sigma = Some(start_time + sigma_rel);
                let rightmost = groups
                    .iter_mut()
                    .map(|g| {
                        let local_t = sigma_rel - g.activation;
                        g.home + g.max_at(pi, local_t)
                    })
                    .max();
                record.next_start = rightmost;
                return record;
            }
        }
    }
    record
}

/// All stages of one construction run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionRecord {
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    /// First stage whose chain completed.
    pub succeeded_stage: Option<usize>,
    /// Time at which the last recorded stage ended (or, for a completed
    /// stage, when its last chain site woke).
    pub total_time: f64,
    pub schedule: Schedule,
}

/// Runs stages `1, 2, ...` until one completes its chain or `m_max` stages
/// have been tried. Each failed stage hands its rightmost particle to the next.
pub fn run_construction(schedule: &Schedule, mu: &InitLaw, seed: u64, m_max: usize) -> Result<ConstructionRecord> {
    if m_max == 0 {
        return Err(FrogError::invalid("m_max", "must be at least 1"));
    }
    mu.validate()?;
    let mut stages = Vec::new();
    let mut start = Some(0i64);
    let mut start_time = 0.0;
    let mut succeeded = None;
    let mut total_time = 0.0;
    for m in 1..=m_max {
        let rec = run_stage(schedule, m, seed, mu, start, start_time);
        let done = rec.completed();
        let censored = rec.sigma_censored;
        total_time = match rec.sigma {
            Some(s) => s,
            None => start_time + schedule.t(schedule.n_max),
        };
        start = rec.next_start;
        start_time = rec.sigma.unwrap_or(start_time);
        stages.push(rec);
        if done {
            succeeded = Some(m);
            break;
        }
        if censored {
            break;
        }
    }
    Ok(ConstructionRecord { seed, stages, succeeded_stage: succeeded, total_time, schedule: schedule.clone() })
}
