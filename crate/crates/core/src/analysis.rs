//! Monte-Carlo checks of the displacement bounds and growth statistics.

use std::io::Write;

use rand::RngCore;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::statistics::{Data, OrderStatistics};

use crate::construction::{max_displacement, run_construction, run_stage, Schedule};
use crate::engine::{init_sim, site_eta, SeriesRow, SimConfig, SimResult, SimState};
use crate::error::{FrogError, Result};
use crate::laws::{g_bound, InitLaw, JumpLaw};
use crate::stream::{tag, RandomStream};
use crate::walk::WalkerScope;

/// A one-sided Monte-Carlo comparison against an analytic lower bound.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct BoundVerdict {
    pub estimate: f64,
    pub standard_error: f64,
    pub analytic_bound: f64,
    pub samples: u64,
}

impl BoundVerdict {
    pub fn from_counts(hits: u64, samples: u64, analytic_bound: f64) -> Self {
        let p = hits as f64 / samples as f64;
        Self { estimate: p, standard_error: (p * (1.0 - p) / samples as f64).sqrt(), analytic_bound, samples }
    }

    /// `estimate ≥ bound − 3·SE`.
    pub fn holds(&self) -> bool {
        self.estimate >= self.analytic_bound - 3.0 * self.standard_error
    }
}

impl Serialize for BoundVerdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BoundVerdict", 5)?;
        st.serialize_field("estimate", &self.estimate)?;
        st.serialize_field("standard_error", &self.standard_error)?;
        st.serialize_field("analytic_bound", &self.analytic_bound)?;
        st.serialize_field("samples", &self.samples)?;
        st.serialize_field("holds", &self.holds())?;
        st.end()
    }
}

/// Position at time `r` of a one-dimensional walk with waits from `pi`,
/// started at 0 and drawing everything from `stream`.
fn walk_position(pi: &JumpLaw, r: f64, stream: &mut RandomStream) -> i64 {
    let mut t = pi.sample_wait(stream);
    let mut x = 0i64;
    while t <= r {
        x += if stream.next_u32() & 1 == 0 { 1 } else { -1 };
        t += pi.sample_wait(stream);
    }
    x
}

/// Estimates `P(S_r ≥ m)` by direct simulation and compares it to `g(r, m)`.
pub fn verify_lapidation(pi: &JumpLaw, r: f64, m: u64, samples: u64, stream: &mut RandomStream) -> Result<BoundVerdict> {
    if !(r > 0.0) {
        return Err(FrogError::invalid("r", "must be positive"));
    }
    if m == 0 {
        return Err(FrogError::invalid("m", "must be at least 1"));
    }
    if samples < 1000 {
        return Err(FrogError::invalid("samples", "need at least 1000"));
    }
    let bound = g_bound(pi, r, m)?;
    let hits = (0..samples).filter(|_| walk_position(pi, r, stream) >= m as i64).count() as u64;
    Ok(BoundVerdict::from_counts(hits, samples, bound))
}

/// `P(S_r ≥ m)` for exponential waits, summing over the Poisson number of
/// jumps up to `terms - 1`.
pub fn exponential_series(rate: f64, r: f64, m: u64, terms: usize) -> f64 {
    let lambda = rate * r;
    let mut total = 0.0;
    // Row k of Pascal's triangle, scaled by 2^-k.
    let mut row = vec![1.0f64];
    let mut poisson = (-lambda).exp();
    for k in 0..terms {
        if k > 0 {
            poisson *= lambda / k as f64;
            let mut next = vec![0.0; k + 1];
            for (i, v) in row.iter().enumerate() {
                next[i] += v / 2.0;
                next[i + 1] += v / 2.0;
            }
            row = next;
        }
        // i right steps give position 2i - k.
        let tail: f64 = row.iter().enumerate().filter(|(i, _)| 2 * *i as i64 - k as i64 >= m as i64).map(|(_, v)| v).sum();
        total += poisson * tail;
    }
    total
}

/// Checks both step conditions of the chain construction at index `n`.
///
/// The displacement verdict draws `min(b_n, cap)` fresh walkers per trial and
/// asks whether one of them is at or beyond `2 a_n` after `Δ_n`. The window
/// verdict draws fresh occupancies on `a_{n+1} + 1` sites and asks whether one
/// of them holds `min(b_{n+1}, cap)` sleepers. Fresh draws realise the
/// conditional law given the earlier steps, which never look at these
/// variables. Bounds are `1 − e^{−n}`, replaced by `1 − (1 − g)^cap` when the
/// cap binds and by `1 − (1 − μ̄)^{a_n}` when the occupancy tail is too thin.
pub fn verify_step_inequalities(
    schedule: &Schedule,
    mu: &InitLaw,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<(BoundVerdict, BoundVerdict)> {
    if n == 0 || n > schedule.n_max {
        return Err(FrogError::invalid("n", format!("must lie in 1..={}", schedule.n_max)));
    }
    if samples == 0 {
        return Err(FrogError::invalid("samples", "must be positive"));
    }
    let pi = &schedule.pi;
    let level = 2 * schedule.a(n) as i64;
    let walkers = schedule.b_capped(n);
    let g = g_bound(pi, schedule.delta(n), 2 * schedule.a(n))?;
    let target = 1.0 - (-(n as f64)).exp();
    let disp_bound = if schedule.is_capped(n) { 1.0 - (1.0 - g).powf(schedule.cap as f64) } else { target };
    let disp_hits = (0..samples)
        .into_par_iter()
        .map(|i| {
            let scope = WalkerScope::new(seed, vec![tag::TRIAL, 7, n as i64, i as i64]);
            max_displacement(walkers, schedule.delta(n), pi, &scope, schedule.cap).map(|d| d >= level)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count() as u64;

    let need = schedule.b_capped(n + 1);
    let width = schedule.a(n + 1) as i64;
    let tail = mu.tail_mass(need);
    let window_bound =
        if tail >= n as f64 / schedule.a(n) as f64 { target } else { 1.0 - (1.0 - tail).powf(schedule.a(n) as f64) };
    let window_hits = (0..samples)
        .filter(|&i| (0..=width).any(|k| site_eta(seed, mu, &[tag::TRIAL, 8, n as i64, i as i64, k]) >= need))
        .count() as u64;
    Ok((
        BoundVerdict::from_counts(disp_hits, samples, disp_bound),
        BoundVerdict::from_counts(window_hits, samples, window_bound),
    ))
}

/// `∏_{n=1}^{n_max} (1 − 2e^{−n})`.
pub fn product_bound(n_max: usize) -> f64 {
    (1..=n_max).map(|n| 1.0 - 2.0 * (-(n as f64)).exp()).product()
}

/// Lower bound on the probability that a stage completes its whole chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QInfinityBound {
    pub p_q1: f64,
    pub n_max: usize,
    /// `p_q1 · ∏_{n ≤ n_max} (1 − 2e^{−n})`.
    pub value: f64,
    /// `exp(−Σ_{n > n_max} 4e^{−n})`, a lower bound on the remaining factors.
    pub tail_factor: f64,
    /// `value · tail_factor`: a bound for the infinite product.
    pub limit_lower: f64,
}

pub fn q_infinity_lower_bound(p_q1: f64, n_max: usize) -> Result<QInfinityBound> {
    if !(0.0..=1.0).contains(&p_q1) {
        return Err(FrogError::invalid("p_q1", "must be a probability"));
    }
    let value = p_q1 * product_bound(n_max);
    // 1 − x ≥ e^{−2x} for x ≤ 1/2, and 2e^{−n} ≤ 1/2 from n = 2 on.
    let start = (n_max + 1).max(2) as f64;
    let tail_sum = 4.0 * (-start).exp() / (1.0 - (-1.0f64).exp());
    let mut tail_factor = (-tail_sum).exp();
    if n_max == 0 {
        tail_factor *= 1.0 - 2.0 * (-1.0f64).exp();
    }
    Ok(QInfinityBound { p_q1, n_max, value, tail_factor, limit_lower: value * tail_factor })
}

/// Fraction of `samples` independent first stages whose first step succeeds.
pub fn estimate_q1(schedule: &Schedule, mu: &InitLaw, samples: u64, seed: u64) -> BoundVerdict {
    let hits = (0..samples)
        .into_par_iter()
        .filter(|&i| {
            let mut sched = schedule.clone();
            sched.n_max = 1;
            let rec = run_stage(&sched, 1, seed.wrapping_add(i), mu, Some(0), 0.0);
            rec.success_flags.first().copied().unwrap_or(false)
        })
        .count() as u64;
    BoundVerdict::from_counts(hits, samples, 0.0)
}

fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    let mut data = Data::new(values.to_vec());
    (data.lower_quartile(), data.median(), data.upper_quartile())
}

/// Least-squares slope of `y` on `x` and its standard error (NaN with fewer
/// than three points).
pub fn fit_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, se)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub times: Vec<f64>,
    pub median_sup: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
    /// `curves[i][k]`: axis-1 frontier of replica `i` at `times[k]`.
    pub curves: Vec<Vec<i64>>,
    pub seeds: Vec<u64>,
    /// Replicas that hit a non-time stop criterion before the last grid time;
    /// their later entries are frozen at the stopping state.
    pub censored: Vec<bool>,
    pub slope: f64,
    pub slope_se: f64,
}

impl GrowthReport {
    pub fn n_replicas(&self) -> usize {
        self.curves.len()
    }

    /// CSV with columns `t,median_sup,q25,q75,n_replicas`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "median_sup", "q25", "q75", "n_replicas"])?;
        for k in 0..self.times.len() {
            w.write_record(&[
                self.times[k].to_string(),
                self.median_sup[k].to_string(),
                self.q25[k].to_string(),
                self.q75[k].to_string(),
                self.n_replicas().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn replica(config: &SimConfig, i: usize) -> Result<SimState> {
    init_sim(config.clone().with_seed(config.seed.wrapping_add(i as u64)))
}

/// Runs `replicas` copies of `config` (seeds `seed + i`), records the axis-1
/// frontier on `times`, and fits the log-log slope of the median frontier.
pub fn growth_curve(config: &SimConfig, times: &[f64], replicas: usize) -> Result<GrowthReport> {
    config.validate()?;
    if replicas < 30 {
        return Err(FrogError::invalid("replicas", "need at least 30"));
    }
    if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FrogError::invalid("time_grid", "must be positive and increasing"));
    }
    let runs: Vec<(Vec<i64>, bool)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut state = replica(config, i)?;
            state.config.stop.t_max = None;
            let mut curve = Vec::with_capacity(times.len());
            let mut stopped = false;
            for &t in times {
                if !stopped {
                    stopped = matches!(state.advance_to(t), Some(r) if r != crate::engine::StopReason::Exhausted);
                }
                curve.push(state.frontier_max()[0]);
            }
            Ok((curve, stopped))
        })
        .collect::<Result<_>>()?;
    let (curves, censored): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mut median_sup = Vec::new();
    let mut q25 = Vec::new();
    let mut q75 = Vec::new();
    for k in 0..times.len() {
        let col: Vec<f64> = curves.iter().map(|c: &Vec<i64>| c[k] as f64).collect();
        let (lo, mid, hi) = quartiles(&col);
        q25.push(lo);
        median_sup.push(mid);
        q75.push(hi);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&median_sup).filter(|(_, m)| **m > 0.0).map(|(t, m)| (t.ln(), m.ln())).unzip();
    if xs.len() < 2 {
        return Err(FrogError::DegenerateGrowth(format!(
            "only {} grid times have a positive median frontier",
            xs.len()
        )));
    }
    let (slope, slope_se) = fit_slope(&xs, &ys);
    Ok(GrowthReport {
        times: times.to_vec(),
        median_sup,
        q25,
        q75,
        curves,
        seeds: (0..replicas).map(|i| config.seed.wrapping_add(i as u64)).collect(),
        censored,
        slope,
        slope_se,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: u64,
    /// Per replica; `None` when the count was never reached.
    pub tau: Vec<Option<f64>>,
    pub censored: usize,
    /// At most half of the replicas are censored.
    pub usable: bool,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub threshold: u64,
    /// Median of `τ_{2N} − τ_N` over replicas where both are finite.
    pub median_gap: Option<f64>,
    pub usable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplosionProxyTable {
    pub thresholds: Vec<u64>,
    pub rows: Vec<ThresholdRow>,
    /// One row per `N` whose double `2N` is also a threshold.
    pub gaps: Vec<GapRow>,
    pub seeds: Vec<u64>,
}

impl ExplosionProxyTable {
    /// CSV with columns `threshold,median,q25,q75,censored,usable,median_gap`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "median", "q25", "q75", "censored", "usable", "median_gap"])?;
        for row in &self.rows {
            let gap = self.gaps.iter().find(|g| g.threshold == row.threshold).and_then(|g| g.median_gap);
            w.write_record(&[
                row.threshold.to_string(),
                fmt(row.median),
                fmt(row.q25),
                fmt(row.q75),
                row.censored.to_string(),
                row.usable.to_string(),
                fmt(gap),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// First time the active count reaches each threshold, per replica. A run
/// stopped by `max_active` counts the refused total as reached at the time
/// of the refusal. Thresholds never reached before another stop are censored.
pub fn explosion_proxy(config: &SimConfig, thresholds: &[u64], replicas: usize) -> Result<ExplosionProxyTable> {
    config.validate()?;
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[1] <= w[0]) || thresholds[0] == 0 {
        return Err(FrogError::invalid("thresholds", "must be positive and increasing"));
    }
    if replicas == 0 {
        return Err(FrogError::invalid("replicas", "must be positive"));
    }
    let taus: Vec<Vec<Option<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut state = replica(config, i)?;
            let mut tau = vec![None; thresholds.len()];
            let mark = |count: u64, t: f64, tau: &mut Vec<Option<f64>>| {
                for (k, &n) in thresholds.iter().enumerate() {
                    if tau[k].is_none() && count >= n {
                        tau[k] = Some(t);
                    }
                }
            };
            mark(state.active_count(), 0.0, &mut tau);
            let last = *thresholds.last().unwrap();
            let mut done = tau.iter().all(Option::is_some);
            if !done {
                state.run_observed(|s, rec| {
                    if !done && rec.newly_activated > 0 {
                        mark(s.active_count(), rec.time, &mut tau);
                        done = s.active_count() >= last;
                    }
                });
            }
            if let Some(total) = state.halted_at() {
                let t = state.clock;
                mark(total, t, &mut tau);
            }
            Ok(tau)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ThresholdRow> = thresholds
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let tau: Vec<Option<f64>> = taus.iter().map(|t| t[k]).collect();
            let finite: Vec<f64> = tau.iter().flatten().copied().collect();
            let censored = replicas - finite.len();
            let usable = 2 * censored <= replicas && !finite.is_empty();
            let (q25, median, q75) = if usable {
                let (a, b, c) = quartiles(&finite);
                (Some(a), Some(b), Some(c))
            } else {
                (None, None, None)
            };
            ThresholdRow { threshold: n, tau, censored, usable, median, q25, q75 }
        })
        .collect();
    let gaps = thresholds
        .iter()
        .enumerate()
        .filter_map(|(k, &n)| thresholds.iter().position(|&m| m == 2 * n).map(|j| (k, j, n)))
        .map(|(k, j, n)| {
            let diffs: Vec<f64> = taus.iter().filter_map(|t| Some(t[j]? - t[k]?)).collect();
            let usable = rows[k].usable && rows[j].usable;
            let median_gap = if usable { Some(quartiles(&diffs).1) } else { None };
            GapRow { threshold: n, median_gap, usable }
        })
        .collect();
    Ok(ExplosionProxyTable {
        thresholds: thresholds.to_vec(),
        rows,
        gaps,
        seeds: (0..replicas).map(|i| config.seed.wrapping_add(i as u64)).collect(),
    })
}

fn require_gapped(pi: &JumpLaw, r: f64) -> Result<()> {
    if !(r > 0.0) || !pi.has_gap_below(r) {
        return Err(FrogError::Precondition(format!("waiting law puts mass on (0, {r})")));
    }
    Ok(())
}

fn in_box(hi: &[i64], lo: &[i64], t: f64, r: f64) -> bool {
    let n = (t / r).ceil() as i64;
    hi.iter().all(|&x| x <= n) && lo.iter().all(|&x| x >= -n)
}

/// Every recorded frontier lies in `[-⌈t/r⌉, ⌈t/r⌉]^d`.
pub fn envelope_holds(rows: &[SeriesRow], r: f64) -> bool {
    rows.iter().all(|row| in_box(&row.frontier_max, &row.frontier_min, row.t, r))
}

/// [`envelope_holds`] on a run whose waiting law has no mass in `(0, r)`.
pub fn linear_envelope_check(result: &SimResult, r: f64) -> Result<bool> {
    require_gapped(&result.state.config.pi, r)?;
    Ok(envelope_holds(&result.series, r))
}

/// Every visited site lies in the box of radius `⌈t/r⌉` at its visit time.
pub fn visits_within_envelope(state: &SimState, r: f64) -> Result<bool> {
    require_gapped(&state.config.pi, r)?;
    Ok(state.visited().all(|(site, t)| in_box(site, site, t, r)))
}

/// Pearson chi-square test of homogeneity for two samples of counts over the
/// same categories. Categories empty in both samples are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<TwoSampleTest> {
    if a.len() != b.len() {
        return Err(FrogError::invalid("counts", "samples must share categories"));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(FrogError::invalid("counts", "both samples must be nonempty"));
    }
    let total = (na + nb) as f64;
    let mut stat = 0.0;
    let mut cats = 0;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cats += 1;
        for (obs, n) in [(x, na), (y, nb)] {
            let exp = col * n as f64 / total;
            stat += (obs as f64 - exp).powi(2) / exp;
        }
    }
    let df = cats.max(2) - 1;
    let p_value = if cats < 2 { 1.0 } else { 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat) };
    Ok(TwoSampleTest { statistic: stat, df, p_value })
}

/// First-step increments `X_1 − X_0` of stages 1 and 2 over many seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartSample {
    pub stage1: Vec<Option<i64>>,
    pub stage2: Vec<Option<i64>>,
}

impl RestartSample {
    /// Counts over the observed increments plus one category for "no `X_1`".
    pub fn test(&self) -> Result<TwoSampleTest> {
        let mut cats: Vec<Option<i64>> = self.stage1.iter().chain(&self.stage2).copied().collect();
        cats.sort();
        cats.dedup();
        let count = |xs: &[Option<i64>]| cats.iter().map(|c| xs.iter().filter(|x| *x == c).count() as u64).collect::<Vec<_>>();
        chi_square_two_sample(&count(&self.stage1), &count(&self.stage2))
    }
}

/// Runs two-stage constructions for `seeds` and collects the first
/// increments of every stage 1 and every non-degenerate stage 2.
pub fn restart_sample(schedule: &Schedule, mu: &InitLaw, seeds: std::ops::Range<u64>) -> Result<RestartSample> {
    let recs = seeds
        .into_par_iter()
        .map(|s| run_construction(schedule, mu, s, 2))
        .collect::<Result<Vec<_>>>()?;
    let stage1 = recs.iter().map(|r| r.stages[0].first_increment()).collect();
    let stage2 = recs
        .iter()
        .filter_map(|r| r.stages.get(1))
        .filter(|s| !s.degenerate)
        .map(|s| s.first_increment())
        .collect();
    Ok(RestartSample { stage1, stage2 })
}
