//! Waiting-time laws between jumps and initial occupancy laws.

use std::f64::consts::LN_2;
use std::sync::atomic::{AtomicBool, Ordering};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::stream::{tag, RandomStream};

/// Default sample count for Monte-Carlo estimates of `mass_below`.
pub const DEFAULT_MASS_SAMPLES: u64 = 100_000;

/// Default cap on sampled site occupancies.
pub const DEFAULT_CAP: u64 = 1 << 32;

const MASS_SEED: u64 = 0x6d61_7373_5f62_656c;

/// Law of the waiting time between consecutive jumps of a walker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpLaw {
    Exponential { rate: f64 },
    PointMass { r: f64 },
    /// Uniform on `(0, c)`.
    Uniform { c: f64 },
    /// Time for the absolute value of a standard Brownian motion started at
    /// zero to reach 1, simulated on a time grid of width `step`.
    BrownianHit { step: f64 },
    /// Waiting law of one coordinate of a `d`-dimensional walk: a geometric
    /// (success probability `1/d`) number of `base` waits, summed.
    Projected { base: Box<JumpLaw>, d: u32 },
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(FrogError::invalid(key, format!("must be a positive finite number, got {v}")))
    }
}

impl JumpLaw {
    pub fn exponential(rate: f64) -> Self {
        JumpLaw::Exponential { rate }
    }

    pub fn point_mass(r: f64) -> Self {
        JumpLaw::PointMass { r }
    }

    pub fn uniform(c: f64) -> Self {
        JumpLaw::Uniform { c }
    }

    pub fn brownian_hit(step: f64) -> Self {
        JumpLaw::BrownianHit { step }
    }

    pub fn projected(base: JumpLaw, d: u32) -> Self {
        JumpLaw::Projected { base: Box::new(base), d }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::Exponential { rate } => positive("rate", *rate),
            JumpLaw::PointMass { r } => {
                if *r == 0.0 {
                    Err(FrogError::AtomAtZero)
                } else {
                    positive("r", *r)
                }
            }
            JumpLaw::Uniform { c } => positive("c", *c),
            JumpLaw::BrownianHit { step } => {
                positive("step", *step)?;
                if *step > 0.5 {
                    return Err(FrogError::invalid("step", "discretization step must be at most 0.5"));
                }
                Ok(())
            }
            JumpLaw::Projected { base, d } => {
                if *d == 0 {
                    return Err(FrogError::invalid("d", "dimension must be at least 1"));
                }
                base.validate()
            }
        }
    }

    /// Exact mean of the law (the Brownian hitting time of ±1 has mean 1).
    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Exponential { rate } => 1.0 / rate,
            JumpLaw::PointMass { r } => *r,
            JumpLaw::Uniform { c } => c / 2.0,
            JumpLaw::BrownianHit { .. } => 1.0,
            JumpLaw::Projected { base, d } => f64::from(*d) * base.mean(),
        }
    }

    /// Draws one waiting time; always strictly positive.
    pub fn sample_wait(&self, stream: &mut RandomStream) -> f64 {
        match self {
            JumpLaw::Exponential { rate } => -stream.uniform().ln() / rate,
            JumpLaw::PointMass { r } => *r,
            JumpLaw::Uniform { c } => stream.uniform() * c,
            JumpLaw::BrownianHit { step } => brownian_exit_time(*step, stream),
            JumpLaw::Projected { base, d } => {
                let n = geometric_trials(*d, stream);
                (0..n).map(|_| base.sample_wait(stream)).sum()
            }
        }
    }

    /// `pi((0, r])`. Exact where a closed form exists, otherwise a
    /// Monte-Carlo estimate with [`DEFAULT_MASS_SAMPLES`] draws from a fixed
    /// internal stream.
    pub fn mass_below(&self, r: f64) -> Result<MassEstimate> {
        let mut stream = RandomStream::derive(MASS_SEED, &[tag::MASS]);
        self.mass_below_with(r, DEFAULT_MASS_SAMPLES, &mut stream)
    }

    /// Like [`mass_below`](Self::mass_below) with caller-chosen Monte-Carlo
    /// budget and stream (ignored for closed-form laws).
    pub fn mass_below_with(&self, r: f64, samples: u64, stream: &mut RandomStream) -> Result<MassEstimate> {
        if !(r > 0.0) {
            return Err(FrogError::invalid("r", format!("must be positive, got {r}")));
        }
        let exact = match self {
            JumpLaw::Exponential { rate } => Some(-(-rate * r).exp_m1()),
            JumpLaw::PointMass { r: atom } => Some(if *atom <= r { 1.0 } else { 0.0 }),
            JumpLaw::Uniform { c } => Some((r / c).min(1.0)),
            JumpLaw::BrownianHit { .. } | JumpLaw::Projected { .. } => None,
        };
        if let Some(value) = exact {
            return Ok(MassEstimate { value, std_error: 0.0, samples: None });
        }
        if samples == 0 {
            return Err(FrogError::invalid("samples", "must be positive"));
        }
        let hits = (0..samples).filter(|_| self.sample_wait(stream) <= r).count();
        let p = hits as f64 / samples as f64;
        Ok(MassEstimate {
            value: p,
            std_error: (p * (1.0 - p) / samples as f64).sqrt(),
            samples: Some(samples),
        })
    }

    /// True when `pi((0, r]) = 0` can be established exactly.
    pub fn is_gapped_at(&self, r: f64) -> bool {
        match self {
            JumpLaw::PointMass { r: atom } => r < *atom,
            _ => false,
        }
    }

    /// True when `pi((0, r)) = 0` can be established exactly, so every walk
    /// needs at least `r` time units per jump.
    pub fn has_gap_below(&self, r: f64) -> bool {
        match self {
            JumpLaw::PointMass { r: atom } => r <= *atom,
            _ => false,
        }
    }
}

/// Value of `pi((0, r])` with its Monte-Carlo uncertainty (zero when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: Option<u64>,
}

impl MassEstimate {
    pub fn is_exact(&self) -> bool {
        self.samples.is_none()
    }
}

/// `g(r, m) = 2^(-m-1) * pi((0, r/m])^m`, the lower bound on `P(S_r >= m)`.
pub fn g_bound(law: &JumpLaw, r: f64, m: u64) -> Result<f64> {
    if m == 0 {
        return Err(FrogError::invalid("m", "must be at least 1"));
    }
    if !(r > 0.0) {
        return Err(FrogError::invalid("r", format!("must be positive, got {r}")));
    }
    let p = law.mass_below(r / m as f64)?.value;
    Ok(g_from_mass(p, m))
}

/// `2^(-m-1) p^m`, evaluated in log space.
pub fn g_from_mass(p: f64, m: u64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let m = m as f64;
    (m * p.ln() - (m + 1.0) * LN_2).exp()
}

fn geometric_trials(d: u32, stream: &mut RandomStream) -> u64 {
    if d <= 1 {
        return 1;
    }
    let fail = 1.0 - 1.0 / f64::from(d);
    1 + (stream.uniform().ln() / fail.ln()).floor() as u64
}

/// First exit time of `(-1, 1)` by a Gaussian random walk with time step
/// `step`. Between grid points the path is treated as a Brownian bridge, and
/// an exit is declared with the bridge's crossing probability; this removes
/// the O(sqrt(step)) overshoot bias of plain grid monitoring, leaving an
/// O(step) bias from reporting the end of the step as the exit time.
fn brownian_exit_time(step: f64, stream: &mut RandomStream) -> f64 {
    let sd = step.sqrt();
    // Skip the bridge check when the crossing probability is below e^-40.
    let near = 20.0 * step;
    let mut x: f64 = 0.0;
    let mut k: u64 = 0;
    loop {
        k += 1;
        let z: f64 = StandardNormal.sample(stream);
        let y = x + sd * z;
        if y.abs() >= 1.0 {
            return k as f64 * step;
        }
        let du = (1.0 - x) * (1.0 - y);
        let dl = (1.0 + x) * (1.0 + y);
        if du < near || dl < near {
            let p = (-2.0 * du / step).exp() + (-2.0 * dl / step).exp();
            if stream.uniform() < p {
                return k as f64 * step;
            }
        }
        x = y;
    }
}

/// Law of the number of sleeping particles initially present at a site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitLaw {
    Deterministic { k: u64 },
    /// `P(eta >= k) = (k + 1)^(-alpha)`, saturated at `cap`.
    PowerTail {
        alpha: f64,
        #[serde(default = "default_cap")]
        cap: u64,
    },
    /// `P(eta >= k) = 1 / log2(k + 2)`, saturated at `cap`.
    LogTail {
        #[serde(default = "default_cap")]
        cap: u64,
    },
    AtomList { atoms: Vec<(u64, f64)> },
}

fn default_cap() -> u64 {
    DEFAULT_CAP
}

static SATURATION_WARNED: AtomicBool = AtomicBool::new(false);

fn saturate(cap: u64) -> u64 {
    if !SATURATION_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("occupancy draw saturated at cap {cap}; further saturations are not reported");
    }
    cap
}

impl InitLaw {
    pub fn deterministic(k: u64) -> Self {
        InitLaw::Deterministic { k }
    }

    pub fn power_tail(alpha: f64, cap: u64) -> Self {
        InitLaw::PowerTail { alpha, cap }
    }

    pub fn log_tail(cap: u64) -> Self {
        InitLaw::LogTail { cap }
    }

    pub fn atom_list(atoms: Vec<(u64, f64)>) -> Self {
        InitLaw::AtomList { atoms }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitLaw::Deterministic { .. } => Ok(()),
            InitLaw::PowerTail { alpha, cap } => {
                positive("alpha", *alpha)?;
                if *cap == 0 {
                    return Err(FrogError::invalid("cap", "must be positive"));
                }
                Ok(())
            }
            InitLaw::LogTail { cap } => {
                if *cap == 0 {
                    return Err(FrogError::invalid("cap", "must be positive"));
                }
                Ok(())
            }
            InitLaw::AtomList { atoms } => {
                if atoms.is_empty() {
                    return Err(FrogError::invalid("atoms", "must not be empty"));
                }
                if let Some((_, p)) = atoms.iter().find(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
                    return Err(FrogError::invalid("atoms", format!("probability {p} is not in [0, 1]")));
                }
                let total: f64 = atoms.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(FrogError::invalid("atoms", format!("probabilities sum to {total}, not 1")));
                }
                Ok(())
            }
        }
    }

    /// Largest count a draw can return.
    pub fn cap(&self) -> u64 {
        match self {
            InitLaw::Deterministic { k } => *k,
            InitLaw::PowerTail { cap, .. } | InitLaw::LogTail { cap } => *cap,
            InitLaw::AtomList { atoms } => atoms.iter().map(|(v, _)| *v).max().unwrap_or(0),
        }
    }

    pub fn sample_eta(&self, stream: &mut RandomStream) -> u64 {
        match self {
            InitLaw::Deterministic { k } => *k,
            InitLaw::PowerTail { alpha, cap } => {
                // eta >= k  <=>  U^(-1/alpha) >= k + 1
                let x = (-stream.uniform().ln() / alpha).exp();
                if x >= *cap as f64 + 1.0 {
                    saturate(*cap)
                } else {
                    (x.floor() as u64 - 1).min(*cap)
                }
            }
            InitLaw::LogTail { cap } => {
                // eta >= k  <=>  2^(1/U) - 2 >= k
                let e = 1.0 / stream.uniform();
                if e >= 64.0 || e.exp2() - 2.0 >= *cap as f64 {
                    saturate(*cap)
                } else {
                    ((e.exp2() - 2.0).floor() as u64).min(*cap)
                }
            }
            InitLaw::AtomList { atoms } => {
                let u = stream.uniform();
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                atoms.iter().rev().find(|(_, p)| *p > 0.0).map_or(0, |(v, _)| *v)
            }
        }
    }

    /// Exact `mu([b, inf))` of the uncapped law.
    pub fn tail_mass(&self, b: u64) -> f64 {
        match self {
            InitLaw::Deterministic { k } => {
                if b <= *k {
                    1.0
                } else {
                    0.0
                }
            }
            InitLaw::PowerTail { alpha, .. } => (b as f64 + 1.0).powf(-alpha),
            InitLaw::LogTail { .. } => 1.0 / (b as f64 + 2.0).log2(),
            InitLaw::AtomList { atoms } => atoms.iter().filter(|(v, _)| *v >= b).map(|(_, p)| p).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::derive_stream;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn point_mass_is_degenerate() {
        let law = JumpLaw::point_mass(0.5);
        let mut s = derive_stream(1, &[]);
        assert!((0..100).all(|_| law.sample_wait(&mut s) == 0.5));
    }

    #[test]
    fn exponential_mean() {
        let law = JumpLaw::exponential(1.0);
        let mut s = derive_stream(11, &[1]);
        let xs: Vec<f64> = (0..100_000).map(|_| law.sample_wait(&mut s)).collect();
        let (m, _) = mean_and_se(&xs);
        assert!((m - 1.0).abs() < 0.01, "mean {m}");
        assert!(xs.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn projected_means_scale_with_dimension() {
        for d in 1..=3u32 {
            let law = JumpLaw::projected(JumpLaw::exponential(1.0), d);
            let mut s = derive_stream(5, &[i64::from(d)]);
            let xs: Vec<f64> = (0..100_000).map(|_| law.sample_wait(&mut s)).collect();
            let (m, se) = mean_and_se(&xs);
            assert!((m - f64::from(d)).abs() < 3.0 * se, "d={d} mean {m} se {se}");
        }
    }

    #[test]
    fn projected_mean_two_within_tolerance() {
        let law = JumpLaw::projected(JumpLaw::exponential(1.0), 2);
        let mut s = derive_stream(21, &[]);
        let m = (0..100_000).map(|_| law.sample_wait(&mut s)).sum::<f64>() / 1e5;
        assert!((m - 2.0).abs() < 0.02, "mean {m}");
    }

    #[test]
    fn projected_in_one_dimension_is_base() {
        let base = JumpLaw::uniform(2.0);
        let law = JumpLaw::projected(base.clone(), 1);
        let mut a = derive_stream(9, &[3]);
        let mut b = derive_stream(9, &[3]);
        for _ in 0..1000 {
            assert_eq!(law.sample_wait(&mut a), base.sample_wait(&mut b));
        }
    }

    #[test]
    fn brownian_hit_mean_is_one() {
        let law = JumpLaw::brownian_hit(1e-4);
        let mut s = derive_stream(2024, &[tag::WAIT]);
        let xs: Vec<f64> = (0..100_000).map(|_| law.sample_wait(&mut s)).collect();
        let (m, se) = mean_and_se(&xs);
        assert!((m - 1.0).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn mass_below_closed_forms() {
        let e = JumpLaw::exponential(1.0).mass_below(0.5).unwrap();
        assert!((e.value - 0.393469).abs() < 1e-6);
        assert!(e.is_exact());
        assert_eq!(JumpLaw::point_mass(0.5).mass_below(0.4).unwrap().value, 0.0);
        assert_eq!(JumpLaw::point_mass(0.5).mass_below(0.5).unwrap().value, 1.0);
        assert_eq!(JumpLaw::uniform(2.0).mass_below(0.5).unwrap().value, 0.25);
        assert_eq!(JumpLaw::uniform(2.0).mass_below(5.0).unwrap().value, 1.0);
    }

    #[test]
    fn mass_below_rejects_nonpositive_radius() {
        assert!(JumpLaw::exponential(1.0).mass_below(0.0).is_err());
        assert!(JumpLaw::exponential(1.0).mass_below(-1.0).is_err());
    }

    #[test]
    fn mass_below_monte_carlo_reports_error() {
        // projected(exponential(1), 2) is exponential(1/2) in law.
        let law = JumpLaw::projected(JumpLaw::exponential(1.0), 2);
        let est = law.mass_below(1.0).unwrap();
        let exact = 1.0 - (-0.5f64).exp();
        assert_eq!(est.samples, Some(DEFAULT_MASS_SAMPLES));
        assert!(est.std_error > 0.0);
        assert!((est.value - exact).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn g_bound_values() {
        let e = JumpLaw::exponential(1.0);
        assert!((g_bound(&e, 1.0, 1).unwrap() - 0.158030).abs() < 1e-6);
        assert!((g_bound(&e, 1.0, 2).unwrap() - 0.019355).abs() < 1e-5);
        assert_eq!(g_bound(&JumpLaw::point_mass(1.0), 1.0, 2).unwrap(), 0.0);
        assert!(g_bound(&e, 1.0, 0).is_err());
    }

    #[test]
    fn validation_names_keys() {
        let err = JumpLaw::exponential(-1.0).validate().unwrap_err();
        assert!(err.to_string().contains("rate"));
        assert_eq!(JumpLaw::point_mass(0.0).validate(), Err(FrogError::AtomAtZero));
        let err = InitLaw::atom_list(vec![(0, 0.5), (1, 0.4)]).validate().unwrap_err();
        assert!(err.to_string().contains("atoms"));
    }

    #[test]
    fn eta_draws() {
        let mut s = derive_stream(4, &[tag::ETA]);
        assert_eq!(InitLaw::deterministic(1).sample_eta(&mut s), 1);
        let law = InitLaw::atom_list(vec![(0, 0.5), (3, 0.5)]);
        let threes = (0..100_000).filter(|_| law.sample_eta(&mut s) == 3).count();
        let f = threes as f64 / 1e5;
        assert!((f - 0.5).abs() < 0.005, "freq {f}");
        let heavy = InitLaw::power_tail(0.5, 1_000_000);
        assert!((0..100_000).all(|_| heavy.sample_eta(&mut s) <= 1_000_000));
    }

    #[test]
    fn power_tail_matches_tail_mass() {
        let law = InitLaw::power_tail(0.4, 10_000);
        let mut s = derive_stream(77, &[]);
        let n = 100_000;
        let draws: Vec<u64> = (0..n).map(|_| law.sample_eta(&mut s)).collect();
        for b in [1u64, 5, 100, 10_000] {
            let f = draws.iter().filter(|&&x| x >= b).count() as f64 / n as f64;
            let p = law.tail_mass(b);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 4.0 * se + 1e-12, "b={b} f={f} p={p}");
        }
    }

    #[test]
    fn log_tail_matches_tail_mass() {
        let law = InitLaw::log_tail(1 << 20);
        let mut s = derive_stream(78, &[]);
        let n = 100_000;
        let draws: Vec<u64> = (0..n).map(|_| law.sample_eta(&mut s)).collect();
        for b in [1u64, 2, 30, 1000] {
            let f = draws.iter().filter(|&&x| x >= b).count() as f64 / n as f64;
            let p = law.tail_mass(b);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 4.0 * se, "b={b} f={f} p={p}");
        }
    }

    #[test]
    fn tail_mass_examples() {
        assert_eq!(InitLaw::deterministic(5).tail_mass(5), 1.0);
        assert_eq!(InitLaw::deterministic(5).tail_mass(6), 0.0);
        assert_eq!(InitLaw::atom_list(vec![(0, 0.5), (3, 0.5)]).tail_mass(2), 0.5);
    }

    #[test]
    fn serde_shapes() {
        let law: JumpLaw = serde_json::from_str(r#"{"kind":"exponential","rate":1.0}"#).unwrap();
        assert_eq!(law, JumpLaw::exponential(1.0));
        let law: JumpLaw =
            serde_json::from_str(r#"{"kind":"projected","d":2,"base":{"kind":"point-mass","r":0.5}}"#).unwrap();
        assert_eq!(law, JumpLaw::projected(JumpLaw::point_mass(0.5), 2));
        let mu: InitLaw = serde_json::from_str(r#"{"kind":"atom-list","atoms":[[0,0.5],[3,0.5]]}"#).unwrap();
        assert_eq!(mu, InitLaw::atom_list(vec![(0, 0.5), (3, 0.5)]));
        assert!(serde_json::from_str::<JumpLaw>(r#"{"kind":"exponential","rate":1.0,"extra":1}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn closed_form_law() -> impl Strategy<Value = JumpLaw> {
            prop_oneof![
                (0.1f64..5.0).prop_map(JumpLaw::exponential),
                (0.1f64..5.0).prop_map(JumpLaw::point_mass),
                (0.1f64..5.0).prop_map(JumpLaw::uniform),
            ]
        }

        proptest! {
            #[test]
            fn mass_below_nondecreasing(law in closed_form_law(), r in 0.01f64..10.0, dr in 0.0f64..5.0) {
                let a = law.mass_below(r).unwrap().value;
                let b = law.mass_below(r + dr).unwrap().value;
                prop_assert!(a <= b);
            }

            #[test]
            fn g_bound_at_most_half_power(law in closed_form_law(), r in 0.01f64..10.0, m in 1u64..30) {
                let g = g_bound(&law, r, m).unwrap();
                prop_assert!(g <= 0.5f64.powi(m as i32 + 1) * (1.0 + 1e-12));
            }

            #[test]
            fn tail_mass_nonincreasing(alpha in 0.1f64..3.0, b in 0u64..1_000_000, db in 0u64..1000) {
                for law in [InitLaw::power_tail(alpha, 1 << 20), InitLaw::log_tail(1 << 20)] {
                    prop_assert!(law.tail_mass(b + db) <= law.tail_mass(b));
                }
            }

            #[test]
            fn samples_reproducible(seed in any::<u64>(), label in any::<i64>()) {
                let law = JumpLaw::projected(JumpLaw::uniform(1.0), 3);
                let mut a = derive_stream(seed, &[label]);
                let mut b = derive_stream(seed, &[label]);
                for _ in 0..20 {
                    prop_assert_eq!(law.sample_wait(&mut a), law.sample_wait(&mut b));
                }
            }
        }
    }
}
