use std::path::PathBuf;

use frog_core::analysis::{
    explosion_proxy, growth_curve, q_infinity_lower_bound, verify_lapidation, verify_step_inequalities, BoundVerdict,
};
use frog_core::construction::{build_schedule, desk_mu, desk_preset, run_construction, summable_preset, Schedule};
use frog_core::engine::{couple_projection, couple_runs, simulate, CouplingReport, DEFAULT_T_MAX};
use frog_core::stream::{derive_stream, tag};
use frog_core::JumpLaw;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, SchedulePreset};
use crate::{output_dir, CliError, Command};

/// Where a run wrote its files and whether every verification passed.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub passed: bool,
}

/// File contents produced by a subcommand, written only once it succeeds.
struct Artifacts {
    csv: Vec<u8>,
    summary: String,
    passed: bool,
}

impl Artifacts {
    fn new(csv: Vec<u8>, summary: &impl Serialize, passed: bool) -> Result<Self, CliError> {
        let mut text = serde_json::to_string_pretty(summary).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push('\n');
        Ok(Self { csv, summary: text, passed })
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn scaled(mut v: BoundVerdict, scale: f64) -> BoundVerdict {
    v.analytic_bound *= scale;
    v
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs `command` with `cfg`. `bound_scale` multiplies every analytic bound
/// before verdicts are formed; it exists to exercise the failure path.
pub fn dispatch(command: Command, cfg: &ExperimentConfig, bound_scale: f64) -> Result<Outcome, CliError> {
    let art = match command {
        Command::Simulate => run_simulate(cfg)?,
        Command::Couple => run_couple(cfg)?,
        Command::VerifyBound => run_verify(cfg, bound_scale)?,
        Command::Construct => run_construct(cfg, bound_scale)?,
        Command::Growth => run_growth(cfg)?,
        Command::Explosion => run_explosion(cfg)?,
    };
    let dir = output_dir(&cfg.out, command, cfg.seed)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    std::fs::write(dir.join("result.csv"), art.csv)?;
    std::fs::write(dir.join("summary.json"), art.summary)?;
    log::info!("{} -> {}", command.name(), dir.display());
    Ok(Outcome { dir, passed: art.passed })
}

fn run_simulate(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let result = simulate(cfg.sim_config()?)?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    Artifacts::new(csv, &result.summary(), true)
}

fn run_couple(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let base = cfg.sim_config()?;
    let params = &cfg.couple;
    let horizon = params.horizon.or(cfg.stop.t_max).unwrap_or(DEFAULT_T_MAX);
    let mut reports: Vec<(u64, CouplingReport)> = Vec::with_capacity(cfg.replicas);
    for i in 0..cfg.replicas {
        let seed = cfg.seed.wrapping_add(i as u64);
        let sim = base.clone().with_seed(seed);
        let report = if params.projection {
            couple_projection(&sim, horizon)?
        } else {
            couple_runs(&sim, &params.policy_a, &params.policy_b, horizon)?
        };
        reports.push((seed, report));
    }
    let mut w = csv_writer();
    w.write_record(["seed", "subset_holds", "identical", "visited_a", "visited_b", "violation_time", "violation_site"])?;
    for (seed, r) in &reports {
        let site = r.first_violation.as_ref().map(|v| v.site.iter().map(i64::to_string).collect::<Vec<_>>().join(";"));
        w.write_record(&[
            seed.to_string(),
            r.subset_holds.to_string(),
            r.identical.to_string(),
            r.visited_a.to_string(),
            r.visited_b.to_string(),
            opt(r.first_violation.as_ref().map(|v| v.time)),
            site.unwrap_or_default(),
        ])?;
    }
    let all = reports.iter().all(|(_, r)| r.subset_holds);
    Artifacts::new(
        finish(w)?,
        &json!({
            "horizon": horizon,
            "projection": params.projection,
            "runs": reports.len(),
            "all_subset": all,
            "identical": reports.iter().filter(|(_, r)| r.identical).count(),
        }),
        all,
    )
}

fn law_label(law: &JumpLaw) -> String {
    serde_json::to_string(law).unwrap_or_default()
}

fn run_verify(cfg: &ExperimentConfig, scale: f64) -> Result<Artifacts, CliError> {
    let p = &cfg.verify_bound;
    if p.laws.is_empty() || p.radii.is_empty() || p.thresholds.is_empty() {
        return Err(CliError::Usage("verify_bound: laws, radii and thresholds must be nonempty".into()));
    }
    let mut cells = Vec::new();
    let mut index = 0i64;
    for law in &p.laws {
        for &r in &p.radii {
            for &m in &p.thresholds {
                let mut stream = derive_stream(cfg.seed, &[tag::TRIAL, index]);
                index += 1;
                let v = scaled(verify_lapidation(law, r, m, p.samples, &mut stream)?, scale);
                cells.push((law, r, m, v));
            }
        }
    }
    let mut w = csv_writer();
    w.write_record(["law", "r", "m", "estimate", "standard_error", "analytic_bound", "samples", "holds"])?;
    for (law, r, m, v) in &cells {
        w.write_record(&[
            law_label(law),
            r.to_string(),
            m.to_string(),
            v.estimate.to_string(),
            v.standard_error.to_string(),
            v.analytic_bound.to_string(),
            v.samples.to_string(),
            v.holds().to_string(),
        ])?;
    }
    let failed = cells.iter().filter(|c| !c.3.holds()).count();
    Artifacts::new(
        finish(w)?,
        &json!({
            "cells": cells.len(),
            "failed": failed,
            "all_hold": failed == 0,
            "samples": p.samples,
            "verdicts": cells.iter().map(|(law, r, m, v)| json!({"law": law, "r": r, "m": m, "verdict": v})).collect::<Vec<_>>(),
        }),
        failed == 0,
    )
}

fn schedule_for(cfg: &ExperimentConfig) -> Result<Schedule, CliError> {
    let p = &cfg.construct;
    let mut schedule = match p.preset {
        SchedulePreset::Desk => desk_preset(p.n_max, p.cap)?,
        SchedulePreset::Summable => summable_preset(p.n_max)?,
        SchedulePreset::Custom => {
            let pi = cfg.pi.clone().unwrap_or_else(|| JumpLaw::exponential(1.0));
            let mu = cfg.mu.clone().unwrap_or_else(|| desk_mu(p.cap));
            build_schedule(&p.targets, &p.times, &pi, &mu, p.cap)?
        }
    };
    schedule.cap = p.cap;
    Ok(schedule)
}

fn run_construct(cfg: &ExperimentConfig, scale: f64) -> Result<Artifacts, CliError> {
    let p = &cfg.construct;
    let schedule = schedule_for(cfg)?;
    let mu = cfg.mu.clone().unwrap_or_else(|| desk_mu(p.cap));
    let mut records = Vec::with_capacity(cfg.replicas);
    for i in 0..cfg.replicas {
        records.push(run_construction(&schedule, &mu, cfg.seed.wrapping_add(i as u64), p.m_max)?);
    }
    let mut w = csv_writer();
    w.write_record([
        "seed", "stage", "start_site", "start_time", "kappa", "sigma", "sigma_censored", "next_start", "chain",
    ])?;
    for rec in &records {
        for st in &rec.stages {
            let chain = st.chain.iter().map(|x| x.map_or("inf".to_string(), |v| v.to_string())).collect::<Vec<_>>();
            w.write_record(&[
                rec.seed.to_string(),
                st.stage.to_string(),
                opt(st.chain[0]),
                st.start_time.to_string(),
                opt(st.kappa),
                opt(st.sigma),
                st.sigma_censored.to_string(),
                opt(st.next_start),
                chain.join(";"),
            ])?;
        }
    }
    let csv = finish(w)?;
    let mut steps = Vec::new();
    if p.step_samples > 0 {
        for n in 1..=schedule.n_max {
            let (d, win) = verify_step_inequalities(&schedule, &mu, n, p.step_samples, cfg.seed)?;
            steps.push((n, scaled(d, scale), scaled(win, scale)));
        }
    }
    let first_steps = records.iter().filter(|r| r.stages[0].success_flags.first() == Some(&true)).count();
    let p_q1 = first_steps as f64 / records.len() as f64;
    let q_inf = q_infinity_lower_bound(p_q1, schedule.n_max)?;
    let passed = steps.iter().all(|(_, d, w)| d.holds() && w.holds());
    Artifacts::new(
        csv,
        &json!({
            "runs": records.len(),
            "completed": records.iter().filter(|r| r.succeeded_stage.is_some()).count(),
            "p_q1": p_q1,
            "q_infinity": q_inf,
            "steps_hold": passed,
            "steps": steps.iter().map(|(n, d, w)| json!({"n": n, "displacement": d, "window": w})).collect::<Vec<_>>(),
            "schedule": schedule,
        }),
        passed,
    )
}

fn run_growth(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let report = growth_curve(&cfg.sim_config()?, &cfg.growth.times, cfg.replicas)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    Artifacts::new(csv, &report, true)
}

fn run_explosion(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let table = explosion_proxy(&cfg.sim_config()?, &cfg.explosion.thresholds, cfg.replicas)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    Artifacts::new(csv, &table, true)
}
