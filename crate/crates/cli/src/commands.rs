//! The eight subcommands.
//!
//! Each command reads its knobs from the shared [`Config`], writes CSV and
//! field artifacts through [`Artifacts`], and returns the manifest's
//! `outcome` block plus the desired exit status.  Common sections:
//!
//! * `grid.*` — `d` (2 or 3), `n` (power of two >= 8), `period`.
//! * `besov.*` — the `(s, p, r)` triple used for reported norms.
//! * `physics.*` — thermodynamic preset and conductivity closure.
//! * `monitor.*` — continuation thresholds, `sigma`, sample stride.
//! * `solver.*` — time step and horizons.
//! * `lifespan.*` — constants of the lower-bound formula.
//! * `data.*` — initial-data profiles (see [`crate::profiles`]).
//! * `probe.*` — inequality/defect ensemble sizes.

use std::f64::consts::PI;
use std::sync::Arc;

use serde_json::{json, Value};

use bzm_core::besov::{besov_norm, lebesgue_norm};
use bzm_core::dyadic::dyadic_block;
use bzm_core::model::{lifespan_lower_bound, system_residual};
use bzm_core::paradiff::{paraproduct, probe_ensemble, remainder, ProbeParams, INEQUALITY_IDS};
use bzm_core::sampling::{random_scalar, BandSpec};
use bzm_core::solver::{
    continuation_monitor, evolve, lifespan_study, picard_driver, Forcing, MonitorConfig,
    MonitorTrigger, StopReason,
};
use bzm_core::{BesovParams, Field, Grid, KappaSpec, LifespanParams, PhysicalParams, Trajectory};

use crate::artifacts::{blank, num, Artifacts};
use crate::config::Config;
use crate::field_io::write_field;
use crate::profiles;
use crate::{CliError, Result, RunStatus};

/// Dispatch a subcommand by name.
pub fn run(
    command: &str,
    cfg: &Config,
    art: &Artifacts,
    seed: u64,
) -> Result<(Value, RunStatus)> {
    match command {
        "decompose" => decompose(cfg, art, seed),
        "norm" => norm(cfg, art, seed),
        "bony-check" => bony_check(cfg, art, seed),
        "inequality-probe" => inequality_probe(cfg, art, seed),
        "solve" => solve(cfg, art, seed),
        "picard" => picard(cfg, art, seed),
        "lifespan" => lifespan(cfg, art, seed),
        "continuation" => continuation(cfg, art, seed),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}

// ---------------------------------------------------------------- shared

fn grid_from(cfg: &Config) -> Result<Arc<Grid>> {
    let d: usize = cfg.parse("grid.d", 2)?;
    let n: usize = cfg.parse("grid.n", 32)?;
    let period: f64 = cfg.parse("grid.period", 2.0 * PI)?;
    Ok(Grid::new(d, n, period)?)
}

fn besov_from(cfg: &Config) -> Result<BesovParams> {
    let s: f64 = cfg.parse("besov.s", 1.0)?;
    let p: f64 = cfg.parse("besov.p", 2.0)?;
    let r: f64 = cfg.parse("besov.r", 1.0)?;
    Ok(BesovParams::new(s, p, r)?)
}

fn physics_from(cfg: &Config) -> Result<PhysicalParams> {
    let kappa0: f64 = cfg.parse("physics.kappa.kappa0", 0.4)?;
    let kappa = match cfg.string("physics.kappa.model", "fickian").as_str() {
        "constant" => KappaSpec::Constant { kappa0 },
        "fickian" => KappaSpec::Fickian { kappa0 },
        "power" => {
            let m: f64 = cfg.parse("physics.kappa.m", 1.0)?;
            KappaSpec::Power { kappa0, m }
        }
        other => {
            return Err(CliError::Config(format!(
                "physics.kappa.model: expected constant|fickian|power, got `{other}`"
            )))
        }
    };
    match cfg.string("physics.preset", "reference").as_str() {
        "reference" => Ok(PhysicalParams::reference(kappa)),
        "ideal-gas" => {
            let gamma: f64 = cfg.parse("physics.gamma", 1.4)?;
            let p0: f64 = cfg.parse("physics.p0", 1.0)?;
            let r_gas: f64 = cfg.parse("physics.r_gas", 1.0)?;
            Ok(PhysicalParams::ideal_gas(gamma, p0, r_gas, kappa)?)
        }
        other => Err(CliError::Config(format!(
            "physics.preset: expected reference|ideal-gas, got `{other}`"
        ))),
    }
}

fn lifespan_from(cfg: &Config) -> Result<LifespanParams> {
    let l: f64 = cfg.parse("lifespan.l", 1.0)?;
    let ell: f64 = cfg.parse("lifespan.ell", 7.0)?;
    let delta: f64 = cfg.parse("lifespan.delta", 2.0)?;
    Ok(LifespanParams::new(l, ell, delta)?)
}

fn monitor_from(cfg: &Config) -> Result<MonitorConfig> {
    let defaults = MonitorConfig::default();
    Ok(MonitorConfig {
        sigma: cfg.parse("monitor.sigma", defaults.sigma)?,
        sup_threshold: cfg.parse("monitor.sup_threshold", f64::INFINITY)?,
        integral_threshold: cfg.parse("monitor.integral_threshold", f64::INFINITY)?,
        stride: cfg.parse("monitor.stride", 1usize)?,
        params: defaults.params,
        lifespan: lifespan_from(cfg)?,
    })
}

fn trigger_json(trigger: &MonitorTrigger) -> Value {
    json!({
        "quantity": trigger.quantity,
        "t": trigger.t,
        "value": trigger.value,
        "threshold": trigger.threshold,
    })
}

fn stop_json(stop: &StopReason) -> Value {
    match stop {
        StopReason::Completed => json!("completed"),
        StopReason::MonitorTriggered { quantity, t, value, threshold } => json!({
            "quantity": quantity,
            "t": t,
            "value": value,
            "threshold": threshold,
        }),
    }
}

// --------------------------------------------------------------- commands

/// Split the configured field into dyadic blocks; report per-block norms.
fn decompose(cfg: &Config, art: &Artifacts, seed: u64) -> Result<(Value, RunStatus)> {
    let grid = grid_from(cfg)?;
    let params = besov_from(cfg)?;
    let field = profiles::analysis_field(cfg, &grid, seed)?;
    write_field(&art.path("field.bzmf"), &field)?;

    let mut csv = art.csv("blocks.csv", &["j", "lp_norm", "weighted_norm"])?;
    let mut rebuilt = Field::zeros(&grid, field.components());
    let mut blocks = 0usize;
    for j in grid.block_range() {
        let block = dyadic_block(&field, j)?;
        let lp = lebesgue_norm(&block, params.p)?;
        let weighted = (params.s * j as f64).exp2() * lp;
        csv.row(&[j.to_string(), num(lp), num(weighted)])?;
        rebuilt = &rebuilt + &block;
        blocks += 1;
    }
    csv.finish()?;

    let defect = (&rebuilt - &field).l2_norm() / field.l2_norm().max(1e-300);
    let total = besov_norm(&field, &params)?;
    let outcome = json!({
        "besov_norm": total,
        "blocks": blocks,
        "reconstruction_defect": defect,
    });
    Ok((outcome, RunStatus::Clean))
}

/// Report the configured field's norms at the configured triple.
fn norm(cfg: &Config, art: &Artifacts, seed: u64) -> Result<(Value, RunStatus)> {
    let grid = grid_from(cfg)?;
    let params = besov_from(cfg)?;
    let field = profiles::analysis_field(cfg, &grid, seed)?;

    let besov = besov_norm(&field, &params)?;
    let lebesgue = lebesgue_norm(&field, params.p)?;
    let l2 = field.l2_norm();
    let max_abs = field.max_abs();

    let mut csv = art.csv(
        "norms.csv",
        &["s", "p", "r", "besov_norm", "lebesgue_norm", "l2_norm", "max_abs"],
    )?;
    csv.row(&[
        num(params.s),
        num(params.p),
        num(params.r),
        num(besov),
        num(lebesgue),
        num(l2),
        num(max_abs),
    ])?;
    csv.finish()?;

    let outcome = json!({
        "besov_norm": besov,
        "lebesgue_norm": lebesgue,
        "l2_norm": l2,
        "max_abs": max_abs,
    });
    Ok((outcome, RunStatus::Clean))
}

/// Measure the paraproduct + remainder reconstruction defect on random
/// pairs; the defect is relative to the dealiased product's `L^2` size.
fn bony_check(cfg: &Config, art: &Artifacts, seed: u64) -> Result<(Value, RunStatus)> {
    let grid = grid_from(cfg)?;
    let samples: usize = cfg.parse("probe.samples", 16)?;
    if samples == 0 {
        return Err(CliError::Config("probe.samples: need at least one".into()));
    }
    let amp: f64 = cfg.parse("probe.amplitude", 1.0)?;
    let band = BandSpec::broadband(amp);

    let mut csv = art.csv("defects.csv", &["sample", "relative_defect"])?;
    let mut max_defect = 0.0f64;
    for i in 0..samples {
        let u = random_scalar(&grid, seed.wrapping_add(2 * i as u64), &band);
        let v = random_scalar(&grid, seed.wrapping_add(2 * i as u64 + 1), &band);
        let product = u.product(&v)?;
        let rebuilt = &(&paraproduct(&u, &v)? + &paraproduct(&v, &u)?) + &remainder(&u, &v)?;
        let defect = (&rebuilt - &product).l2_norm() / product.l2_norm().max(1e-300);
        csv.row(&[i.to_string(), num(defect)])?;
        max_defect = max_defect.max(defect);
    }
    csv.finish()?;

    Ok((json!({ "samples": samples, "max_defect": max_defect }), RunStatus::Clean))
}

/// Measure inequality ratios over a seeded random ensemble.
fn inequality_probe(cfg: &Config, art: &Artifacts, seed: u64) -> Result<(Value, RunStatus)> {
    let grid = grid_from(cfg)?;
    let samples: usize = cfg.parse("probe.samples", 32)?;
    let requested = cfg.string("probe.id", "all");
    let ids: Vec<&str> = if requested == "all" {
        INEQUALITY_IDS.to_vec()
    } else if INEQUALITY_IDS.contains(&requested.as_str()) {
        vec![requested.as_str()]
    } else {
        return Err(CliError::Config(format!(
            "probe.id: unknown inequality `{requested}` (known: {})",
            INEQUALITY_IDS.join(", ")
        )));
    };
    let triple = besov_from(cfg)?;

    let mut csv = art.csv("ratios.csv", &["inequality", "sample", "ratio"])?;
    let mut summaries = serde_json::Map::new();
    for id in &ids {
        let params = ProbeParams::balanced(id, triple.s, triple.p, triple.r)?;
        let report = probe_ensemble(id, &grid, &params, seed, samples)?;
        for (i, ratio) in report.ratios.iter().enumerate() {
            csv.row(&[(*id).to_string(), i.to_string(), num(*ratio)])?;
        }
        summaries.insert(
            (*id).to_string(),
            json!({
                "samples": report.samples,
                "max_ratio": report.max_ratio,
                "mean_ratio": report.mean_ratio,
            }),
        );
    }
    csv.finish()?;

    let summary = Value::Object(summaries);
    std::fs::write(
        art.path("probes.json"),
        format!("{:#}\n", summary),
    )?;
    Ok((summary, RunStatus::Clean))
}

/// Columns shared by the `solve` series export.
const SERIES_COLUMNS: [&str; 16] = [
    "t",
    "rho_deviation_norm",
    "u_norm",
    "grad_pi_l2",
    "continuation_sup",
    "continuation_integral",
    "continuation_total",
    "growth_gauge",
    "transport_budget",
    "lambda_star",
    "mass_defect",
    "div_defect",
    "density_residual",
    "momentum_residual",
    "density_residual_rel",
    "momentum_residual_rel",
];

/// Write the per-sample series of a finished run, including centered-time
/// equation residuals at interior samples (blank cells at the endpoints).
fn write_series(
    art: &Artifacts,
    traj: &Trajectory,
    params: &PhysicalParams,
    besov: &BesovParams,
) -> Result<()> {
    let grid = traj.grid().clone();
    let one = Field::constant(&grid, 1.0);
    let rho = traj.channel("rho")?;
    let u = traj.channel("u")?;
    let grad_pi = traj.channel("grad_pi")?;
    let monitor = |name: &str, i: usize| -> String {
        traj.monitor(name).map(|s| num(s[i])).unwrap_or_default()
    };

    let mut csv = art.csv("series.csv", &SERIES_COLUMNS)?;
    for (i, &t) in traj.times().iter().enumerate() {
        let interior = traj.len() >= 3 && i > 0 && i + 1 < traj.len();
        let residual = if interior {
            Some(system_residual(traj, i, params)?)
        } else {
            None
        };
        csv.row(&[
            num(t),
            num(besov_norm(&(&rho[i] - &one), besov)?),
            num(besov_norm(&u[i], besov)?),
            num(grad_pi[i].l2_norm()),
            monitor("continuation_sup", i),
            monitor("continuation_integral", i),
            monitor("continuation_total", i),
            monitor("growth_gauge", i),
            monitor("transport_budget", i),
            monitor("lambda_star", i),
            monitor("mass_defect", i),
            monitor("div_defect", i),
            residual.as_ref().map(|r| num(r.density)).unwrap_or_else(blank),
            residual.as_ref().map(|r| num(r.momentum_lambda)).unwrap_or_else(blank),
            residual.as_ref().map(|r| num(r.relative_density())).unwrap_or_else(blank),
            residual.as_ref().map(|r| num(r.relative_momentum())).unwrap_or_else(blank),
        ])?;
    }
    csv.finish()
}

/// Advance the system over the configured horizon and export the series.
fn solve(cfg: &Config, art: &Artifacts, seed: u64) -> Result<(Value, RunStatus)> {
    let grid = grid_from(cfg)?;
    let params = physics_from(cfg)?;
    let besov = besov_from(cfg)?;
    let monitor = monitor_from(cfg)?;
    let t_end: f64 = cfg.parse("solver.t_end", 0.5)?;
    let dt: f64 = cfg.parse("solver.dt", 0.01)?;
    let rho0 = profiles::density(cfg, &grid, seed)?;
    let u0 = profiles::velocity(cfg, &grid, seed)?;

    let report = evolve(&rho0, &u0, &params, t_end, dt, &monitor, &Forcing::none())?;
    let traj = &report.trajectory;
    write_series(art, traj, &params, &besov)?;

    let last = traj.len() - 1;
    write_field(&art.path("rho_final.bzmf"), traj.field("rho", last)?)?;
    write_field(&art.path("u_final.bzmf"), traj.field("u", last)?)?;
    write_field(&art.path("grad_pi_final.bzmf"), traj.field("grad_pi", last)?)?;

    let rho_final = traj.field("rho", last)?.values(0);
    let outcome = json!({
        "stop": stop_json(&report.stop),
        "samples": traj.len(),
        "final_time": traj.horizon(),
        "rho_min": rho_final.iter().cloned().fold(f64::INFINITY, f64::min),
        "rho_max": rho_final.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    });
    let status = if report.stop.is_triggered() {
        RunStatus::MonitorStopped
    } else {
        RunStatus::Clean
    };
    Ok((outcome, status))
}

/// Run the staged linearized iteration and export its per-iteration trail.
fn picard(cfg: &Config, art: &Artifacts, seed: u64) -> Result<(Value, RunStatus)> {
    let grid = grid_from(cfg)?;
    let params = physics_from(cfg)?;
    let t_star: f64 = cfg.parse("solver.t_star", 0.1)?;
    let n_max: usize = cfg.parse("solver.iterations", 8)?;
    let dt: f64 = cfg.parse("solver.dt", 0.01)?;
    let rho0 = profiles::density(cfg, &grid, seed)?;
    let u0 = profiles::velocity(cfg, &grid, seed)?;

    let outcome = picard_driver(&rho0, &u0, &params, t_star, n_max, dt)?;

    let mut csv = art.csv(
        "iterations.csv",
        &[
            "n",
            "b_n",
            "delta_rho_sup",
            "delta_rho_diffusion",
            "delta_u_sup",
            "delta_grad_pi",
            "delta_grad_pi_energy",
            "rho_norm",
            "rho_smoothing",
            "u_norm",
            "rho_low_defect",
            "wall_seconds",
        ],
    )?;
    for rec in &outcome.records {
        csv.row(&[
            rec.n.to_string(),
            num(rec.b_n),
            num(rec.delta_rho_sup),
            num(rec.delta_rho_diffusion),
            num(rec.delta_u_sup),
            num(rec.delta_grad_pi),
            num(rec.delta_grad_pi_energy),
            num(rec.rho_norm),
            num(rec.rho_smoothing),
            num(rec.u_norm),
            num(rec.rho_low_defect),
            num(rec.wall_seconds),
        ])?;
    }
    csv.finish()?;

    let last = outcome.trajectory.len() - 1;
    write_field(&art.path("rho_final.bzmf"), outcome.trajectory.field("rho", last)?)?;
    write_field(&art.path("u_final.bzmf"), outcome.trajectory.field("u", last)?)?;

    let summary = json!({
        "iterations": outcome.records.len(),
        "converged": outcome.converged,
        "stagnated": outcome.stagnated,
        "final_b": outcome.records.last().map(|r| r.b_n),
    });
    Ok((summary, RunStatus::Clean))
}

/// Evaluate the lifespan lower bound and track the study windows.
fn lifespan(cfg: &Config, art: &Artifacts, seed: u64) -> Result<(Value, RunStatus)> {
    let grid = grid_from(cfg)?;
    let params = physics_from(cfg)?;
    let monitor = monitor_from(cfg)?;
    let lp = monitor.lifespan.clone();
    let dt: f64 = cfg.parse("solver.dt", 0.01)?;
    let horizon: f64 = cfg.parse("lifespan.horizon", 0.5)?;
    let rho0 = profiles::density(cfg, &grid, seed)?;
    let u0 = profiles::velocity(cfg, &grid, seed)?;

    let report = lifespan_study(&rho0, &u0, &params, &lp, &monitor, dt, horizon)?;

    let mut csv = art.csv(
        "study.csv",
        &["t", "r_window", "smoothing_integral", "u_window", "growth_factor"],
    )?;
    for (i, &t) in report.times.iter().enumerate() {
        csv.row(&[
            num(t),
            num(report.r_series[i]),
            num(report.s_series[i]),
            num(report.u_series[i]),
            num(report.e_series[i]),
        ])?;
    }
    csv.finish()?;

    let mut gains = art.csv("gains.csv", &["block", "constant"])?;
    for gain in &report.gain {
        gains.row(&[gain.j.to_string(), num(gain.constant)])?;
    }
    gains.finish()?;

    let outcome = json!({
        "u0_norm": report.u0_norm,
        "r0_norm": report.r0_norm,
        "lower_bound": report.lower_bound,
        "formula_check": lifespan_lower_bound(report.u0_norm, report.r0_norm, &lp),
        "t_r": report.t_r,
        "t_r_crossed": report.t_r_crossed,
        "t_u": report.t_u,
        "t_u_crossed": report.t_u_crossed,
        "stayed_regular": report.stayed_regular,
        "stop": stop_json(&report.stop),
    });
    let status = if report.stop.is_triggered() {
        RunStatus::MonitorStopped
    } else {
        RunStatus::Clean
    };
    Ok((outcome, status))
}

/// Run the system, then re-evaluate the continuation quantities offline
/// over the stored trajectory and export them.
fn continuation(cfg: &Config, art: &Artifacts, seed: u64) -> Result<(Value, RunStatus)> {
    let grid = grid_from(cfg)?;
    let params = physics_from(cfg)?;
    let monitor = monitor_from(cfg)?;
    let t_end: f64 = cfg.parse("solver.t_end", 0.5)?;
    let dt: f64 = cfg.parse("solver.dt", 0.01)?;
    let rho0 = profiles::density(cfg, &grid, seed)?;
    let u0 = profiles::velocity(cfg, &grid, seed)?;

    let run = evolve(&rho0, &u0, &params, t_end, dt, &monitor, &Forcing::none())?;
    let report = continuation_monitor(&run.trajectory, &monitor, &params)?;

    let mut csv = art.csv(
        "monitor.csv",
        &["t", "sup", "integral", "total", "growth_gauge", "transport_budget", "lambda_star"],
    )?;
    for (i, &t) in report.times.iter().enumerate() {
        csv.row(&[
            num(t),
            num(report.sup_series[i]),
            num(report.integral_series[i]),
            num(report.total_series[i]),
            num(report.k_series[i]),
            num(report.w_series[i]),
            num(report.lambda_star_series[i]),
        ])?;
    }
    csv.finish()?;

    let outcome = json!({
        "stop": stop_json(&run.stop),
        "triggered": report.triggered.as_ref().map(trigger_json),
        "samples": report.times.len(),
        "final_total": report.total_series.last(),
    });
    let triggered = report.triggered.is_some() || run.stop.is_triggered();
    let status = if triggered { RunStatus::MonitorStopped } else { RunStatus::Clean };
    Ok((outcome, status))
}
