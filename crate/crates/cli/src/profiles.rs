//! Initial-data construction from configuration profiles.
//!
//! Three channels are configured independently: a generic analysis field
//! (`data.field.*`, used by the decomposition/norm commands), the density
//! (`data.rho.*`), and the velocity (`data.u.*`).  Each channel picks a
//! `profile` plus profile-specific knobs; random profiles derive their
//! stream from the run seed with a fixed per-channel offset so that one
//! seed pins the whole experiment.
//!
//! Coordinates are scaled to the grid period: a mode-`m` profile along
//! axis `a` oscillates as `cos(2 pi m x_a / period)`, so every profile is
//! periodic on any admissible grid.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use bzm_core::sampling::{random_scalar, random_solenoidal, BandSpec};
use bzm_core::{Field, Grid};

use crate::config::Config;
use crate::field_io::read_field_on;
use crate::{CliError, Result};

/// Seed offsets keeping the three data channels on distinct streams.
const FIELD_STREAM: u64 = 0;
const DENSITY_STREAM: u64 = 1;
const VELOCITY_STREAM: u64 = 2;

/// Scalar field for the analysis commands (`data.field.*`).
///
/// Profiles: `random-broadband` (default), `random-smooth`, `cos-mode`,
/// `constant`, `file`.
pub fn analysis_field(cfg: &Config, grid: &Arc<Grid>, seed: u64) -> Result<Field> {
    let prefix = "data.field";
    let profile = cfg.string(&key(prefix, "profile"), "random-broadband");
    match profile.as_str() {
        "random-broadband" => {
            let amp = cfg.parse(&key(prefix, "amplitude"), 1.0)?;
            Ok(random_scalar(grid, seed.wrapping_add(FIELD_STREAM), &BandSpec::broadband(amp)))
        }
        "random-smooth" => {
            let amp = cfg.parse(&key(prefix, "amplitude"), 1.0)?;
            Ok(random_scalar(grid, seed.wrapping_add(FIELD_STREAM), &BandSpec::smooth(amp)))
        }
        "cos-mode" => cos_mode(cfg, prefix, grid, 0.0),
        "constant" => {
            let value = cfg.parse(&key(prefix, "value"), 1.0)?;
            Ok(Field::constant(grid, value))
        }
        "file" => from_file(cfg, prefix, grid, 1),
        other => Err(bad_profile(prefix, other)),
    }
}

/// Density field (`data.rho.*`); always scalar and offset from 1.
///
/// Profiles: `constant` (default, value 1), `cos-mode` (1 + oscillation),
/// `random-smooth`, `random-broadband` (1 + zero-mean draw), `file`.
pub fn density(cfg: &Config, grid: &Arc<Grid>, seed: u64) -> Result<Field> {
    let prefix = "data.rho";
    let profile = cfg.string(&key(prefix, "profile"), "constant");
    let field = match profile.as_str() {
        "constant" => {
            let value = cfg.parse(&key(prefix, "value"), 1.0)?;
            Field::constant(grid, value)
        }
        "cos-mode" => cos_mode(cfg, prefix, grid, 1.0)?,
        "random-smooth" => {
            let amp = cfg.parse(&key(prefix, "amplitude"), 0.05)?;
            let draw =
                random_scalar(grid, seed.wrapping_add(DENSITY_STREAM), &BandSpec::smooth(amp));
            &Field::constant(grid, 1.0) + &draw
        }
        "random-broadband" => {
            let amp = cfg.parse(&key(prefix, "amplitude"), 0.05)?;
            let draw =
                random_scalar(grid, seed.wrapping_add(DENSITY_STREAM), &BandSpec::broadband(amp));
            &Field::constant(grid, 1.0) + &draw
        }
        "file" => from_file(cfg, prefix, grid, 1)?,
        other => return Err(bad_profile(prefix, other)),
    };
    if field.values(0).iter().any(|v| *v <= 0.0) {
        return Err(CliError::Config(format!(
            "{prefix}: density profile is not strictly positive (min {})",
            field.values(0).iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }
    Ok(field)
}

/// Divergence-free velocity field (`data.u.*`).
///
/// Profiles: `zero` (default), `taylor-green`, `random-solenoidal`, `file`.
pub fn velocity(cfg: &Config, grid: &Arc<Grid>, seed: u64) -> Result<Field> {
    let prefix = "data.u";
    let profile = cfg.string(&key(prefix, "profile"), "zero");
    match profile.as_str() {
        "zero" => Ok(Field::zeros(grid, grid.dim())),
        "taylor-green" => {
            let amp = cfg.parse(&key(prefix, "amplitude"), 0.1)?;
            Ok(taylor_green(grid, amp))
        }
        "random-solenoidal" => {
            let amp = cfg.parse(&key(prefix, "amplitude"), 0.05)?;
            let band = band_spec(cfg, prefix, amp, "smooth")?;
            Ok(random_solenoidal(grid, seed.wrapping_add(VELOCITY_STREAM), &band))
        }
        "file" => from_file(cfg, prefix, grid, grid.dim()),
        other => Err(bad_profile(prefix, other)),
    }
}

fn key(prefix: &str, name: &str) -> String {
    format!("{prefix}.{name}")
}

fn bad_profile(prefix: &str, got: &str) -> CliError {
    CliError::Config(format!("{prefix}.profile: unknown profile `{got}`"))
}

fn band_spec(cfg: &Config, prefix: &str, amp: f64, default: &str) -> Result<BandSpec> {
    match cfg.string(&key(prefix, "band"), default).as_str() {
        "smooth" => Ok(BandSpec::smooth(amp)),
        "broadband" => Ok(BandSpec::broadband(amp)),
        other => Err(CliError::Config(format!(
            "{prefix}.band: expected `smooth` or `broadband`, got `{other}`"
        ))),
    }
}

/// `base + amplitude * cos(2 pi mode x_axis / period)` sampled on the grid.
fn cos_mode(cfg: &Config, prefix: &str, grid: &Arc<Grid>, base: f64) -> Result<Field> {
    let amp: f64 = cfg.parse(&key(prefix, "amplitude"), 0.1)?;
    let mode: i64 = cfg.parse(&key(prefix, "mode"), 1)?;
    let axis: usize = cfg.parse(&key(prefix, "axis"), 0)?;
    if mode < 1 {
        return Err(CliError::Config(format!("{prefix}.mode: must be >= 1, got {mode}")));
    }
    if axis >= grid.dim() {
        return Err(CliError::Config(format!(
            "{prefix}.axis: axis {axis} out of range for dimension {}",
            grid.dim()
        )));
    }
    let scale = 2.0 * PI / grid.period();
    let samples = (0..grid.len())
        .map(|i| base + amp * (mode as f64 * scale * grid.point(i)[axis]).cos())
        .collect();
    Ok(Field::from_samples(grid, vec![samples]))
}

/// Taylor-Green vortex scaled to the grid period; divergence-free in both
/// supported dimensions (the third component vanishes in 3-D).
fn taylor_green(grid: &Arc<Grid>, amp: f64) -> Field {
    let scale = 2.0 * PI / grid.period();
    let mut comps = Vec::with_capacity(grid.dim());
    for c in 0..grid.dim() {
        let samples = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                let (t0, t1) = (scale * x[0], scale * x[1]);
                let t2 = if grid.dim() == 3 { (scale * x[2]).cos() } else { 1.0 };
                match c {
                    0 => amp * t0.sin() * t1.cos() * t2,
                    1 => -amp * t0.cos() * t1.sin() * t2,
                    _ => 0.0,
                }
            })
            .collect();
        comps.push(samples);
    }
    Field::from_samples(grid, comps)
}

fn from_file(cfg: &Config, prefix: &str, grid: &Arc<Grid>, ncomp: usize) -> Result<Field> {
    let path = PathBuf::from(cfg.required(&key(prefix, "path"))?);
    let field = read_field_on(&path, grid)?;
    if field.components() != ncomp {
        return Err(CliError::Format(format!(
            "{}: expected {ncomp} component(s) for {prefix}, file has {}",
            path.display(),
            field.components()
        )));
    }
    Ok(field)
}
