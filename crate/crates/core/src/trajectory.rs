//! Time-sampled field trajectories and time-integrated (Chemin-Lerner style)
//! norms.
//!
//! A [`Trajectory`] stores named channels of field snapshots at strictly
//! increasing instants starting from zero, plus optional scalar monitor
//! series produced by solvers. The mixed norm
//!
//! ```text
//! || f ||  =  l^r over j of  2^{js} * ( L^q-in-time of ||block_j f(t)||_Lp )
//! ```
//!
//! takes the time integral *inside* the block sum; time integrals use the
//! composite trapezoid rule on the stored instants (`q < inf`) or a running
//! max (`q = inf`).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::besov::{lebesgue_norm, lr_combine, BesovParams};
use crate::dyadic::dyadic_block;
use crate::field::Field;
use crate::grid::Grid;
use crate::{Error, Result};

/// Named channels of time-sampled fields on a common grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: Arc<Grid>,
    times: Vec<f64>,
    channels: BTreeMap<String, Vec<Field>>,
    monitors: BTreeMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn new(grid: Arc<Grid>) -> Self {
        Trajectory {
            grid,
            times: Vec::new(),
            channels: BTreeMap::new(),
            monitors: BTreeMap::new(),
        }
    }

    /// Append a sample. The first call fixes the channel set and must be at
    /// `t = 0`; later calls must supply the same channels at increasing times.
    pub fn push_sample(&mut self, t: f64, fields: Vec<(&str, Field)>) -> Result<()> {
        if self.times.is_empty() {
            if t != 0.0 {
                return Err(Error::NonmonotoneTimes(0));
            }
        } else if t <= *self.times.last().unwrap() {
            return Err(Error::NonmonotoneTimes(self.times.len()));
        }
        if !self.times.is_empty() {
            for (name, _) in &fields {
                if !self.channels.contains_key(*name) {
                    return Err(Error::MissingChannel((*name).into()));
                }
            }
            if fields.len() != self.channels.len() {
                return Err(Error::MissingChannel(
                    "sample omits a previously defined channel".into(),
                ));
            }
        }
        for (name, field) in fields {
            if !field.grid().same(&self.grid) {
                return Err(Error::GridMismatch(
                    self.grid.label(),
                    field.grid().label(),
                ));
            }
            self.channels.entry(name.to_string()).or_default().push(field);
        }
        self.times.push(t);
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(|s| s.as_str())
    }

    pub fn channel(&self, name: &str) -> Result<&[Field]> {
        self.channels
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::MissingChannel(name.into()))
    }

    /// Snapshot of one channel at sample `i`.
    pub fn field(&self, name: &str, i: usize) -> Result<&Field> {
        let ch = self.channel(name)?;
        ch.get(i).ok_or(Error::InsufficientSamples {
            need: i + 1,
            got: ch.len(),
        })
    }

    pub fn set_monitor(&mut self, name: &str, series: Vec<f64>) {
        self.monitors.insert(name.to_string(), series);
    }

    pub fn monitor(&self, name: &str) -> Option<&[f64]> {
        self.monitors.get(name).map(|v| v.as_slice())
    }

    pub fn monitor_names(&self) -> impl Iterator<Item = &str> {
        self.monitors.keys().map(|s| s.as_str())
    }
}

/// `L^q` norm in time of a sampled scalar series by composite trapezoid
/// (`q < inf`) or running max (`q = inf`).
pub fn lq_time(times: &[f64], series: &[f64], q: f64) -> Result<f64> {
    if times.len() != series.len() {
        return Err(Error::InsufficientSamples {
            need: times.len(),
            got: series.len(),
        });
    }
    if q.is_nan() || q < 1.0 {
        return Err(Error::InvalidExponent(q));
    }
    if q.is_infinite() {
        return Ok(series.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    if times.len() < 2 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        acc += 0.5 * dt * (series[i - 1].abs().powf(q) + series[i].abs().powf(q));
    }
    Ok(acc.powf(1.0 / q))
}

/// Trapezoid integral of a sampled series (the `q = 1` time norm without
/// absolute values).
pub fn integrate_time(times: &[f64], series: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..times.len() {
        acc += 0.5 * (times[i] - times[i - 1]) * (series[i - 1] + series[i]);
    }
    acc
}

/// Mixed time-block norm of a channel: block sums outside, time norm inside.
pub fn chemin_lerner_norm(
    traj: &Trajectory,
    channel: &str,
    q: f64,
    params: &BesovParams,
) -> Result<f64> {
    let fields = traj.channel(channel)?;
    if fields.is_empty() {
        return Ok(0.0);
    }
    let ncomp = fields[0].components();
    let mut per_comp = Vec::with_capacity(ncomp);
    for c in 0..ncomp {
        let mut per_block = Vec::new();
        for j in traj.grid().block_range() {
            let series: Vec<f64> = fields
                .iter()
                .map(|f| lebesgue_norm(&dyadic_block(&f.component(c), j)?, params.p))
                .collect::<Result<_>>()?;
            let tnorm = lq_time(traj.times(), &series, q)?;
            per_block.push((j as f64 * params.s).exp2() * tnorm);
        }
        per_comp.push(lr_combine(per_block, params.r));
    }
    Ok(lr_combine(per_comp, params.r))
}

/// Max of the mixed norm at two parameter triples (intersection-space norm).
pub fn chemin_lerner_norm_max(
    traj: &Trajectory,
    channel: &str,
    q: f64,
    a: &BesovParams,
    b: &BesovParams,
) -> Result<f64> {
    Ok(chemin_lerner_norm(traj, channel, q, a)?.max(chemin_lerner_norm(traj, channel, q, b)?))
}

/// Plain `L^q`-in-time of the instantaneous Besov norm (integral outside the
/// block sum), used alongside the mixed norm in interpolation checks.
pub fn lq_besov_norm(
    traj: &Trajectory,
    channel: &str,
    q: f64,
    params: &BesovParams,
) -> Result<f64> {
    let fields = traj.channel(channel)?;
    let series: Vec<f64> = fields
        .iter()
        .map(|f| crate::besov::besov_norm(f, params))
        .collect::<Result<_>>()?;
    lq_time(traj.times(), &series, q)
}
