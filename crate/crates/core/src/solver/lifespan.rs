//! Empirical lifespan study: how long does a run stay regular compared to
//! the explicit lower-bound formula?
//!
//! All norms live at the fixed triple `(1 + d/4, 4, 1)` — the study is
//! insensitive to the regularity the solution was constructed at. The run
//! tracks the running quantities
//!
//! * `R(t)`: sup-in-time of the density-deviation norm,
//! * `S(t)`: time integral of the deviation two derivatives up,
//! * `U(t)`: sup-in-time of the velocity norm,
//! * `E(t) = exp(int_0^t (1 + U))` with unit rate constant,
//!
//! and the two empirical windows
//!
//! * `T_R`: largest sample time with `int_0^t R^3 <= 2 R_0`,
//! * `T_U`: largest sample time with `E <= 2` and
//!   `(1 + R_0^{delta+4}) int_0^t (U + U^2) <= 2 (1 + U_0 + R_0^{delta+4})`.
//!
//! Alongside, a per-block quadrature measures the parabolic gain constant
//! `C_j = int kappa |grad block_j|^2 / (4^j int |block_j|^2)` on the final
//! density snapshot; positivity and stability of `C_j` over `j` is the
//! discrete footprint of the Bernstein-type diffusion estimate the density
//! bounds rest on.

use crate::besov::{besov_norm, BesovParams};
use crate::dyadic::dyadic_block;
use crate::field::Field;
use crate::model::{
    coefficients_from_density, lifespan_lower_bound, LifespanParams, PhysicalParams,
};
use crate::solver::evolve::{evolve, Forcing, StopReason};
use crate::solver::monitor::MonitorConfig;
use crate::{Error, Result};

/// Measured diffusion-gain constant of one dyadic block.
#[derive(Debug, Clone, Copy)]
pub struct ParabolicGain {
    pub j: i32,
    pub constant: f64,
}

/// Everything the study measures.
#[derive(Debug)]
pub struct LifespanReport {
    /// `||u_0||` at the study triple.
    pub u0_norm: f64,
    /// `||rho_0 - 1||` at the study triple.
    pub r0_norm: f64,
    /// The formula value `L / (1 + U_0 + R_0^ell)`.
    pub lower_bound: f64,
    pub times: Vec<f64>,
    pub r_series: Vec<f64>,
    pub s_series: Vec<f64>,
    pub u_series: Vec<f64>,
    pub e_series: Vec<f64>,
    /// Last sample time satisfying the `R`-window inequality.
    pub t_r: f64,
    pub t_r_crossed: bool,
    /// Last sample time satisfying both `U`-window inequalities.
    pub t_u: f64,
    pub t_u_crossed: bool,
    /// No hard failure and no monitor stop before the formula's bound.
    pub stayed_regular: bool,
    pub stop: StopReason,
    /// Per-block gain constants on the final density snapshot (empty
    /// blocks skipped).
    pub gain: Vec<ParabolicGain>,
}

/// Run the system to `max(lower_bound, horizon)` and measure the study
/// quantities on the stored samples.
pub fn lifespan_study(
    rho0: &Field,
    u0: &Field,
    params: &PhysicalParams,
    lp: &LifespanParams,
    cfg: &MonitorConfig,
    dt: f64,
    horizon: f64,
) -> Result<LifespanReport> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("study horizon {horizon}")));
    }
    let grid = rho0.grid().clone();
    let d = grid.dim() as f64;
    let bp = BesovParams::new(1.0 + d / 4.0, 4.0, 1.0)?;
    let bp2 = bp.with_s(bp.s + 2.0);
    let one = Field::constant(&grid, 1.0);

    let u0_norm = besov_norm(u0, &bp)?;
    let r0_norm = besov_norm(&(rho0 - &one), &bp)?;
    let lower_bound = lifespan_lower_bound(u0_norm, r0_norm, lp);
    let t_end = horizon.max(lower_bound);

    let report = evolve(rho0, u0, params, t_end, dt, cfg, &Forcing::none())?;
    let traj = &report.trajectory;
    let times = traj.times().to_vec();
    let rho_ch = traj.channel("rho")?;
    let u_ch = traj.channel("u")?;

    let n = times.len();
    let mut r_series = Vec::with_capacity(n);
    let mut s_series = Vec::with_capacity(n);
    let mut u_series = Vec::with_capacity(n);
    let mut e_series = Vec::with_capacity(n);
    let mut int_r3 = Vec::with_capacity(n);
    let mut int_uu2 = Vec::with_capacity(n);
    let mut s_prev_integrand = 0.0;
    let mut log_e = 0.0;
    let mut int_r3_acc = 0.0;
    let mut int_uu2_acc = 0.0;
    for i in 0..n {
        let theta = &rho_ch[i] - &one;
        let r_inst = besov_norm(&theta, &bp)?;
        let s_inst = besov_norm(&theta, &bp2)?;
        let u_inst = besov_norm(&u_ch[i], &bp)?;
        if i == 0 {
            r_series.push(r_inst);
            s_series.push(0.0);
            u_series.push(u_inst);
            e_series.push(1.0);
            int_r3.push(0.0);
            int_uu2.push(0.0);
        } else {
            let dtau = times[i] - times[i - 1];
            let r_now = r_series[i - 1].max(r_inst);
            let u_now = u_series[i - 1].max(u_inst);
            s_series.push(s_series[i - 1] + 0.5 * dtau * (s_prev_integrand + s_inst));
            log_e += 0.5 * dtau * ((1.0 + u_series[i - 1]) + (1.0 + u_now));
            int_r3_acc += 0.5 * dtau * (r_series[i - 1].powi(3) + r_now.powi(3));
            int_uu2_acc += 0.5
                * dtau
                * ((u_series[i - 1] + u_series[i - 1].powi(2)) + (u_now + u_now.powi(2)));
            r_series.push(r_now);
            u_series.push(u_now);
            e_series.push(log_e.exp());
            int_r3.push(int_r3_acc);
            int_uu2.push(int_uu2_acc);
        }
        s_prev_integrand = s_inst;
    }

    let r_budget = 2.0 * r0_norm;
    let u_budget = 2.0 * (1.0 + u0_norm + r0_norm.powf(lp.delta + 4.0));
    let u_weight = 1.0 + r0_norm.powf(lp.delta + 4.0);
    let mut t_r = times[0];
    let mut t_r_crossed = false;
    let mut t_u = times[0];
    let mut t_u_crossed = false;
    for i in 0..n {
        if int_r3[i] <= r_budget && !t_r_crossed {
            t_r = times[i];
        } else {
            t_r_crossed = true;
        }
        if e_series[i] <= 2.0 && u_weight * int_uu2[i] <= u_budget && !t_u_crossed {
            t_u = times[i];
        } else {
            t_u_crossed = true;
        }
    }

    let stayed_regular = match &report.stop {
        StopReason::Completed => true,
        StopReason::MonitorTriggered { t, .. } => *t >= lower_bound,
    };

    let rho_last = &rho_ch[n - 1];
    let theta_last = rho_last - &one;
    let kappa = coefficients_from_density(rho_last, params)?.kappa;
    let theta_scale: f64 =
        theta_last.values(0).iter().map(|v| v * v).sum::<f64>() / grid.len() as f64;
    let mut gain = Vec::new();
    for j in 0..=grid.max_block() {
        let block = dyadic_block(&theta_last, j)?;
        let den: f64 = block.values(0).iter().map(|v| v * v).sum::<f64>() / grid.len() as f64;
        if den <= 1e-24 * theta_scale.max(1e-300) {
            continue;
        }
        let grad = block.gradient()?;
        let mut num = 0.0;
        for a in 0..grid.dim() {
            num += kappa
                .values(0)
                .iter()
                .zip(grad.values(a))
                .map(|(k, g)| k * g * g)
                .sum::<f64>()
                / grid.len() as f64;
        }
        gain.push(ParabolicGain {
            j,
            constant: num / (4.0f64.powi(j) * den),
        });
    }

    Ok(LifespanReport {
        u0_norm,
        r0_norm,
        lower_bound,
        times,
        r_series,
        s_series,
        u_series,
        e_series,
        t_r,
        t_r_crossed,
        t_u,
        t_u_crossed,
        stayed_regular,
        stop: report.stop,
        gain,
    })
}
