//! Continuation-criterion quantities along a trajectory.
//!
//! The monitored functional is
//!
//! ```text
//! sup_{[0,t]} ||(grad rho, u)||_Linf
//!   + int_0^t ( ||(grad^2 rho, grad u)||_Linf^2
//!               + ||grad pi||_{B^{-sigma} cap Linf} ) dtau
//! ```
//!
//! whose finiteness guarantees the solution continues past `t`. Alongside it
//! the monitor tracks the growth gauge `K(t)` (slope one plus gradient
//! norms), the transport budget `W(t)` of the drift `w = u + grad b`, and the
//! coefficient gauge `lambda*(t)` combining the sup of `1/rho` with a mixed
//! time-block norm of its gradient.
//!
//! The same per-sample quantities serve two callers: [`continuation_monitor`]
//! evaluates them over a finished trajectory, while the time stepper feeds
//! them through [`MonitorAccumulator`] incrementally so that a threshold
//! crossing can stop a run as it happens.

use crate::besov::{besov_norm, besov_norm_max, lebesgue_norm, lr_combine, BesovParams};
use crate::dyadic::dyadic_block;
use crate::field::Field;
use crate::model::{coefficients_from_density, LifespanParams, PhysicalParams};
use crate::trajectory::Trajectory;
use crate::{Error, Result};

/// Knobs of the continuation monitor.
#[derive(Debug, Clone)]
pub struct MonitorConfig {
    /// Regularity weight of the negative-smoothness pressure norm.
    pub sigma: f64,
    /// Threshold on the running sup part; crossing it stops a run.
    pub sup_threshold: f64,
    /// Threshold on the running integral part.
    pub integral_threshold: f64,
    /// Store every `stride`-th step when the time stepper samples.
    pub stride: usize,
    /// Base `(s, p, r)` triple for the Besov quantities.
    pub params: BesovParams,
    /// Lifespan-formula constants carried along for study reports.
    pub lifespan: LifespanParams,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            sigma: 0.5,
            sup_threshold: f64::INFINITY,
            integral_threshold: f64::INFINITY,
            stride: 4,
            params: BesovParams::new(1.5, 4.0, 1.0).expect("valid default triple"),
            lifespan: LifespanParams::default(),
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "pressure-norm regularity sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidInput("sampling stride must be >= 1".into()));
        }
        for (name, v) in [
            ("sup threshold", self.sup_threshold),
            ("integral threshold", self.integral_threshold),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// First threshold crossing observed by the monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorTrigger {
    /// Which part crossed: `"sup"` or `"integral"`.
    pub quantity: String,
    pub t: f64,
    pub value: f64,
    pub threshold: f64,
}

/// Time series of every monitored quantity.
#[derive(Debug, Clone)]
pub struct MonitorReport {
    pub times: Vec<f64>,
    /// Running sup of `||(grad rho, u)||_Linf`.
    pub sup_series: Vec<f64>,
    /// Running integral of the squared high-order sup plus pressure norm.
    pub integral_series: Vec<f64>,
    /// Sum of the two — the continuation functional itself.
    pub total_series: Vec<f64>,
    /// Growth gauge `K(t)`, slope `1 +` gradient norms, `K(0) = 0`.
    pub k_series: Vec<f64>,
    /// Transport budget of the drift `w = u + grad b`.
    pub w_series: Vec<f64>,
    /// Coefficient gauge of `lambda = 1/rho`.
    pub lambda_star_series: Vec<f64>,
    pub triggered: Option<MonitorTrigger>,
}

/// Per-component gradients stacked into one field (`d * ncomp` components).
fn jacobian(f: &Field) -> Result<Field> {
    let parts: Vec<Field> = (0..f.components())
        .map(|c| f.component(c).gradient())
        .collect::<Result<_>>()?;
    Field::stack(parts)
}

/// All monitored quantities of a single `(rho, u, grad_pi)` sample.
pub(crate) struct InstantQuantities {
    /// `||(grad rho, u)||_Linf`.
    low_magnitude: f64,
    /// `||(grad^2 rho, grad u)||_Linf^2`.
    high_magnitude_sq: f64,
    /// `||grad pi||` in the negative-smoothness/`Linf` intersection.
    pressure_norm: f64,
    /// `1 + ||grad u||_inter + ||grad kappa||^2`.
    k_integrand: f64,
    /// `||grad w||_inter`.
    w_integrand: f64,
    /// `||lambda||_Linf`.
    lambda_max: f64,
    /// Per-component, per-block `L^p` norms of `grad lambda` for the
    /// running mixed-norm maximum.
    grad_lambda_blocks: Vec<Vec<f64>>,
}

pub(crate) fn instant_quantities(
    rho: &Field,
    u: &Field,
    grad_pi: &Field,
    cfg: &MonitorConfig,
    params: &PhysicalParams,
) -> Result<InstantQuantities> {
    let d = rho.grid().dim() as f64;
    let low_params = BesovParams::new(d / cfg.params.p, cfg.params.p, 1.0)?;
    let shifted = cfg.params.with_s(cfg.params.s - 1.0);
    let pressure_params = BesovParams::new(-cfg.sigma, cfg.params.p, f64::INFINITY)?;

    let coeffs = coefficients_from_density(rho, params)?;
    let grad_rho = rho.gradient()?;
    let low_stack = Field::stack(vec![grad_rho.clone(), u.clone()])?;
    let low_magnitude = lebesgue_norm(&low_stack, f64::INFINITY)?;

    let grad_u = jacobian(u)?;
    let high_stack = Field::stack(vec![jacobian(&grad_rho)?, grad_u.clone()])?;
    let high = lebesgue_norm(&high_stack, f64::INFINITY)?;

    let pressure_norm =
        besov_norm(grad_pi, &pressure_params)?.max(lebesgue_norm(grad_pi, f64::INFINITY)?);

    let grad_kappa = coeffs.kappa.gradient()?;
    let k_integrand = 1.0
        + besov_norm_max(&grad_u, &low_params, &shifted)?
        + besov_norm(&grad_kappa, &cfg.params)?.powi(2);

    let w = &coeffs.b.gradient()? + u;
    let w_integrand = besov_norm_max(&jacobian(&w)?, &low_params, &shifted)?;

    let lambda_max = lebesgue_norm(&coeffs.lambda, f64::INFINITY)?;
    let grad_lambda = coeffs.lambda.gradient()?;
    let grad_lambda_blocks: Vec<Vec<f64>> = (0..grad_lambda.components())
        .map(|c| {
            let comp = grad_lambda.component(c);
            rho.grid()
                .block_range()
                .map(|j| lebesgue_norm(&dyadic_block(&comp, j)?, cfg.params.p))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    Ok(InstantQuantities {
        low_magnitude,
        high_magnitude_sq: high * high,
        pressure_norm,
        k_integrand,
        w_integrand,
        lambda_max,
        grad_lambda_blocks,
    })
}

/// Incremental reducer turning per-sample quantities into the monitor's
/// running series. Trapezoid rule for integrals, running maxima for sups,
/// and per-block running maxima for the mixed norm inside `lambda*`.
pub(crate) struct MonitorAccumulator {
    cfg: MonitorConfig,
    dim: f64,
    times: Vec<f64>,
    sup: Vec<f64>,
    integral: Vec<f64>,
    total: Vec<f64>,
    k: Vec<f64>,
    w: Vec<f64>,
    lambda_star: Vec<f64>,
    block_max: Vec<Vec<f64>>,
    lambda_sup: f64,
    prev: Option<(f64, f64, f64, f64)>,
    triggered: Option<MonitorTrigger>,
}

impl MonitorAccumulator {
    pub(crate) fn new(cfg: &MonitorConfig, dim: usize) -> Self {
        MonitorAccumulator {
            cfg: cfg.clone(),
            dim: dim as f64,
            times: Vec::new(),
            sup: Vec::new(),
            integral: Vec::new(),
            total: Vec::new(),
            k: Vec::new(),
            w: Vec::new(),
            lambda_star: Vec::new(),
            block_max: Vec::new(),
            lambda_sup: 0.0,
            prev: None,
            triggered: None,
        }
    }

    /// Weighted block sums of the running per-block maxima, at both triples
    /// of the intersection norm (outer combination per component matches
    /// the trajectory mixed norm).
    fn lambda_mixed_norm(&self) -> f64 {
        let low = BesovParams::new(self.dim / self.cfg.params.p, self.cfg.params.p, 1.0)
            .expect("valid triple");
        let shifted = self.cfg.params.with_s(self.cfg.params.s - 1.0);
        let mut value = 0.0f64;
        for bp in [&low, &shifted] {
            let per_comp: Vec<f64> = self
                .block_max
                .iter()
                .map(|blocks| {
                    lr_combine(
                        blocks
                            .iter()
                            .enumerate()
                            .map(|(i, m)| ((i as f64 - 1.0) * bp.s).exp2() * m),
                        bp.r,
                    )
                })
                .collect();
            value = value.max(lr_combine(per_comp, bp.r));
        }
        value
    }

    pub(crate) fn push(&mut self, t: f64, iq: InstantQuantities) {
        let integrand = iq.high_magnitude_sq + iq.pressure_norm;
        let (sup_now, int_now, k_now, w_now) = match self.prev {
            None => (iq.low_magnitude, 0.0, 0.0, 0.0),
            Some((t_prev, prev_integrand, prev_k, prev_w)) => {
                let dt = t - t_prev;
                (
                    self.sup.last().unwrap().max(iq.low_magnitude),
                    self.integral.last().unwrap() + 0.5 * dt * (prev_integrand + integrand),
                    self.k.last().unwrap() + 0.5 * dt * (prev_k + iq.k_integrand),
                    self.w.last().unwrap() + 0.5 * dt * (prev_w + iq.w_integrand),
                )
            }
        };
        self.lambda_sup = self.lambda_sup.max(iq.lambda_max);
        if self.block_max.is_empty() {
            self.block_max = iq.grad_lambda_blocks.clone();
        } else {
            for (maxes, blocks) in self.block_max.iter_mut().zip(&iq.grad_lambda_blocks) {
                for (m, b) in maxes.iter_mut().zip(blocks) {
                    *m = m.max(*b);
                }
            }
        }

        self.times.push(t);
        self.sup.push(sup_now);
        self.integral.push(int_now);
        self.total.push(sup_now + int_now);
        self.k.push(k_now);
        self.w.push(w_now);
        self.lambda_star.push(self.lambda_sup + self.lambda_mixed_norm());
        self.prev = Some((t, integrand, iq.k_integrand, iq.w_integrand));

        if self.triggered.is_none() {
            if sup_now > self.cfg.sup_threshold {
                self.triggered = Some(MonitorTrigger {
                    quantity: "sup".into(),
                    t,
                    value: sup_now,
                    threshold: self.cfg.sup_threshold,
                });
            } else if int_now > self.cfg.integral_threshold {
                self.triggered = Some(MonitorTrigger {
                    quantity: "integral".into(),
                    t,
                    value: int_now,
                    threshold: self.cfg.integral_threshold,
                });
            }
        }
    }

    pub(crate) fn triggered(&self) -> Option<&MonitorTrigger> {
        self.triggered.as_ref()
    }

    pub(crate) fn into_report(self) -> MonitorReport {
        MonitorReport {
            times: self.times,
            sup_series: self.sup,
            integral_series: self.integral,
            total_series: self.total,
            k_series: self.k,
            w_series: self.w,
            lambda_star_series: self.lambda_star,
            triggered: self.triggered,
        }
    }
}

/// Evaluate the continuation quantities over a stored trajectory with
/// channels `rho`, `u`, `grad_pi`.
pub fn continuation_monitor(
    traj: &Trajectory,
    cfg: &MonitorConfig,
    params: &PhysicalParams,
) -> Result<MonitorReport> {
    cfg.validate()?;
    if traj.is_empty() {
        return Err(Error::InsufficientSamples { need: 1, got: 0 });
    }
    let rho = traj.channel("rho")?;
    let u = traj.channel("u")?;
    let grad_pi = traj.channel("grad_pi")?;
    let mut acc = MonitorAccumulator::new(cfg, traj.grid().dim());
    for (i, &t) in traj.times().iter().enumerate() {
        let iq = instant_quantities(&rho[i], &u[i], &grad_pi[i], cfg, params)?;
        acc.push(t, iq);
    }
    Ok(acc.into_report())
}
