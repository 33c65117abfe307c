//! The coupled density/velocity/pressure model layer.
//!
//! Everything here is pointwise algebra on top of the spectral field type:
//! the diffusion coefficient `kappa(rho)` and its two antiderivative
//! potentials `a` (flux potential, `a' = kappa`) and `b` (drift potential,
//! `b' = -kappa/rho`), the inverse-density coefficient `lambda = 1/rho`, the
//! momentum source term built from those potentials, the solenoidal/gradient
//! velocity split, discrete equation residuals on stored trajectories, the
//! dyadic rescaling map, and the explicit lifespan lower-bound formula.
//!
//! Conventions: products inside nonlinear terms are dealiased; products with
//! the coefficient fields `rho` and `lambda` inside residual evaluations are
//! raw grid products so that the two momentum forms (before and after
//! dividing by the density) agree to rounding rather than to truncation.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::field::{advect, Field};
use crate::grid::Grid;
use crate::trajectory::Trajectory;
use crate::{Error, Result};

/// Functional form of the density-dependent diffusion coefficient.
///
/// Each variant carries closed-form antiderivatives, so the potentials `a`
/// and `b` are evaluated pointwise without quadrature. All forms are
/// positive for positive density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KappaSpec {
    /// `kappa(rho) = kappa0`.
    Constant { kappa0: f64 },
    /// `kappa(rho) = kappa0 / rho`, the Fick's-law closure.
    Fickian { kappa0: f64 },
    /// `kappa(rho) = kappa0 * rho^m`.
    Power { kappa0: f64, m: f64 },
}

impl KappaSpec {
    pub fn validate(&self) -> Result<()> {
        let kappa0 = self.kappa0();
        if !(kappa0.is_finite() && kappa0 > 0.0) {
            return Err(Error::InvalidPhysicalParams(format!(
                "kappa0 must be positive and finite, got {kappa0}"
            )));
        }
        if let KappaSpec::Power { m, .. } = self {
            if !m.is_finite() {
                return Err(Error::InvalidPhysicalParams(format!(
                    "power-law exponent must be finite, got {m}"
                )));
            }
        }
        Ok(())
    }

    pub fn kappa0(&self) -> f64 {
        match *self {
            KappaSpec::Constant { kappa0 }
            | KappaSpec::Fickian { kappa0 }
            | KappaSpec::Power { kappa0, .. } => kappa0,
        }
    }

    /// `kappa(rho)`; requires `rho > 0`.
    pub fn kappa_of(&self, rho: f64) -> f64 {
        match *self {
            KappaSpec::Constant { kappa0 } => kappa0,
            KappaSpec::Fickian { kappa0 } => kappa0 / rho,
            KappaSpec::Power { kappa0, m } => kappa0 * rho.powf(m),
        }
    }

    /// Flux potential `a = A(rho)` with `A' = kappa`, `A(1) = 0`.
    pub fn flux_potential(&self, rho: f64) -> f64 {
        match *self {
            KappaSpec::Constant { kappa0 } => kappa0 * (rho - 1.0),
            KappaSpec::Fickian { kappa0 } => kappa0 * rho.ln(),
            KappaSpec::Power { kappa0, m } => {
                if (m + 1.0).abs() < 1e-12 {
                    kappa0 * rho.ln()
                } else {
                    kappa0 * (rho.powf(m + 1.0) - 1.0) / (m + 1.0)
                }
            }
        }
    }

    /// Drift potential `b = B(rho)` with `B' = -kappa/rho`, `B(1) = 0`.
    pub fn drift_potential(&self, rho: f64) -> f64 {
        match *self {
            KappaSpec::Constant { kappa0 } => -kappa0 * rho.ln(),
            KappaSpec::Fickian { kappa0 } => kappa0 * (1.0 / rho - 1.0),
            KappaSpec::Power { kappa0, m } => {
                if m.abs() < 1e-12 {
                    -kappa0 * rho.ln()
                } else {
                    -kappa0 * (rho.powf(m) - 1.0) / m
                }
            }
        }
    }
}

/// Gas constants plus the diffusion closure.
///
/// The five thermodynamic numbers are redundant on purpose: the constructor
/// checks `c_p = c_v + r_gas` and `gamma = c_p/c_v`, which together make the
/// two textbook expressions for the expansion coefficient
/// `alpha = (gamma-1)/(gamma*p0) = r_gas/(c_p*p0)` agree to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    pub gamma: f64,
    pub p0: f64,
    pub r_gas: f64,
    pub c_v: f64,
    pub c_p: f64,
    pub kappa: KappaSpec,
}

impl PhysicalParams {
    pub fn new(
        gamma: f64,
        p0: f64,
        r_gas: f64,
        c_v: f64,
        c_p: f64,
        kappa: KappaSpec,
    ) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidPhysicalParams(format!(
                "adiabatic index must exceed 1, got {gamma}"
            )));
        }
        for (name, v) in [("p0", p0), ("r_gas", r_gas), ("c_v", c_v), ("c_p", c_p)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidPhysicalParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if (c_p - c_v - r_gas).abs() > 1e-12 * c_p {
            return Err(Error::InvalidPhysicalParams(format!(
                "c_p = c_v + r_gas violated: {c_p} vs {}",
                c_v + r_gas
            )));
        }
        if (gamma - c_p / c_v).abs() > 1e-12 * gamma {
            return Err(Error::InvalidPhysicalParams(format!(
                "gamma = c_p/c_v violated: {gamma} vs {}",
                c_p / c_v
            )));
        }
        kappa.validate()?;
        let params = PhysicalParams {
            gamma,
            p0,
            r_gas,
            c_v,
            c_p,
            kappa,
        };
        let direct = (gamma - 1.0) / (gamma * p0);
        let via_gas = r_gas / (c_p * p0);
        if (direct - via_gas).abs() > 1e-12 * direct.abs().max(1e-300) {
            return Err(Error::InvalidPhysicalParams(format!(
                "expansion coefficient inconsistent: {direct} vs {via_gas}"
            )));
        }
        Ok(params)
    }

    /// Derive the heat capacities from `(gamma, r_gas)` so the consistency
    /// relations hold exactly.
    pub fn ideal_gas(gamma: f64, p0: f64, r_gas: f64, kappa: KappaSpec) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidPhysicalParams(format!(
                "adiabatic index must exceed 1, got {gamma}"
            )));
        }
        let c_v = r_gas / (gamma - 1.0);
        PhysicalParams::new(gamma, p0, r_gas, c_v, c_v + r_gas, kappa)
    }

    /// Air-like defaults with the given diffusion closure.
    pub fn reference(kappa: KappaSpec) -> Self {
        PhysicalParams::ideal_gas(1.4, 1.0, 1.0, kappa).expect("reference parameters are valid")
    }

    /// Expansion coefficient `(gamma-1)/(gamma*p0)`.
    pub fn alpha(&self) -> f64 {
        (self.gamma - 1.0) / (self.gamma * self.p0)
    }
}

/// Pointwise coefficient fields derived from a density, plus the measured
/// defect of the gradient identities that tie them together.
#[derive(Debug, Clone)]
pub struct Coefficients {
    /// Diffusion coefficient `kappa(rho)`.
    pub kappa: Field,
    /// Inverse density `1/rho`.
    pub lambda: Field,
    /// Flux potential, `grad a = kappa grad rho`.
    pub a: Field,
    /// Drift potential, `grad a = -rho grad b`.
    pub b: Field,
    /// `|| grad a - kappa grad rho ||_{L^2}`.
    pub flux_gradient_defect: f64,
    /// `|| grad a + rho grad b ||_{L^2}`.
    pub drift_gradient_defect: f64,
}

/// Evaluate `kappa`, `lambda` and the two potentials pointwise and measure
/// the spectral defect of their gradient identities.
pub fn coefficients_from_density(rho: &Field, params: &PhysicalParams) -> Result<Coefficients> {
    if !rho.is_scalar() {
        return Err(Error::ComponentMismatch {
            expected: 1,
            got: rho.components(),
        });
    }
    let (min, max) = rho.min_max();
    if !(min.is_finite() && max.is_finite()) || min <= 0.0 {
        return Err(Error::DensityOutOfRange { min, max });
    }
    let spec = &params.kappa;
    let kappa = rho.map_values(|r| spec.kappa_of(r));
    let kappa_min = kappa.min_max().0;
    if kappa_min <= 0.0 {
        return Err(Error::KappaDegenerate(kappa_min));
    }
    let lambda = rho.map_values(|r| 1.0 / r);
    let a = rho.map_values(|r| spec.flux_potential(r));
    let b = rho.map_values(|r| spec.drift_potential(r));

    let grad_rho = rho.gradient()?;
    let grad_a = a.gradient()?;
    let grad_b = b.gradient()?;
    let flux_gradient_defect = (&grad_a - &kappa.product_raw(&grad_rho)?).l2_norm();
    let drift_gradient_defect = (&grad_a + &rho.product_raw(&grad_b)?).l2_norm();

    Ok(Coefficients {
        kappa,
        lambda,
        a,
        b,
        flux_gradient_defect,
        drift_gradient_defect,
    })
}

/// A density/velocity/pressure-gradient triple with cached derived fields.
///
/// Validation happens at construction: positive density, matching grids and
/// a solenoidal velocity. Derived coefficients and the momentum source are
/// computed once on first use and shared afterwards, so a state is cheap to
/// read from many threads and never mutated in place.
#[derive(Debug)]
pub struct FlowState {
    rho: Field,
    u: Field,
    grad_pi: Field,
    params: PhysicalParams,
    coeffs: OnceLock<Coefficients>,
    source: OnceLock<Field>,
}

impl Clone for FlowState {
    fn clone(&self) -> Self {
        FlowState {
            rho: self.rho.clone(),
            u: self.u.clone(),
            grad_pi: self.grad_pi.clone(),
            params: self.params,
            coeffs: self.coeffs.clone(),
            source: self.source.clone(),
        }
    }
}

impl FlowState {
    pub fn new(rho: Field, u: Field, grad_pi: Field, params: PhysicalParams) -> Result<FlowState> {
        if !rho.is_scalar() {
            return Err(Error::ComponentMismatch {
                expected: 1,
                got: rho.components(),
            });
        }
        for f in [&u, &grad_pi] {
            if !f.grid().same(rho.grid()) {
                return Err(Error::GridMismatch(rho.grid().label(), f.grid().label()));
            }
            if !f.is_vector() {
                return Err(Error::ComponentMismatch {
                    expected: rho.grid().dim(),
                    got: f.components(),
                });
            }
        }
        let (min, max) = rho.min_max();
        if !(min.is_finite() && max.is_finite()) || min <= 0.0 {
            return Err(Error::DensityOutOfRange { min, max });
        }
        let div = u.divergence()?.max_abs();
        if div > 1e-10 * (1.0 + u.max_abs()) {
            return Err(Error::NonSolenoidal(div));
        }
        Ok(FlowState {
            rho,
            u,
            grad_pi,
            params,
            coeffs: OnceLock::new(),
            source: OnceLock::new(),
        })
    }

    pub fn rho(&self) -> &Field {
        &self.rho
    }

    pub fn u(&self) -> &Field {
        &self.u
    }

    pub fn grad_pi(&self) -> &Field {
        &self.grad_pi
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }

    pub fn rho_bounds(&self) -> (f64, f64) {
        self.rho.min_max()
    }

    /// Derived coefficient fields, computed once per state.
    pub fn coefficients(&self) -> Result<&Coefficients> {
        if self.coeffs.get().is_none() {
            let c = coefficients_from_density(&self.rho, &self.params)?;
            let _ = self.coeffs.set(c);
        }
        Ok(self.coeffs.get().expect("coefficient cache populated"))
    }

    /// The transporting velocity `v = u + grad b`.
    pub fn velocity(&self) -> Result<Field> {
        let coeffs = self.coefficients()?;
        Ok(&self.u + &coeffs.b.gradient()?)
    }

    /// Momentum source term (compact form), computed once per state.
    pub fn source_term(&self) -> Result<&Field> {
        if self.source.get().is_none() {
            let h = source_h(self)?;
            let _ = self.source.set(h);
        }
        Ok(self.source.get().expect("source cache populated"))
    }
}

/// Compact momentum source `lambda * div(v (x) grad a)` where `v = u + grad b`
/// and the divergence contracts against the `v` slot:
/// `h_i = lambda * sum_j d_j (v_j d_i a)`.
pub fn source_h(state: &FlowState) -> Result<Field> {
    let coeffs = state.coefficients()?;
    source_from_parts(state.u(), coeffs)
}

pub(crate) fn source_from_parts(u: &Field, coeffs: &Coefficients) -> Result<Field> {
    let grid = u.grid();
    let d = grid.dim();
    let grad_a = coeffs.a.gradient()?;
    let v = &(coeffs.b.gradient()?) + u;
    let mut parts = Vec::with_capacity(d);
    for i in 0..d {
        let dia = grad_a.component(i);
        let mut acc = Field::zeros(grid, 1);
        for j in 0..d {
            acc = &acc + &v.component(j).product(&dia)?.partial(j);
        }
        parts.push(acc);
    }
    coeffs.lambda.product(&Field::stack(parts)?)
}

/// Both forms of the momentum source and their relative disagreement.
#[derive(Debug)]
pub struct SourceDiagnostics {
    /// `lambda * div(v (x) grad a)`.
    pub compact: Field,
    /// `lambda * (lap b grad a + u . grad grad a + grad b . grad grad a)`,
    /// the product-rule expansion of the compact form.
    pub expanded: Field,
    /// `||compact - expanded||_{L^2} / max(||compact||_{L^2}, eps)`.
    pub difference: f64,
}

/// Evaluate the compact and expanded source forms side by side.
pub fn source_h_diagnostics(state: &FlowState) -> Result<SourceDiagnostics> {
    let coeffs = state.coefficients()?;
    let compact = source_h(state)?;

    let grad_a = coeffs.a.gradient()?;
    let grad_b = coeffs.b.gradient()?;
    let lap_b = coeffs.b.laplacian();
    let sum = &(&lap_b.product(&grad_a)? + &advect(state.u(), &grad_a)?)
        + &advect(&grad_b, &grad_a)?;
    let expanded = coeffs.lambda.product(&sum)?;

    let scale = compact.l2_norm().max(1e-300);
    let difference = (&compact - &expanded).l2_norm() / scale;
    Ok(SourceDiagnostics {
        compact,
        expanded,
        difference,
    })
}

/// Result of projecting a transporting velocity onto its solenoidal and
/// gradient parts.
#[derive(Debug)]
pub struct VelocitySplit {
    /// Solenoidal part (the model velocity).
    pub u: Field,
    /// Gradient part `v - u`.
    pub q_part: Field,
    /// `|| grad b(rho) - q_part ||_{L^2}`, the compatibility defect of the
    /// data against the drift potential of the given density.
    pub compatibility_residual: f64,
}

/// Split `v` into solenoidal and gradient parts and measure how well the
/// gradient part matches `grad b(rho)`.
pub fn velocity_split(v: &Field, rho: &Field, params: &PhysicalParams) -> Result<VelocitySplit> {
    if !v.grid().same(rho.grid()) {
        return Err(Error::GridMismatch(rho.grid().label(), v.grid().label()));
    }
    let u = v.leray_project()?;
    let q_part = v - &u;
    let b = rho.map_values(|r| params.kappa.drift_potential(r));
    let compatibility_residual = (&b.gradient()? - &q_part).l2_norm();
    Ok(VelocitySplit {
        u,
        q_part,
        compatibility_residual,
    })
}

/// Rebuild the transporting velocity `v = u + grad b` from a solenoidal `u`
/// and a drift potential `b`.
pub fn velocity_join(u: &Field, b: &Field) -> Result<Field> {
    let div = u.divergence()?.max_abs();
    if div > 1e-8 {
        return Err(Error::NonSolenoidal(div));
    }
    Ok(u + &b.gradient()?)
}

/// Discrete equation residuals at one interior sample of a trajectory.
///
/// `density` and the two momentum norms are unit-volume `L^2` norms of the
/// corresponding residual fields; `*_scale` is the largest single term
/// entering each equation, so `residual / scale` is a relative reading.
#[derive(Debug, Clone, Serialize)]
pub struct SystemResidual {
    pub t: f64,
    /// Density equation: `d_t rho + u . grad rho - div(kappa grad rho) - f`.
    pub density: f64,
    /// Momentum in divided form: `d_t u + v . grad u + lambda grad pi - h - g`.
    pub momentum_lambda: f64,
    /// Momentum before dividing by the density:
    /// `rho d_t u + rho v . grad u + grad pi - rho h - rho g`.
    pub momentum_primitive: f64,
    /// `|| lambda * primitive - divided ||_{L^2}`; an algebraic identity up
    /// to rounding, independent of how accurate the solution is.
    pub mutual_difference: f64,
    /// `|| div u ||_{L^inf}` at the sample.
    pub div_u: f64,
    pub density_scale: f64,
    pub momentum_scale: f64,
}

impl SystemResidual {
    pub fn relative_density(&self) -> f64 {
        self.density / self.density_scale.max(1e-300)
    }

    pub fn relative_momentum(&self) -> f64 {
        self.momentum_lambda / self.momentum_scale.max(1e-300)
    }
}

/// Three-point finite-difference weights for the first derivative at the
/// middle node of spacings `h1` (left) and `h2` (right).
fn centered_weights(h1: f64, h2: f64) -> (f64, f64, f64) {
    let wm = -h2 / (h1 * (h1 + h2));
    let wp = h1 / (h2 * (h1 + h2));
    (wm, -(wm + wp), wp)
}

/// Evaluate the discrete equation residuals at interior sample `idx` using a
/// centered time difference and the trajectory's `rho`, `u`, `grad_pi`
/// channels. If `forcing_rho` / `forcing_u` channels are present they are
/// subtracted from the corresponding equations.
pub fn system_residual(
    traj: &Trajectory,
    idx: usize,
    params: &PhysicalParams,
) -> Result<SystemResidual> {
    if traj.len() < 3 {
        return Err(Error::InsufficientSamples {
            need: 3,
            got: traj.len(),
        });
    }
    if idx == 0 || idx + 1 >= traj.len() {
        return Err(Error::InvalidInput(format!(
            "sample {idx} has no interior neighbors in 0..{}",
            traj.len()
        )));
    }
    let times = traj.times();
    let (wm, w0, wp) = centered_weights(times[idx] - times[idx - 1], times[idx + 1] - times[idx]);
    let ddt = |series: &[Field]| -> Field {
        series[idx - 1]
            .scaled(wm)
            .add_scaled(w0, &series[idx])
            .add_scaled(wp, &series[idx + 1])
    };

    let rho_series = traj.channel("rho")?;
    let u_series = traj.channel("u")?;
    let rho = &rho_series[idx];
    let u = &u_series[idx];
    let grad_pi = &traj.channel("grad_pi")?[idx];
    let coeffs = coefficients_from_density(rho, params)?;

    let rho_dot = ddt(rho_series);
    let transport = advect(u, rho)?;
    let diffusion = coeffs.kappa.product(&rho.gradient()?)?.divergence()?;
    let mut den_res = &(&rho_dot + &transport) - &diffusion;
    let mut den_terms = vec![rho_dot.l2_norm(), transport.l2_norm(), diffusion.l2_norm()];
    if traj.channel_names().any(|n| n == "forcing_rho") {
        let f = &traj.channel("forcing_rho")?[idx];
        den_res = &den_res - f;
        den_terms.push(f.l2_norm());
    }

    let u_dot = ddt(u_series);
    let v = &coeffs.b.gradient()? + u;
    let momentum_transport = advect(&v, u)?;
    let pressure = coeffs.lambda.product_raw(grad_pi)?;
    let h = source_from_parts(u, &coeffs)?;
    let mut mom_lambda = &(&(&u_dot + &momentum_transport) + &pressure) - &h;
    let mut mom_primitive =
        &(&rho.product_raw(&(&u_dot + &momentum_transport))? + grad_pi) - &rho.product_raw(&h)?;
    let mut mom_terms = vec![
        u_dot.l2_norm(),
        momentum_transport.l2_norm(),
        pressure.l2_norm(),
        h.l2_norm(),
    ];
    if traj.channel_names().any(|n| n == "forcing_u") {
        let g = &traj.channel("forcing_u")?[idx];
        mom_lambda = &mom_lambda - g;
        mom_primitive = &mom_primitive - &rho.product_raw(g)?;
        mom_terms.push(g.l2_norm());
    }
    let mutual_difference = (&coeffs.lambda.product_raw(&mom_primitive)? - &mom_lambda).l2_norm();

    Ok(SystemResidual {
        t: times[idx],
        density: den_res.l2_norm(),
        momentum_lambda: mom_lambda.l2_norm(),
        momentum_primitive: mom_primitive.l2_norm(),
        mutual_difference,
        div_u: u.divergence()?.max_abs(),
        density_scale: den_terms.iter().fold(0.0f64, |a, &b| a.max(b)),
        momentum_scale: mom_terms.iter().fold(0.0f64, |a, &b| a.max(b)),
    })
}

/// Constants of the explicit lifespan lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifespanParams {
    /// Overall scale of the bound; a calibration input, not a derived value.
    pub l: f64,
    /// Exponent on the density seminorm; must exceed 6.
    pub ell: f64,
    /// Interpolation exponent of the internal estimate chain; must exceed 1.
    pub delta: f64,
}

impl LifespanParams {
    pub fn new(l: f64, ell: f64, delta: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidPhysicalParams(format!(
                "lifespan scale must be positive, got {l}"
            )));
        }
        if !(ell.is_finite() && ell > 6.0) {
            return Err(Error::InvalidPhysicalParams(format!(
                "lifespan exponent must exceed 6, got {ell}"
            )));
        }
        if !(delta.is_finite() && delta > 1.0) {
            return Err(Error::InvalidPhysicalParams(format!(
                "interpolation exponent must exceed 1, got {delta}"
            )));
        }
        Ok(LifespanParams { l, ell, delta })
    }
}

impl Default for LifespanParams {
    fn default() -> Self {
        LifespanParams {
            l: 1.0,
            ell: 7.0,
            delta: 2.0,
        }
    }
}

/// Explicit lifespan lower bound `L / (1 + U0 + R0^ell)` from the sizes of
/// the initial velocity and density deviation.
pub fn lifespan_lower_bound(u0_norm: f64, r0_norm: f64, lp: &LifespanParams) -> f64 {
    lp.l / (1.0 + u0_norm + r0_norm.powf(lp.ell))
}

/// Map a state through the dyadic space-time rescaling: with `eps = 2^{-m}`,
/// coordinates contract by `eps`, so frequencies multiply by `2^m` on a grid
/// refined by the same factor, the velocity scales by `eps^{-1}` and the
/// pressure gradient by `eps^{-3}` (one factor from the pressure amplitude
/// `eps^{-2}`, one from the gradient). Times scale by `eps^2`; callers
/// resample trajectories accordingly.
pub fn rescale_state(state: &FlowState, eps: f64) -> Result<FlowState> {
    if !(eps.is_finite() && eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "rescaling factor must lie in (0, 1], got {eps}"
        )));
    }
    let m = (-eps.log2()).round() as i32;
    if (eps - 0.5f64.powi(m)).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "rescaling factor must be a power of 1/2 to keep the torus periodic, got {eps}"
        )));
    }
    if m == 0 {
        return FlowState::new(
            state.rho.clone(),
            state.u.clone(),
            state.grad_pi.clone(),
            state.params,
        );
    }
    let factor = 1usize << m;
    let grid = state.grid();
    let fine = Grid::new(grid.dim(), grid.points_per_axis() * factor, grid.period())?;
    let rho = refine_modes(&state.rho, &fine, factor, 1.0)?;
    let u = refine_modes(&state.u, &fine, factor, factor as f64)?;
    let grad_pi = refine_modes(&state.grad_pi, &fine, factor, (factor as f64).powi(3))?;
    FlowState::new(rho, u, grad_pi, state.params)
}

/// Copy spectral coefficients from `f` onto `fine`, sending integer mode `k`
/// to `factor * k` and scaling amplitudes by `amp`.
fn refine_modes(f: &Field, fine: &Arc<Grid>, factor: usize, amp: f64) -> Result<Field> {
    let coarse = f.grid();
    let d = coarse.dim();
    let n_fine = fine.points_per_axis();
    let mut comps = Vec::with_capacity(f.components());
    for c in 0..f.components() {
        let src = f.spectral(c);
        let mut dst = vec![Complex64::new(0.0, 0.0); fine.len()];
        for (idx, &coef) in src.iter().enumerate() {
            if coef.norm_sqr() == 0.0 {
                continue;
            }
            let mut target = 0usize;
            for axis in 0..d {
                let k = coarse.freq_at(idx, axis) * factor as i64;
                let i = if k >= 0 { k as usize } else { (n_fine as i64 + k) as usize };
                target = target * n_fine + i;
            }
            dst[target] = coef * amp;
        }
        comps.push(dst);
    }
    Ok(Field::from_spectral(fine, comps))
}
