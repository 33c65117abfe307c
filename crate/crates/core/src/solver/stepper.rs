//! Single time steps for the linearized density and velocity equations.
//!
//! Density uses a two-stage second-order implicit/explicit pairing: the
//! constant-coefficient part `mean(kappa) lap` of the diffusion is treated
//! implicitly (exact spectral inversion, L-stable), while advection, the
//! variable part of the diffusion and the forcing are explicit. The
//! alternative scheme solves the trapezoid rule in the *full*
//! variable-coefficient operator by a preconditioned fixed point, trading a
//! few inner iterations for an implicit treatment of every term.
//!
//! Velocity uses explicit Heun stages; at each stage the pressure gradient
//! from [`pressure_solve`] removes the divergence of the right-hand side and
//! a final projection keeps the update solenoidal to rounding.
//!
//! Both steppers exist in two flavors: a plain single-coefficient form
//! (coefficients frozen over the step; pass midpoint samples to retain
//! second order) and a staged form taking per-endpoint coefficient samples,
//! which the drivers use for genuinely time-dependent data.

use std::sync::Arc;

use crate::field::{advect, Field};
use crate::grid::Grid;
use crate::solver::elliptic::pressure_solve;
use crate::{Error, Result};

/// Advective CFL limit; steps above it are refused.
const CFL_LIMIT: f64 = 0.9;
/// Implicit-stage coefficient of the two-stage scheme (L-stable choice).
const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

/// Which density scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityScheme {
    /// Implicit mean diffusion, explicit advection and variable remainder.
    Imex,
    /// Trapezoid rule in the full operator, solved by a preconditioned
    /// fixed point with spectral inner solves.
    FullySpectralPicard,
}

fn advective_cfl(u: &Field, dt: f64) -> f64 {
    let dx = u.grid().spacing();
    (0..u.components())
        .map(|a| u.component(a).max_abs())
        .fold(0.0f64, f64::max)
        * dt
        / dx
}

fn check_cfl(u: &Field, dt: f64) -> Result<()> {
    let cfl = advective_cfl(u, dt);
    if cfl > CFL_LIMIT {
        return Err(Error::CflViolation {
            cfl,
            limit: CFL_LIMIT,
        });
    }
    Ok(())
}

fn check_drift(u: &Field) -> Result<()> {
    let div = u.divergence()?.max_abs();
    if div > 1e-8 {
        return Err(Error::NonSolenoidal(div));
    }
    Ok(())
}

fn check_kappa(kappa: &Field) -> Result<()> {
    let min = kappa.min_max().0;
    if !(min > 0.0) {
        return Err(Error::KappaDegenerate(min));
    }
    Ok(())
}

/// `(Id - c lap)^{-1}` as an exact spectral multiplier, `c >= 0`.
fn implicit_invert(f: &Field, c: f64) -> Field {
    let grid: Arc<Grid> = f.grid().clone();
    f.multiplier(move |idx| {
        let k = grid.kmag_at(idx);
        1.0 / (1.0 + c * k * k)
    })
}

/// Explicit part `f - u.grad rho + div((kappa - kbar) grad rho)`, with the
/// deviation field passed in directly.
fn explicit_part(rho: &Field, u: &Field, kappa_dev: &Field, f: &Field) -> Result<Field> {
    let transport = advect(u, rho)?;
    let variable = kappa_dev.product(&rho.gradient()?)?.divergence()?;
    Ok(&(f - &transport) + &variable)
}

/// Full right-hand side `f - u.grad rho + div(kappa grad rho)`.
fn full_part(rho: &Field, u: &Field, kappa: &Field, f: &Field) -> Result<Field> {
    let transport = advect(u, rho)?;
    let diffusion = kappa.product(&rho.gradient()?)?.divergence()?;
    Ok(&(f - &transport) + &diffusion)
}

/// One linearized transport-diffusion step with coefficients frozen over
/// the step. `u_drift` must be solenoidal and `kappa` strictly positive;
/// `f` is read as the midpoint forcing sample. With zero forcing the output
/// must stay inside the input bounds up to `1e-6 * dt`; a violation aborts
/// the step.
pub fn density_step(
    rho_in: &Field,
    u_drift: &Field,
    kappa: &Field,
    f: &Field,
    dt: f64,
    scheme: DensityScheme,
) -> Result<Field> {
    density_step_staged(
        rho_in,
        (u_drift, u_drift),
        (kappa, kappa),
        (f, f),
        dt,
        scheme,
    )
}

/// Staged variant of [`density_step`]: coefficient and forcing samples are
/// given at both step endpoints, entering the stages at their matching
/// abscissae.
pub fn density_step_staged(
    rho_in: &Field,
    u_drift: (&Field, &Field),
    kappa: (&Field, &Field),
    f: (&Field, &Field),
    dt: f64,
    scheme: DensityScheme,
) -> Result<Field> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("step size {dt}")));
    }
    for field in [
        u_drift.0, u_drift.1, kappa.0, kappa.1, f.0, f.1,
    ] {
        if !field.grid().same(rho_in.grid()) {
            return Err(Error::GridMismatch(
                rho_in.grid().label(),
                field.grid().label(),
            ));
        }
    }
    check_kappa(kappa.0)?;
    check_kappa(kappa.1)?;
    check_drift(u_drift.0)?;
    check_drift(u_drift.1)?;
    check_cfl(u_drift.0, dt)?;
    check_cfl(u_drift.1, dt)?;

    let grid = rho_in.grid().clone();
    let kbar = 0.5 * (kappa.0.mean(0) + kappa.1.mean(0));
    let out = match scheme {
        DensityScheme::Imex => {
            let dev0 = kappa.0 - &Field::constant(&grid, kbar);
            let dev1 = kappa.1 - &Field::constant(&grid, kbar);
            let s1 = implicit_invert(rho_in, dt * GAMMA * kbar);
            let i1 = s1.laplacian().scaled(kbar);
            let e1 = explicit_part(&s1, u_drift.0, &dev0, f.0)?;
            let rhs2 = rho_in
                .add_scaled(dt, &e1)
                .add_scaled(dt * (1.0 - 2.0 * GAMMA), &i1);
            let s2 = implicit_invert(&rhs2, dt * GAMMA * kbar);
            let i2 = s2.laplacian().scaled(kbar);
            let e2 = explicit_part(&s2, u_drift.1, &dev1, f.1)?;
            rho_in
                .add_scaled(0.5 * dt, &(&e1 + &e2))
                .add_scaled(0.5 * dt, &(&i1 + &i2))
        }
        DensityScheme::FullySpectralPicard => {
            let m0 = full_part(rho_in, u_drift.0, kappa.0, f.0)?;
            let base = rho_in.add_scaled(0.5 * dt, &m0);
            let scale = rho_in.max_abs().max(1.0);
            let mut x = rho_in.clone();
            let mut defect = f64::INFINITY;
            for _ in 0..50 {
                let m1 = full_part(&x, u_drift.1, kappa.1, f.1)?;
                let correction = &m1 - &x.laplacian().scaled(kbar);
                let next = implicit_invert(
                    &base.add_scaled(0.5 * dt, &correction),
                    0.5 * dt * kbar,
                );
                defect = (&next - &x).max_abs();
                x = next;
                if defect <= 1e-13 * scale {
                    break;
                }
            }
            if defect > 1e-13 * scale {
                return Err(Error::FixedPointStall {
                    defect,
                    iterations: 50,
                });
            }
            x
        }
    };

    if f.0.max_abs() == 0.0 && f.1.max_abs() == 0.0 {
        let (lo_in, hi_in) = rho_in.min_max();
        let (lo_out, hi_out) = out.min_max();
        let tol = 1e-6 * dt;
        if lo_out < lo_in - tol || hi_out > hi_in + tol {
            return Err(Error::DensityBoundViolation {
                t: dt,
                min: lo_out,
                max: hi_out,
                lo: lo_in - tol,
                hi: hi_in + tol,
            });
        }
    }
    Ok(out)
}

/// Result of one velocity step.
#[derive(Debug)]
pub struct VelocityStep {
    pub u_out: Field,
    /// Pressure gradient of the first stage — the instantaneous multiplier
    /// at the step's starting time.
    pub grad_pi: Field,
    /// Total inner iterations spent in the two pressure solves.
    pub pressure_iterations: usize,
}

/// One linearized velocity step with coefficients frozen over the step.
pub fn velocity_step(
    u_in: &Field,
    drift: &Field,
    lambda: &Field,
    h: &Field,
    dt: f64,
) -> Result<VelocityStep> {
    velocity_step_staged(u_in, (drift, drift), (lambda, lambda), (h, h), dt)
}

/// Staged Heun step for `d_t u + drift.grad u + lambda grad pi = h` with
/// `div u = 0`: each stage removes the divergence of its right-hand side
/// through a pressure solve, and the stage states are projected to keep the
/// constraint to rounding.
pub fn velocity_step_staged(
    u_in: &Field,
    drift: (&Field, &Field),
    lambda: (&Field, &Field),
    h: (&Field, &Field),
    dt: f64,
) -> Result<VelocityStep> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("step size {dt}")));
    }
    for field in [drift.0, drift.1, lambda.0, lambda.1, h.0, h.1] {
        if !field.grid().same(u_in.grid()) {
            return Err(Error::GridMismatch(
                u_in.grid().label(),
                field.grid().label(),
            ));
        }
    }
    let div = u_in.divergence()?.max_abs();
    if div > 1e-8 {
        return Err(Error::NonSolenoidal(div));
    }
    check_cfl(drift.0, dt)?;
    check_cfl(drift.1, dt)?;

    // Stage right-hand side: project h - drift.grad u onto the constraint
    // by subtracting lambda grad pi. The raw product keeps the result
    // divergence-free to the pressure solver's tolerance.
    let stage = |u: &Field, w: &Field, lam: &Field, hh: &Field| -> Result<(Field, Field, usize)> {
        let f_rhs = hh - &advect(w, u)?;
        let sol = pressure_solve(lam, &f_rhs)?;
        let g = &f_rhs - &lam.product_raw(&sol.grad_pi)?;
        Ok((g, sol.grad_pi, sol.iterations))
    };

    let (g0, grad_pi, it0) = stage(u_in, drift.0, lambda.0, h.0)?;
    let u1 = u_in.add_scaled(dt, &g0).leray_project()?;
    let (g1, _, it1) = stage(&u1, drift.1, lambda.1, h.1)?;
    let u_out = u_in
        .add_scaled(0.5 * dt, &(&g0 + &g1))
        .leray_project()?;
    Ok(VelocityStep {
        u_out,
        grad_pi,
        pressure_iterations: it0 + it1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_solenoidal, random_vector, BandSpec};
    use crate::solver::heat::heat_semigroup;

    fn grid2(n: usize) -> Arc<Grid> {
        Grid::new(2, n, 2.0 * std::f64::consts::PI).unwrap()
    }

    fn taylor_green(grid: &Arc<Grid>, amp: f64) -> Field {
        Field::vector_from_fn(grid, |x| {
            vec![
                amp * x[0].sin() * x[1].cos(),
                -amp * x[0].cos() * x[1].sin(),
            ]
        })
    }

    #[test]
    fn constants_are_exact_solutions() {
        let g = grid2(32);
        let rho = Field::constant(&g, 2.5);
        let u = taylor_green(&g, 0.4);
        let kappa = Field::scalar_from_fn(&g, |x| 1.0 + 0.2 * x[0].cos());
        let f = Field::zeros(&g, 1);
        for scheme in [DensityScheme::Imex, DensityScheme::FullySpectralPicard] {
            let out = density_step(&rho, &u, &kappa, &f, 0.01, scheme).unwrap();
            assert!(
                (&out - &rho).max_abs() < 1e-13,
                "{scheme:?}: drift {}",
                (&out - &rho).max_abs()
            );
        }
    }

    #[test]
    fn unit_diffusion_reduces_to_the_heat_flow() {
        let g = grid2(32);
        let rho = Field::scalar_from_fn(&g, |x| 1.0 + 0.3 * x[0].cos());
        let u = Field::zeros(&g, 2);
        let kappa = Field::constant(&g, 1.0);
        let f = Field::zeros(&g, 1);
        let dt = 1e-3;
        let exact = heat_semigroup(&rho, dt).unwrap();
        for scheme in [DensityScheme::Imex, DensityScheme::FullySpectralPicard] {
            let out = density_step(&rho, &u, &kappa, &f, dt, scheme).unwrap();
            assert!(
                (&out - &exact).max_abs() < 1e-8,
                "{scheme:?}: error {}",
                (&out - &exact).max_abs()
            );
        }
    }

    /// March the staged stepper against a manufactured solution whose
    /// forcing is assembled spectrally from the analytic time derivative.
    fn manufactured_error(dt: f64, scheme: DensityScheme) -> f64 {
        let g = grid2(32);
        let u = taylor_green(&g, 0.3);
        let kappa = Field::scalar_from_fn(&g, |x| 1.0 + 0.3 * x[0].cos() * x[1].cos());
        let rho_star = |t: f64, g: &Arc<Grid>| {
            Field::scalar_from_fn(g, move |x| {
                1.0 + 0.2 * t.cos() * x[0].cos() + 0.1 * t.sin() * (2.0 * x[1]).cos()
            })
        };
        let rho_dot = |t: f64, g: &Arc<Grid>| {
            Field::scalar_from_fn(g, move |x| {
                -0.2 * t.sin() * x[0].cos() + 0.1 * t.cos() * (2.0 * x[1]).cos()
            })
        };
        let forcing = |t: f64| -> Field {
            let rs = rho_star(t, &g);
            let transport = advect(&u, &rs).unwrap();
            let diffusion = kappa
                .product(&rs.gradient().unwrap())
                .unwrap()
                .divergence()
                .unwrap();
            &(&rho_dot(t, &g) + &transport) - &diffusion
        };

        let t_end = 1.0;
        let steps = (t_end / dt).round() as usize;
        let mut rho = rho_star(0.0, &g);
        let mut f_lo = forcing(0.0);
        for i in 0..steps {
            let t1 = (i + 1) as f64 * dt;
            let f_hi = forcing(t1);
            rho = density_step_staged(
                &rho,
                (&u, &u),
                (&kappa, &kappa),
                (&f_lo, &f_hi),
                dt,
                scheme,
            )
            .unwrap();
            f_lo = f_hi;
        }
        (&rho - &rho_star(t_end, &g)).max_abs()
    }

    #[test]
    fn manufactured_density_march_is_second_order() {
        for scheme in [DensityScheme::Imex, DensityScheme::FullySpectralPicard] {
            let coarse = manufactured_error(0.02, scheme);
            let fine = manufactured_error(0.01, scheme);
            let ratio = coarse / fine;
            assert!(
                (3.4..=4.6).contains(&ratio),
                "{scheme:?}: errors {coarse:.3e}/{fine:.3e}, ratio {ratio:.2}"
            );
        }
    }

    #[test]
    fn bad_inputs_are_refused() {
        let g = grid2(32);
        let rho = Field::scalar_from_fn(&g, |x| 1.0 + 0.1 * x[0].cos());
        let u = taylor_green(&g, 1.0);
        let kappa_bad = Field::scalar_from_fn(&g, |x| 0.5 * x[0].cos());
        let kappa = Field::constant(&g, 1.0);
        let f = Field::zeros(&g, 1);
        assert!(matches!(
            density_step(&rho, &u, &kappa_bad, &f, 0.01, DensityScheme::Imex),
            Err(Error::KappaDegenerate(_))
        ));
        assert!(matches!(
            density_step(&rho, &u, &kappa, &f, 10.0, DensityScheme::Imex),
            Err(Error::CflViolation { .. })
        ));
        let skew = rho.gradient().unwrap();
        assert!(matches!(
            density_step(&rho, &skew, &kappa, &f, 0.01, DensityScheme::Imex),
            Err(Error::NonSolenoidal(_))
        ));
    }

    #[test]
    fn resting_velocity_stays_at_rest() {
        let g = grid2(32);
        let u = random_solenoidal(&g, 3, &BandSpec::smooth(0.5));
        let zero = Field::zeros(&g, 2);
        let lambda = Field::constant(&g, 1.0);
        let step = velocity_step(&u, &zero, &lambda, &zero, 0.01).unwrap();
        assert!((&step.u_out - &u).max_abs() < 1e-13);
        assert_eq!(step.grad_pi.max_abs(), 0.0);
        assert_eq!(step.pressure_iterations, 0);
    }

    #[test]
    fn steady_vortex_is_a_fixed_point_with_the_matching_pressure() {
        let g = grid2(64);
        let u = taylor_green(&g, 1.0);
        let lambda = Field::constant(&g, 1.0);
        let h = Field::zeros(&g, 2);
        let dt = 0.01;
        let step = velocity_step(&u, &u, &lambda, &h, dt).unwrap();
        assert!(
            (&step.u_out - &u).max_abs() < 1e-10,
            "drift {}",
            (&step.u_out - &u).max_abs()
        );
        let grad_pi_ref = Field::vector_from_fn(&g, |x| {
            vec![-0.5 * (2.0 * x[0]).sin(), -0.5 * (2.0 * x[1]).sin()]
        });
        assert!((&step.grad_pi - &grad_pi_ref).max_abs() < 1e-8);
    }

    /// Reference fine integrator for the frozen-coefficient velocity system,
    /// classical RK4 over many substeps of the same stage operator.
    fn rk4_reference(
        u0: &Field,
        drift: &Field,
        lambda: &Field,
        h: &Field,
        dt: f64,
        substeps: usize,
    ) -> Field {
        let rhs = |u: &Field| -> Field {
            let f_rhs = h - &advect(drift, u).unwrap();
            let sol = pressure_solve(lambda, &f_rhs).unwrap();
            (&f_rhs - &lambda.product_raw(&sol.grad_pi).unwrap())
                .leray_project()
                .unwrap()
        };
        let hsub = dt / substeps as f64;
        let mut u = u0.clone();
        for _ in 0..substeps {
            let k1 = rhs(&u);
            let k2 = rhs(&u.add_scaled(0.5 * hsub, &k1));
            let k3 = rhs(&u.add_scaled(0.5 * hsub, &k2));
            let k4 = rhs(&u.add_scaled(hsub, &k3));
            u = u
                .add_scaled(hsub / 6.0, &k1)
                .add_scaled(hsub / 3.0, &k2)
                .add_scaled(hsub / 3.0, &k3)
                .add_scaled(hsub / 6.0, &k4);
        }
        u.leray_project().unwrap()
    }

    #[test]
    fn velocity_step_has_third_order_local_error() {
        let g = grid2(32);
        let u0 = random_solenoidal(&g, 11, &BandSpec::smooth(0.5));
        let drift = random_solenoidal(&g, 12, &BandSpec::smooth(0.5));
        let lambda = Field::scalar_from_fn(&g, |x| 1.25 + 0.5 * x[0].cos());
        let h = random_vector(&g, 13, &BandSpec::smooth(0.3));
        let mut errors = Vec::new();
        for &dt in &[0.02, 0.01] {
            let heun = velocity_step(&u0, &drift, &lambda, &h, dt).unwrap();
            let fine = rk4_reference(&u0, &drift, &lambda, &h, dt, 32);
            errors.push((&heun.u_out - &fine).max_abs());
        }
        let ratio = errors[0] / errors[1];
        assert!(
            (6.0..=10.5).contains(&ratio),
            "local errors {errors:?}, ratio {ratio:.2}"
        );
    }

    #[test]
    fn transport_energy_drift_shrinks_at_fourth_order() {
        // The advective nonlinearity is quadratic and exactly skew on
        // band-limited solenoidal fields, which promotes the usual cubic
        // per-step energy defect of a two-stage scheme to fourth order.
        let g = grid2(32);
        let u0 = random_solenoidal(&g, 21, &BandSpec::smooth(0.5));
        let lambda = Field::constant(&g, 1.0);
        let h = Field::zeros(&g, 2);
        let base = u0.l2_norm();
        let drift_at = |dt: f64| -> f64 {
            let step = velocity_step(&u0, &u0, &lambda, &h, dt).unwrap();
            (step.u_out.l2_norm() - base).abs()
        };
        let coarse = drift_at(0.02);
        let fine = drift_at(0.01);
        let ratio = coarse / fine;
        assert!(coarse < 1e-7, "one-step energy drift {coarse:.3e}");
        assert!(
            (11.0..=22.0).contains(&ratio),
            "energy drifts {coarse:.3e}/{fine:.3e}, ratio {ratio:.2}"
        );
    }
}
