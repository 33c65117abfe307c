//! Dyadic frequency blocks, low-pass operators and Bernstein-type probes.
//!
//! Blocks follow the nonhomogeneous convention: `block(f, -1)` applies the
//! radial low-pass profile `chi`, `block(f, j)` for `j >= 0` the dilated band
//! profile `phi(2^-j |k|)`, and every block with `j > grid.max_block()` is
//! identically zero on the grid. Frequency magnitudes are physical, i.e.
//! integer modes scaled by `2*pi/period`.
//!
//! Two low-pass flavors coexist on purpose:
//!
//! * [`low_pass`] is the public operator, which vanishes for `j <= 0`;
//! * [`low_pass_mult`] is the multiplier `chi(2^-j D)` for every `j >= 0`,
//!   i.e. exactly the telescoped sum of all blocks strictly below `j`. The
//!   paraproduct and the iterative solver seed use this form, which is what
//!   makes the product decomposition an exact identity (see `paradiff`).

use serde::Serialize;

use crate::besov::{lebesgue_norm, lp_norm_samples};
use crate::field::Field;
use crate::{Error, Result};

/// Frequency block `j` of `f`; `j = -1` is the low ball, `j >= 0` the dyadic
/// annuli. Returns an error for `j < -1`.
pub fn dyadic_block(f: &Field, j: i32) -> Result<Field> {
    if j < -1 {
        return Err(Error::InvalidBlockIndex(j));
    }
    let grid = f.grid().clone();
    let cut = grid.cutoff().clone();
    Ok(f.multiplier(move |idx| cut.block_weight(j, grid.kmag_at(idx))))
}

/// Public low-pass operator: zero for `j <= 0`, `chi(2^-j D) f` for `j >= 1`
/// (which coincides with the sum of blocks `-1 ..= j-1`).
pub fn low_pass(f: &Field, j: i32) -> Field {
    if j <= 0 {
        Field::zeros(f.grid(), f.components())
    } else {
        low_pass_mult(f, j)
    }
}

/// Low-pass in multiplier form, `chi(2^-j D) f`, defined for every `j >= 0`;
/// zero for negative `j`. `low_pass_mult(f, 0)` equals block `-1`.
pub fn low_pass_mult(f: &Field, j: i32) -> Field {
    if j < 0 {
        return Field::zeros(f.grid(), f.components());
    }
    let grid = f.grid().clone();
    let cut = grid.cutoff().clone();
    f.multiplier(move |idx| cut.low_pass_weight(j, grid.kmag_at(idx)))
}

/// Measured Bernstein ratios for one block of one field.
#[derive(Debug, Clone, Serialize)]
pub struct BernsteinReport {
    pub j: i32,
    pub deriv_order: usize,
    pub p: f64,
    pub q: f64,
    /// `||grad^k block||_Lq / (2^{j(k + d(1/p - 1/q))} ||block||_Lp)`.
    pub smoothing_ratio: f64,
    /// Same-exponent ratio `||grad^k block||_Lp / (2^{jk} ||block||_Lp)`,
    /// the quantity bounded on both sides over annuli; absent for the ball
    /// block `j = -1`.
    pub annulus_ratio: Option<f64>,
    pub block_lp: f64,
    pub deriv_lq: f64,
}

/// Measure the smoothing and annulus ratios of block `j` of `f` for the
/// derivative order `k` and exponents `1 <= p <= q <= inf`.
pub fn bernstein_probe(
    f: &Field,
    j: i32,
    deriv_order: usize,
    p: f64,
    q: f64,
) -> Result<BernsteinReport> {
    if !(1.0..).contains(&p) {
        return Err(Error::InvalidExponent(p));
    }
    if q < p {
        return Err(Error::HypothesisViolation(format!(
            "need p <= q, got p={p}, q={q}"
        )));
    }
    if deriv_order > 4 {
        return Err(Error::InvalidInput(format!(
            "derivative order {deriv_order} not supported (max 4)"
        )));
    }
    let block = dyadic_block(f, j)?;
    let block_lp = lebesgue_norm(&block, p)?;
    if block_lp < 1e-250 {
        return Err(Error::EmptyBlock { j });
    }
    let d = f.grid().dim();
    // Iterated gradient: each pass replaces every scalar by its d partials;
    // the pointwise Frobenius magnitude is then measured in Lq and Lp.
    let mut parts: Vec<Field> = (0..block.components()).map(|c| block.component(c)).collect();
    for _ in 0..deriv_order {
        parts = parts
            .iter()
            .flat_map(|g| (0..d).map(|a| g.partial(a)).collect::<Vec<_>>())
            .collect();
    }
    let len = f.grid().len();
    let mut mag = vec![0.0f64; len];
    for part in &parts {
        for (m, v) in mag.iter_mut().zip(part.values(0)) {
            *m += v * v;
        }
    }
    for m in &mut mag {
        *m = m.sqrt();
    }
    let deriv_lq = lp_norm_samples(&mag, q)?;
    let deriv_lp = lp_norm_samples(&mag, p)?;
    let lambda = (j as f64).exp2();
    let gain = lambda.powf(deriv_order as f64 + d as f64 * (1.0 / p - 1.0 / q));
    let smoothing_ratio = deriv_lq / (gain * block_lp);
    let annulus_ratio = if j >= 0 {
        Some(deriv_lp / (lambda.powi(deriv_order as i32) * block_lp))
    } else {
        None
    };
    Ok(BernsteinReport {
        j,
        deriv_order,
        p,
        q,
        smoothing_ratio,
        annulus_ratio,
        block_lp,
        deriv_lq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::sampling::{random_scalar, BandSpec};
    use std::sync::Arc;

    fn grid() -> Arc<Grid> {
        Grid::new(2, 64, 2.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn constants_live_in_the_ball_block_only() {
        let g = grid();
        let f = Field::constant(&g, 2.5);
        let lo = dyadic_block(&f, -1).unwrap();
        assert!((&lo - &f).max_abs() < 1e-14);
        for j in 0..=g.max_block() {
            assert!(dyadic_block(&f, j).unwrap().max_abs() == 0.0);
        }
    }

    #[test]
    fn single_mode_spreads_over_at_most_two_consecutive_blocks() {
        let g = grid();
        let f = Field::scalar_from_fn(&g, |x| (3.0 * x[0]).cos());
        let cut = g.cutoff();
        let mut touched = Vec::new();
        for j in g.block_range() {
            let b = dyadic_block(&f, j).unwrap();
            let expect = cut.block_weight(j, 3.0);
            // Block acts as the scalar weight phi(2^-j * 3) on this mode.
            let defect = (&b - &f.scaled(expect)).max_abs();
            assert!(defect < 1e-13, "block {j} defect {defect}");
            if expect != 0.0 {
                touched.push(j);
            }
        }
        assert!(!touched.is_empty() && touched.len() <= 2);
        assert!(touched.windows(2).all(|w| w[1] == w[0] + 1));
    }

    #[test]
    fn blocks_reconstruct_band_limited_fields() {
        let g = grid();
        let f = random_scalar(&g, 42, &BandSpec::broadband(1.0));
        let mut sum = Field::zeros(&g, 1);
        for j in g.block_range() {
            sum = &sum + &dyadic_block(&f, j).unwrap();
        }
        assert!((&sum - &f).max_abs() <= 1e-12 * f.max_abs().max(1.0));
    }

    #[test]
    fn blocks_beyond_the_grid_limit_vanish() {
        let g = grid();
        let f = random_scalar(&g, 1, &BandSpec::broadband(1.0));
        let b = dyadic_block(&f, g.max_block() + 1).unwrap();
        assert_eq!(b.max_abs(), 0.0);
        assert!(dyadic_block(&f, -2).is_err());
    }

    #[test]
    fn distant_blocks_annihilate_exactly() {
        let g = grid();
        let f = random_scalar(&g, 9, &BandSpec::broadband(1.0));
        for j in -1..=3 {
            for jp in -1..=g.max_block() {
                if (j - jp).abs() >= 2 {
                    let twice = dyadic_block(&dyadic_block(&f, j).unwrap(), jp).unwrap();
                    assert_eq!(
                        twice.max_abs(),
                        0.0,
                        "blocks {j} and {jp} failed to annihilate"
                    );
                }
            }
        }
    }

    #[test]
    fn low_pass_follows_the_documented_convention() {
        let g = grid();
        let f = random_scalar(&g, 3, &BandSpec::broadband(1.0));
        assert_eq!(low_pass(&f, 0).max_abs(), 0.0);
        assert_eq!(low_pass(&f, -3).max_abs(), 0.0);

        let c = Field::constant(&g, 4.0);
        assert!((&low_pass(&c, 1) - &c).max_abs() < 1e-14);

        // Telescoping: S_5 f = sum of blocks -1..=4.
        let s5 = low_pass(&f, 5);
        let mut sum = Field::zeros(&g, 1);
        for j in -1..=4 {
            sum = &sum + &dyadic_block(&f, j).unwrap();
        }
        assert!((&s5 - &sum).max_abs() <= 1e-12 * f.max_abs());
    }

    #[test]
    fn multiplier_low_pass_extends_to_j_zero() {
        let g = grid();
        let f = random_scalar(&g, 3, &BandSpec::broadband(1.0));
        let s0 = low_pass_mult(&f, 0);
        let ball = dyadic_block(&f, -1).unwrap();
        assert!((&s0 - &ball).max_abs() < 1e-13);
    }

    #[test]
    fn bernstein_single_mode_ratio_is_order_one() {
        let g = grid();
        // cos(2^j x0) with j = 3 sits inside block 3.
        let f = Field::scalar_from_fn(&g, |x| (8.0 * x[0]).cos());
        let rep = bernstein_probe(&f, 3, 1, 2.0, 2.0).unwrap();
        // Gradient of cos(8 x) has magnitude 8 = 2^3 exactly.
        assert!((rep.smoothing_ratio - 1.0).abs() < 1e-10);
        assert!((rep.annulus_ratio.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bernstein_rejects_empty_blocks() {
        let g = grid();
        let f = Field::zeros(&g, 1);
        assert!(matches!(
            bernstein_probe(&f, 2, 0, 2.0, f64::INFINITY),
            Err(Error::EmptyBlock { j: 2 })
        ));
    }

    #[test]
    fn bernstein_constant_is_stable_under_refinement() {
        let band = BandSpec {
            kmin: 6.0,
            kmax: 10.0,
            decay: 1.0,
            amplitude: 1.0,
        };
        let mut ratios = Vec::new();
        for n in [64usize, 128] {
            let g = Grid::new(2, n, 2.0 * std::f64::consts::PI).unwrap();
            let f = random_scalar(&g, 17, &band);
            let rep = bernstein_probe(&f, 3, 0, 2.0, f64::INFINITY).unwrap();
            ratios.push(rep.smoothing_ratio);
        }
        assert!(ratios[1] <= 2.0 * ratios[0] + 1e-12);
        assert!(ratios.iter().all(|r| r.is_finite()));
    }
}
