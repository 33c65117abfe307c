//! Deterministic random field generation for probes and ensembles.
//!
//! Coefficients are drawn per integer mode in a fixed enumeration order that
//! does not depend on the grid resolution, so the same `(seed, band)` pair
//! instantiates the *same* trigonometric polynomial on every grid that can
//! hold it. Refinement studies rely on this: constants measured at `N` and
//! `2N` then differ only through quadrature, not through the sample.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::Field;
use crate::grid::Grid;

/// Spectral band and shape of a random field.
#[derive(Debug, Clone, Copy)]
pub struct BandSpec {
    /// Smallest integer-frequency magnitude carrying energy.
    pub kmin: f64,
    /// Largest integer-frequency magnitude carrying energy.
    pub kmax: f64,
    /// Power-law decay exponent: coefficient scale is `|k|^-decay`.
    pub decay: f64,
    /// Overall amplitude multiplier.
    pub amplitude: f64,
}

impl BandSpec {
    /// Smooth broadband profile filling blocks up to the coarse dealias edge.
    pub fn broadband(amplitude: f64) -> Self {
        BandSpec {
            kmin: 1.0,
            kmax: 20.0,
            decay: 2.5,
            amplitude,
        }
    }

    /// Low-frequency profile for smooth initial data.
    pub fn smooth(amplitude: f64) -> Self {
        BandSpec {
            kmin: 1.0,
            kmax: 6.0,
            decay: 3.0,
            amplitude,
        }
    }
}

/// Map an integer mode vector to the flattened spectral index, or `None`
/// when the grid cannot hold it (beyond or at Nyquist).
fn mode_index(grid: &Grid, k: &[i64]) -> Option<usize> {
    let n = grid.points_per_axis() as i64;
    let mut idx = 0usize;
    for &ka in k.iter() {
        if ka.abs() >= n / 2 {
            return None;
        }
        let i = if ka >= 0 { ka } else { n + ka } as usize;
        idx = idx * n as usize + i;
    }
    Some(idx)
}

/// Enumerate integer modes in the closed box `[-kbox, kbox]^d` in a fixed
/// row-major order; the half with a positive leading nonzero component gets
/// fresh Gaussian draws, the mirror half the conjugate values.
fn fill_random_spectrum(
    grid: &Arc<Grid>,
    rng: &mut ChaCha8Rng,
    spec: &mut [Complex64],
    band: &BandSpec,
) {
    let d = grid.dim();
    let kbox = band.kmax.floor() as i64;
    let mut k = vec![-kbox; d];
    loop {
        // Leading nonzero component decides which half-space draws.
        let lead = k.iter().copied().find(|&v| v != 0).unwrap_or(0);
        let mag = (k.iter().map(|&v| (v * v) as f64).sum::<f64>()).sqrt();
        if lead > 0 && mag >= band.kmin && mag <= band.kmax {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let scale = band.amplitude * mag.powf(-band.decay) * 0.5;
            let c = Complex64::new(re, im) * scale;
            if let Some(idx) = mode_index(grid, &k) {
                spec[idx] = c;
                let mirror: Vec<i64> = k.iter().map(|&v| -v).collect();
                let midx = mode_index(grid, &mirror).expect("mirror inside box");
                spec[midx] = c.conj();
            }
        }
        // Advance the odometer.
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            k[axis] += 1;
            if k[axis] <= kbox {
                break;
            }
            k[axis] = -kbox;
        }
    }
}

/// Deterministic random scalar field with zero mean.
pub fn random_scalar(grid: &Arc<Grid>, seed: u64, band: &BandSpec) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    fill_random_spectrum(grid, &mut rng, &mut spec, band);
    Field::from_spectral(grid, vec![spec])
}

/// Deterministic random vector field (independent components).
pub fn random_vector(grid: &Arc<Grid>, seed: u64, band: &BandSpec) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..grid.dim())
        .map(|_| {
            let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
            fill_random_spectrum(grid, &mut rng, &mut spec, band);
            spec
        })
        .collect();
    Field::from_spectral(grid, comps)
}

/// Deterministic random divergence-free vector field.
pub fn random_solenoidal(grid: &Arc<Grid>, seed: u64, band: &BandSpec) -> Field {
    random_vector(grid, seed, band)
        .leray_project()
        .expect("vector input")
}
