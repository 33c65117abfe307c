//! Periodic lattice, frequency bookkeeping and FFT plans.
//!
//! A [`Grid`] fixes the box `(period * T)^d` sampled at `N` points per axis
//! (`d` in {2, 3}, `N` a power of two). Spectral coefficients follow the
//! convention
//!
//! ```text
//! f(x) = sum_k c_k exp(i (2*pi/period) k . x),   k integer, |k_i| <= N/2
//! ```
//!
//! so the forward transform is the DFT divided by the number of lattice
//! points. Frequencies per axis are stored in FFT layout:
//! `0, 1, ..., N/2 - 1, -N/2, ..., -1`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::cutoff::CutoffPair;
use crate::{Error, Result};

/// Shared, immutable description of the periodic lattice plus FFT plans and
/// the dyadic cutoff pair. Cheap to clone behind an `Arc`.
pub struct Grid {
    d: usize,
    n: usize,
    period: f64,
    len: usize,
    /// Per-axis integer frequency by axis index, FFT layout.
    freq: Vec<i64>,
    /// Physical frequency magnitude `(2*pi/period) * |k|` per flattened index.
    kmag: Vec<f64>,
    /// Largest block index that can intersect the grid's frequency set.
    j_max: i32,
    cutoff: CutoffPair,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid({})", self.label())
    }
}

impl Grid {
    /// Build a grid. `d` must be 2 or 3, `n` a power of two at least 8,
    /// `period` positive and finite.
    pub fn new(d: usize, n: usize, period: f64) -> Result<Arc<Grid>> {
        if !(d == 2 || d == 3) {
            return Err(Error::InvalidDimension(d));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidResolution(n));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidPeriod(period));
        }
        let len = n.pow(d as u32);
        let freq: Vec<i64> = (0..n)
            .map(|i| if i < n / 2 { i as i64 } else { i as i64 - n as i64 })
            .collect();
        let kscale = 2.0 * std::f64::consts::PI / period;
        let mut kmag = vec![0.0f64; len];
        for (idx, km) in kmag.iter_mut().enumerate() {
            let mut sq = 0.0;
            let mut rem = idx;
            for axis in (0..d).rev() {
                let i = rem % n;
                rem /= n;
                let _ = axis;
                let k = freq[i] as f64;
                sq += k * k;
            }
            *km = kscale * sq.sqrt();
        }
        let j_max = ((n as f64 / 2.0) * kscale * 0.75).log2().ceil() as i32 + 1;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Arc::new(Grid {
            d,
            n,
            period,
            len,
            freq,
            kmag,
            j_max,
            cutoff: CutoffPair::new(),
            fwd,
            inv,
        }))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Points per axis.
    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Total number of lattice points, `N^d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `2*pi/period`, the physical frequency of integer mode 1.
    pub fn frequency_scale(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    /// Lattice spacing along each axis.
    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn cutoff(&self) -> &CutoffPair {
        &self.cutoff
    }

    /// Largest block index that can carry energy on this grid; every block
    /// with `j > j_max` is identically zero here.
    pub fn max_block(&self) -> i32 {
        self.j_max
    }

    /// All block indices `-1 ..= j_max`.
    pub fn block_range(&self) -> impl Iterator<Item = i32> {
        -1..=self.j_max
    }

    /// Integer frequency along `axis` for a flattened spectral index.
    #[inline]
    pub fn freq_at(&self, idx: usize, axis: usize) -> i64 {
        let stride = self.n.pow((self.d - 1 - axis) as u32);
        self.freq[(idx / stride) % self.n]
    }

    /// Physical frequency magnitude for a flattened spectral index.
    #[inline]
    pub fn kmag_at(&self, idx: usize) -> f64 {
        self.kmag[idx]
    }

    /// Squared frequency magnitude as seen by the spectral derivative, which
    /// drops unpaired Nyquist axes: `sum_a (2 pi k_a / L)^2` over axes with
    /// `k_a != -N/2`. Symbols built for composites of [`Field::partial`]
    /// (e.g. an elliptic preconditioner) must use this weight, not
    /// [`Grid::kmag_at`], or the mismatch on Nyquist-axis modes shows up as
    /// near-unit error modes of the iteration.
    #[inline]
    pub fn diff_kmag2(&self, idx: usize) -> f64 {
        let ny = -(self.n as i64) / 2;
        let fs = self.frequency_scale();
        let mut rem = idx;
        let mut acc = 0.0;
        for _ in 0..self.d {
            let k = self.freq[rem % self.n];
            if k != ny {
                let kk = fs * k as f64;
                acc += kk * kk;
            }
            rem /= self.n;
        }
        acc
    }

    /// True when the coefficient survives the 2/3-rule dealias mask,
    /// i.e. `|k_a| <= floor(N/3)` on every axis.
    #[inline]
    pub fn keeps_dealias(&self, idx: usize) -> bool {
        let cut = (self.n / 3) as i64;
        let mut rem = idx;
        for _ in 0..self.d {
            let k = self.freq[rem % self.n];
            if k.abs() > cut {
                return false;
            }
            rem /= self.n;
        }
        true
    }

    /// True when any axis sits on the unpaired Nyquist frequency `-N/2`.
    #[inline]
    pub fn touches_nyquist(&self, idx: usize) -> bool {
        let ny = -(self.n as i64) / 2;
        let mut rem = idx;
        for _ in 0..self.d {
            if self.freq[rem % self.n] == ny {
                return true;
            }
            rem /= self.n;
        }
        false
    }

    /// Physical coordinates of lattice point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let mut x = [0.0f64; 3];
        let mut rem = idx;
        for axis in (0..self.d).rev() {
            x[axis] = (rem % self.n) as f64 * self.spacing();
            rem /= self.n;
        }
        x
    }

    /// Structural equality (dimension, resolution, period).
    pub fn same(&self, other: &Grid) -> bool {
        self.d == other.d && self.n == other.n && self.period == other.period
    }

    pub fn label(&self) -> String {
        format!("{}d N={} L={:.6}", self.d, self.n, self.period)
    }

    /// Forward transform: physical samples to spectral coefficients.
    pub fn forward(&self, phys: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(phys.len(), self.len);
        let mut buf: Vec<Complex64> = phys.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_axes(&mut buf, &self.fwd);
        let scale = 1.0 / self.len as f64;
        for c in &mut buf {
            *c *= scale;
        }
        // Enforce exact conjugate symmetry. The complex transform of real
        // samples breaks it at rounding level, and the asymmetric part is
        // invisible in physical space: any operator that passes through
        // physical values annihilates it, so linear solves measuring
        // spectral residuals would stall on unremovable junk.
        for idx in 0..self.len {
            let mirror = self.mirror_index(idx);
            if idx < mirror {
                let v = 0.5 * (buf[idx] + buf[mirror].conj());
                buf[idx] = v;
                buf[mirror] = v.conj();
            } else if idx == mirror {
                buf[idx] = Complex64::new(buf[idx].re, 0.0);
            }
        }
        buf
    }

    /// Flattened index of the mode with every axis frequency negated
    /// (mod `N`); conjugate symmetry of real fields pairs `idx` with it.
    #[inline]
    pub fn mirror_index(&self, idx: usize) -> usize {
        let mut mirror = 0usize;
        let mut rem = idx;
        let mut mul = 1usize;
        for _ in 0..self.d {
            let i = rem % self.n;
            rem /= self.n;
            mirror += ((self.n - i) % self.n) * mul;
            mul *= self.n;
        }
        mirror
    }

    /// Inverse transform keeping the complex result (no realness assumed).
    pub fn inverse_complex(&self, spec: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(spec.len(), self.len);
        let mut buf = spec.to_vec();
        self.transform_axes(&mut buf, &self.inv);
        buf
    }

    /// Inverse transform of conjugate-symmetric coefficients to real samples.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        self.inverse_complex(spec).iter().map(|c| c.re).collect()
    }

    /// Apply the 1D plan along every axis of the row-major hypercube.
    fn transform_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut lane = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.d {
            let stride = n.pow((self.d - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
            } else {
                let outer = self.len / (n * stride);
                for o in 0..outer {
                    for s in 0..stride {
                        let base = o * n * stride + s;
                        for (t, l) in lane.iter_mut().enumerate() {
                            *l = data[base + t * stride];
                        }
                        plan.process_with_scratch(&mut lane, &mut scratch);
                        for (t, l) in lane.iter().enumerate() {
                            data[base + t * stride] = *l;
                        }
                    }
                }
            }
        }
    }
}
