//! Radial cutoff pair used by the dyadic frequency decomposition.
//!
//! `chi` is a smooth, nonincreasing radial profile with
//!
//! * `chi(t) = 1` exactly for `t <= 3/4`,
//! * `chi(t) = 0` exactly for `t >= 4/3`,
//! * a C-infinity transition on `(3/4, 4/3)` obtained by integrating the
//!   standard bump `y -> exp(-1/(1 - y^2))` and normalizing.
//!
//! `phi(t) = chi(t/2) - chi(t)` is then supported exactly in `[3/4, 8/3]`,
//! and the dilates telescope:
//!
//! ```text
//! chi(t) + sum_{j=0..J} phi(2^-j t) = chi(2^-(J+1) t)
//! ```
//!
//! which is an exact identity of the evaluated values, not an approximation;
//! the partition-of-unity and almost-orthogonality properties of the block
//! decomposition inherit that exactness.
//!
//! The transition is tabulated once at `2^14` cells and evaluated by cubic
//! Hermite interpolation with exact node derivatives (`chi' = -bump/Z`), so
//! interpolation error is at the `1e-14` level while keeping evaluation cheap.

/// Lower edge of the transition: `chi == 1` at and below this radius.
pub const CHI_ONE_RADIUS: f64 = 0.75;
/// Upper edge of the transition: `chi == 0` at and above this radius.
pub const CHI_ZERO_RADIUS: f64 = 4.0 / 3.0;
/// `phi` vanishes outside `[PHI_LOWER_RADIUS, PHI_UPPER_RADIUS]`.
pub const PHI_LOWER_RADIUS: f64 = 0.75;
/// Upper support radius of `phi`: `2 * CHI_ZERO_RADIUS`.
pub const PHI_UPPER_RADIUS: f64 = 8.0 / 3.0;

const TABLE_CELLS: usize = 1 << 14;

/// Smooth radial low-pass profile `chi` and band profile `phi`.
///
/// Construction is deterministic; two instances evaluate identically.
#[derive(Debug, Clone)]
pub struct CutoffPair {
    /// `chi` values at the `TABLE_CELLS + 1` transition nodes.
    values: Vec<f64>,
    /// `chi'` values at the nodes (exact, from the bump integrand).
    slopes: Vec<f64>,
    /// Node spacing over the transition interval.
    step: f64,
}

/// The unnormalized bump integrand on the transition interval,
/// `exp(-1/(1-y^2))` after mapping `[3/4, 4/3]` affinely onto `[-1, 1]`.
fn bump(t: f64) -> f64 {
    let mid = 0.5 * (CHI_ONE_RADIUS + CHI_ZERO_RADIUS);
    let half = 0.5 * (CHI_ZERO_RADIUS - CHI_ONE_RADIUS);
    let y = (t - mid) / half;
    if y.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - y * y)).exp()
    }
}

/// Five-point Gauss-Legendre quadrature of `bump` over `[a, b]`.
fn bump_integral(a: f64, b: f64) -> f64 {
    // Nodes/weights for [-1, 1].
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (&x, &w) in X.iter().zip(W.iter()) {
        acc += w * bump(c + h * x);
    }
    acc * h
}

impl CutoffPair {
    /// Build the tabulated pair. Cost is a one-off ~`2^14` quadratures.
    pub fn new() -> Self {
        let step = (CHI_ZERO_RADIUS - CHI_ONE_RADIUS) / TABLE_CELLS as f64;
        // Cell masses of the bump, then suffix-sum so that
        // tail[i] = integral from node i to the right end.
        let mut cell = vec![0.0f64; TABLE_CELLS];
        for (i, c) in cell.iter_mut().enumerate() {
            let a = CHI_ONE_RADIUS + i as f64 * step;
            *c = bump_integral(a, a + step);
        }
        let mut tail = vec![0.0f64; TABLE_CELLS + 1];
        for i in (0..TABLE_CELLS).rev() {
            tail[i] = tail[i + 1] + cell[i];
        }
        let total = tail[0];
        let mut values: Vec<f64> = tail.iter().map(|t| t / total).collect();
        // Pin the endpoints so the branch cases and the table agree exactly.
        values[0] = 1.0;
        values[TABLE_CELLS] = 0.0;
        let slopes: Vec<f64> = (0..=TABLE_CELLS)
            .map(|i| -bump(CHI_ONE_RADIUS + i as f64 * step) / total)
            .collect();
        Self { values, slopes, step }
    }

    /// Evaluate `chi(t)`; `t` is a radius, so negative input is reflected.
    pub fn chi(&self, t: f64) -> f64 {
        let t = t.abs();
        if t <= CHI_ONE_RADIUS {
            return 1.0;
        }
        if t >= CHI_ZERO_RADIUS {
            return 0.0;
        }
        let s = (t - CHI_ONE_RADIUS) / self.step;
        let i = (s as usize).min(TABLE_CELLS - 1);
        let x = s - i as f64;
        // Cubic Hermite basis on the cell, with exact node derivatives.
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let x2 = x * x;
        let x3 = x2 * x;
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        (h00 * v0 + h10 * m0 + h01 * v1 + h11 * m1).clamp(0.0, 1.0)
    }

    /// Evaluate the band profile `phi(t) = chi(t/2) - chi(t)`.
    pub fn phi(&self, t: f64) -> f64 {
        self.chi(0.5 * t) - self.chi(t)
    }

    /// Block multiplier at radius `t`: `chi` for `j == -1`, the dilated band
    /// profile `phi(2^-j t)` for `j >= 0`, zero for `j <= -2`.
    pub fn block_weight(&self, j: i32, t: f64) -> f64 {
        match j {
            -1 => self.chi(t),
            j if j >= 0 => self.phi(t / (j as f64).exp2()),
            _ => 0.0,
        }
    }

    /// Low-pass multiplier `chi(2^-j t)` (the telescoped sum of all block
    /// weights strictly below `j`), valid for `j >= 0`.
    pub fn low_pass_weight(&self, j: i32, t: f64) -> f64 {
        debug_assert!(j >= 0);
        self.chi(t / (j as f64).exp2())
    }
}

impl Default for CutoffPair {
    fn default() -> Self {
        Self::new()
    }
}
