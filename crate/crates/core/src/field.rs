//! Real-valued scalar and vector fields with synchronized physical and
//! spectral representations.
//!
//! The spectral coefficients are the authoritative data; physical samples
//! are produced lazily through the grid's inverse transform and cached, so
//! value semantics stay cheap while avoiding redundant FFTs. Every pointwise
//! product routes factors through the 2/3-rule dealias mask unless a caller
//! explicitly asks for the raw grid product (the pressure solver does, so
//! that its operator and residual agree to machine precision).

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::grid::Grid;
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct Comp {
    spec: Vec<Complex64>,
    phys: OnceLock<Vec<f64>>,
}

impl Comp {
    fn from_spec(spec: Vec<Complex64>) -> Self {
        Comp {
            spec,
            phys: OnceLock::new(),
        }
    }

    /// Keep the caller's samples as the cached physical representation so
    /// that sample data survives a construct/extract cycle bitwise instead
    /// of picking up a transform round trip's rounding.
    fn from_samples(spec: Vec<Complex64>, phys: Vec<f64>) -> Self {
        let cache = OnceLock::new();
        let _ = cache.set(phys);
        Comp { spec, phys: cache }
    }
}

/// A scalar (1 component) or vector (`d` components) field on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    comps: Vec<Comp>,
}

impl Field {
    // ----- constructors ---------------------------------------------------

    /// Zero field with `ncomp` components (1 or the grid dimension).
    pub fn zeros(grid: &Arc<Grid>, ncomp: usize) -> Field {
        let comps = (0..ncomp)
            .map(|_| Comp::from_spec(vec![Complex64::new(0.0, 0.0); grid.len()]))
            .collect();
        Field {
            grid: grid.clone(),
            comps,
        }
    }

    /// Constant scalar field.
    pub fn constant(grid: &Arc<Grid>, value: f64) -> Field {
        let mut f = Field::zeros(grid, 1);
        f.comps[0].spec[0] = Complex64::new(value, 0.0);
        f
    }

    /// Scalar field sampled from a function of the physical coordinates.
    pub fn scalar_from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Field {
        let samples: Vec<f64> = (0..grid.len())
            .map(|i| f(&grid.point(i)[..grid.dim()]))
            .collect();
        Field::from_samples(grid, vec![samples])
    }

    /// Vector field sampled from a function returning one value per axis.
    pub fn vector_from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> Vec<f64>) -> Field {
        let d = grid.dim();
        let mut comps: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); d];
        for i in 0..grid.len() {
            let v = f(&grid.point(i)[..d]);
            assert_eq!(v.len(), d, "component count from sampler");
            for (a, val) in v.into_iter().enumerate() {
                comps[a].push(val);
            }
        }
        Field::from_samples(grid, comps)
    }

    /// Build from physical samples (row-major lattice order per component).
    /// The samples are kept verbatim as the cached physical side, so
    /// [`Field::values`] returns them bitwise.
    pub fn from_samples(grid: &Arc<Grid>, comps: Vec<Vec<f64>>) -> Field {
        let comps = comps
            .into_iter()
            .map(|phys| {
                assert_eq!(phys.len(), grid.len(), "sample count");
                Comp::from_samples(grid.forward(&phys), phys)
            })
            .collect();
        Field {
            grid: grid.clone(),
            comps,
        }
    }

    /// Build from spectral coefficients. The caller is responsible for
    /// conjugate symmetry; [`Field::conjugate_symmetry_defect`] measures it.
    pub fn from_spectral(grid: &Arc<Grid>, comps: Vec<Vec<Complex64>>) -> Field {
        let comps = comps
            .into_iter()
            .map(|spec| {
                assert_eq!(spec.len(), grid.len(), "coefficient count");
                Comp::from_spec(spec)
            })
            .collect();
        Field {
            grid: grid.clone(),
            comps,
        }
    }

    /// Concatenate the components of several fields into one field on the
    /// shared grid.
    pub fn stack(parts: Vec<Field>) -> Result<Field> {
        let grid = parts[0].grid.clone();
        let mut comps = Vec::with_capacity(parts.len());
        for p in parts {
            if !p.grid.same(&grid) {
                return Err(Error::GridMismatch(grid.label(), p.grid.label()));
            }
            comps.extend(p.comps);
        }
        Ok(Field { grid, comps })
    }

    // ----- access ----------------------------------------------------------

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.comps.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.comps.len() == 1
    }

    pub fn is_vector(&self) -> bool {
        self.comps.len() == self.grid.dim()
    }

    /// Physical samples of component `c` (computed once, then cached).
    pub fn values(&self, c: usize) -> &[f64] {
        self.comps[c]
            .phys
            .get_or_init(|| self.grid.inverse(&self.comps[c].spec))
    }

    /// Spectral coefficients of component `c`.
    pub fn spectral(&self, c: usize) -> &[Complex64] {
        &self.comps[c].spec
    }

    /// Extract component `c` as a scalar field.
    pub fn component(&self, c: usize) -> Field {
        Field {
            grid: self.grid.clone(),
            comps: vec![self.comps[c].clone()],
        }
    }

    /// Mean value (zero-frequency coefficient) of component `c`.
    pub fn mean(&self, c: usize) -> f64 {
        self.comps[c].spec[0].re
    }

    /// Pointwise Euclidean magnitude across components.
    pub fn magnitude_samples(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.grid.len()];
        for c in 0..self.components() {
            for (o, v) in out.iter_mut().zip(self.values(c)) {
                *o += v * v;
            }
        }
        for o in &mut out {
            *o = o.sqrt();
        }
        out
    }

    /// Max over lattice and components of |deviation from conjugate
    /// symmetry|; zero for fields built from real samples.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let g = &self.grid;
        let n = g.points_per_axis();
        let mut worst = 0.0f64;
        for comp in &self.comps {
            for idx in 0..g.len() {
                // Mirror index: negate every axis frequency (mod N).
                let mut mirror = 0usize;
                let mut rem = idx;
                let mut mul = 1usize;
                for _ in 0..g.dim() {
                    let i = rem % n;
                    rem /= n;
                    let mi = (n - i) % n;
                    mirror += mi * mul;
                    mul *= n;
                }
                let defect = (comp.spec[idx] - comp.spec[mirror].conj()).norm();
                worst = worst.max(defect);
            }
        }
        worst
    }

    // ----- linear spectral operations ---------------------------------------

    /// Apply a real multiplier, one weight per flattened spectral index,
    /// to every component.
    pub fn multiplier(&self, weight: impl Fn(usize) -> f64) -> Field {
        let comps = self
            .comps
            .iter()
            .map(|c| {
                let spec = c
                    .spec
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * weight(i))
                    .collect();
                Comp::from_spec(spec)
            })
            .collect();
        Field {
            grid: self.grid.clone(),
            comps,
        }
    }

    /// Zero every coefficient with any axis frequency beyond `N/3`.
    pub fn dealias(&self) -> Field {
        let g = self.grid.clone();
        self.multiplier(|i| if g.keeps_dealias(i) { 1.0 } else { 0.0 })
    }

    /// Partial derivative along `axis` of every component (spectral factor
    /// `i (2*pi/period) k_axis`, Nyquist coefficients dropped).
    pub fn partial(&self, axis: usize) -> Field {
        let g = &self.grid;
        let scale = g.frequency_scale();
        let ny = -(g.points_per_axis() as i64) / 2;
        let comps = self
            .comps
            .iter()
            .map(|c| {
                let spec = c
                    .spec
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let k = g.freq_at(i, axis);
                        if k == ny {
                            Complex64::new(0.0, 0.0)
                        } else {
                            v * Complex64::new(0.0, scale * k as f64)
                        }
                    })
                    .collect();
                Comp::from_spec(spec)
            })
            .collect();
        Field {
            grid: self.grid.clone(),
            comps,
        }
    }

    /// Gradient of a scalar field.
    pub fn gradient(&self) -> Result<Field> {
        if !self.is_scalar() {
            return Err(Error::ComponentMismatch {
                expected: 1,
                got: self.components(),
            });
        }
        let parts: Vec<Field> = (0..self.grid.dim()).map(|a| self.partial(a)).collect();
        Field::stack(parts)
    }

    /// Divergence of a vector field.
    pub fn divergence(&self) -> Result<Field> {
        if !self.is_vector() {
            return Err(Error::ComponentMismatch {
                expected: self.grid.dim(),
                got: self.components(),
            });
        }
        let mut acc = self.component(0).partial(0);
        for a in 1..self.grid.dim() {
            acc = &acc + &self.component(a).partial(a);
        }
        Ok(acc)
    }

    /// Laplacian of each component, realized as the composition of the
    /// per-axis derivatives so that `div(grad f) == laplacian(f)` exactly.
    pub fn laplacian(&self) -> Field {
        let g = &self.grid;
        let scale2 = g.frequency_scale().powi(2);
        let ny = -(g.points_per_axis() as i64) / 2;
        let d = g.dim();
        self.multiplier(|i| {
            let mut sq = 0.0;
            for a in 0..d {
                let k = g.freq_at(i, a);
                if k != ny {
                    sq += (k * k) as f64;
                }
            }
            -scale2 * sq
        })
    }

    /// Leray projection onto divergence-free vector fields; the zero mode
    /// passes through unchanged.
    pub fn leray_project(&self) -> Result<Field> {
        if !self.is_vector() {
            return Err(Error::ComponentMismatch {
                expected: self.grid.dim(),
                got: self.components(),
            });
        }
        let g = &self.grid;
        let d = g.dim();
        let len = g.len();
        let mut out: Vec<Vec<Complex64>> = (0..d).map(|a| self.comps[a].spec.clone()).collect();
        for idx in 1..len {
            let mut k = [0f64; 3];
            let mut sq = 0.0;
            for (a, ka) in k.iter_mut().enumerate().take(d) {
                *ka = g.freq_at(idx, a) as f64;
                sq += *ka * *ka;
            }
            if sq == 0.0 {
                continue;
            }
            let mut dot = Complex64::new(0.0, 0.0);
            for (a, o) in out.iter().enumerate().take(d) {
                dot += o[idx] * k[a];
            }
            let coef = dot / sq;
            for (a, o) in out.iter_mut().enumerate().take(d) {
                o[idx] -= coef * k[a];
            }
        }
        Ok(Field::from_spectral(g, out))
    }

    // ----- pointwise operations ---------------------------------------------

    /// Pointwise map of a scalar field's samples.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Field {
        assert!(self.is_scalar(), "map_values expects a scalar field");
        let mapped: Vec<f64> = self.values(0).iter().map(|&v| f(v)).collect();
        Field::from_samples(&self.grid, vec![mapped])
    }

    /// Dealiased pointwise product. One factor must be scalar; the result
    /// inherits the other factor's component count.
    pub fn product(&self, rhs: &Field) -> Result<Field> {
        self.check_grid(rhs)?;
        let (scalar, other) = if self.is_scalar() {
            (self, rhs)
        } else if rhs.is_scalar() {
            (rhs, self)
        } else {
            return Err(Error::ComponentMismatch {
                expected: 1,
                got: self.components(),
            });
        };
        let s = scalar.dealias();
        let o = other.dealias();
        product_pointwise(&s, &o)
    }

    /// Pointwise product without the dealias mask, for solvers that need
    /// their operator and residual to agree exactly on the grid.
    pub fn product_raw(&self, rhs: &Field) -> Result<Field> {
        self.check_grid(rhs)?;
        let (scalar, other) = if self.is_scalar() {
            (self, rhs)
        } else if rhs.is_scalar() {
            (rhs, self)
        } else {
            return Err(Error::ComponentMismatch {
                expected: 1,
                got: self.components(),
            });
        };
        product_pointwise(scalar, other)
    }

    /// Dealiased pointwise dot product of two vector fields.
    pub fn dot(&self, rhs: &Field) -> Result<Field> {
        self.check_grid(rhs)?;
        if !self.is_vector() || !rhs.is_vector() {
            return Err(Error::ComponentMismatch {
                expected: self.grid.dim(),
                got: self.components().min(rhs.components()),
            });
        }
        let a = self.dealias();
        let b = rhs.dealias();
        let mut acc = vec![0.0f64; self.grid.len()];
        for c in 0..self.grid.dim() {
            for ((o, x), y) in acc.iter_mut().zip(a.values(c)).zip(b.values(c)) {
                *o += x * y;
            }
        }
        Ok(Field::from_samples(&self.grid, vec![acc]))
    }

    /// Largest pointwise magnitude across components.
    pub fn max_abs(&self) -> f64 {
        if self.is_scalar() {
            self.values(0).iter().fold(0.0f64, |m, v| m.max(v.abs()))
        } else {
            self.magnitude_samples()
                .iter()
                .fold(0.0f64, |m, v| m.max(*v))
        }
    }

    /// Min and max of a scalar field's samples.
    pub fn min_max(&self) -> (f64, f64) {
        assert!(self.is_scalar());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in self.values(0) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Mean-normalized L2 norm across components, computed spectrally.
    pub fn l2_norm(&self) -> f64 {
        let mut sq = 0.0;
        for c in &self.comps {
            for v in &c.spec {
                sq += v.norm_sqr();
            }
        }
        sq.sqrt()
    }

    pub(crate) fn check_grid(&self, rhs: &Field) -> Result<()> {
        if self.grid.same(&rhs.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(self.grid.label(), rhs.grid.label()))
        }
    }

    /// Linear combination `self + scale * rhs` in spectral space.
    pub fn add_scaled(&self, scale: f64, rhs: &Field) -> Field {
        assert!(self.grid.same(&rhs.grid), "grid mismatch in add_scaled");
        assert_eq!(self.components(), rhs.components());
        let comps = self
            .comps
            .iter()
            .zip(rhs.comps.iter())
            .map(|(a, b)| {
                let spec = a
                    .spec
                    .iter()
                    .zip(b.spec.iter())
                    .map(|(x, y)| x + y * scale)
                    .collect();
                Comp::from_spec(spec)
            })
            .collect();
        Field {
            grid: self.grid.clone(),
            comps,
        }
    }

    /// Scale by a constant.
    pub fn scaled(&self, scale: f64) -> Field {
        let comps = self
            .comps
            .iter()
            .map(|c| Comp::from_spec(c.spec.iter().map(|v| v * scale).collect()))
            .collect();
        Field {
            grid: self.grid.clone(),
            comps,
        }
    }
}

fn product_pointwise(scalar: &Field, other: &Field) -> Result<Field> {
    let s = scalar.values(0);
    let comps: Vec<Vec<f64>> = (0..other.components())
        .map(|c| {
            other
                .values(c)
                .iter()
                .zip(s.iter())
                .map(|(a, b)| a * b)
                .collect()
        })
        .collect();
    Ok(Field::from_samples(other.grid(), comps))
}

/// Advection `(w . grad) f` with dealiased products; `f` may be scalar or
/// vector (applied per component).
pub fn advect(w: &Field, f: &Field) -> Result<Field> {
    if !w.is_vector() {
        return Err(Error::ComponentMismatch {
            expected: w.grid().dim(),
            got: w.components(),
        });
    }
    let d = w.grid().dim();
    let mut parts: Vec<Field> = Vec::with_capacity(f.components());
    for c in 0..f.components() {
        let fc = f.component(c);
        let mut acc = Field::zeros(f.grid(), 1);
        for a in 0..d {
            let term = w.component(a).product(&fc.partial(a))?;
            acc = &acc + &term;
        }
        parts.push(acc);
    }
    if parts.len() == 1 {
        Ok(parts.pop().unwrap())
    } else {
        Field::stack(parts)
    }
}

impl std::ops::Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.add_scaled(1.0, rhs)
    }
}

impl std::ops::Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.add_scaled(-1.0, rhs)
    }
}
