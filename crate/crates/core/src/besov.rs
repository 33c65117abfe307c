//! Lebesgue and dyadic-weighted (Besov) norms on grid fields.
//!
//! Grid norms are unit-volume normalized: `L^p` is the mean of `|f|^p` to
//! the power `1/p`, `L^inf` the sample max, so constants have norm equal to
//! their magnitude for every exponent. The Besov norm weights the `L^p`
//! norms of the dyadic blocks by `2^{js}` and combines them in `l^r`;
//! vector fields combine their per-component values in `l^r` as well.

use serde::Serialize;

use crate::dyadic::dyadic_block;
use crate::field::Field;
use crate::{Error, Result};

/// Regularity/integrability/summation triple `(s, p, r)`; `p` and `r` may be
/// `f64::INFINITY`. Admissibility flags are derived on demand from the grid
/// dimension so they can never go stale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::InvalidInput(format!("regularity s={s}")));
        }
        check_exponent(p)?;
        check_exponent(r)?;
        Ok(BesovParams { s, p, r })
    }

    /// The Lipschitz-scale condition: `s > 1 + d/p`, or equality with `r = 1`.
    pub fn satisfies_lipschitz_condition(&self, d: usize) -> bool {
        let critical = 1.0 + d as f64 / self.p;
        self.s > critical || (self.s == critical && self.r == 1.0)
    }

    /// The pressure-estimate condition on integrability: `p` in `[2, 4]`.
    pub fn satisfies_pressure_condition(&self) -> bool {
        (2.0..=4.0).contains(&self.p)
    }

    /// Same `(p, r)`, shifted regularity.
    pub fn with_s(&self, s: f64) -> Self {
        BesovParams { s, ..*self }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}

/// Unit-volume-normalized `L^p` norm of raw samples.
pub fn lp_norm_samples(samples: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(samples.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let mean = samples.iter().map(|v| v.abs().powf(p)).sum::<f64>() / samples.len() as f64;
    Ok(mean.powf(1.0 / p))
}

/// `L^p` norm of a field; vector fields use the pointwise Euclidean
/// magnitude.
pub fn lebesgue_norm(f: &Field, p: f64) -> Result<f64> {
    if f.is_scalar() {
        lp_norm_samples(f.values(0), p)
    } else {
        lp_norm_samples(&f.magnitude_samples(), p)
    }
}

/// Combine nonnegative values in `l^r` (`r = inf` takes the max).
pub fn lr_combine(values: impl IntoIterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        values.into_iter().fold(0.0f64, f64::max)
    } else {
        values
            .into_iter()
            .map(|v| v.powf(r))
            .sum::<f64>()
            .powf(1.0 / r)
    }
}

/// Per-block weighted `L^p` norms `2^{js} ||block_j f||_p` for one scalar
/// component, over the grid's full block range.
pub fn block_weights(f: &Field, params: &BesovParams) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for j in f.grid().block_range() {
        let b = dyadic_block(f, j)?;
        let w = (j as f64 * params.s).exp2() * lebesgue_norm(&b, params.p)?;
        out.push(w);
    }
    Ok(out)
}

/// Dyadic-weighted norm of a scalar or vector field.
pub fn besov_norm(f: &Field, params: &BesovParams) -> Result<f64> {
    let per_comp: Vec<f64> = (0..f.components())
        .map(|c| {
            let comp = f.component(c);
            Ok(lr_combine(block_weights(&comp, params)?, params.r))
        })
        .collect::<Result<_>>()?;
    Ok(lr_combine(per_comp, params.r))
}

/// Besov norm of the intersection space: max of the norms at the two
/// parameter triples (used for `B^{d/p}_{p,1} \cap B^{s-1}_{p,r}` style
/// quantities).
pub fn besov_norm_max(f: &Field, a: &BesovParams, b: &BesovParams) -> Result<f64> {
    Ok(besov_norm(f, a)?.max(besov_norm(f, b)?))
}

/// Report of an embedding probe over an ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub source: BesovParams,
    pub target: BesovParams,
    pub per_sample: Vec<f64>,
    pub max_ratio: f64,
}

/// Check the embedding admissibility of `source -> target` in dimension `d`:
/// `p1 <= p2` and either `s2 < s1 - d/p1 + d/p2`, or equality with
/// `r1 <= r2`.
pub fn embedding_admissible(d: usize, source: &BesovParams, target: &BesovParams) -> Result<()> {
    if source.p > target.p {
        return Err(Error::InadmissiblePair(format!(
            "integrabilities must not decrease: p1={} > p2={}",
            source.p, target.p
        )));
    }
    let shifted = source.s - d as f64 / source.p + d as f64 / target.p;
    if target.s < shifted - 1e-12 {
        return Ok(());
    }
    if (target.s - shifted).abs() <= 1e-12 && source.r <= target.r {
        return Ok(());
    }
    Err(Error::InadmissiblePair(format!(
        "need s2 < s1 - d/p1 + d/p2 (or equality with r1 <= r2); got s2={}, shifted s1={}",
        target.s, shifted
    )))
}

/// Measure `besov_norm(f, target) / besov_norm(f, source)` over an ensemble;
/// refuses inadmissible parameter pairs.
pub fn embedding_probe(
    ensemble: &[Field],
    source: &BesovParams,
    target: &BesovParams,
) -> Result<EmbeddingReport> {
    if ensemble.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    embedding_admissible(ensemble[0].grid().dim(), source, target)?;
    let mut per_sample = Vec::with_capacity(ensemble.len());
    for f in ensemble {
        let denom = besov_norm(f, source)?;
        let numer = besov_norm(f, target)?;
        if denom == 0.0 {
            per_sample.push(0.0);
        } else {
            per_sample.push(numer / denom);
        }
    }
    let max_ratio = per_sample.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(EmbeddingReport {
        source: *source,
        target: *target,
        per_sample,
        max_ratio,
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
    fn lebesgue_norm_of_constants_and_cosines() {
        let g = grid();
        let one = Field::constant(&g, 1.0);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((lebesgue_norm(&one, p).unwrap() - 1.0).abs() < 1e-14);
        }
        let c = Field::scalar_from_fn(&g, |x| x[0].cos());
        assert!((lebesgue_norm(&c, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-10);
        assert!((lebesgue_norm(&c, f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn besov_norm_of_zero_and_constants() {
        let g = grid();
        let zero = Field::zeros(&g, 1);
        let params = BesovParams::new(1.5, 2.0, 1.0).unwrap();
        assert_eq!(besov_norm(&zero, &params).unwrap(), 0.0);
        // Constants live in block -1 with weight 2^{-s}.
        let one = Field::constant(&g, 1.0);
        for s in [0.5, 1.0, 2.25] {
            let p = BesovParams::new(s, 4.0, 1.0).unwrap();
            assert!((besov_norm(&one, &p).unwrap() - (-s).exp2()).abs() < 1e-12);
        }
    }

    #[test]
    fn besov_norm_of_a_single_mode_matches_cutoff_arithmetic() {
        let g = grid();
        let f = Field::scalar_from_fn(&g, |x| (4.0 * x[0]).cos());
        let params = BesovParams::new(1.25, 2.0, 1.0).unwrap();
        let lp = lebesgue_norm(&f, 2.0).unwrap();
        let mut expect = 0.0;
        for j in g.block_range() {
            expect += (j as f64 * params.s).exp2() * g.cutoff().block_weight(j, 4.0) * lp;
        }
        assert!((besov_norm(&f, &params).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn besov_norm_is_homogeneous_and_r_monotone() {
        let g = grid();
        let f = random_scalar(&g, 21, &BandSpec::broadband(1.0));
        let p1 = BesovParams::new(0.75, 2.0, 1.0).unwrap();
        let n1 = besov_norm(&f, &p1).unwrap();
        let n1_scaled = besov_norm(&f.scaled(-3.5), &p1).unwrap();
        assert!((n1_scaled - 3.5 * n1).abs() <= 1e-12 * n1.max(1.0));
        for r2 in [1.5, 2.0, f64::INFINITY] {
            let p2 = BesovParams::new(0.75, 2.0, r2).unwrap();
            assert!(besov_norm(&f, &p2).unwrap() <= n1 + 1e-14);
        }
    }

    #[test]
    fn single_block_field_has_the_pure_weight() {
        let g = grid();
        // |k| = 11 sits where phi(11/8) = chi(11/16) - chi(11/8) = 1 - 0 = 1
        // and all other blocks vanish, so the field equals its own block 3.
        let pure = Field::scalar_from_fn(&g, |x| (11.0 * x[0]).cos());
        let again = dyadic_block(&pure, 3).unwrap();
        assert!(
            (&again - &pure).max_abs() < 1e-13,
            "mode 11 should live entirely in block 3"
        );
        for (s, p, r) in [(0.5, 2.0, 1.0), (2.0, 4.0, f64::INFINITY)] {
            let params = BesovParams::new(s, p, r).unwrap();
            let expect = (3.0 * s).exp2() * lebesgue_norm(&pure, p).unwrap();
            assert!((besov_norm(&pure, &params).unwrap() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn embedding_probe_accepts_identity_and_rejects_bad_pairs() {
        let g = grid();
        let fs: Vec<Field> = (0..4)
            .map(|i| random_scalar(&g, i, &BandSpec::broadband(1.0)))
            .collect();
        let a = BesovParams::new(1.0, 2.0, 1.0).unwrap();
        let rep = embedding_probe(&fs, &a, &a).unwrap();
        assert!((rep.max_ratio - 1.0).abs() < 1e-12);

        let worse = BesovParams::new(1.5, 2.0, 1.0).unwrap();
        assert!(matches!(
            embedding_probe(&fs, &a, &worse),
            Err(Error::InadmissiblePair(_))
        ));
    }

    #[test]
    fn embedding_ratio_for_shifted_smoothness_on_one_mode() {
        let g = grid();
        let j0 = 3;
        let pure = Field::scalar_from_fn(&g, |x| (11.0 * x[0]).cos());
        let hi = BesovParams::new(2.0, 2.0, 1.0).unwrap();
        let lo = BesovParams::new(1.0, 2.0, 1.0).unwrap();
        let rep = embedding_probe(std::slice::from_ref(&pure), &hi, &lo).unwrap();
        let expect = (-(j0 as f64)).exp2();
        assert!(
            (rep.max_ratio - expect).abs() < 1e-10,
            "ratio {} vs 2^-j0 {}",
            rep.max_ratio,
            expect
        );
    }

    #[test]
    fn sup_norm_is_controlled_by_the_critical_besov_norm() {
        let g = grid();
        let params = BesovParams::new(1.0, 2.0, 1.0).unwrap(); // d/p = 1 here
        let mut worst: f64 = 0.0;
        for seed in 0..8 {
            let f = random_scalar(&g, seed, &BandSpec::broadband(1.0));
            let ratio =
                lebesgue_norm(&f, f64::INFINITY).unwrap() / besov_norm(&f, &params).unwrap();
            worst = worst.max(ratio);
        }
        assert!(worst.is_finite() && worst < 10.0, "constant blew up: {worst}");
    }
}
