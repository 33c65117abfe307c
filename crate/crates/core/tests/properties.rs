//! Randomized structural invariants: identities that must hold for every
//! admissible input, checked over random shapes, bands and amplitudes.

use std::f64::consts::PI;
use std::sync::Arc;

use bzm_core::besov::besov_norm;
use bzm_core::dyadic::{dyadic_block, low_pass};
use bzm_core::model::{rescale_state, FlowState};
use bzm_core::paradiff::{paraproduct, remainder, young_split};
use bzm_core::sampling::{random_scalar, random_solenoidal, random_vector, BandSpec};
use bzm_core::solver::heat_semigroup;
use bzm_core::{BesovParams, Field, Grid, KappaSpec, PhysicalParams};
use proptest::prelude::*;

fn torus(d: usize, n: usize) -> Arc<Grid> {
    Grid::new(d, n, 2.0 * PI).unwrap()
}

/// Random grid shapes kept small enough for many cases.
fn shapes() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![
        (Just(2usize), prop_oneof![Just(8usize), Just(16), Just(32)]),
        (Just(3usize), prop_oneof![Just(8usize), Just(16)]),
    ]
}

fn bands() -> impl Strategy<Value = BandSpec> {
    (any::<bool>(), 0.1f64..4.0).prop_map(|(broad, amp)| {
        if broad {
            BandSpec::broadband(amp)
        } else {
            BandSpec::smooth(amp)
        }
    })
}

/// Raw samples from a plain linear congruential generator: deliberately not
/// band-limited and independent of the library's samplers.
fn raw_samples(grid: &Arc<Grid>, seed: u64) -> Vec<f64> {
    let mut s = seed | 1;
    (0..grid.len())
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn raw_field(grid: &Arc<Grid>, seed: u64) -> Field {
    Field::from_samples(grid, vec![raw_samples(grid, seed)])
}

fn rel(defect: f64, scale: f64) -> f64 {
    defect / scale.max(1e-30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn samples_round_trip_through_the_transform((d, n) in shapes(), seed in any::<u64>()) {
        let g = torus(d, n);
        let f = raw_field(&g, seed);
        prop_assert!(f.conjugate_symmetry_defect() <= 1e-15);
        // Construction keeps the caller's samples verbatim.
        prop_assert_eq!(f.values(0), &raw_samples(&g, seed)[..]);
        // Forcing the lazy inverse and transforming again lands back on the
        // same coefficients.
        let spectral_only = Field::from_spectral(&g, vec![f.spectral(0).to_vec()]);
        let back = Field::from_samples(&g, vec![spectral_only.values(0).to_vec()]);
        let drift = (&back - &f).max_abs();
        prop_assert!(rel(drift, f.max_abs()) <= 1e-13, "round-trip drift {drift:.2e}");
    }

    #[test]
    fn spectral_and_pointwise_energies_agree((d, n) in shapes(), seed in any::<u64>()) {
        let g = torus(d, n);
        let f = raw_field(&g, seed);
        let spectral = f.l2_norm().powi(2);
        let pointwise =
            f.values(0).iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        prop_assert!(
            rel((spectral - pointwise).abs(), pointwise) <= 1e-12,
            "Parseval defect: {spectral} vs {pointwise}"
        );
    }

    #[test]
    fn blocks_partition_every_field((d, n) in shapes(), seed in any::<u64>(), band in bands()) {
        let g = torus(d, n);
        let f = random_scalar(&g, seed, &band);
        let mut sum = Field::zeros(&g, 1);
        for j in g.block_range() {
            sum = &sum + &dyadic_block(&f, j).unwrap();
        }
        let defect = (&sum - &f).max_abs();
        prop_assert!(rel(defect, f.max_abs()) <= 1e-12, "reconstruction defect {defect:.2e}");
    }

    #[test]
    fn distant_blocks_annihilate((d, n) in shapes(), seed in any::<u64>()) {
        let g = torus(d, n);
        let f = random_scalar(&g, seed, &BandSpec::broadband(1.0));
        let scale = f.max_abs();
        for j in g.block_range() {
            let bj = dyadic_block(&f, j).unwrap();
            for k in g.block_range() {
                if (j - k).abs() < 2 {
                    continue;
                }
                let cross = dyadic_block(&bj, k).unwrap().max_abs();
                prop_assert!(
                    rel(cross, scale) <= 1e-14,
                    "blocks {j} and {k} overlap by {cross:.2e}"
                );
            }
        }
    }

    #[test]
    fn low_pass_telescopes_the_blocks((d, n) in shapes(), seed in any::<u64>(), band in bands()) {
        let g = torus(d, n);
        let f = random_scalar(&g, seed, &band);
        let mut partial = Field::zeros(&g, 1);
        for j in 0..=g.max_block() + 1 {
            // After this update `partial` holds every block strictly below j.
            partial = &partial + &dyadic_block(&f, j - 1).unwrap();
            if j >= 1 {
                let defect = (&low_pass(&f, j) - &partial).max_abs();
                prop_assert!(
                    rel(defect, f.max_abs()) <= 1e-13,
                    "telescoping defect {defect:.2e} at level {j}"
                );
            }
        }
    }

    #[test]
    fn product_splitting_rebuilds_the_dealiased_product(
        (d, n) in shapes(),
        seeds in (any::<u64>(), any::<u64>()),
        bands in (bands(), bands()),
    ) {
        let g = torus(d, n);
        let u = random_scalar(&g, seeds.0, &bands.0);
        let v = random_scalar(&g, seeds.1, &bands.1);
        let split = &(&paraproduct(&u, &v).unwrap() + &paraproduct(&v, &u).unwrap())
            + &remainder(&u, &v).unwrap();
        let product = u.product(&v).unwrap();
        let defect = (&split - &product).l2_norm();
        prop_assert!(rel(defect, product.l2_norm()) <= 1e-10, "splitting defect {defect:.2e}");
        let swap = (&v.product(&u).unwrap() - &product).max_abs();
        prop_assert!(rel(swap, product.max_abs()) <= 1e-14, "product asymmetry {swap:.2e}");
    }

    #[test]
    fn paraproduct_is_bilinear(
        (d, n) in shapes(),
        seeds in (any::<u64>(), any::<u64>(), any::<u64>()),
        a in -8.0f64..8.0,
    ) {
        let g = torus(d, n);
        let f = random_scalar(&g, seeds.0, &BandSpec::broadband(1.0));
        let h = random_scalar(&g, seeds.1, &BandSpec::smooth(1.0));
        let v = random_scalar(&g, seeds.2, &BandSpec::broadband(1.0));
        let combined = paraproduct(&f.scaled(a).add_scaled(1.0, &h), &v).unwrap();
        let expanded = paraproduct(&f, &v).unwrap().scaled(a)
            .add_scaled(1.0, &paraproduct(&h, &v).unwrap());
        let defect = (&combined - &expanded).max_abs();
        let scale = combined.max_abs().max(expanded.max_abs());
        prop_assert!(rel(defect, scale) <= 1e-12, "bilinearity defect {defect:.2e}");
    }

    #[test]
    fn besov_norm_is_absolutely_homogeneous(
        (d, n) in shapes(),
        seed in any::<u64>(),
        band in bands(),
        a in prop_oneof![-30.0f64..-0.01, 0.01f64..30.0],
        s in 0.25f64..2.0,
    ) {
        let g = torus(d, n);
        let f = random_scalar(&g, seed, &band);
        let params = BesovParams::new(s, 2.0, 1.0).unwrap();
        let direct = besov_norm(&f.scaled(a), &params).unwrap();
        let scaled = a.abs() * besov_norm(&f, &params).unwrap();
        prop_assert!(
            rel((direct - scaled).abs(), scaled) <= 1e-12,
            "homogeneity defect: {direct} vs {scaled}"
        );
    }

    #[test]
    fn besov_norm_shrinks_as_summability_relaxes(
        (d, n) in shapes(),
        seed in any::<u64>(),
        band in bands(),
        s in 0.25f64..2.0,
    ) {
        let g = torus(d, n);
        let f = random_scalar(&g, seed, &band);
        let tight = besov_norm(&f, &BesovParams::new(s, 2.0, 1.0).unwrap()).unwrap();
        let middle = besov_norm(&f, &BesovParams::new(s, 2.0, 2.0).unwrap()).unwrap();
        let loose = besov_norm(&f, &BesovParams::new(s, 2.0, f64::INFINITY).unwrap()).unwrap();
        prop_assert!(tight >= middle * (1.0 - 1e-12));
        prop_assert!(middle >= loose * (1.0 - 1e-12));
    }

    #[test]
    fn heat_semigroup_composes_and_contracts(
        (d, n) in shapes(),
        seed in any::<u64>(),
        band in bands(),
        t in 0.0f64..0.5,
        s in 0.0f64..0.5,
    ) {
        let g = torus(d, n);
        let f = random_scalar(&g, seed, &band);
        let two_step = heat_semigroup(&heat_semigroup(&f, t).unwrap(), s).unwrap();
        let one_step = heat_semigroup(&f, t + s).unwrap();
        let defect = (&two_step - &one_step).max_abs();
        prop_assert!(rel(defect, f.max_abs()) <= 1e-13, "composition defect {defect:.2e}");
        prop_assert!(one_step.max_abs() <= f.max_abs() * (1.0 + 1e-12), "sup norm grew");
        prop_assert!(one_step.l2_norm() <= f.l2_norm() * (1.0 + 1e-12), "energy grew");
    }

    #[test]
    fn leray_projection_is_idempotent_and_kills_gradients(
        (d, n) in shapes(),
        seeds in (any::<u64>(), any::<u64>()),
    ) {
        let g = torus(d, n);
        let w = random_vector(&g, seeds.0, &BandSpec::broadband(1.0));
        let p = w.leray_project().unwrap();
        let twice = p.leray_project().unwrap();
        prop_assert!(rel((&twice - &p).max_abs(), p.max_abs()) <= 1e-13);
        prop_assert!(rel(p.divergence().unwrap().max_abs(), w.max_abs()) <= 1e-13);
        let grad = random_scalar(&g, seeds.1, &BandSpec::smooth(1.0)).gradient().unwrap();
        prop_assert!(rel(grad.leray_project().unwrap().max_abs(), grad.max_abs()) <= 1e-13);
    }

    #[test]
    fn rescaling_scales_the_invariant_norms_exactly(
        seeds in (any::<u64>(), any::<u64>(), any::<u64>()),
        m in 1u32..=2,
    ) {
        let g = torus(2, 16);
        let params = PhysicalParams::reference(KappaSpec::Constant { kappa0: 1.0 });
        let rho = &Field::constant(&g, 1.0)
            + &random_scalar(&g, seeds.0, &BandSpec::smooth(0.1));
        let u = random_solenoidal(&g, seeds.1, &BandSpec::smooth(1.0));
        let grad_pi = random_scalar(&g, seeds.2, &BandSpec::smooth(1.0)).gradient().unwrap();
        let state = FlowState::new(rho.clone(), u.clone(), grad_pi.clone(), params).unwrap();
        let eps = 0.5f64.powi(m as i32);
        let fine = rescale_state(&state, eps).unwrap();

        let dev = &rho - &Field::constant(&g, 1.0);
        let dev_fine = fine.rho() - &Field::constant(fine.grid(), 1.0);
        prop_assert!(rel((dev_fine.l2_norm() - dev.l2_norm()).abs(), dev.l2_norm()) <= 1e-13);
        prop_assert!(rel((fine.rho().mean(0) - rho.mean(0)).abs(), 1.0) <= 1e-14);
        let factor = 1.0 / eps;
        prop_assert!(
            rel((fine.u().l2_norm() - factor * u.l2_norm()).abs(), u.l2_norm()) <= 1e-12
        );
        prop_assert!(
            rel(
                (fine.grad_pi().l2_norm() - factor.powi(3) * grad_pi.l2_norm()).abs(),
                factor.powi(3) * grad_pi.l2_norm(),
            ) <= 1e-12
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn young_split_dominates_the_product(
        a in 0.0f64..50.0,
        b in 0.0f64..50.0,
        theta in 0.05f64..0.95,
        log_eps in -3.0f64..3.0,
    ) {
        let bound = young_split(a, b, theta, 10f64.powf(log_eps)).unwrap();
        prop_assert!(
            a * b <= bound * (1.0 + 1e-12) + 1e-280,
            "product {} above split bound {bound}",
            a * b
        );
    }
}
