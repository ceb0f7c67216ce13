mod common;

use cnp_core::kernels::{evaluate, hadamard_quotient, is_cnp, is_psd, KernelSpec};
use cnp_core::multcheck::{classify, multiplier_norm, pointwise_bound_excess, MultiplierSymbol};
use cnp_core::samplespace::SampleSpace;
use cnp_core::{Complex64, DEFAULT_TOL_RANK};
use proptest::prelude::*;

use common::{catalog_pair, disc_sample, random_invariant_subspace};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn catalog_kernels_are_psd(seed in any::<u64>(), n in 2usize..12) {
        let x = disc_sample(n, seed);
        for spec in [KernelSpec::Szego, KernelSpec::Bergman, KernelSpec::PowerAlpha { alpha: 0.5 }] {
            let k = evaluate(&spec, &x).unwrap();
            prop_assert!(is_psd(&k, 1e-10).verdict, "{spec:?}");
        }
    }

    #[test]
    fn cnp_kernels_pass_on_random_samples(seed in any::<u64>(), n in 2usize..12) {
        let x = disc_sample(n, seed);
        for alpha in [0.25, 0.5, 1.0] {
            let s = evaluate(&KernelSpec::PowerAlpha { alpha }, &x).unwrap();
            prop_assert!(is_cnp(&s, None, 1e-9).unwrap().verdict);
        }
    }

    #[test]
    fn subspace_kernel_quotient_is_psd(seed in any::<u64>(), which in 0usize..4, p in 1usize..3) {
        let pair = catalog_pair(which, 7, seed);
        let m = random_invariant_subspace(&pair.k, p, seed);
        let q = hadamard_quotient(&m.kernel(), &pair.s).unwrap();
        let report = is_psd(&q, 1e-9);
        prop_assert!(report.verdict, "{}: {}", pair.name, report.min_eigenvalue);
    }

    #[test]
    fn projection_is_idempotent_and_reproduces(seed in any::<u64>(), which in 0usize..4) {
        let pair = catalog_pair(which, 6, seed);
        let m = random_invariant_subspace(&pair.k, 1, seed);
        let space = m.space();
        let f = space.kernel_section(0, &cnp_core::linalg::unit(1, 0)).unwrap();
        let pf = space.project(&m, &f).unwrap();
        let ppf = space.project(&m, &pf).unwrap();
        prop_assert!((pf.values() - ppf.values()).norm() <= 1e-9 * (1.0 + pf.norm()));
        prop_assert!(m.residual(&pf).unwrap() < 1e-8);
        prop_assert!(space.is_pointwise_invariant(&m, 1e-8).verdict);
    }

    #[test]
    fn contractive_iff_norm_at_most_one(
        seed in any::<u64>(),
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4),
        scale in 0.2f64..1.6,
    ) {
        let x = disc_sample(6, seed);
        let s = evaluate(&KernelSpec::Szego, &x).unwrap();
        let total: f64 = coeffs.iter().map(|(a, b)| a.hypot(*b)).sum::<f64>().max(1e-3);
        let poly: Vec<Complex64> =
            coeffs.iter().map(|&(a, b)| Complex64::new(a, b) * (scale / total)).collect();
        let phi = MultiplierSymbol::scalar(x, move |z| {
            poly.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a)
        });
        let contractive = classify(&s, &s, &phi, 1e-10).unwrap().contractive;
        let norm = multiplier_norm(&s, &s, &phi).unwrap();
        if contractive {
            prop_assert!(norm <= 1.0 + 1e-6, "contractive but norm {norm}");
            prop_assert!(pointwise_bound_excess(&s, &s, &phi).unwrap() <= 1e-9);
        }
        if norm <= 1.0 - 1e-6 {
            prop_assert!(contractive, "norm {norm} but not contractive");
        }
    }
}

#[test]
fn sample_space_dimension_matches_rank() {
    let x = disc_sample(8, 42);
    let k = evaluate(&KernelSpec::Bergman, &x).unwrap();
    let space = SampleSpace::new(k.clone(), DEFAULT_TOL_RANK).unwrap();
    assert_eq!(space.dim(), cnp_core::linalg::numerical_rank(k.entries(), DEFAULT_TOL_RANK));
}
