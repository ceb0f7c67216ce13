mod common;

use cnp_core::beurling::{connecting_partial_isometry, is_minimal, synthesize, verify_representation};
use cnp_core::leech::{arias_pipeline, solve};
use cnp_core::linalg::c;
use cnp_core::multcheck::MultiplierSymbol;
use cnp_core::samplespace::{PointConstraint, PointwiseConstraintSpec, SampleSpace};
use cnp_core::{Complex64, Tolerances, DEFAULT_TOL_RANK};
use proptest::prelude::*;

use common::{catalog_pair, disc_sample, random_invariant_subspace};

fn blaschke(a: Complex64) -> impl Fn(Complex64) -> Complex64 {
    move |z| (z - a) / (c(1.0) - a.conj() * z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn synthesis_round_trip(seed in any::<u64>(), which in 0usize..4, p in 1usize..3) {
        let pair = catalog_pair(which, 6, seed);
        let m = random_invariant_subspace(&pair.k, p, seed);
        let r = synthesize(&m.kernel(), &pair.s, &Tolerances::default()).unwrap();
        prop_assert!(r.partial_isometry_ok, "{}", pair.name);
        prop_assert!(is_minimal(&r.phi, DEFAULT_TOL_RANK));
        let check = verify_representation(&r, &pair.s, &m, 1e-7);
        prop_assert!(check.is_ok(), "{}: {:?}", pair.name, check);
    }

    #[test]
    fn padding_is_connected_by_an_isometry(seed in any::<u64>(), which in 0usize..4, extra in 1usize..3) {
        let pair = catalog_pair(which, 6, seed);
        let m = random_invariant_subspace(&pair.k, 1, seed);
        let phi = synthesize(&m.kernel(), &pair.s, &Tolerances::default()).unwrap().phi;
        let padded = phi.pad_zero_columns(extra);
        let v = connecting_partial_isometry(&phi, &padded, 1e-8).unwrap();
        prop_assert!(v.isometry_residual <= 1e-8);
        prop_assert!(v.forward_residual <= 1e-8 && v.backward_residual <= 1e-8);
    }

    #[test]
    fn hardy_single_zero_is_blaschke(seed in any::<u64>(), zero in 0usize..6) {
        let x = disc_sample(6, seed);
        let pair = catalog_pair(0, 6, seed);
        let space = SampleSpace::new(pair.k.clone(), DEFAULT_TOL_RANK).unwrap();
        let m = space
            .subspace_from_constraints(&PointwiseConstraintSpec::zeros(&[zero], 1), DEFAULT_TOL_RANK)
            .unwrap();
        let r = synthesize(&m.kernel(), &pair.s, &Tolerances::default()).unwrap();
        prop_assert_eq!(r.rank_f, 1);
        let b = blaschke(x.point(zero).z());
        for i in 0..6 {
            let got = r.phi.block(i)[(0, 0)].norm();
            prop_assert!((got - b(x.point(i).z()).norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn leech_certificates_on_nested_subspaces(seed in any::<u64>(), which in 0usize..4) {
        let pair = catalog_pair(which, 6, seed);
        let space = SampleSpace::new(pair.k.clone(), DEFAULT_TOL_RANK).unwrap();
        let zeros_m = PointwiseConstraintSpec::zeros(&[1], 1);
        let zeros_n = PointwiseConstraintSpec::new(vec![PointConstraint::zero(1, 1), PointConstraint::zero(3, 1)]);
        let m = space.subspace_from_constraints(&zeros_m, DEFAULT_TOL_RANK).unwrap();
        let n = space.subspace_from_constraints(&zeros_n, DEFAULT_TOL_RANK).unwrap();
        let tols = Tolerances::default();
        let phi = synthesize(&m.kernel(), &pair.s, &tols).unwrap().phi;
        let psi = synthesize(&n.kernel(), &pair.s, &tols).unwrap().phi;
        let r = solve(&pair.s, &phi, &psi, &tols).unwrap();
        prop_assert!(r.gram_residual <= 1e-8);
        prop_assert!(r.factor_residual <= 1e-7, "{}: {}", pair.name, r.factor_residual);
        prop_assert!(r.contractivity_min_eig >= -1e-9, "{}: {}", pair.name, r.contractivity_min_eig);

        let pipeline = arias_pipeline(&m, &n, &pair.s, &tols).unwrap();
        prop_assert!(pipeline.composite_sigma_deviation <= 1e-7, "{}", pair.name);
        prop_assert!(pipeline.projection_residual <= 1e-7, "{}", pair.name);
    }
}

#[test]
fn scalar_one_is_minimal() {
    let x = disc_sample(4, 1);
    assert!(is_minimal(&MultiplierSymbol::scalar(x, |_| c(1.0)), DEFAULT_TOL_RANK));
}
