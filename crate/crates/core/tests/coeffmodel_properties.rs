use cnp_core::coeffmodel::{
    diag_subspace_kernel, generate_invariant_subspace, inclusion_sigma_min, root_function,
    CoeffSeriesSpace, InvariantSubspace, PolyElement, WeightFamily,
};
use cnp_core::Complex64;
use proptest::prelude::*;

fn family(i: usize) -> WeightFamily {
    match i % 4 {
        0 => WeightFamily::Hardy,
        1 => WeightFamily::Bergman,
        2 => WeightFamily::PowerAlpha { alpha: 3.0 },
        _ => WeightFamily::Dirichlet,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn nested_subspaces_have_ordered_root_functions(
        fam in 0usize..4,
        a in (-0.9f64..0.9, -0.9f64..0.9),
        b in (-0.9f64..0.9, -0.9f64..0.9),
        r in 0.0f64..0.98,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let space = family(fam).space(60).unwrap();
        let a = Complex64::new(a.0, a.1);
        let b = Complex64::new(b.0, b.1);
        let qa = PolyElement::root_power(a, 1);
        let mut qab = vec![Complex64::new(0.0, 0.0); 3];
        let pb = PolyElement::root_power(b, 1);
        for (i, x) in qa.coeffs().iter().enumerate() {
            for (j, y) in pb.coeffs().iter().enumerate() {
                qab[i + j] += x * y;
            }
        }
        let m = generate_invariant_subspace(&space, &[qa]).unwrap();
        let n = generate_invariant_subspace(&space, &[PolyElement::new(qab)]).unwrap();
        let z = Complex64::from_polar(r, theta);
        let gm = root_function(&space, &m, &[z])[0];
        let gn = root_function(&space, &n, &[z])[0];
        prop_assert!(gn <= gm + 1e-10, "{gn} > {gm}");
        prop_assert!((-1e-12..=1.0 + 1e-8).contains(&gm));
    }

    #[test]
    fn whole_space_diagonal_is_kernel(fam in 0usize..4, r in 0.0f64..0.99, theta in 0.0f64..std::f64::consts::TAU) {
        let space = family(fam).space(80).unwrap();
        let z = Complex64::from_polar(r, theta);
        let kd = diag_subspace_kernel(&space, &InvariantSubspace::whole(&space), &[z])[0];
        let k = space.kernel_diag(z);
        prop_assert!((kd - k).abs() <= 1e-10 * k);
    }
}

#[test]
fn monomial_generated_closed_form_is_exact() {
    let space = CoeffSeriesSpace::bergman(50);
    for j in [0, 2, 5] {
        let m = generate_invariant_subspace(&space, &[PolyElement::monomial(j)]).unwrap();
        for r in [0.2, 0.6, 0.9] {
            let z = Complex64::new(r, 0.0);
            let expected: f64 = (j..=50).map(|k| (k + 1) as f64 * (r * r).powi(k as i32)).sum();
            let got = diag_subspace_kernel(&space, &m, &[z])[0];
            assert!((got - expected).abs() <= 1e-12 * expected);
        }
    }
}

#[test]
fn inclusion_sigma_strictly_decreases() {
    let h = WeightFamily::Hardy.weights(500);
    let a = WeightFamily::Bergman.weights(500);
    let values: Vec<f64> = (0..=500).map(|d| inclusion_sigma_min(d, &h, &a).unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
    assert!(values[500] < 0.045);
}
