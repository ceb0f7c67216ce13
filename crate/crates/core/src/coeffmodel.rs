//! Degree-truncated model of a radially weighted space on the disc.
//!
//! The kernel is `k(z, w) = Σ_{m ≤ D} c_m (z w̄)^m`, so monomials are
//! orthogonal with `‖z^m‖² = 1/c_m`. Elements are stored in scaled
//! coordinates `x_m = a_m / √c_m`, in which the inner product is Euclidean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec};
use crate::Complex64;

/// Change in `G` under doubling `D` above which a sweep is flagged.
pub const TRUNCATION_FLAG: f64 = 1e-3;
/// Default truncation degree for sweeps.
pub const DEFAULT_DEGREE: usize = 400;
/// Default radii for sweeps.
pub const DEFAULT_RADII: [f64; 4] = [0.5, 0.9, 0.99, 0.999];

/// Residual norm, relative to the original, below which a spanning vector is dependent.
const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum WeightFamily {
    /// `c_m = 1`.
    Hardy,
    /// `c_m = m + 1`.
    Bergman,
    /// Coefficients of `(1 − x)^{−α}`.
    PowerAlpha { alpha: f64 },
    /// `c_m = 1/(m + 1)`.
    Dirichlet,
}

impl WeightFamily {
    pub fn weights(&self, degree: usize) -> Vec<f64> {
        match *self {
            WeightFamily::Hardy => vec![1.0; degree + 1],
            WeightFamily::Bergman => (0..=degree).map(|m| (m + 1) as f64).collect(),
            WeightFamily::Dirichlet => (0..=degree).map(|m| 1.0 / (m + 1) as f64).collect(),
            WeightFamily::PowerAlpha { alpha } => {
                let mut out = Vec::with_capacity(degree + 1);
                let mut cur = 1.0;
                for m in 0..=degree {
                    if m > 0 {
                        cur *= (m as f64 - 1.0 + alpha) / m as f64;
                    }
                    out.push(cur);
                }
                out
            }
        }
    }

    pub fn space(&self, degree: usize) -> Result<CoeffSeriesSpace> {
        CoeffSeriesSpace::new(self.weights(degree))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoeffSeriesSpace {
    weights: Vec<f64>,
    sqrt_weights: Vec<f64>,
}

impl CoeffSeriesSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSpec("at least one weight is required".into()));
        }
        if let Some(m) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidSpec(format!(
                "weight c_{m} = {} is not a positive number",
                weights[m]
            )));
        }
        let sqrt_weights = weights.iter().map(|w| w.sqrt()).collect();
        Ok(Self {
            weights,
            sqrt_weights,
        })
    }

    pub fn hardy(degree: usize) -> Self {
        WeightFamily::Hardy.space(degree).expect("positive weights")
    }

    pub fn bergman(degree: usize) -> Self {
        WeightFamily::Bergman.space(degree).expect("positive weights")
    }

    /// Truncation degree `D`.
    pub fn degree(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `k(z, z) = Σ c_m |z|^{2m}`.
    pub fn kernel_diag(&self, z: Complex64) -> f64 {
        let r2 = z.norm_sqr();
        self.weights.iter().rev().fold(0.0, |acc, w| acc * r2 + w)
    }

    /// `⟨f, g⟩ = Σ a_m b̄_m / c_m`.
    pub fn inner(&self, f: &PolyElement, g: &PolyElement) -> Complex64 {
        f.coeffs
            .iter()
            .zip(&g.coeffs)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b.conj() / w)
            .sum()
    }

    pub fn norm_sq(&self, f: &PolyElement) -> f64 {
        self.inner(f, f).re
    }

    /// The vector `(√c_m z^m)_m`, so that `f(z) = x(f)ᵀ w(z)` in scaled coordinates.
    fn evaluation_vector(&self, z: Complex64) -> CVec {
        let mut out = CVec::zeros(self.weights.len());
        let mut power = c(1.0);
        for (m, s) in self.sqrt_weights.iter().enumerate() {
            out[m] = power * *s;
            power *= z;
        }
        out
    }
}

/// A polynomial `Σ a_m z^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyElement {
    coeffs: Vec<Complex64>,
}

impl PolyElement {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| c(x)).collect())
    }

    pub fn monomial(m: usize) -> Self {
        let mut coeffs = vec![c(0.0); m + 1];
        coeffs[m] = c(1.0);
        Self::new(coeffs)
    }

    /// `(z − a)^power`.
    pub fn root_power(a: Complex64, power: usize) -> Self {
        let mut coeffs = vec![c(1.0)];
        for _ in 0..power {
            let mut next = vec![c(0.0); coeffs.len() + 1];
            for (m, x) in coeffs.iter().enumerate() {
                next[m + 1] += x;
                next[m] -= a * x;
            }
            coeffs = next;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Index of the highest nonzero coefficient.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|x| *x != c(0.0))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        eval_poly(&self.coeffs, z)
    }
}

/// Horner evaluation of `Σ a_m z^m`.
pub fn eval_poly(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(c(0.0), |acc, a| acc * z + a)
}

/// Orthonormal basis of a subspace of the truncated space, in scaled coordinates.
#[derive(Clone, Debug)]
pub struct InvariantSubspace {
    basis: CMat,
}

impl InvariantSubspace {
    pub fn zero(space: &CoeffSeriesSpace) -> Self {
        Self {
            basis: CMat::zeros(space.degree() + 1, 0),
        }
    }

    pub fn whole(space: &CoeffSeriesSpace) -> Self {
        let d = space.degree() + 1;
        Self {
            basis: CMat::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthonormal basis as columns of scaled coordinates `a_m / √c_m`.
    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// Basis elements as polynomials.
    pub fn elements(&self, space: &CoeffSeriesSpace) -> Vec<PolyElement> {
        self.basis
            .column_iter()
            .map(|col| {
                PolyElement::new(
                    col.iter()
                        .zip(&space.sqrt_weights)
                        .map(|(x, s)| x * *s)
                        .collect(),
                )
            })
            .collect()
    }
}

/// Orthonormal basis of `span{z^m q_j : deg(z^m q_j) ≤ D}`.
pub fn generate_invariant_subspace(
    space: &CoeffSeriesSpace,
    generators: &[PolyElement],
) -> Result<InvariantSubspace> {
    let d = space.degree();
    let mut candidates = Vec::new();
    for (j, q) in generators.iter().enumerate() {
        let deg = q.degree().ok_or_else(|| {
            Error::EmptySubspace(format!("generator {j} is the zero polynomial"))
        })?;
        if deg > d {
            return Err(Error::InvalidSpec(format!(
                "generator {j} has degree {deg}, above the truncation degree {d}"
            )));
        }
        for shift in 0..=(d - deg) {
            let mut x = CVec::zeros(d + 1);
            for (m, a) in q.coeffs[..=deg].iter().enumerate() {
                x[m + shift] = a / space.sqrt_weights[m + shift];
            }
            candidates.push(x);
        }
    }
    let basis = orthonormalize(candidates);
    if basis.is_empty() {
        return Err(Error::EmptySubspace("the generators span nothing".into()));
    }
    Ok(InvariantSubspace {
        basis: CMat::from_columns(&basis),
    })
}

/// Modified Gram–Schmidt with one reorthogonalization pass, dropping dependent vectors.
fn orthonormalize(vectors: Vec<CVec>) -> Vec<CVec> {
    let mut basis: Vec<CVec> = Vec::new();
    for mut v in vectors {
        let original = v.norm();
        if original == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for e in &basis {
                let proj = e.dotc(&v);
                v.axpy(-proj, e, c(1.0));
            }
        }
        let rest = v.norm();
        if rest > DEPENDENCE_TOL * original {
            basis.push(v / c(rest));
        }
    }
    basis
}

/// `k^M(z, z) = Σ_k |e_k(z)|²` over the orthonormal basis.
pub fn diag_subspace_kernel(
    space: &CoeffSeriesSpace,
    subspace: &InvariantSubspace,
    points: &[Complex64],
) -> Vec<f64> {
    points
        .iter()
        .map(|&z| {
            let w = space.evaluation_vector(z);
            subspace.basis.tr_mul(&w).norm_squared()
        })
        .collect()
}

/// `G(z) = k^M(z, z) / k(z, z)` at each point.
pub fn root_function(
    space: &CoeffSeriesSpace,
    subspace: &InvariantSubspace,
    points: &[Complex64],
) -> Vec<f64> {
    diag_subspace_kernel(space, subspace, points)
        .into_iter()
        .zip(points)
        .map(|(km, &z)| km / space.kernel_diag(z))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RootSample {
    pub r: f64,
    pub theta: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootFunctionReport {
    pub degree: usize,
    pub samples: Vec<RootSample>,
}

impl RootFunctionReport {
    /// Every value within `[0, 1 + tol]`.
    pub fn in_range(&self, tol: f64) -> bool {
        self.samples
            .iter()
            .all(|s| s.value >= -tol && s.value <= 1.0 + tol)
    }
}

/// `G(r e^{iθ})` over a polar grid, radii varying fastest.
pub fn root_sweep(
    space: &CoeffSeriesSpace,
    subspace: &InvariantSubspace,
    radii: &[f64],
    thetas: &[f64],
) -> RootFunctionReport {
    let grid: Vec<(f64, f64)> = thetas
        .iter()
        .flat_map(|&t| radii.iter().map(move |&r| (r, t)))
        .collect();
    let points: Vec<Complex64> = grid.iter().map(|&(r, t)| Complex64::from_polar(r, t)).collect();
    let values = root_function(space, subspace, &points);
    RootFunctionReport {
        degree: space.degree(),
        samples: grid
            .into_iter()
            .zip(values)
            .map(|((r, theta), value)| RootSample { r, theta, value })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationStability {
    pub degree: usize,
    pub doubled_degree: usize,
    /// `max |G_{2D} − G_D|` over the grid.
    pub max_change: f64,
    pub flagged: bool,
    pub report: RootFunctionReport,
}

/// Runs the sweep at `D` and `2D` and compares.
pub fn sweep_with_stability(
    family: WeightFamily,
    degree: usize,
    generators: &[PolyElement],
    radii: &[f64],
    thetas: &[f64],
) -> Result<TruncationStability> {
    let run = |d: usize| -> Result<RootFunctionReport> {
        let space = family.space(d)?;
        let m = generate_invariant_subspace(&space, generators)?;
        Ok(root_sweep(&space, &m, radii, thetas))
    };
    let base = run(degree)?;
    let doubled = run(2 * degree)?;
    let max_change = base
        .samples
        .iter()
        .zip(&doubled.samples)
        .map(|(a, b)| (a.value - b.value).abs())
        .fold(0.0, f64::max);
    Ok(TruncationStability {
        degree,
        doubled_degree: 2 * degree,
        max_change,
        flagged: max_change > TRUNCATION_FLAG,
        report: base,
    })
}

/// Coefficients of the Fejér mean `p_n = Σ_{m ≤ n} (1 − m/(n+1)) φ_m z^m`.
pub fn fejer_means(symbol_coeffs: &[Complex64], n: usize) -> Vec<Complex64> {
    (0..=n)
        .map(|m| {
            let phi_m = symbol_coeffs.get(m).copied().unwrap_or(c(0.0));
            phi_m * (1.0 - m as f64 / (n + 1) as f64)
        })
        .collect()
}

/// Smallest singular value of the inclusion between the degree-`D`
/// polynomial subspaces of two weighted spaces. The monomials are singular
/// vectors, so this is `min_m √(num_m) / √(den_m)`.
pub fn inclusion_sigma_min(degree: usize, weights_num: &[f64], weights_den: &[f64]) -> Result<f64> {
    if weights_num.len() <= degree || weights_den.len() <= degree {
        return Err(Error::InvalidSpec(format!(
            "need weights up to degree {degree}"
        )));
    }
    let num = CoeffSeriesSpace::new(weights_num[..=degree].to_vec())?;
    let den = CoeffSeriesSpace::new(weights_den[..=degree].to_vec())?;
    Ok(num
        .sqrt_weights
        .iter()
        .zip(&den.sqrt_weights)
        .map(|(a, b)| a / b)
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn generator_one_spans_everything() {
        let space = CoeffSeriesSpace::bergman(30);
        let m = generate_invariant_subspace(&space, &[PolyElement::from_real(&[1.0])]).unwrap();
        assert_eq!(m.dim(), 31);
    }

    #[test]
    fn generator_z_in_bergman() {
        let d = 40;
        let space = CoeffSeriesSpace::bergman(d);
        let m = generate_invariant_subspace(&space, &[PolyElement::monomial(1)]).unwrap();
        assert_eq!(m.dim(), d);
        for (k, e) in m.elements(&space).iter().enumerate() {
            let deg = k + 1;
            assert!((e.coeffs()[deg].norm() - ((deg + 1) as f64).sqrt()).abs() < 1e-12);
            assert!((space.norm_sq(e) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn double_root_generator_dimension() {
        let space = CoeffSeriesSpace::bergman(200);
        let q = PolyElement::root_power(c(0.5), 2);
        let m = generate_invariant_subspace(&space, &[q]).unwrap();
        assert_eq!(m.dim(), 199);
    }

    #[test]
    fn zero_generator_is_rejected() {
        let space = CoeffSeriesSpace::hardy(5);
        assert!(matches!(
            generate_invariant_subspace(&space, &[PolyElement::from_real(&[0.0, 0.0])]),
            Err(Error::EmptySubspace(_))
        ));
        assert!(matches!(
            generate_invariant_subspace(&space, &[PolyElement::monomial(6)]),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn diagonal_kernel_examples() {
        let space = CoeffSeriesSpace::bergman(400);
        let z = Complex64::from_polar(0.9, 1.1);
        let whole = diag_subspace_kernel(&space, &InvariantSubspace::whole(&space), &[z])[0];
        assert!((whole - space.kernel_diag(z)).abs() < 1e-10 * whole);

        let m = generate_invariant_subspace(&space, &[PolyElement::monomial(1)]).unwrap();
        let km = diag_subspace_kernel(&space, &m, &[z])[0];
        let closed = 1.0 / (0.19f64 * 0.19) - 1.0;
        assert!((km - closed).abs() < 1e-9 * closed);
        assert!((closed - 26.70).abs() < 0.01);

        assert_eq!(diag_subspace_kernel(&space, &InvariantSubspace::zero(&space), &[z])[0], 0.0);
    }

    #[test]
    fn root_function_examples() {
        let space = CoeffSeriesSpace::bergman(400);
        let whole = root_function(&space, &InvariantSubspace::whole(&space), &[c(0.3), c(0.99)]);
        assert!(whole.iter().all(|g| (g - 1.0).abs() < 1e-12));

        let m = generate_invariant_subspace(&space, &[PolyElement::monomial(1)]).unwrap();
        let g = root_function(&space, &m, &[c(0.9)])[0];
        assert!((g - 0.9639).abs() < 1e-6, "{g}");
    }

    #[test]
    fn double_root_sweep_near_boundary() {
        let space = CoeffSeriesSpace::bergman(400);
        let m = generate_invariant_subspace(&space, &[PolyElement::root_power(c(0.5), 2)]).unwrap();
        let report = root_sweep(&space, &m, &[0.999], &[0.0, PI / 3.0, PI]);
        assert!(report.in_range(1e-8));
        for s in &report.samples {
            assert!(s.value >= 0.95, "{s:?}");
        }
    }

    #[test]
    fn monomial_closed_forms() {
        let space = CoeffSeriesSpace::bergman(60);
        let z = c(0.7);
        for j in 0..4 {
            let m = generate_invariant_subspace(&space, &[PolyElement::monomial(j)]).unwrap();
            let got = diag_subspace_kernel(&space, &m, &[z])[0];
            let expected: f64 = (j..=60).map(|k| (k + 1) as f64 * 0.49f64.powi(k as i32)).sum();
            assert!((got - expected).abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn fejer_examples() {
        assert_eq!(fejer_means(&[c(1.0)], 5)[0], c(1.0));
        assert_eq!(fejer_means(&[c(0.0), c(1.0)], 1), vec![c(0.0), c(0.5)]);
        let phi = [c(0.0), c(0.0), c(1.0)];
        let p9 = fejer_means(&phi, 9);
        assert!((p9[2] - c(0.8)).norm() < 1e-15);

        let grid: Vec<Complex64> = (0..100)
            .map(|k| Complex64::from_polar(0.95, 2.0 * PI * k as f64 / 100.0))
            .collect();
        let sup_err = |n: usize| {
            let p = fejer_means(&phi, n);
            grid.iter()
                .map(|&z| (eval_poly(&p, z) - eval_poly(&phi, z)).norm())
                .fold(0.0, f64::max)
        };
        let errs: Vec<f64> = [2, 4, 9, 19, 49].iter().map(|&n| sup_err(n)).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn inclusion_sigma_examples() {
        let h = WeightFamily::Hardy.weights(399);
        let a = WeightFamily::Bergman.weights(399);
        assert_eq!(inclusion_sigma_min(0, &h, &a).unwrap(), 1.0);
        assert_eq!(inclusion_sigma_min(99, &h, &a).unwrap(), 0.1);
        assert_eq!(inclusion_sigma_min(399, &h, &a).unwrap(), 0.05);
    }

    #[test]
    fn inclusion_sigma_matches_svd() {
        // Oracle: the inclusion matrix between orthonormal monomial bases, via SVD.
        let d = 25;
        let h = WeightFamily::Hardy.weights(d);
        let a = WeightFamily::Bergman.weights(d);
        let m = nalgebra::DMatrix::<f64>::from_fn(d + 1, d + 1, |i, j| {
            if i == j {
                (h[i] / a[i]).sqrt()
            } else {
                0.0
            }
        });
        let svd_min = m.singular_values().min();
        assert!((inclusion_sigma_min(d, &h, &a).unwrap() - svd_min).abs() < 1e-15);
    }

    #[test]
    fn power_alpha_weights() {
        let w = WeightFamily::PowerAlpha { alpha: 2.0 }.weights(5);
        let b = WeightFamily::Bergman.weights(5);
        for (x, y) in w.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(WeightFamily::PowerAlpha { alpha: 1.0 }.weights(3), vec![1.0; 4]);
    }

    #[test]
    fn double_root_truncation_is_stable() {
        let q = PolyElement::root_power(c(0.5), 2);
        let s = sweep_with_stability(WeightFamily::Bergman, 100, &[q], &[0.5, 0.9], &[0.0, PI]).unwrap();
        assert!(!s.flagged, "{}", s.max_change);
    }
}
