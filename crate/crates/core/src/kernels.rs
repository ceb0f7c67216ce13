//! Kernel catalog and sampled kernel matrices.
//!
//! A kernel is only ever seen through its Gram matrix on a [`SampleSet`].
//! Scalar kernels give `n × n` matrices; `B(ℂ^p)`-valued kernels give
//! `np × np` matrices laid out in `p × p` blocks, the block for the pair
//! `(x_i, x_j)` occupying rows `i·p..(i+1)·p` and columns `j·p..(j+1)·p`.
//!
//! The CNP test follows the Agler–McCarthy characterization: a normalized,
//! non-vanishing `s` is complete Nevanlinna–Pick iff `1 − 1/s ≥ 0`. On a
//! sample this is a certificate, not a proof: a negative eigenvalue disproves
//! the property, a clean spectrum only fails to find a violation.

use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::{DEFAULT_TOL_PSD, DEFAULT_TOL_RANK};

const HERMITIAN_REL_TOL: f64 = 1e-12;
const NORMALIZED_TOL: f64 = 1e-12;
const VANISHING: f64 = 1e-14;
const NEAR_COINCIDENT: f64 = 1e-8;

/// A point of `ℂ^d`; disc kernels use `d = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<Complex64>);

impl Point {
    pub fn new(coords: Vec<Complex64>) -> Self {
        Self(coords)
    }

    pub fn disc(z: Complex64) -> Self {
        Self(vec![z])
    }

    pub fn real(x: f64) -> Self {
        Self(vec![c(x)])
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// First coordinate; the disc variable.
    pub fn z(&self) -> Complex64 {
        self.0[0]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self, other⟩ = Σ z_k · conj(w_k)`.
    pub fn inner(&self, other: &Point) -> Complex64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(z, w)| z * w.conj())
            .sum()
    }

    fn distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(z, w)| (z - w).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (k, z) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}{:+}i", z.re, z.im)?;
        }
        write!(f, ")")
    }
}

/// Ordered, pairwise distinct sample points with an optional base point `x₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    points: Vec<Point>,
    base_index: Option<usize>,
}

impl SampleSet {
    pub fn new(points: Vec<Point>, base_index: Option<usize>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSample("a sample needs at least one point".into()));
        }
        let dim = points[0].dim();
        if dim == 0 || points.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidSample(
                "all points must share a positive dimension".into(),
            ));
        }
        if let Some(b) = base_index {
            if b >= points.len() {
                return Err(Error::InvalidSample(format!(
                    "base index {b} out of range for {} points",
                    points.len()
                )));
            }
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::InvalidSample(format!(
                        "points {j} and {i} coincide at {}",
                        points[i]
                    )));
                }
                let d = points[i].distance(&points[j]);
                if d < NEAR_COINCIDENT {
                    warn!("points {j} and {i} are {d:.2e} apart; Gram matrices will be ill-conditioned");
                }
            }
        }
        Ok(Self { points, base_index })
    }

    /// Disc sample from complex numbers.
    pub fn disc(zs: &[Complex64]) -> Result<Self> {
        Self::new(zs.iter().copied().map(Point::disc).collect(), None)
    }

    /// Disc sample from real numbers.
    pub fn real(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().copied().map(Point::real).collect(), None)
    }

    /// Same points with `x₀` set; `base` must index a point.
    pub fn with_base(mut self, base: usize) -> Result<Self> {
        if base >= self.points.len() {
            return Err(Error::InvalidSample(format!("base index {base} out of range")));
        }
        self.base_index = Some(base);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn base_index(&self) -> Option<usize> {
        self.base_index
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Index of the first point equal to `p`.
    pub fn index_of(&self, p: &Point) -> Option<usize> {
        self.points.iter().position(|q| q == p)
    }
}

/// Kernel catalog. JSON form: `{"variant": "power_alpha", "alpha": 0.5}` etc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `1/(1 − z w̄)`, the Hardy space `H²`.
    Szego,
    /// `1/(1 − z w̄)²`, the Bergman space `A²`.
    Bergman,
    /// `(1 − z w̄)^(−α)`, principal branch.
    PowerAlpha { alpha: f64 },
    /// `1/(1 − ⟨z, w⟩)` on the unit ball of `ℂ^d`.
    DruryArveson { d: usize },
    /// `k ≡ 1`.
    Constant,
    /// `Σ_m c_m (z w̄)^m` for `m = 0..=D`.
    CoefficientSeries { weights: Vec<f64> },
    /// An explicit Hermitian matrix, used as-is on a sample of matching size.
    CustomMatrix {
        #[serde(with = "crate::cjson::cmat_rows")]
        matrix: CMat,
    },
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Szego => "szego",
            KernelSpec::Bergman => "bergman",
            KernelSpec::PowerAlpha { .. } => "power_alpha",
            KernelSpec::DruryArveson { .. } => "drury_arveson",
            KernelSpec::Constant => "constant",
            KernelSpec::CoefficientSeries { .. } => "coefficient_series",
            KernelSpec::CustomMatrix { .. } => "custom_matrix",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::PowerAlpha { alpha } if !(alpha.is_finite() && *alpha > 0.0) => Err(
                Error::InvalidSpec(format!("alpha must be a positive real, got {alpha}")),
            ),
            KernelSpec::DruryArveson { d: 0 } => {
                Err(Error::InvalidSpec("Drury-Arveson dimension must be >= 1".into()))
            }
            KernelSpec::CoefficientSeries { weights }
                if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) =>
            {
                Err(Error::InvalidSpec(
                    "coefficient weights must be a nonempty list of nonnegative reals".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Domain check for point `index` of a sample.
    fn check_point(&self, index: usize, p: &Point) -> Result<()> {
        let outside = || Error::Domain {
            index,
            coords: p.to_string(),
            kernel: self.name(),
        };
        match self {
            KernelSpec::Szego
            | KernelSpec::Bergman
            | KernelSpec::PowerAlpha { .. }
            | KernelSpec::CoefficientSeries { .. } => {
                let inside = p.norm() < 1.0;
                if p.dim() != 1 || !inside {
                    return Err(outside());
                }
            }
            KernelSpec::DruryArveson { d } => {
                let inside = p.norm() < 1.0;
                if p.dim() != *d || !inside {
                    return Err(outside());
                }
            }
            KernelSpec::Constant | KernelSpec::CustomMatrix { .. } => {}
        }
        Ok(())
    }

    /// Kernel value `k(z, w)` for catalog kernels. Points must already be
    /// domain-checked. Not defined for `CustomMatrix`.
    pub fn value(&self, z: &Point, w: &Point) -> Complex64 {
        match self {
            KernelSpec::Szego => (c(1.0) - z.z() * w.z().conj()).inv(),
            KernelSpec::Bergman => {
                let s = (c(1.0) - z.z() * w.z().conj()).inv();
                s * s
            }
            KernelSpec::PowerAlpha { alpha } => {
                (c(1.0) - z.z() * w.z().conj()).powc(c(-*alpha))
            }
            KernelSpec::DruryArveson { .. } => (c(1.0) - z.inner(w)).inv(),
            KernelSpec::Constant => c(1.0),
            KernelSpec::CoefficientSeries { weights } => {
                let t = z.z() * w.z().conj();
                // Horner from the top coefficient.
                weights
                    .iter()
                    .rev()
                    .fold(c(0.0), |acc, &cm| acc * t + c(cm))
            }
            KernelSpec::CustomMatrix { .. } => {
                panic!("custom matrices have no pointwise formula")
            }
        }
    }
}

/// Hermitian (block) Gram matrix of a kernel on a sample.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    entries: CMat,
    block_dim: usize,
    sample: Arc<SampleSet>,
    /// Present when `entries = scalar ⊗ I_p`; enables structured eigensolves.
    scalar: Option<Arc<CMat>>,
}

impl KernelMatrix {
    /// Validates shape and Hermitian symmetry (to 1e-12 relative) and stores
    /// the exact Hermitian part.
    pub fn new(entries: CMat, block_dim: usize, sample: Arc<SampleSet>) -> Result<Self> {
        if block_dim == 0 {
            return Err(Error::Shape("block dimension must be positive".into()));
        }
        let total = sample.len() * block_dim;
        if entries.nrows() != total || entries.ncols() != total {
            return Err(Error::Shape(format!(
                "expected a {total}x{total} matrix for {} points with block size {block_dim}, got {}x{}",
                sample.len(),
                entries.nrows(),
                entries.ncols()
            )));
        }
        linalg::ensure_hermitian(&entries, HERMITIAN_REL_TOL)?;
        let entries = linalg::hermitian_part(&entries);
        let scalar = (block_dim == 1).then(|| Arc::new(entries.clone()));
        Ok(Self {
            entries,
            block_dim,
            sample,
            scalar,
        })
    }

    pub fn scalar(entries: CMat, sample: Arc<SampleSet>) -> Result<Self> {
        Self::new(entries, 1, sample)
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn sample(&self) -> &Arc<SampleSet> {
        &self.sample
    }

    pub fn n(&self) -> usize {
        self.sample.len()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_scalar(&self) -> bool {
        self.block_dim == 1
    }

    /// The scalar kernel `s` when this matrix is `s ⊗ I_p`.
    pub fn scalar_factor(&self) -> Option<&CMat> {
        self.scalar.as_deref()
    }

    /// Entry `(i, j)` of a scalar kernel.
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    /// Block `K(x_i, x_j)`.
    pub fn block(&self, i: usize, j: usize) -> CMat {
        linalg::block(&self.entries, i, j, self.block_dim, self.block_dim)
    }

    /// `k ⊗ I_p`, the kernel of `H_k ⊗ ℂ^p`. Requires a scalar kernel.
    pub fn tensor_identity(&self, p: usize) -> Result<Self> {
        let s = self.require_scalar()?;
        if p == 0 {
            return Err(Error::Shape("fiber dimension must be positive".into()));
        }
        Ok(Self {
            entries: linalg::kron_identity(s, p),
            block_dim: p,
            sample: self.sample.clone(),
            scalar: Some(self.scalar.clone().expect("scalar kernel")),
        })
    }

    pub(crate) fn require_scalar(&self) -> Result<&CMat> {
        if self.block_dim != 1 {
            return Err(Error::NotScalar(self.block_dim));
        }
        Ok(&self.entries)
    }

    pub(crate) fn same_sample(&self, other: &KernelMatrix) -> bool {
        Arc::ptr_eq(&self.sample, &other.sample) || *self.sample == *other.sample
    }

    /// Difference `self − other` on the same sample and block size.
    pub fn difference(&self, other: &KernelMatrix) -> Result<KernelMatrix> {
        if !self.same_sample(other) || self.block_dim != other.block_dim {
            return Err(Error::Shape(
                "kernel difference needs matching samples and block sizes".into(),
            ));
        }
        KernelMatrix::new(
            &self.entries - &other.entries,
            self.block_dim,
            self.sample.clone(),
        )
    }
}

/// Gram matrix `[k(x_i, x_j)]` of a catalog kernel.
pub fn evaluate(spec: &KernelSpec, sample: &Arc<SampleSet>) -> Result<KernelMatrix> {
    spec.validate()?;
    let n = sample.len();
    if let KernelSpec::CustomMatrix { matrix } = spec {
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Shape(format!(
                "custom matrix is {}x{} but the sample has {n} points",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        return KernelMatrix::scalar(matrix.clone(), sample.clone());
    }
    for (i, p) in sample.points().iter().enumerate() {
        spec.check_point(i, p)?;
    }
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        let zi = sample.point(i);
        m[(i, i)] = c(spec.value(zi, zi).re);
        for j in (i + 1)..n {
            let v = spec.value(zi, sample.point(j));
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    KernelMatrix::scalar(m, sample.clone())
}

/// Outcome of a PSD test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsdReport {
    pub verdict: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// PSD verdict for a raw Hermitian matrix: `λ_min ≥ −tol · max(1, λ_max)`.
pub fn psd_check(m: &CMat, tol: f64) -> Result<PsdReport> {
    linalg::ensure_hermitian(m, HERMITIAN_REL_TOL)?;
    Ok(psd_report(m, tol))
}

pub(crate) fn psd_report(m: &CMat, tol: f64) -> PsdReport {
    let eig = linalg::eigh(m);
    let (lo, hi) = (eig.min(), eig.max());
    PsdReport {
        verdict: lo >= -tol * hi.max(1.0),
        min_eigenvalue: lo,
        max_eigenvalue: hi,
    }
}

pub fn is_psd(k: &KernelMatrix, tol: f64) -> PsdReport {
    psd_report(k.entries(), tol)
}

/// Entrywise (Schur) product; a scalar operand scales the blocks of the other.
pub fn schur_product(k1: &KernelMatrix, k2: &KernelMatrix) -> Result<KernelMatrix> {
    if !k1.same_sample(k2) {
        return Err(Error::Shape("Schur product of kernels on different samples".into()));
    }
    let (scalar, other) = match (k1.block_dim, k2.block_dim) {
        (1, _) => (k1, k2),
        (_, 1) => (k2, k1),
        (p, q) => {
            return Err(Error::Shape(format!(
                "at most one Schur factor may be block-valued (got {p} and {q})"
            )))
        }
    };
    let p = other.block_dim;
    let s = scalar.entries();
    let out = CMat::from_fn(other.dim(), other.dim(), |r, col| {
        s[(r / p, col / p)] * other.entries[(r, col)]
    });
    let mut result = KernelMatrix::new(out, p, other.sample.clone())?;
    if let Some(base) = other.scalar_factor() {
        result.scalar = Some(Arc::new(s.component_mul(base)));
    }
    Ok(result)
}

/// Blockwise quotient `K(x_i, x_j) / s(x_i, x_j)` by a nonvanishing scalar `s`.
/// No positivity is asserted; test the result with [`is_psd`].
pub fn hadamard_quotient(k: &KernelMatrix, s: &KernelMatrix) -> Result<KernelMatrix> {
    if !k.same_sample(s) {
        return Err(Error::Shape("Hadamard quotient of kernels on different samples".into()));
    }
    let sm = s.require_scalar()?;
    let n = k.n();
    for i in 0..n {
        for j in 0..n {
            let modulus = sm[(i, j)].norm();
            if modulus < VANISHING {
                return Err(Error::DivisionByZero { i, j, modulus });
            }
        }
    }
    let p = k.block_dim;
    let out = CMat::from_fn(k.dim(), k.dim(), |r, col| k.entries[(r, col)] / sm[(r / p, col / p)]);
    let mut result = KernelMatrix::new(out, p, k.sample.clone())?;
    if let Some(base) = k.scalar_factor() {
        result.scalar = Some(Arc::new(base.component_div(sm)));
    }
    Ok(result)
}

fn normalization_deviation(k: &CMat, base: usize) -> f64 {
    (0..k.nrows())
        .map(|i| (k[(i, base)] - c(1.0)).norm())
        .fold(0.0, f64::max)
}

/// `true` iff `|K[i][base] − 1| ≤ 1e-12` for every `i`.
pub fn is_normalized(k: &KernelMatrix, base_index: usize) -> Result<bool> {
    let m = k.require_scalar()?;
    check_base(k, base_index)?;
    Ok(normalization_deviation(m, base_index) <= NORMALIZED_TOL)
}

fn check_base(k: &KernelMatrix, base: usize) -> Result<()> {
    if base >= k.n() {
        return Err(Error::InvalidSample(format!(
            "base index {base} out of range for {} points",
            k.n()
        )));
    }
    Ok(())
}

/// `K̂[i][j] = K[i][j] · K[b][b] / (K[i][b] · K[b][j])`, normalized at `b`.
pub fn normalize(k: &KernelMatrix, base_index: usize) -> Result<KernelMatrix> {
    let m = k.require_scalar()?;
    check_base(k, base_index)?;
    let n = k.n();
    for i in 0..n {
        let modulus = m[(i, base_index)].norm();
        if modulus < VANISHING {
            return Err(Error::Normalization { index: i, modulus });
        }
    }
    let kbb = m[(base_index, base_index)];
    let out = CMat::from_fn(n, n, |i, j| {
        m[(i, j)] * kbb / (m[(i, base_index)] * m[(base_index, j)])
    });
    KernelMatrix::scalar(out, k.sample.clone())
}

/// Outcome of the CNP test; `certificate` is the minimum eigenvalue of `[1 − 1/s]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CnpReport {
    pub verdict: bool,
    pub certificate: f64,
}

/// The matrix `[1 − 1/s(x_i, x_j)]`.
fn cnp_defect(s: &KernelMatrix) -> Result<CMat> {
    let m = s.require_scalar()?;
    let n = s.n();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            if v.norm() < VANISHING {
                return Err(Error::DivisionByZero {
                    i,
                    j,
                    modulus: v.norm(),
                });
            }
            out[(i, j)] = c(1.0) - v.inv();
        }
    }
    Ok(linalg::hermitian_part(&out))
}

/// Finite-sample CNP certificate. When `base_index` is given the kernel must
/// be normalized there; catalog kernels normalized at a point outside the
/// sample (the origin, for the disc kernels) pass `None`.
pub fn is_cnp(s: &KernelMatrix, base_index: Option<usize>, tol: f64) -> Result<CnpReport> {
    let m = s.require_scalar()?;
    if let Some(base) = base_index {
        check_base(s, base)?;
        let deviation = normalization_deviation(m, base);
        if deviation > NORMALIZED_TOL {
            return Err(Error::NotNormalized { base, deviation });
        }
    }
    let defect = cnp_defect(s)?;
    let report = psd_report(&defect, tol);
    Ok(CnpReport {
        verdict: report.verdict,
        certificate: report.min_eigenvalue,
    })
}

/// Rows `b(x_i) ∈ ℂ^{1×L}` with `s(x_i, x_j) = 1/(1 − b(x_i) b(x_j)*)`.
#[derive(Clone, Debug)]
pub struct CnpFactor {
    rows: CMat,
}

impl CnpFactor {
    /// `L`, the number of columns.
    pub fn rank(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &CMat {
        &self.rows
    }

    /// `b(x_i)` as a `1 × L` row.
    pub fn row(&self, i: usize) -> CMat {
        self.rows.rows(i, 1).into_owned()
    }

    /// `‖b(x_i)‖`.
    pub fn row_norm(&self, i: usize) -> f64 {
        self.rows.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖BB* − [1 − 1/s]‖_F`.
    pub fn reconstruction_residual(&self, s: &KernelMatrix) -> Result<f64> {
        let defect = cnp_defect(s)?;
        Ok(linalg::frobenius(&(&self.rows * self.rows.adjoint() - defect)))
    }
}

/// Factor `[1 − 1/s] = BB*` by rank-truncated eigendecomposition.
pub fn cnp_factor(s: &KernelMatrix, tol_rank: f64) -> Result<CnpFactor> {
    let defect = cnp_defect(s)?;
    let report = psd_report(&defect, DEFAULT_TOL_PSD);
    if !report.verdict {
        return Err(Error::NotCnp {
            min_eigenvalue: report.min_eigenvalue,
        });
    }
    Ok(CnpFactor {
        rows: linalg::psd_factor(&defect, tol_rank),
    })
}

/// [`cnp_factor`] with the default rank tolerance.
pub fn cnp_factor_default(s: &KernelMatrix) -> Result<CnpFactor> {
    cnp_factor(s, DEFAULT_TOL_RANK)
}
