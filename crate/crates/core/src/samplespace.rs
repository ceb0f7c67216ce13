//! The sampled space `H_K` of a block kernel `K` on a finite sample.
//!
//! Elements are stored in value coordinates: a vector `v ∈ ℂ^{np}` whose
//! `i`-th block is `f(x_i)`. Members are exactly the vectors in the range of
//! `K`, with `‖f‖² = v* K⁺ v`. Internally everything is reduced to Euclidean
//! algebra through the truncated eigendecomposition `K ≈ U Λ U*`: the columns
//! of `U √Λ` form an orthonormal basis of `H_K`, and the coordinates of `v`
//! in that basis are `Λ^{-1/2} U* v`.
//!
//! On a finite sample where `s` is positive definite every function is a
//! multiplier of `H_s`, so multiplier-invariant subspaces are exactly those of
//! the form `{f : f(x_i) ∈ W_i}`; see [`SampleSpace::is_pointwise_invariant`].

use std::sync::Arc;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::kernels::{evaluate, KernelMatrix, KernelSpec, Point, SampleSet};
use crate::linalg::{self, c, CMat, CVec};

const MEMBERSHIP_TOL: f64 = 1e-8;
const ORTHONORMAL_TOL: f64 = 1e-12;
const ZERO_GRAM: f64 = 1e-28;
const COND_WARN: f64 = 1e12;

/// A function on the sample, in value coordinates.
#[derive(Clone, Debug)]
pub struct RkhsElement {
    values: CVec,
    block_dim: usize,
    coeffs: CVec,
    norm_sq: f64,
}

impl RkhsElement {
    pub fn values(&self) -> &CVec {
        &self.values
    }

    /// `f(x_i) ∈ ℂ^p`.
    pub fn value_at(&self, i: usize) -> CVec {
        let p = self.block_dim;
        self.values.rows(i * p, p).into_owned()
    }

    /// Values as an `n × p` matrix, row `i` holding `f(x_i)`.
    pub fn values_matrix(&self) -> CMat {
        let p = self.block_dim;
        let n = self.values.len() / p;
        CMat::from_fn(n, p, |i, a| self.values[i * p + a])
    }

    /// Coefficients `c` with `values = K c` (minimal-norm choice).
    pub fn coeffs(&self) -> &CVec {
        &self.coeffs
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.max(0.0).sqrt()
    }
}

/// `H_K` for a (block) kernel matrix, with its orthonormal frame.
#[derive(Debug)]
pub struct SampleSpace {
    kernel: KernelMatrix,
    /// Orthonormal eigenvectors of `K` spanning its numerical range (`np × r`).
    range: CMat,
    sqrt_eigs: Vec<f64>,
}

impl SampleSpace {
    pub fn new(kernel: KernelMatrix, tol_rank: f64) -> Result<Arc<Self>> {
        let (range, eigs, all_min) = match (kernel.scalar_factor(), kernel.block_dim()) {
            (Some(s), p) if p > 1 => {
                let eig = linalg::eigh(s);
                let r = eig.rank(tol_rank);
                let mut cols = Vec::with_capacity(r * p);
                let mut vals = Vec::with_capacity(r * p);
                for k in 0..r {
                    for a in 0..p {
                        cols.push((k, a));
                        vals.push(eig.values[k]);
                    }
                }
                let np = kernel.dim();
                let range = CMat::from_fn(np, cols.len(), |row, col| {
                    let (k, a) = cols[col];
                    if row % p == a {
                        eig.vectors[(row / p, k)]
                    } else {
                        c(0.0)
                    }
                });
                (range, vals, eig.min())
            }
            _ => {
                let eig = linalg::eigh(kernel.entries());
                let r = eig.rank(tol_rank);
                let range = eig.vectors.columns(0, r).into_owned();
                (range, eig.values[..r].to_vec(), eig.min())
            }
        };
        let top = eigs.first().copied().unwrap_or(0.0);
        let dropped = kernel.dim() - eigs.len();
        if dropped > 0 {
            debug!("kernel matrix has {dropped} directions below the rank tolerance");
        } else if all_min > 0.0 && top / all_min > COND_WARN {
            warn!(
                "kernel matrix condition number {:.2e} exceeds {COND_WARN:.0e}",
                top / all_min
            );
        }
        Ok(Arc::new(Self {
            kernel,
            range,
            sqrt_eigs: eigs.iter().map(|v| v.sqrt()).collect(),
        }))
    }

    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    pub fn sample(&self) -> &Arc<SampleSet> {
        self.kernel.sample()
    }

    pub fn block_dim(&self) -> usize {
        self.kernel.block_dim()
    }

    /// `np`, the length of value vectors.
    pub fn value_dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Dimension of the space (numerical rank of `K`).
    pub fn dim(&self) -> usize {
        self.range.ncols()
    }

    /// Value vectors of the orthonormal frame, `U √Λ` (`np × r`).
    pub fn frame(&self) -> CMat {
        let mut f = self.range.clone();
        for (k, s) in self.sqrt_eigs.iter().enumerate() {
            let mut col = f.column_mut(k);
            col *= c(*s);
        }
        f
    }

    /// Frame coordinates `Λ^{-1/2} U* V` of value vectors, checking membership
    /// of the whole batch.
    pub fn coords_of(&self, values: &CMat) -> Result<CMat> {
        if values.nrows() != self.value_dim() {
            return Err(Error::Shape(format!(
                "value vectors have length {}, the space needs {}",
                values.nrows(),
                self.value_dim()
            )));
        }
        let proj = self.range.adjoint() * values;
        // Relative to the largest column, so round-off in tiny columns of a
        // batch (e.g. images of a multiplier) is not magnified.
        let scale = values.column_iter().map(|v| v.norm()).fold(0.0, f64::max);
        let resid = (values - &self.range * &proj)
            .column_iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max);
        if resid > MEMBERSHIP_TOL * scale {
            return Err(Error::Membership {
                residual: resid / scale.max(f64::MIN_POSITIVE),
            });
        }
        let mut w = proj;
        for (k, s) in self.sqrt_eigs.iter().enumerate() {
            let mut row = w.row_mut(k);
            row /= c(*s);
        }
        Ok(w)
    }

    fn coords(&self, values: &CVec) -> Result<CVec> {
        let m = CMat::from_column_slice(values.len(), 1, values.as_slice());
        Ok(self.coords_of(&m)?.column(0).into_owned())
    }

    /// Value vectors from frame coordinates.
    pub fn values_of(&self, coords: &CMat) -> CMat {
        self.frame() * coords
    }

    fn element_from_coords(&self, w: &CVec) -> RkhsElement {
        let scaled = CVec::from_iterator(
            w.len(),
            w.iter().zip(&self.sqrt_eigs).map(|(x, s)| x / *s),
        );
        let values = self.frame() * w;
        RkhsElement {
            values,
            block_dim: self.block_dim(),
            coeffs: &self.range * scaled,
            norm_sq: w.norm_squared(),
        }
    }

    /// Wraps a value vector, checking it lies in the range of `K` (residual ≤ 1e-8 relative).
    pub fn element(&self, values: CVec) -> Result<RkhsElement> {
        let w = self.coords(&values)?;
        let mut e = self.element_from_coords(&w);
        e.values = values;
        Ok(e)
    }

    /// Element from an `n × p` matrix of values (row `i` is `f(x_i)`).
    pub fn element_from_rows(&self, rows: &CMat) -> Result<RkhsElement> {
        let p = self.block_dim();
        if rows.ncols() != p || rows.nrows() * p != self.value_dim() {
            return Err(Error::Shape(format!(
                "expected {}x{p} values, got {}x{}",
                self.value_dim() / p,
                rows.nrows(),
                rows.ncols()
            )));
        }
        self.element(CVec::from_fn(self.value_dim(), |r, _| rows[(r / p, r % p)]))
    }

    /// `K(·, x_i) ξ`, the element reproducing `f ↦ ⟨f(x_i), ξ⟩`.
    pub fn kernel_section(&self, i: usize, xi: &CVec) -> Result<RkhsElement> {
        let p = self.block_dim();
        if i >= self.kernel.n() || xi.len() != p {
            return Err(Error::Shape(format!(
                "kernel section needs a point index < {} and a vector of length {p}",
                self.kernel.n()
            )));
        }
        let values = self.kernel.entries().columns(i * p, p) * xi;
        self.element(values)
    }

    /// `Gram[a][b] = ⟨f_b, f_a⟩`.
    pub fn gram(&self, elements: &[RkhsElement]) -> Result<CMat> {
        let w = self.coords_of(&stack(elements, self.value_dim())?)?;
        Ok(w.adjoint() * w)
    }

    /// The whole sampled space as a subspace.
    pub fn whole(self: &Arc<Self>) -> Subspace {
        let r = self.dim();
        Subspace::from_coords(self.clone(), CMat::identity(r, r))
    }

    /// Closed span of the given elements. The dimension is the number of Gram
    /// eigenvalues above `tol_rank · λ_max`.
    pub fn subspace_from_spanning(
        self: &Arc<Self>,
        spanning: &[RkhsElement],
        tol_rank: f64,
    ) -> Result<Subspace> {
        if spanning.is_empty() {
            return Err(Error::EmptySubspace("no spanning vectors".into()));
        }
        let w = self.coords_of(&stack(spanning, self.value_dim())?)?;
        let top = linalg::spectral_norm(&w);
        if top * top <= ZERO_GRAM {
            return Err(Error::EmptySubspace("all spanning vectors vanish".into()));
        }
        // Gram eigenvalues are squared singular values of the coordinates.
        let basis = linalg::range_basis(&w, tol_rank.sqrt());
        Ok(Subspace::from_coords(self.clone(), basis))
    }

    /// `{f : f(x_i) ∈ W_i}`, the orthogonal complement of the kernel sections
    /// `K(·, x_i) ξ` with `ξ ⟂ W_i`.
    pub fn subspace_from_constraints(
        self: &Arc<Self>,
        spec: &PointwiseConstraintSpec,
        tol_rank: f64,
    ) -> Result<Subspace> {
        let n = self.kernel.n();
        let p = self.block_dim();
        let mut sections: Vec<CVec> = Vec::new();
        for con in &spec.constraints {
            if con.point >= n {
                return Err(Error::InvalidConstraint(format!(
                    "point index {} out of range for {n} points",
                    con.point
                )));
            }
            if con.allowed.nrows() != p {
                return Err(Error::InvalidConstraint(format!(
                    "allowed directions have length {}, fiber dimension is {p}",
                    con.allowed.nrows()
                )));
            }
            let normal = linalg::complement_basis(&con.allowed, 1e-12);
            for k in 0..normal.ncols() {
                let mut e = CVec::zeros(n * p);
                e.rows_mut(con.point * p, p).copy_from(&normal.column(k));
                sections.push(e);
            }
        }
        let r = self.dim();
        let frame = self.frame();
        let constraint_coords = CMat::from_fn(r, sections.len(), |row, col| {
            frame.column(row).dotc(&sections[col])
        });
        let basis = linalg::complement_basis(&constraint_coords, tol_rank);
        if basis.ncols() == 0 {
            return Err(Error::EmptySubspace(
                "the constraints only admit the zero function".into(),
            ));
        }
        Ok(Subspace::from_coords(self.clone(), basis))
    }

    /// Orthogonal projection `P_M f`.
    pub fn project(&self, m: &Subspace, f: &RkhsElement) -> Result<RkhsElement> {
        let w = self.coords(f.values())?;
        let q = m.coords();
        Ok(self.element_from_coords(&(q * (q.adjoint() * w))))
    }

    /// Tests whether `M` is invariant under every pointwise truncation
    /// `f ↦ f·1_{x_i}`, the finite-sample form of multiplier invariance.
    /// A failure comes with a witness `(i, T_i e)` that leaves `M`.
    pub fn is_pointwise_invariant(&self, m: &Subspace, tol: f64) -> InvarianceReport {
        let n = self.kernel.n();
        let p = self.block_dim();
        let onb = m.onb();
        let q = m.coords();
        for i in 0..n {
            for col in 0..onb.ncols() {
                let mut truncated = CVec::zeros(self.value_dim());
                truncated
                    .rows_mut(i * p, p)
                    .copy_from(&onb.column(col).rows(i * p, p));
                if truncated.norm() == 0.0 {
                    continue;
                }
                let Ok(w) = self.coords(&truncated) else {
                    return InvarianceReport {
                        verdict: false,
                        witness: None,
                    };
                };
                let resid = (&w - q * (q.adjoint() * &w)).norm();
                // Basis vectors have unit norm, so the scale is at least 1.
                if resid > tol * w.norm().max(1.0) {
                    let witness = self.element_from_coords(&w);
                    return InvarianceReport {
                        verdict: false,
                        witness: Some((i, witness)),
                    };
                }
            }
        }
        InvarianceReport {
            verdict: true,
            witness: None,
        }
    }
}

fn stack(elements: &[RkhsElement], len: usize) -> Result<CMat> {
    if let Some(bad) = elements.iter().find(|e| e.values.len() != len) {
        return Err(Error::Shape(format!(
            "element has {} values, expected {len}",
            bad.values.len()
        )));
    }
    Ok(CMat::from_fn(len, elements.len(), |r, col| elements[col].values[r]))
}

/// Outcome of [`SampleSpace::is_pointwise_invariant`].
#[derive(Clone, Debug)]
pub struct InvarianceReport {
    pub verdict: bool,
    pub witness: Option<(usize, RkhsElement)>,
}

/// A closed subspace of a sampled space, held as orthonormal frame coordinates.
#[derive(Clone, Debug)]
pub struct Subspace {
    space: Arc<SampleSpace>,
    coords: CMat,
    onb: CMat,
}

impl Subspace {
    fn from_coords(space: Arc<SampleSpace>, coords: CMat) -> Self {
        let onb = space.values_of(&coords);
        Self { space, coords, onb }
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Value vectors of an orthonormal basis (`np × m`).
    pub fn onb(&self) -> &CMat {
        &self.onb
    }

    /// The same basis in frame coordinates (`r × m`, orthonormal columns).
    pub fn coords(&self) -> &CMat {
        &self.coords
    }

    /// `P_M` in frame coordinates.
    pub fn projector(&self) -> CMat {
        &self.coords * self.coords.adjoint()
    }

    /// The basis vectors as elements.
    pub fn basis(&self) -> Vec<RkhsElement> {
        (0..self.dim())
            .map(|k| self.space.element_from_coords(&self.coords.column(k).into_owned()))
            .collect()
    }

    /// Reproducing kernel of `M`: `K^M = V V*` for the orthonormal basis values `V`.
    pub fn kernel(&self) -> KernelMatrix {
        KernelMatrix::new(
            &self.onb * self.onb.adjoint(),
            self.space.block_dim(),
            self.space.sample().clone(),
        )
        .expect("V V* is Hermitian")
    }

    /// Relative distance of `f` from `M`.
    pub fn residual(&self, f: &RkhsElement) -> Result<f64> {
        let w = self.space.coords(f.values())?;
        let scale = w.norm();
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok((&w - &self.coords * (self.coords.adjoint() * &w)).norm() / scale)
    }
}

/// One pointwise constraint `f(x_point) ∈ span(allowed)`.
#[derive(Clone, Debug)]
pub struct PointConstraint {
    point: usize,
    allowed: CMat,
}

impl PointConstraint {
    /// `allowed` must have orthonormal columns (to 1e-12); zero columns means `f(x_point) = 0`.
    pub fn new(point: usize, allowed: CMat) -> Result<Self> {
        let k = allowed.ncols();
        let gram = allowed.adjoint() * &allowed;
        let dev = linalg::max_abs(&(gram - CMat::identity(k, k)));
        if k > 0 && dev > ORTHONORMAL_TOL {
            return Err(Error::InvalidConstraint(format!(
                "allowed directions at point {point} are not orthonormal (deviation {dev:.2e})"
            )));
        }
        if k > allowed.nrows() {
            return Err(Error::InvalidConstraint("more directions than the fiber dimension".into()));
        }
        Ok(Self { point, allowed })
    }

    /// `f(x_point) = 0` in a fiber of dimension `p`.
    pub fn zero(point: usize, p: usize) -> Self {
        Self {
            point,
            allowed: CMat::zeros(p, 0),
        }
    }

    /// Orthonormalizes arbitrary spanning directions (columns).
    pub fn spanned_by(point: usize, directions: &CMat) -> Self {
        Self {
            point,
            allowed: linalg::range_basis(directions, 1e-12),
        }
    }

    pub fn point(&self) -> usize {
        self.point
    }

    pub fn allowed(&self) -> &CMat {
        &self.allowed
    }
}

/// `M = {f : f(x_i) ∈ W_i for every listed i}`.
#[derive(Clone, Debug, Default)]
pub struct PointwiseConstraintSpec {
    pub constraints: Vec<PointConstraint>,
}

impl PointwiseConstraintSpec {
    pub fn new(constraints: Vec<PointConstraint>) -> Self {
        Self { constraints }
    }

    /// Scalar zero set `{f : f(x_i) = 0, i ∈ indices}` in fiber dimension `p`.
    pub fn zeros(indices: &[usize], p: usize) -> Self {
        Self::new(indices.iter().map(|&i| PointConstraint::zero(i, p)).collect())
    }
}

/// Kernel of `{f ∈ H_k : f(a) = 0 for a ∈ zeros}` restricted to the sample,
/// by the projection formula `K_XX − K_XZ K_ZZ⁻¹ K_ZX`. Zeros may lie on or
/// off the sample.
pub fn zero_set_kernel(
    spec: &KernelSpec,
    sample: &Arc<SampleSet>,
    zeros: &[Point],
) -> Result<KernelMatrix> {
    let n = sample.len();
    let mut points = sample.points().to_vec();
    let mut zero_idx = Vec::with_capacity(zeros.len());
    for z in zeros {
        match points.iter().position(|p| p == z) {
            Some(i) => zero_idx.push(i),
            None => {
                points.push(z.clone());
                zero_idx.push(points.len() - 1);
            }
        }
    }
    let extended = Arc::new(SampleSet::new(points, None)?);
    let k = evaluate(spec, &extended)?;
    let km = k.entries();
    let xz = CMat::from_fn(n, zero_idx.len(), |i, j| km[(i, zero_idx[j])]);
    let zz = CMat::from_fn(zero_idx.len(), zero_idx.len(), |i, j| km[(zero_idx[i], zero_idx[j])]);
    let zz_inv = zz
        .cholesky()
        .ok_or_else(|| Error::Shape("kernel is singular on the zero set".into()))?
        .inverse();
    let kxx = km.view((0, 0), (n, n)).into_owned();
    KernelMatrix::scalar(kxx - &xz * zz_inv * xz.adjoint(), sample.clone())
}

/// Convenience: the scalar zero-set kernel tensored with `I_p`.
pub fn zero_set_kernel_fiber(
    spec: &KernelSpec,
    sample: &Arc<SampleSet>,
    zeros: &[Point],
    p: usize,
) -> Result<KernelMatrix> {
    zero_set_kernel(spec, sample, zeros)?.tensor_identity(p)
}
