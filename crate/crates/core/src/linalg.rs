//! Dense complex linear algebra shared by every module.
//!
//! Everything is built on Hermitian eigendecomposition and SVD from
//! `nalgebra`. Eigenpairs are always returned in descending order so that
//! factors have a deterministic column order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Number of eigenvalues strictly above `tol · λ_max` (zero when `λ_max ≤ 0`).
    pub fn rank(&self, tol: f64) -> usize {
        let top = self.max();
        if top <= 0.0 {
            return 0;
        }
        self.values.iter().take_while(|&&v| v > tol * top).count()
    }
}

pub fn eigh(a: &CMat) -> HermitianEigen {
    let n = a.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        };
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn asymmetry(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Checks `a` is square and Hermitian to `rel_tol` relative to its largest entry.
pub fn ensure_hermitian(a: &CMat, rel_tol: f64) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = max_abs(a);
    let asym = asymmetry(a);
    if asym > rel_tol * scale {
        return Err(Error::NotHermitian {
            asymmetry: asym,
            scale,
        });
    }
    Ok(())
}

/// Rank-truncated factor `F` with `H ≈ F F*`, columns `u_k √λ_k` ordered by
/// descending eigenvalue; keeps `λ_k > tol_rank · λ_max`.
pub fn psd_factor(h: &CMat, tol_rank: f64) -> CMat {
    let eig = eigh(h);
    factor_from_eigen(&eig, tol_rank)
}

pub fn factor_from_eigen(eig: &HermitianEigen, tol_rank: f64) -> CMat {
    let r = eig.rank(tol_rank);
    let n = eig.vectors.nrows();
    CMat::from_fn(n, r, |i, k| eig.vectors[(i, k)] * eig.values[k].sqrt())
}

/// Eigendecomposition of the Hermitian dilation `[[0, A], [A*, 0]]`, whose
/// eigenvalues are `±σ_k` (plus `|m − n|` zeros) with eigenvectors `(u_k; ±v_k)/√2`.
/// Used for all SVD work: nalgebra's complex SVD loses accuracy on some
/// rank-deficient inputs, its Hermitian eigensolver does not.
fn dilation_eigen(a: &CMat) -> HermitianEigen {
    let (m, n) = a.shape();
    let mut h = CMat::zeros(m + n, m + n);
    h.view_mut((0, m), (m, n)).copy_from(a);
    h.view_mut((m, 0), (n, m)).copy_from(&a.adjoint());
    eigh(&h)
}

/// Singular values, descending.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Vec::new();
    }
    dilation_eigen(a).values[..k].iter().map(|v| v.max(0.0)).collect()
}

pub fn spectral_norm(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Numerical rank: singular values above `tol · σ_max`.
pub fn numerical_rank(a: &CMat, tol: f64) -> usize {
    let s = singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * top).count()
}

/// Thin SVD truncated at `tol · σ_max`: returns `(U_r, σ_r, V_r)` with `a ≈ U diag(σ) V*`.
pub fn truncated_svd(a: &CMat, tol: f64) -> (CMat, Vec<f64>, CMat) {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return (CMat::zeros(m, 0), Vec::new(), CMat::zeros(n, 0));
    }
    let eig = dilation_eigen(a);
    let top = eig.values[0];
    let keep = if top > 0.0 {
        eig.values[..m.min(n)].iter().take_while(|&&v| v > tol * top).count()
    } else {
        0
    };
    let scale = c(std::f64::consts::SQRT_2);
    let u_r = CMat::from_fn(m, keep, |i, k| eig.vectors[(i, k)] * scale);
    let v_r = CMat::from_fn(n, keep, |i, k| eig.vectors[(m + i, k)] * scale);
    let s_r = eig.values[..keep].to_vec();
    (u_r, s_r, v_r)
}

/// Orthonormal basis of the column space, truncated at `tol · σ_max`.
pub fn range_basis(a: &CMat, tol: f64) -> CMat {
    truncated_svd(a, tol).0
}

/// Orthonormal basis of the orthogonal complement of the column space of `a`
/// inside `ℂ^m`, where `m = a.nrows()`.
pub fn complement_basis(a: &CMat, tol: f64) -> CMat {
    let m = a.nrows();
    if a.ncols() == 0 {
        return CMat::identity(m, m);
    }
    let gram = a * a.adjoint();
    let eig = eigh(&gram);
    let top = eig.max();
    let cols: Vec<usize> = (0..m)
        .filter(|&k| top <= 0.0 || eig.values[k] <= tol * top)
        .collect();
    CMat::from_fn(m, cols.len(), |i, c| eig.vectors[(i, cols[c])])
}

/// Moore–Penrose pseudo-inverse via truncated SVD.
pub fn pinv(a: &CMat, tol: f64) -> CMat {
    let (u, s, v) = truncated_svd(a, tol);
    let mut vs = v;
    for (k, sigma) in s.iter().enumerate() {
        let mut col = vs.column_mut(k);
        col *= c(1.0 / sigma);
    }
    vs * u.adjoint()
}

/// Partial isometry `U V*` from the truncated SVD `a ≈ U Σ V*`.
pub fn polar_part(a: &CMat, tol: f64) -> CMat {
    let (u, _, v) = truncated_svd(a, tol);
    u * v.adjoint()
}

/// `a ⊗ I_p` with the index convention `(i, α) ↦ i·p + α`.
pub fn kron_identity(a: &CMat, p: usize) -> CMat {
    a.kronecker(&CMat::identity(p, p))
}

/// Block `(i, j)` of size `p × q` from a matrix laid out in `p × q` blocks.
pub fn block(a: &CMat, i: usize, j: usize, p: usize, q: usize) -> CMat {
    a.view((i * p, j * q), (p, q)).into_owned()
}

/// Block-diagonal matrix from equally-shaped blocks.
pub fn block_diag(blocks: &[CMat], p: usize, q: usize) -> CMat {
    let n = blocks.len();
    let mut out = CMat::zeros(n * p, n * q);
    for (i, b) in blocks.iter().enumerate() {
        out.view_mut((i * p, i * q), (p, q)).copy_from(b);
    }
    out
}

/// Minimum eigenvalue of a Hermitian matrix (0 for the empty matrix).
pub fn min_eigenvalue(a: &CMat) -> f64 {
    eigh(a).min()
}

/// Largest principal-angle sine between two subspaces given by orthonormal
/// column bases. Returns 1 when the dimensions differ.
pub fn subspace_distance(a: &CMat, b: &CMat) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let pa = a * a.adjoint();
    let pb = b * b.adjoint();
    spectral_norm(&(pa - pb))
}

/// Standard basis vector `e_k` of `ℂ^n`.
pub fn unit(n: usize, k: usize) -> CVec {
    CVec::from_fn(n, |i, _| c(if i == k { 1.0 } else { 0.0 }))
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[&[f64]]) -> CMat {
        CMat::from_fn(rows.len(), rows[0].len(), |i, j| c(rows[i][j]))
    }

    #[test]
    fn truncated_svd_reconstructs_low_rank_complex() {
        let mut rng = crate::sampling::SplitMix64::new(1);
        let mut z = || Complex64::new(rng.next_signed(), rng.next_signed());
        for t in 0..2000 {
            let (m, n) = (1 + t % 7, 1 + (t / 7) % 6);
            let r = 1 + t % m.min(n);
            let a = CMat::from_fn(m, r, |_, _| z()) * CMat::from_fn(r, n, |_, _| z());
            let (u, s, v) = truncated_svd(&a, 1e-10);
            assert_eq!(s.len(), r);
            let rec = &u * CMat::from_diagonal(&CVec::from_iterator(r, s.iter().map(|&x| c(x)))) * v.adjoint();
            assert!(spectral_norm(&(rec - &a)) <= 1e-12 * s[0]);
            assert!(spectral_norm(&(u.adjoint() * &u - CMat::identity(r, r))) < 1e-12);
            assert!(spectral_norm(&(v.adjoint() * &v - CMat::identity(r, r))) < 1e-12);
        }
    }

    #[test]
    fn eigh_sorts_descending() {
        let a = cm(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let e = eigh(&a);
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn psd_factor_reconstructs_rank_one() {
        let v = CVec::from_vec(vec![c(1.0), Complex64::new(0.0, 2.0), c(-0.5)]);
        let h = &v * v.adjoint();
        let f = psd_factor(&h, 1e-10);
        assert_eq!(f.ncols(), 1);
        assert!(frobenius(&(&f * f.adjoint() - h)) < 1e-12);
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let a = cm(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let p = pinv(&a, 1e-12);
        assert!(frobenius(&(&a * &p * &a - &a)) < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal() {
        let a = cm(&[&[1.0], &[1.0], &[0.0]]);
        let q = complement_basis(&a, 1e-12);
        assert_eq!(q.ncols(), 2);
        assert!(max_abs(&(q.adjoint() * &a)) < 1e-14);
    }

    #[test]
    fn non_hermitian_rejected() {
        let a = cm(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(
            ensure_hermitian(&a, 1e-12),
            Err(Error::NotHermitian { .. })
        ));
    }
}
