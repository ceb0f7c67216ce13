//! Partially isometric multipliers representing invariant subspaces.
//!
//! If `M ⊆ H_k ⊗ E` is invariant and `s` is a CNP factor of `k`, then
//! `Q = K^M ⊘ s` is PSD and any factorization `Q = Φ Φ*` gives a multiplier
//! `Φ : H_s ⊗ ℂ^f → H_k ⊗ E` with `M_Φ M_Φ* = P_M`. [`synthesize`] builds `Φ`
//! from the eigendecomposition of `Q`; [`verify_representation`] checks the
//! result against `M` itself.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{hadamard_quotient, is_psd, KernelMatrix};
use crate::linalg::{self, c, CMat};
use crate::multcheck::{classify, is_partial_isometry, MultOpMatrix, MultiplierSymbol};
use crate::samplespace::{SampleSpace, Subspace};
use crate::Tolerances;

/// `Q` with largest eigenvalue at or below this is treated as zero.
const ZERO_QUOTIENT: f64 = 1e-14;
/// Singular values of the multiplication operator must sit this close to 0 or 1.
const PARTIAL_ISOMETRY_TOL: f64 = 1e-7;
/// Residual allowed between `ΦΦ*` and `Φ̃Φ̃*` before two symbols count as different.
const SAME_QUOTIENT_TOL: f64 = 1e-8;
/// Relative singular value cutoff for spans of `Φ(x_i)* ξ`.
const SPAN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationResult {
    /// Multiplicity: the number of columns of each `Φ(x_i)`.
    pub rank_f: usize,
    /// Minimum eigenvalue of `Q = K^M ⊘ S`.
    pub quotient_min_eig: f64,
    /// `‖K^M − Φ (S ⊗ I) Φ*‖_F / ‖K^M‖_F`.
    pub coisometry_residual: f64,
    pub partial_isometry_ok: bool,
    pub phi: MultiplierSymbol,
}

/// `Φ` with `K^M(x_i, x_j) = s(x_i, x_j) Φ(x_i) Φ(x_j)*`, columns ordered by
/// descending eigenvalue of `Q = K^M ⊘ S`.
pub fn synthesize(k_m: &KernelMatrix, s: &KernelMatrix, tols: &Tolerances) -> Result<FactorizationResult> {
    let q = hadamard_quotient(k_m, s)?;
    let report = is_psd(&q, tols.psd);
    if !report.verdict {
        return Err(Error::InvarianceViolation {
            min_eigenvalue: report.min_eigenvalue,
        });
    }
    let eig = linalg::eigh(q.entries());
    if eig.max() <= ZERO_QUOTIENT {
        return Err(Error::ZeroSubspace);
    }
    let factor = linalg::factor_from_eigen(&eig, tols.rank);
    let p = k_m.block_dim();
    let f = factor.ncols();
    let sample = k_m.sample().clone();
    let phi = MultiplierSymbol::with_shape(sample, (p, f), |i, _| {
        factor.view((i * p, 0), (p, f)).into_owned()
    })?;

    let source = s.tensor_identity(f)?;
    let class = classify(k_m, &source, &phi, tols.psd)?;
    let target_space = SampleSpace::new(k_m.clone(), tols.rank)?;
    let source_space = SampleSpace::new(source, tols.rank)?;
    let op = MultOpMatrix::between(&target_space, &source_space, &phi)?;
    Ok(FactorizationResult {
        rank_f: f,
        quotient_min_eig: report.min_eigenvalue,
        coisometry_residual: class.relative_defect,
        partial_isometry_ok: is_partial_isometry(&op, PARTIAL_ISOMETRY_TOL),
        phi,
    })
}

/// Residuals of the three representation checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RepresentationDiagnostics {
    /// `‖P_{ran M_Φ} − P_M‖₂`.
    pub range_distance: f64,
    /// `‖M_Φ M_Φ* − P_M‖₂`.
    pub projection_residual: f64,
    /// `‖K^M − Φ (S ⊗ I) Φ*‖_F / ‖K^M‖_F`.
    pub defect_residual: f64,
}

/// Computes the residuals of [`verify_representation`] without judging them.
pub fn representation_diagnostics(
    phi: &MultiplierSymbol,
    s: &KernelMatrix,
    m: &Subspace,
    tol_rank: f64,
) -> Result<RepresentationDiagnostics> {
    let space = m.space();
    let f = phi.shape().1;
    let source = s.tensor_identity(f)?;
    let source_space = SampleSpace::new(source.clone(), tol_rank)?;
    let op = MultOpMatrix::between(space, &source_space, phi)?;
    let range = linalg::range_basis(&op.matrix, 1e-6);
    let range_distance = linalg::subspace_distance(&range, m.coords());
    let projection_residual = linalg::spectral_norm(&(op.range_gram() - m.projector()));
    let defect_residual = classify(&m.kernel(), &source, phi, 0.0)?.relative_defect;
    Ok(RepresentationDiagnostics {
        range_distance,
        projection_residual,
        defect_residual,
    })
}

/// Checks that `M_Φ` represents `M`: its range is `M` and `M_Φ M_Φ* = P_M` (both
/// to `tol`), and the defect against `K^M` vanishes (to `min(tol, 1e-8)`).
pub fn verify_representation(
    result: &FactorizationResult,
    s: &KernelMatrix,
    m: &Subspace,
    tol: f64,
) -> Result<RepresentationDiagnostics> {
    let d = representation_diagnostics(&result.phi, s, m, crate::DEFAULT_TOL_RANK)?;
    let mut failures = Vec::new();
    if d.range_distance > tol {
        failures.push(format!("range of M_Phi differs from M by {:.3e}", d.range_distance));
    }
    if d.projection_residual > tol {
        failures.push(format!(
            "M_Phi M_Phi* differs from P_M by {:.3e}",
            d.projection_residual
        ));
    }
    let defect_tol = tol.min(1e-8);
    if d.defect_residual > defect_tol {
        failures.push(format!("defect against K^M is {:.3e}", d.defect_residual));
    }
    if failures.is_empty() {
        Ok(d)
    } else {
        Err(Error::Verification { failures })
    }
}

/// `V` with `Φ = Φ̃ V` and `Φ̃ = Φ V*`.
#[derive(Clone, Debug, Serialize)]
pub struct ConnectingIsometry {
    /// `f̃ × f`, mapping `Φ(x)* ξ ↦ Φ̃(x)* ξ` and vanishing off their span.
    #[serde(with = "crate::cjson::cmat_rows")]
    pub v: CMat,
    pub is_isometry: bool,
    pub is_partial_isometry: bool,
    /// `max_i ‖Φ(x_i) − Φ̃(x_i) V‖`.
    pub forward_residual: f64,
    /// `max_i ‖Φ̃(x_i) − Φ(x_i) V*‖`.
    pub backward_residual: f64,
    /// `‖V*V − I‖₂`.
    pub isometry_residual: f64,
}

pub fn connecting_partial_isometry(
    phi: &MultiplierSymbol,
    phi_tilde: &MultiplierSymbol,
    tol: f64,
) -> Result<ConnectingIsometry> {
    if phi.shape().0 != phi_tilde.shape().0 || phi.n() != phi_tilde.n() {
        return Err(Error::Shape("symbols must share sample and row count".into()));
    }
    let a = phi.stacked();
    let b = phi_tilde.stacked();
    let qa = &a * a.adjoint();
    let qb = &b * b.adjoint();
    let mismatch = linalg::max_abs(&(&qa - &qb)) / linalg::max_abs(&qa).max(1.0);
    if mismatch > SAME_QUOTIENT_TOL {
        return Err(Error::Mismatch { residual: mismatch });
    }

    // a = U Σ W*, so W Σ⁻¹ U* a* = W W*, the projection onto span{Φ(x)* ξ}.
    let (u, sigma, w) = linalg::truncated_svd(&a, SPAN_TOL);
    let mut u_scaled = u;
    for (k, s) in sigma.iter().enumerate() {
        let mut col = u_scaled.column_mut(k);
        col /= c(*s);
    }
    let v = b.adjoint() * u_scaled * w.adjoint();

    let f = v.ncols();
    let f_tilde = v.nrows();
    let forward_residual = (0..phi.n())
        .map(|i| linalg::spectral_norm(&(phi.block(i) - phi_tilde.block(i) * &v)))
        .fold(0.0, f64::max);
    let backward_residual = (0..phi.n())
        .map(|i| linalg::spectral_norm(&(phi_tilde.block(i) - phi.block(i) * v.adjoint())))
        .fold(0.0, f64::max);
    let vv = v.adjoint() * &v;
    let isometry_residual = linalg::spectral_norm(&(&vv - CMat::identity(f, f)));
    let in_01 = |m: &CMat| {
        linalg::eigh(m)
            .values
            .iter()
            .all(|&l| l.abs() <= tol || (l - 1.0).abs() <= tol)
    };
    let is_partial_isometry = in_01(&vv) && in_01(&(&v * v.adjoint()));
    debug_assert_eq!(f_tilde, phi_tilde.shape().1);
    Ok(ConnectingIsometry {
        v,
        is_isometry: isometry_residual <= tol,
        is_partial_isometry,
        forward_residual,
        backward_residual,
        isometry_residual,
    })
}

/// `true` iff the vectors `Φ(x_i)* ξ` span all of `ℂ^f`.
pub fn is_minimal(phi: &MultiplierSymbol, tol_rank: f64) -> bool {
    let f = phi.shape().1;
    f == 0 || linalg::numerical_rank(&phi.stacked(), tol_rank) == f
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_complex::Complex64;

    use super::*;
    use crate::kernels::{evaluate, KernelSpec, Point, SampleSet};
    use crate::samplespace::{zero_set_kernel, PointwiseConstraintSpec};
    use crate::DEFAULT_TOL_RANK;

    fn blaschke(a: f64, z: Complex64) -> Complex64 {
        (z - c(a)) / (c(1.0) - c(a) * z)
    }

    fn hardy_one_zero(xs: &[f64], a: f64) -> (Arc<SampleSet>, KernelMatrix, Subspace) {
        let x = Arc::new(SampleSet::real(xs).unwrap());
        let s = evaluate(&KernelSpec::Szego, &x).unwrap();
        let idx = x.index_of(&Point::real(a)).unwrap();
        let space = SampleSpace::new(s.clone(), DEFAULT_TOL_RANK).unwrap();
        let m = space
            .subspace_from_constraints(&PointwiseConstraintSpec::zeros(&[idx], 1), DEFAULT_TOL_RANK)
            .unwrap();
        (x, s, m)
    }

    #[test]
    fn whole_hardy_space_gives_constant() {
        let x = Arc::new(SampleSet::real(&[0.0, 0.3, 0.7, -0.4]).unwrap());
        let s = evaluate(&KernelSpec::Szego, &x).unwrap();
        let r = synthesize(&s, &s, &Tolerances::default()).unwrap();
        assert_eq!(r.rank_f, 1);
        for b in r.phi.blocks() {
            assert!((b[(0, 0)].norm() - 1.0).abs() < 1e-12);
        }
        assert!(r.partial_isometry_ok && r.coisometry_residual < 1e-12);
    }

    #[test]
    fn one_zero_matches_blaschke_up_to_gauge() {
        let xs = [0.0, 0.3, 0.7, -0.4];
        let x = Arc::new(SampleSet::real(&xs).unwrap());
        let s = evaluate(&KernelSpec::Szego, &x).unwrap();
        let km = zero_set_kernel(&KernelSpec::Szego, &x, &[Point::real(0.5)]).unwrap();
        let r = synthesize(&km, &s, &Tolerances::default()).unwrap();
        assert_eq!(r.rank_f, 1);
        let omega = r.phi.block(0)[(0, 0)] / blaschke(0.5, c(0.0));
        assert!((omega.norm() - 1.0).abs() < 1e-8);
        for (i, &xi) in xs.iter().enumerate() {
            let expected = omega * blaschke(0.5, c(xi));
            assert!((r.phi.block(i)[(0, 0)] - expected).norm() < 1e-8);
        }
        assert!(r.partial_isometry_ok);
    }

    #[test]
    fn bergman_one_zero_rank_matches_quotient_rank() {
        let xs = [0.0, 0.3, 0.7, -0.4, 0.55, -0.65];
        let x = Arc::new(SampleSet::real(&xs).unwrap());
        let s = evaluate(&KernelSpec::Szego, &x).unwrap();
        let km = zero_set_kernel(&KernelSpec::Bergman, &x, &[Point::real(0.5)]).unwrap();
        let r = synthesize(&km, &s, &Tolerances::default()).unwrap();

        // Independent rank count: real symmetric eigenvalues of the quotient.
        let q = nalgebra::DMatrix::<f64>::from_fn(6, 6, |i, j| {
            km.entries()[(i, j)].re / s.entries()[(i, j)].re
        });
        let ev = q.symmetric_eigenvalues();
        let top = ev.max();
        let rank = ev.iter().filter(|&&l| l > 1e-10 * top).count();
        assert_eq!(r.rank_f, rank);
        assert!(r.rank_f > 1);
        assert!(r.partial_isometry_ok);
    }

    #[test]
    fn non_invariant_subspace_is_rejected() {
        // span{k_0.5} is not invariant, and its kernel divided by s is not PSD
        // as soon as the sample separates points.
        let x = Arc::new(SampleSet::real(&[0.0, 0.5, -0.5]).unwrap());
        let s = evaluate(&KernelSpec::Szego, &x).unwrap();
        let col = s.entries().column(1).into_owned();
        let km = KernelMatrix::scalar(&col * col.adjoint() / s.entries()[(1, 1)], x.clone()).unwrap();
        assert!(matches!(
            synthesize(&km, &s, &Tolerances::default()),
            Err(Error::InvarianceViolation { .. })
        ));
        let zero = KernelMatrix::scalar(CMat::zeros(3, 3), x).unwrap();
        assert!(matches!(
            synthesize(&zero, &s, &Tolerances::default()),
            Err(Error::ZeroSubspace)
        ));
    }

    #[test]
    fn verify_representation_checks() {
        let (_, s, m) = hardy_one_zero(&[0.0, 0.3, 0.7, -0.4, 0.5], 0.5);
        let r = synthesize(&m.kernel(), &s, &Tolerances::default()).unwrap();
        let d = verify_representation(&r, &s, &m, 1e-7).unwrap();
        assert!(d.range_distance < 1e-7 && d.projection_residual < 1e-7 && d.defect_residual < 1e-8);

        let halved = FactorizationResult {
            phi: r.phi.scaled(c(0.5)),
            ..r.clone()
        };
        match verify_representation(&halved, &s, &m, 1e-7) {
            Err(Error::Verification { failures }) => {
                assert!(failures.iter().any(|f| f.contains("P_M")));
                assert!(!failures.iter().any(|f| f.contains("range")));
            }
            other => panic!("expected verification failure, got {other:?}"),
        }

        let padded = FactorizationResult {
            phi: r.phi.pad_zero_columns(1),
            rank_f: 2,
            ..r
        };
        verify_representation(&padded, &s, &m, 1e-7).unwrap();
    }

    #[test]
    fn connecting_isometry_examples() {
        let (_, s, m) = hardy_one_zero(&[0.0, 0.3, 0.7, -0.4, 0.5, -0.8], 0.5);
        let r = synthesize(&m.kernel(), &s, &Tolerances::default()).unwrap();
        let phi = r.phi;

        let omega = Complex64::from_polar(1.0, 0.7);
        let rotated = phi.scaled(omega.conj());
        let v = connecting_partial_isometry(&phi, &rotated, 1e-8).unwrap();
        assert!((v.v[(0, 0)] - omega).norm() < 1e-10);
        assert!(v.is_isometry && v.is_partial_isometry);

        let padded = phi.pad_zero_columns(1);
        let v = connecting_partial_isometry(&phi, &padded, 1e-8).unwrap();
        assert_eq!(v.v.shape(), (2, 1));
        assert!(v.is_isometry && v.isometry_residual < 1e-8);
        assert!(v.forward_residual < 1e-8 && v.backward_residual < 1e-8);

        let other = phi.scaled(c(0.9));
        assert!(matches!(
            connecting_partial_isometry(&phi, &other, 1e-8),
            Err(Error::Mismatch { .. })
        ));
    }

    #[test]
    fn reordered_factorizations_are_connected() {
        let xs = [0.0, 0.3, 0.7, -0.4, 0.55, -0.65];
        let x = Arc::new(SampleSet::real(&xs).unwrap());
        let s = evaluate(&KernelSpec::Szego, &x).unwrap();
        let km = zero_set_kernel(&KernelSpec::Bergman, &x, &[Point::real(0.5)]).unwrap();
        let phi = synthesize(&km, &s, &Tolerances::default()).unwrap().phi;
        let f = phi.shape().1;
        let reversed = CMat::from_fn(f, f, |i, j| c(if i + j == f - 1 { 1.0 } else { 0.0 }));
        let other = phi.right_multiply(&reversed).unwrap();
        let v = connecting_partial_isometry(&phi, &other, 1e-8).unwrap();
        assert!(v.forward_residual < 1e-8 && v.backward_residual < 1e-8);
        assert!(linalg::max_abs(&(&v.v - &reversed)) < 1e-8);
    }

    #[test]
    fn minimality() {
        let (_, s, m) = hardy_one_zero(&[0.0, 0.3, 0.7, -0.4, 0.5], 0.5);
        let phi = synthesize(&m.kernel(), &s, &Tolerances::default()).unwrap().phi;
        assert!(is_minimal(&phi, DEFAULT_TOL_RANK));
        assert!(!is_minimal(&phi.pad_zero_columns(1), DEFAULT_TOL_RANK));
        let one = MultiplierSymbol::scalar(phi.sample().clone(), |_| c(1.0));
        assert!(is_minimal(&one, DEFAULT_TOL_RANK));
    }

    #[test]
    fn hardy_specialization() {
        let xs = [0.0, 0.2, -0.3, 0.45, -0.6, 0.75, 0.85];
        for a in [0.2, -0.3, 0.75] {
            let (_, s, m) = hardy_one_zero(&xs, a);
            let r = synthesize(&m.kernel(), &s, &Tolerances::default()).unwrap();
            assert_eq!(r.rank_f, 1);
            for (i, &x) in xs.iter().enumerate() {
                assert!((r.phi.block(i)[(0, 0)].norm() - blaschke(a, c(x)).norm()).abs() < 1e-8);
            }
        }
    }
}
