//! Leech factorization `Ψ = ΦΓ` with `Γ` a contractive multiplier of `H_s`.
//!
//! When `P = S ∘ (ΦΦ* − ΨΨ*)` is PSD, factor `P = HH*` and `1 − 1/s = bb*`.
//! The pairs
//!
//! ```text
//! u_i(ξ) = [Φ(x_i)* ξ ; (H(x_i)* ξ) ⊗ b(x_i)*]
//! v_i(ξ) = [Ψ(x_i)* ξ ; H(x_i)* ξ]
//! ```
//!
//! have equal Gram matrices, so `u ↦ v` extends to a partial isometry
//! `V = [A B; C D]`. Eliminating the `H` component from `V u = v` gives the
//! transfer function
//!
//! ```text
//! Γ(w)* = A + B W_w (I − D W_w)⁻¹ C,   W_w = I_h ⊗ b(w)*.
//! ```
//!
//! [`arias_pipeline`] then uses the solver to write a sub-subspace `N ⊆ M` as
//! the range of a partially isometric `ΦΓ`.

use std::sync::Arc;

use log::debug;
use serde::Serialize;

use crate::beurling::synthesize;
use crate::error::{Error, Result};
use crate::kernels::{cnp_factor, is_psd, KernelMatrix};
use crate::linalg::{self, c, CMat};
use crate::multcheck::{classify, MultOpMatrix, MultiplierSymbol};
use crate::samplespace::{SampleSpace, Subspace};
use crate::Tolerances;

/// Relative level below which `P` counts as the zero kernel.
const ZERO_DEFECT: f64 = 1e-14;
/// Allowed relative mismatch between the Gram matrices of the `u` and `v` systems.
const GRAM_TOL: f64 = 1e-8;

/// `P[i][j] = s(x_i, x_j) (Φ(x_i)Φ(x_j)* − Ψ(x_i)Ψ(x_j)*)`.
pub fn leech_defect(
    s: &KernelMatrix,
    phi: &MultiplierSymbol,
    psi: &MultiplierSymbol,
) -> Result<KernelMatrix> {
    let sm = s.require_scalar()?;
    let p = phi.shape().0;
    if psi.shape().0 != p || phi.n() != s.n() || psi.n() != s.n() {
        return Err(Error::Shape(format!(
            "Leech data need equal row counts on {} points (got {}x{} and {}x{})",
            s.n(),
            p,
            phi.shape().1,
            psi.shape().0,
            psi.shape().1
        )));
    }
    let a = phi.stacked();
    let b = psi.stacked();
    let diff = &a * a.adjoint() - &b * b.adjoint();
    let entries = CMat::from_fn(diff.nrows(), diff.ncols(), |r, col| {
        sm[(r / p, col / p)] * diff[(r, col)]
    });
    KernelMatrix::new(linalg::hermitian_part(&entries), p, s.sample().clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct LeechResult {
    pub gamma: MultiplierSymbol,
    /// Minimum eigenvalue of `S ∘ (I − ΓΓ*)`.
    pub contractivity_min_eig: f64,
    /// `max_i ‖Ψ(x_i) − Φ(x_i)Γ(x_i)‖`.
    pub factor_residual: f64,
    /// Relative mismatch of the `u` and `v` Gram matrices.
    pub gram_residual: f64,
    /// Rank `h` of the defect factor `P = HH*`.
    pub defect_rank: usize,
}

impl LeechResult {
    /// Both certificates: pointwise factorization and contractivity.
    pub fn certified(&self, factor_tol: f64, psd_tol: f64) -> bool {
        self.factor_residual <= factor_tol && self.contractivity_min_eig >= -psd_tol
    }
}

/// Finds a contractive `Γ` (blocks `f × g`) with `Ψ = ΦΓ` on the sample.
pub fn solve(
    s: &KernelMatrix,
    phi: &MultiplierSymbol,
    psi: &MultiplierSymbol,
    tols: &Tolerances,
) -> Result<LeechResult> {
    let defect = leech_defect(s, phi, psi)?;
    let report = is_psd(&defect, tols.psd);
    if !report.verdict {
        return Err(Error::NoFactorization {
            min_eigenvalue: report.min_eigenvalue,
        });
    }
    let b = cnp_factor(s, tols.rank)?;
    let big_l = b.rank();

    let scale = {
        let a = phi.stacked();
        linalg::max_abs(&(&a * a.adjoint())).max(f64::MIN_POSITIVE)
    };
    let h_factor = if report.max_eigenvalue <= ZERO_DEFECT * scale {
        CMat::zeros(defect.dim(), 0)
    } else {
        linalg::psd_factor(defect.entries(), tols.rank)
    };

    let n = s.n();
    let (p, f) = phi.shape();
    let g = psi.shape().1;
    let h = h_factor.ncols();
    let hl = h * big_l;

    let mut u = CMat::zeros(f + hl, n * p);
    let mut v = CMat::zeros(g + h, n * p);
    for i in 0..n {
        let bi = b.rows().row(i);
        let phi_adj = phi.block(i).adjoint();
        let psi_adj = psi.block(i).adjoint();
        let h_adj = h_factor.rows(i * p, p).adjoint();
        for a in 0..p {
            let col = i * p + a;
            u.view_mut((0, col), (f, 1)).copy_from(&phi_adj.column(a));
            v.view_mut((0, col), (g, 1)).copy_from(&psi_adj.column(a));
            v.view_mut((g, col), (h, 1)).copy_from(&h_adj.column(a));
            for k in 0..h {
                for l in 0..big_l {
                    u[(f + k * big_l + l, col)] = h_adj[(k, a)] * bi[l].conj();
                }
            }
        }
    }

    let gram_u = u.adjoint() * &u;
    let gram_v = v.adjoint() * &v;
    let gram_residual = linalg::max_abs(&(&gram_u - &gram_v)) / linalg::max_abs(&gram_u).max(1.0);
    if gram_residual > GRAM_TOL {
        return Err(Error::GramIdentity {
            residual: gram_residual,
        });
    }

    // V maps u to v. On span u it is v W Σ⁻¹ P*; the factor v W Σ⁻¹ is replaced
    // by its polar part so that V is a partial isometry to machine precision
    // even when u is ill-conditioned.
    let (p_u, sigma_u, w_u) = linalg::truncated_svd(&u, tols.rank);
    let mut x = &v * w_u;
    for (k, sigma) in sigma_u.iter().enumerate() {
        let mut col = x.column_mut(k);
        col /= c(*sigma);
    }
    let colligation = linalg::polar_part(&x, tols.rank) * p_u.adjoint();
    let a_blk = colligation.view((0, 0), (g, f)).into_owned();
    let b_blk = colligation.view((0, f), (g, hl)).into_owned();
    let c_blk = colligation.view((g, 0), (h, f)).into_owned();
    let d_blk = colligation.view((g, f), (h, hl)).into_owned();

    let mut blocks = Vec::with_capacity(n);
    for i in 0..n {
        let bi = b.rows().row(i);
        let w = CMat::from_fn(hl, h, |r, col| {
            if r / big_l == col {
                bi[r % big_l].conj()
            } else {
                c(0.0)
            }
        });
        let gamma_adj = if h == 0 {
            a_blk.clone()
        } else {
            let e = &d_blk * &w;
            let y = (CMat::identity(h, h) - &e)
                .lu()
                .solve(&c_blk)
                .ok_or_else(|| Error::Singular {
                    index: i,
                    norm: linalg::spectral_norm(&e),
                })?;
            &a_blk + &b_blk * &w * y
        };
        blocks.push(gamma_adj.adjoint());
    }
    let gamma = MultiplierSymbol::with_shape(s.sample().clone(), (f, g), |i, _| blocks[i].clone())?;

    let factor_residual = (0..n)
        .map(|i| linalg::spectral_norm(&(psi.block(i) - phi.block(i) * gamma.block(i))))
        .fold(0.0, f64::max);
    let contractivity = classify(&s.tensor_identity(f)?, &s.tensor_identity(g)?, &gamma, tols.psd)?;
    debug!(
        "leech solve: h = {h}, L = {big_l}, gram residual {gram_residual:.3e}, factor residual {factor_residual:.3e}"
    );
    Ok(LeechResult {
        gamma,
        contractivity_min_eig: contractivity.min_eigenvalue,
        factor_residual,
        gram_residual,
        defect_rank: h,
    })
}

/// `K^M − K^N ⪰ 0`, i.e. `N` is contractively contained in `M`.
pub fn contractive_containment_check(k_m: &KernelMatrix, k_n: &KernelMatrix, tol: f64) -> Result<bool> {
    Ok(is_psd(&k_m.difference(k_n)?, tol).verdict)
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineResult {
    pub phi: MultiplierSymbol,
    pub psi: MultiplierSymbol,
    pub gamma0: MultiplierSymbol,
    #[serde(skip)]
    pub l_subspace: Subspace,
    pub l_dim: usize,
    pub gamma: MultiplierSymbol,
    pub composite: MultiplierSymbol,
    /// `‖M_{ΦΓ} M_{ΦΓ}* − P_N‖₂`.
    pub projection_residual: f64,
    /// Largest distance of a singular value of `M_{ΦΓ}` from `{0, 1}`.
    pub composite_sigma_deviation: f64,
    /// Minimum eigenvalue of `P_N − M_Φ P_L M_Φ*`.
    pub chain_upper_min_eig: f64,
    /// Minimum eigenvalue of `M_Φ P_L M_Φ* − M_Φ M_Γ₀ M_Γ₀* M_Φ*`.
    pub chain_lower_min_eig: f64,
    pub leech: LeechSummary,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LeechSummary {
    pub contractivity_min_eig: f64,
    pub factor_residual: f64,
    pub gram_residual: f64,
    pub defect_rank: usize,
}

impl PipelineResult {
    pub fn passes(&self, tol: f64) -> bool {
        self.projection_residual <= tol
            && self.composite_sigma_deviation <= tol
            && self.chain_upper_min_eig >= -tol
            && self.chain_lower_min_eig >= -tol
    }
}

/// For invariant `N ⊆ M` of the same space `H_k ⊗ E`, builds `ΦΓ` with
/// `M_{ΦΓ} M_{ΦΓ}* = P_N`, where `Φ` represents `M` and `Γ` is a partially
/// isometric multiplier of `H_s` onto the closed range of a Leech factor `Γ₀`.
pub fn arias_pipeline(
    m: &Subspace,
    n: &Subspace,
    s: &KernelMatrix,
    tols: &Tolerances,
) -> Result<PipelineResult> {
    let space = m.space();
    if !Arc::ptr_eq(space, n.space()) {
        return Err(Error::InvalidSpec(
            "both subspaces must live in the same space; a third kernel for N is not supported \
             (see the counterexample task)"
                .into(),
        ));
    }
    let phi = synthesize(&m.kernel(), s, tols).map_err(Error::at_stage("synthesize M"))?.phi;
    let psi = synthesize(&n.kernel(), s, tols).map_err(Error::at_stage("synthesize N"))?.phi;
    let leech = solve(s, &phi, &psi, tols).map_err(Error::at_stage("leech"))?;
    let gamma0 = leech.gamma.clone();
    let (_, f) = phi.shape();
    let g0 = psi.shape().1;

    let range_of_gamma0 = || -> Result<_> {
        let fiber_f = SampleSpace::new(s.tensor_identity(f)?, tols.rank)?;
        let fiber_g = SampleSpace::new(s.tensor_identity(g0)?, tols.rank)?;
        let op = MultOpMatrix::between(&fiber_f, &fiber_g, &gamma0)?;
        let images: Vec<_> = fiber_f
            .values_of(&op.matrix)
            .column_iter()
            .map(|col| fiber_f.element(col.into_owned()))
            .collect::<Result<_>>()?;
        let l = fiber_f.subspace_from_spanning(&images, tols.rank)?;
        Ok((fiber_f, op, l))
    };
    let (fiber_f, op_gamma0, l_subspace) =
        range_of_gamma0().map_err(Error::at_stage("range of Gamma0"))?;

    let gamma = synthesize(&l_subspace.kernel(), s, tols)
        .map_err(Error::at_stage("synthesize L"))?
        .phi;
    let composite = phi.compose(&gamma).map_err(Error::at_stage("compose"))?;

    let stage = Error::at_stage("verify");
    let verify = || -> Result<(f64, f64, f64, f64)> {
        let fiber_c = SampleSpace::new(s.tensor_identity(composite.shape().1)?, tols.rank)?;
        let op_c = MultOpMatrix::between(space, &fiber_c, &composite)?;
        let p_n = n.projector();
        let projection_residual = linalg::spectral_norm(&(op_c.range_gram() - &p_n));
        let sigma_dev = op_c
            .singular_values
            .iter()
            .map(|&v| v.abs().min((v - 1.0).abs()))
            .fold(0.0, f64::max);
        let op_phi = MultOpMatrix::between(space, &fiber_f, &phi)?;
        let a = &op_phi.matrix;
        let middle = a * l_subspace.projector() * a.adjoint();
        let ag = a * &op_gamma0.matrix;
        let bottom = &ag * ag.adjoint();
        let upper = linalg::min_eigenvalue(&linalg::hermitian_part(&(&p_n - &middle)));
        let lower = linalg::min_eigenvalue(&linalg::hermitian_part(&(&middle - bottom)));
        Ok((projection_residual, sigma_dev, upper, lower))
    };
    let (projection_residual, composite_sigma_deviation, chain_upper_min_eig, chain_lower_min_eig) =
        verify().map_err(stage)?;

    Ok(PipelineResult {
        leech: LeechSummary {
            contractivity_min_eig: leech.contractivity_min_eig,
            factor_residual: leech.factor_residual,
            gram_residual: leech.gram_residual,
            defect_rank: leech.defect_rank,
        },
        phi,
        psi,
        gamma0,
        l_dim: l_subspace.dim(),
        l_subspace,
        gamma,
        composite,
        projection_residual,
        composite_sigma_deviation,
        chain_upper_min_eig,
        chain_lower_min_eig,
    })
}
