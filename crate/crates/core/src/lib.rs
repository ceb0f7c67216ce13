//! Finite-sample operator theory for reproducing kernel Hilbert spaces whose
//! kernel `k` has a complete Nevanlinna–Pick (CNP) factor `s`, i.e. `k/s ≥ 0`.
//!
//! Every object lives on a finite sample `X = {x_1, …, x_n}`: kernels become
//! Hermitian (block) matrices, functions become value vectors, and
//! multipliers become arrays of small matrices, one per sample point. On a
//! finite set the factorization theorems hold exactly, so each construction
//! below comes with a residual that can be checked to floating-point
//! accuracy.
//!
//! | module | contents |
//! |--------|----------|
//! | [`kernels`] | kernel catalog, PSD / normalization / CNP tests, CNP factor `b` with `s = 1/(1 − bb*)` |
//! | [`samplespace`] | the sampled space `H_k ⊗ ℂ^p`, subspaces, subspace kernels, pointwise invariance |
//! | [`multcheck`] | defect kernels, contractive / co-isometric classification, multiplier norms |
//! | [`beurling`] | partially isometric multiplier `Φ` with `M = Φ·(H_s ⊗ F)`, uniqueness, minimality |
//! | [`leech`] | Leech factorization `Ψ = ΦΓ` by a lurking isometry, nested-subspace pipeline |
//! | [`coeffmodel`] | truncated power-series model on the disc, root functions, Fejér means |
//! | [`sampling`] | seeded point generators |

pub mod beurling;
pub mod cjson;
pub mod coeffmodel;
mod error;
pub mod kernels;
pub mod leech;
pub mod linalg;
pub mod multcheck;
pub mod samplespace;
pub mod sampling;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use num_complex::Complex64;

/// Default relative floor for PSD verdicts: `λ_min ≥ −tol · max(1, λ_max)`.
pub const DEFAULT_TOL_PSD: f64 = 1e-10;
/// Default relative eigenvalue cutoff for rank truncation: keep `λ > tol · λ_max`.
pub const DEFAULT_TOL_RANK: f64 = 1e-10;

/// Tolerance pair threaded through the factorization routines.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub psd: f64,
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd: DEFAULT_TOL_PSD,
            rank: DEFAULT_TOL_RANK,
        }
    }
}
