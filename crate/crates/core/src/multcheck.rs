//! Multipliers between sampled spaces.
//!
//! For kernels `E` (blocks `q × q`) and `F` (blocks `p × p`) and a symbol
//! `Φ(x_i) ∈ ℂ^{p×q}`, the defect kernel
//!
//! ```text
//! L(x_i, x_j) = F(x_i, x_j) − Φ(x_i) E(x_i, x_j) Φ(x_j)*
//! ```
//!
//! is PSD iff `M_Φ : H_E → H_F` is a contraction, and vanishes iff `M_Φ` is a
//! co-isometry. [`classify`] reads both facts off `L`; [`multiplication_operator`]
//! builds the matrix of `M_Φ` in orthonormal frames so the same facts can be
//! checked from singular values.

use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cjson;
use crate::error::{Error, Result};
use crate::kernels::{evaluate, is_psd, KernelMatrix, KernelSpec, Point, SampleSet};
use crate::linalg::{self, c, CMat};
use crate::samplespace::SampleSpace;
use crate::DEFAULT_TOL_RANK;

/// `Φ(x_i)` for every sample point, all of shape `p × q`.
#[derive(Clone, Debug)]
pub struct MultiplierSymbol {
    blocks: Vec<CMat>,
    rows: usize,
    cols: usize,
    sample: Arc<SampleSet>,
}

impl MultiplierSymbol {
    pub fn new(sample: Arc<SampleSet>, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != sample.len() {
            return Err(Error::Shape(format!(
                "symbol has {} blocks for {} sample points",
                blocks.len(),
                sample.len()
            )));
        }
        let (rows, cols) = blocks[0].shape();
        if blocks.iter().any(|b| b.shape() != (rows, cols)) {
            return Err(Error::Shape("symbol blocks must share one shape".into()));
        }
        Ok(Self {
            blocks,
            rows,
            cols,
            sample,
        })
    }

    /// Builds an explicitly shaped symbol; needed when `p` or `q` is zero.
    pub fn with_shape(
        sample: Arc<SampleSet>,
        shape: (usize, usize),
        mut f: impl FnMut(usize, &Point) -> CMat,
    ) -> Result<Self> {
        let blocks: Vec<CMat> = (0..sample.len()).map(|i| f(i, sample.point(i))).collect();
        if blocks.iter().any(|b| b.shape() != shape) {
            return Err(Error::Shape(format!("symbol blocks must be {}x{}", shape.0, shape.1)));
        }
        Ok(Self {
            blocks,
            rows: shape.0,
            cols: shape.1,
            sample,
        })
    }

    /// Scalar symbol `φ(z)` on a disc sample.
    pub fn scalar(sample: Arc<SampleSet>, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::with_shape(sample, (1, 1), |_, p| CMat::from_element(1, 1, f(p.z())))
            .expect("1x1 blocks")
    }

    pub fn constant(sample: Arc<SampleSet>, m: CMat) -> Self {
        let shape = m.shape();
        Self::with_shape(sample, shape, |_, _| m.clone()).expect("uniform blocks")
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMat {
        &self.blocks[i]
    }

    /// `(p, q)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn sample(&self) -> &Arc<SampleSet> {
        &self.sample
    }

    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    /// Blocks stacked vertically (`np × q`), so that `ΦΦ*` blocks are `Φ(x_i)Φ(x_j)*`.
    pub fn stacked(&self) -> CMat {
        let mut out = CMat::zeros(self.n() * self.rows, self.cols);
        for (i, b) in self.blocks.iter().enumerate() {
            out.view_mut((i * self.rows, 0), (self.rows, self.cols)).copy_from(b);
        }
        out
    }

    /// `diag(Φ(x_1), …, Φ(x_n))` (`np × nq`), the action of `M_Φ` on value vectors.
    pub fn block_diag(&self) -> CMat {
        linalg::block_diag(&self.blocks, self.rows, self.cols)
    }

    /// Pointwise product `Φ(x_i) Γ(x_i)`.
    pub fn compose(&self, other: &MultiplierSymbol) -> Result<MultiplierSymbol> {
        if self.cols != other.rows || !same_sample(&self.sample, &other.sample) {
            return Err(Error::Shape(format!(
                "cannot compose {}x{} with {}x{} symbols",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect(),
            rows: self.rows,
            cols: other.cols,
            sample: self.sample.clone(),
        })
    }

    pub fn scaled(&self, factor: Complex64) -> MultiplierSymbol {
        Self {
            blocks: self.blocks.iter().map(|b| b * factor).collect(),
            ..self.clone()
        }
    }

    /// Appends `extra` zero columns to every block.
    pub fn pad_zero_columns(&self, extra: usize) -> MultiplierSymbol {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut out = CMat::zeros(self.rows, self.cols + extra);
                out.view_mut((0, 0), (self.rows, self.cols)).copy_from(b);
                out
            })
            .collect();
        Self {
            blocks,
            cols: self.cols + extra,
            ..self.clone()
        }
    }

    /// `Φ(x_i) V` for a fixed `q × q'` matrix.
    pub fn right_multiply(&self, v: &CMat) -> Result<MultiplierSymbol> {
        if v.nrows() != self.cols {
            return Err(Error::Shape("right factor has the wrong number of rows".into()));
        }
        Ok(Self {
            blocks: self.blocks.iter().map(|b| b * v).collect(),
            rows: self.rows,
            cols: v.ncols(),
            sample: self.sample.clone(),
        })
    }

    /// Largest pointwise operator norm `max_i ‖Φ(x_i)‖`.
    pub fn sup_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::spectral_norm)
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> SymbolJson {
        SymbolJson {
            shape: [self.rows, self.cols],
            blocks: self.blocks.iter().map(cjson::flat_row_major).collect(),
        }
    }

    pub fn from_json(json: &SymbolJson, sample: Arc<SampleSet>) -> Result<Self> {
        let [p, q] = json.shape;
        for b in &json.blocks {
            if b.len() != p * q {
                return Err(Error::Shape(format!(
                    "symbol block has {} entries, shape {p}x{q} needs {}",
                    b.len(),
                    p * q
                )));
            }
        }
        if json.blocks.len() != sample.len() {
            return Err(Error::Shape(format!(
                "symbol has {} blocks for {} sample points",
                json.blocks.len(),
                sample.len()
            )));
        }
        Self::with_shape(sample, (p, q), |i, _| {
            CMat::from_fn(p, q, |r, col| cjson::from_pair(json.blocks[i][r * q + col]))
        })
    }
}

/// JSON form of a symbol: `{"shape": [p, q], "blocks": [[[re, im], …], …]}`
/// with each block flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolJson {
    pub shape: [usize; 2],
    pub blocks: Vec<Vec<[f64; 2]>>,
}

impl Serialize for MultiplierSymbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

fn same_sample(a: &Arc<SampleSet>, b: &Arc<SampleSet>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_shapes(f: &KernelMatrix, e: &KernelMatrix, phi: &MultiplierSymbol) -> Result<()> {
    let (p, q) = phi.shape();
    if f.block_dim() != p || e.block_dim() != q {
        return Err(Error::Shape(format!(
            "symbol is {p}x{q} but the kernels have block sizes {} (target) and {} (source)",
            f.block_dim(),
            e.block_dim()
        )));
    }
    if !same_sample(f.sample(), phi.sample()) || !same_sample(e.sample(), phi.sample()) {
        return Err(Error::Shape("kernels and symbol live on different samples".into()));
    }
    Ok(())
}

/// `Φ E Φ*` as a block matrix.
fn transported(e: &KernelMatrix, phi: &MultiplierSymbol) -> CMat {
    let d = phi.block_diag();
    linalg::hermitian_part(&(&d * e.entries() * d.adjoint()))
}

/// Defect kernel `L = F − Φ E Φ*`.
pub fn defect(f: &KernelMatrix, e: &KernelMatrix, phi: &MultiplierSymbol) -> Result<KernelMatrix> {
    check_shapes(f, e, phi)?;
    KernelMatrix::new(
        f.entries() - transported(e, phi),
        f.block_dim(),
        f.sample().clone(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub contractive: bool,
    pub coisometric: bool,
    /// Minimum eigenvalue of `L`.
    pub min_eigenvalue: f64,
    /// `‖L‖_F`.
    pub defect_norm: f64,
    /// `‖L‖_F / ‖F‖_F`.
    pub relative_defect: f64,
}

/// Contractive iff `L ⪰ 0` (PSD at `tol`); co-isometric iff `‖L‖_F ≤ tol·‖F‖_F`.
pub fn classify(
    f: &KernelMatrix,
    e: &KernelMatrix,
    phi: &MultiplierSymbol,
    tol: f64,
) -> Result<Classification> {
    let l = defect(f, e, phi)?;
    let report = is_psd(&l, tol);
    let defect_norm = linalg::frobenius(l.entries());
    let scale = linalg::frobenius(f.entries());
    let relative_defect = if scale > 0.0 {
        defect_norm / scale
    } else {
        defect_norm
    };
    Ok(Classification {
        contractive: report.verdict,
        coisometric: defect_norm <= tol * scale,
        min_eigenvalue: report.min_eigenvalue,
        defect_norm,
        relative_defect,
    })
}

/// Matrix of `M_Φ` between orthonormal frames of the source and target spaces.
#[derive(Clone, Debug)]
pub struct MultOpMatrix {
    pub matrix: CMat,
    /// Descending.
    pub singular_values: Vec<f64>,
}

impl MultOpMatrix {
    pub fn between(
        target: &SampleSpace,
        source: &SampleSpace,
        phi: &MultiplierSymbol,
    ) -> Result<Self> {
        check_shapes(target.kernel(), source.kernel(), phi)?;
        let images = phi.block_diag() * source.frame();
        let matrix = target.coords_of(&images).map_err(|err| match err {
            Error::Membership { residual } => Error::Range { residual },
            other => other,
        })?;
        let singular_values = linalg::singular_values(&matrix);
        Ok(Self {
            matrix,
            singular_values,
        })
    }

    pub fn norm(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// `M_Φ M_Φ*` in target coordinates.
    pub fn range_gram(&self) -> CMat {
        &self.matrix * self.matrix.adjoint()
    }
}

pub fn multiplication_operator(
    f: &KernelMatrix,
    e: &KernelMatrix,
    phi: &MultiplierSymbol,
) -> Result<MultOpMatrix> {
    let target = SampleSpace::new(f.clone(), DEFAULT_TOL_RANK)?;
    let source = SampleSpace::new(e.clone(), DEFAULT_TOL_RANK)?;
    MultOpMatrix::between(&target, &source, phi)
}

/// Every singular value within `tol` of 0 or 1.
pub fn is_partial_isometry(op: &MultOpMatrix, tol: f64) -> bool {
    op.singular_values
        .iter()
        .all(|&s| s.abs() <= tol || (s - 1.0).abs() <= tol)
}

const NORM_ITERATIONS: usize = 60;
const NORM_ABS_TOL: f64 = 1e-10;

/// Smallest `t ≥ 0` with `t² F − Φ E Φ* ⪰ 0`, by bisection.
pub fn multiplier_norm(f: &KernelMatrix, e: &KernelMatrix, phi: &MultiplierSymbol) -> Result<f64> {
    check_shapes(f, e, phi)?;
    let g = transported(e, phi);
    let sup = phi.sup_norm();
    if sup == 0.0 || linalg::max_abs(&g) == 0.0 {
        return Ok(0.0);
    }
    let f_eig = linalg::eigh(f.entries());
    let e_max = linalg::eigh(e.entries()).max();
    let f_top = f_eig.max();
    let f_min_pos = f_eig.values[..f_eig.rank(DEFAULT_TOL_RANK).max(1)]
        .last()
        .copied()
        .unwrap_or(f_top);
    let g_top = linalg::eigh(&g).max();
    let feasible = |t: f64| {
        let m = f.entries() * c(t * t) - &g;
        let scale = (t * t * f_top).max(g_top).max(f64::MIN_POSITIVE);
        linalg::min_eigenvalue(&m) >= -64.0 * f64::EPSILON * scale
    };
    let mut hi = sup * (e_max / f_min_pos).sqrt();
    let mut grow = 0;
    while !feasible(hi) {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::Range {
                residual: f64::INFINITY,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..NORM_ITERATIONS {
        if hi - lo <= NORM_ABS_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RowContraction {
    /// The tuple `(z_1, …, z_d)` is a row contraction on `H_K`.
    pub contractive: bool,
    pub defect_min_eigenvalue: f64,
    /// `K ⊘ DruryArveson(d) ⪰ 0`, the equivalent quotient test.
    pub quotient_psd: bool,
}

/// Row-contraction test for the coordinate functions on `H_K` over points of
/// the ball, cross-checked against the quotient by the Drury–Arveson kernel.
pub fn row_contraction_check(k: &KernelMatrix, d: usize, tol: f64) -> Result<RowContraction> {
    k.require_scalar()?;
    let sample = k.sample().clone();
    if sample.dim() != d {
        return Err(Error::Shape(format!(
            "points have dimension {}, expected {d}",
            sample.dim()
        )));
    }
    let phi = MultiplierSymbol::with_shape(sample.clone(), (1, d), |_, p| {
        CMat::from_row_slice(1, d, p.coords())
    })?;
    let e = k.tensor_identity(d)?;
    let class = classify(k, &e, &phi, tol)?;
    let da = evaluate(&KernelSpec::DruryArveson { d }, &sample)?;
    let quotient = crate::kernels::hadamard_quotient(k, &da)?;
    let quotient_psd = is_psd(&quotient, tol).verdict;
    if quotient_psd != class.contractive {
        warn!(
            "row contraction verdicts disagree (defect min eigenvalue {:.3e})",
            class.min_eigenvalue
        );
    }
    Ok(RowContraction {
        contractive: class.contractive,
        defect_min_eigenvalue: class.min_eigenvalue,
        quotient_psd,
    })
}

/// `max_i rank Φ(x_i)`, singular values counted above `tol_rank · max_i ‖Φ(x_i)‖`.
pub fn sup_rank(phi: &MultiplierSymbol, tol_rank: f64) -> usize {
    let top = phi.sup_norm();
    if top == 0.0 {
        return 0;
    }
    phi.blocks()
        .iter()
        .map(|b| {
            linalg::singular_values(b)
                .iter()
                .filter(|&&s| s > tol_rank * top)
                .count()
        })
        .max()
        .unwrap_or(0)
}

/// Co-isometry checked two ways: the defect `L = 0` and `M_Φ M_Φ* = I` on the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoisometryDiagnostics {
    /// `‖L‖_F / ‖F‖_F`.
    pub defect_residual: f64,
    /// `‖M_Φ M_Φ* − I‖₂` in target coordinates.
    pub operator_residual: f64,
    /// Largest distance of a singular value from `{0, 1}`.
    pub sigma_deviation: f64,
    /// The two routes disagree beyond 1e-7.
    pub discrepancy: bool,
}

pub fn coisometry_diagnostics(
    f: &KernelMatrix,
    e: &KernelMatrix,
    phi: &MultiplierSymbol,
    tol: f64,
) -> Result<CoisometryDiagnostics> {
    let class = classify(f, e, phi, tol)?;
    let op = multiplication_operator(f, e, phi)?;
    let r = op.matrix.nrows();
    let operator_residual = linalg::spectral_norm(&(op.range_gram() - CMat::identity(r, r)));
    let sigma_deviation = op
        .singular_values
        .iter()
        .map(|&s| s.abs().min((s - 1.0).abs()))
        .fold(0.0, f64::max);
    let discrepancy = (class.relative_defect <= tol) != (operator_residual <= 1e-7);
    if discrepancy {
        warn!(
            "co-isometry routes disagree: defect {:.3e}, operator {:.3e}",
            class.relative_defect, operator_residual
        );
    }
    Ok(CoisometryDiagnostics {
        defect_residual: class.relative_defect,
        operator_residual,
        sigma_deviation,
        discrepancy,
    })
}

/// Pointwise bound `‖Φ(x_i)‖² ≤ k(x_i, x_i)/s(x_i, x_i)` for contractive multipliers
/// `H_s ⊗ ℂ^q → H_k ⊗ ℂ^p`; returns the worst excess (≤ 0 when it holds).
pub fn pointwise_bound_excess(
    k: &KernelMatrix,
    s: &KernelMatrix,
    phi: &MultiplierSymbol,
) -> Result<f64> {
    let km = k.require_scalar()?;
    let sm = s.require_scalar()?;
    Ok((0..phi.n())
        .map(|i| {
            let norm = linalg::spectral_norm(phi.block(i));
            norm * norm - km[(i, i)].re / sm[(i, i)].re
        })
        .fold(f64::NEG_INFINITY, f64::max))
}
