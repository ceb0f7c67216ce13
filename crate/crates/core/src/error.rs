use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {index} {coords} lies outside the domain of the {kernel} kernel")]
    Domain {
        index: usize,
        coords: String,
        kernel: &'static str,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid kernel specification: {0}")]
    InvalidSpec(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e}, scale {scale:.3e})")]
    NotHermitian { asymmetry: f64, scale: f64 },

    #[error("division by zero: |s(x_{i}, x_{j})| = {modulus:.3e}")]
    DivisionByZero { i: usize, j: usize, modulus: f64 },

    #[error("cannot normalize: |K[{index}][base]| = {modulus:.3e} vanishes")]
    Normalization { index: usize, modulus: f64 },

    #[error("kernel is not normalized at base index {base} (worst deviation {deviation:.3e})")]
    NotNormalized { base: usize, deviation: f64 },

    #[error("1 - 1/s is not positive semi-definite on this sample (min eigenvalue {min_eigenvalue:.6e})")]
    NotCnp { min_eigenvalue: f64 },

    #[error("operation requires a scalar kernel, got block dimension {0}")]
    NotScalar(usize),

    #[error("element is not in the sampled space (range residual {residual:.3e})")]
    Membership { residual: f64 },

    #[error("subspace is empty: {0}")]
    EmptySubspace(String),

    #[error("invalid pointwise constraint: {0}")]
    InvalidConstraint(String),

    #[error("multiplier image leaves the target space (range residual {residual:.3e})")]
    Range { residual: f64 },

    #[error("quotient kernel K_M / s is not positive semi-definite (min eigenvalue {min_eigenvalue:.6e}); the subspace is not multiplier invariant or s is not CNP")]
    InvarianceViolation { min_eigenvalue: f64 },

    #[error("quotient kernel is numerically zero")]
    ZeroSubspace,

    #[error("representation check failed: {}", .failures.join("; "))]
    Verification { failures: Vec<String> },

    #[error("symbols do not share the same quotient kernel (residual {residual:.3e})")]
    Mismatch { residual: f64 },

    #[error("s (Phi Phi* - Psi Psi*) is not positive semi-definite (min eigenvalue {min_eigenvalue:.6e}); no contractive factor exists")]
    NoFactorization { min_eigenvalue: f64 },

    #[error("lurking-isometry Gram identity fails (residual {residual:.3e})")]
    GramIdentity { residual: f64 },

    #[error("I - E_w is singular at point {index} (|E_w| = {norm:.6})")]
    Singular { index: usize, norm: f64 },

    #[error("N is not contractively contained in M (min eigenvalue of K_M - K_N {min_eigenvalue:.6e})")]
    NotContained { min_eigenvalue: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
