//! Numerical tolerances shared by checks, pipelines and the acceptance suite.

/// Exact-algebra identities: unitarity, idempotence, permutation matrices.
pub const EXACT: f64 = 1e-12;

/// Composed pipelines: reduction, switching, measurement chains.
pub const PIPELINE: f64 = 1e-10;

/// Amplitudes below this are treated as zero when deciding degeneracy.
pub const DEGENERATE: f64 = 1e-12;

/// Eigenvalues below this are clipped before taking logarithms.
pub const EIGEN_CLIP: f64 = 1e-12;

/// Default cap on the dense dimension handled by the oracle.
pub const DEFAULT_MAX_DIMENSION: usize = 4096;
