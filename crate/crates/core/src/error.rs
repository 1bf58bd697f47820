//! Error type shared by all modules.

use thiserror::Error;

/// Library-wide error enumeration.
#[derive(Debug, Clone, Error)]
pub enum VesselError {
    /// Shape or squareness violation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Matrix singular or too close to singular to invert reliably.
    #[error("singular matrix: |det| = {det_mag:.3e} below threshold {threshold:.3e}")]
    Singular { det_mag: f64, threshold: f64 },

    /// A Sylvester/Lyapunov solve hit lambda_i + mu_j = 0.
    #[error("eigenvalue resonance: lambda[{i}] + mu[{j}] = 0")]
    Resonance { i: usize, j: usize },

    /// Spectral parameter too close to an eigenvalue of the generator.
    #[error("spectral parameter within {dist:.3e} of eigenvalue {index}")]
    NearSpectrum { index: usize, dist: f64 },

    /// Defective (repeated to within resolution) eigenvalue configuration
    /// where a simple-spectrum step is required.
    #[error("unsupported multiplicity: eigenvalues {i} and {j} coincide")]
    UnsupportedMultiplicity { i: usize, j: usize },

    /// Moment order above the hard cap.
    #[error("moment order {n} exceeds cap {cap}")]
    OrderCap { n: usize, cap: usize },

    /// Requested point outside the sampled range of a grid quantity.
    #[error("point {x:.6} outside sampled range [{lo:.6}, {hi:.6}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    /// Grid too coarse for the requested stencil.
    #[error("grid too coarse for order-{order} stencil (need {need} points, have {have})")]
    Stencil { order: usize, need: usize, have: usize },

    /// Operation requires the canonical parameter preset.
    #[error("operation requires the canonical parameter preset")]
    NonCanonicalParameters,

    /// Input whose structure makes the whole computation vacuous
    /// (e.g. a residual grid with every point masked).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Mutually inconsistent moment data.
    #[error("inconsistent moments: {0}")]
    InconsistentMoments(String),

    /// Moment-matching system too ill-conditioned to trust.
    #[error("ill-conditioned moment system: {0}")]
    IllConditioned(String),

    /// Anything else that makes the input invalid.
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, VesselError>;
