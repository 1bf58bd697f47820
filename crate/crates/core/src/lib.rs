//! Finite-dimensional operator vessels realizing canonical systems.
//!
//! A vessel packages a tuple of operators (A, A_zeta, X, B, C) tied by a
//! Lyapunov equation together with 2x2 parameter matrices (sigma1, sigma2,
//! gamma). Its transfer function maps solutions of a constant-coefficient
//! 2x2 linear ODE to solutions of the same ODE with a potential attached,
//! which is the working form of an inverse scattering transform. The
//! determinant of X is the tau function; the logarithmic derivative of tau
//! solves an integrable evolution equation that this crate verifies by
//! residual computation on grids.
//!
//! The crate is generic over the real scalar (`f32`/`f64`) via
//! [`scalar::Real`]; concrete `f64` aliases live at the root.

pub mod construction;
pub mod error;
pub mod exppoly;
pub mod grid;
pub mod matrix;
pub mod moments;
pub mod params;
pub mod residuals;
pub mod scalar;
pub mod scattering;
pub mod vessel;

pub use error::{Result, VesselError};
pub use matrix::{col2, expm2, mat2, row2, solve_sylvester_diag, Matrix};
pub use params::VesselParameters;
pub use scalar::{cre, cx, Cx, Real, Tolerances};

/// Complex double-precision scalar.
pub type C64 = Cx<f64>;
/// Dense complex matrix at double precision.
pub type Mat64 = Matrix<f64>;
/// Parameter triple at double precision.
pub type Params64 = VesselParameters<f64>;
/// Spectral data at double precision.
pub type SpectralData64 = construction::SpectralData<f64>;
/// Vessel family at double precision.
pub type VesselFamily64 = construction::VesselFamily<f64>;
/// Vessel state at double precision.
pub type VesselState64 = vessel::VesselState<f64>;
/// Built-in soliton at double precision.
pub type Soliton64 = construction::Soliton<f64>;
