//! Exact simulation and verification toolkit for gapped group testing (GGT)
//! and quantum junta testing.
//!
//! Subsets of `[n] = {1, ..., n}` are `u64` bitmasks throughout: element `j`
//! lives in bit `j - 1`. Boolean functions use the `{+1, -1}` range, and a
//! truth-table index `i` encodes the input `x` with `x_j` = bit `j - 1` of `i`.
//!
//! Floating-point code is generic over [`Real`] (implemented for `f32` and
//! `f64`); the aliases below fix `f64`, which is what the CLI and the
//! acceptance battery use. Exact distances are `BigRational`.

pub mod acceptance;
pub mod adversary;
pub mod boolfn;
pub mod classical_gt;
pub mod error;
pub mod instances;
pub mod junta;
pub mod qcore;
pub mod qggt;
pub mod scalar;
pub mod subset;
pub mod symqft;

pub use error::{Error, Result};
pub use scalar::{Complex, Real};


/// Fourier spectrum with `f64` coefficients.
pub type Spectrum = boolfn::FourierSpectrum<f64>;
/// Register-labelled state vector over `f64`.
pub type State = qcore::StateVector<f64>;
/// Structured unitary over `f64`.
pub type Unitary = qcore::UnitaryOp<f64>;
/// Block oracle over `f64`.
pub type Blocks = instances::BlockOracle<f64>;
/// Dual-adversary solution of the group-testing problem over `f64`.
pub type GgtSol = adversary::GgtSolution<f64>;
/// Explicit dual-adversary solution over `f64`.
pub type GenericSol = adversary::GenericSolution<f64>;
/// Symmetric-group Fourier transform over `f64`.
pub type Qft = symqft::SymQft<f64>;
/// `Λ` parameters over `f64`.
pub type Lambda = qggt::LambdaSpec<f64>;
/// Exact rational used for distances.
pub type Rational = num_rational::BigRational;
