//! Joint transmit beamforming and energy-harvesting time-split optimization for
//! a full-duplex, wireless-powered MIMO link.
//!
//! A multi-antenna base station (BS) first beams energy to a two-antenna mobile
//! station (MS) for a fraction `alpha` of each block, then both ends exchange
//! data in full-duplex mode for the remaining `1 - alpha`, with the MS running
//! on the harvested energy. The crate provides:
//!
//! * [`model`]: link parameters, channel sampling and spatial covariances.
//! * [`specfun`]: Lambert-W, the exponential integral `E1` and
//!   hypoexponential mixtures.
//! * [`conic`]: a small dense interior-point solver for Hermitian
//!   semidefinite programs, including a determinant-root constraint.
//! * [`fullcsi`]: rate evaluation, the SDR beamformer, the grid search over
//!   `alpha`, the zero-forcing design and half-duplex baselines.
//! * [`partialcsi`]: ergodic rate, exact outage, Chernoff bound and the
//!   outage-constrained design over an `(alpha, beta)` grid.
//! * [`mc`]: Monte Carlo estimators used to validate the closed forms.
//! * [`cli`]: scenario files and the CSV-producing experiment drivers.

pub mod cli;
pub mod conic;
pub mod error;
pub mod fullcsi;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod partialcsi;
pub mod specfun;

pub use error::{Error, Result};
pub use model::{
    BeamformerSolution, ChannelRealization, CovarianceModel, MethodTag, SystemParams,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
