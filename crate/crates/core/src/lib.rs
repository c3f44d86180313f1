//! Projection-based equivariance tooling.
//!
//! The crate is organised around the Reynolds (group-averaging) operator
//! `P(T) = (1/|G|) Σ_g π_out(g)* T π_in(g)`:
//!
//! - [`group`]: finite groups as Cayley tables and unitary representations.
//! - [`linalg`]: dense complex matrices and the norm family used by penalties.
//! - [`reynolds`]: spatial-domain projection, its commutant oracle, and the
//!   C4 steerable-kernel projector.
//! - [`spectral`]: Fourier transforms on finite groups and the block-masking
//!   projections, including the FFT fast path for circulants.
//! - [`defect`]: equivariance-defect metrics and executable bound checks.
//! - [`train`]: a small reverse-mode engine and the SO(2) toy experiment.
//! - [`io`]: binary and CSV file formats shared with the command-line tool.

pub mod defect;
pub mod error;
pub mod group;
pub mod io;
pub mod linalg;
pub mod random;
pub mod reynolds;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
pub use num_complex::Complex64;
