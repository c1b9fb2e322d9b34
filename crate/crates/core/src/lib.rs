//! Reduced-order-model inversion for one-dimensional lossy layered media.
//!
//! The pipeline runs from a medium description through a staggered-grid
//! forward solver, pole/residue extraction, a J-symmetric Lanczos ROM and
//! the spectrally matched grid, to direct and Gauss-Newton inversion.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

pub mod error;
pub mod forward;
pub mod grid;
pub mod invert;
pub mod linalg;
pub mod media;
pub mod optim;
pub mod ratfit;
pub mod rom;
pub mod sampled;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use forward::{FdOperator, TransferSamples};
pub use grid::StaggeredGrid;
pub use invert::{EigenBasis, InversionMethod, InversionResult};
pub use media::{FourierMedium, MediumKind, MediumProfile};
pub use optim::{Extraction, ForwardSettings, GnSettings, OptState};
pub use ratfit::{RationalFit, SpectralData, TailModel};
pub use rom::{Reorth, RomCoefficients, RomMatrix};
pub use sampled::{PiecewiseConstant, PiecewiseLinear};
