//! Finite-grid simulation of a composite system seen from an external frame
//! and from the intrinsic frame of a heavy reference body.
//!
//! The crate is organised bottom-up: [`hilbert`] holds grids and labelled
//! tensor-product states, [`dynamics`] propagates them, [`schmidt`] and
//! [`frames`] turn entangled relative states into branch ensembles and
//! density matrices, and [`scenarios`] wires these into complete runs that
//! the [`cli`] front end drives.

pub mod error;
pub mod linalg;
mod spectral;
pub mod hilbert;
pub mod dynamics;
pub mod schmidt;
pub mod frames;
pub mod scenarios;
pub mod cli;

pub use error::{Error, Result};
pub use hilbert::{inner_product, make_gaussian, tensor_product, Factor, FactorKind, GaussianParams, Grid, Space, StateVector};
pub use linalg::{CMatrix, C64};
