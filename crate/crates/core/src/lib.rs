//! Structured-grid simulator for miscible displacement in a porous medium with
//! continuous data assimilation by nudging.
//!
//! The crate is `no_std` (with `alloc`). It contains everything numerical:
//!
//! - [`mesh`]: uniform rectangular grid and its dual control volumes
//! - [`fields`]: continuous and discontinuous bilinear fields, quadrature
//! - [`linalg`]: CSR storage, assembly, CG / BiCGStab
//! - [`pressure`]: global pressure problem on the continuous space
//! - [`flux`]: element-local postprocessing that yields a locally
//!   conservative normal flux on every control volume
//! - [`transport`]: one trapezoidal finite volume element step with upwinding
//!   and the nudging feedback term
//! - [`observation`]: sparse measurement operator and measurement streams
//! - [`driver`]: coarse/fine time marching, twin experiments, metrics
//! - [`scenarios`]: the four built-in problems and their constitutive laws
//!
//! File formats, configuration, the command-line tool and parallel sweeps
//! live in the companion `nudgeflow` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod driver;
pub mod error;
pub mod fields;
pub mod flux;
pub mod linalg;
pub mod math;
pub mod mesh;
pub mod observation;
pub mod pressure;
pub mod scenarios;
pub mod transport;

pub use error::{Error, Result};
pub use fields::{DgField, NodalField};
pub use mesh::{BoundarySpec, BoundaryTag, Point, StructuredMesh};
