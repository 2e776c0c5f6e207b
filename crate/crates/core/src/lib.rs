#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod error;
pub mod fock_oracle;
pub mod moments_ode;
pub mod params;
pub mod phase_space_mc;

pub use error::{Error, Result};
pub use params::{Coefficients, MicroscopicParams, Stability, SystemParams};
