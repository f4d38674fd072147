//! Deterministic SIS and SI epidemics on graphon kernels.
//!
//! The state `u(t, x)` is the infected fraction at position `x` of `[0, 1]`
//! and evolves by
//!
//! ```text
//! du/dt = beta (1 - u) W u - gamma u
//! ```
//!
//! where `W` is the integral operator of a symmetric non-negative kernel.
//! Kernels are piecewise constant on a [`Partition`], rank one, or the
//! power-law family `W(x, y) = lambda1 (1 - 2p) (xy)^-p` resolved on a graded
//! mesh.
//!
//! The crate is `no_std` with `alloc`.

#![no_std]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod field;
pub mod kernel;
mod math;
pub mod ode;
pub mod params;
pub mod partition;
pub mod si;
pub mod spectrum;
pub mod usic;

pub use error::{Error, Result};
pub use field::Field;
pub use kernel::{build_annealed, kernel_distance, Correlation, Kernel};
pub use ode::{IntegratorConfig, Method};
pub use params::EpidemicParams;
pub use partition::Partition;
pub use spectrum::{eigensystem, leading_eigenpair, second_eigenvalue, Eigensystem, Spectrum};
