//! Core numerics for a population model driven by a dynamically updated
//! spatial memory map.
//!
//! The nonlocal system
//!
//! ```text
//! u_t = d u_xx + α (u (G*k)_x)_x + f(u)
//! k_t = g1(u) − g2(u) k,         G(x) = e^{−|x|/R} / (2R)
//! ```
//!
//! is handled through its local parabolic–ordinary–elliptic form on `(0, π)`
//! with `v = G*k` solving `v_xx − (v − k)/R² = 0` under Neumann conditions.
//!
//! Everything here is `no_std` with `alloc`; IO, sweeps and the CLI live in
//! the `memopat` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bifurcation;
pub mod elliptic;
mod error;
pub mod model;
pub mod observe;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};

pub use bifurcation::{
    BifurcationCoefficients, BranchStability, Direction, EigenCoefficients, Theta,
};
pub use elliptic::{Grid, ScreenedSolver};
pub use model::{
    EncodingFamily, Excitation, GrowthModel, LinearizationData, ModelSpec, SmoothStep,
};
pub use observe::PhaseSign;
pub use solver::{FieldState, RunResult, SolverConfig, Stepper};
pub use stability::{CriticalPair, Dispersion, Regime, RegionPoint, StabilityReport};
