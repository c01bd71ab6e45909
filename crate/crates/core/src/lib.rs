//! Coupled deformation–diffusion–damage simulation of hydrogen embrittlement in
//! round-bar tensile specimens.
//!
//! The model combines:
//!
//! * a Gurson–Tvergaard–Needleman porous-plasticity law whose matrix flow stress
//!   softens with dissolved hydrogen and whose void nucleation has a
//!   hydrogen-assisted contribution ([`gurson`]),
//! * Oriani-equilibrium hydrogen partitioning between lattice and dislocation
//!   trap sites, with stress-driven lattice diffusion ([`hydrogen`], [`transport`]),
//! * an axisymmetric updated-Lagrangian finite-element discretization of a
//!   quarter round-bar with a geometric imperfection ([`mesh`], [`fem`]),
//! * a staggered driver that advances mechanics and hydrogen transport per
//!   increment and detects specimen failure ([`driver`]).
//!
//! Everything internal is SI base units (Pa, m, s, mol, K). Config files may use
//! convenience units (MPa, mm, ...) which are converted at parse time.

pub mod band;
pub mod config;
pub mod driver;
pub mod error;
pub mod fem;
pub mod gurson;
pub mod hydrogen;
pub mod mesh;
pub mod output;
pub mod presets;
pub mod tensor;
pub mod transport;

pub use error::{Error, Result};
