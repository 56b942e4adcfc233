//! Finite-dimensional laboratory for Clifford modules, supersymmetric
//! oscillators, Witten localization, Spin(3) torsors, families index integrands
//! and Čech gerbes.

pub mod clifford;
pub mod error;
pub mod exterior;
pub mod fda;
pub mod gerbe;
pub mod linalg;
pub mod op;
pub mod oscillator;
pub mod quaternionic;
pub mod scalar;
pub mod torsor;
pub mod witten;

pub use error::{Result, SpinlabError};
