//! Perspective-neutral quantum reference frames on a finite periodic lattice.
//!
//! Particles live on `Z_L`. The translation constraint is imposed by the
//! group-averaging projector, states are reduced to the perspective of a
//! chosen reference particle, and perspectives are related by switch maps.
//! On top of that sits a von Neumann measurement model whose Kraus families,
//! outcome probabilities and post-measurement states can be computed from
//! any perspective and compared against a dense brute-force oracle.

pub mod cli;
pub mod constraint;
pub mod entanglement;
pub mod error;
pub mod lattice;
pub mod measurement;
pub mod oracle;
pub mod recipes;
pub mod reduction;
pub mod switching;
pub mod tolerance;

pub use error::{Error, Result};
pub use lattice::{
    Basis, Factor, FactorKind, LatticeSpec, Layout, LinearOperator, MomentumConvention,
    OperatorClass, OperatorKind, ParticleSpec, StateKind, StateVector, C64,
};
