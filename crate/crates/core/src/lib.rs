//! Stiffness, equilibrium and buckling analysis of planar serial
//! manipulators built from dual-triangle tensegrity segments.
//!
//! * [`segment`]: spring lengths, torque, stiffness and energy of one segment.
//! * [`chain`]: kinematics and elastostatics of an `n`-segment chain.
//! * [`equilibria`]: loaded equilibria by the energy method, their
//!   stability, and force-deflection sweeps.
//! * [`buckling`]: critical force and post-buckling modes from the
//!   linearized eigenproblem.

pub mod buckling;
pub mod chain;
pub mod equilibria;
pub mod error;
pub mod numerics;
pub mod segment;
pub mod shape;

pub use error::{Error, Result};
