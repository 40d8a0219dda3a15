//! Dynamically decoupled radio-frequency control of nuclear spins coupled to an
//! electron spin: sequence propagators, spectroscopy, sensing and register gates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod error;
pub mod fidelity;
pub mod register;
pub mod sensing;
pub mod spectroscopy;
pub mod spin;
pub mod su2;
pub mod sweep;

pub use config::SpinTable;
pub use engine::{ConditionalGate, GateMode, RotationDecomposition, SequenceParams};
pub use error::{DdrfError, Result};
pub use spin::{FieldConfig, NuclearSpinSpec, PhysicalConstants};
pub use su2::{Unitary2, C64};
pub use sweep::{Axis, Layer, SweepResult};
