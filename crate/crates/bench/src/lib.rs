//! Shared fixtures for the benchmarks.

use ddrf_core::spin::hz;
use ddrf_core::{FieldConfig, PhysicalConstants, SequenceParams, SpinTable};

/// Spectroscopy sequence used throughout: 24 pulses, τ = 29.632 µs, 356 Hz drive.
pub fn spectroscopy_sequence() -> SequenceParams {
    SequenceParams::new(24, 29.632e-6, hz(356.0))
}

pub fn table() -> (SpinTable, FieldConfig, PhysicalConstants) {
    let t = SpinTable::builtin();
    let f = t.field().expect("builtin field");
    let c = t.constants();
    (t, f, c)
}
