//! Physical constants, nuclear-spin parameters and transition-frequency arithmetic.
//!
//! Frequencies inside the crate are angular (rad/s). Conversions to and from
//! ordinary frequency happen only at I/O boundaries via [`hz`] and [`to_hz`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Ordinary frequency (Hz) to angular frequency (rad/s).
#[inline]
pub fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

/// Angular frequency (rad/s) to ordinary frequency (Hz).
#[inline]
pub fn to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Electron gyromagnetic ratio, rad s⁻¹ T⁻¹.
    pub gamma_e: f64,
    /// ¹³C gyromagnetic ratio, rad s⁻¹ T⁻¹.
    pub gamma_c: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// μ0/4π, T m A⁻¹.
    pub mu0_over_4pi: f64,
    /// ¹³C number density, nm⁻³. Zero disables the statistical bath.
    pub rho_13c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            gamma_e: hz(28.024_951_4e9),
            gamma_c: hz(10.7084e6),
            hbar: 1.054_571_817e-34,
            mu0_over_4pi: 1e-7,
            rho_13c: 1.950,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("gamma_e", self.gamma_e),
            ("gamma_c", self.gamma_c),
            ("hbar", self.hbar),
            ("mu0_over_4pi", self.mu0_over_4pi),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rho_13c.is_finite() && self.rho_13c >= 0.0) {
            return Err(invalid(format!("rho_13c must be non-negative, got {}", self.rho_13c)));
        }
        Ok(())
    }

    /// Dipolar prefactor α = ħ μ0 γe γc / 4π in rad s⁻¹ nm³.
    pub fn dipolar_alpha(&self) -> f64 {
        // m³ -> nm³
        self.hbar * self.mu0_over_4pi * self.gamma_e * self.gamma_c * 1e27
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearSpinSpec {
    pub label: String,
    /// Hyperfine shift Δ = ω0 − ω1, rad/s.
    pub delta: f64,
    /// Perpendicular hyperfine component A⊥, rad/s.
    pub a_perp: f64,
}

impl NuclearSpinSpec {
    pub fn new(label: impl Into<String>, delta: f64) -> Self {
        Self { label: label.into(), delta, a_perp: 0.0 }
    }

    pub fn from_hz(label: impl Into<String>, delta_hz: f64, a_perp_hz: f64) -> Self {
        Self { label: label.into(), delta: hz(delta_hz), a_perp: hz(a_perp_hz) }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(invalid(format!("spin {}: delta must be finite", self.label)));
        }
        if !(self.a_perp.is_finite() && self.a_perp >= 0.0) {
            return Err(invalid(format!("spin {}: a_perp must be >= 0", self.label)));
        }
        Ok(())
    }

    /// Parallel hyperfine A∥ reproducing this spin's Δ at bare Larmor frequency `omega0`.
    ///
    /// Inverts ω1 = √(A⊥² + (ω0 − A∥)²) on the branch continuous with A∥ = Δ at A⊥ = 0.
    pub fn a_parallel(&self, omega0: f64) -> Result<f64> {
        let omega1 = omega0 - self.delta;
        let rad = omega1 * omega1 - self.a_perp * self.a_perp;
        if rad < 0.0 {
            return Err(invalid(format!("spin {}: |ω1| < A⊥, no parallel hyperfine reproduces Δ", self.label)));
        }
        Ok(omega0 - rad.sqrt().copysign(omega1))
    }
}

/// Nuclear ω1 from the hyperfine components: ω1 = √(A⊥² + (ω0 − A∥)²).
pub fn omega1_from_hyperfine(omega0: f64, a_par: f64, a_perp: f64) -> f64 {
    a_perp.hypot(omega0 - a_par)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Static field along the quantisation axis, T.
    pub b_z: f64,
}

impl FieldConfig {
    pub fn new(b_z: f64) -> Result<Self> {
        let f = Self { b_z };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_z.is_finite() && self.b_z > 0.0) {
            return Err(invalid(format!("b_z must be positive, got {}", self.b_z)));
        }
        Ok(())
    }

    /// Bare ¹³C Larmor frequency ω_L = γc B_z.
    pub fn larmor(&self, constants: &PhysicalConstants) -> f64 {
        constants.gamma_c * self.b_z
    }
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { b_z: 0.1891 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionFrequencies {
    pub omega0: f64,
    pub omega1: f64,
    pub mean: f64,
    pub delta_eff: f64,
}

pub fn transition_frequencies(
    spin: &NuclearSpinSpec,
    field: &FieldConfig,
    constants: &PhysicalConstants,
) -> Result<TransitionFrequencies> {
    field.validate()?;
    constants.validate()?;
    spin.validate()?;
    let omega0 = field.larmor(constants);
    let (omega1, delta_eff) = if spin.a_perp == 0.0 {
        // keep Δ exact rather than re-deriving it from two large frequencies
        (omega0 - spin.delta, spin.delta)
    } else {
        let a_par = spin.a_parallel(omega0)?;
        let omega1 = omega1_from_hyperfine(omega0, a_par, spin.a_perp).copysign(omega0 - spin.delta);
        (omega1, omega0 - omega1)
    };
    Ok(TransitionFrequencies { omega0, omega1, mean: 0.5 * (omega0 + omega1), delta_eff })
}

/// RF detunings (Δ0, Δ1) = (ω_RF − ω0, ω_RF − ω1).
#[inline]
pub fn detunings(omega0: f64, omega1: f64, omega_rf: f64) -> (f64, f64) {
    (omega_rf - omega0, omega_rf - omega1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_spin_without_a_perp() {
        let c = PhysicalConstants::default();
        let field = FieldConfig::new(0.1891).unwrap();
        let spin = NuclearSpinSpec::from_hz("C0", -30693.0, 0.0);
        let tf = transition_frequencies(&spin, &field, &c).unwrap();
        assert_relative_eq!(tf.omega0, c.gamma_c * 0.1891, max_relative = 1e-15);
        assert_relative_eq!(tf.delta_eff, hz(-30693.0), max_relative = 1e-12);
        assert_relative_eq!(tf.mean, 0.5 * (tf.omega0 + tf.omega1));
    }

    #[test]
    fn zero_shift_collapses_frequencies() {
        let c = PhysicalConstants::default();
        let tf = transition_frequencies(&NuclearSpinSpec::new("z", 0.0), &FieldConfig::default(), &c).unwrap();
        assert_eq!(tf.omega0, tf.omega1);
        assert_eq!(tf.omega0, tf.mean);
    }

    #[test]
    fn perpendicular_hyperfine_shift() {
        let omega0 = hz(2.025e6);
        let a_perp = hz(30e3);
        let omega1 = omega1_from_hyperfine(omega0, 0.0, a_perp);
        // direct evaluation of the root
        let expected = (omega0 * omega0 + a_perp * a_perp).sqrt();
        assert_relative_eq!(omega1, expected, max_relative = 1e-15);
        let shift_hz = to_hz(omega0 - omega1);
        assert!((shift_hz + 222.2).abs() < 0.1, "{shift_hz}");
    }

    #[test]
    fn a_parallel_round_trips_through_root_formula() {
        let omega0 = hz(2.025e6);
        let spin = NuclearSpinSpec::from_hz("x", -12e3, 25e3);
        let a_par = spin.a_parallel(omega0).unwrap();
        let omega1 = omega1_from_hyperfine(omega0, a_par, spin.a_perp);
        assert_relative_eq!(omega0 - omega1, spin.delta, max_relative = 1e-9);
        let plain = NuclearSpinSpec::from_hz("y", 5e3, 0.0);
        assert_relative_eq!(plain.a_parallel(omega0).unwrap(), plain.delta, max_relative = 1e-12);
    }

    #[test]
    fn non_positive_field_is_rejected() {
        assert!(FieldConfig::new(0.0).is_err());
        assert!(FieldConfig::new(-1.0).is_err());
        let c = PhysicalConstants::default();
        let bad = FieldConfig { b_z: 0.0 };
        assert!(transition_frequencies(&NuclearSpinSpec::new("a", 1.0), &bad, &c).is_err());
    }

    #[test]
    fn detuning_examples() {
        let (w0, w1) = (hz(2.0e6) + 1000.0, hz(2.0e6));
        let (d0, d1) = detunings(w0, w1, w1);
        assert_eq!(d1, 0.0);
        assert_eq!(d0, -(w0 - w1));
        let mean = 0.5 * (w0 + w1);
        let (d0, d1) = detunings(w0, w1, mean);
        assert_relative_eq!(d0, -d1, max_relative = 1e-12);
        assert_relative_eq!(d0, -(w0 - w1) / 2.0, max_relative = 1e-9);
        let (_, d1) = detunings(w0, w1, w1 + hz(5e3));
        assert_relative_eq!(d1, hz(5e3), max_relative = 1e-9);
    }

    #[test]
    fn alpha_matches_tabulated_magnitude() {
        let alpha_hz = to_hz(PhysicalConstants::default().dipolar_alpha());
        // ħ μ0 γe γc / 4π ≈ 2π × 19.9 kHz nm³
        assert!((alpha_hz / 1e3 - 19.9).abs() < 0.1, "{alpha_hz}");
    }

    proptest::proptest! {
        #[test]
        fn detunings_shift_linearly(w0 in -1e8f64..1e8, w1 in -1e8f64..1e8, rf in -1e8f64..1e8, x in -1e6f64..1e6) {
            let (a0, a1) = detunings(w0, w1, rf);
            let (b0, b1) = detunings(w0, w1, rf + x);
            proptest::prop_assert!(((b0 - a0) - x).abs() <= 1e-7 * (1.0 + rf.abs()));
            proptest::prop_assert!(((b1 - a1) - x).abs() <= 1e-7 * (1.0 + rf.abs()));
            proptest::prop_assert!(((a0 - a1) + (w0 - w1)).abs() <= 1e-7 * (1.0 + w0.abs() + w1.abs()));
        }

        #[test]
        fn delta_round_trips(delta_hz in -1e5f64..1e5) {
            let c = PhysicalConstants::default();
            let spin = NuclearSpinSpec::from_hz("p", delta_hz, 0.0);
            let tf = transition_frequencies(&spin, &FieldConfig::default(), &c).unwrap();
            proptest::prop_assert!((tf.delta_eff - spin.delta).abs() <= 1e-12 * spin.delta.abs());
        }

        #[test]
        fn root_dominates_parallel_offset(w0 in 1e5f64..1e8, a_par in -1e6f64..1e6, a_perp in 0f64..1e6) {
            proptest::prop_assert!(omega1_from_hyperfine(w0, a_par, a_perp) >= (w0 - a_par).abs());
        }
    }
}
