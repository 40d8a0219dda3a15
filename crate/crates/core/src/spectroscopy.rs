//! Electron-spin signals after a DDRF sequence for single spins, a
//! statistical weakly coupled bath, and sweeps over `(ω_RF, δφ)`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    block_unitary, decompose_rotation, effective_rabi, electron_response, resonant_phase_increment, GateMode,
    SequenceParams,
};
use crate::error::{invalid, DdrfError, Result};
use crate::spin::{detunings, hz, to_hz, transition_frequencies, FieldConfig, NuclearSpinSpec, PhysicalConstants};
use crate::sweep::{Axis, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathModel {
    /// Largest |Δ| covered by the bath, rad/s.
    pub delta_limit: f64,
    pub n_bins: usize,
    /// Floor applied to each bin's ⟨σx⟩ before exponentiation.
    pub clamp_floor: f64,
}

impl Default for BathModel {
    fn default() -> Self {
        Self { delta_limit: hz(6e3), n_bins: 300, clamp_floor: 1e-6 }
    }
}

impl BathModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_limit.is_finite() && self.delta_limit > 0.0) {
            return Err(invalid("bath delta_limit must be positive"));
        }
        if self.n_bins < 2 || !self.n_bins.is_multiple_of(2) {
            return Err(invalid(format!("bath n_bins must be even and >= 2, got {}", self.n_bins)));
        }
        if !(self.clamp_floor > 0.0 && self.clamp_floor < 1.0) {
            return Err(invalid("bath clamp_floor must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Bin centres and common width. Centres sit at half-bin offsets so Δ = 0 is skipped.
    pub fn bins(&self) -> (Vec<f64>, f64) {
        let w = 2.0 * self.delta_limit / self.n_bins as f64;
        let centres = (0..self.n_bins).map(|k| -self.delta_limit + (k as f64 + 0.5) * w).collect();
        (centres, w)
    }
}

/// ⟨σx⟩ ∈ [−1, 1] of the electron after the sequence, for one spin.
pub fn spin_sigma_x(
    spin: &NuclearSpinSpec,
    seq: &SequenceParams,
    field: &FieldConfig,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let tf = transition_frequencies(spin, field, constants)?;
    let (d0, d1) = detunings(tf.omega0, tf.omega1, seq.omega_rf);
    sigma_x_for_detunings(seq, d0, d1)
}

pub(crate) fn sigma_x_for_detunings(seq: &SequenceParams, d0: f64, d1: f64) -> Result<f64> {
    let rot = decompose_rotation(&block_unitary(seq, d0, d1)?)?;
    let total = seq.n_pulses as f64 * rot.theta / 2.0;
    Ok(2.0 * electron_response(rot.dot, total) - 1.0)
}

pub fn single_spin_signal(
    spin: &NuclearSpinSpec,
    seq: &SequenceParams,
    field: &FieldConfig,
    constants: &PhysicalConstants,
) -> Result<f64> {
    Ok(p0(spin_sigma_x(spin, seq, field, constants)?))
}

#[inline]
fn p0(sigma_x: f64) -> f64 {
    (0.5 * (sigma_x + 1.0)).clamp(0.0, 1.0)
}

/// Density of parallel hyperfine shifts per unit angular frequency.
pub fn bath_density(delta: f64, constants: &PhysicalConstants) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(DdrfError::Domain(format!("bath density undefined at delta = {delta}")));
    }
    Ok(PI * PI * constants.dipolar_alpha() * constants.rho_13c / (delta * delta))
}

/// Binned product ⟨σx⟩_bath = Π ⟨σx(Δ)⟩^{ρ(Δ) dΔ}.
pub fn bath_sigma_x(
    seq: &SequenceParams,
    field: &FieldConfig,
    constants: &PhysicalConstants,
    bath: &BathModel,
) -> Result<f64> {
    bath.validate()?;
    seq.validate()?;
    if constants.rho_13c == 0.0 || seq.omega == 0.0 {
        return Ok(1.0);
    }
    let (centres, width) = bath.bins();
    let mut log_sum = 0.0;
    for delta in centres {
        let spin = NuclearSpinSpec::new("bath", delta);
        let sx = spin_sigma_x(&spin, seq, field, constants)?.clamp(bath.clamp_floor, 1.0);
        log_sum += bath_density(delta, constants)? * width * sx.ln();
    }
    Ok(log_sum.exp())
}

pub fn bath_signal(
    seq: &SequenceParams,
    field: &FieldConfig,
    constants: &PhysicalConstants,
    bath: &BathModel,
) -> Result<f64> {
    Ok(p0(bath_sigma_x(seq, field, constants, bath)?))
}

/// Product of individual-spin and bath ⟨σx⟩, reported as P0.
pub fn composite_signal(
    spins: &[NuclearSpinSpec],
    seq: &SequenceParams,
    field: &FieldConfig,
    constants: &PhysicalConstants,
    bath: Option<&BathModel>,
) -> Result<f64> {
    let mut sx = match bath {
        Some(b) => bath_sigma_x(seq, field, constants, b)?,
        None => 1.0,
    };
    for s in spins {
        sx *= spin_sigma_x(s, seq, field, constants)?;
    }
    Ok(p0(sx))
}

/// P0 over a grid of RF offsets from the bare Larmor frequency (rad/s) and
/// phase increments (rad). `template` supplies N, τ, Ω and the dead time.
pub fn spectroscopy_sweep(
    spins: &[NuclearSpinSpec],
    field: &FieldConfig,
    constants: &PhysicalConstants,
    bath: Option<&BathModel>,
    rf_offsets: &[f64],
    phases: &[f64],
    template: &SequenceParams,
) -> Result<SweepResult> {
    template.validate()?;
    let x = Axis::new("rf_offset", "Hz", rf_offsets.iter().map(|&w| to_hz(w)).collect());
    let y = Axis::new("delta_phi", "rad", phases.to_vec());
    let mut out = SweepResult::new(x, y)?;
    let larmor = field.larmor(constants);
    let ny = phases.len();
    let values = (0..rf_offsets.len() * ny)
        .into_par_iter()
        .map(|k| {
            let seq = SequenceParams { omega_rf: larmor + rf_offsets[k / ny], delta_phi: phases[k % ny], ..*template };
            composite_signal(spins, &seq, field, constants, bath)
        })
        .collect::<Result<Vec<f64>>>()?;
    out.push_layer("p0", "", values)?;
    out.set_meta("n_pulses", template.n_pulses);
    out.set_meta("tau_s", template.tau);
    out.set_meta("rabi_hz", to_hz(template.omega));
    out.set_meta("dead_time_s", template.dead_time);
    out.set_meta("b_z_tesla", field.b_z);
    out.set_meta("n_spins", spins.len());
    match bath {
        Some(b) => {
            out.set_meta("bath_delta_limit_hz", to_hz(b.delta_limit));
            out.set_meta("bath_n_bins", b.n_bins);
            out.set_meta("bath_clamp_floor", b.clamp_floor);
        }
        None => out.set_meta("bath", "off"),
    }
    Ok(out)
}

/// Folded phase-increment frequency `ω_RF + δφ/(2τ) − π/(2τ)` relative to
/// the Larmor frequency, reduced into `[−π/(2τ), π/(2τ))`.
///
/// `rf_offset` is `ω_RF − ω_L`; all quantities angular.
pub fn folded_phase_frequency(rf_offset: f64, delta_phi: f64, tau: f64) -> f64 {
    let period = PI / tau;
    let raw = rf_offset + delta_phi / (2.0 * tau) - 0.5 * period;
    (raw + 0.5 * period).rem_euclid(period) - 0.5 * period
}

/// Phase increment in `(−π, π]` placing `(rf_offset, δφ)` at the folded coordinate `y`.
pub fn phase_for_folded_frequency(rf_offset: f64, y: f64, tau: f64) -> f64 {
    crate::engine::wrap_phase(2.0 * tau * (y - rf_offset) + PI)
}

/// Resample an `(rf_offset, δφ)` map onto `(rf_offset, folded ω_φ)` axes.
///
/// The δφ axis must cover a full period; values are linearly interpolated
/// along δφ with periodic wrap-around.
pub fn phase_frequency_transform(sweep: &SweepResult, tau: f64) -> Result<SweepResult> {
    if sweep.x.unit != "Hz" || sweep.y.unit != "rad" {
        return Err(DdrfError::AxisMismatch(format!(
            "expected (Hz, rad) axes, got ({}, {})",
            sweep.x.unit, sweep.y.unit
        )));
    }
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    let phases = &sweep.y.values;
    let ny = phases.len();
    if ny < 2 || phases[1] < phases[0] {
        return Err(DdrfError::AxisMismatch("delta_phi axis must be increasing".into()));
    }
    let max_step = phases.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let closing_gap = phases[0] + TAU - phases[ny - 1];
    if closing_gap > max_step * (1.0 + 1e-9) + 1e-12 || closing_gap < -1e-12 {
        return Err(DdrfError::AxisMismatch("delta_phi axis must span one full period".into()));
    }

    let period_hz = 1.0 / (2.0 * tau);
    let rows: Vec<f64> = (0..ny).map(|k| -0.5 * period_hz + period_hz * k as f64 / ny as f64).collect();
    let x = sweep.x.clone();
    let y = Axis::new("phase_frequency_offset", "Hz", rows.clone());
    let mut out = SweepResult::new(x, y)?;
    out.metadata = sweep.metadata.clone();
    out.set_meta("fold_period_hz", period_hz);
    out.set_meta("fold_tau_s", tau);

    for layer in &sweep.layers {
        let mut values = Vec::with_capacity(sweep.x.len() * ny);
        for (ix, &xf) in sweep.x.values.iter().enumerate() {
            let column = &layer.values[ix * ny..(ix + 1) * ny];
            for &yf in &rows {
                let dp = phase_for_folded_frequency(hz(xf), hz(yf), tau);
                values.push(periodic_interp(phases, column, dp));
            }
        }
        out.push_layer(layer.name.clone(), layer.unit.clone(), values)?;
    }
    Ok(out)
}

fn periodic_interp(nodes: &[f64], vals: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    let start = nodes[0];
    let t = start + (x - start).rem_euclid(TAU);
    let k = nodes.partition_point(|&p| p <= t);
    let (x0, y0, x1, y1) = if k == 0 {
        (nodes[n - 1] - TAU, vals[n - 1], nodes[0], vals[0])
    } else if k == n {
        (nodes[n - 1], vals[n - 1], nodes[0] + TAU, vals[0])
    } else {
        (nodes[k - 1], vals[k - 1], nodes[k], vals[k])
    };
    if x1 - x0 <= 0.0 {
        return y0;
    }
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

/// Signal while tracking one spin's resonance at fixed total driving time.
///
/// For each N, τ = `drive_time / (2N)` and δφ follows the spin at every
/// `ω_RF = ω1 + offset`. Layers: simulated `p0`, the first-order prediction
/// `p0_analytic = ½cos(2Ω̃Nτ) + ½`, and `omega_tilde`.
#[allow(clippy::too_many_arguments)]
pub fn driving_time_scan(
    spin: &NuclearSpinSpec,
    field: &FieldConfig,
    constants: &PhysicalConstants,
    pulses: &[u32],
    drive_time: f64,
    omega: f64,
    rf_offsets: &[f64],
    ac_stark_correction: bool,
) -> Result<SweepResult> {
    if !(drive_time > 0.0) || pulses.iter().any(|&n| n < 2 || n % 2 != 0) {
        return Err(invalid("driving time must be positive and pulse numbers even"));
    }
    let tf = transition_frequencies(spin, field, constants)?;
    let x = Axis::new("rf_offset_omega1", "Hz", rf_offsets.iter().map(|&w| to_hz(w)).collect());
    let y = Axis::new("n_pulses", "", pulses.iter().map(|&n| n as f64).collect());
    let mut out = SweepResult::new(x, y)?;
    let ny = pulses.len();
    let cells = (0..rf_offsets.len() * ny)
        .into_par_iter()
        .map(|k| {
            let n = pulses[k % ny];
            let tau = drive_time / (2.0 * n as f64);
            let rf = tf.omega1 + rf_offsets[k / ny];
            let (d0, d1) = detunings(tf.omega0, tf.omega1, rf);
            let mut seq = SequenceParams::new(n, tau, omega);
            seq.omega_rf = rf;
            seq.ac_stark_correction = ac_stark_correction;
            seq.delta_phi =
                resonant_phase_increment(d0, d1, tau, GateMode::Conditional, omega, ac_stark_correction).delta_phi;
            let p0 = p0(sigma_x_for_detunings(&seq, d0, d1)?);
            let rabi = effective_rabi(omega, d0, d1, tau, GateMode::Conditional);
            Ok([p0, 0.5 * (2.0 * rabi * n as f64 * tau).cos() + 0.5, to_hz(rabi)])
        })
        .collect::<Result<Vec<[f64; 3]>>>()?;
    out.push_layer("p0", "", cells.iter().map(|c| c[0]).collect())?;
    out.push_layer("p0_analytic", "", cells.iter().map(|c| c[1]).collect())?;
    out.push_layer("omega_tilde", "Hz", cells.iter().map(|c| c[2]).collect())?;
    out.set_meta("spin", &spin.label);
    out.set_meta("spin_delta_hz", to_hz(spin.delta));
    out.set_meta("drive_time_s", drive_time);
    out.set_meta("rabi_hz", to_hz(omega));
    out.set_meta("ac_stark_correction", ac_stark_correction);
    out.set_meta("b_z_tesla", field.b_z);
    Ok(out)
}
