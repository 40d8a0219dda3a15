//! Single-spin sensing: coherence model, optimal RF detuning, amplitude caps
//! and the minimum detectable number of spins over an `(N, t)` grid.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{effective_rabi, sinc, GateMode};
use crate::error::{invalid, Result};
use crate::spin::{hz, to_hz};
use crate::sweep::{logspace, Axis, SweepResult};

/// First positive root of the second derivative of `sinc`.
pub const SINC_INFLECTION: f64 = 2.081_575_977_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceModel {
    /// Coherence time at N = 4, s.
    pub t_ref: f64,
    pub eta: f64,
    pub n_exp: f64,
}

impl Default for CoherenceModel {
    fn default() -> Self {
        Self { t_ref: 2.99e-3, eta: 0.799, n_exp: 2.0 }
    }
}

impl CoherenceModel {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [("t_ref", self.t_ref), ("eta", self.eta), ("n_exp", self.n_exp)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("coherence {k} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// T(N) = T_ref (N/4)^η.
    pub fn coherence_time(&self, n_pulses: f64) -> f64 {
        self.t_ref * (n_pulses / 4.0).powf(self.eta)
    }
}

/// χ = (t / T(N))^n.
pub fn decoherence_exponent(n_pulses: f64, t: f64, model: &CoherenceModel) -> f64 {
    (t / model.coherence_time(n_pulses)).powf(model.n_exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudePolicy {
    /// Upper bound on Ωτ with Ω angular.
    pub omega_tau_cap: f64,
    /// Upper bound on Ω, rad/s.
    pub omega_abs_cap: f64,
}

impl Default for AmplitudePolicy {
    fn default() -> Self {
        Self { omega_tau_cap: 0.5, omega_abs_cap: hz(10e3) }
    }
}

impl AmplitudePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_tau_cap > 0.0 && self.omega_abs_cap > 0.0) {
            return Err(invalid("amplitude caps must be positive"));
        }
        Ok(())
    }

    pub fn cap(&self, tau: f64) -> f64 {
        (self.omega_tau_cap / tau).min(self.omega_abs_cap)
    }

    pub fn apply(&self, omega_desired: f64, tau: f64) -> f64 {
        omega_desired.min(self.cap(tau))
    }
}

pub fn apply_amplitude_policy(omega_desired: f64, tau: f64, policy: &AmplitudePolicy) -> f64 {
    policy.apply(omega_desired, tau)
}

/// Ω̃/Ω when the drive sits symmetrically about the inflection points of both sincs.
pub fn detuned_branch(delta: f64, tau: f64) -> f64 {
    let h = 0.5 * delta * tau;
    sinc(SINC_INFLECTION - h) - sinc(SINC_INFLECTION + h)
}

/// Ω̃/Ω for a drive resonant with one transition.
pub fn resonant_branch(delta: f64, tau: f64) -> f64 {
    1.0 - sinc(delta * tau)
}

/// RF detuning Δ1 from the ω1 transition that maximises |Ω̃| for hyperfine shift `delta`.
///
/// For short τ the drive is placed between the transitions; for long τ it sits
/// on ω1. The switch happens where the two placements give equal |Ω̃|, which
/// lies just below τ = 2π/|Δ|.
pub fn optimal_detuning(delta: f64, tau: f64) -> f64 {
    let detuned = -SINC_INFLECTION / tau + 0.5 * delta;
    if delta == 0.0 {
        return detuned;
    }
    let short = tau <= TAU / delta.abs();
    if short && detuned_branch(delta, tau).abs() >= resonant_branch(delta, tau).abs() {
        detuned
    } else {
        0.0
    }
}

/// Ω̃ at the optimal detuning, non-negative.
pub fn max_effective_rabi(delta: f64, tau: f64, omega: f64) -> f64 {
    let d1 = optimal_detuning(delta, tau);
    effective_rabi(omega, d1 - delta, d1, tau, GateMode::Conditional).abs()
}

/// Minimum detectable spin number in 1 s, `2π e^χ / (Ω̃ √t)`; infinite for Ω̃ ≤ 0.
pub fn sensitivity(omega_tilde: f64, chi: f64, t: f64) -> f64 {
    if !(omega_tilde > 0.0) || !(t > 0.0) {
        return f64::INFINITY;
    }
    TAU * chi.exp() / (omega_tilde * t.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Resonant,
    Detuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingPoint {
    pub n_pulses: u32,
    pub t: f64,
    pub tau: f64,
    pub delta1: f64,
    pub omega_set: f64,
    pub omega_tilde: f64,
    pub chi: f64,
    pub v_min: f64,
}

pub fn evaluate_sensing_point(
    delta: f64,
    n_pulses: u32,
    t: f64,
    policy: &AmplitudePolicy,
    coherence: &CoherenceModel,
    protocol: Protocol,
    omega_desired: f64,
) -> SensingPoint {
    let tau = t / (2.0 * n_pulses as f64);
    let delta1 = match protocol {
        Protocol::Resonant => 0.0,
        Protocol::Detuned => optimal_detuning(delta, tau),
    };
    let omega_set = policy.apply(omega_desired, tau);
    let omega_tilde = effective_rabi(omega_set, delta1 - delta, delta1, tau, GateMode::Conditional).abs();
    let chi = decoherence_exponent(n_pulses as f64, t, coherence);
    SensingPoint { n_pulses, t, tau, delta1, omega_set, omega_tilde, chi, v_min: sensitivity(omega_tilde, chi, t) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingOptimum {
    pub map: SweepResult,
    pub best: SensingPoint,
}

/// N ∈ {4, 8, …, 4096}.
pub fn default_pulse_grid() -> Vec<u32> {
    (0..11).map(|k| 4u32 << k).collect()
}

/// t log-spaced over 0.1–100 ms, 100 points.
pub fn default_time_grid() -> Vec<f64> {
    logspace(1e-4, 1e-1, 100)
}

/// Evaluate v_min on an `(N, t)` grid and return the map and its minimum.
pub fn optimize_sensitivity(
    delta: f64,
    pulses: &[u32],
    times: &[f64],
    policy: &AmplitudePolicy,
    coherence: &CoherenceModel,
    protocol: Protocol,
    omega_desired: f64,
) -> Result<SensingOptimum> {
    policy.validate()?;
    coherence.validate()?;
    if pulses.contains(&0) || times.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("sensing grid needs N >= 1 and t > 0"));
    }
    let x = Axis::new("n_pulses", "", pulses.iter().map(|&n| n as f64).collect());
    let y = Axis::new("t", "s", times.to_vec());
    let mut map = SweepResult::new(x, y)?;
    let nt = times.len();
    let points: Vec<SensingPoint> = (0..pulses.len() * nt)
        .into_par_iter()
        .map(|k| {
            evaluate_sensing_point(delta, pulses[k / nt], times[k % nt], policy, coherence, protocol, omega_desired)
        })
        .collect();
    let best = *points.iter().reduce(|a, b| if b.v_min < a.v_min { b } else { a }).expect("grid is non-empty");
    let layer = |f: fn(&SensingPoint) -> f64| points.iter().map(f).collect::<Vec<f64>>();
    map.push_layer("v_min", "spins/sqrt(Hz)", layer(|p| p.v_min))?;
    map.push_layer("omega_tilde", "Hz", layer(|p| to_hz(p.omega_tilde)))?;
    map.push_layer("omega", "Hz", layer(|p| to_hz(p.omega_set)))?;
    map.push_layer("coherence", "", layer(|p| (-p.chi).exp()))?;
    map.push_layer("delta1", "Hz", layer(|p| to_hz(p.delta1)))?;
    map.set_meta("delta_hz", to_hz(delta));
    map.set_meta("protocol", format!("{protocol:?}").to_lowercase());
    map.set_meta("omega_tau_cap", policy.omega_tau_cap);
    map.set_meta("omega_abs_cap_hz", to_hz(policy.omega_abs_cap));
    map.set_meta("omega_desired_hz", to_hz(omega_desired));
    map.set_meta("t_ref_s", coherence.t_ref);
    map.set_meta("eta", coherence.eta);
    map.set_meta("n_exp", coherence.n_exp);
    Ok(SensingOptimum { map, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sinc_second_derivative(x: f64) -> f64 {
        let (s, c) = x.sin_cos();
        -s / x - 2.0 * c / (x * x) + 2.0 * s / (x * x * x)
    }

    #[test]
    fn inflection_constant_is_a_root() {
        let mut x = 2.0;
        for _ in 0..50 {
            let h = 1e-6;
            let d = (sinc_second_derivative(x + h) - sinc_second_derivative(x - h)) / (2.0 * h);
            x -= sinc_second_derivative(x) / d;
        }
        assert_relative_eq!(x, SINC_INFLECTION, epsilon = 1e-9);
    }

    #[test]
    fn coherence_examples() {
        let m = CoherenceModel::default();
        assert_relative_eq!(decoherence_exponent(4.0, 2.99e-3, &m), 1.0, max_relative = 1e-14);
        assert_eq!(decoherence_exponent(4.0, 0.0, &m), 0.0);
        let chi = decoherence_exponent(16.0, 2.99e-3, &m);
        assert_relative_eq!(chi, 4f64.powf(-0.799).powi(2), max_relative = 1e-12);
        assert!((chi - 0.109).abs() < 1e-3);
    }

    #[test]
    fn detuning_examples() {
        let delta = hz(50e3);
        assert_eq!(optimal_detuning(delta, 10.0 * TAU / delta), 0.0);
        let d1 = optimal_detuning(delta, 1e-6);
        assert_relative_eq!(d1, -SINC_INFLECTION * 1e6 + 0.5 * delta, max_relative = 1e-12);
        assert_relative_eq!(
            max_effective_rabi(delta, 1e-6, 1.0),
            max_effective_rabi(-delta, 1e-6, 1.0),
            max_relative = 1e-12
        );
        assert_relative_eq!(optimal_detuning(0.0, 2e-6), -SINC_INFLECTION / 2e-6);
    }

    #[test]
    fn branches_meet_at_junction() {
        let delta = hz(2e3);
        let tau = TAU / delta;
        let (a, b) = (detuned_branch(delta, tau), resonant_branch(delta, tau));
        assert!((a - b).abs() / b < 0.05, "{a} {b}");
    }

    #[test]
    fn policy_examples() {
        let p = AmplitudePolicy::default();
        assert_eq!(p.apply(1.0, 1e-6), 1.0);
        assert_relative_eq!(p.apply(1e9, 1e-6), hz(10e3));
        assert_relative_eq!(p.apply(1e9, 1.0), 0.5);
        assert!(p.apply(1e9, 1e12) < 1e-11);
    }

    #[test]
    fn sensitivity_examples() {
        assert_relative_eq!(sensitivity(TAU, 0.0, 1.0), 1.0);
        assert_relative_eq!(sensitivity(3.0, 1.5, 0.2) / sensitivity(3.0, 0.5, 0.2), std::f64::consts::E);
        assert_relative_eq!(sensitivity(3.0, 0.5, 0.2) / sensitivity(3.0, 0.5, 0.4), 2f64.sqrt());
        assert!(sensitivity(0.0, 0.0, 1.0).is_infinite());
    }

    #[test]
    fn one_cell_grid() {
        let o = optimize_sensitivity(
            hz(500.0),
            &[16],
            &[2e-3],
            &AmplitudePolicy::default(),
            &CoherenceModel::default(),
            Protocol::Detuned,
            hz(10e3),
        )
        .unwrap();
        assert_eq!(o.map.shape(), (1, 1));
        assert_eq!(o.map.value("v_min", 0, 0).unwrap(), o.best.v_min);
        assert_eq!(default_pulse_grid().last(), Some(&4096));
        assert_eq!(default_time_grid().len(), 100);
    }

    proptest::proptest! {
        #[test]
        fn detuning_never_hurts(delta_hz in 1.0f64..1e5, tau in 1e-7f64..1e-2) {
            let delta = hz(delta_hz);
            let d1 = optimal_detuning(delta, tau);
            let best = effective_rabi(1.0, d1 - delta, d1, tau, GateMode::Conditional).abs();
            let resonant = effective_rabi(1.0, -delta, 0.0, tau, GateMode::Conditional).abs();
            proptest::prop_assert!(best >= resonant * (1.0 - 1e-12));
        }

        #[test]
        fn v_min_monotone(w in 1e-3f64..1e5, chi in 0.0f64..10.0, t in 1e-5f64..1.0, k in 1.0001f64..3.0) {
            proptest::prop_assert!(sensitivity(w * k, chi, t) < sensitivity(w, chi, t));
            proptest::prop_assert!(sensitivity(w, chi + k - 1.0, t) > sensitivity(w, chi, t));
        }

        #[test]
        fn detuned_beats_resonant_per_cell(delta_hz in 10.0f64..1e4, n_exp in 0u32..10, t in 1e-4f64..1e-1) {
            let n = 4u32 << n_exp;
            let (p, c) = (AmplitudePolicy::default(), CoherenceModel::default());
            let det = evaluate_sensing_point(hz(delta_hz), n, t, &p, &c, Protocol::Detuned, p.omega_abs_cap);
            let res = evaluate_sensing_point(hz(delta_hz), n, t, &p, &c, Protocol::Resonant, p.omega_abs_cap);
            proptest::prop_assert!(det.v_min <= res.v_min * (1.0 + 1e-12));
        }
    }
}
