//! DDRF gate construction for a single nuclear spin.
//!
//! One unit cell is `τ – π – 2τ – π – τ` on the electron, with the RF phase
//! advanced by `δφ` at every electron π-pulse. For the electron starting in
//! state `s` the nuclear propagator is
//! `V0 = T0 Rz(δφ) T1² Rz(δφ) T0` and `V1 = T1 Rz(δφ) T0² Rz(δφ) T1`,
//! where `Ti` is the driven evolution at detuning `Δi`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DdrfError, Result};
use crate::fidelity::fidelity_from_trace;
use crate::su2::{Unitary2, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    Conditional,
    Unconditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    pub n_pulses: u32,
    /// Half inter-pulse delay τ, s.
    pub tau: f64,
    /// Bare Rabi frequency Ω, rad/s.
    pub omega: f64,
    /// RF carrier, rad/s.
    pub omega_rf: f64,
    /// Phase increment per electron π-pulse, rad.
    pub delta_phi: f64,
    pub mode: GateMode,
    /// Drive-off time at each pulse edge, s.
    pub dead_time: f64,
    pub ac_stark_correction: bool,
}

impl SequenceParams {
    pub fn new(n_pulses: u32, tau: f64, omega: f64) -> Self {
        Self {
            n_pulses,
            tau,
            omega,
            omega_rf: 0.0,
            delta_phi: 0.0,
            mode: GateMode::Conditional,
            dead_time: 0.0,
            ac_stark_correction: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses < 2 || !self.n_pulses.is_multiple_of(2) {
            return Err(invalid(format!("N must be even and >= 2, got {}", self.n_pulses)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(invalid(format!("omega must be >= 0, got {}", self.omega)));
        }
        if !(self.dead_time.is_finite() && self.dead_time >= 0.0 && self.dead_time < self.tau) {
            return Err(invalid(format!("dead time must lie in [0, tau), got {}", self.dead_time)));
        }
        if !self.delta_phi.is_finite() || !self.omega_rf.is_finite() {
            return Err(invalid("delta_phi and omega_rf must be finite"));
        }
        Ok(())
    }

    /// Total sequence duration 2Nτ.
    pub fn duration(&self) -> f64 {
        2.0 * self.n_pulses as f64 * self.tau
    }
}

/// Nuclear propagators conditioned on the initial electron state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalGate {
    pub v0: Unitary2,
    pub v1: Unitary2,
}

impl ConditionalGate {
    pub fn new(v0: Unitary2, v1: Unitary2) -> Self {
        Self { v0, v1 }
    }

    pub fn pow(&self, k: u32) -> Self {
        Self { v0: self.v0.pow(k), v1: self.v1.pow(k) }
    }

    pub fn unitarity_error(&self) -> f64 {
        self.v0.unitarity_error().max(self.v1.unitarity_error())
    }

    /// Electron-first 4×4 matrix `−|0⟩⟨0|⊗V0 − |1⟩⟨1|⊗V1`.
    pub fn two_qubit(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(4, 4);
        for (s, v) in [self.v0, self.v1].iter().enumerate() {
            for r in 0..2 {
                for c in 0..2 {
                    m[(2 * s + r, 2 * s + c)] = -v.entry(r, c);
                }
            }
        }
        m
    }
}

/// Rotation angle and axes shared by `V0` and `V1`.
///
/// `theta` lies in `[0, 2π)`. The axis sign is fixed so that the first
/// nonzero component of `n0` is positive; `n1` follows from the same global
/// phase. Axes are `None` when the rotation is trivial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationDecomposition {
    pub theta: f64,
    pub n0: Option<[f64; 3]>,
    pub n1: Option<[f64; 3]>,
    pub dot: f64,
}

impl RotationDecomposition {
    /// Same rotations with angle folded into `[0, π]` and axes flipped to match.
    pub fn principal(&self) -> Self {
        if self.theta <= PI {
            return *self;
        }
        let neg = |n: Option<[f64; 3]>| n.map(|v| [-v[0], -v[1], -v[2]]);
        Self { theta: TAU - self.theta, n0: neg(self.n0), n1: neg(self.n1), dot: self.dot }
    }

    pub fn axes(&self) -> Result<([f64; 3], [f64; 3])> {
        match (self.n0, self.n1) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(DdrfError::UndefinedAxes),
        }
    }
}

/// `sin(x)/x` with a series near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// `exp(−i t [Δ Iz + Ω (cos φ Ix + sin φ Iy)])` with `I = σ/2`.
pub fn segment_propagator(detuning: f64, omega: f64, phi: f64, duration: f64) -> Unitary2 {
    let w = omega.hypot(detuning);
    if w == 0.0 || duration == 0.0 {
        return Unitary2::identity();
    }
    let axis = [omega * phi.cos() / w, omega * phi.sin() / w, detuning / w];
    Unitary2::rotation(axis, w * duration)
}

fn half_segment(first: bool, detuning: f64, seq: &SequenceParams) -> Unitary2 {
    let d = seq.dead_time;
    let drive = segment_propagator(detuning, seq.omega, 0.0, seq.tau - d);
    if d == 0.0 {
        return drive;
    }
    let idle = segment_propagator(detuning, 0.0, 0.0, d);
    // rightmost factor acts first
    if first {
        idle * drive
    } else {
        drive * idle
    }
}

fn full_segment(detuning: f64, seq: &SequenceParams) -> Unitary2 {
    let d = seq.dead_time;
    let drive = segment_propagator(detuning, seq.omega, 0.0, 2.0 * (seq.tau - d));
    if d == 0.0 {
        return drive;
    }
    let idle = segment_propagator(detuning, 0.0, 0.0, d);
    idle * drive * idle
}

/// Unit-cell (N = 2) propagators for detunings `(Δ0, Δ1)`.
pub fn block_unitary(seq: &SequenceParams, delta0: f64, delta1: f64) -> Result<ConditionalGate> {
    seq.validate()?;
    let rz = Unitary2::rz(seq.delta_phi);
    let cell =
        |a: f64, b: f64| half_segment(false, a, seq) * rz * full_segment(b, seq) * rz * half_segment(true, a, seq);
    Ok(ConditionalGate { v0: cell(delta0, delta1), v1: cell(delta1, delta0) })
}

/// Full N-pulse propagators `(V0^{N/2}, V1^{N/2})`.
pub fn sequence_unitary(seq: &SequenceParams, delta0: f64, delta1: f64) -> Result<ConditionalGate> {
    Ok(block_unitary(seq, delta0, delta1)?.pow(seq.n_pulses / 2))
}

fn su2_quaternion(u: &Unitary2) -> (f64, [f64; 3]) {
    let (_, q0, q) = u.su2_parts();
    (q0, q)
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

const AXIS_EPS: f64 = 1e-9;

pub fn decompose_rotation(gate: &ConditionalGate) -> Result<RotationDecomposition> {
    for v in [&gate.v0, &gate.v1] {
        if v.unitarity_error() > 1e-8 {
            return Err(invalid("decompose_rotation needs unitary input"));
        }
    }
    let (a0, q0) = su2_quaternion(&gate.v0);
    let (mut a1, mut q1) = su2_quaternion(&gate.v1);

    // V1 may carry an independent sign; pick the one that equates the angles
    if (a1 - a0).abs() > 1e-10 && (a1 + a0).abs() < (a1 - a0).abs() {
        a1 = -a1;
        q1 = q1.map(|x| -x);
    }
    let (t0, t1) = (2.0 * norm3(q0).atan2(a0), 2.0 * norm3(q1).atan2(a1));
    if (t0 - t1).abs() > AXIS_EPS {
        return Err(DdrfError::Domain(format!("rotation angles differ: {t0} vs {t1}")));
    }

    let s0 = norm3(q0);
    let s1 = norm3(q1);
    let theta = t0;
    if theta.min(TAU - theta) < AXIS_EPS || s0 < AXIS_EPS * 0.5 || s1 < AXIS_EPS * 0.5 {
        let theta = if TAU - theta < AXIS_EPS { 0.0 } else { theta };
        return Ok(RotationDecomposition { theta, n0: None, n1: None, dot: 1.0 });
    }
    let mut n0 = q0.map(|x| x / s0);
    let mut n1 = q1.map(|x| x / s1);
    let mut theta = theta;
    if let Some(first) = n0.iter().copied().find(|c| c.abs() > 1e-12) {
        if first < 0.0 {
            n0 = n0.map(|x| -x);
            n1 = n1.map(|x| -x);
            theta = TAU - theta;
        }
    }
    if theta >= TAU {
        theta -= TAU;
    }
    let dot = dot3(n0, n1).clamp(-1.0, 1.0);
    Ok(RotationDecomposition { theta, n0: Some(n0), n1: Some(n1), dot })
}

/// Wrap an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseIncrement {
    pub delta_phi: f64,
    /// Stark term actually added, rad.
    pub ac_stark: f64,
    /// The correction was requested but `Δ0 = 0` made it undefined.
    pub ac_stark_skipped: bool,
}

/// Phase increment putting the spin on resonance with the phase ramp.
pub fn resonant_phase_increment(
    delta0: f64,
    delta1: f64,
    tau: f64,
    mode: GateMode,
    omega: f64,
    ac_stark_correction: bool,
) -> PhaseIncrement {
    let base = -(delta0 + delta1) * tau;
    match mode {
        GateMode::Unconditional => {
            PhaseIncrement { delta_phi: wrap_phase(base), ac_stark: 0.0, ac_stark_skipped: false }
        }
        GateMode::Conditional => {
            let (ac_stark, skipped) = if !ac_stark_correction {
                (0.0, false)
            } else if delta0 == 0.0 {
                (0.0, true)
            } else {
                (-omega * omega * tau / delta0, false)
            };
            PhaseIncrement { delta_phi: wrap_phase(base + PI + ac_stark), ac_stark, ac_stark_skipped: skipped }
        }
    }
}

/// Signed effective Rabi frequency of the phase-ramped drive.
pub fn effective_rabi(omega: f64, delta0: f64, delta1: f64, tau: f64, mode: GateMode) -> f64 {
    let (s0, s1) = (sinc(delta0 * tau), sinc(delta1 * tau));
    match mode {
        GateMode::Conditional => omega * (s1 - s0),
        GateMode::Unconditional => omega * (s1 + s0),
    }
}

/// Electron `P0` after a gate with axis overlap `dot` and total rotation `total_angle`.
pub fn electron_response(dot: f64, total_angle: f64) -> f64 {
    let s = total_angle.sin();
    let sx = 1.0 - (1.0 - dot) * s * s;
    (0.5 * (sx + 1.0)).clamp(0.0, 1.0)
}

/// Lorentzian-window response of a spin driven only on its `ω1` transition.
pub fn local_window_response(omega: f64, delta1: f64, n_pulses: u32, tau: f64) -> f64 {
    if omega == 0.0 {
        return 1.0;
    }
    let r = delta1 / omega;
    let w = omega.hypot(delta1);
    let s = (0.5 * n_pulses as f64 * tau * w).sin();
    let sx = 0.5 * (1.0 - 2.0 / (1.0 + r * r) * s * s);
    sx + 0.5
}

/// Average gate fidelity of the gate's axes, with the angle forced to π/2,
/// against `|0⟩⟨0|⊗Rx(π/2) + |1⟩⟨1|⊗Rx(−π/2)`.
///
/// The sense of the nuclear x axis is a frame convention (it flips with the
/// sign of the effective Rabi frequency), so the mirrored target
/// `|0⟩⟨0|⊗Rx(−π/2) + |1⟩⟨1|⊗Rx(π/2)` is accepted as well.
pub fn conditional_gate_fidelity(gate: &ConditionalGate) -> Result<f64> {
    let rot = decompose_rotation(gate)?.principal();
    let (n0, n1) = rot.axes()?;
    let u0 = Unitary2::rotation(n0, FRAC_PI_2);
    let u1 = Unitary2::rotation(n1, FRAC_PI_2);
    let score = |sense: f64| {
        let i0 = Unitary2::rx(sense * FRAC_PI_2);
        let i1 = Unitary2::rx(-sense * FRAC_PI_2);
        fidelity_from_trace((i0.adjoint() * u0).trace() + (i1.adjoint() * u1).trace(), 4)
    };
    Ok(score(1.0).max(score(-1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseScan {
    pub delta_phi: f64,
    pub fidelity: f64,
}

/// Numerically optimal phase increment: a coarse scan of `±half_width`
/// around `center` followed by golden-section refinement.
pub fn optimize_phase_increment(
    seq: &SequenceParams,
    delta0: f64,
    delta1: f64,
    center: f64,
    half_width: f64,
    n_scan: usize,
) -> Result<PhaseScan> {
    if n_scan < 3 || !(half_width > 0.0) {
        return Err(invalid("phase scan needs >= 3 points and a positive width"));
    }
    let eval = |dp: f64| -> f64 {
        let s = SequenceParams { delta_phi: dp, ..*seq };
        sequence_unitary(&s, delta0, delta1).and_then(|g| conditional_gate_fidelity(&g)).unwrap_or(0.0)
    };
    let step = 2.0 * half_width / (n_scan - 1) as f64;
    let mut best = (center, f64::NEG_INFINITY);
    for k in 0..n_scan {
        let x = center - half_width + k as f64 * step;
        let f = eval(x);
        if f > best.1 {
            best = (x, f);
        }
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d);
        }
    }
    let x = 0.5 * (a + b);
    let f = eval(x);
    if f >= best.1 {
        Ok(PhaseScan { delta_phi: x, fidelity: f })
    } else {
        Ok(PhaseScan { delta_phi: best.0, fidelity: best.1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::hz;
    use approx::assert_relative_eq;

    fn minus_identity() -> Unitary2 {
        Unitary2::identity().scale(C64::new(-1.0, 0.0))
    }

    #[test]
    fn free_precession_segment() {
        let u = segment_propagator(3.0, 0.0, 0.0, 0.7);
        assert!(u.max_abs_diff(&Unitary2::rz(2.1)) < 1e-15);
        let p = segment_propagator(0.0, PI, 0.0, 1.0);
        assert!(p.max_abs_diff(&Unitary2::pauli_x().scale(C64::new(0.0, -1.0))) < 1e-15);
        assert_eq!(segment_propagator(0.0, 0.0, 1.0, 5.0), Unitary2::identity());
    }

    #[test]
    fn undriven_block_closes_to_minus_identity() {
        let (d0, d1, tau) = (hz(-3.0e3), hz(4.1e3), 20e-6);
        let mut seq = SequenceParams::new(2, tau, 0.0);
        seq.delta_phi = -(d0 + d1) * tau + PI;
        let g = block_unitary(&seq, d0, d1).unwrap();
        assert!(g.v0.max_abs_diff(&minus_identity()) < 1e-12);
        assert!(g.v1.max_abs_diff(&minus_identity()) < 1e-12);
        seq.delta_phi = 0.0;
        let g = block_unitary(&seq, d0, d1).unwrap();
        assert!(g.v0.max_abs_diff(&Unitary2::rz(2.0 * (d0 + d1) * tau)) < 1e-12);
    }

    #[test]
    fn dead_time_keeps_traces_equal() {
        let mut seq = SequenceParams::new(2, 25e-6, hz(800.0));
        seq.dead_time = 3e-6;
        seq.delta_phi = 0.4;
        let g = block_unitary(&seq, hz(-21e3), hz(1.5e3)).unwrap();
        assert!((g.v0.trace() - g.v1.trace()).norm() < 1e-12);
        assert!(g.unitarity_error() < 1e-13);
    }

    #[test]
    fn sequence_of_two_is_block() {
        let mut seq = SequenceParams::new(2, 20e-6, hz(500.0));
        seq.delta_phi = 1.1;
        assert_eq!(block_unitary(&seq, 1e4, -2e3).unwrap(), sequence_unitary(&seq, 1e4, -2e3).unwrap());
        assert!(SequenceParams::new(3, 1e-6, 0.0).validate().is_err());
        assert!(SequenceParams::new(0, 1e-6, 0.0).validate().is_err());
    }

    #[test]
    fn decomposition_examples() {
        let x = Unitary2::pauli_x().scale(C64::new(0.0, -1.0));
        let d = decompose_rotation(&ConditionalGate::new(x, x)).unwrap();
        assert_relative_eq!(d.theta, PI, epsilon = 1e-12);
        assert_eq!(d.n0, Some([1.0, 0.0, 0.0]));
        assert_relative_eq!(d.dot, 1.0);

        let g = ConditionalGate::new(Unitary2::rx(FRAC_PI_2), Unitary2::rx(-FRAC_PI_2));
        let d = decompose_rotation(&g).unwrap();
        assert_relative_eq!(d.theta, FRAC_PI_2, epsilon = 1e-12);
        assert_relative_eq!(d.dot, -1.0, epsilon = 1e-12);
        assert_relative_eq!(conditional_gate_fidelity(&g).unwrap(), 1.0, epsilon = 1e-14);

        let id = ConditionalGate::new(Unitary2::identity(), Unitary2::identity());
        let d = decompose_rotation(&id).unwrap();
        assert!(d.n0.is_none());
        assert_eq!(d.dot, 1.0);
        assert!(matches!(conditional_gate_fidelity(&id), Err(DdrfError::UndefinedAxes)));
    }

    #[test]
    fn phase_increment_examples() {
        let p = resonant_phase_increment(0.0, 0.0, 1e-6, GateMode::Conditional, 0.0, false);
        assert_relative_eq!(p.delta_phi, PI);
        let p = resonant_phase_increment(0.0, 0.0, 1e-6, GateMode::Conditional, 1.0, true);
        assert!(p.ac_stark_skipped);
        let (d0, tau) = (hz(30e3), 25e-6);
        let p = resonant_phase_increment(d0, 0.0, tau, GateMode::Conditional, hz(1e3), true);
        assert_relative_eq!(p.ac_stark, -hz(1e3).powi(2) * tau / d0, max_relative = 1e-12);
        let u = resonant_phase_increment(d0, 0.0, tau, GateMode::Unconditional, hz(1e3), true);
        assert_relative_eq!(u.delta_phi, wrap_phase(-d0 * tau));
    }

    #[test]
    fn effective_rabi_examples() {
        assert_eq!(effective_rabi(3.0, 5e3, 5e3, 1e-5, GateMode::Conditional), 0.0);
        let r = effective_rabi(1.0, hz(30693.0), 0.0, 24.654e-6, GateMode::Conditional);
        assert!((r - 1.21).abs() < 0.01, "{r}");
        assert_relative_eq!(effective_rabi(1.0, 0.0, 0.0, 1e-5, GateMode::Unconditional), 2.0);
    }

    #[test]
    fn sinc_is_smooth_across_series_switch() {
        for x in [9.99e-5, 1.0001e-4, -1e-4] {
            assert_relative_eq!(sinc(x), f64::sin(x) / x, max_relative = 1e-15);
        }
        assert_eq!(sinc(0.0), 1.0);
    }

    #[test]
    fn response_examples() {
        assert_relative_eq!(electron_response(-1.0, FRAC_PI_2), 0.0, epsilon = 1e-15);
        assert_relative_eq!(electron_response(1.0, 0.8), 1.0);
        let (n, tau) = (24, 29.632e-6);
        let w = PI / (2.0 * n as f64 * tau);
        assert_relative_eq!(local_window_response(w, 0.0, n, tau), 0.5, epsilon = 1e-14);
        let first_zero = 15f64.sqrt() * w;
        assert_relative_eq!(local_window_response(w, first_zero, n, tau), 1.0, epsilon = 1e-14);
        assert!(local_window_response(w, 1e4 * w, n, tau) > 0.9999);
    }

    proptest::proptest! {
        #[test]
        fn analytic_response_matches_general(a in -10.0f64..10.0) {
            let w = 1.0;
            let general = electron_response(-1.0, a * w);
            let analytic = 0.5 * (2.0 * a * w).cos() + 0.5;
            proptest::prop_assert!((general - analytic).abs() < 1e-14);
        }

        #[test]
        fn sequence_is_periodic_in_phase(dp in -PI..PI, d0 in -2e5f64..2e5, d1 in -2e5f64..2e5, n in 1u32..50) {
            let mut seq = SequenceParams::new(2 * n, 2e-5, 3e3);
            seq.delta_phi = dp;
            let a = sequence_unitary(&seq, d0, d1).unwrap();
            seq.delta_phi = dp + TAU;
            let b = sequence_unitary(&seq, d0, d1).unwrap();
            proptest::prop_assert!(a.v0.max_abs_diff(&b.v0) < 1e-11);
            proptest::prop_assert!(a.v1.max_abs_diff(&b.v1) < 1e-11);
        }

        #[test]
        fn propagators_stay_unitary(dp in -PI..PI, d0 in -1e6f64..1e6, d1 in -1e6f64..1e6,
                                    w in 0.0f64..1e5, n in 1u32..5000) {
            let mut seq = SequenceParams::new(2 * n, 1.7e-5, w);
            seq.delta_phi = dp;
            let g = sequence_unitary(&seq, d0, d1).unwrap();
            proptest::prop_assert!(g.unitarity_error() <= 1e-11);
        }

        #[test]
        fn decomposition_reconstructs(dp in -PI..PI, d0 in -2e5f64..2e5, d1 in -2e5f64..2e5, w in 1e2f64..5e4) {
            let mut seq = SequenceParams::new(2, 2.3e-5, w);
            seq.delta_phi = dp;
            let g = block_unitary(&seq, d0, d1).unwrap();
            let d = decompose_rotation(&g).unwrap();
            proptest::prop_assume!(d.n0.is_some());
            let (n0, n1) = d.axes().unwrap();
            proptest::prop_assert!((norm3(n0) - 1.0).abs() < 1e-10);
            proptest::prop_assert!((norm3(n1) - 1.0).abs() < 1e-10);
            proptest::prop_assert!((-1.0..=1.0).contains(&d.dot));
            proptest::prop_assert!((0.0..TAU).contains(&d.theta));
            proptest::prop_assert!(Unitary2::rotation(n0, d.theta).phase_distance(&g.v0) < 1e-9);
            proptest::prop_assert!(Unitary2::rotation(n1, d.theta).phase_distance(&g.v1) < 1e-9);
        }
    }
}
