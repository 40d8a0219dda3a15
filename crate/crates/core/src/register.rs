//! Electron-controlled gates in a register of nuclear spins.
//!
//! Qubit order is electron first, then the register spins in configuration
//! order. All per-spin propagators are block diagonal in the electron state
//! and act on disjoint nuclear factors, so the register unitary is
//! `Σ_s |s⟩⟨s| ⊗ W_s¹ ⊗ … ⊗ W_s^M` and traces factorise per spin.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    effective_rabi, resonant_phase_increment, sequence_unitary, sinc, wrap_phase, ConditionalGate, GateMode,
    SequenceParams,
};
use crate::error::{invalid, DdrfError, Result};
use crate::fidelity::fidelity_from_trace;
use crate::sensing::{decoherence_exponent, AmplitudePolicy, CoherenceModel};
use crate::spectroscopy::{bath_sigma_x, spin_sigma_x, BathModel};
use crate::spin::{detunings, to_hz, transition_frequencies, FieldConfig, NuclearSpinSpec, PhysicalConstants};
use crate::su2::{Unitary2, C64};
use crate::sweep::{Axis, SweepResult};

/// Largest register for which a dense unitary is built.
pub const MAX_DENSE_REGISTER: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterConfig {
    pub register_spins: Vec<NuclearSpinSpec>,
    pub bystander_spins: Vec<NuclearSpinSpec>,
    pub bath: BathModel,
    pub coherence: CoherenceModel,
    pub amplitude: AmplitudePolicy,
    /// Nuclear free-evolution dephasing time, s.
    pub t2_star_nuclear: f64,
    pub n_field_samples: usize,
    pub field_range_sigmas: f64,
}

impl RegisterConfig {
    pub fn new(register_spins: Vec<NuclearSpinSpec>, bystander_spins: Vec<NuclearSpinSpec>) -> Self {
        Self {
            register_spins,
            bystander_spins,
            bath: BathModel::default(),
            coherence: CoherenceModel::default(),
            amplitude: AmplitudePolicy::default(),
            t2_star_nuclear: 10e-3,
            n_field_samples: 10,
            field_range_sigmas: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.register_spins.len();
        if m == 0 {
            return Err(invalid("register needs at least one spin"));
        }
        if m > MAX_DENSE_REGISTER {
            return Err(DdrfError::RegisterTooLarge(m));
        }
        for (i, s) in self.register_spins.iter().enumerate() {
            s.validate()?;
            if self.register_spins[..i].iter().any(|o| o.label == s.label) {
                return Err(invalid(format!("duplicate register label {}", s.label)));
            }
        }
        for s in &self.bystander_spins {
            s.validate()?;
        }
        self.bath.validate()?;
        self.coherence.validate()?;
        self.amplitude.validate()?;
        if !(self.t2_star_nuclear.is_finite() && self.t2_star_nuclear > 0.0) {
            return Err(invalid("t2_star_nuclear must be positive"));
        }
        if self.n_field_samples == 0 {
            return Err(invalid("n_field_samples must be >= 1"));
        }
        if !(self.field_range_sigmas.is_finite() && self.field_range_sigmas >= 0.0) {
            return Err(invalid("field_range_sigmas must be >= 0"));
        }
        Ok(())
    }

    pub fn target_index(&self, label: &str) -> Result<usize> {
        self.register_spins
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| DdrfError::UnknownSpin(label.to_string()))
    }

    /// The same configuration with only the target left in the register.
    pub fn single_qubit(&self, label: &str) -> Result<Self> {
        let i = self.target_index(label)?;
        Ok(Self { register_spins: vec![self.register_spins[i].clone()], ..self.clone() })
    }
}

// ---------------------------------------------------------------- selectivity

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectivityReport {
    /// Hyperfine difference exceeds the single-pulse bandwidth π/τ.
    pub rf_bound_ok: bool,
    /// Folded mean-frequency difference exceeds the phase resolution π/(Nτ).
    pub phase_bound_ok: bool,
    /// Shortest 2Nτ giving zero crosstalk at this τ, s; infinite if unreachable.
    pub min_gate_time: f64,
    /// Detuning of the first zero of the bystander response, rad/s.
    pub crosstalk_free_detuning: f64,
}

/// Circular distance of `x` from the nearest multiple of `period`.
pub fn folded_distance(x: f64, period: f64) -> f64 {
    let r = x.abs().rem_euclid(period);
    r.min(period - r)
}

pub fn selectivity_bounds(
    target: &NuclearSpinSpec,
    bystander: &NuclearSpinSpec,
    n_pulses: u32,
    tau: f64,
    field: &FieldConfig,
    constants: &PhysicalConstants,
) -> Result<SelectivityReport> {
    if n_pulses == 0 || !(tau > 0.0) {
        return Err(invalid("selectivity needs N > 0 and tau > 0"));
    }
    let omega0 = field.larmor(constants);
    let a_t = target.a_parallel(omega0)?;
    let a_b = bystander.a_parallel(omega0)?;
    let t = transition_frequencies(target, field, constants)?;
    let b = transition_frequencies(bystander, field, constants)?;
    let n_tau = n_pulses as f64 * tau;
    let d_mean = folded_distance(t.mean - b.mean, PI / tau);
    let min_gate_time = if d_mean > 0.0 { 15f64.sqrt() * PI / (2.0 * d_mean) } else { f64::INFINITY };
    Ok(SelectivityReport {
        rf_bound_ok: (a_t - a_b).abs() >= PI / tau,
        phase_bound_ok: d_mean >= PI / n_tau,
        min_gate_time,
        crosstalk_free_detuning: 15f64.sqrt() * PI / (2.0 * n_tau),
    })
}

// ------------------------------------------------------------- gate assembly

/// Sequence settings chosen for a target spin at one `(N, τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivePlan {
    pub seq: SequenceParams,
    /// The π/2 condition is met without hitting an amplitude cap.
    pub feasible: bool,
    /// Sense of the target rotation: +1 if the electron-0 branch turns about −x.
    pub sense: f64,
}

/// Drive the target on its ω1 transition with Ω solving Ω̃Nτ = π/2.
pub fn plan_gate(
    config: &RegisterConfig,
    target: usize,
    n_pulses: u32,
    tau: f64,
    field: &FieldConfig,
    constants: &PhysicalConstants,
) -> Result<DrivePlan> {
    let spin = config.register_spins.get(target).ok_or_else(|| invalid("target index out of range"))?;
    let tf = transition_frequencies(spin, field, constants)?;
    let (d0, d1) = detunings(tf.omega0, tf.omega1, tf.omega1);
    let bracket = sinc(d1 * tau) - sinc(d0 * tau);
    let cap = config.amplitude.cap(tau);
    let (omega, feasible) = if bracket > 0.0 {
        let wanted = FRAC_PI_2 / (n_pulses as f64 * tau * bracket);
        (wanted.min(cap), wanted <= cap)
    } else {
        (cap, false)
    };
    let mut seq = SequenceParams::new(n_pulses, tau, omega);
    seq.omega_rf = tf.omega1;
    seq.delta_phi = resonant_phase_increment(d0, d1, tau, GateMode::Conditional, omega, true).delta_phi;
    seq.validate()?;
    let sense = if effective_rabi(1.0, d0, d1, tau, GateMode::Conditional) >= 0.0 { 1.0 } else { -1.0 };
    Ok(DrivePlan { seq, feasible, sense })
}

/// Per-branch z-phase `arg(V[1][1] / V[0][0])`.
fn z_phase(v: &Unitary2) -> f64 {
    (v.entry(1, 1) / v.entry(0, 0)).arg()
}

/// Electron-averaged z-phase of an idler, removed by a virtual-Z.
pub fn idler_phase(gate: &ConditionalGate) -> f64 {
    let p0 = z_phase(&gate.v0);
    let p1 = z_phase(&gate.v1);
    p0 + 0.5 * wrap_phase(p1 - p0)
}

/// Per-spin factors of a register gate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterGate {
    pub labels: Vec<String>,
    pub target: usize,
    pub factors: Vec<ConditionalGate>,
    /// Virtual-Z angle applied to each idler (zero for the target).
    pub idler_phases: Vec<f64>,
    pub plan: DrivePlan,
}

impl RegisterGate {
    /// Ideal conditional ±π/2 rotation on the target, identity elsewhere.
    pub fn target_factors(&self) -> Vec<ConditionalGate> {
        let s = self.plan.sense;
        (0..self.factors.len())
            .map(|j| {
                if j == self.target {
                    ConditionalGate::new(Unitary2::rx(-s * FRAC_PI_2), Unitary2::rx(s * FRAC_PI_2))
                } else {
                    ConditionalGate::new(Unitary2::identity(), Unitary2::identity())
                }
            })
            .collect()
    }

    pub fn dimension(&self) -> usize {
        2usize << self.factors.len()
    }

    /// `(Tr(Ut† Uc), Tr(Ut† Z′ Uc))` from per-spin traces.
    pub fn traces(&self) -> (C64, C64) {
        let ideal = self.target_factors();
        let mut t0 = C64::new(1.0, 0.0);
        let mut t1 = C64::new(1.0, 0.0);
        for (w, t) in self.factors.iter().zip(&ideal) {
            t0 *= (t.v0.adjoint() * w.v0).trace();
            t1 *= (t.v1.adjoint() * w.v1).trace();
        }
        (t0 + t1, t0 - t1)
    }

    /// Unitary fidelity and the fidelity after an electron Z.
    pub fn fidelities(&self) -> (f64, f64) {
        let (a, b) = self.traces();
        let d = self.dimension();
        (fidelity_from_trace(a, d), fidelity_from_trace(b, d))
    }

    pub fn dense(&self) -> DMatrix<C64> {
        dense_from_factors(&self.factors)
    }

    pub fn dense_target(&self) -> DMatrix<C64> {
        dense_from_factors(&self.target_factors())
    }
}

fn to_dense(u: &Unitary2) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |r, c| u.entry(r, c))
}

/// `Σ_s |s⟩⟨s| ⊗ F_s¹ ⊗ … ⊗ F_s^M`.
pub fn dense_from_factors(factors: &[ConditionalGate]) -> DMatrix<C64> {
    let half = 1usize << factors.len();
    let mut out = DMatrix::zeros(2 * half, 2 * half);
    for s in 0..2 {
        let mut block = DMatrix::<C64>::identity(1, 1);
        for f in factors {
            let v = if s == 0 { &f.v0 } else { &f.v1 };
            block = block.kronecker(&to_dense(v));
        }
        out.view_mut((s * half, s * half), (half, half)).copy_from(&block);
    }
    out
}

/// Register gate at a field offset `delta_b` (T) from the nominal field.
///
/// Idler virtual-Z angles are calibrated at the nominal field and reused, so
/// a field offset leaves residual phases; `echo` removes the quasi-static part.
pub fn register_gate_at(
    config: &RegisterConfig,
    target: usize,
    plan: &DrivePlan,
    field: &FieldConfig,
    constants: &PhysicalConstants,
    delta_b: f64,
    echo: bool,
) -> Result<RegisterGate> {
    config.validate()?;
    let seq = &plan.seq;
    let shift = constants.gamma_c * delta_b;
    let mut factors = Vec::with_capacity(config.register_spins.len());
    let mut phases = Vec::with_capacity(config.register_spins.len());
    for (j, spin) in config.register_spins.iter().enumerate() {
        let tf = transition_frequencies(spin, field, constants)?;
        let (d0, d1) = detunings(tf.omega0, tf.omega1, seq.omega_rf);
        let mut gate = sequence_unitary(seq, d0 - shift, d1 - shift)?;
        let phase = if j == target {
            0.0
        } else if shift == 0.0 {
            idler_phase(&gate)
        } else {
            idler_phase(&sequence_unitary(seq, d0, d1)?)
        };
        let mut correction = Unitary2::rz(-phase);
        if echo {
            correction = Unitary2::rz(shift * seq.duration()) * correction;
        }
        gate = ConditionalGate::new(correction * gate.v0, correction * gate.v1);
        factors.push(gate);
        phases.push(phase);
    }
    Ok(RegisterGate {
        labels: config.register_spins.iter().map(|s| s.label.clone()).collect(),
        target,
        factors,
        idler_phases: phases,
        plan: *plan,
    })
}

/// Register gate for `target_label` at the nominal field, with its drive plan.
pub fn register_gate_unitary(
    config: &RegisterConfig,
    target_label: &str,
    n_pulses: u32,
    tau: f64,
    field: &FieldConfig,
    constants: &PhysicalConstants,
) -> Result<RegisterGate> {
    config.validate()?;
    let target = config.target_index(target_label)?;
    let plan = plan_gate(config, target, n_pulses, tau, field, constants)?;
    register_gate_at(config, target, &plan, field, constants, 0.0, false)
}

// ------------------------------------------------------------------ dephasing

/// `(λ_T2, λ_bath)` for a sequence at the nominal field.
pub fn dephasing_lambdas(
    config: &RegisterConfig,
    seq: &SequenceParams,
    field: &FieldConfig,
    constants: &PhysicalConstants,
) -> Result<(f64, f64)> {
    let t = seq.duration();
    let lambda_t2 = (-decoherence_exponent(seq.n_pulses as f64, t, &config.coherence)).exp();
    let mut lambda_bath = bath_sigma_x(seq, field, constants, &config.bath)?;
    for s in &config.bystander_spins {
        lambda_bath *= spin_sigma_x(s, seq, field, constants)?;
    }
    Ok((lambda_t2.clamp(0.0, 1.0), lambda_bath.clamp(0.0, 1.0)))
}

/// `(1+λ)/2 F(Ut, Uc) + (1−λ)/2 F(Ut, Z′Uc)`.
pub fn apply_dephasing(f_unitary: f64, f_flipped: f64, lambda: f64) -> f64 {
    0.5 * (1.0 + lambda) * f_unitary + 0.5 * (1.0 - lambda) * f_flipped
}

/// Field-noise width σ_B = 1 / (√2 π γc T2*) with γc in Hz/T.
pub fn field_sigma(t2_star: f64, constants: &PhysicalConstants) -> f64 {
    1.0 / (SQRT_2 * PI * to_hz(constants.gamma_c) * t2_star)
}

/// Symmetric field offsets over ±kσ_B and their normalised Gaussian weights.
pub fn field_samples(config: &RegisterConfig, constants: &PhysicalConstants) -> Vec<(f64, f64)> {
    let n = config.n_field_samples;
    if n == 1 {
        return vec![(0.0, 1.0)];
    }
    let sigma = field_sigma(config.t2_star_nuclear, constants);
    let span = config.field_range_sigmas * sigma;
    let nodes: Vec<f64> = (0..n).map(|k| -span + 2.0 * span * k as f64 / (n - 1) as f64).collect();
    let w: Vec<f64> =
        nodes.iter().map(|&b| if sigma > 0.0 { (-0.5 * (b / sigma).powi(2)).exp() } else { 1.0 }).collect();
    let total: f64 = w.iter().sum();
    nodes.into_iter().zip(w).map(|(b, w)| (b, w / total)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub fidelity: f64,
    pub lambda_t2: f64,
    pub lambda_bath: f64,
    pub omega_set: f64,
    pub feasible: bool,
}

/// Which infidelity channels enter a pipeline evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channels {
    pub bath: bool,
    pub t2: bool,
    pub t2_star: bool,
    pub echo: bool,
}

impl Channels {
    pub const UNITARY: Self = Self { bath: false, t2: false, t2_star: false, echo: false };
    pub const FULL: Self = Self { bath: true, t2: true, t2_star: true, echo: true };
}

/// Cumulative infidelity contributions, in the order they are added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contribution {
    SingleQubit,
    Register,
    Bath,
    T2,
    T2Star,
    Echo,
}

impl Contribution {
    pub const ALL: [Contribution; 6] = [
        Contribution::SingleQubit,
        Contribution::Register,
        Contribution::Bath,
        Contribution::T2,
        Contribution::T2Star,
        Contribution::Echo,
    ];

    pub fn channels(self) -> Channels {
        let c = |bath, t2, t2_star, echo| Channels { bath, t2, t2_star, echo };
        match self {
            Contribution::SingleQubit | Contribution::Register => Channels::UNITARY,
            Contribution::Bath => c(true, false, false, false),
            Contribution::T2 => c(true, true, false, false),
            Contribution::T2Star => c(true, true, true, false),
            Contribution::Echo => Channels::FULL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Contribution::SingleQubit => "single_qubit",
            Contribution::Register => "register",
            Contribution::Bath => "bath",
            Contribution::T2 => "t2",
            Contribution::T2Star => "t2_star",
            Contribution::Echo => "echo",
        }
    }
}

/// Full pipeline for one `(N, τ)` cell.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_gate(
    config: &RegisterConfig,
    target: usize,
    n_pulses: u32,
    tau: f64,
    field: &FieldConfig,
    constants: &PhysicalConstants,
    channels: Channels,
) -> Result<GateOutcome> {
    let plan = plan_gate(config, target, n_pulses, tau, field, constants)?;
    let (lambda_t2, lambda_bath) =
        if channels.bath || channels.t2 { dephasing_lambdas(config, &plan.seq, field, constants)? } else { (1.0, 1.0) };
    let lambda = if channels.t2 { lambda_t2 } else { 1.0 } * if channels.bath { lambda_bath } else { 1.0 };
    let samples = if channels.t2_star { field_samples(config, constants) } else { vec![(0.0, 1.0)] };
    let mut fidelity = 0.0;
    for (db, w) in samples {
        let gate = register_gate_at(config, target, &plan, field, constants, db, channels.echo && channels.t2_star)?;
        let (fu, fz) = gate.fidelities();
        fidelity += w * apply_dephasing(fu, fz, lambda);
    }
    Ok(GateOutcome {
        fidelity: fidelity.clamp(0.0, 1.0),
        lambda_t2,
        lambda_bath,
        omega_set: plan.seq.omega,
        feasible: plan.feasible,
    })
}

/// Field-averaged fidelity with all decoherence channels; `echo` toggles the
/// quasi-static phase correction.
pub fn t2star_average(
    config: &RegisterConfig,
    target_label: &str,
    n_pulses: u32,
    tau: f64,
    field: &FieldConfig,
    constants: &PhysicalConstants,
    echo: bool,
) -> Result<GateOutcome> {
    config.validate()?;
    let target = config.target_index(target_label)?;
    let channels = Channels { echo, ..Channels::FULL };
    evaluate_gate(config, target, n_pulses, tau, field, constants, channels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityMap {
    pub map: SweepResult,
    /// Best feasible cell `(N, τ, outcome)`, if any.
    pub best: Option<(u32, f64, GateOutcome)>,
}

/// Fidelity over an `(N, τ)` grid for one target and channel set.
pub fn fidelity_map(
    config: &RegisterConfig,
    target_label: &str,
    pulses: &[u32],
    taus: &[f64],
    field: &FieldConfig,
    constants: &PhysicalConstants,
    channels: Channels,
) -> Result<FidelityMap> {
    config.validate()?;
    let target = config.target_index(target_label)?;
    if pulses.iter().any(|&n| n < 2 || n % 2 != 0) {
        return Err(invalid("pulse numbers must be even and >= 2"));
    }
    let x = Axis::new("n_pulses", "", pulses.iter().map(|&n| n as f64).collect());
    let y = Axis::new("tau", "s", taus.to_vec());
    let mut map = SweepResult::new(x, y)?;
    let nt = taus.len();
    let cells = (0..pulses.len() * nt)
        .into_par_iter()
        .map(|k| evaluate_gate(config, target, pulses[k / nt], taus[k % nt], field, constants, channels))
        .collect::<Result<Vec<GateOutcome>>>()?;

    let mut best: Option<(u32, f64, GateOutcome)> = None;
    for (k, c) in cells.iter().enumerate() {
        if c.feasible && best.is_none_or(|(_, _, b)| c.fidelity > b.fidelity) {
            best = Some((pulses[k / nt], taus[k % nt], *c));
        }
    }
    let layer = |f: fn(&GateOutcome) -> f64| cells.iter().map(f).collect::<Vec<f64>>();
    map.push_layer("fidelity", "", layer(|c| c.fidelity))?;
    map.push_layer("lambda_t2", "", layer(|c| c.lambda_t2))?;
    map.push_layer("lambda_bath", "", layer(|c| c.lambda_bath))?;
    map.push_layer("omega", "Hz", layer(|c| to_hz(c.omega_set)))?;
    map.push_layer("feasible", "", layer(|c| if c.feasible { 1.0 } else { 0.0 }))?;
    map.set_meta("target", target_label);
    map.set_meta("register", config.register_spins.iter().map(|s| s.label.as_str()).collect::<Vec<_>>().join(" "));
    map.set_meta("n_bystanders", config.bystander_spins.len());
    map.set_meta("bath", channels.bath);
    map.set_meta("t2", channels.t2);
    map.set_meta("t2_star", channels.t2_star);
    map.set_meta("echo", channels.echo);
    map.set_meta("t2_star_nuclear_s", config.t2_star_nuclear);
    map.set_meta("n_field_samples", config.n_field_samples);
    map.set_meta("field_range_sigmas", config.field_range_sigmas);
    map.set_meta("b_z_tesla", field.b_z);
    Ok(FidelityMap { map, best })
}

/// One map per cumulative contribution, in [`Contribution::ALL`] order.
pub fn contribution_maps(
    config: &RegisterConfig,
    target_label: &str,
    pulses: &[u32],
    taus: &[f64],
    field: &FieldConfig,
    constants: &PhysicalConstants,
) -> Result<Vec<(Contribution, FidelityMap)>> {
    let single = config.single_qubit(target_label)?;
    Contribution::ALL
        .iter()
        .map(|&c| {
            let cfg = if c == Contribution::SingleQubit { &single } else { config };
            let mut m = fidelity_map(cfg, target_label, pulses, taus, field, constants, c.channels())?;
            m.map.set_meta("contribution", c.name());
            Ok((c, m))
        })
        .collect()
}
