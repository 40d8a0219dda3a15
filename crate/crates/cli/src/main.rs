#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ddrf_core::config::BUILTIN_TABLE;
use ddrf_core::register::{contribution_maps, fidelity_map, Channels, FidelityMap};
use ddrf_core::sensing::{optimize_sensitivity, Protocol, SensingPoint};
use ddrf_core::spectroscopy::{driving_time_scan, phase_frequency_transform, spectroscopy_sweep};
use ddrf_core::spin::{hz, to_hz};
use ddrf_core::sweep::{linspace, logspace, Axis};
use ddrf_core::{DdrfError, SequenceParams, SpinTable, SweepResult};
use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser, Debug)]
#[command(name = "ddrf", version, about = "DDRF electron-nuclear gate sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Electron signal over RF frequency and phase increment.
    Spectroscopy(SpectroscopyArgs),
    /// Tracked-resonance response at fixed total driving time.
    Rabi(RabiArgs),
    /// Single-spin sensitivity optimum, resonant vs detuned drive.
    Sensitivity(SensitivityArgs),
    /// Register gate fidelity over pulse number and interpulse delay.
    Register(RegisterArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// Spin table: a TOML file or the builtin name.
    #[arg(long, default_value = BUILTIN_TABLE)]
    config: String,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Grid size as NxM.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Worker threads (0 = all cores); does not affect results.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Reserved; every computation is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct SpectroscopyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 29.632)]
    tau_us: f64,
    #[arg(long, default_value_t = 24)]
    n: u32,
    #[arg(long, default_value_t = 356.0)]
    rabi_hz: f64,
    /// RF offset range from the Larmor frequency, Hz.
    #[arg(long, default_value_t = -50e3, allow_hyphen_values = true)]
    rf_min_hz: f64,
    #[arg(long, default_value_t = 50e3, allow_hyphen_values = true)]
    rf_max_hz: f64,
    #[arg(long, default_value_t = 0.0)]
    dead_time_us: f64,
    /// Leave out the statistical bath.
    #[arg(long)]
    no_bath: bool,
    /// Also write the map on folded phase-frequency axes.
    #[arg(long)]
    phase_frequency: bool,
}

#[derive(Args, Debug, Serialize)]
struct RabiArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "C0")]
    spin: String,
    /// Pulse numbers, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "24,48,102")]
    n: Vec<u32>,
    #[arg(long, default_value_t = 1.4)]
    drive_time_ms: f64,
    #[arg(long, default_value_t = 280.0)]
    rabi_hz: f64,
    /// Half-width of the RF scan around the ω1 transition, Hz.
    #[arg(long, default_value_t = 40e3)]
    span_hz: f64,
    #[arg(long)]
    ac_stark: bool,
}

#[derive(Args, Debug, Serialize)]
struct SensitivityArgs {
    #[command(flatten)]
    common: Common,
    /// Explicit hyperfine couplings, Hz, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    delta_hz: Vec<f64>,
    #[arg(long, default_value_t = 30.0)]
    delta_min_hz: f64,
    #[arg(long, default_value_t = 10e3)]
    delta_max_hz: f64,
    #[arg(long, default_value_t = 25)]
    n_delta: usize,
    /// Desired RF amplitude before caps, Hz; defaults to the absolute cap.
    #[arg(long)]
    rabi_hz: Option<f64>,
    /// Write the intermediate (N, t) maps for every coupling.
    #[arg(long)]
    maps: bool,
}

#[derive(Args, Debug, Serialize)]
struct RegisterArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "C1")]
    target: String,
    /// Register labels, comma separated; defaults to the table's register.
    #[arg(long, value_delimiter = ',')]
    register: Vec<String>,
    #[arg(long, default_value_t = 4)]
    n_min: u32,
    #[arg(long, default_value_t = 256)]
    n_max: u32,
    #[arg(long, default_value_t = 4.0)]
    tau_min_us: f64,
    #[arg(long, default_value_t = 60.0)]
    tau_max_us: f64,
    /// Turn off the quasi-static echo correction.
    #[arg(long)]
    no_echo: bool,
    /// Also write the cumulative infidelity-contribution maps.
    #[arg(long)]
    contributions: bool,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) =
        s.to_ascii_lowercase().split_once('x').map(|(a, b)| (a.to_string(), b.to_string())).ok_or("expected NxM")?;
    let a: usize = a.trim().parse().map_err(|e| format!("grid: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("grid: {e}"))?;
    if a == 0 || b == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((a, b))
}

enum Failure {
    Usage(String),
    Infeasible(String),
    Internal(String),
}

impl From<DdrfError> for Failure {
    fn from(e: DdrfError) -> Self {
        match e {
            DdrfError::Io(_) => Failure::Internal(e.to_string()),
            DdrfError::Domain(_) => Failure::Internal(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct Manifest<'a, P: Serialize> {
    command: &'a str,
    parameters: &'a P,
    config: String,
    config_sha256: String,
    outputs: Vec<String>,
    wall_clock_s: f64,
}

struct Run {
    out_dir: PathBuf,
    table: SpinTable,
    config_sha256: String,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    fn start(common: &Common) -> Outcome<Self> {
        let text = if Path::new(&common.config).exists() || common.config != BUILTIN_TABLE {
            fs::read_to_string(&common.config)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", common.config)))?
        } else {
            SpinTable::builtin_text().to_string()
        };
        let table = SpinTable::parse(&text, &common.config)?;
        if common.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(common.threads)
                .build_global()
                .map_err(|e| Failure::Internal(e.to_string()))?;
        }
        fs::create_dir_all(&common.out_dir)?;
        Ok(Self {
            out_dir: common.out_dir.clone(),
            table,
            config_sha256: hex::encode(Sha256::digest(text.as_bytes())),
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    fn stamp(&self, sweep: &mut SweepResult, command: &str, common: &Common) {
        sweep.set_meta("command", command);
        sweep.set_meta("config", &common.config);
        sweep.set_meta("config_sha256", &self.config_sha256);
        sweep.set_meta("ddrf_version", env!("CARGO_PKG_VERSION"));
    }

    fn write(&mut self, name: &str, contents: &str) -> Outcome<()> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)?;
        info!("wrote {}", path.display());
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    fn write_csv(&mut self, name: &str, sweep: &SweepResult) -> Outcome<()> {
        self.write(name, &sweep.to_csv_string())
    }

    fn finish<P: Serialize>(mut self, command: &str, common: &Common, params: &P) -> Outcome<()> {
        let manifest_path = self.out_dir.join("manifest.json");
        self.outputs.push(manifest_path.display().to_string());
        let manifest = Manifest {
            command,
            parameters: params,
            config: common.config.clone(),
            config_sha256: self.config_sha256.clone(),
            outputs: self.outputs.clone(),
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Internal(e.to_string()))?;
        fs::write(&manifest_path, json + "\n")?;
        for o in &self.outputs {
            println!("{o}");
        }
        Ok(())
    }
}

fn spectroscopy(args: &SpectroscopyArgs) -> Outcome<()> {
    let common = &args.common;
    let mut run = Run::start(common)?;
    let (nx, ny) = common.grid.unwrap_or((201, 201));
    if !(args.tau_us > 0.0) || args.n < 2 || !args.n.is_multiple_of(2) || args.rf_max_hz < args.rf_min_hz {
        return Err(Failure::Usage("need tau > 0, even n >= 2 and rf-max >= rf-min".into()));
    }
    let tau = args.tau_us * 1e-6;
    let mut template = SequenceParams::new(args.n, tau, hz(args.rabi_hz));
    template.dead_time = args.dead_time_us * 1e-6;
    let rf = linspace(hz(args.rf_min_hz), hz(args.rf_max_hz), nx);
    let phases: Vec<f64> =
        (0..ny).map(|k| -std::f64::consts::PI + std::f64::consts::TAU * k as f64 / ny as f64).collect();
    let bath = run.table.bath_model();
    let spins = run.table.spin_specs();
    let mut map = spectroscopy_sweep(
        &spins,
        &run.table.field()?,
        &run.table.constants(),
        (!args.no_bath).then_some(&bath),
        &rf,
        &phases,
        &template,
    )?;
    run.stamp(&mut map, "spectroscopy", common);
    run.write_csv("spectroscopy.csv", &map)?;
    if args.phase_frequency {
        run.write_csv("spectroscopy_wphi.csv", &phase_frequency_transform(&map, tau)?)?;
    }
    run.finish("spectroscopy", common, args)
}

fn rabi(args: &RabiArgs) -> Outcome<()> {
    let common = &args.common;
    let mut run = Run::start(common)?;
    let spin = run.table.spin(&args.spin)?;
    let mut pulses = args.n.clone();
    pulses.sort_unstable();
    pulses.dedup();
    let points = common.grid.map_or(401, |g| g.0);
    let offsets = linspace(hz(-args.span_hz), hz(args.span_hz), points);
    let mut scan = driving_time_scan(
        &spin,
        &run.table.field()?,
        &run.table.constants(),
        &pulses,
        args.drive_time_ms * 1e-3,
        hz(args.rabi_hz),
        &offsets,
        args.ac_stark,
    )?;
    run.stamp(&mut scan, "rabi", common);
    run.write_csv("rabi.csv", &scan)?;
    run.finish("rabi", common, args)
}

fn sensitivity_grid(grid: Option<(usize, usize)>) -> (Vec<u32>, Vec<f64>) {
    match grid {
        None => (ddrf_core::sensing::default_pulse_grid(), ddrf_core::sensing::default_time_grid()),
        Some((np, nt)) => {
            let pulses = (0..np.min(11)).map(|k| 4u32 << k).collect();
            let times = if nt == 1 { vec![1e-2] } else { logspace(1e-4, 1e-1, nt) };
            (pulses, times)
        }
    }
}

fn sensitivity(args: &SensitivityArgs) -> Outcome<()> {
    let common = &args.common;
    let mut run = Run::start(common)?;
    let deltas = if args.delta_hz.is_empty() {
        if !(args.delta_min_hz > 0.0 && args.delta_max_hz >= args.delta_min_hz && args.n_delta > 0) {
            return Err(Failure::Usage("hyperfine range must be positive and ordered".into()));
        }
        logspace(args.delta_min_hz, args.delta_max_hz, args.n_delta)
    } else {
        let mut d = args.delta_hz.clone();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    };
    if let Some(bad) = deltas.iter().find(|&&d| !(d > 0.0)) {
        return Err(Failure::Usage(format!("hyperfine coupling must be positive, got {bad} Hz")));
    }
    let (pulses, times) = sensitivity_grid(common.grid);
    let policy = run.table.amplitude_policy();
    let coherence = run.table.coherence_model();
    let omega_desired = args.rabi_hz.map_or(policy.omega_abs_cap, hz);
    let protocols = [Protocol::Resonant, Protocol::Detuned];
    let mut best: Vec<SensingPoint> = Vec::with_capacity(deltas.len() * 2);
    for &d in &deltas {
        for p in protocols {
            let mut opt = optimize_sensitivity(hz(d), &pulses, &times, &policy, &coherence, p, omega_desired)?;
            if args.maps {
                run.stamp(&mut opt.map, "sensitivity", common);
                let name = format!("sensitivity_{}_{:.3}Hz.csv", protocol_name(p), d);
                run.write_csv(&name, &opt.map)?;
            }
            best.push(opt.best);
        }
    }
    let x = Axis::new("delta", "Hz", deltas.clone());
    let y = Axis::new("protocol", "", vec![0.0, 1.0]);
    let mut summary = SweepResult::new(x, y)?;
    let layer = |f: fn(&SensingPoint) -> f64| best.iter().map(f).collect::<Vec<f64>>();
    summary.push_layer("v_min", "spins/sqrt(Hz)", layer(|p| p.v_min))?;
    summary.push_layer("n_pulses", "", layer(|p| p.n_pulses as f64))?;
    summary.push_layer("t", "s", layer(|p| p.t))?;
    summary.push_layer("tau", "s", layer(|p| p.tau))?;
    summary.push_layer("delta1", "Hz", layer(|p| to_hz(p.delta1)))?;
    summary.push_layer("omega", "Hz", layer(|p| to_hz(p.omega_set)))?;
    summary.push_layer("omega_tilde", "Hz", layer(|p| to_hz(p.omega_tilde)))?;
    summary.set_meta("protocol_codes", "0 = resonant, 1 = detuned");
    summary.set_meta("n_pulse_values", pulses.len());
    summary.set_meta("t_min_s", times[0]);
    summary.set_meta("t_max_s", times[times.len() - 1]);
    summary.set_meta("n_time_values", times.len());
    summary.set_meta("omega_desired_hz", to_hz(omega_desired));
    summary.set_meta("omega_tau_cap", policy.omega_tau_cap);
    summary.set_meta("omega_abs_cap_hz", to_hz(policy.omega_abs_cap));
    run.stamp(&mut summary, "sensitivity", common);
    run.write_csv("sensitivity_vs_delta.csv", &summary)?;
    run.finish("sensitivity", common, args)
}

fn protocol_name(p: Protocol) -> &'static str {
    match p {
        Protocol::Resonant => "resonant",
        Protocol::Detuned => "detuned",
    }
}

#[derive(Serialize)]
struct RegisterSummary {
    target: String,
    register: Vec<String>,
    contribution: String,
    feasible_cells: usize,
    total_cells: usize,
    best_n: Option<u32>,
    best_tau_s: Option<f64>,
    best_gate_time_s: Option<f64>,
    best_rabi_hz: Option<f64>,
    best_fidelity: Option<f64>,
    lambda_t2: Option<f64>,
    lambda_bath: Option<f64>,
}

fn summarize(target: &str, register: &[String], contribution: &str, m: &FidelityMap) -> RegisterSummary {
    let feasible = m.map.layer("feasible").map_or(0, |l| l.values.iter().filter(|&&v| v > 0.5).count());
    let (nx, ny) = m.map.shape();
    RegisterSummary {
        target: target.to_string(),
        register: register.to_vec(),
        contribution: contribution.to_string(),
        feasible_cells: feasible,
        total_cells: nx * ny,
        best_n: m.best.map(|b| b.0),
        best_tau_s: m.best.map(|b| b.1),
        best_gate_time_s: m.best.map(|b| 2.0 * b.0 as f64 * b.1),
        best_rabi_hz: m.best.map(|b| to_hz(b.2.omega_set)),
        best_fidelity: m.best.map(|b| b.2.fidelity),
        lambda_t2: m.best.map(|b| b.2.lambda_t2),
        lambda_bath: m.best.map(|b| b.2.lambda_bath),
    }
}

fn register(args: &RegisterArgs) -> Outcome<()> {
    let common = &args.common;
    let mut run = Run::start(common)?;
    let labels = (!args.register.is_empty()).then_some(args.register.as_slice());
    let cfg = run.table.register_config(labels)?;
    cfg.target_index(&args.target)?;
    let (np, nt) = common.grid.unwrap_or((41, 41));
    if args.n_min < 2 || args.n_max < args.n_min || !(args.tau_min_us > 0.0 && args.tau_max_us >= args.tau_min_us) {
        return Err(Failure::Usage("need 2 <= n-min <= n-max and 0 < tau-min <= tau-max".into()));
    }
    let mut pulses: Vec<u32> = linspace(args.n_min as f64, args.n_max as f64, np)
        .into_iter()
        .map(|n| 2 * ((n / 2.0).round() as u32).max(1))
        .collect();
    pulses.dedup();
    let taus = linspace(args.tau_min_us * 1e-6, args.tau_max_us * 1e-6, nt);
    let field = run.table.field()?;
    let constants = run.table.constants();
    let names: Vec<String> = cfg.register_spins.iter().map(|s| s.label.clone()).collect();
    let channels = Channels { echo: !args.no_echo, ..Channels::FULL };
    let mut main = fidelity_map(&cfg, &args.target, &pulses, &taus, &field, &constants, channels)?;
    run.stamp(&mut main.map, "register", common);
    let stem = format!("register_{}", args.target);
    run.write_csv(&format!("{stem}.csv"), &main.map)?;
    let mut summaries = vec![summarize(&args.target, &names, if args.no_echo { "t2_star" } else { "echo" }, &main)];
    if args.contributions {
        for (k, (c, mut m)) in
            contribution_maps(&cfg, &args.target, &pulses, &taus, &field, &constants)?.into_iter().enumerate()
        {
            run.stamp(&mut m.map, "register", common);
            run.write_csv(&format!("{stem}_{}_{}.csv", (b'a' + k as u8) as char, c.name()), &m.map)?;
            summaries.push(summarize(&args.target, &names, c.name(), &m));
        }
    }
    let json = serde_json::to_string_pretty(&summaries).map_err(|e| Failure::Internal(e.to_string()))?;
    run.write(&format!("{stem}_summary.json"), &(json + "\n"))?;
    let infeasible = main.best.is_none();
    run.finish("register", common, args)?;
    if infeasible {
        return Err(Failure::Infeasible(format!("no feasible (N, tau) cell for target {}", args.target)));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Spectroscopy(a) => spectroscopy(a),
        Command::Rabi(a) => rabi(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Register(a) => register(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("infeasible: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
