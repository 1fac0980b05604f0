//! `beamtrack`: simulate beam tracking experiments, compute design
//! quantities, and replay recorded angle traces.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

mod config;
mod output;
mod presets;

use std::path::{Path, PathBuf};

use beamtrack_core::channel::elevation_ignored;
use beamtrack_core::design::{
    beam_locking_time, effective_rate, estimate_kappa, outage_pilot_period, overhead_reduction,
    sweep_time, DesignInputs,
};
use beamtrack_core::harness::{run_experiment, sample_path, snr_normalization, summarize_rates};
use clap::{Args, Parser, Subcommand};

use config::FileConfig;
use output::{fmt, AggregateRow};
use presets::Variant;

#[derive(Parser)]
#[command(
    name = "beamtrack",
    version,
    about = "Beam tracking simulator for mobile mmWave arrays",
    after_help = presets::preset_help()
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a preset or a config file and write CSV artifacts
    #[command(after_help = presets::preset_help())]
    Simulate(SimulateArgs),
    /// Print pilot-period and overhead design quantities
    Design(DesignArgs),
    /// Run the configured trackers against a recorded angle trace
    Trace(TraceArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in experiment preset (see list below)
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Experiment config file (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: ./out/<preset or config name>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the Monte Carlo run count
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    n_elements: usize,
    /// Angular rate diffusion intensity Q
    #[arg(long)]
    q_rad2_s3: f64,
    /// Pilot refresh window the drift accumulates over
    #[arg(long)]
    t_lr_ms: f64,
    /// Reference arrival angle
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    phi_rad: f64,
    /// Residual drift ratio of continuous tracking (1 = discrete)
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Target mean power ratio for the locking time
    #[arg(long, default_value_t = 0.5)]
    mu_zeta: f64,
    /// Outage probability budget
    #[arg(long, default_value_t = 0.05)]
    p_out: f64,
    /// Post-combining SNR in dB
    #[arg(long, default_value_t = 20.0)]
    snr_db: f64,
    /// Fixed-rate threshold in bits/s/Hz [default: half the peak rate]
    #[arg(long)]
    rate_fixed_bps_hz: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pilot_symbol_us: f64,
    /// Codebook refinement levels for the sweep-time term
    #[arg(long, default_value_t = 1)]
    codebook_levels: u32,
    /// Pilot period for the effective-rate line [default: T_o continuous]
    #[arg(long)]
    pilot_period_ms: Option<f64>,
    /// Also write the quantities as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Angle trace CSV: t_s,phi_rad[,theta_rad]
    #[arg(long)]
    trace: PathBuf,
    /// Experiment config file; its source section is replaced by the trace
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: ./out/trace-<trace name>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the Monte Carlo run count
    #[arg(long)]
    runs: Option<usize>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Design(a) => cmd_design(a),
        Cmd::Trace(a) => cmd_trace(a),
    };
    let code = match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    };
    std::process::exit(code);
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    match (&a.preset, &a.config) {
        (Some(name), None) => {
            let mut variants = presets::expand(name).map_err(usage)?;
            for v in &mut variants {
                apply_overrides(&mut v.file, a.seed, a.runs);
            }
            let out = a.out.unwrap_or_else(|| PathBuf::from("out").join(name));
            run_variants(&out, &variants, Path::new("."), true)
        }
        (None, Some(cfg_path)) => {
            let mut file = FileConfig::load(cfg_path).map_err(usage)?;
            apply_overrides(&mut file, a.seed, a.runs);
            let name = stem(cfg_path);
            let out = a.out.unwrap_or_else(|| PathBuf::from("out").join(&name));
            let base = cfg_path.parent().unwrap_or(Path::new(".")).to_path_buf();
            let variants = vec![Variant { name, file, design: None }];
            run_variants(&out, &variants, &base, false)
        }
        _ => Err(usage("exactly one of --preset or --config is required")),
    }
}

fn apply_overrides(file: &mut FileConfig, seed: Option<u64>, runs: Option<usize>) {
    if let Some(s) = seed {
        file.run.master_seed = s;
    }
    if let Some(r) = runs {
        file.run.n_runs = r;
    }
}

/// Run every variant and write its artifact directory; presets nest one
/// directory per variant and get an aggregate CSV at the root.
fn run_variants(
    out_root: &Path,
    variants: &[Variant],
    base_dir: &Path,
    nested: bool,
) -> Result<(), CliError> {
    let mut aggregate = Vec::new();
    for v in variants {
        let rc = v.file.to_run_config(base_dir).map_err(usage)?;
        let dir = if nested { out_root.join(&v.name) } else { out_root.to_path_buf() };
        std::fs::create_dir_all(&dir).map_err(runtime)?;
        output::write_manifest(&dir, &v.file).map_err(runtime)?;

        let series = run_experiment(&rc).map_err(runtime)?;
        output::write_series_dir(&dir, &series).map_err(runtime)?;

        let path = sample_path(&rc).map_err(runtime)?;
        let rho = snr_normalization(&rc, rc.array.n_elements);
        output::write_path_csv(&dir, &path, rho).map_err(runtime)?;

        for s in &series {
            let kappa_hat = estimate_kappa(&s.slope_pairs);
            let rates = match &v.design {
                Some((d, t)) => Some(summarize_rates(s, d, *t).map_err(runtime)?),
                None => None,
            };
            aggregate.push(AggregateRow {
                variant: v.name.clone(),
                label: s.label.clone(),
                snr_avg_db: s.snr_avg_db,
                time_avg_mse: s.time_averaged_mse(),
                diverged_fraction: s.diverged_fraction,
                kappa_hat,
                rates,
            });
        }
        println!(
            "wrote {} ({} trackers, {} runs)",
            dir.display(),
            rc.trackers.len(),
            rc.n_runs
        );
    }
    if nested {
        output::write_aggregate(&out_root.join("aggregate.csv"), &aggregate).map_err(runtime)?;
    }
    output::write_plot_stub(out_root).map_err(runtime)?;
    Ok(())
}

fn cmd_design(a: DesignArgs) -> Result<(), CliError> {
    let mut d = DesignInputs::new(a.n_elements, a.q_rad2_s3, a.t_lr_ms * 1e-3);
    d.phi_ref = a.phi_rad;
    d.kappa = a.kappa;
    d.mu_zeta = a.mu_zeta;
    d.p_out = a.p_out;
    d.rho = 10f64.powf(a.snr_db / 10.0);
    d.rate_fixed = a.rate_fixed_bps_hz.unwrap_or_else(|| 0.5 * (1.0 + d.rho).log2());
    d.t_pilot_symbol = a.pilot_symbol_us * 1e-6;
    d.codebook_levels = a.codebook_levels;
    d.validate().map_err(usage)?;

    let discrete = DesignInputs { kappa: 1.0, ..d.clone() };
    let t_b = beam_locking_time(&discrete).map_err(runtime)?;
    let t_l = beam_locking_time(&d).map_err(runtime)?;
    let t_o_d = outage_pilot_period(&discrete).map_err(runtime)?;
    let t_o_cd = outage_pilot_period(&d).map_err(runtime)?;
    let t_sw = sweep_time(&d);
    let t_frame = a.pilot_period_ms.map_or(t_o_cd, |ms| ms * 1e-3);
    let r_e = effective_rate(&d, t_frame, d.rate_fixed).map_err(runtime)?;

    let rows: [(&str, f64, &str); 7] = [
        ("beam coherence time T_b", t_b * 1e3, "ms"),
        ("beam locking time T_L", t_l * 1e3, "ms"),
        ("outage pilot period T_o (discrete)", t_o_d * 1e3, "ms"),
        ("outage pilot period T_o (continuous)", t_o_cd * 1e3, "ms"),
        ("pilot overhead reduction", overhead_reduction(d.kappa) * 100.0, "%"),
        ("beam sweep time T_sw", t_sw * 1e3, "ms"),
        ("effective rate R_e", r_e, "bits/s/Hz"),
    ];
    for (name, value, unit) in rows {
        println!("{name:<38}{value:.6} {unit}");
    }
    println!("(effective rate evaluated at T = {:.6} ms)", t_frame * 1e3);

    if let Some(csv_path) = a.out {
        if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(runtime)?;
        }
        let mut text = String::from("quantity,value,unit\n");
        for (name, value, unit) in rows {
            text.push_str(&format!("{name},{},{unit}\n", fmt(value)));
        }
        std::fs::write(&csv_path, text).map_err(runtime)?;
        println!("wrote {}", csv_path.display());
    }
    Ok(())
}

fn cmd_trace(a: TraceArgs) -> Result<(), CliError> {
    let mut file = FileConfig::load(&a.config).map_err(usage)?;
    apply_overrides(&mut file, a.seed, a.runs);
    let trace_abs = a
        .trace
        .canonicalize()
        .map_err(|e| usage(format!("cannot read trace file {}: {e}", a.trace.display())))?;
    file.source = Some(config::SourceSection {
        kind: config::SourceKind::Trace,
        speed_mps: None,
        radius_m: None,
        path: Some(trace_abs.to_string_lossy().into_owned()),
    });

    let name = format!("trace-{}", stem(&a.trace));
    let out = a.out.unwrap_or_else(|| PathBuf::from("out").join(&name));
    let rc = file.to_run_config(Path::new("/")).map_err(usage)?;
    if let beamtrack_core::channel::TrajectorySource::Trace(data) = &rc.source {
        if elevation_ignored(&rc.array, data.elevation.is_some()) {
            log::warn!(
                "trace {} has an elevation column; the linear array ignores it",
                a.trace.display()
            );
        }
    }
    let variants = vec![Variant { name, file, design: None }];
    run_variants(&out, &variants, Path::new("/"), false)
}
