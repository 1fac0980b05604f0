//! Built-in experiment presets.
//!
//! Each preset expands to one or more variants; a variant is a complete
//! config file plus, where effective-rate columns make sense, the design
//! inputs used to derive its pilot period.

use beamtrack_core::design::{outage_pilot_period, DesignInputs};

use crate::config::{
    AlgorithmKind, ArraySection, ChannelSection, ConventionKind, FileConfig, GeometryKind,
    ModeKind, RunSection, SourceKind, SourceSection, TrackerSection,
};

pub struct Variant {
    pub name: String,
    pub file: FileConfig,
    /// Design context for rate columns in the aggregate CSV.
    pub design: Option<(DesignInputs, f64)>,
}

pub const PRESETS: [(&str, &str); 8] = [
    (
        "fig2-illustrative",
        "noiseless drive-by at 100 km/h: continuous tracking holds the peak, discrete decays between pilots",
    ),
    (
        "fig6-aoa-tracking",
        "one Brownian sample path with EKF estimates overlaid, N = 16 and 64",
    ),
    (
        "fig7-mse-array",
        "tracking MSE over time for EKF and FBT pairs at N = 16 and 64",
    ),
    (
        "fig8-snr-vs-T",
        "average SNR of the EKF pair as the pilot period sweeps 0.5 to 10 ms",
    ),
    (
        "table1-overhead",
        "estimated drift ratio and pilot overhead reduction per array size",
    ),
    (
        "fig11-cdf-snr",
        "SNR distribution at the outage-designed pilot period, N = 256",
    ),
    (
        "fig13-quantization",
        "continuous EKF tracking with 1 to 3 bit phase shifters against ideal",
    ),
    (
        "fig14-effective-rate",
        "pilot and sweep overhead folded into achievable rate per array size",
    ),
];

/// Multi-line list for `--help`.
pub fn preset_help() -> String {
    let mut s = String::from("Presets:\n");
    for (name, blurb) in PRESETS {
        s.push_str(&format!("  {name:<22}{blurb}\n"));
    }
    s
}

const PHI_BROADSIDE: f64 = std::f64::consts::FRAC_PI_2;

fn file(
    n_elements: usize,
    q: f64,
    phi0: f64,
    snr_db: f64,
    convention: ConventionKind,
    duration_ms: f64,
    n_runs: usize,
    trackers: Vec<TrackerSection>,
) -> FileConfig {
    FileConfig {
        array: ArraySection {
            geometry: GeometryKind::Ula,
            n_elements,
            spacing_wavelengths: 0.5,
            phase_bits: None,
            fixed_elevation: false,
        },
        channel: ChannelSection {
            q_rad2_s3: q,
            phi0_rad: phi0,
            phidot0_rad_s: 0.0,
            snr_db,
            snr_convention: convention,
            elevation: None,
        },
        source: None,
        run: RunSection { duration_ms, n_runs, master_seed: 0, metrics_tick_us: None },
        trackers,
    }
}

fn tracker(algorithm: AlgorithmKind, mode: ModeKind, t_ms: f64, label: &str) -> TrackerSection {
    TrackerSection {
        algorithm,
        mode,
        pilot_period_ms: t_ms,
        n_s: None,
        q_assumed_rad2_s3: None,
        snr_assumed_db: None,
        p0_angle_rad2: None,
        p0_rate_rad2_s2: None,
        rate_init_rad_s: None,
        label: Some(label.to_string()),
    }
}

fn ekf_pair(t_ms: f64) -> Vec<TrackerSection> {
    vec![
        tracker(AlgorithmKind::Ekf, ModeKind::Cd, t_ms, "ekf_cd"),
        tracker(AlgorithmKind::Ekf, ModeKind::D, t_ms, "ekf_d"),
    ]
}

/// Outage-designed pilot period and the run length trimmed to a whole
/// number of those periods (the metrics grid needs whole pilot intervals).
fn designed_period(d: &DesignInputs) -> Result<(f64, f64), String> {
    let t = outage_pilot_period(d).map_err(|e| e.to_string())?;
    let periods = (0.1 / t).floor().max(1.0);
    Ok((t, periods * (t * 1e3)))
}

fn drift_design(n_elements: usize, kappa: f64, t_pilot_symbol: f64) -> DesignInputs {
    let mut d = DesignInputs::new(n_elements, 1e3, 0.1);
    d.kappa = kappa;
    d.rho = n_elements as f64 * 10f64.powf(0.8);
    d.rate_fixed = 0.5 * (1.0 + d.rho).log2();
    d.t_pilot_symbol = t_pilot_symbol;
    d.codebook_levels = 2;
    d
}

pub fn expand(name: &str) -> Result<Vec<Variant>, String> {
    match name {
        "fig2-illustrative" => {
            let rate = (100.0 / 3.6) / 20.0;
            let mut trackers = Vec::new();
            for (t_ms, tag) in [(10.0, "10ms"), (50.0, "50ms")] {
                for (mode, m) in [(ModeKind::Cd, "cd"), (ModeKind::D, "d")] {
                    let mut tr = tracker(
                        AlgorithmKind::Ekf,
                        mode,
                        t_ms,
                        &format!("ekf_{m}_{tag}"),
                    );
                    tr.rate_init_rad_s = Some(rate);
                    trackers.push(tr);
                }
            }
            let mut f = file(64, 0.0, std::f64::consts::FRAC_PI_4, 200.0,
                ConventionKind::Total, 100.0, 1, trackers);
            f.source = Some(SourceSection {
                kind: SourceKind::ConstantRate,
                speed_mps: Some(100.0 / 3.6),
                radius_m: Some(20.0),
                path: None,
            });
            Ok(vec![Variant { name: "drive-by".into(), file: f, design: None }])
        }
        "fig6-aoa-tracking" => Ok([16, 64]
            .into_iter()
            .map(|n| {
                let mut f = file(n, 1e4, PHI_BROADSIDE, 20.0, ConventionKind::Total,
                    100.0, 1, ekf_pair(2.5));
                f.run.master_seed = 7;
                Variant { name: format!("n{n}"), file: f, design: None }
            })
            .collect()),
        "fig7-mse-array" => {
            let mut out = Vec::new();
            for n in [16, 64] {
                out.push(Variant {
                    name: format!("ekf_n{n}"),
                    file: file(n, 1e4, PHI_BROADSIDE, 20.0, ConventionKind::Total,
                        100.0, 500, ekf_pair(1.0)),
                    design: None,
                });
                out.push(Variant {
                    name: format!("fbt_n{n}"),
                    file: file(n, 1e4, 0.75 * std::f64::consts::PI, 20.0,
                        ConventionKind::Total, 100.0, 500,
                        vec![
                            tracker(AlgorithmKind::Fbt, ModeKind::Cd, 1.0, "fbt_cd"),
                            tracker(AlgorithmKind::Fbt, ModeKind::D, 1.0, "fbt_d"),
                        ]),
                    design: None,
                });
            }
            Ok(out)
        }
        "fig8-snr-vs-T" => Ok([0.5, 1.0, 2.0, 5.0, 10.0]
            .into_iter()
            .map(|t_ms| Variant {
                name: format!("t{}us", (t_ms * 1e3) as u64),
                file: file(64, 1e3, PHI_BROADSIDE, 20.0, ConventionKind::Total,
                    100.0, 500, ekf_pair(t_ms)),
                design: None,
            })
            .collect()),
        "table1-overhead" => Ok([16, 64, 256]
            .into_iter()
            .map(|n| Variant {
                name: format!("n{n}"),
                file: file(n, 1e3, PHI_BROADSIDE, 8.0, ConventionKind::PerElement,
                    100.0, 500,
                    vec![tracker(AlgorithmKind::Ml, ModeKind::Cd, 1.0, "ml_cd")]),
                design: Some((drift_design(n, 0.12, 1e-6), 1e-3)),
            })
            .collect()),
        "fig11-cdf-snr" => {
            let mut out = Vec::new();
            for (kappa, mode, m) in [(0.12, ModeKind::Cd, "cd"), (1.0, ModeKind::D, "d")] {
                let d = drift_design(256, kappa, 1e-6);
                let (t, duration_ms) = designed_period(&d)?;
                let mut f = file(256, 1e3, PHI_BROADSIDE, 8.0, ConventionKind::PerElement,
                    duration_ms, 500,
                    vec![tracker(AlgorithmKind::Ml, mode, t * 1e3, &format!("ml_{m}"))]);
                f.run.master_seed = 1;
                out.push(Variant { name: format!("ml_{m}"), file: f, design: Some((d, t)) });
            }
            Ok(out)
        }
        "fig13-quantization" => Ok([None, Some(3), Some(2), Some(1)]
            .into_iter()
            .map(|bits| {
                let mut f = file(64, 1e3, PHI_BROADSIDE, 20.0, ConventionKind::Total,
                    100.0, 500,
                    vec![tracker(AlgorithmKind::Ekf, ModeKind::Cd, 1.0, "ekf_cd")]);
                f.array.phase_bits = bits;
                let name = match bits {
                    None => "ideal".to_string(),
                    Some(b) => format!("b{b}"),
                };
                Variant { name, file: f, design: None }
            })
            .collect()),
        "fig14-effective-rate" => {
            let mut out = Vec::new();
            for n in [16, 64, 256] {
                for (ts, tag) in [(1e-6, "1us"), (4e-5, "40us")] {
                    let d = drift_design(n, 0.12, ts);
                    let (t, duration_ms) = designed_period(&d)?;
                    let f = file(n, 1e3, PHI_BROADSIDE, 8.0, ConventionKind::PerElement,
                        duration_ms, 500,
                        vec![tracker(AlgorithmKind::Ml, ModeKind::Cd, t * 1e3, "ml_cd")]);
                    out.push(Variant {
                        name: format!("n{n}_ts{tag}"),
                        file: f,
                        design: Some((d, t)),
                    });
                }
            }
            Ok(out)
        }
        other => Err(format!(
            "unknown preset {other:?}; `beamtrack --help` lists the available presets"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn every_preset_expands_to_valid_run_configs() {
        for (name, _) in PRESETS {
            let variants = expand(name).unwrap();
            assert!(!variants.is_empty(), "{name} expands to nothing");
            for v in &variants {
                let rc = v.file.to_run_config(Path::new(".")).unwrap_or_else(|e| {
                    panic!("{name}/{}: {e}", v.name);
                });
                assert!(rc.n_runs >= 1);
            }
        }
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(expand("fig99-made-up").is_err());
    }

    #[test]
    fn help_text_names_every_preset() {
        let help = preset_help();
        for (name, _) in PRESETS {
            assert!(help.contains(name), "missing {name}");
        }
    }

    #[test]
    fn designed_periods_fill_the_run_with_whole_pilot_intervals() {
        for v in expand("fig11-cdf-snr").unwrap() {
            let (_, t) = v.design.unwrap();
            let k = v.file.run.duration_ms / (t * 1e3);
            assert!((k - k.round()).abs() < 1e-9, "{k} not integral");
            assert!(v.file.run.duration_ms <= 100.0 + 1e-9);
        }
    }
}
