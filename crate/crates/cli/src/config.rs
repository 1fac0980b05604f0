//! Experiment file format.
//!
//! A run is described by one TOML file with `[array]`, `[channel]`, an
//! optional `[source]`, `[run]`, and one or more `[[trackers]]` tables.
//! Every physical key carries its unit in the name (`pilot_period_ms`,
//! `q_rad2_s3`) so a config can be read without consulting the docs.
//!
//! The same schema is written back out as the run manifest, with the seed
//! and run count fully resolved, so feeding a manifest to `--config`
//! reproduces the run exactly.

use std::path::Path;

use beamtrack_core::array::{ArrayConfig, ArrayGeometry};
use beamtrack_core::channel::{
    ingest_trace, ChannelConfig, ElevationPlane, SnrSpec, TrajectorySource,
};
use beamtrack_core::harness::RunConfig;
use beamtrack_core::trackers::{TrackerAlgorithm, TrackerConfig, TrackerMode};
use serde::{Deserialize, Serialize};

/// Top level of the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub array: ArraySection,
    pub channel: ChannelSection,
    /// Defaults to the Brownian model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSection>,
    pub run: RunSection,
    pub trackers: Vec<TrackerSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub geometry: GeometryKind,
    /// Total element count; must be a perfect square for `upa`.
    pub n_elements: usize,
    #[serde(default = "default_spacing")]
    pub spacing_wavelengths: f64,
    /// Phase shifter resolution in bits; unset means ideal phases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_bits: Option<u32>,
    /// Keep the elevation beam frozen at its initial angle (UPA only).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fixed_elevation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Ula,
    Upa,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// Angular rate diffusion intensity Q.
    pub q_rad2_s3: f64,
    pub phi0_rad: f64,
    #[serde(default)]
    pub phidot0_rad_s: f64,
    pub snr_db: f64,
    /// `total` fixes the post-combining SNR; `per_element` scales it by N.
    #[serde(default = "default_convention")]
    pub snr_convention: ConventionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation: Option<ElevationSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionKind {
    Total,
    PerElement,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElevationSection {
    pub theta0_rad: f64,
    #[serde(default)]
    pub thetadot0_rad_s: f64,
    /// Elevation diffusion intensity; defaults to the azimuth value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_rad2_s3: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Brownian,
    ConstantRate,
    Trace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_duration_ms")]
    pub duration_ms: f64,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Metrics grid step; defaults to the finest pilot subdivision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_tick_us: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSection {
    pub algorithm: AlgorithmKind,
    pub mode: ModeKind,
    pub pilot_period_ms: f64,
    /// Metric samples per pilot interval when the grid step is derived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<u32>,
    /// Diffusion intensity the filter assumes; defaults to the channel's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_assumed_rad2_s3: Option<f64>,
    /// Post-combining SNR the filter assumes, in dB; defaults to the
    /// channel's resolved value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_assumed_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0_angle_rad2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0_rate_rad2_s2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_init_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Ekf,
    Fbt,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Cd,
    D,
}

fn default_spacing() -> f64 {
    0.5
}

fn default_convention() -> ConventionKind {
    ConventionKind::Total
}

fn default_duration_ms() -> f64 {
    100.0
}

fn default_n_runs() -> usize {
    500
}

impl FileConfig {
    /// Parse a config file. Parse errors keep toml's line and column info.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Resolve into a runnable config. Trace paths are taken relative to
    /// `base_dir` (normally the config file's directory) and ingested here,
    /// so any trace format problem surfaces before the run starts.
    pub fn to_run_config(&self, base_dir: &Path) -> Result<RunConfig, String> {
        let geometry = match self.array.geometry {
            GeometryKind::Ula => ArrayGeometry::Ula,
            GeometryKind::Upa => ArrayGeometry::Upa,
        };
        let mut array =
            ArrayConfig::new(geometry, self.array.n_elements, self.array.spacing_wavelengths)
                .map_err(|e| e.to_string())?;
        if let Some(bits) = self.array.phase_bits {
            array = array.with_phase_bits(bits);
        }
        if self.array.fixed_elevation {
            array = array.with_fixed_elevation();
        }

        let snr = match self.channel.snr_convention {
            ConventionKind::Total => SnrSpec::TotalDb(self.channel.snr_db),
            ConventionKind::PerElement => SnrSpec::PerElementDb(self.channel.snr_db),
        };
        let channel = ChannelConfig {
            q_intensity: self.channel.q_rad2_s3,
            phi0: self.channel.phi0_rad,
            phidot0: self.channel.phidot0_rad_s,
            snr,
            elevation: self.channel.elevation.as_ref().map(|e| ElevationPlane {
                theta0: e.theta0_rad,
                thetadot0: e.thetadot0_rad_s,
                q_intensity: e.q_rad2_s3,
            }),
        };

        let source = match &self.source {
            None => TrajectorySource::Brownian,
            Some(s) => match s.kind {
                SourceKind::Brownian => TrajectorySource::Brownian,
                SourceKind::ConstantRate => {
                    let speed = s
                        .speed_mps
                        .ok_or("source kind constant_rate needs speed_mps")?;
                    let radius = s
                        .radius_m
                        .ok_or("source kind constant_rate needs radius_m")?;
                    TrajectorySource::ConstantRate { speed_mps: speed, radius_m: radius }
                }
                SourceKind::Trace => {
                    let rel = s.path.as_deref().ok_or("source kind trace needs path")?;
                    let full = base_dir.join(rel);
                    let data = ingest_trace(&full).map_err(|e| e.to_string())?;
                    TrajectorySource::Trace(data)
                }
            },
        };

        let mut trackers = Vec::with_capacity(self.trackers.len());
        for (i, t) in self.trackers.iter().enumerate() {
            let algorithm = match t.algorithm {
                AlgorithmKind::Ekf => TrackerAlgorithm::Ekf,
                AlgorithmKind::Fbt => TrackerAlgorithm::Fbt,
                AlgorithmKind::Ml => TrackerAlgorithm::Ml,
            };
            let mode = match t.mode {
                ModeKind::Cd => TrackerMode::ContinuousDiscrete,
                ModeKind::D => TrackerMode::Discrete,
            };
            let mut cfg = TrackerConfig::new(algorithm, mode, t.pilot_period_ms * 1e-3);
            if let Some(n_s) = t.n_s {
                cfg.n_s = n_s;
            }
            cfg.q_assumed = t.q_assumed_rad2_s3;
            cfg.rho = t.snr_assumed_db.map(|db| 10f64.powf(db / 10.0));
            cfg.p0 = match (t.p0_angle_rad2, t.p0_rate_rad2_s2) {
                (Some(a), Some(r)) => Some([a, r]),
                (None, None) => None,
                _ => {
                    return Err(format!(
                        "trackers[{i}]: p0_angle_rad2 and p0_rate_rad2_s2 must be set together"
                    ));
                }
            };
            cfg.rate_init = t.rate_init_rad_s.unwrap_or(0.0);
            cfg.label = t.label.clone();
            trackers.push(cfg);
        }

        let mut run = RunConfig::new(array, channel, trackers);
        run.source = source;
        run.duration = self.run.duration_ms * 1e-3;
        run.n_runs = self.run.n_runs;
        run.master_seed = self.run.master_seed;
        run.metrics_tick = self.run.metrics_tick_us.map(|us| us * 1e-6);
        run.validate().map_err(|e| e.to_string())?;
        for t in &run.trackers {
            let label = t.label();
            if label.contains(',') {
                return Err(format!("tracker label {label:?} must not contain a comma"));
            }
        }
        Ok(run)
    }

    /// Serialize for the manifest, seed and run count already resolved.
    pub fn to_manifest_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"
[array]
geometry = "ula"
n_elements = 64

[channel]
q_rad2_s3 = 1e4
phi0_rad = 1.5707963267948966
snr_db = 20.0

[run]
duration_ms = 10.0
n_runs = 3

[[trackers]]
algorithm = "ekf"
mode = "cd"
pilot_period_ms = 1.0
"#
    }

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let fc: FileConfig = toml::from_str(minimal()).unwrap();
        let rc = fc.to_run_config(Path::new(".")).unwrap();
        assert_eq!(rc.array.n_elements, 64);
        assert_eq!(rc.array.spacing, 0.5);
        assert_eq!(rc.n_runs, 3);
        assert_eq!(rc.trackers[0].n_s, 10);
        assert!((rc.duration - 0.01).abs() < 1e-12);
        assert_eq!(rc.source, TrajectorySource::Brownian);
        assert_eq!(rc.channel.snr, SnrSpec::TotalDb(20.0));
    }

    #[test]
    fn manifest_round_trips_to_the_same_run_config() {
        let fc: FileConfig = toml::from_str(minimal()).unwrap();
        let text = fc.to_manifest_toml();
        let back: FileConfig = toml::from_str(&text).unwrap();
        let a = fc.to_run_config(Path::new(".")).unwrap();
        let b = back.to_run_config(Path::new(".")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position_info() {
        let bad = minimal().replace("snr_db", "snr_dbm");
        let err = toml::from_str::<FileConfig>(&bad).unwrap_err().to_string();
        assert!(err.contains("snr_dbm"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn half_specified_initial_covariance_is_rejected() {
        let bad = format!("{}p0_angle_rad2 = 1e-6\n", minimal());
        let fc: FileConfig = toml::from_str(&bad).unwrap();
        let err = fc.to_run_config(Path::new(".")).unwrap_err();
        assert!(err.contains("p0_rate_rad2_s2"), "{err}");
    }

    #[test]
    fn per_element_convention_maps_to_the_scaled_spec() {
        let text = minimal().replace(
            "snr_db = 20.0",
            "snr_db = 16.0\nsnr_convention = \"per_element\"",
        );
        let fc: FileConfig = toml::from_str(&text).unwrap();
        let rc = fc.to_run_config(Path::new(".")).unwrap();
        assert_eq!(rc.channel.snr, SnrSpec::PerElementDb(16.0));
    }
}
