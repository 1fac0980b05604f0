//! Monte Carlo experiment engine.
//!
//! An experiment replays `n_runs` independent channel realizations through
//! every configured tracker and averages per-tick metrics across runs. Two
//! reproducibility rules shape the implementation:
//!
//! * Common random numbers. Within a run, every tracker sees the same
//!   trajectory and the same pilot noise. Noise is pre-drawn once per grid
//!   tick, so trackers with different pilot periods still share draws at
//!   coincident pilot instants, and comparisons between trackers are paired.
//! * Deterministic aggregation. Runs execute in parallel, but each run has
//!   its own counter-derived RNG streams and the partial results are folded
//!   in run-index order, so output is bit-identical for a given master seed
//!   regardless of thread count.
//!
//! The angle-error metric is the unwrapped azimuth difference. Estimates are
//! unwrapped by construction, so a tracker that loses the target keeps a
//! large squared error instead of aliasing back near zero; a run whose error
//! exceeds pi at any tick is additionally counted in `diverged_fraction` but
//! never dropped from the averages.

use crate::array::{signal_part, ArrayConfig};
use crate::channel::{
    draw_unit_noise, gen_trajectory, measure_with_noise, AoAState, ChannelConfig,
    TrajectorySource,
};
use crate::design::{self, DesignInputs};
use crate::error::{Error, Result};
use crate::trackers::{pilot_stride, TrackPoint, TrackerConfig, TrackerMode};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub array: ArrayConfig,
    pub channel: ChannelConfig,
    pub source: TrajectorySource,
    pub trackers: Vec<TrackerConfig>,
    /// Tracked time per run, seconds.
    pub duration: f64,
    pub n_runs: usize,
    pub master_seed: u64,
    /// Metrics grid step; defaults to the finest tracker prediction step
    /// `pilot_period / n_s`.
    pub metrics_tick: Option<f64>,
}

impl RunConfig {
    pub fn new(array: ArrayConfig, channel: ChannelConfig, trackers: Vec<TrackerConfig>) -> Self {
        RunConfig {
            array,
            channel,
            source: TrajectorySource::Brownian,
            trackers,
            duration: 0.1,
            n_runs: 500,
            master_seed: 0,
            metrics_tick: None,
        }
    }

    /// Grid step the experiment will run on.
    pub fn resolved_tick(&self) -> f64 {
        self.metrics_tick.unwrap_or_else(|| {
            self.trackers
                .iter()
                .map(|t| t.pilot_period / t.n_s as f64)
                .fold(f64::INFINITY, f64::min)
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        self.channel.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::RunConfig(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.n_runs == 0 {
            return Err(Error::RunConfig("n_runs must be >= 1".into()));
        }
        if self.trackers.is_empty() {
            return Err(Error::RunConfig("at least one tracker is required".into()));
        }
        let dt = self.resolved_tick();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::RunConfig(format!("metrics tick must be positive, got {dt}")));
        }
        let mut labels = Vec::new();
        for tr in &self.trackers {
            tr.validate(&self.array)?;
            // Pilot instants must land on the metrics grid exactly.
            pilot_stride(tr.pilot_period, dt)?;
            let label = tr.label();
            if labels.contains(&label) {
                return Err(Error::RunConfig(format!(
                    "two trackers share the output label {label:?}"
                )));
            }
            labels.push(label);
        }
        Ok(())
    }
}

/// Post-beamforming SNR the channel presents to an N-element array under
/// the configured convention: a fixed total isolates the beamwidth effect,
/// a fixed per-element budget includes array gain.
pub fn snr_normalization(cfg: &RunConfig, n_elements: usize) -> f64 {
    cfg.channel.snr.resolve(n_elements)
}

/// Ensemble-averaged output for one tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub label: String,
    /// Metrics grid, seconds; t[0] = 0.
    pub t: Vec<f64>,
    /// Mean squared azimuth error per tick, rad^2.
    pub mse: Vec<f64>,
    /// Mean instantaneous post-beamforming SNR per tick, linear.
    pub snr_inst: Vec<f64>,
    /// Mean of 10 log10(gamma) over every (run, tick) sample, with gamma
    /// floored at rho * 1e-6 so a single deep fade cannot dominate.
    pub snr_avg_db: f64,
    /// Every per-sample SNR, sorted ascending; the empirical CDF base.
    pub snr_samples: Vec<f64>,
    /// Fraction of runs whose azimuth error ever exceeded pi.
    pub diverged_fraction: f64,
    /// (true rate, estimated rate) at every pilot, for kappa estimation.
    pub slope_pairs: Vec<(f64, f64)>,
}

impl MetricSeries {
    /// P(SNR <= gamma) over all (run, tick) samples.
    pub fn cdf_snr(&self, gamma: f64) -> f64 {
        if self.snr_samples.is_empty() {
            return 0.0;
        }
        let idx = self.snr_samples.partition_point(|s| *s <= gamma);
        idx as f64 / self.snr_samples.len() as f64
    }

    /// P(rate <= r) with rate = log2(1 + SNR).
    pub fn cdf_rate(&self, rate: f64) -> f64 {
        self.cdf_snr((2f64).powf(rate) - 1.0)
    }

    /// Spectral efficiency samples, sorted ascending.
    pub fn rate_samples(&self) -> Vec<f64> {
        self.snr_samples.iter().map(|g| (1.0 + g).log2()).collect()
    }

    pub fn time_averaged_mse(&self) -> f64 {
        mean(&self.mse)
    }

    pub fn time_averaged_snr(&self) -> f64 {
        mean(&self.snr_inst)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Achievable-rate summary for one tracker series at pilot period `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    /// Guaranteed rate under the outage contract: (1 - P_out) R_f.
    pub outage_rate: f64,
    /// Mean of log2(1 + gamma) over all samples.
    pub avg_rate: f64,
    /// The two above discounted by pilot and sweep overhead.
    pub effective_outage_rate: f64,
    pub effective_avg_rate: f64,
}

/// Rate figures for a finished series under the design operating point.
pub fn summarize_rates(series: &MetricSeries, d: &DesignInputs, t: f64) -> Result<RateSummary> {
    if series.snr_samples.is_empty() {
        return Err(Error::RunConfig("rate summary needs a nonempty series".into()));
    }
    let outage_rate = (1.0 - d.p_out) * d.rate_fixed;
    let avg_rate = mean(&series.rate_samples());
    Ok(RateSummary {
        outage_rate,
        avg_rate,
        effective_outage_rate: design::effective_rate(d, t, outage_rate)?,
        effective_avg_rate: design::effective_rate(d, t, avg_rate)?,
    })
}

const LANE_TRAJECTORY: u64 = 0;
const LANE_NOISE: u64 = 1;

fn lane_rng(master_seed: u64, run: usize, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run as u64 * 4 + lane);
    rng
}

/// Per-run, per-tracker raw series before ensemble averaging.
struct RunPartial {
    sq_err: Vec<f64>,
    gamma: Vec<f64>,
    diverged: bool,
    slope_pairs: Vec<(f64, f64)>,
}

fn single_run(cfg: &RunConfig, dt: f64, run: usize) -> Result<Vec<RunPartial>> {
    let mut traj_rng = lane_rng(cfg.master_seed, run, LANE_TRAJECTORY);
    let trajectory = gen_trajectory(&cfg.channel, &cfg.source, cfg.duration, dt, &mut traj_rng)?;
    let n_points = trajectory.states.len();

    let mut noise_rng = lane_rng(cfg.master_seed, run, LANE_NOISE);
    let noise: Vec<Complex64> = (0..n_points).map(|_| draw_unit_noise(&mut noise_rng)).collect();

    let rho = snr_normalization(cfg, cfg.array.n_elements);
    let mut partials = Vec::with_capacity(cfg.trackers.len());
    for tr_cfg in &cfg.trackers {
        let mut tracker = tr_cfg.build(&cfg.array, &cfg.channel)?;
        let stride = pilot_stride(tr_cfg.pilot_period, dt)?;
        let cd = tr_cfg.mode == TrackerMode::ContinuousDiscrete;

        let mut p = RunPartial {
            sq_err: Vec::with_capacity(n_points),
            gamma: Vec::with_capacity(n_points),
            diverged: false,
            slope_pairs: Vec::new(),
        };
        for (i, state) in trajectory.states.iter().enumerate() {
            let t = i as f64 * dt;
            if i > 0 {
                if cd {
                    tracker.predict(dt);
                }
                if i as u64 % stride == 0 {
                    let k = i as u64 / stride;
                    let m = measure_with_noise(
                        &cfg.array,
                        state,
                        tracker.beam(),
                        rho,
                        t,
                        k,
                        noise[i],
                    );
                    tracker.update(&m);
                    p.slope_pairs.push((state.azimuth.rate, tracker.rate_estimate()));
                }
            }
            let err = tracker.azimuth_raw() - state.azimuth.angle;
            if err.abs() > std::f64::consts::PI {
                p.diverged = true;
            }
            p.sq_err.push(err * err);
            let h = signal_part(&cfg.array, state.angles(), tracker.beam());
            p.gamma.push(rho * h.norm_sqr());
        }
        partials.push(p);
    }
    Ok(partials)
}

/// One realization laid out for plotting: the true path next to every
/// tracker's estimates and realized SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub t: Vec<f64>,
    pub truth: Vec<AoAState>,
    /// Per tracker: label, per-tick track points, per-tick linear SNR.
    pub tracks: Vec<(String, Vec<TrackPoint>, Vec<f64>)>,
}

/// Replay run 0 of the experiment and keep the raw series instead of
/// folding them into averages; uses the same streams as [`run_experiment`],
/// so the path shown is exactly the ensemble's first member.
pub fn sample_path(cfg: &RunConfig) -> Result<SamplePath> {
    cfg.validate()?;
    let dt = cfg.resolved_tick();
    let mut traj_rng = lane_rng(cfg.master_seed, 0, LANE_TRAJECTORY);
    let trajectory = gen_trajectory(&cfg.channel, &cfg.source, cfg.duration, dt, &mut traj_rng)?;
    let n_points = trajectory.states.len();
    let mut noise_rng = lane_rng(cfg.master_seed, 0, LANE_NOISE);
    let noise: Vec<Complex64> = (0..n_points).map(|_| draw_unit_noise(&mut noise_rng)).collect();
    let rho = snr_normalization(cfg, cfg.array.n_elements);

    let mut tracks = Vec::with_capacity(cfg.trackers.len());
    for tr_cfg in &cfg.trackers {
        let mut tracker = tr_cfg.build(&cfg.array, &cfg.channel)?;
        let stride = pilot_stride(tr_cfg.pilot_period, dt)?;
        let cd = tr_cfg.mode == TrackerMode::ContinuousDiscrete;
        let mut points = Vec::with_capacity(n_points);
        let mut gamma = Vec::with_capacity(n_points);
        for (i, state) in trajectory.states.iter().enumerate() {
            let t = i as f64 * dt;
            if i > 0 {
                if cd {
                    tracker.predict(dt);
                }
                if i as u64 % stride == 0 {
                    let m = measure_with_noise(
                        &cfg.array,
                        state,
                        tracker.beam(),
                        rho,
                        t,
                        i as u64 / stride,
                        noise[i],
                    );
                    tracker.update(&m);
                }
            }
            points.push(TrackPoint {
                t,
                estimate: tracker.estimate(),
                beam: tracker.beam(),
                rate_estimate: tracker.rate_estimate(),
            });
            let h = signal_part(&cfg.array, state.angles(), tracker.beam());
            gamma.push(rho * h.norm_sqr());
        }
        tracks.push((tr_cfg.label(), points, gamma));
    }
    Ok(SamplePath {
        t: (0..n_points).map(|i| i as f64 * dt).collect(),
        truth: trajectory.states,
        tracks,
    })
}

/// Run the experiment and return one averaged series per tracker, in the
/// configured tracker order. Bit-identical for a fixed master seed.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<MetricSeries>> {
    cfg.validate()?;
    let dt = cfg.resolved_tick();

    let compute = || -> Result<Vec<Vec<RunPartial>>> {
        (0..cfg.n_runs)
            .into_par_iter()
            .map(|run| single_run(cfg, dt, run))
            .collect()
    };
    let all_runs = match thread_cap()? {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::RunConfig(format!("thread pool: {e}")))?
            .install(compute),
        None => compute(),
    }?;

    let rho = snr_normalization(cfg, cfg.array.n_elements);
    let db_floor = rho * 1e-6;
    let n_points = all_runs[0][0].sq_err.len();
    let n_runs = cfg.n_runs as f64;

    let mut out = Vec::with_capacity(cfg.trackers.len());
    for (j, tr_cfg) in cfg.trackers.iter().enumerate() {
        let mut mse = vec![0.0; n_points];
        let mut snr_inst = vec![0.0; n_points];
        let mut snr_samples = Vec::with_capacity(n_points * cfg.n_runs);
        let mut slope_pairs = Vec::new();
        let mut db_sum = 0.0;
        let mut diverged = 0usize;
        // Sequential fold in run order keeps the result order-independent
        // of the parallel schedule.
        for run in &all_runs {
            let p = &run[j];
            for i in 0..n_points {
                mse[i] += p.sq_err[i];
                snr_inst[i] += p.gamma[i];
                db_sum += 10.0 * p.gamma[i].max(db_floor).log10();
            }
            snr_samples.extend_from_slice(&p.gamma);
            slope_pairs.extend_from_slice(&p.slope_pairs);
            diverged += p.diverged as usize;
        }
        for i in 0..n_points {
            mse[i] /= n_runs;
            snr_inst[i] /= n_runs;
        }
        snr_samples.sort_by(|a, b| a.partial_cmp(b).expect("SNR samples are finite"));
        out.push(MetricSeries {
            label: tr_cfg.label(),
            t: (0..n_points).map(|i| i as f64 * dt).collect(),
            mse,
            snr_inst,
            snr_avg_db: db_sum / (n_points as f64 * n_runs),
            snr_samples,
            diverged_fraction: diverged as f64 / n_runs,
            slope_pairs,
        });
    }
    Ok(out)
}

/// Parallelism cap from BEAMTRACK_THREADS, if set.
fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("BEAMTRACK_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::RunConfig(format!(
                "BEAMTRACK_THREADS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SnrSpec;
    use crate::trackers::{TrackerAlgorithm, TrackerConfig, TrackerMode};
    use std::f64::consts::FRAC_PI_2;

    fn channel(q: f64, snr_db: f64) -> ChannelConfig {
        ChannelConfig {
            q_intensity: q,
            phi0: FRAC_PI_2,
            phidot0: 0.0,
            snr: SnrSpec::TotalDb(snr_db),
            elevation: None,
        }
    }

    fn ekf(mode: TrackerMode, t: f64) -> TrackerConfig {
        TrackerConfig::new(TrackerAlgorithm::Ekf, mode, t)
    }

    fn small_cfg() -> RunConfig {
        let array = ArrayConfig::ula(16, 0.5).unwrap();
        let mut cfg = RunConfig::new(
            array,
            channel(1e3, 20.0),
            vec![
                ekf(TrackerMode::ContinuousDiscrete, 1e-3),
                ekf(TrackerMode::Discrete, 1e-3),
            ],
        );
        cfg.duration = 0.02;
        cfg.n_runs = 20;
        cfg.master_seed = 7;
        cfg
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = small_cfg();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mse_starts_at_zero_and_snr_respects_the_ceiling() {
        let series = run_experiment(&small_cfg()).unwrap();
        let rho = 100.0;
        assert_eq!(series.len(), 2);
        for s in &series {
            assert_eq!(s.mse[0], 0.0);
            assert!(s.mse.iter().all(|m| *m >= 0.0));
            assert!(s.snr_inst.iter().all(|g| *g <= rho * (1.0 + 1e-9)));
            assert!(s.snr_samples.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.snr_samples.iter().all(|g| *g <= rho * (1.0 + 1e-9)));
            let mut prev = 0.0;
            for k in 0..=20 {
                let f = s.cdf_snr(rho * k as f64 / 20.0);
                assert!((0.0..=1.0).contains(&f) && f >= prev);
                prev = f;
            }
            assert_eq!(s.cdf_snr(rho * 2.0), 1.0);
            assert_eq!(s.t[0], 0.0);
        }
    }

    #[test]
    fn identical_trackers_see_identical_noise() {
        // Paired comparisons only mean anything if the draws really are
        // shared, including across different pilot periods at coincident
        // pilots.
        let mut cfg = small_cfg();
        let mut a = ekf(TrackerMode::ContinuousDiscrete, 1e-3);
        a.label = Some("a".into());
        let mut b = a.clone();
        b.label = Some("b".into());
        cfg.trackers = vec![a, b];
        let series = run_experiment(&cfg).unwrap();
        assert_eq!(series[0].mse, series[1].mse);
        assert_eq!(series[0].snr_inst, series[1].snr_inst);
        assert_eq!(series[0].snr_samples, series[1].snr_samples);
        assert_eq!(series[0].slope_pairs, series[1].slope_pairs);
        assert_ne!(series[0].label, series[1].label);
    }

    #[test]
    fn locked_tracker_tracks_a_deterministic_target_perfectly() {
        // Constant-rate target, rate handed to the filter, no noise to
        // speak of: the prediction is exact at every tick.
        let mut cfg = small_cfg();
        cfg.channel = channel(0.0, 180.0);
        cfg.channel.phidot0 = 2.0;
        cfg.n_runs = 1;
        cfg.duration = 0.05;
        let mut tr = ekf(TrackerMode::ContinuousDiscrete, 1e-3);
        tr.rate_init = 2.0;
        cfg.trackers = vec![tr];
        let series = run_experiment(&cfg).unwrap();
        assert!(series[0].mse.iter().all(|m| *m < 1e-12));
        assert!(series[0].time_averaged_snr() > 1e18 * 0.999);
        assert_eq!(series[0].diverged_fraction, 0.0);
    }

    #[test]
    fn noiseless_filter_converges_after_the_first_pilots() {
        // Unknown constant rate, near-infinite SNR: two pilots make the
        // rate observable, after which the error stays at numerical zero.
        let mut cfg = small_cfg();
        cfg.channel = channel(0.0, 180.0);
        cfg.channel.phidot0 = 2.0;
        cfg.n_runs = 1;
        cfg.duration = 0.05;
        let mut tr = ekf(TrackerMode::ContinuousDiscrete, 1e-3);
        tr.p0 = Some([1e-6, 10.0]);
        cfg.trackers = vec![tr];
        let series = run_experiment(&cfg).unwrap();
        let s = &series[0];
        assert_eq!(s.mse[0], 0.0);
        for (i, m) in s.mse.iter().enumerate() {
            if s.t[i] >= 0.01 {
                assert!(*m < 1e-9, "mse {m} at t = {}", s.t[i]);
            }
        }
    }

    #[test]
    fn halving_the_tick_is_stable() {
        // Deterministic transient scenario; the grid only affects where
        // the same continuous curves get sampled.
        let run_at = |tick: f64| {
            let mut cfg = small_cfg();
            cfg.channel = channel(0.0, 180.0);
            cfg.channel.phidot0 = 2.0;
            cfg.n_runs = 1;
            cfg.duration = 0.01;
            cfg.metrics_tick = Some(tick);
            let mut tr = ekf(TrackerMode::ContinuousDiscrete, 1e-3);
            tr.p0 = Some([1e-6, 10.0]);
            cfg.trackers = vec![tr];
            let s = run_experiment(&cfg).unwrap().remove(0);
            (s.time_averaged_mse(), s.time_averaged_snr(), s.snr_avg_db)
        };
        let coarse = run_at(1e-5);
        let fine = run_at(5e-6);
        assert!((coarse.0 - fine.0).abs() / fine.0 < 0.01, "{coarse:?} vs {fine:?}");
        assert!((coarse.1 - fine.1).abs() / fine.1 < 0.01);
        assert!((coarse.2 - fine.2).abs() / fine.2.abs().max(1.0) < 0.01);
    }

    #[test]
    fn runaway_target_is_reported_diverged_not_dropped() {
        // Target sweeps 5 rad while the measurements are pure noise: the
        // uninformed tracker must be flagged, and its error must stay in
        // the average rather than being censored.
        let mut cfg = small_cfg();
        cfg.channel = channel(0.0, -100.0);
        cfg.channel.phidot0 = 50.0;
        cfg.n_runs = 3;
        cfg.duration = 0.1;
        let mut locked = ekf(TrackerMode::ContinuousDiscrete, 1e-3);
        locked.rate_init = 50.0;
        locked.label = Some("locked".into());
        cfg.trackers = vec![ekf(TrackerMode::Discrete, 1e-3), locked];
        let series = run_experiment(&cfg).unwrap();
        assert_eq!(series[0].diverged_fraction, 1.0);
        assert_eq!(series[1].diverged_fraction, 0.0);
        let last = *series[0].mse.last().unwrap();
        assert!(last > 10.0, "diverged error kept in the average, mse = {last}");
    }

    #[test]
    fn cd_filter_beats_discrete_on_a_fast_channel() {
        let mut cfg = RunConfig::new(
            ArrayConfig::ula(64, 0.5).unwrap(),
            channel(1e4, 20.0),
            vec![
                ekf(TrackerMode::ContinuousDiscrete, 1e-3),
                ekf(TrackerMode::Discrete, 1e-3),
            ],
        );
        cfg.duration = 0.05;
        cfg.n_runs = 100;
        cfg.master_seed = 11;
        let series = run_experiment(&cfg).unwrap();
        let cd = series[0].time_averaged_mse();
        let d = series[1].time_averaged_mse();
        assert!(cd * 5.0 < d, "cd mse {cd}, discrete mse {d}");
    }

    #[test]
    fn sample_path_is_the_first_ensemble_member() {
        let mut cfg = small_cfg();
        cfg.n_runs = 1;
        let series = run_experiment(&cfg).unwrap();
        let path = sample_path(&cfg).unwrap();
        assert_eq!(path.t, series[0].t);
        for (j, (label, points, gamma)) in path.tracks.iter().enumerate() {
            assert_eq!(*label, series[j].label);
            assert_eq!(*gamma, series[j].snr_inst);
            for (i, p) in points.iter().enumerate() {
                let truth = path.truth[i].azimuth.angle;
                let se = (p.estimate.azimuth() - truth).powi(2);
                assert!((se - series[j].mse[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rate_summaries_match_hand_values() {
        let series = MetricSeries {
            label: "x".into(),
            t: vec![0.0, 1.0],
            mse: vec![0.0, 0.0],
            snr_inst: vec![100.0, 100.0],
            snr_avg_db: 20.0,
            snr_samples: vec![100.0; 8],
            diverged_fraction: 0.0,
            slope_pairs: Vec::new(),
        };
        let mut d = DesignInputs::new(64, 1e3, 0.1);
        d.p_out = 0.05;
        d.rate_fixed = 5.0;
        d.t_pilot_symbol = 0.0;
        let r = summarize_rates(&series, &d, 1e-3).unwrap();
        assert!((r.outage_rate - 4.75).abs() < 1e-12);
        assert!((r.avg_rate - (101f64).log2()).abs() < 1e-12);
        // T_s = 0 leaves only the sweep discount on both effective rates.
        let scale = r.effective_avg_rate / r.avg_rate;
        assert!((r.effective_outage_rate / r.outage_rate - scale).abs() < 1e-12);
        assert!(scale > 0.0 && scale <= 1.0);
    }

    #[test]
    fn snr_normalization_conventions() {
        let mut cfg = small_cfg();
        cfg.channel.snr = SnrSpec::PerElementDb(16.0);
        assert!((snr_normalization(&cfg, 64) - 2547.885891542383).abs() < 1e-9);
        cfg.channel.snr = SnrSpec::TotalDb(20.0);
        assert!((snr_normalization(&cfg, 64) - 100.0).abs() < 1e-12);
        assert!((snr_normalization(&cfg, 3) - 100.0).abs() < 1e-12);
        cfg.channel.snr = SnrSpec::PerElementDb(20.0);
        assert!((snr_normalization(&cfg, 1) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation_catches_label_and_grid_conflicts() {
        let mut cfg = small_cfg();
        cfg.trackers = vec![
            ekf(TrackerMode::ContinuousDiscrete, 1e-3),
            ekf(TrackerMode::ContinuousDiscrete, 2e-3),
        ];
        assert!(matches!(cfg.validate(), Err(Error::RunConfig(_))));

        let mut cfg = small_cfg();
        cfg.metrics_tick = Some(3e-4);
        assert!(cfg.validate().is_err());

        let mut cfg = small_cfg();
        cfg.n_runs = 0;
        assert!(cfg.validate().is_err());
    }
}
