//! Beam trackers: EKF, fast beam tracking (FBT) and main-lobe (ML)
//! estimators, each in a Discrete and a Continuous-Discrete flavor.
//!
//! All six share one contract. The tracker's state carries the current angle
//! estimate; the steered beam is always that estimate's angle:
//!
//! * Continuous-Discrete: the driver calls [`Tracker::predict`] every tick,
//!   sliding the beam along the estimated angle rate, and
//!   [`Tracker::update`] at pilot instants. The pilot measurement is taken
//!   with the beam at the freshly predicted angle.
//! * Discrete: the driver only calls [`Tracker::update`] at pilot instants;
//!   the beam holds still in between. The measurement is taken with the held
//!   beam. A filter carrying rate state (the EKF) folds one full-interval
//!   time propagation into its pilot cycle internally; the correction is
//!   evaluated at that propagated state against the beam actually used.
//!
//! Angle estimates are unwrapped: a tracker following a target across pi
//! keeps counting rather than folding back, so error metrics stay continuous.

mod ekf;
mod fbt;
mod ml;

pub use ekf::{EkfTracker, PlaneEkf};
pub use fbt::FbtTracker;
pub use ml::MlTracker;

use crate::array::{Angle, ArrayConfig, ArrayGeometry};
use crate::channel::{measure, ChannelConfig, MeasurementSample, Trajectory};
use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerAlgorithm {
    Ekf,
    Fbt,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerMode {
    Discrete,
    ContinuousDiscrete,
}

/// Everything needed to build one tracker instance. `q_assumed` and `rho`
/// default to the channel's values when left unset, so a plain config tracks
/// the channel it runs against; set them to study model mismatch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub algorithm: TrackerAlgorithm,
    pub mode: TrackerMode,
    /// Pilot period T, seconds.
    pub pilot_period: f64,
    /// Predictions per pilot period in CD mode; sets the default metrics
    /// tick.
    pub n_s: u32,
    /// Rate-diffusion intensity assumed by the filter, rad^2/s^3.
    pub q_assumed: Option<f64>,
    /// Post-beamforming SNR assumed by the filter, linear.
    pub rho: Option<f64>,
    /// Initial covariance diagonal [angle, rate]. Default
    /// [1e-6, q_assumed * pilot_period]: the initial angle is known, the
    /// rate to within one pilot interval of diffusion.
    pub p0: Option<[f64; 2]>,
    /// Initial azimuth-rate estimate, rad/s.
    pub rate_init: f64,
    /// Output column name; defaults to e.g. "ekf_cd".
    pub label: Option<String>,
}

impl TrackerConfig {
    pub fn new(algorithm: TrackerAlgorithm, mode: TrackerMode, pilot_period: f64) -> Self {
        TrackerConfig {
            algorithm,
            mode,
            pilot_period,
            n_s: 10,
            q_assumed: None,
            rho: None,
            p0: None,
            rate_init: 0.0,
            label: None,
        }
    }

    pub fn validate(&self, array: &ArrayConfig) -> Result<()> {
        if !(self.pilot_period > 0.0 && self.pilot_period.is_finite()) {
            return Err(Error::TrackerConfig(format!(
                "pilot_period must be positive, got {}",
                self.pilot_period
            )));
        }
        if self.n_s < 1 {
            return Err(Error::TrackerConfig("n_s must be >= 1".into()));
        }
        if let Some(q) = self.q_assumed {
            if !(q.is_finite() && q >= 0.0) {
                return Err(Error::TrackerConfig(format!("q_assumed must be >= 0, got {q}")));
            }
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0) {
                return Err(Error::TrackerConfig(format!("rho must be positive, got {rho}")));
            }
        }
        if let Some(p0) = self.p0 {
            if p0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::TrackerConfig(format!("p0 diagonal must be >= 0, got {p0:?}")));
            }
        }
        if !self.rate_init.is_finite() {
            return Err(Error::TrackerConfig("rate_init must be finite".into()));
        }
        if self.algorithm == TrackerAlgorithm::Fbt && array.geometry == ArrayGeometry::Upa {
            return Err(Error::TrackerConfig(
                "fast beam tracking supports linear arrays only".into(),
            ));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            let alg = match self.algorithm {
                TrackerAlgorithm::Ekf => "ekf",
                TrackerAlgorithm::Fbt => "fbt",
                TrackerAlgorithm::Ml => "ml",
            };
            let mode = match self.mode {
                TrackerMode::Discrete => "d",
                TrackerMode::ContinuousDiscrete => "cd",
            };
            format!("{alg}_{mode}")
        })
    }

    /// Resolved filter parameters against a concrete array and channel.
    pub fn build(&self, array: &ArrayConfig, channel: &ChannelConfig) -> Result<Box<dyn Tracker>> {
        self.validate(array)?;
        channel.validate()?;
        let q = self.q_assumed.unwrap_or(channel.q_intensity);
        let rho = self
            .rho
            .unwrap_or_else(|| channel.snr.resolve(array.n_elements));
        let p0 = self.p0.unwrap_or([1e-6, q * self.pilot_period]);
        let init = InitState {
            phi0: channel.phi0,
            rate0: self.rate_init,
            theta0: (array.geometry == ArrayGeometry::Upa && !array.fixed_elevation)
                .then(|| channel.elevation.map_or(std::f64::consts::FRAC_PI_2, |e| e.theta0)),
            q,
            rho,
            p0,
            pilot_period: self.pilot_period,
            mode: self.mode,
            label: self.label(),
        };
        Ok(match self.algorithm {
            TrackerAlgorithm::Ekf => Box::new(EkfTracker::new(array.clone(), init)),
            TrackerAlgorithm::Fbt => Box::new(FbtTracker::new(array.clone(), init)),
            TrackerAlgorithm::Ml => Box::new(MlTracker::new(array.clone(), init)),
        })
    }
}

/// Resolved initial conditions handed to tracker constructors.
#[derive(Debug, Clone)]
pub struct InitState {
    pub phi0: f64,
    pub rate0: f64,
    /// Present when the tracker must run an elevation recursion.
    pub theta0: Option<f64>,
    pub q: f64,
    pub rho: f64,
    pub p0: [f64; 2],
    pub pilot_period: f64,
    pub mode: TrackerMode,
    pub label: String,
}

/// Uniform tracker interface. Drivers must take measurements with the beam
/// at [`Tracker::beam`] and pass them to [`Tracker::update`] unchanged.
pub trait Tracker: Send {
    /// Slide the prediction forward by `dt` seconds (CD mode; drivers do not
    /// call this on Discrete trackers).
    fn predict(&mut self, dt: f64);
    /// Incorporate a pilot measured with the beam at `self.beam()`.
    fn update(&mut self, y: &MeasurementSample);
    /// Current angle estimate.
    fn estimate(&self) -> Angle;
    /// Azimuth estimate before the 2 pi reduction [`Angle`] applies. Error
    /// metrics need this: against an unwrapped trajectory, a wrapped
    /// estimate would fake a divergence whenever either crosses a turn.
    fn azimuth_raw(&self) -> f64;
    /// Current azimuth-rate estimate, rad/s; zero where none is kept.
    fn rate_estimate(&self) -> f64;
    /// Beam steered for reception. Always the estimate's angle.
    fn beam(&self) -> Angle {
        self.estimate()
    }
    fn label(&self) -> &str;
}

/// Number of grid ticks per pilot interval; the pilot period must sit on the
/// grid or pilot instants would silently shift.
pub(crate) fn pilot_stride(pilot_period: f64, dt: f64) -> Result<u64> {
    let ratio = pilot_period / dt;
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-6 {
        return Err(Error::TrackerConfig(format!(
            "pilot period {pilot_period} s is not a whole number of {dt} s ticks"
        )));
    }
    Ok(stride as u64)
}

/// One output row of [`run_tracker`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub estimate: Angle,
    pub beam: Angle,
    pub rate_estimate: f64,
}

/// Drive one tracker over a precomputed trajectory, drawing measurement
/// noise from `rng`. Pilots fall at t = kT for k >= 1; the returned series
/// has one point per trajectory tick, the estimate after any processing at
/// that tick.
pub fn run_tracker<R: Rng>(
    cfg: &TrackerConfig,
    array: &ArrayConfig,
    channel: &ChannelConfig,
    trajectory: &Trajectory,
    rng: &mut R,
) -> Result<Vec<TrackPoint>> {
    let mut tracker = cfg.build(array, channel)?;
    let dt = trajectory.dt;
    let stride = pilot_stride(cfg.pilot_period, dt)?;
    let rho = cfg
        .rho
        .unwrap_or_else(|| channel.snr.resolve(array.n_elements));
    let cd = cfg.mode == TrackerMode::ContinuousDiscrete;

    let mut out = Vec::with_capacity(trajectory.states.len());
    let point = |t: f64, tr: &dyn Tracker| TrackPoint {
        t,
        estimate: tr.estimate(),
        beam: tr.beam(),
        rate_estimate: tr.rate_estimate(),
    };
    out.push(point(0.0, tracker.as_ref()));
    for (i, state) in trajectory.states.iter().enumerate().skip(1) {
        let t = i as f64 * dt;
        if cd {
            tracker.predict(dt);
        }
        if i as u64 % stride == 0 {
            let k = i as u64 / stride;
            let m = measure(array, state, tracker.beam(), rho, t, k, rng);
            tracker.update(&m);
        }
        out.push(point(t, tracker.as_ref()));
    }
    Ok(out)
}
