//! Fast beam tracking: a one-tap recursion on the sine of the angle.
//!
//! Each pilot nudges beta = sin(phi) against the imaginary part of the
//! measurement, with step size a_n = 1/((N-1) pi spacing). The recursion
//! assumes the measurement scaling of the normalized signal part; its
//! contraction factor is (1 + tan phi), so it converges only where
//! tan(phi) lies in [-2, 0] (second-quadrant operating points) and is used
//! there. In CD mode a full EKF runs in the background on the same pilots,
//! purely to supply the angle-rate estimate for the prediction stage; its
//! own angle estimate is discarded.

use std::f64::consts::{PI, TAU};

use crate::array::{Angle, ArrayConfig};
use crate::channel::MeasurementSample;

use super::{EkfTracker, InitState, Tracker, TrackerMode};

pub struct FbtTracker {
    phi: f64,
    step: f64,
    background: Option<EkfTracker>,
    label: String,
}

impl FbtTracker {
    pub fn new(array: ArrayConfig, init: InitState) -> Self {
        let step = 1.0 / ((array.n_elements as f64 - 1.0) * PI * array.spacing);
        let background = (init.mode == TrackerMode::ContinuousDiscrete).then(|| {
            EkfTracker::new(
                array.ideal_model(),
                InitState {
                    label: format!("{}-background", init.label),
                    ..init.clone()
                },
            )
        });
        FbtTracker {
            phi: init.phi0,
            step,
            background,
            label: init.label,
        }
    }

    /// Step size a_n.
    pub fn step_size(&self) -> f64 {
        self.step
    }
}

/// The angle with the given sine nearest to `reference`, over both arcsin
/// families and all turns. Keeps the estimate on its unwrapped branch, since
/// sine alone cannot distinguish phi from pi - phi.
fn nearest_arcsin_branch(beta: f64, reference: f64) -> f64 {
    let base = beta.asin();
    let mut best = f64::NAN;
    for anchor in [base, PI - base] {
        let cand = anchor + TAU * ((reference - anchor) / TAU).round();
        if best.is_nan() || (cand - reference).abs() < (best - reference).abs() {
            best = cand;
        }
    }
    best
}

impl Tracker for FbtTracker {
    fn predict(&mut self, dt: f64) {
        if let Some(bg) = &mut self.background {
            bg.predict(dt);
            self.phi += bg.rate_estimate() * dt;
        }
    }

    fn update(&mut self, y: &MeasurementSample) {
        let beam = Angle::ula(self.phi);
        let beta = (self.phi.sin() - self.step * y.y.im).clamp(-1.0, 1.0);
        self.phi = nearest_arcsin_branch(beta, self.phi);
        if let Some(bg) = &mut self.background {
            // The background filter sees the pilot exactly as taken: with
            // the foreground tracker's beam, not its own.
            bg.measurement_update(y, beam);
        }
    }

    fn estimate(&self) -> Angle {
        Angle::ula(self.phi)
    }

    fn azimuth_raw(&self) -> f64 {
        self.phi
    }

    fn rate_estimate(&self) -> f64 {
        self.background.as_ref().map_or(0.0, |bg| bg.rate_estimate())
    }

    fn label(&self) -> &str {
        &self.label
    }
}
