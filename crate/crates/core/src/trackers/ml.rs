//! Main-lobe tracker: inverts the Gaussian main-lobe magnitude model.
//!
//! Inside the main lobe the signal-part magnitude is approximately
//! exp(-(n^2/2) u^2) with u = cos(phi) - cos(beam) and n the per-plane
//! element count. One pilot therefore pins |u| from the measured magnitude
//! (after LMMSE shrinkage rho/(rho+1)) and leaves a sign ambiguity, which is
//! resolved by whichever candidate's model phase sits closer to the measured
//! phase. The CD flavor adds a scalar MMSE recursion on the angle rate.
//!
//! Planar arrays run the same procedure per plane. A single scalar
//! measurement cannot apportion magnitude loss between the planes, so it is
//! split evenly; the azimuth candidate is resolved first, then elevation
//! against the chosen azimuth. A pinned-elevation array tracks azimuth only
//! with the full magnitude budget.

use std::f64::consts::PI;

use crate::array::{signal_part, Angle, ArrayConfig, ArrayGeometry};
use crate::channel::MeasurementSample;

use super::{InitState, Tracker, TrackerMode};

pub struct MlTracker {
    array: ArrayConfig,
    /// Elements along one tracked plane: N for a ULA, sqrt(N) per UPA plane.
    plane_n: usize,
    phi: f64,
    phidot: f64,
    el: Option<(f64, f64)>,
    rho: f64,
    q: f64,
    pilot_period: f64,
    mode: TrackerMode,
    label: String,
}

impl MlTracker {
    pub fn new(array: ArrayConfig, init: InitState) -> Self {
        let plane_n = match array.geometry {
            ArrayGeometry::Ula => array.n_elements,
            ArrayGeometry::Upa => (array.n_elements as f64).sqrt().round() as usize,
        };
        MlTracker {
            array: array.ideal_model(),
            plane_n,
            phi: init.phi0,
            phidot: init.rate0,
            el: init.theta0.map(|t0| (t0, 0.0)),
            rho: init.rho,
            q: init.q,
            pilot_period: init.pilot_period,
            mode: init.mode,
            label: init.label,
        }
    }

    fn angles(&self) -> Angle {
        match self.el {
            Some((theta, _)) => Angle::upa(self.phi, theta),
            None => Angle::ula(self.phi),
        }
    }

    /// Candidate angles at +-root around `center` in cosine space, clamped
    /// into the physical domain.
    fn candidates(center: f64, root: f64) -> [f64; 2] {
        [
            (center.cos() + root).clamp(-1.0, 1.0).acos(),
            (center.cos() - root).clamp(-1.0, 1.0).acos(),
        ]
    }

    /// Pick the candidate whose model phase is nearer the measured phase.
    fn pick(&self, cands: [f64; 2], beam: Angle, measured_phase: f64, plane: Plane) -> f64 {
        let dist = |cand: f64| {
            let angles = match (plane, self.el) {
                (Plane::Azimuth, Some((theta, _))) => Angle::upa(cand, theta),
                (Plane::Azimuth, None) => Angle::ula(cand),
                (Plane::Elevation, _) => Angle::upa(self.phi, cand),
            };
            let model = signal_part(&self.array, angles, beam);
            let delta = measured_phase - model.arg();
            // Shortest angular distance on the circle.
            delta.sin().atan2(delta.cos()).abs()
        };
        if dist(cands[0]) <= dist(cands[1]) {
            cands[0]
        } else {
            cands[1]
        }
    }

    /// Scalar MMSE rate correction (CD mode only).
    fn slope_update(&mut self, im_y: f64) {
        let t = self.pilot_period;
        let n = self.plane_n as f64;
        let xi = PI * t * self.phi.sin() * (n - 1.0) / 2.0;
        let qt = self.q * t;
        let r = 1.0 / self.rho;
        let denom = qt * xi * xi + 0.5 * r;
        if denom > 0.0 {
            self.phidot += qt * xi * im_y / denom;
        }
        if let Some((theta, thetadot)) = &mut self.el {
            let xi_el = PI * t * theta.sin() * (n - 1.0) / 2.0;
            let denom_el = qt * xi_el * xi_el + 0.5 * r;
            if denom_el > 0.0 {
                *thetadot += qt * xi_el * im_y / denom_el;
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Plane {
    Azimuth,
    Elevation,
}

impl Tracker for MlTracker {
    fn predict(&mut self, dt: f64) {
        self.phi += self.phidot * dt;
        if let Some((theta, thetadot)) = &mut self.el {
            *theta += *thetadot * dt;
        }
    }

    fn update(&mut self, y: &MeasurementSample) {
        let beam = self.angles();
        let h_hat = y.y * (self.rho / (self.rho + 1.0));
        let mag = h_hat.norm();
        let n = self.plane_n as f64;
        // Magnitude above 1 can only be noise; read it as perfect alignment.
        let s = if mag >= 1.0 {
            0.0
        } else {
            -(2.0 / (n * n)) * mag.ln()
        };
        if self.mode == TrackerMode::ContinuousDiscrete {
            self.slope_update(y.y.im);
        }
        let phase = h_hat.arg();
        match self.el {
            None => {
                let root = s.sqrt();
                self.phi = self.pick(Self::candidates(self.phi, root), beam, phase, Plane::Azimuth);
            }
            Some(_) => {
                // Even magnitude split across the two planes.
                let root = (s / 2.0).sqrt();
                self.phi = self.pick(Self::candidates(self.phi, root), beam, phase, Plane::Azimuth);
                let theta = self.el.unwrap().0;
                let chosen =
                    self.pick(Self::candidates(theta, root), beam, phase, Plane::Elevation);
                self.el.as_mut().unwrap().0 = chosen;
            }
        }
    }

    fn estimate(&self) -> Angle {
        self.angles()
    }

    fn azimuth_raw(&self) -> f64 {
        self.phi
    }

    fn rate_estimate(&self) -> f64 {
        self.phidot
    }

    fn label(&self) -> &str {
        &self.label
    }
}
