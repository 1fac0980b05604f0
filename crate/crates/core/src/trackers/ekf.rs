//! Extended Kalman filter over the state [angle, angle rate].
//!
//! The continuous model is a double integrator driven by rate diffusion of
//! intensity q. Both prediction equations are solved exactly over a step dt:
//!
//! ```text
//!   x <- F x,  P <- F P F' + Q_d
//!   F = | 1 dt |     Q_d = q * | dt^3/3  dt^2/2 |
//!       | 0  1 |               | dt^2/2  dt     |
//! ```
//!
//! The exact discretization composes: stepping dt twice by dt/2 lands on the
//! same covariance, which keeps long runs independent of the prediction
//! grid.
//!
//! The complex pilot measurement is cast to a stacked real pair
//! [Re y, Im y] with per-component noise variance 1/(2 rho), and the
//! Jacobian of the signal part supplies the measurement rows.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::array::{signal_part, signal_part_gradient, Angle, ArrayConfig};
use crate::channel::MeasurementSample;

use super::{InitState, Tracker, TrackerMode};

/// One plane of EKF state. UPA trackers hold two, coupled only through the
/// shared scalar measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneEkf {
    /// [angle, rate].
    pub x: Vector2<f64>,
    pub p: Matrix2<f64>,
    q: f64,
}

impl PlaneEkf {
    pub fn new(angle0: f64, rate0: f64, p0: [f64; 2], q: f64) -> Self {
        PlaneEkf {
            x: Vector2::new(angle0, rate0),
            p: Matrix2::new(p0[0], 0.0, 0.0, p0[1]),
            q,
        }
    }

    /// Exact time propagation over `dt` seconds.
    pub fn predict(&mut self, dt: f64) {
        self.x[0] += dt * self.x[1];
        let f = Matrix2::new(1.0, dt, 0.0, 1.0);
        let qd = self.q
            * Matrix2::new(
                dt * dt * dt / 3.0,
                dt * dt / 2.0,
                dt * dt / 2.0,
                dt,
            );
        self.p = f * self.p * f.transpose() + qd;
    }

    /// Correction from a complex scalar measurement with innovation `v` and
    /// model derivative `dh` (both stacked to real pairs), measurement noise
    /// `r_m` per real component.
    pub fn update_complex(&mut self, v: Complex64, dh: Complex64, r_m: f64) {
        self.update_stacked(
            Vector2::new(v.re, v.im),
            Matrix2::new(dh.re, 0.0, dh.im, 0.0),
            Matrix2::new(r_m, 0.0, 0.0, r_m),
        );
    }

    /// Plain stacked-real Kalman correction. Kept linear-map generic so the
    /// gain algebra is testable against the textbook closed form.
    pub(crate) fn update_stacked(&mut self, v: Vector2<f64>, h: Matrix2<f64>, r: Matrix2<f64>) {
        let s = h * self.p * h.transpose() + r;
        let s_inv = match s.try_inverse() {
            Some(inv) if inv.iter().all(|e| e.is_finite()) => inv,
            _ => {
                log::warn!("innovation covariance singular; regularizing");
                match (s + Matrix2::identity() * 1e-12).try_inverse() {
                    Some(inv) if inv.iter().all(|e| e.is_finite()) => inv,
                    _ => {
                        log::warn!("innovation covariance unusable; skipping update");
                        return;
                    }
                }
            }
        };
        let k = self.p * h.transpose() * s_inv;
        self.x += k * v;
        self.p = (Matrix2::identity() - k * h) * self.p;
        self.p = (self.p + self.p.transpose()) * 0.5;
    }

    /// Smallest eigenvalue of P; the filter keeps it >= -1e-10.
    pub fn min_eigenvalue(&self) -> f64 {
        let tr = self.p[(0, 0)] + self.p[(1, 1)];
        let disc = (tr * tr - 4.0 * self.p.determinant()).max(0.0).sqrt();
        (tr - disc) / 2.0
    }
}

/// EKF tracker over one (ULA) or two (UPA) planes.
pub struct EkfTracker {
    array: ArrayConfig,
    az: PlaneEkf,
    el: Option<PlaneEkf>,
    rho: f64,
    pilot_period: f64,
    mode: TrackerMode,
    label: String,
}

impl EkfTracker {
    pub fn new(array: ArrayConfig, init: InitState) -> Self {
        EkfTracker {
            // The filter linearizes the ideal pattern; quantization on the
            // physical array is an unmodeled impairment.
            array: array.ideal_model(),
            az: PlaneEkf::new(init.phi0, init.rate0, init.p0, init.q),
            el: init
                .theta0
                .map(|t0| PlaneEkf::new(t0, 0.0, init.p0, init.q)),
            rho: init.rho,
            pilot_period: init.pilot_period,
            mode: init.mode,
            label: init.label,
        }
    }

    fn angles(&self) -> Angle {
        match &self.el {
            Some(el) => Angle::upa(self.az.x[0], el.x[0]),
            None => Angle::ula(self.az.x[0]),
        }
    }

    fn advance(&mut self, dt: f64) {
        self.az.predict(dt);
        if let Some(el) = &mut self.el {
            el.predict(dt);
        }
    }

    /// Correction step against a measurement taken with an arbitrary beam.
    /// The model and Jacobian are evaluated at the current state estimate;
    /// the beam says where the array actually pointed.
    pub fn measurement_update(&mut self, y: &MeasurementSample, beam: Angle) {
        let est = self.angles();
        let h = signal_part(&self.array, est, beam);
        let (g_az, g_el) = signal_part_gradient(&self.array, est, beam);
        let v = y.y - h;
        let r_m = 1.0 / (2.0 * self.rho);
        self.az.update_complex(v, g_az, r_m);
        if let (Some(el), Some(g)) = (&mut self.el, g_el) {
            el.update_complex(v, g, r_m);
        }
    }

    /// Filter internals, for invariant checks.
    pub fn planes(&self) -> (&PlaneEkf, Option<&PlaneEkf>) {
        (&self.az, self.el.as_ref())
    }
}

impl Tracker for EkfTracker {
    fn predict(&mut self, dt: f64) {
        self.advance(dt);
    }

    fn update(&mut self, y: &MeasurementSample) {
        let beam = self.angles();
        if self.mode == TrackerMode::Discrete {
            // The beam held still since the last pilot, but time did not:
            // fold the full interval's propagation in before correcting.
            self.advance(self.pilot_period);
        }
        self.measurement_update(y, beam);
    }

    fn estimate(&self) -> Angle {
        self.angles()
    }

    fn azimuth_raw(&self) -> f64 {
        self.az.x[0]
    }

    fn rate_estimate(&self) -> f64 {
        self.az.x[1]
    }

    fn label(&self) -> &str {
        &self.label
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trackers::TrackerMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn init(phi0: f64, rate0: f64, q: f64, rho: f64, t: f64, mode: TrackerMode) -> InitState {
        InitState {
            phi0,
            rate0,
            theta0: None,
            q,
            rho,
            p0: [1e-6, q * t],
            pilot_period: t,
            mode,
            label: "ekf".into(),
        }
    }

    fn sample(y: Complex64) -> MeasurementSample {
        MeasurementSample { t: 0.0, k: 1, y }
    }

    #[test]
    fn predict_is_exact_linear_drift() {
        let mut f = PlaneEkf::new(1.0, 2.0, [0.0, 0.0], 0.0);
        f.predict(1e-3);
        assert!((f.x[0] - 1.002).abs() < 1e-15);
        assert_eq!(f.x[1], 2.0);
    }

    #[test]
    fn predict_fixed_point_at_rest() {
        let mut f = PlaneEkf::new(0.7, 0.0, [0.0, 0.0], 0.0);
        let before = f.clone();
        f.predict(0.01);
        assert_eq!(f, before);
    }

    #[test]
    fn predict_satisfies_semigroup_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let a = Matrix2::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let p0 = a * a.transpose() + Matrix2::identity() * 1e-3;
            let q = rng.gen_range(0.0..1e4);
            let dt = rng.gen_range(1e-5..1e-2);
            let x0 = rng.gen_range(-1.0..1.0);
            let mk = || {
                let mut f = PlaneEkf::new(x0, 0.3, [0.0, 0.0], q);
                f.p = p0;
                f
            };
            let mut whole = mk();
            whole.predict(dt);
            let mut halves = mk();
            halves.predict(dt / 2.0);
            halves.predict(dt / 2.0);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (whole.p[(i, j)] - halves.p[(i, j)]).abs() < 1e-12 * (1.0 + whole.p[(i, j)].abs()),
                        "covariance composition broke at q={q}, dt={dt}"
                    );
                }
            }
            assert!((whole.x[0] - halves.x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn stacked_update_matches_textbook_gain() {
        // Closed-form 2x2 Kalman step computed with scalar arithmetic only.
        let p0 = [[0.4, 0.1], [0.1, 0.3]];
        let h = [[0.7, 0.2], [-0.3, 1.1]];
        let r = [[0.05, 0.0], [0.0, 0.08]];
        let x0 = [0.5, -0.2];
        let v = [0.12, -0.34];

        let mat = |m: [[f64; 2]; 2]| Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
        let mul = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
            let mut c = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                }
            }
            c
        };
        let tr = |a: [[f64; 2]; 2]| [[a[0][0], a[1][0]], [a[0][1], a[1][1]]];
        let add = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
            [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
        };

        let s = add(mul(mul(h, p0), tr(h)), r);
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let s_inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let k = mul(mul(p0, tr(h)), s_inv);
        let x1 = [
            x0[0] + k[0][0] * v[0] + k[0][1] * v[1],
            x0[1] + k[1][0] * v[0] + k[1][1] * v[1],
        ];
        let ikh = add([[1.0, 0.0], [0.0, 1.0]], mul([[-1.0, 0.0], [0.0, -1.0]], mul(k, h)));
        let p1 = mul(ikh, p0);

        let mut f = PlaneEkf::new(x0[0], x0[1], [0.0, 0.0], 0.0);
        f.p = mat(p0);
        f.update_stacked(Vector2::new(v[0], v[1]), mat(h), mat(r));
        assert!((f.x[0] - x1[0]).abs() < 1e-10);
        assert!((f.x[1] - x1[1]).abs() < 1e-10);
        for i in 0..2 {
            for j in 0..2 {
                let sym = (p1[i][j] + p1[j][i]) / 2.0;
                assert!((f.p[(i, j)] - sym).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn update_is_no_op_under_full_confidence() {
        let mut f = PlaneEkf::new(1.2, 0.4, [0.0, 0.0], 0.0);
        f.update_complex(Complex64::new(0.9, -0.5), Complex64::new(0.0, 80.0), 1e-3);
        assert_eq!(f.x, Vector2::new(1.2, 0.4));
    }

    #[test]
    fn aligned_noiseless_measurement_changes_nothing() {
        let array = ArrayConfig::ula(64, 0.5).unwrap();
        let mut tr = EkfTracker::new(
            array.clone(),
            init(FRAC_PI_2, 0.0, 1e3, 1e12, 1e-3, TrackerMode::ContinuousDiscrete),
        );
        // y equals the model output exactly: innovation is identically zero.
        let y = signal_part(&array, tr.estimate(), tr.beam());
        tr.update(&sample(y));
        assert_eq!(tr.estimate().azimuth(), FRAC_PI_2);
        assert_eq!(tr.rate_estimate(), 0.0);
    }

    #[test]
    fn singular_innovation_covariance_is_survivable() {
        let mut f = PlaneEkf::new(0.3, 0.0, [0.0, 0.0], 0.0);
        f.update_stacked(
            Vector2::new(1.0, 1.0),
            Matrix2::new(0.0, 0.0, 0.0, 0.0),
            Matrix2::zeros(),
        );
        assert!(f.x.iter().all(|e| e.is_finite()));
        assert_eq!(f.x[0], 0.3);
    }

    #[test]
    fn rate_is_learned_from_pilots_alone() {
        // Constant-rate target, rate unknown to the filter. Noiseless pilots
        // at the predicted beam must pull the rate estimate toward truth
        // through the P12 coupling.
        let array = ArrayConfig::ula(32, 0.5).unwrap();
        let t = 1e-3;
        let rate_true = 1.0;
        let mut tr = EkfTracker::new(
            array.clone(),
            init(FRAC_PI_2, 0.0, 1e2, 1e12, t, TrackerMode::ContinuousDiscrete),
        );
        let mut phi = FRAC_PI_2;
        for _ in 0..400 {
            tr.predict(t);
            phi += rate_true * t;
            let y = signal_part(&array, Angle::ula(phi), tr.beam());
            tr.update(&sample(y));
        }
        assert!(
            (tr.rate_estimate() - rate_true).abs() < 0.05,
            "rate estimate {} after 400 pilots",
            tr.rate_estimate()
        );
        assert!((tr.estimate().azimuth() - phi).abs() < 1e-3);
    }

    #[test]
    fn discrete_and_cd_corrections_share_the_same_math() {
        let array = ArrayConfig::ula(16, 0.5).unwrap();
        let mk = |mode| {
            EkfTracker::new(array.clone(), init(1.0, 0.5, 1e3, 100.0, 1e-3, mode))
        };
        let mut cd = mk(TrackerMode::ContinuousDiscrete);
        let mut d = mk(TrackerMode::Discrete);
        let y = sample(Complex64::new(0.8, 0.3));
        let beam = cd.beam();
        cd.measurement_update(&y, beam);
        d.measurement_update(&y, beam);
        assert_eq!(cd.az.x, d.az.x);
        assert_eq!(cd.az.p, d.az.p);
    }

    #[test]
    fn covariance_stays_psd_through_noisy_runs() {
        let array = ArrayConfig::ula(64, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut tr = EkfTracker::new(
            array.clone(),
            init(FRAC_PI_2, 0.0, 1e4, 100.0, 1e-3, TrackerMode::ContinuousDiscrete),
        );
        for _ in 0..10_000 {
            tr.predict(1e-4);
            let y = Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            tr.update(&sample(y));
            let p = &tr.az.p;
            assert!((p[(0, 1)] - p[(1, 0)]).abs() < 1e-15, "asymmetry");
            assert!(tr.az.min_eigenvalue() >= -1e-10, "indefinite covariance");
        }
    }
}
