//! Antenna array responses for analog beamforming.
//!
//! A uniform linear array (ULA) of `N` elements at spacing `delta` (in
//! wavelengths) steered by phase shifters produces, for an arrival angle
//! `phi` and a steering angle `phi_bar`, the normalized signal part
//!
//! ```text
//!   h(phi, phi_bar) = (1/N) * sum_{m=0}^{N-1} exp(-j 2 pi delta m (cos phi - cos phi_bar))
//! ```
//!
//! which is the only quantity the trackers ever observe: `|h| = 1` at perfect
//! alignment and decays through the array pattern as the beam slips. A square
//! planar array (UPA) factors into the Kronecker product of two ULAs of side
//! `sqrt(N)`, one per angle coordinate, so every UPA quantity here reduces to
//! products of ULA factors.
//!
//! Summations are evaluated term by term in element order. The deep pattern
//! nulls rely on faithful cancellation of unit phasors; do not reassociate.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};

/// Array layout. `Upa` is a square grid indexed elevation-major, matching the
/// Kronecker order `a(theta) ⊗ a(phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayGeometry {
    Ula,
    Upa,
}

/// Static description of the receive array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    pub geometry: ArrayGeometry,
    /// Total element count. For `Upa` this must be a perfect square.
    pub n_elements: usize,
    /// Element spacing in carrier wavelengths.
    pub spacing: f64,
    /// Phase shifter resolution in bits; `None` models ideal (continuous)
    /// phase shifters.
    pub phase_bits: Option<u32>,
    /// Pin the elevation plane at broadside (90 degrees). Lets a UPA run
    /// azimuth-only scenarios.
    pub fixed_elevation: bool,
}

impl ArrayConfig {
    /// Ideal-phase ULA.
    pub fn ula(n_elements: usize, spacing: f64) -> Result<Self> {
        Self::new(ArrayGeometry::Ula, n_elements, spacing)
    }

    /// Ideal-phase square UPA with `n_elements` total elements.
    pub fn upa(n_elements: usize, spacing: f64) -> Result<Self> {
        Self::new(ArrayGeometry::Upa, n_elements, spacing)
    }

    pub fn new(geometry: ArrayGeometry, n_elements: usize, spacing: f64) -> Result<Self> {
        let cfg = ArrayConfig {
            geometry,
            n_elements,
            spacing,
            phase_bits: None,
            fixed_elevation: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same array with quantized phase shifters.
    pub fn with_phase_bits(mut self, bits: u32) -> Self {
        self.phase_bits = Some(bits);
        self
    }

    /// Same array with the elevation plane pinned at broadside.
    pub fn with_fixed_elevation(mut self) -> Self {
        self.fixed_elevation = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_elements < 2 {
            return Err(Error::ArrayConfig(format!(
                "need at least 2 elements, got {}",
                self.n_elements
            )));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::ArrayConfig(format!(
                "spacing must be positive and finite, got {}",
                self.spacing
            )));
        }
        if self.geometry == ArrayGeometry::Upa && side_len(self.n_elements).is_none() {
            return Err(Error::ArrayConfig(format!(
                "UPA needs a square element count, got {}",
                self.n_elements
            )));
        }
        if let Some(bits) = self.phase_bits {
            if bits == 0 || bits > 32 {
                return Err(Error::ArrayConfig(format!(
                    "phase resolution must be 1..=32 bits, got {bits}"
                )));
            }
        }
        Ok(())
    }

    /// Side length of the UPA grid, or `n_elements` for a ULA.
    pub fn plane_elements(&self) -> usize {
        match self.geometry {
            ArrayGeometry::Ula => self.n_elements,
            ArrayGeometry::Upa => side_len(self.n_elements).expect("validated square"),
        }
    }

    /// Copy with ideal phase shifters; the trackers model the array without
    /// hardware quantization even when the measured signal includes it.
    pub fn ideal_model(&self) -> Self {
        let mut cfg = *self;
        cfg.phase_bits = None;
        cfg
    }
}

fn side_len(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}

/// Direction of arrival or steering. Azimuth is reduced to `[0, 2*pi)` on
/// construction; elevation is `None` for ULA use and defaults to broadside
/// when a UPA routine needs it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    azimuth: f64,
    elevation: Option<f64>,
}

impl Angle {
    pub fn ula(azimuth: f64) -> Self {
        Angle {
            azimuth: wrap_tau(azimuth),
            elevation: None,
        }
    }

    pub fn upa(azimuth: f64, elevation: f64) -> Self {
        Angle {
            azimuth: wrap_tau(azimuth),
            elevation: Some(wrap_tau(elevation)),
        }
    }

    #[inline]
    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    #[inline]
    pub fn elevation(&self) -> Option<f64> {
        self.elevation
    }

    /// Elevation to use against `cfg`: the stored value, unless the config
    /// pins the plane (or has no elevation plane at all).
    fn effective_elevation(&self, cfg: &ArrayConfig) -> f64 {
        if cfg.fixed_elevation {
            FRAC_PI_2
        } else {
            self.elevation.unwrap_or(FRAC_PI_2)
        }
    }
}

#[inline]
fn wrap_tau(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can return TAU itself when x is a tiny negative number.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

// ─── steering and beamforming vectors ───────────────────────────────────────

/// Array response `a(angle)`; entry `m` of the ULA factor is
/// `exp(-j 2 pi delta m cos(angle))`. UPA responses are `a(theta) ⊗ a(phi)`.
pub fn steering_vector(cfg: &ArrayConfig, angle: Angle) -> Vec<Complex64> {
    match cfg.geometry {
        ArrayGeometry::Ula => plane_steering(cfg.n_elements, cfg.spacing, angle.azimuth()),
        ArrayGeometry::Upa => {
            let side = cfg.plane_elements();
            let az = plane_steering(side, cfg.spacing, angle.azimuth());
            let el = plane_steering(side, cfg.spacing, angle.effective_elevation(cfg));
            let mut out = Vec::with_capacity(cfg.n_elements);
            for e in &el {
                for a in &az {
                    out.push(e * a);
                }
            }
            out
        }
    }
}

fn plane_steering(n: usize, spacing: f64, angle: f64) -> Vec<Complex64> {
    let step = -TAU * spacing * angle.cos();
    (0..n)
        .map(|m| Complex64::from_polar(1.0, step * m as f64))
        .collect()
}

/// Unit-norm analog beamformer `a(angle) / sqrt(N)`. With `phase_bits = b`
/// every entry phase snaps to the nearest of the `2^b` uniform phases, ties
/// toward the smaller phase; magnitudes are untouched, so the norm stays 1.
pub fn beamforming_vector(cfg: &ArrayConfig, angle: Angle) -> Vec<Complex64> {
    let mut v = steering_vector(cfg, angle);
    let scale = 1.0 / (cfg.n_elements as f64).sqrt();
    match cfg.phase_bits {
        None => {
            for w in &mut v {
                *w *= scale;
            }
        }
        Some(bits) => {
            for w in &mut v {
                *w = Complex64::from_polar(scale, quantize_phase(w.arg(), bits));
            }
        }
    }
    v
}

/// Snap `psi` to the codebook `{2 pi i / 2^bits}`, half-way ties toward the
/// smaller phase. Returns a value in `[0, 2*pi)`.
fn quantize_phase(psi: f64, bits: u32) -> f64 {
    let levels = (1u64 << bits) as f64;
    let step = TAU / levels;
    let q = wrap_tau(psi) / step;
    let lower = q.floor();
    let frac = q - lower;
    let idx = if frac > 0.5 {
        lower + 1.0
    } else if frac < 0.5 {
        lower
    } else {
        // Exact half-way: the smaller phase value wins, which is the upper
        // neighbour only in the cell that wraps back to zero.
        if wrap_tau((lower + 1.0) * step) < wrap_tau(lower * step) {
            lower + 1.0
        } else {
            lower
        }
    };
    wrap_tau(idx * step)
}

// ─── normalized signal part ─────────────────────────────────────────────────

/// Normalized signal part `h(arrival, beam)`: the matched filter output of
/// the beamformer against the arrival response, scaled so that `|h| <= 1`
/// with equality at perfect alignment. With quantized phase shifters the
/// actual (quantized) beamformer is used.
pub fn signal_part(cfg: &ArrayConfig, arrival: Angle, beam: Angle) -> Complex64 {
    if cfg.phase_bits.is_some() {
        let w = beamforming_vector(cfg, beam);
        let a = steering_vector(cfg, arrival);
        let dot: Complex64 = w.iter().zip(&a).map(|(wm, am)| wm.conj() * am).sum();
        return dot / (cfg.n_elements as f64).sqrt();
    }
    match cfg.geometry {
        ArrayGeometry::Ula => plane_signal_part(
            cfg.n_elements,
            cfg.spacing,
            arrival.azimuth(),
            beam.azimuth(),
        ),
        ArrayGeometry::Upa => {
            let side = cfg.plane_elements();
            let az = plane_signal_part(side, cfg.spacing, arrival.azimuth(), beam.azimuth());
            let el = plane_signal_part(
                side,
                cfg.spacing,
                arrival.effective_elevation(cfg),
                beam.effective_elevation(cfg),
            );
            az * el
        }
    }
}

fn plane_signal_part(n: usize, spacing: f64, arrival: f64, beam: f64) -> Complex64 {
    let u = arrival.cos() - beam.cos();
    let step = -TAU * spacing * u;
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..n {
        acc += Complex64::from_polar(1.0, step * m as f64);
    }
    acc / n as f64
}

/// Gradient of the (ideal-phase) signal part with respect to the arrival
/// angles, evaluated at `(arrival, beam)`. Returns `(d h / d phi, d h / d
/// theta)`; the elevation entry is `None` for a ULA or a pinned plane.
pub fn signal_part_gradient(
    cfg: &ArrayConfig,
    arrival: Angle,
    beam: Angle,
) -> (Complex64, Option<Complex64>) {
    match cfg.geometry {
        ArrayGeometry::Ula => (
            plane_gradient(
                cfg.n_elements,
                cfg.spacing,
                arrival.azimuth(),
                beam.azimuth(),
            ),
            None,
        ),
        ArrayGeometry::Upa => {
            let side = cfg.plane_elements();
            let (phi, phi_bar) = (arrival.azimuth(), beam.azimuth());
            let (theta, theta_bar) = (
                arrival.effective_elevation(cfg),
                beam.effective_elevation(cfg),
            );
            let h_az = plane_signal_part(side, cfg.spacing, phi, phi_bar);
            let h_el = plane_signal_part(side, cfg.spacing, theta, theta_bar);
            let g_az = h_el * plane_gradient(side, cfg.spacing, phi, phi_bar);
            if cfg.fixed_elevation {
                (g_az, None)
            } else {
                let g_el = h_az * plane_gradient(side, cfg.spacing, theta, theta_bar);
                (g_az, Some(g_el))
            }
        }
    }
}

fn plane_gradient(n: usize, spacing: f64, arrival: f64, beam: f64) -> Complex64 {
    let u = arrival.cos() - beam.cos();
    let step = -TAU * spacing * u;
    let scale = TAU * spacing * arrival.sin();
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..n {
        let m = m as f64;
        acc += Complex64::i() * scale * m * Complex64::from_polar(1.0, step * m);
    }
    acc / n as f64
}

/// Gaussian main-lobe approximation of `|h|` for a ULA:
/// `exp(-(N^2 / 2) (cos phi - cos phi_bar)^2)`. Only meaningful inside the
/// main lobe; the ML tracker inverts it there.
pub fn mainlobe_magnitude(cfg: &ArrayConfig, arrival: Angle, beam: Angle) -> Result<f64> {
    if cfg.geometry != ArrayGeometry::Ula {
        return Err(Error::UlaOnly("main-lobe magnitude approximation"));
    }
    let u = arrival.azimuth().cos() - beam.azimuth().cos();
    let n = cfg.n_elements as f64;
    Ok((-(n * n) / 2.0 * u * u).exp())
}
