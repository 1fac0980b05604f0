//! Closed-form pilot-period design.
//!
//! Between pilots the beam drifts off the target and the received power
//! ratio decays as zeta = exp(-(N T sin(phi))^2 phidot^2) with the residual
//! rate phidot ~ N(0, kappa Q T_LR). Everything here follows from that one
//! Gaussian model:
//!
//! * `beam_locking_time`: largest T keeping E[zeta] at a target mu_zeta.
//! * `outage_pilot_period`: largest T keeping P(rate < R_f) at P_out.
//! * `snr_cdf` / `snr_pdf`: the induced distribution of the received SNR.
//!
//! kappa in (0, 1] scales the residual-rate variance: kappa = 1 models a
//! tracker that applies no rate prediction between pilots (the Discrete
//! family), smaller kappa a continuous tracker whose slope estimate absorbs
//! most of the drift. The square-root ratio sqrt(kappa) between the two
//! families' periods is what turns into pilot overhead reduction.

use crate::error::{Error, Result};
use statrs::function::erf;

/// Operating point for the design formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignInputs {
    pub n_elements: usize,
    /// Rate-diffusion intensity Q, rad^2/s^3.
    pub q_intensity: f64,
    /// Link-reestablishment (frame) time T_LR, seconds.
    pub t_lr: f64,
    /// Operating angle, radians. Broadside is the worst case.
    pub phi_ref: f64,
    /// Slope-confidence parameter in (0, 1]; 1 = Discrete.
    pub kappa: f64,
    /// Target mean power ratio in (0, 1).
    pub mu_zeta: f64,
    /// Outage probability target in (0, 1).
    pub p_out: f64,
    /// Post-beamforming SNR, linear.
    pub rho: f64,
    /// Fixed operating rate R_f, bits/s/Hz.
    pub rate_fixed: f64,
    /// Pilot symbol time T_s, seconds.
    pub t_pilot_symbol: f64,
    /// Levels in the hierarchical sweep codebook.
    pub codebook_levels: u32,
}

impl DesignInputs {
    /// Broadside operating point with conservative defaults; override
    /// fields as needed before calling the design functions.
    pub fn new(n_elements: usize, q_intensity: f64, t_lr: f64) -> Self {
        DesignInputs {
            n_elements,
            q_intensity,
            t_lr,
            phi_ref: std::f64::consts::FRAC_PI_2,
            kappa: 1.0,
            mu_zeta: 0.5,
            p_out: 0.05,
            rho: 100.0,
            rate_fixed: 1.0,
            t_pilot_symbol: 1e-6,
            codebook_levels: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("q_intensity", self.q_intensity),
            ("t_lr", self.t_lr),
            ("rho", self.rho),
            ("rate_fixed", self.rate_fixed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::DesignDomain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_elements < 2 {
            return Err(Error::DesignDomain("need at least 2 elements".into()));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::DesignDomain(format!(
                "kappa must be in (0, 1], got {}",
                self.kappa
            )));
        }
        if !(self.mu_zeta > 0.0 && self.mu_zeta < 1.0) {
            return Err(Error::DesignDomain(format!(
                "mu_zeta must be in (0, 1), got {}",
                self.mu_zeta
            )));
        }
        if !(self.p_out > 0.0 && self.p_out < 1.0) {
            return Err(Error::DesignDomain(format!(
                "p_out must be in (0, 1), got {}",
                self.p_out
            )));
        }
        if !(self.t_pilot_symbol >= 0.0 && self.t_pilot_symbol.is_finite()) {
            return Err(Error::DesignDomain("t_pilot_symbol must be >= 0".into()));
        }
        if self.codebook_levels < 1 {
            return Err(Error::DesignDomain("codebook_levels must be >= 1".into()));
        }
        Ok(())
    }

    fn sin_ref(&self) -> Result<f64> {
        let s = self.phi_ref.sin();
        if s.abs() < 1e-12 {
            return Err(Error::DesignDomain(format!(
                "beam locking time is singular at phi_ref = {} (endfire geometry)",
                self.phi_ref
            )));
        }
        Ok(s)
    }
}

/// Upper-tail probability of the standard normal.
pub fn q_function(x: f64) -> f64 {
    0.5 * erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on (0, 1). A Newton step on top of the library
/// inverse keeps the result at full double precision; the pilot periods
/// depend on this value quadratically.
pub fn inverse_q(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DesignDomain(format!("inverse_q needs p in (0, 1), got {p}")));
    }
    let mut x = std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        let pdf = (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf <= f64::MIN_POSITIVE {
            break;
        }
        x += (q_function(x) - p) / pdf;
    }
    Ok(x)
}

/// Largest pilot period that keeps the expected power ratio at `mu_zeta`:
///
/// ```text
///   T_L = sqrt((1/mu^2 - 1) / (2 kappa Q T_LR sin^2(phi) N^2))
/// ```
///
/// With kappa = 1 this is the beam coherence time of a Discrete tracker.
pub fn beam_locking_time(d: &DesignInputs) -> Result<f64> {
    d.validate()?;
    let s = d.sin_ref()?;
    let n = d.n_elements as f64;
    let num = 1.0 / (d.mu_zeta * d.mu_zeta) - 1.0;
    let den = 2.0 * d.kappa * d.q_intensity * d.t_lr * s * s * n * n;
    Ok((num / den).sqrt())
}

/// Expected power ratio after tracking with pilot period `t`; the algebraic
/// inverse of [`beam_locking_time`].
pub fn expected_power_ratio(d: &DesignInputs, t: f64) -> Result<f64> {
    d.validate()?;
    let s = d.sin_ref()?;
    let a = t * d.n_elements as f64 * s;
    Ok(1.0 / (1.0 + 2.0 * d.kappa * d.q_intensity * d.t_lr * a * a).sqrt())
}

/// Largest pilot period meeting the outage target at the fixed rate:
///
/// ```text
///   T_o = sqrt( ln(rho / (2^Rf - 1)) / (N^2 sin^2(phi) kappa Q T_LR Qinv(P_out/2)^2) )
/// ```
pub fn outage_pilot_period(d: &DesignInputs) -> Result<f64> {
    d.validate()?;
    let s = d.sin_ref()?;
    let gamma_th = (2f64).powf(d.rate_fixed) - 1.0;
    if d.rho < gamma_th {
        return Err(Error::DesignDomain(format!(
            "outage pilot period: rate {} bits/s/Hz needs SNR >= {:.2} dB but rho = {:.2} dB",
            d.rate_fixed,
            10.0 * gamma_th.log10(),
            10.0 * d.rho.log10()
        )));
    }
    let n = d.n_elements as f64;
    let qi = inverse_q(d.p_out / 2.0)?;
    let c = n * n * s * s * d.kappa * d.q_intensity * d.t_lr * qi * qi;
    Ok(((d.rho / gamma_th).ln() / c).sqrt())
}

/// Pilot overhead saved by a slope-predicting tracker relative to a
/// Discrete one at the same target: 1 - sqrt(kappa).
pub fn overhead_reduction(kappa: f64) -> f64 {
    1.0 - kappa.sqrt()
}

fn log_variance(d: &DesignInputs, t: f64) -> Result<f64> {
    let s = d.sin_ref()?;
    let a = d.n_elements as f64 * t * s;
    Ok(a * a * d.kappa * d.q_intensity * d.t_lr)
}

/// CDF of the received SNR right before the next pilot:
/// F(gamma) = 2 Q(sqrt(ln(rho/gamma) / c)) with
/// c = (N T sin(phi))^2 kappa Q T_LR.
pub fn snr_cdf(gamma: f64, d: &DesignInputs, t: f64) -> Result<f64> {
    d.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::DesignDomain(format!("snr_cdf needs gamma > 0, got {gamma}")));
    }
    if gamma >= d.rho {
        // Drift can only lose gain, so all mass sits at or below rho.
        return Ok(1.0);
    }
    let c = log_variance(d, t)?;
    Ok(2.0 * q_function(((d.rho / gamma).ln() / c).sqrt()))
}

/// Density of the received SNR on (0, rho); the exact derivative of
/// [`snr_cdf`].
pub fn snr_pdf(gamma: f64, d: &DesignInputs, t: f64) -> Result<f64> {
    d.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::DesignDomain(format!("snr_pdf needs gamma > 0, got {gamma}")));
    }
    if gamma > d.rho {
        return Ok(0.0);
    }
    let c = log_variance(d, t)?;
    let l = (d.rho / gamma).ln();
    Ok((-l / (2.0 * c)).exp() / (gamma * (2.0 * std::f64::consts::PI * l * c).sqrt()))
}

/// Time for a full hierarchical beam sweep over `codebook_levels` stages.
pub fn sweep_time(d: &DesignInputs) -> f64 {
    let levels = d.codebook_levels as f64;
    let n = d.n_elements as f64;
    levels * (std::f64::consts::PI * n).powf(2.0 / levels) * d.t_pilot_symbol
}

/// Achievable rate discounted by pilot time within the period and sweep
/// time within the frame.
pub fn effective_rate(d: &DesignInputs, t: f64, achievable_rate: f64) -> Result<f64> {
    d.validate()?;
    if t <= d.t_pilot_symbol {
        return Err(Error::DesignDomain(format!(
            "effective rate: pilot period {t} s does not clear the pilot symbol {} s",
            d.t_pilot_symbol
        )));
    }
    let t_sw = sweep_time(d);
    Ok((t - d.t_pilot_symbol) / t * (d.t_lr / (d.t_lr + t_sw)) * achievable_rate)
}

/// Empirical slope-confidence parameter from (true rate, estimated rate)
/// samples of a tracker run: the residual rate variance relative to the
/// prior rate variance, clamped into (0, 1].
pub fn estimate_kappa(slope_pairs: &[(f64, f64)]) -> f64 {
    const FLOOR: f64 = 1e-4;
    if slope_pairs.is_empty() {
        return 1.0;
    }
    let n = slope_pairs.len() as f64;
    let mean = |f: &dyn Fn(&(f64, f64)) -> f64| slope_pairs.iter().map(|p| f(p)).sum::<f64>() / n;
    let m_err = mean(&|p| p.0 - p.1);
    let m_true = mean(&|p| p.0);
    let var_err = mean(&|p| (p.0 - p.1 - m_err).powi(2));
    let var_true = mean(&|p| (p.0 - m_true).powi(2));
    if var_true <= 0.0 {
        return 1.0;
    }
    (var_err / var_true).clamp(FLOOR, 1.0)
}
