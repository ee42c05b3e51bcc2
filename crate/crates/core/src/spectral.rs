//! Bath spectral densities and their finite-temperature (thermalized) form.
//!
//! A finite-temperature bath in its thermal state is equivalent to a
//! zero-temperature bath whose spectral density is extended to negative
//! frequencies,
//!
//! ```text
//! J(ω, β) = sign(ω) J(|ω|) [1 + coth(βω/2)] / 2
//! ```
//!
//! so the bath can start in its vacuum. For ω > 0 this is `J(ω) / (1 − e^{−βω})`
//! and for ω < 0 it is `J(|ω|) / (e^{β|ω|} − 1)`; both forms are evaluated with
//! `expm1` to stay accurate near ω = 0, where the density has the finite limit
//! `J'(0) / β`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;

/// Below `SINGULAR_BAND · ω_c` the thermalized density is replaced by its
/// analytic ω → 0 limit.
const SINGULAR_BAND: f64 = 1e-8;

/// A positive-frequency spectral density J(ω).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpectralDensity {
    /// `J(ω) = η ω_c ω / (ω_c² + ω²)`
    Drude { eta: f64, omega_c: f64 },
}

impl SpectralDensity {
    pub fn drude(eta: f64, omega_c: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::Domain(format!("coupling strength must be >= 0, got {eta}")));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::Domain(format!("characteristic frequency must be > 0, got {omega_c}")));
        }
        Ok(SpectralDensity::Drude { eta, omega_c })
    }

    pub fn characteristic_frequency(&self) -> f64 {
        match *self {
            SpectralDensity::Drude { omega_c, .. } => omega_c,
        }
    }

    /// J(ω) for ω > 0.
    pub fn eval(&self, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::Domain(format!("spectral density needs omega > 0, got {omega}")));
        }
        Ok(self.eval_unchecked(omega))
    }

    pub(crate) fn eval_unchecked(&self, omega: f64) -> f64 {
        match *self {
            SpectralDensity::Drude { eta, omega_c } => {
                if omega.is_infinite() {
                    return 0.0;
                }
                eta * omega_c * omega / (omega_c * omega_c + omega * omega)
            }
        }
    }

    /// dJ/dω at ω = 0.
    pub fn low_frequency_slope(&self) -> f64 {
        match *self {
            SpectralDensity::Drude { eta, omega_c } => eta / omega_c,
        }
    }

    /// `(4/π) ∫_0^∞ J(ω)/ω dω`, evaluated numerically on the substitution
    /// ω = ω_c tan θ.
    pub fn reorganization_energy(&self) -> Result<f64> {
        let wc = self.characteristic_frequency();
        let integrand = |theta: f64| {
            let omega = wc * theta.tan();
            if omega <= 0.0 {
                return self.low_frequency_slope() * wc;
            }
            let sec2 = 1.0 / theta.cos().powi(2);
            if !sec2.is_finite() {
                return 0.0;
            }
            self.eval_unchecked(omega) / omega * wc * sec2
        };
        let value = integrate_adaptive(integrand, 0.0, 0.5 * PI, 1e-12)?;
        Ok(4.0 / PI * value)
    }
}

/// A weight function on a finite interval, used to generate orthogonal
/// polynomials.
pub trait Weight {
    fn domain(&self) -> (f64, f64);
    /// h²(x); callers stay inside `domain()`.
    fn density(&self, x: f64) -> f64;
}

/// Constant weight 1 on `[lower, upper]`; generates the Legendre family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatWeight {
    pub lower: f64,
    pub upper: f64,
}

impl Weight for FlatWeight {
    fn domain(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    fn density(&self, _x: f64) -> f64 {
        1.0
    }
}

/// The temperature-dependent squared coupling h²(ω, β) = J(ω, β) on a
/// truncated frequency window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalizedWeight {
    pub base: SpectralDensity,
    /// Inverse temperature; `f64::INFINITY` at zero temperature.
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ThermalizedWeight {
    /// `temperature` is k_BT in energy units; zero selects the one-sided
    /// zero-temperature density on `[0, ω_max]`. `omega_max = None` uses
    /// [`ThermalizedWeight::default_cutoff`].
    pub fn new(base: SpectralDensity, temperature: f64, omega_max: Option<f64>) -> Result<Self> {
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::Domain(format!("temperature must be >= 0, got {temperature}")));
        }
        let cutoff = omega_max.unwrap_or_else(|| Self::default_cutoff(&base, temperature));
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::Domain(format!("frequency cutoff must be > 0, got {cutoff}")));
        }
        let beta = if temperature == 0.0 { f64::INFINITY } else { 1.0 / temperature };
        let lower = if temperature == 0.0 { 0.0 } else { -cutoff };
        Ok(Self { base, beta, lower, upper: cutoff })
    }

    /// `max(10 ω_c, 10 k_BT + 5 ω_c)`
    pub fn default_cutoff(base: &SpectralDensity, temperature: f64) -> f64 {
        let wc = base.characteristic_frequency();
        (10.0 * wc).max(10.0 * temperature + 5.0 * wc)
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    pub fn temperature(&self) -> f64 {
        if self.is_zero_temperature() {
            0.0
        } else {
            1.0 / self.beta
        }
    }

    /// J(ω, β) for ω in the frequency window.
    pub fn eval(&self, omega: f64) -> Result<f64> {
        if !(omega >= self.lower && omega <= self.upper) {
            return Err(Error::Domain(format!(
                "omega {omega} outside thermalized domain [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(self.eval_unchecked(omega))
    }

    /// h(ω, β) = sqrt(J(ω, β)).
    pub fn coupling(&self, omega: f64) -> Result<f64> {
        self.eval(omega).map(f64::sqrt)
    }

    fn eval_unchecked(&self, omega: f64) -> f64 {
        if self.is_zero_temperature() {
            return if omega > 0.0 { self.base.eval_unchecked(omega) } else { 0.0 };
        }
        let wc = self.base.characteristic_frequency();
        if omega.abs() < SINGULAR_BAND * wc {
            return self.base.low_frequency_slope() / self.beta;
        }
        let x = self.beta * omega.abs();
        let j = self.base.eval_unchecked(omega.abs());
        if omega > 0.0 {
            j / -(-x).exp_m1()
        } else {
            j / x.exp_m1()
        }
    }
}

impl Weight for ThermalizedWeight {
    fn domain(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    fn density(&self, x: f64) -> f64 {
        self.eval_unchecked(x)
    }
}
