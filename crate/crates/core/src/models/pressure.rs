//! Internal energies `U` and their pressures `P(y) = U'(y) y - U(y) + U(0)`.
//!
//! The additive constant of `U` is chosen so that `g(y) = 2U - P - y >= 0`
//! (one space dimension), which is what makes the flux matrix positive
//! semidefinite.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PressureLaw {
    /// `U = y log y + offset`, `P = y`.
    Log { offset: f64 },
    /// `U = coef y^exp + offset`, `P = coef (exp - 1) y^exp`, with `1 < exp < 3`.
    Power { coef: f64, exp: f64, offset: f64 },
}

impl PressureLaw {
    /// Isothermal law with the standard offset `U(1) = 1`.
    pub fn log() -> Self {
        PressureLaw::Log { offset: 1.0 }
    }

    /// `U = y^g / (g - 1)` (so `P = y^g`), offset chosen by the minimisation scan.
    pub fn gamma_law(gamma_ad: f64) -> Result<Self> {
        if !(gamma_ad > 1.0 && gamma_ad < 3.0) {
            return Err(Error::Config(format!(
                "adiabatic exponent must lie in (1, 3), got {gamma_ad}"
            )));
        }
        Self::power(1.0 / (gamma_ad - 1.0), gamma_ad)
    }

    /// Capillary part of the Korteweg pressure: `P = y^(s+2) / 2`.
    pub fn korteweg(s: f64) -> Result<Self> {
        if !(s > -1.0 && s <= 1.0) {
            return Err(Error::Config(format!("capillarity exponent s must lie in (-1, 1], got {s}")));
        }
        Self::power(1.0 / (2.0 * (s + 1.0)), s + 2.0)
    }

    pub fn power(coef: f64, exp: f64) -> Result<Self> {
        if !(coef > 0.0) || !(exp > 1.0 && exp < 3.0) {
            return Err(Error::Config(format!("power law needs coef > 0 and 1 < exp < 3, got {coef}, {exp}")));
        }
        let raw = PressureLaw::Power { coef, exp, offset: 0.0 };
        let offset = (-0.5 * raw.g_min().1).max(0.0);
        Ok(PressureLaw::Power { coef, exp, offset })
    }

    /// Replaces the additive constant of `U`.
    pub fn with_offset(self, offset: f64) -> Self {
        match self {
            PressureLaw::Log { .. } => PressureLaw::Log { offset },
            PressureLaw::Power { coef, exp, .. } => PressureLaw::Power { coef, exp, offset },
        }
    }

    pub fn offset(&self) -> f64 {
        match *self {
            PressureLaw::Log { offset } | PressureLaw::Power { offset, .. } => offset,
        }
    }

    pub fn u(&self, y: f64) -> f64 {
        match *self {
            PressureLaw::Log { offset } => {
                if y == 0.0 {
                    offset
                } else {
                    y * y.ln() + offset
                }
            }
            PressureLaw::Power { coef, exp, offset } => coef * y.powf(exp) + offset,
        }
    }

    pub fn du(&self, y: f64) -> f64 {
        match *self {
            PressureLaw::Log { .. } => y.ln() + 1.0,
            PressureLaw::Power { coef, exp, .. } => coef * exp * y.powf(exp - 1.0),
        }
    }

    pub fn d2u(&self, y: f64) -> f64 {
        match *self {
            PressureLaw::Log { .. } => 1.0 / y,
            PressureLaw::Power { coef, exp, .. } => coef * exp * (exp - 1.0) * y.powf(exp - 2.0),
        }
    }

    pub fn p(&self, y: f64) -> f64 {
        match *self {
            PressureLaw::Log { .. } => y,
            PressureLaw::Power { coef, exp, .. } => coef * (exp - 1.0) * y.powf(exp),
        }
    }

    pub fn dp(&self, y: f64) -> f64 {
        match *self {
            PressureLaw::Log { .. } => 1.0,
            PressureLaw::Power { coef, exp, .. } => coef * exp * (exp - 1.0) * y.powf(exp - 1.0),
        }
    }

    pub fn d2p(&self, y: f64) -> f64 {
        match *self {
            PressureLaw::Log { .. } => 0.0,
            PressureLaw::Power { coef, exp, .. } => coef * exp * (exp - 1.0) * (exp - 1.0) * y.powf(exp - 2.0),
        }
    }

    /// Inverse of `U'`; `None` when `s` is outside the range of `U'` on `(0, inf)`.
    pub fn inv_du(&self, s: f64) -> Option<f64> {
        match *self {
            PressureLaw::Log { .. } => {
                let y = (s - 1.0).exp();
                (y > 0.0 && y.is_finite()).then_some(y)
            }
            PressureLaw::Power { coef, exp, .. } => {
                if s <= 0.0 {
                    return None;
                }
                let y = (s / (coef * exp)).powf(1.0 / (exp - 1.0));
                (y > 0.0 && y.is_finite()).then_some(y)
            }
        }
    }

    /// `2U - P - y`, the lower-right entry of the flux matrix minus the kinetic part.
    pub fn g(&self, y: f64) -> f64 {
        2.0 * self.u(y) - self.p(y) - y
    }

    /// `(argmin, min)` of `g` on `(0, inf)`. `g` is convex for both families.
    pub fn g_min(&self) -> (f64, f64) {
        let y = match *self {
            PressureLaw::Log { .. } => 1.0,
            PressureLaw::Power { coef, exp, .. } => (1.0 / (coef * exp * (3.0 - exp))).powf(1.0 / (exp - 1.0)),
        };
        (y, self.g(y))
    }

    /// Checks the normalisation and the pressure identity on a log-spaced scan.
    pub fn validate(&self) -> Result<()> {
        let u0 = self.u(0.0);
        for i in 0..=480 {
            let y = 10f64.powf(-8.0 + 12.0 * i as f64 / 480.0);
            let p = self.p(y);
            if p < 0.0 {
                return Err(Error::Config(format!("pressure negative at y={y}")));
            }
            let p_id = self.du(y) * y - self.u(y) + u0;
            if (p - p_id).abs() > 1e-12 * p.abs().max(1.0) * (1.0 + y) {
                return Err(Error::Internal(format!("pressure identity fails at y={y}: {p} vs {p_id}")));
            }
            let g = self.g(y);
            if g < -1e-10 * (1.0 + self.u(y).abs()) {
                return Err(Error::Config(format!(
                    "2U - P - y = {g:.3e} < 0 at y = {y:.3e}; raise the energy offset"
                )));
            }
        }
        let (y, g) = self.g_min();
        if g < -1e-10 {
            return Err(Error::Config(format!(
                "2U - P - y attains {g:.3e} < 0 at y = {y:.3e}; raise the energy offset"
            )));
        }
        Ok(())
    }
}
