//! Attenuated-laser source: photon budget and the emitted OAM state.
//!
//! The Sagnac encoder is represented only by its output state; polarization
//! is projected out before the channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{self, ComplexField, GridSpec, LGModeSpec, SuperpositionSpec};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const DEFAULT_WAVELENGTH: f64 = 532e-9;
pub const DEFAULT_SLOT: f64 = 1e-9;

/// The state leaving the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EmittedState {
    Pure { ell: i32 },
    Superposition(SuperpositionSpec),
}

impl EmittedState {
    pub fn ell_magnitude(&self) -> u32 {
        match self {
            EmittedState::Pure { ell } => ell.unsigned_abs(),
            EmittedState::Superposition(s) => s.ell,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub power: f64,
    pub wavelength: f64,
    pub slot: f64,
    pub state: EmittedState,
}

impl SourceSpec {
    pub fn new(power: f64, state: EmittedState) -> Result<Self> {
        let spec = SourceSpec {
            power,
            wavelength: DEFAULT_WAVELENGTH,
            slot: DEFAULT_SLOT,
            state,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(Error::invalid(format!("source power must be >= 0, got {}", self.power)));
        }
        if !(self.slot > 0.0 && self.slot.is_finite()) {
            return Err(Error::invalid(format!("time slot must be > 0, got {}", self.slot)));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid(format!(
                "wavelength must be > 0, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonBudget {
    /// Joules per photon.
    pub photon_energy: f64,
    /// Photons per second.
    pub rate: f64,
    /// Mean photons per time slot.
    pub mean_per_slot: f64,
}

pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

pub fn photon_budget(src: &SourceSpec) -> PhotonBudget {
    let photon_energy = photon_energy(src.wavelength);
    let rate = src.power / photon_energy;
    PhotonBudget {
        photon_energy,
        rate,
        mean_per_slot: rate * src.slot,
    }
}

/// Power needed for a given mean photon number per slot.
pub fn power_for_mean_per_slot(mean_per_slot: f64, wavelength: f64, slot: f64) -> f64 {
    mean_per_slot * photon_energy(wavelength) / slot
}

/// Unit-power field of the emitted state at the waist plane.
pub fn emit(src: &SourceSpec, grid: &GridSpec, waist: f64) -> Result<ComplexField> {
    src.validate()?;
    match src.state {
        EmittedState::Pure { ell } => {
            let mode = LGModeSpec::new(ell, 0, waist, src.wavelength)?;
            modes::lg_field(&mode, grid, 0.0)
        }
        EmittedState::Superposition(spec) => modes::superpose(&spec, grid, waist, src.wavelength),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn femtowatt_scale_power_gives_half_photon_per_second() {
        let src = SourceSpec::new(1.898e-19, EmittedState::Pure { ell: 1 }).unwrap();
        let b = photon_budget(&src);
        assert_relative_eq!(b.photon_energy, 3.734e-19, max_relative = 1e-3);
        assert!((b.rate - 0.508).abs() < 0.005, "rate {}", b.rate);
        assert!(b.mean_per_slot < 1e-9);
    }

    #[test]
    fn per_nanosecond_reading_needs_nine_orders_more_power() {
        let src = SourceSpec::new(1.898e-10, EmittedState::Pure { ell: 1 }).unwrap();
        let b = photon_budget(&src);
        assert!((b.mean_per_slot - 0.508).abs() < 0.005);
        assert_relative_eq!(
            power_for_mean_per_slot(b.mean_per_slot, src.wavelength, src.slot),
            1.898e-10,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_power_and_validation() {
        let src = SourceSpec::new(0.0, EmittedState::Pure { ell: 0 }).unwrap();
        let b = photon_budget(&src);
        assert_eq!((b.rate, b.mean_per_slot), (0.0, 0.0));
        assert!(SourceSpec::new(-1.0, EmittedState::Pure { ell: 0 }).is_err());
        let mut bad = src;
        bad.slot = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn budget_is_linear_in_power() {
        let a = photon_budget(&SourceSpec::new(3.3e-12, EmittedState::Pure { ell: 1 }).unwrap());
        let b = photon_budget(&SourceSpec::new(6.6e-12, EmittedState::Pure { ell: 1 }).unwrap());
        assert_eq!(b.rate, 2.0 * a.rate);
    }
}
