//! Gaussian-beam trap parameters and harmonic-frequency relations.

use crate::consts::{K_B, M_CS, UM};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Optical tweezer trap parameters. Lengths in µm, depth in J.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TrapParams {
    /// Trap depth, J.
    pub depth: f64,
    /// 1/e² intensity waist, µm.
    pub waist: f64,
    /// Trapping wavelength, µm.
    pub wavelength: f64,
}

impl TrapParams {
    pub fn new(depth: f64, waist: f64, wavelength: f64) -> Result<Self> {
        if depth <= 0.0 || waist <= 0.0 || wavelength <= 0.0 {
            return Err(Error::domain("trap depth, waist and wavelength must be positive"));
        }
        Ok(TrapParams { depth, waist, wavelength })
    }

    /// Depth given in units of k_B × millikelvin.
    pub fn from_depth_mk(depth_mk: f64, waist: f64, wavelength: f64) -> Result<Self> {
        Self::new(K_B * depth_mk * 1e-3, waist, wavelength)
    }

    /// Rayleigh range z_R = π w0² / λ, µm.
    pub fn rayleigh(&self) -> f64 {
        std::f64::consts::PI * self.waist * self.waist / self.wavelength
    }

    /// Radial harmonic frequency ω_r = sqrt(4U / (m w0²)), rad/s.
    pub fn radial_freq(&self) -> f64 {
        let w0 = self.waist * UM;
        (4.0 * self.depth / (M_CS * w0 * w0)).sqrt()
    }

    /// Axial harmonic frequency ω_z = sqrt(2U / (m z_R²)), rad/s.
    pub fn axial_freq(&self) -> f64 {
        let zr = self.rayleigh() * UM;
        (2.0 * self.depth / (M_CS * zr * zr)).sqrt()
    }
}

/// Harmonic frequencies (ω_r, ω_z) of the Gaussian trap, rad/s.
pub fn trap_frequencies(trap: &TrapParams) -> (f64, f64) {
    (trap.radial_freq(), trap.axial_freq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn paper_scale_frequencies() {
        // U = k_B x 0.18 mK, w0 = 1.17 um -> ~29.3 kHz radial, ~5.64 kHz axial
        let t = TrapParams::from_depth_mk(0.18, 1.17, 1.061).unwrap();
        let (wr, wz) = trap_frequencies(&t);
        let fr = wr / TAU;
        let fz = wz / TAU;
        assert!((fr - 29.3e3).abs() < 0.1 * 29.3e3, "radial {fr}");
        assert!((fz - 5.64e3).abs() < 0.1 * 5.64e3, "axial {fz}");
    }

    #[test]
    fn quadrupling_depth_doubles_frequencies() {
        let t = TrapParams::from_depth_mk(0.18, 1.17, 1.061).unwrap();
        let t4 = TrapParams::new(4.0 * t.depth, t.waist, t.wavelength).unwrap();
        let (wr, wz) = trap_frequencies(&t);
        let (wr4, wz4) = trap_frequencies(&t4);
        assert!((wr4 / wr - 2.0).abs() < 1e-12);
        assert!((wz4 / wz - 2.0).abs() < 1e-12);
    }

    #[test]
    fn frequency_ratio_identity() {
        // omega_r / omega_z = sqrt(2) z_R / w0 exactly
        for &(d, w, l) in &[(0.18, 1.17, 1.061), (0.28, 0.9, 1.055), (0.055, 2.0, 0.85)] {
            let t = TrapParams::from_depth_mk(d, w, l).unwrap();
            let lhs = t.radial_freq() / t.axial_freq();
            let rhs = 2f64.sqrt() * t.rayleigh() / t.waist;
            assert!((lhs / rhs - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(TrapParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(TrapParams::new(1e-25, 0.0, 1.0).is_err());
    }
}
