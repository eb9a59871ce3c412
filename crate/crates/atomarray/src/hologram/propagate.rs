//! Out-of-plane intensity profiles of a row of tweezer spots.
//!
//! The field is propagated with a 1D angular spectrum along the tweezer axis;
//! the orthogonal (unsimulated) transverse axis contributes the analytic
//! Gaussian-beam axial factor, so a single spot reproduces the full 3D
//! on-axis intensity 1/(1 + (z/z_R)²) exactly. Spot groups with different
//! wavelengths are propagated independently and summed in intensity (mutually
//! non-interfering).

use crate::error::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// A set of mutually coherent spots sharing one wavelength.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpotGroup {
    /// Spot centers along the tweezer axis, µm.
    pub positions: Vec<f64>,
    /// Field amplitudes (relative).
    pub amplitudes: Vec<f64>,
    /// Wavelength, µm.
    pub wavelength_um: f64,
}

impl SpotGroup {
    pub fn uniform_row(n: usize, spacing: f64, wavelength_um: f64) -> Self {
        let off = (n as f64 - 1.0) / 2.0;
        SpotGroup {
            positions: (0..n).map(|i| (i as f64 - off) * spacing).collect(),
            amplitudes: vec![1.0; n],
            wavelength_um,
        }
    }
}

/// Intensity over (propagation axis z) × (tweezer axis x), max-normalized.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldSlice {
    /// nz × nx, normalized to max = 1.
    pub intensity: Array2<f64>,
    /// Tweezer-axis coordinates, µm.
    pub x: Vec<f64>,
    /// Propagation-axis coordinates, µm; focal plane at z = 0.
    pub z: Vec<f64>,
}

impl FieldSlice {
    /// Intensity at the grid point nearest (x, z).
    pub fn at(&self, x: f64, z: f64) -> f64 {
        let ix = nearest(&self.x, x);
        let iz = nearest(&self.z, z);
        self.intensity[(iz, ix)]
    }
}

fn nearest(axis: &[f64], v: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (*a - v).abs().partial_cmp(&(*b - v).abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

/// Propagate spot groups of common waist `waist_um` over z ∈ [z_min, z_max]
/// sampled at `nz` planes, with tweezer-axis resolution `dx_um`.
pub fn propagate_out_of_plane(
    groups: &[SpotGroup],
    waist_um: f64,
    z_min: f64,
    z_max: f64,
    nz: usize,
    dx_um: f64,
) -> Result<FieldSlice> {
    if groups.is_empty() || nz < 2 {
        return Err(Error::domain("need at least one spot group and two z planes"));
    }
    let required = waist_um / 2.0;
    if dx_um > required {
        return Err(Error::UnderSampled { required_um: required, got_um: dx_um });
    }

    // grid wide enough that spots plus their diffraction stay far from the
    // periodic wrap-around
    let extent = groups
        .iter()
        .flat_map(|g| g.positions.iter())
        .fold(0.0f64, |m, &p| m.max(p.abs()));
    let width = 2.0 * extent + 40.0 * waist_um;
    let mut nx = 64usize;
    while (nx as f64) * dx_um < width {
        nx *= 2;
    }
    let xs: Vec<f64> = (0..nx).map(|i| (i as f64 - nx as f64 / 2.0) * dx_um).collect();
    let zs: Vec<f64> = (0..nz)
        .map(|i| z_min + (z_max - z_min) * i as f64 / (nz - 1) as f64)
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nx);
    let ifft = planner.plan_fft_inverse(nx);

    let mut intensity = Array2::zeros((nz, nx));
    for g in groups {
        if g.positions.len() != g.amplitudes.len() {
            return Err(Error::domain("positions/amplitudes length mismatch"));
        }
        let k = TAU / g.wavelength_um;
        let z_r = PI * waist_um * waist_um / g.wavelength_um;

        let mut spectrum: Vec<Complex64> = xs
            .iter()
            .map(|&x| {
                let mut e = 0.0;
                for (&p, &a) in g.positions.iter().zip(&g.amplitudes) {
                    let u = (x - p) / waist_um;
                    e += a * (-u * u).exp();
                }
                Complex64::new(e, 0.0)
            })
            .collect();
        fft.process(&mut spectrum);

        let kxs: Vec<f64> = (0..nx)
            .map(|i| {
                let j = if i <= nx / 2 { i as f64 } else { i as f64 - nx as f64 };
                TAU * j / (nx as f64 * dx_um)
            })
            .collect();

        for (iz, &z) in zs.iter().enumerate() {
            let mut plane: Vec<Complex64> = spectrum
                .iter()
                .zip(&kxs)
                .map(|(&s, &kx)| {
                    let kz2 = k * k - kx * kx;
                    if kz2 >= 0.0 {
                        // carrier e^{ikz} removed: phase referenced to focus
                        s * Complex64::from_polar(1.0, (kz2.sqrt() - k) * z)
                    } else {
                        s * (-(-kz2).sqrt() * z.abs()).exp()
                    }
                })
                .collect();
            ifft.process(&mut plane);
            let y_factor = 1.0 / (1.0 + (z / z_r).powi(2)).sqrt();
            for (ix, v) in plane.iter().enumerate() {
                intensity[(iz, ix)] += v.norm_sqr() / (nx as f64 * nx as f64) * y_factor;
            }
        }
    }

    let max = intensity.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        intensity.mapv_inplace(|v| v / max);
    }
    Ok(FieldSlice { intensity, x: xs, z: zs })
}
