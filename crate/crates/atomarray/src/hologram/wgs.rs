//! Gerchberg–Saxton phase retrieval (plain and weighted) over a scalar
//! Fourier-optics forward model: unitary FFT between the SLM pixel plane and
//! the focal plane.

use super::TargetPattern;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SlmSpec {
    /// Pixels per side (square grid).
    pub n: usize,
    /// Pixel pitch, µm.
    pub pixel_um: f64,
    /// Focal length, mm.
    pub focal_mm: f64,
    /// Wavelength, µm.
    pub wavelength_um: f64,
}

impl SlmSpec {
    /// Focal-plane sampling pitch λf/(Na), µm.
    pub fn focal_pitch(&self) -> f64 {
        self.wavelength_um * self.focal_mm * 1e3 / (self.n as f64 * self.pixel_um)
    }

    /// Addressable half-window λf/(2a), µm.
    pub fn half_window(&self) -> f64 {
        self.focal_pitch() * self.n as f64 / 2.0
    }

    /// Spec whose focal pitch divides `spacing` exactly `bins_per_site` times,
    /// convenient for grid targets.
    pub fn for_spacing(n: usize, pixel_um: f64, wavelength_um: f64, spacing: f64, bins_per_site: usize) -> Self {
        let pitch = spacing / bins_per_site as f64;
        let focal_mm = pitch * n as f64 * pixel_um / wavelength_um * 1e-3;
        SlmSpec { n, pixel_um, focal_mm, wavelength_um }
    }

    fn site_bin(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        let pitch = self.focal_pitch();
        let half = self.half_window();
        if x.abs() >= half || y.abs() >= half {
            return Err(Error::domain(format!(
                "site ({x:.1}, {y:.1}) um outside addressable half-window {half:.1} um"
            )));
        }
        let wrap = |v: f64| -> usize {
            let k = (v / pitch).round() as i64;
            k.rem_euclid(self.n as i64) as usize
        };
        Ok((wrap(y), wrap(x)))
    }
}

/// Phase-only hologram over the SLM pixel grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PhaseHologram {
    /// Phase in radians, wrapped to [0, 2π).
    pub phase: Array2<f64>,
    pub spec: SlmSpec,
}

fn fft2(field: &mut Array2<Complex64>, planner: &mut FftPlanner<f64>, inverse: bool) {
    let n = field.nrows();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    // rows
    for mut row in field.rows_mut() {
        let s = row.as_slice_mut().expect("contiguous row");
        fft.process(s);
    }
    // columns via a scratch buffer
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = field[(i, j)];
        }
        fft.process(&mut col);
        for i in 0..n {
            field[(i, j)] = col[i];
        }
    }
    // unitary normalization (1/N total over both passes)
    let norm = 1.0 / n as f64;
    field.mapv_inplace(|v| v * norm);
}

/// Forward model: focal-plane complex field of a phase-only hologram with
/// uniform illumination of unit total power. Unitary, so total focal power
/// equals 1.
pub fn forward_field(holo: &PhaseHologram, planner: &mut FftPlanner<f64>) -> Array2<Complex64> {
    let n = holo.spec.n;
    let amp = 1.0 / n as f64; // sum of |amp|^2 over n^2 pixels = 1
    let mut field = holo.phase.mapv(|p| Complex64::from_polar(amp, p));
    fft2(&mut field, planner, false);
    field
}

/// Simulated per-site intensities under the crate's forward model.
pub fn site_intensities(holo: &PhaseHologram, target: &TargetPattern) -> Result<Vec<f64>> {
    let mut planner = FftPlanner::new();
    let field = forward_field(holo, &mut planner);
    target
        .sites
        .iter()
        .map(|&(x, y)| {
            let (r, c) = holo.spec.site_bin(x, y)?;
            Ok(field[(r, c)].norm_sqr())
        })
        .collect()
}

fn optimize(
    spec: &SlmSpec,
    target: &TargetPattern,
    iters: usize,
    rng: &mut SeededRng,
    weighted: bool,
    warm_start: Option<&Array2<f64>>,
) -> Result<PhaseHologram> {
    let n = spec.n;
    let bins: Vec<(usize, usize)> = target
        .sites
        .iter()
        .map(|&(x, y)| spec.site_bin(x, y))
        .collect::<Result<_>>()?;
    {
        let mut seen = std::collections::HashSet::new();
        for &b in &bins {
            if !seen.insert(b) {
                return Err(Error::domain("two target sites map to the same focal bin"));
            }
        }
    }

    // goal amplitudes ∝ W (intensity ∝ W²)
    let norm: f64 = target.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let goal: Vec<f64> = target.weights.iter().map(|w| w / norm).collect();
    let mut v = goal.clone();

    let mut phase = match warm_start {
        Some(p) => p.clone(),
        None => Array2::from_shape_fn((n, n), |_| rng.gen::<f64>() * TAU),
    };
    let mut planner = FftPlanner::new();
    let amp = 1.0 / n as f64;

    for _ in 0..iters {
        let mut field = phase.mapv(|p| Complex64::from_polar(amp, p));
        fft2(&mut field, &mut planner, false);

        if weighted {
            // adapt internal amplitudes toward the goal ratios
            let mut total = 0.0;
            let measured: Vec<f64> = bins.iter().map(|&(r, c)| field[(r, c)].norm().max(1e-12)).collect();
            for ((vi, &m), &g) in v.iter_mut().zip(&measured).zip(&goal) {
                *vi *= g / m;
                total += *vi * *vi;
            }
            let s = total.sqrt();
            for vi in &mut v {
                *vi /= s;
            }
        }

        // focal constraint: prescribed amplitude at sites, zero elsewhere,
        // retrieved phase kept
        let mut constrained = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
        for (&(r, c), &vi) in bins.iter().zip(&v) {
            let ph = field[(r, c)].arg();
            constrained[(r, c)] = Complex64::from_polar(vi, ph);
        }
        fft2(&mut constrained, &mut planner, true);
        phase = constrained.mapv(|z| z.arg().rem_euclid(TAU));
    }

    Ok(PhaseHologram { phase, spec: *spec })
}

/// Weighted Gerchberg–Saxton: per-iteration amplitude adaptation equalizes
/// simulated spot intensities against the goal weights.
pub fn wgs_optimize(
    spec: &SlmSpec,
    target: &TargetPattern,
    iters: usize,
    rng: &mut SeededRng,
) -> Result<PhaseHologram> {
    optimize(spec, target, iters, rng, true, None)
}

/// Same but warm-started from a previous hologram's phase (used by the
/// closed feedback loop for stability across iterations).
pub fn wgs_optimize_from(
    spec: &SlmSpec,
    target: &TargetPattern,
    iters: usize,
    rng: &mut SeededRng,
    warm: &PhaseHologram,
) -> Result<PhaseHologram> {
    optimize(spec, target, iters, rng, true, Some(&warm.phase))
}

/// Plain (unweighted) Gerchberg–Saxton baseline.
pub fn gs_optimize(
    spec: &SlmSpec,
    target: &TargetPattern,
    iters: usize,
    rng: &mut SeededRng,
) -> Result<PhaseHologram> {
    optimize(spec, target, iters, rng, false, None)
}

/// Additive Zernike-style aberration phase Σ c_k Z_k over the unit disk of
/// the SLM aperture. `terms` pairs OSA/ANSI single indices with coefficients
/// (radians rms-ish; no normalization beyond the polynomial itself).
pub fn apply_aberration(holo: &mut PhaseHologram, terms: &[(usize, f64)]) {
    let n = holo.spec.n as f64;
    for ((r, c), p) in holo.phase.indexed_iter_mut() {
        let x = (c as f64 - n / 2.0) / (n / 2.0);
        let y = (r as f64 - n / 2.0) / (n / 2.0);
        let rho = x.hypot(y);
        if rho > 1.0 {
            continue;
        }
        let theta = y.atan2(x);
        let mut add = 0.0;
        for &(j, ck) in terms {
            add += ck * zernike_osa(j, rho, theta);
        }
        *p = (*p + add).rem_euclid(TAU);
    }
}

/// Low-order Zernike polynomials by OSA/ANSI index (0..=10 supported).
pub fn zernike_osa(j: usize, rho: f64, theta: f64) -> f64 {
    let r2 = rho * rho;
    match j {
        0 => 1.0,
        1 => 2.0 * rho * theta.sin(),
        2 => 2.0 * rho * theta.cos(),
        3 => 6f64.sqrt() * r2 * (2.0 * theta).sin(),
        4 => 3f64.sqrt() * (2.0 * r2 - 1.0),
        5 => 6f64.sqrt() * r2 * (2.0 * theta).cos(),
        6 => 8f64.sqrt() * rho * r2 * (3.0 * theta).sin(),
        7 => 8f64.sqrt() * (3.0 * rho * r2 - 2.0 * rho) * theta.sin(),
        8 => 8f64.sqrt() * (3.0 * rho * r2 - 2.0 * rho) * theta.cos(),
        9 => 8f64.sqrt() * rho * r2 * (3.0 * theta).cos(),
        10 => 10f64.sqrt() * r2 * r2 * (4.0 * theta).sin(),
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::stats;
    use crate::rng;

    fn test_spec() -> SlmSpec {
        SlmSpec::for_spacing(128, 8.0, 1.061, 7.2, 4)
    }

    fn big_spec() -> SlmSpec {
        SlmSpec::for_spacing(256, 8.0, 1.061, 7.2, 4)
    }

    #[test]
    fn forward_model_conserves_energy() {
        let spec = test_spec();
        let mut r = rng::seeded(5);
        let phase = Array2::from_shape_fn((spec.n, spec.n), |_| r.gen::<f64>() * TAU);
        let holo = PhaseHologram { phase, spec };
        let mut planner = FftPlanner::new();
        let field = forward_field(&holo, &mut planner);
        let power: f64 = field.iter().map(|z| z.norm_sqr()).sum();
        assert!((power - 1.0).abs() < 1e-6, "power {power}");
    }

    #[test]
    fn single_site_takes_all_power() {
        let spec = test_spec();
        let t = TargetPattern::uniform(vec![(0.0, 0.0)]);
        let holo = wgs_optimize(&spec, &t, 10, &mut rng::seeded(1)).unwrap();
        let i = site_intensities(&holo, &t).unwrap();
        assert!((i[0] - 1.0).abs() < 0.01, "intensity {}", i[0]);
    }

    #[test]
    fn grid_uniformity_beats_unweighted() {
        let spec = big_spec();
        let t = TargetPattern::grid(20, 7.2);
        let wgs = wgs_optimize(&spec, &t, 30, &mut rng::seeded(2)).unwrap();
        let gs = gs_optimize(&spec, &t, 30, &mut rng::seeded(2)).unwrap();
        let iw = site_intensities(&wgs, &t).unwrap();
        let ig = site_intensities(&gs, &t).unwrap();
        let (sw, sg) = (stats::rel_std(&iw), stats::rel_std(&ig));
        assert!(sw < 0.02, "wgs rel std {sw}");
        assert!(sw < sg, "wgs {sw} !< gs {sg}");
    }

    #[test]
    fn doubled_weight_quadruples_intensity() {
        let spec = test_spec();
        let mut t = TargetPattern::grid(5, 14.4);
        t.weights[12] = 2.0;
        t.renormalize_weights();
        let holo = wgs_optimize(&spec, &t, 40, &mut rng::seeded(3)).unwrap();
        let i = site_intensities(&holo, &t).unwrap();
        let others: Vec<f64> = i
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != 12)
            .map(|(_, &v)| v)
            .collect();
        let ratio = i[12] / stats::mean(&others);
        // weights scale amplitude, so intensity ratio = (w_hot / w_other)^2 ≈ 4.3
        let w_others: Vec<f64> = t
            .weights
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != 12)
            .map(|(_, &w)| w)
            .collect();
        let expect = (t.weights[12] / stats::mean(&w_others)).powi(2);
        assert!((ratio / expect - 1.0).abs() < 0.10, "ratio {ratio}, expect {expect}");
    }

    #[test]
    fn out_of_window_site_rejected() {
        let spec = test_spec();
        let t = TargetPattern::uniform(vec![(spec.half_window() * 2.0, 0.0)]);
        assert!(wgs_optimize(&spec, &t, 5, &mut rng::seeded(1)).is_err());
    }

    #[test]
    fn aberration_hook_perturbs_phase() {
        let spec = test_spec();
        let t = TargetPattern::uniform(vec![(0.0, 0.0)]);
        let mut holo = wgs_optimize(&spec, &t, 10, &mut rng::seeded(1)).unwrap();
        let before = holo.phase.clone();
        apply_aberration(&mut holo, &[(4, 0.3)]); // defocus
        assert!(holo.phase != before);
        assert!(holo.phase.iter().all(|&p| (0.0..TAU).contains(&p)));
    }
}
