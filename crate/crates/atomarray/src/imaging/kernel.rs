//! Per-site pixel weight kernels: turn a 7×7 pixel box around each site into
//! a scalar signal, and optimize the weights discriminatively.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

pub const BOX: usize = 7;

/// Pixel weights, max-normalized to 1.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WeightKernel {
    pub weights: [[f64; BOX]; BOX],
}

impl WeightKernel {
    pub fn uniform() -> Self {
        WeightKernel { weights: [[1.0; BOX]; BOX] }
    }

    /// Gaussian kernel matched to a PSF of the given 1/e² waist in pixels.
    pub fn gaussian(waist_px: f64) -> Self {
        let mut w = [[0.0; BOX]; BOX];
        let c = (BOX as f64 - 1.0) / 2.0;
        for (i, row) in w.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
                *v = (-2.0 * r2 / (waist_px * waist_px)).exp();
            }
        }
        let mut k = WeightKernel { weights: w };
        k.normalize();
        k
    }

    fn normalize(&mut self) {
        let max = self.weights.iter().flatten().cloned().fold(0.0f64, f64::max);
        if max > 0.0 {
            for v in self.weights.iter_mut().flatten() {
                *v /= max;
            }
        }
    }

    /// Weighted sum over one pixel box.
    pub fn apply(&self, pixels: &[[f64; BOX]; BOX]) -> f64 {
        self.weights
            .iter()
            .flatten()
            .zip(pixels.iter().flatten())
            .map(|(w, p)| w * p)
            .sum()
    }
}

/// One site's pixel box with its ground-truth occupancy (simulation only).
#[derive(Debug, Clone)]
pub struct PixelStack {
    pub pixels: [[f64; BOX]; BOX],
    pub occupied: bool,
}

/// Simulate per-site pixel boxes: an occupied site scatters
/// Poisson(`signal_photons`) photons, each landing at a Gaussian-PSF position
/// (1/e² waist `psf_waist_px`) and binned into pixels; every pixel also
/// collects Poisson(`bg_per_px`) background counts.
pub fn simulate_pixel_stacks(
    n_sites: usize,
    psf_waist_px: f64,
    signal_photons: f64,
    bg_per_px: f64,
    filling: f64,
    rng: &mut SeededRng,
) -> Result<Vec<PixelStack>> {
    if psf_waist_px <= 0.0 || signal_photons < 0.0 || bg_per_px < 0.0 {
        return Err(Error::domain("pixel-stack parameters must be nonnegative"));
    }
    let psf = Normal::new(0.0, psf_waist_px / 2.0).unwrap();
    let c = (BOX as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(n_sites);
    for _ in 0..n_sites {
        let occupied = rng.gen::<f64>() < filling;
        let mut pixels = [[0.0; BOX]; BOX];
        if bg_per_px > 0.0 {
            let bg = Poisson::new(bg_per_px).unwrap();
            for v in pixels.iter_mut().flatten() {
                *v += bg.sample(rng);
            }
        }
        if occupied && signal_photons > 0.0 {
            let n_ph = Poisson::new(signal_photons).unwrap().sample(rng) as usize;
            for _ in 0..n_ph {
                let x = (c + psf.sample(rng)).round();
                let y = (c + psf.sample(rng)).round();
                if (0.0..BOX as f64).contains(&x) && (0.0..BOX as f64).contains(&y) {
                    pixels[y as usize][x as usize] += 1.0;
                }
            }
        }
        out.push(PixelStack { pixels, occupied });
    }
    Ok(out)
}

/// Threshold on sorted midpoints maximizing classification accuracy.
fn best_threshold(values: &[f64], labels: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let total_pos = labels.iter().filter(|&&l| l).count();
    // threshold below everything: all classified positive
    let mut correct = total_pos;
    let mut best = (correct, values[idx[0]] - 1.0);
    for (k, &i) in idx.iter().enumerate() {
        // moving the threshold above values[i] flips its classification to 0
        if labels[i] {
            correct -= 1;
        } else {
            correct += 1;
        }
        if correct > best.0 {
            let t = if k + 1 < idx.len() {
                0.5 * (values[i] + values[idx[k + 1]])
            } else {
                values[i] + 1.0
            };
            best = (correct, t);
        }
    }
    best.1
}

/// Fraction of sites correctly classified when thresholding the weighted
/// counts (threshold chosen on the same data).
pub fn classification_accuracy(stacks: &[PixelStack], kernel: &WeightKernel) -> f64 {
    let values: Vec<f64> = stacks.iter().map(|s| kernel.apply(&s.pixels)).collect();
    let labels: Vec<bool> = stacks.iter().map(|s| s.occupied).collect();
    let t = best_threshold(&values, &labels);
    values
        .iter()
        .zip(&labels)
        .filter(|(&v, &l)| (v > t) == l)
        .count() as f64
        / stacks.len() as f64
}

/// Accuracy on `eval` stacks with the threshold frozen from `train`.
fn heldout_accuracy(train: &[PixelStack], eval: &[PixelStack], kernel: &WeightKernel) -> f64 {
    let tv: Vec<f64> = train.iter().map(|s| kernel.apply(&s.pixels)).collect();
    let tl: Vec<bool> = train.iter().map(|s| s.occupied).collect();
    let t = best_threshold(&tv, &tl);
    eval.iter()
        .filter(|s| (kernel.apply(&s.pixels) > t) == s.occupied)
        .count() as f64
        / eval.len() as f64
}

/// Result of kernel optimization.
#[derive(Debug, Clone)]
pub struct KernelChoice {
    pub kernel: WeightKernel,
    /// Held-out accuracy of the returned kernel and of the uniform baseline.
    pub accuracy: f64,
    pub uniform_accuracy: f64,
    /// Set when the optimized kernel did not beat uniform weights and the
    /// uniform kernel was returned instead.
    pub warning: Option<String>,
}

/// Fisher-discriminant pixel weights w ∝ (μ₁−μ₀)/(σ₀²+σ₁²) estimated from the
/// training stacks, validated against the uniform kernel on held-out stacks.
/// Falls back to uniform (with a warning) when it offers no improvement.
pub fn optimize_kernel(train: &[PixelStack], heldout: &[PixelStack]) -> Result<KernelChoice> {
    if train.len() < 50 || heldout.len() < 50 {
        return Err(Error::domain("need at least 50 train and held-out stacks"));
    }
    let n1 = train.iter().filter(|s| s.occupied).count();
    if n1 < 10 || train.len() - n1 < 10 {
        return Err(Error::domain("need both occupied and empty examples"));
    }
    let mut mean = [[[0.0f64; BOX]; BOX]; 2];
    let mut m2 = [[[0.0f64; BOX]; BOX]; 2];
    let mut counts = [0.0f64; 2];
    for s in train {
        let k = s.occupied as usize;
        counts[k] += 1.0;
        for i in 0..BOX {
            for j in 0..BOX {
                let d = s.pixels[i][j] - mean[k][i][j];
                mean[k][i][j] += d / counts[k];
                m2[k][i][j] += d * (s.pixels[i][j] - mean[k][i][j]);
            }
        }
    }
    let mut w = [[0.0f64; BOX]; BOX];
    for i in 0..BOX {
        for j in 0..BOX {
            let var = m2[0][i][j] / (counts[0] - 1.0) + m2[1][i][j] / (counts[1] - 1.0);
            // negative discriminants are noise here (an atom only adds light)
            w[i][j] = ((mean[1][i][j] - mean[0][i][j]) / (var + 1e-9)).max(0.0);
        }
    }
    let mut lda = WeightKernel { weights: w };
    lda.normalize();
    let uniform = WeightKernel::uniform();
    let acc_u = heldout_accuracy(train, heldout, &uniform);
    if lda.weights.iter().flatten().all(|&v| v == 0.0) {
        return Ok(KernelChoice {
            kernel: uniform,
            accuracy: acc_u,
            uniform_accuracy: acc_u,
            warning: Some("discriminant degenerate; using uniform weights".into()),
        });
    }
    let acc_l = heldout_accuracy(train, heldout, &lda);
    if acc_l > acc_u {
        Ok(KernelChoice { kernel: lda, accuracy: acc_l, uniform_accuracy: acc_u, warning: None })
    } else {
        Ok(KernelChoice {
            kernel: uniform,
            accuracy: acc_u,
            uniform_accuracy: acc_u,
            warning: Some(format!(
                "optimized kernel did not improve held-out accuracy ({acc_l:.4} vs {acc_u:.4}); using uniform weights"
            )),
        })
    }
}

/// Paired bootstrap of the held-out accuracy difference (a − b); returns the
/// mean margin and its 5th percentile.
pub fn bootstrap_margin(
    heldout: &[PixelStack],
    a: &WeightKernel,
    b: &WeightKernel,
    n_boot: usize,
    rng: &mut SeededRng,
) -> (f64, f64) {
    let va: Vec<f64> = heldout.iter().map(|s| a.apply(&s.pixels)).collect();
    let vb: Vec<f64> = heldout.iter().map(|s| b.apply(&s.pixels)).collect();
    let labels: Vec<bool> = heldout.iter().map(|s| s.occupied).collect();
    let n = heldout.len();
    let mut margins: Vec<f64> = (0..n_boot)
        .map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let sa: Vec<f64> = idx.iter().map(|&i| va[i]).collect();
            let sb: Vec<f64> = idx.iter().map(|&i| vb[i]).collect();
            let sl: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
            let acc = |vals: &[f64]| {
                let t = best_threshold(vals, &sl);
                vals.iter().zip(&sl).filter(|(&v, &l)| (v > t) == l).count() as f64 / n as f64
            };
            acc(&sa) - acc(&sb)
        })
        .collect();
    margins.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mean = margins.iter().sum::<f64>() / n_boot as f64;
    (mean, margins[(n_boot as f64 * 0.05) as usize])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn gaussian_kernel_peaks_at_center() {
        let k = WeightKernel::gaussian(1.7);
        assert_eq!(k.weights[3][3], 1.0);
        assert!(k.weights[0][0] < 0.01);
    }

    #[test]
    fn optimized_kernel_concentrates_on_psf() {
        let mut r = rng::seeded(51);
        let stacks = simulate_pixel_stacks(4000, 1.7, 40.0, 2.0, 0.5, &mut r).unwrap();
        let (train, held) = stacks.split_at(2000);
        let choice = optimize_kernel(train, held).unwrap();
        assert!(choice.warning.is_none(), "{:?}", choice.warning);
        let w = &choice.kernel.weights;
        // center dominates, corners are de-weighted
        assert!(w[3][3] > 0.9, "center {}", w[3][3]);
        let corner = w[0][0].max(w[0][6]).max(w[6][0]).max(w[6][6]);
        assert!(corner < 0.2, "corner {corner}");
        assert!(choice.accuracy >= choice.uniform_accuracy);
    }

    #[test]
    fn zero_background_falls_back_to_uniform() {
        let mut r = rng::seeded(52);
        let stacks = simulate_pixel_stacks(2000, 1.7, 40.0, 0.0, 0.5, &mut r).unwrap();
        let (train, held) = stacks.split_at(1000);
        let choice = optimize_kernel(train, held).unwrap();
        // any positive kernel separates noiseless data perfectly
        assert!(choice.warning.is_some());
        assert_eq!(choice.kernel, WeightKernel::uniform());
        assert_eq!(choice.accuracy, 1.0);
    }

    #[test]
    fn heavy_background_beats_uniform_significantly() {
        let mut r = rng::seeded(53);
        let stacks = simulate_pixel_stacks(8000, 1.7, 25.0, 6.0, 0.5, &mut r).unwrap();
        let (train, held) = stacks.split_at(4000);
        let choice = optimize_kernel(train, held).unwrap();
        assert!(choice.warning.is_none(), "{:?}", choice.warning);
        let (mean, p5) =
            bootstrap_margin(held, &choice.kernel, &WeightKernel::uniform(), 400, &mut r);
        assert!(mean > 0.0 && p5 > 0.0, "margin mean {mean}, 5th pct {p5}");
    }

    #[test]
    fn single_class_training_rejected() {
        let mut r = rng::seeded(54);
        let stacks = simulate_pixel_stacks(200, 1.7, 40.0, 1.0, 1.0, &mut r).unwrap();
        assert!(optimize_kernel(&stacks, &stacks).is_err());
    }
}
