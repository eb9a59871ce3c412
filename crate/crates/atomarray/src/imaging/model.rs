//! Lossy-Poisson photon-count model: closed-form densities, the microscopic
//! Monte Carlo sampler they derive from, and threshold optimization.

use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;
use crate::rng::SeededRng;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Imaging photon-distribution parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct HistogramModel {
    /// Initial filling fraction.
    pub filling: f64,
    /// Mean background photons.
    pub lambda0: f64,
    /// Mean atom photons.
    pub lambda1: f64,
    /// Peak broadening factors (1 = ideal Poisson).
    pub r0: f64,
    pub r1: f64,
    /// Pseudo-loss rate; true loss probability is 1 − e^{−L}.
    pub loss: f64,
}

impl HistogramModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.filling) {
            return Err(Error::domain("filling must lie in [0, 1]"));
        }
        if self.lambda0 <= 0.0 || self.lambda1 <= 0.0 {
            return Err(Error::domain("photon rates must be positive"));
        }
        if self.r0 <= 0.0 || self.r1 <= 0.0 {
            return Err(Error::domain("broadening factors must be positive"));
        }
        if self.loss < 0.0 || self.loss >= self.lambda1 {
            return Err(Error::domain("need 0 <= L < lambda1"));
        }
        Ok(())
    }

    /// True loss probability during one image.
    pub fn true_loss(&self) -> f64 {
        1.0 - (-self.loss).exp()
    }
}

/// Unnormalized continuous extension of the no-atom photon distribution:
/// Poisson(λ0) with factorials replaced by the gamma function, broadened as
/// P(n/r0)/r0.
pub fn raw_density_empty(m: &HistogramModel, n: f64) -> f64 {
    if n < 0.0 {
        return 0.0;
    }
    let u = n / m.r0;
    ((u * m.lambda0.ln() - m.lambda0 - ln_gamma(u + 1.0)).exp()) / m.r0
}

/// Unnormalized continuous extension of the atom-present distribution:
/// a reduced-rate Poisson term for surviving atoms plus the incomplete-gamma
/// "bridge" covering mid-image loss, broadened as P(n/r1)/r1.
pub fn raw_density_atom(m: &HistogramModel, n: f64) -> f64 {
    if n < 0.0 {
        return 0.0;
    }
    let u = n / m.r1;
    let (l0, l1, loss) = (m.lambda0, m.lambda1, m.loss);
    let term1 = (u * (l0 + l1 - loss).ln() - (l0 + l1) - ln_gamma(u + 1.0)).exp();
    let bridge = if loss > 0.0 && u > 1e-9 {
        let ell = loss / l1;
        let a1 = l0 / (1.0 - ell);
        let a2 = l1 + a1;
        // Γ(n,x)/(n−1)! is the regularized upper incomplete gamma Q(n,x)
        let q = gamma_ur(u, a1) - gamma_ur(u, a2);
        ell * ((l0 * loss / (l1 - loss)) + (u - 1.0) * (1.0 - ell).ln()).exp() * q
    } else {
        0.0
    };
    (term1 + bridge) / m.r1
}

/// Normalized continuous photon densities for both branches, with cached
/// normalization integrals (the gamma-continued formulas integrate to ≈1 but
/// not exactly; see `norm0`/`norm1`).
#[derive(Debug, Clone)]
pub struct PhotonPdf {
    pub model: HistogramModel,
    pub norm0: f64,
    pub norm1: f64,
    upper: f64,
}

impl PhotonPdf {
    pub fn new(model: HistogramModel) -> Result<Self> {
        Self::with_tolerance(model, 1e-10)
    }

    /// Like `new` but with a caller-chosen quadrature tolerance for the
    /// normalization integrals (fitting loops use a looser one).
    pub fn with_tolerance(model: HistogramModel, eps: f64) -> Result<Self> {
        model.validate()?;
        let upper = Self::support_upper(&model);
        let norm0 = adaptive_simpson(&mut |n| raw_density_empty(&model, n), 0.0, upper, eps);
        let norm1 = adaptive_simpson(&mut |n| raw_density_atom(&model, n), 0.0, upper, eps);
        if !(0.5..=1.5).contains(&norm0) || !(0.5..=1.5).contains(&norm1) {
            return Err(Error::Unstable(format!("branch integrals {norm0}, {norm1}")));
        }
        Ok(PhotonPdf { model, norm0, norm1, upper })
    }

    fn support_upper(m: &HistogramModel) -> f64 {
        let mean = (m.lambda0 + m.lambda1) * m.r1.max(m.r0);
        mean + 20.0 * mean.sqrt() + 20.0
    }

    /// Proper (normalized) density for the given branch.
    pub fn density(&self, n: f64, atom: bool) -> f64 {
        if atom {
            raw_density_atom(&self.model, n) / self.norm1
        } else {
            raw_density_empty(&self.model, n) / self.norm0
        }
    }

    /// Mixture density F·P(n|1) + (1−F)·P(n|0).
    pub fn mixture(&self, n: f64) -> f64 {
        let f = self.model.filling;
        f * self.density(n, true) + (1.0 - f) * self.density(n, false)
    }

    /// Mean photon count of a branch (numerical moment of the closed form).
    pub fn branch_mean(&self, atom: bool) -> f64 {
        adaptive_simpson(&mut |n| n * self.density(n, atom), 0.0, self.upper, 1e-9)
    }

    pub fn support(&self) -> f64 {
        self.upper
    }
}

/// Weighted-count binarization threshold.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Threshold {
    pub value: f64,
    /// Optional per-site overrides (site index → threshold).
    pub per_site: Vec<(usize, f64)>,
}

/// Scan the threshold between the two peaks, maximizing
/// 𝓕 = F·𝓕1 + (1−F)·𝓕0 with 𝓕0 = ∫₀ᵀ P(n|0), 𝓕1 = ∫_T^∞ P(n|1).
/// Returns the optimal threshold and the fidelity there.
pub fn optimal_threshold(pdf: &PhotonPdf) -> (Threshold, f64) {
    let m = &pdf.model;
    let lo = m.lambda0 * m.r0;
    let hi = (m.lambda0 + m.lambda1) * m.r1;
    let steps = 4000;
    let dt = (hi - lo) / steps as f64;
    // cumulative integrals on the scan grid (trapezoid is plenty at this dt)
    let mut c0 = adaptive_simpson(&mut |n| pdf.density(n, false), 0.0, lo, 1e-10);
    let mut c1 = adaptive_simpson(&mut |n| pdf.density(n, true), 0.0, lo, 1e-10);
    let mut best = (lo, 0.0f64);
    let mut prev0 = pdf.density(lo, false);
    let mut prev1 = pdf.density(lo, true);
    for i in 0..=steps {
        let t = lo + i as f64 * dt;
        let fid = m.filling * (1.0 - c1) + (1.0 - m.filling) * c0;
        if fid > best.1 {
            best = (t, fid);
        }
        let n0 = pdf.density(t + dt, false);
        let n1 = pdf.density(t + dt, true);
        c0 += 0.5 * (prev0 + n0) * dt;
        c1 += 0.5 * (prev1 + n1) * dt;
        prev0 = n0;
        prev1 = n1;
    }
    (Threshold { value: best.0, per_site: Vec::new() }, best.1)
}

/// True-negative and true-positive probabilities at a given threshold.
pub fn branch_fidelities(pdf: &PhotonPdf, threshold: f64) -> (f64, f64) {
    let f0 = adaptive_simpson(&mut |n| pdf.density(n, false), 0.0, threshold, 1e-11);
    let f1 = 1.0 - adaptive_simpson(&mut |n| pdf.density(n, true), 0.0, threshold, 1e-11);
    (f0, f1)
}

/// Microscopic sampler behind the closed form. Photon collection events
/// arrive as a unit-time Poisson process at rate λ1; each event loses the
/// atom with probability L/λ1, in which case the triggering photon is not
/// counted and scattering stops. Background photons accumulate at rate λ0
/// for the full exposure. Broadening scales the observed count by r1 (atom)
/// or r0 (empty).
pub fn sample_photons(m: &HistogramModel, atom: bool, rng: &mut SeededRng) -> (f64, bool) {
    let background = Poisson::new(m.lambda0).unwrap().sample(rng);
    if !atom {
        return ((background * m.r0), true);
    }
    let mut counted = 0.0f64;
    let mut survived = true;
    if m.lambda1 > 0.0 {
        let exp = Exp::new(m.lambda1).unwrap();
        let ell = m.loss / m.lambda1;
        let mut t = exp.sample(rng);
        while t <= 1.0 {
            if rng.gen::<f64>() < ell {
                survived = false;
                break;
            }
            counted += 1.0;
            t += exp.sample(rng);
        }
    }
    (((counted + background) * m.r1), survived)
}
