//! Fits of measured count histograms and survival decay series.

use super::model::{optimal_threshold, HistogramModel, PhotonPdf, Threshold};
use crate::error::{Error, Result};
use crate::numeric::lm::{levenberg_marquardt, LmOptions};
use crate::numeric::stats;
use serde::{Deserialize, Serialize};

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maximum-structure histogram fit: model parameters, the optimal threshold
/// under the fitted model, and the imaging fidelity there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramFit {
    pub model: HistogramModel,
    pub threshold: Threshold,
    pub fidelity: f64,
    pub chi2: f64,
    pub n_bins: usize,
    pub converged: bool,
}

/// Two-means split of a 1D sample; returns (mean0, mean1, var0, var1, frac1).
fn two_means(xs: &[f64]) -> (f64, f64, f64, f64, f64) {
    let mut c0 = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut c1 = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..60 {
        let (mut s0, mut n0, mut s1, mut n1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for &x in xs {
            if (x - c0).abs() <= (x - c1).abs() {
                s0 += x;
                n0 += 1.0;
            } else {
                s1 += x;
                n1 += 1.0;
            }
        }
        let (n0c, n1c) = (s0 / n0.max(1.0), s1 / n1.max(1.0));
        if (n0c - c0).abs() + (n1c - c1).abs() < 1e-9 {
            break;
        }
        c0 = n0c;
        c1 = n1c;
    }
    let split = 0.5 * (c0 + c1);
    let lo: Vec<f64> = xs.iter().cloned().filter(|&x| x < split).collect();
    let hi: Vec<f64> = xs.iter().cloned().filter(|&x| x >= split).collect();
    let var = |v: &[f64]| {
        let s = stats::std_dev(v);
        s * s
    };
    (
        stats::mean(&lo),
        stats::mean(&hi),
        var(&lo),
        var(&hi),
        hi.len() as f64 / xs.len() as f64,
    )
}

/// Fit the lossy-Poisson mixture to per-image photon signals.
///
/// When the per-image survival is known independently (e.g. from the
/// three-image estimator), pass `fixed_loss = Some(−ln S)` to pin the loss
/// rate and fit only the remaining parameters; `fixed_loss = Some(0.0)`
/// performs the zero-loss refit used to isolate pure detection errors.
pub fn fit_histogram(signals: &[f64], fixed_loss: Option<f64>) -> Result<HistogramFit> {
    if signals.len() < 200 {
        return Err(Error::domain("need at least 200 samples for a histogram fit"));
    }
    if let Some(l) = fixed_loss {
        if l < 0.0 {
            return Err(Error::domain("fixed loss must be nonnegative"));
        }
    }
    let (m0, m1, v0, v1, frac1) = two_means(signals);
    let (s0, s1) = (v0.sqrt(), v1.sqrt());
    if !(m1 - m0 > 2.0 * (s0 + s1)) {
        return Err(Error::FitFailure(format!(
            "histogram not bimodal: peaks {m0:.1}/{m1:.1}, widths {s0:.1}/{s1:.1}"
        )));
    }
    if !(0.02..=0.98).contains(&frac1) {
        return Err(Error::FitFailure(format!("degenerate filling fraction {frac1:.3}")));
    }

    // moment-matched start: observed = r × Poisson(λ) ⇒ var/mean = r
    let r0_init = (v0 / m0.max(1e-9)).clamp(0.3, 5.0);
    let r1_init = (v1 / m1.max(1e-9)).clamp(0.3, 5.0);
    let l0_init = (m0 / r0_init).max(0.1);
    let l1_init = ((m1 / r1_init) - l0_init).max(1.0);

    // histogram with Freedman–Diaconis bins; counts live on a discrete
    // lattice (integer photons × broadening), so snap the bin width to a
    // multiple of the lattice spacing and center bins on lattice points to
    // avoid aliasing
    let mut sorted = signals.to_vec();
    let mut width = stats::fd_bin_width(&mut sorted);
    let (mut lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let mut gap = f64::INFINITY;
    for w in sorted.windows(2) {
        let d = w[1] - w[0];
        if d > 1e-9 && d < gap {
            gap = d;
        }
    }
    if gap.is_finite() && width / gap < 30.0 {
        width = gap * (width / gap).ceil().max(1.0);
        lo -= gap / 2.0;
    }
    let n_bins = (((hi - lo) / width).ceil() as usize).clamp(10, 400);
    let mut counts = vec![0.0f64; n_bins];
    for &x in signals {
        let i = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[i] += 1.0;
    }
    let centers: Vec<f64> = (0..n_bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
    let n_tot = signals.len() as f64;

    // params: [logit F, ln λ0, ln λ1, ln r0, ln r1, (ln L)]
    let free_loss = fixed_loss.is_none();
    let mut x0 = vec![
        logit(frac1.clamp(0.03, 0.97)),
        l0_init.ln(),
        l1_init.ln(),
        r0_init.ln(),
        r1_init.ln(),
    ];
    if free_loss {
        x0.push((0.01f64).ln());
    }
    let decode = |t: &[f64]| -> HistogramModel {
        let lambda1 = t[2].exp();
        let loss = match fixed_loss {
            Some(l) => l.min(0.999 * lambda1),
            None => t[5].exp().min(0.5 * lambda1),
        };
        HistogramModel {
            filling: expit(t[0]),
            lambda0: t[1].exp(),
            lambda1,
            r0: t[3].exp(),
            r1: t[4].exp(),
            loss,
        }
    };
    let mut resid = |t: &[f64], out: &mut Vec<f64>| {
        out.clear();
        let model = decode(t);
        match PhotonPdf::with_tolerance(model, 1e-7) {
            Ok(pdf) => {
                out.extend(centers.iter().zip(&counts).map(|(&c, &obs)| {
                    // Simpson over the bin
                    let h = width / 2.0;
                    let integral =
                        (pdf.mixture(c - h) + 4.0 * pdf.mixture(c) + pdf.mixture(c + h)) / 6.0;
                    let pred = n_tot * width * integral;
                    (pred - obs) / obs.max(1.0).sqrt()
                }));
            }
            Err(_) => out.extend(counts.iter().map(|_| 1e6)),
        }
    };
    let opts = LmOptions { max_iter: 120, tol: 1e-10, ..Default::default() };
    let fit = levenberg_marquardt(&mut resid, &x0, &opts);
    let model = decode(&fit.params);
    model.validate()?;
    let pdf = PhotonPdf::new(model)?;
    let (threshold, fidelity) = optimal_threshold(&pdf);
    Ok(HistogramFit {
        model,
        threshold,
        fidelity,
        chi2: fit.chi2,
        n_bins,
        converged: fit.converged,
    })
}

/// Fitted decay of a survival series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    /// Amplitude at the origin.
    pub amplitude: f64,
    /// Lifetime τ (for `fit_lifetime`) or per-image survival p₁
    /// (for `fit_per_image`).
    pub rate_param: f64,
    pub rate_err: f64,
    pub chi2: f64,
    /// Set when the series does not actually decay.
    pub warning: Option<String>,
}

fn check_series(x: &[f64], p: &[f64], sigma: &[f64]) -> Result<Option<String>> {
    if x.len() != p.len() || x.len() != sigma.len() {
        return Err(Error::domain("series lengths must match"));
    }
    if x.len() < 3 {
        return Err(Error::domain("need at least 3 points"));
    }
    if sigma.iter().any(|&s| s <= 0.0) {
        return Err(Error::domain("sigmas must be positive"));
    }
    let (slope, _) = stats::linear_fit(x, p);
    Ok((slope > 0.0).then(|| format!("survival increases with the ordinate (slope {slope:.3e})")))
}

fn weighted_decay_fit(
    x: &[f64],
    p: &[f64],
    sigma: &[f64],
    model: impl Fn(&[f64], f64) -> f64,
    x0: &[f64],
) -> (Vec<f64>, f64, f64) {
    let mut resid = |t: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(
            x.iter()
                .zip(p.iter().zip(sigma))
                .map(|(&xi, (&pi, &si))| (model(t, xi) - pi) / si),
        );
    };
    let opts = LmOptions { scale_covariance: false, ..Default::default() };
    let fit = levenberg_marquardt(&mut resid, x0, &opts);
    let err = fit.std_err(1);
    (fit.params, err, fit.chi2)
}

/// Fit p(t) = A·e^{−t/τ}; `t` in the caller's time unit, τ returned in the
/// same unit.
pub fn fit_lifetime(t: &[f64], p: &[f64], sigma: &[f64]) -> Result<DecayFit> {
    let warning = check_series(t, p, sigma)?;
    let tau0 = (t[t.len() - 1] - t[0]).max(1e-9);
    let (params, err, chi2) =
        weighted_decay_fit(t, p, sigma, |q, x| q[0] * (-x / q[1]).exp(), &[p[0].max(0.1), tau0]);
    Ok(DecayFit { amplitude: params[0], rate_param: params[1], rate_err: err, chi2, warning })
}

/// Fit p(N) = A·p₁^N against image number N.
pub fn fit_per_image(n: &[f64], p: &[f64], sigma: &[f64]) -> Result<DecayFit> {
    let warning = check_series(n, p, sigma)?;
    // fit in log space for p1 to keep it positive
    let (params, err_ln, chi2) = weighted_decay_fit(
        n,
        p,
        sigma,
        |q, x| q[0] * (q[1] * x).exp(),
        &[p[0].max(0.1), -1e-4],
    );
    let p1 = params[1].exp();
    Ok(DecayFit {
        amplitude: params[0],
        rate_param: p1,
        rate_err: p1 * err_ln,
        chi2,
        warning,
    })
}
