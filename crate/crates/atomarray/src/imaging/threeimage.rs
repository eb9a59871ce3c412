//! Three-consecutive-image estimator: separates imaging-induced loss from
//! detection errors by fitting the eight observed bitstring frequencies.

use crate::error::{Error, Result};
use crate::numeric::lm::{levenberg_marquardt, LmOptions};
use crate::rng::SeededRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Probabilities of the 8 observed bitstrings y1 y2 y3 (index = y1<<2|y2<<1|y3)
/// given initial filling `f`, per-image survival `s`, true-negative rate `f0`
/// and true-positive rate `f1`. Detection errors are independent per image;
/// an atom lost before an image reads as empty thereafter.
pub fn predict_bitstring_probs(f: f64, s: f64, f0: f64, f1: f64) -> [f64; 8] {
    // true occupancy paths and their probabilities
    let paths = [
        (0b111u8, f * s * s),
        (0b110u8, f * s * (1.0 - s)),
        (0b100u8, f * (1.0 - s)),
        (0b000u8, 1.0 - f),
    ];
    let mut out = [0.0; 8];
    for y in 0..8u8 {
        let mut p = 0.0;
        for &(x, px) in &paths {
            let mut cond = px;
            for img in 0..3 {
                let bit_x = (x >> (2 - img)) & 1;
                let bit_y = (y >> (2 - img)) & 1;
                cond *= match (bit_x, bit_y) {
                    (1, 1) => f1,
                    (1, 0) => 1.0 - f1,
                    (0, 0) => f0,
                    _ => 1.0 - f0,
                };
            }
            p += cond;
        }
        out[y as usize] = p;
    }
    out
}

/// Result of the three-image fit. `fidelity` = F·𝓕1 + (1−F)·𝓕0 with the
/// fitted filling, and `sigma` entries are standard errors propagated from
/// the multinomial counting noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThreeImageEstimate {
    pub filling: f64,
    pub survival: f64,
    pub f0: f64,
    pub f1: f64,
    pub fidelity: f64,
    /// Standard errors of (filling, survival, f0, f1).
    pub sigma: [f64; 4],
    pub fidelity_sigma: f64,
    pub chi2: f64,
}

/// Fit (F, S, 𝓕0, 𝓕1) to observed bitstring frequencies by weighted least
/// squares, with weights 1/√(p/N) from multinomial counting statistics.
pub fn three_image_estimate(freqs: &[f64; 8], n_samples: f64) -> Result<ThreeImageEstimate> {
    let total: f64 = freqs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!("frequencies must sum to 1, got {total}")));
    }
    if freqs.iter().any(|&p| p < 0.0) {
        return Err(Error::domain("negative frequency"));
    }
    if n_samples < 8.0 {
        return Err(Error::domain("need at least 8 samples"));
    }
    // unidentifiable corners: no atoms, or no empties
    let p_first = freqs[4] + freqs[5] + freqs[6] + freqs[7];
    if !(1e-6..=1.0 - 1e-6).contains(&p_first) {
        return Err(Error::FitFailure("degenerate occupancy: filling not identifiable".into()));
    }

    // moment-based starting point
    let f_init = p_first.clamp(1e-4, 1.0 - 1e-4);
    let s_init = if p_first > 0.0 {
        ((freqs[6] + freqs[7]) / p_first).clamp(1e-4, 1.0 - 1e-4)
    } else {
        0.99
    };
    let x0 = [logit(f_init), logit(s_init), logit(0.995), logit(0.995)];

    let mut resid = |t: &[f64], out: &mut Vec<f64>| {
        let pred = predict_bitstring_probs(expit(t[0]), expit(t[1]), expit(t[2]), expit(t[3]));
        out.clear();
        out.extend(
            pred.iter()
                .zip(freqs)
                .map(|(&p, &o)| (p - o) / (p.max(1e-12) / n_samples).sqrt()),
        );
    };
    let opts = LmOptions { scale_covariance: false, ..Default::default() };
    let fit = levenberg_marquardt(&mut resid, &x0, &opts);
    if !fit.converged || fit.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("three-image fit did not converge".into()));
    }

    let th: Vec<f64> = fit.params.iter().map(|&t| expit(t)).collect();
    // transform covariance from logit space: dθ/dt = θ(1−θ)
    let d: Vec<f64> = th.iter().map(|&p| p * (1.0 - p)).collect();
    let mut cov = [[0.0f64; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            cov[a][b] = fit.covariance[a * 4 + b] * d[a] * d[b];
        }
    }
    let sigma = [
        cov[0][0].max(0.0).sqrt(),
        cov[1][1].max(0.0).sqrt(),
        cov[2][2].max(0.0).sqrt(),
        cov[3][3].max(0.0).sqrt(),
    ];
    let (f, s, f0, f1) = (th[0], th[1], th[2], th[3]);
    let fidelity = f * f1 + (1.0 - f) * f0;
    let grad = [f1 - f0, 0.0, 1.0 - f, f];
    let mut var = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            var += grad[a] * cov[a][b] * grad[b];
        }
    }
    Ok(ThreeImageEstimate {
        filling: f,
        survival: s,
        f0,
        f1,
        fidelity,
        sigma,
        fidelity_sigma: var.max(0.0).sqrt(),
        chi2: fit.chi2,
    })
}

/// Sample bitstring counts from the forward model.
pub fn simulate_bitstrings(
    f: f64,
    s: f64,
    f0: f64,
    f1: f64,
    n: u64,
    rng: &mut SeededRng,
) -> [u64; 8] {
    let mut counts = [0u64; 8];
    for _ in 0..n {
        // sample the true path
        let mut occ = rng.gen::<f64>() < f;
        let mut y = 0u8;
        for _ in 0..3 {
            let seen = if occ {
                rng.gen::<f64>() < f1
            } else {
                rng.gen::<f64>() >= f0
            };
            y = (y << 1) | seen as u8;
            if occ && rng.gen::<f64>() >= s {
                occ = false;
            }
        }
        counts[y as usize] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn probabilities_sum_to_one() {
        for &(f, s, f0, f1) in
            &[(0.512, 0.9998, 0.99993, 0.99994), (0.3, 0.9, 0.95, 0.9), (0.9, 0.5, 0.8, 0.7)]
        {
            let p = predict_bitstring_probs(f, s, f0, f1);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn perfect_detection_reduces_to_path_probs() {
        let p = predict_bitstring_probs(0.5, 0.99, 1.0, 1.0);
        assert!((p[0b111] - 0.5 * 0.99 * 0.99).abs() < 1e-15);
        assert!((p[0b110] - 0.5 * 0.99 * 0.01).abs() < 1e-15);
        assert!((p[0b100] - 0.5 * 0.01).abs() < 1e-15);
        assert!((p[0b000] - 0.5).abs() < 1e-15);
        assert!(p[0b001] == 0.0 && p[0b010] == 0.0 && p[0b011] == 0.0 && p[0b101] == 0.0);
    }

    #[test]
    fn noiseless_inversion_is_exact() {
        let truth = (0.512, 0.999864, 1.0 - 7.01e-5, 1.0 - 5.5e-5);
        let freqs = predict_bitstring_probs(truth.0, truth.1, truth.2, truth.3);
        let est = three_image_estimate(&freqs, 1.92e8).unwrap();
        assert!((est.filling - truth.0).abs() < 1e-10, "F {}", est.filling);
        assert!((est.survival - truth.1).abs() < 1e-10, "S {}", est.survival);
        assert!((est.f0 - truth.2).abs() < 1e-10, "F0 {}", est.f0);
        assert!((est.f1 - truth.3).abs() < 1e-10, "F1 {}", est.f1);
        let expect_fid = truth.0 * truth.3 + (1.0 - truth.0) * truth.2;
        assert!((est.fidelity - expect_fid).abs() < 1e-10);
    }

    #[test]
    fn recovers_parameters_from_sampled_counts() {
        let truth = (0.512, 0.9995, 0.9993, 0.99945);
        let n = 4_000_000u64;
        let mut r = rng::seeded(31);
        let counts = simulate_bitstrings(truth.0, truth.1, truth.2, truth.3, n, &mut r);
        let mut freqs = [0.0; 8];
        for (f, &c) in freqs.iter_mut().zip(&counts) {
            *f = c as f64 / n as f64;
        }
        let est = three_image_estimate(&freqs, n as f64).unwrap();
        for (got, (tru, sig)) in [est.filling, est.survival, est.f0, est.f1]
            .iter()
            .zip([truth.0, truth.1, truth.2, truth.3].iter().zip(&est.sigma))
        {
            assert!((got - tru).abs() < 4.0 * sig.max(1e-7), "{got} vs {tru} (sigma {sig})");
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let mut all_empty = [0.0; 8];
        all_empty[0] = 1.0;
        assert!(three_image_estimate(&all_empty, 1e6).is_err());
        let bad_sum = [0.2; 8];
        assert!(three_image_estimate(&bad_sum, 1e6).is_err());
    }
}
