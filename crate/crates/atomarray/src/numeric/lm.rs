//! Damped Gauss-Newton (Levenberg–Marquardt) least squares with a forward
//! difference Jacobian and covariance extraction.

use super::linalg;

#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// Parameter covariance, row-major p×p (already scaled by reduced chi²
    /// when no per-point errors were supplied).
    pub covariance: Vec<f64>,
    /// Sum of squared (weighted) residuals at the solution.
    pub chi2: f64,
    pub n_points: usize,
    pub converged: bool,
}

impl LmFit {
    pub fn std_err(&self, i: usize) -> f64 {
        let p = self.params.len();
        self.covariance[i * p + i].max(0.0).sqrt()
    }
}

pub struct LmOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Rescale the covariance by reduced chi² (set false when the residuals
    /// are already divided by known per-point sigmas).
    pub scale_covariance: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iter: 200, tol: 1e-12, fd_step: 1e-6, scale_covariance: true }
    }
}

/// Minimize Σ r_i(x)² where `residuals` fills the weighted residual vector.
pub fn levenberg_marquardt(
    residuals: &mut dyn FnMut(&[f64], &mut Vec<f64>),
    x0: &[f64],
    opts: &LmOptions,
) -> LmFit {
    let p = x0.len();
    let mut x = x0.to_vec();
    let mut r = Vec::new();
    residuals(&x, &mut r);
    let m = r.len();
    let mut chi2: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut converged = false;

    let mut jac = vec![0.0; m * p];
    let mut r_pert = Vec::new();

    for _ in 0..opts.max_iter {
        // forward-difference Jacobian
        for j in 0..p {
            let h = opts.fd_step * x[j].abs().max(1e-8);
            let mut xp = x.clone();
            xp[j] += h;
            residuals(&xp, &mut r_pert);
            for i in 0..m {
                jac[i * p + j] = (r_pert[i] - r[i]) / h;
            }
        }
        // normal equations J^T J and J^T r
        let mut jtj = vec![0.0; p * p];
        let mut jtr = vec![0.0; p];
        for i in 0..m {
            for a in 0..p {
                let ja = jac[i * p + a];
                jtr[a] += ja * r[i];
                for b in a..p {
                    jtj[a * p + b] += ja * jac[i * p + b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                jtj[a * p + b] = jtj[b * p + a];
            }
        }

        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for a in 0..p {
                damped[a * p + a] += lambda * jtj[a * p + a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = linalg::solve(damped, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let xt: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + d).collect();
            residuals(&xt, &mut r_pert);
            let c2: f64 = r_pert.iter().map(|v| v * v).sum();
            if c2.is_finite() && c2 < chi2 {
                let rel = (chi2 - c2) / chi2.max(1e-300);
                x = xt;
                std::mem::swap(&mut r, &mut r_pert);
                chi2 = c2;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < opts.tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            converged = true; // stuck at a (local) minimum
            break;
        }
        if converged {
            break;
        }
    }

    // covariance = (J^T J)^-1, rescaled by reduced chi^2 for unit-weight fits
    let mut jtj = vec![0.0; p * p];
    for j in 0..p {
        let h = opts.fd_step * x[j].abs().max(1e-8);
        let mut xp = x.clone();
        xp[j] += h;
        residuals(&xp, &mut r_pert);
        for i in 0..m {
            jac[i * p + j] = (r_pert[i] - r[i]) / h;
        }
    }
    for i in 0..m {
        for a in 0..p {
            for b in a..p {
                jtj[a * p + b] += jac[i * p + a] * jac[i * p + b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            jtj[a * p + b] = jtj[b * p + a];
        }
    }
    let dof = (m.saturating_sub(p)).max(1) as f64;
    let scale = if opts.scale_covariance { chi2 / dof } else { 1.0 };
    let covariance = linalg::invert_spd(&jtj, p)
        .map(|inv| inv.iter().map(|v| v * scale.max(1e-300)).collect())
        .unwrap_or_else(|| vec![f64::NAN; p * p]);

    LmFit { params: x, covariance, chi2, n_points: m, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_decay() {
        // y = 2.5 * exp(-x / 3.0), exact data
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 2.5 * (-x / 3.0_f64).exp()).collect();
        let mut resid = |p: &[f64], out: &mut Vec<f64>| {
            out.clear();
            out.extend(xs.iter().zip(&ys).map(|(&x, &y)| p[0] * (-x / p[1]).exp() - y));
        };
        let fit = levenberg_marquardt(&mut resid, &[1.0, 1.0], &Default::default());
        assert!((fit.params[0] - 2.5).abs() < 1e-6, "{:?}", fit.params);
        assert!((fit.params[1] - 3.0).abs() < 1e-6);
        assert!(fit.chi2 < 1e-12);
    }

    #[test]
    fn covariance_tracks_noise_scale() {
        // linear model y = a + b x with known gaussian noise: std err of b
        // should match the analytic OLS formula within a factor ~2
        use rand::Rng;
        let mut rng = crate::rng::seeded(11);
        let n = 200;
        let sigma = 0.1;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| {
                1.0 + 2.0 * x + sigma * rand_distr::num_traits::Float::sqrt(-2.0 * rng.gen::<f64>().ln())
                    * (std::f64::consts::TAU * rng.gen::<f64>()).cos()
            })
            .collect();
        let mut resid = |p: &[f64], out: &mut Vec<f64>| {
            out.clear();
            out.extend(xs.iter().zip(&ys).map(|(&x, &y)| p[0] + p[1] * x - y));
        };
        let fit = levenberg_marquardt(&mut resid, &[0.0, 0.0], &Default::default());
        let sxx: f64 = {
            let mx = xs.iter().sum::<f64>() / n as f64;
            xs.iter().map(|&x| (x - mx).powi(2)).sum()
        };
        let analytic = sigma / sxx.sqrt();
        let got = fit.std_err(1);
        assert!(got > analytic / 2.0 && got < analytic * 2.0, "got {got}, analytic {analytic}");
    }
}
