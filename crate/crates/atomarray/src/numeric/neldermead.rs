//! Derivative-free simplex minimization (Nelder–Mead with adaptive
//! parameters), used where residual Jacobians are awkward.

pub struct NmOptions {
    pub max_iter: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    /// Initial simplex edge, relative to |x0| (absolute where x0 ~ 0).
    pub step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions { max_iter: 2000, f_tol: 1e-12, x_tol: 1e-10, step: 0.05 }
    }
}

/// Minimize `f` starting from `x0`. Returns (argmin, min value).
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &NmOptions,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    // adaptive coefficients (Gao & Han) help for n > 2
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / n as f64;
    let gamma = 0.75 - 0.5 / n as f64;
    let delta = 1.0 - 1.0 / n as f64;

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let h = if v[i].abs() > 1e-12 { opts.step * v[i].abs() } else { opts.step };
        v[i] += h;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        let (best, worst, second_worst) = (order[0], order[n], order[n - 1]);

        if (values[worst] - values[best]).abs() < opts.f_tol {
            let spread = (0..n)
                .map(|k| {
                    simplex.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max)
                        - simplex.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            if spread < opts.x_tol {
                break;
            }
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| {
                order[..n].iter().map(|&i| simplex[i][k]).sum::<f64>() / n as f64
            })
            .collect();

        let reflect: Vec<f64> = (0..n)
            .map(|k| centroid[k] + alpha * (centroid[k] - simplex[worst][k]))
            .collect();
        let fr = f(&reflect);

        if fr < values[best] {
            let expand: Vec<f64> = (0..n)
                .map(|k| centroid[k] + beta * (reflect[k] - centroid[k]))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let (point, fp) = if fr < values[worst] {
                let outside: Vec<f64> = (0..n)
                    .map(|k| centroid[k] + gamma * (reflect[k] - centroid[k]))
                    .collect();
                let fo = f(&outside);
                (outside, fo)
            } else {
                let inside: Vec<f64> = (0..n)
                    .map(|k| centroid[k] - gamma * (centroid[k] - simplex[worst][k]))
                    .collect();
                let fi = f(&inside);
                (inside, fi)
            };
            if fp < values[worst].min(fr) {
                simplex[worst] = point;
                values[worst] = fp;
            } else {
                // shrink toward best
                let best_pt = simplex[best].clone();
                for &i in order[1..].iter() {
                    for k in 0..n {
                        simplex[i][k] = best_pt[k] + delta * (simplex[i][k] - best_pt[k]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let best = (0..=n).min_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap()).unwrap();
    (simplex[best].clone(), values[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let mut f = |x: &[f64]| {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        };
        let (x, v) = nelder_mead(&mut f, &[-1.2, 1.0], &NmOptions { max_iter: 5000, ..Default::default() });
        assert!(v < 1e-8, "v={v}, x={x:?}");
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn minimizes_quadratic_bowl() {
        let mut f = |x: &[f64]| x.iter().enumerate().map(|(i, &v)| (i as f64 + 1.0) * v * v).sum();
        let (x, v) = nelder_mead(&mut f, &[3.0, -2.0, 1.0], &Default::default());
        assert!(v < 1e-10);
        assert!(x.iter().all(|&xi| xi.abs() < 1e-4));
    }
}
