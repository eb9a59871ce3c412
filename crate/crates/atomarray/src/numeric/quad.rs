//! Adaptive Simpson quadrature.

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn recurse(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        recurse(f, a, m, fa, flm, fm, left, eps * 0.5, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, eps * 0.5, depth - 1)
    }
}

/// ∫_a^b f dx to absolute tolerance `eps`.
pub fn adaptive_simpson(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, eps, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = adaptive_simpson(&mut |x| x * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-10);
    }

    #[test]
    fn integrates_gaussian() {
        // ∫ exp(-x²/2)/sqrt(2π) over [-8, 8] ≈ 1
        let norm = (std::f64::consts::TAU).sqrt();
        let v = adaptive_simpson(&mut |x: f64| (-0.5 * x * x).exp() / norm, -8.0, 8.0, 1e-10);
        assert!((v - 1.0).abs() < 1e-8);
    }
}
