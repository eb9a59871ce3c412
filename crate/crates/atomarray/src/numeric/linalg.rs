//! Dense solves on small row-major matrices.

/// Solve A x = b in place via Gaussian elimination with partial pivoting.
/// `a` is n×n row-major. Returns None if singular to working precision.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap()
        })?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Some(b)
}

/// Invert a symmetric positive-definite n×n matrix (row-major) by solving
/// against the identity. Returns None if not invertible.
pub fn invert_spd(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(a.to_vec(), e)?;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

/// Lower-triangular Cholesky factor of a symmetric positive semi-definite
/// matrix, with a small diagonal jitter fallback. Used for parametric
/// bootstrap draws from a fit covariance.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s < -1e-12 {
                    return None;
                }
                l[i * n + i] = s.max(0.0).sqrt();
            } else {
                l[i * n + j] = if l[j * n + j] > 0.0 { s / l[j * n + j] } else { 0.0 };
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        let a = vec![4.0, 1.0, 1.0, 3.0];
        let x = solve(a, vec![1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_of_spd() {
        let a = vec![2.0, 0.5, 0.5, 1.0];
        let inv = invert_spd(&a, 2).unwrap();
        // A * inv = I
        let m00 = a[0] * inv[0] + a[1] * inv[2];
        let m11 = a[2] * inv[1] + a[3] * inv[3];
        assert!((m00 - 1.0).abs() < 1e-12 && (m11 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = vec![4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        let r00 = l[0] * l[0];
        let r10 = l[2] * l[0];
        let r11 = l[2] * l[2] + l[3] * l[3];
        assert!((r00 - 4.0).abs() < 1e-12 && (r10 - 2.0).abs() < 1e-12 && (r11 - 3.0).abs() < 1e-12);
    }
}
