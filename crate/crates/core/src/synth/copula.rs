//! Gaussian copula for correlated per-technique correctness.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const RHO_LIMIT: f64 = 0.999;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Latent threshold for a success probability: `P(Z < t) = p`.
pub fn threshold_for_rate(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        std_normal().inverse_cdf(p)
    }
}

fn bivariate_density(h: f64, k: f64, r: f64) -> f64 {
    let one_minus = 1.0 - r * r;
    (-(h * h - 2.0 * r * h * k + k * k) / (2.0 * one_minus)).exp()
        / (2.0 * std::f64::consts::PI * one_minus.sqrt())
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)
}

/// `P(X < h, Y < k)` for standard bivariate normals with correlation `rho`,
/// via `Φ(h)Φ(k) + ∫₀^ρ φ₂(h, k; r) dr`.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    let base = normal_cdf(h) * normal_cdf(k);
    if rho == 0.0 || !h.is_finite() || !k.is_finite() {
        return base;
    }
    let f = |r: f64| bivariate_density(h, k, r);
    let integral = simpson(&f, 0.0, rho, f(0.0), f(0.5 * rho), f(rho), 1e-13, 40);
    (base + integral).clamp(0.0, 1.0)
}

/// Latent correlation giving `P(both correct) = overlap` for the given rates.
pub fn correlation_for_overlap(rate_a: f64, rate_b: f64, overlap: f64) -> Result<f64> {
    let independent = rate_a * rate_b;
    if rate_a <= 0.0 || rate_a >= 1.0 || rate_b <= 0.0 || rate_b >= 1.0 {
        if (overlap - independent).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "overlap {overlap} is impossible for rates {rate_a} and {rate_b}"
            )));
        }
        return Ok(0.0);
    }
    let (h, k) = (threshold_for_rate(rate_a), threshold_for_rate(rate_b));
    let joint = |r: f64| bivariate_normal_cdf(h, k, r);
    let (lo_val, hi_val) = (joint(-RHO_LIMIT), joint(RHO_LIMIT));
    if overlap < lo_val - 1e-9 || overlap > hi_val + 1e-9 {
        return Err(Error::InvalidSpec(format!(
            "overlap {overlap} for rates {rate_a}, {rate_b} is outside the reachable range [{lo_val:.4}, {hi_val:.4}]"
        )));
    }
    let (mut lo, mut hi) = (-RHO_LIMIT, RHO_LIMIT);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if joint(mid) < overlap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Lower-triangular Cholesky factor of a symmetric matrix, or an error if it
/// is not positive definite.
pub fn cholesky(matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = matrix.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = matrix[i][i] - s;
                if d <= 1e-12 {
                    return Err(Error::InvalidSpec(
                        "overlap constraints imply a latent correlation matrix that is not positive definite".into(),
                    ));
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (matrix[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_and_known_values() {
        assert!((bivariate_normal_cdf(0.0, 0.0, 0.0) - 0.25).abs() < 1e-12);
        // P(X<0, Y<0) = 1/4 + asin(ρ)/(2π)
        for rho in [-0.9, -0.3, 0.5, 0.95] {
            let expected = 0.25 + f64::asin(rho) / (2.0 * std::f64::consts::PI);
            assert!((bivariate_normal_cdf(0.0, 0.0, rho) - expected).abs() < 1e-9, "rho {rho}");
        }
    }

    #[test]
    fn overlap_inversion() {
        assert!(correlation_for_overlap(0.6, 0.6, 0.36).unwrap().abs() < 1e-9);
        let rho = correlation_for_overlap(0.6, 0.5, 0.2).unwrap();
        assert!(rho < 0.0);
        let (h, k) = (threshold_for_rate(0.6), threshold_for_rate(0.5));
        assert!((bivariate_normal_cdf(h, k, rho) - 0.2).abs() < 1e-9);
        assert!(correlation_for_overlap(0.6, 0.5, 0.55).is_err());
        assert!(correlation_for_overlap(1.0, 0.5, 0.5).is_ok());
        assert!(correlation_for_overlap(1.0, 0.5, 0.3).is_err());
    }

    #[test]
    fn cholesky_reconstructs_and_rejects() {
        let m = vec![vec![1.0, 0.5, 0.2], vec![0.5, 1.0, -0.3], vec![0.2, -0.3, 1.0]];
        let l = cholesky(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - m[i][j]).abs() < 1e-12);
            }
        }
        let bad = vec![vec![1.0, -0.9, -0.9], vec![-0.9, 1.0, -0.9], vec![-0.9, -0.9, 1.0]];
        assert!(matches!(cholesky(&bad), Err(Error::InvalidSpec(_))));
    }
}
