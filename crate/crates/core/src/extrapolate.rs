//! Polynomial (Neville) extrapolation to `h → 0`.

use num_complex::Complex64;

/// Evaluates at `h = 0` the interpolating polynomial through `(h_i, y_i)`.
pub fn neville_at_zero(hs: &[f64], ys: &[f64]) -> f64 {
    let zs: Vec<Complex64> = ys.iter().map(|&y| Complex64::new(y, 0.0)).collect();
    neville_at_zero_complex(hs, &zs).re
}

pub fn neville_at_zero_complex(hs: &[f64], ys: &[Complex64]) -> Complex64 {
    assert_eq!(hs.len(), ys.len());
    assert!(!hs.is_empty());
    let mut p = ys.to_vec();
    let n = hs.len();
    for m in 1..n {
        for i in 0..n - m {
            let (hi, hj) = (hs[i], hs[i + m]);
            p[i] = (p[i + 1] * hi - p[i] * hj) / (hi - hj);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_quadratic_intercept() {
        let f = |h: f64| 2.5 - 3.0 * h + 7.0 * h * h;
        let hs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = hs.iter().map(|&h| f(h)).collect();
        assert!((neville_at_zero(&hs, &ys) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn single_point_is_itself() {
        assert_eq!(neville_at_zero(&[0.3], &[4.0]), 4.0);
    }
}
