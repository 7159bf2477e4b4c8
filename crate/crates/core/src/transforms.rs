//! Cauchy transforms, F-transforms, φ-transforms and Stieltjes inversion.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Axis, Measure1D, PlanarMeasure};

/// Threshold on `|zw·G(F₁⁻¹(z), F₂⁻¹(w))|` below which the bi-free φ is refused.
pub const DEGENERATE_TOL: f64 = 1e-14;

const INVERT_TOL: f64 = 1e-12;
const INVERT_MAX_ITER: usize = 100;

/// `Γ_{θ,M} = {x + iy : |x| ≤ θ|y|, |y| ≥ M}` (and its conjugate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedCone {
    pub theta: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl TruncatedCone {
    pub fn new(theta: f64, m: f64) -> Result<Self> {
        if !(theta > 0.0 && m > 0.0 && theta.is_finite() && m.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cone needs θ > 0 and M > 0, got θ={theta}, M={m}"
            )));
        }
        Ok(TruncatedCone { theta, m })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re.abs() <= self.theta * z.im.abs() && z.im.abs() >= self.m
    }

    /// Common cone of two cones (smaller aperture, larger height).
    pub fn intersect(&self, other: &TruncatedCone) -> TruncatedCone {
        TruncatedCone {
            theta: self.theta.min(other.theta),
            m: self.m.max(other.m),
        }
    }

    fn from_radius(r: f64) -> TruncatedCone {
        TruncatedCone {
            theta: 1.0,
            m: (8.0 * r).max(1.0),
        }
    }

    /// Default cone for a planar measure: θ = 1, M = max(1, 8R).
    pub fn for_planar(mu: &PlanarMeasure) -> TruncatedCone {
        Self::from_radius(mu.max_norm())
    }

    pub fn for_line(nu: &Measure1D) -> TruncatedCone {
        Self::from_radius(nu.max_abs())
    }
}

impl Default for TruncatedCone {
    fn default() -> Self {
        TruncatedCone { theta: 1.0, m: 1.0 }
    }
}

/// A pair `(z, w)` of complex arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint2 {
    pub z: Complex64,
    pub w: Complex64,
}

impl ComplexPoint2 {
    pub fn new(z: Complex64, w: Complex64) -> Self {
        ComplexPoint2 { z, w }
    }

    pub fn imag(y: f64, v: f64) -> Self {
        ComplexPoint2::new(Complex64::new(0.0, y), Complex64::new(0.0, v))
    }

    pub fn conj(&self) -> Self {
        ComplexPoint2::new(self.z.conj(), self.w.conj())
    }

    pub fn scale(&self, k: f64) -> Self {
        ComplexPoint2::new(self.z * k, self.w * k)
    }

    pub fn check_nonreal(&self) -> Result<()> {
        require_nonreal(self.z)?;
        require_nonreal(self.w)
    }
}

impl fmt::Display for ComplexPoint2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(z={}, w={})", self.z, self.w)
    }
}

pub(crate) fn require_nonreal(z: Complex64) -> Result<()> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        return Err(Error::RealArgument(format!("{z}")));
    }
    Ok(())
}

/// `G_μ(z,w) = Σ w_k / ((z − s_k)(w − t_k))`.
pub fn cauchy2d(mu: &PlanarMeasure, p: ComplexPoint2) -> Result<Complex64> {
    p.check_nonreal()?;
    Ok(mu
        .atoms()
        .iter()
        .map(|(x, wt)| *wt / ((p.z - x.s) * (p.w - x.t)))
        .sum())
}

/// `G_ν(z)`.
pub fn cauchy1d(nu: &Measure1D, z: Complex64) -> Result<Complex64> {
    require_nonreal(z)?;
    Ok(nu.cauchy_and_derivative(z).0)
}

/// `F_ν(z) = 1/G_ν(z)`.
pub fn reciprocal_f(nu: &Measure1D, z: Complex64) -> Result<Complex64> {
    Ok(cauchy1d(nu, z)?.inv())
}

/// `F_ν` and `F_ν'` at `z`.
pub(crate) fn f_and_derivative(nu: &Measure1D, z: Complex64) -> (Complex64, Complex64) {
    let (g, dg) = nu.cauchy_and_derivative(z);
    let f = g.inv();
    (f, -dg * f * f)
}

fn newton_invert(nu: &Measure1D, target: Complex64, start: Complex64) -> Result<Complex64> {
    let side = target.im.signum();
    let tol = INVERT_TOL * (1.0 + target.norm());
    let mut zeta = start;
    let (mut f, mut df) = f_and_derivative(nu, zeta);
    let mut res = (f - target).norm();
    for _ in 0..INVERT_MAX_ITER {
        if res <= tol {
            // one polishing step, kept only if it does not hurt
            let cand = zeta - (f - target) / df;
            if cand.im * side > 0.0 {
                let (f2, _) = f_and_derivative(nu, cand);
                if (f2 - target).norm() <= res {
                    return Ok(cand);
                }
            }
            return Ok(zeta);
        }
        let step = (f - target) / df;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = zeta - step * lambda;
            if cand.im * side > 0.0 && cand.re.is_finite() && cand.im.is_finite() {
                let (f2, df2) = f_and_derivative(nu, cand);
                let r2 = (f2 - target).norm();
                if r2.is_finite() && (r2 < res || lambda < 1e-3) {
                    zeta = cand;
                    f = f2;
                    df = df2;
                    res = r2;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= tol {
        return Ok(zeta);
    }
    Err(Error::NoConvergence {
        iterations: INVERT_MAX_ITER,
        residual: res,
        at: format!("F⁻¹({target})"),
    })
}

/// Solves `F_ν(ζ) = target` by Newton's method starting from `target`.
///
/// Targets below the cone height are reached by a geometric descent of the
/// imaginary part from `M`, warm-starting each Newton solve.
pub fn invert_f(nu: &Measure1D, target: Complex64, cone: &TruncatedCone) -> Result<Complex64> {
    require_nonreal(target)?;
    let side = target.im.signum();
    let height = target.im.abs();
    if height >= cone.m {
        return newton_invert(nu, target, target);
    }
    let mut levels = Vec::new();
    let mut y = cone.m;
    while y > height {
        levels.push(y);
        y *= 0.5;
    }
    levels.push(height);
    let mut guess = Complex64::new(target.re, side * levels[0]);
    for &y in &levels {
        let t = Complex64::new(target.re, side * y);
        guess = newton_invert(nu, t, guess)?;
    }
    Ok(guess)
}

/// Voiculescu transform `φ_ν(z) = F_ν⁻¹(z) − z`.
pub fn free_phi(nu: &Measure1D, z: Complex64, cone: &TruncatedCone) -> Result<Complex64> {
    Ok(invert_f(nu, z, cone)? - z)
}

/// Bi-free φ-transform of an atomic planar measure.
pub fn bi_free_phi(mu: &PlanarMeasure, p: ComplexPoint2, cone: &TruncatedCone) -> Result<Complex64> {
    p.check_nonreal()?;
    let m1 = mu.marginal(Axis::S);
    let m2 = mu.marginal(Axis::T);
    let zi = invert_f(&m1, p.z, cone)?;
    let wi = invert_f(&m2, p.w, cone)?;
    let phi1 = zi - p.z;
    let phi2 = wi - p.w;
    let denom = p.z * p.w * cauchy2d(mu, ComplexPoint2::new(zi, wi))?;
    if denom.norm() < DEGENERATE_TOL {
        return Err(Error::DegenerateDenominator {
            value: denom.norm(),
            at: p.to_string(),
        });
    }
    Ok(phi1 / p.z + phi2 / p.w + 1.0 - denom.inv())
}

/// `−Im G(s + iε)/π` along `axis`.
pub fn stieltjes1d(
    geval: impl Fn(Complex64) -> Result<Complex64> + Sync,
    axis: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    check_eps(eps)?;
    axis.par_iter()
        .map(|&s| geval(Complex64::new(s, eps)).map(|g| -g.im / PI))
        .collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    Ok(())
}

/// `−(1/2π²)·Re[G(s+iε, t+iε) − G(s+iε, t−iε)]` on the grid.
pub fn stieltjes2d(
    geval: impl Fn(ComplexPoint2) -> Result<Complex64> + Sync,
    s_axis: &[f64],
    t_axis: &[f64],
    eps: f64,
) -> Result<GridDensity> {
    check_eps(eps)?;
    let values: Result<Vec<Vec<f64>>> = s_axis
        .par_iter()
        .map(|&s| {
            let z = Complex64::new(s, eps);
            t_axis
                .iter()
                .map(|&t| {
                    let up = geval(ComplexPoint2::new(z, Complex64::new(t, eps)))?;
                    let down = geval(ComplexPoint2::new(z, Complex64::new(t, -eps)))?;
                    Ok(-(up - down).re / (2.0 * PI * PI))
                })
                .collect()
        })
        .collect();
    GridDensity::new(s_axis.to_vec(), t_axis.to_vec(), values?, eps)
}

/// ε-smoothed density values on a rectangular grid; `values[i][j]` sits at `(s_i, t_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub s_axis: Vec<f64>,
    pub t_axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub epsilon: f64,
}

impl GridDensity {
    pub fn new(s_axis: Vec<f64>, t_axis: Vec<f64>, values: Vec<Vec<f64>>, epsilon: f64) -> Result<Self> {
        let sorted = |a: &[f64]| a.windows(2).all(|w| w[0] < w[1]);
        if !sorted(&s_axis) || !sorted(&t_axis) {
            return Err(Error::InvalidArgument("grid axes must be strictly increasing".into()));
        }
        if values.len() != s_axis.len() || values.iter().any(|r| r.len() != t_axis.len()) {
            return Err(Error::InvalidArgument("grid value shape mismatch".into()));
        }
        Ok(GridDensity {
            s_axis,
            t_axis,
            values,
            epsilon,
        })
    }

    /// Riemann sum with trapezoid-style cell widths.
    pub fn mass(&self) -> f64 {
        let ws = cell_widths(&self.s_axis);
        let wt = cell_widths(&self.t_axis);
        self.values
            .iter()
            .zip(&ws)
            .map(|(row, dsi)| dsi * row.iter().zip(&wt).map(|(v, dt)| v * dt).sum::<f64>())
            .sum()
    }

    /// Marginal density along `axis` by summing over the other axis.
    pub fn marginal(&self, axis: Axis) -> Vec<f64> {
        match axis {
            Axis::S => {
                let wt = cell_widths(&self.t_axis);
                self.values
                    .iter()
                    .map(|row| row.iter().zip(&wt).map(|(v, dt)| v * dt).sum())
                    .collect()
            }
            Axis::T => {
                let ws = cell_widths(&self.s_axis);
                (0..self.t_axis.len())
                    .map(|j| self.values.iter().zip(&ws).map(|(row, ds)| row[j] * ds).sum())
                    .collect()
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV: an `s` row, a `t` row, then one row of values per `s`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        write_csv_row(&mut out, "s", &self.s_axis)?;
        write_csv_row(&mut out, "t", &self.t_axis)?;
        for row in &self.values {
            let line: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn write_csv_row(out: &mut impl Write, label: &str, xs: &[f64]) -> std::io::Result<()> {
    let line: Vec<String> = xs.iter().map(|v| fmt_float(*v)).collect();
    writeln!(out, "{label},{}", line.join(","))
}

/// Lossless float formatting (17 significant digits).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Integration weights for a sorted axis (half-cells at the ends).
pub fn cell_widths(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let lo = if i == 0 { axis[0] } else { 0.5 * (axis[i - 1] + axis[i]) };
            let hi = if i == n - 1 { axis[n - 1] } else { 0.5 * (axis[i] + axis[i + 1]) };
            hi - lo
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `|(iy)(iy)·G(iy, iy) − 1|` for each radius `y`.
pub fn tightness_probe(mu: &PlanarMeasure, radii: &[f64]) -> Result<Vec<f64>> {
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("radii must be positive and increasing".into()));
    }
    radii
        .iter()
        .map(|&r| {
            let p = ComplexPoint2::imag(r, r);
            Ok((p.z * p.w * cauchy2d(mu, p)? - 1.0).norm())
        })
        .collect()
}
