//! Stable laws and domain-of-attraction experiments.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idlaw::{CharTriplet, LevyMeasure, RadialPart, Ray};
use crate::measure::{Axis, Matrix2, PlanarMeasure, Vec2};
use crate::probes;
use crate::transforms::{self, ComplexPoint2, TruncatedCone};

/// Residual below which a stability check is reported as passing.
pub const STABILITY_TOL: f64 = 1e-6;
/// Residual floor below which a convergence run counts as exact.
pub const EXACT_TOL: f64 = 1e-8;

/// Parameters of a stable law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableSpec {
    pub alpha: f64,
    #[serde(default)]
    pub theta: Vec<Ray>,
    #[serde(default)]
    pub v: Vec2,
    #[serde(default, rename = "gaussianA", skip_serializing_if = "Option::is_none")]
    pub gaussian_a: Option<Matrix2>,
}

impl StableSpec {
    pub fn gaussian(v: Vec2, a: Matrix2) -> Self {
        StableSpec {
            alpha: 2.0,
            theta: Vec::new(),
            v,
            gaussian_a: Some(a),
        }
    }

    pub fn radial(alpha: f64, theta: Vec<Ray>, v: Vec2) -> Self {
        StableSpec {
            alpha,
            theta,
            v,
            gaussian_a: None,
        }
    }

    /// `count` rays of mass `m` evenly spaced on the circle.
    pub fn uniform_rays(count: usize, m: f64) -> Vec<Ray> {
        (0..count)
            .map(|k| Ray {
                angle: 2.0 * std::f64::consts::PI * k as f64 / count as f64,
                m,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "stability index must lie in (0,2], got {}",
                self.alpha
            )));
        }
        if self.alpha == 2.0 {
            if !self.theta.is_empty() {
                return Err(Error::InvalidArgument("α = 2 allows no Lévy measure".into()));
            }
            let a = self.gaussian_a.unwrap_or(Matrix2::ZERO);
            if !a.is_psd(crate::idlaw::PSD_TOL) {
                return Err(Error::InvalidArgument("Gaussian matrix is not positive semi-definite".into()));
            }
        } else {
            if self.theta.is_empty() {
                return Err(Error::InvalidArgument("α < 2 needs a nonempty spectral measure".into()));
            }
            if self.gaussian_a.is_some() {
                return Err(Error::InvalidArgument("Gaussian part only allowed when α = 2".into()));
            }
        }
        Ok(())
    }
}

/// Characteristic triplet of the stable law described by `spec`.
pub fn stable_triplet(spec: &StableSpec) -> Result<CharTriplet> {
    spec.validate()?;
    if spec.alpha == 2.0 {
        return CharTriplet::new(spec.v, spec.gaussian_a.unwrap_or(Matrix2::ZERO), LevyMeasure::zero());
    }
    let part = RadialPart::new(spec.alpha, spec.theta.clone())?;
    CharTriplet::new(spec.v, Matrix2::ZERO, LevyMeasure::radial_only(part)?)
}

/// Outcome of a stability check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub u: Vec2,
    pub max_residual: f64,
    pub residuals: Vec<f64>,
    pub stable: bool,
}

/// Fits real `u` minimizing `|target(p) − u₁/z − u₂/w|` over probes.
pub(crate) fn fit_inverse_drift(probes: &[ComplexPoint2], target: &[Complex64]) -> Result<(Vec2, Vec<f64>)> {
    let m = probes.len();
    if m < 2 {
        return Err(Error::DegenerateProbes("need at least two probes".into()));
    }
    let mut a = DMatrix::<f64>::zeros(2 * m, 2);
    let mut rhs = DVector::<f64>::zeros(2 * m);
    for (k, (p, t)) in probes.iter().zip(target).enumerate() {
        let (bz, bw) = (p.z.inv(), p.w.inv());
        a[(2 * k, 0)] = bz.re;
        a[(2 * k, 1)] = bw.re;
        a[(2 * k + 1, 0)] = bz.im;
        a[(2 * k + 1, 1)] = bw.im;
        rhs[2 * k] = t.re;
        rhs[2 * k + 1] = t.im;
    }
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::DegenerateProbes(e.to_string()))?;
    let u = Vec2::new(sol[0], sol[1]);
    let res = probes
        .iter()
        .zip(target)
        .map(|(p, t)| (t - u.s / p.z - u.t / p.w).norm())
        .collect();
    Ok((u, res))
}

/// Stability check with the index of the spec.
pub fn check_stability(spec: &StableSpec, a: f64, b: f64, probes: &[ComplexPoint2]) -> Result<StabilityReport> {
    check_stability_with_index(spec, spec.alpha, a, b, probes)
}

fn stability_residuals(t: &CharTriplet, a: f64, b: f64, c: f64, probes: &[ComplexPoint2]) -> Result<(Vec2, Vec<f64>)> {
    let target: Result<Vec<Complex64>> = probes
        .par_iter()
        .map(|p| Ok(t.bi_free_phi(p.scale(1.0 / a))? + t.bi_free_phi(p.scale(1.0 / b))? - t.bi_free_phi(p.scale(1.0 / c))?))
        .collect();
    fit_inverse_drift(probes, &target?)
}

/// Tests `(D_a μ) ⊞⊞ (D_b μ) = (D_c μ) ⊞⊞ δ_u` with `c^index = a^index + b^index`.
pub fn check_stability_with_index(
    spec: &StableSpec,
    index: f64,
    a: f64,
    b: f64,
    probes: &[ComplexPoint2],
) -> Result<StabilityReport> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument("dilation factors must be positive".into()));
    }
    if !(index > 0.0 && index <= 2.0) {
        return Err(Error::InvalidArgument(format!("index must lie in (0,2], got {index}")));
    }
    let t = stable_triplet(spec)?;
    let c = (a.powf(index) + b.powf(index)).powf(1.0 / index);
    let (u, residuals) = stability_residuals(&t, a, b, c, probes)?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(StabilityReport {
        alpha: index,
        a,
        b,
        c,
        u,
        max_residual,
        residuals,
        stable: max_residual <= STABILITY_TOL,
    })
}

/// The scale `c ∈ [lo, hi]` minimizing the stability residual (golden-section search in `ln c`).
pub fn best_scale(spec: &StableSpec, a: f64, b: f64, lo: f64, hi: f64, probes: &[ComplexPoint2]) -> Result<f64> {
    let t = stable_triplet(spec)?;
    let cost = |lc: f64| -> Result<f64> {
        let (_, r) = stability_residuals(&t, a, b, lc.exp(), probes)?;
        Ok(r.iter().copied().fold(0.0, f64::max))
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x0, mut x3) = (lo.ln(), hi.ln());
    let mut x1 = x3 - g * (x3 - x0);
    let mut x2 = x0 + g * (x3 - x0);
    let (mut f1, mut f2) = (cost(x1)?, cost(x2)?);
    for _ in 0..60 {
        if f1 < f2 {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - g * (x3 - x0);
            f1 = cost(x1)?;
        } else {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + g * (x3 - x0);
            f2 = cost(x2)?;
        }
    }
    Ok((0.5 * (x1 + x2)).exp())
}

/// Index `α` read off from `|φ'_j(iy)| ∝ y^{−α}` on `y ∈ [10, 100]`.
///
/// Returns `None` when the derivative vanishes identically (symmetric α = 1 marginals).
pub fn marginal_stability_index(t: &CharTriplet, axis: Axis) -> Result<Option<f64>> {
    let ys: Vec<f64> = (0..8).map(|k| 10f64 * 10f64.powf(k as f64 / 7.0)).collect();
    let mut pts = Vec::new();
    for &y in &ys {
        let (phi, dphi) = t.marginal_phi(axis, Complex64::new(0.0, y))?;
        if dphi.norm() <= 1e-12 * (1.0 + phi.norm()) {
            return Ok(None);
        }
        pts.push((y.ln(), dphi.norm().ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(Some(-sxy / sxx))
}

/// Per-n residuals of a domain-of-attraction run in both worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub ns: Vec<u64>,
    pub bifree_residuals: Vec<f64>,
    pub bifree_drifts: Vec<Vec2>,
    pub classical_residuals: Vec<f64>,
    pub classical_drifts: Vec<Vec2>,
    pub bifree_converges: bool,
    pub classical_converges: bool,
    pub agree: bool,
}

/// Decreasing residuals with log-log slope ≤ −½, or an exact match.
pub fn converges(ns: &[u64], res: &[f64]) -> bool {
    let last = *res.last().unwrap_or(&f64::INFINITY);
    if last <= EXACT_TOL {
        return true;
    }
    if res.len() < 2 || res.windows(2).any(|w| !(w[1] < w[0])) {
        return false;
    }
    let n = ns.len() as f64;
    let xs: Vec<f64> = ns.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = res.iter().map(|r| r.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx <= -0.5
}

/// Fits real `u` so that `ψ(u_k) + i⟨u_k, u⟩` matches `target_k`; returns `u` and
/// the residuals `|e^{ψ + i⟨·,u⟩} − e^{target}|`.
fn fit_phase(freqs: &[Vec2], psi: &[Complex64], target: &[Complex64]) -> Result<(Vec2, Vec<f64>)> {
    let m = freqs.len();
    let mut a = DMatrix::<f64>::zeros(m, 2);
    let mut rhs = DVector::<f64>::zeros(m);
    for (k, u) in freqs.iter().enumerate() {
        a[(k, 0)] = u.s;
        a[(k, 1)] = u.t;
        rhs[k] = target[k].im - psi[k].im;
    }
    let sol = a
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::DegenerateProbes(e.to_string()))?;
    let d = Vec2::new(sol[0], sol[1]);
    let res = freqs
        .iter()
        .zip(psi.iter().zip(target))
        .map(|(u, (p, t))| ((p + Complex64::new(0.0, u.dot(d))).exp() - t.exp()).norm())
        .collect();
    Ok((d, res))
}

/// Principal logarithm of the characteristic function of an atomic measure.
pub(crate) fn log_cf(mu: &PlanarMeasure, u: Vec2) -> Result<Complex64> {
    let cf = mu.char_fn(u);
    if cf.norm() == 0.0 {
        return Err(Error::InvalidArgument(format!("characteristic function vanishes at {u}")));
    }
    Ok(cf.ln())
}

/// Runs `D_{1/b_n} ν^{⋆n}` with `b_n = n^{1/α}` against the stable target in both worlds.
pub fn domain_of_attraction_run(nu: &PlanarMeasure, spec: &StableSpec, ns: &[u64]) -> Result<ConvergenceReport> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("ns must be nonempty and strictly increasing".into()));
    }
    let target = stable_triplet(spec)?;
    let pts = probes::tensor(1.0);
    let freqs = probes::frequencies(1.0);
    let phi_target: Vec<Complex64> = pts.iter().map(|p| target.bi_free_phi(*p)).collect::<Result<_>>()?;
    let psi_target: Vec<Complex64> = freqs.iter().map(|u| target.classical_exponent(*u)).collect::<Result<_>>()?;
    let cone = TruncatedCone::for_planar(nu);

    let rows: Result<Vec<_>> = ns
        .par_iter()
        .map(|&n| {
            let nf = n as f64;
            let bn = nf.powf(1.0 / spec.alpha);
            let diff: Vec<Complex64> = pts
                .iter()
                .zip(&phi_target)
                .map(|(p, ft)| Ok(ft - transforms::bi_free_phi(nu, p.scale(bn), &cone)? * nf))
                .collect::<Result<_>>()?;
            let (ub, rb) = fit_inverse_drift(&pts, &diff)?;
            let psi: Vec<Complex64> = freqs
                .iter()
                .map(|u| Ok(log_cf(nu, u.scale(1.0 / bn))? * nf))
                .collect::<Result<_>>()?;
            let (uc, rc) = fit_phase(&freqs, &psi, &psi_target)?;
            let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
            Ok((max(&rb), ub, max(&rc), uc))
        })
        .collect();
    let rows = rows?;
    let bifree_residuals: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let classical_residuals: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let bifree_converges = converges(ns, &bifree_residuals);
    let classical_converges = converges(ns, &classical_residuals);
    Ok(ConvergenceReport {
        ns: ns.to_vec(),
        bifree_drifts: rows.iter().map(|r| r.1).collect(),
        classical_drifts: rows.iter().map(|r| r.3).collect(),
        bifree_residuals,
        classical_residuals,
        bifree_converges,
        classical_converges,
        agree: bifree_converges == classical_converges,
    })
}
