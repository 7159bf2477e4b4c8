//! Fullness: is a planar law supported on a straight line?

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biconv::BiConvRep;
use crate::error::{Error, Result};
use crate::idlaw::CharTriplet;
use crate::measure::{Axis, PlanarMeasure, Vec2};
use crate::transforms::{self, ComplexPoint2, TruncatedCone};

/// Relative residual at or below which a law is declared non-full.
pub const NONFULL_TOL: f64 = 1e-8;
/// Relative residual above which a law is declared full.
pub const FULL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FullnessVerdict {
    Full,
    NonFull,
    Indeterminate,
}

/// The line `αs + βt + γ = 0`, with `α² + β² = 1` and the first nonzero of `(α, β)` positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Line {
    /// Normalizes `(α, β, γ)`; `None` when `α = β = 0`.
    pub fn normalized(alpha: f64, beta: f64, gamma: f64) -> Option<Line> {
        let n = alpha.hypot(beta);
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        let lead = if alpha.abs() > 1e-12 * n { alpha } else { beta };
        let k = lead.signum() / n;
        Some(Line {
            alpha: alpha * k,
            beta: beta * k,
            gamma: gamma * k,
        })
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        self.alpha * x.s + self.beta * x.t + self.gamma
    }

    /// Largest coefficient difference.
    pub fn distance(&self, other: &Line) -> f64 {
        (self.alpha - other.alpha)
            .abs()
            .max((self.beta - other.beta).abs())
            .max((self.gamma - other.gamma).abs())
    }

    /// Image of the line under `x ↦ λx`.
    pub fn dilate(&self, lambda: f64) -> Line {
        Line { gamma: self.gamma * lambda, ..*self }
    }

    /// Image of the line under `x ↦ x − v`.
    pub fn shift_by(&self, v: Vec2) -> Line {
        Line {
            gamma: self.gamma + self.alpha * v.s + self.beta * v.t,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LineReport {
    pub is_full: bool,
    pub verdict: FullnessVerdict,
    /// Best-fit line; absent for full laws.
    pub line: Option<Line>,
    pub residual: f64,
}

impl LineReport {
    fn from_verdict(verdict: FullnessVerdict, line: Option<Line>, residual: f64) -> Self {
        LineReport {
            is_full: verdict == FullnessVerdict::Full,
            line: if verdict == FullnessVerdict::Full { None } else { line },
            verdict,
            residual,
        }
    }

    /// Same verdict and, for non-full laws, lines within `tol`.
    pub fn agrees_with(&self, other: &LineReport, tol: f64) -> bool {
        if self.verdict != other.verdict {
            return false;
        }
        match (self.line, other.line) {
            (Some(a), Some(b)) if self.verdict == FullnessVerdict::NonFull => a.distance(&b) <= tol,
            _ => true,
        }
    }
}

fn classify_residual(r: f64) -> FullnessVerdict {
    if r <= NONFULL_TOL {
        FullnessVerdict::NonFull
    } else if r > FULL_TOL {
        FullnessVerdict::Full
    } else {
        FullnessVerdict::Indeterminate
    }
}

fn check_probes(probes: &[ComplexPoint2]) -> Result<()> {
    let mut distinct: Vec<ComplexPoint2> = Vec::new();
    for p in probes {
        p.check_nonreal()?;
        if !distinct.iter().any(|q| (q.z - p.z).norm() + (q.w - p.w).norm() < 1e-12) {
            distinct.push(*p);
        }
    }
    if distinct.len() < 6 {
        return Err(Error::DegenerateProbes(format!(
            "need at least 6 distinct probes, got {}",
            distinct.len()
        )));
    }
    Ok(())
}

/// Smallest singular direction of the stacked system `Σ_k row_k · (α, β, γ) = 0`.
fn solve_line(rows: &[[Complex64; 3]]) -> LineReport {
    let mut m = DMatrix::<f64>::zeros(2 * rows.len(), 3);
    for (i, r) in rows.iter().enumerate() {
        let scale = r.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let k = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        for j in 0..3 {
            m[(2 * i, j)] = r[j].re * k;
            m[(2 * i + 1, j)] = r[j].im * k;
        }
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let top = sv[order[2]];
    let rel = |i: usize| if top > 0.0 { sv[order[i]] / top } else { 0.0 };
    let residual = rel(0);
    let verdict = classify_residual(residual);
    let row = |i: usize| [vt[(order[i], 0)], vt[(order[i], 1)], vt[(order[i], 2)]];
    let line = if rel(1) <= NONFULL_TOL {
        // two-dimensional solution space: a point mass; report the vertical line through it
        let (n1, n2) = (row(0), row(1));
        let (a, b) = (n2[1], -n1[1]);
        let v: Vec<f64> = (0..3).map(|j| a * n1[j] + b * n2[j]).collect();
        Line::normalized(v[0], 0.0, v[2])
    } else {
        let n = row(0);
        Line::normalized(n[0], n[1], n[2])
    };
    LineReport::from_verdict(verdict, line, residual)
}

/// Fullness from `(αz + βw + γ)G − βG₁(z) − αG₂(w) = 0`, given `(G, G₁, G₂)` at each probe.
pub fn fullness_from_cauchy(
    probes: &[ComplexPoint2],
    eval: impl Fn(ComplexPoint2) -> Result<(Complex64, Complex64, Complex64)> + Sync,
) -> Result<LineReport> {
    check_probes(probes)?;
    let rows = probes
        .par_iter()
        .map(|p| {
            let (g, g1, g2) = eval(*p)?;
            Ok([p.z * g - g2, p.w * g - g1, g])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(solve_line(&rows))
}

/// Fullness from `zw(αz + βw)φ = βw²φ₁(z) + αz²φ₂(w) − γzw`, divided through by `z²w²`.
pub fn fullness_from_phi(
    probes: &[ComplexPoint2],
    eval: impl Fn(ComplexPoint2) -> Result<(Complex64, Complex64, Complex64)> + Sync,
) -> Result<LineReport> {
    check_probes(probes)?;
    let rows = probes
        .par_iter()
        .map(|p| {
            let (z, w) = (p.z, p.w);
            let (phi, phi1, phi2) = eval(*p)?;
            Ok([phi / w - phi2 / (w * w), phi / z - phi1 / (z * z), (z * w).inv()])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(solve_line(&rows))
}

/// Cauchy-transform criterion for an atomic law.
pub fn by_g(mu: &PlanarMeasure, probes: &[ComplexPoint2]) -> Result<LineReport> {
    let (m1, m2) = (mu.marginal(Axis::S), mu.marginal(Axis::T));
    fullness_from_cauchy(probes, |p| {
        Ok((
            transforms::cauchy2d(mu, p)?,
            transforms::cauchy1d(&m1, p.z)?,
            transforms::cauchy1d(&m2, p.w)?,
        ))
    })
}

/// Cauchy-transform criterion for a law given by its φ-representation.
pub fn by_g_rep(rep: &BiConvRep, probes: &[ComplexPoint2]) -> Result<LineReport> {
    let (r1, r2) = (rep.marginal_rep(Axis::S), rep.marginal_rep(Axis::T));
    fullness_from_cauchy(probes, |p| Ok((rep.eval_g2d(p)?, r1.eval_g(p.z)?, r2.eval_g(p.w)?)))
}

/// φ-criterion for an atomic law.
pub fn by_phi_measure(mu: &PlanarMeasure, probes: &[ComplexPoint2]) -> Result<LineReport> {
    let cone = TruncatedCone::for_planar(mu);
    let (m1, m2) = (mu.marginal(Axis::S), mu.marginal(Axis::T));
    fullness_from_phi(probes, |p| {
        Ok((
            transforms::bi_free_phi(mu, p, &cone)?,
            transforms::free_phi(&m1, p.z, &cone)?,
            transforms::free_phi(&m2, p.w, &cone)?,
        ))
    })
}

/// φ-criterion for a φ-representation.
pub fn by_phi_rep(rep: &BiConvRep, probes: &[ComplexPoint2]) -> Result<LineReport> {
    let (r1, r2) = (rep.marginal_rep(Axis::S), rep.marginal_rep(Axis::T));
    fullness_from_phi(probes, |p| Ok((rep.eval_phi(p)?, r1.phi(p.z)?, r2.phi(p.w)?)))
}

/// φ-criterion for an infinitely divisible law.
pub fn by_phi_triplet(t: &CharTriplet, probes: &[ComplexPoint2]) -> Result<LineReport> {
    fullness_from_phi(probes, |p| {
        Ok((
            t.bi_free_phi(p)?,
            t.marginal_phi(Axis::S, p.z)?.0,
            t.marginal_phi(Axis::T, p.w)?.0,
        ))
    })
}

fn perp(d: Vec2) -> Vec2 {
    Vec2::new(-d.t, d.s).scale(1.0 / d.norm())
}

/// Triplet criterion: non-full iff `A` is singular and `τ` lives on `{⟨u,x⟩ = 0}` for a kernel vector `u`.
pub fn of_id(t: &CharTriplet) -> LineReport {
    let [(lo, v_lo), (hi, _)] = t.a.eigen();
    let scale = hi.abs().max(1.0);
    let dirs: Vec<Vec2> = t.tau.support_directions().into_iter().filter(|d| d.norm() > 0.0).collect();
    let misalignment = |u: Vec2| dirs.iter().map(|d| u.dot(*d).abs() / d.norm()).fold(0.0, f64::max);

    let candidate = if hi.abs() <= NONFULL_TOL * scale {
        Some(match dirs.first() {
            None => Vec2::new(1.0, 0.0),
            Some(d) => perp(*d),
        })
    } else if lo.abs() <= NONFULL_TOL * scale {
        Some(v_lo)
    } else {
        None
    };
    match candidate {
        Some(u) => {
            let defect = misalignment(u);
            let residual = defect.max(lo.abs() / scale);
            let verdict = if defect <= NONFULL_TOL {
                FullnessVerdict::NonFull
            } else {
                FullnessVerdict::Full
            };
            LineReport::from_verdict(verdict, Line::normalized(u.s, u.t, -u.dot(t.v)), residual)
        }
        None => LineReport::from_verdict(FullnessVerdict::Full, None, lo.abs() / scale),
    }
}

/// Support check for atomic laws: all atoms on one line.
pub fn of_support(mu: &PlanarMeasure) -> LineReport {
    let atoms = mu.atoms();
    let base = atoms[0].0;
    let far = atoms
        .iter()
        .map(|a| a.0 - base)
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Vec2::ZERO);
    let spread = mu.max_norm().max(1.0);
    if far.norm() <= 1e-12 * spread {
        let line = Line::normalized(1.0, 0.0, -base.s);
        return LineReport::from_verdict(FullnessVerdict::NonFull, line, 0.0);
    }
    let u = perp(far);
    let defect = atoms.iter().map(|a| u.dot(a.0 - base).abs()).fold(0.0, f64::max) / spread;
    let verdict = if defect <= NONFULL_TOL {
        FullnessVerdict::NonFull
    } else {
        FullnessVerdict::Full
    };
    LineReport::from_verdict(verdict, Line::normalized(u.s, u.t, -u.dot(base)), defect)
}
