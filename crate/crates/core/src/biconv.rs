//! Bi-free additive convolution by φ-addition.
//!
//! A [`BiConvRep`] is never turned back into atoms. It is evaluated through
//! its φ-transform, its Cauchy transform (recovered from the marginal
//! subordination solves) or an ε-smoothed density grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeconv::{FreeConvRep, LineTerm, Subordination};
use crate::idlaw::CharTriplet;
use crate::measure::{Axis, PlanarMeasure, Vec2};
use crate::transforms::{self, cauchy2d, ComplexPoint2, GridDensity, TruncatedCone, DEGENERATE_TOL};

/// One summand of a bi-free convolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Measure(PlanarMeasure),
    Triplet(CharTriplet),
}

impl Term {
    fn cone(&self) -> TruncatedCone {
        match self {
            Term::Measure(mu) => TruncatedCone::for_planar(mu),
            Term::Triplet(_) => TruncatedCone::default(),
        }
    }
}

/// Lazy representation of `term₁ ⊞⊞ … ⊞⊞ term_n ⊞⊞ δ_shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRep", into = "RawRep")]
pub struct BiConvRep {
    pub terms: Vec<Term>,
    pub shift: Vec2,
    pub cone: TruncatedCone,
}

#[derive(Serialize, Deserialize)]
struct RawRep {
    terms: Vec<Term>,
    #[serde(default)]
    shift: Vec2,
}

impl TryFrom<RawRep> for BiConvRep {
    type Error = Error;
    fn try_from(r: RawRep) -> Result<Self> {
        bi_free_convolve(r.terms, r.shift)
    }
}

impl From<BiConvRep> for RawRep {
    fn from(r: BiConvRep) -> Self {
        RawRep {
            terms: r.terms,
            shift: r.shift,
        }
    }
}

/// Builds the convolution of `items` shifted by `shift`.
pub fn bi_free_convolve(items: Vec<Term>, shift: Vec2) -> Result<BiConvRep> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("bi-free convolution of an empty list".into()));
    }
    if !shift.is_finite() {
        return Err(Error::InvalidArgument("shift must be finite".into()));
    }
    let cone = items
        .iter()
        .map(Term::cone)
        .fold(TruncatedCone::default(), |acc, c| acc.intersect(&c));
    Ok(BiConvRep {
        terms: items,
        shift,
        cone,
    })
}

impl BiConvRep {
    /// `Σ φ_term(z,w) + shift₁/z + shift₂/w`.
    pub fn eval_phi(&self, p: ComplexPoint2) -> Result<Complex64> {
        p.check_nonreal()?;
        let mut acc = self.shift.s / p.z + self.shift.t / p.w;
        for t in &self.terms {
            acc += match t {
                Term::Measure(mu) => transforms::bi_free_phi(mu, p, &self.cone)?,
                Term::Triplet(tr) => tr.bi_free_phi(p)?,
            };
        }
        Ok(acc)
    }

    /// Marginal law along `axis` as a free convolution.
    pub fn marginal_rep(&self, axis: Axis) -> FreeConvRep {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Measure(mu) => LineTerm::Atomic(mu.marginal(axis)),
                Term::Triplet(tr) => LineTerm::Marginal {
                    triplet: tr.clone(),
                    axis,
                },
            })
            .collect();
        let rep = FreeConvRep::new(terms, self.shift.coord(axis));
        let cone = rep.cone.intersect(&self.cone);
        rep.with_cone(cone)
    }

    fn measures(&self) -> impl Iterator<Item = &PlanarMeasure> {
        self.terms.iter().filter_map(|t| match t {
            Term::Measure(mu) => Some(mu),
            _ => None,
        })
    }

    /// `1/G_ρ(Z, W)` from the two marginal subordination solutions.
    fn reciprocal_g(&self, s1: &Subordination, s2: &Subordination) -> Result<Complex64> {
        let (zz, ww) = (s1.zeta, s2.zeta);
        let (z, w) = (s1.z, s2.z);
        let zw = z * w;
        let mut d = zz * w + ww * z - zw - (w * self.shift.s + z * self.shift.t);
        for ((mu, o1), o2) in self.measures().zip(&s1.omegas).zip(&s2.omegas) {
            let g = cauchy2d(mu, ComplexPoint2::new(*o1, *o2))?;
            d -= w * (o1 - z) + z * (o2 - w) + zw - g.inv();
        }
        for t in &self.terms {
            if let Term::Triplet(tr) = t {
                d -= zw * tr.bi_free_phi(ComplexPoint2::new(z, w))?;
            }
        }
        if d.norm() < DEGENERATE_TOL || !d.norm().is_finite() {
            return Err(Error::DegenerateDenominator {
                value: d.norm(),
                at: ComplexPoint2::new(zz, ww).to_string(),
            });
        }
        Ok(d)
    }

    /// `G_ρ(Z, W)`.
    pub fn eval_g2d(&self, big: ComplexPoint2) -> Result<Complex64> {
        big.check_nonreal()?;
        let s1 = self.marginal_rep(Axis::S).solve(big.z)?;
        let s2 = self.marginal_rep(Axis::T).solve(big.w)?;
        Ok(self.reciprocal_g(&s1, &s2)?.inv())
    }

    /// ε-smoothed joint density on the grid.
    pub fn density(&self, s_axis: &[f64], t_axis: &[f64], eps: f64) -> Result<GridDensity> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
        }
        let rows = self.marginal_rep(Axis::S).solve_axis(s_axis, eps)?;
        let cols = self.marginal_rep(Axis::T).solve_axis(t_axis, eps)?;
        let values: Result<Vec<Vec<f64>>> = rows
            .par_iter()
            .map(|s1| {
                cols.iter()
                    .map(|up| {
                        let down = conj_solution(up);
                        let g_up = self.reciprocal_g(s1, up)?.inv();
                        let g_down = self.reciprocal_g(s1, &down)?.inv();
                        Ok(-(g_up - g_down).re / (2.0 * PI * PI))
                    })
                    .collect()
            })
            .collect();
        GridDensity::new(s_axis.to_vec(), t_axis.to_vec(), values?, eps)
    }
}

fn conj_solution(s: &Subordination) -> Subordination {
    Subordination {
        zeta: s.zeta.conj(),
        z: s.z.conj(),
        omegas: s.omegas.iter().map(|o| o.conj()).collect(),
        residual: s.residual,
    }
}
