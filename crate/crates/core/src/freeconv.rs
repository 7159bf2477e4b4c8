//! Free additive convolution of laws on the line, evaluated lazily.
//!
//! The Cauchy transform of `ρ = ν₁ ⊞ … ⊞ ν_n ⊞ (ID parts) ⊞ δ_a` is recovered
//! by solving `φ_ρ(z) + z = ζ` for `z = F_ρ(ζ)`. For atomic terms the
//! inverse `F_k⁻¹(z)` is carried as an extra unknown `ω_k` with
//! `F_k(ω_k) = z`, and the whole system is solved by one Newton iteration
//! whose Jacobian is an arrowhead matrix. Points close to the real axis are
//! reached by halving the imaginary part from a safe height.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::idlaw::CharTriplet;
use crate::measure::{Axis, Measure1D};
use crate::transforms::{self, f_and_derivative, require_nonreal, TruncatedCone};

const SOLVE_TOL: f64 = 1e-13;
const ACCEPT_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 100;
const MAX_BISECT_DEPTH: usize = 12;

/// One summand of a free convolution.
#[derive(Debug, Clone, PartialEq)]
pub enum LineTerm {
    Atomic(Measure1D),
    /// Marginal of a bi-free infinitely divisible law.
    Marginal { triplet: CharTriplet, axis: Axis },
}

impl LineTerm {
    fn scale(&self) -> f64 {
        match self {
            LineTerm::Atomic(nu) => nu.max_abs(),
            LineTerm::Marginal { triplet, axis } => triplet.marginal_scale(*axis),
        }
    }
}

/// Lazily evaluable representation of a free convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeConvRep {
    pub terms: Vec<LineTerm>,
    pub shift: f64,
    pub cone: TruncatedCone,
}

/// `ν₁ ⊞ ν₂`.
pub fn free_convolve(left: Measure1D, right: Measure1D) -> FreeConvRep {
    FreeConvRep::new(vec![LineTerm::Atomic(left), LineTerm::Atomic(right)], 0.0)
}

/// Solution of the subordination system at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Subordination {
    pub zeta: Complex64,
    /// `F_ρ(ζ)`.
    pub z: Complex64,
    /// `F_k⁻¹(z)` for each atomic term, in term order.
    pub omegas: Vec<Complex64>,
    pub residual: f64,
}

impl Subordination {
    fn conj(self) -> Subordination {
        Subordination {
            zeta: self.zeta.conj(),
            z: self.z.conj(),
            omegas: self.omegas.into_iter().map(|w| w.conj()).collect(),
            residual: self.residual,
        }
    }

    pub fn g(&self) -> Complex64 {
        self.z.inv()
    }
}

impl FreeConvRep {
    pub fn new(terms: Vec<LineTerm>, shift: f64) -> FreeConvRep {
        let r: f64 = terms
            .iter()
            .filter_map(|t| match t {
                LineTerm::Atomic(nu) => Some(nu.max_abs()),
                _ => None,
            })
            .fold(0.0, f64::max);
        let cone = TruncatedCone {
            theta: 1.0,
            m: (8.0 * r).max(1.0),
        };
        FreeConvRep { terms, shift, cone }
    }

    pub fn with_cone(mut self, cone: TruncatedCone) -> Self {
        self.cone = cone;
        self
    }

    fn atomic(&self) -> impl Iterator<Item = &Measure1D> {
        self.terms.iter().filter_map(|t| match t {
            LineTerm::Atomic(nu) => Some(nu),
            _ => None,
        })
    }

    /// Total spread used to pick a safe starting height.
    pub fn scale(&self) -> f64 {
        1.0 + self.shift.abs() + self.terms.iter().map(LineTerm::scale).sum::<f64>()
    }

    /// Heuristic smallest ε for which recovery near the axis is expected to work.
    pub fn epsilon_min(&self) -> f64 {
        0.02 * (1.0 + self.atomic().map(Measure1D::max_abs).sum::<f64>())
    }

    /// `φ_ρ(z) = Σ φ_k(z) + a`.
    pub fn phi(&self, z: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(self.shift, 0.0);
        for t in &self.terms {
            acc += match t {
                LineTerm::Atomic(nu) => transforms::free_phi(nu, z, &self.cone)?,
                LineTerm::Marginal { triplet, axis } => triplet.marginal_phi(*axis, z)?.0,
            };
        }
        Ok(acc)
    }

    fn id_phi(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let mut phi = Complex64::new(0.0, 0.0);
        let mut dphi = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            if let LineTerm::Marginal { triplet, axis } = t {
                let (p, dp) = triplet.marginal_phi(*axis, z)?;
                phi += p;
                dphi += dp;
            }
        }
        Ok((phi, dphi))
    }

    fn residuals(&self, zeta: Complex64, z: Complex64, omegas: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Complex64>, Complex64, f64)> {
        let (idp, iddp) = self.id_phi(z)?;
        let mut r0 = z + idp + self.shift - zeta;
        let mut rk = Vec::with_capacity(omegas.len());
        let mut dfk = Vec::with_capacity(omegas.len());
        let mut norm: f64 = 0.0;
        for (nu, &om) in self.atomic().zip(omegas) {
            let (f, df) = f_and_derivative(nu, om);
            let r = f - z;
            norm = norm.max(r.norm());
            rk.push(r);
            dfk.push(df);
            r0 += om - z;
        }
        norm = norm.max(r0.norm());
        if !norm.is_finite() {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: f64::INFINITY,
                at: format!("ζ={zeta}"),
            });
        }
        rk.push(r0);
        Ok((rk, dfk, iddp, norm))
    }

    /// Newton solve at `zeta` (upper half-plane) from a starting state.
    fn newton(&self, zeta: Complex64, mut z: Complex64, mut omegas: Vec<Complex64>) -> Result<Subordination> {
        let n_atomic = omegas.len() as f64;
        let tol = SOLVE_TOL * (1.0 + zeta.norm());
        let (mut r, mut dfk, mut iddp, mut norm) = self.residuals(zeta, z, &omegas)?;
        let mut iter = 0;
        while norm > tol && iter < MAX_NEWTON {
            iter += 1;
            let r0 = r[r.len() - 1];
            let mut diag = Complex64::new(1.0 - n_atomic, 0.0) + iddp;
            let mut rhs = -r0;
            for (rk, df) in r.iter().zip(&dfk) {
                diag += df.inv();
                rhs += rk / df;
            }
            let dz = rhs / diag;
            let domegas: Vec<Complex64> = r.iter().zip(&dfk).map(|(rk, df)| (dz - rk) / df).collect();
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda > 1e-6 {
                let cz = z + dz * lambda;
                let com: Vec<Complex64> = omegas.iter().zip(&domegas).map(|(o, d)| o + d * lambda).collect();
                if cz.im > 0.0 && com.iter().all(|o| o.im > 0.0) {
                    if let Ok((cr, cdf, cidd, cn)) = self.residuals(zeta, cz, &com) {
                        if cn < norm {
                            z = cz;
                            omegas = com;
                            r = cr;
                            dfk = cdf;
                            iddp = cidd;
                            norm = cn;
                            accepted = true;
                            break;
                        }
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if norm <= ACCEPT_TOL * (1.0 + zeta.norm()) {
            Ok(Subordination {
                zeta,
                z,
                omegas,
                residual: norm,
            })
        } else {
            Err(Error::NoConvergence {
                iterations: iter,
                residual: norm,
                at: format!("ζ={zeta}"),
            })
        }
    }

    fn descend(&self, from: &Subordination, target: Complex64, depth: usize) -> Result<Subordination> {
        match self.newton(target, from.z, from.omegas.clone()) {
            Ok(s) => Ok(s),
            Err(e) if depth >= MAX_BISECT_DEPTH => Err(e),
            Err(_) => {
                let mid = Complex64::new(target.re, (from.zeta.im * target.im).sqrt());
                let m = self.descend(from, mid, depth + 1)?;
                self.descend(&m, target, depth + 1)
            }
        }
    }

    /// Solves for `F_ρ(ζ)` and the atomic subordination points.
    pub fn solve(&self, zeta: Complex64) -> Result<Subordination> {
        require_nonreal(zeta)?;
        if zeta.im < 0.0 {
            return self.solve(zeta.conj()).map(Subordination::conj);
        }
        let top = self.cone.m.max(2.0 * self.scale());
        let mut heights = vec![zeta.im];
        while *heights.last().unwrap() < top {
            let y = heights.last().unwrap() * 2.0;
            heights.push(y);
        }
        heights.reverse();
        let start = Complex64::new(zeta.re, heights[0]);
        let n_atomic = self.atomic().count();
        let mut state = self.newton(start, start - self.shift, vec![start; n_atomic])?;
        for &y in &heights[1..] {
            state = self.descend(&state, Complex64::new(zeta.re, y), 0)?;
        }
        Ok(state)
    }

    /// `G_ρ(ζ)`.
    pub fn eval_g(&self, zeta: Complex64) -> Result<Complex64> {
        Ok(self.solve(zeta)?.g())
    }

    /// ε-smoothed density of `ρ` along `axis`.
    pub fn density(&self, axis: &[f64], eps: f64) -> Result<Vec<f64>> {
        transforms::stieltjes1d(|z| self.eval_g(z), axis, eps)
    }

    /// Subordination solutions at `s + iε` for every `s` on the axis.
    pub fn solve_axis(&self, axis: &[f64], eps: f64) -> Result<Vec<Subordination>> {
        axis.par_iter()
            .map(|&s| self.solve(Complex64::new(s, eps)))
            .collect()
    }
}
