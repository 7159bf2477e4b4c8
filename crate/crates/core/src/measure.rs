//! Finitely-atomic measures on the line and the plane.
//!
//! Probability measures ([`PlanarMeasure`], [`Measure1D`]) are validated on
//! construction: strictly positive finite weights summing to one, with atoms
//! closer than [`DEDUP_TOL`] merged. [`FiniteMeasure`] carries arbitrary
//! (possibly signed) real weights and is used for Lévy measures, row
//! accumulators and the σ-form of a characteristic triplet.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euclidean distance below which two atoms are treated as the same point.
pub const DEDUP_TOL: f64 = 1e-12;

/// Allowed deviation of the total mass from one when validating input.
pub const MASS_TOL: f64 = 1e-9;

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub s: f64,
    pub t: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { s: 0.0, t: 0.0 };

    pub const fn new(s: f64, t: f64) -> Self {
        Vec2 { s, t }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.s * other.s + self.t * other.t
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.s.hypot(self.t)
    }

    pub fn is_finite(self) -> bool {
        self.s.is_finite() && self.t.is_finite()
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.s * k, self.t * k)
    }

    /// Coordinate along `axis` (1 for s, 2 for t).
    pub fn coord(self, axis: Axis) -> f64 {
        match axis {
            Axis::S => self.s,
            Axis::T => self.t,
        }
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.s, v.t]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.s + o.s, self.t + o.t)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.s - o.s, self.t - o.t)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.s, -self.t)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        self.scale(k)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.s, self.t)
    }
}

/// Coordinate axis of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// First coordinate (s).
    S,
    /// Second coordinate (t).
    T,
}

impl Axis {
    pub fn from_index(j: usize) -> Result<Axis> {
        match j {
            1 => Ok(Axis::S),
            2 => Ok(Axis::T),
            _ => Err(Error::InvalidArgument(format!("axis must be 1 or 2, got {j}"))),
        }
    }
}

/// Symmetric 2×2 matrix `[[a, c], [c, b]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Matrix2 {
    pub a: f64,
    pub c: f64,
    pub b: f64,
}

impl Matrix2 {
    pub const ZERO: Matrix2 = Matrix2 { a: 0.0, c: 0.0, b: 0.0 };
    pub const IDENTITY: Matrix2 = Matrix2 { a: 1.0, c: 0.0, b: 1.0 };

    pub const fn new(a: f64, c: f64, b: f64) -> Self {
        Matrix2 { a, c, b }
    }

    /// Positive semi-definiteness with slack `tol` on the determinant.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.a >= -tol && self.b >= -tol && self.a * self.b - self.c * self.c >= -tol
    }

    /// `⟨Au, u⟩`.
    pub fn quad(&self, u: Vec2) -> f64 {
        self.a * u.s * u.s + 2.0 * self.c * u.s * u.t + self.b * u.t * u.t
    }

    pub fn apply(&self, u: Vec2) -> Vec2 {
        Vec2::new(self.a * u.s + self.c * u.t, self.c * u.s + self.b * u.t)
    }

    pub fn scale(&self, k: f64) -> Matrix2 {
        Matrix2::new(self.a * k, self.c * k, self.b * k)
    }

    /// Eigenvalues in ascending order with unit eigenvectors.
    pub fn eigen(&self) -> [(f64, Vec2); 2] {
        let mean = 0.5 * (self.a + self.b);
        let half_diff = 0.5 * (self.a - self.b);
        let rad = half_diff.hypot(self.c);
        let lo = mean - rad;
        let hi = mean + rad;
        // eigenvector for `hi`: angle θ with tan 2θ = 2c/(a-b)
        let theta = 0.5 * self.c.atan2(half_diff);
        let v_hi = Vec2::new(theta.cos(), theta.sin());
        let v_lo = Vec2::new(-theta.sin(), theta.cos());
        [(lo, v_lo), (hi, v_hi)]
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.a + o.a, self.c + o.c, self.b + o.b)
    }
}

impl TryFrom<[[f64; 2]; 2]> for Matrix2 {
    type Error = String;
    fn try_from(m: [[f64; 2]; 2]) -> std::result::Result<Self, String> {
        let scale = 1.0 + m[0][1].abs().max(m[1][0].abs());
        if (m[0][1] - m[1][0]).abs() > 1e-12 * scale {
            return Err(format!("matrix is not symmetric: {m:?}"));
        }
        if !m.iter().flatten().all(|x| x.is_finite()) {
            return Err("matrix entries must be finite".into());
        }
        Ok(Matrix2::new(m[0][0], m[0][1], m[1][1]))
    }
}

impl From<Matrix2> for [[f64; 2]; 2] {
    fn from(m: Matrix2) -> Self {
        [[m.a, m.c], [m.c, m.b]]
    }
}

/// Scalar types that can be integrated against an atomic measure.
pub trait Scalar: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn finite(&self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

fn merge_planar(mut atoms: Vec<(Vec2, f64)>) -> Vec<(Vec2, f64)> {
    atoms.sort_by(|x, y| {
        x.0.s
            .total_cmp(&y.0.s)
            .then_with(|| x.0.t.total_cmp(&y.0.t))
    });
    let mut out: Vec<(Vec2, f64)> = Vec::with_capacity(atoms.len());
    for (p, w) in atoms {
        let mut merged = false;
        for q in out.iter_mut().rev() {
            if p.s - q.0.s > DEDUP_TOL {
                break;
            }
            if (p - q.0).norm() <= DEDUP_TOL {
                q.1 += w;
                merged = true;
                break;
            }
        }
        if !merged {
            out.push((p, w));
        }
    }
    out
}

fn merge_line(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (p, w) in atoms {
        match out.last_mut() {
            Some(q) if (p - q.0).abs() <= DEDUP_TOL => q.1 += w,
            _ => out.push((p, w)),
        }
    }
    out
}

fn check_probability_weights<P>(atoms: &[(P, f64)], finite: impl Fn(&P) -> bool) -> Result<()> {
    if atoms.is_empty() {
        return Err(Error::InvalidArgument("measure has no atoms".into()));
    }
    let mut total = 0.0;
    for (p, w) in atoms {
        if !finite(p) {
            return Err(Error::InvalidArgument("atom location is not finite".into()));
        }
        if !(w.is_finite() && *w > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "atom weight must be positive and finite, got {w}"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidArgument(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// A finitely-atomic Borel probability measure on the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct PlanarMeasure {
    atoms: Vec<(Vec2, f64)>,
}

impl PlanarMeasure {
    /// Validates weights, merges coincident atoms and renormalizes to unit mass.
    pub fn new(atoms: Vec<(Vec2, f64)>) -> Result<Self> {
        check_probability_weights(&atoms, |p: &Vec2| p.is_finite())?;
        let mut atoms = merge_planar(atoms);
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if total != 1.0 {
            for a in &mut atoms {
                a.1 /= total;
            }
        }
        Ok(PlanarMeasure { atoms })
    }

    /// Builds a measure from arbitrary positive weights by normalizing them first.
    pub fn normalized(atoms: Vec<(Vec2, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidArgument("total weight must be positive".into()));
        }
        PlanarMeasure::new(atoms.into_iter().map(|(p, w)| (p, w / total)).collect())
    }

    pub fn dirac(v: Vec2) -> Self {
        PlanarMeasure { atoms: vec![(v, 1.0)] }
    }

    pub fn atoms(&self) -> &[(Vec2, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Largest atom norm.
    pub fn max_norm(&self) -> f64 {
        self.atoms.iter().map(|a| a.0.norm()).fold(0.0, f64::max)
    }

    pub fn is_dirac(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn marginal(&self, axis: Axis) -> Measure1D {
        let atoms = self.atoms.iter().map(|(p, w)| (p.coord(axis), *w)).collect();
        Measure1D {
            atoms: merge_line(atoms),
        }
    }

    /// Dilation `D_λ`: atoms scaled by `λ`, weights unchanged.
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        Ok(PlanarMeasure {
            atoms: self.atoms.iter().map(|(p, w)| (p.scale(lambda), *w)).collect(),
        })
    }

    /// The measure `B ↦ μ(B + v)`: every atom moves from `x` to `x − v`.
    pub fn shift_by(&self, v: Vec2) -> Self {
        PlanarMeasure {
            atoms: self.atoms.iter().map(|(p, w)| (*p - v, *w)).collect(),
        }
    }

    /// `∫_{‖x‖<L} x dμ(x)` (open ball).
    pub fn truncated_mean(&self, radius: f64) -> Vec2 {
        self.atoms
            .iter()
            .filter(|(p, _)| p.norm() < radius)
            .fold(Vec2::ZERO, |acc, (p, w)| acc + p.scale(*w))
    }

    /// `μ({‖x‖ ≥ ε})`.
    pub fn mass_outside(&self, eps: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(p, _)| p.norm() >= eps)
            .map(|a| a.1)
            .sum()
    }

    pub fn integrate<T: Scalar>(&self, f: impl Fn(Vec2) -> T) -> Result<T> {
        integrate_atoms(&self.atoms, f)
    }

    /// Characteristic function `∫ e^{i⟨u,x⟩} dμ(x)`.
    pub fn char_fn(&self, u: Vec2) -> Complex64 {
        self.atoms
            .iter()
            .map(|(p, w)| Complex64::from_polar(*w, u.dot(*p)))
            .sum()
    }

    pub fn to_finite(&self) -> FiniteMeasure {
        FiniteMeasure {
            atoms: self.atoms.clone(),
        }
    }
}

fn integrate_atoms<T: Scalar>(atoms: &[(Vec2, f64)], f: impl Fn(Vec2) -> T) -> Result<T> {
    let mut acc = T::zero();
    for (p, w) in atoms {
        let v = f(*p);
        if !v.finite() {
            return Err(Error::InvalidArgument(format!(
                "integrand is not finite at atom {p}"
            )));
        }
        acc = acc + v * *w;
    }
    Ok(acc)
}

/// `max_k μ_k({‖x‖ ≥ ε})` over a row of measures.
pub fn infinitesimal_row_defect(row: &[PlanarMeasure], eps: f64) -> Result<f64> {
    if row.is_empty() {
        return Err(Error::InvalidArgument("empty row".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    Ok(row.iter().map(|m| m.mass_outside(eps)).fold(0.0, f64::max))
}

#[derive(Serialize, Deserialize)]
struct RawAtom {
    x: [f64; 2],
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<RawAtom>,
}

impl TryFrom<RawMeasure> for PlanarMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        PlanarMeasure::new(raw.atoms.into_iter().map(|a| (a.x.into(), a.w)).collect())
    }
}

impl From<PlanarMeasure> for RawMeasure {
    fn from(m: PlanarMeasure) -> Self {
        RawMeasure {
            atoms: m
                .atoms
                .into_iter()
                .map(|(p, w)| RawAtom { x: p.into(), w })
                .collect(),
        }
    }
}

/// A finitely-atomic Borel probability measure on the line.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure1D {
    atoms: Vec<(f64, f64)>,
}

impl Measure1D {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        check_probability_weights(&atoms, |p: &f64| p.is_finite())?;
        let mut atoms = merge_line(atoms);
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if total != 1.0 {
            for a in &mut atoms {
                a.1 /= total;
            }
        }
        Ok(Measure1D { atoms })
    }

    pub fn dirac(a: f64) -> Self {
        Measure1D { atoms: vec![(a, 1.0)] }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max)
    }

    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        Ok(Measure1D {
            atoms: self.atoms.iter().map(|(p, w)| (p * lambda, *w)).collect(),
        })
    }

    /// Translate every atom by `+a`.
    pub fn translate(&self, a: f64) -> Self {
        Measure1D {
            atoms: self.atoms.iter().map(|(p, w)| (p + a, *w)).collect(),
        }
    }

    /// Raw moment `∫ x^k dν`.
    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|(p, w)| w * p.powi(k)).sum()
    }

    /// Cauchy transform and its derivative at `z`.
    pub fn cauchy_and_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut g = Complex64::new(0.0, 0.0);
        let mut dg = Complex64::new(0.0, 0.0);
        for (p, w) in &self.atoms {
            let r = (z - p).inv();
            g += r * w;
            dg -= r * r * w;
        }
        (g, dg)
    }
}

/// A finite atomic measure with real (possibly signed) weights.
///
/// Atoms within [`DEDUP_TOL`] are merged; zero weights are kept so that
/// derived measures stay aligned atom-for-atom with their source.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawFinite", into = "RawFinite")]
pub struct FiniteMeasure {
    atoms: Vec<(Vec2, f64)>,
}

impl FiniteMeasure {
    pub fn new(atoms: Vec<(Vec2, f64)>) -> Result<Self> {
        for (p, w) in &atoms {
            if !p.is_finite() || !w.is_finite() {
                return Err(Error::InvalidArgument("non-finite atom".into()));
            }
        }
        Ok(FiniteMeasure {
            atoms: merge_planar(atoms),
        })
    }

    pub fn zero() -> Self {
        FiniteMeasure { atoms: Vec::new() }
    }

    pub fn atoms(&self) -> &[(Vec2, f64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn is_positive(&self) -> bool {
        self.atoms.iter().all(|a| a.1 >= 0.0)
    }

    /// Weight of the atom at `p` (zero when absent).
    pub fn mass_at(&self, p: Vec2) -> f64 {
        self.atoms
            .iter()
            .filter(|(q, _)| (*q - p).norm() <= DEDUP_TOL)
            .map(|a| a.1)
            .sum()
    }

    /// Mass of `{x : lo ≤ ‖x‖ < hi}`.
    pub fn mass_in_annulus(&self, lo: f64, hi: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(p, _)| {
                let r = p.norm();
                r >= lo && r < hi
            })
            .map(|a| a.1)
            .sum()
    }

    pub fn scaled(&self, k: f64) -> FiniteMeasure {
        FiniteMeasure {
            atoms: self.atoms.iter().map(|(p, w)| (*p, w * k)).collect(),
        }
    }

    /// Reweights every atom by `f(x)`.
    pub fn reweighted(&self, f: impl Fn(Vec2) -> f64) -> FiniteMeasure {
        FiniteMeasure {
            atoms: self.atoms.iter().map(|(p, w)| (*p, w * f(*p))).collect(),
        }
    }

    /// Keeps atoms satisfying `pred`.
    pub fn restricted(&self, pred: impl Fn(Vec2) -> bool) -> FiniteMeasure {
        FiniteMeasure {
            atoms: self.atoms.iter().filter(|(p, _)| pred(*p)).copied().collect(),
        }
    }

    /// Sum of two measures.
    pub fn plus(&self, other: &FiniteMeasure) -> FiniteMeasure {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        FiniteMeasure {
            atoms: merge_planar(atoms),
        }
    }

    pub fn integrate<T: Scalar>(&self, f: impl Fn(Vec2) -> T) -> Result<T> {
        integrate_atoms(&self.atoms, f)
    }

    pub fn max_norm(&self) -> f64 {
        self.atoms.iter().map(|a| a.0.norm()).fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct RawFiniteAtom {
    x: [f64; 2],
    m: f64,
}

#[derive(Serialize, Deserialize)]
struct RawFinite {
    atoms: Vec<RawFiniteAtom>,
}

impl TryFrom<RawFinite> for FiniteMeasure {
    type Error = Error;
    fn try_from(raw: RawFinite) -> Result<Self> {
        FiniteMeasure::new(raw.atoms.into_iter().map(|a| (a.x.into(), a.m)).collect())
    }
}

impl From<FiniteMeasure> for RawFinite {
    fn from(m: FiniteMeasure) -> Self {
        RawFinite {
            atoms: m
                .atoms
                .into_iter()
                .map(|(p, w)| RawFiniteAtom { x: p.into(), m: w })
                .collect(),
        }
    }
}
