//! Infinitely divisible laws in the classical and the bi-free world.
//!
//! Both worlds are parameterized by the same characteristic triplet
//! `(v, A, τ)`. The Lévy measure is a finite list of atoms plus optional
//! radial parts `Σ_i m_i r^{−1−α} dr ⊗ δ_{ω_i}` (as produced by stable laws).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Axis, FiniteMeasure, Matrix2, PlanarMeasure, Vec2};
use crate::quadrature::{self, QuadOptions};
use crate::transforms::{require_nonreal, ComplexPoint2};

/// Slack allowed on positive semi-definiteness of `A`.
pub const PSD_TOL: f64 = 1e-12;
/// Slack allowed on the σ-form relations before they are declared inconsistent.
pub const SIGMA_TOL: f64 = 1e-9;

const LOG_RANGE: f64 = 40.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_intervals: 4000,
    }
}

/// One ray `m · r^{−1−α} dr` along the unit direction at `angle`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub angle: f64,
    pub m: f64,
}

impl Ray {
    /// Unit direction, with components snapped to zero below 1e−15.
    pub fn direction(&self) -> Vec2 {
        let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
        Vec2::new(snap(self.angle.cos()), snap(self.angle.sin()))
    }
}

fn default_r_min() -> f64 {
    1e-4
}

fn default_r_max() -> f64 {
    1e4
}

/// Radial stable part of a Lévy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialPart {
    pub alpha: f64,
    #[serde(rename = "theta")]
    pub rays: Vec<Ray>,
    /// Inner radius of the discretization grid.
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    /// Outer radius of the discretization grid.
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

impl RadialPart {
    pub fn new(alpha: f64, rays: Vec<Ray>) -> Result<Self> {
        let r = RadialPart {
            alpha,
            rays,
            r_min: default_r_min(),
            r_max: default_r_max(),
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "radial index must lie in (0,2), got {}",
                self.alpha
            )));
        }
        if self.rays.is_empty() {
            return Err(Error::InvalidArgument("radial part needs at least one ray".into()));
        }
        if self.rays.iter().any(|r| !(r.m > 0.0 && r.m.is_finite() && r.angle.is_finite())) {
            return Err(Error::InvalidArgument("ray masses must be positive and finite".into()));
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min) {
            return Err(Error::InvalidArgument("need 0 < r_min < r_max".into()));
        }
        Ok(())
    }

    /// `D_λ` acts on the radial part by scaling every ray mass by `λ^α`.
    pub fn dilate(&self, lambda: f64) -> RadialPart {
        RadialPart {
            rays: self
                .rays
                .iter()
                .map(|r| Ray {
                    angle: r.angle,
                    m: r.m * lambda.powf(self.alpha),
                })
                .collect(),
            ..self.clone()
        }
    }

    fn scaled(&self, k: f64) -> RadialPart {
        RadialPart {
            rays: self.rays.iter().map(|r| Ray { angle: r.angle, m: r.m * k }).collect(),
            ..self.clone()
        }
    }

    /// `∫₀^∞ f(r) r^{−1−α} dr` where `f(r) ≈ small·r²` near 0 and `f → large` at ∞.
    fn integrate_ray(
        &self,
        f: impl Fn(f64) -> Complex64,
        small: Complex64,
        large: Complex64,
    ) -> Result<Complex64> {
        let a = self.alpha;
        let near = quadrature::integrate(
            |u| {
                let r = u.exp();
                (f(r) - small * (r * r)) * (-a * u).exp()
            },
            -LOG_RANGE,
            0.0,
            quad_opts(),
        )?;
        let far = quadrature::integrate(
            |u| (f(u.exp()) - large) * (-a * u).exp(),
            0.0,
            LOG_RANGE,
            quad_opts(),
        )?;
        Ok(near.value + small / (2.0 - a) + far.value + large / a)
    }

    /// `∫ x/(1+‖x‖²) dτ` when finite (α < 1).
    fn first_moment(&self) -> Option<Vec2> {
        if self.alpha >= 1.0 {
            return None;
        }
        let k = PI / (2.0 * (PI * self.alpha / 2.0).cos());
        Some(
            self.rays
                .iter()
                .fold(Vec2::ZERO, |acc, r| acc + r.direction().scale(r.m * k)),
        )
    }

    /// Log-grid discretization: exact cell masses, second-moment-matched radii.
    fn discretize(&self, cells_per_decade: usize) -> (Vec<(Vec2, f64)>, f64) {
        let a = self.alpha;
        let decades = (self.r_max / self.r_min).log10();
        let n = ((decades * cells_per_decade as f64).ceil() as usize).max(1);
        let ratio = (self.r_max / self.r_min).powf(1.0 / n as f64);
        let mut atoms = Vec::with_capacity(n * self.rays.len());
        for ray in &self.rays {
            let dir = ray.direction();
            let mut lo = self.r_min;
            for j in 0..n {
                let hi = if j + 1 == n { self.r_max } else { lo * ratio };
                let mass = ray.m * (lo.powf(-a) - hi.powf(-a)) / a;
                let second = ray.m * (hi.powf(2.0 - a) - lo.powf(2.0 - a)) / (2.0 - a);
                let r = (second / mass).sqrt();
                atoms.push((dir.scale(r), mass));
                lo = hi;
            }
        }
        let total_m: f64 = self.rays.iter().map(|r| r.m).sum();
        let tail = total_m
            * (self.r_min.powf(2.0 - a) / (2.0 - a) + self.r_max.powf(-a) / a);
        (atoms, tail)
    }
}

/// Closed form of `∫₀^∞ (e^{ipr} − 1 − ipr/(1+r²)) r^{−1−α} dr`.
fn radial_cf_exponent(alpha: f64, p: f64) -> Complex64 {
    if p == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let ap = p.abs();
    if (alpha - 1.0).abs() < 1e-12 {
        return Complex64::new(-PI * ap / 2.0, p * (1.0 - EULER_GAMMA - ap.ln()));
    }
    let g = statrs::function::gamma::gamma(-alpha);
    let phase = Complex64::from_polar(1.0, -PI * alpha * p.signum() / 2.0);
    phase * (g * ap.powf(alpha)) - Complex64::new(0.0, p * PI / (2.0 * (PI * alpha / 2.0).cos()))
}

/// Lévy measure: positive atoms off the origin plus radial parts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawLevy", into = "RawLevy")]
pub struct LevyMeasure {
    atoms: FiniteMeasure,
    radial: Vec<RadialPart>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(RadialPart),
    Many(Vec<RadialPart>),
}

#[derive(Serialize, Deserialize)]
struct RawLevyAtom {
    x: [f64; 2],
    m: f64,
}

#[derive(Serialize, Deserialize)]
struct RawLevy {
    #[serde(default)]
    atoms: Vec<RawLevyAtom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radial: Option<OneOrMany>,
}

impl TryFrom<RawLevy> for LevyMeasure {
    type Error = Error;
    fn try_from(raw: RawLevy) -> Result<Self> {
        let radial = match raw.radial {
            None => Vec::new(),
            Some(OneOrMany::One(r)) => vec![r],
            Some(OneOrMany::Many(v)) => v,
        };
        LevyMeasure::new(raw.atoms.into_iter().map(|a| (a.x.into(), a.m)).collect(), radial)
    }
}

impl From<LevyMeasure> for RawLevy {
    fn from(l: LevyMeasure) -> Self {
        let radial = match l.radial.len() {
            0 => None,
            1 => Some(OneOrMany::One(l.radial[0].clone())),
            _ => Some(OneOrMany::Many(l.radial)),
        };
        RawLevy {
            atoms: l
                .atoms
                .atoms()
                .iter()
                .map(|(p, m)| RawLevyAtom { x: (*p).into(), m: *m })
                .collect(),
            radial,
        }
    }
}

impl LevyMeasure {
    pub fn new(atoms: Vec<(Vec2, f64)>, radial: Vec<RadialPart>) -> Result<Self> {
        for (p, m) in &atoms {
            if !(m.is_finite() && *m > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "Lévy measure atom at {p} has non-positive mass {m}"
                )));
            }
            if p.norm() == 0.0 {
                return Err(Error::InvalidArgument("Lévy measure has an atom at the origin".into()));
            }
        }
        for r in &radial {
            r.validate()?;
        }
        Ok(LevyMeasure {
            atoms: FiniteMeasure::new(atoms)?,
            radial,
        })
    }

    pub fn zero() -> Self {
        LevyMeasure::default()
    }

    pub fn atomic(atoms: Vec<(Vec2, f64)>) -> Result<Self> {
        LevyMeasure::new(atoms, Vec::new())
    }

    pub fn radial_only(part: RadialPart) -> Result<Self> {
        LevyMeasure::new(Vec::new(), vec![part])
    }

    pub fn atoms(&self) -> &FiniteMeasure {
        &self.atoms
    }

    pub fn radial(&self) -> &[RadialPart] {
        &self.radial
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.radial.is_empty()
    }

    pub fn is_atomic(&self) -> bool {
        self.radial.is_empty()
    }

    /// `∫ 1 ∧ ‖x‖² dτ`.
    pub fn integrability(&self) -> f64 {
        let atoms: f64 = self.atoms.atoms().iter().map(|(p, m)| m * p.norm_sq().min(1.0)).sum();
        let radial: f64 = self
            .radial
            .iter()
            .map(|r| {
                let total: f64 = r.rays.iter().map(|x| x.m).sum();
                total * (1.0 / (2.0 - r.alpha) + 1.0 / r.alpha)
            })
            .sum();
        atoms + radial
    }

    pub fn plus(&self, other: &LevyMeasure) -> LevyMeasure {
        let mut radial = self.radial.clone();
        for r in &other.radial {
            match radial.iter_mut().find(|x| {
                x.alpha == r.alpha && x.r_min == r.r_min && x.r_max == r.r_max
            }) {
                Some(x) => x.rays.extend_from_slice(&r.rays),
                None => radial.push(r.clone()),
            }
        }
        LevyMeasure {
            atoms: self.atoms.plus(&other.atoms),
            radial,
        }
    }

    pub fn scaled(&self, k: f64) -> LevyMeasure {
        LevyMeasure {
            atoms: self.atoms.scaled(k),
            radial: self.radial.iter().map(|r| r.scaled(k)).collect(),
        }
    }

    /// Image under `x ↦ λx`.
    pub fn dilate(&self, lambda: f64) -> LevyMeasure {
        LevyMeasure {
            atoms: FiniteMeasure::new(
                self.atoms.atoms().iter().map(|(p, m)| (p.scale(lambda), *m)).collect(),
            )
            .expect("dilation of finite atoms"),
            radial: self.radial.iter().map(|r| r.dilate(lambda)).collect(),
        }
    }

    /// Directions carrying mass: atom locations and radial ray directions.
    pub fn support_directions(&self) -> Vec<Vec2> {
        let mut out: Vec<Vec2> = self.atoms.atoms().iter().map(|a| a.0).collect();
        for r in &self.radial {
            out.extend(r.rays.iter().map(Ray::direction));
        }
        out
    }

    /// Atomic approximation of the radial parts with the truncation bound.
    pub fn discretize(&self, cells_per_decade: usize) -> Result<(LevyMeasure, f64)> {
        let mut atoms = self.atoms.atoms().to_vec();
        let mut tail = 0.0;
        for r in &self.radial {
            let (a, t) = r.discretize(cells_per_decade);
            atoms.extend(a);
            tail += t;
        }
        Ok((LevyMeasure::atomic(atoms)?, tail))
    }
}

/// Characteristic triplet `(v, A, τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTriplet", into = "RawTriplet")]
pub struct CharTriplet {
    pub v: Vec2,
    pub a: Matrix2,
    pub tau: LevyMeasure,
}

#[derive(Serialize, Deserialize)]
struct RawTriplet {
    v: Vec2,
    #[serde(rename = "A")]
    a: Matrix2,
    #[serde(default)]
    tau: LevyMeasure,
}

impl TryFrom<RawTriplet> for CharTriplet {
    type Error = Error;
    fn try_from(r: RawTriplet) -> Result<Self> {
        CharTriplet::new(r.v, r.a, r.tau)
    }
}

impl From<CharTriplet> for RawTriplet {
    fn from(t: CharTriplet) -> Self {
        RawTriplet {
            v: t.v,
            a: t.a,
            tau: t.tau,
        }
    }
}

/// Which Lévy–Hinčin representation a triplet is read in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum World {
    Classical,
    BiFree,
}

fn s_term(z: Complex64, s: f64, r2: f64) -> Complex64 {
    // s/(z−s) − s/(z(1+r²)) without cancellation
    if s == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    s * (z * r2 + s) / (z * (z - s) * (1.0 + r2))
}

/// Bi-free Lévy–Hinčin integrand at `x`.
fn bflk_kernel(p: ComplexPoint2, x: Vec2) -> Complex64 {
    let r2 = x.norm_sq();
    s_term(p.z, x.s, r2) + s_term(p.w, x.t, r2) + x.s * x.t / ((p.z - x.s) * (p.w - x.t))
}

/// Marginal integrand `zs/(z−s) − s/(1+‖x‖²)` and its z-derivative `−s²/(z−s)²`.
fn marginal_kernel(z: Complex64, s: f64, r2: f64) -> (Complex64, Complex64) {
    if s == 0.0 {
        return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let d = z - s;
    (s * (z * r2 + s) / (d * (1.0 + r2)), -(s * s) / (d * d))
}

fn exp_i_minus_one(theta: f64) -> Complex64 {
    let h = (0.5 * theta).sin();
    Complex64::new(-2.0 * h * h, theta.sin())
}

impl CharTriplet {
    pub fn new(v: Vec2, a: Matrix2, tau: LevyMeasure) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::InvalidArgument("drift vector must be finite".into()));
        }
        if !a.is_psd(PSD_TOL) {
            return Err(Error::InvalidArgument(format!(
                "matrix [[{}, {}], [{}, {}]] is not positive semi-definite",
                a.a, a.c, a.c, a.b
            )));
        }
        Ok(CharTriplet { v, a, tau })
    }

    /// Bi-free Lévy–Hinčin φ at `p`; defined on all of `(ℂ∖ℝ)²`.
    pub fn bi_free_phi(&self, p: ComplexPoint2) -> Result<Complex64> {
        p.check_nonreal()?;
        let (z, w) = (p.z, p.w);
        let mut acc = self.v.s / z
            + self.v.t / w
            + self.a.a / (z * z)
            + self.a.c / (z * w)
            + self.a.b / (w * w);
        acc += self.tau.atoms.integrate(|x| bflk_kernel(p, x))?;
        for part in &self.tau.radial {
            for ray in &part.rays {
                let d = ray.direction();
                let small = d.s * d.s / (z * z) + d.t * d.t / (w * w) + d.s * d.t / (z * w);
                let val = part.integrate_ray(
                    |r| bflk_kernel(p, d.scale(r)),
                    small,
                    Complex64::new(-1.0, 0.0),
                )?;
                acc += val * ray.m;
            }
        }
        Ok(acc)
    }

    /// Marginal free φ along `axis` and its derivative.
    pub fn marginal_phi(&self, axis: Axis, z: Complex64) -> Result<(Complex64, Complex64)> {
        require_nonreal(z)?;
        let (v, a) = match axis {
            Axis::S => (self.v.s, self.a.a),
            Axis::T => (self.v.t, self.a.b),
        };
        let mut phi = v + a / z;
        let mut dphi = -a / (z * z);
        for (x, m) in self.tau.atoms.atoms() {
            let (k, dk) = marginal_kernel(z, x.coord(axis), x.norm_sq());
            phi += k * *m;
            dphi += dk * *m;
        }
        for part in &self.tau.radial {
            for ray in &part.rays {
                let d = ray.direction();
                let c = d.coord(axis);
                if c == 0.0 {
                    continue;
                }
                let val = part.integrate_ray(
                    |r| marginal_kernel(z, c * r, r * r).0,
                    c * c / z,
                    -z,
                )?;
                let dval = part.integrate_ray(
                    |r| -marginal_kernel(z, c * r, r * r).1,
                    c * c / (z * z),
                    Complex64::new(1.0, 0.0),
                )?;
                phi += val * ray.m;
                dphi -= dval * ray.m;
            }
        }
        Ok((phi, dphi))
    }

    /// Rough spread of the marginal law along `axis`.
    pub fn marginal_scale(&self, axis: Axis) -> f64 {
        let a = match axis {
            Axis::S => self.a.a,
            Axis::T => self.a.b,
        };
        let jumps: f64 = self
            .tau
            .atoms
            .atoms()
            .iter()
            .map(|(x, m)| m * x.coord(axis).abs())
            .sum::<f64>()
            + self.tau.atoms.max_norm();
        let radial: f64 = self
            .tau
            .radial
            .iter()
            .flat_map(|r| r.rays.iter())
            .map(|r| r.m)
            .sum();
        self.v.coord(axis).abs() + 2.0 * a.sqrt() + jumps + 2.0 * radial
    }

    /// Exponent `ψ(u)` of the classical characteristic function `e^{ψ(u)}`.
    pub fn classical_exponent(&self, u: Vec2) -> Result<Complex64> {
        let mut psi = Complex64::new(-0.5 * self.a.quad(u), u.dot(self.v));
        psi += self.tau.atoms.integrate(|x| {
            let ux = u.dot(x);
            exp_i_minus_one(ux) - Complex64::new(0.0, ux / (1.0 + x.norm_sq()))
        })?;
        for part in &self.tau.radial {
            for ray in &part.rays {
                psi += radial_cf_exponent(part.alpha, u.dot(ray.direction())) * ray.m;
            }
        }
        if !(psi.re.is_finite() && psi.im.is_finite()) {
            return Err(Error::Quadrature(format!("characteristic exponent not finite at {u}")));
        }
        Ok(psi)
    }

    /// Classical characteristic function.
    pub fn classical_cf(&self, u: Vec2) -> Result<Complex64> {
        Ok(self.classical_exponent(u)?.exp())
    }

    /// `(v/k, A/k, τ/k)`.
    pub fn scaled(&self, k: f64) -> CharTriplet {
        CharTriplet {
            v: self.v.scale(k),
            a: self.a.scale(k),
            tau: self.tau.scaled(k),
        }
    }

    /// Drift `u = v − ∫ x/(1+‖x‖²) dτ` when `∫ ‖x‖/(1+‖x‖²) dτ < ∞`.
    pub fn drift_form(&self) -> Option<Vec2> {
        let mut u = self.v;
        for (x, m) in self.tau.atoms.atoms() {
            u = u - x.scale(m / (1.0 + x.norm_sq()));
        }
        for part in &self.tau.radial {
            u = u - part.first_moment()?;
        }
        Some(u)
    }

    /// Replaces radial parts by log-grid atoms; returns the truncation bound too.
    pub fn discretize(&self, cells_per_decade: usize) -> Result<(CharTriplet, f64)> {
        let (tau, tail) = self.tau.discretize(cells_per_decade)?;
        Ok((CharTriplet::new(self.v, self.a, tau)?, tail))
    }

    /// σ-form `(γ₁, γ₂, σ₁, σ₂, σ̃)`; requires atomic `τ`.
    pub fn to_sigma_form(&self) -> Result<SigmaForm> {
        if !self.tau.is_atomic() {
            return Err(Error::InvalidArgument(
                "σ-form needs an atomic Lévy measure; discretize radial parts first".into(),
            ));
        }
        let atoms = self.tau.atoms.atoms();
        let mut s1 = vec![(Vec2::ZERO, self.a.a)];
        let mut s2 = vec![(Vec2::ZERO, self.a.b)];
        let mut st = vec![(Vec2::ZERO, self.a.c)];
        let mut g1 = self.v.s;
        let mut g2 = self.v.t;
        for (x, m) in atoms {
            let (s, t) = (x.s, x.t);
            let (ss, tt) = (s * s, t * t);
            s1.push((*x, m * ss / (1.0 + ss)));
            s2.push((*x, m * tt / (1.0 + tt)));
            st.push((*x, m * s * t / ((1.0 + ss).sqrt() * (1.0 + tt).sqrt())));
            let r = 1.0 + ss + tt;
            g1 += m * s * tt / ((1.0 + ss) * r);
            g2 += m * t * ss / ((1.0 + tt) * r);
        }
        let sf = SigmaForm {
            gamma1: g1,
            gamma2: g2,
            sigma1: FiniteMeasure::new(s1)?,
            sigma2: FiniteMeasure::new(s2)?,
            sigma_tilde: FiniteMeasure::new(st)?,
        };
        sf.check_relations()?;
        Ok(sf)
    }
}

/// The σ-form of a bi-free infinitely divisible law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaForm {
    pub gamma1: f64,
    pub gamma2: f64,
    pub sigma1: FiniteMeasure,
    pub sigma2: FiniteMeasure,
    pub sigma_tilde: FiniteMeasure,
}

impl SigmaForm {
    fn points(&self) -> Vec<Vec2> {
        let mut pts: Vec<Vec2> = Vec::new();
        for m in [&self.sigma1, &self.sigma2, &self.sigma_tilde] {
            for (p, _) in m.atoms() {
                if !pts.iter().any(|q| (*q - *p).norm() <= crate::measure::DEDUP_TOL) {
                    pts.push(*p);
                }
            }
        }
        pts
    }

    /// Largest violation of the three σ-form relations and of positivity.
    pub fn relation_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in self.points() {
            let (s, t) = (p.s, p.t);
            let qs = s / (1.0 + s * s).sqrt();
            let qt = t / (1.0 + t * t).sqrt();
            let m1 = self.sigma1.mass_at(p);
            let m2 = self.sigma2.mass_at(p);
            let mt = self.sigma_tilde.mass_at(p);
            worst = worst.max((qt * m1 - qs * mt).abs());
            worst = worst.max((qs * m2 - qt * mt).abs());
            worst = worst.max((-m1).max(0.0)).max((-m2).max(0.0));
        }
        let a = self.sigma1.mass_at(Vec2::ZERO);
        let b = self.sigma2.mass_at(Vec2::ZERO);
        let c = self.sigma_tilde.mass_at(Vec2::ZERO);
        worst.max(c * c - a * b)
    }

    pub fn check_relations(&self) -> Result<()> {
        let d = self.relation_defect();
        if d > SIGMA_TOL {
            return Err(Error::InconsistentSigmaForm(format!("largest defect {d:.3e}")));
        }
        Ok(())
    }

    /// Inverse of [`CharTriplet::to_sigma_form`].
    pub fn to_triplet(&self) -> Result<CharTriplet> {
        self.check_relations()?;
        let a = Matrix2::new(
            self.sigma1.mass_at(Vec2::ZERO),
            self.sigma_tilde.mass_at(Vec2::ZERO),
            self.sigma2.mass_at(Vec2::ZERO),
        );
        let mut atoms = Vec::new();
        for p in self.points() {
            let m = if p.s != 0.0 {
                (1.0 + p.s * p.s) / (p.s * p.s) * self.sigma1.mass_at(p)
            } else if p.t != 0.0 {
                (1.0 + p.t * p.t) / (p.t * p.t) * self.sigma2.mass_at(p)
            } else {
                continue;
            };
            if m > 0.0 {
                atoms.push((p, m));
            }
        }
        let tau = LevyMeasure::atomic(atoms)?;
        let mut v = Vec2::new(self.gamma1, self.gamma2);
        for (x, m) in tau.atoms.atoms() {
            let (ss, tt) = (x.s * x.s, x.t * x.t);
            let r = 1.0 + ss + tt;
            v.s -= m * x.s * tt / ((1.0 + ss) * r);
            v.t -= m * x.t * ss / ((1.0 + tt) * r);
        }
        CharTriplet::new(v, a, tau)
    }
}

/// Λ: the same triplet read in the other world.
pub fn lambda_bijection(_to: World, t: &CharTriplet) -> CharTriplet {
    t.clone()
}

/// Gaussian law `(v, A, 0)`.
pub fn make_gaussian(v: Vec2, a: Matrix2) -> Result<CharTriplet> {
    CharTriplet::new(v, a, LevyMeasure::zero())
}

/// Compound Poisson law with rate `λ` and jump law `jump`.
pub fn make_compound_poisson(rate: f64, jump: &PlanarMeasure) -> Result<CharTriplet> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate must be positive, got {rate}")));
    }
    if jump.atoms().iter().any(|(p, _)| p.norm() == 0.0) {
        return Err(Error::InvalidArgument("jump law has mass at the origin".into()));
    }
    let v = jump
        .atoms()
        .iter()
        .fold(Vec2::ZERO, |acc, (x, w)| acc + x.scale(rate * w / (1.0 + x.norm_sq())));
    let tau = LevyMeasure::atomic(jump.atoms().iter().map(|(x, w)| (*x, rate * w)).collect())?;
    CharTriplet::new(v, Matrix2::ZERO, tau)
}

/// Triplet of the convolution of two infinitely divisible laws.
pub fn convolve_triplets(t1: &CharTriplet, t2: &CharTriplet) -> CharTriplet {
    CharTriplet {
        v: t1.v + t2.v,
        a: t1.a + t2.a,
        tau: t1.tau.plus(&t2.tau),
    }
}
