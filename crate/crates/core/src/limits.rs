//! Triangular arrays: centering, limit conditions, limit triplets and
//! convergence runs in the classical and bi-free worlds.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrapolate::{neville_at_zero, neville_at_zero_complex};
use crate::idlaw::{CharTriplet, LevyMeasure};
use crate::measure::{infinitesimal_row_defect, Axis, FiniteMeasure, Matrix2, PlanarMeasure, Vec2};
use crate::probes;
use crate::transforms::{self, fmt_float, ComplexPoint2, TruncatedCone};

/// Default centering radius.
pub const DEFAULT_L: f64 = 1.0;
/// Radius used by the infinitesimality gate.
pub const INFINITESIMAL_EPS: f64 = 0.1;
/// Ball radii for the small-ball quadratic form.
pub const EPS_LADDER: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
/// Consecutive-distance ratio a converging sequence must beat.
pub const RATIO: f64 = 0.5;
/// Absolute change treated as exact convergence.
pub const EXACT_TOL: f64 = 1e-10;
/// Largest mass fraction allowed beyond the tightness radius.
pub const TAIL_TOL: f64 = 1e-3;
/// Tolerance on `⟨Au,u⟩ = Q(u)` and on the direct mixed term.
pub const QUADRATIC_TOL: f64 = 1e-6;

const QUAD_DIRECTIONS: [Vec2; 3] = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0)];
const LADDER_JITTER: [f64; 6] = [1.0, 1.0137, 0.9871, 1.0311, 0.9723, 1.0529];

fn one() -> usize {
    1
}

fn default_l() -> f64 {
    DEFAULT_L
}

/// A measure repeated `count` times within a row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowEntry {
    pub measure: PlanarMeasure,
    #[serde(default = "one")]
    pub count: usize,
}

/// One row `μ_{n1}, …, μ_{nk_n}` together with its shift `v_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayRow {
    pub measures: Vec<RowEntry>,
    #[serde(default)]
    pub shift: Vec2,
}

impl ArrayRow {
    pub fn new(measures: Vec<(PlanarMeasure, usize)>, shift: Vec2) -> Self {
        ArrayRow {
            measures: measures.into_iter().map(|(measure, count)| RowEntry { measure, count }).collect(),
            shift,
        }
    }

    /// Row length `k_n`.
    pub fn len(&self) -> usize {
        self.measures.iter().map(|e| e.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn distinct(&self) -> Vec<PlanarMeasure> {
        self.measures.iter().filter(|e| e.count > 0).map(|e| e.measure.clone()).collect()
    }
}

/// Rows with strictly increasing lengths and a centering radius `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArray", into = "RawArray")]
pub struct TriangularArray {
    rows: Vec<ArrayRow>,
    l: f64,
}

#[derive(Serialize, Deserialize)]
struct RawArray {
    #[serde(rename = "L", default = "default_l")]
    l: f64,
    rows: Vec<ArrayRow>,
}

impl TryFrom<RawArray> for TriangularArray {
    type Error = Error;
    fn try_from(r: RawArray) -> Result<Self> {
        TriangularArray::new(r.rows, r.l)
    }
}

impl From<TriangularArray> for RawArray {
    fn from(a: TriangularArray) -> Self {
        RawArray { l: a.l, rows: a.rows }
    }
}

impl TriangularArray {
    pub fn new(rows: Vec<ArrayRow>, l: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidArgument(format!("centering radius must be positive, got {l}")));
        }
        if rows.is_empty() {
            return Err(Error::InvalidArgument("array has no rows".into()));
        }
        if rows.iter().any(|r| r.is_empty()) {
            return Err(Error::InvalidArgument("array row is empty".into()));
        }
        if rows.windows(2).any(|w| w[0].len() >= w[1].len()) {
            return Err(Error::InvalidArgument("row lengths must be strictly increasing".into()));
        }
        Ok(TriangularArray { rows, l })
    }

    pub fn rows(&self) -> &[ArrayRow] {
        &self.rows
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Row lengths `k_n`.
    pub fn ks(&self) -> Vec<usize> {
        self.rows.iter().map(ArrayRow::len).collect()
    }

    fn hs(&self) -> Vec<f64> {
        self.ks().iter().map(|&k| 1.0 / k as f64).collect()
    }

    /// Per-row `max_k μ_{nk}({‖x‖ ≥ ε})`.
    pub fn infinitesimal_defects(&self, eps: f64) -> Result<Vec<f64>> {
        self.rows.iter().map(|r| infinitesimal_row_defect(&r.distinct(), eps)).collect()
    }

    /// Rejects arrays whose infinitesimality defect does not shrink.
    pub fn require_infinitesimal(&self) -> Result<Vec<f64>> {
        let d = self.infinitesimal_defects(INFINITESIMAL_EPS)?;
        let first = d[0];
        let last = *d.last().unwrap();
        let non_increasing = d.windows(2).all(|w| w[1] <= w[0] + 1e-15);
        if last <= 1e-12 || (non_increasing && last <= 0.5 * first) {
            Ok(d)
        } else {
            Err(Error::Precondition(format!(
                "array is not infinitesimal: max_k μ_nk(‖x‖ ≥ {INFINITESIMAL_EPS}) per row = {d:?}"
            )))
        }
    }
}

/// Row `n` = `k_n` copies of `D_{b(k_n)} μ`, zero shifts.
pub fn iid_array(mu: &PlanarMeasure, b: impl Fn(usize) -> f64, kns: &[usize]) -> Result<TriangularArray> {
    let rows = kns
        .iter()
        .map(|&k| Ok(ArrayRow::new(vec![(mu.dilate(b(k))?, k)], Vec2::ZERO)))
        .collect::<Result<Vec<_>>>()?;
    TriangularArray::new(rows, DEFAULT_L)
}

/// A centered measure `μ̊ = μ(· + v)` with its center `v = ∫_{‖x‖<L} x dμ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredEntry {
    pub measure: PlanarMeasure,
    pub center: Vec2,
    pub count: usize,
}

pub fn center_row(row: &ArrayRow, l: f64) -> Result<Vec<CenteredEntry>> {
    if !(l > 0.0) {
        return Err(Error::InvalidArgument(format!("centering radius must be positive, got {l}")));
    }
    Ok(row
        .measures
        .iter()
        .map(|e| {
            let center = e.measure.truncated_mean(l);
            CenteredEntry {
                measure: e.measure.shift_by(center),
                center,
                count: e.count,
            }
        })
        .collect())
}

/// `τ_n = Σ_k μ̊_{nk}` and `σ_{jn} = x_j²/(1+x_j²) · τ_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accumulators {
    pub tau: FiniteMeasure,
    pub sigma1: FiniteMeasure,
    pub sigma2: FiniteMeasure,
}

pub fn row_accumulators(centered: &[CenteredEntry]) -> Result<Accumulators> {
    let atoms: Vec<(Vec2, f64)> = centered
        .iter()
        .flat_map(|e| e.measure.atoms().iter().map(move |(p, w)| (*p, w * e.count as f64)))
        .collect();
    let tau = FiniteMeasure::new(atoms)?;
    Ok(Accumulators {
        sigma1: tau.reweighted(|x| x.s * x.s / (1.0 + x.s * x.s)),
        sigma2: tau.reweighted(|x| x.t * x.t / (1.0 + x.t * x.t)),
        tau,
    })
}

struct RowData {
    k: usize,
    centered: Vec<CenteredEntry>,
    acc: Accumulators,
}

fn prepare(array: &TriangularArray) -> Result<Vec<RowData>> {
    array
        .rows
        .par_iter()
        .map(|r| {
            let centered = center_row(r, array.l)?;
            let acc = row_accumulators(&centered)?;
            Ok(RowData { k: r.len(), centered, acc })
        })
        .collect()
}

fn functionals(m: &FiniteMeasure) -> Vec<f64> {
    let mut out = vec![m.total_mass()];
    for om in probes::frequencies(1.0) {
        let (mut c, mut s) = (0.0, 0.0);
        for (p, w) in m.atoms() {
            let a = om.dot(*p);
            c += w * a.cos();
            s += w * a.sin();
        }
        out.push(c);
        out.push(s);
    }
    out
}

/// Sup over smooth bounded test functions of `|∫f dμ − ∫f dν|`.
pub fn weak_distance(mu: &FiniteMeasure, nu: &FiniteMeasure) -> f64 {
    functionals(mu)
        .iter()
        .zip(functionals(nu))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Last consecutive difference is negligible, or smaller than [`RATIO`] times the one before.
pub fn ratio_test(diffs: &[f64], scale: f64) -> bool {
    match diffs {
        [] => false,
        [.., last] if *last <= EXACT_TOL * (1.0 + scale) => true,
        [.., prev, last] => *last < RATIO * prev,
        _ => false,
    }
}

fn radius_of_mass(m: &FiniteMeasure, fraction: f64) -> f64 {
    let mut atoms: Vec<(f64, f64)> = m.atoms().iter().map(|(p, w)| (p.norm(), w.abs())).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let mut acc = 0.0;
    for (r, w) in atoms {
        acc += w;
        if acc >= fraction * total {
            return r;
        }
    }
    0.0
}

/// Mass fraction of `last` outside `2·max(1, R₉₉(first))`.
fn tail_fraction(first: &FiniteMeasure, last: &FiniteMeasure) -> f64 {
    let total: f64 = last.atoms().iter().map(|a| a.1.abs()).sum();
    if total <= EXACT_TOL {
        return 0.0;
    }
    let r = 2.0 * radius_of_mass(first, 0.99).max(1.0);
    let out: f64 = last.atoms().iter().filter(|(p, _)| p.norm() > r).map(|a| a.1.abs()).sum();
    out / total
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn diffs(seq: &[f64]) -> Vec<f64> {
    seq.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}

fn require_rows(array: &TriangularArray) -> Result<()> {
    if array.rows.len() < 3 {
        return Err(Error::InvalidArgument("condition checks need at least three rows".into()));
    }
    Ok(())
}

/// Weak convergence of `σ_{jn}` and convergence of `γ_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsOneTwo {
    pub sigma1: FiniteMeasure,
    pub sigma2: FiniteMeasure,
    pub gamma: f64,
    pub gamma_per_row: Vec<f64>,
    pub sigma_distances: Vec<f64>,
    pub tail_fraction: f64,
    pub converged: bool,
}

pub fn check_condition_i_ii(array: &TriangularArray) -> Result<ConditionsOneTwo> {
    require_rows(array)?;
    array.require_infinitesimal()?;
    let rows = prepare(array)?;
    let gamma_per_row = rows
        .iter()
        .map(|r| r.acc.tau.integrate(|x| x.s * x.t / ((1.0 + x.s * x.s) * (1.0 + x.t * x.t))))
        .collect::<Result<Vec<f64>>>()?;
    let sigma_distances: Vec<f64> = rows
        .windows(2)
        .map(|w| {
            weak_distance(&w[0].acc.sigma1, &w[1].acc.sigma1).max(weak_distance(&w[0].acc.sigma2, &w[1].acc.sigma2))
        })
        .collect();
    let (first, last) = (&rows[0].acc, &rows[rows.len() - 1].acc);
    let tail = tail_fraction(&first.sigma1, &last.sigma1).max(tail_fraction(&first.sigma2, &last.sigma2));
    let scale = last.sigma1.total_mass() + last.sigma2.total_mass();
    let converged = ratio_test(&sigma_distances, scale)
        && ratio_test(&diffs(&gamma_per_row), max_abs(&gamma_per_row))
        && tail <= TAIL_TOL;
    Ok(ConditionsOneTwo {
        sigma1: last.sigma1.clone(),
        sigma2: last.sigma2.clone(),
        gamma: neville_at_zero(&array.hs(), &gamma_per_row),
        gamma_per_row,
        sigma_distances,
        tail_fraction: tail,
        converged,
    })
}

/// Small-ball quadratic form at one radius of the ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub epsilon: f64,
    pub resolved_ks: Vec<usize>,
    /// `Q_ε(u)` for `u = (1,0), (0,1), (1,1)`, extrapolated over resolved rows.
    pub q: [f64; 3],
}

/// Convergence away from the origin of `τ_n` and the quadratic form `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsThreeFour {
    pub epsilon: f64,
    pub ladder: Vec<LadderRung>,
    /// `Q(u)` for `u = (1,0), (0,1), (1,1)`.
    pub q: [f64; 3],
    #[serde(rename = "A")]
    pub a: Matrix2,
    /// Mixed term read directly from `Σ ∫_{‖x‖<ε} st dμ̊_{nk}`.
    pub c_direct: f64,
    pub tau_limit: LevyMeasure,
    pub outer_distances: Vec<f64>,
    pub tail_fraction: f64,
    pub converged: bool,
}

fn ladder_factor(rows: &[RowData]) -> f64 {
    let radii: Vec<f64> = rows
        .iter()
        .flat_map(|r| r.acc.tau.atoms().iter().map(|(p, _)| p.norm()))
        .collect();
    *LADDER_JITTER
        .iter()
        .find(|&&f| {
            EPS_LADDER
                .iter()
                .all(|&e| radii.iter().all(|&r| (r - e * f).abs() > 1e-6 * e))
        })
        .unwrap_or(&LADDER_JITTER[0])
}

fn row_defect(r: &RowData, eps: f64) -> f64 {
    r.centered.iter().map(|e| e.measure.mass_outside(eps)).fold(0.0, f64::max)
}

fn inner_moments(tau: &FiniteMeasure, eps: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (p, w) in tau.atoms().iter().filter(|(p, _)| p.norm() < eps) {
        for (k, u) in QUAD_DIRECTIONS.iter().enumerate() {
            out[k] += w * u.dot(*p).powi(2);
        }
        out[3] += w * p.s * p.t;
    }
    out
}

/// Follows each outer atom of the last row back through earlier rows and extrapolates.
fn match_outer(outer: &[FiniteMeasure], hs: &[f64]) -> Result<LevyMeasure> {
    let last = outer.last().unwrap();
    let mut atoms = Vec::new();
    for &(x, w) in last.atoms() {
        let tol = 0.25 * x.norm().min(1.0);
        let mut track = vec![(x, w)];
        for m in outer[..outer.len() - 1].iter().rev() {
            let near = m
                .atoms()
                .iter()
                .min_by(|a, b| (a.0 - x).norm().total_cmp(&(b.0 - x).norm()));
            match near {
                Some(&(y, v)) if (y - x).norm() <= tol => track.push((y, v)),
                _ => break,
            }
        }
        track.reverse();
        let h = &hs[hs.len() - track.len()..];
        let ext = |f: &dyn Fn(&(Vec2, f64)) -> f64| neville_at_zero(h, &track.iter().map(f).collect::<Vec<_>>());
        let pos = Vec2::new(ext(&|a| a.0.s), ext(&|a| a.0.t));
        let mass = ext(&|a| a.1);
        let (pos, mass) = if mass > 0.0 && pos.norm() > 0.0 { (pos, mass) } else { (x, w) };
        if mass > EXACT_TOL {
            atoms.push((pos, mass));
        }
    }
    LevyMeasure::atomic(atoms)
}

pub fn check_condition_iii_iv(array: &TriangularArray) -> Result<ConditionsThreeFour> {
    require_rows(array)?;
    array.require_infinitesimal()?;
    let rows = prepare(array)?;
    let factor = ladder_factor(&rows);
    let need = rows.len().min(3);

    let mut ladder = Vec::new();
    let mut chosen: Option<(usize, Vec<usize>)> = None;
    for (i, &e0) in EPS_LADDER.iter().enumerate() {
        let eps = e0 * factor;
        let resolved: Vec<usize> = (0..rows.len()).filter(|&j| row_defect(&rows[j], eps) <= 0.5).collect();
        let mut q = [0.0; 3];
        if !resolved.is_empty() {
            let hs: Vec<f64> = resolved.iter().map(|&j| 1.0 / rows[j].k as f64).collect();
            for (k, qk) in q.iter_mut().enumerate() {
                let seq: Vec<f64> = resolved.iter().map(|&j| inner_moments(&rows[j].acc.tau, eps)[k]).collect();
                *qk = neville_at_zero(&hs, &seq);
            }
        }
        if resolved.len() >= need {
            chosen = Some((i, resolved.clone()));
        }
        ladder.push(LadderRung {
            epsilon: eps,
            resolved_ks: resolved.iter().map(|&j| rows[j].k).collect(),
            q,
        });
    }
    let found = chosen.is_some();
    let (idx, resolved) = chosen.unwrap_or_else(|| {
        let best = (0..EPS_LADDER.len())
            .max_by_key(|&i| (ladder[i].resolved_ks.len(), i))
            .unwrap();
        let all: Vec<usize> = (0..rows.len()).collect();
        let res: Vec<usize> = all
            .into_iter()
            .filter(|&j| ladder[best].resolved_ks.contains(&rows[j].k))
            .collect();
        (best, if res.is_empty() { (0..rows.len()).collect() } else { res })
    });
    let eps = EPS_LADDER[idx] * factor;
    let hs: Vec<f64> = resolved.iter().map(|&j| 1.0 / rows[j].k as f64).collect();

    let moments: Vec<[f64; 4]> = resolved.iter().map(|&j| inner_moments(&rows[j].acc.tau, eps)).collect();
    let mut q = [0.0; 3];
    let mut q_ok = true;
    for (k, qk) in q.iter_mut().enumerate() {
        let seq: Vec<f64> = moments.iter().map(|m| m[k]).collect();
        *qk = neville_at_zero(&hs, &seq);
        q_ok &= ratio_test(&diffs(&seq), max_abs(&seq));
    }
    let st: Vec<f64> = moments.iter().map(|m| m[3]).collect();
    let c_direct = neville_at_zero(&hs, &st);
    let a = Matrix2::new(q[0], 0.5 * (q[2] - q[0] - q[1]), q[1]);

    let outer: Vec<FiniteMeasure> = resolved
        .iter()
        .map(|&j| rows[j].acc.tau.restricted(|x| x.norm() >= eps))
        .collect();
    let outer_distances: Vec<f64> = outer.windows(2).map(|w| weak_distance(&w[0], &w[1])).collect();
    let tail = tail_fraction(&outer[0], outer.last().unwrap());
    let tau_limit = match_outer(&outer, &hs)?;
    let converged = found
        && q_ok
        && a.is_psd(1e-9)
        && ratio_test(&outer_distances, outer.last().unwrap().total_mass())
        && tail <= TAIL_TOL;
    Ok(ConditionsThreeFour {
        epsilon: eps,
        ladder,
        q,
        a,
        c_direct,
        tau_limit,
        outer_distances,
        tail_fraction: tail,
        converged,
    })
}

/// Per-row `v_n + Σ_k [v_{nk} + ∫ x/(1+‖x‖²) dμ̊_{nk}]` and its extrapolated limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitVector {
    pub ks: Vec<usize>,
    pub per_row: Vec<Vec2>,
    pub limit: Vec2,
}

pub fn limit_vector(array: &TriangularArray) -> Result<LimitVector> {
    let per_row = array
        .rows
        .iter()
        .map(|row| {
            let mut acc = row.shift;
            for e in center_row(row, array.l)? {
                let m = e
                    .measure
                    .atoms()
                    .iter()
                    .fold(Vec2::ZERO, |a, (x, w)| a + x.scale(w / (1.0 + x.norm_sq())));
                acc = acc + (e.center + m).scale(e.count as f64);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<Vec2>>>()?;
    let hs = array.hs();
    let s: Vec<f64> = per_row.iter().map(|v| v.s).collect();
    let t: Vec<f64> = per_row.iter().map(|v| v.t).collect();
    Ok(LimitVector {
        ks: array.ks(),
        limit: Vec2::new(neville_at_zero(&hs, &s), neville_at_zero(&hs, &t)),
        per_row,
    })
}

/// Both condition systems together with the limit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub infinitesimal_defects: Vec<f64>,
    pub conditions_i_ii: ConditionsOneTwo,
    pub conditions_iii_iv: ConditionsThreeFour,
    pub v: LimitVector,
    /// Both systems pass or both fail.
    pub equivalent: bool,
    /// `⟨Au,u⟩ = Q(u)` on the test directions and the mixed term matches its direct estimate.
    pub quadratic_consistent: bool,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.conditions_i_ii.converged && self.conditions_iii_iv.converged
    }
}

pub fn condition_report(array: &TriangularArray) -> Result<ConditionReport> {
    let infinitesimal_defects = array.require_infinitesimal()?;
    let c12 = check_condition_i_ii(array)?;
    let c34 = check_condition_iii_iv(array)?;
    let a = c34.a;
    let quadratic_consistent = QUAD_DIRECTIONS
        .iter()
        .zip(c34.q)
        .all(|(u, q)| (a.quad(*u) - q).abs() <= QUADRATIC_TOL)
        && (a.c - c34.c_direct).abs() <= QUADRATIC_TOL;
    Ok(ConditionReport {
        infinitesimal_defects,
        equivalent: c12.converged == c34.converged,
        quadratic_consistent,
        conditions_i_ii: c12,
        conditions_iii_iv: c34,
        v: limit_vector(array)?,
    })
}

fn triplet_from_report(r: &ConditionReport) -> Result<CharTriplet> {
    if !r.passed() {
        return Err(Error::Precondition(format!(
            "limit conditions not satisfied (I/II: {}, III/IV: {})",
            r.conditions_i_ii.converged, r.conditions_iii_iv.converged
        )));
    }
    CharTriplet::new(r.v.limit, r.conditions_iii_iv.a, r.conditions_iii_iv.tau_limit.clone())
}

/// The common classical and bi-free limit triplet.
pub fn limit_triplet(array: &TriangularArray) -> Result<CharTriplet> {
    triplet_from_report(&condition_report(array)?)
}

/// Sup-residual per row against a limit law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTable {
    pub ks: Vec<usize>,
    pub residuals: Vec<f64>,
    pub decreasing: bool,
}

impl ResidualTable {
    fn new(ks: Vec<usize>, residuals: Vec<f64>) -> Self {
        let decreasing = residuals.windows(2).all(|w| w[1] < w[0] || w[1] <= EXACT_TOL);
        ResidualTable { ks, residuals, decreasing }
    }

    /// Ratios of consecutive residuals.
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "k,residual")?;
        for (k, r) in self.ks.iter().zip(&self.residuals) {
            writeln!(out, "{k},{}", fmt_float(*r))?;
        }
        Ok(())
    }
}

/// `φ` of the row convolution: `Σ_k φ_{μ_nk}(z,w) + v_{n,1}/z + v_{n,2}/w`.
pub fn row_phi(row: &ArrayRow, p: ComplexPoint2) -> Result<Complex64> {
    let mut acc = row.shift.s / p.z + row.shift.t / p.w;
    for e in &row.measures {
        let cone = TruncatedCone::for_planar(&e.measure);
        acc += transforms::bi_free_phi(&e.measure, p, &cone)? * e.count as f64;
    }
    Ok(acc)
}

pub fn run_bi_free_limit(array: &TriangularArray, target: &CharTriplet, probes: &[ComplexPoint2]) -> Result<ResidualTable> {
    array.require_infinitesimal()?;
    let want = probes.iter().map(|p| target.bi_free_phi(*p)).collect::<Result<Vec<_>>>()?;
    let residuals = array
        .rows
        .par_iter()
        .map(|row| {
            probes
                .iter()
                .zip(&want)
                .map(|(p, t)| Ok((row_phi(row, *p)? - t).norm()))
                .try_fold(0.0f64, |m, r: Result<f64>| Ok(m.max(r?)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ResidualTable::new(array.ks(), residuals))
}

/// Characteristic function of the row convolution.
pub fn row_cf(row: &ArrayRow, u: Vec2) -> Complex64 {
    row.measures.iter().fold(Complex64::from_polar(1.0, u.dot(row.shift)), |acc, e| {
        acc * e.measure.char_fn(u).powi(e.count as i32)
    })
}

pub fn run_classical_limit(array: &TriangularArray, target: &CharTriplet, freqs: &[Vec2]) -> Result<ResidualTable> {
    array.require_infinitesimal()?;
    if array.rows.iter().any(|r| r.measures.iter().any(|e| e.count > i32::MAX as usize)) {
        return Err(Error::InvalidArgument("row multiplicity too large".into()));
    }
    let want = freqs.iter().map(|u| target.classical_cf(*u)).collect::<Result<Vec<_>>>()?;
    let residuals = array
        .rows
        .par_iter()
        .map(|row| {
            freqs
                .iter()
                .zip(&want)
                .map(|(u, t)| (row_cf(row, *u) - t).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(ResidualTable::new(array.ks(), residuals))
}

/// Conditions, limit triplet and convergence runs in both worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub conditions: ConditionReport,
    pub triplet: Option<CharTriplet>,
    pub bifree: Option<ResidualTable>,
    pub classical: Option<ResidualTable>,
    /// Both worlds converge to the same triplet, or neither has a limit triplet.
    pub agree: bool,
}

pub fn run_transfer(array: &TriangularArray, probes: &[ComplexPoint2], freqs: &[Vec2]) -> Result<TransferReport> {
    let conditions = condition_report(array)?;
    if !conditions.passed() {
        return Ok(TransferReport {
            conditions,
            triplet: None,
            bifree: None,
            classical: None,
            agree: true,
        });
    }
    let t = triplet_from_report(&conditions)?;
    let bifree = run_bi_free_limit(array, &t, probes)?;
    let classical = run_classical_limit(array, &t, freqs)?;
    Ok(TransferReport {
        conditions,
        agree: bifree.decreasing == classical.decreasing,
        triplet: Some(t),
        bifree: Some(bifree),
        classical: Some(classical),
    })
}

/// Free Lévy–Hinčin `φ_j(z) = γ_j + ∫ (1+xz)/(z−x) dσ_j` from the row accumulators, extrapolated in `1/k_n`.
pub fn marginal_phi_from_array(array: &TriangularArray, axis: Axis, z: Complex64) -> Result<Complex64> {
    transforms::require_nonreal(z)?;
    let per_row = array
        .rows
        .iter()
        .map(|row| {
            let mut acc = Complex64::new(row.shift.coord(axis), 0.0);
            for e in center_row(row, array.l)? {
                let k = e.count as f64;
                acc += k * e.center.coord(axis);
                for (p, w) in e.measure.atoms() {
                    let x = p.coord(axis);
                    let sig = x * x / (1.0 + x * x);
                    acc += k * w * (x / (1.0 + x * x) + sig * (1.0 + x * z) / (z - x));
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(neville_at_zero_complex(&array.hs(), &per_row))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_row(n: usize, jump: Vec2) -> ArrayRow {
        let m = PlanarMeasure::new(vec![(Vec2::ZERO, 1.0 - 1.0 / n as f64), (jump, 1.0 / n as f64)]).unwrap();
        ArrayRow::new(vec![(m, n)], Vec2::ZERO)
    }

    fn poisson(ns: &[usize]) -> TriangularArray {
        TriangularArray::new(ns.iter().map(|&n| poisson_row(n, Vec2::new(1.0, 1.0))).collect(), 1.0).unwrap()
    }

    fn clt(ns: &[usize]) -> TriangularArray {
        let b = PlanarMeasure::new(vec![(Vec2::new(1.0, 1.0), 0.5), (Vec2::new(-1.0, -1.0), 0.5)]).unwrap();
        iid_array(&b, |k| 1.0 / (k as f64).sqrt(), ns).unwrap()
    }

    fn dirac(ns: &[usize]) -> TriangularArray {
        let rows = ns
            .iter()
            .map(|&n| ArrayRow::new(vec![(PlanarMeasure::dirac(Vec2::new(1.0 / n as f64, 0.0)), n)], Vec2::ZERO))
            .collect();
        TriangularArray::new(rows, 1.0).unwrap()
    }

    #[test]
    fn centering_examples() {
        let row = ArrayRow::new(vec![(PlanarMeasure::dirac(Vec2::new(0.1, 0.0)), 1)], Vec2::ZERO);
        let c = center_row(&row, 1.0).unwrap();
        assert_eq!(c[0].center, Vec2::new(0.1, 0.0));
        assert_eq!(c[0].measure.atoms()[0].0, Vec2::ZERO);

        let c = center_row(&poisson_row(100, Vec2::new(2.0, 2.0)), 1.0).unwrap();
        assert_eq!(c[0].center, Vec2::ZERO);
        let c = center_row(&clt(&[4]).rows()[0], 1.0).unwrap();
        assert!(c[0].center.norm() < 1e-16);
        assert!(center_row(&row, 0.0).is_err());
    }

    #[test]
    fn accumulator_examples() {
        let n = 10;
        let acc = row_accumulators(&center_row(&poisson_row(n, Vec2::new(1.0, 1.0)), 1.0).unwrap()).unwrap();
        assert!((acc.tau.mass_at(Vec2::ZERO) - 9.0).abs() < 1e-12);
        assert!((acc.tau.mass_at(Vec2::new(1.0, 1.0)) - 1.0).abs() < 1e-12);
        assert!((acc.sigma1.mass_at(Vec2::new(1.0, 1.0)) - 0.5).abs() < 1e-12);
        assert_eq!(acc.sigma1.mass_at(Vec2::ZERO), 0.0);

        let acc = row_accumulators(&center_row(&clt(&[10_000]).rows()[0], 1.0).unwrap()).unwrap();
        assert!((acc.sigma1.total_mass() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn array_validation_and_gate() {
        assert!(TriangularArray::new(vec![poisson_row(8, Vec2::ZERO), poisson_row(8, Vec2::ZERO)], 1.0).is_err());
        assert!(TriangularArray::new(vec![poisson_row(8, Vec2::ZERO)], -1.0).is_err());
        let half = PlanarMeasure::new(vec![(Vec2::ZERO, 0.5), (Vec2::new(1.0, 1.0), 0.5)]).unwrap();
        let bad = iid_array(&half, |_| 1.0, &[8, 32, 128]).unwrap();
        assert!(matches!(check_condition_i_ii(&bad), Err(Error::Precondition(_))));
        assert!(matches!(bad.require_infinitesimal(), Err(Error::Precondition(_))));
        assert!(check_condition_i_ii(&poisson(&[8, 32])).is_err());
    }

    #[test]
    fn poisson_conditions() {
        let a = poisson(&[8, 32, 128, 512]);
        let c12 = check_condition_i_ii(&a).unwrap();
        assert!(c12.converged);
        assert!((c12.gamma - 0.25).abs() < 1e-12);
        assert!((c12.sigma1.mass_at(Vec2::new(1.0, 1.0)) - 0.5).abs() < 1e-12);
        let c34 = check_condition_iii_iv(&a).unwrap();
        assert!(c34.converged);
        assert_eq!(c34.a, Matrix2::ZERO);
        let tau = c34.tau_limit.atoms();
        assert_eq!(tau.atoms().len(), 1);
        assert!((tau.mass_at(Vec2::new(1.0, 1.0)) - 1.0).abs() < 1e-12);
        let v = limit_vector(&a).unwrap().limit;
        assert!((v - Vec2::new(1.0 / 3.0, 1.0 / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn clt_conditions() {
        let a = clt(&[64, 256, 1024, 4096]);
        let c12 = check_condition_i_ii(&a).unwrap();
        assert!(c12.converged);
        assert!((c12.gamma - 1.0).abs() < 1e-6);
        let c34 = check_condition_iii_iv(&a).unwrap();
        assert!(c34.converged);
        for (q, want) in c34.q.iter().zip([1.0, 1.0, 4.0]) {
            assert!((q - want).abs() < 1e-9);
        }
        assert!((c34.a.c - 1.0).abs() < 1e-9);
        assert!(c34.tau_limit.is_zero());
        assert!(limit_vector(&a).unwrap().limit.norm() < 1e-12);
    }

    #[test]
    fn dirac_limit() {
        let a = dirac(&[16, 64, 256]);
        let t = limit_triplet(&a).unwrap();
        assert!((t.v - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(t.a, Matrix2::ZERO);
        assert!(t.tau.is_zero());
        let r = run_bi_free_limit(&a, &t, &probes::tensor(1.0)).unwrap();
        assert!(r.residuals.iter().all(|x| *x < 1e-12));
    }

    #[test]
    fn poisson_rate_both_worlds() {
        let a = poisson(&[8, 32, 128]);
        let t = limit_triplet(&a).unwrap();
        let r = run_bi_free_limit(&a, &t, &probes::tensor(1.0)).unwrap();
        assert!(r.decreasing);
        for q in r.ratios() {
            assert!((0.2..0.35).contains(&q), "{q}");
        }
        let c = run_classical_limit(&a, &t, &probes::frequencies(1.0)).unwrap();
        assert!(c.decreasing);
    }

    #[test]
    fn escaping_mass_fails_both() {
        let rows = [64usize, 256, 1024, 4096]
            .iter()
            .map(|&n| {
                let far = Vec2::new(0.8, 0.6).scale(n as f64);
                poisson_row(n, far)
            })
            .collect();
        let a = TriangularArray::new(rows, 1.0).unwrap();
        let r = condition_report(&a).unwrap();
        assert!(!r.conditions_i_ii.converged);
        assert!(!r.conditions_iii_iv.converged);
        assert!(limit_triplet(&a).is_err());
    }

    #[test]
    fn marginal_consistency() {
        for a in [poisson(&[8, 32, 128, 512]), clt(&[64, 256, 1024, 4096])] {
            let t = limit_triplet(&a).unwrap();
            for y in [2.0, 4.0, -3.0] {
                let z = Complex64::new(0.5, y);
                let vs = [400.0, 800.0, 1600.0];
                let vals: Vec<Complex64> = vs
                    .iter()
                    .map(|&v| z * t.bi_free_phi(ComplexPoint2::new(z, Complex64::new(0.0, v))).unwrap())
                    .collect();
                let hs: Vec<f64> = vs.iter().map(|v| 1.0 / v).collect();
                let slice = neville_at_zero_complex(&hs, &vals);
                let lk = marginal_phi_from_array(&a, Axis::S, z).unwrap();
                assert!((slice - lk).norm() < 1e-6, "{slice} vs {lk}");
            }
        }
    }

    #[test]
    fn array_json_round_trip() {
        let a = poisson(&[8, 32, 128]);
        let s = serde_json::to_string(&a).unwrap();
        let b: TriangularArray = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        let bad = r#"{"rows":[{"measures":[{"measure":{"atoms":[{"x":[0,0],"w":1}]},"count":3}]},
                             {"measures":[{"measure":{"atoms":[{"x":[0,0],"w":1}]},"count":2}]}]}"#;
        assert!(serde_json::from_str::<TriangularArray>(bad).is_err());
    }
}
