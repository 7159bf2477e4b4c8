use std::path::{Path, PathBuf};

use bifree::fullness::{self, FullnessVerdict, LineReport};
use bifree::idlaw::SigmaForm;
use bifree::limits::{self, ResidualTable};
use bifree::stable::{self, ConvergenceReport};
use bifree::{
    bi_free_convolve, probes, Axis, CharTriplet, Complex64, ComplexPoint2, ConditionReport, Error,
    PlanarMeasure, StabilityReport, StableSpec, Term, TruncatedCone, Vec2,
};
use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io;

/// Lines within this distance count as the same line across methods.
const LINE_TOL: f64 = 1e-6;

#[derive(Serialize)]
struct PhiRow {
    z: Complex64,
    w: Complex64,
    phi: Complex64,
}

fn phi_table(
    probes: &[ComplexPoint2],
    f: impl Fn(ComplexPoint2) -> bifree::Result<Complex64> + Sync,
) -> Result<Vec<PhiRow>, CliError> {
    Ok(probes
        .par_iter()
        .map(|&p| f(p).map(|phi| PhiRow { z: p.z, w: p.w, phi }))
        .collect::<bifree::Result<Vec<_>>>()?)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ConvolveOutput {
    cone: TruncatedCone,
    shift: Vec2,
    epsilon: f64,
    probes: Vec<PhiRow>,
}

pub fn convolve(cfg: &RunConfig, inputs: &[PathBuf], shift: Vec2) -> Result<Vec<PathBuf>, CliError> {
    let terms = inputs.iter().map(|p| io::read_term(p)).collect::<Result<Vec<_>, _>>()?;
    let mut rep = bi_free_convolve(terms, shift)?;
    rep.cone = cfg.cone_override(rep.cone)?;
    let probes = cfg.probe_set(rep.cone.m / 2.0)?;
    let rows = phi_table(&probes, |p| rep.eval_phi(p))?;
    let grid = cfg.grid()?;
    let density = rep.density(&grid.s, &grid.t, cfg.epsilon)?;
    let marginal = |axis: Axis, nodes: &[f64]| -> Result<Vec<Vec<f64>>, CliError> {
        let values = rep.marginal_rep(axis).density(nodes, cfg.epsilon)?;
        Ok(nodes.iter().zip(values).map(|(x, d)| vec![*x, d]).collect())
    };
    let ms = marginal(Axis::S, &grid.s)?;
    let mt = marginal(Axis::T, &grid.t)?;

    let out = &cfg.out;
    let summary = ConvolveOutput {
        cone: rep.cone,
        shift,
        epsilon: cfg.epsilon,
        probes: rows,
    };
    Ok(vec![
        io::write_json(out, "phi_probes.json", &summary)?,
        io::write_file(out, "density.csv", |w| density.write_csv(w))?,
        io::write_csv(out, "marginal_s.csv", &["x", "density"], &ms)?,
        io::write_csv(out, "marginal_t.csv", &["x", "density"], &mt)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdMode {
    Phi,
    Cf,
    SigmaForm,
    Drift,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RoundTrip {
    max_diff: f64,
    relation_defect: f64,
    ok: bool,
}

fn sigma_round_trip(t: &CharTriplet, tol: f64) -> Result<Option<(SigmaForm, RoundTrip)>, CliError> {
    if !t.tau.radial().is_empty() {
        return Ok(None);
    }
    let sf = t.to_sigma_form()?;
    let back = sf.to_triplet()?;
    let mut diff = (back.v - t.v).norm();
    diff = diff
        .max((back.a.a - t.a.a).abs())
        .max((back.a.b - t.a.b).abs())
        .max((back.a.c - t.a.c).abs());
    for (x, m) in t.tau.atoms().atoms() {
        diff = diff.max((back.tau.atoms().mass_at(*x) - m).abs());
    }
    for (x, m) in back.tau.atoms().atoms() {
        diff = diff.max((t.tau.atoms().mass_at(*x) - m).abs());
    }
    let defect = sf.relation_defect();
    Ok(Some((
        sf,
        RoundTrip {
            max_diff: diff,
            relation_defect: defect,
            ok: diff <= tol && defect <= tol,
        },
    )))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CompoundCheck {
    max_diff: f64,
    matches: bool,
}

/// `Σ m (zw / ((z−s)(w−t)) − 1)` over the atoms of `τ`.
fn compound_phi(t: &CharTriplet, p: ComplexPoint2) -> Complex64 {
    t.tau
        .atoms()
        .atoms()
        .iter()
        .map(|(x, m)| (p.z * p.w / ((p.z - x.s) * (p.w - x.t)) - 1.0) * *m)
        .sum()
}

#[derive(Serialize)]
struct CfRow {
    u: Vec2,
    cf: Complex64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct IdOutput {
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    probes: Option<Vec<PhiRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compound_poisson: Option<CompoundCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frequencies: Option<Vec<CfRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_form: Option<SigmaForm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drift: Option<Option<Vec2>>,
    sigma_round_trip: Option<RoundTrip>,
}

pub fn idlaw(cfg: &RunConfig, input: &Path, mode: IdMode) -> Result<Vec<PathBuf>, CliError> {
    let t: CharTriplet = io::read_json(input)?;
    let trip = sigma_round_trip(&t, cfg.tolerance)?;
    let (sf, rt) = match trip {
        Some((sf, rt)) => (Some(sf), Some(rt)),
        None => (None, None),
    };
    let mut out = IdOutput {
        mode: "",
        probes: None,
        compound_poisson: None,
        frequencies: None,
        sigma_form: None,
        drift: None,
        sigma_round_trip: rt,
    };
    match mode {
        IdMode::Phi => {
            out.mode = "phi";
            let probes = cfg.probe_set(1.0)?;
            let rows = phi_table(&probes, |p| t.bi_free_phi(p))?;
            let compound = t.a == bifree::Matrix2::ZERO && t.tau.radial().is_empty() && !t.tau.is_zero();
            if compound {
                let max_diff = rows
                    .iter()
                    .map(|r| {
                        let exact = compound_phi(&t, ComplexPoint2::new(r.z, r.w));
                        (r.phi - exact).norm() / (1.0 + exact.norm())
                    })
                    .fold(0.0, f64::max);
                out.compound_poisson = Some(CompoundCheck {
                    max_diff,
                    matches: max_diff <= cfg.tolerance,
                });
            }
            out.probes = Some(rows);
        }
        IdMode::Cf => {
            out.mode = "cf";
            let rows = probes::frequencies(1.0)
                .into_iter()
                .map(|u| t.classical_cf(u).map(|cf| CfRow { u, cf }))
                .collect::<bifree::Result<Vec<_>>>()?;
            out.frequencies = Some(rows);
        }
        IdMode::SigmaForm => {
            out.mode = "sigma-form";
            if sf.is_none() {
                return Err(Error::InvalidArgument("the σ-form needs an atomic Lévy measure".into()).into());
            }
            out.sigma_form = sf;
        }
        IdMode::Drift => {
            out.mode = "drift";
            out.drift = Some(t.drift_form());
        }
    }
    let name = format!("idlaw_{}.json", out.mode);
    Ok(vec![io::write_json(&cfg.out, &name, &out)?])
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TransferSummary {
    ks: Vec<usize>,
    limit_exists: bool,
    agree: bool,
    bifree_decreasing: Option<bool>,
    classical_decreasing: Option<bool>,
}

pub fn limit(cfg: &RunConfig, input: &Path) -> Result<Vec<PathBuf>, CliError> {
    let array: limits::TriangularArray = io::read_json(input)?;
    let probes = cfg.probe_set(1.0)?;
    let report = limits::run_transfer(&array, &probes, &probes::frequencies(1.0))?;
    let out = &cfg.out;
    let conditions: &ConditionReport = &report.conditions;
    let mut files = vec![io::write_json(out, "condition_report.json", conditions)?];
    let mut table = |name: &str, t: &Option<ResidualTable>| -> Result<(), CliError> {
        if let Some(t) = t {
            files.push(io::write_file(out, name, |w| t.write_csv(w))?);
        }
        Ok(())
    };
    table("bifree_residuals.csv", &report.bifree)?;
    table("classical_residuals.csv", &report.classical)?;
    if let Some(t) = &report.triplet {
        files.push(io::write_json(out, "limit_triplet.json", t)?);
    }
    let summary = TransferSummary {
        ks: array.ks(),
        limit_exists: report.triplet.is_some(),
        agree: report.agree,
        bifree_decreasing: report.bifree.as_ref().map(|t| t.decreasing),
        classical_decreasing: report.classical.as_ref().map(|t| t.decreasing),
    };
    files.push(io::write_json(out, "transfer.json", &summary)?);
    Ok(files)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct StableOutput {
    report: StabilityReport,
    scanned_scale: Option<f64>,
    marginal_indices: [Option<f64>; 2],
}

pub fn stable(
    cfg: &RunConfig,
    input: &Path,
    a: f64,
    b: f64,
    index: Option<f64>,
    scan: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let spec: StableSpec = io::read_json(input)?;
    let probes = cfg.probe_set(1.0)?;
    let mut report = match index {
        Some(k) => stable::check_stability_with_index(&spec, k, a, b, &probes)?,
        None => stable::check_stability(&spec, a, b, &probes)?,
    };
    report.stable = report.max_residual <= cfg.tolerance;
    let scanned_scale = if scan {
        Some(stable::best_scale(&spec, a, b, 0.5 * a.max(b), 2.0 * (a + b), &probes)?)
    } else {
        None
    };
    let t = stable::stable_triplet(&spec)?;
    let marginal_indices = [
        stable::marginal_stability_index(&t, Axis::S)?,
        stable::marginal_stability_index(&t, Axis::T)?,
    ];
    let out = StableOutput {
        report,
        scanned_scale,
        marginal_indices,
    };
    Ok(vec![io::write_json(&cfg.out, "stability_report.json", &out)?])
}

pub fn doa(cfg: &RunConfig, measure: &Path, spec: &Path, ns: &[u64]) -> Result<Vec<PathBuf>, CliError> {
    let nu: PlanarMeasure = io::read_json(measure)?;
    let spec: StableSpec = io::read_json(spec)?;
    let report: ConvergenceReport = stable::domain_of_attraction_run(&nu, &spec, ns)?;
    let rows: Vec<Vec<f64>> = report
        .ns
        .iter()
        .zip(report.bifree_residuals.iter().zip(&report.classical_residuals))
        .map(|(n, (b, c))| vec![*n as f64, *b, *c])
        .collect();
    Ok(vec![
        io::write_json(&cfg.out, "doa_report.json", &report)?,
        io::write_csv(&cfg.out, "doa_residuals.csv", &["n", "bifree", "classical"], &rows)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FullnessMethod {
    G,
    Phi,
    Triplet,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CrossCheck {
    by_g: LineReport,
    by_phi: LineReport,
    by_support: LineReport,
    agree: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FullnessOutput {
    method: &'static str,
    #[serde(flatten)]
    report: LineReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_check: Option<CrossCheck>,
}

/// Moves each probe's real parts by up to 5% of the imaginary height.
fn jitter(probes: &[ComplexPoint2], seed: u64) -> Vec<ComplexPoint2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nudge = |c: Complex64| Complex64::new(c.re + 0.05 * c.im.abs() * rng.random_range(-1.0..1.0), c.im);
    probes.iter().map(|p| ComplexPoint2::new(nudge(p.z), nudge(p.w))).collect()
}

fn with_jitter(
    probes: &[ComplexPoint2],
    seed: u64,
    f: impl Fn(&[ComplexPoint2]) -> bifree::Result<LineReport>,
) -> Result<LineReport, CliError> {
    match f(probes) {
        Err(Error::DegenerateProbes(_)) => Ok(f(&jitter(probes, seed))?),
        other => Ok(other?),
    }
}

pub fn fullness(cfg: &RunConfig, input: &Path, method: FullnessMethod) -> Result<Vec<PathBuf>, CliError> {
    let term = io::read_term(input)?;
    let probes = cfg.probe_set(1.0)?;
    let seed = cfg.seed;
    let (name, report, cross_check) = match (&term, method) {
        (Term::Measure(mu), _) => {
            let by_g = with_jitter(&probes, seed, |p| fullness::by_g(mu, p))?;
            let by_phi = with_jitter(&probes, seed, |p| fullness::by_phi_measure(mu, p))?;
            let by_support = fullness::of_support(mu);
            let (name, report) = match method {
                FullnessMethod::G => ("g", by_g),
                FullnessMethod::Phi => ("phi", by_phi),
                FullnessMethod::Triplet => {
                    return Err(CliError::Usage(
                        "method 'triplet' needs a triplet input, not a measure".into(),
                    ))
                }
            };
            let agree = by_g.agrees_with(&by_phi, LINE_TOL) && by_g.agrees_with(&by_support, LINE_TOL);
            let check = CrossCheck {
                by_g,
                by_phi,
                by_support,
                agree,
            };
            (name, report, Some(check))
        }
        (Term::Triplet(t), FullnessMethod::G) => {
            let rep = bi_free_convolve(vec![Term::Triplet(t.clone())], Vec2::ZERO)?;
            ("g", with_jitter(&probes, seed, |p| fullness::by_g_rep(&rep, p))?, None)
        }
        (Term::Triplet(t), FullnessMethod::Phi) => {
            ("phi", with_jitter(&probes, seed, |p| fullness::by_phi_triplet(t, p))?, None)
        }
        (Term::Triplet(t), FullnessMethod::Triplet) => ("triplet", fullness::of_id(t), None),
    };
    if report.verdict == FullnessVerdict::Indeterminate {
        eprintln!("warning: fullness residual {:.3e} is inside the guard band", report.residual);
    }
    let out = FullnessOutput {
        method: name,
        report,
        cross_check,
    };
    Ok(vec![io::write_json(&cfg.out, "line_report.json", &out)?])
}
