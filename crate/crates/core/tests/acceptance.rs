//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use bifree::biconv::{bi_free_convolve, Term};
use bifree::fullness::{self, Line, LineReport};
use bifree::idlaw::{make_compound_poisson, make_gaussian, Ray};
use bifree::limits::{self, iid_array, ArrayRow, TriangularArray};
use bifree::stable::{self, StableSpec};
use bifree::transforms::{self, linspace, TruncatedCone};
use bifree::{free_convolve, Axis, CharTriplet, Complex64, LevyMeasure, Matrix2, Measure1D, PlanarMeasure, Vec2};
use nalgebra::{DMatrix, DVector};

use common::*;

type Outcome = Result<String, String>;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn pm(atoms: &[((f64, f64), f64)]) -> PlanarMeasure {
    PlanarMeasure::new(atoms.iter().map(|&((s, t), w)| (Vec2::new(s, t), w)).collect()).unwrap()
}

fn dirac_algebra() -> Outcome {
    let probes = bicone_probes(100);
    let (u, v) = (Vec2::new(0.7, -1.3), Vec2::new(-2.1, 0.4));
    let sum = PlanarMeasure::dirac(u + v);
    let rep = bi_free_convolve(
        vec![Term::Measure(PlanarMeasure::dirac(u)), Term::Measure(PlanarMeasure::dirac(v))],
        Vec2::ZERO,
    )
    .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for p in &probes {
        for x in [u, v, u + v] {
            let d = PlanarMeasure::dirac(x);
            let phi = transforms::bi_free_phi(&d, *p, &TruncatedCone::for_planar(&d)).map_err(|e| e.to_string())?;
            worst = worst.max((phi - (x.s / p.z + x.t / p.w)).norm());
        }
        let phi_sum = rep.eval_phi(*p).map_err(|e| e.to_string())?;
        worst = worst.max((phi_sum - ((u + v).s / p.z + (u + v).t / p.w)).norm());
        let g = rep.eval_g2d(*p).map_err(|e| e.to_string())?;
        let g_ref = transforms::cauchy2d(&sum, *p).map_err(|e| e.to_string())?;
        worst = worst.max((g - g_ref).norm() / g_ref.norm());
    }
    check(worst <= 1e-10, format!("max error {worst:.2e} over 100 probes (tol 1e-10)"))
}

fn inversion_exactness() -> Outcome {
    let laws = [
        pm(&[((0.0, 0.0), 1.0)]),
        pm(&[((1.0, -1.0), 0.4), ((-0.5, 0.5), 0.6)]),
        pm(&[((0.0, 1.0), 0.2), ((1.0, 2.0), 0.3), ((-1.0, -2.0), 0.5)]),
        pm(&[((1.0, 1.0), 0.25), ((-1.0, 1.0), 0.25), ((1.0, -1.0), 0.25), ((-1.0, -1.0), 0.25)]),
        pm(&[((0.3, 0.1), 0.1), ((-1.2, 0.8), 0.2), ((2.0, -0.5), 0.3), ((0.0, 1.5), 0.15), ((-2.2, -2.0), 0.25)]),
    ];
    let axis = linspace(-3.0, 3.0, 64);
    let mut worst: f64 = 0.0;
    for mu in &laws {
        for eps in [0.05, 0.2] {
            let grid = transforms::stieltjes2d(|p| transforms::cauchy2d(mu, p), &axis, &axis, eps)
                .map_err(|e| e.to_string())?;
            for (i, s) in axis.iter().enumerate() {
                for (j, t) in axis.iter().enumerate() {
                    worst = worst.max((grid.values[i][j] - smoothed_atoms(mu, *s, *t, eps)).abs());
                }
            }
        }
    }
    check(worst <= 1e-9, format!("max node error {worst:.2e} on 64x64 grids (tol 1e-9)"))
}

fn marginal_identity() -> Outcome {
    let mu = pm(&[((1.0, 1.0), 0.5), ((-1.0, -1.0), 0.5)]);
    let rep = bi_free_convolve(vec![Term::Measure(mu.clone()), Term::Measure(mu)], Vec2::ZERO)
        .map_err(|e| e.to_string())?;
    let eps = 0.05;
    let s_axis = linspace(-4.0, 4.0, 401);
    let t_axis = linspace(-10.0, 10.0, 2001);
    let grid = rep.density(&s_axis, &t_axis, eps).map_err(|e| e.to_string())?;
    let marginal = grid.marginal(Axis::S);
    let ds = transforms::cell_widths(&s_axis);
    let l1: f64 = s_axis
        .iter()
        .zip(&marginal)
        .zip(&ds)
        .map(|((s, m), d)| (m - smoothed_arcsine(*s, eps)).abs() * d)
        .sum();
    check(l1 <= 0.02, format!("L1 distance {l1:.4} on [-4,4] (tol 0.02)"))
}

fn free_cumulant_oracle() -> Outcome {
    let b = Measure1D::new(vec![(-1.0, 0.3), (0.5, 0.5), (2.0, 0.2)]).map_err(|e| e.to_string())?;
    let order = 6;
    let m_b: Vec<f64> = (1..=order as i32).map(|k| b.moment(k)).collect();
    let kappa: Vec<f64> = free_cumulants_from_moments(&m_b).iter().map(|k| 2.0 * k).collect();
    let want = moments_from_free_cumulants(&kappa);

    let rep = free_convolve(b.clone(), b);
    let unknowns = 13;
    let y0 = 50.0;
    let mut rows = Vec::new();
    for y in [50.0, 100.0, 200.0] {
        for frac in [0.25, 0.375, 0.5, 0.625, 0.75] {
            let zeta = Complex64::from_polar(y, frac * std::f64::consts::PI);
            let g = rep.eval_g(zeta).map_err(|e| e.to_string())?;
            rows.push((zeta, zeta * g));
        }
    }
    let mut a = DMatrix::<f64>::zeros(2 * rows.len(), unknowns);
    let mut rhs = DVector::<f64>::zeros(2 * rows.len());
    for (i, (zeta, val)) in rows.iter().enumerate() {
        for k in 0..unknowns {
            let c = (zeta / y0).powi(-(k as i32));
            a[(2 * i, k)] = c.re;
            a[(2 * i + 1, k)] = c.im;
        }
        rhs[2 * i] = val.re;
        rhs[2 * i + 1] = val.im;
    }
    let sol = a.svd(true, true).solve(&rhs, 1e-15).map_err(|e| e.to_string())?;
    let got: Vec<f64> = (1..=order).map(|k| sol[k] * y0.powi(k as i32)).collect();
    let worst = got.iter().zip(&want).map(|(g, w)| rel_err(*g, *w)).fold(0.0, f64::max);
    check(
        worst <= 1e-3 && (sol[0] - 1.0).abs() < 1e-6,
        format!("max relative moment error {worst:.2e} through order {order} (tol 1e-3)"),
    )
}

fn poisson_row(n: usize, jump: Vec2) -> ArrayRow {
    let m = PlanarMeasure::new(vec![(Vec2::ZERO, 1.0 - 1.0 / n as f64), (jump, 1.0 / n as f64)]).unwrap();
    ArrayRow::new(vec![(m, n)], Vec2::ZERO)
}

fn poisson_array(ns: &[usize]) -> TriangularArray {
    TriangularArray::new(ns.iter().map(|&n| poisson_row(n, Vec2::new(1.0, 1.0))).collect(), 1.0).unwrap()
}

fn bernoulli() -> PlanarMeasure {
    pm(&[((1.0, 1.0), 0.5), ((-1.0, -1.0), 0.5)])
}

fn clt_array(ns: &[usize]) -> TriangularArray {
    iid_array(&bernoulli(), |k| 1.0 / (k as f64).sqrt(), ns).unwrap()
}

fn poisson_limit() -> Outcome {
    let a = poisson_array(&[8, 32, 128, 512]);
    let target = make_compound_poisson(1.0, &PlanarMeasure::dirac(Vec2::new(1.0, 1.0))).map_err(|e| e.to_string())?;
    let table = limits::run_bi_free_limit(&a, &target, &bifree::probes::tensor(1.0)).map_err(|e| e.to_string())?;
    let ratios = table.ratios();
    let t = limits::limit_triplet(&a).map_err(|e| e.to_string())?;
    let v_err = (t.v - Vec2::new(1.0 / 3.0, 1.0 / 3.0)).norm();
    let ok = table.decreasing && ratios.iter().all(|r| (0.2..=0.35).contains(r)) && v_err <= 1e-6;
    check(ok, format!("residual ratios {ratios:?} (want [0.2,0.35]), |v − (1/3,1/3)| = {v_err:.1e}"))
}

fn clt_transfer() -> Outcome {
    let a = clt_array(&[64, 256, 1024, 4096]);
    let c34 = limits::check_condition_iii_iv(&a).map_err(|e| e.to_string())?;
    let want_a = Matrix2::new(1.0, 1.0, 1.0);
    let a_err = [(c34.a.a - 1.0).abs(), (c34.a.c - 1.0).abs(), (c34.a.b - 1.0).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    let t = limits::limit_triplet(&a).map_err(|e| e.to_string())?;
    let probes = bifree::probes::tensor(1.0);
    let freqs = bifree::probes::frequencies(1.0);
    let mut form_err: f64 = 0.0;
    for p in &probes {
        let want = (p.z * p.z).inv() + (p.z * p.w).inv() + (p.w * p.w).inv();
        form_err = form_err.max((t.bi_free_phi(*p).map_err(|e| e.to_string())? - want).norm());
    }
    for u in &freqs {
        let want = Complex64::new((-0.5 * want_a.quad(*u)).exp(), 0.0);
        form_err = form_err.max((t.classical_cf(*u).map_err(|e| e.to_string())? - want).norm());
    }
    let bf = limits::run_bi_free_limit(&a, &t, &probes).map_err(|e| e.to_string())?;
    let cl = limits::run_classical_limit(&a, &t, &freqs).map_err(|e| e.to_string())?;
    let ok = a_err <= 1e-3 && form_err <= 1e-10 && bf.decreasing && cl.decreasing;
    check(
        ok,
        format!(
            "A error {a_err:.1e}, limit-form error {form_err:.1e}, bi-free residuals {:?}, classical residuals {:?}",
            bf.residuals, cl.residuals
        ),
    )
}

fn condition_catalog() -> Vec<(&'static str, TriangularArray, bool)> {
    let ns = [64usize, 256, 1024, 4096];
    let dirac = TriangularArray::new(
        ns.iter()
            .map(|&n| ArrayRow::new(vec![(PlanarMeasure::dirac(Vec2::new(1.0 / n as f64, 0.0)), n)], Vec2::ZERO))
            .collect(),
        1.0,
    )
    .unwrap();
    let compound = TriangularArray::new(
        ns.iter()
            .map(|&n| {
                let p = 1.0 / n as f64;
                let m = pm(&[((0.0, 0.0), 1.0 - p), ((0.5, 0.5), 0.5 * p), ((-1.0, 2.0), 0.5 * p)]);
                ArrayRow::new(vec![(m, n)], Vec2::ZERO)
            })
            .collect(),
        1.0,
    )
    .unwrap();
    let mixed = TriangularArray::new(
        ns.iter()
            .map(|&n| {
                let h = 1.0 / (n as f64).sqrt();
                let g = pm(&[((h, 0.0), 0.5), ((-h, 0.0), 0.5)]);
                let p = poisson_row(n, Vec2::new(1.0, 1.0)).measures[0].measure.clone();
                ArrayRow::new(vec![(g, n), (p, n)], Vec2::ZERO)
            })
            .collect(),
        1.0,
    )
    .unwrap();
    let escaping = TriangularArray::new(
        ns.iter().map(|&n| poisson_row(n, Vec2::new(0.8, 0.6).scale(n as f64))).collect(),
        1.0,
    )
    .unwrap();
    vec![
        ("dirac", dirac, true),
        ("clt", clt_array(&ns), true),
        ("poisson", poisson_array(&ns), true),
        ("compound poisson", compound, true),
        ("gaussian+poisson", mixed, true),
        ("escaping mass", escaping, false),
    ]
}

fn condition_equivalence() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, a, expect) in condition_catalog() {
        let r = limits::condition_report(&a).map_err(|e| format!("{name}: {e}"))?;
        let (p12, p34) = (r.conditions_i_ii.converged, r.conditions_iii_iv.converged);
        let good = p12 == p34 && p12 == expect && (!p12 || r.quadratic_consistent);
        ok &= good;
        notes.push(format!("{name}: {}/{}", p12 as u8, p34 as u8));
    }
    check(ok, notes.join(", "))
}

fn stability() -> Outcome {
    let pairs = [(1.0, 1.0), (1.0, 2.0), (0.5, 2.0)];
    let probes = bifree::probes::tensor(1.0);
    let mut specs: Vec<StableSpec> = [0.5, 1.0, 1.5]
        .iter()
        .map(|&alpha| StableSpec::radial(alpha, StableSpec::uniform_rays(8, 0.125), Vec2::ZERO))
        .collect();
    specs.push(StableSpec::gaussian(Vec2::new(0.2, -0.1), Matrix2::new(1.0, 0.3, 2.0)));
    let mut worst: f64 = 0.0;
    for spec in &specs {
        for &(a, b) in &pairs {
            let r = stable::check_stability(spec, a, b, &probes).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_residual);
        }
    }
    let cauchy = StableSpec::radial(
        1.0,
        vec![Ray { angle: 0.0, m: 1.0 }, Ray { angle: std::f64::consts::PI, m: 1.0 }],
        Vec2::ZERO,
    );
    let negative = stable::check_stability_with_index(&cauchy, 1.5, 1.0, 1.0, &probes)
        .map_err(|e| e.to_string())?
        .max_residual;
    check(
        worst <= 1e-6 && negative > 1e-2,
        format!("worst stable residual {worst:.2e} (tol 1e-6), wrong-index residual {negative:.2e} (want > 1e-2)"),
    )
}

fn domain_of_attraction() -> Outcome {
    let cauchy = StableSpec::radial(
        1.0,
        vec![Ray { angle: 0.0, m: 1.0 }, Ray { angle: std::f64::consts::PI, m: 1.0 }],
        Vec2::ZERO,
    );
    let cases = [
        ("dirac", PlanarMeasure::dirac(Vec2::new(1.0, 1.0)), StableSpec::gaussian(Vec2::ZERO, Matrix2::ZERO)),
        ("bernoulli", bernoulli(), StableSpec::gaussian(Vec2::ZERO, Matrix2::new(1.0, 1.0, 1.0))),
        (
            "four-point",
            pm(&[((1.0, 0.0), 0.25), ((-1.0, 0.0), 0.25), ((0.0, 1.0), 0.25), ((0.0, -1.0), 0.25)]),
            StableSpec::gaussian(Vec2::ZERO, Matrix2::new(0.5, 0.0, 0.5)),
        ),
        ("bernoulli vs cauchy", bernoulli(), cauchy),
    ];
    let ns = [16u64, 64, 256, 1024];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, nu, spec) in &cases {
        let r = stable::domain_of_attraction_run(nu, spec, &ns).map_err(|e| format!("{name}: {e}"))?;
        ok &= r.agree;
        notes.push(format!("{name}: {}/{}", r.bifree_converges as u8, r.classical_converges as u8));
    }
    check(ok, notes.join(", "))
}

enum Law {
    Atomic(PlanarMeasure),
    Id(CharTriplet),
}

fn fullness_reports(law: &Law) -> Result<[LineReport; 3], String> {
    let probes = bifree::probes::tensor(1.0);
    let e = |x: bifree::Error| x.to_string();
    Ok(match law {
        Law::Atomic(mu) => {
            let third = if mu.is_dirac() {
                let t = make_gaussian(mu.atoms()[0].0, Matrix2::ZERO).map_err(e)?;
                fullness::of_id(&t)
            } else {
                fullness::of_support(mu)
            };
            [
                fullness::by_g(mu, &probes).map_err(e)?,
                fullness::by_phi_measure(mu, &probes).map_err(e)?,
                third,
            ]
        }
        Law::Id(t) => {
            let rep = bi_free_convolve(vec![Term::Triplet(t.clone())], Vec2::ZERO).map_err(e)?;
            [
                fullness::by_g_rep(&rep, &probes).map_err(e)?,
                fullness::by_phi_triplet(t, &probes).map_err(e)?,
                fullness::of_id(t),
            ]
        }
    })
}

fn fullness_agreement() -> Outcome {
    let line = |a, b, c| Line::normalized(a, b, c);
    let sing_v = Vec2::new(0.5, -0.5);
    let mixed = CharTriplet::new(
        Vec2::new(0.2, 0.4),
        Matrix2::new(1.0, 0.0, 0.0),
        LevyMeasure::atomic(vec![(Vec2::new(2.0, 0.0), 1.0)]).unwrap(),
    )
    .unwrap();
    let catalog: Vec<(&str, Law, Option<Line>)> = vec![
        ("dirac", Law::Atomic(PlanarMeasure::dirac(Vec2::new(1.0, 2.0))), line(1.0, 0.0, -1.0)),
        ("collinear through 0", Law::Atomic(bernoulli()), line(1.0, -1.0, 0.0)),
        (
            "collinear offset",
            Law::Atomic(pm(&[((0.0, 1.0), 0.2), ((1.0, 2.0), 0.3), ((2.0, 3.0), 0.5)])),
            line(1.0, -1.0, 1.0),
        ),
        (
            "non-collinear",
            Law::Atomic(pm(&[((0.0, 0.0), 1.0 / 3.0), ((1.0, 0.0), 1.0 / 3.0), ((0.0, 1.0), 1.0 / 3.0)])),
            None,
        ),
        (
            "singular gaussian",
            Law::Id(make_gaussian(sing_v, Matrix2::new(1.0, 1.0, 1.0)).unwrap()),
            line(1.0, -1.0, -(sing_v.s - sing_v.t)),
        ),
        ("gaussian", Law::Id(make_gaussian(Vec2::ZERO, Matrix2::IDENTITY).unwrap()), None),
        (
            "poisson",
            Law::Id(make_compound_poisson(1.0, &PlanarMeasure::dirac(Vec2::new(1.0, 1.0))).unwrap()),
            line(1.0, -1.0, 0.0),
        ),
        (
            "compound poisson, full jumps",
            Law::Id(make_compound_poisson(2.0, &pm(&[((1.0, 0.0), 0.5), ((0.0, 1.0), 0.5)])).unwrap()),
            None,
        ),
        (
            "compound poisson, collinear jumps",
            Law::Id(make_compound_poisson(1.0, &pm(&[((1.0, 2.0), 0.5), ((-2.0, -4.0), 0.5)])).unwrap()),
            line(2.0, -1.0, 0.0),
        ),
        ("gaussian+poisson", Law::Id(mixed), line(0.0, 1.0, -0.4)),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, law, expect) in &catalog {
        let r = fullness_reports(law).map_err(|e| format!("{name}: {e}"))?;
        let agree = r[0].agrees_with(&r[1], 1e-6) && r[0].agrees_with(&r[2], 1e-6);
        let right = match expect {
            None => r.iter().all(|x| x.is_full),
            Some(l) => r.iter().all(|x| !x.is_full && x.line.is_some_and(|m| m.distance(l) <= 1e-6)),
        };
        if !(agree && right) {
            ok = false;
            notes.push(format!("{name}: {:?}", r.iter().map(|x| (x.verdict, x.residual)).collect::<Vec<_>>()));
        }
    }
    if ok {
        notes.push(format!("{} laws agree", catalog.len()));
    }
    check(ok, notes.join("; "))
}

fn triplet_round_trip() -> Outcome {
    let triplets = vec![
        make_gaussian(Vec2::new(0.3, -0.2), Matrix2::new(2.0, 0.5, 1.0)).unwrap(),
        make_compound_poisson(1.0, &PlanarMeasure::dirac(Vec2::new(1.0, 1.0))).unwrap(),
        CharTriplet::new(
            Vec2::new(-1.0, 0.5),
            Matrix2::new(1.0, -1.0, 1.0),
            LevyMeasure::atomic(vec![
                (Vec2::new(0.0, 2.0), 0.7),
                (Vec2::new(-3.0, 0.0), 1.1),
                (Vec2::new(0.5, -0.25), 2.0),
                (Vec2::new(1e-3, 4.0), 0.3),
            ])
            .unwrap(),
        )
        .unwrap(),
        CharTriplet::new(
            Vec2::ZERO,
            Matrix2::ZERO,
            LevyMeasure::atomic(vec![(Vec2::new(10.0, -7.0), 0.01), (Vec2::new(-0.1, 0.2), 50.0)]).unwrap(),
        )
        .unwrap(),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for t in &triplets {
        let sf = t.to_sigma_form().map_err(|e| e.to_string())?;
        worst_rel = worst_rel.max(sf.relation_defect());
        let back = sf.to_triplet().map_err(|e| e.to_string())?;
        for (x, y) in [(t.v.s, back.v.s), (t.v.t, back.v.t), (t.a.a, back.a.a), (t.a.b, back.a.b), (t.a.c, back.a.c)] {
            worst = worst.max((x - y).abs());
        }
        for (p, m) in t.tau.atoms().atoms() {
            worst = worst.max((back.tau.atoms().mass_at(*p) - m).abs());
        }
        if back.tau.atoms().atoms().len() != t.tau.atoms().atoms().len() {
            return Err("atom count changed in round trip".into());
        }
    }
    check(
        worst <= 1e-12 && worst_rel <= 1e-9,
        format!("max component error {worst:.1e} (tol 1e-12), max relation defect {worst_rel:.1e}"),
    )
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "Dirac algebra", budget: Duration::from_secs(1), run: dirac_algebra },
        Criterion { id: 2, name: "inversion exactness", budget: Duration::from_secs(5), run: inversion_exactness },
        Criterion { id: 3, name: "marginal identity", budget: Duration::from_secs(60), run: marginal_identity },
        Criterion { id: 4, name: "free cumulant oracle", budget: Duration::from_secs(10), run: free_cumulant_oracle },
        Criterion { id: 5, name: "Poisson limit", budget: Duration::from_secs(30), run: poisson_limit },
        Criterion { id: 6, name: "CLT and transfer", budget: Duration::from_secs(60), run: clt_transfer },
        Criterion { id: 7, name: "condition equivalence", budget: Duration::from_secs(120), run: condition_equivalence },
        Criterion { id: 8, name: "stability", budget: Duration::from_secs(60), run: stability },
        Criterion { id: 9, name: "domain of attraction", budget: Duration::from_secs(120), run: domain_of_attraction },
        Criterion { id: 10, name: "fullness agreement", budget: Duration::from_secs(30), run: fullness_agreement },
        Criterion { id: 11, name: "triplet round trip", budget: Duration::from_secs(5), run: triplet_round_trip },
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {:?}", c.budget)),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {}: {} [{:.2}s]",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
