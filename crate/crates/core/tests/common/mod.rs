//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use bifree::{ComplexPoint2, PlanarMeasure};
use num_complex::Complex64;

/// Poisson kernel `ε / (π (x² + ε²))`.
pub fn poisson_kernel(x: f64, eps: f64) -> f64 {
    eps / (PI * (x * x + eps * eps))
}

/// Cauchy-smoothed atomic density `Σ w P_ε(s−a) P_ε(t−b)`.
pub fn smoothed_atoms(mu: &PlanarMeasure, s: f64, t: f64, eps: f64) -> f64 {
    mu.atoms()
        .iter()
        .map(|(p, w)| w * poisson_kernel(s - p.s, eps) * poisson_kernel(t - p.t, eps))
        .sum()
}

/// Arcsine law on `[−2, 2]` convolved with the Cauchy kernel, via `x = 2cos θ`, θ uniform.
pub fn smoothed_arcsine(x: f64, eps: f64) -> f64 {
    let n = 20_000;
    let h = PI / n as f64;
    (0..n)
        .map(|k| poisson_kernel(x - 2.0 * ((k as f64 + 0.5) * h).cos(), eps))
        .sum::<f64>()
        * h
        / PI
}

/// All set partitions of `{0..n}` as block labels (restricted growth strings).
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=next {
            prefix.push(b);
            rec(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, &mut out);
    out
}

pub fn is_non_crossing(labels: &[usize]) -> bool {
    let n = labels.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    if labels[a] == labels[c] && labels[b] == labels[d] && labels[a] != labels[b] {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn block_sizes(labels: &[usize]) -> Vec<usize> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

/// Moments `m_1..m_n` from free cumulants `κ_1..κ_n` by summing over non-crossing partitions.
pub fn moments_from_free_cumulants(kappa: &[f64]) -> Vec<f64> {
    (1..=kappa.len())
        .map(|n| {
            set_partitions(n)
                .iter()
                .filter(|p| is_non_crossing(p))
                .map(|p| block_sizes(p).iter().map(|&s| kappa[s - 1]).product::<f64>())
                .sum()
        })
        .collect()
}

/// Inverse of [`moments_from_free_cumulants`].
pub fn free_cumulants_from_moments(m: &[f64]) -> Vec<f64> {
    let mut kappa: Vec<f64> = Vec::new();
    for n in 1..=m.len() {
        let mut rest = 0.0;
        for p in set_partitions(n).iter().filter(|p| is_non_crossing(p)) {
            let sizes = block_sizes(p);
            if sizes.len() == 1 {
                continue;
            }
            rest += sizes.iter().map(|&s| kappa[s - 1]).product::<f64>();
        }
        kappa.push(m[n - 1] - rest);
    }
    kappa
}

/// Deterministic probes in `{|Re| ≤ |Im|, 2 ≤ |Im| ≤ 10}²`, all four half-plane combinations.
pub fn bicone_probes(count: usize) -> Vec<ComplexPoint2> {
    let frac = |x: f64| x - x.floor();
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    (0..count)
        .map(|k| {
            let kf = k as f64 + 1.0;
            let y = 2.0 + 8.0 * frac(kf * golden);
            let v = 2.0 + 8.0 * frac(kf * 2f64.sqrt());
            let x = y * (2.0 * frac(kf * 3f64.sqrt()) - 1.0);
            let u = v * (2.0 * frac(kf * 5f64.sqrt()) - 1.0);
            let sy = if k % 2 == 0 { 1.0 } else { -1.0 };
            let sv = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            ComplexPoint2::new(Complex64::new(x, sy * y), Complex64::new(u, sv * v))
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
