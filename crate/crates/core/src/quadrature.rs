//! Globally adaptive Gauss–Kronrod (7–15) quadrature for complex integrands.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Options for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

/// Integral value together with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let pair = f1 + f2;
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::Quadrature(format!(
            "integrand not finite on [{a}, {b}]"
        )));
    }
    Ok(Segment { a, b, value, error })
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate(
    f: impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature("interval endpoints must be finite".into()));
    }
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = gk15(&f, a, b)?;
    let mut total = first.value;
    let mut err = first.error;
    heap.push(first);
    let mut count = 1;
    while err > opts.abs_tol.max(opts.rel_tol * total.norm()) {
        if count >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:.3e} above tolerance after {count} subintervals"
            )));
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval cannot be split further in floating point
            heap.push(seg);
            break;
        }
        let left = gk15(&f, seg.a, mid)?;
        let right = gk15(&f, mid, seg.b)?;
        total += left.value + right.value - seg.value;
        err += left.error + right.error - seg.error;
        heap.push(left);
        heap.push(right);
        count += 1;
        // periodically resum to avoid drift from the running updates
        if count % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: Complex64 = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult { value, error })
}

/// Integrates a real function over `[a, b]`.
pub fn integrate_real(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    integrate(|x| Complex64::new(f(x), 0.0), a, b, opts).map(|r| r.value.re)
}
