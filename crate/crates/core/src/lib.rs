//! Numerical toolkit for bi-free probability on the plane.
//!
//! Planar laws are represented by finitely many atoms ([`PlanarMeasure`]),
//! by characteristic triplets ([`CharTriplet`]) or lazily through their
//! φ-transforms ([`BiConvRep`]). The modules cover Cauchy and φ-transforms,
//! free and bi-free additive convolution with Stieltjes inversion,
//! infinitely divisible and stable laws, triangular-array limit theorems in
//! both the classical and the bi-free world, and fullness tests.

pub mod biconv;
pub mod error;
pub mod extrapolate;
pub mod freeconv;
pub mod fullness;
pub mod idlaw;
pub mod limits;
pub mod measure;
pub mod probes;
pub mod quadrature;
pub mod stable;
pub mod transforms;

pub use num_complex::Complex64;

pub use biconv::{bi_free_convolve, BiConvRep, Term};
pub use error::{Error, Result};
pub use freeconv::{free_convolve, FreeConvRep};
pub use fullness::{FullnessVerdict, LineReport};
pub use idlaw::{CharTriplet, LevyMeasure, RadialPart, SigmaForm};
pub use limits::{ConditionReport, TriangularArray};
pub use measure::{Axis, FiniteMeasure, Matrix2, Measure1D, PlanarMeasure, Vec2};
pub use stable::{StabilityReport, StableSpec};
pub use transforms::{ComplexPoint2, GridDensity, TruncatedCone};
