//! Numerical machinery for quadrature errors, approximation numbers, and
//! sampling numbers on spheres `S^d`, for multiplier-defined Hilbert spaces
//! `H^Λ` and in particular the log-perturbed Sobolev scale `H^{α,β}(S^d)`.
//!
//! The crate is organised around six concerns:
//!
//! * [`special_fn`] — normalized Gegenbauer polynomials, Gauss rules for the
//!   projected sphere weight, triple-product (linearization) coefficients and
//!   the induced convolution of coefficient sequences;
//! * [`harmonic_model`] — multiplier sequences, reproducing kernels with
//!   certified truncation tails, Sobolev/Besov norms of coefficient data;
//! * [`sphere_sampling`] — point families on `S^2`, real spherical harmonics,
//!   positive product rules and Marcinkiewicz–Zygmund condition numbers;
//! * [`least_squares`] — weighted least-squares projection onto spherical
//!   polynomials, hyperinterpolation, and least-squares quadrature;
//! * [`error_bounds`] — exact worst-case integration errors in the RKHS,
//!   optimal weights, approximation numbers, and lower-bound certificates;
//! * [`experiments`] — the table-producing experiment drivers behind the CLI.
//!
//! All numerical kernels are generic over the scalar type through [`Real`];
//! `f64` aliases for the main types are exported at the crate root.

pub mod error;
pub mod error_bounds;
pub mod experiments;
pub mod harmonic_model;
pub mod least_squares;
pub mod special_fn;
pub mod sphere_sampling;
pub mod tol;

pub use error::{Error, Result};

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the numerical core is generic over: `f32` or `f64`.
///
/// `nalgebra::RealField` supplies the elementary functions and the dense
/// factorizations; the `num-traits` conversions bridge integer-valued
/// quantities (dimensions, node counts) into the scalar type.
pub trait Real:
    nalgebra::RealField + Copy + Default + FromPrimitive + ToPrimitive + std::iter::Sum<Self>
{
}

impl<T> Real for T where
    T: nalgebra::RealField + Copy + Default + FromPrimitive + ToPrimitive + std::iter::Sum<T>
{
}

/// Shorthand conversion from `f64` into the generic scalar.
#[inline]
pub(crate) fn r<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Shorthand conversion from an unsigned integer into the generic scalar.
#[inline]
pub(crate) fn ru<T: Real>(n: u64) -> T {
    T::from_u64(n).expect("integer must be representable in the scalar type")
}

// Concrete aliases for the common double-precision instantiation.
// Concrete aliases moved below once all modules land.
pub type GaussRule1D64 = special_fn::GaussRule1D<f64>;
pub type TripleProductTable64 = special_fn::TripleProductTable<f64>;
pub type Sequence64 = special_fn::Sequence<f64>;
pub type MultiplierSequence64 = harmonic_model::MultiplierSequence<f64>;
pub type KernelCoefficients64 = harmonic_model::KernelCoefficients<f64>;
pub type HarmonicCoefficients64 = harmonic_model::HarmonicCoefficients<f64>;
// pub type PointFamily64 = sphere_sampling::PointFamily<f64>;
// pub type QuadratureRule64 = least_squares::QuadratureRule<f64>;
// pub type LsFit64 = least_squares::LsFit<f64>;
// pub type WorstCaseReport64 = error_bounds::WorstCaseReport<f64>;
// pub type LowerBoundCertificate64 = error_bounds::LowerBoundCertificate<f64>;
