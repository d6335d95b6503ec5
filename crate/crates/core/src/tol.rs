//! Default tolerance constants.
//!
//! Operations that accept an explicit tolerance use these as defaults; the
//! values trace accumulated f64 rounding in the corresponding computations.

/// Triple-product table property checks (symmetry, positivity, row sums).
pub const TABLE_PROPS: f64 = 1e-10;

/// Deviation of a measured global condition number from 1 on a positive rule.
pub const KAPPA_UNITY: f64 = 1e-10;

/// Relative eigenvalue floor for positive semi-definiteness verdicts.
pub const PSD_REL: f64 = 1e-9;

/// Condition-number cap above which least-squares fits log a warning.
pub const KAPPA_CAP: f64 = 16.0;

/// Default certified tail budget for kernel evaluations.
pub const KERNEL_TAIL: f64 = 1e-9;

/// Unit-norm slack for points on the sphere.
pub const UNIT_NORM: f64 = 1e-12;
