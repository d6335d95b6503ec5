//! Weighted least-squares projection onto spherical polynomials, the induced
//! quadrature rule, and the hyperinterpolation shortcut on tight frames.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::harmonic_model::{dim_poly, HarmonicCoefficients};
use crate::sphere_sampling::{
    design_matrix, mz_condition, real_sph_harmonics, MzConstants, PointFamily,
    SpherePoint, SCHEMA_HEADER,
};
use crate::{r, tol, Real};

/// Identification of the family a fit was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyInfo {
    pub kind: String,
    pub degree: usize,
    pub len: usize,
}

impl<T: Real> PointFamily<T> {
    fn info(&self) -> FamilyInfo {
        FamilyInfo {
            kind: self.kind.to_string(),
            degree: self.degree,
            len: self.len(),
        }
    }

    fn constants(&self, n_degree: usize) -> MzConstants<T> {
        match (&self.measured, n_degree == self.degree) {
            (Some(c), true) => *c,
            _ => mz_condition(self, n_degree),
        }
    }
}

/// A weighted least-squares fit: the minimizer of
/// `sum_k tau_k |f(x_k) - p(x_k)|^2` over polynomials of degree `<= N`,
/// expressed in the orthonormal harmonic basis.
#[derive(Debug, Clone)]
pub struct LsFit<T> {
    pub degree: usize,
    pub coeffs: HarmonicCoefficients<T>,
    /// Value of the minimized weighted sum of squares.
    pub residual_discrete: T,
    pub family: FamilyInfo,
}

/// Nodes plus (sign-unconstrained) quadrature weights exact for sampled
/// members of the fitted polynomial space.
#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<SpherePoint<T>>,
    /// Sampling weights of the underlying family.
    pub tau: Vec<T>,
    /// Quadrature weights.
    pub weights: Vec<T>,
    pub exactness_claim: usize,
}

impl<T: Real> QuadratureRule<T> {
    /// Applies the rule to samples taken at its nodes.
    pub fn apply(&self, samples: &[T]) -> T {
        self.weights
            .iter()
            .zip(samples)
            .map(|(&w, &s)| w * s)
            .sum()
    }

    /// CSV document: the point-family schema plus a quadrature-weight column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(SCHEMA_HEADER);
        out.push('\n');
        out.push_str(&format!(
            "# quadrature exactness={} l={}\n",
            self.exactness_claim,
            self.nodes.len()
        ));
        out.push_str("x,y,z,tau,w\n");
        for ((p, &t), &w) in self.nodes.iter().zip(&self.tau).zip(&self.weights) {
            out.push_str(&format!("{},{},{},{},{}\n", p.0[0], p.0[1], p.0[2], t, w));
        }
        out
    }
}

struct WeightedQr<T: Real> {
    qr: nalgebra::linalg::QR<T, nalgebra::Dyn, nalgebra::Dyn>,
    cols: usize,
}

fn weighted_qr<T: Real>(fam: &PointFamily<T>, n_degree: usize) -> Result<WeightedQr<T>> {
    let cols = dim_poly(2, n_degree) as usize;
    let constants = fam.constants(n_degree);
    if !(constants.a > T::zero()) {
        return Err(Error::RankDeficient(format!(
            "family of {} nodes cannot discretize degree {n_degree} (needs rank {cols})",
            fam.len()
        )));
    }
    if constants.kappa > r(tol::KAPPA_CAP) {
        log::warn!(
            "family condition number {} exceeds the cap {}; the fit is poorly conditioned",
            constants.kappa,
            tol::KAPPA_CAP
        );
    }
    let design = design_matrix(fam, n_degree);
    let qr = design.matrix.qr();
    let diag_floor = r::<T>(1e-13);
    let mut max_diag = T::zero();
    for j in 0..cols {
        max_diag = max_diag.max(qr.r()[(j, j)].abs());
    }
    for j in 0..cols {
        if qr.r()[(j, j)].abs() <= diag_floor * max_diag {
            return Err(Error::RankDeficient(format!(
                "triangular factor vanishes at column {j}"
            )));
        }
    }
    Ok(WeightedQr { qr, cols })
}

fn blocks_from_flat<T: Real>(n_degree: usize, flat: &[T]) -> HarmonicCoefficients<T> {
    let mut coeffs = HarmonicCoefficients::zero(n_degree);
    let mut idx = 0;
    for l in 0..=n_degree {
        for k in 0..=2 * l {
            coeffs.set(l, k, flat[idx]);
            idx += 1;
        }
    }
    coeffs
}

/// Fits the samples on the family's nodes by weighted least squares over
/// polynomials of degree `<= N`; the orthogonal projection under the
/// discretized inner product.
pub fn ls_fit<T: Real>(fam: &PointFamily<T>, n_degree: usize, samples: &[T]) -> Result<LsFit<T>> {
    if samples.len() != fam.len() {
        return Err(Error::Domain(format!(
            "expected {} samples, found {}",
            fam.len(),
            samples.len()
        )));
    }
    let wqr = weighted_qr(fam, n_degree)?;
    let mut rhs = DVector::<T>::from_iterator(
        fam.len(),
        samples.iter().zip(&fam.tau).map(|(&s, &w)| s * w.sqrt()),
    );
    wqr.qr.q_tr_mul(&mut rhs);
    let head = DVector::from_iterator(wqr.cols, rhs.iter().take(wqr.cols).copied());
    let solution = wqr
        .qr
        .r()
        .solve_upper_triangular(&head)
        .ok_or(Error::SingularGram)?;
    let residual: T = rhs.iter().skip(wqr.cols).map(|&v| v * v).sum();
    Ok(LsFit {
        degree: n_degree,
        coeffs: blocks_from_flat(n_degree, solution.as_slice()),
        residual_discrete: residual.max(T::zero()),
        family: fam.info(),
    })
}

/// Direct hyperinterpolation sums `c_{l,m} = sum_k tau_k f(x_k) Y_{l,m}(x_k)`
/// for a family whose positive rule is exact on products of degree `<= 2N`;
/// logs a warning when the measured condition number strays from 1.
pub fn hyperinterpolation<T: Real>(
    fam: &PointFamily<T>,
    n_degree: usize,
    samples: &[T],
) -> Result<HarmonicCoefficients<T>> {
    if samples.len() != fam.len() {
        return Err(Error::Domain(format!(
            "expected {} samples, found {}",
            fam.len(),
            samples.len()
        )));
    }
    let constants = fam.constants(n_degree);
    if (constants.kappa - T::one()).abs() > r(1e-8) {
        log::warn!(
            "hyperinterpolation on a family with condition number {}; sums are no longer a projection",
            constants.kappa
        );
    }
    let cols = dim_poly(2, n_degree) as usize;
    let mut flat = vec![T::zero(); cols];
    for (p, (&w, &s)) in fam.nodes.iter().zip(fam.tau.iter().zip(samples)) {
        let scale = w * s;
        if scale == T::zero() {
            continue;
        }
        for (slot, y) in flat.iter_mut().zip(real_sph_harmonics(n_degree, p)) {
            *slot += scale * y;
        }
    }
    Ok(blocks_from_flat(n_degree, &flat))
}

/// Quadrature weights reproducing `integral of the least-squares fit` as a
/// linear functional of the samples: `sum_k w_k f(x_k) = c_{0,0}(fit)`.
///
/// On a tight frame (`kappa = 1`) the weights coincide with `tau`.
pub fn ls_quadrature<T: Real>(fam: &PointFamily<T>, n_degree: usize) -> Result<QuadratureRule<T>> {
    let wqr = weighted_qr(fam, n_degree)?;
    // The functional row is e_0^T R^{-1} Q^T sqrt(W); transpose the solve.
    let mut e0 = DVector::<T>::zeros(wqr.cols);
    e0[0] = T::one();
    let y = wqr
        .qr
        .r()
        .transpose()
        .solve_lower_triangular(&e0)
        .ok_or(Error::SingularGram)?;
    let q = wqr.qr.q();
    let qy = q * y;
    let weights: Vec<T> = qy
        .iter()
        .zip(&fam.tau)
        .map(|(&v, &w)| v * w.sqrt())
        .collect();
    Ok(QuadratureRule {
        nodes: fam.nodes.clone(),
        tau: fam.tau.clone(),
        weights,
        exactness_claim: n_degree,
    })
}

/// Exact `L_2` distance between a coefficient-represented function and a
/// fitted polynomial, computed coefficient-wise.
pub fn approx_error_l2<T: Real>(f: &HarmonicCoefficients<T>, fit: &LsFit<T>) -> T {
    let l_max = f.l_max().max(fit.coeffs.l_max());
    let mut acc = T::zero();
    for l in 0..=l_max {
        for k in 0..=2 * l {
            let diff = f.coeff(l, k) - fit.coeffs.coeff(l, k);
            acc += diff * diff;
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_sampling::{jittered_family, product_rule, synthesize};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_poly(n: usize, rng: &mut ChaCha8Rng) -> HarmonicCoefficients<f64> {
        let mut f = HarmonicCoefficients::zero(n);
        for l in 0..=n {
            for k in 0..=2 * l {
                f.set(l, k, rng.gen::<f64>() * 2.0 - 1.0);
            }
        }
        f
    }

    #[test]
    fn fit_reproduces_polynomials_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 6, 11] {
            for fam in [product_rule::<f64>(n), jittered_family(n, 0.05 / n as f64, 3).unwrap()] {
                let p = random_poly(n, &mut rng);
                let samples = synthesize(&p, &fam.nodes);
                let fit = ls_fit(&fam, n, &samples).unwrap();
                assert!(approx_error_l2(&p, &fit) <= 1e-10, "N = {n} on {:?}", fam.kind);
                let scale: f64 = samples.iter().map(|s| s * s).sum();
                assert!(fit.residual_discrete <= 1e-18 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn constant_samples_give_constant_fit() {
        let fam = product_rule::<f64>(5);
        let fit = ls_fit(&fam, 5, &vec![1.0; fam.len()]).unwrap();
        assert_abs_diff_eq!(fit.coeffs.coeff(0, 0), 1.0, epsilon = 1e-12);
        for l in 1..=5usize {
            for k in 0..=2 * l {
                assert_abs_diff_eq!(fit.coeffs.coeff(l, k), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fit_matches_hyperinterpolation_on_tight_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in [3usize, 8] {
            let fam = product_rule::<f64>(n);
            let f = random_poly(n + 4, &mut rng);
            let samples = synthesize(&f, &fam.nodes);
            let fit = ls_fit(&fam, n, &samples).unwrap();
            let hyper = hyperinterpolation(&fam, n, &samples).unwrap();
            for l in 0..=n {
                for k in 0..=2 * l {
                    assert!(
                        (fit.coeffs.coeff(l, k) - hyper.coeff(l, k)).abs() <= 1e-10,
                        "N = {n}, l = {l}, k = {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn hyperinterpolation_recovers_single_harmonic() {
        let fam = product_rule::<f64>(4);
        let y21 = HarmonicCoefficients::<f64>::basis(2, 1);
        let samples = synthesize(&y21, &fam.nodes);
        let hyper = hyperinterpolation(&fam, 4, &samples).unwrap();
        for l in 0..=4usize {
            for k in 0..=2 * l {
                let expect = if (l, k) == (2, 3) { 1.0 } else { 0.0 };
                assert!(
                    (hyper.coeff(l, k) - expect).abs() <= 1e-11,
                    "l = {l}, k = {k}: {}",
                    hyper.coeff(l, k)
                );
            }
        }
    }

    #[test]
    fn zero_samples_give_zero_coefficients() {
        let fam = product_rule::<f64>(3);
        let hyper = hyperinterpolation(&fam, 3, &vec![0.0; fam.len()]).unwrap();
        assert_eq!(hyper.l2_norm_sq(), 0.0);
    }

    #[test]
    fn quadrature_weights_equal_tau_on_tight_frames() {
        for n in [0usize, 4, 9] {
            let fam = product_rule::<f64>(n);
            let rule = ls_quadrature(&fam, n).unwrap();
            for (w, t) in rule.weights.iter().zip(&fam.tau) {
                assert_abs_diff_eq!(w, t, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_weights_sum_to_one() {
        let fam = jittered_family::<f64>(6, 0.01, 2).unwrap();
        let rule = ls_quadrature(&fam, 6).unwrap();
        assert_abs_diff_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn quadrature_integrates_polynomials_on_jittered_family() {
        let fam = jittered_family::<f64>(8, 0.0125, 7).unwrap();
        let rule = ls_quadrature(&fam, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let p = random_poly(8, &mut rng);
            let samples = synthesize(&p, &fam.nodes);
            // The exact integral is the constant coefficient.
            assert!(
                (rule.apply(&samples) - p.coeff(0, 0)).abs() <= 1e-9,
                "quadrature misses the exact integral"
            );
        }
    }

    #[test]
    fn quadrature_agrees_with_fit_integral() {
        let fam = jittered_family::<f64>(5, 0.02, 4).unwrap();
        let rule = ls_quadrature(&fam, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_poly(9, &mut rng);
        let samples = synthesize(&f, &fam.nodes);
        let fit = ls_fit(&fam, 5, &samples).unwrap();
        assert_abs_diff_eq!(rule.apply(&samples), fit.coeffs.coeff(0, 0), epsilon = 1e-11);
    }

    #[test]
    fn unfittable_mass_dominates_error() {
        let n = 4;
        let fam = product_rule::<f64>(n);
        let f = HarmonicCoefficients::<f64>::basis(n + 3, 1);
        let samples = synthesize(&f, &fam.nodes);
        let fit = ls_fit(&fam, n, &samples).unwrap();
        assert!(approx_error_l2(&f, &fit) >= 1.0 - 1e-12);
    }

    #[test]
    fn best_approximation_in_discrete_norm() {
        let fam = jittered_family::<f64>(5, 0.03, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = random_poly(9, &mut rng);
        let samples = synthesize(&f, &fam.nodes);
        let fit = ls_fit(&fam, 5, &samples).unwrap();
        for _ in 0..5 {
            let p = random_poly(5, &mut rng);
            let p_samples = synthesize(&p, &fam.nodes);
            let dist: f64 = samples
                .iter()
                .zip(&p_samples)
                .zip(&fam.tau)
                .map(|((&s, &ps), &w)| w * (s - ps) * (s - ps))
                .sum();
            assert!(fit.residual_discrete <= dist * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn quadrature_error_dominated_by_l2_error() {
        let fam = jittered_family::<f64>(6, 0.02, 12).unwrap();
        let rule = ls_quadrature(&fam, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let f = random_poly(10, &mut rng);
            let samples = synthesize(&f, &fam.nodes);
            let fit = ls_fit(&fam, 6, &samples).unwrap();
            let quad_err = (f.coeff(0, 0) - rule.apply(&samples)).abs();
            assert!(quad_err <= approx_error_l2(&f, &fit) + 1e-9);
        }
    }

    #[test]
    fn fitting_is_linear() {
        let fam = jittered_family::<f64>(4, 0.02, 13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = random_poly(7, &mut rng);
        let g = random_poly(7, &mut rng);
        let sf = synthesize(&f, &fam.nodes);
        let sg = synthesize(&g, &fam.nodes);
        let (a, b) = (1.7, -0.4);
        let combined: Vec<f64> = sf.iter().zip(&sg).map(|(&x, &y)| a * x + b * y).collect();
        let fit_f = ls_fit(&fam, 4, &sf).unwrap();
        let fit_g = ls_fit(&fam, 4, &sg).unwrap();
        let fit_c = ls_fit(&fam, 4, &combined).unwrap();
        for l in 0..=4usize {
            for k in 0..=2 * l {
                let expect = a * fit_f.coeffs.coeff(l, k) + b * fit_g.coeffs.coeff(l, k);
                assert!((fit_c.coeffs.coeff(l, k) - expect).abs() <= 1e-11);
            }
        }
    }

    #[test]
    fn fit_norm_controlled_by_lower_frame_bound() {
        let fam = jittered_family::<f64>(5, 0.04, 14).unwrap();
        let a = fam.measured.unwrap().a;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let f = random_poly(9, &mut rng);
            let samples = synthesize(&f, &fam.nodes);
            let fit = ls_fit(&fam, 5, &samples).unwrap();
            let discrete_norm: f64 = samples
                .iter()
                .zip(&fam.tau)
                .map(|(&s, &w)| w * s * s)
                .sum::<f64>()
                .sqrt();
            assert!(fit.coeffs.l2_norm() <= discrete_norm / a.sqrt() + 1e-9);
        }
    }

    #[test]
    fn sample_count_mismatch_is_rejected() {
        let fam = product_rule::<f64>(2);
        assert!(matches!(
            ls_fit(&fam, 2, &[1.0, 2.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rank_deficient_fit_is_rejected() {
        let fam = product_rule::<f64>(1);
        // Degree 4 needs 25 columns; the 8-node family cannot provide them.
        let samples = vec![0.5; fam.len()];
        assert!(matches!(
            ls_fit(&fam, 4, &samples),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn quadrature_csv_has_weight_column() {
        let fam = product_rule::<f64>(1);
        let rule = ls_quadrature(&fam, 1).unwrap();
        let text = rule.to_csv();
        assert!(text.starts_with(SCHEMA_HEADER));
        assert!(text.contains("x,y,z,tau,w"));
        assert_eq!(text.lines().count(), 3 + fam.len());
    }
}
