//! Normalized Gegenbauer polynomials, Gauss quadrature for the projected
//! sphere weight, squared norms, triple-product coefficients, and the induced
//! convolution of coefficient sequences.
//!
//! Everything here lives on `[-1, 1]` with the normalized weight
//! `w0(t) = c0 (1 - t^2)^{(d-2)/2}`, the pushforward of the normalized
//! surface measure of `S^d` under `x -> x · e`. The polynomials `G_l` are
//! the Gegenbauer (ultraspherical) polynomials of index `(d-1)/2` scaled so
//! that `G_l(1) = 1`; they are orthogonal for `w0` and satisfy
//!
//! ```text
//! G_{l+1}(t) = ((2l + d - 1) t G_l(t) - l G_{l-1}(t)) / (l + d - 1).
//! ```

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic_model::dim_harmonic;
use crate::{r, ru, Real};

/// Largest degree cutoff a dense triple-product table may be built for.
pub const MAX_TABLE_DEGREE: usize = 128;

/// Slack allowed on `|t| <= 1` before a domain error; dot products of unit
/// vectors overshoot the interval by a few ulps.
const T_DOMAIN_SLACK: f64 = 1e-12;

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Domain(format!("sphere dimension d = {d} must be >= 2")));
    }
    Ok(())
}

fn clamp_t<T: Real>(t: T) -> Result<T> {
    let one = T::one();
    if t.abs() > one + r(T_DOMAIN_SLACK) {
        return Err(Error::Domain(format!("argument t = {t} outside [-1, 1]")));
    }
    Ok(t.clamp(-one, one))
}

/// Evaluates the normalized Gegenbauer polynomial `G_l` for `S^d` at `t`.
///
/// `G_l(1) = 1` and `|G_l(t)| <= 1` on the interval.
pub fn gegenbauer_eval<T: Real>(d: usize, l: usize, t: T) -> Result<T> {
    check_dim(d)?;
    let t = clamp_t(t)?;
    if l == 0 {
        return Ok(T::one());
    }
    let mut prev = T::one();
    let mut cur = t;
    for n in 1..l {
        let nf: T = ru(n as u64);
        let df: T = ru(d as u64);
        let two = r::<T>(2.0);
        let next = ((two * nf + df - T::one()) * t * cur - nf * prev) / (nf + df - T::one());
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Evaluates `G_0(t), ..., G_{l_max}(t)` in one recurrence pass.
pub fn gegenbauer_all<T: Real>(d: usize, l_max: usize, t: T) -> Result<Vec<T>> {
    check_dim(d)?;
    let t = clamp_t(t)?;
    let mut out = Vec::with_capacity(l_max + 1);
    out.push(T::one());
    if l_max == 0 {
        return Ok(out);
    }
    out.push(t);
    for n in 1..l_max {
        let nf: T = ru(n as u64);
        let df: T = ru(d as u64);
        let next =
            ((r::<T>(2.0) * nf + df - T::one()) * t * out[n] - nf * out[n - 1]) / (nf + df - T::one());
        out.push(next);
    }
    Ok(out)
}

/// Evaluates `sum_l coeffs[l] * G_l(t)` in a single recurrence pass.
pub fn gegenbauer_series<T: Real>(d: usize, coeffs: &[T], t: T) -> Result<T> {
    check_dim(d)?;
    let t = clamp_t(t)?;
    let mut acc = T::zero();
    if coeffs.is_empty() {
        return Ok(acc);
    }
    let mut prev = T::one();
    acc += coeffs[0];
    if coeffs.len() == 1 {
        return Ok(acc);
    }
    let mut cur = t;
    acc += coeffs[1] * cur;
    let df: T = ru(d as u64);
    for n in 1..coeffs.len() - 1 {
        let nf: T = ru(n as u64);
        let next = ((r::<T>(2.0) * nf + df - T::one()) * t * cur - nf * prev) / (nf + df - T::one());
        prev = cur;
        cur = next;
        acc += coeffs[n + 1] * cur;
    }
    Ok(acc)
}

/// Squared norm `<G_l^2> = 1 / N(d, l)` of the normalized Gegenbauer
/// polynomial under the normalized weight; strictly decreasing in `l`.
pub fn norm_sq<T: Real>(d: usize, l: usize) -> T {
    T::one() / ru::<T>(dim_harmonic(d, l))
}

/// A Gauss rule for the normalized weight `w0(t) = c0 (1 - t^2)^{(d-2)/2}`.
///
/// Exact on polynomials of degree `<= 2n - 1`; the weights are positive and
/// sum to 1 because the weight itself is normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussRule1D<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// Sphere dimension the weight belongs to.
    pub d: usize,
    /// Node count.
    pub n: usize,
}

impl<T: Real> GaussRule1D<T> {
    /// Applies the rule: `sum_i w_i f(t_i)`, approximating `<f>`.
    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// Builds the `n`-node Gauss rule for the weight of `S^d` by the
/// symmetric-(tri)diagonal eigenvalue method on the Jacobi recurrence.
///
/// The monic orthogonal polynomials for the symmetric Jacobi weight with
/// exponent `(d-2)/2` have zero recurrence centers and
/// `b_k = k (k + d - 2) / ((2k + d - 3)(2k + d - 1))`; nodes are the
/// eigenvalues of the tridiagonal matrix with off-diagonal `sqrt(b_k)` and
/// weights the squared first eigenvector components.
pub fn gauss_rule<T: Real>(d: usize, n: usize) -> Result<GaussRule1D<T>> {
    check_dim(d)?;
    if n == 0 {
        return Err(Error::Domain("Gauss rule needs at least one node".into()));
    }
    if n == 1 {
        return Ok(GaussRule1D {
            nodes: vec![T::zero()],
            weights: vec![T::one()],
            d,
            n,
        });
    }
    let mut jacobi = DMatrix::<T>::zeros(n, n);
    for k in 1..n {
        let kf: T = ru(k as u64);
        let df: T = ru(d as u64);
        let two = r::<T>(2.0);
        let b = kf * (kf + df - two) / ((two * kf + df - r(3.0)) * (two * kf + df - T::one()));
        let off = b.sqrt();
        jacobi[(k, k - 1)] = off;
        jacobi[(k - 1, k)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(T, T)> = (0..n)
        .map(|i| {
            let first = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("eigenvalues are finite"));
    // Symmetrize: the spectrum of the zero-diagonal matrix is exactly
    // symmetric, so fold +/- pairs onto their common magnitude.
    let (nodes, weights): (Vec<T>, Vec<T>) = pairs.into_iter().unzip();
    let mut nodes = nodes;
    let half = T::one() / r::<T>(2.0);
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let mag = (nodes[j] - nodes[i]) * half;
        nodes[i] = -mag;
        nodes[j] = mag;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
    Ok(GaussRule1D { nodes, weights, d, n })
}

/// Coefficient sequence in `l_1`, stored truncated; nonnegative when used as
/// kernel coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence<T> {
    pub values: Vec<T>,
}

impl<T: Real> Sequence<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    /// The Kronecker delta at index `k`.
    pub fn delta(k: usize) -> Self {
        let mut values = vec![T::zero(); k + 1];
        values[k] = T::one();
        Self { values }
    }

    pub fn zero() -> Self {
        Self { values: vec![] }
    }

    pub fn l1_norm(&self) -> T {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// Index of the last nonzero entry, or `None` for the zero sequence.
    pub fn support_max(&self) -> Option<usize> {
        self.values.iter().rposition(|v| *v != T::zero())
    }

    pub fn get(&self, k: usize) -> T {
        self.values.get(k).copied().unwrap_or_else(T::zero)
    }

    fn check_nonnegative(&self) -> Result<()> {
        if self.values.iter().any(|v| *v < T::zero()) {
            return Err(Error::Domain("sequence has negative entries".into()));
        }
        Ok(())
    }
}

/// Dense table of triple-product coefficients
/// `C_k^{l,s} = <G_l G_s G_k> / h_k^2` for `l, s <= L`, `k <= 2L`.
#[derive(Debug, Clone)]
pub struct TripleProductTable<T> {
    pub d: usize,
    pub l_max: usize,
    /// Row-major over `(l, s, k)` with `k` fastest.
    entries: Vec<T>,
    /// `h_k^2` for `k <= 2L`.
    pub norms: Vec<T>,
}

impl<T: Real> TripleProductTable<T> {
    /// Builds the table with a Gauss rule of `2L + 1` nodes, which integrates
    /// the degree-`4L` products exactly.
    pub fn build(d: usize, l_max: usize) -> Result<Self> {
        check_dim(d)?;
        if l_max > MAX_TABLE_DEGREE {
            return Err(Error::Resource {
                requested: l_max,
                cap: MAX_TABLE_DEGREE,
            });
        }
        let k_max = 2 * l_max;
        let rule: GaussRule1D<T> = gauss_rule(d, k_max + 1)?;
        // poly[i][l] = G_l(t_i)
        let poly: Vec<Vec<T>> = rule
            .nodes
            .iter()
            .map(|&t| gegenbauer_all(d, k_max, t))
            .collect::<Result<_>>()?;
        let norms: Vec<T> = (0..=k_max).map(|k| norm_sq(d, k)).collect();
        let width = k_max + 1;
        let mut entries = vec![T::zero(); (l_max + 1) * (l_max + 1) * width];
        let mut pair = vec![T::zero(); rule.n];
        for l in 0..=l_max {
            for s in l..=l_max {
                for (i, p) in pair.iter_mut().enumerate() {
                    *p = rule.weights[i] * poly[i][l] * poly[i][s];
                }
                for k in 0..=k_max {
                    let mut acc = T::zero();
                    for (i, p) in pair.iter().enumerate() {
                        acc += *p * poly[i][k];
                    }
                    let c = acc / norms[k];
                    entries[(l * (l_max + 1) + s) * width + k] = c;
                    entries[(s * (l_max + 1) + l) * width + k] = c;
                }
            }
        }
        Ok(Self {
            d,
            l_max,
            entries,
            norms,
        })
    }

    /// The coefficient `C_k^{l,s}`; zero outside the stored range.
    pub fn c(&self, l: usize, s: usize, k: usize) -> T {
        if l > self.l_max || s > self.l_max || k > 2 * self.l_max {
            return T::zero();
        }
        self.entries[(l * (self.l_max + 1) + s) * (2 * self.l_max + 1) + k]
    }
}

/// Formal convolution `(mu * nu)_k = sum_{l,s} C_k^{l,s} mu_l nu_s`.
///
/// Preserves nonnegativity, and `||mu * nu||_1 = ||mu||_1 ||nu||_1` because
/// each row of coefficients sums to one.
pub fn convolve<T: Real>(
    mu: &Sequence<T>,
    nu: &Sequence<T>,
    table: &TripleProductTable<T>,
) -> Result<Sequence<T>> {
    mu.check_nonnegative()?;
    nu.check_nonnegative()?;
    let sup_mu = mu.support_max();
    let sup_nu = nu.support_max();
    for sup in [sup_mu, sup_nu].into_iter().flatten() {
        if sup > table.l_max {
            return Err(Error::Domain(format!(
                "sequence support {sup} exceeds table cutoff {}",
                table.l_max
            )));
        }
    }
    let mut out = vec![T::zero(); 2 * table.l_max + 1];
    let (Some(sup_mu), Some(sup_nu)) = (sup_mu, sup_nu) else {
        return Ok(Sequence::new(out));
    };
    for l in 0..=sup_mu {
        let ml = mu.values[l];
        if ml == T::zero() {
            continue;
        }
        for s in 0..=sup_nu {
            let ns = nu.values[s];
            if ns == T::zero() {
                continue;
            }
            let prod = ml * ns;
            for (k, slot) in out.iter_mut().enumerate().take(l + s + 1).skip(l.abs_diff(s)) {
                *slot += table.c(l, s, k) * prod;
            }
        }
    }
    Ok(Sequence::new(out))
}

/// Low-order coefficients `(mu * mu)_k`, `k <= k_max`, for a long nonnegative
/// sequence, without building a dense table.
///
/// Uses `C_k^{l,s} h_k^2 = C_s^{l,k} h_s^2` and propagates the expansion of
/// `G_l G_k` over `s in [|l-k|, l+k]` upward in `k` by the three-term
/// recurrence, so the cost is `O(len(mu) * k_max^2)`.
pub fn convolve_square_prefix<T: Real>(d: usize, mu: &[T], k_max: usize) -> Result<Vec<T>> {
    check_dim(d)?;
    if mu.iter().any(|v| *v < T::zero()) {
        return Err(Error::Domain("sequence has negative entries".into()));
    }
    let mut out = vec![T::zero(); k_max + 1];
    if mu.is_empty() {
        return Ok(out);
    }
    let df: T = ru(d as u64);
    let two = r::<T>(2.0);
    let h2 = |s: usize| -> T { norm_sq(d, s) };
    let norms_k: Vec<T> = (0..=k_max).map(h2).collect();
    // Expansion windows: cur[j] = C_{lo+j}^{l,k} over s = lo..=l+k_max with
    // lo = max(l - k_max, 0). Entries outside [|l-k|, l+k] stay zero.
    for (l, &ml) in mu.iter().enumerate() {
        if ml == T::zero() {
            continue;
        }
        let lo = l.saturating_sub(k_max);
        let width = l + k_max + 1 - lo;
        let mut prev = vec![T::zero(); width];
        let mut cur = vec![T::zero(); width];
        let mut next = vec![T::zero(); width];
        let mut spread = vec![T::zero(); width];
        // k = 0: G_l G_0 = G_l, contributing mu_l^2 h_l^2 / h_0^2.
        cur[l - lo] = T::one();
        out[0] += ml * ml * h2(l) / norms_k[0];
        for k in 0..k_max {
            // spread = t * (G_l G_k) expanded over s.
            for v in spread.iter_mut() {
                *v = T::zero();
            }
            for j in 0..width {
                let c = cur[j];
                if c == T::zero() {
                    continue;
                }
                let s = lo + j;
                let sf: T = ru(s as u64);
                let denom = two * sf + df - T::one();
                if s > 0 && j > 0 {
                    spread[j - 1] += c * sf / denom;
                }
                if j + 1 < width {
                    spread[j + 1] += c * (sf + df - T::one()) / denom;
                }
            }
            let kf: T = ru(k as u64);
            let scale = T::one() / (kf + df - T::one());
            for j in 0..width {
                next[j] = ((two * kf + df - T::one()) * spread[j] - kf * prev[j]) * scale;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
            // cur now holds the expansion of G_l G_{k+1}.
            let k1 = k + 1;
            let from = l.abs_diff(k1).max(lo) - lo;
            let to = l + k1 - lo;
            let mut acc = T::zero();
            for j in from..=to {
                let c = cur[j];
                let s = lo + j;
                if c != T::zero() && s < mu.len() {
                    acc += c * h2(s) * mu[s];
                }
            }
            out[k1] += ml * acc / norms_k[k1];
        }
    }
    Ok(out)
}
