//! Multiplier sequences, the log-perturbed Sobolev scale, reproducing-kernel
//! evaluation with certified truncation, and norms of coefficient data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::gegenbauer_series;
use crate::{r, ru, Real};

/// Exact binomial coefficient in `u128`.
fn binom(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut res: u128 = 1;
    for i in 1..=k {
        res = res * (n - k + i) as u128 / i as u128;
    }
    res
}

/// Dimension `N(d, l)` of the space of spherical harmonics of degree `l`
/// on `S^d`.
pub fn dim_harmonic(d: usize, l: usize) -> u64 {
    assert!(d >= 2, "sphere dimension must be >= 2");
    if l == 0 {
        return 1;
    }
    let num = binom(l + d - 2, d - 2) * (2 * l + d - 1) as u128;
    (num / (d - 1) as u128) as u64
}

/// Dimension `C(d, m)` of the space of spherical polynomials of degree
/// `<= m` on `S^d`; equals `sum_{l <= m} N(d, l)`.
pub fn dim_poly(d: usize, m: usize) -> u64 {
    assert!(d >= 2, "sphere dimension must be >= 2");
    let num = binom(m + d - 1, d - 1) * (2 * m + d) as u128;
    (num / d as u128) as u64
}

/// Declared decay model `lambda_l ~ l^{-alpha} (ln l)^{-beta}` with measured
/// envelope constants for the induced kernel coefficients
/// `tilde_l ~ C l^{-p} (ln l)^{-q}`, `p = 2 alpha - d + 1`, `q = 2 beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel<T> {
    pub alpha: T,
    pub beta: T,
    /// Power of the kernel-coefficient envelope.
    pub p: T,
    /// Log power of the kernel-coefficient envelope.
    pub q: T,
    /// Measured upper envelope constant.
    pub c_hi: T,
    /// Measured lower envelope constant.
    pub c_lo: T,
    /// First index the envelope was fitted from.
    pub fitted_from: usize,
}

impl<T: Real> TailModel<T> {
    fn measure(d: usize, alpha: T, beta: T, tilde: &[T]) -> Option<Self> {
        let n = tilde.len();
        if n < 16 {
            return None;
        }
        let p = r::<T>(2.0) * alpha - ru::<T>(d as u64) + T::one();
        let q = r::<T>(2.0) * beta;
        let from = (9 * n / 10).max(2);
        let mut c_hi = T::zero();
        let mut c_lo = T::from_f64(f64::INFINITY).unwrap();
        for (l, &v) in tilde.iter().enumerate().skip(from) {
            let lf: T = ru(l as u64);
            let ratio = v * lf.powf(p) * lf.ln().powf(q);
            c_hi = c_hi.max(ratio);
            c_lo = c_lo.min(ratio);
        }
        // Small guard for the envelope still drifting toward its limit.
        let guard = r::<T>(1e-3);
        Some(Self {
            alpha,
            beta,
            p,
            q,
            c_hi: c_hi * (T::one() + guard),
            c_lo: c_lo * (T::one() - guard),
            fitted_from: from,
        })
    }

    fn summable(&self) -> bool {
        self.p > T::one() || (self.p == T::one() && self.q > T::one())
    }

    /// Upper bound on the model integral `int_T^inf x^{-p} (ln x)^{-q} dx`.
    fn integral_upper(&self, t: f64) -> Result<f64> {
        let p = self.q_as_f64(self.p);
        let q = self.q_as_f64(self.q);
        if !self.summable() {
            return Err(Error::TailNotCertifiable(format!(
                "model exponent p = {p} (log power {q}) is not summable"
            )));
        }
        let lt = t.ln();
        if p == 1.0 {
            return Ok(lt.powf(1.0 - q) / (q - 1.0));
        }
        if q >= 0.0 {
            return Ok(lt.powf(-q) * t.powf(1.0 - p) / (p - 1.0));
        }
        // Growing log factor: absorb it into a smaller power.
        let p1 = (1.0 + p) / 2.0;
        let r0 = -q;
        let turn = (r0 / (p - p1)).exp();
        let k = if t >= turn {
            lt.powf(r0) * t.powf(p1 - p)
        } else {
            (r0 / (p - p1)).powf(r0) * (-r0).exp()
        };
        Ok(k * t.powf(1.0 - p1) / (p1 - 1.0))
    }

    /// Lower bound on the model integral from `t`.
    fn integral_lower(&self, t: f64) -> f64 {
        let p = self.q_as_f64(self.p);
        let q = self.q_as_f64(self.q);
        let lt = t.ln();
        if p == 1.0 {
            if q <= 1.0 {
                return f64::INFINITY;
            }
            return lt.powf(1.0 - q) / (q - 1.0);
        }
        if q > 0.0 {
            // Restrict to [t, t^2] where ln x <= 2 ln t.
            let head = (t.powf(1.0 - p) - t.powf(2.0 * (1.0 - p))) / (p - 1.0);
            return (2.0 * lt).powf(-q) * head.max(0.0);
        }
        lt.powf(-q) * t.powf(1.0 - p) / (p - 1.0)
    }

    /// The envelope must be decreasing past `t` for sum/integral comparison.
    fn check_monotone_from(&self, t: f64) -> Result<()> {
        let p = self.q_as_f64(self.p);
        let q = self.q_as_f64(self.q);
        if q < 0.0 && t.ln() * p <= -q {
            return Err(Error::TailNotCertifiable(format!(
                "envelope not yet decreasing at l = {t}; store more coefficients"
            )));
        }
        Ok(())
    }

    fn q_as_f64(&self, v: T) -> f64 {
        v.to_f64().expect("scalar converts to f64")
    }

    /// Certified interval for `sum_{l > t0} tilde_l` using only the model.
    ///
    /// Only valid from the fitted window onward.
    pub fn tail_interval(&self, t0: usize) -> Result<(T, T)> {
        debug_assert!(t0 >= self.fitted_from, "model tail queried before its fitted window");
        let t0 = t0.max(self.fitted_from.max(2)) as f64;
        self.check_monotone_from(t0)?;
        let hi = self.q_as_f64(self.c_hi) * self.integral_upper(t0)?;
        let lo = self.q_as_f64(self.c_lo) * self.integral_lower(t0 + 1.0);
        Ok((r(lo.max(0.0)), r(hi)))
    }
}

/// A multiplier sequence: the pair `(lambda_l, tilde_l = lambda_l^2 N(d, l))`
/// defining a multiplier space and, when summable, its reproducing kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSequence<T> {
    pub d: usize,
    pub label: String,
    lambda: Vec<T>,
    lambda_tilde: Vec<T>,
    pub tail_model: Option<TailModel<T>>,
    /// Whether the declared full sum of `tilde` is finite.
    pub rkhs: bool,
}

/// Requiring a minimum store keeps the measured tail envelope meaningful.
const MIN_SOBOLEV_STORE: usize = 16;

/// Builds the multiplier sequence of the Sobolev space with logarithmic
/// perturbation:
/// `lambda_l = (1 + l(l+d-1))^{-alpha/2} (ln(3 + l(l+d-1)))^{-beta}`.
///
/// The space is a reproducing kernel Hilbert space iff `alpha > d/2`, or
/// `alpha = d/2` and `beta > 1/2`.
pub fn sobolev_sequence<T: Real>(d: usize, alpha: T, beta: T, l_store: usize) -> Result<MultiplierSequence<T>> {
    if d < 2 {
        return Err(Error::Domain(format!("sphere dimension d = {d} must be >= 2")));
    }
    if alpha <= T::zero() {
        return Err(Error::Domain("smoothness alpha must be positive".into()));
    }
    if l_store < MIN_SOBOLEV_STORE {
        return Err(Error::Domain(format!(
            "store at least {MIN_SOBOLEV_STORE} multipliers (requested {l_store})"
        )));
    }
    let half = r::<T>(0.5);
    let mut lambda = Vec::with_capacity(l_store);
    let mut tilde = Vec::with_capacity(l_store);
    for l in 0..l_store {
        let lf: T = ru(l as u64);
        let df: T = ru(d as u64);
        let x = lf * (lf + df - T::one());
        let lam = (T::one() + x).powf(-alpha * half) * (r::<T>(3.0) + x).ln().powf(-beta);
        lambda.push(lam);
        tilde.push(lam * lam * ru::<T>(dim_harmonic(d, l)));
    }
    let d_half = ru::<T>(d as u64) * half;
    let rkhs = alpha > d_half || (alpha == d_half && beta > half);
    let tail_model = TailModel::measure(d, alpha, beta, &tilde);
    Ok(MultiplierSequence {
        d,
        label: format!("H^({},{})(S^{d})", alpha, beta),
        lambda,
        lambda_tilde: tilde,
        tail_model,
        rkhs,
    })
}

impl<T: Real> MultiplierSequence<T> {
    /// Wraps an explicitly stored non-increasing multiplier sequence,
    /// treated as exactly supported on the stored range.
    pub fn from_lambda(d: usize, label: impl Into<String>, lambda: Vec<T>) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("sphere dimension d = {d} must be >= 2")));
        }
        if lambda.is_empty() {
            return Err(Error::Domain("empty multiplier sequence".into()));
        }
        if lambda.iter().any(|v| *v < T::zero()) {
            return Err(Error::Domain("multipliers must be nonnegative".into()));
        }
        if lambda.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Domain("multipliers must be non-increasing".into()));
        }
        let tilde: Vec<T> = lambda
            .iter()
            .enumerate()
            .map(|(l, &lam)| lam * lam * ru::<T>(dim_harmonic(d, l)))
            .collect();
        Ok(Self {
            d,
            label: label.into(),
            lambda,
            lambda_tilde: tilde,
            tail_model: None,
            rkhs: true,
        })
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn lambda_tilde(&self) -> &[T] {
        &self.lambda_tilde
    }

    pub fn lambda_at(&self, l: usize) -> Result<T> {
        self.lambda.get(l).copied().ok_or_else(|| {
            Error::Domain(format!(
                "degree {l} beyond the stored multiplier range {}",
                self.lambda.len()
            ))
        })
    }

    /// `tilde_0 = lambda_0^2`: squared norm of the integration representer.
    pub fn representer_norm_sq(&self) -> T {
        self.lambda_tilde.first().copied().unwrap_or_else(T::zero)
    }

    /// Kernel-side view of the sequence.
    pub fn kernel(&self) -> KernelCoefficients<T> {
        KernelCoefficients::new(self.d, self.lambda_tilde.clone(), self.tail_model)
    }

    /// Certified interval for `sum_{l > t0} tilde_l`.
    pub fn tilde_tail_interval(&self, t0: usize) -> Result<(T, T)> {
        let n = self.lambda_tilde.len();
        if t0 + 1 >= n {
            return match &self.tail_model {
                None => Ok((T::zero(), T::zero())),
                Some(model) => model.tail_interval(t0),
            };
        }
        let stored: T = self
            .lambda_tilde
            .iter()
            .skip(t0 + 1)
            .rev()
            .copied()
            .sum();
        match &self.tail_model {
            None => Ok((stored, stored)),
            Some(model) => {
                let (lo, hi) = model.tail_interval(n - 1)?;
                Ok((stored + lo, stored + hi))
            }
        }
    }

    /// Certified interval for the full sum `||tilde||_1`.
    pub fn l1_tilde_interval(&self) -> Result<(T, T)> {
        let stored: T = self.lambda_tilde.iter().rev().copied().sum();
        match &self.tail_model {
            None => Ok((stored, stored)),
            Some(model) => {
                let (lo, hi) = model.tail_interval(self.lambda_tilde.len() - 1)?;
                Ok((stored + lo, stored + hi))
            }
        }
    }

    /// Certified interval for the even-index sum `sum_{l > m} tilde_{2l}`.
    ///
    /// Requires `tilde` non-increasing (checked on the stored range), so that
    /// the even-index tail brackets half of the full tail.
    pub fn tilde_even_tail_interval(&self, m: usize) -> Result<(T, T)> {
        let n = self.lambda_tilde.len();
        let check_from = self.tail_model.as_ref().map_or(0, |md| md.fitted_from);
        if self.lambda_tilde[check_from..]
            .windows(2)
            .any(|w| w[1] > w[0] + r(1e-15))
        {
            return Err(Error::TailNotCertifiable(
                "kernel coefficients are not non-increasing".into(),
            ));
        }
        let m_stored = (n - 1) / 2;
        let half = r::<T>(0.5);
        let stored: T = (m + 1..=m_stored)
            .rev()
            .map(|l| self.lambda_tilde[2 * l])
            .sum();
        match &self.tail_model {
            None => Ok((stored, stored)),
            Some(_) => {
                // Pairing consecutive terms of the non-increasing sequence
                // brackets the even-index remainder past 2M between halves of
                // full tails: sum_{j >= 2M+2} <= 2 sum_{l > M} tilde_{2l}
                // <= sum_{j >= 2M+1}.
                let m_big = m.max(m_stored);
                let (_, hi_all) = self.tilde_tail_interval(2 * m_big)?;
                let (lo_all, _) = self.tilde_tail_interval(2 * m_big + 1)?;
                Ok((stored + half * lo_all, stored + half * hi_all))
            }
        }
    }
}

/// Kernel coefficients `tilde_l` with optional certified tail model: the
/// reproducing kernel is `K(x, y) = sum_l tilde_l G_l(x . y)`.
#[derive(Debug, Clone)]
pub struct KernelCoefficients<T> {
    pub d: usize,
    tilde: Vec<T>,
    pub tail_model: Option<TailModel<T>>,
    /// `suffix[i] = sum_{l >= i} tilde_l` over the stored range.
    suffix: Vec<T>,
}

/// A single kernel evaluation with its certified truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEvaluation<T> {
    pub value: T,
    pub truncation_degree: usize,
    /// The true kernel value lies within `value +/- tail_bound`.
    pub tail_bound: T,
}

impl<T: Real> KernelCoefficients<T> {
    fn new(d: usize, tilde: Vec<T>, tail_model: Option<TailModel<T>>) -> Self {
        let mut suffix = vec![T::zero(); tilde.len() + 1];
        for i in (0..tilde.len()).rev() {
            suffix[i] = suffix[i + 1] + tilde[i];
        }
        Self {
            d,
            tilde,
            tail_model,
            suffix,
        }
    }

    /// Wraps an explicit nonnegative coefficient sequence, treated as exactly
    /// supported on the stored range.
    pub fn from_tilde(d: usize, tilde: Vec<T>) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("sphere dimension d = {d} must be >= 2")));
        }
        if tilde.iter().any(|v| *v < T::zero()) {
            return Err(Error::Domain("kernel coefficients must be nonnegative".into()));
        }
        Ok(Self::new(d, tilde, None))
    }

    pub fn tilde(&self) -> &[T] {
        &self.tilde
    }

    pub fn tilde_at(&self, l: usize) -> T {
        self.tilde.get(l).copied().unwrap_or_else(T::zero)
    }

    pub fn representer_norm_sq(&self) -> T {
        self.tilde.first().copied().unwrap_or_else(T::zero)
    }

    /// Certified tail beyond the stored range.
    fn beyond_stored(&self) -> Result<T> {
        match &self.tail_model {
            None => Ok(T::zero()),
            Some(model) => {
                let (_, hi) = model.tail_interval(self.tilde.len().saturating_sub(1))?;
                Ok(hi)
            }
        }
    }

    /// Smallest certified tail bound reachable within the stored range.
    pub fn achievable_tail(&self) -> Result<T> {
        self.beyond_stored()
    }

    /// Picks the smallest truncation degree whose certified tail is `<= tol`.
    pub fn truncation_for(&self, tol: T) -> Result<(usize, T)> {
        let beyond = self.beyond_stored()?;
        if beyond > tol {
            return Err(Error::TolUnreachable {
                requested: tol.to_f64().unwrap_or(f64::NAN),
                achievable: beyond.to_f64().unwrap_or(f64::NAN),
                stored: self.tilde.len(),
            });
        }
        // suffix[t + 1] + beyond <= tol, smallest t; suffix is non-increasing.
        let mut lo = 0usize;
        let mut hi = self.tilde.len().saturating_sub(1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.suffix[mid + 1] + beyond <= tol {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok((lo, self.suffix[lo + 1] + beyond))
    }

    /// Kernel value at `t = x . y` truncated at `truncation`, no tail math.
    pub fn eval_truncated(&self, t: T, truncation: usize) -> Result<T> {
        let end = (truncation + 1).min(self.tilde.len());
        gegenbauer_series(self.d, &self.tilde[..end], t)
    }

    /// Certified interval for the full sum `||tilde||_1 = K(x, x)`.
    pub fn l1_interval(&self) -> Result<(T, T)> {
        let stored = self.suffix[0];
        match &self.tail_model {
            None => Ok((stored, stored)),
            Some(model) => {
                let (lo, hi) = model.tail_interval(self.tilde.len().saturating_sub(1))?;
                Ok((stored + lo, stored + hi))
            }
        }
    }
}

/// Evaluates the reproducing kernel at inner-product value `t` with a
/// certified truncation error at most `tol`.
pub fn kernel_eval<T: Real>(seq: &KernelCoefficients<T>, t: T, tol: T) -> Result<KernelEvaluation<T>> {
    let (truncation, tail_bound) = seq.truncation_for(tol)?;
    let value = seq.eval_truncated(t, truncation)?;
    Ok(KernelEvaluation {
        value,
        truncation_degree: truncation,
        tail_bound,
    })
}

/// A function on `S^2` given by real spherical-harmonic coefficients up to a
/// maximum degree; entry `k = 0..=2l` of block `l` is the coefficient of the
/// order `m = k - l` harmonic.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients<T> {
    coeffs: Vec<Vec<T>>,
}

impl<T: Real> HarmonicCoefficients<T> {
    pub fn zero(l_max: usize) -> Self {
        Self {
            coeffs: (0..=l_max).map(|l| vec![T::zero(); 2 * l + 1]).collect(),
        }
    }

    /// The single basis function `Y_{l, m}` (`-l <= m <= l`).
    pub fn basis(l: usize, m: i64) -> Self {
        let mut out = Self::zero(l);
        out.coeffs[l][(m + l as i64) as usize] = T::one();
        out
    }

    pub fn from_blocks(coeffs: Vec<Vec<T>>) -> Result<Self> {
        for (l, block) in coeffs.iter().enumerate() {
            if block.len() != 2 * l + 1 {
                return Err(Error::Domain(format!(
                    "degree-{l} block must have {} entries, found {}",
                    2 * l + 1,
                    block.len()
                )));
            }
        }
        if coeffs.is_empty() {
            return Err(Error::Domain("coefficient data must contain degree 0".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn l_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn blocks(&self) -> &[Vec<T>] {
        &self.coeffs
    }

    pub fn coeff(&self, l: usize, k: usize) -> T {
        self.coeffs
            .get(l)
            .and_then(|b| b.get(k))
            .copied()
            .unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, l: usize, k: usize, value: T) {
        self.coeffs[l][k] = value;
    }

    /// Flattened view in block order.
    pub fn flat(&self) -> Vec<T> {
        self.coeffs.iter().flatten().copied().collect()
    }

    pub fn l2_norm_sq(&self) -> T {
        self.coeffs
            .iter()
            .flatten()
            .map(|&c| c * c)
            .sum()
    }

    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    /// The multiplier-space norm `(sum_l lambda_l^{-2} sum_k c_{l,k}^2)^{1/2}`.
    pub fn sobolev_norm(&self, seq: &MultiplierSequence<T>) -> Result<T> {
        let mut acc = T::zero();
        for (l, block) in self.coeffs.iter().enumerate() {
            let energy: T = block.iter().map(|&c| c * c).sum();
            if energy == T::zero() {
                continue;
            }
            let lam = seq.lambda_at(l)?;
            if lam <= T::zero() {
                return Err(Error::Domain(format!("multiplier vanishes at degree {l}")));
            }
            acc += energy / (lam * lam);
        }
        Ok(acc.sqrt())
    }

    /// The dyadic-block Besov norm
    /// `(sum_j 2^{2 j alpha} j^{2 beta} ||sigma_j||_2^2)^{1/2}` with the first
    /// block collecting degrees `l <= 2` and block `j` the degrees
    /// `2^{j-1} < l <= 2^j`.
    pub fn besov_norm(&self, alpha: T, beta: T) -> T {
        let mut by_block: Vec<T> = Vec::new();
        for (l, block) in self.coeffs.iter().enumerate() {
            let j = if l <= 2 {
                1usize
            } else {
                // smallest j with 2^j >= l
                (usize::BITS - (l - 1).leading_zeros()) as usize
            };
            if by_block.len() < j {
                by_block.resize(j, T::zero());
            }
            by_block[j - 1] += block.iter().map(|&c| c * c).sum::<T>();
        }
        let two = r::<T>(2.0);
        let mut acc = T::zero();
        for (idx, &energy) in by_block.iter().enumerate() {
            if energy == T::zero() {
                continue;
            }
            let j: T = ru((idx + 1) as u64);
            acc += two.powf(two * j * alpha) * j.powf(two * beta) * energy;
        }
        acc.sqrt()
    }

    /// `L_2` distance to the degree-`n` projection:
    /// `(sum_{l > n} sum_k c_{l,k}^2)^{1/2}`.
    pub fn projection_error(&self, n: usize) -> T {
        self.coeffs
            .iter()
            .skip(n + 1)
            .flatten()
            .map(|&c| c * c)
            .sum::<T>()
            .sqrt()
    }
}

/// JSON document shared by multiplier sequences and coefficient data.
#[derive(Debug, Serialize, Deserialize)]
pub struct JsonDoc {
    pub d: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "L")]
    pub l: usize,
    pub values: serde_json::Value,
}

impl<T: Real> MultiplierSequence<T> {
    pub fn to_json(&self) -> Result<String> {
        let doc = JsonDoc {
            d: self.d,
            alpha: self
                .tail_model
                .as_ref()
                .map(|m| m.alpha.to_f64().unwrap()),
            beta: self.tail_model.as_ref().map(|m| m.beta.to_f64().unwrap()),
            l: self.lambda.len() - 1,
            values: serde_json::to_value(
                self.lambda
                    .iter()
                    .map(|v| v.to_f64().unwrap())
                    .collect::<Vec<_>>(),
            )?,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JsonDoc = serde_json::from_str(text)?;
        match (doc.alpha, doc.beta) {
            (Some(a), Some(b)) => sobolev_sequence(doc.d, r(a), r(b), doc.l + 1),
            _ => {
                let values: Vec<f64> = serde_json::from_value(doc.values)?;
                Self::from_lambda(doc.d, "custom", values.into_iter().map(r).collect())
            }
        }
    }
}

impl<T: Real> HarmonicCoefficients<T> {
    pub fn to_json(&self) -> Result<String> {
        let doc = JsonDoc {
            d: 2,
            alpha: None,
            beta: None,
            l: self.l_max(),
            values: serde_json::to_value(
                self.coeffs
                    .iter()
                    .map(|b| b.iter().map(|v| v.to_f64().unwrap()).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            )?,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JsonDoc = serde_json::from_str(text)?;
        let blocks: Vec<Vec<f64>> = serde_json::from_value(doc.values)?;
        Self::from_blocks(
            blocks
                .into_iter()
                .map(|b| b.into_iter().map(r).collect())
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn harmonic_dimensions_match_known_values() {
        assert_eq!(dim_harmonic(2, 0), 1);
        assert_eq!(dim_harmonic(2, 2), 5);
        assert_eq!(dim_harmonic(3, 1), 4);
        for l in 0..50 {
            assert_eq!(dim_harmonic(2, l), 2 * l as u64 + 1);
            assert_eq!(dim_harmonic(3, l), ((l + 1) * (l + 1)) as u64);
        }
    }

    #[test]
    fn polynomial_dimension_sums_harmonic_blocks() {
        assert_eq!(dim_poly(2, 1), 4);
        assert_eq!(dim_poly(2, 2), 9);
        for d in 2..=5 {
            assert_eq!(dim_poly(d, 0), 1);
            for m in 0..30 {
                let sum: u64 = (0..=m).map(|l| dim_harmonic(d, l)).sum();
                assert_eq!(dim_poly(d, m), sum, "d={d} m={m}");
            }
        }
    }

    #[test]
    fn sobolev_multipliers_match_formula() {
        let seq = sobolev_sequence::<f64>(2, 1.0, 0.0, 32).unwrap();
        assert_abs_diff_eq!(seq.lambda()[0], 1.0);
        assert_abs_diff_eq!(seq.lambda()[1], 3f64.powf(-0.5), epsilon = 1e-15);

        let seq = sobolev_sequence::<f64>(2, 1.0, 1.0, 32).unwrap();
        assert_abs_diff_eq!(seq.lambda()[0], 1.0 / 3f64.ln(), epsilon = 1e-15);
        // tilde_1 = 3 * (1/3) * ln(5)^{-2}
        assert_abs_diff_eq!(seq.lambda_tilde()[1], 5f64.ln().powi(-2), epsilon = 1e-15);
        assert!((seq.lambda_tilde()[1] - 0.3861).abs() < 5e-5);

        let seq = sobolev_sequence::<f64>(3, 2.5, -1.0, 32).unwrap();
        for (l, (&lam, &til)) in seq.lambda().iter().zip(seq.lambda_tilde()).enumerate() {
            assert_abs_diff_eq!(til, lam * lam * dim_harmonic(3, l) as f64);
        }
    }

    #[test]
    fn rkhs_flag_follows_smoothness() {
        assert!(sobolev_sequence::<f64>(2, 2.0, -3.0, 32).unwrap().rkhs);
        assert!(sobolev_sequence::<f64>(2, 1.0, 1.0, 32).unwrap().rkhs);
        assert!(sobolev_sequence::<f64>(2, 1.0, 0.75, 32).unwrap().rkhs);
        assert!(!sobolev_sequence::<f64>(2, 1.0, 0.5, 32).unwrap().rkhs);
        assert!(!sobolev_sequence::<f64>(2, 1.0, -1.0, 32).unwrap().rkhs);
        assert!(!sobolev_sequence::<f64>(2, 0.8, 4.0, 32).unwrap().rkhs);
        assert!(sobolev_sequence::<f64>(3, 1.5, 0.6, 32).unwrap().rkhs);
    }

    #[test]
    fn representer_norm_examples() {
        let d0 = MultiplierSequence::from_lambda(2, "delta0", vec![1.0]).unwrap();
        assert_abs_diff_eq!(d0.representer_norm_sq(), 1.0);
        let h10 = sobolev_sequence::<f64>(2, 1.0, 0.0, 32).unwrap();
        assert_abs_diff_eq!(h10.representer_norm_sq(), 1.0);
        let h11 = sobolev_sequence::<f64>(2, 1.0, 1.0, 32).unwrap();
        assert_abs_diff_eq!(h11.representer_norm_sq(), 3f64.ln().powi(-2), epsilon = 1e-15);
        assert!((h11.representer_norm_sq() - 0.8285).abs() < 5e-5);
    }

    #[test]
    fn kernel_eval_of_finite_sequences_is_exact() {
        let seq = KernelCoefficients::from_tilde(2, vec![1.0, 1.0]).unwrap();
        for t in [-1.0, -0.3, 0.0, 0.9, 1.0] {
            let ev = kernel_eval(&seq, t, 1e-14).unwrap();
            assert_abs_diff_eq!(ev.value, 1.0 + t, epsilon = 1e-15);
            assert_eq!(ev.tail_bound, 0.0);
        }
        let constant = KernelCoefficients::from_tilde(2, vec![1.0]).unwrap();
        for t in [-1.0, 0.2, 1.0] {
            assert_abs_diff_eq!(kernel_eval(&constant, t, 1e-14).unwrap().value, 1.0);
        }
    }

    #[test]
    fn kernel_diagonal_approaches_l1_norm() {
        let seq = sobolev_sequence::<f64>(2, 2.0, 0.0, 4000).unwrap();
        let kern = seq.kernel();
        let (lo, hi) = kern.l1_interval().unwrap();
        assert!(lo <= hi);
        let ev = kernel_eval(&kern, 1.0, 1e-7).unwrap();
        assert!(ev.tail_bound <= 1e-7);
        // K(x, x) = ||tilde||_1 within the certified interval width.
        assert!(ev.value <= hi + 1e-12 && ev.value >= lo - ev.tail_bound - 1e-12);
    }

    #[test]
    fn kernel_truncations_are_nested_certified() {
        let seq = sobolev_sequence::<f64>(2, 2.0, 1.0, 4000).unwrap();
        let kern = seq.kernel();
        let t = 0.42;
        let coarse = kernel_eval(&kern, t, 1e-4).unwrap();
        let fine = kernel_eval(&kern, t, 1e-9).unwrap();
        assert!(fine.truncation_degree > coarse.truncation_degree);
        assert!((fine.value - coarse.value).abs() <= coarse.tail_bound);
    }

    #[test]
    fn kernel_tolerance_failure_reports_achievable() {
        // alpha = d/2 tails shrink like 1 / ln: 1e-9 is unreachable.
        let seq = sobolev_sequence::<f64>(2, 1.0, 1.0, 2000).unwrap();
        let err = kernel_eval(&seq.kernel(), 0.5, 1e-9).unwrap_err();
        match err {
            Error::TolUnreachable { achievable, .. } => assert!(achievable > 1e-9),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tail_intervals_bracket_reference_sums() {
        // Compare certified tails of a small store against a much longer
        // direct summation of the same sequence.
        for (alpha, beta) in [(2.0, 0.0), (1.5, 1.0), (1.0, 1.0), (2.0, -1.0)] {
            let seq = sobolev_sequence::<f64>(2, alpha, beta, 20_000).unwrap();
            let long = sobolev_sequence::<f64>(2, alpha, beta, 3_000_000).unwrap();
            let t0 = 19_999;
            let reference: f64 = long.lambda_tilde()[t0 + 1..].iter().rev().sum::<f64>()
                + long.tilde_tail_interval(2_999_999).unwrap().0;
            let (lo, hi) = seq.tilde_tail_interval(t0).unwrap();
            assert!(
                lo <= reference && reference <= hi,
                "alpha={alpha} beta={beta}: {lo} <= {reference} <= {hi} violated"
            );
            assert!(hi / reference.max(1e-300) < 3.0, "upper tail too loose");
        }
    }

    #[test]
    fn even_tail_interval_brackets_direct_sum() {
        let seq = sobolev_sequence::<f64>(2, 1.0, 1.0, 10_000).unwrap();
        let long = sobolev_sequence::<f64>(2, 1.0, 1.0, 4_000_000).unwrap();
        let m = 60;
        let direct: f64 = (m + 1..2_000_000)
            .rev()
            .map(|l| long.lambda_tilde()[2 * l])
            .sum();
        // `direct` misses even-index mass beyond l = 2e6; bracket the true
        // value with the much deeper store's certified remainder.
        let (rem_lo, rem_hi) = long.tilde_even_tail_interval(1_999_999).unwrap();
        let (lo, hi) = seq.tilde_even_tail_interval(m).unwrap();
        assert!(lo <= direct + rem_hi, "{lo} > {direct} + {rem_hi}");
        assert!(hi >= direct + rem_lo, "{hi} < {direct} + {rem_lo}");
        assert!(hi <= 1.5 * lo, "interval too wide: [{lo}, {hi}]");
    }

    #[test]
    fn sobolev_norm_examples() {
        let seq = sobolev_sequence::<f64>(2, 1.0, 0.0, 32).unwrap();
        let y00 = HarmonicCoefficients::<f64>::basis(0, 0);
        assert_abs_diff_eq!(
            y00.sobolev_norm(&seq).unwrap(),
            1.0 / seq.lambda()[0],
            epsilon = 1e-15
        );

        // f = lambda_l Y_{l,k} sits on the unit ball boundary.
        let mut f = HarmonicCoefficients::<f64>::zero(5);
        f.set(5, 3, seq.lambda()[5]);
        assert_abs_diff_eq!(f.sobolev_norm(&seq).unwrap(), 1.0, epsilon = 1e-14);

        // One unit coefficient per degree l <= 3: direct summation gives
        // sum_{l<=3} (1 + l(l+1)) = 1 + 3 + 7 + 13 = 24.
        let mut g = HarmonicCoefficients::<f64>::zero(3);
        for l in 0..=3 {
            g.set(l, 0, 1.0);
        }
        let direct: f64 = (0..=3u64).map(|l| (1 + l * (l + 1)) as f64).sum();
        assert_abs_diff_eq!(direct, 24.0);
        assert_abs_diff_eq!(g.sobolev_norm(&seq).unwrap(), direct.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn sobolev_norm_with_unit_multipliers_is_parseval() {
        let ones = MultiplierSequence::from_lambda(2, "ones", vec![1.0; 20]).unwrap();
        let mut f = HarmonicCoefficients::<f64>::zero(10);
        let mut state = 1u64;
        for l in 0..=10usize {
            for k in 0..=2 * l {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                f.set(l, k, (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
            }
        }
        assert!((f.sobolev_norm(&ones).unwrap() - f.l2_norm()).abs() <= 1e-14);
    }

    #[test]
    fn besov_norm_examples() {
        let y00 = HarmonicCoefficients::<f64>::basis(0, 0);
        for alpha in [0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(y00.besov_norm(alpha, 3.0), 2f64.powf(alpha), epsilon = 1e-14);
        }
        let zero = HarmonicCoefficients::<f64>::zero(6);
        assert_eq!(zero.besov_norm(1.0, 1.0), 0.0);
        // Degree 3 lands in block j = 2.
        let y31 = HarmonicCoefficients::<f64>::basis(3, 1);
        assert_abs_diff_eq!(
            y31.besov_norm(1.0, 1.0),
            (4f64.powf(2.0) * 2f64.powf(2.0)).sqrt(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn projection_error_examples() {
        let mut f = HarmonicCoefficients::<f64>::zero(4);
        f.set(2, 1, 0.7);
        f.set(4, 0, -0.1);
        assert_eq!(f.projection_error(4), 0.0);
        let y51 = HarmonicCoefficients::<f64>::basis(5, 1);
        assert_abs_diff_eq!(y51.projection_error(4), 1.0);
        assert_abs_diff_eq!(y51.projection_error(5), 0.0);
    }

    #[test]
    fn projection_error_bounded_by_multiplier_decay() {
        let seq = sobolev_sequence::<f64>(2, 1.5, 0.5, 64).unwrap();
        let mut f = HarmonicCoefficients::<f64>::zero(30);
        let mut state = 7u64;
        for l in 0..=30usize {
            for k in 0..=2 * l {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(11);
                f.set(l, k, ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * seq.lambda()[l]);
            }
        }
        let norm = f.sobolev_norm(&seq).unwrap();
        for n in 0..=30 {
            assert!(
                f.projection_error(n) <= seq.lambda()[n] * norm + 1e-12,
                "n = {n}"
            );
        }
    }

    #[test]
    fn json_round_trips() {
        let seq = sobolev_sequence::<f64>(2, 1.5, 1.0, 48).unwrap();
        let text = seq.to_json().unwrap();
        let back = MultiplierSequence::<f64>::from_json(&text).unwrap();
        assert_eq!(seq, back);

        let plain = MultiplierSequence::<f64>::from_lambda(3, "custom", vec![1.0, 0.5, 0.25]).unwrap();
        let text = plain.to_json().unwrap();
        let back = MultiplierSequence::<f64>::from_json(&text).unwrap();
        assert_eq!(plain.lambda(), back.lambda());

        let mut f = HarmonicCoefficients::<f64>::zero(3);
        f.set(2, 4, -1.25);
        f.set(0, 0, 0.5);
        let text = f.to_json().unwrap();
        let back = HarmonicCoefficients::<f64>::from_json(&text).unwrap();
        assert_eq!(f, back);
    }
}
