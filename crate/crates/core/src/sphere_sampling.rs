//! Point families on `S^2`: real spherical harmonics, positive product
//! quadrature exact to degree `2N + 1`, jittered variants, and measurement of
//! Marcinkiewicz–Zygmund constants.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harmonic_model::{dim_poly, HarmonicCoefficients};
use crate::special_fn::gauss_rule;
use crate::{r, ru, Real};

/// Version stamp carried by every emitted file.
pub const SCHEMA_HEADER: &str = "# sphere-quad v1";

/// A unit vector in `R^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint<T>(pub [T; 3]);

impl<T: Real> SpherePoint<T> {
    /// Wraps a vector, requiring unit norm up to a loose parse tolerance and
    /// renormalizing the remainder.
    pub fn new(coords: [T; 3]) -> Result<Self> {
        let norm = (coords[0] * coords[0] + coords[1] * coords[1] + coords[2] * coords[2]).sqrt();
        if (norm - T::one()).abs() > r(1e-6) {
            return Err(Error::Domain(format!(
                "point has norm {norm}, expected a unit vector"
            )));
        }
        Ok(Self([coords[0] / norm, coords[1] / norm, coords[2] / norm]))
    }

    pub fn dot(&self, other: &Self) -> T {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn from_polar(cos_theta: T, phi: T) -> Self {
        let sin_theta = (T::one() - cos_theta * cos_theta).max(T::zero()).sqrt();
        Self([sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta])
    }
}

/// How a point family was constructed.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    Product,
    Jittered { eps: f64, seed: u64 },
    Custom(String),
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Product => write!(f, "product"),
            FamilyKind::Jittered { eps, seed } => write!(f, "jittered eps={eps} seed={seed}"),
            FamilyKind::Custom(name) => write!(f, "custom {name}"),
        }
    }
}

/// Measured Marcinkiewicz–Zygmund frame constants of a layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MzConstants<T> {
    /// Lower frame bound (0 when rank deficient).
    pub a: T,
    /// Upper frame bound.
    pub b: T,
    /// Global condition number `b / a` (infinite when `a = 0`).
    pub kappa: T,
}

/// One layer of a sampling family: nodes, positive weights, and the degree
/// parameter the layer is meant to discretize.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFamily<T> {
    /// Degree parameter `N`.
    pub degree: usize,
    pub nodes: Vec<SpherePoint<T>>,
    pub tau: Vec<T>,
    pub kind: FamilyKind,
    pub measured: Option<MzConstants<T>>,
}

impl<T: Real> PointFamily<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Evaluates all real spherical harmonics `Y_{l, m}`, `l <= l_max`, at `p`,
/// flattened in block order with `m = k - l` inside block `l`.
///
/// The harmonics are orthonormal for the NORMALIZED surface measure, so
/// `Y_{0,0} = 1` and `sum_m Y_{l,m}(x) Y_{l,m}(y) = N(2,l) G_l(x . y)`.
pub fn real_sph_harmonics<T: Real>(l_max: usize, p: &SpherePoint<T>) -> Vec<T> {
    let t = p.0[2].clamp(-T::one(), T::one());
    let sin_theta = (T::one() - t * t).max(T::zero()).sqrt();
    let phi = p.0[1].atan2(p.0[0]);

    // plm[l][m] = normalized associated Legendre value with
    // (1/2) int plm^2 dt = 1.
    let mut plm: Vec<Vec<T>> = (0..=l_max).map(|l| vec![T::zero(); l + 1]).collect();
    plm[0][0] = T::one();
    let two = r::<T>(2.0);
    for m in 1..=l_max {
        let mf: T = ru(m as u64);
        plm[m][m] = ((two * mf + T::one()) / (two * mf)).sqrt() * sin_theta * plm[m - 1][m - 1];
    }
    for m in 0..l_max {
        let mf: T = ru(m as u64);
        plm[m + 1][m] = (two * mf + r(3.0)).sqrt() * t * plm[m][m];
    }
    for m in 0..=l_max {
        for l in m + 2..=l_max {
            let lf: T = ru(l as u64);
            let mf: T = ru(m as u64);
            let four = r::<T>(4.0);
            let a = ((four * lf * lf - T::one()) / (lf * lf - mf * mf)).sqrt();
            let b = (((two * lf + T::one()) * (lf - T::one() + mf) * (lf - T::one() - mf))
                / ((two * lf - r(3.0)) * (lf * lf - mf * mf)))
                .sqrt();
            plm[l][m] = a * t * plm[l - 1][m] - b * plm[l - 2][m];
        }
    }

    let sqrt2 = two.sqrt();
    let mut cos_m = Vec::with_capacity(l_max + 1);
    let mut sin_m = Vec::with_capacity(l_max + 1);
    for m in 0..=l_max {
        let mphi = ru::<T>(m as u64) * phi;
        cos_m.push(mphi.cos());
        sin_m.push(mphi.sin());
    }

    let mut out = vec![T::zero(); (l_max + 1) * (l_max + 1)];
    for l in 0..=l_max {
        let base = l * l;
        out[base + l] = plm[l][0];
        for m in 1..=l {
            let v = sqrt2 * plm[l][m];
            out[base + l + m] = v * cos_m[m];
            out[base + l - m] = v * sin_m[m];
        }
    }
    out
}

/// Evaluates a coefficient-represented function at each node.
pub fn synthesize<T: Real>(f: &HarmonicCoefficients<T>, nodes: &[SpherePoint<T>]) -> Vec<T> {
    let flat = f.flat();
    nodes
        .iter()
        .map(|p| {
            let basis = real_sph_harmonics(f.l_max(), p);
            basis.iter().zip(&flat).map(|(&y, &c)| y * c).sum()
        })
        .collect()
}

/// Gauss–Legendre polar nodes crossed with `2N + 2` equispaced azimuths: a
/// positive rule with `(N + 1)(2N + 2)` nodes, total weight 1, exact on all
/// spherical polynomials of degree `<= 2N + 1`.
///
/// The even azimuth count buys one extra exactness degree and antipodal
/// symmetry over the minimal `2N + 1`.
pub fn product_rule<T: Real>(n_degree: usize) -> PointFamily<T> {
    let polar = gauss_rule::<T>(2, n_degree + 1).expect("valid Gauss rule parameters");
    let m_azi = 2 * n_degree + 2;
    let mut nodes = Vec::with_capacity((n_degree + 1) * m_azi);
    let mut tau = Vec::with_capacity((n_degree + 1) * m_azi);
    let azi_weight = T::one() / ru::<T>(m_azi as u64);
    for (&t, &w) in polar.nodes.iter().zip(&polar.weights) {
        for j in 0..m_azi {
            let phi = two_pi::<T>() * ru::<T>(j as u64) / ru::<T>(m_azi as u64);
            nodes.push(SpherePoint::from_polar(t, phi));
            tau.push(w * azi_weight);
        }
    }
    PointFamily {
        degree: n_degree,
        nodes,
        tau,
        kind: FamilyKind::Product,
        // Exactness on degree 2N products makes both frame bounds exactly 1;
        // mz_condition re-derives this in the tests.
        measured: Some(MzConstants {
            a: T::one(),
            b: T::one(),
            kappa: T::one(),
        }),
    }
}

fn two_pi<T: Real>() -> T {
    T::pi() * r(2.0)
}

/// Weighted design matrix of a family at degree `N`: rows are nodes, columns
/// the orthonormal harmonics for `l <= N`, entries `Y_j(x_i) sqrt(tau_i)`.
#[derive(Debug, Clone)]
pub struct DesignMatrix<T: Real> {
    pub degree: usize,
    pub matrix: DMatrix<T>,
}

pub fn design_matrix<T: Real>(fam: &PointFamily<T>, n_degree: usize) -> DesignMatrix<T> {
    let cols = dim_poly(2, n_degree) as usize;
    let rows = fam.len();
    let mut matrix = DMatrix::<T>::zeros(rows, cols);
    for (i, (p, &w)) in fam.nodes.iter().zip(&fam.tau).enumerate() {
        let sw = w.sqrt();
        let basis = real_sph_harmonics(n_degree, p);
        for (j, &y) in basis.iter().enumerate() {
            matrix[(i, j)] = y * sw;
        }
    }
    DesignMatrix {
        degree: n_degree,
        matrix,
    }
}

/// Measures the Marcinkiewicz–Zygmund constants of a family at degree `N`:
/// the extreme eigenvalues of the weighted Gram matrix of the harmonics at
/// the nodes. Reports `a = 0` (infinite condition number) when the family
/// cannot discretize degree `N`.
pub fn mz_condition<T: Real>(fam: &PointFamily<T>, n_degree: usize) -> MzConstants<T> {
    let design = design_matrix(fam, n_degree);
    let gram = design.matrix.tr_mul(&design.matrix);
    let eigen = gram.symmetric_eigenvalues();
    let mut min = T::from_f64(f64::INFINITY).unwrap();
    let mut max = T::zero();
    for &v in eigen.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    let rank_possible = fam.len() >= dim_poly(2, n_degree) as usize;
    let a = if rank_possible { min.max(T::zero()) } else { T::zero() };
    let kappa = if a > T::zero() {
        max / a
    } else {
        T::from_f64(f64::INFINITY).unwrap()
    };
    MzConstants { a, b: max, kappa }
}

/// Perturbs the product-rule nodes by rotations of angular size `<= eps`
/// toward random tangent directions, keeping the weights. The measured frame
/// constants are attached; construction fails if the perturbed family is
/// rank deficient at degree `N`.
///
/// Requests with `eps >= pi/2` are rejected outright: rotations that large
/// can cluster the layer arbitrarily, so no certificate is possible by
/// construction.
pub fn jittered_family<T: Real>(n_degree: usize, eps: f64, seed: u64) -> Result<PointFamily<T>> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&eps) {
        return Err(Error::JitterTooLarge(eps));
    }
    let mut fam = product_rule::<T>(n_degree);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for node in fam.nodes.iter_mut() {
        // Random unit tangent direction at the node.
        let u = loop {
            let v = [
                rng.gen::<f64>() * 2.0 - 1.0,
                rng.gen::<f64>() * 2.0 - 1.0,
                rng.gen::<f64>() * 2.0 - 1.0,
            ];
            let v = [r::<T>(v[0]), r::<T>(v[1]), r::<T>(v[2])];
            let along = v[0] * node.0[0] + v[1] * node.0[1] + v[2] * node.0[2];
            let tang = [
                v[0] - along * node.0[0],
                v[1] - along * node.0[1],
                v[2] - along * node.0[2],
            ];
            let norm = (tang[0] * tang[0] + tang[1] * tang[1] + tang[2] * tang[2]).sqrt();
            if norm > r(1e-6) {
                break [tang[0] / norm, tang[1] / norm, tang[2] / norm];
            }
        };
        let theta = r::<T>(eps * rng.gen::<f64>());
        let (c, s) = (theta.cos(), theta.sin());
        *node = SpherePoint([
            c * node.0[0] + s * u[0],
            c * node.0[1] + s * u[1],
            c * node.0[2] + s * u[2],
        ]);
    }
    fam.kind = FamilyKind::Jittered { eps, seed };
    let constants = mz_condition(&fam, n_degree);
    if !(constants.a > r::<T>(1e-12) * constants.b) {
        return Err(Error::RankDeficient(format!(
            "jittered family at N = {n_degree}, eps = {eps}, seed = {seed}"
        )));
    }
    fam.measured = Some(constants);
    Ok(fam)
}

impl<T: Real> PointFamily<T> {
    /// CSV document: version stamp, family metadata, header, one row per
    /// node with `x, y, z, tau`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(SCHEMA_HEADER);
        out.push('\n');
        out.push_str(&format!(
            "# family kind={} N={} l={}\n",
            self.kind,
            self.degree,
            self.len()
        ));
        out.push_str("x,y,z,tau\n");
        for (p, &w) in self.nodes.iter().zip(&self.tau) {
            out.push_str(&format!("{},{},{},{}\n", p.0[0], p.0[1], p.0[2], w));
        }
        out
    }

    pub fn to_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses the CSV document produced by [`Self::to_csv`]; reports parse
    /// failures with their line number.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut degree: Option<usize> = None;
        let mut kind = FamilyKind::Custom("imported".into());
        let mut nodes = Vec::new();
        let mut tau = Vec::new();
        let mut saw_header = false;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for token in meta.split_whitespace() {
                    if let Some(v) = token.strip_prefix("N=") {
                        degree = Some(v.parse().map_err(|_| Error::Parse {
                            line: lineno,
                            message: format!("bad degree field {v:?}"),
                        })?);
                    } else if let Some(v) = token.strip_prefix("kind=") {
                        if v == "product" {
                            kind = FamilyKind::Product;
                        } else if v == "jittered" {
                            kind = FamilyKind::Custom("jittered".into());
                        }
                    }
                }
                continue;
            }
            if !saw_header {
                if line != "x,y,z,tau" {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("expected header 'x,y,z,tau', found {line:?}"),
                    });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 4 comma-separated fields, found {}", fields.len()),
                });
            }
            let mut vals = [T::zero(); 4];
            for (slot, field) in vals.iter_mut().zip(&fields) {
                let parsed: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad numeric field {field:?}"),
                })?;
                *slot = r(parsed);
            }
            if !(vals[3] > T::zero()) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("weight must be positive, found {}", fields[3]),
                });
            }
            nodes.push(SpherePoint::new([vals[0], vals[1], vals[2]]).map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?);
            tau.push(vals[3]);
        }
        if !saw_header || nodes.is_empty() {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: "no node rows found".into(),
            });
        }
        let degree = degree.ok_or(Error::Parse {
            line: 1,
            message: "missing 'N=' metadata".into(),
        })?;
        Ok(Self {
            degree,
            nodes,
            tau,
            kind,
            measured: None,
        })
    }

    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}
