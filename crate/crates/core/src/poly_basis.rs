//! Orthogonal polynomial bases and moment arithmetic.
//!
//! Every basis is defined by its three-term recurrence
//!
//! ```text
//! u * Q_k(u) = alpha_k * Q_{k+1}(u) + beta_k * Q_k(u) + gamma_k * Q_{k-1}(u),   Q_0 = 1
//! ```
//!
//! and nothing else: evaluation, multiplication by the argument and product
//! linearization all go through these coefficients. Monomials never appear.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest basis size accepted anywhere in the crate.
pub const MAX_DEGREE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisFamily {
    Chebyshev,
    Legendre,
    /// Probabilists' Hermite polynomials `He_k`, orthogonal under `exp(-u^2/2)`.
    Hermite,
    Laguerre,
}

/// Coefficients of `u * Q_k = alpha * Q_{k+1} + beta * Q_k + gamma * Q_{k-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recurrence {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BasisFamily {
    pub const ALL: [BasisFamily; 4] = [
        BasisFamily::Chebyshev,
        BasisFamily::Legendre,
        BasisFamily::Hermite,
        BasisFamily::Laguerre,
    ];

    pub fn recurrence(self, k: usize) -> Recurrence {
        let kf = k as f64;
        match self {
            BasisFamily::Chebyshev if k == 0 => Recurrence {
                alpha: 1.0,
                beta: 0.0,
                gamma: 0.0,
            },
            BasisFamily::Chebyshev => Recurrence {
                alpha: 0.5,
                beta: 0.0,
                gamma: 0.5,
            },
            BasisFamily::Legendre => Recurrence {
                alpha: (kf + 1.0) / (2.0 * kf + 1.0),
                beta: 0.0,
                gamma: kf / (2.0 * kf + 1.0),
            },
            BasisFamily::Hermite => Recurrence {
                alpha: 1.0,
                beta: 0.0,
                gamma: kf,
            },
            BasisFamily::Laguerre => Recurrence {
                alpha: -(kf + 1.0),
                beta: 2.0 * kf + 1.0,
                gamma: -kf,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::Chebyshev => "chebyshev",
            BasisFamily::Legendre => "legendre",
            BasisFamily::Hermite => "hermite",
            BasisFamily::Laguerre => "laguerre",
        }
    }

    /// Writes `Q_0(u), ..., Q_{n-1}(u)` into `out` (n = `out.len()`).
    pub fn eval_canonical_into(self, u: f64, out: &mut [f64]) {
        let n = out.len();
        if n == 0 {
            return;
        }
        out[0] = 1.0;
        if n == 1 {
            return;
        }
        let mut prev = 0.0;
        let mut cur = 1.0;
        for k in 0..n - 1 {
            let rc = self.recurrence(k);
            let next = ((u - rc.beta) * cur - rc.gamma * prev) / rc.alpha;
            out[k + 1] = next;
            prev = cur;
            cur = next;
        }
    }

    /// Coefficients of `u * p(u)` where `p = sum_k coeffs[k] * Q_k`.
    pub fn multiply_by_argument(self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let rc = self.recurrence(k);
            out[k + 1] += rc.alpha * c;
            out[k] += rc.beta * c;
            if k > 0 {
                out[k - 1] += rc.gamma * c;
            }
        }
        out
    }

    /// Expansion `Q_q * Q_r = sum_k c[k] * Q_k`, with `c.len() == q + r + 1`.
    pub fn linearize_product(self, q: usize, r: usize) -> Vec<f64> {
        self.products_with(r, q + 1).pop().expect("at least one product")
    }

    /// `[Q_0 * Q_r, Q_1 * Q_r, ..., Q_{count-1} * Q_r]`, each in the basis.
    ///
    /// Runs the recurrence on coefficient vectors:
    /// `Q_{k+1} Q_r = ((u - beta_k) Q_k Q_r - gamma_k Q_{k-1} Q_r) / alpha_k`.
    fn products_with(self, r: usize, count: usize) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
        let mut first = vec![0.0; r + 1];
        first[r] = 1.0;
        out.push(first);
        for k in 0..count.saturating_sub(1) {
            let rc = self.recurrence(k);
            let cur = &out[k];
            let mut next = self.multiply_by_argument(cur);
            for (i, &c) in cur.iter().enumerate() {
                next[i] -= rc.beta * c;
            }
            if k > 0 {
                for (i, &c) in out[k - 1].iter().enumerate() {
                    next[i] -= rc.gamma * c;
                }
            }
            for v in next.iter_mut() {
                *v /= rc.alpha;
            }
            out.push(next);
        }
        out
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "chebyshev" => Ok(BasisFamily::Chebyshev),
            "legendre" => Ok(BasisFamily::Legendre),
            "hermite" => Ok(BasisFamily::Hermite),
            "laguerre" => Ok(BasisFamily::Laguerre),
            other => Err(format!("unknown basis family `{other}`")),
        }
    }
}

/// Affine map from raw coordinate `t` to canonical coordinate `u = scale * t + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainMap {
    scale: f64,
    shift: f64,
}

impl DomainMap {
    pub fn new(scale: f64, shift: f64) -> Result<Self> {
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::InvalidScale(scale));
        }
        if !shift.is_finite() {
            return Err(Error::NonFinite(shift));
        }
        Ok(DomainMap { scale, shift })
    }

    pub const fn identity() -> Self {
        DomainMap {
            scale: 1.0,
            shift: 0.0,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    #[inline]
    pub fn to_canonical(&self, t: f64) -> f64 {
        self.scale * t + self.shift
    }

    #[inline]
    pub fn to_raw(&self, u: f64) -> f64 {
        (u - self.shift) / self.scale
    }
}

/// Fits the domain map of `family` to the observed samples.
///
/// * Chebyshev, Legendre: `[min - p, max + p]` goes to `[-1, 1]`, with
///   `p = 1e-6 * (max - min)`, or `p = 1` when every sample is equal.
/// * Hermite: zero mean, unit (population) standard deviation.
/// * Laguerre: `min` goes to 0, scaled by the mean distance from `min`.
///
/// Degenerate spreads fall back to unit scale.
pub fn domain_map_from_data(samples: &[f64], family: BasisFamily) -> Result<DomainMap> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some(&bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(bad));
    }
    let n = samples.len() as f64;
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match family {
        BasisFamily::Chebyshev | BasisFamily::Legendre => {
            let pad = if max > min { 1e-6 * (max - min) } else { 1.0 };
            let (lo, hi) = (min - pad, max + pad);
            DomainMap::new(2.0 / (hi - lo), -(hi + lo) / (hi - lo))
        }
        BasisFamily::Hermite => {
            let mean = samples.iter().sum::<f64>() / n;
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 {
                DomainMap::new(1.0 / sd, -mean / sd)
            } else {
                DomainMap::new(1.0, -mean)
            }
        }
        BasisFamily::Laguerre => {
            let dev = samples.iter().map(|v| v - min).sum::<f64>() / n;
            if dev > 0.0 {
                DomainMap::new(1.0 / dev, -min / dev)
            } else {
                DomainMap::new(1.0, -min)
            }
        }
    }
}

/// Canonical width the observed range occupies per basis element in the
/// Laguerre maps used by [`BasisSpec::fitted`] and [`weighted_domain_map`].
pub const LAGUERRE_SPREAD: f64 = 3.0;

/// Half-width of the Hermite image, in units of `sqrt(degree)`.
pub const HERMITE_SPREAD: f64 = 2.0;

/// Affine map sending `[lo, hi]` to the interval where the first `degree`
/// elements of an unbounded family oscillate: `[0, 3d]` for Laguerre and
/// `[-2 sqrt(d), 2 sqrt(d)]` for Hermite. Other families get `[-1, 1]`.
fn degree_range_map(family: BasisFamily, lo: f64, hi: f64, degree: usize) -> Result<DomainMap> {
    if !(hi > lo) {
        return DomainMap::new(1.0, -lo);
    }
    let d = degree as f64;
    let (a, b) = match family {
        BasisFamily::Laguerre => (0.0, LAGUERRE_SPREAD * d),
        BasisFamily::Hermite => (-HERMITE_SPREAD * d.sqrt(), HERMITE_SPREAD * d.sqrt()),
        BasisFamily::Chebyshev | BasisFamily::Legendre => (-1.0, 1.0),
    };
    let s = (b - a) / (hi - lo);
    DomainMap::new(s, a - lo * s)
}

/// Domain map fitted to a weighted measure through its weighted mean `m` and
/// standard deviation `s`, treating `[m - sqrt(3) s, m + sqrt(3) s]` as the
/// support (exact for a uniform measure).
///
/// * Chebyshev, Legendre: that interval goes to `[-1, 1]`.
/// * Hermite, Laguerre: that interval goes to the oscillation range of the
///   first `degree` elements, as in [`BasisSpec::fitted`].
///
/// Zero spread gives unit scale. Points with zero weight are ignored.
pub fn weighted_domain_map(
    points: &[f64],
    weights: &[f64],
    family: BasisFamily,
    degree: usize,
) -> Result<DomainMap> {
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch {
            points: points.len(),
            weights: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if points.is_empty() || !(total > 0.0) {
        return Err(Error::EmptySamples);
    }
    if let Some(&bad) = points.iter().chain(weights).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(bad));
    }
    let mean = points.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / total;
    let var = points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * (p - mean).powi(2))
        .sum::<f64>()
        / total;
    let sd = var.sqrt();
    let half = 3f64.sqrt() * sd;
    if !(half > 0.0) {
        return DomainMap::new(1.0, -mean);
    }
    match family {
        BasisFamily::Chebyshev | BasisFamily::Legendre => DomainMap::new(1.0 / half, -mean / half),
        _ => degree_range_map(family, mean - half, mean + half, degree),
    }
}

/// A polynomial family, the number of basis elements `degree` (indices
/// `0..degree`) and the domain map fixing what `Q_k(t)` means for raw `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    family: BasisFamily,
    degree: usize,
    map: DomainMap,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, degree: usize, map: DomainMap) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::InvalidDegree {
                degree,
                max: MAX_DEGREE,
            });
        }
        Ok(BasisSpec {
            family,
            degree,
            map,
        })
    }

    /// Spec with the identity domain map.
    pub fn canonical(family: BasisFamily, degree: usize) -> Result<Self> {
        Self::new(family, degree, DomainMap::identity())
    }

    /// Spec whose domain map is fitted to `samples`.
    ///
    /// Chebyshev and Legendre use [`domain_map_from_data`]. Hermite and
    /// Laguerre send the sample range to where their first `degree` elements
    /// oscillate; the unit-spread maps leave the data in a region where the
    /// high-order elements are nearly collinear, and the Gram loses most of
    /// its digits past `d = 8`.
    pub fn fitted(family: BasisFamily, degree: usize, samples: &[f64]) -> Result<Self> {
        let map = domain_map_from_data(samples, family)?;
        let map = match family {
            BasisFamily::Chebyshev | BasisFamily::Legendre => map,
            BasisFamily::Hermite | BasisFamily::Laguerre => {
                let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                degree_range_map(family, lo, hi, degree)?
            }
        };
        Self::new(family, degree, map)
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn map(&self) -> &DomainMap {
        &self.map
    }

    /// Same family and map, different basis size.
    pub fn with_degree(&self, degree: usize) -> Result<Self> {
        Self::new(self.family, degree, self.map)
    }

    /// `(Q_0(u), ..., Q_{d-1}(u))` at `u = map(t)`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.degree];
        self.eval_into(t, &mut out);
        out
    }

    /// Like [`eval`](Self::eval) but fills a caller-provided buffer of any length.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        self.family
            .eval_canonical_into(self.map.to_canonical(t), out);
    }
}

/// Free-function form of [`BasisSpec::eval`].
pub fn eval_basis(spec: &BasisSpec, t: f64) -> Vec<f64> {
    spec.eval(t)
}

pub fn linearize_product(spec: &BasisSpec, q: usize, r: usize) -> Vec<f64> {
    spec.family.linearize_product(q, r)
}

pub fn multiply_by_argument(spec: &BasisSpec, coeffs: &[f64]) -> Vec<f64> {
    spec.family.multiply_by_argument(coeffs)
}

/// `values[k] = <Q_k>` for `k = 0..=order` under a discrete measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    spec: BasisSpec,
    values: Vec<f64>,
}

impl MomentVector {
    pub fn from_values(spec: BasisSpec, values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "moment vector needs at least <Q_0>");
        MomentVector { spec, values }
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `<Q_0>`, the total mass of the measure.
    pub fn mass(&self) -> f64 {
        self.values[0]
    }
}

/// `values[k] = sum_j w_j Q_k(u_j)` for `k = 0..=order`, in one pass.
pub fn accumulate_moments(
    spec: &BasisSpec,
    points: &[f64],
    weights: Option<&[f64]>,
    order: usize,
) -> Result<MomentVector> {
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                weights: w.len(),
            });
        }
        if let Some((index, &value)) = w.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    let mut values = vec![0.0; order + 1];
    let mut q = vec![0.0; order + 1];
    for (j, &t) in points.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[j]);
        spec.eval_into(t, &mut q);
        for (acc, qk) in values.iter_mut().zip(&q) {
            *acc += w * qk;
        }
    }
    Ok(MomentVector::from_values(*spec, values))
}

/// Symmetric `d x d` matrix of inner products `<Q_s Q_t>`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    spec: BasisSpec,
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps a matrix; it must be square with side `spec.degree()`.
    pub fn from_matrix(spec: BasisSpec, entries: DMatrix<f64>) -> Self {
        assert_eq!(entries.nrows(), spec.degree());
        assert_eq!(entries.ncols(), spec.degree());
        GramMatrix { spec, entries }
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Gram matrix by the direct double sum `sum_j w_j Q_s(u_j) Q_t(u_j)`.
    pub fn direct(spec: &BasisSpec, points: &[f64], weights: Option<&[f64]>) -> Self {
        let d = spec.degree();
        let mut entries = DMatrix::zeros(d, d);
        let mut q = vec![0.0; d];
        for (j, &t) in points.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[j]);
            spec.eval_into(t, &mut q);
            for s in 0..d {
                for u in 0..d {
                    entries[(s, u)] += w * q[s] * q[u];
                }
            }
        }
        GramMatrix {
            spec: *spec,
            entries,
        }
    }
}

/// Memoized linearization coefficients of `Q_s * Q_t` and `u * Q_s * Q_t`
/// for all `s, t < degree` of one family.
#[derive(Debug, Clone)]
pub struct ProductTable {
    family: BasisFamily,
    degree: usize,
    // row-major, index s * degree + t; only s <= t is filled
    products: Vec<Vec<f64>>,
    shifted: Vec<Vec<f64>>,
}

impl ProductTable {
    pub fn new(family: BasisFamily, degree: usize) -> Self {
        let mut products = vec![Vec::new(); degree * degree];
        let mut shifted = vec![Vec::new(); degree * degree];
        for t in 0..degree {
            for (s, c) in family.products_with(t, t + 1).into_iter().enumerate() {
                shifted[s * degree + t] = family.multiply_by_argument(&c);
                products[s * degree + t] = c;
            }
        }
        ProductTable {
            family,
            degree,
            products,
            shifted,
        }
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficients of `Q_s * Q_t`.
    pub fn product(&self, s: usize, t: usize) -> &[f64] {
        let (a, b) = if s <= t { (s, t) } else { (t, s) };
        &self.products[a * self.degree + b]
    }

    /// Coefficients of `u * Q_s * Q_t`.
    pub fn shifted_product(&self, s: usize, t: usize) -> &[f64] {
        let (a, b) = if s <= t { (s, t) } else { (t, s) };
        &self.shifted[a * self.degree + b]
    }

    fn check(&self, spec: &BasisSpec, moments: &MomentVector, need: usize) -> Result<()> {
        assert_eq!(spec.family(), self.family, "product table family mismatch");
        assert!(spec.degree() <= self.degree, "product table too small");
        if moments.order() < need {
            return Err(Error::InsufficientMomentOrder {
                have: moments.order(),
                need,
            });
        }
        Ok(())
    }

    fn contract<'a>(
        &'a self,
        d: usize,
        moments: &[f64],
        coeffs: impl Fn(usize, usize) -> &'a [f64],
    ) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(d, d);
        for s in 0..d {
            for t in s..d {
                let v: f64 = coeffs(s, t)
                    .iter()
                    .zip(moments)
                    .map(|(c, m)| c * m)
                    .sum();
                g[(s, t)] = v;
                g[(t, s)] = v;
            }
        }
        g
    }

    /// `<Q_s Q_t>` from the moments; needs order `2d - 2`.
    pub fn gram(&self, spec: &BasisSpec, moments: &MomentVector) -> Result<GramMatrix> {
        let d = spec.degree();
        self.check(spec, moments, 2 * d - 2)?;
        let entries = self.contract(d, moments.values(), |s, t| self.product(s, t));
        Ok(GramMatrix {
            spec: *spec,
            entries,
        })
    }

    /// `<u Q_s Q_t>` from the moments; needs order `2d - 1`.
    pub fn ygram(&self, spec: &BasisSpec, moments: &MomentVector) -> Result<DMatrix<f64>> {
        let d = spec.degree();
        self.check(spec, moments, 2 * d - 1)?;
        Ok(self.contract(d, moments.values(), |s, t| self.shifted_product(s, t)))
    }
}

/// Gram matrix `<Q_s Q_t>` assembled from moments through product linearization.
pub fn gram_from_moments(spec: &BasisSpec, moments: &MomentVector) -> Result<GramMatrix> {
    ProductTable::new(spec.family(), spec.degree()).gram(spec, moments)
}

/// Matrix `<u Q_s Q_t>` (canonical coordinate `u`) assembled from moments.
pub fn ygram_from_moments(spec: &BasisSpec, moments: &MomentVector) -> Result<DMatrix<f64>> {
    ProductTable::new(spec.family(), spec.degree()).ygram(spec, moments)
}
