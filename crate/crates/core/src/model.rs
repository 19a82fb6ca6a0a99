//! The binomial capabilities model.
//!
//! Countries hold each of `N_a` capabilities with probability `r`, products require each
//! with probability `q`, and a country makes a product iff it holds every capability the
//! product requires (the Leontief operator). Besides world sampling this module holds the
//! mean-field expressions for diversification, ubiquity and average neighbour degree, the
//! implied diversification/ubiquity densities and the quiescence-trap quantities.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::network::{index_labels, BipartiteNetwork};
use crate::scalar::{ln_binomial, Scalar};
use crate::seed::{derive_seed, rng};

/// Points of the quadrature grid used to normalize the implied densities.
pub const DENSITY_GRID_POINTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialParams<T> {
    /// Probability that a country holds a capability.
    pub r: T,
    /// Probability that a product requires a capability.
    pub q: T,
    pub n_a: usize,
    pub n_c: usize,
    pub n_p: usize,
}

impl<T: Scalar> BinomialParams<T> {
    pub fn new(r: T, q: T, n_a: usize, n_c: usize, n_p: usize) -> Result<Self> {
        let p = BinomialParams { r, q, n_a, n_c, n_p };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: T| x > T::zero() && x < T::one();
        if !open_unit(self.r) {
            return Err(Error::invalid("r", self.r.as_f64(), "must lie in (0, 1)"));
        }
        if !open_unit(self.q) {
            return Err(Error::invalid("q", self.q.as_f64(), "must lie in (0, 1)"));
        }
        for (name, v) in [("n_a", self.n_a), ("n_c", self.n_c), ("n_p", self.n_p)] {
            if v == 0 {
                return Err(Error::invalid(name, 0.0, "must be at least 1"));
            }
        }
        Ok(())
    }

    fn na(&self) -> T {
        T::from_count(self.n_a)
    }

    /// Exact expected density `(1 - q + q r)^N_a` of a sampled network.
    pub fn expected_density(&self) -> T {
        (T::one() - self.q + self.q * self.r).powi(self.n_a as i32)
    }

    /// Density `r^(q N_a)` the calibration constraint assigns to these parameters.
    pub fn constrained_density(&self) -> T {
        self.r.powf(self.q * self.na())
    }
}

/// Capability holdings (`N_c x N_a`) and requirements (`N_p x N_a`).
#[derive(Clone, Debug, PartialEq)]
pub struct CapabilityWorld {
    holdings: BitMatrix,
    requirements: BitMatrix,
}

impl CapabilityWorld {
    pub fn new(holdings: BitMatrix, requirements: BitMatrix) -> Result<Self> {
        if holdings.cols() != requirements.cols() {
            return Err(Error::Dimension(format!(
                "holdings have {} capabilities but requirements have {}",
                holdings.cols(),
                requirements.cols()
            )));
        }
        Ok(CapabilityWorld { holdings, requirements })
    }

    pub fn holdings(&self) -> &BitMatrix {
        &self.holdings
    }

    pub fn requirements(&self) -> &BitMatrix {
        &self.requirements
    }

    pub fn n_capabilities(&self) -> usize {
        self.holdings.cols()
    }

    /// Capabilities held by each country.
    pub fn capability_counts(&self) -> Vec<usize> {
        self.holdings.row_sums()
    }

    /// Capabilities required by each product.
    pub fn requirement_counts(&self) -> Vec<usize> {
        self.requirements.row_sums()
    }

    pub fn write_holdings_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_bits(&self.holdings, "c", out)
    }

    pub fn write_requirements_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_bits(&self.requirements, "p", out)
    }
}

fn write_bits<W: Write>(m: &BitMatrix, prefix: &str, out: W) -> std::io::Result<()> {
    let net = BipartiteNetwork::new(index_labels(prefix, m.rows()), index_labels("a", m.cols()), m.clone(), None)
        .expect("generated labels are unique");
    net.write_dense_csv(out)
}

fn bernoulli_rows(rng: &mut crate::seed::Rng, rows: usize, cols: usize, prob: impl Fn(usize) -> f64) -> BitMatrix {
    let mut m = BitMatrix::zeros(rows, cols);
    for i in 0..rows {
        let p = prob(i);
        for a in 0..cols {
            if rng.random_bool(p) {
                m.set(i, a, true);
            }
        }
    }
    m
}

/// Draws a world with i.i.d. Bernoulli holdings and requirements.
pub fn sample_world(params: &BinomialParams<f64>, seed: u64) -> CapabilityWorld {
    let mut g = rng(seed);
    let holdings = bernoulli_rows(&mut g, params.n_c, params.n_a, |_| params.r);
    let requirements = bernoulli_rows(&mut g, params.n_p, params.n_a, |_| params.q);
    CapabilityWorld { holdings, requirements }
}

/// Like [`sample_world`] but country `c` holds each capability with probability `r_by_country[c]`.
pub fn sample_heterogeneous_world(
    r_by_country: &[f64],
    q: f64,
    n_a: usize,
    n_p: usize,
    seed: u64,
) -> Result<CapabilityWorld> {
    if let Some(&bad) = r_by_country.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::invalid("r_c", bad, "must lie in (0, 1)"));
    }
    BinomialParams::new(0.5, q, n_a, r_by_country.len().max(1), n_p)?;
    let mut g = rng(seed);
    let holdings = bernoulli_rows(&mut g, r_by_country.len(), n_a, |c| r_by_country[c]);
    let requirements = bernoulli_rows(&mut g, n_p, n_a, |_| q);
    Ok(CapabilityWorld { holdings, requirements })
}

/// `M_cp = 1` iff every capability product `p` requires is held by country `c`.
pub fn leontief(world: &CapabilityWorld) -> BipartiteNetwork {
    let (c, p) = (&world.holdings, &world.requirements);
    BipartiteNetwork::from_adjacency(BitMatrix::from_fn(c.rows(), p.rows(), |ci, pi| p.row_is_subset(pi, c, ci)))
}

/// Number of products requiring exactly `x` capabilities, `x = 0..=N_a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequirementHistogram<T> {
    pub counts: Vec<T>,
}

impl<T: Scalar> RequirementHistogram<T> {
    pub fn from_world(world: &CapabilityWorld) -> Self {
        let mut counts = vec![T::zero(); world.n_capabilities() + 1];
        for k in world.requirement_counts() {
            counts[k] = counts[k] + T::one();
        }
        RequirementHistogram { counts }
    }

    /// Expected histogram `N_p C(N_a, x) q^x (1-q)^(N_a-x)`.
    pub fn binomial(n_a: usize, q: T, n_p: usize) -> Self {
        let na = T::from_count(n_a);
        let counts = (0..=n_a)
            .map(|x| {
                let x = T::from_count(x);
                let ln = ln_binomial(na, x) + x * q.ln() + (na - x) * (T::one() - q).ln();
                T::from_count(n_p) * ln.exp()
            })
            .collect();
        RequirementHistogram { counts }
    }

    pub fn n_a(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn total(&self) -> T {
        self.counts.iter().copied().sum()
    }
}

fn share_pow<T: Scalar>(share: T, x: usize) -> T {
    // 0^0 = 1: requirement-free products are made by everyone.
    if x == 0 {
        T::one()
    } else {
        share.powi(x as i32)
    }
}

fn check_capabilities<T: Scalar>(k: T, n_a: usize, name: &'static str) -> Result<()> {
    if !(k >= T::zero() && k <= T::from_count(n_a)) {
        return Err(Error::invalid(name, k.as_f64(), "must lie in [0, N_a]"));
    }
    Ok(())
}

/// Expected diversification of a country holding `k_ca` capabilities, for an arbitrary
/// requirement histogram: `sum_x (k_ca/N_a)^x hist[x]`.
pub fn mean_field_diversity<T: Scalar>(hist: &RequirementHistogram<T>, k_ca: T) -> T {
    let share = k_ca / T::from_count(hist.n_a());
    hist.counts.iter().enumerate().map(|(x, &h)| share_pow(share, x) * h).sum()
}

/// First derivative of [`mean_field_diversity`] in `k_ca`.
pub fn mean_field_slope<T: Scalar>(hist: &RequirementHistogram<T>, k_ca: T) -> T {
    let na = T::from_count(hist.n_a());
    let share = k_ca / na;
    let s: T = hist.counts.iter().enumerate().skip(1).map(|(x, &h)| T::from_count(x) * share_pow(share, x - 1) * h).sum();
    s / na
}

/// Second derivative of [`mean_field_diversity`] in `k_ca`; positive whenever any product
/// needs two or more capabilities and `k_ca > 0`.
pub fn mean_field_curvature<T: Scalar>(hist: &RequirementHistogram<T>, k_ca: T) -> T {
    let na = T::from_count(hist.n_a());
    let share = k_ca / na;
    let s: T = hist
        .counts
        .iter()
        .enumerate()
        .skip(2)
        .map(|(x, &h)| T::from_count(x * (x - 1)) * share_pow(share, x - 2) * h)
        .sum();
    s / (na * na)
}

/// `N_p (q k_ca/N_a + 1 - q)^N_a`.
pub fn expected_diversification<T: Scalar>(p: &BinomialParams<T>, k_ca: T) -> Result<T> {
    check_capabilities(k_ca, p.n_a, "k_ca")?;
    Ok(T::from_count(p.n_p) * (p.q * k_ca / p.na() + T::one() - p.q).powi(p.n_a as i32))
}

/// Large-`N_a` exponential form `N_p exp(q (k_ca - N_a))`; diagnostic only.
pub fn expected_diversification_exponential<T: Scalar>(p: &BinomialParams<T>, k_ca: T) -> Result<T> {
    check_capabilities(k_ca, p.n_a, "k_ca")?;
    Ok(T::from_count(p.n_p) * (p.q * (k_ca - p.na())).exp())
}

/// Derivative of [`expected_diversification`] in `k_ca`: `q N_p (q k_ca/N_a + 1 - q)^(N_a-1)`.
pub fn diversification_slope<T: Scalar>(p: &BinomialParams<T>, k_ca: T) -> Result<T> {
    check_capabilities(k_ca, p.n_a, "k_ca")?;
    Ok(p.q * T::from_count(p.n_p) * (p.q * k_ca / p.na() + T::one() - p.q).powi(p.n_a as i32 - 1))
}

/// `N_c r^k_pa`.
pub fn expected_ubiquity<T: Scalar>(p: &BinomialParams<T>, k_pa: T) -> Result<T> {
    check_capabilities(k_pa, p.n_a, "k_pa")?;
    Ok(T::from_count(p.n_c) * p.r.powf(k_pa))
}

/// Capability count that yields diversification `k_c0` under the mean-field expression.
/// Real-valued and not clipped: values outside `[0, N_a]` flag a country outside the
/// model's range.
pub fn capabilities_from_diversification<T: Scalar>(p: &BinomialParams<T>, k_c0: T) -> Result<T> {
    if !(k_c0 > T::zero()) {
        return Err(Error::invalid("k_c0", k_c0.as_f64(), "must be positive"));
    }
    let u = k_c0 / T::from_count(p.n_p);
    Ok(p.na() / p.q * (u.powf(T::one() / p.na()) + p.q - T::one()))
}

/// Average ubiquity of the products of a country with diversification `k_c0`:
/// `(N_p N_c / k_c0) (r (k_c0/N_p)^(1/N_a) + (1-q)(1-r))^N_a`.
pub fn expected_k_c1<T: Scalar>(p: &BinomialParams<T>, k_c0: T) -> Result<T> {
    if !(k_c0 > T::zero()) {
        return Err(Error::invalid("k_c0", k_c0.as_f64(), "must be positive"));
    }
    let np = T::from_count(p.n_p);
    let bracket = p.r * (k_c0 / np).powf(T::one() / p.na()) + (T::one() - p.q) * (T::one() - p.r);
    Ok(np * T::from_count(p.n_c) / k_c0 * bracket.powi(p.n_a as i32))
}

/// Derivative of [`expected_k_c1`] in `k_c0`; never positive.
pub fn k_c1_slope<T: Scalar>(p: &BinomialParams<T>, k_c0: T) -> Result<T> {
    if !(k_c0 > T::zero()) {
        return Err(Error::invalid("k_c0", k_c0.as_f64(), "must be positive"));
    }
    let np = T::from_count(p.n_p);
    let floor = (T::one() - p.q) * (T::one() - p.r);
    let bracket = p.r * (k_c0 / np).powf(T::one() / p.na()) + floor;
    Ok(-(np * T::from_count(p.n_c)) / (k_c0 * k_c0) * floor * bracket.powi(p.n_a as i32 - 1))
}

/// Average ubiquity of a country's products written directly in its capability count:
/// `N_c (r q s + 1 - q)^N_a / (q s + 1 - q)^N_a` with `s = k_ca/N_a`.
pub fn k_c1_from_capabilities<T: Scalar>(p: &BinomialParams<T>, k_ca: T) -> Result<T> {
    check_capabilities(k_ca, p.n_a, "k_ca")?;
    let s = k_ca / p.na();
    let num = p.r * p.q * s + T::one() - p.q;
    let den = p.q * s + T::one() - p.q;
    Ok(T::from_count(p.n_c) * (num / den).powi(p.n_a as i32))
}

/// A density normalized on a uniform grid over its support, with its trapezoid CDF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpliedDistribution<T> {
    pub grid: Vec<T>,
    pub density: Vec<T>,
    pub cdf: Vec<T>,
}

impl<T: Scalar> ImpliedDistribution<T> {
    fn from_log_density(lo: T, hi: T, points: usize, ln_density: impl Fn(T) -> T) -> Self {
        let step = (hi - lo) / T::from_count(points - 1);
        let grid: Vec<T> = (0..points).map(|i| if i + 1 == points { hi } else { lo + step * T::from_count(i) }).collect();
        let logs: Vec<T> = grid.iter().map(|&x| ln_density(x)).collect();
        let peak = logs.iter().copied().filter(|l| l.is_finite()).fold(T::neg_infinity(), T::max);
        let raw: Vec<T> = logs.iter().map(|&l| if l.is_finite() { (l - peak).exp() } else { T::zero() }).collect();
        let mut cdf = Vec::with_capacity(points);
        let mut acc = T::zero();
        cdf.push(acc);
        for i in 1..points {
            acc = acc + T::lit(0.5) * (raw[i] + raw[i - 1]) * (grid[i] - grid[i - 1]);
            cdf.push(acc);
        }
        let density = raw.iter().map(|&d| d / acc).collect();
        let cdf = cdf.into_iter().map(|c| c / acc).collect();
        ImpliedDistribution { grid, density, cdf }
    }

    pub fn lower(&self) -> T {
        self.grid[0]
    }

    pub fn upper(&self) -> T {
        *self.grid.last().expect("non-empty grid")
    }

    /// CDF by linear interpolation; 0 below and 1 above the support.
    pub fn cdf_at(&self, x: T) -> T {
        if x <= self.lower() {
            return T::zero();
        }
        if x >= self.upper() {
            return T::one();
        }
        let i = self.grid.partition_point(|&g| g <= x);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let w = (x - x0) / (x1 - x0);
        self.cdf[i - 1] + w * (self.cdf[i] - self.cdf[i - 1])
    }

    /// Trapezoid integral of the normalized density; 1 up to rounding.
    pub fn mass(&self) -> T {
        (1..self.grid.len())
            .map(|i| T::lit(0.5) * (self.density[i] + self.density[i - 1]) * (self.grid[i] - self.grid[i - 1]))
            .sum()
    }

    /// KS distance between a sample and this distribution.
    pub fn ks(&self, sample: &[T]) -> Result<T> {
        if sample.is_empty() {
            return Err(Error::Empty("KS sample"));
        }
        let mut xs = sample.to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
        Ok(crate::dist_fit::ks_sorted_vs_cdf(&xs, &|x| self.cdf_at(x), crate::dist_fit::KsWeight::None))
    }
}

fn ln_diversification_density<T: Scalar>(p: &BinomialParams<T>, u: T) -> T {
    let na = p.na();
    let root = u.powf(T::one() / na);
    let k = (na / p.q * (root + p.q - T::one())).max(T::zero()).min(na);
    // Capability count is Binomial(N_a, r); the Jacobian dk/du = u^(1/N_a - 1) / q.
    ln_binomial(na, k) + k * p.r.ln() + (na - k) * (T::one() - p.r).ln() + (T::one() / na - T::one()) * u.ln()
        - p.q.ln()
}

fn ln_ubiquity_density<T: Scalar>(p: &BinomialParams<T>, v: T) -> T {
    let na = p.na();
    let x = (v.ln() / p.r.ln()).max(T::zero()).min(na);
    ln_binomial(na, x) + x * p.q.ln() + (na - x) * (T::one() - p.q).ln() - v.ln() - p.r.ln().abs().ln()
}

/// Lower end `(1-q)^N_a` of the diversification-share support.
pub fn diversification_support<T: Scalar>(p: &BinomialParams<T>) -> (T, T) {
    ((T::one() - p.q).powi(p.n_a as i32), T::one())
}

/// Lower end `r^N_a` of the ubiquity-share support.
pub fn ubiquity_support<T: Scalar>(p: &BinomialParams<T>) -> (T, T) {
    (p.r.powi(p.n_a as i32), T::one())
}

/// Unnormalized density of the share `u = k_c0/N_p` of products a country makes.
pub fn diversification_density<T: Scalar>(p: &BinomialParams<T>, u: T) -> Result<T> {
    let (lo, hi) = diversification_support(p);
    if !(u > lo && u <= hi) {
        return Err(Error::OutOfSupport { value: u.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
    }
    Ok(ln_diversification_density(p, u).exp())
}

/// Unnormalized density of the share `v = k_p0/N_c` of countries making a product.
pub fn ubiquity_density<T: Scalar>(p: &BinomialParams<T>, v: T) -> Result<T> {
    let (lo, hi) = ubiquity_support(p);
    if !(v > lo && v <= hi) {
        return Err(Error::OutOfSupport { value: v.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
    }
    Ok(ln_ubiquity_density(p, v).exp())
}

pub fn diversification_pdf<T: Scalar>(p: &BinomialParams<T>) -> ImpliedDistribution<T> {
    let (lo, hi) = diversification_support(p);
    ImpliedDistribution::from_log_density(lo, hi, DENSITY_GRID_POINTS, |u| ln_diversification_density(p, u))
}

pub fn ubiquity_pdf<T: Scalar>(p: &BinomialParams<T>) -> ImpliedDistribution<T> {
    let (lo, hi) = ubiquity_support(p);
    ImpliedDistribution::from_log_density(lo, hi, DENSITY_GRID_POINTS, |v| ln_ubiquity_density(p, v))
}

/// `(k_ca/N_a, expected diversification / N_p)` along `k_grid`.
pub fn quiescence_curve<T: Scalar>(p: &BinomialParams<T>, k_grid: &[T]) -> Result<Vec<(T, T)>> {
    k_grid
        .iter()
        .map(|&k| Ok((k / p.na(), expected_diversification(p, k)? / T::from_count(p.n_p))))
        .collect()
}

/// `points` evenly spaced capability counts from 0 to `N_a` inclusive.
pub fn capability_grid<T: Scalar>(n_a: usize, points: usize) -> Vec<T> {
    let na = T::from_count(n_a);
    let last = points.max(2) - 1;
    (0..=last).map(|i| if i == last { na } else { na * T::from_count(i) / T::from_count(last) }).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClaim {
    NonNegative,
    NonPositive,
    Positive,
}

impl SignClaim {
    pub fn holds(self, x: f64) -> bool {
        match self {
            SignClaim::NonNegative => x >= 0.0,
            SignClaim::NonPositive => x <= 0.0,
            SignClaim::Positive => x > 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativePoint {
    pub x: f64,
    pub analytic: f64,
    pub numeric: f64,
    /// `|analytic - numeric| / (1 + |analytic|)`.
    pub rel_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub name: String,
    pub claim: SignClaim,
    pub points: Vec<DerivativePoint>,
}

impl DerivativeCheck {
    pub fn max_rel_err(&self) -> f64 {
        self.points.iter().map(|p| p.rel_err).fold(0.0, f64::max)
    }

    pub fn sign_holds(&self) -> bool {
        self.points.iter().all(|p| self.claim.holds(p.analytic))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub step: f64,
    pub checks: Vec<DerivativeCheck>,
}

impl DerivativeReport {
    pub fn max_rel_err(&self) -> f64 {
        self.checks.iter().map(DerivativeCheck::max_rel_err).fold(0.0, f64::max)
    }

    pub fn signs_hold(&self) -> bool {
        self.checks.iter().all(DerivativeCheck::sign_holds)
    }
}

fn check(
    name: &str,
    claim: SignClaim,
    grid: &[f64],
    h: f64,
    analytic: impl Fn(f64) -> f64,
    f: impl Fn(f64) -> f64,
) -> DerivativeCheck {
    let points = grid
        .iter()
        .map(|&x| {
            let a = analytic(x);
            let numeric = (f(x + h) - f(x - h)) / (2.0 * h);
            DerivativePoint { x, analytic: a, numeric, rel_err: (a - numeric).abs() / (1.0 + a.abs()) }
        })
        .collect();
    DerivativeCheck { name: name.to_string(), claim, points }
}

/// Analytic derivatives against central differences with step `h` on `points` interior
/// grid points: the diversification slope, the `k_c1` slope, and the slope and curvature
/// of the histogram form for `hist`.
pub fn derivative_checks(
    p: &BinomialParams<f64>,
    hist: &RequirementHistogram<f64>,
    points: usize,
    h: f64,
) -> Result<DerivativeReport> {
    p.validate()?;
    let interior = |lo: f64, hi: f64| -> Vec<f64> {
        (1..=points).map(|i| lo + (hi - lo) * i as f64 / (points + 1) as f64).collect()
    };
    let na = p.n_a as f64;
    let k_grid = interior(0.0, na);
    let (u_lo, _) = diversification_support(p);
    let np = p.n_p as f64;
    let kc0_grid = interior(np * u_lo, np);
    let hist_grid = interior(0.0, hist.n_a() as f64);

    // Unchecked forms so that x +- h may leave the closed range at the grid ends.
    let div = |k: f64| np * (p.q * k / na + 1.0 - p.q).powi(p.n_a as i32);
    let div_slope = |k: f64| p.q * np * (p.q * k / na + 1.0 - p.q).powi(p.n_a as i32 - 1);
    let checks = vec![
        check("diversification_slope", SignClaim::NonNegative, &k_grid, h, div_slope, div),
        check(
            "k_c1_slope",
            SignClaim::NonPositive,
            &kc0_grid,
            h,
            |k| k_c1_slope(p, k).expect("positive k_c0"),
            |k| expected_k_c1(p, k).expect("positive k_c0"),
        ),
        check(
            "histogram_slope",
            SignClaim::NonNegative,
            &hist_grid,
            h,
            |k| mean_field_slope(hist, k),
            |k| mean_field_diversity(hist, k),
        ),
        check(
            "histogram_curvature",
            SignClaim::Positive,
            &hist_grid,
            h,
            |k| mean_field_curvature(hist, k),
            |k| mean_field_slope(hist, k),
        ),
    ];
    Ok(DerivativeReport { step: h, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinAgreement {
    /// Capability count (diversification side) or requirement count (ubiquity side).
    pub count: usize,
    pub members: u64,
    pub simulated_mean: f64,
    pub predicted: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldReport {
    pub seeds: usize,
    pub min_members: u64,
    pub diversification: Vec<BinAgreement>,
    pub ubiquity: Vec<BinAgreement>,
}

impl MeanFieldReport {
    pub fn max_diversification_err(&self) -> f64 {
        self.diversification.iter().map(|b| b.rel_err).fold(0.0, f64::max)
    }

    pub fn max_ubiquity_err(&self) -> f64 {
        self.ubiquity.iter().map(|b| b.rel_err).fold(0.0, f64::max)
    }
}

/// Simulates `seeds` worlds and compares the mean diversification of countries with exactly
/// `k` capabilities, and the mean ubiquity of products with exactly `x` requirements,
/// against the mean-field predictions. Bins with fewer than `min_members` pooled members
/// are left out.
pub fn mean_field_agreement(
    p: &BinomialParams<f64>,
    seeds: usize,
    master_seed: u64,
    min_members: u64,
) -> Result<MeanFieldReport> {
    p.validate()?;
    let n = p.n_a + 1;
    let zero = || (vec![0u64; n], vec![0u64; n], vec![0u64; n], vec![0u64; n]);
    let (div_sum, div_cnt, ubi_sum, ubi_cnt) = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let world = sample_world(p, derive_seed(master_seed, i as u64));
            let net = leontief(&world);
            let mut acc = zero();
            for (k, d) in world.capability_counts().into_iter().zip(net.diversification()) {
                acc.0[k] += d as u64;
                acc.1[k] += 1;
            }
            for (x, u) in world.requirement_counts().into_iter().zip(net.ubiquity()) {
                acc.2[x] += u as u64;
                acc.3[x] += 1;
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for k in 0..n {
                a.0[k] += b.0[k];
                a.1[k] += b.1[k];
                a.2[k] += b.2[k];
                a.3[k] += b.3[k];
            }
            a
        });

    let bins = |sum: &[u64], cnt: &[u64], predict: &dyn Fn(f64) -> f64| -> Vec<BinAgreement> {
        (0..n)
            .filter(|&k| cnt[k] >= min_members)
            .map(|k| {
                let simulated_mean = sum[k] as f64 / cnt[k] as f64;
                let predicted = predict(k as f64);
                BinAgreement {
                    count: k,
                    members: cnt[k],
                    simulated_mean,
                    predicted,
                    rel_err: (simulated_mean - predicted).abs() / predicted,
                }
            })
            .collect()
    };
    let diversification = bins(&div_sum, &div_cnt, &|k| expected_diversification(p, k).expect("k in range"));
    let ubiquity = bins(&ubi_sum, &ubi_cnt, &|x| expected_ubiquity(p, x).expect("x in range"));
    Ok(MeanFieldReport { seeds, min_members, diversification, ubiquity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(r: f64, q: f64, n_a: usize, n_c: usize, n_p: usize) -> BinomialParams<f64> {
        BinomialParams::new(r, q, n_a, n_c, n_p).unwrap()
    }

    #[test]
    fn params_are_validated() {
        assert!(BinomialParams::new(1.0, 0.5, 3, 1, 1).is_err());
        assert!(BinomialParams::new(0.5, 0.0, 3, 1, 1).is_err());
        assert!(BinomialParams::new(0.5, 0.5, 0, 1, 1).is_err());
        assert!(BinomialParams::new(0.5f32, 0.5, 3, 1, 1).is_ok());
    }

    #[test]
    fn sampling_limits_and_determinism() {
        let p = params(1.0 - 1e-12, 0.3, 100, 100, 10);
        let w = sample_world(&p, 1);
        assert!(w.holdings().count_ones() as f64 / 1e4 > 0.999);
        let p = params(0.89, 0.3, 20, 10, 30);
        assert_eq!(sample_world(&p, 42), sample_world(&p, 42));
        assert_ne!(sample_world(&p, 42), sample_world(&p, 43));
        let mean: f64 = (0..100)
            .map(|s| sample_world(&p, s).holdings().count_ones() as f64 / 200.0)
            .sum::<f64>()
            / 100.0;
        // 20,000 Bernoulli(0.89) draws: standard error 0.0022.
        assert!((mean - 0.89).abs() < 0.01, "{mean}");
        let w = sample_world(&p, 3);
        assert_eq!(w.capability_counts(), w.holdings().row_sums());
        assert_eq!(w.requirement_counts().len(), 30);
    }

    #[test]
    fn leontief_examples() {
        let world = |c: &[&[u8]], p: &[&[u8]]| {
            let m = |rows: &[&[u8]]| BitMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j] == 1);
            CapabilityWorld::new(m(c), m(p)).unwrap()
        };
        assert!(leontief(&world(&[&[1, 1]], &[&[1, 0]])).get(0, 0));
        assert!(!leontief(&world(&[&[1, 0]], &[&[1, 1]])).get(0, 0));
        let net = leontief(&world(&[&[0, 0], &[1, 0]], &[&[0, 0], &[0, 1]]));
        assert_eq!(net.ubiquity(), vec![2, 0]);
        assert!(CapabilityWorld::new(BitMatrix::zeros(1, 2), BitMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn mean_field_examples() {
        let hist = RequirementHistogram::binomial(2, 0.5, 4);
        assert_relative_eq!(hist.counts[1], 2.0, epsilon = 1e-12);
        // Enumerate the four equally likely requirement profiles over two capabilities,
        // each required capability being held independently with probability 1/2.
        let profiles: [&[usize]; 4] = [&[], &[0], &[1], &[0, 1]];
        let oracle: f64 = profiles.iter().map(|req| 4.0 * 0.25 * 0.5f64.powi(req.len() as i32)).sum();
        assert_relative_eq!(oracle, 2.25, epsilon = 1e-12);
        assert_relative_eq!(mean_field_diversity(&hist, 1.0), oracle, epsilon = 1e-12);
        assert_relative_eq!(mean_field_diversity(&hist, 2.0), 4.0, epsilon = 1e-12);
        assert_relative_eq!(mean_field_diversity(&hist, 0.0), hist.counts[0], epsilon = 1e-12);

        let p = params(0.7, 0.5, 2, 10, 4);
        assert_relative_eq!(expected_diversification(&p, 1.0).unwrap(), 2.25, epsilon = 1e-12);
        assert_relative_eq!(expected_diversification(&p, 2.0).unwrap(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(expected_diversification(&p, 0.0).unwrap(), 4.0 * 0.25, epsilon = 1e-12);
        assert!(expected_diversification(&p, 2.5).is_err());
        assert!(expected_diversification(&p, -0.1).is_err());
        let e = expected_diversification_exponential(&p, 2.0).unwrap();
        assert_relative_eq!(e, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn ubiquity_examples() {
        let p = params(0.9, 0.3, 5, 100, 10);
        assert_relative_eq!(expected_ubiquity(&p, 0.0).unwrap(), 100.0);
        assert_relative_eq!(expected_ubiquity(&p, 2.0).unwrap(), 81.0, epsilon = 1e-9);
        assert!(expected_ubiquity(&p, 6.0).is_err());
        let v: Vec<f64> = (0..=5).map(|x| expected_ubiquity(&p, x as f64).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn ubiquity_of_two_requirement_products_by_monte_carlo() {
        // Products requiring exactly two capabilities: mean ubiquity over 1,000 worlds.
        let p = params(0.9, 0.3, 5, 100, 40);
        let (mut sum, mut n) = (0.0, 0usize);
        for s in 0..1000 {
            let w = sample_world(&p, s);
            let net = leontief(&w);
            for (x, u) in w.requirement_counts().into_iter().zip(net.ubiquity()) {
                if x == 2 {
                    sum += u as f64;
                    n += 1;
                }
            }
        }
        assert!((sum / n as f64 - 81.0).abs() < 0.5, "{}", sum / n as f64);
    }

    #[test]
    fn k_c1_examples() {
        let p = params(0.5, 0.5, 1, 10, 4);
        assert_relative_eq!(expected_k_c1(&p, 2.0).unwrap(), 10.0, epsilon = 1e-12);
        assert_relative_eq!(capabilities_from_diversification(&p, 2.0).unwrap(), 0.0, epsilon = 1e-12);
        let p = params(0.6, 1e-12, 30, 50, 200);
        assert_relative_eq!(expected_k_c1(&p, 200.0).unwrap(), 50.0, max_relative = 1e-9);
        assert!(expected_k_c1(&p, 0.0).is_err());
        for (r, q, na) in [(0.6, 0.2, 10), (0.86, 0.166, 65), (0.95, 0.05, 200)] {
            let p = params(r, q, na, 100, 1000);
            let lo = 1000.0 * (1.0 - q).powi(na as i32);
            for i in 1..50 {
                let k = lo + (1000.0 - lo) * i as f64 / 50.0;
                assert!(k_c1_slope(&p, k).unwrap() <= 0.0);
            }
        }
    }

    #[test]
    fn implied_densities_normalize_and_are_nonnegative() {
        for p in [params(0.86, 0.1661, 65, 129, 772), params(0.89, 0.3016, 70, 232, 5109), params(0.7, 0.2, 5, 10, 20)]
        {
            for d in [diversification_pdf(&p), ubiquity_pdf(&p)] {
                assert_eq!(d.grid.len(), DENSITY_GRID_POINTS);
                assert_relative_eq!(d.mass(), 1.0, epsilon = 1e-9);
                assert!(d.density.iter().all(|&x| x >= 0.0 && x.is_finite()));
                assert!(d.cdf.windows(2).all(|w| w[1] >= w[0]));
                assert_eq!(d.cdf_at(d.upper() + 1.0), 1.0);
                assert_eq!(d.cdf_at(0.0), 0.0);
            }
            let (lo, _) = diversification_support(&p);
            assert!(diversification_density(&p, lo).is_err());
            assert!(diversification_density(&p, 1.0).is_ok());
            assert!(ubiquity_density(&p, 1.5).is_err());
        }
    }

    #[test]
    fn ubiquity_mass_concentrates_as_capabilities_grow() {
        // ln v = x ln r with x ~ Binomial(N_a, q): its spread relative to ln(r^(q N_a))
        // shrinks like 1/sqrt(N_a).
        let relative_log_spread = |na: usize| {
            let p = params(0.99, 0.2, na, 1, 1);
            let d = ubiquity_pdf(&p);
            let w: f64 = d.density.iter().sum();
            let logs: Vec<f64> = d.grid.iter().map(|v| v.ln()).collect();
            let mean: f64 = logs.iter().zip(&d.density).map(|(l, f)| l * f).sum::<f64>() / w;
            let var: f64 = logs.iter().zip(&d.density).map(|(l, f)| (l - mean).powi(2) * f).sum::<f64>() / w;
            let target = p.constrained_density().ln();
            assert!((mean / target - 1.0).abs() < 0.02, "{mean} vs {target}");
            var.sqrt() / target.abs()
        };
        let simulated = |na: usize| {
            let p = params(0.99, 0.2, na, 2000, 400);
            let logs: Vec<f64> = (0..4)
                .flat_map(|s| leontief(&sample_world(&p, s)).ubiquity())
                .map(|k| (k as f64 / 2000.0).ln())
                .collect();
            let n = logs.len() as f64;
            let mean = logs.iter().sum::<f64>() / n;
            let sd = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n).sqrt();
            sd / p.constrained_density().ln().abs()
        };
        let analytic: Vec<f64> = [20, 80, 320].into_iter().map(relative_log_spread).collect();
        let mc: Vec<f64> = [20, 80, 320].into_iter().map(simulated).collect();
        assert!(analytic.windows(2).all(|w| w[1] < 0.6 * w[0]), "{analytic:?}");
        assert!(mc.windows(2).all(|w| w[1] < 0.6 * w[0]), "{mc:?}");
    }

    #[test]
    fn quiescence_examples() {
        let p = params(0.8, 0.2, 10, 1, 100);
        let curve = quiescence_curve(&p, &capability_grid::<f64>(10, 11)).unwrap();
        assert_eq!(*curve.last().unwrap(), (1.0, 1.0));
        let d: Vec<f64> = curve.windows(2).map(|w| w[1].1 - w[0].1).collect();
        assert!(d.iter().all(|&x| x >= 0.0));
        assert!(d.windows(2).all(|w| w[1] > w[0]));
        let wide = params(0.8, 0.2, 1000, 1, 100);
        let narrow = params(0.8, 0.2, 10, 1, 100);
        for i in 1..100 {
            let s = i as f64 / 100.0;
            let a = quiescence_curve(&wide, &[s * 1000.0]).unwrap()[0].1;
            let b = quiescence_curve(&narrow, &[s * 10.0]).unwrap()[0].1;
            assert!(a < b, "s={s}: {a} !< {b}");
        }
    }

    #[test]
    fn derivative_suite() {
        for p in [params(0.87, 0.1795, 80, 129, 772), params(0.89, 0.3016, 70, 232, 5109), params(0.6, 0.4, 3, 10, 50)] {
            let hist = RequirementHistogram::binomial(p.n_a, p.q, p.n_p);
            let report = derivative_checks(&p, &hist, 20, 1e-5).unwrap();
            assert_eq!(report.checks.len(), 4);
            assert!(report.max_rel_err() < 1e-6, "{report:#?}");
            assert!(report.signs_hold());
        }
    }

    #[test]
    fn histogram_form_matches_closed_form_for_binomial_requirements() {
        let p = params(0.8, 0.25, 12, 10, 300);
        let hist = RequirementHistogram::binomial(p.n_a, p.q, p.n_p);
        assert_relative_eq!(hist.total(), 300.0, max_relative = 1e-12);
        for k in 0..=12 {
            let k = k as f64;
            assert_relative_eq!(
                mean_field_diversity(&hist, k),
                expected_diversification(&p, k).unwrap(),
                max_relative = 1e-10
            );
            assert_relative_eq!(mean_field_slope(&hist, k), diversification_slope(&p, k).unwrap(), max_relative = 1e-10);
        }
    }

    #[test]
    fn heterogeneous_sampling() {
        assert!(sample_heterogeneous_world(&[0.5, 1.0], 0.2, 5, 5, 1).is_err());
        let p = params(0.7, 0.2, 15, 4, 200);
        let mean_div = |worlds: &dyn Fn(u64) -> CapabilityWorld| -> f64 {
            (0..200).map(|s| leontief(&worlds(s)).edge_count() as f64).sum::<f64>() / 200.0
        };
        let homo = mean_div(&|s| sample_world(&p, s));
        let hetero = mean_div(&|s| sample_heterogeneous_world(&[0.7; 4], 0.2, 15, 200, s + 10_000).unwrap());
        // Per-world edge counts have sd of roughly 60 here; 200 worlds give SE about 4 each.
        assert!((homo - hetero).abs() < 20.0, "{homo} vs {hetero}");

        let rs = [0.3, 0.5, 0.7, 0.9, 1.0 - 1e-12];
        let mut sums = [0.0; 5];
        for s in 0..200 {
            let net = leontief(&sample_heterogeneous_world(&rs, 0.2, 15, 200, s).unwrap());
            for (c, d) in net.diversification().into_iter().enumerate() {
                sums[c] += d as f64 / 200.0;
            }
        }
        assert!(sums.windows(2).all(|w| w[1] > w[0]), "{sums:?}");
        assert_relative_eq!(sums[4], 200.0, epsilon = 1e-9);
        assert_eq!(
            sample_heterogeneous_world(&[0.7; 4], 0.2, 15, 200, 5).unwrap(),
            sample_heterogeneous_world(&[0.7; 4], 0.2, 15, 200, 5).unwrap()
        );
    }

    #[test]
    fn mean_field_harness_reports_bins() {
        let p = params(0.8, 0.05, 20, 50, 200);
        let r = mean_field_agreement(&p, 20, 7, 20).unwrap();
        assert!(r.diversification.iter().all(|b| b.members >= 20));
        assert!(!r.ubiquity.is_empty());
        assert_eq!(r, mean_field_agreement(&p, 20, 7, 20).unwrap());
    }

    #[test]
    fn expected_density_is_exact_and_constraint_underestimates_it() {
        let p = params(0.86, 0.1661, 65, 129, 772);
        assert_relative_eq!(p.constrained_density(), 0.1962, epsilon = 2e-4);
        let expected = p.expected_density();
        let mean: f64 = (0..20).map(|s| leontief(&sample_world(&p, s)).edge_count() as f64 / (129.0 * 772.0)).sum::<f64>() / 20.0;
        assert!((mean - expected).abs() < 0.02, "{mean} vs {expected}");
        assert!(p.constrained_density() < expected);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn leontief_is_subset_rule(
            n_c in 1usize..=8, n_p in 1usize..=8, n_a in 1usize..=8,
            bits in prop::collection::vec(any::<bool>(), 128),
        ) {
            let c = BitMatrix::from_fn(n_c, n_a, |i, a| bits[i * 8 + a]);
            let p = BitMatrix::from_fn(n_p, n_a, |j, a| bits[64 + j * 8 + a]);
            let net = leontief(&CapabilityWorld::new(c.clone(), p.clone()).unwrap());
            for i in 0..n_c {
                for j in 0..n_p {
                    let held: usize = (0..n_a).filter(|&a| c.get(i, a) && p.get(j, a)).count();
                    let needed: usize = (0..n_a).filter(|&a| p.get(j, a)).count();
                    prop_assert_eq!(net.get(i, j), held == needed);
                }
            }
        }

        #[test]
        fn closed_forms_round_trip(r in 0.05f64..0.98, q in 0.01f64..0.9, n_a in 1usize..120, s in 0.0f64..=1.0) {
            let p = params(r, q, n_a, 120, 900);
            let k_ca = s * n_a as f64;
            let k_c0 = expected_diversification(&p, k_ca).unwrap();
            prop_assume!(k_c0 > 1e-200);
            let back = capabilities_from_diversification(&p, k_c0).unwrap();
            prop_assert!((back - k_ca).abs() < 1e-9 * (1.0 + n_a as f64) / q.min(1.0), "{} vs {}", back, k_ca);
            let direct = k_c1_from_capabilities(&p, k_ca).unwrap();
            let via = expected_k_c1(&p, k_c0).unwrap();
            prop_assert!((direct - via).abs() <= 1e-9 * direct.abs().max(1.0), "{} vs {}", direct, via);
        }

        #[test]
        fn diversification_is_monotone_and_convex(r in 0.05f64..0.98, q in 0.01f64..0.9, n_a in 2usize..200) {
            let p = params(r, q, n_a, 10, 1000);
            let ks = capability_grid::<f64>(n_a, 41);
            let v: Vec<f64> = ks.iter().map(|&k| expected_diversification(&p, k).unwrap()).collect();
            prop_assert!(v.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(v.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-9 * w[2]));
            let lo = 1000.0 * (1.0 - q).powi(n_a as i32);
            let k1: Vec<f64> = (1..=40).map(|i| expected_k_c1(&p, lo + (1000.0 - lo) * i as f64 / 40.0).unwrap()).collect();
            prop_assert!(k1.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        }
    }
}
