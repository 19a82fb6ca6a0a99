//! Maximum-likelihood fits of normal, log-normal and two-parameter Weibull families,
//! Kolmogorov-Smirnov distances, and likelihood ranking of the families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Endpoint clipping of `F` in the weighted KS mode.
pub const KS_WEIGHT_CLIP: f64 = 1e-3;

const WEIBULL_MAX_ITER: usize = 200;
const WEIBULL_SHAPE_BRACKET: (f64, f64) = (1e-3, 1e3);

/// Finite values ready for fitting. `excluded` counts values dropped by [`Sample::positives`].
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    values: Vec<T>,
    positives_only: bool,
    excluded: usize,
}

impl<T: Scalar> Sample<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("sample value", bad.as_f64(), "must be finite"));
        }
        Ok(Sample { values, positives_only: false, excluded: 0 })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn positives_only(&self) -> bool {
        self.positives_only
    }

    pub fn excluded(&self) -> usize {
        self.excluded
    }

    /// Strictly positive sub-sample; zeros and negatives are counted in `excluded`.
    pub fn positives(&self) -> Sample<T> {
        let values: Vec<T> = self.values.iter().copied().filter(|&v| v > T::zero()).collect();
        let excluded = self.excluded + self.values.len() - values.len();
        Sample { values, positives_only: true, excluded }
    }

    fn sorted(&self) -> Vec<T> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Lognormal,
    Weibull,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Normal, Family::Lognormal, Family::Weibull];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Lognormal => "lognormal",
            Family::Weibull => "weibull",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Self::ALL.into_iter().find(|f| f.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

/// A fully parameterized member of one of the families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Distribution<T> {
    Normal { mean: T, sd: T },
    Lognormal { log_mean: T, log_sd: T },
    Weibull { scale: T, shape: T },
}

fn std_normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5) * (T::one() + (z / T::SQRT_2()).erf())
}

impl<T: Scalar> Distribution<T> {
    pub fn family(&self) -> Family {
        match self {
            Distribution::Normal { .. } => Family::Normal,
            Distribution::Lognormal { .. } => Family::Lognormal,
            Distribution::Weibull { .. } => Family::Weibull,
        }
    }

    /// Parameters in declaration order.
    pub fn params(&self) -> [T; 2] {
        match *self {
            Distribution::Normal { mean, sd } => [mean, sd],
            Distribution::Lognormal { log_mean, log_sd } => [log_mean, log_sd],
            Distribution::Weibull { scale, shape } => [scale, shape],
        }
    }

    pub fn with_params(&self, p: [T; 2]) -> Self {
        match self {
            Distribution::Normal { .. } => Distribution::Normal { mean: p[0], sd: p[1] },
            Distribution::Lognormal { .. } => Distribution::Lognormal { log_mean: p[0], log_sd: p[1] },
            Distribution::Weibull { .. } => Distribution::Weibull { scale: p[0], shape: p[1] },
        }
    }

    pub fn ln_pdf(&self, x: T) -> T {
        let half_ln_2pi = T::lit(0.5) * (T::lit(2.0) * T::PI()).ln();
        match *self {
            Distribution::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -half_ln_2pi - sd.ln() - T::lit(0.5) * z * z
            }
            Distribution::Lognormal { log_mean, log_sd } => {
                if x <= T::zero() {
                    return T::neg_infinity();
                }
                let lx = x.ln();
                let z = (lx - log_mean) / log_sd;
                -half_ln_2pi - log_sd.ln() - lx - T::lit(0.5) * z * z
            }
            Distribution::Weibull { scale, shape } => {
                if x <= T::zero() {
                    return T::neg_infinity();
                }
                let y = x / scale;
                shape.ln() - scale.ln() + (shape - T::one()) * y.ln() - y.powf(shape)
            }
        }
    }

    pub fn pdf(&self, x: T) -> T {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: T) -> T {
        match *self {
            Distribution::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Distribution::Lognormal { log_mean, log_sd } => {
                if x <= T::zero() {
                    T::zero()
                } else {
                    std_normal_cdf((x.ln() - log_mean) / log_sd)
                }
            }
            Distribution::Weibull { scale, shape } => {
                if x <= T::zero() {
                    T::zero()
                } else {
                    T::one() - (-(x / scale).powf(shape)).exp()
                }
            }
        }
    }

    pub fn log_likelihood(&self, values: &[T]) -> T {
        values.iter().map(|&x| self.ln_pdf(x)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub distribution: Distribution<T>,
    pub log_likelihood: T,
    /// Unweighted KS distance between the sample and the fitted CDF.
    pub ks_stat: T,
    /// Values the fit actually used.
    pub n: usize,
    /// Values excluded before fitting (non-positive values for positive families).
    pub excluded: usize,
}

impl<T: Scalar> FitResult<T> {
    pub fn family(&self) -> Family {
        self.distribution.family()
    }

    fn finish(distribution: Distribution<T>, sample: &Sample<T>) -> Self {
        let log_likelihood = distribution.log_likelihood(sample.values());
        let ks_stat = ks_statistic(sample, KsReference::Cdf(&|x| distribution.cdf(x)), KsWeight::None)
            .expect("non-empty sample");
        FitResult { distribution, log_likelihood, ks_stat, n: sample.len(), excluded: sample.excluded() }
    }
}

fn mean_and_biased_sd<T: Scalar>(values: &[T]) -> (T, T) {
    let n = T::from_count(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

fn require<T: Scalar>(sample: &Sample<T>, needed: usize) -> Result<()> {
    if sample.len() < needed {
        return Err(Error::TooFewValues { needed, got: sample.len() });
    }
    Ok(())
}

/// Normal MLE: sample mean and the biased (`1/n`) standard deviation.
pub fn fit_normal<T: Scalar>(sample: &Sample<T>) -> Result<FitResult<T>> {
    require(sample, 2)?;
    let (mean, sd) = mean_and_biased_sd(sample.values());
    if !(sd > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    Ok(FitResult::finish(Distribution::Normal { mean, sd }, sample))
}

/// Log-normal MLE on the strictly positive values.
pub fn fit_lognormal<T: Scalar>(sample: &Sample<T>) -> Result<FitResult<T>> {
    let pos = sample.positives();
    require(&pos, 2)?;
    let logs: Vec<T> = pos.values().iter().map(|x| x.ln()).collect();
    let (log_mean, log_sd) = mean_and_biased_sd(&logs);
    if !(log_sd > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    Ok(FitResult::finish(Distribution::Lognormal { log_mean, log_sd }, &pos))
}

/// Residual of the Weibull shape equation `sum x^k ln x / sum x^k - 1/k - mean(ln x)`.
pub fn weibull_shape_residual<T: Scalar>(values: &[T], shape: T) -> T {
    let max = values.iter().copied().fold(T::zero(), T::max);
    let n = T::from_count(values.len());
    // The equation is invariant under rescaling x; x/max keeps x^k in (0, 1].
    let mut s0 = T::zero();
    let mut s1 = T::zero();
    let mut mean_ln = T::zero();
    for &x in values {
        let ly = (x / max).ln();
        let w = (shape * ly).exp();
        s0 = s0 + w;
        s1 = s1 + w * ly;
        mean_ln = mean_ln + ly;
    }
    s1 / s0 - T::one() / shape - mean_ln / n
}

/// Weibull MLE on the strictly positive values. The shape solves the profile equation
/// by Newton iteration safeguarded with bisection on `[1e-3, 1e3]`.
pub fn fit_weibull<T: Scalar>(sample: &Sample<T>) -> Result<FitResult<T>> {
    let pos = sample.positives();
    require(&pos, 2)?;
    let xs = pos.values();
    let max = xs.iter().copied().fold(T::zero(), T::max);
    let n = T::from_count(xs.len());
    let lys: Vec<T> = xs.iter().map(|&x| (x / max).ln()).collect();
    let mean_ln = lys.iter().copied().sum::<T>() / n;

    let eval = |k: T| -> (T, T, T) {
        let (mut s0, mut s1, mut s2) = (T::zero(), T::zero(), T::zero());
        for &ly in &lys {
            let w = (k * ly).exp();
            s0 = s0 + w;
            s1 = s1 + w * ly;
            s2 = s2 + w * ly * ly;
        }
        let g = s1 / s0 - T::one() / k - mean_ln;
        let dg = (s2 * s0 - s1 * s1) / (s0 * s0) + T::one() / (k * k);
        (g, dg, s0)
    };

    let (mut lo, mut hi) = (T::lit(WEIBULL_SHAPE_BRACKET.0), T::lit(WEIBULL_SHAPE_BRACKET.1));
    // g is increasing in k; no sign change means the data are degenerate (shape -> inf).
    if !(eval(hi).0 > T::zero()) || !(eval(lo).0 < T::zero()) {
        return Err(Error::NoConvergence { iterations: 0 });
    }
    let tol = (T::epsilon() * T::lit(1e4)).max(T::lit(1e-13));
    let (_, sd_ln) = mean_and_biased_sd(&lys);
    let mut k = (T::lit(1.2) / sd_ln).max(lo).min(hi);
    for _ in 0..WEIBULL_MAX_ITER {
        let (g, dg, s0) = eval(k);
        if g.abs() < tol {
            let scale = max * (s0 / n).powf(T::one() / k);
            return Ok(FitResult::finish(Distribution::Weibull { scale, shape: k }, &pos));
        }
        if g < T::zero() {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - g / dg;
        k = if newton > lo && newton < hi && dg > T::zero() { newton } else { T::lit(0.5) * (lo + hi) };
    }
    Err(Error::NoConvergence { iterations: WEIBULL_MAX_ITER })
}

pub fn fit_family<T: Scalar>(family: Family, sample: &Sample<T>) -> Result<FitResult<T>> {
    match family {
        Family::Normal => fit_normal(sample),
        Family::Lognormal => fit_lognormal(sample),
        Family::Weibull => fit_weibull(sample),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KsWeight {
    /// Plain sup-norm distance.
    #[default]
    None,
    /// Gap divided by `sqrt(F (1 - F))`, `F` clipped to `[KS_WEIGHT_CLIP, 1 - KS_WEIGHT_CLIP]`.
    Variance,
}

pub enum KsReference<'a, T> {
    Cdf(&'a dyn Fn(T) -> T),
    Sample(&'a Sample<T>),
}

fn weight<T: Scalar>(mode: KsWeight, f: T) -> T {
    match mode {
        KsWeight::None => T::one(),
        KsWeight::Variance => {
            let clip = T::lit(KS_WEIGHT_CLIP);
            let f = f.max(clip).min(T::one() - clip);
            T::one() / (f * (T::one() - f)).sqrt()
        }
    }
}

/// Kolmogorov-Smirnov distance of `sample` against a CDF or a second sample.
///
/// Against a CDF both one-sided gaps at every jump of the empirical CDF are checked,
/// so ties are handled exactly. In the two-sample case the weight uses the pooled
/// empirical CDF.
pub fn ks_statistic<T: Scalar>(sample: &Sample<T>, reference: KsReference<'_, T>, mode: KsWeight) -> Result<T> {
    if sample.is_empty() {
        return Err(Error::Empty("KS sample"));
    }
    let xs = sample.sorted();
    match reference {
        KsReference::Cdf(cdf) => Ok(ks_sorted_vs_cdf(&xs, cdf, mode)),
        KsReference::Sample(other) => {
            if other.is_empty() {
                return Err(Error::Empty("KS reference sample"));
            }
            Ok(ks_sorted_two_sample(&xs, &other.sorted(), mode))
        }
    }
}

/// One-sample KS on an already sorted slice.
pub fn ks_sorted_vs_cdf<T: Scalar>(xs: &[T], cdf: &dyn Fn(T) -> T, mode: KsWeight) -> T {
    let n = T::from_count(xs.len());
    let mut d = T::zero();
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        let below = T::from_count(i) / n;
        let upto = T::from_count(j + 1) / n;
        let gap = (upto - f).abs().max((f - below).abs());
        d = d.max(gap * weight(mode, f));
        i = j + 1;
    }
    d
}

/// Two-sample KS on already sorted slices.
pub fn ks_sorted_two_sample<T: Scalar>(a: &[T], b: &[T], mode: KsWeight) -> T {
    let (na, nb) = (T::from_count(a.len()), T::from_count(b.len()));
    let n_all = T::from_count(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = T::zero();
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        let fa = T::from_count(i) / na;
        let fb = T::from_count(j) / nb;
        let pooled = T::from_count(i + j) / n_all;
        d = d.max((fa - fb).abs() * weight(mode, pooled));
    }
    d
}

/// KS distance between two histograms over the same ordered bins.
pub fn ks_histograms<T: Scalar>(a: &[T], b: &[T]) -> T {
    let ta: T = a.iter().copied().sum();
    let tb: T = b.iter().copied().sum();
    let (mut ca, mut cb, mut d) = (T::zero(), T::zero(), T::zero());
    for k in 0..a.len().max(b.len()) {
        ca = ca + a.get(k).copied().unwrap_or_else(T::zero);
        cb = cb + b.get(k).copied().unwrap_or_else(T::zero);
        d = d.max((ca / ta - cb / tb).abs());
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub family: Family,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking<T> {
    /// Successful fits, most likely first.
    pub fits: Vec<FitResult<T>>,
    pub failures: Vec<FitFailure>,
    /// Size of the common positive sub-sample every family was fitted on.
    pub n: usize,
    pub excluded: usize,
}

impl<T: Scalar> Ranking<T> {
    pub fn best(&self) -> Option<Family> {
        self.fits.first().map(FitResult::family)
    }

    pub fn worst(&self) -> Option<Family> {
        self.fits.last().map(FitResult::family)
    }

    pub fn order(&self) -> Vec<Family> {
        self.fits.iter().map(FitResult::family).collect()
    }
}

/// Fits `families` on the common strictly positive sub-sample and sorts them by
/// descending log-likelihood.
pub fn rank_families<T: Scalar>(sample: &Sample<T>, families: &[Family]) -> Result<Ranking<T>> {
    let common = sample.positives();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for &family in families {
        match fit_family(family, &common) {
            Ok(f) => fits.push(f),
            Err(e) => failures.push(FitFailure { family, reason: e.to_string() }),
        }
    }
    if fits.is_empty() {
        return Err(Error::AllFitsFailed);
    }
    fits.sort_by(|a, b| b.log_likelihood.partial_cmp(&a.log_likelihood).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Ranking { fits, failures, n: common.len(), excluded: common.excluded() })
}

/// Reads one numeric column (matched case-insensitively) from a CSV with a header row.
pub fn read_values_csv<T: Scalar, R: std::io::Read>(input: R, source: &str, column: &str) -> Result<Vec<T>> {
    let csv_err = |e: csv::Error| Error::Csv { path: source.to_string(), message: e.to_string() };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let idx = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case(column))
        .ok_or_else(|| Error::MissingColumn { path: source.to_string(), column: column.to_string() })?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let raw = rec.get(idx).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::BadRow { path: source.to_string(), line, message: format!("`{raw}` is not a number") })?;
        out.push(T::lit(v));
    }
    Ok(out)
}
