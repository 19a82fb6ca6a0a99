//! Calibration of the binomial model against an empirical network.
//!
//! The density fixes `q` for every `(r, N_a)` cell. Each cell is scored twice: by the
//! R-squared of the mean-field `k_c1(k_c0)` curve against the empirical diagram, and by
//! the KS distance between pooled simulated proximities and the empirical ones. The
//! chosen cell comes from the intersection of the best cells of both layers. Countries
//! then get individual capability rates by inverting the diversification curve.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist_fit::{ks_sorted_two_sample, ks_histograms, KsWeight};
use crate::error::{Error, Result};
use crate::metrics::{density, diagram, proximity, Side};
use crate::model::{capabilities_from_diversification, expected_k_c1, leontief, sample_heterogeneous_world, sample_world, BinomialParams};
use crate::network::BipartiteNetwork;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, derive_seed2};

/// Bounds `r_c` is clipped to.
pub const RC_CLIP: f64 = 1e-6;

/// `q = ln(eta) / (N_a ln r)`, the requirement rate that makes `r^(q N_a) = eta`.
/// The value is returned even when it falls outside `(0, 1)`; see [`q_is_feasible`].
pub fn q_from_density<T: Scalar>(eta: T, r: T, n_a: usize) -> Result<T> {
    if !(eta > T::zero() && eta < T::one()) {
        return Err(Error::invalid("eta", eta.as_f64(), "must lie in (0, 1)"));
    }
    if !(r > T::zero() && r < T::one()) {
        return Err(Error::invalid("r", r.as_f64(), "must lie in (0, 1)"));
    }
    if n_a == 0 {
        return Err(Error::invalid("n_a", 0.0, "must be at least 1"));
    }
    Ok(eta.ln() / (T::from_count(n_a) * r.ln()))
}

/// Whether `q` is a usable probability. Values within `1e-9` of the ends count as
/// infeasible so that the analytic boundary `r = eta^(1/N_a)` is flagged despite rounding.
pub fn q_is_feasible<T: Scalar>(q: T) -> bool {
    let tol = T::lit(1e-9);
    q > tol && q < T::one() - tol
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub r_values: Vec<f64>,
    pub na_values: Vec<usize>,
}

impl Default for GridAxes {
    fn default() -> Self {
        GridAxes::from_ranges(0.50, 0.98, 0.02, 10, 200, 5).expect("default axes are valid")
    }
}

impl GridAxes {
    pub fn from_ranges(r_min: f64, r_max: f64, r_step: f64, na_min: usize, na_max: usize, na_step: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max < 1.0 && r_min <= r_max) {
            return Err(Error::invalid("r range", r_min, "needs 0 < r_min <= r_max < 1"));
        }
        if !(r_step > 0.0) {
            return Err(Error::invalid("r_step", r_step, "must be positive"));
        }
        if na_min == 0 || na_min > na_max {
            return Err(Error::invalid("na range", na_min as f64, "needs 1 <= na_min <= na_max"));
        }
        if na_step == 0 {
            return Err(Error::invalid("na_step", 0.0, "must be positive"));
        }
        let steps = ((r_max - r_min) / r_step + 1e-9).floor() as usize;
        // Rounded to 12 decimals so that values print as their nominal grid labels.
        let r_values = (0..=steps).map(|i| ((r_min + i as f64 * r_step) * 1e12).round() / 1e12).collect();
        let na_values = (na_min..=na_max).step_by(na_step).collect();
        Ok(GridAxes { r_values, na_values })
    }

    pub fn len(&self) -> usize {
        self.r_values.len() * self.na_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in `r`-major order.
    pub fn cells(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.r_values.iter().flat_map(move |&r| self.na_values.iter().map(move |&na| (r, na)))
    }

    pub fn r_step(&self) -> f64 {
        step(&self.r_values)
    }

    pub fn na_step(&self) -> f64 {
        step(&self.na_values.iter().map(|&n| n as f64).collect::<Vec<_>>())
    }
}

fn step(v: &[f64]) -> f64 {
    if v.len() < 2 {
        0.0
    } else {
        v[1] - v[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub r: f64,
    pub n_a: usize,
    pub q: f64,
    pub feasible: bool,
    pub r2: Option<f64>,
    pub ks: Option<f64>,
    pub seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub eta: f64,
    pub n_c: usize,
    pub n_p: usize,
    pub axes: GridAxes,
    pub cells: Vec<GridCell>,
}

impl CalibrationGrid {
    /// Cells with `q` from the density, nothing scored yet.
    pub fn new(eta: f64, n_c: usize, n_p: usize, axes: &GridAxes) -> Result<Self> {
        let cells = axes
            .cells()
            .map(|(r, n_a)| {
                let q = q_from_density(eta, r, n_a)?;
                Ok(GridCell { r, n_a, q, feasible: q_is_feasible(q), r2: None, ks: None, seeds: 0 })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CalibrationGrid { eta, n_c, n_p, axes: axes.clone(), cells })
    }

    pub fn params(&self, cell: &GridCell) -> Result<BinomialParams<f64>> {
        BinomialParams::new(cell.r, cell.q, cell.n_a, self.n_c, self.n_p)
    }

    pub fn cell(&self, r: f64, n_a: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.n_a == n_a && (c.r - r).abs() < 1e-9)
    }

    /// `r,na,q,r2,ks,feasible`; unscored values are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "na", "q", "r2", "ks", "feasible"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            w.write_record([
                c.r.to_string(),
                c.n_a.to_string(),
                c.q.to_string(),
                opt(c.r2),
                opt(c.ks),
                c.feasible.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Scores every feasible cell by the R-squared of the mean-field `k_c1(k_c0)` curve
/// against the empirical `(k_c0, k_c1)` pairs.
pub fn fit_kc0_kc1_grid(grid: &mut CalibrationGrid, diagram: &[(f64, f64)]) -> Result<()> {
    let points: Vec<(f64, f64)> = diagram.iter().copied().filter(|&(k0, _)| k0 > 0.0).collect();
    if points.len() < 3 {
        return Err(Error::DegenerateDiagram("fewer than 3 points with positive k_c0"));
    }
    if points.iter().all(|&(k0, _)| k0 == points[0].0) {
        return Err(Error::DegenerateDiagram("all k_c0 are equal"));
    }
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::DegenerateDiagram("k_c1 is constant"));
    }
    let (n_c, n_p) = (grid.n_c, grid.n_p);
    grid.cells.par_iter_mut().filter(|c| c.feasible).try_for_each(|cell| -> Result<()> {
        let p = BinomialParams::new(cell.r, cell.q, cell.n_a, n_c, n_p)?;
        let mut ss_res = 0.0;
        for &(k0, k1) in &points {
            ss_res += (k1 - expected_k_c1(&p, k0)?).powi(2);
        }
        cell.r2 = Some(1.0 - ss_res / ss_tot);
        Ok(())
    })
}

/// Off-diagonal proximities of the network restricted to countries and products with
/// at least one edge.
pub fn proximity_sample(net: &BipartiteNetwork) -> Vec<f64> {
    let (active, _, _) = net.active();
    proximity::<f64>(&active).upper_triangle().to_vec()
}

/// Pooled proximity sample of `seeds` simulated networks of one cell, sorted.
pub fn simulated_proximities(p: &BinomialParams<f64>, cell_index: u64, seeds: usize, master_seed: u64) -> Vec<f64> {
    let mut pooled: Vec<f64> = (0..seeds)
        .flat_map(|s| proximity_sample(&leontief(&sample_world(p, derive_seed2(master_seed, cell_index, s as u64)))))
        .collect();
    pooled.sort_by(f64::total_cmp);
    pooled
}

/// Scores every feasible cell by the KS distance between pooled simulated proximities
/// and `empirical_phi`. Cell `i` uses seeds derived from `(master_seed, i)`, so results
/// do not depend on scheduling.
pub fn proximity_ks_grid(
    grid: &mut CalibrationGrid,
    empirical_phi: &[f64],
    seeds_per_cell: usize,
    master_seed: u64,
    weight: KsWeight,
) -> Result<()> {
    if empirical_phi.is_empty() {
        return Err(Error::Empty("empirical proximity sample"));
    }
    if seeds_per_cell == 0 {
        return Err(Error::invalid("seeds_per_cell", 0.0, "must be at least 1"));
    }
    let mut empirical = empirical_phi.to_vec();
    empirical.sort_by(f64::total_cmp);
    let (n_c, n_p) = (grid.n_c, grid.n_p);
    grid.cells.par_iter_mut().enumerate().filter(|(_, c)| c.feasible).try_for_each(|(i, cell)| -> Result<()> {
        let p = BinomialParams::new(cell.r, cell.q, cell.n_a, n_c, n_p)?;
        let simulated = simulated_proximities(&p, i as u64, seeds_per_cell, master_seed);
        if simulated.is_empty() {
            return Err(Error::Empty("simulated proximity sample"));
        }
        cell.ks = Some(ks_sorted_two_sample(&simulated, &empirical, weight));
        cell.seeds = seeds_per_cell;
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChosenPoint {
    pub r: f64,
    pub n_a: usize,
    pub q: f64,
    pub r2: f64,
    pub ks: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub r2_quantile: f64,
    pub ks_quantile: f64,
    pub r2_cells: usize,
    pub ks_cells: usize,
    /// Cells in both regions, in grid order.
    pub cells: Vec<GridCell>,
    pub chosen: ChosenPoint,
}

fn top_cells(cells: &[&GridCell], quantile: f64, key: impl Fn(&GridCell) -> f64) -> Vec<usize> {
    // Indices into `cells` of the best ceil(quantile * n) by descending key, with ties at
    // the cut included.
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| key(cells[b]).total_cmp(&key(cells[a])));
    let take = ((quantile * cells.len() as f64).ceil() as usize).clamp(1, cells.len());
    let cut = key(cells[order[take - 1]]);
    order.into_iter().filter(|&i| key(cells[i]) >= cut).collect()
}

/// Intersects the top `r2_quantile` of cells by R-squared with the bottom `ks_quantile`
/// by KS and picks the cell with the lowest KS, then the higher R-squared, then the
/// smaller `N_a`, then the smaller `r`.
pub fn intersect(grid: &CalibrationGrid, r2_quantile: f64, ks_quantile: f64) -> Result<Region> {
    for (name, q) in [("r2_quantile", r2_quantile), ("ks_quantile", ks_quantile)] {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid(name, q, "must lie in (0, 1]"));
        }
    }
    let scored: Vec<&GridCell> = grid.cells.iter().filter(|c| c.feasible && c.r2.is_some() && c.ks.is_some()).collect();
    if scored.is_empty() {
        return Err(Error::Empty("scored calibration cells"));
    }
    let by_r2 = top_cells(&scored, r2_quantile, |c| c.r2.unwrap());
    let by_ks = top_cells(&scored, ks_quantile, |c| -c.ks.unwrap());
    let mut both: Vec<usize> = by_r2.iter().copied().filter(|i| by_ks.contains(i)).collect();
    if both.is_empty() {
        return Err(Error::EmptyIntersection { r2_cells: by_r2.len(), ks_cells: by_ks.len() });
    }
    both.sort_unstable();
    let best = *both
        .iter()
        .min_by(|&&a, &&b| {
            let (x, y) = (scored[a], scored[b]);
            x.ks.unwrap()
                .total_cmp(&y.ks.unwrap())
                .then(y.r2.unwrap().total_cmp(&x.r2.unwrap()))
                .then(x.n_a.cmp(&y.n_a))
                .then(x.r.total_cmp(&y.r))
        })
        .expect("non-empty");
    let c = scored[best];
    Ok(Region {
        r2_quantile,
        ks_quantile,
        r2_cells: by_r2.len(),
        ks_cells: by_ks.len(),
        cells: both.iter().map(|&i| scored[i].clone()).collect(),
        chosen: ChosenPoint { r: c.r, n_a: c.n_a, q: c.q, r2: c.r2.unwrap(), ks: c.ks.unwrap() },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcProfile {
    /// Capability counts from inverting the diversification curve, before clipping.
    pub k_ca: Vec<f64>,
    pub r_c: Vec<f64>,
    pub clipped_low: usize,
    pub clipped_high: usize,
}

/// Per-country capability rates `r_c = k_ca / N_a`, clipped to `[RC_CLIP, 1 - RC_CLIP]`.
pub fn heterogeneous_rc(k_c0: &[f64], p: &BinomialParams<f64>) -> Result<RcProfile> {
    p.validate()?;
    let mut out = RcProfile { k_ca: Vec::with_capacity(k_c0.len()), r_c: Vec::with_capacity(k_c0.len()), clipped_low: 0, clipped_high: 0 };
    for &k in k_c0 {
        let k_ca = capabilities_from_diversification(p, k)?;
        let raw = k_ca / p.n_a as f64;
        let r_c = if raw < RC_CLIP {
            out.clipped_low += 1;
            RC_CLIP
        } else if raw > 1.0 - RC_CLIP {
            out.clipped_high += 1;
            1.0 - RC_CLIP
        } else {
            raw
        };
        out.k_ca.push(k_ca);
        out.r_c.push(r_c);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub k_c0: usize,
    pub empirical: f64,
    pub simulated: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversificationReport {
    pub replicates: usize,
    pub seed: u64,
    /// Countries per diversification value `0..=N_p`; `simulated` is averaged over replicates.
    pub histogram: Vec<HistogramRow>,
    pub ks: f64,
    /// Mean and standard deviation across replicates of each country's diversification.
    pub country_mean: Vec<f64>,
    pub country_sd: Vec<f64>,
}

impl DiversificationReport {
    /// `k_c0,empirical,simulated`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k_c0", "empirical", "simulated"])?;
        for row in &self.histogram {
            w.write_record([row.k_c0.to_string(), row.empirical.to_string(), row.simulated.to_string()])?;
        }
        w.flush()
    }
}

/// Simulates `replicates` worlds where country `c` holds capabilities at rate `r_c[c]`
/// and compares the averaged diversification histogram with `target_k_c0`.
pub fn diversification_fit_report(
    r_c: &[f64],
    q: f64,
    n_a: usize,
    n_p: usize,
    target_k_c0: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<DiversificationReport> {
    if r_c.len() != target_k_c0.len() {
        return Err(Error::Dimension(format!("{} rates for {} countries", r_c.len(), target_k_c0.len())));
    }
    if replicates == 0 {
        return Err(Error::invalid("replicates", 0.0, "must be at least 1"));
    }
    if let Some(&k) = target_k_c0.iter().find(|&&k| k > n_p) {
        return Err(Error::invalid("k_c0", k as f64, "exceeds the number of products"));
    }
    sample_heterogeneous_world(r_c, q, n_a, n_p, 0)?;
    let n_c = r_c.len();
    let per_replicate: Vec<Vec<usize>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let world = sample_heterogeneous_world(r_c, q, n_a, n_p, derive_seed(seed, i as u64)).expect("validated");
            leontief(&world).diversification()
        })
        .collect();
    let mut hist = vec![0u64; n_p + 1];
    let mut sum = vec![0.0; n_c];
    let mut sum_sq = vec![0.0; n_c];
    for div in &per_replicate {
        for (c, &d) in div.iter().enumerate() {
            hist[d] += 1;
            sum[c] += d as f64;
            sum_sq[c] += (d as f64).powi(2);
        }
    }
    let reps = replicates as f64;
    let simulated: Vec<f64> = hist.iter().map(|&h| h as f64 / reps).collect();
    let mut empirical = vec![0.0; n_p + 1];
    for &k in target_k_c0 {
        empirical[k] += 1.0;
    }
    let country_mean: Vec<f64> = sum.iter().map(|s| s / reps).collect();
    let country_sd = sum_sq
        .iter()
        .zip(&country_mean)
        .map(|(sq, m)| if replicates > 1 { ((sq - reps * m * m) / (reps - 1.0)).max(0.0).sqrt() } else { 0.0 })
        .collect();
    let ks = ks_histograms(&simulated, &empirical);
    let histogram = (0..=n_p)
        .filter(|&k| empirical[k] > 0.0 || simulated[k] > 0.0)
        .map(|k| HistogramRow { k_c0: k, empirical: empirical[k], simulated: simulated[k] })
        .collect();
    Ok(DiversificationReport { replicates, seed, histogram, ks, country_mean, country_sd })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneousReport {
    pub heterogeneous: DiversificationReport,
    /// Same comparison with every country at the common rate `r`.
    pub homogeneous: DiversificationReport,
}

/// Heterogeneous refit against the homogeneous baseline at the same `(q, N_a)`.
pub fn heterogeneous_fit_report(
    r_c: &[f64],
    p: &BinomialParams<f64>,
    target_k_c0: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<HeterogeneousReport> {
    p.validate()?;
    let heterogeneous = diversification_fit_report(r_c, p.q, p.n_a, p.n_p, target_k_c0, replicates, seed)?;
    let common = vec![p.r; r_c.len()];
    let homogeneous = diversification_fit_report(&common, p.q, p.n_a, p.n_p, target_k_c0, replicates, seed)?;
    Ok(HeterogeneousReport { heterogeneous, homogeneous })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub axes: GridAxes,
    pub seeds_per_cell: usize,
    pub seed: u64,
    pub r2_quantile: f64,
    pub ks_quantile: f64,
    pub ks_weight: KsWeight,
    /// Replicates of the heterogeneous refit; 0 skips it.
    pub replicates: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            axes: GridAxes::default(),
            seeds_per_cell: 5,
            seed: 0,
            r2_quantile: 0.1,
            ks_quantile: 0.1,
            ks_weight: KsWeight::None,
            replicates: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountryRate {
    pub country: String,
    pub k_c0: usize,
    pub k_ca: f64,
    pub r_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub seed: u64,
    pub n_c: usize,
    pub n_p: usize,
    pub eta: f64,
    pub dropped_countries: Vec<String>,
    pub dropped_products: Vec<String>,
    pub region: Region,
    pub countries: Vec<CountryRate>,
    pub clipped_low: usize,
    pub clipped_high: usize,
    pub heterogeneous_ks: Option<f64>,
    pub homogeneous_ks: Option<f64>,
}

impl CalibrationResult {
    pub fn chosen(&self) -> &ChosenPoint {
        &self.region.chosen
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationOutcome {
    pub grid: CalibrationGrid,
    pub result: CalibrationResult,
    pub heterogeneous: Option<HeterogeneousReport>,
}

/// Full calibration of `net`. Countries and products without edges are dropped first.
pub fn calibrate(net: &BipartiteNetwork, config: &CalibrationConfig) -> Result<CalibrationOutcome> {
    let (active, dropped_countries, dropped_products) = net.active();
    let (n_c, n_p) = (active.n_countries(), active.n_products());
    let eta: f64 = density(&active)?;
    if !(eta < 1.0) {
        return Err(Error::invalid("eta", eta, "a complete network cannot be calibrated"));
    }
    let pairs: Vec<(f64, f64)> = diagram::<f64>(&active, Side::Country).into_iter().map(|(k0, k1)| (k0 as f64, k1)).collect();
    let mut grid = CalibrationGrid::new(eta, n_c, n_p, &config.axes)?;
    fit_kc0_kc1_grid(&mut grid, &pairs)?;
    let phi = proximity_sample(&active);
    proximity_ks_grid(&mut grid, &phi, config.seeds_per_cell, config.seed, config.ks_weight)?;
    let region = intersect(&grid, config.r2_quantile, config.ks_quantile)?;

    let chosen = BinomialParams::new(region.chosen.r, region.chosen.q, region.chosen.n_a, n_c, n_p)?;
    let k_c0 = active.diversification();
    let k_f: Vec<f64> = k_c0.iter().map(|&k| k as f64).collect();
    let rc = heterogeneous_rc(&k_f, &chosen)?;
    let countries = active
        .countries()
        .iter()
        .enumerate()
        .map(|(c, name)| CountryRate { country: name.clone(), k_c0: k_c0[c], k_ca: rc.k_ca[c], r_c: rc.r_c[c] })
        .collect();
    let heterogeneous = if config.replicates > 0 {
        Some(heterogeneous_fit_report(&rc.r_c, &chosen, &k_c0, config.replicates, derive_seed(config.seed, u64::MAX))?)
    } else {
        None
    };
    let result = CalibrationResult {
        seed: config.seed,
        n_c,
        n_p,
        eta,
        dropped_countries,
        dropped_products,
        region,
        countries,
        clipped_low: rc.clipped_low,
        clipped_high: rc.clipped_high,
        heterogeneous_ks: heterogeneous.as_ref().map(|h| h.heterogeneous.ks),
        homogeneous_ks: heterogeneous.as_ref().map(|h| h.homogeneous.ks),
    };
    Ok(CalibrationOutcome { grid, result, heterogeneous })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expected_diversification;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn q_examples() {
        assert_relative_eq!(q_from_density(0.1353, 0.87, 80).unwrap(), 0.1795, epsilon = 1e-3);
        assert_relative_eq!(q_from_density(0.0854, 0.89, 70).unwrap(), 0.3016, epsilon = 1e-3);
        let eta: f64 = 0.2;
        let r = eta.powf(1.0 / 40.0);
        let q = q_from_density(eta, r, 40).unwrap();
        assert_relative_eq!(q, 1.0, epsilon = 1e-12);
        assert!(!q_is_feasible(q));
        assert!(!q_is_feasible(q_from_density(0.2, 0.99, 10).unwrap()));
        assert!(q_is_feasible(q_from_density(0.2, 0.3, 40).unwrap()));
        assert!(q_from_density(1.0, 0.5, 4).is_err());
        assert!(q_from_density(0.5, 0.0, 4).is_err());
        assert!(q_from_density(0.5f32, 0.9, 4).is_ok());
    }

    #[test]
    fn default_axes() {
        let a = GridAxes::default();
        assert_eq!(a.r_values.len(), 25);
        assert_eq!(a.r_values[0], 0.5);
        assert_eq!(*a.r_values.last().unwrap(), 0.98);
        assert_eq!(a.r_values[3], 0.56);
        assert_eq!(a.na_values.len(), 39);
        assert_eq!(a.na_values[0], 10);
        assert_eq!(*a.na_values.last().unwrap(), 200);
        assert_relative_eq!(a.r_step(), 0.02, epsilon = 1e-12);
        assert_eq!(a.na_step(), 5.0);
        assert!(GridAxes::from_ranges(0.5, 1.0, 0.1, 1, 2, 1).is_err());
        assert!(GridAxes::from_ranges(0.5, 0.9, 0.1, 3, 2, 1).is_err());
    }

    #[test]
    fn infeasible_cells_are_marked_not_skipped() {
        let g = CalibrationGrid::new(0.1, 10, 20, &GridAxes::from_ranges(0.1, 0.9, 0.4, 1, 5, 4).unwrap()).unwrap();
        assert_eq!(g.cells.len(), 6);
        assert!(g.cells.iter().any(|c| !c.feasible));
        assert!(g.cells.iter().any(|c| c.feasible));
    }

    fn planted_diagram(r: f64, n_a: usize, eta: f64, n_c: usize, n_p: usize) -> Vec<(f64, f64)> {
        let q = q_from_density(eta, r, n_a).unwrap();
        let p = BinomialParams::new(r, q, n_a, n_c, n_p).unwrap();
        (1..=40)
            .map(|i| {
                let k0 = expected_diversification(&p, n_a as f64 * i as f64 / 41.0).unwrap();
                (k0, expected_k_c1(&p, k0).unwrap())
            })
            .collect()
    }

    #[test]
    fn r2_layer_is_exact_at_the_generating_cell() {
        let d = planted_diagram(0.89, 70, 0.0854, 232, 5109);
        let axes = GridAxes::from_ranges(0.51, 0.97, 0.02, 10, 200, 5).unwrap();
        let mut g = CalibrationGrid::new(0.0854, 232, 5109, &axes).unwrap();
        fit_kc0_kc1_grid(&mut g, &d).unwrap();
        assert_relative_eq!(g.cell(0.89, 70).unwrap().r2.unwrap(), 1.0, epsilon = 1e-9);
        assert!(g.cells.iter().all(|c| c.feasible == c.r2.is_some()));
    }

    #[test]
    fn r2_layer_recovers_generating_cell_on_default_grid() {
        let d = planted_diagram(0.88, 70, 0.0854, 232, 5109);
        let mut g = CalibrationGrid::new(0.0854, 232, 5109, &GridAxes::default()).unwrap();
        fit_kc0_kc1_grid(&mut g, &d).unwrap();
        let best = g.cells.iter().filter(|c| c.r2.is_some()).max_by(|a, b| a.r2.unwrap().total_cmp(&b.r2.unwrap())).unwrap();
        assert_eq!((best.n_a, (best.r * 100.0).round() as i64), (70, 88));
    }

    #[test]
    fn r2_layer_guards() {
        let mut g = CalibrationGrid::new(0.1, 10, 20, &GridAxes::default()).unwrap();
        assert!(matches!(fit_kc0_kc1_grid(&mut g, &[(1.0, 2.0), (2.0, 2.0), (3.0, 2.0)]), Err(Error::DegenerateDiagram(_))));
        assert!(matches!(fit_kc0_kc1_grid(&mut g, &[(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)]), Err(Error::DegenerateDiagram(_))));
        assert!(matches!(fit_kc0_kc1_grid(&mut g, &[(1.0, 1.0), (2.0, 2.0)]), Err(Error::DegenerateDiagram(_))));
    }

    #[test]
    fn ks_layer_identity_and_sampling_noise() {
        let p = BinomialParams::new(0.8, q_from_density(0.15, 0.8, 40).unwrap(), 40, 60, 150).unwrap();
        let a = simulated_proximities(&p, 3, 5, 11);
        assert_eq!(ks_sorted_two_sample(&a, &a, KsWeight::None), 0.0);
        // Two disjoint seed sets at the same cell. Proximities within one world are
        // dependent, so compare against the critical value for the number of worlds'
        // worth of independent information: the 99% two-sample critical value with
        // effective sizes equal to the number of products per pool.
        let b = simulated_proximities(&p, 3, 5, 12);
        let d = ks_sorted_two_sample(&a, &b, KsWeight::None);
        let n_eff: f64 = 5.0 * 150.0;
        let crit = 1.628 * (2.0 / n_eff).sqrt();
        assert!(d < crit, "{d} >= {crit}");
    }

    #[test]
    fn ks_layer_ranks_the_generating_cell_low() {
        let axes = GridAxes::from_ranges(0.6, 0.96, 0.04, 20, 100, 10).unwrap();
        let (r, na, eta) = (0.8, 60, 0.15);
        let q = q_from_density(eta, r, na).unwrap();
        let p = BinomialParams::new(r, q, na, 100, 500).unwrap();
        let target = proximity_sample(&leontief(&sample_world(&p, 999)));
        let mut g = CalibrationGrid::new(eta, 100, 500, &axes).unwrap();
        proximity_ks_grid(&mut g, &target, 5, 5, KsWeight::None).unwrap();
        let mut ks: Vec<f64> = g.cells.iter().filter_map(|c| c.ks).collect();
        ks.sort_by(f64::total_cmp);
        let decile = ks[(ks.len() as f64 * 0.1).ceil() as usize - 1];
        let at = g.cell(r, na).unwrap().ks.unwrap();
        assert!(at <= decile, "{at} > {decile}");
    }

    #[test]
    fn ks_grid_is_deterministic_under_parallelism() {
        let axes = GridAxes::from_ranges(0.7, 0.9, 0.1, 20, 40, 10).unwrap();
        let p = BinomialParams::new(0.8, q_from_density(0.2, 0.8, 30).unwrap(), 30, 40, 80).unwrap();
        let target = proximity_sample(&leontief(&sample_world(&p, 1)));
        let run = || {
            let mut g = CalibrationGrid::new(0.2, 40, 80, &axes).unwrap();
            proximity_ks_grid(&mut g, &target, 3, 77, KsWeight::None).unwrap();
            g
        };
        let a = run();
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        assert_eq!(a, b);
        assert!(proximity_ks_grid(&mut run(), &[], 3, 1, KsWeight::None).is_err());
    }

    fn cell(r: f64, n_a: usize, r2: f64, ks: f64) -> GridCell {
        GridCell { r, n_a, q: 0.1, feasible: true, r2: Some(r2), ks: Some(ks), seeds: 5 }
    }

    fn grid_of(cells: Vec<GridCell>) -> CalibrationGrid {
        CalibrationGrid { eta: 0.1, n_c: 1, n_p: 1, axes: GridAxes { r_values: vec![], na_values: vec![] }, cells }
    }

    #[test]
    fn intersection_examples() {
        let g = grid_of(vec![cell(0.5, 10, 0.9, 0.1), cell(0.6, 10, 0.5, 0.5), cell(0.7, 10, 0.4, 0.6)]);
        let region = intersect(&g, 0.1, 0.1).unwrap();
        assert_eq!((region.chosen.r, region.chosen.n_a), (0.5, 10));
        let g = grid_of(vec![cell(0.5, 10, 0.9, 0.6), cell(0.6, 10, 0.5, 0.1), cell(0.7, 10, 0.4, 0.5)]);
        assert!(matches!(intersect(&g, 0.1, 0.1), Err(Error::EmptyIntersection { r2_cells: 1, ks_cells: 1 })));
        // Ties in KS broken by R-squared, then by smaller N_a.
        let g = grid_of(vec![cell(0.5, 20, 0.8, 0.1), cell(0.5, 10, 0.8, 0.1), cell(0.6, 10, 0.7, 0.1)]);
        let region = intersect(&g, 1.0, 1.0).unwrap();
        assert_eq!((region.chosen.r, region.chosen.n_a), (0.5, 10));
        assert_eq!(region.cells.len(), 3);
        let mut infeasible = cell(0.9, 10, 1.0, 0.0);
        infeasible.feasible = false;
        let g = grid_of(vec![infeasible, cell(0.5, 10, 0.2, 0.3)]);
        assert_eq!(intersect(&g, 0.5, 0.5).unwrap().chosen.r, 0.5);
        assert!(intersect(&g, 0.0, 0.5).is_err());
    }

    #[test]
    fn rc_examples() {
        let p = BinomialParams::new(0.85, 0.2, 60, 100, 500).unwrap();
        let rc = heterogeneous_rc(&[500.0], &p).unwrap();
        assert_eq!(rc.r_c[0], 1.0 - RC_CLIP);
        assert_eq!(rc.clipped_high, 1);
        let floor = 500.0 * 0.8f64.powi(60);
        let rc = heterogeneous_rc(&[floor, 10.0, 50.0, 200.0], &p).unwrap();
        assert_eq!(rc.r_c[0], RC_CLIP);
        assert_eq!(rc.clipped_low, 1);
        assert!(rc.r_c.windows(2).all(|w| w[1] > w[0]));
        assert!(heterogeneous_rc(&[0.0], &p).is_err());
    }

    #[test]
    fn heterogeneous_report_means_track_targets() {
        let p = BinomialParams::new(0.85, 0.2, 40, 30, 300).unwrap();
        let targets: Vec<usize> = (0..30).map(|i| 5 + i * 9).collect();
        let k: Vec<f64> = targets.iter().map(|&t| t as f64).collect();
        let rc = heterogeneous_rc(&k, &p).unwrap();
        let rep = diversification_fit_report(&rc.r_c, p.q, p.n_a, p.n_p, &targets, 400, 3).unwrap();
        for c in 0..30 {
            let se = rep.country_sd[c] / 400f64.sqrt();
            assert!((rep.country_mean[c] - targets[c] as f64).abs() < 3.0 * se + 1e-9, "country {c}: {} vs {}", rep.country_mean[c], targets[c]);
        }
        let total: f64 = rep.histogram.iter().map(|h| h.simulated).sum();
        assert_relative_eq!(total, 30.0, epsilon = 1e-9);
        assert!(diversification_fit_report(&rc.r_c, p.q, p.n_a, p.n_p, &targets[1..], 4, 3).is_err());
    }

    #[test]
    fn homogeneous_rates_reduce_to_the_baseline() {
        let p = BinomialParams::new(0.8, 0.1, 30, 20, 200).unwrap();
        let targets: Vec<usize> = (0..20).map(|i| 20 + i * 5).collect();
        let rep = heterogeneous_fit_report(&[0.8; 20], &p, &targets, 200, 9).unwrap();
        assert_eq!(rep.heterogeneous, rep.homogeneous);
        let other = heterogeneous_fit_report(&[0.8; 20], &p, &targets, 200, 10).unwrap();
        assert!((other.homogeneous.ks - rep.homogeneous.ks).abs() < 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn density_constraint_round_trips(eta in 0.01f64..0.9, r in 0.3f64..0.995, n_a in 1usize..300) {
            let q = q_from_density(eta, r, n_a).unwrap();
            prop_assume!(q_is_feasible(q));
            let back = r.powf(q * n_a as f64);
            prop_assert!((back - eta).abs() < 1e-12);
        }
    }
}
