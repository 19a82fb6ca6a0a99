//! Randomized ensembles that keep selected degree constraints of a network.
//!
//! | model | operation                          | preserved exactly              |
//! |-------|------------------------------------|--------------------------------|
//! | 1     | uniform placement of the edges     | edge count                     |
//! | 2     | shuffle within each column         | every `k_p0` (ubiquity)        |
//! | 3     | shuffle within each row            | every `k_c0` (diversification) |
//! | 4     | checkerboard swap chain            | both degree sequences          |
//!
//! Model 2 and 3 are labelled by what they preserve: shuffling a column keeps its sum.

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::metrics::{diagram, ols_slope, Side};
use crate::network::BipartiteNetwork;
use crate::seed::{derive_seed, rng};

pub const DEFAULT_SWAP_FACTOR: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NullModel {
    EdgeCount,
    ColumnShuffle,
    RowShuffle,
    DegreeSwap,
}

impl NullModel {
    pub const ALL: [NullModel; 4] =
        [NullModel::EdgeCount, NullModel::ColumnShuffle, NullModel::RowShuffle, NullModel::DegreeSwap];

    /// Models are numbered 1..=4 as in the table above.
    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn preserves(self) -> &'static str {
        match self {
            NullModel::EdgeCount => "edge count",
            NullModel::ColumnShuffle => "product ubiquity (column sums)",
            NullModel::RowShuffle => "country diversification (row sums)",
            NullModel::DegreeSwap => "both degree sequences",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub model: NullModel,
    pub replicates: usize,
    pub seed: u64,
    pub swap_factor: usize,
}

impl EnsembleSpec {
    pub fn new(model: NullModel, replicates: usize, seed: u64) -> Self {
        EnsembleSpec { model, replicates, seed, swap_factor: DEFAULT_SWAP_FACTOR }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", 0.0, "must be at least 1"));
        }
        if self.swap_factor == 0 {
            return Err(Error::invalid("swap_factor", 0.0, "must be at least 1"));
        }
        Ok(())
    }
}

pub fn null1(net: &BipartiteNetwork, seed: u64) -> BipartiteNetwork {
    let (n_c, n_p) = (net.n_countries(), net.n_products());
    let mut rng = rng(seed);
    let mut adj = BitMatrix::zeros(n_c, n_p);
    for cell in index::sample(&mut rng, n_c * n_p, net.edge_count()) {
        adj.set(cell / n_p, cell % n_p, true);
    }
    net.with_adjacency(adj)
}

/// Shuffles the entries inside every column.
pub fn null2(net: &BipartiteNetwork, seed: u64) -> BipartiteNetwork {
    let (n_c, n_p) = (net.n_countries(), net.n_products());
    let mut rng = rng(seed);
    let mut adj = BitMatrix::zeros(n_c, n_p);
    let mut column = vec![false; n_c];
    for p in 0..n_p {
        for (c, v) in column.iter_mut().enumerate() {
            *v = net.get(c, p);
        }
        column.shuffle(&mut rng);
        for (c, &v) in column.iter().enumerate() {
            if v {
                adj.set(c, p, true);
            }
        }
    }
    net.with_adjacency(adj)
}

/// Shuffles the entries inside every row.
pub fn null3(net: &BipartiteNetwork, seed: u64) -> BipartiteNetwork {
    let (n_c, n_p) = (net.n_countries(), net.n_products());
    let mut rng = rng(seed);
    let mut adj = BitMatrix::zeros(n_c, n_p);
    let mut row = vec![false; n_p];
    for c in 0..n_c {
        for (p, v) in row.iter_mut().enumerate() {
            *v = net.get(c, p);
        }
        row.shuffle(&mut rng);
        for (p, &v) in row.iter().enumerate() {
            if v {
                adj.set(c, p, true);
            }
        }
    }
    net.with_adjacency(adj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwapOutcome {
    pub network: BipartiteNetwork,
    pub attempts: usize,
    pub accepted: usize,
}

impl SwapOutcome {
    /// No checkerboard was found; the network came back unchanged.
    pub fn no_swap(&self) -> bool {
        self.accepted == 0
    }
}

/// Degree-preserving checkerboard swaps: edges `(c,p)`, `(c',p')` with
/// `M_cp' = M_c'p = 0` are rewired to `(c,p')`, `(c',p)`. Runs `swap_factor * edges`
/// attempts; rejected attempts count.
pub fn null4(net: &BipartiteNetwork, spec: &EnsembleSpec) -> SwapOutcome {
    null4_seeded(net, spec.swap_factor, spec.seed)
}

fn null4_seeded(net: &BipartiteNetwork, swap_factor: usize, seed: u64) -> SwapOutcome {
    let mut adj = net.adjacency().clone();
    let mut edges: Vec<(usize, usize)> =
        (0..net.n_countries()).flat_map(|c| adj.row_ones(c).map(move |p| (c, p)).collect::<Vec<_>>()).collect();
    let attempts = swap_factor * edges.len();
    let mut accepted = 0;
    if edges.len() >= 2 {
        let mut rng = rng(seed);
        for _ in 0..attempts {
            let i = rng.random_range(0..edges.len());
            let j = rng.random_range(0..edges.len());
            let (c1, p1) = edges[i];
            let (c2, p2) = edges[j];
            if c1 == c2 || p1 == p2 || adj.get(c1, p2) || adj.get(c2, p1) {
                continue;
            }
            adj.set(c1, p1, false);
            adj.set(c2, p2, false);
            adj.set(c1, p2, true);
            adj.set(c2, p1, true);
            edges[i] = (c1, p2);
            edges[j] = (c2, p1);
            accepted += 1;
        }
    }
    SwapOutcome { network: net.with_adjacency(adj), attempts, accepted }
}

/// One replicate of the model in `spec`, seeded with `seed`.
pub fn randomize(net: &BipartiteNetwork, model: NullModel, swap_factor: usize, seed: u64) -> BipartiteNetwork {
    match model {
        NullModel::EdgeCount => null1(net, seed),
        NullModel::ColumnShuffle => null2(net, seed),
        NullModel::RowShuffle => null3(net, seed),
        NullModel::DegreeSwap => null4_seeded(net, swap_factor, seed).network,
    }
}

/// Replicate networks with seeds `seed ^ splitmix64(i)`, in replicate order.
pub fn ensemble(net: &BipartiteNetwork, spec: &EnsembleSpec) -> Result<Vec<BipartiteNetwork>> {
    spec.validate()?;
    Ok((0..spec.replicates)
        .into_par_iter()
        .map(|i| randomize(net, spec.model, spec.swap_factor, derive_seed(spec.seed, i as u64)))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleBin {
    pub side: Side,
    pub k0: usize,
    pub mean_k1: f64,
    /// Sample standard deviation across replicates of the per-replicate bin mean.
    pub std_k1: f64,
    /// Replicates in which the bin was populated.
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub model: NullModel,
    pub replicates: usize,
    pub bins: Vec<EnsembleBin>,
}

impl EnsembleSummary {
    pub fn side(&self, side: Side) -> impl Iterator<Item = &EnsembleBin> {
        self.bins.iter().filter(move |b| b.side == side)
    }
}

fn bin_means(net: &BipartiteNetwork, side: Side) -> BTreeMap<usize, f64> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (k0, k1) in diagram::<f64>(net, side) {
        let e = acc.entry(k0).or_default();
        e.0 += k1;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Mean and spread of `k1` per exact `k0` bin across the ensemble, for both sides.
pub fn ensemble_diagram(net: &BipartiteNetwork, spec: &EnsembleSpec) -> Result<EnsembleSummary> {
    Ok(summarize_ensemble(&ensemble(net, spec)?, spec.model))
}

/// [`ensemble_diagram`] over replicates generated elsewhere.
pub fn summarize_ensemble(reps: &[BipartiteNetwork], model: NullModel) -> EnsembleSummary {
    let mut bins = Vec::new();
    for side in [Side::Country, Side::Product] {
        let per_rep: Vec<BTreeMap<usize, f64>> = reps.iter().map(|r| bin_means(r, side)).collect();
        let mut values: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for m in &per_rep {
            for (&k, &v) in m {
                values.entry(k).or_default().push(v);
            }
        }
        for (k0, v) in values {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            bins.push(EnsembleBin { side, k0, mean_k1: mean, std_k1: var.sqrt(), replicates: v.len() });
        }
    }
    EnsembleSummary { model, replicates: reps.len(), bins }
}

/// Least-squares slope of the `k0`-`k1` diagram, `None` when `k0` is constant.
pub fn diagram_slope(net: &BipartiteNetwork, side: Side) -> Option<f64> {
    let d = diagram::<f64>(net, side);
    let x: Vec<f64> = d.iter().map(|&(a, _)| a as f64).collect();
    let y: Vec<f64> = d.iter().map(|&(_, b)| b).collect();
    ols_slope(&x, &y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeTest {
    pub model: NullModel,
    pub side: Side,
    pub empirical_slope: f64,
    pub null_mean: f64,
    pub null_std: f64,
    /// Empirical slope outside `null_mean +- 2 null_std`.
    pub outside_band: bool,
}

/// Compares the empirical diagram slope with the slopes of the ensemble.
pub fn slope_test(net: &BipartiteNetwork, spec: &EnsembleSpec, side: Side) -> Result<SlopeTest> {
    slope_test_against(net, &ensemble(net, spec)?, spec.model, side)
}

/// [`slope_test`] over replicates generated elsewhere.
pub fn slope_test_against(net: &BipartiteNetwork, reps: &[BipartiteNetwork], model: NullModel, side: Side) -> Result<SlopeTest> {
    if reps.is_empty() {
        return Err(Error::Empty("null-model replicates"));
    }
    let empirical = diagram_slope(net, side).ok_or(Error::DegenerateDiagram("constant k0"))?;
    // Replicates whose k0 collapses to a constant carry a zero slope.
    let slopes: Vec<f64> = reps.iter().map(|r| diagram_slope(r, side).unwrap_or(0.0)).collect();
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let std = if slopes.len() > 1 {
        (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SlopeTest {
        model,
        side,
        empirical_slope: empirical,
        null_mean: mean,
        null_std: std,
        outside_band: (empirical - mean).abs() > 2.0 * std,
    })
}
