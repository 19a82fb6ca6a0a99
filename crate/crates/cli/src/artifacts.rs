//! JSON artifacts written by the subcommands and read back by `report`.

use capnet::dist_fit::{Distribution, Family, FitFailure};
use capnet::model::BinomialParams;
use capnet::null_models::SlopeTest;
use serde::{Deserialize, Serialize};

pub const DENSITY_JSON: &str = "density.json";
pub const DEGREES_COUNTRY_CSV: &str = "degrees_country.csv";
pub const DEGREES_PRODUCT_CSV: &str = "degrees_product.csv";
pub const PROXIMITY_CSV: &str = "proximity.csv";
pub const CALIBRATION_JSON: &str = "calibration.json";
pub const SYNTHETIC_JSON: &str = "synthetic.json";
pub const MATRIX_JSON: &str = "matrix.json";

pub fn fitdist_json(label: &str) -> String {
    format!("fitdist_{label}.json")
}

pub fn nullmodel_json(model: u8) -> String {
    format!("nullmodel_{model}.json")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IngestSummary {
    pub seed: Option<u64>,
    pub records: usize,
    pub countries: usize,
    pub products: usize,
    pub total: f64,
    pub year: Option<i32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SyntheticSummary {
    pub seed: u64,
    pub params: BinomialParams<f64>,
    pub eta_target: Option<f64>,
    pub expected_density: f64,
    pub constrained_density: f64,
    pub realized_density: f64,
    pub edges: usize,
    pub ballast_product: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RcaSummary {
    pub seed: Option<u64>,
    pub countries: usize,
    pub products: usize,
    pub source_total: f64,
    pub log10: bool,
    pub ordered: bool,
    pub dropped_countries: Vec<String>,
    pub dropped_products: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub seed: Option<u64>,
    pub threshold: f64,
    pub countries: usize,
    pub products: usize,
    pub edges: usize,
    pub density: f64,
    pub dropped_countries: Vec<String>,
    pub dropped_products: Vec<String>,
    pub removed_products: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DensitySummary {
    pub seed: Option<u64>,
    pub countries: usize,
    pub products: usize,
    pub edges: usize,
    pub density: f64,
    pub threshold: Option<f64>,
    pub countries_without_exports: usize,
    pub products_without_exporters: usize,
    pub spearman_kc0_kc1: Option<f64>,
    pub slope_kc0_kc1: Option<f64>,
    pub spearman_kp0_kp1: Option<f64>,
    pub slope_kp0_kp1: Option<f64>,
    pub proximity_pairs: usize,
    pub undefined_proximity_pairs: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NullmodelSummary {
    pub seed: u64,
    pub model: u8,
    pub preserves: String,
    pub replicates: usize,
    pub swap_factor: usize,
    pub country: Option<SlopeTest>,
    pub product: Option<SlopeTest>,
    pub notes: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitEntry {
    pub family: Family,
    pub distribution: Distribution<f64>,
    pub log_likelihood: f64,
    pub ks: f64,
    pub weighted_ks: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitdistSummary {
    pub seed: Option<u64>,
    pub label: String,
    pub n_total: usize,
    pub n_used: usize,
    pub excluded: usize,
    pub fits: Vec<FitEntry>,
    pub failures: Vec<FitFailure>,
    pub ranking: Vec<Family>,
    pub best: Option<Family>,
    pub worst: Option<Family>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub seed: u64,
    pub params: BinomialParams<f64>,
    pub expected_density: f64,
    pub constrained_density: f64,
    pub realized_density: f64,
    pub edges: usize,
    pub spearman_kc0_kc1: Option<f64>,
    pub ks_diversification: Option<f64>,
    pub ks_ubiquity: Option<f64>,
}
