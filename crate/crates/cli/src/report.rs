//! Assembles the artifacts of a run directory into one summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use capnet::calibrate::CalibrationResult;
use capnet::dist_fit::Family;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::artifacts::*;
use crate::error::CliError;
use crate::output::RunDir;

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TXT: &str = "summary.txt";

/// Null models whose band must exclude the empirical slope; the degree-preserving
/// model keeps both degree sequences and is reported without entering the verdict.
const DECISIVE_MODELS: [u8; 3] = [1, 2, 3];

#[derive(Serialize)]
struct FactVerdict {
    fact: u8,
    statement: &'static str,
    pass: bool,
    evidence: String,
}

#[derive(Serialize)]
struct DensityRow {
    countries: usize,
    products: usize,
    edges: usize,
    threshold: Option<f64>,
    density: f64,
}

#[derive(Serialize)]
struct CalibrationRow {
    n_c: usize,
    n_p: usize,
    eta: f64,
    n_a: usize,
    r: f64,
    q: f64,
    r2: f64,
    ks_proximity: f64,
    heterogeneous_ks: Option<f64>,
    homogeneous_ks: Option<f64>,
    region_cells: usize,
}

#[derive(Serialize)]
struct PlantedRow {
    r: f64,
    n_a: usize,
    q: f64,
    r_step: f64,
    na_step: usize,
    recovered_within_one_step: Option<bool>,
}

#[derive(Serialize)]
struct Summary {
    seed: Option<u64>,
    all_facts_pass: bool,
    facts: Vec<FactVerdict>,
    density: DensityRow,
    calibration: Option<CalibrationRow>,
    planted: Option<PlantedRow>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::validation("bad_artifact", format!("{}: {e}", path.display())))
}

fn nullmodel_files(dir: &Path) -> Vec<(u8, PathBuf)> {
    (1..=4u8).map(|k| (k, dir.join(nullmodel_json(k)))).filter(|(_, p)| p.is_file()).collect()
}

fn family_fact(fact: u8, statement: &'static str, fit: &FitdistSummary, pass: bool) -> FactVerdict {
    let order: Vec<&str> = fit.ranking.iter().map(|f| f.as_str()).collect();
    FactVerdict {
        fact,
        statement,
        pass,
        evidence: format!("{} ranking by likelihood: {} (n = {})", fit.label, order.join(" > "), fit.n_used),
    }
}

/// Grid steps of the calibration run, read from its manifest when present.
fn calibration_steps(dir: &Path) -> (f64, usize) {
    let default = (0.02, 5);
    let Ok(bytes) = std::fs::read(dir.join("manifest.calibrate.json")) else { return default };
    let Ok(v) = serde_json::from_slice::<serde_json::Value>(&bytes) else { return default };
    let args = &v["config"]["calibrate"];
    (
        args["r_step"].as_f64().unwrap_or(default.0),
        args["na_step"].as_u64().map_or(default.1, |s| s as usize),
    )
}

pub fn report(run: &mut RunDir, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let required = [
        DENSITY_JSON.to_string(),
        DEGREES_COUNTRY_CSV.to_string(),
        PROXIMITY_CSV.to_string(),
        fitdist_json("diversification"),
        fitdist_json("ubiquity"),
        fitdist_json("proximity"),
    ];
    let mut missing: Vec<String> = required.iter().filter(|n| !dir.join(n).is_file()).cloned().collect();
    let nulls = nullmodel_files(dir);
    if nulls.is_empty() {
        missing.push("nullmodel_<k>.json".to_string());
    }
    if !missing.is_empty() {
        return Err(capnet::Error::MissingArtifact(format!("{} in {}", missing.join(", "), dir.display())).into());
    }
    run.claim(&[SUMMARY_JSON.into(), SUMMARY_TXT.into(), "manifest.report.json".into()])?;

    let mut inputs: Vec<PathBuf> = required.iter().map(|n| dir.join(n)).collect();
    let dens: DensitySummary = read_json(&dir.join(DENSITY_JSON))?;
    let div: FitdistSummary = read_json(&dir.join(fitdist_json("diversification")))?;
    let ubi: FitdistSummary = read_json(&dir.join(fitdist_json("ubiquity")))?;
    let prox: FitdistSummary = read_json(&dir.join(fitdist_json("proximity")))?;
    let mut null_summaries = Vec::new();
    for (_, path) in &nulls {
        null_summaries.push(read_json::<NullmodelSummary>(path)?);
        inputs.push(path.clone());
    }

    let negative = dens.slope_kc0_kc1.is_some_and(|s| s < 0.0) && dens.spearman_kc0_kc1.is_some_and(|s| s < 0.0);
    let mut band_lines = Vec::new();
    let mut bands_ok = true;
    for n in &null_summaries {
        match &n.country {
            Some(t) => {
                band_lines.push(format!(
                    "NM{}: null slope {:.4} +- {:.4}, {}",
                    n.model,
                    t.null_mean,
                    2.0 * t.null_std,
                    if t.outside_band { "outside band" } else { "inside band" }
                ));
                if DECISIVE_MODELS.contains(&n.model) && !t.outside_band {
                    bands_ok = false;
                }
            }
            None => band_lines.push(format!("NM{}: no country-side slope test", n.model)),
        }
    }
    let fact1 = FactVerdict {
        fact: 1,
        statement: "diversification and average ubiquity are negatively related",
        pass: negative && bands_ok,
        evidence: format!(
            "slope {}, spearman {}; {}",
            dens.slope_kc0_kc1.map_or("undefined".into(), |s| format!("{s:.4}")),
            dens.spearman_kc0_kc1.map_or("undefined".into(), |s| format!("{s:.4}")),
            band_lines.join("; ")
        ),
    };
    let not_normal = |f: &FitdistSummary| f.best.is_some_and(|b| b != Family::Normal);
    let facts = vec![
        fact1,
        family_fact(2, "ubiquity is better fit by log-normal or Weibull than normal", &ubi, not_normal(&ubi)),
        family_fact(3, "diversification is better fit by log-normal or Weibull than normal", &div, not_normal(&div)),
        family_fact(4, "proximity is best fit by Weibull", &prox, prox.best == Some(Family::Weibull)),
    ];

    let calib_path = dir.join(CALIBRATION_JSON);
    let calibration: Option<CalibrationResult> =
        if calib_path.is_file() { Some(read_json(&calib_path)?) } else { None };
    if calibration.is_some() {
        inputs.push(calib_path);
    }
    let synth_path = dir.join(SYNTHETIC_JSON);
    let synthetic: Option<SyntheticSummary> = if synth_path.is_file() { Some(read_json(&synth_path)?) } else { None };
    if synthetic.is_some() {
        inputs.push(synth_path);
    }
    let (r_step, na_step) = calibration_steps(dir);
    let planted = synthetic.map(|s| PlantedRow {
        r: s.params.r,
        n_a: s.params.n_a,
        q: s.params.q,
        r_step,
        na_step,
        recovered_within_one_step: calibration.as_ref().map(|c| {
            let chosen = c.chosen();
            (chosen.r - s.params.r).abs() <= r_step + 1e-9 && chosen.n_a.abs_diff(s.params.n_a) <= na_step
        }),
    });
    let matrix_path = dir.join(MATRIX_JSON);
    let threshold = match dens.threshold {
        Some(t) => Some(t),
        None if matrix_path.is_file() => {
            let m: MatrixSummary = read_json(&matrix_path)?;
            inputs.push(matrix_path);
            Some(m.threshold)
        }
        None => None,
    };
    let seed = calibration.as_ref().map(|c| c.seed);
    let calibration = calibration.map(|c| CalibrationRow {
        n_c: c.n_c,
        n_p: c.n_p,
        eta: c.eta,
        n_a: c.chosen().n_a,
        r: c.chosen().r,
        q: c.chosen().q,
        r2: c.chosen().r2,
        ks_proximity: c.chosen().ks,
        heterogeneous_ks: c.heterogeneous_ks,
        homogeneous_ks: c.homogeneous_ks,
        region_cells: c.region.cells.len(),
    });
    let summary = Summary {
        seed,
        all_facts_pass: facts.iter().all(|f| f.pass),
        facts,
        density: DensityRow {
            countries: dens.countries,
            products: dens.products,
            edges: dens.edges,
            threshold,
            density: dens.density,
        },
        calibration,
        planted,
    };
    run.write_json(SUMMARY_JSON, &summary)?;
    run.write_text(SUMMARY_TXT, &render(&summary))?;
    Ok(inputs)
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.4}"))
}

fn render(s: &Summary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "Stylized facts");
    for f in &s.facts {
        let _ = writeln!(t, "  {} fact {}: {}", if f.pass { "PASS" } else { "FAIL" }, f.fact, f.statement);
        let _ = writeln!(t, "         {}", f.evidence);
    }
    let d = &s.density;
    let _ = writeln!(t, "\nDensity");
    let _ = writeln!(t, "  {:>9} {:>9} {:>9} {:>9} {:>9}", "N_c", "N_p", "edges", "R*", "density");
    let _ = writeln!(
        t,
        "  {:>9} {:>9} {:>9} {:>9} {:>9.4}",
        d.countries,
        d.products,
        d.edges,
        d.threshold.map_or("-".into(), |x| x.to_string()),
        d.density
    );
    if let Some(c) = &s.calibration {
        let _ = writeln!(t, "\nCalibration");
        let _ = writeln!(
            t,
            "  {:>6} {:>6} {:>8} {:>5} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "N_c", "N_p", "eta", "N_a", "r", "q", "R2", "KS_phi", "KS_het", "KS_hom"
        );
        let _ = writeln!(
            t,
            "  {:>6} {:>6} {:>8.4} {:>5} {:>6.2} {:>8.4} {:>8.4} {:>8.4} {:>8} {:>8}",
            c.n_c,
            c.n_p,
            c.eta,
            c.n_a,
            c.r,
            c.q,
            c.r2,
            c.ks_proximity,
            opt(c.heterogeneous_ks),
            opt(c.homogeneous_ks)
        );
    }
    if let Some(p) = &s.planted {
        let verdict = match p.recovered_within_one_step {
            Some(true) => "recovered within one grid step",
            Some(false) => "not recovered within one grid step",
            None => "no calibration in this directory",
        };
        let _ = writeln!(t, "\nPlanted parameters: r = {}, N_a = {}, q = {:.4}; {verdict}", p.r, p.n_a, p.q);
    }
    t
}
