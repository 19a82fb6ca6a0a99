use std::io::Write;
use std::path::Path;

use capnet::calibrate::{calibrate, q_from_density, proximity_sample, CalibrationConfig, GridAxes, HeterogeneousReport};
use capnet::dist_fit::{ks_sorted_vs_cdf, rank_families, read_values_csv, Family, KsWeight, Sample};
use capnet::metrics::{degree_profile, density, diagram, ols_slope, proximity, spearman, Side};
use capnet::model::{
    capability_grid, derivative_checks, diversification_pdf, expected_diversification,
    expected_diversification_exponential, expected_k_c1, expected_ubiquity, leontief, quiescence_curve, sample_world,
    ubiquity_pdf, BinomialParams, ImpliedDistribution, RequirementHistogram,
};
use capnet::network::BipartiteNetwork;
use capnet::null_models::{ensemble, slope_test_against, summarize_ensemble, EnsembleSpec, NullModel};
use capnet::rca::{compute_rca, triangular_order};
use capnet::synthetic::{planted_trade, BALLAST_PRODUCT};
use capnet::trade::{aggregate, parse_trade_csv, write_trade_csv};

use crate::args::*;
use crate::artifacts::*;
use crate::error::CliError;
use crate::output::RunDir;
use crate::report;

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let mut run = RunDir::open(&cli.out, cli.force)?;
    let name = cli.command.name();
    let config = &cli.command;
    match &cli.command {
        Command::Ingest(a) => ingest(&mut run, a).and_then(|(seed, inputs)| {
            let inputs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
            run.finish(name, name, seed, config, &inputs)
        }),
        Command::Rca(a) => {
            rca(&mut run, a)?;
            run.finish(name, name, None, config, &[&a.input])
        }
        Command::Matrix(a) => {
            matrix(&mut run, a)?;
            run.finish(name, name, None, config, &[&a.input])
        }
        Command::Metrics(a) => {
            metrics(&mut run, a)?;
            run.finish(name, name, None, config, &[&a.matrix])
        }
        Command::Nullmodel(a) => {
            nullmodel(&mut run, a)?;
            run.finish(&format!("nullmodel_{}", a.model), name, Some(a.seed), config, &[&a.matrix])
        }
        Command::Fitdist(a) => {
            let label = fitdist(&mut run, a)?;
            let input = a.input.as_deref().or(a.matrix.as_deref()).expect("clap requires one source");
            run.finish(&format!("fitdist_{label}"), name, None, config, &[input])
        }
        Command::Model(ModelCommand::Simulate(a)) => {
            simulate(&mut run, a)?;
            run.finish(name, name, Some(a.seed), config, &[])
        }
        Command::Model(ModelCommand::Analytic(a)) => {
            analytic(&mut run, a)?;
            run.finish(name, name, None, config, &[])
        }
        Command::Calibrate(a) => {
            calibrate_cmd(&mut run, a)?;
            run.finish(name, name, Some(a.seed), config, &[&a.matrix])
        }
        Command::Quiescence(a) => {
            quiescence(&mut run, a)?;
            run.finish(name, name, None, config, &[])
        }
        Command::Report(a) => {
            let dir = a.dir.clone().unwrap_or_else(|| run.path().to_owned());
            let inputs = report::report(&mut run, &dir)?;
            let inputs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
            run.finish(name, name, None, config, &inputs)
        }
    }
}

fn claim(run: &RunDir, stem: &str, names: &[&str]) -> Result<(), CliError> {
    let mut all: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    all.push(format!("manifest.{stem}.json"));
    run.claim(&all)
}

fn resolve_q(r: f64, q: Option<f64>, eta: Option<f64>, n_a: usize) -> Result<f64, CliError> {
    match (q, eta) {
        (Some(q), _) => Ok(q),
        (None, Some(eta)) => Ok(q_from_density(eta, r, n_a)?),
        (None, None) => Err(CliError::validation("missing_argument", "one of --q or --eta is required")),
    }
}

fn world_params(w: &WorldArgs) -> Result<BinomialParams<f64>, CliError> {
    let q = resolve_q(w.r, w.q, w.eta, w.na)?;
    Ok(BinomialParams::new(w.r, q, w.na, w.nc, w.np)?)
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::Writer::from_writer(w)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn ingest(run: &mut RunDir, a: &IngestArgs) -> Result<(Option<u64>, Vec<std::path::PathBuf>), CliError> {
    if a.synthetic {
        return ingest_synthetic(run, a).map(|seed| (Some(seed), Vec::new()));
    }
    let input = a.input.as_ref().expect("clap requires --input without --synthetic");
    claim(run, "ingest", &["exports.csv", "ingest.json"])?;
    let records = parse_trade_csv::<f64>(input, a.year)?;
    let table = aggregate(&records)?;
    run.write("exports.csv", |w| table.write_csv(w))?;
    let summary = IngestSummary {
        seed: None,
        records: records.len(),
        countries: table.countries().len(),
        products: table.products().len(),
        total: table.total(),
        year: a.year,
    };
    run.write_json("ingest.json", &summary)?;
    Ok((None, vec![input.clone()]))
}

fn ingest_synthetic(run: &mut RunDir, a: &IngestArgs) -> Result<u64, CliError> {
    let w = &a.world;
    let (Some(r), Some(n_a), Some(n_c), Some(n_p)) = (w.r, w.na, w.nc, w.np) else {
        return Err(CliError::validation(
            "missing_argument",
            "--synthetic needs --r, --na, --nc, --np and one of --q or --eta",
        ));
    };
    let seed = a.seed.unwrap_or(0);
    let q = resolve_q(r, w.q, w.eta, n_a)?;
    let params = BinomialParams::new(r, q, n_a, n_c, n_p)?;
    claim(run, "ingest", &["trade.csv", "exports.csv", "planted.csv", SYNTHETIC_JSON])?;
    let planted = planted_trade(&params, seed);
    let table = aggregate(&planted.records)?;
    run.write("trade.csv", |out| write_trade_csv(&planted.records, out))?;
    run.write("exports.csv", |out| table.write_csv(out))?;
    run.write("planted.csv", |out| planted.network.write_dense_csv(out))?;
    let summary = SyntheticSummary {
        seed,
        params,
        eta_target: w.eta,
        expected_density: params.expected_density(),
        constrained_density: params.constrained_density(),
        realized_density: density(&planted.network)?,
        edges: planted.network.edge_count(),
        ballast_product: BALLAST_PRODUCT.to_string(),
    };
    run.write_json(SYNTHETIC_JSON, &summary)?;
    Ok(seed)
}

fn identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn rca(run: &mut RunDir, a: &RcaArgs) -> Result<(), CliError> {
    claim(run, "rca", &["rca.csv", "rca.json"])?;
    let table = aggregate(&parse_trade_csv::<f64>(&a.input, a.year)?)?;
    let rca = compute_rca(&table)?;
    let (rows, cols) = if a.ordered {
        triangular_order(&rca.threshold(a.order_threshold)?)
    } else {
        (identity(rca.countries().len()), identity(rca.products().len()))
    };
    run.write("rca.csv", |w| rca.write_csv(w, &rows, &cols, a.log10))?;
    let summary = RcaSummary {
        seed: None,
        countries: rca.countries().len(),
        products: rca.products().len(),
        source_total: rca.source_total(),
        log10: a.log10,
        ordered: a.ordered,
        dropped_countries: rca.dropped_countries().to_vec(),
        dropped_products: rca.dropped_products().to_vec(),
    };
    run.write_json("rca.json", &summary)
}

fn matrix(run: &mut RunDir, a: &MatrixArgs) -> Result<(), CliError> {
    let mut names = vec!["matrix.csv", MATRIX_JSON];
    if a.edge_list {
        names.push("edges.csv");
    }
    claim(run, "matrix", &names)?;
    let table = aggregate(&parse_trade_csv::<f64>(&a.input, a.year)?)?;
    let rca = compute_rca(&table)?;
    let full = rca.threshold(a.threshold)?;
    let drop: Vec<&str> = a.drop_products.iter().map(String::as_str).collect();
    let removed: Vec<String> = full.products().iter().filter(|p| drop.contains(&p.as_str())).cloned().collect();
    let mut net = full.without_products(&drop);
    if a.ordered {
        let (rows, cols) = triangular_order(&net);
        net = net.permuted(&rows, &cols);
    }
    run.write("matrix.csv", |w| net.write_dense_csv(w))?;
    if a.edge_list {
        run.write("edges.csv", |w| net.write_edge_list(w))?;
    }
    let summary = MatrixSummary {
        seed: None,
        threshold: a.threshold,
        countries: net.n_countries(),
        products: net.n_products(),
        edges: net.edge_count(),
        density: density(&net)?,
        dropped_countries: rca.dropped_countries().to_vec(),
        dropped_products: rca.dropped_products().to_vec(),
        removed_products: removed,
    };
    run.write_json(MATRIX_JSON, &summary)
}

fn diagram_stats(net: &BipartiteNetwork, side: Side) -> (Option<f64>, Option<f64>) {
    let d = diagram::<f64>(net, side);
    let x: Vec<f64> = d.iter().map(|&(k, _)| k as f64).collect();
    let y: Vec<f64> = d.iter().map(|&(_, v)| v).collect();
    (spearman(&x, &y), ols_slope(&x, &y))
}

fn write_degrees(
    w: &mut dyn Write,
    labels: &[String],
    k0: &[usize],
    k1: &[Option<f64>],
) -> std::io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["label", "k0", "k1"])?;
    for ((label, k0), k1) in labels.iter().zip(k0).zip(k1) {
        out.write_record([label.clone(), k0.to_string(), opt_cell(*k1)])?;
    }
    out.flush()
}

fn metrics(run: &mut RunDir, a: &MetricsArgs) -> Result<(), CliError> {
    claim(run, "metrics", &[DEGREES_COUNTRY_CSV, DEGREES_PRODUCT_CSV, PROXIMITY_CSV, DENSITY_JSON])?;
    let net = BipartiteNetwork::read_dense_csv(&a.matrix)?;
    let eta: f64 = density(&net)?;
    let profile = degree_profile::<f64>(&net);
    let phi = proximity::<f64>(&net);
    run.write(DEGREES_COUNTRY_CSV, |w| write_degrees(w, net.countries(), &profile.k_c0, &profile.k_c1))?;
    run.write(DEGREES_PRODUCT_CSV, |w| write_degrees(w, net.products(), &profile.k_p0, &profile.k_p1))?;
    run.write(PROXIMITY_CSV, |w| {
        let mut out = csv_writer(w);
        out.write_record(["p", "p'", "phi"])?;
        let labels = phi.products();
        for (i, j, v) in phi.pairs() {
            out.write_record([labels[i].as_str(), labels[j].as_str(), &v.to_string()])?;
        }
        out.flush()
    })?;
    let (spearman_c, slope_c) = diagram_stats(&net, Side::Country);
    let (spearman_p, slope_p) = diagram_stats(&net, Side::Product);
    let n = phi.len();
    let summary = DensitySummary {
        seed: None,
        countries: net.n_countries(),
        products: net.n_products(),
        edges: net.edge_count(),
        density: eta,
        threshold: net.threshold(),
        countries_without_exports: profile.k_c0.iter().filter(|&&k| k == 0).count(),
        products_without_exporters: profile.k_p0.iter().filter(|&&k| k == 0).count(),
        spearman_kc0_kc1: spearman_c,
        slope_kc0_kc1: slope_c,
        spearman_kp0_kp1: spearman_p,
        slope_kp0_kp1: slope_p,
        proximity_pairs: n * n.saturating_sub(1) / 2,
        undefined_proximity_pairs: phi.undefined_pairs(),
    };
    run.write_json(DENSITY_JSON, &summary)
}

fn nullmodel(run: &mut RunDir, a: &NullmodelArgs) -> Result<(), CliError> {
    let csv_name = format!("nullmodel_{}.csv", a.model);
    let json_name = nullmodel_json(a.model);
    claim(run, &format!("nullmodel_{}", a.model), &[&csv_name, &json_name])?;
    let model = NullModel::from_number(a.model)
        .ok_or_else(|| CliError::validation("invalid_parameter", format!("unknown null model {}", a.model)))?;
    let net = BipartiteNetwork::read_dense_csv(&a.matrix)?;
    let spec = EnsembleSpec { model, replicates: a.replicates, seed: a.seed, swap_factor: a.swap_factor };
    let reps = ensemble(&net, &spec)?;
    let summary = summarize_ensemble(&reps, model);
    run.write(&csv_name, |w| {
        let mut out = csv_writer(w);
        out.write_record(["k0_bin", "mean_k1", "std_k1", "side"])?;
        for b in &summary.bins {
            out.write_record([b.k0.to_string(), b.mean_k1.to_string(), b.std_k1.to_string(), b.side.as_str().to_string()])?;
        }
        out.flush()
    })?;
    let mut notes = Vec::new();
    let mut test = |side: Side| match slope_test_against(&net, &reps, model, side) {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("{} side: {e}", side.as_str()));
            None
        }
    };
    let country = test(Side::Country);
    let product = test(Side::Product);
    let result = NullmodelSummary {
        seed: a.seed,
        model: a.model,
        preserves: model.preserves().to_string(),
        replicates: a.replicates,
        swap_factor: a.swap_factor,
        country,
        product,
        notes,
    };
    run.write_json(&json_name, &result)
}

fn fitdist(run: &mut RunDir, a: &FitdistArgs) -> Result<String, CliError> {
    let families = a
        .families
        .iter()
        .map(|f| {
            Family::parse(f).ok_or_else(|| CliError::validation("invalid_parameter", format!("unknown family `{f}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let label = match (&a.label, a.sample) {
        (Some(l), _) => l.clone(),
        (None, Some(kind)) if a.matrix.is_some() => kind.as_str().to_string(),
        (None, _) => a.column.clone(),
    };
    if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(CliError::validation("invalid_parameter", format!("label `{label}` must be alphanumeric")));
    }
    let out_name = fitdist_json(&label);
    claim(run, &format!("fitdist_{label}"), &[&out_name])?;

    let values: Vec<f64> = match (&a.input, &a.matrix, a.sample) {
        (Some(input), _, _) => {
            let file = std::fs::File::open(input).map_err(|e| CliError::io(input, e))?;
            read_values_csv(file, &input.display().to_string(), &a.column)?
        }
        (None, Some(m), Some(kind)) => {
            let net = BipartiteNetwork::read_dense_csv(m)?;
            match kind {
                SampleKind::Diversification => net.diversification().into_iter().map(|k| k as f64).collect(),
                SampleKind::Ubiquity => net.ubiquity().into_iter().map(|k| k as f64).collect(),
                SampleKind::Proximity => proximity_sample(&net),
            }
        }
        _ => return Err(CliError::validation("missing_argument", "--matrix needs --sample")),
    };
    let n_total = values.len();
    let sample = Sample::new(values)?;
    let ranking = rank_families(&sample, &families)?;
    let mut sorted = sample.positives().values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let fits = ranking
        .fits
        .iter()
        .map(|f| FitEntry {
            family: f.family(),
            distribution: f.distribution,
            log_likelihood: f.log_likelihood,
            ks: f.ks_stat,
            weighted_ks: a
                .weighted_ks
                .then(|| ks_sorted_vs_cdf(&sorted, &|x| f.distribution.cdf(x), KsWeight::Variance)),
        })
        .collect();
    let summary = FitdistSummary {
        seed: None,
        label: label.clone(),
        n_total,
        n_used: ranking.n,
        excluded: ranking.excluded,
        fits,
        failures: ranking.failures.clone(),
        ranking: ranking.order(),
        best: ranking.best(),
        worst: ranking.worst(),
    };
    run.write_json(&out_name, &summary)?;
    Ok(label)
}

fn write_xy(w: &mut dyn Write, rows: impl IntoIterator<Item = (f64, f64)>) -> std::io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["x", "y"])?;
    for (x, y) in rows {
        out.write_record([x.to_string(), y.to_string()])?;
    }
    out.flush()
}

fn implied_ks(pdf: &ImpliedDistribution<f64>, values: Vec<f64>) -> Option<f64> {
    pdf.ks(&values).ok()
}

fn simulate(run: &mut RunDir, a: &SimulateArgs) -> Result<(), CliError> {
    let mut names = vec!["model_network.csv", "model_simulate.json"];
    if a.export_world {
        names.extend(["world_holdings.csv", "world_requirements.csv"]);
    }
    claim(run, "model_simulate", &names)?;
    let p = world_params(&a.world)?;
    let world = sample_world(&p, a.seed);
    let net = leontief(&world);
    run.write("model_network.csv", |w| net.write_dense_csv(w))?;
    if a.export_world {
        run.write("world_holdings.csv", |w| world.write_holdings_csv(w))?;
        run.write("world_requirements.csv", |w| world.write_requirements_csv(w))?;
    }
    let u: Vec<f64> = net.diversification().iter().map(|&k| k as f64 / p.n_p as f64).collect();
    let v: Vec<f64> = net.ubiquity().iter().map(|&k| k as f64 / p.n_c as f64).collect();
    let summary = SimulateSummary {
        seed: a.seed,
        params: p,
        expected_density: p.expected_density(),
        constrained_density: p.constrained_density(),
        realized_density: density(&net)?,
        edges: net.edge_count(),
        spearman_kc0_kc1: diagram_stats(&net, Side::Country).0,
        ks_diversification: implied_ks(&diversification_pdf(&p), u),
        ks_ubiquity: implied_ks(&ubiquity_pdf(&p), v),
    };
    run.write_json("model_simulate.json", &summary)
}

fn analytic(run: &mut RunDir, a: &AnalyticArgs) -> Result<(), CliError> {
    let files = [
        "curve_diversification.csv",
        "curve_diversification_exponential.csv",
        "curve_ubiquity.csv",
        "curve_kc1.csv",
        "pdf_diversification.csv",
        "pdf_ubiquity.csv",
        "derivative_checks.json",
    ];
    claim(run, "model_analytic", &files)?;
    if a.points < 2 {
        return Err(CliError::validation("invalid_parameter", "--points must be at least 2"));
    }
    let p = world_params(&a.world)?;
    let k_grid: Vec<f64> = capability_grid(p.n_a, a.points);
    let curve = |f: &dyn Fn(f64) -> capnet::Result<f64>| -> Result<Vec<(f64, f64)>, CliError> {
        k_grid.iter().map(|&k| Ok((k, f(k)?))).collect()
    };
    let div = curve(&|k| expected_diversification(&p, k))?;
    let div_exp = curve(&|k| expected_diversification_exponential(&p, k))?;
    let ubi = curve(&|k| expected_ubiquity(&p, k))?;
    let lo = p.n_p as f64 * (1.0 - p.q).powi(p.n_a as i32);
    let hi = p.n_p as f64;
    let kc1 = (0..a.points)
        .map(|i| {
            let x = (lo + (hi - lo) * i as f64 / (a.points - 1) as f64).max(f64::MIN_POSITIVE);
            Ok((x, expected_k_c1(&p, x)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    run.write("curve_diversification.csv", |w| write_xy(w, div))?;
    run.write("curve_diversification_exponential.csv", |w| write_xy(w, div_exp))?;
    run.write("curve_ubiquity.csv", |w| write_xy(w, ubi))?;
    run.write("curve_kc1.csv", |w| write_xy(w, kc1))?;
    let dpdf = diversification_pdf(&p);
    let updf = ubiquity_pdf(&p);
    run.write("pdf_diversification.csv", |w| write_xy(w, dpdf.grid.iter().copied().zip(dpdf.density.iter().copied())))?;
    run.write("pdf_ubiquity.csv", |w| write_xy(w, updf.grid.iter().copied().zip(updf.density.iter().copied())))?;
    let hist = RequirementHistogram::binomial(p.n_a, p.q, p.n_p);
    let report = derivative_checks(&p, &hist, a.points, a.step)?;
    run.write_json("derivative_checks.json", &serde_json::json!({
        "seed": null,
        "params": p,
        "max_rel_err": report.max_rel_err(),
        "signs_hold": report.signs_hold(),
        "report": report,
    }))
}

fn write_heterogeneous(w: &mut dyn Write, report: &HeterogeneousReport) -> std::io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["k_c0", "empirical", "heterogeneous", "homogeneous"])?;
    let homogeneous: std::collections::BTreeMap<usize, f64> =
        report.homogeneous.histogram.iter().map(|r| (r.k_c0, r.simulated)).collect();
    for row in &report.heterogeneous.histogram {
        out.write_record([
            row.k_c0.to_string(),
            row.empirical.to_string(),
            row.simulated.to_string(),
            homogeneous.get(&row.k_c0).copied().unwrap_or(0.0).to_string(),
        ])?;
    }
    out.flush()
}

fn calibrate_cmd(run: &mut RunDir, a: &CalibrateArgs) -> Result<(), CliError> {
    let mut names = vec!["calibration_grid.csv", CALIBRATION_JSON];
    if a.replicates > 0 {
        names.push("heterogeneous.csv");
    }
    claim(run, "calibrate", &names)?;
    let net = BipartiteNetwork::read_dense_csv(&a.matrix)?;
    let config = CalibrationConfig {
        axes: GridAxes::from_ranges(a.r_min, a.r_max, a.r_step, a.na_min, a.na_max, a.na_step)?,
        seeds_per_cell: a.seeds_per_cell,
        seed: a.seed,
        r2_quantile: a.r2_quantile,
        ks_quantile: a.ks_quantile,
        ks_weight: if a.weighted_ks { KsWeight::Variance } else { KsWeight::None },
        replicates: a.replicates,
    };
    let outcome = calibrate(&net, &config)?;
    run.write("calibration_grid.csv", |w| outcome.grid.write_csv(w))?;
    run.write_json(CALIBRATION_JSON, &outcome.result)?;
    if let Some(h) = &outcome.heterogeneous {
        run.write("heterogeneous.csv", |w| write_heterogeneous(w, h))?;
    }
    Ok(())
}

fn quiescence(run: &mut RunDir, a: &QuiescenceArgs) -> Result<(), CliError> {
    let names: Vec<String> = a.na.iter().map(|n| format!("quiescence_na{n}.csv")).collect();
    let mut all = names.clone();
    all.push("manifest.quiescence.json".into());
    run.claim(&all)?;
    for (&n_a, name) in a.na.iter().zip(&names) {
        let r = a.r.unwrap_or(0.5);
        let q = resolve_q(r, a.q, a.eta, n_a)?;
        // r does not enter the diversification curve; a placeholder keeps the parameters valid.
        let p = BinomialParams::new(r, q, n_a, 1, 1)?;
        let curve = quiescence_curve(&p, &capability_grid::<f64>(n_a, a.points))?;
        run.write(name, |w| write_xy(w, curve))?;
    }
    Ok(())
}
