//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use remitsim::baseline::{calibrate_gravity, gravity_flows, CorridorComparison, FitFlag};
use remitsim::behavior::{activation_capacity, kernel, probability, theta};
use remitsim::calibration::{calibrate, split_panel, OptimizerConfig};
use remitsim::dataio::{
    AttributionConvention, CountryCode, Dataset, DatasetTables, DisasterEvent, Hazard, PanelObservation,
    SplitTag, SplitUnit,
};
use remitsim::fixtures::{ym, FixtureSpec};
use remitsim::flows::{confidence_band, EventFilter, ModelOptions, SimulationModel};
use remitsim::scenarios::{attribute_by_hazard, run_counterfactual};
use remitsim::{Covariates, Params};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kernel_shape() -> Outcome {
    // 0.15 + 0.19 sin(pi/6 (k - 0.98)), evaluated independently.
    const FROZEN: [f64; 12] = [
        0.0567282868,
        0.151989639,
        0.246717869,
        0.3155306241,
        0.3399895822,
        0.3135409851,
        0.2432717132,
        0.148010361,
        0.053282131,
        -0.0155306241,
        -0.0399895822,
        -0.0135409851,
    ];
    let p = Params::reference();
    let k: Vec<f64> = (0..12).map(|i| kernel(i, &p)).collect();
    let frozen = k.iter().zip(FROZEN).all(|(a, b)| (a - b).abs() < 1e-9);
    let positive = k[..9].iter().all(|&x| x > 0.0);
    let negative = k[9..].iter().all(|&x| x < 0.0);
    let outside = [-3, -1, 12, 13, 40].iter().all(|&i| kernel(i, &p) == 0.0);
    let peak = (0..12).max_by(|&a, &b| k[a].total_cmp(&k[b])).unwrap();
    check(
        frozen && positive && negative && outside && peak.abs_diff(4) <= 1,
        format!("peak offset {peak}, k(4) = {:.6}, k(10) = {:.6}", k[4], k[10]),
    )
}

fn logistic_unit() -> Outcome {
    let p = Params::reference();
    let cov = Covariates {
        surplus: 1.2,
        family: 0.3,
        delta_gdp: 0.8,
        gdp_norm: 0.1,
        disaster_score: 0.0,
    };
    let t = theta(&cov, &p);
    let pr = probability(t);
    let oracle_t: f64 = 0.02 + 1.08 * 1.2 - 4.65 * 0.3 + 2.83 * 0.8 - 3.67 * 0.1;
    let oracle_p = 1.0 / (1.0 + (-oracle_t).exp());
    check(
        (t - 1.818).abs() <= 1e-3 && (pr - 0.860).abs() <= 1e-3 && (t - oracle_t).abs() < 1e-12 && (pr - oracle_p).abs() < 1e-12,
        format!("theta {t:.6}, P {pr:.6}"),
    )
}

fn recovery(noise: f64) -> (Params, Option<f64>, bool) {
    let spec = FixtureSpec::standard().with_noise(noise);
    let ds = spec.dataset();
    let model = SimulationModel::new(&ds, ModelOptions::default());
    let panel = split_panel(&ds.tables().panel, 0.8, 42, SplitUnit::Observation);
    let r = calibrate(&model, &panel, &OptimizerConfig::default()).expect("calibration runs");
    (r.params, r.test_r2, r.converged)
}

fn parameter_recovery() -> Outcome {
    let (fit, r2, _) = recovery(0.0);
    let truth = Params::reference();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let worst_beta = [
        rel(fit.beta0, truth.beta0),
        rel(fit.beta1, truth.beta1),
        rel(fit.beta2, truth.beta2),
        rel(fit.beta3, truth.beta3),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let rho = rel(fit.rho, truth.rho);
    let r2 = r2.unwrap_or(f64::NAN);
    check(
        worst_beta < 0.05 && rho < 0.02 && r2 > 0.99,
        format!("max beta rel err {worst_beta:.2e}, rho rel err {rho:.2e}, test R2 {r2:.6}"),
    )
}

fn held_out_fit() -> Outcome {
    let (_, r2, _) = recovery(0.1);
    let r2 = r2.unwrap_or(f64::NAN);
    check(r2 >= 0.9, format!("test R2 {r2:.4} with 10% noise"))
}

fn sampler_oracle() -> Outcome {
    let ds = FixtureSpec::standard().dataset();
    let model = SimulationModel::new(&ds, ModelOptions::default());
    let p = Params::reference();
    let draws = 10_000;
    let month_pos = 66;
    let scores = model.disaster_scores(&p, &EventFilter::All);
    let mut worst_z: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    let corridors = model.population().corridors().len();
    for c in 0..corridors {
        let idx = model.cell_index(c, month_pos);
        let cell = &model.cells()[idx];
        let disaster = scores[model.origin_of_corridor(c) * model.months() + month_pos];
        // Independent oracle: score each age group directly.
        let unit = p.rho * cell.gdp_dest_monthly;
        let (mut mean, mut var) = (0.0, 0.0);
        for &(surplus, count) in &cell.ages {
            let cov = Covariates {
                surplus,
                family: cell.family,
                delta_gdp: cell.delta_gdp,
                gdp_norm: cell.gdp_norm,
                disaster_score: disaster,
            };
            let pr = probability(theta(&cov, &p));
            mean += count * pr * unit;
            var += count * pr * (1.0 - pr) * unit * unit;
        }
        let expected = model.flows_for_cells(&p, &EventFilter::All, &[idx])[0];
        if (expected - mean).abs() > 1e-9 * mean {
            return Err(format!("corridor {c}: expected_flow {expected} vs oracle {mean}"));
        }
        let s = model.sample_cells(&p, &EventFilter::All, &[idx], 1000 + c as u64, draws).unwrap();
        let m = s.iter().sum::<f64>() / draws as f64;
        let v = s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let z = (m - expected).abs() / (var / draws as f64).sqrt();
        worst_z = worst_z.max(z);
        worst_var = worst_var.max(((v - var) / var).abs());
    }
    check(
        worst_z <= 3.0 && worst_var <= 0.05,
        format!("{corridors} corridors, worst |z| {worst_z:.2}, worst variance rel err {worst_var:.3}"),
    )
}

fn ci_coverage() -> Outcome {
    let ds = FixtureSpec::standard().dataset();
    let model = SimulationModel::new(&ds, ModelOptions::default());
    let p = Params::reference();
    let cells: Vec<usize> = (0..12).map(|m| model.cell_index(3, 48 + m)).collect();
    let n = 10_000;
    let reference = model.sample_cells(&p, &EventFilter::All, &cells, 11, n).unwrap();
    let band = confidence_band("corridor_year", &reference).unwrap();
    let replicates = model.sample_cells(&p, &EventFilter::All, &cells, 12, n).unwrap();
    let inside = replicates.iter().filter(|&&x| band.lower <= x && x <= band.upper).count();
    let coverage = inside as f64 / n as f64;
    let truth: f64 = model.flows_for_cells(&p, &EventFilter::All, &cells).iter().sum();
    check(
        (coverage - 0.95).abs() <= 0.02 && band.lower <= truth && truth <= band.upper,
        format!("coverage {:.2}% over {n} replicates", 100.0 * coverage),
    )
}

fn with_events(events: impl FnOnce(&DatasetTables) -> Vec<DisasterEvent>) -> Dataset {
    let spec = FixtureSpec::small();
    let mut tables = spec.base_tables();
    tables.disasters = events(&tables);
    Dataset::from_tables(tables, spec.window).unwrap()
}

fn population(t: &DatasetTables, c: &CountryCode, year: i32) -> f64 {
    t.economics.iter().find(|e| &e.country == c && e.year == year).unwrap().population
}

fn event(id: &str, country: &CountryCode, onset: &str, hazard: Hazard, affected: f64) -> DisasterEvent {
    DisasterEvent {
        event_id: id.into(),
        country: country.clone(),
        onset_month: ym(onset),
        hazard,
        affected,
    }
}

fn counterfactual_identities() -> Outcome {
    let p = Params::reference();
    let quiet = with_events(|_| Vec::new());
    let r = run_counterfactual(&SimulationModel::new(&quiet, ModelOptions::default()), &p, &EventFilter::None);
    let zero = r.induced.iter().all(|m| m.entries.values().all(|&v| v == 0.0));

    let mut origin = None;
    let single = with_events(|t| {
        let o = t.stocks[0].origin.clone();
        origin = Some(o.clone());
        vec![event("E1", &o, "2014-03", Hazard::Flood, 0.2 * population(t, &o, 2014))]
    });
    let origin = origin.unwrap();
    let r = run_counterfactual(&SimulationModel::new(&single, ModelOptions::default()), &p, &EventFilter::None);
    let onset = ym("2014-03");
    let local = r.induced.iter().all(|m| {
        let k = m.month.months_since(onset);
        m.entries
            .iter()
            .all(|((_, recipient), &v)| (recipient == &origin && (0..12).contains(&k)) || v == 0.0)
    });

    let pair = |scale: f64| {
        let ds = with_events(|t| {
            let o = t.stocks[0].origin.clone();
            let pop = population(t, &o, 2015);
            vec![
                event("A", &o, "2015-02", Hazard::Flood, scale * 0.04 * pop),
                event("B", &o, "2015-04", Hazard::Earthquake, scale * 0.03 * pop),
            ]
        });
        let model = SimulationModel::new(&ds, ModelOptions::default());
        attribute_by_hazard(&model, &p, AttributionConvention::OnlyHazard).interaction_residual
    };
    let ratio = pair(1.0) / pair(0.5);
    check(
        zero && local && (ratio - 4.0).abs() <= 0.5,
        format!("zero-event induced 0: {zero}, locality and window: {local}, residual ratio {ratio:.3}"),
    )
}

fn gravity_fixture() -> Outcome {
    let code = |s: &str| CountryCode::parse(s).unwrap();
    let row = CorridorComparison::new(code("USA"), code("MEX"), 27.46, 26.49, 123.28);
    let table = (row.se_structural - 0.95).abs() / 0.95 <= 0.02 && (row.se_gravity - 9181.54).abs() / 9181.54 <= 0.02;

    let ds = FixtureSpec::small().dataset();
    let mut worst: f64 = 0.0;
    let mut flags_ok = true;
    for beta in [0.4, 0.75, 1.3] {
        let mut panel = Vec::new();
        for a in gravity_flows(&ds, beta).unwrap() {
            for ((s, r), v) in &a.entries {
                for month in ds.window().iter().filter(|m| m.year() == a.year) {
                    panel.push(PanelObservation {
                        sender: s.clone(),
                        recipient: r.clone(),
                        month,
                        amount_usd: v / 12.0,
                        split_tag: SplitTag::Unassigned,
                    });
                }
            }
        }
        let fit = calibrate_gravity(&panel, &ds).unwrap();
        flags_ok &= fit.flag == FitFlag::Ok;
        worst = worst.max((fit.beta_exp - beta).abs());
    }
    check(
        table && flags_ok && worst <= 0.01,
        format!(
            "squared errors {:.4} / {:.4}, worst planted-beta error {worst:.2e}",
            row.se_structural, row.se_gravity
        ),
    )
}

fn activation_peak() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for delta in [0.1, 0.34, 1.0] {
        let grid = (-500..=500).map(|i| f64::from(i) * 0.01);
        let best = grid
            .max_by(|&a, &b| activation_capacity(a, delta).total_cmp(&activation_capacity(b, delta)))
            .unwrap();
        ok &= (best + delta / 2.0).abs() <= 0.01 + 1e-12;
        details.push(format!("delta {delta}: argmax {best:.2}"));
    }
    check(ok, details.join(", "))
}

fn run(bin: &str, args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn end_to_end() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_remitsim");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let data_s = data.to_str().unwrap();
    run(bin, &["fixtures", "generate", "--out", data_s, "--corridors", "12", "--events", "10"])?;
    let params = tmp.path().join("params.json");
    std::fs::write(&params, serde_json::to_string(&Params::reference()).unwrap()).map_err(|e| e.to_string())?;
    let cfg = data.join("run.cfg");
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        for cmd in ["simulate", "counterfactual"] {
            run(
                bin,
                &[
                    "--config",
                    cfg.to_str().unwrap(),
                    "--output-dir",
                    out.to_str().unwrap(),
                    "--params",
                    params.to_str().unwrap(),
                    "--seed",
                    "99",
                    cmd,
                ],
            )?;
        }
        outputs.push(csv_files(&out));
    }
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    check(
        !outputs[0].is_empty() && outputs[0] == outputs[1],
        format!("{} CSVs identical: {}", names.len(), names.join(" ")),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("disaster kernel shape", kernel_shape, Duration::from_secs(1)),
        ("logistic unit fixture", logistic_unit, Duration::from_secs(1)),
        ("parameter recovery", parameter_recovery, Duration::from_secs(600)),
        ("held-out fit threshold", held_out_fit, Duration::from_secs(600)),
        ("sampler-oracle equivalence", sampler_oracle, Duration::from_secs(60)),
        ("confidence band coverage", ci_coverage, Duration::from_secs(120)),
        ("counterfactual identities", counterfactual_identities, Duration::from_secs(60)),
        ("gravity baseline fixture", gravity_fixture, Duration::from_secs(1)),
        ("activation property", activation_peak, Duration::from_secs(1)),
        ("end-to-end reproducibility", end_to_end, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed <= budget, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} ({:.2}s, budget {}s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
