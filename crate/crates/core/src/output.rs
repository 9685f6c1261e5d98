//! Plot-ready CSV reports and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baseline::ComparisonReport;
use crate::behavior::ProfilePoint;
use crate::dataio::{csv_string, CountryCode};
use crate::flows::{FlowMatrix, UncertaintyBand};
use crate::population::{DiasporaDemographics, Population, SenderRow, AGE_BANDS};
use crate::scenarios::{AttributionReport, EventAttribution, ScenarioResult, SummaryRow};
use crate::time::YearMonth;

pub const POPULATION_FILE: &str = "population.csv";
pub const DEMOGRAPHICS_FILE: &str = "demographics.csv";
pub const SENDERS_FILE: &str = "senders.csv";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const FLOWS_FILE: &str = "flows.csv";
pub const BANDS_FILE: &str = "bands.csv";
pub const INDUCED_FILE: &str = "induced.csv";
pub const INDUCED_BANDS_FILE: &str = "induced_bands.csv";
pub const ATTRIBUTION_FILE: &str = "attribution.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const GRAVITY_FILE: &str = "gravity.json";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const MANIFEST_FILE: &str = "manifest.json";

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

pub fn population_csv(pop: &Population) -> String {
    csv_string(
        &["origin", "destination", "sex", "age", "month", "count"],
        pop.cohorts().iter().map(|c| {
            let corridor = pop.corridor(c);
            [
                corridor.origin.to_string(),
                corridor.destination.to_string(),
                c.sex.to_string(),
                c.age.to_string(),
                c.month.to_string(),
                num(c.count),
            ]
        }),
    )
}

pub fn demographics_csv(rows: &[DiasporaDemographics]) -> String {
    csv_string(
        &["origin", "destination", "month", "age_symmetry", "sex_symmetry", "asymmetry", "family"],
        rows.iter().map(|d| {
            [
                d.origin.to_string(),
                d.destination.to_string(),
                d.month.to_string(),
                num(d.age_symmetry),
                num(d.sex_symmetry),
                num(d.asymmetry),
                num(d.family),
            ]
        }),
    )
}

pub fn senders_csv(rows: &[SenderRow]) -> String {
    let mut header = vec!["group", "expected_senders", "population", "male_share", "female_share", "mean_age"];
    header.extend(AGE_BANDS.iter().map(|b| b.0));
    csv_string(
        &header,
        rows.iter().map(|r| {
            let mut row = vec![
                r.group.clone(),
                num(r.expected_senders),
                num(r.population),
                num(r.male_share),
                num(r.female_share),
                num(r.mean_age),
            ];
            row.extend(r.band_shares.iter().map(|&b| num(b)));
            row
        }),
    )
}

/// One probability profile: an origin's diaspora in one month, over a destination
/// scope (`all` or a country code).
pub struct ProfileRows<'a> {
    pub origin: &'a CountryCode,
    pub scope: String,
    pub month: YearMonth,
    pub points: Vec<ProfilePoint<f64>>,
}

pub fn profiles_csv(profiles: &[ProfileRows]) -> String {
    csv_string(
        &["origin", "destination_scope", "month", "cum_population_fraction", "probability"],
        profiles.iter().flat_map(|p| {
            p.points.iter().map(move |pt| {
                [
                    p.origin.to_string(),
                    p.scope.clone(),
                    p.month.to_string(),
                    num(pt.cum_population_fraction),
                    num(pt.probability),
                ]
            })
        }),
    )
}

fn matrix_rows<'a>(matrices: &'a [FlowMatrix], scenario_id: &'a str) -> impl Iterator<Item = [String; 5]> + 'a {
    matrices.iter().flat_map(move |m| {
        m.entries.iter().map(move |((s, r), v)| {
            [s.to_string(), r.to_string(), m.month.to_string(), num(*v), scenario_id.to_string()]
        })
    })
}

pub fn flows_csv(matrices: &[FlowMatrix], scenario_id: &str) -> String {
    csv_string(
        &["sender", "recipient", "month", "amount_usd", "scenario_id"],
        matrix_rows(matrices, scenario_id),
    )
}

pub fn induced_csv(result: &ScenarioResult) -> String {
    csv_string(
        &["scenario_id", "sender", "recipient", "month", "amount_usd"],
        matrix_rows(&result.induced, &result.scenario_id).map(|[s, r, m, v, id]| [id, s, r, m, v]),
    )
}

pub fn bands_csv(bands: &[UncertaintyBand]) -> String {
    csv_string(
        &["aggregate_id", "level", "lower", "mean", "upper"],
        bands.iter().map(|b| {
            [
                b.aggregate_id.clone(),
                num(b.level),
                num(b.lower),
                num(b.mean),
                num(b.upper),
            ]
        }),
    )
}

/// Per-hazard rows, then an `all` row with the joint total and an `interaction`
/// row with the residual.
pub fn attribution_csv(report: &AttributionReport) -> String {
    let share = |x: f64| {
        if report.total_factual > 0.0 {
            x / report.total_factual
        } else {
            0.0
        }
    };
    let affected: f64 = report.hazards.iter().map(|h| h.affected_persons).sum();
    let mut rows: Vec<[String; 5]> = report
        .hazards
        .iter()
        .map(|h| {
            [
                h.hazard.to_string(),
                num(h.induced_usd),
                num(h.affected_persons),
                opt(h.usd_per_affected),
                num(h.share_of_total),
            ]
        })
        .collect();
    rows.push([
        "all".into(),
        num(report.total_induced),
        num(affected),
        opt((affected > 0.0).then(|| report.total_induced / affected)),
        num(share(report.total_induced)),
    ]);
    rows.push([
        "interaction".into(),
        num(report.interaction_residual),
        String::new(),
        String::new(),
        num(share(report.interaction_residual)),
    ]);
    csv_string(
        &["hazard", "induced_usd", "affected_persons", "usd_per_affected", "share_of_total"],
        rows,
    )
}

pub fn events_csv(events: &[EventAttribution]) -> String {
    csv_string(
        &["event_id", "induced_usd_12m", "baseline_usd_12m", "relative_increase"],
        events.iter().map(|e| {
            [
                e.event_id.clone(),
                num(e.induced_usd_12m),
                num(e.baseline_usd_12m),
                opt(e.relative_increase),
            ]
        }),
    )
}

pub fn comparison_csv(report: &ComparisonReport) -> String {
    csv_string(
        &["sender", "recipient", "observed_usd", "structural_usd", "gravity_usd", "se_structural", "se_gravity"],
        report.corridors.iter().map(|c| {
            [
                c.sender.to_string(),
                c.recipient.to_string(),
                num(c.observed_usd),
                num(c.structural_usd),
                num(c.gravity_usd),
                num(c.se_structural),
                num(c.se_gravity),
            ]
        }),
    )
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    csv_string(
        &[
            "grouping",
            "group",
            "induced_usd",
            "factual_usd",
            "share_of_induced",
            "induced_fraction",
            "induced_per_capita",
            "induced_per_gdp",
        ],
        rows.iter().map(|r| {
            [
                r.grouping.to_string(),
                r.group.clone(),
                num(r.induced_usd),
                num(r.factual_usd),
                num(r.share_of_induced),
                num(r.induced_fraction),
                num(r.induced_per_capita),
                num(r.induced_per_gdp),
            ]
        }),
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hashes of every input and output file of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Hashes every regular file directly inside `output_dir` except the manifest.
pub fn hash_outputs(output_dir: &Path) -> std::io::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(output_dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_FILE || !entry.file_type()?.is_file() {
            continue;
        }
        out.insert(name, sha256_hex(&fs::read(entry.path())?));
    }
    Ok(out)
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }
}
