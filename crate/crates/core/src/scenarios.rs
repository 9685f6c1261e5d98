//! Counterfactual runs and attribution of disaster-induced flows.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::behavior::{BehaviorParams, DISASTER_WINDOW};
use crate::dataio::{AttributionConvention, CountryCode, Dataset, DisasterEvent, Hazard};
use crate::flows::{confidence_band, EventFilter, FlowError, FlowMatrix, SimulationModel, UncertaintyBand};
use crate::time::{MonthRange, YearMonth};

type Params = BehaviorParams<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown event id {0:?}")]
    UnknownEvent(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Factual (all events) against a filtered counterfactual.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario_id: String,
    pub factual: Vec<FlowMatrix>,
    pub counterfactual: Vec<FlowMatrix>,
    /// `factual - counterfactual`, entrywise.
    pub induced: Vec<FlowMatrix>,
}

impl ScenarioResult {
    pub fn total_factual(&self) -> f64 {
        self.factual.iter().map(FlowMatrix::total).sum()
    }

    pub fn total_induced(&self) -> f64 {
        self.induced.iter().map(FlowMatrix::total).sum()
    }
}

/// Label of the scenario a filter describes.
pub fn scenario_label(filter: &EventFilter) -> String {
    let join = |v: Vec<String>| v.join("+");
    match filter {
        EventFilter::All => "all-events".into(),
        EventFilter::None => "no-disaster".into(),
        EventFilter::OnlyHazards(h) => format!("only-{}", join(h.iter().map(|h| h.label().into()).collect())),
        EventFilter::ExceptHazards(h) => format!("except-{}", join(h.iter().map(|h| h.label().into()).collect())),
        EventFilter::OnlyEvents(ids) => format!("event-{}", join(ids.iter().cloned().collect())),
    }
}

/// Runs the model with every event and with the filtered event set.
pub fn run_counterfactual(model: &SimulationModel, params: &Params, filter: &EventFilter) -> ScenarioResult {
    run_pair(model, params, &EventFilter::All, filter, scenario_label(filter))
}

fn run_pair(
    model: &SimulationModel,
    params: &Params,
    factual: &EventFilter,
    counterfactual: &EventFilter,
    scenario_id: String,
) -> ScenarioResult {
    let f = model.cell_flows(params, factual);
    let c = model.cell_flows(params, counterfactual);
    let d: Vec<f64> = f.iter().zip(&c).map(|(a, b)| a - b).collect();
    ScenarioResult {
        scenario_id,
        factual: model.matrices_from_cells(&f),
        counterfactual: model.matrices_from_cells(&c),
        induced: model.matrices_from_cells(&d),
    }
}

/// Percentile band of total induced flows, drawing factual and counterfactual
/// samples from the same per-cell streams.
pub fn induced_band(
    model: &SimulationModel,
    params: &Params,
    filter: &EventFilter,
    cells: &[usize],
    aggregate_id: &str,
    seed: u64,
    draws: usize,
) -> Result<UncertaintyBand, ScenarioError> {
    let f = model.sample_cells(params, &EventFilter::All, cells, seed, draws)?;
    let c = model.sample_cells(params, filter, cells, seed, draws)?;
    let d: Vec<f64> = f.iter().zip(&c).map(|(a, b)| a - b).collect();
    Ok(confidence_band(aggregate_id, &d)?)
}

/// True when any of the event's kernel months falls inside the window.
fn touches_window(e: &DisasterEvent, window: MonthRange) -> bool {
    e.onset_month <= window.end && e.onset_month.plus(DISASTER_WINDOW - 1) >= window.start
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardAttribution {
    pub hazard: Hazard,
    pub induced_usd: f64,
    pub affected_persons: f64,
    /// Undefined (`None`) when no one was affected by the hazard.
    pub usd_per_affected: Option<f64>,
    /// Induced flows over total factual flows.
    pub share_of_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionReport {
    pub convention: AttributionConvention,
    pub hazards: Vec<HazardAttribution>,
    pub total_induced: f64,
    pub total_factual: f64,
    /// Total induced minus the sum of per-hazard induced flows.
    pub interaction_residual: f64,
}

/// Splits disaster-induced flows by hazard type.
///
/// `OnlyHazard` compares each hazard alone against no disasters; `LeaveOneOut`
/// compares all events against all but that hazard.
pub fn attribute_by_hazard(
    model: &SimulationModel,
    params: &Params,
    convention: AttributionConvention,
) -> AttributionReport {
    let all: f64 = model.cell_flows(params, &EventFilter::All).iter().sum();
    let none: f64 = model.cell_flows(params, &EventFilter::None).iter().sum();
    let window = model.dataset().window();
    let events = &model.dataset().tables().disasters;
    let total_induced = all - none;
    let hazards: Vec<HazardAttribution> = Hazard::ALL
        .iter()
        .map(|&h| {
            let induced_usd = match convention {
                AttributionConvention::OnlyHazard => {
                    model.cell_flows(params, &EventFilter::only_hazard(h)).iter().sum::<f64>() - none
                }
                AttributionConvention::LeaveOneOut => {
                    all - model.cell_flows(params, &EventFilter::except_hazard(h)).iter().sum::<f64>()
                }
            };
            let affected_persons: f64 = events
                .iter()
                .filter(|e| e.hazard == h && touches_window(e, window))
                .map(|e| e.affected)
                .sum();
            let usd_per_affected = (affected_persons > 0.0).then(|| induced_usd / affected_persons);
            if usd_per_affected.is_none() {
                log::warn!("no persons affected by {h}; per-affected ratio undefined");
            }
            HazardAttribution {
                hazard: h,
                induced_usd,
                affected_persons,
                usd_per_affected,
                share_of_total: if all > 0.0 { induced_usd / all } else { 0.0 },
            }
        })
        .collect();
    let interaction_residual = total_induced - hazards.iter().map(|h| h.induced_usd).sum::<f64>();
    AttributionReport {
        convention,
        hazards,
        total_induced,
        total_factual: all,
        interaction_residual,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorridorInduced {
    pub sender: CountryCode,
    pub recipient: CountryCode,
    pub induced_usd: f64,
    pub baseline_usd: f64,
}

/// Flows connected to one event over the twelve months from its onset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventAttribution {
    pub event_id: String,
    pub country: CountryCode,
    pub hazard: Hazard,
    pub onset_month: YearMonth,
    /// Months of the event window inside the simulation window.
    pub months_covered: usize,
    pub induced_usd_12m: f64,
    pub baseline_usd_12m: f64,
    /// `None` when the baseline is zero.
    pub relative_increase: Option<f64>,
    pub corridors: Vec<CorridorInduced>,
}

/// Flows with only this event active minus flows with none, per corridor.
pub fn attribute_event(model: &SimulationModel, params: &Params, event_id: &str) -> Result<EventAttribution, ScenarioError> {
    let event = model
        .dataset()
        .event(event_id)
        .ok_or_else(|| ScenarioError::UnknownEvent(event_id.to_string()))?;
    let window = model.dataset().window();
    let positions: Vec<usize> = (0..DISASTER_WINDOW)
        .filter_map(|k| window.position(event.onset_month.plus(k)))
        .collect();
    let corridors: Vec<usize> = (0..model.population().corridors().len())
        .filter(|&c| model.population().corridors()[c].origin == event.country)
        .collect();
    let cells: Vec<usize> = corridors
        .iter()
        .flat_map(|&c| positions.iter().map(move |&p| (c, p)))
        .map(|(c, p)| model.cell_index(c, p))
        .collect();
    let with = model.flows_for_cells(params, &EventFilter::only_event(event_id), &cells);
    let without = model.flows_for_cells(params, &EventFilter::None, &cells);
    let per = positions.len();
    let rows: Vec<CorridorInduced> = corridors
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let range = i * per..(i + 1) * per;
            let (s, r) = model.sender_recipient(c);
            let induced: f64 = range.clone().map(|j| with[j] - without[j]).sum();
            CorridorInduced {
                sender: s.clone(),
                recipient: r.clone(),
                induced_usd: induced,
                baseline_usd: without[range].iter().sum(),
            }
        })
        .collect();
    let induced: f64 = rows.iter().map(|r| r.induced_usd).sum();
    let baseline: f64 = rows.iter().map(|r| r.baseline_usd).sum();
    Ok(EventAttribution {
        event_id: event.event_id.clone(),
        country: event.country.clone(),
        hazard: event.hazard,
        onset_month: event.onset_month,
        months_covered: per,
        induced_usd_12m: induced,
        baseline_usd_12m: baseline,
        relative_increase: (baseline > 0.0).then(|| induced / baseline),
        corridors: rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Grouping {
    IncomeGroup,
    Country,
    Year,
}

impl Grouping {
    pub fn label(self) -> &'static str {
        match self {
            Grouping::IncomeGroup => "income_group",
            Grouping::Country => "country",
            Grouping::Year => "year",
        }
    }
}

/// Induced and factual flows of one group of recipients (or one year).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub grouping: &'static str,
    pub group: String,
    pub induced_usd: f64,
    pub factual_usd: f64,
    /// Share of all induced flows.
    pub share_of_induced: f64,
    /// Induced over factual flows within the group.
    pub induced_fraction: f64,
    /// Induced USD per resident of the recipient countries.
    pub induced_per_capita: f64,
    /// Induced USD over recipient GDP accumulated across the window.
    pub induced_per_gdp: f64,
}

/// Groups induced flows by recipient income group, recipient country or year.
///
/// Income groups are taken per year, so a country can move between groups.
pub fn summarize(result: &ScenarioResult, dataset: &Dataset, grouping: Grouping) -> Vec<SummaryRow> {
    #[derive(Default)]
    struct Acc {
        induced: f64,
        factual: f64,
        // Population per year, summed over member countries.
        population: BTreeMap<i32, f64>,
        gdp: f64,
        seen: std::collections::BTreeSet<(CountryCode, i32)>,
    }
    let key = |c: &CountryCode, year: i32| -> String {
        match grouping {
            Grouping::IncomeGroup => dataset
                .economics(c, year)
                .map_or_else(|| "unknown".to_string(), |e| e.income_group.label().to_string()),
            Grouping::Country => c.to_string(),
            Grouping::Year => year.to_string(),
        }
    };
    let mut groups: BTreeMap<String, Acc> = BTreeMap::new();
    for (f, d) in result.factual.iter().zip(&result.induced) {
        let year = f.month.year();
        for ((_, recipient), &v) in &f.entries {
            groups.entry(key(recipient, year)).or_default().factual += v;
        }
        for ((_, recipient), &v) in &d.entries {
            groups.entry(key(recipient, year)).or_default().induced += v;
        }
        let recipients: std::collections::BTreeSet<&CountryCode> = f.entries.keys().map(|(_, r)| r).collect();
        for r in recipients {
            let acc = groups.get_mut(&key(r, year)).expect("group inserted above");
            if let Some(e) = dataset.economics(r, year) {
                acc.gdp += e.gdp_per_capita * e.population / 12.0;
                if acc.seen.insert((r.clone(), year)) {
                    *acc.population.entry(year).or_insert(0.0) += e.population;
                }
            }
        }
    }
    let total_induced: f64 = groups.values().map(|a| a.induced).sum();
    groups
        .into_iter()
        .map(|(group, a)| {
            let mean_pop = if a.population.is_empty() {
                0.0
            } else {
                a.population.values().sum::<f64>() / a.population.len() as f64
            };
            let ratio = |x: f64, y: f64| if y > 0.0 { x / y } else { 0.0 };
            SummaryRow {
                grouping: grouping.label(),
                group,
                induced_usd: a.induced,
                factual_usd: a.factual,
                share_of_induced: ratio(a.induced, total_induced),
                induced_fraction: ratio(a.induced, a.factual),
                induced_per_capita: ratio(a.induced, mean_pop),
                induced_per_gdp: ratio(a.induced, a.gdp),
            }
        })
        .collect()
}
