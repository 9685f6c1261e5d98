//! Expected bilateral flows, the Poisson-binomial sampler and confidence bands.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::behavior::{
    delta_gdp_with, disaster_magnitude, kernel, probability, probability_profile, theta,
    BehaviorParams, CovariateVector, GdpNormalizer, ProfilePoint, DISASTER_WINDOW,
};
use crate::dataio::{CountryCode, Dataset, DisasterEvent, Hazard};
use crate::population::{build_population, counts_by_age, family_probability, MigrantCohort, Population};
use crate::time::YearMonth;

/// Confidence level of every reported band.
pub const BAND_LEVEL: f64 = 0.95;
/// Smallest sample accepted by [`confidence_band`].
pub const MIN_BAND_SAMPLES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("number of draws must be at least 1")]
    ZeroDraws,
    #[error("confidence band needs at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
}

/// Flows of one month keyed by (sender, recipient).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowMatrix {
    pub month: YearMonth,
    pub entries: BTreeMap<(CountryCode, CountryCode), f64>,
}

impl FlowMatrix {
    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Inflows per recipient.
    pub fn recipient_totals(&self) -> BTreeMap<CountryCode, f64> {
        let mut out = BTreeMap::new();
        for ((_, r), v) in &self.entries {
            *out.entry(r.clone()).or_insert(0.0) += v;
        }
        out
    }
}

/// Percentile band of a simulated aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyBand {
    pub aggregate_id: String,
    pub level: f64,
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
}

/// Which disaster events are active in a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventFilter {
    All,
    None,
    OnlyHazards(BTreeSet<Hazard>),
    ExceptHazards(BTreeSet<Hazard>),
    OnlyEvents(BTreeSet<String>),
}

impl EventFilter {
    pub fn only_hazard(h: Hazard) -> Self {
        Self::OnlyHazards([h].into_iter().collect())
    }

    pub fn except_hazard(h: Hazard) -> Self {
        Self::ExceptHazards([h].into_iter().collect())
    }

    pub fn only_event(id: &str) -> Self {
        Self::OnlyEvents([id.to_string()].into_iter().collect())
    }

    pub fn admits(&self, e: &DisasterEvent) -> bool {
        match self {
            EventFilter::All => true,
            EventFilter::None => false,
            EventFilter::OnlyHazards(h) => h.contains(&e.hazard),
            EventFilter::ExceptHazards(h) => !h.contains(&e.hazard),
            EventFilter::OnlyEvents(ids) => ids.contains(&e.event_id),
        }
    }
}

/// Exact expectation of the Bernoulli sum: `sum(count * p) * rho * monthly income`.
pub fn expected_flow(
    cohorts: &[MigrantCohort],
    probabilities: &[f64],
    params: &BehaviorParams<f64>,
    gdp_dest_monthly: f64,
) -> f64 {
    let senders: f64 = cohorts
        .iter()
        .zip(probabilities)
        .map(|(c, &p)| c.count * p)
        .sum();
    senders * params.rho * gdp_dest_monthly
}

/// Sender count of each draw: independent binomials over `(agents, p)` groups.
pub fn sample_sender_counts(
    cohorts: &[(u64, f64)],
    rng: &mut ChaCha8Rng,
    draws: usize,
) -> Result<Vec<u64>, FlowError> {
    if draws == 0 {
        return Err(FlowError::ZeroDraws);
    }
    let dists: Vec<Option<Binomial>> = cohorts
        .iter()
        .map(|&(n, p)| {
            if n == 0 || p <= 0.0 || p >= 1.0 {
                None
            } else {
                Some(Binomial::new(n, p).expect("probability in (0, 1)"))
            }
        })
        .collect();
    let certain: u64 = cohorts
        .iter()
        .filter(|&&(_, p)| p >= 1.0)
        .map(|&(n, _)| n)
        .sum();
    Ok((0..draws)
        .map(|_| {
            certain
                + dists
                    .iter()
                    .flatten()
                    .map(|d| d.sample(rng))
                    .sum::<u64>()
        })
        .collect())
}

/// Sampling groups of a cohort with a fractional head count: the whole agents
/// with probability `p`, and one extra agent present with probability equal to
/// the fractional part, so it sends with probability `frac * p`. The expected
/// sender count is exactly `count * p`.
pub fn agent_groups(count: f64, p: f64) -> [(u64, f64); 2] {
    let count = count.max(0.0);
    let whole = count.floor();
    [(whole as u64, p), (u64::from(count > whole), (count - whole) * p)]
}

/// Draws `draws` USD totals for one corridor-month, reproducible from `seed`.
pub fn sample_flows(
    cohorts: &[MigrantCohort],
    probabilities: &[f64],
    params: &BehaviorParams<f64>,
    gdp_dest_monthly: f64,
    seed: u64,
    draws: usize,
) -> Result<Vec<f64>, FlowError> {
    let pairs: Vec<(u64, f64)> = cohorts
        .iter()
        .zip(probabilities)
        .flat_map(|(c, &p)| agent_groups(c.count, p))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_sender = params.rho * gdp_dest_monthly;
    Ok(sample_sender_counts(&pairs, &mut rng, draws)?
        .into_iter()
        .map(|n| n as f64 * per_sender)
        .collect())
}

/// Linear-interpolated empirical percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Empirical 2.5 / 97.5 percentiles and mean.
pub fn confidence_band(aggregate_id: &str, samples: &[f64]) -> Result<UncertaintyBand, FlowError> {
    if samples.len() < MIN_BAND_SAMPLES {
        return Err(FlowError::TooFewSamples {
            got: samples.len(),
            need: MIN_BAND_SAMPLES,
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let tail = (1.0 - BAND_LEVEL) / 2.0;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let lower = percentile(&sorted, tail);
    let upper = percentile(&sorted, 1.0 - tail);
    Ok(UncertaintyBand {
        aggregate_id: aggregate_id.to_string(),
        level: BAND_LEVEL,
        lower: lower.min(mean),
        mean,
        upper: upper.max(mean),
    })
}

/// Mixes a base seed with a stream label into an independent seed (SplitMix64 finaliser).
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelOptions {
    pub delta_gdp_clamp: bool,
}

/// Time-invariant inputs of one corridor-month.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorMonth {
    pub corridor: usize,
    pub month_pos: usize,
    pub family: f64,
    pub delta_gdp: f64,
    pub gdp_norm: f64,
    pub gdp_dest_monthly: f64,
    /// `(surplus, count)` for every age with positive surplus and count.
    pub ages: Vec<(f64, f64)>,
}

impl CorridorMonth {
    fn base_score(&self, params: &BehaviorParams<f64>, disaster: f64) -> f64 {
        params.alpha
            + params.beta1 * self.family
            + params.beta2 * self.delta_gdp
            + params.beta3 * self.gdp_norm
            + disaster
    }

    /// Expected senders given the origin's disaster score this month.
    pub fn expected_senders(&self, params: &BehaviorParams<f64>, disaster: f64) -> f64 {
        let base = self.base_score(params, disaster);
        self.ages
            .iter()
            .map(|&(s, n)| n * probability(base + params.beta0 * s))
            .sum()
    }

    pub fn expected_flow(&self, params: &BehaviorParams<f64>, disaster: f64) -> f64 {
        self.expected_senders(params, disaster) * params.rho * self.gdp_dest_monthly
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ModelEvent {
    origin: usize,
    onset: YearMonth,
    magnitude: f64,
    index: usize,
}

/// Population plus every static covariate, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct SimulationModel {
    dataset: Dataset,
    population: Population,
    options: ModelOptions,
    origins: Vec<CountryCode>,
    corridor_origin: Vec<usize>,
    cells: Vec<CorridorMonth>,
    events: Vec<ModelEvent>,
    gdp_norm: GdpNormalizer<f64>,
}

impl SimulationModel {
    pub fn new(dataset: &Dataset, options: ModelOptions) -> Self {
        let population = build_population(dataset);
        let window = dataset.window();
        let months = window.len();
        let origins: Vec<CountryCode> = population
            .corridors()
            .iter()
            .map(|c| c.origin.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let corridor_origin: Vec<usize> = population
            .corridors()
            .iter()
            .map(|c| origins.binary_search(&c.origin).expect("origin indexed"))
            .collect();
        let gdp = |c: &CountryCode, year: i32| {
            dataset
                .economics(c, year)
                .expect("economics validated for every stock country")
                .gdp_per_capita
        };
        let gdp_norm = GdpNormalizer::fit(
            origins
                .iter()
                .flat_map(|o| window.years().map(move |y| (o, y)))
                .map(|(o, y)| gdp(o, y)),
        )
        .unwrap_or(GdpNormalizer { min: 0.0, max: 0.0 });

        let mut cells = Vec::with_capacity(population.corridors().len() * months);
        for (ci, corridor) in population.corridors().iter().enumerate() {
            let profile = dataset
                .surplus_profile(&corridor.destination)
                .expect("surplus coverage validated");
            for (pos, month) in window.iter().enumerate() {
                let group = population.group(ci, pos);
                let year = month.year();
                let (g_dest, g_orig) = (gdp(&corridor.destination, year), gdp(&corridor.origin, year));
                let counts = counts_by_age(group);
                cells.push(CorridorMonth {
                    corridor: ci,
                    month_pos: pos,
                    family: family_probability(group).map_or(1.0, |s| s.family),
                    delta_gdp: delta_gdp_with(g_dest, g_orig, options.delta_gdp_clamp)
                        .expect("positive GDP validated"),
                    gdp_norm: gdp_norm.normalize(g_orig),
                    gdp_dest_monthly: g_dest / 12.0,
                    ages: profile
                        .iter()
                        .zip(counts.iter())
                        .filter(|&(&s, &n)| s > 0.0 && n > 0.0)
                        .map(|(&s, &n)| (s, n))
                        .collect(),
                });
            }
        }

        let events = dataset
            .tables()
            .disasters
            .iter()
            .enumerate()
            .filter_map(|(index, e)| {
                let origin = origins.binary_search(&e.country).ok()?;
                let pop = dataset
                    .economics(&e.country, e.onset_month.year())
                    .expect("population validated for event years")
                    .population;
                Some(ModelEvent {
                    origin,
                    onset: e.onset_month,
                    magnitude: disaster_magnitude(e.affected, pop),
                    index,
                })
            })
            .collect();

        Self {
            dataset: dataset.clone(),
            population,
            options,
            origins,
            corridor_origin,
            cells,
            events,
            gdp_norm,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn options(&self) -> ModelOptions {
        self.options
    }

    pub fn months(&self) -> usize {
        self.dataset.window().len()
    }

    pub fn cells(&self) -> &[CorridorMonth] {
        &self.cells
    }

    pub fn cell_index(&self, corridor: usize, month_pos: usize) -> usize {
        corridor * self.months() + month_pos
    }

    pub fn gdp_normalizer(&self) -> GdpNormalizer<f64> {
        self.gdp_norm
    }

    pub fn origin_of_corridor(&self, corridor: usize) -> usize {
        self.corridor_origin[corridor]
    }

    /// Sender and recipient of a corridor (migrants send from their destination).
    pub fn sender_recipient(&self, corridor: usize) -> (&CountryCode, &CountryCode) {
        let c = &self.population.corridors()[corridor];
        (&c.destination, &c.origin)
    }

    /// Disaster score per origin (row) and month position (column), row-major.
    pub fn disaster_scores(&self, params: &BehaviorParams<f64>, filter: &EventFilter) -> Vec<f64> {
        let months = self.months();
        let window = self.dataset.window();
        let mut scores = vec![0.0; self.origins.len() * months];
        let events = &self.dataset.tables().disasters;
        for ev in &self.events {
            if !filter.admits(&events[ev.index]) || ev.magnitude == 0.0 {
                continue;
            }
            for k in 0..DISASTER_WINDOW {
                if let Some(pos) = window.position(ev.onset.plus(k)) {
                    scores[ev.origin * months + pos] += ev.magnitude * kernel(k, params);
                }
            }
        }
        scores
    }

    fn cell_score(&self, scores: &[f64], cell: &CorridorMonth) -> f64 {
        scores[self.corridor_origin[cell.corridor] * self.months() + cell.month_pos]
    }

    /// Expected flow of every corridor-month (dense, `corridor * months + month`).
    pub fn cell_flows(&self, params: &BehaviorParams<f64>, filter: &EventFilter) -> Vec<f64> {
        let scores = self.disaster_scores(params, filter);
        self.cells
            .par_iter()
            .map(|cell| cell.expected_flow(params, self.cell_score(&scores, cell)))
            .collect()
    }

    /// Expected flows of selected cells only.
    pub fn flows_for_cells(
        &self,
        params: &BehaviorParams<f64>,
        filter: &EventFilter,
        cells: &[usize],
    ) -> Vec<f64> {
        let scores = self.disaster_scores(params, filter);
        cells
            .par_iter()
            .map(|&i| {
                let cell = &self.cells[i];
                cell.expected_flow(params, self.cell_score(&scores, cell))
            })
            .collect()
    }

    /// One flow matrix per month of the window.
    pub fn flow_matrices(&self, params: &BehaviorParams<f64>, filter: &EventFilter) -> Vec<FlowMatrix> {
        let flows = self.cell_flows(params, filter);
        self.matrices_from_cells(&flows)
    }

    pub fn matrices_from_cells(&self, flows: &[f64]) -> Vec<FlowMatrix> {
        let months = self.months();
        let window = self.dataset.window();
        (0..months)
            .map(|pos| FlowMatrix {
                month: window.month_at(pos),
                entries: (0..self.population.corridors().len())
                    .map(|c| {
                        let (s, r) = self.sender_recipient(c);
                        ((s.clone(), r.clone()), flows[c * months + pos])
                    })
                    .collect(),
            })
            .collect()
    }

    /// Covariates of one cohort, computed directly from the dataset tables.
    pub fn cohort_covariates(
        &self,
        cohort: &MigrantCohort,
        params: &BehaviorParams<f64>,
        filter: &EventFilter,
    ) -> CovariateVector<f64> {
        let corridor = self.population.corridor(cohort);
        let pos = self
            .dataset
            .window()
            .position(cohort.month)
            .expect("cohort month inside window");
        let year = cohort.month.year();
        let gdp = |c: &CountryCode| self.dataset.economics(c, year).expect("validated").gdp_per_capita;
        let group = self.population.group(cohort.corridor, pos);
        let events: Vec<DisasterEvent> = self
            .dataset
            .tables()
            .disasters
            .iter()
            .filter(|e| e.country == corridor.origin && filter.admits(e))
            .cloned()
            .collect();
        let score = events
            .iter()
            .map(|e| {
                let pop = self
                    .dataset
                    .economics(&e.country, e.onset_month.year())
                    .expect("validated")
                    .population;
                disaster_magnitude(e.affected, pop) * kernel(cohort.month.months_since(e.onset_month), params)
            })
            .sum();
        CovariateVector {
            surplus: self
                .dataset
                .surplus_profile(&corridor.destination)
                .expect("validated")[usize::from(cohort.age)],
            family: family_probability(group).map_or(1.0, |s| s.family),
            delta_gdp: delta_gdp_with(gdp(&corridor.destination), gdp(&corridor.origin), self.options.delta_gdp_clamp)
                .expect("validated"),
            gdp_norm: self.gdp_norm.normalize(gdp(&corridor.origin)),
            disaster_score: score,
        }
    }

    /// Remittance probability of every cohort in population order.
    pub fn cohort_probabilities(&self, params: &BehaviorParams<f64>, filter: &EventFilter) -> Vec<f64> {
        let scores = self.disaster_scores(params, filter);
        let months = self.months();
        self.population
            .cohorts()
            .par_iter()
            .map(|c| {
                let pos = self.dataset.window().position(c.month).expect("in window");
                let cell = &self.cells[c.corridor * months + pos];
                let surplus = self
                    .dataset
                    .surplus_profile(&self.population.corridor(c).destination)
                    .expect("validated")[usize::from(c.age)];
                let cov = CovariateVector {
                    surplus,
                    family: cell.family,
                    delta_gdp: cell.delta_gdp,
                    gdp_norm: cell.gdp_norm,
                    disaster_score: self.cell_score(&scores, cell),
                };
                probability(theta(&cov, params))
            })
            .collect()
    }

    /// Sorted probability profile of an origin's diaspora in one month, over all
    /// destinations or a single one.
    pub fn probability_profile(
        &self,
        params: &BehaviorParams<f64>,
        filter: &EventFilter,
        origin: &CountryCode,
        month: YearMonth,
        destination: Option<&CountryCode>,
    ) -> Vec<ProfilePoint<f64>> {
        let Some(pos) = self.dataset.window().position(month) else {
            return Vec::new();
        };
        let scores = self.disaster_scores(params, filter);
        let mut pairs = Vec::new();
        for (ci, corridor) in self.population.corridors().iter().enumerate() {
            if &corridor.origin != origin || destination.is_some_and(|d| d != &corridor.destination) {
                continue;
            }
            let cell = &self.cells[self.cell_index(ci, pos)];
            let base = cell.base_score(params, self.cell_score(&scores, cell));
            let profile = self
                .dataset
                .surplus_profile(&corridor.destination)
                .expect("validated");
            for c in self.population.group(ci, pos) {
                let s = profile[usize::from(c.age)];
                let p = if s > 0.0 { probability(base + params.beta0 * s) } else { 0.0 };
                pairs.push((p, c.count));
            }
        }
        probability_profile(&pairs)
    }

    /// Sampling groups of one cell, merging sexes that share an age.
    fn sampling_pairs(&self, cell: &CorridorMonth, params: &BehaviorParams<f64>, score: f64) -> Vec<(u64, f64)> {
        let base = cell.base_score(params, score);
        let destination = &self.population.corridors()[cell.corridor].destination;
        let profile = self.dataset.surplus_profile(destination).expect("validated");
        let mut by_age: BTreeMap<u8, (f64, f64)> = BTreeMap::new();
        for c in self.population.group(cell.corridor, cell.month_pos) {
            let s = profile[usize::from(c.age)];
            if s <= 0.0 {
                continue;
            }
            let p = probability(base + params.beta0 * s);
            by_age.entry(c.age).or_insert((0.0, p)).0 += c.count;
        }
        by_age
            .into_values()
            .flat_map(|(n, p)| agent_groups(n, p))
            .collect()
    }

    /// Sampled USD totals of a set of cells. Each cell draws from its own stream
    /// derived from `seed` and the cell index, so the result does not depend on
    /// thread scheduling, and two runs with different filters consume identical
    /// streams (common random numbers).
    pub fn sample_cells(
        &self,
        params: &BehaviorParams<f64>,
        filter: &EventFilter,
        cells: &[usize],
        seed: u64,
        draws: usize,
    ) -> Result<Vec<f64>, FlowError> {
        if draws == 0 {
            return Err(FlowError::ZeroDraws);
        }
        let scores = self.disaster_scores(params, filter);
        let per_cell: Vec<Vec<f64>> = cells
            .par_iter()
            .map(|&i| {
                let cell = &self.cells[i];
                let pairs = self.sampling_pairs(cell, params, self.cell_score(&scores, cell));
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, i as u64));
                let unit = params.rho * cell.gdp_dest_monthly;
                sample_sender_counts(&pairs, &mut rng, draws)
                    .map(|v| v.into_iter().map(|n| n as f64 * unit).collect())
            })
            .collect::<Result<_, _>>()?;
        let mut totals = vec![0.0; draws];
        for v in per_cell {
            for (t, x) in totals.iter_mut().zip(v) {
                *t += x;
            }
        }
        Ok(totals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FixtureSpec;

    fn cohort(count: f64) -> MigrantCohort {
        MigrantCohort {
            corridor: 0,
            sex: crate::dataio::Sex::Male,
            age: 30,
            month: YearMonth::new(2010, 1).unwrap(),
            count,
        }
    }

    #[test]
    fn expected_flow_examples() {
        let mut p = BehaviorParams::<f64>::reference();
        p.rho = 0.18;
        let f = expected_flow(&[cohort(1000.0)], &[0.5], &p, 3000.0);
        assert!((f - 270_000.0).abs() < 1e-6);
        assert_eq!(expected_flow(&[cohort(10.0), cohort(5.0)], &[0.0, 0.0], &p, 3000.0), 0.0);
        let a = expected_flow(&[cohort(10.0)], &[0.2], &p, 100.0);
        let b = expected_flow(&[cohort(7.0)], &[0.9], &p, 100.0);
        let ab = expected_flow(&[cohort(10.0), cohort(7.0)], &[0.2, 0.9], &p, 100.0);
        assert!((a + b - ab).abs() < 1e-12);
    }

    #[test]
    fn two_agent_distribution_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let counts = sample_sender_counts(&[(2, 0.5)], &mut rng, draws).unwrap();
        // Exact enumeration over {0,1}^2 with p = 0.5.
        let mut exact = [0.0; 3];
        for a in 0..2 {
            for b in 0..2 {
                exact[a + b] += 0.25;
            }
        }
        for (k, &pk) in exact.iter().enumerate() {
            let freq = counts.iter().filter(|&&c| c == k as u64).count() as f64 / draws as f64;
            let se = (pk * (1.0 - pk) / draws as f64).sqrt();
            assert!((freq - pk).abs() < 4.0 * se, "k={k} freq={freq}");
        }
    }

    #[test]
    fn certain_senders_have_zero_variance() {
        let p = BehaviorParams::<f64>::reference();
        let s = sample_flows(&[cohort(40.0), cohort(2.0)], &[1.0, 1.0], &p, 100.0, 1, 50).unwrap();
        assert!(s.iter().all(|&x| x == s[0]));
        assert!((s[0] - 42.0 * p.rho * 100.0).abs() < 1e-9);
        assert_eq!(
            sample_flows(&[cohort(1.0)], &[0.5], &p, 1.0, 1, 0),
            Err(FlowError::ZeroDraws)
        );
    }

    #[test]
    fn fractional_agents_keep_the_expectation() {
        assert_eq!(agent_groups(2.0, 0.5), [(2, 0.5), (0, 0.0)]);
        assert_eq!(agent_groups(2.5, 0.4), [(2, 0.4), (1, 0.2)]);
        assert_eq!(agent_groups(-1.0, 0.4), [(0, 0.4), (0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 200_000;
        let s = sample_sender_counts(&agent_groups(0.3, 0.5), &mut rng, draws).unwrap();
        let mean = s.iter().sum::<u64>() as f64 / draws as f64;
        assert!((mean - 0.15).abs() < 4.0 * (0.15f64 * 0.85 / draws as f64).sqrt());
    }

    #[test]
    fn seeded_samples_are_identical() {
        let p = BehaviorParams::<f64>::reference();
        let c = [cohort(300.0), cohort(77.0)];
        let a = sample_flows(&c, &[0.3, 0.6], &p, 10.0, 99, 200).unwrap();
        let b = sample_flows(&c, &[0.3, 0.6], &p, 10.0, 99, 200).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn band_examples() {
        let constant = vec![7.0; 1000];
        let b = confidence_band("c", &constant).unwrap();
        assert_eq!((b.lower, b.mean, b.upper), (7.0, 7.0, 7.0));
        let two: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 0.0 } else { 100.0 }).collect();
        let b = confidence_band("t", &two).unwrap();
        assert_eq!((b.lower, b.mean, b.upper), (0.0, 50.0, 100.0));
        assert_eq!(b.level, 0.95);
        assert!(matches!(confidence_band("x", &[1.0; 10]), Err(FlowError::TooFewSamples { .. })));
    }

    #[test]
    fn band_matches_exact_binomial_quantiles() {
        // Exact quantiles of Binomial(200, 0.3) from the cumulative mass function.
        let (n, p) = (200u64, 0.3f64);
        let mut pmf = vec![0.0; n as usize + 1];
        pmf[0] = (1.0 - p).powi(n as i32);
        for k in 1..=n as usize {
            pmf[k] = pmf[k - 1] * (n as f64 - k as f64 + 1.0) / k as f64 * p / (1.0 - p);
        }
        let quantile = |q: f64| {
            let mut acc = 0.0;
            for (k, m) in pmf.iter().enumerate() {
                acc += m;
                if acc >= q {
                    return k as f64;
                }
            }
            n as f64
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s: Vec<f64> = sample_sender_counts(&[(n, p)], &mut rng, 50_000)
            .unwrap()
            .into_iter()
            .map(|x| x as f64)
            .collect();
        let band = confidence_band("b", &s).unwrap();
        assert!((band.lower - quantile(0.025)).abs() <= 1.0, "{} vs {}", band.lower, quantile(0.025));
        assert!((band.upper - quantile(0.975)).abs() <= 1.0, "{} vs {}", band.upper, quantile(0.975));
    }

    #[test]
    fn fast_path_matches_per_cohort_brute_force() {
        let ds = FixtureSpec::small().dataset();
        let model = SimulationModel::new(&ds, ModelOptions::default());
        let params = BehaviorParams::reference();
        let probs = model.cohort_probabilities(&params, &EventFilter::All);
        let fast = model.cell_flows(&params, &EventFilter::All);
        let pop = model.population();
        for (ci, pos, cohorts) in pop.groups() {
            let range = pop.group_range(ci, pos);
            let cell = &model.cells()[model.cell_index(ci, pos)];
            let brute = expected_flow(cohorts, &probs[range], &params, cell.gdp_dest_monthly);
            let f = fast[model.cell_index(ci, pos)];
            assert!((brute - f).abs() <= 1e-9 * brute.abs().max(1.0), "{brute} vs {f}");
        }
    }

    #[test]
    fn brute_force_covariates_match_cached_cells() {
        let ds = FixtureSpec::small().dataset();
        let model = SimulationModel::new(&ds, ModelOptions::default());
        let params = BehaviorParams::reference();
        let probs = model.cohort_probabilities(&params, &EventFilter::All);
        for (i, c) in model.population().cohorts().iter().enumerate().step_by(97) {
            let cov = model.cohort_covariates(c, &params, &EventFilter::All);
            let p = probability(theta(&cov, &params));
            assert!((p - probs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_filter_equals_no_disaster_baseline() {
        let ds = FixtureSpec::small().dataset();
        let model = SimulationModel::new(&ds, ModelOptions::default());
        let params = BehaviorParams::reference();
        let none = model.flow_matrices(&params, &EventFilter::None);
        let empty = model.flow_matrices(&params, &EventFilter::OnlyEvents(BTreeSet::new()));
        assert_eq!(none, empty);
    }

    #[test]
    fn sampler_mean_within_three_standard_errors() {
        let ds = FixtureSpec::small().dataset();
        let model = SimulationModel::new(&ds, ModelOptions::default());
        let params = BehaviorParams::reference();
        let probs = model.cohort_probabilities(&params, &EventFilter::All);
        let pop = model.population();
        let draws = 10_000;
        for ci in 0..pop.corridors().len() {
            let range = pop.group_range(ci, 17);
            let cohorts = &pop.cohorts()[range.clone()];
            let p = &probs[range];
            let gdp_m = model.cells()[model.cell_index(ci, 17)].gdp_dest_monthly;
            let s = sample_flows(cohorts, p, &params, gdp_m, stream_seed(3, ci as u64), draws).unwrap();
            let mean = s.iter().sum::<f64>() / draws as f64;
            let exp = expected_flow(cohorts, p, &params, gdp_m);
            let var: f64 = cohorts.iter().zip(p).map(|(c, &q)| c.count * q * (1.0 - q)).sum();
            let se = var.sqrt() * params.rho * gdp_m / (draws as f64).sqrt();
            assert!((mean - exp).abs() <= 3.0 * se + 1e-9, "corridor {ci}");
        }
    }
}
