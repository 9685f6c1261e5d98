//! Synthetic desk-scale dataset generator.
//!
//! Produces every input table with plausible magnitudes and, optionally, a
//! remittance panel simulated from known parameters so calibration can be
//! checked against ground truth.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::behavior::BehaviorParams;
use crate::dataio::{
    AgeProfile, CountryCode, CountryEconomics, DataError, Dataset, DatasetTables, DisasterEvent,
    Hazard, IncomeGroup, MigrantStockRecord, PanelObservation, RunConfig, Sex, SplitTag,
    SurplusProfile, SurplusScope, ANCHOR_YEARS, N_AGES,
};
use crate::flows::{EventFilter, ModelOptions, SimulationModel};
use crate::time::{MonthRange, YearMonth};

const DESTINATIONS: [&str; 10] = ["USA", "DEU", "ITA", "GBR", "SAU", "ARE", "JPN", "CAN", "ESP", "FRA"];
const ORIGINS: [&str; 12] = [
    "MEX", "PHL", "PAK", "GTM", "HTI", "IND", "BGD", "NIC", "SLV", "ROU", "CHN", "NGA",
];

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub corridors: usize,
    pub events: usize,
    pub seed: u64,
    /// Standard deviation of multiplicative Gaussian noise on the panel.
    pub noise: f64,
    /// Parameters the panel is simulated from; `None` leaves the panel empty.
    pub panel_params: Option<BehaviorParams<f64>>,
    pub window: MonthRange,
}

impl FixtureSpec {
    /// 50 corridors over 2010-2019 with a noiseless panel from the reference parameters.
    pub fn standard() -> Self {
        Self {
            corridors: 50,
            events: 40,
            seed: 2024,
            noise: 0.0,
            panel_params: Some(BehaviorParams::reference()),
            window: MonthRange::decade(),
        }
    }

    /// Six corridors; used by fast unit tests.
    pub fn small() -> Self {
        Self {
            corridors: 6,
            events: 6,
            seed: 7,
            ..Self::standard()
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// All tables except the panel.
    pub fn base_tables(&self) -> DatasetTables {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let code = |s: &str| CountryCode::parse(s).expect("static code");

        let mut economics = Vec::new();
        let mut base_pop = std::collections::BTreeMap::new();
        for (i, c) in DESTINATIONS.iter().chain(ORIGINS.iter()).enumerate() {
            let is_dest = i < DESTINATIONS.len();
            let gdp0: f64 = if is_dest {
                rng.random_range(8000.0..15000.0)
            } else {
                rng.random_range(4000.0..11000.0)
            };
            let growth: f64 = rng.random_range(-0.01..0.04);
            let pop0: f64 = rng.random_range(5.0e6..1.5e8f64).round();
            let income_group = match gdp0 {
                g if g < 1100.0 => IncomeGroup::Low,
                g if g < 4500.0 => IncomeGroup::LowerMiddle,
                g if g < 12000.0 => IncomeGroup::UpperMiddle,
                _ => IncomeGroup::High,
            };
            base_pop.insert(*c, pop0);
            for year in self.window.years() {
                let t = f64::from(year - 2010);
                economics.push(CountryEconomics {
                    country: code(c),
                    year,
                    gdp_per_capita: (gdp0 * (1.0 + growth).powf(t) * 100.0).round() / 100.0,
                    population: (pop0 * 1.01f64.powf(t)).round(),
                    income_group,
                });
            }
        }

        let mut pairs: Vec<(&str, &str)> = ORIGINS
            .iter()
            .flat_map(|o| DESTINATIONS.iter().map(move |d| (*o, *d)))
            .collect();
        pairs.shuffle(&mut rng);
        pairs.truncate(self.corridors.min(pairs.len()));
        pairs.sort();

        let mut stocks = Vec::new();
        for (o, d) in &pairs {
            let male0: f64 = 10f64.powf(rng.random_range(4.3..5.9));
            let female_ratio: f64 = rng.random_range(0.2..1.3);
            for (sex, base) in [(Sex::Male, male0), (Sex::Female, male0 * female_ratio)] {
                let g1: f64 = rng.random_range(0.75..1.35);
                let g2: f64 = rng.random_range(0.75..1.35);
                let values = [base, base * g1, base * g1 * g2];
                for (year, v) in ANCHOR_YEARS.iter().zip(values) {
                    stocks.push(MigrantStockRecord {
                        origin: code(o),
                        destination: code(d),
                        sex,
                        anchor_year: *year,
                        count: v.round(),
                    });
                }
            }
        }

        let age_profiles = [Sex::Male, Sex::Female]
            .into_iter()
            .flat_map(|sex| {
                let w: Vec<f64> = (0..N_AGES)
                    .map(|a| {
                        let a = a as f64;
                        let adult = (-((a - 33.0) / 11.0).powi(2)).exp();
                        let child = (-((a - 9.0) / 6.0).powi(2)).exp();
                        let old = (-((a - 62.0) / 12.0).powi(2)).exp();
                        match sex {
                            Sex::Male => adult + 0.25 * child + 0.15 * old,
                            Sex::Female => 0.8 * adult + 0.55 * child + 0.3 * old,
                        }
                    })
                    .collect();
                let total: f64 = w.iter().sum();
                w.into_iter().enumerate().map(move |(age, x)| AgeProfile {
                    sex,
                    age: age as u8,
                    share: x / total,
                })
            })
            .collect();

        let mut surplus_profiles = Vec::new();
        let scopes = [
            (SurplusScope::GlobalDefault, 1.0, 42.0),
            (SurplusScope::Country(code("USA")), 1.25, 45.0),
            (SurplusScope::Country(code("SAU")), 0.8, 38.0),
            (SurplusScope::Country(code("DEU")), 1.1, 48.0),
        ];
        for (scope, scale, peak) in scopes {
            for age in 0..N_AGES {
                let a = age as f64;
                let surplus = if age < 16 {
                    0.0
                } else {
                    let v = scale * (0.15 + 1.3 * (-((a - peak) / 17.0).powi(2)).exp());
                    (v * 1e6).round() / 1e6
                };
                surplus_profiles.push(SurplusProfile {
                    scope: scope.clone(),
                    age: age as u8,
                    surplus,
                });
            }
        }

        let origins_used: Vec<&str> = {
            let mut v: Vec<&str> = pairs.iter().map(|(o, _)| *o).collect();
            v.dedup();
            v
        };
        let mut disasters = Vec::new();
        for i in 0..self.events {
            let country = origins_used[rng.random_range(0..origins_used.len())];
            let pos = rng.random_range(0..self.window.len());
            let onset = self.window.month_at(pos);
            let hazard = Hazard::ALL[rng.random_range(0..Hazard::ALL.len())];
            let share = 10f64.powf(rng.random_range(-2.5..-0.4));
            let pop = base_pop[country] * 1.01f64.powf(f64::from(onset.year() - 2010));
            disasters.push(DisasterEvent {
                event_id: format!("EV{:04}", i + 1),
                country: code(country),
                onset_month: onset,
                hazard,
                affected: (pop * share).round(),
            });
        }

        DatasetTables {
            economics,
            stocks,
            age_profiles,
            surplus_profiles,
            disasters,
            panel: Vec::new(),
        }
    }

    /// Panel of every corridor-month simulated from `params`, with noise.
    pub fn simulate_panel(&self, dataset: &Dataset, params: &BehaviorParams<f64>) -> Vec<PanelObservation> {
        let model = SimulationModel::new(dataset, ModelOptions::default());
        let flows = model.cell_flows(params, &EventFilter::All);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x005e_ed0f_f10e);
        let months = model.months();
        let mut panel = Vec::with_capacity(flows.len());
        for (i, &f) in flows.iter().enumerate() {
            let (sender, recipient) = model.sender_recipient(i / months);
            let eps: f64 = rng.sample(StandardNormal);
            let amount = if self.noise > 0.0 {
                (f * (1.0 + self.noise * eps)).max(0.0)
            } else {
                f
            };
            panel.push(PanelObservation {
                sender: sender.clone(),
                recipient: recipient.clone(),
                month: dataset.window().month_at(i % months),
                amount_usd: (amount * 100.0).round() / 100.0,
                split_tag: SplitTag::Unassigned,
            });
        }
        panel
    }

    pub fn tables(&self) -> DatasetTables {
        let mut tables = self.base_tables();
        if let Some(params) = &self.panel_params {
            let ds = Dataset::from_tables(tables.clone(), self.window).expect("fixture tables are valid");
            tables.panel = self.simulate_panel(&ds, params);
        }
        tables
    }

    pub fn dataset(&self) -> Dataset {
        Dataset::from_tables(self.tables(), self.window).expect("fixture tables are valid")
    }

    /// Writes every table plus a `run.cfg` pointing at the directory.
    pub fn write(&self, dir: &Path) -> Result<Dataset, DataError> {
        let ds = self.dataset();
        ds.write_dir(dir)?;
        let cfg = RunConfig {
            window: self.window,
            seed: self.seed,
            ..RunConfig::default()
        };
        let path = dir.join("run.cfg");
        let body = format!("data_dir = .\noutput_dir = out\n{}", cfg.to_flat_string());
        std::fs::write(&path, body).map_err(|source| DataError::Io { path, source })?;
        Ok(ds)
    }
}

/// Month helper for tests that need a literal month.
pub fn ym(s: &str) -> YearMonth {
    s.parse().expect("valid YYYY-MM literal")
}
