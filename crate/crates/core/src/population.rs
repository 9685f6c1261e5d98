//! Synthetic cohort population and diaspora demographics.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::Serialize;

use crate::dataio::{CountryCode, Dataset, IncomeGroup, Sex, N_AGES};
use crate::scalar::Scalar;
use crate::time::{MonthRange, YearMonth};

/// Ages below this bound count as "young".
pub const YOUNG_BELOW: u8 = 25;
/// Oldest age counted as "parenting" (inclusive).
pub const PARENTING_MAX: u8 = 50;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Corridor {
    pub origin: CountryCode,
    pub destination: CountryCode,
}

/// Migrants sharing origin, destination, sex, age and month. Counts are real-valued.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MigrantCohort {
    /// Index into [`Population::corridors`].
    pub corridor: usize,
    pub sex: Sex,
    pub age: u8,
    pub month: YearMonth,
    pub count: f64,
}

/// All cohorts over a month window, grouped contiguously by corridor then month.
#[derive(Debug, Clone)]
pub struct Population {
    corridors: Vec<Corridor>,
    window: MonthRange,
    cohorts: Vec<MigrantCohort>,
    /// Dense `corridor * months + month` index into `cohorts`.
    groups: Vec<Range<usize>>,
    /// Interpolated stock per corridor, month and sex.
    stocks: Vec<Vec<[f64; 2]>>,
}

impl Population {
    pub fn corridors(&self) -> &[Corridor] {
        &self.corridors
    }

    pub fn window(&self) -> MonthRange {
        self.window
    }

    pub fn cohorts(&self) -> &[MigrantCohort] {
        &self.cohorts
    }

    pub fn corridor(&self, cohort: &MigrantCohort) -> &Corridor {
        &self.corridors[cohort.corridor]
    }

    pub fn corridor_index(&self, origin: &CountryCode, destination: &CountryCode) -> Option<usize> {
        self.corridors
            .binary_search_by(|c| (&c.origin, &c.destination).cmp(&(origin, destination)))
            .ok()
    }

    /// Range of cohorts for one corridor-month (by position in the window).
    pub fn group_range(&self, corridor: usize, month_pos: usize) -> Range<usize> {
        self.groups[corridor * self.window.len() + month_pos].clone()
    }

    pub fn group(&self, corridor: usize, month_pos: usize) -> &[MigrantCohort] {
        &self.cohorts[self.group_range(corridor, month_pos)]
    }

    /// Interpolated stock for a corridor-month, by sex.
    pub fn stock(&self, corridor: usize, month_pos: usize) -> [f64; 2] {
        self.stocks[corridor][month_pos]
    }

    /// Iterates `(corridor, month position, cohorts)` over every corridor-month.
    pub fn groups(&self) -> impl Iterator<Item = (usize, usize, &[MigrantCohort])> + '_ {
        let months = self.window.len();
        self.groups
            .iter()
            .enumerate()
            .map(move |(i, r)| (i / months, i % months, &self.cohorts[r.clone()]))
    }

    pub fn total_in_month(&self, month: YearMonth) -> f64 {
        let Some(pos) = self.window.position(month) else {
            return 0.0;
        };
        (0..self.corridors.len())
            .map(|c| self.stock(c, pos).iter().sum::<f64>())
            .sum()
    }
}

/// Distributes each corridor's monthly stock by sex across ages in proportion to
/// the age profile. Ages with zero share produce no cohort.
pub fn build_population(dataset: &Dataset) -> Population {
    let window = dataset.window();
    let months = window.len();
    let series = dataset.monthly_stocks();

    let mut by_corridor: BTreeMap<Corridor, [Option<&Vec<f64>>; 2]> = BTreeMap::new();
    for (key, values) in &series {
        let c = Corridor {
            origin: key.origin.clone(),
            destination: key.destination.clone(),
        };
        by_corridor.entry(c).or_default()[key.sex.index()] = Some(values);
    }

    let shares = [dataset.age_shares(Sex::Male), dataset.age_shares(Sex::Female)];
    let mut corridors = Vec::with_capacity(by_corridor.len());
    let mut cohorts = Vec::new();
    let mut groups = Vec::with_capacity(by_corridor.len() * months);
    let mut stocks = Vec::with_capacity(by_corridor.len());
    for (ci, (corridor, per_sex)) in by_corridor.into_iter().enumerate() {
        let mut corridor_stocks = Vec::with_capacity(months);
        for (pos, month) in window.iter().enumerate() {
            let start = cohorts.len();
            let mut stock = [0.0; 2];
            for sex in [Sex::Male, Sex::Female] {
                let Some(values) = per_sex[sex.index()] else {
                    continue;
                };
                let s = values[pos];
                stock[sex.index()] = s;
                for (age, &share) in shares[sex.index()].iter().enumerate() {
                    if share > 0.0 {
                        cohorts.push(MigrantCohort {
                            corridor: ci,
                            sex,
                            age: age as u8,
                            month,
                            count: s * share,
                        });
                    }
                }
            }
            corridor_stocks.push(stock);
            groups.push(start..cohorts.len());
        }
        stocks.push(corridor_stocks);
        corridors.push(corridor);
    }
    Population {
        corridors,
        window,
        cohorts,
        groups,
        stocks,
    }
}

/// `min(a, b) / mean(a, b)`; zero when both are zero.
pub fn symmetry<T: Scalar>(a: T, b: T) -> T {
    let sum = a + b;
    if sum <= T::zero() {
        return T::zero();
    }
    a.min(b) / (sum / T::lit(2.0))
}

/// Young (under 25) and parenting-age (25 to 50 inclusive) head counts.
pub fn age_bins(cohorts: &[MigrantCohort]) -> (f64, f64) {
    cohorts.iter().fold((0.0, 0.0), |(young, parenting), c| {
        if c.age < YOUNG_BELOW {
            (young + c.count, parenting)
        } else if c.age <= PARENTING_MAX {
            (young, parenting + c.count)
        } else {
            (young, parenting)
        }
    })
}

pub fn sex_counts(cohorts: &[MigrantCohort]) -> (f64, f64) {
    cohorts.iter().fold((0.0, 0.0), |(m, f), c| match c.sex {
        Sex::Male => (m + c.count, f),
        Sex::Female => (m, f + c.count),
    })
}

pub fn age_symmetry(cohorts: &[MigrantCohort]) -> f64 {
    let (young, parenting) = age_bins(cohorts);
    symmetry(parenting, young)
}

pub fn sex_symmetry(cohorts: &[MigrantCohort]) -> f64 {
    let (male, female) = sex_counts(cohorts);
    symmetry(male, female)
}

/// Pyramid symmetries and the derived family probability of one diaspora-month.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiasporaDemographics {
    pub origin: CountryCode,
    pub destination: CountryCode,
    pub month: YearMonth,
    pub age_symmetry: f64,
    pub sex_symmetry: f64,
    pub asymmetry: f64,
    pub family: f64,
}

/// Symmetry values without the corridor key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PyramidShape {
    pub age_symmetry: f64,
    pub sex_symmetry: f64,
    pub asymmetry: f64,
    pub family: f64,
}

/// `None` for an empty corridor-month.
pub fn family_probability(cohorts: &[MigrantCohort]) -> Option<PyramidShape> {
    let total: f64 = cohorts.iter().map(|c| c.count).sum();
    if total <= 0.0 {
        return None;
    }
    let age_symmetry = age_symmetry(cohorts);
    let sex_symmetry = sex_symmetry(cohorts);
    let asymmetry = 1.0 - sex_symmetry * age_symmetry;
    Some(PyramidShape {
        age_symmetry,
        sex_symmetry,
        asymmetry,
        family: asymmetry,
    })
}

/// Demographics for every non-empty corridor-month.
pub fn demographics(pop: &Population) -> Vec<DiasporaDemographics> {
    pop.groups()
        .filter_map(|(c, pos, cohorts)| {
            let shape = family_probability(cohorts)?;
            let corridor = &pop.corridors()[c];
            Some(DiasporaDemographics {
                origin: corridor.origin.clone(),
                destination: corridor.destination.clone(),
                month: pop.window().month_at(pos),
                age_symmetry: shape.age_symmetry,
                sex_symmetry: shape.sex_symmetry,
                asymmetry: shape.asymmetry,
                family: shape.family,
            })
        })
        .collect()
}

/// Age bands used in sender reports, as inclusive `(label, low, high)`.
pub const AGE_BANDS: [(&str, u8, u8); 7] = [
    ("0-15", 0, 15),
    ("16-24", 16, 24),
    ("25-34", 25, 34),
    ("35-44", 35, 44),
    ("45-54", 45, 54),
    ("55-64", 55, 64),
    ("65+", 65, 100),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SenderRow {
    /// Origin income group label, or `all`.
    pub group: String,
    pub expected_senders: f64,
    pub population: f64,
    pub male_share: f64,
    pub female_share: f64,
    pub mean_age: f64,
    pub band_shares: Vec<f64>,
    /// Set when there are no expected senders in the group.
    pub empty: bool,
}

#[derive(Default, Clone)]
struct SenderAccum {
    senders: f64,
    population: f64,
    male: f64,
    age_weighted: f64,
    bands: [f64; AGE_BANDS.len()],
}

impl SenderAccum {
    fn add(&mut self, c: &MigrantCohort, p: f64) {
        let w = c.count * p;
        self.senders += w;
        self.population += c.count;
        if c.sex == Sex::Male {
            self.male += w;
        }
        self.age_weighted += w * f64::from(c.age);
        if let Some(b) = AGE_BANDS.iter().position(|&(_, lo, hi)| (lo..=hi).contains(&c.age)) {
            self.bands[b] += w;
        }
    }

    fn row(&self, group: String) -> SenderRow {
        let empty = self.senders <= 0.0;
        let div = |x: f64| if empty { 0.0 } else { x / self.senders };
        SenderRow {
            group,
            expected_senders: self.senders,
            population: self.population,
            male_share: div(self.male),
            female_share: if empty { 0.0 } else { 1.0 - div(self.male) },
            mean_age: div(self.age_weighted),
            band_shares: self.bands.iter().map(|&b| div(b)).collect(),
            empty,
        }
    }
}

/// Expected-sender-weighted composition by origin income group, plus an `all` row.
/// `probabilities` is aligned with [`Population::cohorts`].
pub fn sender_demographics(pop: &Population, probabilities: &[f64], dataset: &Dataset) -> Vec<SenderRow> {
    assert_eq!(probabilities.len(), pop.cohorts().len(), "one probability per cohort");
    let mut all = SenderAccum::default();
    let mut groups: BTreeMap<IncomeGroup, SenderAccum> = BTreeMap::new();
    for (c, &p) in pop.cohorts().iter().zip(probabilities) {
        all.add(c, p);
        let origin = &pop.corridor(c).origin;
        if let Some(econ) = dataset.economics(origin, c.month.year()) {
            groups.entry(econ.income_group).or_default().add(c, p);
        }
    }
    let mut rows: Vec<SenderRow> = groups
        .into_iter()
        .map(|(g, acc)| acc.row(g.to_string()))
        .collect();
    rows.push(all.row("all".into()));
    rows
}

/// Per-age counts of a corridor-month summed over sexes.
pub fn counts_by_age(cohorts: &[MigrantCohort]) -> [f64; N_AGES] {
    let mut out = [0.0; N_AGES];
    for c in cohorts {
        out[usize::from(c.age)] += c.count;
    }
    out
}
