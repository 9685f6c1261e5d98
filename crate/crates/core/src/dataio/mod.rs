//! Input schemas, validation and the immutable in-memory dataset.

mod config;
mod spline;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::time::MonthRange;

pub use config::{AttributionConvention, Descent, RunConfig, SplitUnit};
pub use spline::{interpolate_series, interpolate_stocks_monthly, NaturalCubicSpline, StockKey};
pub use types::*;

pub const ECONOMICS_FILE: &str = "economics.csv";
pub const STOCKS_FILE: &str = "stocks.csv";
pub const AGE_PROFILES_FILE: &str = "age_profiles.csv";
pub const SURPLUS_FILE: &str = "surplus_profiles.csv";
pub const DISASTERS_FILE: &str = "disasters.csv";
pub const PANEL_FILE: &str = "panel.csv";

/// Sanity bound on reported affected persons relative to the country population.
pub const MAX_AFFECTED_RATIO: f64 = 10.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}, column '{column}': {message}")]
    Schema {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file} line {line}: unknown country code '{code}'")]
    UnknownCountry { file: String, line: u64, code: String },
    #[error("{file} line {line}, column '{column}': negative value {value}")]
    Negative {
        file: String,
        line: u64,
        column: String,
        value: f64,
    },
    #[error("stocks.csv: corridor {origin}->{destination} ({sex}) is missing anchor year {year}")]
    MissingAnchor {
        origin: String,
        destination: String,
        sex: Sex,
        year: i32,
    },
    #[error("economics.csv: no row for {country} in {year}")]
    MissingEconomics { country: String, year: i32 },
    #[error("{file}: {message}")]
    Invalid { file: String, message: String },
    #[error("{path} line {line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Locations of the six input tables.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub economics: PathBuf,
    pub stocks: PathBuf,
    pub age_profiles: PathBuf,
    pub surplus_profiles: PathBuf,
    pub disasters: PathBuf,
    pub panel: Option<PathBuf>,
}

impl DatasetPaths {
    /// Standard file names inside `dir`; the panel is optional and only picked up if present.
    pub fn from_dir(dir: &Path) -> Self {
        let panel = dir.join(PANEL_FILE);
        Self {
            economics: dir.join(ECONOMICS_FILE),
            stocks: dir.join(STOCKS_FILE),
            age_profiles: dir.join(AGE_PROFILES_FILE),
            surplus_profiles: dir.join(SURPLUS_FILE),
            disasters: dir.join(DISASTERS_FILE),
            panel: panel.exists().then_some(panel),
        }
    }
}

/// Raw tables as parsed from disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetTables {
    pub economics: Vec<CountryEconomics>,
    pub stocks: Vec<MigrantStockRecord>,
    pub age_profiles: Vec<AgeProfile>,
    pub surplus_profiles: Vec<SurplusProfile>,
    pub disasters: Vec<DisasterEvent>,
    pub panel: Vec<PanelObservation>,
}

/// Validated, cross-referenced input data. Never mutated after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    window: MonthRange,
    tables: DatasetTables,
    econ_index: HashMap<(CountryCode, i32), usize>,
    surplus: BTreeMap<SurplusScope, [f64; N_AGES]>,
    age_shares: [[f64; N_AGES]; 2],
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window && self.tables == other.tables
    }
}

struct CsvTable {
    file: String,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl CsvTable {
    fn read(path: &Path, required: &[&str]) -> Result<Self, DataError> {
        let file = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let io_err = |source| DataError::Io {
            path: path.to_path_buf(),
            source,
        };
        let handle = std::fs::File::open(path).map_err(io_err)?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(handle);
        let csv_err = |e: csv::Error, file: &str| DataError::Schema {
            file: file.to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            column: String::new(),
            message: e.to_string(),
        };
        let headers = reader.headers().map_err(|e| csv_err(e, &file))?.clone();
        let columns: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(DataError::Schema {
                    file,
                    line: 1,
                    column: col.to_string(),
                    message: "missing header column".into(),
                });
            }
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_err(e, &file))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, rec));
        }
        Ok(Self {
            file,
            columns,
            rows,
        })
    }

    fn has(&self, col: &str) -> bool {
        self.columns.contains_key(col)
    }

    fn raw<'a>(&self, rec: &'a csv::StringRecord, line: u64, col: &str) -> Result<&'a str, DataError> {
        rec.get(self.columns[col])
            .map(str::trim)
            .ok_or_else(|| DataError::Schema {
                file: self.file.clone(),
                line,
                column: col.into(),
                message: "missing field".into(),
            })
    }

    fn parse<T>(&self, rec: &csv::StringRecord, line: u64, col: &str) -> Result<T, DataError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(rec, line, col)?;
        raw.parse().map_err(|e: T::Err| DataError::Schema {
            file: self.file.clone(),
            line,
            column: col.into(),
            message: format!("cannot parse '{raw}': {e}"),
        })
    }

    fn non_negative(&self, rec: &csv::StringRecord, line: u64, col: &str) -> Result<f64, DataError> {
        let v: f64 = self.parse(rec, line, col)?;
        if !v.is_finite() {
            return Err(self.invalid_value(line, col, "value must be finite"));
        }
        if v < 0.0 {
            return Err(DataError::Negative {
                file: self.file.clone(),
                line,
                column: col.into(),
                value: v,
            });
        }
        Ok(v)
    }

    fn country(&self, rec: &csv::StringRecord, line: u64, col: &str) -> Result<CountryCode, DataError> {
        let raw = self.raw(rec, line, col)?;
        CountryCode::parse(raw).ok_or_else(|| DataError::Schema {
            file: self.file.clone(),
            line,
            column: col.into(),
            message: format!("'{raw}' is not an ISO-3166 alpha-3 code"),
        })
    }

    fn invalid_value(&self, line: u64, col: &str, message: &str) -> DataError {
        DataError::Schema {
            file: self.file.clone(),
            line,
            column: col.into(),
            message: message.into(),
        }
    }
}

fn read_tables(paths: &DatasetPaths) -> Result<DatasetTables, DataError> {
    let mut t = DatasetTables::default();

    let econ = CsvTable::read(
        &paths.economics,
        &["country", "year", "gdp_per_capita", "population", "income_group"],
    )?;
    for (line, rec) in &econ.rows {
        let line = *line;
        let gdp: f64 = econ.non_negative(rec, line, "gdp_per_capita")?;
        let pop: f64 = econ.non_negative(rec, line, "population")?;
        if gdp <= 0.0 {
            return Err(econ.invalid_value(line, "gdp_per_capita", "must be strictly positive"));
        }
        if pop <= 0.0 {
            return Err(econ.invalid_value(line, "population", "must be strictly positive"));
        }
        t.economics.push(CountryEconomics {
            country: econ.country(rec, line, "country")?,
            year: econ.parse(rec, line, "year")?,
            gdp_per_capita: gdp,
            population: pop,
            income_group: econ.parse(rec, line, "income_group")?,
        });
    }

    let stocks = CsvTable::read(
        &paths.stocks,
        &["origin", "destination", "sex", "anchor_year", "count"],
    )?;
    for (line, rec) in &stocks.rows {
        let line = *line;
        let year: i32 = stocks.parse(rec, line, "anchor_year")?;
        if !ANCHOR_YEARS.contains(&year) {
            return Err(stocks.invalid_value(line, "anchor_year", "must be one of 2010, 2015, 2020"));
        }
        let origin = stocks.country(rec, line, "origin")?;
        let destination = stocks.country(rec, line, "destination")?;
        if origin == destination {
            return Err(stocks.invalid_value(line, "destination", "origin and destination must differ"));
        }
        t.stocks.push(MigrantStockRecord {
            origin,
            destination,
            sex: stocks.parse(rec, line, "sex")?,
            anchor_year: year,
            count: stocks.non_negative(rec, line, "count")?,
        });
    }

    let ages = CsvTable::read(&paths.age_profiles, &["sex", "age", "share"])?;
    for (line, rec) in &ages.rows {
        let line = *line;
        let age: u8 = ages.parse(rec, line, "age")?;
        if usize::from(age) > MAX_AGE {
            return Err(ages.invalid_value(line, "age", "must be within 0..=100"));
        }
        let share = ages.non_negative(rec, line, "share")?;
        if share > 1.0 {
            return Err(ages.invalid_value(line, "share", "must lie in [0, 1]"));
        }
        t.age_profiles.push(AgeProfile {
            sex: ages.parse(rec, line, "sex")?,
            age,
            share,
        });
    }

    let surplus = CsvTable::read(&paths.surplus_profiles, &["country", "age", "surplus"])?;
    for (line, rec) in &surplus.rows {
        let line = *line;
        let raw = surplus.raw(rec, line, "country")?;
        let scope = if raw == GLOBAL_DEFAULT {
            SurplusScope::GlobalDefault
        } else {
            SurplusScope::Country(surplus.country(rec, line, "country")?)
        };
        let age: u8 = surplus.parse(rec, line, "age")?;
        if usize::from(age) > MAX_AGE {
            return Err(surplus.invalid_value(line, "age", "must be within 0..=100"));
        }
        let value = surplus.non_negative(rec, line, "surplus")?;
        if age < 16 && value != 0.0 {
            return Err(surplus.invalid_value(line, "surplus", "must be 0 below age 16"));
        }
        t.surplus_profiles.push(SurplusProfile {
            scope,
            age,
            surplus: value,
        });
    }

    let dis = CsvTable::read(
        &paths.disasters,
        &["event_id", "country", "onset_month", "hazard", "affected"],
    )?;
    for (line, rec) in &dis.rows {
        let line = *line;
        let hazard_raw = dis.raw(rec, line, "hazard")?;
        let hazard: Hazard = hazard_raw.parse().map_err(|_| DataError::Schema {
            file: dis.file.clone(),
            line,
            column: "hazard".into(),
            message: format!(
                "hazard '{hazard_raw}' not supported: only flood, storm, earthquake and drought are modelled"
            ),
        })?;
        t.disasters.push(DisasterEvent {
            event_id: dis.raw(rec, line, "event_id")?.to_string(),
            country: dis.country(rec, line, "country")?,
            onset_month: dis.parse(rec, line, "onset_month")?,
            hazard,
            affected: dis.non_negative(rec, line, "affected")?,
        });
    }

    if let Some(panel_path) = &paths.panel {
        let panel = CsvTable::read(panel_path, &["sender", "recipient", "month", "amount_usd"])?;
        let tagged = panel.has("split_tag");
        for (line, rec) in &panel.rows {
            let line = *line;
            t.panel.push(PanelObservation {
                sender: panel.country(rec, line, "sender")?,
                recipient: panel.country(rec, line, "recipient")?,
                month: panel.parse(rec, line, "month")?,
                amount_usd: panel.non_negative(rec, line, "amount_usd")?,
                split_tag: if tagged {
                    panel.parse(rec, line, "split_tag")?
                } else {
                    SplitTag::Unassigned
                },
            });
        }
    }
    Ok(t)
}

/// Loads and validates all tables. Any violation aborts the load.
pub fn load_dataset(paths: &DatasetPaths, config: &RunConfig) -> Result<Dataset, DataError> {
    let tables = read_tables(paths)?;
    Dataset::from_tables(tables, config.window)
}

impl Dataset {
    /// Validates cross-references between in-memory tables.
    pub fn from_tables(tables: DatasetTables, window: MonthRange) -> Result<Self, DataError> {
        let invalid = |file: &str, message: String| DataError::Invalid {
            file: file.into(),
            message,
        };
        // Row numbers in messages below are 1-based data rows plus the header line.
        let line_of = |i: usize| i as u64 + 2;

        let mut econ_index = HashMap::new();
        for (i, row) in tables.economics.iter().enumerate() {
            if !(row.gdp_per_capita > 0.0 && row.gdp_per_capita.is_finite()) {
                return Err(invalid(ECONOMICS_FILE, format!("row {}: gdp_per_capita must be > 0", line_of(i))));
            }
            if !(row.population > 0.0 && row.population.is_finite()) {
                return Err(invalid(ECONOMICS_FILE, format!("row {}: population must be > 0", line_of(i))));
            }
            if econ_index
                .insert((row.country.clone(), row.year), i)
                .is_some()
            {
                return Err(invalid(
                    ECONOMICS_FILE,
                    format!("duplicate row for {} {}", row.country, row.year),
                ));
            }
        }
        let known: HashSet<&CountryCode> = tables.economics.iter().map(|r| &r.country).collect();
        let check_known = |file: &str, i: usize, c: &CountryCode| {
            if known.contains(c) {
                Ok(())
            } else {
                Err(DataError::UnknownCountry {
                    file: file.into(),
                    line: line_of(i),
                    code: c.to_string(),
                })
            }
        };

        let mut anchors: BTreeMap<(CountryCode, CountryCode, Sex), BTreeSet<i32>> = BTreeMap::new();
        let mut stock_countries = BTreeSet::new();
        let mut sexes_used = BTreeSet::new();
        for (i, s) in tables.stocks.iter().enumerate() {
            check_known(STOCKS_FILE, i, &s.origin)?;
            check_known(STOCKS_FILE, i, &s.destination)?;
            if s.origin == s.destination {
                return Err(invalid(STOCKS_FILE, format!("row {}: origin equals destination", line_of(i))));
            }
            if !(s.count >= 0.0 && s.count.is_finite()) {
                return Err(DataError::Negative {
                    file: STOCKS_FILE.into(),
                    line: line_of(i),
                    column: "count".into(),
                    value: s.count,
                });
            }
            if !ANCHOR_YEARS.contains(&s.anchor_year) {
                return Err(invalid(STOCKS_FILE, format!("row {}: bad anchor year {}", line_of(i), s.anchor_year)));
            }
            let years = anchors
                .entry((s.origin.clone(), s.destination.clone(), s.sex))
                .or_default();
            if !years.insert(s.anchor_year) {
                return Err(invalid(
                    STOCKS_FILE,
                    format!(
                        "duplicate anchor {} for {}->{} ({})",
                        s.anchor_year, s.origin, s.destination, s.sex
                    ),
                ));
            }
            stock_countries.insert(s.origin.clone());
            stock_countries.insert(s.destination.clone());
            sexes_used.insert(s.sex);
        }
        for ((o, d, sex), years) in &anchors {
            if let Some(&year) = ANCHOR_YEARS.iter().find(|y| !years.contains(y)) {
                return Err(DataError::MissingAnchor {
                    origin: o.to_string(),
                    destination: d.to_string(),
                    sex: *sex,
                    year,
                });
            }
        }
        for c in &stock_countries {
            for year in window.years() {
                if !econ_index.contains_key(&(c.clone(), year)) {
                    return Err(DataError::MissingEconomics {
                        country: c.to_string(),
                        year,
                    });
                }
            }
        }

        let mut age_shares = [[0.0; N_AGES]; 2];
        let mut seen_ages = HashSet::new();
        let mut sexes_profiled = BTreeSet::new();
        for a in &tables.age_profiles {
            if usize::from(a.age) > MAX_AGE || !(0.0..=1.0).contains(&a.share) {
                return Err(invalid(AGE_PROFILES_FILE, format!("bad row for {} age {}", a.sex, a.age)));
            }
            if !seen_ages.insert((a.sex, a.age)) {
                return Err(invalid(AGE_PROFILES_FILE, format!("duplicate row for {} age {}", a.sex, a.age)));
            }
            age_shares[a.sex.index()][usize::from(a.age)] = a.share;
            sexes_profiled.insert(a.sex);
        }
        for sex in &sexes_profiled {
            let total: f64 = age_shares[sex.index()].iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid(
                    AGE_PROFILES_FILE,
                    format!("shares for {sex} sum to {total}, expected 1"),
                ));
            }
        }
        if let Some(sex) = sexes_used.difference(&sexes_profiled).next() {
            return Err(invalid(AGE_PROFILES_FILE, format!("no age profile for {sex}")));
        }

        let mut surplus: BTreeMap<SurplusScope, [Option<f64>; N_AGES]> = BTreeMap::new();
        for (i, row) in tables.surplus_profiles.iter().enumerate() {
            if let SurplusScope::Country(c) = &row.scope {
                check_known(SURPLUS_FILE, i, c)?;
            }
            if !(row.surplus >= 0.0 && row.surplus.is_finite()) || usize::from(row.age) > MAX_AGE {
                return Err(invalid(SURPLUS_FILE, format!("row {}: invalid surplus row", line_of(i))));
            }
            if row.age < 16 && row.surplus != 0.0 {
                return Err(invalid(SURPLUS_FILE, format!("row {}: surplus must be 0 below age 16", line_of(i))));
            }
            let slot = &mut surplus.entry(row.scope.clone()).or_insert([None; N_AGES])[usize::from(row.age)];
            if slot.replace(row.surplus).is_some() {
                return Err(invalid(
                    SURPLUS_FILE,
                    format!("duplicate row for {} age {}", row.scope, row.age),
                ));
            }
        }
        let mut surplus_full = BTreeMap::new();
        for (scope, ages) in surplus {
            let mut out = [0.0; N_AGES];
            for (age, v) in ages.iter().enumerate() {
                out[age] = v.ok_or_else(|| {
                    invalid(SURPLUS_FILE, format!("profile {scope} has no value for age {age}"))
                })?;
            }
            surplus_full.insert(scope, out);
        }
        let has_global = surplus_full.contains_key(&SurplusScope::GlobalDefault);
        for (_, d, _) in anchors.keys() {
            if !has_global && !surplus_full.contains_key(&SurplusScope::Country(d.clone())) {
                return Err(invalid(
                    SURPLUS_FILE,
                    format!("no surplus profile for destination {d} and no {GLOBAL_DEFAULT}"),
                ));
            }
        }

        let mut event_ids = HashSet::new();
        for (i, e) in tables.disasters.iter().enumerate() {
            check_known(DISASTERS_FILE, i, &e.country)?;
            if !event_ids.insert(e.event_id.as_str()) {
                return Err(invalid(DISASTERS_FILE, format!("duplicate event_id '{}'", e.event_id)));
            }
            if !(e.affected >= 0.0 && e.affected.is_finite()) {
                return Err(DataError::Negative {
                    file: DISASTERS_FILE.into(),
                    line: line_of(i),
                    column: "affected".into(),
                    value: e.affected,
                });
            }
            let year = e.onset_month.year();
            let econ = econ_index
                .get(&(e.country.clone(), year))
                .map(|&k| &tables.economics[k])
                .ok_or_else(|| DataError::MissingEconomics {
                    country: e.country.to_string(),
                    year,
                })?;
            if e.affected > MAX_AFFECTED_RATIO * econ.population {
                return Err(invalid(
                    DISASTERS_FILE,
                    format!(
                        "event '{}' reports {} affected, more than {}x the population of {}",
                        e.event_id, e.affected, MAX_AFFECTED_RATIO, e.country
                    ),
                ));
            }
        }

        let mut panel_keys = HashSet::new();
        for (i, p) in tables.panel.iter().enumerate() {
            check_known(PANEL_FILE, i, &p.sender)?;
            check_known(PANEL_FILE, i, &p.recipient)?;
            if !(p.amount_usd >= 0.0 && p.amount_usd.is_finite()) {
                return Err(DataError::Negative {
                    file: PANEL_FILE.into(),
                    line: line_of(i),
                    column: "amount_usd".into(),
                    value: p.amount_usd,
                });
            }
            if !panel_keys.insert((&p.sender, &p.recipient, p.month)) {
                return Err(invalid(
                    PANEL_FILE,
                    format!("duplicate observation {}->{} {}", p.sender, p.recipient, p.month),
                ));
            }
        }

        Ok(Self {
            window,
            tables,
            econ_index,
            surplus: surplus_full,
            age_shares,
        })
    }

    pub fn window(&self) -> MonthRange {
        self.window
    }

    pub fn tables(&self) -> &DatasetTables {
        &self.tables
    }

    pub fn economics(&self, country: &CountryCode, year: i32) -> Option<&CountryEconomics> {
        self.econ_index
            .get(&(country.clone(), year))
            .map(|&i| &self.tables.economics[i])
    }

    /// Destination-specific surplus profile, falling back to the global default.
    pub fn surplus_profile(&self, destination: &CountryCode) -> Option<&[f64; N_AGES]> {
        self.surplus
            .get(&SurplusScope::Country(destination.clone()))
            .or_else(|| self.surplus.get(&SurplusScope::GlobalDefault))
    }

    pub fn age_shares(&self, sex: Sex) -> &[f64; N_AGES] {
        &self.age_shares[sex.index()]
    }

    pub fn stock_total(&self, anchor_year: i32) -> f64 {
        self.tables
            .stocks
            .iter()
            .filter(|s| s.anchor_year == anchor_year)
            .map(|s| s.count)
            .sum()
    }

    pub fn event(&self, event_id: &str) -> Option<&DisasterEvent> {
        self.tables.disasters.iter().find(|e| e.event_id == event_id)
    }

    /// Monthly interpolated stocks over the dataset window.
    pub fn monthly_stocks(&self) -> BTreeMap<StockKey, Vec<f64>> {
        interpolate_stocks_monthly(&self.tables.stocks, &self.window)
    }

    /// Same data, different window (re-validated).
    pub fn with_window(&self, window: MonthRange) -> Result<Self, DataError> {
        Self::from_tables(self.tables.clone(), window)
    }

    /// Same window, replaced tables (re-validated).
    pub fn with_tables(&self, tables: DatasetTables) -> Result<Self, DataError> {
        Self::from_tables(tables, self.window)
    }

    /// CSV serialisations keyed by file name, in a fixed order.
    pub fn to_csv_files(&self) -> Vec<(&'static str, String)> {
        tables_to_csv(&self.tables)
    }

    /// SHA-256 over the canonical CSV serialisation of every table.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{}..{}", self.window.start, self.window.end));
        for (name, body) in self.to_csv_files() {
            h.update(name.as_bytes());
            h.update(body.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), DataError> {
        write_tables(&self.tables, dir)
    }
}

pub(crate) fn csv_string<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8 csv")
}

pub fn tables_to_csv(t: &DatasetTables) -> Vec<(&'static str, String)> {
    let econ = csv_string(
        &["country", "year", "gdp_per_capita", "population", "income_group"],
        t.economics.iter().map(|r| {
            [
                r.country.to_string(),
                r.year.to_string(),
                r.gdp_per_capita.to_string(),
                r.population.to_string(),
                r.income_group.to_string(),
            ]
        }),
    );
    let stocks = csv_string(
        &["origin", "destination", "sex", "anchor_year", "count"],
        t.stocks.iter().map(|r| {
            [
                r.origin.to_string(),
                r.destination.to_string(),
                r.sex.to_string(),
                r.anchor_year.to_string(),
                r.count.to_string(),
            ]
        }),
    );
    let ages = csv_string(
        &["sex", "age", "share"],
        t.age_profiles
            .iter()
            .map(|r| [r.sex.to_string(), r.age.to_string(), r.share.to_string()]),
    );
    let surplus = csv_string(
        &["country", "age", "surplus"],
        t.surplus_profiles
            .iter()
            .map(|r| [r.scope.to_string(), r.age.to_string(), r.surplus.to_string()]),
    );
    let disasters = csv_string(
        &["event_id", "country", "onset_month", "hazard", "affected"],
        t.disasters.iter().map(|r| {
            [
                r.event_id.clone(),
                r.country.to_string(),
                r.onset_month.to_string(),
                r.hazard.to_string(),
                r.affected.to_string(),
            ]
        }),
    );
    let tagged = t.panel.iter().any(|p| p.split_tag != SplitTag::Unassigned);
    let mut panel_header = vec!["sender", "recipient", "month", "amount_usd"];
    if tagged {
        panel_header.push("split_tag");
    }
    let panel = csv_string(
        &panel_header,
        t.panel.iter().map(|r| {
            let mut row = vec![
                r.sender.to_string(),
                r.recipient.to_string(),
                r.month.to_string(),
                r.amount_usd.to_string(),
            ];
            if tagged {
                row.push(r.split_tag.to_string());
            }
            row
        }),
    );
    vec![
        (ECONOMICS_FILE, econ),
        (STOCKS_FILE, stocks),
        (AGE_PROFILES_FILE, ages),
        (SURPLUS_FILE, surplus),
        (DISASTERS_FILE, disasters),
        (PANEL_FILE, panel),
    ]
}

pub fn write_tables(tables: &DatasetTables, dir: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, body) in tables_to_csv(tables) {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|source| DataError::Io { path, source })?;
    }
    Ok(())
}
