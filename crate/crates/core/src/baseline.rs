//! Gravity-model baseline for per-migrant remittances and the comparison harness.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::dataio::{CountryCode, Dataset, PanelObservation};
use crate::flows::FlowMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("incomes must be positive, got destination {y_dest} and origin {y_origin}")]
    NonPositiveIncome { y_dest: f64, y_origin: f64 },
    #[error("gravity exponent must be finite and positive, got {0}")]
    InvalidExponent(f64),
    #[error("no panel observation matches a corridor with gravity inputs")]
    EmptyPanel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GravityParams<T> {
    pub beta_exp: T,
}

impl<T: Scalar> GravityParams<T> {
    pub fn new(beta_exp: T) -> Result<Self, BaselineError> {
        if beta_exp.is_finite() && beta_exp > T::zero() {
            Ok(Self { beta_exp })
        } else {
            Err(BaselineError::InvalidExponent(beta_exp.to_f64_lossy()))
        }
    }
}

/// Annual USD sent per migrant: the origin income, plus `(y_dest - y_origin)^beta`
/// when the destination is richer.
pub fn gravity_per_migrant<T: Scalar>(y_dest: T, y_origin: T, beta_exp: T) -> Result<T, BaselineError> {
    if !(y_dest > T::zero() && y_origin > T::zero()) {
        return Err(BaselineError::NonPositiveIncome {
            y_dest: y_dest.to_f64_lossy(),
            y_origin: y_origin.to_f64_lossy(),
        });
    }
    if y_dest < y_origin {
        Ok(y_origin)
    } else {
        Ok(y_origin + (y_dest - y_origin).powf(beta_exp))
    }
}

/// Annual bilateral flows keyed by (sender, recipient).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualFlows {
    pub year: i32,
    pub entries: BTreeMap<(CountryCode, CountryCode), f64>,
}

impl AnnualFlows {
    pub fn recipient_totals(&self) -> BTreeMap<CountryCode, f64> {
        let mut out = BTreeMap::new();
        for ((_, r), v) in &self.entries {
            *out.entry(r.clone()).or_insert(0.0) += v;
        }
        out
    }
}

/// Gravity inputs of one corridor-year: mean monthly stock and both incomes.
#[derive(Debug, Clone, PartialEq)]
struct CorridorYear {
    sender: CountryCode,
    recipient: CountryCode,
    year: i32,
    stock: f64,
    y_dest: f64,
    y_origin: f64,
}

fn corridor_years(dataset: &Dataset) -> Vec<CorridorYear> {
    let window = dataset.window();
    let mut stock: BTreeMap<(CountryCode, CountryCode, i32), (f64, usize)> = BTreeMap::new();
    for (key, series) in dataset.monthly_stocks() {
        for (month, v) in window.iter().zip(series) {
            let e = stock
                .entry((key.destination.clone(), key.origin.clone(), month.year()))
                .or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    stock
        .into_iter()
        .map(|((sender, recipient, year), (sum, n))| {
            // Each sex contributes one value per month.
            let months = window.iter().filter(|m| m.year() == year).count().max(1);
            debug_assert!(n % months == 0);
            let gdp = |c: &CountryCode| {
                dataset
                    .economics(c, year)
                    .expect("economics validated for stock countries")
                    .gdp_per_capita
            };
            CorridorYear {
                y_dest: gdp(&sender),
                y_origin: gdp(&recipient),
                sender,
                recipient,
                year,
                stock: sum / months as f64,
            }
        })
        .collect()
}

/// Annual gravity flows for every corridor and year of the window; the stock is the
/// mean monthly stock of the year.
pub fn gravity_flows(dataset: &Dataset, beta_exp: f64) -> Result<Vec<AnnualFlows>, BaselineError> {
    GravityParams::new(beta_exp)?;
    let mut by_year: BTreeMap<i32, BTreeMap<(CountryCode, CountryCode), f64>> = BTreeMap::new();
    for cy in corridor_years(dataset) {
        let r = gravity_per_migrant(cy.y_dest, cy.y_origin, beta_exp)?;
        by_year
            .entry(cy.year)
            .or_default()
            .insert((cy.sender, cy.recipient), r * cy.stock);
    }
    Ok(by_year
        .into_iter()
        .map(|(year, entries)| AnnualFlows { year, entries })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitFlag {
    Ok,
    /// The loss does not change with the exponent.
    Flat,
    /// The optimum sits on the edge of the (possibly widened) bracket.
    Boundary,
    /// Several local minima on the scan grid; the best grid point is returned.
    NonUnimodal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GravityFit {
    pub beta_exp: f64,
    pub sse: f64,
    pub lower: f64,
    pub upper: f64,
    pub flag: FitFlag,
    pub observations: usize,
    pub excluded: usize,
}

pub const BETA_BRACKET: (f64, f64) = (0.01, 2.0);
const GRID_POINTS: usize = 200;
const MAX_UPPER: f64 = 16.0;

/// Fits the exponent by least squares against a monthly panel (annual flows / 12):
/// a grid scan over the bracket, then golden-section refinement around the best
/// grid point. The upper edge doubles while the optimum sits on it.
pub fn calibrate_gravity(panel: &[PanelObservation], dataset: &Dataset) -> Result<GravityFit, BaselineError> {
    let years = corridor_years(dataset);
    let inputs: BTreeMap<(&CountryCode, &CountryCode, i32), &CorridorYear> =
        years.iter().map(|cy| ((&cy.sender, &cy.recipient, cy.year), cy)).collect();
    let window = dataset.window();
    let mut terms = Vec::new();
    let mut excluded = 0;
    for obs in panel {
        match inputs.get(&(&obs.sender, &obs.recipient, obs.month.year())) {
            Some(cy) if window.contains(obs.month) => terms.push((cy.stock / 12.0, cy.y_dest, cy.y_origin, obs.amount_usd)),
            _ => excluded += 1,
        }
    }
    if terms.is_empty() {
        return Err(BaselineError::EmptyPanel);
    }
    if excluded > 0 {
        log::warn!("{excluded} panel observations lack gravity inputs and are excluded");
    }
    let sse = |beta: f64| -> f64 {
        terms
            .iter()
            .map(|&(m, yd, yo, obs)| {
                let r = gravity_per_migrant(yd, yo, beta).expect("validated incomes");
                (m * r - obs).powi(2)
            })
            .sum()
    };

    let (lower, mut upper) = BETA_BRACKET;
    loop {
        let grid: Vec<f64> = (0..GRID_POINTS)
            .map(|i| lower + (upper - lower) * i as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        let losses: Vec<f64> = grid.iter().map(|&b| sse(b)).collect();
        let (best, &best_loss) = losses
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty grid");
        let hi = losses.iter().copied().fold(f64::MIN, f64::max);
        let fit = |beta_exp, sse, flag| GravityFit {
            beta_exp,
            sse,
            lower,
            upper,
            flag,
            observations: terms.len(),
            excluded,
        };
        if hi - best_loss <= 1e-12 * hi.abs().max(f64::MIN_POSITIVE) {
            log::warn!("gravity loss is flat over [{lower}, {upper}]");
            return Ok(fit(grid[0], best_loss, FitFlag::Flat));
        }
        if best == GRID_POINTS - 1 && upper < MAX_UPPER {
            upper *= 2.0;
            continue;
        }
        let local_minima = (1..GRID_POINTS - 1)
            .filter(|&i| losses[i] < losses[i - 1] && losses[i] <= losses[i + 1])
            .count();
        if local_minima > 1 {
            log::warn!("gravity loss has {local_minima} local minima; returning the best grid point");
            return Ok(fit(grid[best], best_loss, FitFlag::NonUnimodal));
        }
        if best == 0 || best == GRID_POINTS - 1 {
            return Ok(fit(grid[best], best_loss, FitFlag::Boundary));
        }
        let (b, l) = golden_section(&sse, grid[best - 1], grid[best + 1]);
        return Ok(if l <= best_loss {
            fit(b, l, FitFlag::Ok)
        } else {
            fit(grid[best], best_loss, FitFlag::Ok)
        });
    }
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) / 2.0;
    (x, f(x))
}

/// Average yearly flows of one corridor under both models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorridorComparison {
    pub sender: CountryCode,
    pub recipient: CountryCode,
    pub observed_usd: f64,
    pub structural_usd: f64,
    pub gravity_usd: f64,
    pub se_structural: f64,
    pub se_gravity: f64,
}

impl CorridorComparison {
    pub fn new(sender: CountryCode, recipient: CountryCode, observed: f64, structural: f64, gravity: f64) -> Self {
        Self {
            sender,
            recipient,
            observed_usd: observed,
            structural_usd: structural,
            gravity_usd: gravity,
            se_structural: (structural - observed).powi(2),
            se_gravity: (gravity - observed).powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub corridors: Vec<CorridorComparison>,
    pub mean_rel_error_structural: f64,
    pub mean_rel_error_gravity: f64,
    /// Structural over gravity mean relative error.
    pub rel_error_ratio: f64,
    /// Corridors with the largest structural over-estimates (most positive first).
    pub largest_over: Vec<(CountryCode, CountryCode, f64)>,
    /// Corridors with the largest structural under-estimates (most negative first).
    pub largest_under: Vec<(CountryCode, CountryCode, f64)>,
    pub excluded_corridors: usize,
}

const LISTED: usize = 5;

/// Summary statistics over per-corridor comparisons. Relative errors skip
/// corridors with zero observed flows.
pub fn comparison_report(corridors: Vec<CorridorComparison>, excluded_corridors: usize) -> ComparisonReport {
    let rel = |est: fn(&CorridorComparison) -> f64| {
        let v: Vec<f64> = corridors
            .iter()
            .filter(|c| c.observed_usd != 0.0)
            .map(|c| ((est(c) - c.observed_usd) / c.observed_usd).abs())
            .collect();
        if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
    };
    let s = rel(|c| c.structural_usd);
    let g = rel(|c| c.gravity_usd);
    let ratio = if g > 0.0 {
        s / g
    } else if s == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let mut errs: Vec<(CountryCode, CountryCode, f64)> = corridors
        .iter()
        .map(|c| (c.sender.clone(), c.recipient.clone(), c.structural_usd - c.observed_usd))
        .collect();
    errs.sort_by(|a, b| b.2.total_cmp(&a.2));
    let largest_over = errs.iter().filter(|e| e.2 > 0.0).take(LISTED).cloned().collect();
    let largest_under = errs.iter().rev().filter(|e| e.2 < 0.0).take(LISTED).cloned().collect();
    ComparisonReport {
        corridors,
        mean_rel_error_structural: s,
        mean_rel_error_gravity: g,
        rel_error_ratio: ratio,
        largest_over,
        largest_under,
        excluded_corridors,
    }
}

/// Compares average yearly flows per panel corridor, using only the months the
/// panel observes. Corridors missing from either estimate are excluded and counted.
pub fn compare_models(structural: &[FlowMatrix], gravity: &[AnnualFlows], panel: &[PanelObservation]) -> ComparisonReport {
    let s_index: BTreeMap<_, &FlowMatrix> = structural.iter().map(|m| (m.month, m)).collect();
    let g_index: BTreeMap<i32, &AnnualFlows> = gravity.iter().map(|a| (a.year, a)).collect();
    #[derive(Default)]
    struct Acc {
        obs: f64,
        s: f64,
        g: f64,
        n: usize,
        missing: bool,
    }
    let mut acc: BTreeMap<(CountryCode, CountryCode), Acc> = BTreeMap::new();
    for o in panel {
        let key = (o.sender.clone(), o.recipient.clone());
        let s = s_index.get(&o.month).and_then(|m| m.entries.get(&key)).copied();
        let g = g_index.get(&o.month.year()).and_then(|a| a.entries.get(&key)).copied();
        let a = acc.entry(key).or_default();
        match (s, g) {
            (Some(s), Some(g)) => {
                a.obs += o.amount_usd;
                a.s += s;
                a.g += g / 12.0;
                a.n += 1;
            }
            _ => a.missing = true,
        }
    }
    let mut excluded = 0;
    let mut rows = Vec::new();
    for ((sender, recipient), a) in acc {
        if a.missing || a.n == 0 {
            excluded += 1;
            continue;
        }
        let yearly = 12.0 / a.n as f64;
        rows.push(CorridorComparison::new(sender, recipient, a.obs * yearly, a.s * yearly, a.g * yearly));
    }
    if excluded > 0 {
        log::warn!("{excluded} panel corridors are missing from an estimate and are excluded");
    }
    comparison_report(rows, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::SplitTag;
    use crate::fixtures::FixtureSpec;
    use proptest::prelude::*;

    fn code(s: &str) -> CountryCode {
        CountryCode::parse(s).unwrap()
    }

    #[test]
    fn per_migrant_examples() {
        assert_eq!(gravity_per_migrant(8000.0, 10000.0, 0.75).unwrap(), 10000.0);
        let v: f64 = gravity_per_migrant(40000.0, 10000.0, 0.75).unwrap();
        assert!((v - 12279.507).abs() < 1e-3, "{v}");
        assert_eq!(gravity_per_migrant(5000.0, 5000.0, 0.75).unwrap(), 5000.0);
        assert!(gravity_per_migrant(0.0, 5000.0, 0.75).is_err());
        assert!(gravity_per_migrant(5000.0, -1.0, 0.75).is_err());
        let v32 = gravity_per_migrant(40000.0f32, 10000.0, 0.75).unwrap();
        assert!((f64::from(v32) - 12279.507).abs() < 0.01);
        assert!(GravityParams::new(0.0).is_err());
        assert!(GravityParams::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn continuous_at_equal_incomes(y in 100.0f64..1e5, beta in 0.5f64..2.0) {
            let at = gravity_per_migrant(y, y, beta).unwrap();
            let above = gravity_per_migrant(y + 1e-9, y, beta).unwrap();
            prop_assert!((above - at).abs() < 1e-3);
        }

        #[test]
        fn increasing_in_destination_income(yo in 100.0f64..1e4, gap in 1.0f64..1e4, step in 1.0f64..1e3, beta in 0.05f64..2.0) {
            let a = gravity_per_migrant(yo + gap, yo, beta).unwrap();
            let b = gravity_per_migrant(yo + gap + step, yo, beta).unwrap();
            prop_assert!(b > a);
        }
    }

    #[test]
    fn flows_are_stock_times_per_migrant() {
        let ds = FixtureSpec::small().dataset();
        let flows = gravity_flows(&ds, 0.75).unwrap();
        assert_eq!(flows.len(), 10);
        let y = &flows[5];
        let ((s, r), v) = y.entries.iter().next().unwrap();
        let stocks = ds.monthly_stocks();
        let window = ds.window();
        let mut total = 0.0;
        for (k, series) in &stocks {
            if &k.origin == r && &k.destination == s {
                total += window
                    .iter()
                    .zip(series)
                    .filter(|(m, _)| m.year() == y.year)
                    .map(|(_, x)| x)
                    .sum::<f64>();
            }
        }
        let per = gravity_per_migrant(
            ds.economics(s, y.year).unwrap().gdp_per_capita,
            ds.economics(r, y.year).unwrap().gdp_per_capita,
            0.75,
        )
        .unwrap();
        assert!((v - per * total / 12.0).abs() <= 1e-9 * v);
        let totals = y.recipient_totals();
        let sum: f64 = totals.values().sum();
        assert!((sum - y.entries.values().sum::<f64>()).abs() <= 1e-9 * sum);
    }

    #[test]
    fn doubling_stocks_doubles_flows() {
        let spec = FixtureSpec::small();
        let mut tables = spec.base_tables();
        let base = gravity_flows(&Dataset::from_tables(tables.clone(), spec.window).unwrap(), 0.6).unwrap();
        for s in &mut tables.stocks {
            s.count *= 2.0;
        }
        let doubled = gravity_flows(&Dataset::from_tables(tables.clone(), spec.window).unwrap(), 0.6).unwrap();
        for (a, b) in base.iter().zip(&doubled) {
            for (k, v) in &a.entries {
                assert!((b.entries[k] - 2.0 * v).abs() <= 1e-9 * v.abs().max(1.0));
            }
        }
        for s in &mut tables.stocks {
            s.count = 0.0;
        }
        let zero = gravity_flows(&Dataset::from_tables(tables, spec.window).unwrap(), 0.6).unwrap();
        assert!(zero.iter().all(|a| a.entries.values().all(|&v| v == 0.0)));
    }

    fn planted_panel(ds: &Dataset, beta: f64) -> Vec<PanelObservation> {
        let flows = gravity_flows(ds, beta).unwrap();
        let mut panel = Vec::new();
        for a in &flows {
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
        panel
    }

    #[test]
    fn planted_exponent_is_recovered() {
        let ds = FixtureSpec::small().dataset();
        for beta in [0.75, 0.4, 1.3] {
            let fit = calibrate_gravity(&planted_panel(&ds, beta), &ds).unwrap();
            assert_eq!(fit.flag, FitFlag::Ok);
            assert!((fit.beta_exp - beta).abs() < 0.01, "{beta}: {fit:?}");
        }
    }

    #[test]
    fn degenerate_fits_are_flagged() {
        let ds = FixtureSpec::small().dataset();
        let mut panel = planted_panel(&ds, 0.75);
        assert_eq!(calibrate_gravity(&[], &ds), Err(BaselineError::EmptyPanel));

        // Observed flows above the default bracket: the upper edge widens.
        let mut high = panel.clone();
        for p in &mut high {
            p.amount_usd *= 1e9;
        }
        let fit = calibrate_gravity(&high, &ds).unwrap();
        assert_eq!(fit.flag, FitFlag::Ok);
        assert!(fit.upper > BETA_BRACKET.1 && fit.beta_exp > BETA_BRACKET.1);

        // All observations zero: optimum pinned at the lower edge.
        for p in &mut panel {
            p.amount_usd = 0.0;
        }
        let fit = calibrate_gravity(&panel, &ds).unwrap();
        assert_eq!(fit.flag, FitFlag::Boundary);
        assert_eq!(fit.beta_exp, BETA_BRACKET.0);
    }

    #[test]
    fn optimum_beyond_the_widest_bracket_is_flagged() {
        // A three-dollar income gap lets exponents far above the bracket stay finite.
        let spec = FixtureSpec::small();
        let mut tables = spec.base_tables();
        let dests: std::collections::BTreeSet<CountryCode> = tables.stocks.iter().map(|s| s.destination.clone()).collect();
        for e in &mut tables.economics {
            e.gdp_per_capita = if dests.contains(&e.country) { 1003.0 } else { 1000.0 };
        }
        let ds = Dataset::from_tables(tables, spec.window).unwrap();
        let fit = calibrate_gravity(&planted_panel(&ds, 12.0), &ds).unwrap();
        assert_eq!(fit.flag, FitFlag::Ok);
        assert!((fit.beta_exp - 12.0).abs() < 0.01);
        let fit = calibrate_gravity(&planted_panel(&ds, 20.0), &ds).unwrap();
        assert_eq!(fit.flag, FitFlag::Boundary);
        assert_eq!(fit.beta_exp, fit.upper);
    }

    #[test]
    fn flat_loss_takes_the_warning_path() {
        // Destinations poorer than origins: the exponent never enters.
        let spec = FixtureSpec::small();
        let mut tables = spec.base_tables();
        let dests: std::collections::BTreeSet<CountryCode> = tables.stocks.iter().map(|s| s.destination.clone()).collect();
        for e in &mut tables.economics {
            if dests.contains(&e.country) {
                e.gdp_per_capita = 100.0;
            }
        }
        let ds = Dataset::from_tables(tables, spec.window).unwrap();
        let panel = planted_panel(&ds, 0.75);
        let fit = calibrate_gravity(&panel, &ds).unwrap();
        assert_eq!(fit.flag, FitFlag::Flat);
    }

    #[test]
    fn table_row_squared_errors() {
        let row = CorridorComparison::new(code("USA"), code("MEX"), 27.46, 26.49, 123.28);
        assert!((row.se_structural - 0.9409).abs() < 1e-9);
        assert!((row.se_gravity - 9181.4724).abs() < 1e-3);
        assert!((row.se_structural - 0.95).abs() / 0.95 < 0.02);
        assert!((row.se_gravity - 9181.54).abs() / 9181.54 < 0.02);
    }

    #[test]
    fn relative_error_ratio() {
        let rows = vec![
            CorridorComparison::new(code("USA"), code("MEX"), 100.0, 109.0, 120.0),
            CorridorComparison::new(code("DEU"), code("TUR"), 50.0, 45.5, 40.0),
        ];
        let r = comparison_report(rows.clone(), 0);
        assert!((r.rel_error_ratio - 0.45).abs() < 1e-12);
        assert_eq!(r.largest_over[0].1, code("MEX"));
        assert_eq!(r.largest_under[0].1, code("TUR"));

        let same: Vec<_> = rows
            .iter()
            .map(|c| CorridorComparison::new(c.sender.clone(), c.recipient.clone(), c.observed_usd, c.structural_usd, c.structural_usd))
            .collect();
        assert_eq!(comparison_report(same, 0).rel_error_ratio, 1.0);
    }

    #[test]
    fn comparison_over_a_panel() {
        use crate::flows::{EventFilter, ModelOptions, SimulationModel};
        let ds = FixtureSpec::small().dataset();
        let model = SimulationModel::new(&ds, ModelOptions::default());
        let p = crate::Params::reference();
        let structural = model.flow_matrices(&p, &EventFilter::All);
        let gravity = gravity_flows(&ds, 0.75).unwrap();
        let mut panel = FixtureSpec::small().simulate_panel(&ds, &p);
        let n_corr = model.population().corridors().len();
        panel.push(PanelObservation {
            sender: code("ZZZ"),
            recipient: code("MEX"),
            month: ds.window().start,
            amount_usd: 1.0,
            split_tag: SplitTag::Unassigned,
        });
        let r = compare_models(&structural, &gravity, &panel);
        assert_eq!(r.corridors.len(), n_corr);
        assert_eq!(r.excluded_corridors, 1);
        // The panel is the structural model itself, up to cent rounding.
        assert!(r.mean_rel_error_structural < 1e-6);
        assert!(r.rel_error_ratio < 1e-3);
    }
}
