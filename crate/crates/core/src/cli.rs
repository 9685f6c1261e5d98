//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 internal or I/O failure, 2 data errors, 3 calibration
//! failure, 4 missing artifacts (calibrated parameters).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::baseline::{calibrate_gravity, compare_models, gravity_flows, BaselineError, GravityFit};
use crate::calibration::{calibrate, param_confidence, split_panel, CalibrationError, CalibrationResult, OptimizerConfig};
use crate::dataio::{
    load_dataset, DataError, Dataset, DatasetPaths, Hazard, PanelObservation, RunConfig, SplitTag, ANCHOR_YEARS,
    AGE_PROFILES_FILE, DISASTERS_FILE, ECONOMICS_FILE, PANEL_FILE, STOCKS_FILE, SURPLUS_FILE,
};
use crate::fixtures::FixtureSpec;
use crate::flows::{stream_seed, EventFilter, ModelOptions, SimulationModel, UncertaintyBand};
use crate::output::{self, Manifest, ProfileRows};
use crate::population::{demographics, sender_demographics};
use crate::scenarios::{
    attribute_by_hazard, attribute_event, run_counterfactual, summarize, Grouping, ScenarioError,
};
use crate::time::YearMonth;
use crate::Params;

#[derive(Debug, Parser)]
#[command(name = "remitsim", version, about = "Cohort simulation of disaster-driven remittance flows")]
pub struct Cli {
    /// Flat `key = value` run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory holding the input CSV tables.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Calibrated parameters; defaults to `calibration.json` in the output directory.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the monthly cohort population and pyramid demographics.
    BuildPopulation,
    /// Fit the behavioural parameters to the observed panel.
    Calibrate(CalibrateArgs),
    /// Expected flows with every event active, bands and probability profiles.
    Simulate(SimulateArgs),
    /// Flows induced relative to a filtered event set.
    Counterfactual(CounterfactualArgs),
    /// Induced flows by hazard type and by event.
    Attribute(AttributeArgs),
    /// Fit the gravity baseline and compare both models against the panel.
    CompareBaseline,
    /// Synthetic datasets.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
    /// Simulate, counterfactual, attribute and (with a panel) compare-baseline.
    Report,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Seed of the train/test split; defaults to the run seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub bootstrap_reps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Month of the probability profiles; defaults to the last month of the window.
    #[arg(long)]
    pub profile_month: Option<YearMonth>,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    /// `no-disaster`, `only-<hazard>`, `except-<hazard>` or `event-<id>`.
    #[arg(long, default_value = "no-disaster")]
    pub scenario: String,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    /// Restrict the per-event report to one event.
    #[arg(long)]
    pub event: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// Write the synthetic dataset and a `run.cfg` into a directory.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub corridors: usize,
    #[arg(long, default_value_t = 40)]
    pub events: usize,
    /// Multiplicative noise of the panel (standard deviation).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 2024)]
    pub fixture_seed: u64,
    /// Leave the observed panel out.
    #[arg(long)]
    pub no_panel: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no observed panel ({PANEL_FILE}) in {0}")]
    NoPanel(PathBuf),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("calibration did not converge within {iterations} iterations; results written to {path}")]
    NotConverged { iterations: usize, path: PathBuf },
    #[error("calibrated parameters not found at {0}; run `calibrate` first or pass --params")]
    MissingParams(PathBuf),
    #[error("unreadable parameters in {path}: {message}")]
    InvalidParams { path: PathBuf, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) | CliError::Config(_) | CliError::NoPanel(_) => 2,
            CliError::Scenario(ScenarioError::UnknownEvent(_)) => 2,
            CliError::Baseline(BaselineError::EmptyPanel) => 2,
            CliError::Calibration(_) | CliError::NotConverged { .. } => 3,
            CliError::MissingParams(_) | CliError::InvalidParams { .. } => 4,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Fixtures {
        command: FixturesCommand::Generate(args),
    } = &cli.command
    {
        return generate_fixture(args);
    }
    let ctx = Context::new(cli)?;
    if let Some(n) = ctx.config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    match &cli.command {
        Command::BuildPopulation => ctx.build_population(),
        Command::Calibrate(args) => ctx.calibrate(args),
        Command::Simulate(args) => ctx.simulate(args),
        Command::Counterfactual(args) => ctx.counterfactual(args),
        Command::Attribute(args) => ctx.attribute(args),
        Command::CompareBaseline => ctx.compare_baseline(),
        Command::Report => ctx.report(),
        Command::Fixtures { .. } => unreachable!("handled above"),
    }
}

fn generate_fixture(args: &GenerateArgs) -> Result<(), CliError> {
    let spec = FixtureSpec {
        corridors: args.corridors,
        events: args.events,
        seed: args.fixture_seed,
        noise: args.noise,
        panel_params: (!args.no_panel).then(Params::reference),
        ..FixtureSpec::standard()
    };
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let ds = spec.write(&args.out)?;
    println!(
        "wrote {} corridors, {} events, {} panel rows to {}",
        spec.corridors,
        ds.tables().disasters.len(),
        ds.tables().panel.len(),
        args.out.display()
    );
    Ok(())
}

/// Inputs shared by every data-driven command.
struct Context {
    config: RunConfig,
    config_path: Option<PathBuf>,
    params_path: PathBuf,
    dataset: Dataset,
    command: &'static str,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::BuildPopulation => "build-population",
        Command::Calibrate(_) => "calibrate",
        Command::Simulate(_) => "simulate",
        Command::Counterfactual(_) => "counterfactual",
        Command::Attribute(_) => "attribute",
        Command::CompareBaseline => "compare-baseline",
        Command::Fixtures { .. } => "fixtures",
        Command::Report => "report",
    }
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let mut config = match &cli.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &cli.data_dir {
            config.data_dir = d.clone();
        }
        if let Some(d) = &cli.output_dir {
            config.output_dir = d.clone();
        }
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        if cli.threads.is_some() {
            config.threads = cli.threads;
        }
        if let Command::Calibrate(a) = &cli.command {
            config.starts = a.starts.unwrap_or(config.starts);
            config.max_iter = a.max_iter.unwrap_or(config.max_iter);
            config.tol = a.tol.unwrap_or(config.tol);
            config.bootstrap_reps = a.bootstrap_reps.unwrap_or(config.bootstrap_reps);
        }
        config.validate().map_err(CliError::Config)?;
        let dataset = load_dataset(&DatasetPaths::from_dir(&config.data_dir), &config)?;
        let params_path = cli
            .params
            .clone()
            .unwrap_or_else(|| config.output_dir.join(output::CALIBRATION_FILE));
        Ok(Self {
            config,
            config_path: cli.config.clone(),
            params_path,
            dataset,
            command: command_name(&cli.command),
        })
    }

    fn model(&self) -> SimulationModel {
        SimulationModel::new(
            &self.dataset,
            ModelOptions {
                delta_gdp_clamp: self.config.delta_gdp_clamp,
            },
        )
    }

    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        let dir = &self.config.output_dir;
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn write_manifest(&self) -> Result<(), CliError> {
        let mut inputs = BTreeMap::new();
        let files = [
            ECONOMICS_FILE,
            STOCKS_FILE,
            AGE_PROFILES_FILE,
            SURPLUS_FILE,
            DISASTERS_FILE,
            PANEL_FILE,
        ];
        for name in files {
            let path = self.config.data_dir.join(name);
            if path.exists() {
                let bytes = fs::read(&path).map_err(io_err(&path))?;
                inputs.insert(name.to_string(), output::sha256_hex(&bytes));
            }
        }
        if let Some(path) = &self.config_path {
            let bytes = fs::read(path).map_err(io_err(path))?;
            inputs.insert("config".to_string(), output::sha256_hex(&bytes));
        }
        if self.command != "calibrate" && self.command != "build-population" && self.params_path.exists() {
            let bytes = fs::read(&self.params_path).map_err(io_err(&self.params_path))?;
            inputs.insert("params".to_string(), output::sha256_hex(&bytes));
        }
        let dir = &self.config.output_dir;
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            seed: self.config.seed,
            inputs,
            outputs: output::hash_outputs(dir).map_err(io_err(dir))?,
        };
        self.write(output::MANIFEST_FILE, &manifest.to_json())
    }

    fn load_params(&self) -> Result<Params, CliError> {
        let path = &self.params_path;
        if !path.exists() {
            return Err(CliError::MissingParams(path.clone()));
        }
        let invalid = |message: String| CliError::InvalidParams {
            path: path.clone(),
            message,
        };
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        let body = value.get("params").cloned().unwrap_or(value);
        let params: Params = serde_json::from_value(body).map_err(|e| invalid(e.to_string()))?;
        params.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(params)
    }

    fn panel(&self) -> Result<&[PanelObservation], CliError> {
        let panel = &self.dataset.tables().panel;
        if panel.is_empty() {
            return Err(CliError::NoPanel(self.config.data_dir.clone()));
        }
        Ok(panel)
    }

    fn build_population(&self) -> Result<(), CliError> {
        let model = self.model();
        let pop = model.population();
        self.write(output::POPULATION_FILE, &output::population_csv(pop))?;
        self.write(output::DEMOGRAPHICS_FILE, &output::demographics_csv(&demographics(pop)))?;
        for year in ANCHOR_YEARS {
            println!("total migrants {year}: {}", self.dataset.stock_total(year));
        }
        println!(
            "corridors: {}, months: {}, cohorts: {}",
            pop.corridors().len(),
            model.months(),
            pop.cohorts().len()
        );
        self.write_manifest()
    }

    fn calibrate(&self, args: &CalibrateArgs) -> Result<(), CliError> {
        let panel = self.panel()?;
        let split_seed = args.split_seed.unwrap_or(self.config.seed);
        let tagged = if panel.iter().any(|p| p.split_tag != SplitTag::Unassigned) {
            panel.to_vec()
        } else {
            split_panel(panel, self.config.split_fraction, split_seed, self.config.split_unit)
        };
        let model = self.model();
        let cfg = OptimizerConfig::from(&self.config);
        let mut result = calibrate(&model, &tagged, &cfg)?;
        if self.config.bootstrap_reps > 0 {
            let boot = param_confidence(
                &result,
                &tagged,
                &model,
                &cfg,
                self.config.bootstrap_reps,
                self.config.bootstrap_iter,
            );
            result.param_cis = boot.intervals;
            result.bootstrap_replicates = boot.replicates;
            result.bootstrap_dropped = boot.dropped;
        }
        let file = CalibrationFile {
            version: env!("CARGO_PKG_VERSION"),
            split_seed,
            config: self
                .config
                .to_flat_string()
                .lines()
                .filter_map(|l| l.split_once(" = "))
                .filter(|(k, _)| *k != "threads")
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            result: &result,
        };
        let mut body = serde_json::to_string_pretty(&file).expect("calibration result serialises");
        body.push('\n');
        self.write(output::CALIBRATION_FILE, &body)?;
        println!(
            "train SSE {}, test R2 {}, iterations {}, converged {}",
            result.train_sse,
            result.test_r2.map_or_else(|| "n/a".to_string(), |r| r.to_string()),
            result.iterations,
            result.converged
        );
        self.write_manifest()?;
        if !result.converged {
            return Err(CliError::NotConverged {
                iterations: result.iterations,
                path: self.config.output_dir.join(output::CALIBRATION_FILE),
            });
        }
        Ok(())
    }

    /// Cells of every corridor in each calendar year of the window.
    fn cells_by_year(&self, model: &SimulationModel) -> Vec<(i32, Vec<usize>)> {
        let window = self.dataset.window();
        let corridors = model.population().corridors().len();
        window
            .years()
            .map(|y| {
                let cells = (0..corridors)
                    .flat_map(|c| {
                        window
                            .iter()
                            .enumerate()
                            .filter(move |(_, m)| m.year() == y)
                            .map(move |(pos, _)| model.cell_index(c, pos))
                    })
                    .collect();
                (y, cells)
            })
            .collect()
    }

    /// Yearly bands plus a whole-window band built from the same draws.
    fn yearly_bands<F>(&self, model: &SimulationModel, prefix: &str, mut sample: F) -> Result<Vec<UncertaintyBand>, CliError>
    where
        F: FnMut(&[usize], &str, u64) -> Result<(UncertaintyBand, Vec<f64>), CliError>,
    {
        let mut bands = Vec::new();
        let mut total = vec![0.0; self.config.band_draws];
        for (year, cells) in self.cells_by_year(model) {
            let (band, draws) = sample(&cells, &format!("{prefix}_{year}"), stream_seed(self.config.seed, year as u64))?;
            for (t, d) in total.iter_mut().zip(draws) {
                *t += d;
            }
            bands.push(band);
        }
        bands.push(crate::flows::confidence_band(&format!("{prefix}_total"), &total).map_err(ScenarioError::from)?);
        Ok(bands)
    }

    fn simulate(&self, args: &SimulateArgs) -> Result<(), CliError> {
        let params = self.load_params()?;
        self.run_simulate(&params, args.profile_month)?;
        self.write_manifest()
    }

    fn run_simulate(&self, params: &Params, profile_month: Option<YearMonth>) -> Result<(), CliError> {
        let model = self.model();
        let matrices = model.flow_matrices(params, &EventFilter::All);
        self.write(output::FLOWS_FILE, &output::flows_csv(&matrices, "all-events"))?;

        let bands = self.yearly_bands(&model, "flows", |cells, id, seed| {
            let draws = model
                .sample_cells(params, &EventFilter::All, cells, seed, self.config.band_draws)
                .map_err(ScenarioError::from)?;
            let band = crate::flows::confidence_band(id, &draws).map_err(ScenarioError::from)?;
            Ok((band, draws))
        })?;
        self.write(output::BANDS_FILE, &output::bands_csv(&bands))?;

        let month = profile_month.unwrap_or(self.dataset.window().end);
        let mut profiles = Vec::new();
        let corridors = model.population().corridors();
        let origins: std::collections::BTreeSet<_> = corridors.iter().map(|c| &c.origin).collect();
        for origin in origins {
            profiles.push(ProfileRows {
                origin,
                scope: "all".into(),
                month,
                points: model.probability_profile(params, &EventFilter::All, origin, month, None),
            });
            for c in corridors.iter().filter(|c| &c.origin == origin) {
                profiles.push(ProfileRows {
                    origin,
                    scope: c.destination.to_string(),
                    month,
                    points: model.probability_profile(params, &EventFilter::All, origin, month, Some(&c.destination)),
                });
            }
        }
        self.write(output::PROFILES_FILE, &output::profiles_csv(&profiles))?;

        let probs = model.cohort_probabilities(params, &EventFilter::All);
        let senders = sender_demographics(model.population(), &probs, &self.dataset);
        self.write(output::SENDERS_FILE, &output::senders_csv(&senders))?;
        let total: f64 = matrices.iter().map(|m| m.total()).sum();
        println!("total expected flows: {total} USD over {} months", matrices.len());
        Ok(())
    }

    fn counterfactual(&self, args: &CounterfactualArgs) -> Result<(), CliError> {
        let params = self.load_params()?;
        let filter = parse_scenario(&args.scenario, &self.dataset)?;
        self.run_counterfactual(&params, &filter, &args.scenario)?;
        self.write_manifest()
    }

    fn run_counterfactual(&self, params: &Params, filter: &EventFilter, label: &str) -> Result<(), CliError> {
        let model = self.model();
        let mut result = run_counterfactual(&model, params, filter);
        result.scenario_id = label.to_string();
        self.write(output::INDUCED_FILE, &output::induced_csv(&result))?;
        let bands = self.yearly_bands(&model, "induced", |cells, id, seed| {
            let f = model
                .sample_cells(params, &EventFilter::All, cells, seed, self.config.band_draws)
                .map_err(ScenarioError::from)?;
            let c = model
                .sample_cells(params, filter, cells, seed, self.config.band_draws)
                .map_err(ScenarioError::from)?;
            let d: Vec<f64> = f.iter().zip(&c).map(|(a, b)| a - b).collect();
            let band = crate::flows::confidence_band(id, &d).map_err(ScenarioError::from)?;
            Ok((band, d))
        })?;
        self.write(output::INDUCED_BANDS_FILE, &output::bands_csv(&bands))?;
        for g in [Grouping::IncomeGroup, Grouping::Country, Grouping::Year] {
            let rows = summarize(&result, &self.dataset, g);
            self.write(&format!("summary_{}.csv", g.label()), &output::summary_csv(&rows))?;
        }
        let (induced, factual) = (result.total_induced(), result.total_factual());
        println!(
            "scenario {}: induced {induced} USD of {factual} USD ({:.4}%)",
            result.scenario_id,
            if factual > 0.0 { 100.0 * induced / factual } else { 0.0 }
        );
        Ok(())
    }

    fn attribute(&self, args: &AttributeArgs) -> Result<(), CliError> {
        let params = self.load_params()?;
        self.run_attribute(&params, args.event.as_deref())?;
        self.write_manifest()
    }

    fn run_attribute(&self, params: &Params, event: Option<&str>) -> Result<(), CliError> {
        let model = self.model();
        let report = attribute_by_hazard(&model, params, self.config.attribution);
        self.write(output::ATTRIBUTION_FILE, &output::attribution_csv(&report))?;
        let ids: Vec<&str> = match event {
            Some(id) => vec![id],
            None => self
                .dataset
                .tables()
                .disasters
                .iter()
                .map(|e| e.event_id.as_str())
                .collect(),
        };
        let events = ids
            .into_iter()
            .map(|id| attribute_event(&model, params, id))
            .collect::<Result<Vec<_>, _>>()?;
        self.write(output::EVENTS_FILE, &output::events_csv(&events))?;
        println!(
            "induced {} USD, interaction residual {} USD",
            report.total_induced, report.interaction_residual
        );
        Ok(())
    }

    fn compare_baseline(&self) -> Result<(), CliError> {
        let params = self.load_params()?;
        self.run_compare(&params)?;
        self.write_manifest()
    }

    fn run_compare(&self, params: &Params) -> Result<(), CliError> {
        let panel = self.panel()?;
        let fit = calibrate_gravity(panel, &self.dataset)?;
        let gravity = gravity_flows(&self.dataset, fit.beta_exp)?;
        let structural = self.model().flow_matrices(params, &EventFilter::All);
        let report = compare_models(&structural, &gravity, panel);
        self.write(output::COMPARISON_FILE, &output::comparison_csv(&report))?;
        let summary = GravitySummary {
            fit: &fit,
            mean_rel_error_structural: report.mean_rel_error_structural,
            mean_rel_error_gravity: report.mean_rel_error_gravity,
            rel_error_ratio: report.rel_error_ratio,
            excluded_corridors: report.excluded_corridors,
            largest_over: &report.largest_over,
            largest_under: &report.largest_under,
        };
        let mut body = serde_json::to_string_pretty(&summary).expect("gravity summary serialises");
        body.push('\n');
        self.write(output::GRAVITY_FILE, &body)?;
        println!(
            "gravity beta {} ({:?}); relative error ratio structural/gravity {}",
            fit.beta_exp, fit.flag, report.rel_error_ratio
        );
        Ok(())
    }

    fn report(&self) -> Result<(), CliError> {
        let params = self.load_params()?;
        self.run_simulate(&params, None)?;
        self.run_counterfactual(&params, &EventFilter::None, "no-disaster")?;
        self.run_attribute(&params, None)?;
        if !self.dataset.tables().panel.is_empty() {
            self.run_compare(&params)?;
        }
        self.write_manifest()
    }
}

#[derive(Serialize)]
struct CalibrationFile<'a> {
    version: &'static str,
    split_seed: u64,
    config: BTreeMap<String, String>,
    #[serde(flatten)]
    result: &'a CalibrationResult,
}

#[derive(Serialize)]
struct GravitySummary<'a> {
    fit: &'a GravityFit,
    mean_rel_error_structural: f64,
    mean_rel_error_gravity: f64,
    rel_error_ratio: f64,
    excluded_corridors: usize,
    largest_over: &'a [(crate::dataio::CountryCode, crate::dataio::CountryCode, f64)],
    largest_under: &'a [(crate::dataio::CountryCode, crate::dataio::CountryCode, f64)],
}

/// Parses a scenario label into the counterfactual event filter.
pub fn parse_scenario(label: &str, dataset: &Dataset) -> Result<EventFilter, CliError> {
    let bad = |m: String| CliError::Config(format!("scenario {label:?}: {m}"));
    if label == "no-disaster" {
        return Ok(EventFilter::None);
    }
    if let Some(h) = label.strip_prefix("only-") {
        return Ok(EventFilter::only_hazard(h.parse::<Hazard>().map_err(bad)?));
    }
    if let Some(h) = label.strip_prefix("except-") {
        return Ok(EventFilter::except_hazard(h.parse::<Hazard>().map_err(bad)?));
    }
    if let Some(id) = label.strip_prefix("event-") {
        // The counterfactual removes just this event.
        dataset
            .event(id)
            .ok_or_else(|| CliError::Scenario(ScenarioError::UnknownEvent(id.to_string())))?;
        let others = dataset
            .tables()
            .disasters
            .iter()
            .filter(|e| e.event_id != id)
            .map(|e| e.event_id.clone())
            .collect();
        return Ok(EventFilter::OnlyEvents(others));
    }
    Err(bad("expected no-disaster, only-<hazard>, except-<hazard> or event-<id>".into()))
}
