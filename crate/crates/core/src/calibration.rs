//! Squared-error calibration of the behavioural parameters against an observed panel.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::behavior::BehaviorParams;
use crate::dataio::{CountryCode, Descent, PanelObservation, RunConfig, SplitTag, SplitUnit};
use crate::flows::{percentile, stream_seed, EventFilter, SimulationModel};

type Params = BehaviorParams<f64>;

const N_PARAMS: usize = 9;
const RHO: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("no training observation matches a modelled corridor-month")]
    EmptyTrain,
    #[error("all {starts} optimizer starts diverged: {diagnostics}")]
    AllStartsDiverged { starts: usize, diagnostics: String },
}

/// Assigns observations to train/test uniformly at random.
///
/// With [`SplitUnit::Observation`] exactly `round(n * fraction)` observations are
/// tagged train; with [`SplitUnit::Corridor`] whole corridors are assigned.
pub fn split_panel(
    panel: &[PanelObservation],
    fraction: f64,
    seed: u64,
    unit: SplitUnit,
) -> Vec<PanelObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = panel.to_vec();
    match unit {
        SplitUnit::Observation => {
            let mut idx: Vec<usize> = (0..panel.len()).collect();
            idx.shuffle(&mut rng);
            let n_train = (panel.len() as f64 * fraction).round() as usize;
            for (rank, &i) in idx.iter().enumerate() {
                out[i].split_tag = if rank < n_train { SplitTag::Train } else { SplitTag::Test };
            }
        }
        SplitUnit::Corridor => {
            let mut corridors: Vec<(&CountryCode, &CountryCode)> = panel
                .iter()
                .map(|p| (&p.sender, &p.recipient))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            corridors.shuffle(&mut rng);
            let n_train = (corridors.len() as f64 * fraction).round() as usize;
            let train: BTreeSet<_> = corridors[..n_train].iter().copied().collect();
            for o in &mut out {
                o.split_tag = if train.contains(&(&o.sender, &o.recipient)) {
                    SplitTag::Train
                } else {
                    SplitTag::Test
                };
            }
        }
    }
    out
}

/// How many panel observations the model could evaluate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoverageReport {
    pub used: usize,
    pub excluded: usize,
    /// Up to ten excluded `sender->recipient month` keys.
    pub excluded_examples: Vec<String>,
}

/// Panel observations matched to model corridor-months.
#[derive(Debug, Clone)]
pub struct LossProblem<'m> {
    model: &'m SimulationModel,
    cells: Vec<usize>,
    observed: Vec<f64>,
    weights: Vec<f64>,
    coverage: CoverageReport,
}

impl<'m> LossProblem<'m> {
    /// Observations whose corridor has no modelled population (or whose month lies
    /// outside the window) are excluded and counted in the coverage report.
    pub fn new<'a, I>(model: &'m SimulationModel, observations: I, corridor_weighted: bool) -> Self
    where
        I: IntoIterator<Item = &'a PanelObservation>,
    {
        let pop = model.population();
        let window = model.dataset().window();
        let mut cells = Vec::new();
        let mut observed = Vec::new();
        let mut corridor_of = Vec::new();
        let mut coverage = CoverageReport::default();
        for obs in observations {
            // Senders host the migrants; recipients are their origin.
            let hit = pop
                .corridor_index(&obs.recipient, &obs.sender)
                .zip(window.position(obs.month));
            match hit {
                Some((c, pos)) => {
                    cells.push(model.cell_index(c, pos));
                    observed.push(obs.amount_usd);
                    corridor_of.push(c);
                    coverage.used += 1;
                }
                None => {
                    coverage.excluded += 1;
                    if coverage.excluded_examples.len() < 10 {
                        coverage
                            .excluded_examples
                            .push(format!("{}->{} {}", obs.sender, obs.recipient, obs.month));
                    }
                }
            }
        }
        if coverage.excluded > 0 {
            log::warn!(
                "{} panel observations have no modelled corridor-month and are excluded",
                coverage.excluded
            );
        }
        let weights = if corridor_weighted {
            let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
            for (&c, &y) in corridor_of.iter().zip(&observed) {
                let e = sums.entry(c).or_default();
                e.0 += y * y;
                e.1 += 1;
            }
            corridor_of
                .iter()
                .map(|c| {
                    let (ss, n) = sums[c];
                    if ss > 0.0 { n as f64 / ss } else { 1.0 }
                })
                .collect()
        } else {
            vec![1.0; cells.len()]
        };
        Self {
            model,
            cells,
            observed,
            weights,
            coverage,
        }
    }

    /// Same matched observations with multiplicity weights (bootstrap resamples).
    fn resampled(&self, multiplicity: &[usize]) -> Self {
        let mut out = self.clone();
        out.cells.clear();
        out.observed.clear();
        out.weights.clear();
        for (i, &m) in multiplicity.iter().enumerate() {
            if m > 0 {
                out.cells.push(self.cells[i]);
                out.observed.push(self.observed[i]);
                out.weights.push(self.weights[i] * m as f64);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn coverage(&self) -> &CoverageReport {
        &self.coverage
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn simulated(&self, params: &Params) -> Vec<f64> {
        self.model.flows_for_cells(params, &EventFilter::All, &self.cells)
    }

    /// Weighted residuals `sqrt(w) * (simulated - observed)`.
    pub fn residuals(&self, params: &Params) -> Vec<f64> {
        self.simulated(params)
            .iter()
            .zip(&self.observed)
            .zip(&self.weights)
            .map(|((s, o), w)| w.sqrt() * (s - o))
            .collect()
    }

    /// Sum of (weighted) squared errors, in USD².
    pub fn loss(&self, params: &Params) -> f64 {
        self.residuals(params).iter().map(|r| r * r).sum()
    }

    /// Weighted sum of squared observations; the loss of an all-zero prediction.
    pub fn scale(&self) -> f64 {
        self.observed
            .iter()
            .zip(&self.weights)
            .map(|(o, w)| w * o * o)
            .sum::<f64>()
            .max(f64::MIN_POSITIVE)
    }

    /// Coefficient of determination of the model on these observations.
    pub fn r_squared(&self, params: &Params) -> Option<f64> {
        if self.observed.is_empty() {
            return None;
        }
        let mean = self.observed.iter().sum::<f64>() / self.observed.len() as f64;
        let sst: f64 = self.observed.iter().map(|o| (o - mean).powi(2)).sum();
        let sse: f64 = self
            .simulated(params)
            .iter()
            .zip(&self.observed)
            .map(|(s, o)| (s - o).powi(2))
            .sum();
        (sst > 0.0).then(|| 1.0 - sse / sst)
    }
}

/// Training loss of `params` with its coverage report.
pub fn loss(params: &Params, train: &[PanelObservation], model: &SimulationModel) -> (f64, CoverageReport) {
    let problem = LossProblem::new(model, train, false);
    (problem.loss(params), problem.coverage.clone())
}

/// Unconstrained coordinates: `rho` is replaced by its logit.
pub fn to_internal(p: &Params) -> [f64; N_PARAMS] {
    let mut z = p.to_array();
    z[RHO] = (p.rho / (1.0 - p.rho)).ln();
    z
}

pub fn from_internal(z: &[f64; N_PARAMS]) -> Params {
    let mut a = *z;
    a[RHO] = 1.0 / (1.0 + (-z[RHO]).exp());
    Params::from_array(a)
}

fn fd_step(z: f64) -> f64 {
    1e-5 * z.abs().max(1.0)
}

/// Normalised loss in internal coordinates; `None` if not finite.
fn objective(problem: &LossProblem, z: &[f64; N_PARAMS], scale: f64) -> Option<f64> {
    let l = problem.loss(&from_internal(z)) / scale;
    l.is_finite().then_some(l)
}

/// Central-difference Jacobian of the residuals in internal coordinates
/// (column-major, one column per parameter).
fn residual_jacobian(problem: &LossProblem, z: &[f64; N_PARAMS]) -> Vec<Vec<f64>> {
    (0..N_PARAMS)
        .map(|j| {
            let h = fd_step(z[j]);
            let mut up = *z;
            let mut down = *z;
            up[j] += h;
            down[j] -= h;
            let ru = problem.residuals(&from_internal(&up));
            let rd = problem.residuals(&from_internal(&down));
            ru.iter().zip(&rd).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect()
}

/// Gradient of the normalised loss in internal coordinates, `2 J^T r / scale`,
/// with `J` the central-difference residual Jacobian.
pub fn loss_gradient(problem: &LossProblem, params: &Params) -> [f64; N_PARAMS] {
    let z = to_internal(params);
    let scale = problem.scale();
    let r = problem.residuals(params);
    let jac = residual_jacobian(problem, &z);
    let mut g = [0.0; N_PARAMS];
    for (gj, col) in g.iter_mut().zip(&jac) {
        *gj = 2.0 * col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / scale;
    }
    g
}

/// Solves a small symmetric positive-definite system by Cholesky factorisation.
fn solve_spd(a: &[[f64; N_PARAMS]; N_PARAMS], b: &[f64; N_PARAMS]) -> Option<[f64; N_PARAMS]> {
    let n = N_PARAMS;
    let mut l = [[0.0; N_PARAMS]; N_PARAMS];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d.is_nan() || d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = [0.0; N_PARAMS];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = [0.0; N_PARAMS];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub descent: Descent,
    pub corridor_weighted: bool,
    pub initial: Params,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iter: 200,
            tol: 1e-10,
            seed: 42,
            descent: Descent::Preconditioned,
            corridor_weighted: false,
            initial: Params::initial(),
        }
    }
}

impl From<&RunConfig> for OptimizerConfig {
    fn from(c: &RunConfig) -> Self {
        Self {
            starts: c.starts.max(1),
            max_iter: c.max_iter,
            tol: c.tol,
            seed: c.seed,
            descent: c.descent,
            corridor_weighted: c.corridor_weighted_loss,
            initial: Params::initial(),
        }
    }
}

/// Outcome of one optimizer run.
#[derive(Debug, Clone)]
pub struct DescentRun {
    pub params: Params,
    /// Normalised loss (loss divided by the sum of squared observations).
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Normalised loss after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

/// Gradient descent with backtracking (Armijo) line search from `start`.
///
/// The preconditioned variant scales the gradient by a damped Gauss-Newton
/// metric built from the same residual Jacobian; every accepted step strictly
/// decreases the loss. Returns `None` if the loss is not finite at the start.
pub fn descend(problem: &LossProblem, start: &Params, cfg: &OptimizerConfig) -> Option<DescentRun> {
    let scale = problem.scale();
    let mut z = to_internal(start);
    let mut current = *start;
    let mut f = problem.loss(start) / scale;
    if !f.is_finite() {
        return None;
    }
    let mut history = vec![f];
    let mut damping = 1e-3;
    let mut steepest_step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        if f <= 1e-30 {
            converged = true;
            break;
        }
        let r: Vec<f64> = problem.residuals(&current);
        let jac = residual_jacobian(problem, &z);
        let mut jtr = [0.0; N_PARAMS];
        for (j, col) in jac.iter().enumerate() {
            jtr[j] = col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / scale;
        }
        let grad: [f64; N_PARAMS] = jtr.map(|v| 2.0 * v);
        if grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            converged = true;
            break;
        }

        let direction: [f64; N_PARAMS] = match cfg.descent {
            Descent::Preconditioned => {
                let mut jtj = [[0.0; N_PARAMS]; N_PARAMS];
                for a in 0..N_PARAMS {
                    for b in 0..=a {
                        let v = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum::<f64>() / scale;
                        jtj[a][b] = v;
                        jtj[b][a] = v;
                    }
                }
                let trace = (0..N_PARAMS).map(|i| jtj[i][i]).sum::<f64>().max(f64::MIN_POSITIVE);
                let mut d = None;
                while d.is_none() && damping < 1e12 {
                    let mut m = jtj;
                    for (i, row) in m.iter_mut().enumerate() {
                        row[i] += damping * row[i] + 1e-14 * trace;
                    }
                    d = solve_spd(&m, &jtr.map(|v| -v));
                    if d.is_none() {
                        damping *= 10.0;
                    }
                }
                match d {
                    Some(d) => d,
                    None => break,
                }
            }
            Descent::Steepest => grad.map(|g| -g * steepest_step / gnorm),
        };

        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        if slope >= 0.0 {
            // Not a descent direction (numerical breakdown); nothing left to gain.
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial = z;
            for (zi, di) in trial.iter_mut().zip(&direction) {
                *zi += t * di;
            }
            if let Some(ft) = objective(problem, &trial, scale) {
                if ft <= f + 1e-4 * t * slope {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, ft)) = accepted else {
            converged = true;
            break;
        };
        match cfg.descent {
            Descent::Preconditioned => {
                damping = if t == 1.0 { (damping / 3.0).max(1e-12) } else { damping * 4.0 };
            }
            Descent::Steepest => {
                steepest_step = if t == 1.0 { steepest_step * 2.0 } else { steepest_step * t };
            }
        }
        let rel = (f - ft) / f.max(f64::MIN_POSITIVE);
        z = trial;
        current = from_internal(&z);
        f = ft;
        history.push(f);
        if rel < cfg.tol {
            converged = true;
            break;
        }
    }
    Some(DescentRun {
        params: current,
        loss: f,
        iterations,
        converged,
        history,
    })
}

/// Starting points: the configured initial parameters, then uniform ±50%
/// perturbations of them (zero-valued entries are perturbed additively).
pub fn start_points(cfg: &OptimizerConfig) -> Vec<Params> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 0xC0FFEE));
    let base = cfg.initial.to_array();
    let mut out = vec![cfg.initial];
    for _ in 1..cfg.starts.max(1) {
        let mut a = base;
        for (i, v) in a.iter_mut().enumerate() {
            let u: f64 = rng.random_range(-0.5..0.5);
            *v = if i == RHO || *v != 0.0 { *v * (1.0 + u) } else { u };
        }
        out.push(Params::from_array(a));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamInterval {
    pub name: &'static str,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

fn point_intervals(p: &Params) -> Vec<ParamInterval> {
    Params::NAMES
        .iter()
        .zip(p.to_array())
        .map(|(name, v)| ParamInterval {
            name,
            estimate: v,
            lower: v,
            upper: v,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub params: Params,
    /// Training sum of squared errors, USD².
    pub train_sse: f64,
    pub test_r2: Option<f64>,
    /// Bootstrap intervals; degenerate at the estimate until [`param_confidence`] runs.
    pub param_cis: Vec<ParamInterval>,
    pub iterations: usize,
    pub converged: bool,
    pub starts: usize,
    pub starts_diverged: usize,
    pub train_coverage: CoverageReport,
    pub test_coverage: CoverageReport,
    pub bootstrap_replicates: usize,
    pub bootstrap_dropped: usize,
    pub seed: u64,
}

/// Multi-start gradient-descent fit on the training observations of a tagged panel.
pub fn calibrate(
    model: &SimulationModel,
    panel: &[PanelObservation],
    cfg: &OptimizerConfig,
) -> Result<CalibrationResult, CalibrationError> {
    let train = LossProblem::new(
        model,
        panel.iter().filter(|p| p.split_tag == SplitTag::Train),
        cfg.corridor_weighted,
    );
    let test = LossProblem::new(model, panel.iter().filter(|p| p.split_tag == SplitTag::Test), false);
    if train.is_empty() {
        return Err(CalibrationError::EmptyTrain);
    }
    let starts = start_points(cfg);
    let mut best: Option<DescentRun> = None;
    let mut diverged = 0;
    let mut diagnostics = Vec::new();
    for (i, s) in starts.iter().enumerate() {
        match descend(&train, s, cfg) {
            Some(run) => {
                log::info!(
                    "start {i}: loss {:.3e} after {} iterations (converged: {})",
                    run.loss,
                    run.iterations,
                    run.converged
                );
                if best.as_ref().is_none_or(|b| run.loss < b.loss) {
                    best = Some(run);
                }
            }
            None => {
                diverged += 1;
                diagnostics.push(format!("start {i}: non-finite loss"));
            }
        }
    }
    let mut best = best.ok_or_else(|| CalibrationError::AllStartsDiverged {
        starts: starts.len(),
        diagnostics: diagnostics.join("; "),
    })?;
    best.params = best.params.canonical();
    let train_sse = LossProblem::new(
        model,
        panel.iter().filter(|p| p.split_tag == SplitTag::Train),
        false,
    )
    .loss(&best.params);
    Ok(CalibrationResult {
        params: best.params,
        train_sse,
        test_r2: test.r_squared(&best.params),
        param_cis: point_intervals(&best.params),
        iterations: best.iterations,
        converged: best.converged,
        starts: starts.len(),
        starts_diverged: diverged,
        train_coverage: train.coverage.clone(),
        test_coverage: test.coverage.clone(),
        bootstrap_replicates: 0,
        bootstrap_dropped: 0,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapReport {
    pub intervals: Vec<ParamInterval>,
    pub replicates: usize,
    pub dropped: usize,
}

/// Nonparametric bootstrap: resample training observations with replacement,
/// refit briefly from the point estimate, and take 2.5 / 97.5 percentiles of each
/// parameter. Intervals are widened if needed so they contain the estimate.
pub fn param_confidence(
    result: &CalibrationResult,
    panel: &[PanelObservation],
    model: &SimulationModel,
    cfg: &OptimizerConfig,
    replicates: usize,
    iterations: usize,
) -> BootstrapReport {
    let train = LossProblem::new(
        model,
        panel.iter().filter(|p| p.split_tag == SplitTag::Train),
        cfg.corridor_weighted,
    );
    let n = train.len();
    let short = OptimizerConfig {
        max_iter: iterations,
        ..cfg.clone()
    };
    let mut estimates: Vec<[f64; N_PARAMS]> = Vec::new();
    let mut dropped = 0;
    for b in 0..replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 0xB007 + b as u64));
        let mut mult = vec![0usize; n];
        for _ in 0..n {
            mult[rng.random_range(0..n)] += 1;
        }
        let problem = train.resampled(&mult);
        match descend(&problem, &result.params, &short) {
            Some(run) if run.params.to_array().iter().all(|v| v.is_finite()) => {
                // Same kernel representation as the point estimate.
                let mut p = run.params.canonical();
                p.shift += 12.0 * ((result.params.shift - p.shift) / 12.0).round();
                estimates.push(p.to_array())
            }
            _ => dropped += 1,
        }
    }
    let point = result.params.to_array();
    let intervals = Params::NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            if estimates.is_empty() {
                return ParamInterval {
                    name,
                    estimate: point[j],
                    lower: point[j],
                    upper: point[j],
                };
            }
            let mut v: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
            v.sort_by(|a, b| a.total_cmp(b));
            ParamInterval {
                name,
                estimate: point[j],
                lower: percentile(&v, 0.025).min(point[j]),
                upper: percentile(&v, 0.975).max(point[j]),
            }
        })
        .collect();
    BootstrapReport {
        intervals,
        replicates: estimates.len(),
        dropped,
    }
}
