//! Subcommands. Each stage reads its inputs from the work directory, checks
//! them, and only then writes its outputs (each atomically).

use std::path::{Path, PathBuf};

use lcs_core::causal_states::{self, EpsilonModel};
use lcs_core::dynamics::{self, ForecastOptions};
use lcs_core::{format, lattice, Grid, SpacetimeField, StateField};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result, StageExt};
use crate::metrics;
use crate::render;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Train,
    Reconstruct,
    Forecast,
    Render,
    Metrics,
    All,
}

pub const X_TRAIN: &str = "X_train.lcsf";
pub const X_TRUTH: &str = "X_truth.lcsf";
pub const MODEL: &str = "model.lcsm";
pub const S_TRAIN: &str = "S_train.lcsf";
pub const RULE: &str = "rule.lcsr";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const X_BAR: &str = "X_bar.lcsf";
pub const X_BAR_MASK: &str = "X_bar_mask.lcsf";
pub const S_TILDE: &str = "S_tilde.lcsf";
pub const X_TILDE: &str = "X_tilde.lcsf";
pub const FORECAST_REPORT: &str = "forecast_report.json";
pub const METRICS: &str = "metrics.json";
pub const COMPOSITE: &str = "composite.png";

pub struct Stage<'a> {
    pub config: &'a RunConfig,
    pub work: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_states: usize,
    pub past_clusters: usize,
    pub future_clusters: usize,
    pub occupancy: Vec<f64>,
    pub top4_coverage: f64,
    pub margin_rows: Vec<usize>,
    pub rule_entries: usize,
    pub rule_transitions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub start_row: usize,
    pub steps: usize,
    pub fallbacks: Vec<usize>,
    pub fallback_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_states: usize,
    pub reconstruction_mae: Option<f64>,
    pub reconstruction_coverage: f64,
    pub occupancy: Vec<f64>,
    pub top4_coverage: f64,
    pub domain_states: Vec<i32>,
    pub fallback_rate: Vec<f64>,
    /// Entry `k` is lead time `k + 1`.
    pub latent_accuracy: Vec<Option<f64>>,
    pub marginal_baseline: Vec<Option<f64>>,
    pub domain_persistence: Vec<Option<f64>>,
    pub domain_persistence_score: Option<f64>,
    pub observable_mae: Vec<f64>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::io(path.display().to_string(), std::io::Error::other(e)))
}

fn write_json<T: Serialize>(path: &Path, value: &T, stage: &'static str) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    format::write_atomic(path, &bytes).stage(stage)
}

fn margin_rows(states: &StateField) -> Vec<usize> {
    (0..states.rows()).filter(|&t| states.is_margin_row(t)).collect()
}

impl<'a> Stage<'a> {
    pub fn new(config: &'a RunConfig, work: impl Into<PathBuf>) -> Self {
        Self { config, work: work.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.work.join(name)
    }

    fn observable(&self, name: &str, stage: &'static str) -> Result<SpacetimeField> {
        format::read_grid(&self.path(name)).stage(stage)
    }

    fn states(&self, name: &str, stage: &'static str) -> Result<StateField> {
        format::read_grid(&self.path(name)).stage(stage)
    }

    fn model(&self, stage: &'static str) -> Result<EpsilonModel> {
        format::read_model(&self.path(MODEL)).stage(stage)
    }

    pub fn run(&self, command: Command) -> Result<()> {
        std::fs::create_dir_all(&self.work)
            .map_err(|e| CliError::io(format!("creating {}", self.work.display()), e))?;
        match command {
            Command::Simulate => self.simulate(),
            Command::Train => self.train().map(|_| ()),
            Command::Reconstruct => self.reconstruct(),
            Command::Forecast => self.forecast().map(|_| ()),
            Command::Render => self.render(),
            Command::Metrics => self.metrics().map(|_| ()),
            Command::All => {
                self.simulate()?;
                self.train()?;
                self.reconstruct()?;
                self.forecast()?;
                self.render()?;
                self.metrics().map(|_| ())
            }
        }
    }

    /// Writes the training field and its deterministic continuation.
    pub fn simulate(&self) -> Result<()> {
        let cfg = self.config;
        let field = lattice::evolve(&cfg.lattice(), cfg.transient, cfg.train_steps + cfg.truth_steps)
            .stage("simulate")?;
        let train = field.slice_rows(0, cfg.train_steps);
        let truth = field.slice_rows(cfg.train_steps, field.rows());
        format::write_grid(&self.path(X_TRAIN), &train).stage("simulate")?;
        format::write_grid(&self.path(X_TRUTH), &truth).stage("simulate")
    }

    pub fn train(&self) -> Result<TrainReport> {
        let cfg = self.config;
        let x = self.observable(X_TRAIN, "train")?;
        x.validate_unit_range().stage("train")?;
        let model = causal_states::fit(&x, &cfg.shape(), &cfg.fit_options()).stage("train")?;
        let states = model.encode(&x).stage("train")?;
        let rule = dynamics::estimate_phi(&states, cfg.c).stage("train")?;
        let occupancy = metrics::occupancy_fractions(&states, model.n_states());
        let report = TrainReport {
            n_states: model.n_states(),
            past_clusters: model.gamma_minus().k(),
            future_clusters: model.gamma_plus().k(),
            top4_coverage: metrics::top_coverage(&occupancy, metrics::DOMAIN_STATES),
            occupancy,
            margin_rows: margin_rows(&states),
            rule_entries: rule.len(),
            rule_transitions: rule.total_count(),
        };
        format::write_model(&self.path(MODEL), &model).stage("train")?;
        format::write_grid(&self.path(S_TRAIN), &states).stage("train")?;
        format::write_rule(&self.path(RULE), &rule).stage("train")?;
        write_json(&self.path(TRAIN_REPORT), &report, "train")?;
        Ok(report)
    }

    pub fn reconstruct(&self) -> Result<()> {
        let model = self.model("reconstruct")?;
        let states = self.states(S_TRAIN, "reconstruct")?;
        let recon = model.decode(&states, self.config.decode_seed).stage("reconstruct")?;
        let mask = recon.covered.map(i32::from);
        format::write_grid(&self.path(X_BAR), &recon.field).stage("reconstruct")?;
        format::write_grid(&self.path(X_BAR_MASK), &mask).stage("reconstruct")
    }

    pub fn forecast(&self) -> Result<ForecastReport> {
        let cfg = self.config;
        let model = self.model("forecast")?;
        let rule = format::read_rule(&self.path(RULE)).stage("forecast")?;
        let states = self.states(S_TRAIN, "forecast")?;
        let opts = ForecastOptions {
            steps: cfg.forecast_steps,
            seed: cfg.forecast_seed,
            decode_seed: cfg.decode_seed,
            spatial_lambda: cfg.spatial_lambda,
        };
        let fc = dynamics::forecast(&model, &rule, &states, &opts).stage("forecast")?;
        let report = ForecastReport {
            start_row: fc.start_row,
            steps: cfg.forecast_steps,
            fallback_rate: fc.evolution.fallback_rates(),
            fallbacks: fc.evolution.fallbacks.clone(),
        };
        format::write_grid(&self.path(S_TILDE), &fc.evolution.states).stage("forecast")?;
        format::write_grid(&self.path(X_TILDE), &fc.observable.field).stage("forecast")?;
        write_json(&self.path(FORECAST_REPORT), &report, "forecast")?;
        Ok(report)
    }

    pub fn render(&self) -> Result<()> {
        let sites = self.config.render_sites;
        let x_train = self.observable(X_TRAIN, "render")?;
        let x_truth = self.observable(X_TRUTH, "render")?;
        let x_bar = self.observable(X_BAR, "render")?;
        let mask: Grid<i32> = format::read_grid(&self.path(X_BAR_MASK)).stage("render")?;
        let x_tilde = self.observable(X_TILDE, "render")?;
        let s_train = self.states(S_TRAIN, "render")?;
        let s_tilde = self.states(S_TILDE, "render")?;
        if mask.shape() != x_bar.shape() {
            return Err(CliError::Invalid("reconstruction mask does not match X_bar".into()));
        }

        let panels = [
            render::render_observable(&x_train, None, sites),
            render::render_states(&s_train, sites)?,
            render::render_observable(&x_bar, Some(&mask.map(|m| m != 0)), sites),
            render::render_observable(&x_truth, None, sites),
            render::render_states(&s_tilde, sites)?,
            render::render_observable(&x_tilde, None, sites),
        ];
        let names = ["X_train", "S_train", "X_bar", "X_truth", "S_tilde", "X_tilde"];
        for (name, img) in names.iter().zip(&panels) {
            render::write_png(&self.path(&format!("{name}.png")), img)?;
        }
        let [a, b, c, d, e, f] = &panels;
        render::write_png(&self.path(COMPOSITE), &render::composite([a, b, c], [d, e, f]))
    }

    pub fn metrics(&self) -> Result<MetricsReport> {
        let model = self.model("metrics")?;
        let x_train = self.observable(X_TRAIN, "metrics")?;
        let x_truth = self.observable(X_TRUTH, "metrics")?;
        let x_bar = self.observable(X_BAR, "metrics")?;
        let mask: Grid<i32> = format::read_grid(&self.path(X_BAR_MASK)).stage("metrics")?;
        let s_train = self.states(S_TRAIN, "metrics")?;
        let s_tilde = self.states(S_TILDE, "metrics")?;
        let x_tilde = self.observable(X_TILDE, "metrics")?;
        let fc: ForecastReport = read_json(&self.path(FORECAST_REPORT))?;
        if x_bar.shape() != x_train.shape() || mask.shape() != x_train.shape() {
            return Err(CliError::Invalid("reconstruction does not match X_train".into()));
        }

        let covered = mask.map(|m| m != 0);
        let n = model.n_states();
        let occupancy = metrics::occupancy_fractions(&s_train, n);
        let domain = metrics::top_states(&occupancy, metrics::DOMAIN_STATES);

        // Reference latent field: the training model applied to train ++ truth.
        let full = x_train.concat_rows(&x_truth).stage("metrics")?;
        let reference = model.encode(&full).stage("metrics")?;
        let offset = fc.start_row + 1;
        let scores = metrics::lead_scores(&s_tilde, &reference, offset, &occupancy, &domain);

        let report = MetricsReport {
            n_states: n,
            reconstruction_mae: metrics::reconstruction_mae(&x_train, &x_bar, &covered),
            reconstruction_coverage: covered.data().iter().filter(|&&c| c).count() as f64
                / covered.data().len().max(1) as f64,
            top4_coverage: metrics::top_coverage(&occupancy, metrics::DOMAIN_STATES),
            occupancy,
            domain_states: domain,
            fallback_rate: fc.fallback_rate,
            domain_persistence_score: metrics::mean(&scores.domain_persistence),
            latent_accuracy: scores.accuracy,
            marginal_baseline: scores.baseline,
            domain_persistence: scores.domain_persistence,
            observable_mae: metrics::observable_errors(&x_tilde, &full, offset),
        };
        write_json(&self.path(METRICS), &report, "metrics")?;
        Ok(report)
    }
}
