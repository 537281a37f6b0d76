//! Flat `key = value` run configuration. `#` starts a comment; blank lines
//! are ignored; every key is optional and falls back to the default.

use std::path::{Path, PathBuf};

use lcs_core::causal_states::{DecodeWeighting, FitOptions};
use lcs_core::lattice::LatticeConfig;
use lcs_core::lightcone::LightconeShape;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // lattice
    pub omega: f64,
    pub kappa: f64,
    pub alpha_coupling: f64,
    pub size: usize,
    pub seed: u64,
    pub transient: usize,
    pub train_steps: usize,
    pub truth_steps: usize,
    // lightcones
    pub h_minus: usize,
    pub h_plus: usize,
    pub c: usize,
    pub tau: f64,
    // clustering
    pub k_past: usize,
    pub k_future: usize,
    pub chi2_alpha: f64,
    pub kmeans_seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub kmeans_restarts: usize,
    // decoding and dynamics
    pub decode_weighting: DecodeWeighting,
    pub decode_seed: u64,
    pub forecast_steps: usize,
    pub spatial_lambda: f64,
    pub forecast_seed: u64,
    // output
    pub render_sites: usize,
    pub work_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            omega: 0.5,
            kappa: 1.0,
            alpha_coupling: 1.0,
            size: 2000,
            seed: 0,
            transient: 300,
            train_steps: 200,
            truth_steps: 100,
            h_minus: 6,
            h_plus: 1,
            c: 1,
            tau: 1.0,
            k_past: 10,
            k_future: 40,
            chi2_alpha: 0.05,
            kmeans_seed: 0,
            max_iter: 100,
            rel_tol: 1e-6,
            kmeans_restarts: 1,
            decode_weighting: DecodeWeighting::Exponential,
            decode_seed: 0,
            forecast_steps: 100,
            spatial_lambda: 0.1,
            forecast_seed: 0,
            render_sites: 0,
            work_dir: PathBuf::from("work"),
        }
    }
}

fn parse<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("line {line}: invalid value {value:?} for {key}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {line}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::config(format!("line {line}: duplicate key {key}")));
            }
            cfg.set(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "omega" => self.omega = parse(line, key, value)?,
            "kappa" => self.kappa = parse(line, key, value)?,
            "alpha_coupling" => self.alpha_coupling = parse(line, key, value)?,
            "size" => self.size = parse(line, key, value)?,
            "seed" => self.seed = parse(line, key, value)?,
            "transient" => self.transient = parse(line, key, value)?,
            "train_steps" => self.train_steps = parse(line, key, value)?,
            "truth_steps" => self.truth_steps = parse(line, key, value)?,
            "h_minus" => self.h_minus = parse(line, key, value)?,
            "h_plus" => self.h_plus = parse(line, key, value)?,
            "c" => self.c = parse(line, key, value)?,
            "tau" => self.tau = parse(line, key, value)?,
            "k_past" => self.k_past = parse(line, key, value)?,
            "k_future" => self.k_future = parse(line, key, value)?,
            "chi2_alpha" => self.chi2_alpha = parse(line, key, value)?,
            "kmeans_seed" => self.kmeans_seed = parse(line, key, value)?,
            "max_iter" => self.max_iter = parse(line, key, value)?,
            "rel_tol" => self.rel_tol = parse(line, key, value)?,
            "kmeans_restarts" => self.kmeans_restarts = parse(line, key, value)?,
            "decode_weighting" => {
                self.decode_weighting = match value {
                    "exp" => DecodeWeighting::Exponential,
                    "sqrt_exp" => DecodeWeighting::SqrtExponential,
                    _ => {
                        return Err(CliError::config(format!(
                            "line {line}: decode_weighting must be `exp` or `sqrt_exp`"
                        )))
                    }
                }
            }
            "decode_seed" => self.decode_seed = parse(line, key, value)?,
            "forecast_steps" => self.forecast_steps = parse(line, key, value)?,
            "spatial_lambda" => self.spatial_lambda = parse(line, key, value)?,
            "forecast_seed" => self.forecast_seed = parse(line, key, value)?,
            "render_sites" => self.render_sites = parse(line, key, value)?,
            "work_dir" => self.work_dir = PathBuf::from(value),
            _ => return Err(CliError::config(format!("line {line}: unknown key {key}"))),
        }
        Ok(())
    }

    pub fn lattice(&self) -> LatticeConfig {
        LatticeConfig {
            omega: self.omega,
            kappa: self.kappa,
            alpha: self.alpha_coupling,
            size: self.size,
            seed: self.seed,
        }
    }

    pub fn shape(&self) -> LightconeShape {
        LightconeShape { h_minus: self.h_minus, h_plus: self.h_plus, c: self.c, tau: self.tau }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            k_past: self.k_past,
            k_future: self.k_future,
            chi2_alpha: self.chi2_alpha,
            seed: self.kmeans_seed,
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            restarts: self.kmeans_restarts,
            weighting: self.decode_weighting,
        }
    }

    /// Re-checks every constraint of the modules the values feed.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: lcs_core::Error| CliError::config(e.to_string());
        self.lattice().validate().map_err(wrap)?;
        let shape = self.shape();
        shape.validate().map_err(wrap)?;
        if self.size < shape.min_sites() {
            return Err(CliError::config(format!(
                "size {} is below the lightcone width {}",
                self.size,
                shape.min_sites()
            )));
        }
        if self.train_steps == 0 {
            return Err(CliError::config("train_steps must be >= 1"));
        }
        if self.k_past == 0 || self.k_future == 0 {
            return Err(CliError::config("k_past and k_future must be >= 1"));
        }
        if !(self.chi2_alpha > 0.0 && self.chi2_alpha < 1.0) {
            return Err(CliError::config("chi2_alpha must lie in (0, 1)"));
        }
        if self.max_iter == 0 || self.rel_tol.is_nan() || self.rel_tol < 0.0 || self.kmeans_restarts == 0 {
            return Err(CliError::config("max_iter and kmeans_restarts must be >= 1 and rel_tol >= 0"));
        }
        if !(0.0..=1.0).contains(&self.spatial_lambda) {
            return Err(CliError::config("spatial_lambda must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_defaults() {
        let cfg = RunConfig::parse("# desk scale\nsize = 500   # sites\n\ntau=0\n").unwrap();
        assert_eq!(cfg.size, 500);
        assert_eq!(cfg.tau, 0.0);
        assert_eq!(cfg.k_future, 40);
    }

    #[test]
    fn errors_name_the_line() {
        let err = RunConfig::parse("size = 10\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("bogus"), "{err}");
        let err = RunConfig::parse("\nsize = ten\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(RunConfig::parse("size\n").unwrap_err().to_string().contains("line 1"));
        assert!(RunConfig::parse("c = 1\nc = 2\n").unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn module_constraints_are_rechecked() {
        assert!(RunConfig::parse("alpha_coupling = 1.5").is_err());
        assert!(RunConfig::parse("h_minus = 0").is_err());
        assert!(RunConfig::parse("train_steps = 0").is_err());
        assert!(RunConfig::parse("chi2_alpha = 0").is_err());
        assert!(RunConfig::parse("decode_weighting = linear").is_err());
        assert!(RunConfig::parse("size = 2").is_err());
    }
}
