//! Experiment configuration: a flat `key = value` text format.
//!
//! The format is deliberately plain so configs diff cleanly and can be
//! edited by hand. `#` starts a comment, keys are documented on
//! [`ExperimentConfig`], and every key round-trips through
//! [`ExperimentConfig::to_text`] / [`ExperimentConfig::parse`].

use crate::error::{Error, Result};
use crate::inference::OptimizationConfig;
use crate::io::{format_prior, parse_prior};
use crate::projections::CvConfig;
use crate::rng::{derive_seed, streams};
use crate::simulators::PriorSpec;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// Which generative model an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Ricker,
    Gk,
    Toy,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Ricker => "ricker",
            Model::Gk => "gk",
            Model::Toy => "toy",
        }
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ricker" => Ok(Model::Ricker),
            "gk" => Ok(Model::Gk),
            "toy" => Ok(Model::Toy),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// The seven dimension-reduction strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Reg,
    LocalReg,
    LocalRegOpt,
    Pls,
    PlsOpt,
    LocalPls,
    LocalPlsOpt,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Reg,
        Method::LocalReg,
        Method::LocalRegOpt,
        Method::Pls,
        Method::PlsOpt,
        Method::LocalPls,
        Method::LocalPlsOpt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Reg => "Reg",
            Method::LocalReg => "localReg",
            Method::LocalRegOpt => "localRegopt",
            Method::Pls => "PLS",
            Method::PlsOpt => "PLSopt",
            Method::LocalPls => "localPLS",
            Method::LocalPlsOpt => "localPLSopt",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial transformation family for the local regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegInitial {
    /// Global regression predictions (the usual choice).
    Regression,
    /// All candidate summaries directly.
    Identity,
}

/// g-and-k specific settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GkSettings {
    /// Observations per dataset.
    pub n_obs: usize,
    /// Number of quantile summaries.
    pub n_quantiles: usize,
    /// True `(A, B, g, k)` for the test datasets.
    pub true_params: [f64; 4],
}

impl Default for GkSettings {
    fn default() -> Self {
        Self {
            n_obs: 10_000,
            n_quantiles: 200,
            true_params: [3.0, 1.0, 2.0, 0.5],
        }
    }
}

/// Ricker specific settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RickerSettings {
    pub steps: usize,
    pub burn_in: usize,
    /// True `log r` for the test datasets.
    pub true_log_r: f64,
    /// True `phi` for the test datasets; `log sigma_e` runs over an even
    /// grid spanning its prior range.
    pub true_phi: f64,
}

impl Default for RickerSettings {
    fn default() -> Self {
        Self {
            steps: 100,
            burn_in: 50,
            true_log_r: 3.8,
            true_phi: 10.0,
        }
    }
}

/// Toy-model specific settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySettings {
    pub noise_sd: f64,
    pub true_theta: f64,
}

impl Default for ToySettings {
    fn default() -> Self {
        Self {
            noise_sd: 1.0,
            true_theta: 8.0,
        }
    }
}

/// A full experiment description.
///
/// Text keys: `model`, `n_sims`, `n_test`, `seed`, `methods`,
/// `alpha_grid`, `pls_components_grid`, `n_valid`, `n_post`, `n_final`,
/// `max_components`, `cv_folds`, `cv_threshold`, `reg_initial`, `prior`,
/// `table`, `diagnostics_dir`, `gk_n_obs`, `gk_n_quantiles`, `gk_true`,
/// `ricker_steps`, `ricker_burn_in`, `ricker_true_log_r`,
/// `ricker_true_phi`, `toy_noise_sd`, `toy_true_theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub n_sims: usize,
    pub n_test: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Candidate neighborhood fractions for the optimized local methods.
    pub alpha_grid: Vec<f64>,
    /// Candidate component counts for the optimized PLS methods (both the
    /// local and the initial transformation).
    pub pls_components_grid: Vec<usize>,
    pub opt: OptimizationConfig,
    pub max_components: usize,
    pub cv_folds: usize,
    pub cv_threshold: f64,
    pub reg_initial: RegInitial,
    /// Prior override; each model has a standard default.
    pub prior: Option<PriorSpec>,
    /// Load this table instead of simulating one.
    pub table: Option<PathBuf>,
    /// When set, optimizer diagnostics are written here during a run.
    pub diagnostics_dir: Option<PathBuf>,
    pub gk: GkSettings,
    pub ricker: RickerSettings,
    pub toy: ToySettings,
}

impl ExperimentConfig {
    /// Desk-scale defaults for a model.
    pub fn defaults_for(model: Model) -> Self {
        Self {
            model,
            n_sims: 10_000,
            n_test: 20,
            seed: 1,
            methods: vec![Method::Reg, Method::Pls],
            alpha_grid: crate::inference::CandidateGrid::default_alphas(),
            pls_components_grid: crate::inference::CandidateGrid::default_components(),
            opt: OptimizationConfig::default(),
            max_components: 15,
            cv_folds: 10,
            cv_threshold: 0.01,
            reg_initial: RegInitial::Regression,
            prior: None,
            table: None,
            diagnostics_dir: None,
            gk: GkSettings::default(),
            ricker: RickerSettings::default(),
            toy: ToySettings::default(),
        }
    }

    /// Cross-validation settings derived from this config.
    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            max_components: self.max_components,
            folds: self.cv_folds,
            threshold_frac: self.cv_threshold,
            fold_seed: derive_seed(self.seed, streams::CV_FOLDS, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sims == 0 || self.n_test == 0 {
            return Err(Error::Config("n_sims and n_test must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        if self.alpha_grid.is_empty() || self.pls_components_grid.is_empty() {
            return Err(Error::Config("candidate grids must not be empty".into()));
        }
        for &a in &self.alpha_grid {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Config(format!("alpha {a} outside (0, 1]")));
            }
        }
        if self.opt.n_valid == 0 || self.opt.n_post == 0 || self.opt.n_final == 0 {
            return Err(Error::Config(
                "n_valid, n_post and n_final must be positive".into(),
            ));
        }
        if self.opt.n_valid + self.opt.n_post > self.n_sims {
            return Err(Error::Config(format!(
                "n_valid + n_post = {} exceeds n_sims = {}",
                self.opt.n_valid + self.opt.n_post,
                self.n_sims
            )));
        }
        if self.model == Model::Gk && self.gk.n_quantiles > self.gk.n_obs {
            return Err(Error::Config(format!(
                "gk_n_quantiles = {} exceeds gk_n_obs = {}",
                self.gk.n_quantiles, self.gk.n_obs
            )));
        }
        if self.model == Model::Ricker && self.ricker.steps <= self.ricker.burn_in {
            return Err(Error::Config("ricker_steps must exceed ricker_burn_in".into()));
        }
        Ok(())
    }

    /// Serializes to the text format; `parse` inverts this exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("model", self.model.name().into());
        kv("n_sims", self.n_sims.to_string());
        kv("n_test", self.n_test.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "methods",
            self.methods
                .iter()
                .map(Method::name)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("alpha_grid", join_floats(&self.alpha_grid));
        kv(
            "pls_components_grid",
            self.pls_components_grid
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("n_valid", self.opt.n_valid.to_string());
        kv("n_post", self.opt.n_post.to_string());
        kv("n_final", self.opt.n_final.to_string());
        kv("max_components", self.max_components.to_string());
        kv("cv_folds", self.cv_folds.to_string());
        kv("cv_threshold", self.cv_threshold.to_string());
        kv(
            "reg_initial",
            match self.reg_initial {
                RegInitial::Regression => "regression".into(),
                RegInitial::Identity => "identity".into(),
            },
        );
        if let Some(prior) = &self.prior {
            kv("prior", format_prior(prior));
        }
        if let Some(table) = &self.table {
            kv("table", table.display().to_string());
        }
        if let Some(dir) = &self.diagnostics_dir {
            kv("diagnostics_dir", dir.display().to_string());
        }
        kv("gk_n_obs", self.gk.n_obs.to_string());
        kv("gk_n_quantiles", self.gk.n_quantiles.to_string());
        kv("gk_true", join_floats(&self.gk.true_params));
        kv("ricker_steps", self.ricker.steps.to_string());
        kv("ricker_burn_in", self.ricker.burn_in.to_string());
        kv("ricker_true_log_r", self.ricker.true_log_r.to_string());
        kv("ricker_true_phi", self.ricker.true_phi.to_string());
        kv("toy_noise_sd", self.toy.noise_sd.to_string());
        kv("toy_true_theta", self.toy.true_theta.to_string());
        out
    }

    /// Parses the text format. Unknown keys are errors so typos fail loudly.
    pub fn parse(text: &str) -> Result<Self> {
        let mut model: Option<Model> = None;
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", line_no + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key == "model" {
                model = Some(value.parse()?);
            } else {
                pairs.push((key, value));
            }
        }
        let model = model.ok_or_else(|| Error::Config("missing 'model' key".into()))?;
        let mut config = Self::defaults_for(model);

        for (key, value) in pairs {
            match key.as_str() {
                "n_sims" => config.n_sims = parse_num(&key, &value)?,
                "n_test" => config.n_test = parse_num(&key, &value)?,
                "seed" => config.seed = parse_num(&key, &value)?,
                "methods" => {
                    config.methods = value
                        .split(',')
                        .map(|m| m.trim().parse())
                        .collect::<Result<Vec<_>>>()?
                }
                "alpha_grid" => config.alpha_grid = parse_float_list(&key, &value)?,
                "pls_components_grid" => {
                    config.pls_components_grid = value
                        .split(',')
                        .map(|v| parse_num(&key, v.trim()))
                        .collect::<Result<Vec<_>>>()?
                }
                "n_valid" => config.opt.n_valid = parse_num(&key, &value)?,
                "n_post" => config.opt.n_post = parse_num(&key, &value)?,
                "n_final" => config.opt.n_final = parse_num(&key, &value)?,
                "max_components" => config.max_components = parse_num(&key, &value)?,
                "cv_folds" => config.cv_folds = parse_num(&key, &value)?,
                "cv_threshold" => config.cv_threshold = parse_num(&key, &value)?,
                "reg_initial" => {
                    config.reg_initial = match value.as_str() {
                        "regression" => RegInitial::Regression,
                        "identity" => RegInitial::Identity,
                        other => {
                            return Err(Error::Config(format!("unknown reg_initial '{other}'")))
                        }
                    }
                }
                "prior" => config.prior = Some(parse_prior(&value)?),
                "table" => config.table = Some(PathBuf::from(value)),
                "diagnostics_dir" => config.diagnostics_dir = Some(PathBuf::from(value)),
                "gk_n_obs" => config.gk.n_obs = parse_num(&key, &value)?,
                "gk_n_quantiles" => config.gk.n_quantiles = parse_num(&key, &value)?,
                "gk_true" => {
                    let v = parse_float_list(&key, &value)?;
                    if v.len() != 4 {
                        return Err(Error::Config("gk_true needs 4 values".into()));
                    }
                    config.gk.true_params = [v[0], v[1], v[2], v[3]];
                }
                "ricker_steps" => config.ricker.steps = parse_num(&key, &value)?,
                "ricker_burn_in" => config.ricker.burn_in = parse_num(&key, &value)?,
                "ricker_true_log_r" => config.ricker.true_log_r = parse_num(&key, &value)?,
                "ricker_true_phi" => config.ricker.true_phi = parse_num(&key, &value)?,
                "toy_noise_sd" => config.toy.noise_sd = parse_num(&key, &value)?,
                "toy_true_theta" => config.toy.true_theta = parse_num(&key, &value)?,
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        Ok(config)
    }
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_float_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_num(key, v.trim()))
        .collect()
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for key '{key}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let mut config = ExperimentConfig::defaults_for(Model::Gk);
        config.n_sims = 25_000;
        config.methods = vec![Method::Reg, Method::LocalRegOpt, Method::LocalPlsOpt];
        config.gk.n_quantiles = 25;
        config.prior = Some(PriorSpec::new(vec![(0.0, 10.0); 4]).unwrap());
        config.table = Some(PathBuf::from("cached.bin"));
        let text = config.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn parses_comments_and_rejects_unknown_keys() {
        let parsed = ExperimentConfig::parse(
            "# an experiment\nmodel = toy\nn_sims = 1000 # inline comment\n",
        )
        .unwrap();
        assert_eq!(parsed.model, Model::Toy);
        assert_eq!(parsed.n_sims, 1000);

        assert!(ExperimentConfig::parse("model = toy\nn_simz = 7\n").is_err());
        assert!(ExperimentConfig::parse("n_sims = 7\n").is_err()); // no model
        assert!(ExperimentConfig::parse("model = warp\n").is_err());
    }

    #[test]
    fn dimensionality_sweep_configs_all_validate() {
        // The benchmark sweep: every table size and summary count combination.
        for &n_sims in &[25_000usize, 50_000, 100_000, 200_000, 400_000, 800_000] {
            for &n_quantiles in &[25usize, 50, 100, 200] {
                let mut config = ExperimentConfig::defaults_for(Model::Gk);
                config.n_sims = n_sims;
                config.gk.n_quantiles = n_quantiles;
                config.validate().unwrap();
                let back = ExperimentConfig::parse(&config.to_text()).unwrap();
                assert_eq!(config, back);
            }
        }
    }

    #[test]
    fn validation_catches_inconsistencies() {
        let mut config = ExperimentConfig::defaults_for(Model::Gk);
        config.gk.n_quantiles = config.gk.n_obs + 1;
        assert!(config.validate().is_err());

        let mut config = ExperimentConfig::defaults_for(Model::Ricker);
        config.ricker.burn_in = config.ricker.steps;
        assert!(config.validate().is_err());

        let mut config = ExperimentConfig::defaults_for(Model::Toy);
        config.n_sims = 100; // n_valid + n_post = 220 > 100
        assert!(config.validate().is_err());

        let mut config = ExperimentConfig::defaults_for(Model::Toy);
        config.methods.clear();
        assert!(config.validate().is_err());
    }

    #[test]
    fn method_names_match_the_reporting_convention() {
        let names: Vec<&str> = Method::ALL.iter().map(Method::name).collect();
        assert_eq!(
            names,
            ["Reg", "localReg", "localRegopt", "PLS", "PLSopt", "localPLS", "localPLSopt"]
        );
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }
}
