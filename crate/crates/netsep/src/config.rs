//! Experiment configuration, read from JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use netsep_core::classifiers::{ConvNetArch, SvmParams, TrainHyper};
use netsep_core::estimators::EstimatorKind;
use netsep_core::features::LagWindow;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::io::read_to_string;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Er {
        nodes: usize,
        p: f64,
        seed: u64,
    },
    Binomial {
        nodes: usize,
        p: f64,
        seed: u64,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        one_based: bool,
        #[serde(default = "yes")]
        undirected: bool,
    },
}

fn yes() -> bool {
    true
}

impl Default for GraphSource {
    fn default() -> Self {
        GraphSource::Er {
            nodes: 100,
            p: 0.5,
            seed: 1,
        }
    }
}

/// A graph used only for evaluation, named in the `graph_id` column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestGraph {
    pub id: String,
    #[serde(flatten)]
    pub source: GraphSource,
}

/// The observed set: the first `k` nodes or an explicit sorted list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observed {
    First(usize),
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Estimator(EstimatorKind),
    Svm,
    Cnn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Estimator(k) => k.name(),
            Method::Svm => "svm",
            Method::Cnn => "cnn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(Method::Svm),
            "cnn" => Ok(Method::Cnn),
            _ => s
                .parse::<EstimatorKind>()
                .map(Method::Estimator)
                .map_err(|_| config(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lags {
    pub min: i64,
    pub max: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSweep {
    pub sigma2_grid: Vec<f64>,
    /// Sample count; defaults to the largest `n_grid` entry.
    pub n: Option<usize>,
}

impl Default for NoiseSweep {
    fn default() -> Self {
        Self {
            sigma2_grid: vec![0.1, 0.25, 0.5, 1.0, 2.0],
            n: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub reg: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    /// Stronger regularization than the library default: the training
    /// features are noisy and far from separable at desk sample counts.
    fn default() -> Self {
        Self {
            reg: 1e-2,
            epochs: SvmParams::default().epochs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnnConfig {
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub patience: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        let a = ConvNetArch::default();
        let h = TrainHyper::default();
        Self {
            conv1_filters: a.conv1_filters,
            conv1_kernel: a.conv1_kernel,
            conv2_filters: a.conv2_filters,
            conv2_kernel: a.conv2_kernel,
            hidden: a.hidden,
            learning_rate: h.learning_rate,
            batch_size: h.batch_size,
            epochs: h.epochs,
            validation_fraction: h.validation_fraction,
            patience: h.patience,
        }
    }
}

impl CnnConfig {
    pub fn arch(&self) -> ConvNetArch {
        ConvNetArch {
            conv1_filters: self.conv1_filters,
            conv1_kernel: self.conv1_kernel,
            conv2_filters: self.conv2_filters,
            conv2_kernel: self.conv2_kernel,
            hidden: self.hidden,
        }
    }

    pub fn hyper(&self) -> TrainHyper {
        TrainHyper {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            validation_fraction: self.validation_fraction,
            patience: self.patience,
        }
    }
}

/// Training protocol: features from the configured graph at every
/// `n_values` entry, `sims_per_n` independent simulations each, pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub n_values: Vec<usize>,
    pub sims_per_n: usize,
    pub seed: u64,
    pub svm: SvmConfig,
    pub cnn: CnnConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_values: vec![200, 500, 1000, 2000, 5000],
            sims_per_n: 2,
            seed: 0,
            svm: SvmConfig::default(),
            cnn: CnnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub alpha: f64,
    pub alpha1: f64,
    pub sigma2: f64,
    pub observed: Observed,
    pub n_grid: Vec<usize>,
    pub runs: usize,
    pub methods: Vec<String>,
    /// Model files keyed by method: `svm`, `cnn`, and for the augmentation
    /// sweep `features` and `features+granger`.
    pub models: BTreeMap<String, PathBuf>,
    pub base_seed: u64,
    pub lags: Lags,
    pub burn_in: usize,
    pub noise: NoiseSweep,
    pub test_graphs: Vec<TestGraph>,
    pub training: TrainingConfig,
    /// Also compute hull-distance gaps for classifier methods (slow).
    pub tensor_gap: bool,
    /// Fill `wall_time_ms`; outputs then differ between reruns.
    pub record_timing: bool,
    /// Worker threads; all logical cores when absent.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: GraphSource::default(),
            alpha: 0.9,
            alpha1: 0.9,
            sigma2: 0.5,
            observed: Observed::First(20),
            n_grid: vec![200, 500, 1000, 2000, 5000],
            runs: 50,
            methods: ["granger", "one_lag", "residual", "r1_minus_r3"]
                .map(String::from)
                .to_vec(),
            models: BTreeMap::new(),
            base_seed: 0,
            lags: Lags { min: -100, max: 100 },
            burn_in: 1000,
            noise: NoiseSweep::default(),
            test_graphs: Vec::new(),
            training: TrainingConfig::default(),
            tensor_gap: false,
            record_timing: false,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let GraphSource::File { path, .. } = &mut self.graph {
            fix(path);
        }
        for g in &mut self.test_graphs {
            if let GraphSource::File { path, .. } = &mut g.source {
                fix(path);
            }
        }
        self.models.values_mut().for_each(fix);
    }

    pub fn lag_window(&self) -> Result<LagWindow> {
        LagWindow::new(self.lags.min, self.lags.max)
            .map_err(|e| config(format!("lags: {e}")))
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = self
            .methods
            .iter()
            .map(|m| m.parse())
            .collect::<Result<_>>()?;
        let before = out.len();
        out.sort();
        out.dedup();
        if out.len() != before {
            return Err(config("methods contains duplicates"));
        }
        Ok(out)
    }

    pub fn n_max(&self) -> usize {
        *self.n_grid.last().expect("validated n_grid")
    }

    pub fn noise_n(&self) -> usize {
        self.noise.n.unwrap_or_else(|| self.n_max())
    }

    pub fn validate(&self) -> Result<()> {
        check_source(&self.graph, "graph")?;
        for g in &self.test_graphs {
            if g.id.is_empty() || g.id.contains([',', '"', '\n']) {
                return Err(config(format!("test graph id '{}' must be non-empty plain text", g.id)));
            }
            check_source(&g.source, &format!("test graph '{}'", g.id))?;
        }
        if !(0.0 < self.alpha1 && self.alpha1 <= self.alpha && self.alpha < 1.0) {
            return Err(config("need 0 < alpha1 <= alpha < 1"));
        }
        positive(self.sigma2, "sigma2")?;
        match &self.observed {
            Observed::First(0) => return Err(config("observed must name at least one node")),
            Observed::Nodes(v) if v.is_empty() || v.windows(2).any(|w| w[0] >= w[1]) => {
                return Err(config("observed nodes must be non-empty and strictly increasing"))
            }
            _ => {}
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config("n_grid must be non-empty and strictly increasing"));
        }
        if self.runs == 0 {
            return Err(config("runs must be at least 1"));
        }
        self.parsed_methods()?;
        let lags = self.lag_window()?;
        let reach = lags.reach();
        if self.n_grid[0] <= reach.max(3) {
            return Err(config(format!(
                "smallest n ({}) must exceed the lag reach {reach} and 3",
                self.n_grid[0]
            )));
        }
        for &s in &self.noise.sigma2_grid {
            positive(s, "noise.sigma2_grid entry")?;
        }
        if self.noise_n() <= reach.max(3) {
            return Err(config("noise.n must exceed the lag reach and 3"));
        }
        let t = &self.training;
        if t.n_values.is_empty() || t.n_values.iter().any(|&n| n <= reach.max(3)) {
            return Err(config("training.n_values must be non-empty and exceed the lag reach"));
        }
        if t.sims_per_n == 0 {
            return Err(config("training.sims_per_n must be at least 1"));
        }
        positive(t.svm.reg, "training.svm.reg")?;
        if t.svm.epochs == 0 {
            return Err(config("training.svm.epochs must be at least 1"));
        }
        let c = &t.cnn;
        positive(c.learning_rate, "training.cnn.learning_rate")?;
        if c.batch_size == 0 || c.epochs == 0 {
            return Err(config("training.cnn batch_size and epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&c.validation_fraction) {
            return Err(config("training.cnn.validation_fraction must lie in [0, 1)"));
        }
        if self.workers == Some(0) {
            return Err(config("workers must be at least 1"));
        }
        Ok(())
    }
}

fn positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config(format!("{name} must be positive, got {v}")))
    }
}

fn check_source(g: &GraphSource, name: &str) -> Result<()> {
    match *g {
        GraphSource::Er { nodes, p, .. } | GraphSource::Binomial { nodes, p, .. } => {
            if nodes < 2 {
                return Err(config(format!("{name}: nodes must be at least 2")));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(config(format!("{name}: p must lie in [0, 1], got {p}")));
            }
            Ok(())
        }
        GraphSource::File { .. } => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.lag_window().unwrap().len(), 201);
    }

    #[test]
    fn sources_and_observed_forms() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"graph": {"model": "file", "path": "g.txt"}, "observed": [1, 4, 9],
                "test_graphs": [{"id": "sparse", "model": "er", "nodes": 50, "p": 0.1, "seed": 3}]}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.graph,
            GraphSource::File {
                path: "g.txt".into(),
                one_based: false,
                undirected: true
            }
        );
        assert_eq!(cfg.observed, Observed::Nodes(vec![1, 4, 9]));
        assert_eq!(cfg.test_graphs[0].id, "sparse");
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            r#"{"runs": 0}"#,
            r#"{"n_grid": [500, 200]}"#,
            r#"{"graph": {"model": "er", "nodes": 10, "p": 1.5, "seed": 0}}"#,
            r#"{"methods": ["one_lag", "one_lag"]}"#,
            r#"{"methods": ["precision"]}"#,
            r#"{"alpha": 0.5, "alpha1": 0.9}"#,
            r#"{"n_grid": [50]}"#,
        ];
        for text in bad {
            let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"rnus": 3}"#).is_err());
    }
}
