//! Monte Carlo sweeps and classifier training.
//!
//! The graph is fixed per sweep and the noise is redrawn per run. Run `r`
//! simulates once with seed `base_seed + r` for the largest sample count and
//! every smaller `n` uses a prefix of that series, so all methods and sample
//! counts of a run see the same realization.

use std::collections::BTreeMap;
use std::time::Instant;

use netsep_core::classifiers::{
    cnn_train, gmm_fit_classify, svm_train, EpochLog, Provenance, SvmParams, TrainingSet,
};
use netsep_core::dynamics::{observe, simulate, ObservedSeries};
use netsep_core::estimators::{estimate, gap_matrix, gap_tensor};
use netsep_core::eval::accuracy_ordered;
use netsep_core::features::FeatureTensor;
use netsep_core::graph::{gen_binomial_directed, gen_er_undirected, laplacian_rule, Graph, InteractionMatrix, Support};
use netsep_core::seed::derive_seed;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, GraphSource, Method, Observed};
use crate::error::{config, Error, Result};
use crate::io::{load_edge_list, SweepRecord};
use crate::model::{Classifier, FeatureSpec, Model};

const TAG_TRAIN: u64 = u64::from_be_bytes(*b"\0\0\0train");
const TAG_VALIDATE: u64 = u64::from_be_bytes(*b"\0\0\0valid");
const TAG_FIT: u64 = u64::from_be_bytes(*b"\0\0\0\0\0fit");

pub fn load_graph(source: &GraphSource) -> Result<Graph> {
    Ok(match source {
        GraphSource::Er { nodes, p, seed } => gen_er_undirected(*nodes, *p, *seed)?,
        GraphSource::Binomial { nodes, p, seed } => gen_binomial_directed(*nodes, *p, *seed)?,
        GraphSource::File {
            path,
            one_based,
            undirected,
        } => load_edge_list(path, *one_based, *undirected)?.graph,
    })
}

/// A graph, its interaction matrix and the observed node set.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Graph,
    pub a: InteractionMatrix,
    pub observed: Vec<usize>,
    pub truth: Support,
}

impl Instance {
    pub fn new(graph: Graph, cfg: &ExperimentConfig) -> Result<Self> {
        let observed = match &cfg.observed {
            Observed::First(k) => (0..*k).collect::<Vec<_>>(),
            Observed::Nodes(v) => v.clone(),
        };
        if observed.last().is_some_and(|&m| m >= graph.node_count()) {
            return Err(config(format!(
                "observed set reaches node {} but the graph has {} nodes",
                observed.last().unwrap(),
                graph.node_count()
            )));
        }
        if observed.len() < 2 {
            return Err(config("at least two nodes must be observed"));
        }
        let a = laplacian_rule(&graph, cfg.alpha, cfg.alpha1)?;
        let truth = graph.support_on(&observed)?;
        Ok(Self {
            graph,
            a,
            observed,
            truth,
        })
    }

    pub fn from_source(source: &GraphSource, cfg: &ExperimentConfig) -> Result<Self> {
        Self::new(load_graph(source)?, cfg)
    }

    pub fn simulate(&self, sigma2: f64, n: usize, burn_in: usize, seed: u64) -> Result<ObservedSeries> {
        let y = simulate(&self.a, sigma2, n, burn_in, seed)?;
        Ok(observe(&y, &self.observed)?)
    }
}

fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        b = b.num_threads(w);
    }
    b.build().map_err(|e| config(format!("cannot start workers: {e}")))
}

/// Loads the model files of the classifier methods in `methods`.
pub fn load_models(cfg: &ExperimentConfig, methods: &[Method]) -> Result<BTreeMap<Method, Model>> {
    let mut out = BTreeMap::new();
    for &m in methods {
        if matches!(m, Method::Svm | Method::Cnn) {
            let path = cfg
                .models
                .get(m.name())
                .ok_or_else(|| config(format!("method '{m}' needs a model file under models.{m}")))?;
            let model = Model::load(path)?;
            if model.kind() != m.name() {
                return Err(config(format!("{} holds a {} model, not {m}", path.display(), model.kind())));
            }
            out.insert(m, model);
        }
    }
    Ok(out)
}

struct Outcome {
    accuracy: f64,
    gap: Option<f64>,
}

fn evaluate(
    method: Method,
    obs: &ObservedSeries,
    truth: &Support,
    models: &BTreeMap<Method, Model>,
    tensor_gap: bool,
) -> Result<Outcome> {
    match method {
        Method::Estimator(kind) => {
            let e = estimate(kind, obs)?;
            let predictions = gmm_fit_classify(&e)?;
            let gap = gap_matrix(&e.values, truth).ok();
            Ok(Outcome {
                accuracy: accuracy_ordered(&predictions, truth)?,
                gap,
            })
        }
        Method::Svm | Method::Cnn => {
            let model = &models[&method];
            let t = model.features.build(obs, None)?;
            classify_tensor(model, t, truth, tensor_gap)
        }
    }
}

fn classify_tensor(model: &Model, t: FeatureTensor, truth: &Support, tensor_gap: bool) -> Result<Outcome> {
    let predictions = model.predict_tensor(&t)?;
    let accuracy = accuracy_ordered(&predictions, truth)?;
    let gap = if tensor_gap {
        let labels = netsep_core::graph::ordered_pairs(truth.size())
            .map(|(i, j)| truth.is_connected(i, j))
            .collect();
        let labelled = FeatureTensor::from_parts(
            t.node_ids().to_vec(),
            t.pairs().to_vec(),
            t.lags(),
            t.leading(),
            t.values().to_vec(),
            Some(labels),
            t.is_normalized(),
        )?;
        gap_tensor(&labelled).ok().map(|g| g.value())
    } else {
        None
    };
    Ok(Outcome { accuracy, gap })
}

fn record(
    run_id: usize,
    n: usize,
    method: &str,
    outcome: Result<Outcome>,
    started: Option<Instant>,
) -> SweepRecord {
    let wall_time_ms = started.map(|s| s.elapsed().as_secs_f64() * 1e3);
    let (accuracy, gap) = match outcome {
        Ok(o) => (Some(o.accuracy), o.gap),
        Err(_) => (None, None),
    };
    SweepRecord {
        run_id,
        n,
        method: method.to_string(),
        accuracy,
        gap,
        wall_time_ms,
        sigma2: None,
        graph_id: None,
    }
}

fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| {
        (a.run_id, a.n, &a.method)
            .cmp(&(b.run_id, b.n, &b.method))
            .then(a.sigma2.unwrap_or(0.0).total_cmp(&b.sigma2.unwrap_or(0.0)))
    });
}

fn run_seed(cfg: &ExperimentConfig, run: usize) -> u64 {
    cfg.base_seed.wrapping_add(run as u64)
}

/// Accuracy of every method on `inst` for each run and each `n` in the grid.
fn sample_sweep(
    cfg: &ExperimentConfig,
    inst: &Instance,
    methods: &[Method],
    models: &BTreeMap<Method, Model>,
) -> Result<Vec<SweepRecord>> {
    let per_run = |run: usize| -> Vec<SweepRecord> {
        let full = inst.simulate(cfg.sigma2, cfg.n_max(), cfg.burn_in, run_seed(cfg, run));
        let mut out = Vec::new();
        for &n in &cfg.n_grid {
            let obs = match &full {
                Ok(y) => y.prefix(n).map_err(Error::from),
                Err(e) => Err(Error::Format(e.to_string())),
            };
            for &m in methods {
                let started = cfg.record_timing.then(Instant::now);
                let outcome = match &obs {
                    Ok(o) => evaluate(m, o, &inst.truth, models, cfg.tensor_gap),
                    Err(e) => Err(Error::Format(e.to_string())),
                };
                let mut r = record(run, n, m.name(), outcome, started);
                r.sigma2 = Some(cfg.sigma2);
                out.push(r);
            }
        }
        out
    };
    let mut records: Vec<SweepRecord> =
        pool(cfg)?.install(|| (0..cfg.runs).into_par_iter().flat_map_iter(per_run).collect());
    sort_records(&mut records);
    Ok(records)
}

/// Accuracy versus sample count on the configured graph.
pub fn run_accuracy_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let methods = cfg.parsed_methods()?;
    let models = load_models(cfg, &methods)?;
    let inst = Instance::from_source(&cfg.graph, cfg)?;
    sample_sweep(cfg, &inst, &methods, &models)
}

/// Accuracy at a fixed sample count for each noise variance in the grid.
/// Run `r` uses seed `base_seed + r` for every variance.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let methods = cfg.parsed_methods()?;
    let models = load_models(cfg, &methods)?;
    let inst = Instance::from_source(&cfg.graph, cfg)?;
    let n = cfg.noise_n();
    let per_run = |run: usize| -> Vec<SweepRecord> {
        let mut out = Vec::new();
        for &s2 in &cfg.noise.sigma2_grid {
            let obs = inst.simulate(s2, n, cfg.burn_in, run_seed(cfg, run));
            for &m in &methods {
                let started = cfg.record_timing.then(Instant::now);
                let outcome = match &obs {
                    Ok(o) => evaluate(m, o, &inst.truth, &models, cfg.tensor_gap),
                    Err(e) => Err(Error::Format(e.to_string())),
                };
                let mut r = record(run, n, m.name(), outcome, started);
                r.sigma2 = Some(s2);
                out.push(r);
            }
        }
        out
    };
    let mut records: Vec<SweepRecord> =
        pool(cfg)?.install(|| (0..cfg.runs).into_par_iter().flat_map_iter(per_run).collect());
    sort_records(&mut records);
    Ok(records)
}

/// A test graph id and the reason it could not be loaded.
pub type SkippedGraph = (String, Error);

/// Frozen models and estimators evaluated on every test graph. A graph that
/// cannot be loaded yields null records and is reported in the second value;
/// the sweep moves on.
pub fn run_generalization(cfg: &ExperimentConfig) -> Result<(Vec<SweepRecord>, Vec<SkippedGraph>)> {
    let methods = cfg.parsed_methods()?;
    let models = load_models(cfg, &methods)?;
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for g in &cfg.test_graphs {
        let mut records = match Instance::from_source(&g.source, cfg) {
            Ok(inst) => sample_sweep(cfg, &inst, &methods, &models)?,
            Err(e) => {
                let mut v = Vec::new();
                for run in 0..cfg.runs {
                    for &n in &cfg.n_grid {
                        for &m in &methods {
                            let mut r = record(run, n, m.name(), Err(config("")), None);
                            r.sigma2 = Some(cfg.sigma2);
                            v.push(r);
                        }
                    }
                }
                skipped.push((g.id.clone(), e));
                v
            }
        };
        for r in &mut records {
            r.graph_id = Some(g.id.clone());
        }
        out.extend(records);
    }
    Ok((out, skipped))
}

/// Paired comparison of a plain-feature model (`models.features`) and a
/// Granger-augmented one (`models.features+granger`) on shared simulations.
pub fn run_augmentation_comparison(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let plain = load_named(cfg, "features", false)?;
    let augmented = load_named(cfg, "features+granger", true)?;
    if plain.features.lags != augmented.features.lags {
        return Err(config("the two models must use the same lag window"));
    }
    let inst = Instance::from_source(&cfg.graph, cfg)?;
    let per_run = |run: usize| -> Vec<SweepRecord> {
        let full = inst.simulate(cfg.sigma2, cfg.n_max(), cfg.burn_in, run_seed(cfg, run));
        let mut out = Vec::new();
        for &n in &cfg.n_grid {
            let started = cfg.record_timing.then(Instant::now);
            let tensors = full
                .as_ref()
                .map_err(|e| Error::Format(e.to_string()))
                .and_then(|y| {
                    let obs = y.prefix(n)?;
                    let aug = augmented.features.build(&obs, None)?;
                    let base = plain.features.build(&obs, None)?;
                    Ok((base, aug))
                });
            let (a, b) = match tensors {
                Ok((base, aug)) => (
                    classify_tensor(&plain, base, &inst.truth, cfg.tensor_gap),
                    classify_tensor(&augmented, aug, &inst.truth, cfg.tensor_gap),
                ),
                Err(e) => (Err(Error::Format(e.to_string())), Err(e)),
            };
            for (name, outcome) in [("features", a), ("features+granger", b)] {
                let mut r = record(run, n, name, outcome, started);
                r.sigma2 = Some(cfg.sigma2);
                out.push(r);
            }
        }
        out
    };
    let mut records: Vec<SweepRecord> =
        pool(cfg)?.install(|| (0..cfg.runs).into_par_iter().flat_map_iter(per_run).collect());
    sort_records(&mut records);
    Ok(records)
}

fn load_named(cfg: &ExperimentConfig, key: &str, granger: bool) -> Result<Model> {
    let path = cfg
        .models
        .get(key)
        .ok_or_else(|| config(format!("augmentation sweep needs models.{key}")))?;
    let m = Model::load(path)?;
    if m.features.granger != granger {
        return Err(config(format!(
            "models.{key} ({}) {} Granger-augmented features",
            path.display(),
            if granger { "lacks" } else { "uses" }
        )));
    }
    Ok(m)
}

/// Which classifier to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Svm,
    Cnn,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Per-epoch log; empty for the SVM.
    pub log: Vec<EpochLog>,
    /// Accuracy on fresh simulations of the training graph, one per `n`.
    pub validation_accuracy: f64,
}

/// Labelled, normalized feature tensors from the training graph.
pub fn training_tensors(
    cfg: &ExperimentConfig,
    inst: &Instance,
    spec: FeatureSpec,
    tag: u64,
    sims_per_n: usize,
) -> Result<Vec<FeatureTensor>> {
    let jobs: Vec<(usize, usize)> = cfg
        .training
        .n_values
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..sims_per_n).map(move |s| (k * sims_per_n + s, n)))
        .collect();
    pool(cfg)?.install(|| {
        jobs.par_iter()
            .map(|&(index, n)| {
                let seed = derive_seed(cfg.training.seed, tag, index as u64);
                let obs = inst.simulate(cfg.sigma2, n, cfg.burn_in, seed)?;
                spec.build(&obs, Some(&inst.graph))
            })
            .collect()
    })
}

/// Trains a classifier on the configured graph per the training protocol.
pub fn train(cfg: &ExperimentConfig, kind: ClassifierKind, granger: bool) -> Result<TrainOutcome> {
    let inst = Instance::from_source(&cfg.graph, cfg)?;
    let spec = FeatureSpec {
        lags: cfg.lag_window()?,
        granger,
    };
    let tensors = training_tensors(cfg, &inst, spec, TAG_TRAIN, cfg.training.sims_per_n)?;
    let provenance = Provenance {
        graph_seed: match cfg.graph {
            GraphSource::Er { seed, .. } | GraphSource::Binomial { seed, .. } => seed,
            GraphSource::File { .. } => 0,
        },
        n_values: cfg.training.n_values.clone(),
        sigma2: cfg.sigma2,
    };
    let ts = TrainingSet::from_tensors(&tensors, provenance)?;
    let fit_seed = derive_seed(cfg.training.seed, TAG_FIT, 0);
    let (classifier, log) = match kind {
        ClassifierKind::Svm => {
            let params = SvmParams {
                reg: cfg.training.svm.reg,
                epochs: cfg.training.svm.epochs,
                seed: fit_seed,
            };
            (Classifier::Svm(svm_train(&ts, &params)?), Vec::new())
        }
        ClassifierKind::Cnn => {
            let c = &cfg.training.cnn;
            let (m, log) = cnn_train(&ts, c.arch(), &c.hyper(), fit_seed)?;
            (Classifier::Cnn(m), log)
        }
    };
    let model = Model {
        features: spec,
        classifier,
    };
    let validation = training_tensors(cfg, &inst, spec, TAG_VALIDATE, 1)?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for t in &validation {
        let labels = t.labels().expect("labelled");
        let predicted = model.predict_tensor(t)?;
        correct += predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
        total += t.len();
    }
    Ok(TrainOutcome {
        model,
        log,
        validation_accuracy: correct as f64 / total as f64,
    })
}

/// Median of the non-null accuracies per `(method, n)`.
pub fn median_accuracy(records: &[SweepRecord]) -> BTreeMap<(String, usize), f64> {
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(a) = r.accuracy {
            groups.entry((r.method.clone(), r.n)).or_default().push(a);
        }
    }
    groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(f64::total_cmp);
            let m = v.len();
            let med = if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) };
            (k, med)
        })
        .collect()
}
