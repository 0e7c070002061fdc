//! The `netsep` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use netsep_core::classifiers::gmm_fit_classify;
use netsep_core::dynamics::{observe, simulate};
use netsep_core::estimators::{estimate, EstimatorKind};
use netsep_core::eval::accuracy_ordered;
use netsep_core::features::{augment, build_feature_tensor, normalize, LagWindow};
use netsep_core::graph::{gen_binomial_directed, gen_er_undirected, laplacian_rule, ordered_pairs, Graph};

use crate::config::ExperimentConfig;
use crate::error::{config, Error, Result};
use crate::experiment::{
    run_accuracy_sweep, run_augmentation_comparison, run_generalization, run_noise_sweep, train,
    ClassifierKind,
};
use crate::io::{
    emit, format_edge_list, format_features, format_series, format_sweep, format_training_log,
    load_edge_list, read_series, save_estimate,
};
use crate::model::Model;

#[derive(Debug, Parser)]
#[command(name = "netsep", version, about = "Network structure identification from partially observed linear dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random graph or normalize an edge-list file
    Gen(GenArgs),
    /// Simulate the network and write the observed series
    Simulate(SimulateArgs),
    /// Compute lag-covariance features for every ordered pair
    Features(FeaturesArgs),
    /// Train a pair classifier from an experiment config
    Train(TrainArgs),
    /// Classify the pairs of a series with an estimator or a trained model
    Eval(EvalArgs),
    /// Run a Monte Carlo sweep from an experiment config
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphModel {
    Er,
    Binomial,
}

fn probability(s: &str) -> std::result::Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not a probability in [0, 1]"))
    }
}

fn positive_real(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

#[derive(Debug, Args)]
struct GraphFile {
    /// Edge-list file (`i j [weight]` lines, '#' or '%' comments)
    #[arg(long, value_name = "FILE")]
    graph: Option<PathBuf>,
    /// Node indices in the file start at 1
    #[arg(long)]
    one_based: bool,
    /// Keep edges directed instead of symmetrizing
    #[arg(long)]
    directed: bool,
}

impl GraphFile {
    fn load(&self) -> Result<Option<Graph>> {
        match &self.graph {
            None => Ok(None),
            Some(p) => {
                let e = load_edge_list(p, self.one_based, !self.directed)?;
                if e.self_loops > 0 {
                    eprintln!("warning: dropped {} self-loop line(s) from {}", e.self_loops, p.display());
                }
                Ok(Some(e.graph))
            }
        }
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Random graph model
    #[arg(long, value_enum, default_value_t = GraphModel::Er)]
    model: GraphModel,
    /// Number of nodes
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(2..))]
    nodes: u64,
    /// Edge probability
    #[arg(long, default_value_t = 0.5, value_parser = probability)]
    p: f64,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read this edge list instead of generating (rewritten 0-based)
    #[arg(long, value_name = "FILE")]
    from: Option<PathBuf>,
    /// Node indices in --from start at 1
    #[arg(long, requires = "from")]
    one_based: bool,
    /// Treat --from as directed
    #[arg(long, requires = "from")]
    directed: bool,
    /// Output edge-list file ('-' for stdout)
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphFile,
    /// Total weight of every row of A
    #[arg(long, default_value_t = 0.9, value_parser = positive_real)]
    alpha: f64,
    /// Off-diagonal share of the row weight
    #[arg(long, default_value_t = 0.9, value_parser = positive_real)]
    alpha1: f64,
    /// Noise variance
    #[arg(long, default_value_t = 0.5, value_parser = positive_real)]
    sigma2: f64,
    /// Number of samples
    #[arg(short, long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Discarded warm-up steps
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    /// Noise seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Observed nodes: a count k (first k nodes) or a comma-separated list; all when omitted
    #[arg(long)]
    observed: Option<String>,
    /// Output series CSV ('-' for stdout)
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// Series CSV written by `simulate`
    #[arg(long, value_name = "FILE")]
    series: PathBuf,
    /// Smallest lag
    #[arg(long, default_value_t = -100, allow_hyphen_values = true)]
    lag_min: i64,
    /// Largest lag
    #[arg(long, default_value_t = 100, allow_hyphen_values = true)]
    lag_max: i64,
    /// Divide by the largest absolute feature value
    #[arg(long)]
    normalize: bool,
    /// Prepend the Granger estimate of each pair
    #[arg(long)]
    granger: bool,
    /// Ground-truth graph for labels (unlabelled when omitted)
    #[command(flatten)]
    truth: GraphFile,
    /// Output feature CSV ('-' for stdout)
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Svm,
    Cnn,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Experiment config (JSON)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Classifier to train
    #[arg(long, value_enum)]
    classifier: ClassifierArg,
    /// Prepend the Granger estimate to the features
    #[arg(long)]
    augment: bool,
    /// Override training.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for simulation [default: logical cores]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Per-epoch training log CSV (CNN only)
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    /// Output model file
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("classifier").required(true).args(["method", "model"]))]
struct EvalArgs {
    /// Series CSV written by `simulate`
    #[arg(long, value_name = "FILE")]
    series: PathBuf,
    /// Matrix estimator thresholded by a Gaussian mixture
    #[arg(long, value_parser = ["granger", "one_lag", "residual", "r1_minus_r3"])]
    method: Option<String>,
    /// Trained model file
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Ground-truth graph; prints the accuracy when given
    #[command(flatten)]
    truth: GraphFile,
    /// Also write the matrix estimate (with a .meta sidecar)
    #[arg(long, value_name = "FILE", requires = "method")]
    estimate_out: Option<PathBuf>,
    /// Predictions CSV `i,j,prediction` ('-' for stdout)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepKind {
    Samples,
    Noise,
    Generalize,
    Augment,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Experiment config (JSON)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Which sweep to run
    #[arg(long, value_enum, default_value_t = SweepKind::Samples)]
    kind: SweepKind,
    /// Override the number of Monte Carlo runs
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    runs: Option<u64>,
    /// Override the base seed (run r uses base seed + r)
    #[arg(long)]
    base_seed: Option<u64>,
    /// Worker threads [default: logical cores]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Output sweep CSV ('-' for stdout)
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Features(a) => cmd_features(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn report(text: String, output: &Path) {
    if output != Path::new("-") {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let g = match &a.from {
        Some(path) => {
            let e = load_edge_list(path, a.one_based, !a.directed)?;
            if e.self_loops > 0 {
                eprintln!("warning: dropped {} self-loop line(s)", e.self_loops);
            }
            e.graph
        }
        None => {
            let n = a.nodes as usize;
            match a.model {
                GraphModel::Er => gen_er_undirected(n, a.p, a.seed)?,
                GraphModel::Binomial => gen_binomial_directed(n, a.p, a.seed)?,
            }
        }
    };
    emit(&a.output, &format_edge_list(&g))?;
    report(
        format!("nodes {} edges {}", g.node_count(), g.unique_edge_count()),
        &a.output,
    );
    Ok(())
}

fn parse_observed(spec: &str, nodes: usize) -> Result<Vec<usize>> {
    let bad = || config(format!("--observed: '{spec}' is neither a count nor a list of node ids"));
    if !spec.contains(',') {
        let k: usize = spec.trim().parse().map_err(|_| bad())?;
        if k == 0 || k > nodes {
            return Err(config(format!("--observed: {k} is outside 1..={nodes}")));
        }
        return Ok((0..k).collect());
    }
    let mut ids = spec
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    ids.sort_unstable();
    ids.dedup();
    if ids.last().is_some_and(|&m| m >= nodes) {
        return Err(config(format!("--observed: node ids must be below {nodes}")));
    }
    Ok(ids)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let g = a
        .graph
        .load()?
        .ok_or_else(|| config("--graph is required"))?;
    if a.alpha1 > a.alpha || a.alpha >= 1.0 {
        return Err(config("need alpha1 <= alpha < 1"));
    }
    let matrix = laplacian_rule(&g, a.alpha, a.alpha1)?;
    let y = simulate(&matrix, a.sigma2, a.n as usize, a.burn_in, a.seed)?;
    let y = match &a.observed {
        Some(spec) => observe(&y, &parse_observed(spec, g.node_count())?)?,
        None => y,
    };
    emit(&a.output, &format_series(&y))?;
    report(
        format!("nodes {} samples {}", y.node_count(), y.samples()),
        &a.output,
    );
    Ok(())
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let y = read_series(&a.series)?;
    let lags = LagWindow::new(a.lag_min, a.lag_max).map_err(|e| config(format!("lags: {e}")))?;
    let truth = a.truth.load()?;
    let mut t = build_feature_tensor(&y, lags, truth.as_ref())?;
    if a.normalize {
        t = normalize(&t)?;
    }
    if a.granger {
        t = augment(&t, &estimate(EstimatorKind::Granger, &y)?.values)?;
    }
    emit(&a.output, &format_features(&t))?;
    report(format!("pairs {} length {}", t.len(), t.dim()), &a.output);
    Ok(())
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.training.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = Some(w as usize);
    }
    let kind = match a.classifier {
        ClassifierArg::Svm => ClassifierKind::Svm,
        ClassifierArg::Cnn => ClassifierKind::Cnn,
    };
    if a.log.is_some() && matches!(kind, ClassifierKind::Svm) {
        return Err(config("--log is only available for the cnn classifier"));
    }
    let out = train(&cfg, kind, a.augment)?;
    out.model.save(&a.output)?;
    if let Some(path) = &a.log {
        emit(path, &format_training_log(&out.log))?;
    }
    println!("validation accuracy {}", out.validation_accuracy);
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let y = read_series(&a.series)?;
    let predictions = if let Some(name) = &a.method {
        let kind: EstimatorKind = name.parse()?;
        let e = estimate(kind, &y)?;
        if let Some(path) = &a.estimate_out {
            save_estimate(&e, y.node_ids(), y.sigma2(), path)?;
        }
        gmm_fit_classify(&e)?
    } else {
        let model = Model::load(a.model.as_ref().expect("group requires one"))?;
        model.predict_series(&y)?
    };
    if let Some(path) = &a.output {
        let ids = y.node_ids();
        let mut text = String::from("i,j,prediction\n");
        for ((i, j), p) in ordered_pairs(y.node_count()).zip(&predictions) {
            text.push_str(&format!("{},{},{}\n", ids[i], ids[j], u8::from(*p)));
        }
        emit(path, &text)?;
    }
    if let Some(g) = a.truth.load()? {
        let truth = g.support_on(y.node_ids())?;
        let acc = accuracy_ordered(&predictions, &truth)?;
        println!("accuracy {acc}");
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(r) = a.runs {
        cfg.runs = r as usize;
    }
    if let Some(s) = a.base_seed {
        cfg.base_seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = Some(w as usize);
    }
    cfg.validate()?;
    let mut skipped = Vec::new();
    let records = match a.kind {
        SweepKind::Samples => run_accuracy_sweep(&cfg)?,
        SweepKind::Noise => run_noise_sweep(&cfg)?,
        SweepKind::Generalize => {
            let (records, s) = run_generalization(&cfg)?;
            skipped = s;
            records
        }
        SweepKind::Augment => run_augmentation_comparison(&cfg)?,
    };
    emit(&a.output, &format_sweep(&records))?;
    report(format!("records {}", records.len()), &a.output);
    let failed = records.iter().filter(|r| r.accuracy.is_none()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} records have no accuracy", records.len());
    }
    if let Some((id, e)) = skipped.first() {
        for (id, e) in &skipped[1..] {
            eprintln!("error: test graph '{id}': {e}");
        }
        return Err(Error::Config(format!("test graph '{id}': {e}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn observed_forms() {
        assert_eq!(parse_observed("3", 10).unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_observed("4,1,1", 10).unwrap(), vec![1, 4]);
        assert!(parse_observed("0", 10).is_err());
        assert!(parse_observed("1,12", 10).is_err());
        assert!(parse_observed("x", 10).is_err());
    }
}
