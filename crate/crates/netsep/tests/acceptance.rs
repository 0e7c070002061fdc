//! Acceptance criteria, one PASS/FAIL line each.
//!
//! `NETSEP_ONLY=1,5,9` runs a subset. A failing criterion is reported but the
//! process exits 0 unless `NETSEP_STRICT=1` is set.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use netsep::config::{ExperimentConfig, GraphSource, Lags, Observed, TestGraph};
use netsep::core::classifiers::{gradient_check, svm_train, ConvNetArch, ConvNetModel, Provenance, SvmParams, TrainingSet};
use netsep::core::dynamics::{observe, simulate};
use netsep::core::estimators::{gap_matrix, gap_tensor, granger, r1_minus_r3, stacking_check};
use netsep::core::features::{augment, build_feature_tensor, empirical_lag_cov, normalize, LagWindow};
use netsep::core::graph::{gen_er_undirected, laplacian_rule, Graph, InteractionMatrix};
use netsep::core::seed::mix64;
use netsep::core::DMatrix;
use netsep::experiment::{median_accuracy, run_accuracy_sweep, run_generalization, run_noise_sweep, train, ClassifierKind};
use netsep::io::SweepRecord;

type Outcome = (bool, String);

fn connected(g: &Graph) -> bool {
    let mut seen = vec![false; g.node_count()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..g.node_count() {
            if g.has_edge(i, j) && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|b| b)
}

/// First connected 5-node seeded ER(0.5) graph. An isolated node keeps a
/// 0.9 self-loop and its variance alone would dominate the entrywise error.
fn small_instance() -> InteractionMatrix {
    (0..)
        .map(|seed| gen_er_undirected(5, 0.5, seed).unwrap())
        .find(connected)
        .map(|g| laplacian_rule(&g, 0.9, 0.9).unwrap())
        .unwrap()
}

/// Stationary lag covariances R_0..R_3 from the truncated series
/// sum_j A^j (sigma2 I) A^j'.
fn oracle_lag_covs(a: &DMatrix<f64>, sigma2: f64) -> Vec<DMatrix<f64>> {
    let n = a.nrows();
    let mut sigma = DMatrix::zeros(n, n);
    let mut p = DMatrix::<f64>::identity(n, n);
    for _ in 0..5000 {
        sigma += &p * p.transpose() * sigma2;
        p = a * p;
        if p.amax() < 1e-18 {
            break;
        }
    }
    let mut out = vec![sigma];
    for k in 1..4 {
        let next = a * &out[k - 1];
        out.push(next);
    }
    out
}

fn c1() -> Outcome {
    let start = Instant::now();
    let a = small_instance();
    let y = simulate(&a, 1.0, 200_000, 1000, 1).unwrap();
    let oracle = oracle_lag_covs(a.weights(), 1.0);
    let err = (0..4)
        .map(|k| (empirical_lag_cov(&y, k as i64).unwrap() - &oracle[k]).amax())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    (err <= 0.03 && secs < 10.0, format!("max error {err:.4} (<= 0.03), {secs:.2} s (< 10 s)"))
}

struct Trial {
    r13_gap: f64,
    granger_gap: Option<f64>,
    tensor_gap: f64,
    augmented_gap: f64,
    svm_errors: usize,
}

fn trials() -> Vec<Trial> {
    let s: Vec<usize> = (0..15).collect();
    (0..20u64)
        .map(|t| {
            let g = gen_er_undirected(40, 0.5, 100 + t).unwrap();
            let a = laplacian_rule(&g, 0.9, 0.9).unwrap();
            let y = observe(&simulate(&a, 1.0, 500_000, 1000, 200 + t).unwrap(), &s).unwrap();
            let truth = g.support_on(&s).unwrap();
            let r13_gap = gap_matrix(&r1_minus_r3(&y).unwrap().values, &truth).unwrap();
            let gr = granger(&y).unwrap();
            let granger_gap = gap_matrix(&gr.values, &truth).ok();
            let feats = normalize(&build_feature_tensor(&y, LagWindow::new(-5, 5).unwrap(), Some(&g)).unwrap()).unwrap();
            let tensor_gap = gap_tensor(&feats).unwrap().value();
            let augmented_gap = gap_tensor(&augment(&feats, &gr.values).unwrap()).unwrap().value();
            let ts = TrainingSet::from_tensors([&feats], Provenance::default()).unwrap();
            let m = svm_train(&ts, &SvmParams { reg: 1e-6, epochs: 200, seed: t }).unwrap();
            let svm_errors = (0..ts.len())
                .filter(|&i| m.predict(ts.features(i)).unwrap() != ts.label(i))
                .count();
            Trial {
                r13_gap,
                granger_gap,
                tensor_gap,
                augmented_gap,
                svm_errors,
            }
        })
        .collect()
}

fn c2(trials: &[Trial]) -> Outcome {
    let a = small_instance();
    let y = simulate(&a, 1.0, 200_000, 1000, 1).unwrap();
    let err = (r1_minus_r3(&y).unwrap().values - a.weights()).amax();
    let positive = trials.iter().filter(|t| t.r13_gap > 0.0).count();
    (
        err <= 0.05 && positive >= 18,
        format!("max |R1-R3 - A| {err:.4} (<= 0.05), positive gap in {positive}/20 (>= 18)"),
    )
}

fn c3(trials: &[Trial]) -> Outcome {
    let separable = trials.iter().filter(|t| t.svm_errors == 0).count();
    let both = trials.iter().filter(|t| t.svm_errors == 0 && t.tensor_gap > 0.0).count();
    (
        both >= 18,
        format!("zero training error in {separable}/20, with positive tensor gap in {both}/20 (>= 18)"),
    )
}

fn c4(trials: &[Trial]) -> Outcome {
    let checked: Vec<bool> = trials
        .iter()
        .filter_map(|t| {
            let ge = t.granger_gap.filter(|&g| g > 0.0)?;
            Some(stacking_check(t.tensor_gap, ge, t.augmented_gap))
        })
        .collect();
    let held = checked.iter().filter(|&&b| b).count();
    let applicable = checked.len();
    (
        held == applicable,
        format!("bound holds in {held}/{applicable} trials with a positive Granger gap"),
    )
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

fn c5() -> Outcome {
    let mut worst = (0.0f64, "");
    for c in 0..20u64 {
        let r = |k: u64, lo: usize, hi: usize| lo + (mix64(c * 16 + k) % (hi - lo + 1) as u64) as usize;
        let arch = ConvNetArch {
            conv1_filters: r(0, 1, 4),
            conv1_kernel: r(1, 2, 5),
            conv2_filters: r(2, 1, 4),
            conv2_kernel: r(3, 2, 4),
            hidden: r(4, 2, 6),
        };
        let minimum = (1..).find(|&m| arch.blocks(m).is_ok()).unwrap();
        let m = minimum + r(5, 0, 8);
        let batch = r(6, 1, 5);
        let mut model = ConvNetModel::init(arch, m, mix64(c)).unwrap();
        // random weights and biases keep activations off the ReLU kinks
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            *p = unit(mix64(!c << 40 | i as u64)) - 0.5;
        }
        let xs: Vec<f64> = (0..batch * m)
            .map(|i| unit(mix64(c << 32 | i as u64)) * 2.0 - 1.0)
            .collect();
        let ys: Vec<bool> = (0..batch).map(|i| (c + i as u64) % 2 == 0).collect();
        for (name, rel) in gradient_check(&model, &xs, &ys, 1e-5).unwrap() {
            if rel > worst.0 {
                worst = (rel, name);
            }
        }
    }
    (worst.0 <= 1e-4, format!("worst relative error {:.2e} in {} (<= 1e-4)", worst.0, worst.1))
}

fn c9() -> Outcome {
    let a = small_instance();
    let oracle = oracle_lag_covs(a.weights(), 1.0);
    let ns = [1_000usize, 10_000, 100_000];
    let rms: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let mut sq = 0.0;
            let mut count = 0.0;
            for t in 0..40 {
                let y = simulate(&a, 1.0, n, 1000, 1000 + t).unwrap();
                for (k, r) in oracle.iter().enumerate() {
                    let d = empirical_lag_cov(&y, k as i64).unwrap() - r;
                    sq += d.norm_squared();
                    count += d.len() as f64;
                }
            }
            (sq / count).sqrt()
        })
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = rms.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    (
        (-0.6..=-0.4).contains(&slope),
        format!("slope {slope:.3} in [-0.6, -0.4], rms errors {rms:?}"),
    )
}

fn c10() -> Outcome {
    use common::{ok, read, tiny_config, write};
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    write(dir, "c.json", &tiny_config(""));
    let mut files = Vec::new();
    for r in ["a", "b"] {
        let o = |stem: &str, ext: &str| format!("{stem}_{r}.{ext}");
        let steps: Vec<Vec<String>> = vec![
            vec!["gen".into(), "--nodes".into(), "12".into(), "--seed".into(), "3".into(), "-o".into(), o("g", "txt")],
            vec!["simulate".into(), "--graph".into(), o("g", "txt"), "--n".into(), "600".into(), "--observed".into(),
                 "6".into(), "--seed".into(), "9".into(), "-o".into(), o("s", "csv")],
            vec!["features".into(), "--series".into(), o("s", "csv"), "--lag-min".into(), "-5".into(), "--lag-max".into(),
                 "5".into(), "--normalize".into(), "--graph".into(), o("g", "txt"), "-o".into(), o("f", "csv")],
            vec!["train".into(), "--config".into(), "c.json".into(), "--classifier".into(), "svm".into(), "-o".into(), o("svm", "json")],
            vec!["train".into(), "--config".into(), "c.json".into(), "--classifier".into(), "cnn".into(), "-o".into(),
                 o("cnn", "json"), "--log".into(), o("log", "csv")],
            vec!["train".into(), "--config".into(), "c.json".into(), "--classifier".into(), "svm".into(), "--augment".into(),
                 "-o".into(), o("aug", "json")],
            vec!["eval".into(), "--series".into(), o("s", "csv"), "--method".into(), "granger".into(), "--estimate-out".into(),
                 o("e", "csv"), "-o".into(), o("pe", "csv")],
            vec!["eval".into(), "--series".into(), o("s", "csv"), "--model".into(), o("cnn", "json"), "-o".into(), o("pm", "csv")],
        ];
        for s in &steps {
            let args: Vec<&str> = s.iter().map(String::as_str).collect();
            ok(dir, &args);
        }
        let models = format!(
            r#", "models": {{"svm": "svm_a.json", "cnn": "cnn_a.json",
              "features": "svm_a.json", "features+granger": "aug_a.json"}},
              "test_graphs": [{{"id": "karate", "model": "file", "path": "{}", "one_based": true}}]"#,
            common::karate().display()
        );
        let cfg = tiny_config(&models).replace(r#""residual", "r1_minus_r3"]"#, r#""residual", "svm", "cnn"]"#);
        write(dir, "sweep.json", &cfg);
        for kind in ["samples", "noise", "generalize", "augment"] {
            ok(dir, &["sweep", "--config", "sweep.json", "--kind", kind, "-o", &o(kind, "csv")]);
        }
        if r == "a" {
            files = std::fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().file_name().into_string().unwrap())
                .filter(|n| n.contains("_a."))
                .collect();
            files.sort();
        }
    }
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| read(dir, f) != read(dir, &f.replace("_a.", "_b.")))
        .collect();
    (
        differing.is_empty(),
        format!("{} output files compared, differing: {differing:?}", files.len()),
    )
}

/// Models trained once on the desk profile and shared by criteria 6 to 8.
struct Desk {
    cfg: ExperimentConfig,
    _dir: tempfile::TempDir,
}

impl Desk {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig {
            graph: GraphSource::Er { nodes: 100, p: 0.5, seed: 1 },
            alpha: 0.9,
            alpha1: 0.9,
            sigma2: 0.5,
            observed: Observed::First(20),
            n_grid: vec![200, 500, 1000, 2000, 5000],
            runs: 50,
            lags: Lags { min: -100, max: 100 },
            ..ExperimentConfig::default()
        };
        for (kind, name) in [(ClassifierKind::Svm, "svm"), (ClassifierKind::Cnn, "cnn")] {
            let start = Instant::now();
            let out = train(&cfg, kind, false).unwrap();
            let path: PathBuf = dir.path().join(format!("{name}.json"));
            out.model.save(&path).unwrap();
            println!(
                "  trained {name}: validation accuracy {:.4}, {} epochs logged, {:.0} s",
                out.validation_accuracy,
                out.log.len(),
                start.elapsed().as_secs_f64()
            );
            cfg.models.insert(name.to_string(), path);
        }
        Self { cfg, _dir: dir }
    }
}

fn medians_line(m: &BTreeMap<(String, usize), f64>, method: &str) -> String {
    let v: Vec<String> = m
        .iter()
        .filter(|((name, _), _)| name == method)
        .map(|((_, n), a)| format!("{n}:{a:.3}"))
        .collect();
    format!("  {method:<12} {}", v.join(" "))
}

fn first_reaching(m: &BTreeMap<(String, usize), f64>, method: &str) -> f64 {
    m.iter()
        .filter(|((name, _), a)| name == method && **a >= 0.95)
        .map(|((_, n), _)| *n as f64)
        .fold(f64::INFINITY, f64::min)
}

fn c6(desk: &Desk) -> Outcome {
    let mut cfg = desk.cfg.clone();
    cfg.methods = ["granger", "one_lag", "residual", "r1_minus_r3", "svm", "cnn"].map(String::from).to_vec();
    let start = Instant::now();
    let records = run_accuracy_sweep(&cfg).unwrap();
    let m = median_accuracy(&records);
    for method in &cfg.methods {
        println!("{}", medians_line(&m, method));
    }
    let (cnn, svm, gmm) = (first_reaching(&m, "cnn"), first_reaching(&m, "svm"), first_reaching(&m, "one_lag"));
    let pass = cnn.is_finite() && cnn <= 1.2 * svm && svm <= 1.2 * gmm;
    (
        pass,
        format!(
            "first n with median >= 0.95: cnn {cnn}, svm {svm}, one_lag {gmm}; sweep {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn spread(records: &[SweepRecord], method: &str) -> (f64, Vec<f64>) {
    let mut by_sigma: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.method == method) {
        if let (Some(a), Some(s)) = (r.accuracy, r.sigma2) {
            by_sigma.entry(s.to_bits()).or_default().push(a);
        }
    }
    let medians: Vec<f64> = by_sigma
        .into_values()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            let k = v.len();
            if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) }
        })
        .collect();
    let hi = medians.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = medians.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo, medians)
}

fn c7(desk: &Desk) -> Outcome {
    let mut cfg = desk.cfg.clone();
    cfg.methods = vec!["svm".into(), "cnn".into()];
    let records = run_noise_sweep(&cfg).unwrap();
    let (s_cnn, m_cnn) = spread(&records, "cnn");
    let (s_svm, m_svm) = spread(&records, "svm");
    (
        s_cnn <= 0.05 && s_svm <= 0.05 && m_cnn.len() == 5 && m_svm.len() == 5,
        format!("spread cnn {s_cnn:.4} {m_cnn:.3?}, svm {s_svm:.4} {m_svm:.3?} (<= 0.05)"),
    )
}

fn c8(desk: &Desk) -> Outcome {
    let mut cfg = desk.cfg.clone();
    cfg.methods = vec!["svm".into(), "cnn".into()];
    cfg.n_grid = vec![*desk.cfg.n_grid.last().unwrap()];
    cfg.test_graphs = vec![
        TestGraph { id: "er_0.25".into(), source: GraphSource::Er { nodes: 100, p: 0.25, seed: 2 } },
        TestGraph { id: "binomial_0.5".into(), source: GraphSource::Binomial { nodes: 100, p: 0.5, seed: 3 } },
        TestGraph {
            id: "karate".into(),
            source: GraphSource::File { path: common::karate(), one_based: true, undirected: true },
        },
    ];
    let (records, skipped) = run_generalization(&cfg).unwrap();
    assert!(skipped.is_empty(), "{skipped:?}");
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for g in &cfg.test_graphs {
        let subset: Vec<SweepRecord> = records.iter().filter(|r| r.graph_id.as_deref() == Some(&g.id)).cloned().collect();
        let m = median_accuracy(&subset);
        for method in ["svm", "cnn"] {
            let a = m.get(&(method.to_string(), cfg.n_grid[0])).copied().unwrap_or(f64::NAN);
            worst = if a.is_nan() { f64::NAN } else { worst.min(a) };
            parts.push(format!("{}/{method} {a:.3}", g.id));
        }
    }
    (worst >= 0.9, format!("median accuracy at n={}: {} (>= 0.9)", cfg.n_grid[0], parts.join(", ")))
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("NETSEP_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |c: u32| only.as_ref().is_none_or(|v| v.contains(&c));
    let strict = std::env::var("NETSEP_STRICT").is_ok_and(|v| v == "1");

    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |c: u32, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {c:>2} {} {} [{:.1} s]",
            if outcome.0 { "PASS" } else { "FAIL" },
            outcome.1,
            start.elapsed().as_secs_f64()
        );
        results.push((c, outcome));
    };

    if wanted(1) {
        report(1, &mut c1);
    }
    if wanted(2) || wanted(3) || wanted(4) {
        let start = Instant::now();
        let t = trials();
        println!("  20 trials at N=40 simulated in {:.1} s", start.elapsed().as_secs_f64());
        for (c, f) in [(2, c2 as fn(&[Trial]) -> Outcome), (3, c3), (4, c4)] {
            if wanted(c) {
                report(c, &mut || f(&t));
            }
        }
    }
    if wanted(5) {
        report(5, &mut c5);
    }
    if wanted(6) || wanted(7) || wanted(8) {
        let desk = Desk::new();
        for (c, f) in [(6, c6 as fn(&Desk) -> Outcome), (7, c7), (8, c8)] {
            if wanted(c) {
                report(c, &mut || f(&desk));
            }
        }
    }
    if wanted(9) {
        report(9, &mut c9);
    }
    if wanted(10) {
        report(10, &mut c10);
    }

    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.0).map(|(c, _)| *c).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        if strict {
            std::process::exit(1);
        }
    }
}
