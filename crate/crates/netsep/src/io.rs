//! Text file formats: edge lists, series, feature tensors, matrix
//! estimates, sweep records and training logs.
//!
//! Reals that must survive a round trip are written with 17 significant
//! digits (`{:.16e}`).

use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use netsep_core::classifiers::EpochLog;
use netsep_core::dynamics::Series;
use netsep_core::estimators::MatrixEstimate;
use netsep_core::features::{FeatureTensor, LagWindow};
use netsep_core::graph::Graph;

use crate::error::{Error, Result};

/// Renders a real with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a file in one go so a failed run never leaves a partial file
/// behind a successful exit.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    open(path)?
        .read_to_string(&mut s)
        .map_err(|source| Error::Input {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(s)
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// A parsed edge list and the number of self-loop lines that were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub graph: Graph,
    pub self_loops: usize,
}

/// Parses whitespace-separated `i j [weight]` lines. Lines starting with
/// `#` or `%` are comments, except `# nodes N` which fixes the node count;
/// any third column is ignored.
pub fn parse_edge_list(text: &str, origin: &str, one_based: bool, undirected: bool) -> Result<EdgeList> {
    let mut edges = Vec::new();
    let mut self_loops = 0;
    let mut max = None;
    let mut declared = None;
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("# nodes ") {
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| parse_err(origin, line_no, format!("bad node count '{}'", rest.trim())))?;
            declared = Some(n);
            continue;
        }
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        let mut tokens = t.split_whitespace();
        let mut index = |what: &str| -> Result<usize> {
            let tok = tokens
                .next()
                .ok_or_else(|| parse_err(origin, line_no, format!("missing {what} node")))?;
            let v: i64 = tok
                .parse()
                .map_err(|_| parse_err(origin, line_no, format!("'{tok}' is not an integer")))?;
            let v = if one_based { v - 1 } else { v };
            usize::try_from(v).map_err(|_| parse_err(origin, line_no, format!("negative node index {v}")))
        };
        let i = index("source")?;
        let j = index("target")?;
        max = Some(max.unwrap_or(0).max(i).max(j));
        if i == j {
            self_loops += 1;
        } else {
            edges.push((i, j));
        }
    }
    let n = match (declared, max) {
        (Some(d), Some(m)) if m >= d => {
            return Err(parse_err(origin, 0, format!("node {m} exceeds the declared count {d}")))
        }
        (Some(d), _) => d,
        (None, Some(m)) => m + 1,
        (None, None) => return Err(parse_err(origin, 0, "no edges found")),
    };
    let graph = Graph::new(n, !undirected, edges)?;
    Ok(EdgeList { graph, self_loops })
}

pub fn load_edge_list(path: &Path, one_based: bool, undirected: bool) -> Result<EdgeList> {
    let text = read_to_string(path)?;
    parse_edge_list(&text, &path.display().to_string(), one_based, undirected)
}

/// A `# nodes N` line, then one `i j` line per edge, 0-based; undirected
/// edges are written once as `i < j`.
pub fn format_edge_list(g: &Graph) -> String {
    let mut out = format!("# nodes {}\n", g.node_count());
    for (i, j) in g.edges() {
        if g.is_directed() || i < j {
            out.push_str(&format!("{i} {j}\n"));
        }
    }
    out
}

pub fn save_edge_list(g: &Graph, path: &Path) -> Result<()> {
    write_file(path, format_edge_list(g).as_bytes())
}

/// Header `t,node_<m1>,...`, one row per time step.
pub fn format_series(s: &Series) -> String {
    let mut out = String::from("t");
    for m in s.node_ids() {
        out.push_str(&format!(",node_{m}"));
    }
    out.push('\n');
    for t in 0..s.samples() {
        out.push_str(&t.to_string());
        for i in 0..s.node_count() {
            out.push(',');
            out.push_str(&fmt17(s.row(i)[t]));
        }
        out.push('\n');
    }
    out
}

/// Reads a series file. The noise level is not stored and comes back NaN.
pub fn read_series(path: &Path) -> Result<Series> {
    let origin = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().from_reader(BufReader::new(open(path)?));
    let headers = reader
        .headers()
        .map_err(|e| parse_err(&origin, 1, e.to_string()))?
        .clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(parse_err(&origin, 1, "header must be t,node_<id>,..."));
    }
    let ids = headers
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("node_")
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| parse_err(&origin, 1, format!("bad column '{h}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![Vec::new(); ids.len()];
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(&origin, line, e.to_string()))?;
        if rec.len() != ids.len() + 1 {
            return Err(parse_err(&origin, line, "wrong number of columns"));
        }
        for (row, field) in rows.iter_mut().zip(rec.iter().skip(1)) {
            row.push(parse_f64(field, &origin, line)?);
        }
    }
    Ok(Series::from_rows(ids, &rows, f64::NAN)?)
}

fn parse_f64(field: &str, origin: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(origin, line, format!("'{field}' is not a number")))
}

/// Header `i,j,label,[lead_0,...,]f_<D>,...,f_<L>` with original node ids.
/// Labels are 1, 0, or -1 when unknown.
pub fn format_features(t: &FeatureTensor) -> String {
    let mut out = String::from("i,j,label");
    for k in 0..t.leading() {
        out.push_str(&format!(",lead_{k}"));
    }
    for k in t.lags().lags() {
        out.push_str(&format!(",f_{k}"));
    }
    out.push('\n');
    let ids = t.node_ids();
    for (p, &(i, j)) in t.pairs().iter().enumerate() {
        let label = match t.labels() {
            Some(l) if l[p] => "1",
            Some(_) => "0",
            None => "-1",
        };
        out.push_str(&format!("{},{},{label}", ids[i], ids[j]));
        for v in t.vector(p) {
            out.push(',');
            out.push_str(&fmt17(*v));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`format_features`]. `normalized` is not part of the file.
pub fn parse_features(text: &str, origin: &str, normalized: bool) -> Result<FeatureTensor> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(origin, 1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 4 || cols[..3] != ["i", "j", "label"] {
        return Err(parse_err(origin, 1, "header must start with i,j,label"));
    }
    let leading = cols[3..].iter().take_while(|c| c.starts_with("lead_")).count();
    let lags = cols[3 + leading..]
        .iter()
        .map(|c| {
            c.strip_prefix("f_")
                .and_then(|v| v.parse::<i64>().ok())
                .ok_or_else(|| parse_err(origin, 1, format!("bad column '{c}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let window = match (lags.first(), lags.last()) {
        (Some(&lo), Some(&hi)) if lags.iter().copied().eq(lo..=hi) => LagWindow::new(lo, hi)?,
        _ => return Err(parse_err(origin, 1, "lag columns must be consecutive")),
    };
    let mut raw_pairs = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(origin, line, e.to_string()))?;
        if rec.len() != cols.len() {
            return Err(parse_err(origin, line, "wrong number of columns"));
        }
        let id = |f: &str| {
            f.parse::<usize>()
                .map_err(|_| parse_err(origin, line, format!("'{f}' is not a node id")))
        };
        raw_pairs.push((id(&rec[0])?, id(&rec[1])?));
        labels.push(match &rec[2] {
            "1" => Some(true),
            "0" => Some(false),
            "-1" => None,
            other => return Err(parse_err(origin, line, format!("label '{other}' not in {{0,1,-1}}"))),
        });
        for f in rec.iter().skip(3) {
            values.push(parse_f64(f, origin, line)?);
        }
    }
    let mut ids: Vec<usize> = raw_pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let pos = |m: usize| ids.binary_search(&m).unwrap();
    let pairs = raw_pairs.iter().map(|&(a, b)| (pos(a), pos(b))).collect();
    let labels = if labels.iter().all(Option::is_some) && !labels.is_empty() {
        Some(labels.into_iter().map(Option::unwrap).collect())
    } else if labels.iter().all(Option::is_none) {
        None
    } else {
        return Err(parse_err(origin, 0, "either every pair or no pair must be labelled"));
    };
    Ok(FeatureTensor::from_parts(ids, pairs, window, leading, values, labels, normalized)?)
}

pub fn read_features(path: &Path, normalized: bool) -> Result<FeatureTensor> {
    parse_features(&read_to_string(path)?, &path.display().to_string(), normalized)
}

/// The metadata sidecar written next to a matrix estimate.
pub fn estimate_meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Matrix CSV with a header row of node ids, plus the sidecar line
/// `kind=<name> n=<samples> sigma2=<value>`.
pub fn format_estimate(e: &MatrixEstimate, node_ids: &[usize], sigma2: f64) -> (String, String) {
    let header: Vec<String> = node_ids.iter().map(|m| m.to_string()).collect();
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..e.values.nrows() {
        let row: Vec<String> = (0..e.values.ncols()).map(|j| fmt17(e.values[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let meta = format!("kind={} n={} sigma2={}\n", e.kind, e.samples, fmt17(sigma2));
    (out, meta)
}

pub fn save_estimate(e: &MatrixEstimate, node_ids: &[usize], sigma2: f64, path: &Path) -> Result<()> {
    let (body, meta) = format_estimate(e, node_ids, sigma2);
    write_file(path, body.as_bytes())?;
    write_file(&estimate_meta_path(path), meta.as_bytes())
}

/// One row of a sweep CSV. Missing values are written as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub run_id: usize,
    pub n: usize,
    pub method: String,
    pub accuracy: Option<f64>,
    pub gap: Option<f64>,
    pub wall_time_ms: Option<f64>,
    pub sigma2: Option<f64>,
    pub graph_id: Option<String>,
}

pub const SWEEP_HEADER: &str = "run_id,n,method,accuracy,gap,wall_time_ms,sigma2,graph_id";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn format_sweep(records: &[SweepRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(SWEEP_HEADER.split(',')).unwrap();
    for r in records {
        w.write_record([
            r.run_id.to_string(),
            r.n.to_string(),
            r.method.clone(),
            opt(r.accuracy),
            opt(r.gap),
            opt(r.wall_time_ms),
            opt(r.sigma2),
            r.graph_id.clone().unwrap_or_default(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn parse_sweep(text: &str, origin: &str) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(origin, 1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>().join(",") != SWEEP_HEADER {
        return Err(parse_err(origin, 1, format!("header must be {SWEEP_HEADER}")));
    }
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(origin, line, e.to_string()))?;
        let int = |f: &str| {
            f.parse::<usize>()
                .map_err(|_| parse_err(origin, line, format!("'{f}' is not an integer")))
        };
        let real = |f: &str| -> Result<Option<f64>> {
            if f.is_empty() {
                Ok(None)
            } else {
                parse_f64(f, origin, line).map(Some)
            }
        };
        out.push(SweepRecord {
            run_id: int(&rec[0])?,
            n: int(&rec[1])?,
            method: rec[2].to_string(),
            accuracy: real(&rec[3])?,
            gap: real(&rec[4])?,
            wall_time_ms: real(&rec[5])?,
            sigma2: real(&rec[6])?,
            graph_id: (!rec[7].is_empty()).then(|| rec[7].to_string()),
        });
    }
    Ok(out)
}

/// `epoch,train_loss,val_loss,val_acc`.
pub fn format_training_log(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,val_acc\n");
    for e in log {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch,
            fmt17(e.train_loss),
            fmt17(e.val_loss),
            fmt17(e.val_acc)
        ));
    }
    out
}

/// Writes `text` to `path`, or to stdout when `path` is `-`.
pub fn emit(path: &Path, text: &str) -> Result<()> {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).map_err(|source| Error::Output {
            path: path.to_path_buf(),
            source,
        })
    } else {
        write_file(path, text.as_bytes())
    }
}
