//! Dataset containers on disk and JSON report documents.
//!
//! A container is a directory holding:
//!
//! * `meta.json` with `{name, n, d, num_classes}`
//! * `edges.tsv`, one undirected edge per line as two tab-separated 0-based ids
//! * `labels.tsv`, line `i` holding the integer label of node `i`
//! * `features.bin`, `n·d` little-endian `f32` values in row-major order, or
//!   `features.tsv` with one tab-separated row per node

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::homophily::HomophilyReport;
use crate::matrix::DenseMatrix;
use crate::protocol::{ExperimentResult, GridConfig};
use crate::quadrant::{QuadrantAssignment, QuadrantSummary};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub num_classes: usize,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedLine {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn parse_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let mut parts = t.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(malformed(
                path,
                line_no,
                "expected two tab-separated node ids",
            ));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| malformed(path, line_no, format!("`{s}` is not a node id")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        for id in [u, v] {
            if id >= n {
                return Err(malformed(
                    path,
                    line_no,
                    format!("node id {id} out of range [0, {n})"),
                ));
            }
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_labels(path: &Path, n: usize, num_classes: usize) -> Result<Vec<usize>> {
    let lines = read_lines(path)?;
    let mut labels = Vec::with_capacity(n);
    for (i, line) in lines.iter().enumerate() {
        let t = line.trim();
        if t.is_empty() && i + 1 == lines.len() {
            break;
        }
        let label: usize = t
            .parse()
            .map_err(|_| malformed(path, i + 1, format!("`{t}` is not a class label")))?;
        if label >= num_classes {
            return Err(Error::LabelOutOfRange {
                node: i,
                label,
                num_classes,
            });
        }
        labels.push(label);
    }
    if labels.len() != n {
        return Err(Error::LabelCount {
            expected: n,
            actual: labels.len(),
        });
    }
    Ok(labels)
}

fn parse_features_bin(path: &Path, n: usize, d: usize) -> Result<DenseMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = (n * d * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::FeatureByteLength {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    DenseMatrix::from_vec(n, d, data)
}

fn parse_features_tsv(path: &Path, n: usize, d: usize) -> Result<DenseMatrix> {
    let lines = read_lines(path)?;
    let rows: Vec<&String> = lines.iter().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != n {
        return Err(Error::dims(
            "features.tsv",
            format!("{n} rows"),
            format!("{} rows", rows.len()),
        ));
    }
    let mut data = Vec::with_capacity(n * d);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for s in line.trim().split('\t') {
            let v: f32 = s
                .trim()
                .parse()
                .map_err(|_| malformed(path, i + 1, format!("`{s}` is not a number")))?;
            data.push(v as f64);
        }
        if data.len() - before != d {
            return Err(malformed(
                path,
                i + 1,
                format!("expected {d} values, found {}", data.len() - before),
            ));
        }
    }
    DenseMatrix::from_vec(n, d, data)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Loads and validates a container directory. Features are widened to `f64`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta: DatasetMeta = read_json(&dir.join("meta.json"))?;
    let edges = parse_edges(&dir.join("edges.tsv"), meta.n)?;
    let labels = parse_labels(&dir.join("labels.tsv"), meta.n, meta.num_classes)?;
    let bin = dir.join("features.bin");
    let features = if bin.exists() {
        parse_features_bin(&bin, meta.n, meta.d)?
    } else {
        parse_features_tsv(&dir.join("features.tsv"), meta.n, meta.d)?
    };
    let graph = Graph::from_edges(&edges, meta.n)?;
    Dataset::new(meta.name, graph, features, labels, meta.num_classes)
}

/// Writes a container with binary features. Features are narrowed to `f32`.
pub fn save_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DatasetMeta {
        name: dataset.name.clone(),
        n: dataset.num_nodes(),
        d: dataset.feature_dim(),
        num_classes: dataset.num_classes,
    };
    write_json(&meta, &dir.join("meta.json"))?;

    let write_text =
        |name: &str, body: &mut dyn FnMut(&mut dyn Write) -> std::io::Result<()>| -> Result<()> {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))
        };
    write_text("edges.tsv", &mut |w| {
        for (u, v) in dataset.graph.edges() {
            writeln!(w, "{u}\t{v}")?;
        }
        Ok(())
    })?;
    write_text("labels.tsv", &mut |w| {
        for l in &dataset.labels {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    let path = dir.join("features.bin");
    let mut bytes = Vec::with_capacity(dataset.features.as_slice().len() * 4);
    for &x in dataset.features.as_slice() {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub num_classes: usize,
    pub num_edges: usize,
    pub num_directed_entries: usize,
    pub fingerprint: String,
}

impl DatasetSummary {
    pub fn of(dataset: &Dataset) -> Self {
        DatasetSummary {
            name: dataset.name.clone(),
            n: dataset.num_nodes(),
            d: dataset.feature_dim(),
            num_classes: dataset.num_classes,
            num_edges: dataset.graph.num_edges(),
            num_directed_entries: dataset.graph.num_directed_entries(),
            fingerprint: dataset.fingerprint(),
        }
    }
}

/// Protocol choices recorded alongside every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub masking: String,
    pub validation_carving: String,
    pub class_weights: String,
    pub gcn_optimizer: String,
    pub gcn_init: String,
    pub dropout: String,
    pub early_stopping: String,
    pub prediction_ties: String,
    pub threshold_ties: String,
    pub absent_class_f1: String,
    pub logreg_solver: String,
    pub svm_solver: String,
    pub model_selection: String,
}

impl Decisions {
    pub fn for_config(cfg: &GridConfig) -> Self {
        Decisions {
            val_fraction: cfg.val_fraction,
            test_fraction: cfg.test_fraction,
            masking:
                "stratified per class, at least one visible label per class, nested across rates"
                    .into(),
            validation_carving: "stratified; classes with one visible label keep it in sub-train"
                .into(),
            class_weights:
                "w_c = N / (K * count_c) over the labels used for fitting, K = classes present"
                    .into(),
            gcn_optimizer: "Adam(beta1=0.9, beta2=0.999, eps=1e-8), full batch".into(),
            gcn_init: "Glorot uniform".into(),
            dropout: "inverted dropout on input features and hidden activations, training only"
                .into(),
            early_stopping:
                "validation macro-F1 over classes present in validation; earliest best epoch kept"
                    .into(),
            prediction_ties: "argmax ties go to the lowest class id".into(),
            threshold_ties: "values equal to a quadrant threshold fall on the low side".into(),
            absent_class_f1: "0, flagged in absent_classes".into(),
            logreg_solver: "L-BFGS with Armijo backtracking, grad norm < 1e-6 or 1000 iterations"
                .into(),
            svm_solver: "one-vs-rest dual coordinate descent, intercept via constant feature 10"
                .into(),
            model_selection: format!(
                "{}-fold stratified CV on visible labels, mean fold macro-F1",
                cfg.folds
            ),
        }
    }
}

/// Wall-clock data kept apart from results so determinism checks can drop it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub created_unix_secs: u64,
    pub tool_version: String,
}

impl RunMetadata {
    pub fn now() -> Self {
        RunMetadata {
            created_unix_secs: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantSection {
    pub assignment: QuadrantAssignment,
    pub summary: Vec<QuadrantSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub dataset: DatasetSummary,
    pub homophily: HomophilyReport,
    pub grid: ExperimentResult,
    pub quadrant: Option<QuadrantSection>,
    pub decisions: Decisions,
    pub metadata: RunMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub dataset: DatasetSummary,
    pub homophily: HomophilyReport,
}

pub fn save_report<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    write_json(report, path.as_ref())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<RunReport> {
    read_json(path.as_ref())
}

/// Report JSON with the `metadata` key removed, for determinism comparisons.
pub fn report_without_metadata(path: impl AsRef<Path>) -> Result<serde_json::Value> {
    let path = path.as_ref();
    let mut v: serde_json::Value = read_json(path)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("metadata");
    }
    Ok(v)
}

/// Tidy per-class F1 table: one row per (cell, class).
pub fn write_scores_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "model,masking_rate,feature_mode,seed,class,f1,macro_f1")?;
        for cell in &result.cells {
            let Some(s) = &cell.scores else { continue };
            for (k, f1) in s.per_class_f1.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    cell.model, cell.masking_rate, cell.feature_mode, cell.seed, k, f1, s.macro_f1
                )?;
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3)], 4).unwrap();
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.5],
            vec![2.0, -1.0],
            vec![0.25, 3.0],
            vec![0.0, 0.0],
        ]);
        Dataset::new("tiny", g, x, vec![0, 0, 1, 1], 2).unwrap()
    }

    #[test]
    fn container_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), tiny());
    }

    #[test]
    fn short_labels_file() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        fs::write(dir.path().join("labels.tsv"), "0\n1\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::LabelCount {
                expected: 4,
                actual: 2
            })
        ));
    }

    #[test]
    fn wrong_feature_length() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        fs::write(dir.path().join("features.bin"), [0u8; 12]).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(
            err,
            Error::FeatureByteLength {
                expected: 32,
                actual: 12,
                ..
            }
        ));
        assert!(err.to_string().contains("32"));
    }

    #[test]
    fn malformed_edge_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        fs::write(dir.path().join("edges.tsv"), "0\t1\n1 2\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::MalformedLine { line: 2, .. })
        ));
        fs::write(dir.path().join("edges.tsv"), "0\t1\n1\t9\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn label_out_of_range_in_file() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        fs::write(dir.path().join("labels.tsv"), "0\n1\n2\n0\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::LabelOutOfRange {
                node: 2,
                label: 2,
                ..
            })
        ));
    }

    #[test]
    fn tsv_feature_fallback() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("features.bin")).unwrap();
        fs::write(
            dir.path().join("features.tsv"),
            "1\t0.5\n2\t-1\n0.25\t3\n0\t0\n",
        )
        .unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), tiny());
    }
}
