//! On-disk dataset format and loaders.
//!
//! A dataset directory holds:
//!
//! * `meta.json`: `{name, n, d, f, node_types?, edge_types: [names]}`
//! * `edges.tsv` (homogeneous) or one `edges.<type>.tsv` per edge type:
//!   `src<TAB>dst` per line, 0-based node ids
//! * `features.csr`: little-endian `FCSR` header, `u64` n, d, nnz, then
//!   `row_ptr` (`u64 × (n+1)`), `col_idx` (`u64 × nnz`), `values` (`f64 × nnz`)
//! * `labels.tsv`: `node_id<TAB>class_id`; nodes without a line are unlabeled
//! * `splits.json`: `{"train": [..], "val": [..], "test": [..]}`
//!
//! Blank lines and lines starting with `#` are ignored in the TSV files.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

const FEATURES_MAGIC: &[u8; 4] = b"FCSR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub f: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_types: Option<serde_json::Value>,
    #[serde(default)]
    pub edge_types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomoGraph {
    pub meta: DatasetMeta,
    /// Symmetric 0/1 adjacency with an empty diagonal.
    pub adjacency: SparseMatrix,
    pub features: DenseMatrix,
    pub labels: Vec<Option<usize>>,
    pub splits: Splits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    pub meta: DatasetMeta,
    /// One directed 0/1 adjacency per entry of `meta.edge_types`.
    pub adjacencies: Vec<SparseMatrix>,
    pub features: DenseMatrix,
    pub labels: Vec<Option<usize>>,
    pub splits: Splits,
}

impl HomoGraph {
    pub fn n(&self) -> usize {
        self.meta.n
    }
    pub fn num_classes(&self) -> usize {
        self.meta.f
    }
}

impl HeteroGraph {
    pub fn n(&self) -> usize {
        self.meta.n
    }
    pub fn num_classes(&self) -> usize {
        self.meta.f
    }
}

/// Published statistics enforced for the benchmark datasets, keyed by the
/// lower-cased `meta.name`.
struct KnownStats {
    name: &'static str,
    n: usize,
    d: usize,
    f: Option<usize>,
    edge_types: Option<usize>,
    splits: (usize, usize, usize),
}

const KNOWN: &[KnownStats] = &[
    KnownStats {
        name: "cora",
        n: 2708,
        d: 1433,
        f: Some(7),
        edge_types: None,
        splits: (140, 500, 1000),
    },
    KnownStats {
        name: "citeseer",
        n: 3327,
        d: 3703,
        f: Some(6),
        edge_types: None,
        splits: (120, 500, 1000),
    },
    KnownStats {
        name: "pubmed",
        n: 19717,
        d: 500,
        f: Some(3),
        edge_types: None,
        splits: (60, 500, 1000),
    },
    KnownStats {
        name: "acm",
        n: 8994,
        d: 1902,
        f: None,
        edge_types: Some(4),
        splits: (600, 300, 2125),
    },
    KnownStats {
        name: "imdb",
        n: 12772,
        d: 1256,
        f: None,
        edge_types: Some(4),
        splits: (300, 300, 2339),
    },
];

fn check_known_stats(meta: &DatasetMeta, splits: &Splits, hetero: bool) -> Result<()> {
    let Some(k) = KNOWN.iter().find(|k| k.name == meta.name.to_lowercase()) else {
        return Ok(());
    };
    let mut problems = Vec::new();
    if meta.n != k.n {
        problems.push(format!("n = {} (expected {})", meta.n, k.n));
    }
    if meta.d != k.d {
        problems.push(format!("d = {} (expected {})", meta.d, k.d));
    }
    if let Some(f) = k.f {
        if meta.f != f {
            problems.push(format!("f = {} (expected {f})", meta.f));
        }
    }
    if hetero {
        if let Some(e) = k.edge_types {
            if meta.edge_types.len() != e {
                problems.push(format!(
                    "{} edge types (expected {e})",
                    meta.edge_types.len()
                ));
            }
        }
    }
    let sizes = (splits.train.len(), splits.val.len(), splits.test.len());
    if sizes != k.splits {
        problems.push(format!("split sizes {sizes:?} (expected {:?})", k.splits));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::validation(
            "meta.json",
            None,
            format!(
                "dataset '{}' does not match its published statistics: {}",
                meta.name,
                problems.join(", ")
            ),
        ))
    }
}

fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads and checks `meta.json` alone.
pub fn read_meta(dir: &Path) -> Result<DatasetMeta> {
    let path = dir.join("meta.json");
    let text = read_string(&path)?;
    let meta: DatasetMeta = serde_json::from_str(&text)
        .map_err(|e| Error::validation("meta.json", Some(e.line()), e.to_string()))?;
    if meta.n == 0 || meta.d == 0 || meta.f == 0 {
        return Err(Error::validation(
            "meta.json",
            None,
            "n, d and f must be positive",
        ));
    }
    Ok(meta)
}

/// Parses a two-column integer TSV into `(line_number, a, b)` records.
fn read_pairs(path: &Path) -> Result<Vec<(usize, usize, usize)>> {
    let text = read_string(path)?;
    let label = file_label(path);
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let parse = |s: Option<&str>| -> Result<usize> {
            let s = s.ok_or_else(|| {
                Error::validation(&label, Some(line_no), "expected two tab-separated fields")
            })?;
            s.trim().parse::<usize>().map_err(|_| {
                Error::validation(
                    &label,
                    Some(line_no),
                    format!("'{s}' is not a non-negative integer"),
                )
            })
        };
        let a = parse(fields.next())?;
        let b = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::validation(
                &label,
                Some(line_no),
                "expected exactly two fields",
            ));
        }
        out.push((line_no, a, b));
    }
    Ok(out)
}

fn read_edges(path: &Path, n: usize, symmetric: bool) -> Result<SparseMatrix> {
    let label = file_label(path);
    let mut triplets = Vec::new();
    for (line_no, src, dst) in read_pairs(path)? {
        if src >= n || dst >= n {
            return Err(Error::validation(
                &label,
                Some(line_no),
                format!("edge ({src}, {dst}) outside 0..{n}"),
            ));
        }
        if symmetric && src == dst {
            continue;
        }
        triplets.push((src, dst, 1.0));
        if symmetric {
            triplets.push((dst, src, 1.0));
        }
    }
    let merged = SparseMatrix::from_triplets(n, n, &triplets)?;
    // duplicate lines collapse to a single 0/1 edge
    merged.with_values(vec![1.0; merged.nnz()])
}

fn read_labels(dir: &Path, meta: &DatasetMeta) -> Result<Vec<Option<usize>>> {
    let path = dir.join("labels.tsv");
    let mut labels = vec![None; meta.n];
    for (line_no, node, class) in read_pairs(&path)? {
        if node >= meta.n {
            return Err(Error::validation(
                "labels.tsv",
                Some(line_no),
                format!("node {node} outside 0..{}", meta.n),
            ));
        }
        if class >= meta.f {
            return Err(Error::validation(
                "labels.tsv",
                Some(line_no),
                format!("class {class} outside 0..{}", meta.f),
            ));
        }
        if labels[node].replace(class).is_some() {
            return Err(Error::validation(
                "labels.tsv",
                Some(line_no),
                format!("node {node} labeled twice"),
            ));
        }
    }
    Ok(labels)
}

fn read_splits(dir: &Path, n: usize, labels: &[Option<usize>]) -> Result<Splits> {
    let text = read_string(&dir.join("splits.json"))?;
    let splits: Splits = serde_json::from_str(&text)
        .map_err(|e| Error::validation("splits.json", Some(e.line()), e.to_string()))?;
    let mut seen = BTreeSet::new();
    for (name, ids) in [
        ("train", &splits.train),
        ("val", &splits.val),
        ("test", &splits.test),
    ] {
        for &id in ids {
            if id >= n {
                return Err(Error::validation(
                    "splits.json",
                    None,
                    format!("{name} node {id} outside 0..{n}"),
                ));
            }
            if !seen.insert(id) {
                return Err(Error::validation(
                    "splits.json",
                    None,
                    format!("node {id} appears twice across splits ({name})"),
                ));
            }
            if labels[id].is_none() {
                return Err(Error::validation(
                    "splits.json",
                    None,
                    format!("{name} node {id} has no label"),
                ));
            }
        }
    }
    Ok(splits)
}

pub fn read_features(path: &Path) -> Result<SparseMatrix> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |msg: String| Error::validation(file_label(path), None, msg);
    if bytes.len() < 28 || &bytes[..4] != FEATURES_MAGIC {
        return Err(bad("missing FCSR header".into()));
    }
    let word = |at: usize| -> [u8; 8] { bytes[at..at + 8].try_into().unwrap() };
    let n = u64::from_le_bytes(word(4)) as usize;
    let d = u64::from_le_bytes(word(12)) as usize;
    let nnz = u64::from_le_bytes(word(20)) as usize;
    let expected = 28usize
        .checked_add(
            (n + 1 + nnz)
                .checked_mul(8)
                .ok_or_else(|| bad("size overflow".into()))?,
        )
        .and_then(|x| x.checked_add(nnz.checked_mul(8)?))
        .ok_or_else(|| bad("size overflow".into()))?;
    if bytes.len() != expected {
        return Err(bad(format!(
            "{} bytes, expected {expected} for n={n}, d={d}, nnz={nnz}",
            bytes.len()
        )));
    }
    let mut at = 28;
    let mut take_u64 = |count: usize| -> Vec<usize> {
        let v = (0..count)
            .map(|i| {
                u64::from_le_bytes(bytes[at + 8 * i..at + 8 * i + 8].try_into().unwrap()) as usize
            })
            .collect();
        at += 8 * count;
        v
    };
    let row_ptr = take_u64(n + 1);
    let col_idx = take_u64(nnz);
    let values = (0..nnz)
        .map(|i| f64::from_le_bytes(bytes[at + 8 * i..at + 8 * i + 8].try_into().unwrap()))
        .collect::<Vec<_>>();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite feature value".into()));
    }
    SparseMatrix::from_csr(n, d, row_ptr, col_idx, values).map_err(|e| bad(e.to_string()))
}

pub fn write_features(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(28 + 8 * (m.n_rows() + 1 + 2 * m.nnz()));
    buf.extend_from_slice(FEATURES_MAGIC);
    for v in [m.n_rows(), m.n_cols(), m.nnz()] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &p in m.row_ptr() {
        buf.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &c in m.col_idx() {
        buf.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for &v in m.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_file(path, &buf)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

fn load_features(dir: &Path, meta: &DatasetMeta) -> Result<DenseMatrix> {
    let sparse = read_features(&dir.join("features.csr"))?;
    if sparse.shape() != (meta.n, meta.d) {
        return Err(Error::validation(
            "features.csr",
            None,
            format!(
                "shape {:?} disagrees with meta.json ({}, {})",
                sparse.shape(),
                meta.n,
                meta.d
            ),
        ));
    }
    Ok(sparse.to_dense())
}

/// Loads a homogeneous dataset; edges are symmetrized and deduplicated.
pub fn load_homo(dir: impl AsRef<Path>) -> Result<HomoGraph> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    let adjacency = read_edges(&dir.join("edges.tsv"), meta.n, true)?;
    let features = load_features(dir, &meta)?;
    let labels = read_labels(dir, &meta)?;
    let splits = read_splits(dir, meta.n, &labels)?;
    check_known_stats(&meta, &splits, false)?;
    Ok(HomoGraph {
        meta,
        adjacency,
        features,
        labels,
        splits,
    })
}

/// Loads a heterogeneous dataset; one directed adjacency per edge type.
pub fn load_hetero(dir: impl AsRef<Path>) -> Result<HeteroGraph> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    if meta.edge_types.is_empty() {
        return Err(Error::validation(
            "meta.json",
            None,
            "heterogeneous dataset lists no edge types",
        ));
    }
    let listed: BTreeSet<&str> = meta.edge_types.iter().map(String::as_str).collect();
    if listed.len() != meta.edge_types.len() {
        return Err(Error::validation(
            "meta.json",
            None,
            "duplicate edge type name",
        ));
    }
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(ty) = name
            .strip_prefix("edges.")
            .and_then(|s| s.strip_suffix(".tsv"))
        {
            if !listed.contains(ty) {
                return Err(Error::validation(
                    name.clone(),
                    None,
                    format!("edge type '{ty}' is not listed in meta.json"),
                ));
            }
        }
    }
    let adjacencies = meta
        .edge_types
        .iter()
        .map(|ty| read_edges(&dir.join(format!("edges.{ty}.tsv")), meta.n, false))
        .collect::<Result<Vec<_>>>()?;
    let features = load_features(dir, &meta)?;
    let labels = read_labels(dir, &meta)?;
    let splits = read_splits(dir, meta.n, &labels)?;
    check_known_stats(&meta, &splits, true)?;
    Ok(HeteroGraph {
        meta,
        adjacencies,
        features,
        labels,
        splits,
    })
}

fn create_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(dir.to_path_buf())
}

fn write_common(
    dir: &Path,
    meta: &DatasetMeta,
    features: &DenseMatrix,
    labels: &[Option<usize>],
    splits: &Splits,
) -> Result<()> {
    let meta_json = serde_json::to_string_pretty(meta).expect("meta serializes");
    write_file(&dir.join("meta.json"), meta_json.as_bytes())?;
    write_features(
        &dir.join("features.csr"),
        &SparseMatrix::from_dense(features),
    )?;
    let mut text = String::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            text.push_str(&format!("{i}\t{c}\n"));
        }
    }
    write_file(&dir.join("labels.tsv"), text.as_bytes())?;
    let splits_json = serde_json::to_string(splits).expect("splits serialize");
    write_file(&dir.join("splits.json"), splits_json.as_bytes())
}

fn edges_text(a: &SparseMatrix, upper_only: bool) -> String {
    let mut text = String::new();
    for i in 0..a.n_rows() {
        for &j in a.row(i).0 {
            if !upper_only || i < j {
                text.push_str(&format!("{i}\t{j}\n"));
            }
        }
    }
    text
}

pub fn write_homo(dir: impl AsRef<Path>, g: &HomoGraph) -> Result<()> {
    let dir = create_dir(dir.as_ref())?;
    write_common(&dir, &g.meta, &g.features, &g.labels, &g.splits)?;
    write_file(
        &dir.join("edges.tsv"),
        edges_text(&g.adjacency, true).as_bytes(),
    )
}

pub fn write_hetero(dir: impl AsRef<Path>, g: &HeteroGraph) -> Result<()> {
    let dir = create_dir(dir.as_ref())?;
    write_common(&dir, &g.meta, &g.features, &g.labels, &g.splits)?;
    for (ty, a) in g.meta.edge_types.iter().zip(&g.adjacencies) {
        write_file(
            &dir.join(format!("edges.{ty}.tsv")),
            edges_text(a, false).as_bytes(),
        )?;
    }
    Ok(())
}
