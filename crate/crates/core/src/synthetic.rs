//! Small generated datasets for gradient checks, tests and smoke runs.

use crate::data::{DatasetMeta, HeteroGraph, HomoGraph, Splits};
use crate::dense::DenseMatrix;
use crate::optim::RandomStream;
use crate::sparse::SparseMatrix;

fn meta(name: &str, n: usize, d: usize, f: usize, edge_types: Vec<String>) -> DatasetMeta {
    DatasetMeta {
        name: name.to_string(),
        n,
        d,
        f,
        node_types: None,
        edge_types,
    }
}

fn binary_features(n: usize, d: usize, density: f64, s: &mut RandomStream) -> DenseMatrix {
    let mut x = DenseMatrix::zeros(n, d);
    for v in x.values_mut() {
        if s.next_f64() < density {
            *v = 1.0;
        }
    }
    // at least one active feature per node
    for i in 0..n {
        if x.row(i).iter().all(|&v| v == 0.0) {
            let j = (s.next_u64() % d as u64) as usize;
            x.set(i, j, 1.0);
        }
    }
    x
}

/// Consecutive train / val / test blocks over `nodes`.
fn block_splits(nodes: &[usize], train: usize, val: usize) -> Splits {
    Splits {
        train: nodes[..train].to_vec(),
        val: nodes[train..train + val].to_vec(),
        test: nodes[train + val..].to_vec(),
    }
}

/// Random undirected graph with random binary features and labels; every
/// node is labeled and half of them are in the training split.
pub fn toy_homo(n: usize, d: usize, f: usize, seed: u64) -> HomoGraph {
    let mut s = RandomStream::new(seed);
    let mut trip = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if s.next_f64() < 0.4 {
                trip.push((i, j, 1.0));
                trip.push((j, i, 1.0));
            }
        }
    }
    let adjacency = SparseMatrix::from_triplets(n, n, &trip).expect("indices in range");
    let features = binary_features(n, d, 0.4, &mut s);
    let labels = (0..n).map(|i| Some(i % f)).collect();
    let nodes: Vec<usize> = (0..n).collect();
    let train = n.div_ceil(2);
    HomoGraph {
        meta: meta("toy", n, d, f, Vec::new()),
        adjacency,
        features,
        labels,
        splits: block_splits(&nodes, train, (n - train) / 2),
    }
}

/// Random directed graph with `k` edge types; all nodes labeled.
pub fn toy_hetero(n: usize, k: usize, d: usize, f: usize, seed: u64) -> HeteroGraph {
    let mut s = RandomStream::new(seed);
    let adjacencies = (0..k)
        .map(|_| {
            let mut trip = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && s.next_f64() < 0.3 {
                        trip.push((i, j, 1.0));
                    }
                }
            }
            SparseMatrix::from_triplets(n, n, &trip).expect("indices in range")
        })
        .collect();
    let features = binary_features(n, d, 0.4, &mut s);
    let labels = (0..n).map(|i| Some(i % f)).collect();
    let nodes: Vec<usize> = (0..n).collect();
    let train = n.div_ceil(2);
    HeteroGraph {
        meta: meta("toy", n, d, f, (0..k).map(|t| format!("t{t}")).collect()),
        adjacencies,
        features,
        labels,
        splits: block_splits(&nodes, train, (n - train) / 2),
    }
}

/// Parameters of a planted-partition graph.
#[derive(Debug, Clone)]
pub struct Planted {
    pub nodes_per_class: usize,
    pub classes: usize,
    pub features: usize,
    /// Expected same-class and cross-class neighbours per node.
    pub degree_in: f64,
    pub degree_out: f64,
    /// Probability that a feature is drawn from the node's own class block
    /// rather than uniformly.
    pub feature_signal: f64,
    pub words_per_node: usize,
    pub train_per_class: usize,
    pub val: usize,
}

impl Default for Planted {
    fn default() -> Self {
        Self {
            nodes_per_class: 60,
            classes: 3,
            features: 60,
            degree_in: 4.0,
            degree_out: 1.0,
            feature_signal: 0.3,
            words_per_node: 8,
            train_per_class: 5,
            val: 30,
        }
    }
}

fn planted_words(p: &Planted, class: usize, s: &mut RandomStream, row: &mut [f64]) {
    let block = (p.features / p.classes).max(1);
    for _ in 0..p.words_per_node {
        let j = if s.next_f64() < p.feature_signal {
            (class * block + (s.next_u64() % block as u64) as usize) % p.features
        } else {
            (s.next_u64() % p.features as u64) as usize
        };
        row[j] = 1.0;
    }
}

fn shuffled(n: usize, s: &mut RandomStream) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (s.next_u64() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
    v
}

/// Train split with `per_class` nodes of every class, then `val` more
/// nodes, then the rest as test.
fn stratified_splits(
    order: &[usize],
    labels: &[Option<usize>],
    classes: usize,
    per_class: usize,
    val: usize,
) -> Splits {
    let mut counts = vec![0; classes];
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for &i in order {
        let Some(c) = labels[i] else { continue };
        if counts[c] < per_class {
            counts[c] += 1;
            train.push(i);
        } else {
            rest.push(i);
        }
    }
    let val = val.min(rest.len());
    Splits {
        train,
        val: rest[..val].to_vec(),
        test: rest[val..].to_vec(),
    }
}

/// Undirected stochastic block model with class-correlated bag-of-words
/// features.
pub fn planted_homo(p: &Planted, seed: u64) -> HomoGraph {
    let mut s = RandomStream::new(seed);
    let n = p.nodes_per_class * p.classes;
    let class_of = |i: usize| i / p.nodes_per_class;
    let p_in = p.degree_in / p.nodes_per_class as f64;
    let p_out = p.degree_out / (n - p.nodes_per_class).max(1) as f64;
    let mut trip = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let prob = if class_of(i) == class_of(j) {
                p_in
            } else {
                p_out
            };
            if s.next_f64() < prob {
                trip.push((i, j, 1.0));
                trip.push((j, i, 1.0));
            }
        }
    }
    let adjacency = SparseMatrix::from_triplets(n, n, &trip).expect("indices in range");
    let mut features = DenseMatrix::zeros(n, p.features);
    for i in 0..n {
        planted_words(p, class_of(i), &mut s, features.row_mut(i));
    }
    let labels: Vec<Option<usize>> = (0..n).map(|i| Some(class_of(i))).collect();
    let order = shuffled(n, &mut s);
    let splits = stratified_splits(&order, &labels, p.classes, p.train_per_class, p.val);
    HomoGraph {
        meta: meta("planted", n, p.features, p.classes, Vec::new()),
        adjacency,
        features,
        labels,
        splits,
    }
}

/// Two node types: labeled targets and unlabeled hubs. Each target links
/// to a few hubs, mostly hubs of its own class. Edge types are
/// target→hub, hub→target and a sparse noisy target→target relation.
pub fn planted_hetero(p: &Planted, hubs_per_class: usize, seed: u64) -> HeteroGraph {
    let mut s = RandomStream::new(seed);
    let targets = p.nodes_per_class * p.classes;
    let hubs = hubs_per_class * p.classes;
    let n = targets + hubs;
    let class_of = |i: usize| i / p.nodes_per_class;
    let mut th = Vec::new();
    let mut ht = Vec::new();
    for i in 0..targets {
        let links = p.degree_in.round().max(1.0) as usize;
        for _ in 0..links {
            let hub_class = if s.next_f64() < p.degree_in / (p.degree_in + p.degree_out) {
                class_of(i)
            } else {
                (s.next_u64() % p.classes as u64) as usize
            };
            let h = targets
                + hub_class * hubs_per_class
                + (s.next_u64() % hubs_per_class as u64) as usize;
            th.push((i, h, 1.0));
            ht.push((h, i, 1.0));
        }
    }
    let mut tt = Vec::new();
    for i in 0..targets {
        let j = (s.next_u64() % targets as u64) as usize;
        if i != j {
            tt.push((i, j, 1.0));
        }
    }
    let binarize = |trip: &[(usize, usize, f64)]| {
        let m = SparseMatrix::from_triplets(n, n, trip).expect("indices in range");
        let nnz = m.nnz();
        m.with_values(vec![1.0; nnz]).expect("same length")
    };
    let adjacencies = vec![binarize(&th), binarize(&ht), binarize(&tt)];
    let mut features = DenseMatrix::zeros(n, p.features);
    for i in 0..targets {
        planted_words(p, class_of(i), &mut s, features.row_mut(i));
    }
    for h in 0..hubs {
        let j = (s.next_u64() % p.features as u64) as usize;
        features.set(targets + h, j, 1.0);
    }
    let labels: Vec<Option<usize>> = (0..n).map(|i| (i < targets).then(|| class_of(i))).collect();
    let order = shuffled(n, &mut s);
    let splits = stratified_splits(&order, &labels, p.classes, p.train_per_class, p.val);
    HeteroGraph {
        meta: meta(
            "planted-hetero",
            n,
            p.features,
            p.classes,
            vec!["th".into(), "ht".into(), "tt".into()],
        ),
        adjacencies,
        features,
        labels,
        splits,
    }
}
