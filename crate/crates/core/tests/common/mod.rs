//! Dense brute-force oracles and invariant checks shared by the property
//! suite and the acceptance report. Each check returns `Err(description)`
//! on the first violation.

#![allow(dead_code)]

use std::sync::Arc;

use aegcn::model::{
    hetero_backward, hetero_forward, hetero_transform, homo_backward, homo_forward, HeteroModel,
    HeteroSettings, HomoModel, HomoSettings, Model, VariantKind,
};
use aegcn::nn::{
    masked_class_loss, recon_loss_adjacency, recon_loss_feature, row_softmax, ActivationKind,
    ReconMode,
};
use aegcn::optim::RandomStream;
use aegcn::sparse::{
    add_self_loops, row_normalize, sp_sp_matmul, spmm, sym_normalize, weighted_sum,
};
use aegcn::synthetic::{toy_hetero, toy_homo};
use aegcn::{DenseMatrix, SparseMatrix};

pub type Check = std::result::Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: &DenseMatrix, b: &DenseMatrix, tol: f64, what: &str) -> Check {
    ensure(a.shape() == b.shape(), || {
        format!("{what}: shape {:?} vs {:?}", a.shape(), b.shape())
    })?;
    let diff = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    ensure(diff <= tol, || {
        format!("{what}: max abs diff {diff:e} > {tol:e}")
    })
}

fn dim(s: &mut RandomStream, max: usize) -> usize {
    1 + (s.next_u64() % max as u64) as usize
}

/// Random sparse matrix; values in `(lo, hi)` on a pattern of the given
/// density.
pub fn random_sparse(
    s: &mut RandomStream,
    rows: usize,
    cols: usize,
    density: f64,
    lo: f64,
    hi: f64,
) -> SparseMatrix {
    let mut trip = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if s.next_f64() < density {
                trip.push((i, j, s.uniform(lo, hi)));
            }
        }
    }
    SparseMatrix::from_triplets(rows, cols, &trip).expect("in range")
}

pub fn random_dense(s: &mut RandomStream, rows: usize, cols: usize) -> DenseMatrix {
    let v = (0..rows * cols).map(|_| s.uniform(-2.0, 2.0)).collect();
    DenseMatrix::from_vec(rows, cols, v).expect("sized")
}

pub fn oracle_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.n_rows(), b.n_cols());
    for i in 0..a.n_rows() {
        for j in 0..b.n_cols() {
            let mut acc = 0.0;
            for k in 0..a.n_cols() {
                acc += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    out
}

fn oracle_row_sums(a: &DenseMatrix) -> Vec<f64> {
    (0..a.n_rows()).map(|i| a.row(i).iter().sum()).collect()
}

pub fn oracle_sym_normalize(a: &DenseMatrix) -> DenseMatrix {
    let d = oracle_row_sums(a);
    let mut out = a.clone();
    for i in 0..a.n_rows() {
        for j in 0..a.n_cols() {
            out.set(i, j, a.get(i, j) / (d[i].sqrt() * d[j].sqrt()));
        }
    }
    out
}

pub fn oracle_row_normalize(a: &DenseMatrix) -> DenseMatrix {
    let d = oracle_row_sums(a);
    let mut out = a.clone();
    for (i, di) in d.iter().enumerate() {
        for v in out.row_mut(i) {
            *v /= di;
        }
    }
    out
}

fn valid(m: &SparseMatrix, what: &str) -> Check {
    m.validate()
        .map_err(|e| format!("{what}: CSR invariant broken: {e}"))
}

/// One randomized instance of every sparse kernel against its oracle.
pub fn check_kernels(seed: u64, tol: f64) -> Check {
    let mut s = RandomStream::new(seed);
    let (n, m, p) = (dim(&mut s, 16), dim(&mut s, 16), dim(&mut s, 16));
    let density = s.uniform(0.05, 0.6);

    let a = random_sparse(&mut s, n, m, density, -1.0, 1.0);
    valid(&a, "from_triplets")?;
    let h = random_dense(&mut s, m, p);
    close(
        &spmm(&a, &h).map_err(|e| e.to_string())?,
        &oracle_matmul(&a.to_dense(), &h),
        tol,
        "spmm",
    )?;

    let b = random_sparse(&mut s, m, p, density, -1.0, 1.0);
    let ab = sp_sp_matmul(&a, &b).map_err(|e| e.to_string())?;
    valid(&ab, "sp_sp_matmul")?;
    close(
        &ab.to_dense(),
        &oracle_matmul(&a.to_dense(), &b.to_dense()),
        tol,
        "sp_sp_matmul",
    )?;

    let k = dim(&mut s, 4);
    let mats: Vec<SparseMatrix> = (0..k)
        .map(|_| random_sparse(&mut s, n, m, density, -1.0, 1.0))
        .collect();
    let weights: Vec<f64> = (0..k).map(|_| s.uniform(-1.0, 1.0)).collect();
    let refs: Vec<&SparseMatrix> = mats.iter().collect();
    let ws = weighted_sum(&refs, &weights).map_err(|e| e.to_string())?;
    valid(&ws, "weighted_sum")?;
    let mut expected = DenseMatrix::zeros(n, m);
    for (mat, w) in mats.iter().zip(&weights) {
        let d = mat.to_dense();
        for (e, v) in expected.values_mut().iter_mut().zip(d.values()) {
            *e += w * v;
        }
    }
    close(&ws.to_dense(), &expected, tol, "weighted_sum")?;

    // normalizations act on non-negative square matrices with self-loops
    let sq = random_sparse(&mut s, n, n, density, 0.1, 2.0);
    let sym = {
        let t = sq.transpose();
        weighted_sum(&[&sq, &t], &[0.5, 0.5]).map_err(|e| e.to_string())?
    };
    let looped = add_self_loops(&sym).map_err(|e| e.to_string())?;
    valid(&looped, "add_self_loops")?;
    for i in 0..n {
        ensure(looped.get(i, i) >= 1.0, || {
            format!("add_self_loops: diagonal {i} is {}", looped.get(i, i))
        })?;
        for j in 0..n {
            if i != j {
                ensure(looped.get(i, j) == sym.get(i, j), || {
                    format!("add_self_loops changed off-diagonal ({i}, {j})")
                })?;
            }
        }
    }
    let sn = sym_normalize(&looped).map_err(|e| e.to_string())?;
    valid(&sn, "sym_normalize")?;
    close(
        &sn.to_dense(),
        &oracle_sym_normalize(&looped.to_dense()),
        tol,
        "sym_normalize",
    )?;
    ensure(sn.is_symmetric(1e-12), || {
        "sym_normalize lost symmetry".into()
    })?;

    let looped_any = add_self_loops(&sq).map_err(|e| e.to_string())?;
    let rn = row_normalize(&looped_any).map_err(|e| e.to_string())?;
    valid(&rn, "row_normalize")?;
    close(
        &rn.to_dense(),
        &oracle_row_normalize(&looped_any.to_dense()),
        tol,
        "row_normalize",
    )?;
    for (i, r) in rn.row_sums().iter().enumerate() {
        ensure((r - 1.0).abs() <= 1e-12, || {
            format!("row_normalize: row {i} sums to {r}")
        })?;
    }
    Ok(())
}

pub fn check_softmax(seed: u64) -> Check {
    let mut s = RandomStream::new(seed);
    let (n, f) = (dim(&mut s, 12), dim(&mut s, 10));
    let v = (0..n * f).map(|_| s.uniform(-50.0, 50.0)).collect();
    let z = DenseMatrix::from_vec(n, f, v).expect("sized");
    let p = row_softmax(&z);
    for i in 0..n {
        let sum: f64 = p.row(i).iter().sum();
        ensure((sum - 1.0).abs() <= 1e-9, || {
            format!("softmax row {i} sums to {sum}")
        })?;
        ensure(p.row(i).iter().all(|&x| (0.0..=1.0).contains(&x)), || {
            format!("softmax row {i} leaves [0, 1]")
        })?;
    }
    Ok(())
}

pub fn check_relu(seed: u64) -> Check {
    let mut s = RandomStream::new(seed);
    let (rows, cols) = (dim(&mut s, 10), dim(&mut s, 10));
    let mut pre = random_dense(&mut s, rows, cols);
    // exact zeros sit on the boundary of the subgradient convention
    for v in pre.values_mut() {
        if s.next_f64() < 0.1 {
            *v = 0.0;
        }
    }
    let out = ActivationKind::ReLU.apply(&pre);
    ensure(out.values().iter().all(|&v| v >= 0.0), || {
        "ReLU produced a negative".into()
    })?;
    let g = random_dense(&mut s, pre.n_rows(), pre.n_cols());
    let back = ActivationKind::ReLU
        .backward(&pre, &out, &g)
        .map_err(|e| e.to_string())?;
    for ((p, b), gv) in pre.values().iter().zip(back.values()).zip(g.values()) {
        let expected = if *p > 0.0 { *gv } else { 0.0 };
        ensure(*b == expected, || format!("ReLU backward at pre {p}: {b}"))?;
    }
    Ok(())
}

pub fn check_losses(seed: u64) -> Check {
    let mut s = RandomStream::new(seed);
    let (n, f) = (dim(&mut s, 10) + 1, dim(&mut s, 5) + 1);
    let probs = row_softmax(&random_dense(&mut s, n, f));
    let labels: Vec<Option<usize>> = (0..n)
        .map(|_| Some((s.next_u64() % f as u64) as usize))
        .collect();
    let mask: Vec<usize> = (0..n).filter(|_| s.next_f64() < 0.6).chain([0]).collect();
    let mut mask = mask;
    mask.sort_unstable();
    mask.dedup();
    let (class, _) = masked_class_loss(&probs, &labels, &mask).map_err(|e| e.to_string())?;
    ensure(class >= 0.0, || format!("class loss {class} < 0"))?;

    let target = random_sparse(&mut s, n, n, 0.4, 0.0, 1.0);
    let pred = DenseMatrix::from_vec(n, n, (0..n * n).map(|_| s.uniform(1e-6, 1.0)).collect())
        .expect("sized");
    for mode in [ReconMode::OneSided, ReconMode::FullBce] {
        let (l, _) = recon_loss_adjacency(&target, &pred, mode).map_err(|e| e.to_string())?;
        ensure(l >= 0.0, || {
            format!("adjacency recon loss {l} < 0 ({mode:?})")
        })?;
    }
    let x = DenseMatrix::from_vec(n, f, (0..n * f).map(|_| s.next_f64().round()).collect())
        .expect("sized");
    let xhat = DenseMatrix::from_vec(n, f, (0..n * f).map(|_| s.uniform(1e-6, 1.0)).collect())
        .expect("sized");
    let (l, _) = recon_loss_feature(&x, &xhat, ReconMode::OneSided).map_err(|e| e.to_string())?;
    ensure(l >= 0.0, || format!("feature recon loss {l} < 0"))?;

    // one-sided loss vanishes when every positive target is predicted as 1
    let ones = DenseMatrix::filled(n, n, 1.0);
    let (l, _) =
        recon_loss_adjacency(&target, &ones, ReconMode::OneSided).map_err(|e| e.to_string())?;
    ensure(l == 0.0, || {
        format!("recon loss at perfect prediction is {l}")
    })
}

/// `total = class + γ·recon` for both model kinds, every variant and both
/// decoder depths on a random toy instance.
pub fn check_total_loss(seed: u64) -> Check {
    let mut s = RandomStream::new(seed);
    let gamma = s.uniform(0.0, 20.0);
    let layers = 1 + (seed % 2) as usize;

    let g = Arc::new(toy_homo(6 + (seed % 5) as usize, 5, 3, seed));
    let settings = HomoSettings {
        d1: 4,
        gamma,
        decoder_layers: layers,
        ..HomoSettings::default()
    };
    let m = HomoModel::new(g, settings).map_err(|e| e.to_string())?;
    let p = m.init_params(&mut s).map_err(|e| e.to_string())?;
    let r = homo_forward(&m, &p, true, &mut s).map_err(|e| e.to_string())?;
    homo_backward(&m, &p, &r).map_err(|e| e.to_string())?;
    identity(r.total_loss, r.class_loss, gamma, r.recon_loss, "homo")?;
    rows_sum_to_one(&r.h2, "homo H2")?;

    for variant in VariantKind::ALL {
        let g = Arc::new(toy_hetero(7, 2, 5, 3, seed));
        let settings = HeteroSettings {
            d0: 4,
            d1: 4,
            channels: 2,
            variant,
            gamma,
            decoder_layers: layers,
            ..HeteroSettings::default()
        };
        let m = HeteroModel::new(g, settings).map_err(|e| e.to_string())?;
        let p = m.init_params(&mut s).map_err(|e| e.to_string())?;
        let r = hetero_forward(&m, &p, true).map_err(|e| e.to_string())?;
        hetero_backward(&m, &p, &r).map_err(|e| e.to_string())?;
        identity(
            r.total_loss,
            r.class_loss,
            gamma,
            r.recon_loss,
            &variant.to_string(),
        )?;
        rows_sum_to_one(&r.h2, "hetero H2")?;
    }
    Ok(())
}

fn identity(total: f64, class: f64, gamma: f64, recon: f64, what: &str) -> Check {
    let diff = (total - (class + gamma * recon)).abs();
    ensure(diff <= 1e-12, || {
        format!("{what}: total-loss identity off by {diff:e}")
    })?;
    ensure(class >= 0.0 && recon >= 0.0, || {
        format!("{what}: negative loss (class {class}, recon {recon})")
    })
}

fn rows_sum_to_one(h: &DenseMatrix, what: &str) -> Check {
    for i in 0..h.n_rows() {
        let sum: f64 = h.row(i).iter().sum();
        ensure((sum - 1.0).abs() <= 1e-9, || {
            format!("{what} row {i} sums to {sum}")
        })?;
    }
    Ok(())
}

/// One edge type and one channel: the learned adjacency is `A² + I`
/// whatever the channel weights.
pub fn check_single_channel(seed: u64) -> Check {
    let mut s = RandomStream::new(seed);
    let n = dim(&mut s, 12);
    let density = s.uniform(0.1, 0.5);
    let a = random_sparse(&mut s, n, n, density, 1.0, 1.0);
    let w = random_dense(&mut s, 2, 1);
    let (channels, combined) =
        hetero_transform(std::slice::from_ref(&a), &w).map_err(|e| e.to_string())?;
    ensure(channels.len() == 1, || {
        format!("{} channels", channels.len())
    })?;
    let ad = a.to_dense();
    let mut expected = oracle_matmul(&ad, &ad);
    for i in 0..n {
        expected.set(i, i, expected.get(i, i) + 1.0);
    }
    close(
        &combined.to_dense(),
        &expected,
        1e-12,
        "K = C = 1 learned adjacency",
    )
}

/// Every property check on one seed.
pub fn check_properties(seed: u64) -> Check {
    check_softmax(seed)?;
    check_relu(seed)?;
    check_losses(seed)?;
    check_total_loss(seed)?;
    check_single_channel(seed)
}
