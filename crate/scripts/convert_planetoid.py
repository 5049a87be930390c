"""Convert the Planetoid citation files (ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index})
into the aegcn dataset layout, keeping the standard 20-per-class split.

    python convert_planetoid.py <raw-dir> cora <out-dir>
"""

import argparse
import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from aegcn_format import write_dataset


def load(raw, name, part):
    with open(Path(raw) / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw")
    ap.add_argument("name", choices=["cora", "citeseer", "pubmed"])
    ap.add_argument("out")
    args = ap.parse_args()

    x, y, tx, ty, allx, ally, graph = (
        load(args.raw, args.name, p) for p in ["x", "y", "tx", "ty", "allx", "ally", "graph"])
    test_idx = [int(l) for l in open(Path(args.raw) / f"ind.{args.name}.test.index")]
    test_sorted = np.sort(test_idx)

    tx, ty = sp.lil_matrix(tx), np.asarray(ty)
    lo, hi = test_sorted[0], test_sorted[-1]
    if args.name == "citeseer":
        # some test ids have no entry; they become featureless, unlabeled nodes
        full_tx = sp.lil_matrix((hi - lo + 1, tx.shape[1]))
        full_tx[test_sorted - lo, :] = tx
        full_ty = np.zeros((hi - lo + 1, ty.shape[1]))
        full_ty[test_sorted - lo, :] = ty
        tx, ty = full_tx, full_ty

    features = sp.vstack((sp.lil_matrix(allx), tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    onehot = np.vstack((np.asarray(ally), ty))
    onehot[test_idx, :] = onehot[test_sorted, :]

    n = features.shape[0]
    rows, cols = [], []
    for i, nbrs in graph.items():
        for j in nbrs:
            if i < n and j < n:
                rows.append(i)
                cols.append(j)
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    adj = ((adj + adj.T) > 0).astype(np.float64)
    adj.setdiag(0)
    adj.eliminate_zeros()

    labels = {i: int(row.argmax()) for i, row in enumerate(onehot) if row.any()}
    n_train = np.asarray(y).shape[0]
    splits = {
        "train": list(range(n_train)),
        "val": list(range(n_train, n_train + 500)),
        "test": test_sorted.tolist(),
    }
    write_dataset(args.out, args.name, features.tocsr(), labels, splits, adjacency=adj)
    print(f"{args.name}: n={n} d={features.shape[1]} edges={adj.nnz // 2} "
          f"train/val/test={len(splits['train'])}/{len(splits['val'])}/{len(splits['test'])}")


if __name__ == "__main__":
    main()
