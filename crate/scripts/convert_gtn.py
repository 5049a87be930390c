"""Convert the heterogeneous ACM / IMDB pickles (node_features.pkl, edges.pkl,
labels.pkl) into the aegcn dataset layout.

    python convert_gtn.py <raw-dir> acm <out-dir>
"""

import argparse
import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from aegcn_format import write_dataset

EDGE_TYPES = {
    "acm": ["PA", "AP", "PS", "SP"],
    "imdb": ["MD", "DM", "MA", "AM"],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw")
    ap.add_argument("name", choices=sorted(EDGE_TYPES))
    ap.add_argument("out")
    args = ap.parse_args()

    raw = Path(args.raw)
    with open(raw / "node_features.pkl", "rb") as f:
        features = np.asarray(pickle.load(f), dtype=np.float64)
    with open(raw / "edges.pkl", "rb") as f:
        edges = pickle.load(f)
    with open(raw / "labels.pkl", "rb") as f:
        train, val, test = (np.asarray(part) for part in pickle.load(f))

    if len(edges) != len(EDGE_TYPES[args.name]):
        raise SystemExit(f"expected {len(EDGE_TYPES[args.name])} edge types, got {len(edges)}")
    typed = [(t, (sp.csr_matrix(a) != 0).astype(np.float64))
             for t, a in zip(EDGE_TYPES[args.name], edges)]

    labels = {}
    for part in (train, val, test):
        for node, cls in part:
            labels[int(node)] = int(cls)
    splits = {"train": train[:, 0].tolist(), "val": val[:, 0].tolist(),
              "test": test[:, 0].tolist()}
    write_dataset(args.out, args.name, sp.csr_matrix(features), labels, splits, typed=typed)
    n, d = features.shape
    print(f"{args.name}: n={n} d={d} K={len(typed)} "
          f"train/val/test={len(train)}/{len(val)}/{len(test)}")


if __name__ == "__main__":
    main()
