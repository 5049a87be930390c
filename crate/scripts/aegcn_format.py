"""Writer for the on-disk dataset layout read by `aegcn`."""

import json
import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def write_features(path, x):
    x = sp.csr_matrix(x, dtype=np.float64)
    x.sort_indices()
    n, d = x.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<4sQQQ", b"FCSR", n, d, x.nnz))
        f.write(np.asarray(x.indptr, dtype="<u8").tobytes())
        f.write(np.asarray(x.indices, dtype="<u8").tobytes())
        f.write(np.asarray(x.data, dtype="<f8").tobytes())


def write_edges(path, adj):
    coo = sp.coo_matrix(adj)
    pairs = sorted(set(zip(coo.row.tolist(), coo.col.tolist())))
    with open(path, "w") as f:
        f.writelines(f"{i}\t{j}\n" for i, j in pairs)


def write_dataset(out, name, features, labels, splits, adjacency=None, typed=None,
                  node_types=None):
    """`labels` maps node id to class; `typed` is a list of (type, matrix)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    n, d = features.shape
    meta = {
        "name": name,
        "n": int(n),
        "d": int(d),
        "f": int(max(labels.values()) + 1),
        "edge_types": [t for t, _ in typed] if typed else [],
    }
    if node_types is not None:
        meta["node_types"] = node_types
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    if adjacency is not None:
        write_edges(out / "edges.tsv", adjacency)
    for t, a in typed or []:
        write_edges(out / f"edges.{t}.tsv", a)
    write_features(out / "features.csr", features)
    with open(out / "labels.tsv", "w") as f:
        f.writelines(f"{i}\t{c}\n" for i, c in sorted(labels.items()))
    (out / "splits.json").write_text(
        json.dumps({k: [int(i) for i in v] for k, v in splits.items()}) + "\n")
