#!/usr/bin/env python3
"""Convert a local copy of the Planetoid citation files to a node bundle.

Reads ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index} from SRC and writes
edges.tsv, features.csv, labels.csv, train.txt, val.txt and test.txt to DST
using the standard public split (first 20 labelled nodes per class for
training, the next 500 nodes for validation, the listed 1000 for testing).

    python3 scripts/planetoid_to_bundle.py SRC DST --name cora
"""

import argparse
import pathlib
import pickle
import sys

import numpy as np
import scipy.sparse as sp


def load(src, name, part):
    with open(src / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def convert(src, dst, name, val):
    x, y, tx, ty, allx, ally, graph = (
        load(src, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph")
    )
    test_index = [int(line) for line in (src / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_index)

    if name == "citeseer":
        # Isolated test nodes are missing from tx/ty; pad them with zero rows.
        full = range(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), y.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_index, :] = features[test_sorted, :]
    labels = np.vstack((ally, ty))
    labels[test_index, :] = labels[test_sorted, :]
    n = features.shape[0]

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    dst.mkdir(parents=True, exist_ok=True)
    with open(dst / "edges.tsv", "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u}\t{v}\n")
    dense = np.asarray(features.todense())
    np.savetxt(dst / "features.csv", dense, delimiter=",", fmt="%.10g")
    np.savetxt(dst / "labels.csv", labels.argmax(1), fmt="%d")
    splits = {
        "train.txt": range(len(y)),
        "val.txt": range(len(y), len(y) + val),
        "test.txt": test_sorted,
    }
    for file, ids in splits.items():
        np.savetxt(dst / file, np.asarray(list(ids)), fmt="%d")
    print(f"{name}: {n} nodes, {len(edges)} edges, {dense.shape[1]} features -> {dst}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("src", type=pathlib.Path)
    parser.add_argument("dst", type=pathlib.Path)
    parser.add_argument("--name", default="cora")
    parser.add_argument("--val", type=int, default=500, help="validation nodes after the training nodes")
    args = parser.parse_args()
    try:
        convert(args.src, args.dst, args.name, args.val)
    except FileNotFoundError as e:
        sys.exit(f"error: {e}")


if __name__ == "__main__":
    main()
