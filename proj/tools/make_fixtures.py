#!/usr/bin/env python3
"""Regenerates the CSV fixtures under data/.

The three small tabular sets are built from the UCI copies bundled with
scikit-learn, recast as one-class problems; the sweep set is synthetic.
Output is deterministic for a given seed.
"""
import argparse
import csv
from pathlib import Path

import numpy as np
from sklearn import datasets


def write(path, names, x, y):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ["label"])
        for row, label in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def one_class(x, y, normal_classes, outlier_classes, n_outliers, rng):
    normal = np.isin(y, normal_classes)
    pool = np.flatnonzero(np.isin(y, outlier_classes))
    picked = np.sort(rng.choice(pool, size=min(n_outliers, pool.size), replace=False))
    keep = np.concatenate([np.flatnonzero(normal), picked])
    keep.sort()
    return x[keep], (~normal[keep]).astype(int)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    # Wine: cultivars 2 and 3 are normal (119 rows), 10 rows of cultivar 1 are outliers.
    w = datasets.load_wine()
    x, y = one_class(w.data, w.target, [1, 2], [0], 10, rng)
    write(args.out / "wine.csv", w.feature_names, x, y)

    # Breast cancer: benign is normal, a subsample of malignant cases are outliers.
    b = datasets.load_breast_cancer()
    x, y = one_class(b.data, b.target, [1], [0], 60, rng)
    write(args.out / "breast_cancer.csv", [n.replace(" ", "_") for n in b.feature_names], x, y)

    # Handwritten digits: zeros and sixes are normal, eights are outliers.
    d = datasets.load_digits()
    x, y = one_class(d.data, d.target, [0, 6], [8], 40, rng)
    write(args.out / "digits.csv", [f"px{i}" for i in range(d.data.shape[1])], x, y)

    # Synthetic sweep set: 10-d unit Gaussian normals, anomalies shifted by 1
    # in every dimension, plenty of both for any contamination level.
    n_normal, n_outlier, dims = 4000, 600, 10
    x = np.vstack([rng.standard_normal((n_normal, dims)), 1.0 + rng.standard_normal((n_outlier, dims))])
    y = np.r_[np.zeros(n_normal, int), np.ones(n_outlier, int)]
    order = rng.permutation(len(y))
    write(args.out / "gauss_sweep.csv", [f"x{i}" for i in range(dims)], x[order], y[order])


if __name__ == "__main__":
    main()
