#!/usr/bin/env python3
"""Regenerate the synthetic case-study fixtures under data/.

Both tables mimic the shape of published torsion-angle data sets: a dense
majority cluster plus smaller structures that a robust fit should flag.
Values are angles in radians, wrapped to [0, 2pi).
"""
import os

import numpy as np

TWO_PI = 2.0 * np.pi
HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")


def wrap(x):
    return np.mod(x, TWO_PI)


def protein_pairs():
    rng = np.random.default_rng(8201)
    # dense majority cluster (the "genuine" set)
    n_bulk = 264
    cov_b = np.array([[0.040, -0.010], [-0.010, 0.036]])
    bulk = rng.multivariate_normal([5.20, 2.30], cov_b, size=n_bulk)
    # two secondary clusters and diffuse scatter
    c2 = rng.multivariate_normal([2.10, 5.00], np.diag([0.09, 0.10]), size=95)
    c3 = rng.multivariate_normal([3.40, 0.50], np.diag([0.11, 0.10]), size=75)
    scatter = rng.uniform(0.0, TWO_PI, size=(56, 2))
    data = np.vstack([bulk, c2, c3, scatter])
    labels = np.zeros(len(data), dtype=int)
    labels[:n_bulk] = 1
    order = rng.permutation(len(data))
    return wrap(data[order]), labels[order]


def rna_angles():
    rng = np.random.default_rng(8302)
    p = 7
    mu_a = np.array([3.00, 5.10, 1.20, 4.00, 2.40, 5.70, 0.90])
    a = rng.standard_normal((p, p))
    corr = a @ a.T
    d = np.sqrt(np.diag(corr))
    corr = corr / np.outer(d, d)
    cov_a = 0.20**2 * corr
    big = rng.multivariate_normal(mu_a, cov_a, size=232)
    mu_b = mu_a.copy()
    mu_b[[0, 2, 5]] += 1.80
    small = rng.multivariate_normal(mu_b, 0.15**2 * np.eye(p), size=28)
    data = np.vstack([big, small])
    labels = np.concatenate([np.ones(232, dtype=int), np.zeros(28, dtype=int)])
    order = rng.permutation(len(data))
    return wrap(data[order]), labels[order]


def write(path, header, rows):
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(f"{v:.17g}" for v in np.atleast_1d(row)) + "\n")


def main():
    os.makedirs(DATA, exist_ok=True)
    prot, prot_labels = protein_pairs()
    write(os.path.join(DATA, "tim_synthetic.csv"), "phi,psi", prot)
    write(os.path.join(DATA, "tim_synthetic_labels.csv"), "is_bulk",
          prot_labels.reshape(-1, 1))
    rna, rna_labels = rna_angles()
    write(os.path.join(DATA, "rna_synthetic.csv"),
          ",".join(f"theta_{i+1}" for i in range(rna.shape[1])), rna)
    write(os.path.join(DATA, "rna_synthetic_labels.csv"), "is_bulk",
          rna_labels.reshape(-1, 1))
    print(f"wrote fixtures to {os.path.abspath(DATA)}: "
          f"protein {prot.shape}, rna {rna.shape}")


if __name__ == "__main__":
    main()
