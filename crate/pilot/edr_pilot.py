"""Independent EDR-recovery pilot.

Re-implements the kernel inverse-regression covariance and the generalized
eigenproblem with numpy/scipy on i.i.d. single-index data and records the
median subspace distance to span(beta) per cell. The Rust acceptance suite
reads edr_pilot.json and checks its thresholds against these medians.

    python3 pilot/edr_pilot.py > pilot/edr_pilot.json
"""

import json
import sys

import numpy as np
from scipy.linalg import eigh

D_COV = 5
N_HAT = 2500
NOISE = 0.5
SEEDS = 10
C1, C2, E_SCALE = 0.38, 0.05, 0.01
THRESHOLDS = {"identity": 0.15, "cubic": 0.25}
LINKS = {"identity": lambda t: t, "cubic": lambda t: t**3}


def epanechnikov(u):
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)


def sigma_e(x, y):
    n = len(y)
    h = np.std(y, ddof=1) * n ** (-C1)
    e = E_SCALE * n ** (-C2)
    w = epanechnikov((y[:, None] - y[None, :]) / h) / (n * h)
    f = w.sum(axis=1)
    phi = w @ x
    r = phi / np.maximum(f, e)[:, None]
    xbar = x.mean(axis=0)
    s = r.T @ r / n - np.outer(xbar, xbar)
    return 0.5 * (s + s.T)


def distance(a, b):
    def proj(m):
        q, _ = np.linalg.qr(m.T)
        return q @ q.T
    return np.linalg.norm(proj(a) - proj(b)) / np.sqrt(a.shape[0] + b.shape[0])


def run_cell(link, seeds):
    beta = np.zeros(D_COV)
    beta[0] = 1.0
    out = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((N_HAT, D_COV))
        y = LINKS[link](x @ beta) + NOISE * rng.standard_normal(N_HAT)
        x = x - x.mean(axis=0)
        sig = np.cov(x, rowvar=False, bias=True)
        vals, vecs = eigh(sigma_e(x, y), sig)
        top = vecs[:, np.argmax(vals)][None, :]
        out.append(float(distance(top, beta[None, :])))
    return out


def main():
    seeds = list(range(1, SEEDS + 1))
    cells = []
    for link in LINKS:
        d = run_cell(link, seeds)
        q25, med, q75 = np.percentile(d, [25, 50, 75])
        cells.append({
            "link": link,
            "noise_std": NOISE,
            "n_hat": N_HAT,
            "d": D_COV,
            "seeds": seeds,
            "distances": d,
            "median": float(med),
            "iqr": float(q75 - q25),
            "threshold": THRESHOLDS[link],
        })
    json.dump({
        "generator": "numpy default_rng (PCG64), seeds 1..10",
        "schedule": {"c1": C1, "c2": C2, "e_scale": E_SCALE, "h_scale": "std", "kernel": "epanechnikov", "floor": "max"},
        "cells": cells,
    }, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
