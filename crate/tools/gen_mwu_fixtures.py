#!/usr/bin/env python3
"""Generates the Mann-Whitney U reference fixture.

Writes crates/sentinel/tests/data/mwu_cases.json: 1000 random test
instances with the U statistic and two-sided p-value computed by scipy.
Each case is routed to scipy's method the same way the library routes it:
the exact null distribution when the pooled sample is tie-free and
n1*n2 <= 400, the tie- and continuity-corrected normal approximation
otherwise. Degenerate draws (every pooled value identical) are excluded;
the library defines p = 1 for those rather than deferring to scipy.

Run from the repository root:

    python3 tools/gen_mwu_fixtures.py
"""

import json
import os

import numpy as np
import scipy
import scipy.stats

MAX_EXACT_PRODUCT = 400
OUT = os.path.join(
    os.path.dirname(__file__), "..", "crates", "sentinel", "tests", "data", "mwu_cases.json"
)

rng = np.random.default_rng(20260815)


def finalize(x, y):
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    pooled = x + y
    if len(set(pooled)) <= 1:
        return None  # degenerate; the library handles it without scipy
    has_ties = len(set(pooled)) < len(pooled)
    exact = (not has_ties) and len(x) * len(y) <= MAX_EXACT_PRODUCT
    method = "exact" if exact else "asymptotic"
    res = scipy.stats.mannwhitneyu(x, y, alternative="two-sided", method=method)
    return {
        "n1": len(x),
        "n2": len(y),
        "x": x,
        "y": y,
        "u": float(res.statistic),
        "p": float(res.pvalue),
        "method": method,
    }


def continuous_small():
    # Tie-free, n1*n2 <= 400: exercises the exact path.
    while True:
        n1 = int(rng.integers(1, 21))
        n2 = int(rng.integers(1, 21))
        if n1 * n2 <= MAX_EXACT_PRODUCT:
            break
    shift = rng.normal(0.0, 1.5)
    x = rng.normal(0.0, 1.0, n1)
    y = rng.normal(shift, float(rng.uniform(0.5, 2.0)), n2)
    return finalize(x, y)


def tied_small():
    # Integer-valued draws: ties force the corrected normal approximation.
    n1 = int(rng.integers(2, 31))
    n2 = int(rng.integers(2, 31))
    hi = int(rng.integers(2, 8))
    x = rng.integers(0, hi, n1)
    y = rng.integers(0, hi + int(rng.integers(0, 3)), n2)
    return finalize(x, y)


def continuous_medium():
    # Tie-free but too large for the exact path.
    n1 = int(rng.integers(21, 101))
    n2 = int(rng.integers(21, 101))
    shift = rng.normal(0.0, 0.5)
    x = rng.lognormal(0.0, 1.0, n1)
    y = rng.lognormal(shift, 1.0, n2)
    return finalize(x, y)


def tied_medium():
    n1 = int(rng.integers(30, 81))
    n2 = int(rng.integers(30, 81))
    x = rng.poisson(4.0, n1)
    y = rng.poisson(float(rng.uniform(2.0, 8.0)), n2)
    return finalize(x, y)


def edge():
    kind = int(rng.integers(0, 5))
    if kind == 0:  # fully separated, exact path
        n1 = int(rng.integers(1, 15))
        n2 = int(rng.integers(1, 15))
        x = rng.uniform(0.0, 1.0, n1)
        y = rng.uniform(10.0, 11.0, n2)
    elif kind == 1:  # single observations
        x = rng.normal(0.0, 1.0, 1)
        y = rng.normal(0.0, 1.0, int(rng.integers(1, 6)))
    elif kind == 2:  # near-degenerate: one odd value in a sea of ties
        n1 = int(rng.integers(3, 12))
        n2 = int(rng.integers(3, 12))
        x = np.full(n1, 5.0)
        y = np.full(n2, 5.0)
        y[0] = 6.0
    elif kind == 3:  # identical distributions, heavy ties
        n1 = int(rng.integers(5, 40))
        n2 = int(rng.integers(5, 40))
        x = rng.integers(0, 3, n1)
        y = rng.integers(0, 3, n2)
        if len(set(np.concatenate([x, y]).tolist())) <= 1:
            y = np.append(y[:-1], 7)
    else:  # product exactly at the exact/asymptotic boundary
        x = rng.normal(0.0, 1.0, 20)
        y = rng.normal(0.5, 1.0, 20)
    return finalize(x, y)


def main():
    makers = (
        [continuous_small] * 350
        + [tied_small] * 300
        + [continuous_medium] * 250
        + [tied_medium] * 50
        + [edge] * 50
    )
    cases = []
    for make in makers:
        case = None
        while case is None:
            case = make()
        cases.append(case)
    assert len(cases) == 1000
    n_exact = sum(1 for c in cases if c["method"] == "exact")
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w") as f:
        json.dump({"scipy_version": scipy.__version__, "cases": cases}, f)
        f.write("\n")
    print(f"wrote {len(cases)} cases ({n_exact} exact) to {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
