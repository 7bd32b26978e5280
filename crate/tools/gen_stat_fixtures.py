#!/usr/bin/env python3
"""Generate frozen reference fixtures for the classical statistics tests.

Runs scipy over randomly generated datasets and freezes the results as JSON.
The Rust test suite replays the datasets and compares against these values,
so the crate's implementations are pinned to an independent reference.

Conventions mirrored from the Rust side:
- Wilcoxon signed-rank: zero differences dropped; statistic is W+ (sum of
  positive ranks); exact null enumeration when effective n <= 25 and the
  absolute differences are tie-free, else normal approximation with tie and
  continuity corrections.
- Mann-Whitney rank-sum: statistic is U1; exact when n1 + n2 <= 25 and the
  pooled sample is tie-free, else corrected normal approximation.

Usage: python3 tools/gen_stat_fixtures.py > crates/core/tests/data/classical_fixtures.json
"""

import json
import sys

import numpy as np
from scipy import stats

EXACT_LIMIT = 25
rng = np.random.default_rng(12345)


def rounded(arr):
    return [round(float(v), 12) for v in arr]


def gen_pearson(cases):
    out = []
    for i in range(cases):
        n = int(rng.integers(5, 80))
        x = rng.normal(0, 2, n)
        slope = rng.uniform(-2, 2)
        noise = rng.uniform(0.2, 3.0)
        y = slope * x + rng.normal(0, noise, n)
        r, p = stats.pearsonr(x, y)
        out.append({"x": rounded(x), "y": rounded(y),
                    "statistic": float(r), "p": float(p)})
    return out


def gen_t(cases, equal_var):
    out = []
    for i in range(cases):
        n1 = int(rng.integers(4, 60))
        n2 = int(rng.integers(4, 60))
        x = rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 3), n1)
        y = rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 3), n2)
        t, p = stats.ttest_ind(x, y, equal_var=equal_var)
        out.append({"x": rounded(x), "y": rounded(y),
                    "statistic": float(t), "p": float(p)})
    return out


def signed_rank_reference(x, y):
    d = x - y
    d = d[d != 0.0]
    n = len(d)
    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    tie_free = len(np.unique(np.abs(d))) == n
    method = "exact" if (n <= EXACT_LIMIT and tie_free) else "approx"
    res = stats.wilcoxon(x, y, zero_method="wilcox", correction=True,
                         alternative="two-sided", method=method)
    return w_plus, float(res.pvalue)


def gen_signed_rank(cases):
    out = []
    for i in range(cases):
        n = int(rng.integers(6, 50))
        if i % 2 == 0:
            # continuous, almost surely tie-free
            x = rng.normal(0, 1, n)
            y = x + rng.normal(rng.uniform(-0.5, 0.5), 1.0, n)
        else:
            # integer scores with ties and occasional zero differences
            x = rng.integers(1, 8, n).astype(float)
            y = rng.integers(1, 8, n).astype(float)
            if np.all(x == y):
                y[0] = x[0] % 7 + 1
        w_plus, p = signed_rank_reference(x, y)
        out.append({"x": rounded(x), "y": rounded(y),
                    "statistic": w_plus, "p": p})
    return out


def gen_rank_sum(cases):
    out = []
    for i in range(cases):
        n1 = int(rng.integers(4, 40))
        n2 = int(rng.integers(4, 40))
        if i % 2 == 0:
            x = rng.normal(0, 1, n1)
            y = rng.normal(rng.uniform(-1, 1), 1.2, n2)
        else:
            x = rng.integers(1, 8, n1).astype(float)
            y = rng.integers(1, 8, n2).astype(float)
        pooled = np.concatenate([x, y])
        tie_free = len(np.unique(pooled)) == len(pooled)
        method = "exact" if (n1 + n2 <= EXACT_LIMIT and tie_free) else "asymptotic"
        res = stats.mannwhitneyu(x, y, alternative="two-sided",
                                 use_continuity=True, method=method)
        out.append({"x": rounded(x), "y": rounded(y),
                    "statistic": float(res.statistic), "p": float(res.pvalue)})
    return out


def gen_shapiro(cases):
    out = []
    sizes = [3, 4, 5, 7, 10, 11, 12, 20, 35, 50, 80, 150, 400]
    for i in range(cases):
        n = sizes[i % len(sizes)]
        kind = i % 3
        if kind == 0:
            x = rng.normal(0, 1, n)
        elif kind == 1:
            x = rng.exponential(1.0, n)
        else:
            x = rng.uniform(0, 1, n)
        w, p = stats.shapiro(x)
        out.append({"x": rounded(x), "statistic": float(w), "p": float(p)})
    return out


def main():
    fixtures = {
        "pearson": gen_pearson(25),
        "t_pooled": gen_t(20, True),
        "t_welch": gen_t(20, False),
        "signed_rank": gen_signed_rank(25),
        "rank_sum": gen_rank_sum(25),
        "shapiro": gen_shapiro(26),
    }
    json.dump(fixtures, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
