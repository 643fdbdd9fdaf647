#!/usr/bin/env python3
"""Generate the synthetic 10-asset monthly returns file shipped in data/.

Returns are multivariate normal with a one-factor covariance:
  R = mu + beta * F + e,  F ~ N(0, 0.045^2),  e_i ~ N(0, 0.025^2)
with mu_i = 0.004 + 0.0006 * i and beta_i = 0.7 + 0.06 * i (i = 0..9),
which puts monthly means near 0.4%-0.95% and volatilities near 3.9%-6.6%,
roughly the range of the 10 industry portfolios in the 1960s-80s.
Dates are YYYYMM strings from 196001 for 360 months. Values are decimal
returns (not percent). Seed is fixed so the file is reproducible.

Usage: python3 scripts/make_synthetic_returns.py [OUT_PATH]
"""
import csv
import sys

import numpy as np


def main() -> None:
    out = sys.argv[1] if len(sys.argv) > 1 else "data/synthetic_10_industry.csv"
    rng = np.random.default_rng(20181219)
    d, months = 10, 360
    mu = 0.004 + 0.0006 * np.arange(d)
    beta = 0.7 + 0.06 * np.arange(d)
    factor = rng.normal(0.0, 0.045, size=months)
    noise = rng.normal(0.0, 0.025, size=(months, d))
    returns = mu + factor[:, None] * beta + noise
    names = ["NoDur", "Durbl", "Manuf", "Enrgy", "HiTec", "Telcm", "Shops", "Hlth", "Utils", "Other"]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *names])
        for t in range(months):
            year, month = 1960 + t // 12, t % 12 + 1
            w.writerow([f"{year}{month:02d}", *[f"{v:.6f}" for v in returns[t]]])


if __name__ == "__main__":
    main()
