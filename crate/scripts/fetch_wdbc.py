#!/usr/bin/env python3
"""Write the Wisconsin Diagnostic Breast Cancer (WDBC) table as CSV.

The copy bundled with scikit-learn is the UCI `wdbc.data` file (569 rows,
30 real-valued features). Output columns: `id`, `diagnosis` (M/B), then the
30 features in the UCI order, so the 1-based covariate numbers used by the
CLI (`covariates = 2,24,25`) refer to the same attributes as the UCI docs.

Usage: python3 scripts/fetch_wdbc.py [OUT_PATH]
"""
import csv
import sys

from sklearn.datasets import load_breast_cancer


def main() -> None:
    out = sys.argv[1] if len(sys.argv) > 1 else "data/wdbc.csv"
    data = load_breast_cancer()
    names = [n.replace(" ", "_") for n in data.feature_names]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "diagnosis", *names])
        for i, (row, target) in enumerate(zip(data.data, data.target)):
            # scikit-learn encodes malignant as 0, benign as 1
            w.writerow([i + 1, "M" if target == 0 else "B", *[repr(float(v)) for v in row]])


if __name__ == "__main__":
    main()
