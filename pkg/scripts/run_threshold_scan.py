#!/usr/bin/env python3
"""Scan the high-temperature thresholds of the built-in potential families.

For each family and dimension, prints the composite constant, the concave-part
curvature norm, and the largest inverse temperature admitted by each of the
three smallness conditions.  Writes a CSV when --out is given.

Usage: python scripts/run_threshold_scan.py [--out thresholds.csv]
"""

import argparse

from gil.conditions import check_conditions
from gil.potentials import example_a, example_b, example_c, norms


def rows():
    families = [
        ("example_a(0.25)", example_a(0.25)),
        ("example_a(0.5)", example_a(0.5)),
        ("example_b(0.25)", example_b(0.25)),
        ("example_b(0.5)", example_b(0.5)),
        ("example_c(0.05,2,1)", example_c(0.05, 2.0, 1.0)),
    ]
    for name, p in families:
        nr = norms(p, 1e-10)
        for d in (1, 2, 3):
            rep = check_conditions(1.0, d, p, nr)
            yield {
                "family": name,
                "d": d,
                "cbar": rep.cbar,
                "l1_g0pp": nr.l1_g0pp,
                "beta_max_fcond": rep.beta_max_fcond,
                "beta_max_alt9": rep.beta_max_9,
                "beta_max_alt11": rep.beta_max_11,
            }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    table = list(rows())
    header = list(table[0].keys())
    print(" | ".join(f"{h:>16}" for h in header))
    for r in table:
        print(" | ".join(f"{r[h]:>16.6g}" if not isinstance(r[h], str) else f"{r[h]:>16}" for h in header))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(",".join(header) + "\n")
            for r in table:
                fh.write(",".join(str(r[h]) for h in header) + "\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
