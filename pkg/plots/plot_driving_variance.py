#!/usr/bin/env python3
"""Variance of driving functions against capacity time, with a slope line."""

import argparse

import matplotlib.pyplot as plt

from plotlib import SchemaError, columns, read_csv, run, save


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csvs", nargs="+", help="driving CSVs from one run")
    ap.add_argument("-o", "--out", required=True)
    args = ap.parse_args()
    paths = []
    for f in args.csvs:
        header, rows = read_csv(f, "driving")
        ts, ws = columns(header, rows, ("t", "w"))
        paths.append((ts, ws))
    if len(paths) < 2:
        raise SchemaError("need at least two driving files for a variance")
    n = min(len(p[1]) for p in paths)
    ts = paths[0][0][:n]
    means = [sum(p[1][k] for p in paths) / len(paths) for k in range(n)]
    var = [
        sum((p[1][k] - means[k]) ** 2 for p in paths) / (len(paths) - 1)
        for k in range(n)
    ]
    num = sum(t * v for t, v in zip(ts, var))
    den = sum(t * t for t in ts) or 1.0
    slope = num / den
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, var, lw=1.2, label="Var[W_t]")
    ax.plot(ts, [slope * t for t in ts], "k--",
            label=f"slope fit = {slope:.2f}")
    ax.set_xlabel("capacity time t")
    ax.set_ylabel("variance")
    ax.legend(loc="best")
    return save(fig, args.out)


if __name__ == "__main__":
    run(main)
