#!/usr/bin/env python3
"""Render traced lattice interfaces from an ising-interface CSV."""

import argparse
from itertools import groupby

import matplotlib.pyplot as plt

from plotlib import read_csv, run, save


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", required=True)
    args = ap.parse_args()
    header, rows = read_csv(args.csv, "ising-interface")
    si = header.index("sample")
    xi, yi = header.index("x"), header.index("y")
    fig, ax = plt.subplots(figsize=(6, 6))
    for sample, grp in groupby(rows, key=lambda r: r[si]):
        pts = [(float(r[xi]), float(r[yi])) for r in grp]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], lw=1.0,
                label=f"sample {sample}")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if len(ax.lines) <= 8:
        ax.legend(loc="best", fontsize=8)
    return save(fig, args.out)


if __name__ == "__main__":
    run(main)
