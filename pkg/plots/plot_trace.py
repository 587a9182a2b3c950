#!/usr/bin/env python3
"""Render a planar trace CSV as a curve with start/end markers."""

import argparse

import matplotlib.pyplot as plt

from plotlib import columns, read_csv, run, save


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", required=True, help="output base path")
    args = ap.parse_args()
    header, rows = read_csv(args.csv, "trace")
    re, im = columns(header, rows, ("re", "im"))
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(re, im, lw=0.7, color="tab:blue")
    ax.plot(re[0], im[0], "o", color="tab:green", label="start")
    ax.plot(re[-1], im[-1], "s", color="tab:red", label="end")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_aspect("equal")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.legend(loc="best")
    return save(fig, args.out)


if __name__ == "__main__":
    run(main)
