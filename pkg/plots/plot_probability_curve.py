#!/usr/bin/env python3
"""Overlay estimates with 3-sigma bands against their closed-form targets.

Input: a verify report JSON whose rows carry estimate/mean, stderr and
target fields (the crossing and cascade suites do).
"""

import argparse

import matplotlib.pyplot as plt

from plotlib import SchemaError, read_report, run, save


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("report")
    ap.add_argument("-o", "--out", required=True)
    args = ap.parse_args()
    payload = read_report(args.report)
    rows = payload.get("report", {}).get("rows", [])
    pts = []
    for row in rows:
        est = row.get("estimate", row.get("mean"))
        if est is None or "stderr" not in row:
            continue
        pts.append((est, row["stderr"], row.get("target")))
    if not pts:
        raise SchemaError(f"{args.report}: no estimate rows to plot")
    xs = range(len(pts))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(xs, [p[0] for p in pts], yerr=[3 * p[1] for p in pts],
                fmt="o", capsize=4, label="estimate +- 3 stderr")
    targets = [(i, p[2]) for i, p in enumerate(pts) if p[2] is not None]
    if targets:
        ax.plot([t[0] for t in targets], [t[1] for t in targets], "k_",
                markersize=18, label="closed form")
    ax.set_xticks(list(xs))
    ax.set_xlabel("row")
    ax.set_ylabel("probability / value")
    ax.set_title(f"suite: {payload.get('suite', '?')}")
    ax.legend(loc="best")
    return save(fig, args.out)


if __name__ == "__main__":
    run(main)
