#!/usr/bin/env python3
"""Bar chart of cascade estimates per grown link, with 3-sigma whiskers."""

import argparse

import matplotlib.pyplot as plt

from plotlib import SchemaError, read_report, run, save


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("report", help="verify-cascade JSON report")
    ap.add_argument("-o", "--out", required=True)
    args = ap.parse_args()
    payload = read_report(args.report, expect_suite="cascade")
    rows = payload["report"]["rows"]
    if not rows:
        raise SchemaError(f"{args.report}: empty cascade report")
    ks = [row["k"] for row in rows]
    means = [row["mean"] for row in rows]
    errs = [3 * row["stderr"] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(ks)), means, yerr=errs, capsize=5, color="tab:purple",
           alpha=0.75)
    targets = [row.get("target") for row in rows]
    if any(t is not None for t in targets):
        for i, t in enumerate(targets):
            if t is not None:
                ax.hlines(t, i - 0.4, i + 0.4, color="k")
    ax.set_xticks(range(len(ks)))
    ax.set_xticklabels([f"link {k}" for k in ks])
    ax.set_ylabel("estimate")
    ax.set_title(rows[0].get("alpha", ""))
    return save(fig, args.out)


if __name__ == "__main__":
    run(main)
