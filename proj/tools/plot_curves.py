#!/usr/bin/env python3
"""Plot curve.csv (with its pointwise band) and optionally true_curve.csv files."""
import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--curve", help="curve.csv written by `cmpcurve estimate`")
    ap.add_argument("--truth", action="append", default=[], help="true_curve.csv (repeatable)")
    ap.add_argument("--out", default="curve.png")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(5, 4))
    if args.curve:
        c = pd.read_csv(args.curve, comment="#")
        ax.plot(c["v"], c["r_hat"], color="C0", label="estimate")
        if c["ci_lo"].notna().all():
            ax.fill_between(c["v"], c["ci_lo"], c["ci_hi"], color="C0", alpha=0.2, label="pointwise CI")
    for k, path in enumerate(args.truth):
        t = pd.read_csv(path, comment="#")
        ax.plot(t["v"], t["r_true"], color=f"C{k + 1}", linestyle="--", label=path)
    ax.set_xlabel("v (score quantile)")
    ax.set_ylabel("R(v)")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend(loc="upper left", fontsize="small")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
