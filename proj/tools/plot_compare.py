#!/usr/bin/env python3
"""Plot utility ratio and gain from a compare.csv written by `cac compare`."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="compare.csv")
    ap.add_argument("-o", "--out", default="compare.png")
    args = ap.parse_args()

    df = pd.read_csv(args.csv, comment="#").sort_values("load")

    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.5))
    left.plot(df["load"], df["utility_ratio"], "o-")
    left.set_xlabel("offered load (BU-Erlangs)")
    left.set_ylabel("MDP / NAG utility")

    right.errorbar(df["load"], 100 * df["utility_gain"], yerr=196 * df["gain_se"], fmt="s-", capsize=3)
    right.set_xlabel("offered load (BU-Erlangs)")
    right.set_ylabel("MDP gain over NAG (%)")

    fig.tight_layout()
    fig.savefig(args.out, dpi=120)


if __name__ == "__main__":
    main()
