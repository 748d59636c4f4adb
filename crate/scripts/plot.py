#!/usr/bin/env python3
"""Plot CSV files written by `sdpp simulate`, `sdpp ensemble` or `sdpp sweep`.

Usage:
    python scripts/plot.py run.csv [more.csv ...] [-o figure.png]
    python scripts/plot.py sweep_dir/ [-o figure.png]
"""

import argparse
import csv
import io
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_csv(path):
    meta = {}
    body = []
    with open(path) as f:
        for line in f:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                meta[key] = value
            else:
                body.append(line)
    rows = list(csv.DictReader(io.StringIO("".join(body))))
    cols = {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}
    return meta, cols


def expand(paths):
    out = []
    for p in paths:
        if os.path.isdir(p):
            with open(os.path.join(p, "index.csv")) as f:
                lines = [l for l in f if not l.startswith("#")]
            for r in csv.DictReader(io.StringIO("".join(lines))):
                out.append((os.path.join(p, r["file"]), f"{r['param']} = {r['value']}"))
        else:
            out.append((p, os.path.basename(p)))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("inputs", nargs="+")
    ap.add_argument("-o", "--output", default="figure.png")
    args = ap.parse_args()

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 8))
    for path, label in expand(args.inputs):
        meta, cols = read_csv(path)
        if not cols:
            print(f"{path}: no data rows", file=sys.stderr)
            continue
        t = cols["t"]
        for ax, s in zip(axes, "xyz"):
            if s in cols:
                ax.plot(t, cols[s], lw=0.8, label=label)
            else:
                ax.plot(t, cols[f"mean_{s}"], lw=0.8, label=label)
                ax.fill_between(t, cols[f"q025_{s}"], cols[f"q975_{s}"], alpha=0.2)
            ax.set_ylabel(s)
    axes[-1].set_xlabel("t")
    axes[0].legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
