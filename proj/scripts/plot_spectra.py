#!/usr/bin/env python3
"""Plot class-mean CMC spectra written by `cmc cmc`.

    python3 scripts/plot_spectra.py out/cmc --muscle BR --dur 4 -o br_4s.png
"""
import argparse
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("cmc_dir", type=pathlib.Path)
    ap.add_argument("--muscle", default="BR")
    ap.add_argument("--dur", default="4")
    ap.add_argument("--fmax", type=float, default=80.0)
    ap.add_argument("-o", "--output", type=pathlib.Path, default=pathlib.Path("cmc_spectra.png"))
    args = ap.parse_args()

    files = sorted(args.cmc_dir.glob(f"*_{args.muscle}_{args.dur}s_*.csv"))
    if not files:
        raise SystemExit(f"no spectra for {args.muscle} at {args.dur} s in {args.cmc_dir}")

    fig, ax = plt.subplots(figsize=(7, 4))
    for f in files:
        df = pd.read_csv(f)
        df = df[df.freq_hz <= args.fmax]
        label = f.stem.rsplit("_", 1)[-1]
        ax.plot(df.freq_hz, df["mean"], label=label)
        ax.fill_between(df.freq_hz, df["mean"] - df["std"], df["mean"] + df["std"], alpha=0.2)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("CMC")
    ax.set_title(f"{args.muscle}, {args.dur} s segments")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(args.output)


if __name__ == "__main__":
    main()
