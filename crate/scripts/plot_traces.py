"""Plot the ratio columns of a qnlab output directory against the envelope.

    qnlab figure fig1 --out out/fig1
    python3 scripts/plot_traces.py out/fig1 fig1.png
"""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

FLOOR = 1e-18


def load(path):
    return pd.read_csv(path, comment="#", na_values=["nan"], keep_default_na=False)


def main(out_dir, target):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    env = None
    for csv in sorted(Path(out_dir).glob("*.csv")):
        df = load(csv)
        ax.semilogy(df["k"], df["ratio"].clip(lower=FLOOR), marker=".", label=csv.stem)
        if env is None or len(df) > len(env):
            env = df[["k", "env"]]
    if env is not None:
        ax.semilogy(env["k"], env["env"].clip(lower=FLOOR), "k--", label="(1/sqrt k)^k")
    ax.set_xlabel("k")
    ax.set_ylabel("weighted residual ratio")
    ax.set_ylim(FLOOR, 10)
    ax.legend()
    fig.tight_layout()
    fig.savefig(target, dpi=150)


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
