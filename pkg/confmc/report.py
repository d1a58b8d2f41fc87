"""Plots for bounded reach curves and batch runtimes."""

from __future__ import annotations

import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

import pandas as pd


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_reach_curve(
    values: Sequence[Fraction],
    out_path: Union[str, Path],
    title: str = "Bounded reach probability",
    threshold: Optional[Fraction] = None,
) -> Path:
    """Step plot of P(reach H within k steps) for k = 0..len(values)-1."""
    plt = _pyplot()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(8, 5))
    ax.step(range(len(values)), [float(v) for v in values], where="post", marker="o")
    if threshold is not None:
        ax.axhline(float(threshold), color="tab:red", linestyle="--", label=f"threshold {threshold}")
        ax.legend()
    ax.set_title(title)
    ax.set_xlabel("depth k")
    ax.set_ylabel("probability")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True)
    fig.tight_layout()
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    print(f"  Saved: {out}", file=sys.stderr)
    return out


def runtime_summary(df: pd.DataFrame) -> pd.DataFrame:
    """Group batch results by benchmark name: trials, runtime mean/std, verdict counts."""
    grouped = df.groupby("name").agg(
        command=("command", "first"),
        trials=("runtime_s", "size"),
        runtime_mean=("runtime_s", "mean"),
        runtime_std=("runtime_s", "std"),
    )
    verdicts = df.groupby(["name", "verdict"]).size().unstack(fill_value=0)
    verdicts.columns = [f"n_{c}" for c in verdicts.columns]
    return grouped.join(verdicts).reset_index()


def plot_runtime(summary: pd.DataFrame, out_path: Union[str, Path]) -> Path:
    """Bar chart of mean runtime per benchmark with std error bars."""
    plt = _pyplot()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(summary)), 5))
    ax.bar(
        summary["name"],
        summary["runtime_mean"],
        yerr=summary["runtime_std"].fillna(0.0),
        capsize=4,
    )
    ax.set_title("Average runtime per benchmark")
    ax.set_xlabel("benchmark")
    ax.set_ylabel("runtime (s)")
    ax.grid(True, axis="y")
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    print(f"  Saved: {out}", file=sys.stderr)
    return out
