"""Figures rendered next to the CSV outputs (non-interactive backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SCHEME_STYLE = {
    "adaptive": ("C0", "o"),
    "agnostic": ("C1", "s"),
    "aware": ("C2", "^"),
    "fixed": ("C4", "D"),
    "pint": ("C3", "v"),
    "sketch": ("C5", "P"),
}


def _style(scheme):
    return SCHEME_STYLE.get(scheme, ("C7", "x"))


def _finite(*xs) -> bool:
    return all(x is not None and not (isinstance(x, float) and math.isnan(x)) for x in xs)


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_summary(records, path) -> None:
    """Overhead against violation fraction for every successful run."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for scheme in sorted({r["scheme"] for r in records}):
        pts = [(r["bits_per_packet"], r["violation_fraction"]) for r in records
               if r["scheme"] == scheme and r["status"] == "ok" and _finite(r.get("bits_per_packet"), r.get("violation_fraction"))]
        if pts:
            c, m = _style(scheme)
            ax.scatter(*zip(*pts), color=c, marker=m, label=scheme)
    ax.set_xlabel("telemetry bits per packet")
    ax.set_ylabel("violation fraction")
    if ax.has_data():
        ax.legend(frameon=False)
    _save(fig, path)


def plot_frontier(points, front, path, by: str = "all") -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for scheme in sorted({p.scheme for p in points}):
        c, m = _style(scheme)
        mine = [p for p in points if p.scheme == scheme]
        ax.scatter([p.bits_per_packet for p in mine], [p.violation_fraction for p in mine], color=c, marker=m, alpha=0.35)
        f = sorted((p for p in front if p.scheme == scheme), key=lambda p: p.bits_per_packet)
        ax.plot([p.bits_per_packet for p in f], [p.violation_fraction for p in f], color=c, marker=m, label=scheme)
    ax.set_xlabel("telemetry bits per packet")
    ax.set_ylabel(f"violation fraction ({by})")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_micro(kind: str, rows, path) -> None:
    if kind == "tau":
        fig, ax = plt.subplots(figsize=(5.5, 4))
        ax.plot([r["tau_s"] for r in rows], [r["bits_per_packet"] for r in rows], "o-", color="C0")
        ax.set_xlabel("epoch length (s)")
        ax.set_ylabel("telemetry bits per packet", color="C0")
        ax2 = ax.twinx()
        ax2.plot([r["tau_s"] for r in rows], [r["violation_fraction"] for r in rows], "s--", color="C3")
        ax2.set_ylabel("violation fraction", color="C3")
    elif kind == "buckets":
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for w in sorted({r["w"] for r in rows}):
            mine = [r for r in rows if r["w"] == w]
            ds = sorted({r["d"] for r in mine})
            avg = [sum(r["steady_miss_rate"] for r in mine if r["d"] == d) / sum(1 for r in mine if r["d"] == d) for d in ds]
            ax.plot(ds, avg, "o-", label=f"w={w}")
        ax.set_yscale("symlog", linthresh=1e-4)
        ax.set_xlabel("arrays d")
        ax.set_ylabel("steady-state miss rate")
        ax.legend(frameon=False)
    else:
        fig, ax = plt.subplots(figsize=(5.5, 4))
        n = [r["slices"] for r in rows]
        for key, label in (("lookup_ms", "lookup build"), ("exact_ms", "exact solve"), ("greedy_ms", "greedy solve")):
            ax.plot(n, [r[key] for r in rows], "o-", label=label)
        ax.set_yscale("log")
        ax.set_xlabel("slices")
        ax.set_ylabel("wall time (ms)")
        ax.legend(frameon=False)
    _save(fig, path)
