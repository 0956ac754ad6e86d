"""Figure rendering for the report path.

Every CLI report writes a PNG next to its delimited output.  Rendering is
headless (Agg) and intentionally plain; the CSV/JSON files stay the source
of truth for downstream tooling.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def ber_figure(rows, path):
    """Error rate vs gamma, one line per decision rule, log-log axes."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    rules = sorted({r["rule"] for r in rows})
    for rule in rules:
        pts = [(r["gamma"], r["error_rate"], r["ci_low"], r["ci_high"])
               for r in rows if r["rule"] == rule]
        pts.sort()
        x = np.array([p[0] for p in pts], dtype=float)
        y = np.array([p[1] for p in pts])
        lo = np.array([p[2] for p in pts])
        hi = np.array([p[3] for p in pts])
        y_plot = np.where(y > 0, y, np.nan)  # zero estimates have no log position
        err = np.vstack([np.maximum(y - lo, 0), np.maximum(hi - y, 0)])
        ax.errorbar(x, y_plot, yerr=err, marker="o", capsize=3, label=rule)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("bandwidth / bit-rate ratio")
    ax.set_ylabel("decision error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def keyrate_figure(rows, path):
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    pts = sorted((r["wire_length_m"], r["key_rate_bps"]) for r in rows)
    ax.loglog([p[0] for p in pts], [p[1] for p in pts], marker="o")
    ax.set_xlabel("wire length (m)")
    ax.set_ylabel("secure key rate (bit/s)")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def leak_figure(stats: dict, path):
    """Per-case observer accuracy with the chance line for the shared level."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    cases = sorted(stats["accuracy_by_case"])
    acc = [stats["accuracy_by_case"][c] for c in cases]
    ax.bar(cases, acc, color=["#777777" if c in ("00", "11") else "#c0504d" for c in cases])
    ax.axhline(0.5, color="black", linestyle="--", linewidth=1, label="coin flip")
    if stats.get("secure_accuracy") is not None:
        ax.errorbar(
            [len(cases) - 0.5 + 0.0], [stats["secure_accuracy"]],
            yerr=[[stats["secure_accuracy"] - stats["ci_low"]],
                  [stats["ci_high"] - stats["secure_accuracy"]]],
            fmt="D", color="#1f4e79", capsize=4, label="secure accuracy (95% CI)",
        )
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("true connection case")
    ax.set_ylabel("observer accuracy")
    ax.legend(loc="lower left")
    _save(fig, path)


def session_figure(stats: dict, path):
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    counts = stats["decision_counts"]
    keys = ["LOW", "MID", "HIGH"]
    ax.bar(keys, [counts.get(k, 0) for k in keys],
           color=["#777777", "#2e7d32", "#777777"])
    ax.set_ylabel("rounds")
    ax.set_xlabel("decided level")
    ax.set_title(
        f"{stats['bits_delivered']} bits in {stats['rounds_total']} rounds", fontsize=10
    )
    _save(fig, path)


def balance_figure(header, rows, station_ids, path):
    """Buffer levels of the fixed stations plus global counters over time."""
    idx = {name: i for i, name in enumerate(header)}
    t = [r[idx["time_s"]] for r in rows]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for node in station_ids:
        if node in idx:
            ax.plot(t, [r[idx[node]] for r in rows], label=node, linewidth=1.2)
    for counter, style in (("held", "-"), ("consumed", "--"), ("expired", ":")):
        ax.plot(t, [r[idx[counter]] for r in rows], style, color="black",
                label=f"vehicles {counter}", linewidth=1.0, alpha=0.7)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("key bits")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    _save(fig, path)
