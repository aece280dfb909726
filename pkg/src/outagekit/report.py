"""Figure rendering for CLI reports.

Renders matplotlib figures next to the delimited output files so a run's
directory is self-contained. All figures use the Agg backend and fixed
metadata so repeated runs produce identical bytes.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

FIG_DPI = 120
_PNG_METADATA = {"Software": "outagekit"}


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=FIG_DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def exponent_figure(rows: Sequence[dict], label: str, path: str) -> None:
    """Exponent-vs-eta curve; rows carry eta_db, exponent, maybe closed_form."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    x = [r["eta_db"] for r in rows]
    ax.plot(x, [r["exponent"] for r in rows], "-", color="tab:blue", label="numeric")
    if rows and rows[0].get("closed_form") is not None:
        ax.plot(
            x,
            [r["closed_form"] for r in rows],
            "--",
            color="tab:orange",
            label="closed form",
        )
    ax.set_xlabel("energy per nat (dB)")
    ax.set_ylabel("outage exponent")
    ax.set_title(label)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def feedback_figure(
    curves: Sequence[tuple], envelope: Sequence[dict], path: str
) -> None:
    """One line per (tau, g0) plus the dashed threshold envelope.

    curves is a sequence of ((tau, g0), rows) pairs with row dicts carrying
    eta_db and exponent.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (tau, g0), rows in curves:
        if not rows:
            continue
        ax.plot(
            [r["eta_db"] for r in rows],
            [r["exponent"] for r in rows],
            "-",
            label=f"tau={tau:g}, g0={g0:g}",
        )
    if envelope:
        ax.plot(
            [r["eta_db"] for r in envelope],
            [r["exponent"] for r in envelope],
            "k--",
            label="envelope",
        )
    ax.set_xlabel("energy per nat (dB)")
    ax.set_ylabel("outage exponent")
    ax.set_title("feedback protocol exponents")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def outage_figure(
    rows: Sequence[dict],
    slope: Optional[float],
    intercept: Optional[float],
    analytical: Optional[float],
    path: str,
) -> None:
    """-log outage against K with the fitted and analytical slopes."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    pts = [r for r in rows if r["outage"] > 0.0]
    ks = [r["K"] for r in pts]
    ys = [-math.log(r["outage"]) for r in pts]
    ax.plot(ks, ys, "o", color="tab:blue", label="estimate")
    if slope is not None and intercept is not None and ks:
        grid = [min(ks), max(ks)]
        ax.plot(
            grid,
            [intercept + slope * k for k in grid],
            "-",
            color="tab:orange",
            label=f"fit slope {slope:.4f}",
        )
        if analytical is not None:
            # reference line with the analytical slope through the fit center
            kc = sum(ks) / len(ks)
            yc = intercept + slope * kc
            ax.plot(
                grid,
                [yc + analytical * (k - kc) for k in grid],
                "--",
                color="tab:green",
                label=f"analytical slope {analytical:.4f}",
            )
    ax.set_xlabel("number of parallel channels K")
    ax.set_ylabel("-log outage probability")
    ax.set_title("empirical outage decay")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
