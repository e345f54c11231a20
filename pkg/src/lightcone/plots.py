"""Figure rendering for run reports.

Every report-producing command drops PNG figures next to its CSV/JSON
output. The Agg backend keeps this headless-safe.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.4, 4.2)


def plot_norm_series(taus, norms: dict, path, bounds: dict | None = None,
                     title: str = ""):
    """Semilog decay curves with optional exponential reference lines."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for key in sorted(norms):
        series = np.asarray(norms[key])
        pos = series > 0
        ax.semilogy(np.asarray(taus)[pos], series[pos], label=key)
    if bounds:
        for label, exponent in sorted(bounds.items()):
            ref0 = None
            for key in sorted(norms):
                head = np.asarray(norms[key])
                if head.size and head[0] > 0:
                    ref0 = head[0]
                    break
            if ref0 is None:
                continue
            ax.semilogy(taus, ref0 * np.exp(exponent * np.asarray(taus)),
                        "--", lw=1, label=f"{label}: e^({exponent:+.3g} tau)")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel("norm")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_rate_ensemble(rates, target, tol, path, title: str = ""):
    """Fitted rates per sample against the target band."""
    rates = np.asarray(rates, dtype=float)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    idx = np.arange(len(rates))
    ax.plot(idx, rates, "o", ms=4, label="fitted rate")
    ax.axhline(target, color="k", lw=1, label=f"target {target:.4g}")
    ax.axhspan(target - tol, target + tol, color="k", alpha=0.12)
    ax.set_xlabel("sample")
    ax.set_ylabel("fitted rate")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_coefficients(labels, coeffs, path, title: str = ""):
    """Magnitudes of the mode coefficients of a decomposition."""
    mags = np.abs(np.asarray(coeffs))
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.bar(np.arange(len(mags)), mags)
    ax.set_xticks(np.arange(len(mags)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("|coefficient|")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_spectrum(entries, path, title: str = ""):
    """Analytic eigenvalues on the real axis, by family."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for family in sorted({e["family"] for e in entries}):
        vals = [e["lambda"] for e in entries if e["family"] == family]
        ax.plot(vals, np.zeros(len(vals)), "o", ms=6, label=family)
    ax.axvline(0.5, color="k", lw=1, ls="--", label="Re = 1/2")
    ax.set_xlabel(r"$\lambda$")
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
