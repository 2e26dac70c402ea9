"""Figures for the CLI report path.

matplotlib is imported lazily so the numerical core and the CSV/JSON outputs
never depend on it. Every function writes one file and returns its path.
"""

from __future__ import annotations

import math
from pathlib import Path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _figure(width=6.0, height=None):
    plt = _pyplot()
    if height is None:
        height = width * (math.sqrt(5) - 1.0) / 2.0
    fig, ax = plt.subplots(figsize=(width, height))
    ax.tick_params(direction="in", which="both", top=True, right=True)
    return plt, fig, ax


def _save(plt, fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps repeated renders identical
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
    return path


def _label(n) -> str:
    return "N = inf" if n == 0 else f"N = {n}"


def plot_sweep(rows, out_dir, stem="sweep") -> list[Path]:
    """E_v and dE_v/dlambda against lambda, one line per size.

    ``rows`` are dicts with the sweep CSV columns.
    """
    by_n: dict[int, list[dict]] = {}
    for r in rows:
        by_n.setdefault(r["N"], []).append(r)
    paths = []
    for key, ylabel, name in (
        ("Ev", r"$E_v$", "entropy"),
        ("dEv_dlambda", r"$dE_v/d\lambda$", "entropy_derivative"),
        ("concurrence", r"$C$", "concurrence"),
        ("dC_dlambda", r"$dC/d\lambda$", "concurrence_derivative"),
    ):
        plt, fig, ax = _figure()
        drawn = False
        for n, rs in sorted(by_n.items()):
            ys = [r[key] for r in rs]
            if all(y is None or math.isnan(y) for y in ys):
                continue
            ax.plot([r["lambda"] for r in rs], ys, label=_label(n))
            drawn = True
        if not drawn:
            plt.close(fig)
            continue
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
        paths.append(_save(plt, fig, Path(out_dir) / f"{stem}_{name}.png"))
    return paths


def plot_scaling(report: dict, out_dir, stem="scaling") -> list[Path]:
    """Pseudo-critical drift (log-log) and the ln N growth of the derivative."""
    paths = []
    lm = report.get("lambda_m") or []
    if lm:
        plt, fig, ax = _figure()
        ns = [r["n"] for r in lm]
        ax.loglog(ns, [1.0 - r["lambda_m"] for r in lm], "o", label="data")
        fit = report.get("drift_fit")
        if fit:
            ax.loglog(ns, [fit["amplitude"] * n ** fit["exponent"] for n in ns], "-",
                      label=f"slope {fit['exponent']:.3f}")
        ax.set_xlabel("N")
        ax.set_ylabel(r"$1-\lambda_m$")
        ax.legend(frameon=False)
        paths.append(_save(plt, fig, Path(out_dir) / f"{stem}_lambda_m.png"))

    crit = report.get("critical_samples") or []
    if crit:
        plt, fig, ax = _figure()
        ns = [r["n"] for r in crit]
        ax.semilogx(ns, [r["d_ev_at_lambda_c"] for r in crit], "s-", label=r"$\lambda=1$")
        if all(r.get("d_ev_at_lambda_m") is not None for r in crit):
            ax.semilogx(ns, [r["d_ev_at_lambda_m"] for r in crit], "o-", label=r"$\lambda=\lambda_m$")
        ax.set_xlabel("N")
        ax.set_ylabel(r"$dE_v/d\lambda$")
        ax.legend(frameon=False)
        paths.append(_save(plt, fig, Path(out_dir) / f"{stem}_log_n.png"))

    thermo = report.get("thermodynamic_samples") or []
    if thermo:
        plt, fig, ax = _figure()
        for side, marker in (("below", "o"), ("above", "s")):
            pts = [r for r in thermo if r["side"] == side]
            if pts:
                ax.semilogx([abs(r["lambda"] - 1.0) for r in pts], [r["d_ev"] for r in pts],
                            marker, label=side)
        ax.set_xlabel(r"$|\lambda-1|$")
        ax.set_ylabel(r"$dE_v/d\lambda$")
        ax.legend(frameon=False)
        paths.append(_save(plt, fig, Path(out_dir) / f"{stem}_log_lambda.png"))
    return paths


def plot_collapse(curves, nu: float, out_dir, stem="collapse") -> Path:
    """Rescaled curves at the fitted exponent; ``curves`` maps N to (x, y) arrays."""
    plt, fig, ax = _figure()
    for n, (x, y) in sorted(curves.items()):
        ax.plot(x, y, ".-", ms=3, label=_label(n))
    ax.set_xlabel(rf"$N^{{1/\nu}}(\lambda-\lambda_m)$, $\nu={nu:.3f}$")
    ax.set_ylabel(r"$dE_v/d\lambda - dE_v/d\lambda|_{\lambda_m}$")
    ax.legend(frameon=False)
    return _save(plt, fig, Path(out_dir) / f"{stem}.png")
