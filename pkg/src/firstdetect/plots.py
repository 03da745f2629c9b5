"""Static SVG line plots of sweep results (one file per detector and panel)."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib import colors  # noqa: E402

# keep the SVG text stable between runs
matplotlib.rcParams["svg.hashsalt"] = "firstdetect"
matplotlib.rcParams["svg.fonttype"] = "none"

OVERLAP_CMAP = "coolwarm"


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def _overlap_colors(overlaps):
    norm = colors.Normalize(vmin=-1.0, vmax=1.0)
    cmap = plt.get_cmap(OVERLAP_CMAP)
    return {ov: cmap(norm(ov)) for ov in overlaps}, norm, cmap


def _colorbar(fig, ax, norm, cmap):
    sm = plt.cm.ScalarMappable(norm=norm, cmap=cmap)
    cb = fig.colorbar(sm, ax=ax)
    cb.set_label(r"$\pm|\langle\phi_1|\phi_2\rangle|^2$")


def moduli_figure(scan, J: float = 1.0, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(scan.tau_grid * J, scan.moduli, color="k", lw=0.7)
    for t, _ in scan.resonant_times:
        ax.axvline(t * J, color="tab:red", lw=0.5, ls=":")
    ax.set_xlabel(r"$\tau J/\hbar$")
    ax.set_ylabel(r"$|\lambda_j|$")
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    fig.tight_layout()
    return _svg(fig)


def _series(rows, detector, overlap, attr):
    sel = [r for r in rows if r.detector == detector and r.overlap_signed == overlap]
    tau = np.array([r.tau for r in sel])
    vals = np.array([np.nan if getattr(r, attr) is None else getattr(r, attr) for r in sel], dtype=float)
    return tau, vals


def panel_figure(rows, detector: str, attr: str, ylabel: str, *, log: bool = False, title: str = "") -> str:
    overlaps = sorted({r.overlap_signed for r in rows})
    cmap_of, norm, cmap = _overlap_colors(overlaps)
    fig, ax = plt.subplots(figsize=(6, 4))
    for ov in overlaps:
        tau, vals = _series(rows, detector, ov, attr)
        ax.plot(tau, vals, color=cmap_of[ov], lw=0.8, label=f"{ov:+.2f}")
    if log:
        ax.set_yscale("log")
    ax.set_xlabel(r"$\tau J/\hbar$")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _colorbar(fig, ax, norm, cmap)
    fig.tight_layout()
    return _svg(fig)


def sweep_svgs(result, base: Path) -> dict:
    """File name -> SVG text for every detector of a sweep result."""
    from .sweep import _detector_slug

    base = Path(base)
    out = {}
    for label in result.config.detectors:
        slug = _detector_slug(label)
        stem = base.with_name(f"{base.stem}_{slug}")
        out[stem.with_name(stem.name + "_S_inf.svg")] = panel_figure(
            result.rows, label, "S_inf", r"$S_\infty$", title=f"detector {label}")
        out[stem.with_name(stem.name + "_t_first.svg")] = panel_figure(
            result.rows, label, "t_first", r"$\langle t_f\rangle J/\hbar$", log=True, title=f"detector {label}")
        if label in result.scans:
            out[stem.with_name(stem.name + "_moduli.svg")] = moduli_figure(
                result.scans[label], result.config.J, title=f"detector {label}")
    return out
