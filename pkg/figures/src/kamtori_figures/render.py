"""Render kamtori run-directory CSV/JSON files into figures.

This package is a pure presentation layer: it reads the documented CSV
schemas (spectrum.csv, drift.csv, scan*.csv, portrait*.csv) plus the
peaks.json sidecar and draws matplotlib figures. No numerics beyond a
least-squares guide line happen here.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("spectrum", "drift_loglog", "scan_curve", "portrait_grid", "scheme_comparison")

_SCHEMAS = {
    "spectrum": ("line_index", "omega", "abs_amp"),
    "drift_loglog": ("h", "freq_error"),
    "scan_curve": ("h", "err_H"),
    "portrait_grid": ("n", "p", "q_mod_2pi"),
    "scheme_comparison": ("h", "err_H"),
}

DPI = 110


class SchemaError(ValueError):
    """An input file does not match the documented harness schema."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: a kind, its input files, and style options."""

    kind: str
    inputs: Sequence[str]
    output: str
    peaks: Optional[str] = None
    title: str = ""
    labels: Sequence[str] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; valid: {', '.join(KINDS)}")
        if not self.inputs:
            raise SchemaError("at least one input file is required")


def read_table(path: str, required: Sequence[str]) -> Dict[str, np.ndarray]:
    """Read a harness CSV into named float columns, checking the schema."""
    if not os.path.exists(path):
        raise SchemaError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file (no header row)") from None
        for column in required:
            if column not in header:
                raise SchemaError(f"{path}: missing column {column!r} (header: {header})")
        rows = list(reader)
    table: Dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        # converged is 0/1; everything else is float text
        table[name] = np.array([float(row[j]) for row in rows]) if rows else np.empty(0)
    return table


def read_peaks(path: Optional[str]) -> List[dict]:
    if path is None:
        return []
    payload = json.load(open(path))
    peaks: List[dict] = []
    for entries in payload.values():
        peaks.extend(entries)
    return peaks


def _finish(fig, spec: FigureSpec) -> str:
    fig.savefig(spec.output, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    return spec.output


def _draw_spectrum(spec: FigureSpec):
    table = read_table(spec.inputs[0], _SCHEMAS["spectrum"])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    omega = table["omega"]
    amp = table["abs_amp"]
    if omega.size:
        markerline, stemlines, baseline = ax.stem(omega, amp)
        plt.setp(markerline, markersize=4)
        dominant = int(np.argmax(amp))
        ax.annotate(
            f"{omega[dominant]:.4f}",
            xy=(omega[dominant], amp[dominant]),
            xytext=(5, -10),
            textcoords="offset points",
        )
    ax.set_xlabel("frequency (rad / time)")
    ax.set_ylabel("|amplitude|")
    ax.set_title(spec.title or "NAFF spectrum")
    fig.tight_layout()
    return fig


def _draw_drift_loglog(spec: FigureSpec):
    table = read_table(spec.inputs[0], _SCHEMAS["drift_loglog"])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    h = table["h"]
    err = table["freq_error"]
    keep = (h > 0) & (err > 0)
    ax.loglog(h[keep], err[keep], "o-", label="measured")
    if keep.sum() >= 2:
        slope, intercept = np.polyfit(np.log(h[keep]), np.log(err[keep]), 1)
        guide = np.exp(intercept) * h[keep] ** slope
        ax.loglog(h[keep], guide, "--", label=f"slope {slope:.2f}")
    ax.set_xlabel("step size h")
    ax.set_ylabel("frequency error")
    ax.set_title(spec.title or "frequency drift vs step size")
    ax.legend()
    fig.tight_layout()
    return fig


def _draw_scan_curve(spec: FigureSpec):
    table = read_table(spec.inputs[0], _SCHEMAS["scan_curve"])
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    h = table["h"]
    err = table["err_H"]
    keep = err > 0
    if keep.any():
        ax.semilogy(h[keep], err[keep], lw=0.9)
    for peak in read_peaks(spec.peaks):
        ax.annotate(
            f"h={peak['h']:.2f}",
            xy=(peak["h"], peak["error"]),
            xytext=(0, 12),
            textcoords="offset points",
            ha="center",
            arrowprops={"arrowstyle": "->", "lw": 0.8},
        )
    ax.set_xlabel("step size h")
    ax.set_ylabel("relative energy error (inf norm)")
    ax.set_title(spec.title or "invariant error vs step size")
    fig.tight_layout()
    return fig


def _draw_portrait_grid(spec: FigureSpec):
    n_panels = len(spec.inputs)
    cols = min(n_panels, 3)
    rows = (n_panels + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.4 * cols, 3.2 * rows), squeeze=False)
    for idx, path in enumerate(spec.inputs):
        table = read_table(path, _SCHEMAS["portrait_grid"])
        ax = axes[idx // cols][idx % cols]
        ax.plot(table["q_mod_2pi"], table["p"], ".", markersize=1.0)
        label = spec.labels[idx] if idx < len(spec.labels) else os.path.basename(path)
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("q mod 2pi")
        ax.set_ylabel("p")
    for idx in range(n_panels, rows * cols):
        axes[idx // cols][idx % cols].axis("off")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def _draw_scheme_comparison(spec: FigureSpec):
    n_panels = len(spec.inputs)
    cols = 2 if n_panels > 1 else 1
    rows = (n_panels + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(5.0 * cols, 3.4 * rows), squeeze=False)
    for idx, path in enumerate(spec.inputs):
        table = read_table(path, _SCHEMAS["scheme_comparison"])
        ax = axes[idx // cols][idx % cols]
        h = table["h"]
        for name, series in table.items():
            if not name.startswith("err_"):
                continue
            keep = series > 0
            if keep.any():
                ax.semilogy(h[keep], series[keep], lw=0.8, label=name[4:])
        label = spec.labels[idx] if idx < len(spec.labels) else os.path.basename(path)
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("step size h")
        ax.set_ylabel("relative error")
        ax.legend(fontsize=7)
    for idx in range(n_panels, rows * cols):
        axes[idx // cols][idx % cols].axis("off")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


_DRAWERS = {
    "spectrum": _draw_spectrum,
    "drift_loglog": _draw_drift_loglog,
    "scan_curve": _draw_scan_curve,
    "portrait_grid": _draw_portrait_grid,
    "scheme_comparison": _draw_scheme_comparison,
}


def build_figure(spec: FigureSpec):
    """Create the matplotlib Figure for a spec (callers may inspect it)."""
    return _DRAWERS[spec.kind](spec)


def render(spec: FigureSpec) -> str:
    """Draw the figure and write it to spec.output; returns the path."""
    fig = build_figure(spec)
    return _finish(fig, spec)
