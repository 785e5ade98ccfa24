"""Render benchmark CSVs as figures.

Four figure ids:

* ``fig1`` / ``fig2`` -- threshold sweeps: one panel per epsilon with
  |bias| dotted, standard error dashed, and RMSE solid against the
  clipping threshold (log x); an optional second input CSV with the
  histogram contract is drawn as a shaded distribution silhouette.
* ``fig3a`` -- bias of the offset-bin estimator vs the fixed-bin
  baseline across true means, with shaded 95% confidence bands.
* ``fig3b`` -- overlaid sampling-distribution histograms of the two
  estimators, the true mean as a dashed vertical line.

Rendering is a pure function of (CSV bytes, spec): the backend, figure
geometry, and PNG metadata are pinned, so identical inputs give
pixel-identical files.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_IDS = ("fig1", "fig2", "fig3a", "fig3b")

SWEEP_COLUMNS = [
    "mechanism", "eps", "delta", "param", "trials", "failures",
    "bias", "bias_ci", "se", "rmse", "rmse_ci",
]
HIST_COLUMNS = ["mechanism", "bin_left", "bin_right", "count"]

PNG_METADATA = {"Software": "dpmean-figures"}


class SchemaError(ValueError):
    """An input CSV does not carry the expected column contract."""


@dataclass
class FigureSpec:
    inputs: list
    figure: str
    output: str
    logx: bool = True
    dpi: int = 110

    def __post_init__(self):
        if self.figure not in FIGURE_IDS:
            raise ValueError(f"unknown figure id '{self.figure}'; expected one of {FIGURE_IDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


# ---------------------------------------------------------------------------
# CSV contract parsing (self-contained on purpose: the contract is the
# interface, not the producer's python API)
# ---------------------------------------------------------------------------


def _split_comments(path):
    comments, rows = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in fh:
            (comments if line.startswith("#") else rows).append(line)
    return comments, rows


def _check_columns(header, expected, path):
    if header is None:
        raise SchemaError(f"'{path}' has no header row")
    for want, got in zip(expected, header + [None] * len(expected)):
        if got != want:
            raise SchemaError(
                f"'{path}' does not match the column contract: expected column "
                f"'{want}', found '{got}' (full contract: {','.join(expected)})"
            )
    if len(header) != len(expected):
        raise SchemaError(f"'{path}' carries extra columns beyond the contract: {header[len(expected):]}")


def read_sweep_rows(path):
    """Rows of the sweep contract as dicts with float fields."""
    _, lines = _split_comments(path)
    reader = csv.reader(lines)
    header = next(reader, None)
    _check_columns(header, SWEEP_COLUMNS, path)
    rows = []
    for rec in reader:
        if not rec:
            continue
        row = dict(zip(SWEEP_COLUMNS, rec))
        for key in SWEEP_COLUMNS[1:]:
            row[key] = float(row[key])
        rows.append(row)
    if not rows:
        raise SchemaError(f"'{path}' has no data rows")
    return rows


def read_histogram_tables(path):
    """Histogram-contract groups plus the per-mechanism data means from
    the header comments."""
    comments, lines = _split_comments(path)
    means = {}
    for line in comments:
        body = line[1:].strip()
        if body.startswith("data_mean["):
            name, _, val = body[len("data_mean["):].partition("]:")
            means[name] = float(val)
    reader = csv.reader(lines)
    header = next(reader, None)
    _check_columns(header, HIST_COLUMNS, path)
    groups: dict[str, list] = {}
    order = []
    for rec in reader:
        if not rec:
            continue
        name = rec[0]
        if name not in groups:
            groups[name] = []
            order.append(name)
        groups[name].append((float(rec[1]), float(rec[2]), float(rec[3])))
    if not groups:
        raise SchemaError(f"'{path}' has no data rows")
    return [(name, groups[name], means.get(name)) for name in order]


# ---------------------------------------------------------------------------
# figure layouts
# ---------------------------------------------------------------------------


def _render_threshold_sweep(spec: FigureSpec):
    rows = read_sweep_rows(spec.inputs[0])
    silhouette = read_histogram_tables(spec.inputs[1]) if len(spec.inputs) > 1 else None
    eps_values = sorted({r["eps"] for r in rows})
    ncols = min(2, len(eps_values))
    nrows = (len(eps_values) + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(5.2 * ncols, 3.4 * nrows), dpi=spec.dpi, squeeze=False
    )
    for idx, eps in enumerate(eps_values):
        ax = axes[idx // ncols][idx % ncols]
        sub = sorted((r for r in rows if r["eps"] == eps), key=lambda r: r["param"])
        t = [r["param"] for r in sub]
        ax.plot(t, [abs(r["bias"]) for r in sub], linestyle=":", color="tab:red", label="|bias|")
        ax.plot(t, [r["se"] for r in sub], linestyle="--", color="tab:blue", label="std. error")
        ax.plot(t, [r["rmse"] for r in sub], linestyle="-", color="black", label="RMSE")
        if silhouette is not None:
            name, bins, _ = silhouette[0]
            lefts = np.array([b[0] for b in bins])
            rights = np.array([b[1] for b in bins])
            counts = np.array([b[2] for b in bins])
            top = max(max(abs(r["bias"]) for r in sub), max(r["rmse"] for r in sub))
            scale = 0.9 * top / counts.max() if counts.max() > 0 else 1.0
            ax.fill_between(
                np.repeat((lefts + rights) / 2.0, 1), counts * scale,
                color="0.85", zorder=0, label="data (not to scale)",
            )
        if spec.logx:
            ax.set_xscale("log")
        ax.set_xlabel("clipping threshold T")
        ax.set_title(f"eps = {eps:g}")
        if idx == 0:
            ax.legend(loc="upper right", fontsize=8)
    for idx in range(len(eps_values), nrows * ncols):
        axes[idx // ncols][idx % ncols].set_axis_off()
    fig.tight_layout()
    return fig


def _render_bias_comparison(spec: FigureSpec):
    rows = read_sweep_rows(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=spec.dpi)
    styles = {"fine": ("tab:blue", "bias-corrected"), "fine-kv": ("tab:orange", "fixed bins")}
    for mech in sorted({r["mechanism"] for r in rows}):
        sub = sorted((r for r in rows if r["mechanism"] == mech), key=lambda r: r["param"])
        mu = np.array([r["param"] for r in sub])
        bias = np.array([r["bias"] for r in sub])
        ci = np.array([r["bias_ci"] for r in sub])
        color, label = styles.get(mech, ("tab:green", mech))
        ax.plot(mu, bias, "-", color=color, label=label)
        ax.fill_between(mu, bias - ci, bias + ci, color=color, alpha=0.25, linewidth=0)
    ax.axhline(0.0, linestyle="--", color="0.4", linewidth=0.9)
    ax.set_xlabel("true mean")
    ax.set_ylabel("bias")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def _render_sampling_histograms(spec: FigureSpec):
    tables = read_histogram_tables(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=spec.dpi)
    colors = {"fine": "tab:blue", "fine-kv": "tab:orange"}
    mean_line = None
    for name, bins, data_mean in tables:
        edges = np.array([b[0] for b in bins] + [bins[-1][1]])
        counts = np.array([b[2] for b in bins])
        ax.stairs(counts, edges, fill=True, alpha=0.45, color=colors.get(name, None), label=name)
        if data_mean is not None:
            mean_line = data_mean
    if mean_line is not None:
        ax.axvline(mean_line, linestyle="--", color="black", linewidth=1.1, label="true mean")
    ax.set_xlabel("estimate")
    ax.set_ylabel("trials per bin")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


_LAYOUTS = {
    "fig1": _render_threshold_sweep,
    "fig2": _render_threshold_sweep,
    "fig3a": _render_bias_comparison,
    "fig3b": _render_sampling_histograms,
}


def render(spec: FigureSpec) -> str:
    """Render the figure and return the output path.

    All validation happens before anything is written, so a bad input
    never leaves an empty or stale image behind.
    """
    fig = _LAYOUTS[spec.figure](spec)
    try:
        fig.savefig(spec.output, metadata=PNG_METADATA)
    finally:
        plt.close(fig)
    return spec.output


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpmean-figures", description=__doc__)
    parser.add_argument("--input", action="append", required=True,
                        help="input CSV (repeatable; fig1/fig2 accept an optional "
                             "second histogram CSV as the distribution silhouette)")
    parser.add_argument("--figure", required=True, choices=FIGURE_IDS)
    parser.add_argument("--output", required=True, help="output image path (png)")
    parser.add_argument("--linear-x", action="store_true", help="linear threshold axis")
    parser.add_argument("--dpi", type=int, default=110)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        inputs=list(args.input), figure=args.figure, output=args.output,
        logx=not args.linear_x, dpi=args.dpi,
    )
    try:
        path = render(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
