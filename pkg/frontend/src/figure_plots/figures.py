"""Line figures from experiment CSV tables.

Input files are the CSV tables the experiment harness writes: per-trial
rows plus ``mean``/``std`` aggregate rows.  Only the mean rows are drawn.
Styling is fixed in code and every time-dependent output knob is pinned, so
rendering the same CSV twice produces identical bytes.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["FigureSpec", "PRESETS", "PlotError", "load_mean_rows", "plot"]


class PlotError(ValueError):
    """Bad input file or a column the figure needs is missing."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: x column, y columns, grouping and labels."""

    csv_path: str
    x: str
    ys: tuple[str, ...]
    group_by: tuple[str, ...] = ()
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    out_path: str = ""


# One preset per experiment; keys match the CLI --figure choices.
PRESETS = {
    "fig2": dict(
        x="n_f",
        ys=("ssnr_exact", "ssnr_circulant"),
        xlabel="equalizer span (taps)",
        ylabel="shortening SNR (dB)",
        title="Exact vs FFT-based design",
    ),
    "fig3": dict(
        x="snr_db",
        ys=("mu_tir_cholesky", "mu_tir_eigen"),
        xlabel="input SNR (dB)",
        ylabel="worst-case coherence",
        title="Target-response dictionaries",
    ),
    "fig4": dict(
        x="n_f",
        ys=("ssnr_omp_tir", "ssnr_significant_taps"),
        group_by=("n_b",),
        xlabel="equalizer span (taps)",
        ylabel="shortening SNR (dB)",
        title="Greedy target vs significant-taps pruning",
    ),
    "fig4b": dict(
        x="snr_db",
        ys=(
            "mu_cse_cholesky",
            "mu_cse_eigen",
            "mu_cse_gram",
            "mu_cse_circulant",
            "mu_cse_circulant_gram",
        ),
        xlabel="input SNR (dB)",
        ylabel="worst-case coherence",
        title="Equalizer dictionaries",
    ),
    "fig5": dict(
        x="eta_max_db",
        ys=("active_tap_pct",),
        group_by=("n_b",),
        xlabel="loss budget (dB)",
        ylabel="active equalizer taps (%)",
        title="Sparsity vs loss budget",
    ),
    "fig6": dict(
        x="eta_max_db",
        ys=("active_tap_pct",),
        group_by=("dict_tir", "dict_cse", "snr_db"),
        xlabel="loss budget (dB)",
        ylabel="active equalizer taps (%)",
        title="Dictionary comparison",
    ),
}


def spec_for(figure: str, csv_path: str, out_path: str) -> FigureSpec:
    if figure not in PRESETS:
        raise PlotError(f"unknown figure {figure!r}")
    return FigureSpec(csv_path=csv_path, out_path=out_path, **PRESETS[figure])


def load_mean_rows(csv_path: str) -> tuple[list[str], list[dict]]:
    """Header and aggregate-mean rows of an experiment CSV."""
    path = Path(csv_path)
    if not path.is_file():
        raise PlotError(f"no such file: {csv_path}")
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotError(f"{csv_path} is empty")
        header = list(reader.fieldnames)
        rows = [row for row in reader if row.get("trial") == "mean"]
    if not rows:
        raise PlotError(f"{csv_path} has no aggregate rows to draw")
    return header, rows


def _check_columns(spec: FigureSpec, header: list[str]) -> None:
    needed = [spec.x, *spec.ys, *spec.group_by]
    missing = [c for c in needed if c not in header]
    if missing:
        raise PlotError(f"missing column(s) {missing} in {spec.csv_path}")


def plot(spec: FigureSpec) -> str:
    """Render the figure and return the output path.

    One line per (group, y column); the legend comes from the group keys.
    The output format follows the extension (.png or .svg).
    """
    header, rows = load_mean_rows(spec.csv_path)
    _check_columns(spec, header)
    out = Path(spec.out_path)
    fmt = out.suffix.lower().lstrip(".")
    if fmt not in ("png", "svg"):
        raise PlotError(f"unsupported output format {out.suffix!r} (use .png or .svg)")

    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = tuple(row[c] for c in spec.group_by)
        groups.setdefault(key, []).append(row)

    matplotlib.rcParams["svg.hashsalt"] = "figure-plots"
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    for key in sorted(groups):
        block = sorted(groups[key], key=lambda r: float(r[spec.x]))
        xs = [float(r[spec.x]) for r in block]
        prefix = ", ".join(f"{c}={v}" for c, v in zip(spec.group_by, key))
        for y in spec.ys:
            try:
                values = [float(r[y]) for r in block]
            except ValueError as exc:
                raise PlotError(f"column {y!r} is not numeric in {spec.csv_path}") from exc
            label = f"{prefix}: {y}" if prefix else y
            ax.plot(xs, values, marker="o", linewidth=1.4, markersize=3.5, label=label)
    ax.set_xlabel(spec.xlabel or spec.x)
    ax.set_ylabel(spec.ylabel or ", ".join(spec.ys))
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, alpha=0.35)
    ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    metadata = {"Date": None} if fmt == "svg" else {}
    fig.savefig(out, format=fmt, metadata=metadata)
    plt.close(fig)
    return str(out)
