"""Render PSD overlays and EVM sweep curves from simulator CSV files.

Rendering is a pure function of the CSV content and the job options: the
Agg backend, a fixed style, and timestamp-free metadata make repeated runs
byte-identical, so output images can be golden-hashed.
"""
from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

DB_FLOOR = -80.0  # display clamp; the CSV data stays unclamped

PSD_COLUMNS = ("sweep_value", "k_centered", "freq_norm", "desired_db",
               "dist_mc_db", "dist_analytic_db", "dist_iso_db")
EVM_COLUMNS = ("sweep_value", "evm_mc_db", "evm_analytic_db", "evm_iso_db")

_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "svg.hashsalt": "mimodist-plots",
}


class PlotError(Exception):
    """CSV content or schema problem that prevents rendering."""


@dataclass
class PlotJob:
    """One rendering task: input table, output path, axis/legend options."""

    out_path: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = "power [dB]"
    db_floor: float = DB_FLOOR
    legend_labels: dict = field(default_factory=dict)

    def label(self, key, default):
        return self.legend_labels.get(key, default)


def _read_table(path, required):
    """CSV rows as a list of dicts; verifies header and rectangular shape."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise PlotError(f"{path} is empty")
    header = rows[0]
    missing = [c for c in required if c not in header]
    if missing:
        raise PlotError(f"{path} is missing columns: {', '.join(missing)}")
    if not rows[1:]:
        raise PlotError(f"{path} has a header but no data rows")
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise PlotError(f"{path} line {i}: expected {len(header)} "
                            f"fields, found {len(row)}")
    return [dict(zip(header, row)) for row in rows[1:]]


def _to_float(row, key, path):
    try:
        return float(row[key])
    except ValueError as exc:
        raise PlotError(f"{path}: non-numeric value {row[key]!r} "
                        f"in column {key}") from exc


def _groups(rows):
    """Rows grouped by sweep_value, preserving file order."""
    out = {}
    for row in rows:
        out.setdefault(row["sweep_value"], []).append(row)
    return out


def _save(fig, out_path):
    out_path = os.fspath(out_path)
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    # Strip volatile metadata so repeated renders are byte-identical.
    meta = {"Date": None} if out_path.lower().endswith(".svg") else \
        {"Software": "mimodist-plots"}
    fig.savefig(out_path, metadata=meta)
    plt.close(fig)


def render_psd(psd_csv, out_path, title="", job: PlotJob | None = None):
    """PSD overlay figure: desired, MC distortion, analytic, isotropic."""
    job = job or PlotJob(out_path=out_path, title=title,
                         xlabel="normalized frequency")
    rows = _read_table(psd_csv, PSD_COLUMNS)
    groups = _groups(rows)

    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for i, (value, grp) in enumerate(sorted(
                groups.items(), key=lambda kv: float(kv[0]))):
            x = [_to_float(r, "freq_norm", psd_csv) for r in grp]
            color = colors[i % len(colors)]
            series = (("dist_mc_db", "-", 1.2, f"MC ({value})"),
                      ("dist_analytic_db", "--", 1.2, f"analytic ({value})"),
                      ("dist_iso_db", ":", 1.0, f"isotropic ({value})"))
            if i == 0:
                series = (("desired_db", "-", 0.8, "desired"),) + series
            for col, style, width, label in series:
                y = [max(_to_float(r, col, psd_csv), job.db_floor)
                     for r in grp]
                marker = "o" if len(grp) == 1 else None
                ax.plot(x, y, style, lw=width, color=color, marker=marker,
                        label=job.label(col, label))
        ax.set_xlabel(job.xlabel or "normalized frequency")
        ax.set_ylabel(job.ylabel)
        if job.title:
            ax.set_title(job.title)
        ax.legend(fontsize=7, ncol=2)
        _save(fig, out_path)
    return out_path


def render_evm(evm_csv, out_path, title="", job: PlotJob | None = None):
    """EVM-vs-sweep figure with MC error bars, analytic and isotropic curves."""
    job = job or PlotJob(out_path=out_path, title=title,
                         xlabel="sweep value", ylabel="EVM [dB]")
    rows = _read_table(evm_csv, EVM_COLUMNS)
    has_stderr = "stderr_db" in rows[0]
    if not has_stderr:
        warnings.warn(f"{evm_csv} has no stderr_db column; "
                      "plotting without error bars")
    x = [_to_float(r, "sweep_value", evm_csv) for r in rows]
    mc = [max(_to_float(r, "evm_mc_db", evm_csv), job.db_floor) for r in rows]
    ana = [max(_to_float(r, "evm_analytic_db", evm_csv), job.db_floor)
           for r in rows]
    iso = [max(_to_float(r, "evm_iso_db", evm_csv), job.db_floor)
           for r in rows]

    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        marker = "o"
        if has_stderr:
            err = [abs(_to_float(r, "stderr_db", evm_csv)) for r in rows]
            ax.errorbar(x, mc, yerr=err, fmt=marker + "-", capsize=3,
                        label=job.label("evm_mc_db", "MC"))
        else:
            ax.plot(x, mc, marker + "-", label=job.label("evm_mc_db", "MC"))
        ax.plot(x, ana, "s--", label=job.label("evm_analytic_db", "analytic"))
        ax.plot(x, iso, "^:", label=job.label("evm_iso_db",
                                              "isotropic baseline"))
        ax.set_xlabel(job.xlabel or "sweep value")
        ax.set_ylabel(job.ylabel)
        if job.title:
            ax.set_title(job.title)
        ax.legend(fontsize=8)
        _save(fig, out_path)
    return out_path
