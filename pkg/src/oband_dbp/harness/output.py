"""CSV and plot-data writers for sweep results.

Both formats start with ``# key: value`` metadata lines.  Floats are written
with ``repr`` (shortest round-trip form), so equal results give equal bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Dict, List, Union

from ..metrics import MetricsRecord
from .sweeps import SweepResult

CSV_COLUMNS = (
    "lop1_dbm",
    "lop2_dbm",
    "wavelength_nm",
    "symbol_rate_bd",
    "kappa",
    "compensation",
    "snr_db",
    "gmi_bits",
    "air_gbps",
    "n_traces",
    "seed",
    "d_dbp_ps_nm_km",
    "gamma_dbp_per_w_km",
)

_AXES = {"lop1_dbm", "kappa", "d_dbp"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _meta_lines(result: SweepResult) -> List[str]:
    lines = []
    for k, v in result.meta.items():
        if isinstance(v, dict):
            v = json.dumps({_fmt(a): b for a, b in v.items()}, sort_keys=False)
        lines.append(f"# {k}: {_fmt(v) if not isinstance(v, str) else v}")
    return lines


def _row(r: MetricsRecord) -> List[str]:
    c = r.coords
    return [
        _fmt(c.lop1_dbm),
        _fmt(c.lop2_dbm),
        _fmt(c.wavelength_nm),
        _fmt(c.symbol_rate),
        _fmt(c.kappa),
        c.compensation,
        _fmt(r.snr_db),
        _fmt(r.gmi_bits),
        _fmt(r.air_bps / 1e9),
        str(r.n_traces),
        str(r.seed),
        _fmt(c.d_dbp),
        _fmt(c.gamma_dbp),
    ]


def _write(text: str, path: Union[str, Path]) -> None:
    try:
        with open(path, "w", newline="") as f:
            f.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _check(result: SweepResult) -> None:
    if not result.records:
        raise ValueError("cannot emit an empty sweep result")


def csv_text(result: SweepResult) -> str:
    _check(result)
    buf = io.StringIO()
    for line in _meta_lines(result):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.records:
        w.writerow(_row(r))
    return buf.getvalue()


def emit_csv(result: SweepResult, path: Union[str, Path]) -> None:
    """One row per aggregated record."""
    _write(csv_text(result), path)


def _curve_label(r: MetricsRecord, axis: str) -> str:
    c = r.coords
    if axis == "d_dbp":
        return c.compensation if c.compensation == "edc" else f"dbp_gamma{_fmt(c.gamma_dbp)}"
    return c.compensation


def _axis_value(r: MetricsRecord, axis: str):
    c = r.coords
    return {"lop1_dbm": c.lop1_dbm, "kappa": c.kappa, "d_dbp": c.d_dbp}[axis]


def plot_text(result: SweepResult) -> str:
    """Wide table: one row per axis value, one column group per curve.

    Curves are EDC and DBP for launch-power and split sweeps, and one DBP
    curve per gamma value for parameter grids (whose EDC reference is a
    single point repeated on every row).
    """
    _check(result)
    axis = result.meta.get("axis", "lop1_dbm")
    if axis not in _AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    curves: Dict[str, Dict[float, MetricsRecord]] = {}
    xs: List[float] = []
    edc_const = None
    for r in result.records:
        x = _axis_value(r, axis)
        label = _curve_label(r, axis)
        if x is None:
            edc_const = r
            curves.setdefault(label, {})
            continue
        if x not in xs:
            xs.append(x)
        curves.setdefault(label, {})[x] = r
    xs.sort()

    buf = io.StringIO()
    for line in _meta_lines(result):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    header = [axis]
    for label in curves:
        header += [f"{label}_snr_db", f"{label}_gmi_bits", f"{label}_air_gbps"]
    w.writerow(header)
    for x in xs:
        row = [_fmt(x)]
        for label, pts in curves.items():
            r = pts.get(x, edc_const if label == "edc" and edc_const is not None else None)
            if r is None:
                row += ["", "", ""]
            else:
                row += [_fmt(r.snr_db), _fmt(r.gmi_bits), _fmt(r.air_bps / 1e9)]
        w.writerow(row)
    return buf.getvalue()


def emit_plot_data(result: SweepResult, path: Union[str, Path]) -> None:
    _write(plot_text(result), path)
