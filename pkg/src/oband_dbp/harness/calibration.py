"""Fitting the inline-amplifier excess noise to measured low-power SNRs.

In the linear regime the received SNR obeys
``1/SNR = 1/SNR_rest + 10**(X/10) / SNR_ase``, where ``SNR_ase`` is the ASE-only
SNR at zero excess noise ``X`` and ``SNR_rest`` collects the transceiver floor
and any residual nonlinear noise.  Both are measured by simulation with
common random numbers; ``X`` then follows from a one-parameter least-squares
fit in dB.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from ..dsp import mean_snr_db
from .config import ExperimentConfig
from .pipeline import EDC, evaluate, simulate_trace


def reference_curves() -> Dict[Tuple[float, float, str], List[Tuple[float, float]]]:
    """Shipped measured SNR curves keyed by (wavelength_nm, symbol_rate_gbd, compensation).

    Values are ``(lop1_dbm, snr_db)`` pairs sorted by launch power.
    """
    out: Dict[Tuple[float, float, str], List[Tuple[float, float]]] = {}
    text = resources.files("oband_dbp.data").joinpath("reference_snr_curves.csv").read_text()
    for row in csv.DictReader(line for line in text.splitlines() if not line.startswith("#")):
        key = (float(row["wavelength_nm"]), float(row["symbol_rate_gbd"]), row["compensation"])
        out.setdefault(key, []).append((float(row["lop1_dbm"]), float(row["snr_db"])))
    for v in out.values():
        v.sort()
    return out


@dataclass(frozen=True)
class ExcessNoiseFit:
    excess_noise_db: float
    lop1_dbm: Tuple[float, ...]
    target_snr_db: Tuple[float, ...]
    fitted_snr_db: Tuple[float, ...]

    @property
    def rms_error_db(self) -> float:
        e = np.subtract(self.fitted_snr_db, self.target_snr_db)
        return float(np.sqrt(np.mean(e**2)))


def _edc_snr(cfg: ExperimentConfig, lop1: float, n_traces: int) -> float:
    vals = [evaluate(simulate_trace(cfg, k, lop1), cfg, EDC, lop1_dbm=lop1).snr_db for k in range(n_traces)]
    return mean_snr_db(vals)


def fit_excess_noise(
    cfg: ExperimentConfig,
    points: Sequence[Tuple[float, float]],
    n_traces: int = 2,
    bounds_db: Tuple[float, float] = (0.0, 20.0),
) -> ExcessNoiseFit:
    """Excess noise ``X`` that best reproduces EDC SNRs at the given ``(lop1_dbm, snr_db)`` points."""
    if not points:
        raise ValueError("need at least one reference point")
    base = cfg.with_overrides(excess_noise_db=0.0, ase=True)
    quiet = cfg.with_overrides(ase=False)
    lops = tuple(p for p, _ in points)
    target = np.array([s for _, s in points])
    inv_rest, inv_ase = [], []
    for p in lops:
        r_all = 10 ** (-_edc_snr(base, p, n_traces) / 10)
        r_rest = 10 ** (-_edc_snr(quiet, p, n_traces) / 10)
        inv_rest.append(r_rest)
        inv_ase.append(max(r_all - r_rest, 0.0))
    inv_rest, inv_ase = np.array(inv_rest), np.array(inv_ase)

    def model(x):
        return -10 * np.log10(inv_rest + 10 ** (x / 10) * inv_ase)

    res = minimize_scalar(lambda x: float(np.sum((model(x) - target) ** 2)), bounds=bounds_db, method="bounded")
    x = float(res.x)
    if not math.isfinite(x):
        raise RuntimeError("excess-noise fit did not converge")
    return ExcessNoiseFit(x, lops, tuple(float(t) for t in target), tuple(float(v) for v in model(x)))
