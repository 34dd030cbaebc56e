"""Receiver-side compensation: EDC, single-step Wiener-Hammerstein DBP, multi-step DBP.

All routines run on the full-rate field, before matched filtering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import (
    MANAKOV_FACTOR,
    LinkKnowledge,
    SpanKnowledge,
    dispersion_to_beta2,
    effective_length,
    nonlinear_phase,
)
from .grid import SampledField, cis, fft, ifft
from .metrics import snr_estimate
from .txrx import SymbolFrame, TxConfig, matched_filter, scalar_equalize

SINGLE_STEP_WH = "single_step_wh"
MULTI_STEP = "multi_step"


@dataclass(frozen=True)
class DbpConfig:
    kappa: float = 0.5
    d_dbp: float = 0.01  # ps/(nm km)
    gamma_dbp: float = 1.6  # 1/(W km)
    mode: str = SINGLE_STEP_WH
    steps_per_span: int = 1
    manakov: bool = True

    def __post_init__(self):
        if not 0 <= self.kappa <= 1:
            raise ValueError("kappa must lie in [0, 1]")
        if self.gamma_dbp < 0:
            raise ValueError("gamma_dbp must be non-negative")
        if self.mode not in (SINGLE_STEP_WH, MULTI_STEP):
            raise ValueError(f"unknown DBP mode {self.mode!r}")
        if self.steps_per_span < 1:
            raise ValueError("steps_per_span must be >= 1")


def _dispersion_filter(fld: SampledField, d: float, wavelength_nm: float, length: float) -> np.ndarray:
    """Frequency response undoing ``length`` km of dispersion ``d``."""
    beta2 = dispersion_to_beta2(d, wavelength_nm)
    return cis(-0.5 * beta2 * length * fld.grid.omega_ps() ** 2)


def edc(fld: SampledField, link: LinkKnowledge, d: float) -> SampledField:
    """Invert the accumulated dispersion ``d * total_length`` in one filter."""
    if d == 0:
        return fld
    H = _dispersion_filter(fld, d, link.wavelength_nm, link.total_length)
    return fld.replace(ifft(fft(fld.samples) * H))


def nonlinear_weight(link: LinkKnowledge) -> float:
    """Sum over spans of launch power times effective length [W km]."""
    return sum(s.launch_power * effective_length(s.alpha_db_per_km, s.length) for s in link.spans)


def dbp_single_step_wh(fld: SampledField, link: LinkKnowledge, cfg: DbpConfig) -> SampledField:
    """Linear / power-dependent phase / linear cascade for the whole link.

    ``kappa`` of the link dispersion is removed first, then every sample is
    derotated by ``eta * gamma_dbp * |u|^2 * sum(P_span * Leff_span)`` with
    ``u`` the field normalised to unit average power, and finally the remaining
    ``1 - kappa`` is removed.  At ``kappa`` 0 or 1 one of the linear stages is
    skipped, so only one transform pair is spent.
    """
    if cfg.mode != SINGLE_STEP_WH:
        raise ValueError("dbp_single_step_wh needs mode='single_step_wh'")
    L = link.total_length
    wl = link.wavelength_nm
    a = fld.samples
    if cfg.kappa > 0:
        a = ifft(fft(a) * _dispersion_filter(fld, cfg.d_dbp, wl, cfg.kappa * L))

    if cfg.gamma_dbp > 0:
        p = np.mean(np.sum(np.abs(a) ** 2, axis=0))
        if p <= 0:
            raise ValueError("DBP needs a field with non-zero power")
        theta = nonlinear_phase(a, cfg.gamma_dbp, nonlinear_weight(link) / p, cfg.manakov)
        a = a * cis(-theta)

    if cfg.kappa < 1:
        a = ifft(fft(a) * _dispersion_filter(fld, cfg.d_dbp, wl, (1 - cfg.kappa) * L))
    return fld.replace(a)


def dbp_multi_step(fld: SampledField, link: LinkKnowledge, cfg: DbpConfig) -> SampledField:
    """Back-propagate span by span, last span first, with ``steps_per_span`` steps each.

    Every backward step exactly mirrors a forward symmetric split step: undo
    the step loss, half-step dispersion, Kerr derotation over the step's
    effective length, half-step dispersion.  Before each span the field is
    rescaled to that span's known output power, which inverts the amplifier.
    """
    if cfg.mode != MULTI_STEP:
        raise ValueError("dbp_multi_step needs mode='multi_step'")
    n = cfg.steps_per_span
    w2 = fld.grid.omega_ps() ** 2
    beta2 = dispersion_to_beta2(cfg.d_dbp, link.wavelength_nm)
    a = fld.samples
    for span in reversed(link.spans):
        h = span.length / n
        leff = effective_length(span.alpha_db_per_km, h)
        inv_att = 10 ** (span.alpha_db_per_km * h / 20)
        half = cis(-0.25 * beta2 * h * w2)
        full = half * half

        p_end = span.launch_power * 10 ** (-span.alpha_db_per_km * span.length / 10)
        p_now = np.mean(np.sum(np.abs(a) ** 2, axis=0))
        a = a * math.sqrt(p_end / p_now)

        X = fft(a) * half
        for k in range(n):
            a = ifft(X) * inv_att
            if cfg.gamma_dbp > 0:
                a *= cis(-nonlinear_phase(a, cfg.gamma_dbp, leff, cfg.manakov))
            X = fft(a)
            X *= half if k == n - 1 else full
        a = ifft(X)
    return fld.replace(a)


def backpropagate(fld: SampledField, link: LinkKnowledge, cfg: DbpConfig) -> SampledField:
    if cfg.mode == SINGLE_STEP_WH:
        return dbp_single_step_wh(fld, link, cfg)
    return dbp_multi_step(fld, link, cfg)


# --- parameter search -------------------------------------------------------

@dataclass(frozen=True)
class Trace:
    """One received waveform with the references needed to score it."""

    rx: SampledField
    tx_frame: SymbolFrame
    knowledge: LinkKnowledge
    tx: TxConfig


def trace_snr_db(fld: SampledField, trace: Trace) -> float:
    rx = scalar_equalize(matched_filter(fld, trace.tx), trace.tx_frame)
    return snr_estimate(trace.tx_frame, rx).db


def mean_snr_db(values_db) -> float:
    """Average SNRs in the linear domain."""
    v = np.asarray(values_db, float)
    return float(10 * np.log10(math.fsum(10 ** (v / 10)) / v.size))


@dataclass(frozen=True)
class DbpSweep:
    best_d: float
    best_gamma: float
    d_grid: np.ndarray = field(repr=False)
    gamma_grid: np.ndarray = field(repr=False)
    snr_db: np.ndarray = field(repr=False)  # (len(d_grid), len(gamma_grid))
    edc_snr_db: float = float("nan")

    @property
    def gain_db(self) -> np.ndarray:
        return self.snr_db - self.edc_snr_db


def pick_best(values: np.ndarray, d_grid, gamma_grid, tol_db: float = 1e-9):
    """Argmax over a (d, gamma) map, ties to smallest |gamma| then smallest |d|."""
    best = np.nanmax(values)
    cands = [
        (abs(gamma_grid[j]), abs(d_grid[i]), i, j)
        for i, j in zip(*np.nonzero(values >= best - tol_db))
    ]
    _, _, i, j = min(cands)
    return i, j


def dbp_param_sweep(
    traces: Sequence[Trace],
    kappa: float,
    d_grid: Sequence[float],
    gamma_grid: Sequence[float],
    edc_d: float = None,
    manakov: bool = True,
) -> DbpSweep:
    """Grid search of single-step DBP dispersion and nonlinear coefficient.

    Every grid point is scored on the same traces; the score is the
    linear-domain mean SNR.  ``edc_d`` sets the EDC baseline the gains are
    quoted against (skipped when None).
    """
    d_grid = np.asarray(d_grid, float)
    gamma_grid = np.asarray(gamma_grid, float)
    if d_grid.size == 0 or gamma_grid.size == 0 or len(traces) == 0:
        raise ValueError("DBP sweep needs non-empty grids and at least one trace")
    snr = np.empty((d_grid.size, gamma_grid.size))
    for i, d in enumerate(d_grid):
        for j, g in enumerate(gamma_grid):
            cfg = DbpConfig(kappa=kappa, d_dbp=float(d), gamma_dbp=float(g), manakov=manakov)
            snr[i, j] = mean_snr_db([trace_snr_db(dbp_single_step_wh(t.rx, t.knowledge, cfg), t) for t in traces])
    edc_snr = float("nan")
    if edc_d is not None:
        edc_snr = mean_snr_db([trace_snr_db(edc(t.rx, t.knowledge, edc_d), t) for t in traces])
    i, j = pick_best(snr, d_grid, gamma_grid)
    return DbpSweep(float(d_grid[i]), float(gamma_grid[j]), d_grid, gamma_grid, snr, edc_snr)


__all__ = [
    "DbpConfig",
    "DbpSweep",
    "LinkKnowledge",
    "MULTI_STEP",
    "SINGLE_STEP_WH",
    "SpanKnowledge",
    "Trace",
    "backpropagate",
    "dbp_multi_step",
    "dbp_param_sweep",
    "dbp_single_step_wh",
    "edc",
    "mean_snr_db",
    "nonlinear_weight",
    "pick_best",
    "trace_snr_db",
]
