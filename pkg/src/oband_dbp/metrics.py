"""SNR, GMI and AIR estimation, plus multi-trace aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

SNR_CAP_DB = 200.0


class SnrEstimate(NamedTuple):
    db: float
    exact_match: bool = False


class GmiEstimate(NamedTuple):
    bits: float
    noiseless: bool = False


def _frames(tx, rx):
    x = np.asarray(getattr(tx, "symbols", tx))
    y = np.asarray(getattr(rx, "symbols", rx))
    if x.shape != y.shape:
        raise ValueError(f"tx and rx shapes differ: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise ValueError("empty symbol sequences")
    return x, y


def snr_estimate(tx, rx, cap_db: float = SNR_CAP_DB) -> SnrEstimate:
    """10 log10(sum|X|^2 / sum|X - Y|^2), polarisations pooled.

    ``rx`` is expected to be scalar-equalised already.  A perfect match is
    reported as ``cap_db`` with ``exact_match`` set.
    """
    x, y = _frames(tx, rx)
    num = np.sum(np.abs(x) ** 2)
    den = np.sum(np.abs(x - y) ** 2)
    if den == 0 or 10 * np.log10(num / den) > cap_db:
        return SnrEstimate(cap_db, True)
    return SnrEstimate(float(10 * np.log10(num / den)))


def evm_db(tx, rx) -> float:
    """Error-vector magnitude in dB relative to the reference power (= -SNR)."""
    x, y = _frames(tx, rx)
    return float(10 * np.log10(np.sum(np.abs(x - y) ** 2) / np.sum(np.abs(x) ** 2)))


def _axis_gmi(y: np.ndarray, tx_idx: np.ndarray, levels: np.ndarray, labels: np.ndarray, var: float) -> float:
    """Bit-wise MI summed over the bits carried by one quadrature axis.

    For a square QAM with independent per-axis labels, the Gaussian likelihood
    factorises between axes, so the LLRs of the in-phase bits depend only on
    the real part (and likewise for quadrature).  The sums here are exact.
    """
    metric = -((y[:, None] - levels[None, :]) ** 2) / var  # (n, levels)
    metric -= metric.max(axis=1, keepdims=True)
    zero = (labels == 0).astype(float)  # (levels, h)
    e = np.exp(metric)
    with np.errstate(divide="ignore"):
        llr = np.log(e @ zero) - np.log(e @ (1.0 - zero))  # (n, h)
    bad = ~np.all(np.isfinite(llr), axis=1)
    if np.any(bad):
        # a subset sum underflowed; redo those rows in the log domain
        mb = metric[bad]
        for k in range(labels.shape[1]):
            z = labels[:, k] == 0
            llr[bad, k] = logsumexp(mb[:, z], axis=1) - logsumexp(mb[:, ~z], axis=1)
    sign = 1.0 - 2.0 * labels[tx_idx]
    return labels.shape[1] - float(np.sum(np.mean(np.logaddexp(0.0, -llr * sign), axis=0))) / np.log(2)


def gmi_estimate(tx_bits, rx, constellation) -> GmiEstimate:
    """Generalised mutual information [bits per multi-polarisation symbol].

    Uses a circular Gaussian auxiliary channel whose variance is fitted per
    polarisation as mean|X - Y|^2 and exact (not max-log) bit LLRs.  The result
    is summed over polarisations.  A zero fitted variance returns the format
    ceiling with ``noiseless`` set.
    """
    b = np.asarray(tx_bits, dtype=np.int64)
    y = np.asarray(getattr(rx, "symbols", rx))
    y = np.atleast_2d(y)
    m = constellation.bits_per_symbol
    h = m // 2
    b = b.reshape(y.shape[0], y.shape[1], m)
    lab = b @ (1 << np.arange(m - 1, -1, -1))
    x = constellation.points[lab]
    i_lab, q_lab = lab >> h, lab & ((1 << h) - 1)

    total, noiseless = 0.0, False
    for p in range(y.shape[0]):
        var = float(np.mean(np.abs(x[p] - y[p]) ** 2))
        if var == 0:
            total += m
            noiseless = True
            continue
        lv, pl = constellation.pam_levels, constellation.pam_labels
        total += _axis_gmi(y[p].real, i_lab[p], lv, pl, var)
        total += _axis_gmi(y[p].imag, q_lab[p], lv, pl, var)
    return GmiEstimate(float(min(max(total, 0.0), y.shape[0] * m)), noiseless)


def air(gmi_bits_per_symbol: float, symbol_rate: float) -> float:
    if gmi_bits_per_symbol < 0:
        raise ValueError("GMI must be non-negative")
    return symbol_rate * gmi_bits_per_symbol


@dataclass(frozen=True)
class Coords:
    lop1_dbm: float
    lop2_dbm: float
    wavelength_nm: float
    symbol_rate: float
    kappa: float
    compensation: str  # "edc" | "dbp"
    d_dbp: Optional[float] = None
    gamma_dbp: Optional[float] = None


@dataclass(frozen=True)
class MetricsRecord:
    snr_db: float
    gmi_bits: float
    air_bps: float
    coords: Coords
    n_traces: int = 1
    seed: int = 0


def aggregate(records: Sequence[MetricsRecord]) -> MetricsRecord:
    """Merge per-trace records: SNR averaged as linear power, GMI and AIR arithmetically.

    Sums use ``math.fsum`` so the result does not depend on record order.
    """
    if not records:
        raise ValueError("nothing to aggregate")
    c0 = records[0].coords
    for r in records[1:]:
        if r.coords != c0:
            raise ValueError(f"cannot aggregate records with different coordinates: {r.coords} vs {c0}")
    w = [r.n_traces for r in records]
    n = sum(w)
    snr_lin = math.fsum(k * 10 ** (r.snr_db / 10) for k, r in zip(w, records)) / n
    gmi = math.fsum(k * r.gmi_bits for k, r in zip(w, records)) / n
    air_ = math.fsum(k * r.air_bps for k, r in zip(w, records)) / n
    return replace(records[0], snr_db=float(10 * np.log10(snr_lin)), gmi_bits=gmi, air_bps=air_, n_traces=n)
