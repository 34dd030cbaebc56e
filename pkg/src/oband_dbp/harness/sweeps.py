"""Launch-power, WH-split and DBP-parameter sweeps.

Work is split into (sweep point, trace) jobs.  Each job draws its randomness
from streams keyed by the trace index, so a job gives the same answer in any
worker and in any order.  Results are merged in job order and aggregated with
order-independent sums, which makes parallel and serial runs byte-identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .. import __version__
from ..dsp import DbpConfig, dbp_param_sweep, dbp_single_step_wh
from ..grid import count_transforms
from ..metrics import Coords, MetricsRecord, aggregate
from .config import ExperimentConfig
from .pipeline import DBP, EDC, evaluate, simulate_trace


@dataclass(frozen=True)
class SweepResult:
    """Aggregated records in sweep-coordinate order plus run metadata."""

    records: Tuple[MetricsRecord, ...]
    meta: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.records)

    def select(self, compensation: str) -> Tuple[MetricsRecord, ...]:
        return tuple(r for r in self.records if r.coords.compensation == compensation)

    def snr_by_lop(self, compensation: str) -> Dict[float, float]:
        return {r.coords.lop1_dbm: r.snr_db for r in self.select(compensation)}


def _base_meta(cfg: ExperimentConfig, kind: str, axis: str) -> Dict[str, Any]:
    return {
        "sweep": kind,
        "axis": axis,
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "n_traces": cfg.n_traces,
        "tool_version": f"oband_dbp {__version__}",
        "link_preset": cfg.link_preset,
        "wavelength_nm": cfg.wavelength_nm,
        "symbol_rate_bd": cfg.symbol_rate_bd,
    }


def _run_jobs(fn: Callable, jobs: Sequence[tuple], workers: int) -> List[Any]:
    """``[fn(*job) for job in jobs]``, optionally across processes, always in job order."""
    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _group(records: Iterable[MetricsRecord]) -> Dict[Coords, List[MetricsRecord]]:
    groups: Dict[Coords, List[MetricsRecord]] = {}
    for r in records:
        groups.setdefault(r.coords, []).append(r)
    return groups


def _dbp_candidates(cfg: ExperimentConfig, **overrides) -> Tuple[DbpConfig, ...]:
    grid = cfg.dbp_gamma_grid
    if not grid:
        return (cfg.dbp(**overrides),)
    return tuple(cfg.dbp(gamma_dbp=g, **overrides) for g in grid)


def _best_gamma(groups: Sequence[MetricsRecord]) -> MetricsRecord:
    """Highest SNR; ties go to the smallest |gamma_dbp|."""
    return min(groups, key=lambda r: (-r.snr_db, abs(r.coords.gamma_dbp or 0.0)))


def _optimum(records: Sequence[MetricsRecord], key: Callable[[Coords], float]) -> Optional[float]:
    if not records:
        return None
    best = min(records, key=lambda r: (-r.snr_db, key(r.coords)))
    return key(best.coords)


# --- launch power -----------------------------------------------------------------

def _lop_job(cfg: ExperimentConfig, lop1: float, k: int, dbps: Tuple[DbpConfig, ...]) -> List[MetricsRecord]:
    trace = simulate_trace(cfg, k, lop1)
    out = [evaluate(trace, cfg, EDC, lop1_dbm=lop1)]
    out += [evaluate(trace, cfg, DBP, d, lop1_dbm=lop1) for d in dbps]
    return out


def sweep_lop(cfg: ExperimentConfig, powers: Optional[Sequence[float]] = None, workers: int = 1) -> SweepResult:
    """EDC and DBP metrics versus first-span launch power.

    LOP2 follows the link's rule at every point; table rules refuse powers
    outside their range.  If ``cfg.dbp_gamma_grid`` is set, the DBP record at
    each power is the grid value with the highest mean SNR (same traces for
    every candidate).  ``meta`` reports the optimal LOP1 per variant.
    """
    powers = sorted(cfg.sweep_lop1_dbm if powers is None else powers)
    if not powers:
        raise ValueError("sweep_lop needs at least one launch power")
    link = cfg.link(powers[0])
    for p in powers:
        link.lop2_rule(p, link.spans[0].loss_db)  # raises for out-of-range table lookups
    dbps = _dbp_candidates(cfg)
    jobs = [(cfg, float(p), k, dbps) for p in powers for k in range(cfg.n_traces)]
    per_job = _run_jobs(_lop_job, jobs, workers)
    agg = [aggregate(g) for g in _group(r for rs in per_job for r in rs).values()]

    records: List[MetricsRecord] = []
    best_gamma: Dict[float, float] = {}
    for p in powers:
        at_p = [r for r in agg if r.coords.lop1_dbm == p]
        records += [r for r in at_p if r.coords.compensation == EDC]
        best = _best_gamma([r for r in at_p if r.coords.compensation == DBP])
        best_gamma[p] = best.coords.gamma_dbp
        records.append(best)
    records.sort(key=lambda r: (r.coords.lop1_dbm, r.coords.compensation))

    meta = _base_meta(cfg, "lop", "lop1_dbm")
    meta["kappa"] = cfg.kappa
    meta["optimal_lop1_dbm_edc"] = _optimum([r for r in records if r.coords.compensation == EDC], lambda c: c.lop1_dbm)
    meta["optimal_lop1_dbm_dbp"] = _optimum([r for r in records if r.coords.compensation == DBP], lambda c: c.lop1_dbm)
    if cfg.dbp_gamma_grid:
        meta["best_gamma_dbp_per_lop"] = best_gamma
    return SweepResult(tuple(records), meta)


# --- WH split ------------------------------------------------------------------------

def _kappa_job(cfg: ExperimentConfig, lop1: float, k: int, groups: Tuple[Tuple[DbpConfig, ...], ...]):
    trace = simulate_trace(cfg, k, lop1)
    edc_rec = evaluate(trace, cfg, EDC, lop1_dbm=lop1)
    dbp_recs = [[evaluate(trace, cfg, DBP, d, lop1_dbm=lop1) for d in cands] for cands in groups]
    return edc_rec, dbp_recs


def count_dbp_transform_pairs(cfg: ExperimentConfig, kappa: float) -> int:
    """FFT/IFFT pairs one single-step DBP call spends at ``kappa`` (data independent)."""
    trace = simulate_trace(cfg.with_overrides(n_symbols=64, ase=False, b2b_snr_db=math.inf), 0)
    with count_transforms() as c:
        dbp_single_step_wh(trace.rx, trace.knowledge, cfg.dbp(kappa=kappa, mode="single_step_wh"))
    return c.pairs


def sweep_kappa(
    cfg: ExperimentConfig,
    kappas: Optional[Sequence[float]] = None,
    lop1_dbm: Optional[float] = None,
    workers: int = 1,
) -> SweepResult:
    """DBP gain versus WH split at one launch power.

    The launch power defaults to the DBP-optimal LOP1 of ``sweep_lop(cfg)``
    and is then held fixed for every split.  Each split gets a DBP record and
    a copy of the (split-independent) EDC record, so gains can be read per
    row.  ``meta`` lists the transform pairs spent per split.
    """
    kappas = sorted(cfg.sweep_kappa if kappas is None else kappas)
    if not kappas:
        raise ValueError("sweep_kappa needs at least one kappa")
    if any(not 0 <= k <= 1 for k in kappas):
        raise ValueError("kappa values must lie in [0, 1]")
    lop_meta = None
    if lop1_dbm is None:
        lop_res = sweep_lop(cfg, workers=workers)
        lop1_dbm = lop_res.meta["optimal_lop1_dbm_dbp"]
        lop_meta = "dbp-optimal from sweep_lop"
    lop1_dbm = float(lop1_dbm)
    groups = tuple(_dbp_candidates(cfg, kappa=float(k)) for k in kappas)
    jobs = [(cfg, lop1_dbm, k, groups) for k in range(cfg.n_traces)]
    per_job = _run_jobs(_kappa_job, jobs, workers)

    edc = aggregate([e for e, _ in per_job])
    records: List[MetricsRecord] = []
    for i, kappa in enumerate(kappas):
        cands = _group(r for _, d in per_job for r in d[i])
        best = _best_gamma([aggregate(g) for g in cands.values()])
        records.append(replace(edc, coords=replace(edc.coords, kappa=float(kappa))))
        records.append(best)
    records.sort(key=lambda r: (r.coords.kappa, r.coords.compensation))

    meta = _base_meta(cfg, "kappa", "kappa")
    meta["lop1_dbm"] = lop1_dbm
    if lop_meta:
        meta["lop1_source"] = lop_meta
    meta["fft_pairs_per_kappa"] = {float(k): count_dbp_transform_pairs(cfg, k) for k in kappas}
    gains = [r.snr_db - edc.snr_db for r in records if r.coords.compensation == DBP]
    meta["dbp_gain_spread_db"] = float(max(gains) - min(gains))
    return SweepResult(tuple(records), meta)


# --- DBP parameter grid ----------------------------------------------------------------

def _trace_job(cfg: ExperimentConfig, lop1: float, k: int):
    return simulate_trace(cfg, k, lop1)


def sweep_dbp_grid(
    cfg: ExperimentConfig,
    d_values: Optional[Sequence[float]] = None,
    gamma_values: Optional[Sequence[float]] = None,
    lop1_dbm: Optional[float] = None,
    workers: int = 1,
) -> SweepResult:
    """Single-step DBP SNR over a (dispersion, nonlinear coefficient) grid.

    Traces are simulated at ``lop1_dbm`` (default ``cfg.lop1_dbm``) and shared
    by every grid point.  Records carry SNR only; GMI and AIR are NaN.  The
    first record is the EDC reference.  ``meta`` holds the argmax.
    """
    d_values = sorted(cfg.grid_d_values if d_values is None else d_values)
    gamma_values = sorted(cfg.grid_gamma_values if gamma_values is None else gamma_values)
    if not d_values or not gamma_values:
        raise ValueError("sweep_dbp_grid needs non-empty dispersion and gamma grids")
    lop1 = float(cfg.lop1_dbm if lop1_dbm is None else lop1_dbm)
    traces = _run_jobs(_trace_job, [(cfg, lop1, k) for k in range(cfg.n_traces)], workers)
    res = dbp_param_sweep(traces, cfg.kappa, d_values, gamma_values, edc_d=cfg.fibre_dispersion, manakov=cfg.manakov)

    link = cfg.link(lop1)
    lops = link.launch_powers_dbm()
    nan = float("nan")

    def rec(snr, comp, d=None, g=None):
        c = Coords(lop1, float(lops[1]) if len(lops) > 1 else lop1, link.signal_wavelength, cfg.symbol_rate_bd,
                   cfg.kappa, comp, d, g)
        return MetricsRecord(float(snr), nan, nan, c, cfg.n_traces, cfg.master_seed)

    records = [rec(res.edc_snr_db, EDC)]
    for i, d in enumerate(res.d_grid):
        for j, g in enumerate(res.gamma_grid):
            records.append(rec(res.snr_db[i, j], DBP, float(d), float(g)))

    meta = _base_meta(cfg, "dbp_grid", "d_dbp")
    meta["lop1_dbm"] = lop1
    meta["kappa"] = cfg.kappa
    meta["best_d_dbp"] = res.best_d
    meta["best_gamma_dbp"] = res.best_gamma
    meta["edc_snr_db"] = float(res.edc_snr_db)
    meta["best_gain_db"] = float(np.nanmax(res.gain_db))
    return SweepResult(tuple(records), meta)
