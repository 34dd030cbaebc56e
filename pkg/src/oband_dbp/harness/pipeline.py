"""One trace through the full transmit / link / receive chain.

Random draws come from named streams of the master seed keyed by trace index
(``bits``, ``tx_noise``, ``rx_noise`` and the amplifier streams), so trace
``k`` sees the same data and noise realisations at every launch power and
every compensation setting.
"""

from __future__ import annotations

from typing import Optional

from ..channel import propagate_link
from ..dsp import DbpConfig, Trace, backpropagate, edc
from ..grid import SampledField, rng_stream
from ..metrics import Coords, MetricsRecord, air, gmi_estimate, snr_estimate
from ..txrx import build_constellation, generate_bits, load_transceiver_noise, map_bits, matched_filter, scalar_equalize, shape
from .config import ExperimentConfig

EDC = "edc"
DBP = "dbp"


def simulate_trace(cfg: ExperimentConfig, trace_index: int, lop1_dbm: Optional[float] = None) -> Trace:
    """Generate, transmit and receive one frame; the result still needs EDC or DBP.

    The receiver share of the transceiver noise is added to the received
    field, ahead of any compensation, so one trace can be scored under many
    receiver settings.
    """
    seed = cfg.master_seed
    tx = cfg.tx()
    const = build_constellation(cfg.qam_order)
    bits = generate_bits(2 * tx.n_symbols * const.bits_per_symbol, rng_stream(seed, "bits", trace_index))
    frame = map_bits(bits, const, n_pol=2, seed=seed)
    fld = shape(frame, tx)
    fld = load_transceiver_noise(
        fld, cfg.b2b_snr_db, rng_stream(seed, "tx_noise", trace_index), tx.symbol_rate, cfg.tx_noise_fraction
    )
    link = cfg.link(lop1_dbm)
    rx, knowledge = propagate_link(fld, link, cfg.ssfm(), seed=seed, trace_index=trace_index)
    rx = load_transceiver_noise(
        rx, cfg.b2b_snr_db, rng_stream(seed, "rx_noise", trace_index), tx.symbol_rate, 1 - cfg.tx_noise_fraction
    )
    return Trace(rx, frame, knowledge, tx)


def compensate(trace: Trace, cfg: ExperimentConfig, compensation: str, dbp_cfg: Optional[DbpConfig] = None) -> SampledField:
    if compensation == EDC:
        return edc(trace.rx, trace.knowledge, cfg.fibre_dispersion)
    if compensation == DBP:
        return backpropagate(trace.rx, trace.knowledge, dbp_cfg or cfg.dbp())
    raise ValueError(f"unknown compensation {compensation!r}")


def evaluate(
    trace: Trace,
    cfg: ExperimentConfig,
    compensation: str,
    dbp_cfg: Optional[DbpConfig] = None,
    lop1_dbm: Optional[float] = None,
) -> MetricsRecord:
    """Compensate, matched-filter, equalise and score one trace."""
    dbp_cfg = dbp_cfg or cfg.dbp()
    fld = compensate(trace, cfg, compensation, dbp_cfg)
    y = scalar_equalize(matched_filter(fld, trace.tx), trace.tx_frame)
    const = trace.tx_frame.constellation
    snr = snr_estimate(trace.tx_frame, y).db
    gmi = gmi_estimate(trace.tx_frame.bits, y, const).bits
    lop1 = cfg.lop1_dbm if lop1_dbm is None else lop1_dbm
    link = cfg.link(lop1)
    lops = link.launch_powers_dbm()
    is_dbp = compensation == DBP
    coords = Coords(
        lop1_dbm=float(lop1),
        lop2_dbm=float(lops[1]) if len(lops) > 1 else float(lop1),
        wavelength_nm=link.signal_wavelength,
        symbol_rate=trace.tx.symbol_rate,
        kappa=dbp_cfg.kappa,
        compensation=compensation,
        d_dbp=dbp_cfg.d_dbp if is_dbp else None,
        gamma_dbp=dbp_cfg.gamma_dbp if is_dbp else None,
    )
    return MetricsRecord(snr, gmi, air(gmi, trace.tx.symbol_rate), coords, 1, cfg.master_seed)


def run_single(cfg: ExperimentConfig, trace_index: int = 0, compensation: str = DBP) -> MetricsRecord:
    """Full chain for one trace at ``cfg.lop1_dbm`` with EDC or the configured DBP."""
    trace = simulate_trace(cfg, trace_index)
    return evaluate(trace, cfg, compensation)
