import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oband_dbp.grid import rng_stream
from oband_dbp.metrics import (
    SNR_CAP_DB,
    Coords,
    MetricsRecord,
    aggregate,
    air,
    evm_db,
    gmi_estimate,
    snr_estimate,
)
from oband_dbp.txrx import SymbolFrame, build_constellation, generate_bits, map_bits, scalar_equalize

from gmi_oracle import gmi_awgn


def awgn_frame(order, n, snr_db, n_pol=2, seed=0):
    c = build_constellation(order)
    frame = map_bits(generate_bits(n_pol * n * c.bits_per_symbol, rng_stream(seed, "b")), c, n_pol=n_pol)
    var = 10 ** (-snr_db / 10)
    rng = rng_stream(seed, "n")
    noise = np.sqrt(var / 2) * (rng.standard_normal(frame.symbols.shape) + 1j * rng.standard_normal(frame.symbols.shape))
    return frame, SymbolFrame(frame.symbols + noise)


# --- SNR -----------------------------------------------------------------------------------

def test_snr_exact_match_is_capped():
    frame, _ = awgn_frame(16, 4096, 20)
    est = snr_estimate(frame, frame)
    assert est == (SNR_CAP_DB, True)


def test_snr_of_known_awgn():
    frame, rx = awgn_frame(256, 2**16, 20.0)
    assert snr_estimate(frame, rx).db == pytest.approx(20.0, abs=0.05)
    assert evm_db(frame, rx) == pytest.approx(-snr_estimate(frame, rx).db)


def test_snr_rejects_bad_shapes():
    with pytest.raises(ValueError):
        snr_estimate(np.zeros((2, 0)), np.zeros((2, 0)))
    with pytest.raises(ValueError):
        snr_estimate(np.zeros((2, 8)), np.zeros((2, 9)))


@given(st.complex_numbers(min_magnitude=1e-2, max_magnitude=1e2, allow_nan=False, allow_infinity=False))
@settings(max_examples=25, deadline=None)
def test_snr_after_equalizer_is_scale_invariant(c):
    frame, rx = awgn_frame(16, 2**12, 15.0)
    a = snr_estimate(frame, scalar_equalize(rx, frame)).db
    b = snr_estimate(frame, scalar_equalize(rx.replace(c * rx.symbols), frame)).db
    assert abs(a - b) <= 1e-3


# --- GMI -------------------------------------------------------------------------------------

def test_oracle_limits():
    c = build_constellation(16)
    assert gmi_awgn(c.points, c.labels, 40.0) == pytest.approx(4.0, abs=1e-6)
    assert gmi_awgn(c.points, c.labels, -20.0) < 0.05


@pytest.mark.parametrize("order", [4, 16])
@pytest.mark.parametrize("snr_db", [0, 5, 10, 15, 20])
def test_gmi_matches_quadrature_oracle(order, snr_db):
    c = build_constellation(order)
    frame, rx = awgn_frame(order, 2**16, snr_db, n_pol=1, seed=snr_db)
    est = gmi_estimate(frame.bits, rx, c).bits
    assert est == pytest.approx(gmi_awgn(c.points, c.labels, snr_db), abs=0.02)


def test_gmi_noiseless_256qam_is_16_bits():
    c = build_constellation(256)
    frame, _ = awgn_frame(256, 2**14, 0.0)
    est = gmi_estimate(frame.bits, frame, c)
    assert est.bits == 16.0 and est.noiseless


def test_gmi_vanishes_at_low_snr():
    c = build_constellation(16)
    frame, rx = awgn_frame(16, 2**16, -30.0)
    assert gmi_estimate(frame.bits, rx, c).bits < 0.05


def test_gmi_monotone_on_snr_ladder():
    c = build_constellation(64)
    values = []
    for s in range(0, 31, 3):
        frame, rx = awgn_frame(64, 2**14, s, seed=s)
        values.append(gmi_estimate(frame.bits, rx, c).bits)
    assert all(b > a - 0.01 for a, b in zip(values, values[1:]))
    assert all(0 <= v <= 12 for v in values)


def test_gmi_estimate_mismatched_bits_raise():
    c = build_constellation(16)
    frame, rx = awgn_frame(16, 1024, 10.0)
    with pytest.raises(ValueError):
        gmi_estimate(frame.bits[:, :10], rx, c)


# --- AIR ----------------------------------------------------------------------------------------

def test_air_values():
    assert air(16.0, 50e9) == 800e9
    assert air(9.88, 50e9) == pytest.approx(494e9)
    assert air(0.0, 50e9) == 0.0
    with pytest.raises(ValueError):
        air(-1.0, 50e9)


# --- aggregation ---------------------------------------------------------------------------------

COORDS = Coords(6.0, 3.3, 1310.0, 50e9, 0.5, "edc")


def rec(snr, gmi=10.0, n=1):
    return MetricsRecord(snr, gmi, air(gmi, 50e9), COORDS, n, 1)


def test_aggregate_identical_records():
    out = aggregate([rec(17.0)] * 50)
    assert out.snr_db == pytest.approx(17.0, abs=1e-12)
    assert out.n_traces == 50


def test_aggregate_linear_mean():
    out = aggregate([rec(19.0, 9.0), rec(21.0, 11.0)])
    assert out.snr_db == pytest.approx(10 * math.log10((10**1.9 + 10**2.1) / 2), abs=1e-12)
    assert out.gmi_bits == pytest.approx(10.0)
    assert out.air_bps == pytest.approx(500e9)


def test_aggregate_weights_by_trace_count():
    merged = aggregate([aggregate([rec(15.0)] * 3), rec(18.0)])
    direct = aggregate([rec(15.0)] * 3 + [rec(18.0)])
    assert merged.snr_db == pytest.approx(direct.snr_db, abs=1e-12)
    assert merged.n_traces == 4


def test_aggregate_rejects_empty_and_mixed():
    with pytest.raises(ValueError):
        aggregate([])
    other = MetricsRecord(1.0, 1.0, 1.0, Coords(3.0, 1.9, 1310.0, 50e9, 0.5, "edc"))
    with pytest.raises(ValueError):
        aggregate([rec(1.0), other])


@given(st.lists(st.floats(-10, 40), min_size=1, max_size=30), st.randoms())
def test_aggregate_permutation_invariant(snrs, rnd):
    recs = [rec(s, gmi=s / 4 + 3) for s in snrs]
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    a, b = aggregate(recs), aggregate(shuffled)
    assert a.snr_db == b.snr_db and a.gmi_bits == b.gmi_bits and a.air_bps == b.air_bps
