import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oband_dbp.grid import SampledField, TimeGrid, rng_stream
from oband_dbp.metrics import evm_db, snr_estimate
from oband_dbp.txrx import (
    SUPPORTED_ORDERS,
    SymbolFrame,
    TxConfig,
    build_constellation,
    demap_hard,
    generate_bits,
    load_transceiver_noise,
    map_bits,
    matched_filter,
    rrc_taps,
    rrc_transfer,
    samples_per_symbol_of,
    scalar_equalize,
    shape,
)


def random_frame(order, n, seed=0):
    c = build_constellation(order)
    bits = generate_bits(2 * n * c.bits_per_symbol, seed)
    return map_bits(bits, c)


# --- constellation ---------------------------------------------------------------

@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_constellation_unit_energy_and_bijective_labels(order):
    c = build_constellation(order)
    assert c.points.size == order
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)
    as_int = c.labels.astype(int) @ (1 << np.arange(c.bits_per_symbol - 1, -1, -1))
    assert sorted(as_int) == list(range(order))
    assert len(set(np.round(c.points, 12))) == order


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_gray_property_exhaustive(order):
    c = build_constellation(order)
    side = int(np.sqrt(order))
    step = 2 / np.sqrt(2 * np.mean(np.arange(side - 1, -side, -2) ** 2))
    checked = 0
    for a in range(order):
        for b in range(order):
            d = c.points[b] - c.points[a]
            neighbours = (abs(abs(d.real) - step) < 1e-9 and abs(d.imag) < 1e-9) or (
                abs(abs(d.imag) - step) < 1e-9 and abs(d.real) < 1e-9
            )
            if neighbours:
                assert np.sum(c.labels[a] != c.labels[b]) == 1
                checked += 1
    assert checked == 4 * side * (side - 1)


def test_qpsk_layout():
    c = build_constellation(4)
    assert c.points[0] == pytest.approx((1 + 1j) / np.sqrt(2))
    assert set(np.round(c.points * np.sqrt(2), 12)) == {1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j}
    frame = map_bits(np.zeros(4, np.uint8), c)
    assert np.allclose(frame.symbols, (1 + 1j) / np.sqrt(2))


@pytest.mark.parametrize("order", [2, 8, 32, 1024])
def test_unsupported_orders(order):
    with pytest.raises(ValueError):
        build_constellation(order)


# --- bits and mapping ------------------------------------------------------------------

def test_generate_bits_reproducible_and_balanced():
    assert np.array_equal(generate_bits(16, 3), generate_bits(16, 3))
    ones = generate_bits(2**20, 11).mean()
    assert 0.4985 <= ones <= 0.5015
    with pytest.raises(ValueError):
        generate_bits(0, 1)


def test_map_bits_rejects_indivisible_count():
    with pytest.raises(ValueError):
        map_bits(np.zeros(10, np.uint8), build_constellation(16))


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_map_demap_round_trip(order):
    frame = random_frame(order, 512, seed=order)
    bits = demap_hard(frame.symbols, frame.constellation)
    assert np.array_equal(bits, frame.bits)


def test_256qam_mean_power():
    frame = random_frame(256, 2**16, seed=2)
    assert np.mean(np.abs(frame.symbols) ** 2) == pytest.approx(1.0, abs=0.01)


def test_polarisations_get_distinct_bits():
    frame = random_frame(16, 256)
    assert frame.symbols.shape == (2, 256)
    assert not np.array_equal(frame.pol_x, frame.pol_y)


# --- shaping and matched filter -------------------------------------------------------------

def test_tx_config_invariants():
    TxConfig(50e9, rolloff=0.35, samples_per_symbol=2)
    for kw in (dict(rolloff=0.0), dict(rolloff=1.5), dict(samples_per_symbol=1), dict(samples_per_symbol=2.5)):
        with pytest.raises(ValueError):
            TxConfig(50e9, **kw)
    with pytest.raises(ValueError):
        TxConfig(-1.0)


def test_impulse_gives_unit_energy_rrc():
    tx = TxConfig(50e9, 0.01, 2, 2**12)
    s = np.zeros((2, tx.n_symbols), complex)
    s[:, 0] = 1
    f = shape(SymbolFrame(s), tx)
    span = tx.n_symbols // 4
    h = np.roll(f.samples[0], span)[: 2 * span + 1]
    taps = rrc_taps(0.01, 2, span)
    assert np.sum(np.abs(f.samples[0]) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert np.sum(taps**2) == pytest.approx(1.0, abs=1e-12)
    # the circular response differs from the sampled analytic taps only by tail aliasing
    assert np.linalg.norm(h - taps) / np.linalg.norm(taps) < 1e-4


def test_rrc_transfer_squares_to_raised_cosine():
    grid = TimeGrid(4096, 100e9)
    H = rrc_transfer(grid, 50e9, 0.2)
    f = np.abs(grid.freqs())
    assert np.all(H[f < 0.4 * 50e9 / 2] ** 2 == pytest.approx(2.0))
    assert np.all(H[f > 0.6 * 50e9] == 0)
    # |H|^2 has odd symmetry about the Nyquist frequency
    nyq = np.argmin(np.abs(grid.freqs() - 25e9))
    assert H[nyq] ** 2 == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("order", [4, 256])
def test_shape_matched_filter_is_isi_free(order):
    tx = TxConfig(50e9, 0.01, 2, 2**14)
    frame = random_frame(order, tx.n_symbols, seed=5)
    rx = matched_filter(shape(frame, tx), tx)
    assert evm_db(frame, rx) <= -45


def test_matched_filter_zero_field_and_wrong_delay():
    tx = TxConfig(50e9, 0.01, 2, 2**10)
    zero = SampledField(tx.grid(), np.zeros((2, 2**11)))
    assert np.all(matched_filter(zero, tx).symbols == 0)
    frame = random_frame(16, tx.n_symbols)
    f = shape(frame, tx)
    assert evm_db(frame, matched_filter(f, tx, delay_hint=1)) > evm_db(frame, matched_filter(f, tx)) + 20


def test_non_integer_oversampling_rejected():
    with pytest.raises(ValueError):
        samples_per_symbol_of(TimeGrid(128, 100e9), 30e9)


# --- transceiver noise -------------------------------------------------------------------------

@pytest.mark.parametrize("target", [19.89, 23.49])
def test_b2b_noise_calibration(target):
    tx = TxConfig(50e9 if target < 21 else 25e9, 0.01, 2, 2**16)
    frame = random_frame(256, tx.n_symbols, seed=9)
    noisy = load_transceiver_noise(shape(frame, tx), target, seed=3, symbol_rate=tx.symbol_rate)
    assert snr_estimate(frame, matched_filter(noisy, tx)).db == pytest.approx(target, abs=0.1)


def test_b2b_noise_split_adds_up():
    tx = TxConfig(50e9, 0.01, 2, 2**16)
    frame = random_frame(256, tx.n_symbols, seed=4)
    f = shape(frame, tx)
    f = load_transceiver_noise(f, 20.0, rng_stream(1, "a"), tx.symbol_rate, fraction=0.3)
    f = load_transceiver_noise(f, 20.0, rng_stream(1, "b"), tx.symbol_rate, fraction=0.7)
    assert snr_estimate(frame, matched_filter(f, tx)).db == pytest.approx(20.0, abs=0.1)


def test_b2b_noise_disabled():
    tx = TxConfig(50e9, 0.01, 2, 2**10)
    f = shape(random_frame(4, tx.n_symbols), tx)
    assert load_transceiver_noise(f, np.inf, 0, tx.symbol_rate) is f
    assert load_transceiver_noise(f, 20.0, 0, tx.symbol_rate, fraction=0.0) is f
    with pytest.raises(ValueError):
        load_transceiver_noise(f, np.nan, 0, tx.symbol_rate)


# --- scalar equaliser -------------------------------------------------------------------------------

def test_equalizer_undoes_scale_and_rotation():
    frame = random_frame(16, 1024)
    out = scalar_equalize(frame.replace(2 * frame.symbols), frame)
    assert np.allclose(out.symbols, frame.symbols, atol=1e-14)
    for theta in (0.3, -2.0, np.pi):
        out = scalar_equalize(frame.replace(np.exp(1j * theta) * frame.symbols), frame)
        assert np.allclose(out.symbols, frame.symbols, atol=1e-14)


def test_equalizer_mmse_shrinkage():
    frame = random_frame(256, 2**16, seed=1)
    x = frame.symbols
    x = x / np.sqrt(np.mean(np.abs(x) ** 2, axis=1, keepdims=True))
    var = 0.1
    rng = rng_stream(2, "n")
    n = np.sqrt(var / 2) * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    y = x + n
    out = scalar_equalize(SymbolFrame(y), SymbolFrame(x))
    a = out.symbols[:, 0] / y[:, 0]
    assert np.allclose(a, 1 / (1 + var), rtol=0.02)


@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
@settings(max_examples=40)
def test_equalizer_scale_invariance(c):
    frame = random_frame(16, 256, seed=6)
    y = frame.symbols + 0.1 * rng_stream(0, "y").standard_normal(frame.symbols.shape)
    a = scalar_equalize(SymbolFrame(y), frame).symbols
    b = scalar_equalize(SymbolFrame(c * y), frame).symbols
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-10


def test_equalizer_rejects_zero_power():
    frame = random_frame(4, 64)
    with pytest.raises(ValueError):
        scalar_equalize(frame.replace(np.zeros((2, 64))), frame)
