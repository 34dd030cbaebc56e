"""Square-QAM transmitter and receiver front-end.

Pulse shaping and matched filtering are done on the whole block in the frequency
domain (circular convolution with an exact, zero-phase root-raised-cosine
response).  Because the response is zero-phase, symbol instants sit at
``k * samples_per_symbol`` with no group-delay offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import (
    SampledField,
    SeedLike,
    TimeGrid,
    as_generator,
    complex_gaussian,
    fft,
    ifft,
    make_time_grid,
)

SUPPORTED_ORDERS = (4, 16, 64, 256)


def _gray(i):
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    """Gray-labelled square QAM with unit mean energy.

    ``points[l]`` is the point carrying label ``l`` (MSB first in ``labels[l]``).
    The first half of each label selects the in-phase level and the second half
    the quadrature level; each axis uses a reflected Gray code with bit value 0
    on the positive side, so QPSK label ``00`` is ``(1+1j)/sqrt(2)``.
    """

    order: int
    points: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    pam_levels: np.ndarray = field(repr=False)
    pam_labels: np.ndarray = field(repr=False)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))


def build_constellation(order: int) -> Constellation:
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; choose from {SUPPORTED_ORDERS}")
    m = int(np.log2(order))
    h = m // 2
    n_lvl = 2**h
    # index i on an axis sits at amplitude (n_lvl-1-2i) and carries Gray label gray(i)
    raw = np.arange(n_lvl - 1, -n_lvl, -2, dtype=float)
    norm = np.sqrt(2 * np.mean(raw**2))
    pam_labels_int = _gray(np.arange(n_lvl))
    pam_levels = np.empty(n_lvl)
    pam_levels[pam_labels_int] = raw / norm
    # pam_levels / pam_labels are indexed by the per-axis label value
    pam_labels = (np.arange(n_lvl)[:, None] >> np.arange(h - 1, -1, -1)) & 1

    lab = np.arange(order)
    points = pam_levels[lab >> h] + 1j * pam_levels[lab & (n_lvl - 1)]
    labels = (lab[:, None] >> np.arange(m - 1, -1, -1)) & 1
    for a in (points, labels, pam_levels, pam_labels):
        a.setflags(write=False)
    return Constellation(order, points, labels.astype(np.uint8), pam_levels, pam_labels.astype(np.uint8))


@dataclass(frozen=True)
class TxConfig:
    symbol_rate: float
    rolloff: float = 0.01
    samples_per_symbol: int = 2
    n_symbols: int = 2**15
    rrc_span_symbols: int = 128

    def __post_init__(self):
        if not 0 < self.rolloff <= 1:
            raise ValueError("rolloff must lie in (0, 1]")
        if int(self.samples_per_symbol) != self.samples_per_symbol or self.samples_per_symbol < 2:
            raise ValueError("samples_per_symbol must be an integer >= 2")
        if self.symbol_rate <= 0:
            raise ValueError("symbol_rate must be positive")
        if (1 + self.rolloff) * self.symbol_rate > self.sample_rate:
            raise ValueError("occupied bandwidth exceeds the sample rate")

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.samples_per_symbol

    def grid(self) -> TimeGrid:
        return make_time_grid(self.n_symbols * self.samples_per_symbol, self.sample_rate)


@dataclass(frozen=True)
class SymbolFrame:
    """Symbols per polarisation, shape ``(n_pol, n_symbols)``.

    Transmitted frames also carry the bits that produced them, shape
    ``(n_pol, n_symbols, bits_per_symbol)``.
    """

    symbols: np.ndarray = field(repr=False)
    constellation: Optional[Constellation] = None
    bits: Optional[np.ndarray] = field(default=None, repr=False)
    seed: Optional[int] = None

    def __post_init__(self):
        s = np.array(self.symbols, dtype=np.complex128, ndmin=2)
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    @property
    def pol_x(self):
        return self.symbols[0]

    @property
    def pol_y(self):
        return self.symbols[1]

    @property
    def n_pol(self) -> int:
        return self.symbols.shape[0]

    def __len__(self):
        return self.symbols.shape[1]

    def replace(self, symbols) -> "SymbolFrame":
        return SymbolFrame(symbols, self.constellation, self.bits, self.seed)


def generate_bits(n: int, seed: SeedLike) -> np.ndarray:
    if n <= 0:
        raise ValueError("number of bits must be positive")
    return as_generator(seed).integers(0, 2, size=int(n), dtype=np.uint8)


def map_bits(bits, constellation: Constellation, n_pol: int = 2, seed=None) -> SymbolFrame:
    bits = np.asarray(bits, dtype=np.uint8)
    m = constellation.bits_per_symbol
    if bits.size % (n_pol * m):
        raise ValueError(f"bit count {bits.size} not divisible by {n_pol}*{m}")
    b = bits.reshape(n_pol, -1, m)
    idx = b.astype(np.int64) @ (1 << np.arange(m - 1, -1, -1))
    return SymbolFrame(constellation.points[idx], constellation, b, seed)


def demap_hard(symbols, constellation: Constellation) -> np.ndarray:
    """Minimum-distance decisions, returned as bits of shape ``symbols.shape + (m,)``."""
    s = np.asarray(symbols)
    lv = constellation.pam_levels
    h = constellation.bits_per_symbol // 2
    i_idx = np.argmin(np.abs(s.real[..., None] - lv), axis=-1)
    q_idx = np.argmin(np.abs(s.imag[..., None] - lv), axis=-1)
    return constellation.labels[(i_idx << h) | q_idx]


# --- pulse shaping ------------------------------------------------------------

def raised_cosine_spectrum(freqs, symbol_rate: float, rolloff: float) -> np.ndarray:
    f = np.abs(np.asarray(freqs, dtype=float))
    f1 = (1 - rolloff) * symbol_rate / 2
    f2 = (1 + rolloff) * symbol_rate / 2
    rc = np.zeros_like(f)
    rc[f <= f1] = 1.0
    band = (f > f1) & (f <= f2)
    rc[band] = 0.5 * (1 + np.cos(np.pi / (rolloff * symbol_rate) * (f[band] - f1)))
    return rc


def rrc_transfer(grid: TimeGrid, symbol_rate: float, rolloff: float) -> np.ndarray:
    """Real, zero-phase RRC response on ``grid`` with unit-energy impulse response."""
    sps = grid.sample_rate / symbol_rate
    return np.sqrt(sps * raised_cosine_spectrum(grid.freqs(), symbol_rate, rolloff))


def rrc_taps(rolloff: float, samples_per_symbol: int, span_symbols: int) -> np.ndarray:
    """Closed-form RRC impulse response truncated to ``span_symbols``, unit energy.

    Reference only: the shaping filter itself is not truncated.
    """
    half = span_symbols * samples_per_symbol // 2
    t = np.arange(-half, half + 1) / samples_per_symbol
    b = rolloff
    h = np.empty_like(t)
    centre = np.isclose(t, 0)
    sing = np.isclose(np.abs(4 * b * t), 1)
    rest = ~(centre | sing)
    tr = t[rest]
    h[rest] = (np.sin(np.pi * tr * (1 - b)) + 4 * b * tr * np.cos(np.pi * tr * (1 + b))) / (
        np.pi * tr * (1 - (4 * b * tr) ** 2)
    )
    h[centre] = 1 + b * (4 / np.pi - 1)
    h[sing] = b / np.sqrt(2) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
    )
    return h / np.sqrt(np.sum(h**2))


def shape(frame: SymbolFrame, tx: TxConfig) -> SampledField:
    """Upsample and RRC-filter a two-polarisation frame onto ``tx.grid()``."""
    if frame.n_pol != 2:
        raise ValueError("shape expects a dual-polarisation frame")
    if len(frame) != tx.n_symbols:
        raise ValueError(f"frame has {len(frame)} symbols, TxConfig expects {tx.n_symbols}")
    grid = tx.grid()
    sps = tx.samples_per_symbol
    up = np.zeros((2, grid.n_samples), complex)
    up[:, ::sps] = frame.symbols
    H = rrc_transfer(grid, tx.symbol_rate, tx.rolloff)
    return SampledField(grid, ifft(fft(up) * H))


def samples_per_symbol_of(grid: TimeGrid, symbol_rate: float) -> int:
    ratio = grid.sample_rate / symbol_rate
    sps = int(round(ratio))
    if sps < 1 or abs(ratio - sps) > 1e-9 * ratio:
        raise ValueError(f"sample rate is not an integer multiple of the symbol rate ({ratio:g})")
    return sps


def matched_filter(fld: SampledField, tx: TxConfig, delay_hint: int = 0) -> SymbolFrame:
    """RRC matched filter followed by downsampling at ``k*sps + delay_hint``.

    A wrong ``delay_hint`` is not an error; it just samples off the symbol
    instants and the EVM degrades accordingly.
    """
    sps = samples_per_symbol_of(fld.grid, tx.symbol_rate)
    H = rrc_transfer(fld.grid, tx.symbol_rate, tx.rolloff)
    y = ifft(fft(fld.samples) * H)
    y = np.roll(y, -int(delay_hint), axis=-1)
    return SymbolFrame(y[:, ::sps])


# --- transceiver noise and equalisation --------------------------------------

def transceiver_noise_variance(fld: SampledField, b2b_snr_db: float, symbol_rate: float) -> float:
    """Per-sample, per-polarisation white-noise variance giving ``b2b_snr_db`` after matched filtering.

    With unit-energy RRC filters the matched-filter output noise variance equals
    the per-sample variance, while the symbol power is ``sps`` times the
    per-sample signal power.
    """
    sps = fld.grid.sample_rate / symbol_rate
    return (fld.power / 2) * sps / 10 ** (b2b_snr_db / 10)


def load_transceiver_noise(
    fld: SampledField,
    b2b_snr_db: float,
    seed: SeedLike,
    symbol_rate: float,
    fraction: float = 1.0,
) -> SampledField:
    """Add white circular Gaussian noise calibrated to a back-to-back SNR.

    ``fraction`` of the calibrated noise power is added; splitting the floor
    between transmitter and receiver uses ``fraction`` and ``1 - fraction``.
    """
    if np.isposinf(b2b_snr_db) or fraction == 0:
        return fld
    if not np.isfinite(b2b_snr_db):
        raise ValueError("b2b_snr_db must be finite or +inf")
    if fld.power == 0:
        raise ValueError("cannot calibrate noise against an all-zero field")
    var = fraction * transceiver_noise_variance(fld, b2b_snr_db, symbol_rate)
    rng = as_generator(seed)
    return fld.replace(fld.samples + complex_gaussian(rng, fld.samples.shape, var))


def scalar_equalize(rx: SymbolFrame, tx: SymbolFrame) -> SymbolFrame:
    """Per-polarisation least-squares complex gain a = E[X Y*] / E[|Y|^2]."""
    if rx.symbols.shape != tx.symbols.shape:
        raise ValueError("rx and tx frames differ in shape")
    y = rx.symbols
    py = np.mean(np.abs(y) ** 2, axis=-1)
    if np.any(py == 0):
        raise ValueError("cannot equalise a zero-power polarisation")
    a = np.mean(tx.symbols * np.conj(y), axis=-1) / py
    return SymbolFrame(y * a[:, None], tx.constellation)
