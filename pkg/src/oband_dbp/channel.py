"""Forward fibre-link model: split-step Manakov/NLSE spans and O-band amplifiers.

Sign convention: with numpy's FFT ordering the linear operator over a length
``L`` is ``exp(+1j * beta2 / 2 * omega**2 * L)`` and the Kerr term rotates the
phase by ``+gamma * |A|**2 * L_eff``.  Compensation uses the conjugates.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.constants as const

from .grid import (
    SampledField,
    SeedLike,
    as_generator,
    cis,
    complex_gaussian,
    dbm_to_watts,
    fft,
    ifft,
    rng_stream,
    set_average_power,
)

MANAKOV_FACTOR = 8 / 9
C_NM_PER_PS = const.c * 1e-3  # 1 m/s = 1e9 nm / 1e12 ps


class StepSizeWarning(RuntimeWarning):
    """A fixed step count gives more nonlinear phase per step than the configured bound."""


def dispersion_to_beta2(D: float, wavelength_nm: float) -> float:
    """Group-velocity dispersion beta2 [ps^2/km] from D [ps/(nm km)] at ``wavelength_nm``."""
    if wavelength_nm <= 0:
        raise ValueError("wavelength must be positive")
    return -D * wavelength_nm**2 / (2 * np.pi * C_NM_PER_PS)


def alpha_linear(alpha_db_per_km: float) -> float:
    """Power attenuation coefficient in 1/km."""
    return alpha_db_per_km * np.log(10) / 10


def effective_length(alpha_db_per_km: float, length: float) -> float:
    a = alpha_linear(alpha_db_per_km)
    x = a * length
    if abs(x) < 1e-6:
        return length * (1 - x / 2 + x * x / 6)
    return -math.expm1(-x) / a


def apply_dispersion(fld: SampledField, beta2: float, length: float) -> SampledField:
    if beta2 * length == 0:
        return fld
    w = fld.grid.omega_ps()
    H = cis(0.5 * beta2 * length * w**2)
    return fld.replace(ifft(fft(fld.samples) * H))


def nonlinear_phase(samples: np.ndarray, gamma: float, eff_length: float, manakov: bool = True) -> np.ndarray:
    """Kerr phase per sample.

    Manakov mode returns one row of shape ``(n,)`` driven by the total power and
    shared by both polarisations; scalar mode returns ``(2, n)``.
    """
    p = samples.real**2 + samples.imag**2
    if manakov:
        return MANAKOV_FACTOR * gamma * eff_length * p.sum(axis=0)
    return gamma * eff_length * p


def apply_nonlinear(fld: SampledField, gamma: float, eff_length: float, manakov: bool = True) -> SampledField:
    if eff_length < 0:
        raise ValueError("effective length must be non-negative")
    if gamma == 0 or eff_length == 0:
        return fld
    theta = nonlinear_phase(fld.samples, gamma, eff_length, manakov)
    return fld.replace(fld.samples * cis(theta))


def apply_attenuation(fld: SampledField, alpha_db_per_km: float, length: float) -> SampledField:
    if alpha_db_per_km * length == 0:
        return fld
    return fld.replace(fld.samples * 10 ** (-alpha_db_per_km * length / 20))


@dataclass(frozen=True)
class FiberSpan:
    length: float  # km
    alpha_db_per_km: float = 0.283
    D: float = 0.01  # ps/(nm km)
    gamma: float = 1.6  # 1/(W km)
    ref_wavelength: float = 1310.0  # nm

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("span length must be positive")
        if self.alpha_db_per_km < 0 or self.gamma < 0:
            raise ValueError("attenuation and gamma must be non-negative")

    @property
    def beta2(self) -> float:
        return dispersion_to_beta2(self.D, self.ref_wavelength)

    @property
    def loss_db(self) -> float:
        return self.alpha_db_per_km * self.length

    @property
    def eff_length(self) -> float:
        return effective_length(self.alpha_db_per_km, self.length)


@dataclass(frozen=True)
class SsfmConfig:
    """Step control. ``steps_per_span`` overrides the adaptive ``max_phase_rad`` bound."""

    steps_per_span: Optional[int] = None
    max_phase_rad: float = 3e-3
    manakov: bool = True

    def __post_init__(self):
        if self.steps_per_span is not None and self.steps_per_span < 1:
            raise ValueError("steps_per_span must be >= 1")
        if self.max_phase_rad <= 0:
            raise ValueError("max_phase_rad must be positive")


def step_lengths(span: FiberSpan, cfg: SsfmConfig, power: float) -> np.ndarray:
    """Step sizes [km] for one span launched at ``power`` W.

    A fixed ``steps_per_span`` gives uniform steps.  Otherwise the span is cut
    into steps of equal effective length, so every step carries the same
    nonlinear phase, and the count is the smallest one keeping that phase
    within ``max_phase_rad``.
    """
    eta = MANAKOV_FACTOR if cfg.manakov else 1.0
    if cfg.steps_per_span is not None:
        n = cfg.steps_per_span
        h = np.full(n, span.length / n)
        phase = eta * span.gamma * power * effective_length(span.alpha_db_per_km, h[0])
        if phase > cfg.max_phase_rad:
            warnings.warn(
                f"{n} steps give {phase * 1e3:.2f} mrad per step (bound {cfg.max_phase_rad * 1e3:.2f} mrad)",
                StepSizeWarning,
                stacklevel=3,
            )
        return h
    total = eta * span.gamma * power * span.eff_length
    n = max(1, math.ceil(total / cfg.max_phase_rad * (1 - 1e-12)))
    a = alpha_linear(span.alpha_db_per_km)
    if a * span.length < 1e-9:
        return np.full(n, span.length / n)
    # boundaries z_k with exp(-a z_k) = 1 - k (1 - exp(-a L)) / n
    frac = np.arange(n + 1) / n
    z = -np.log1p(frac * np.expm1(-a * span.length)) / a
    z[-1] = span.length
    return np.diff(z)


def ssfm_propagate(fld: SampledField, span: FiberSpan, cfg: SsfmConfig = SsfmConfig()) -> SampledField:
    """Symmetric split-step integration over one span.

    Each step is half dispersion, a Kerr rotation over the step's loss-weighted
    effective length, half dispersion, then the step's attenuation.  Adjacent
    half steps are merged, so ``n`` steps cost ``n + 1`` transform pairs.
    """
    if span.gamma == 0:
        return apply_attenuation(apply_dispersion(fld, span.beta2, span.length), span.alpha_db_per_km, span.length)

    steps = step_lengths(span, cfg, fld.power)
    n = steps.size
    kw = 0.5 * span.beta2 * fld.grid.omega_ps() ** 2
    cache = {}

    def disp(length):
        key = round(length, 12)
        if key not in cache:
            cache[key] = cis(kw * length)
        return cache[key]

    X = fft(fld.samples) * disp(steps[0] / 2)
    for k, h in enumerate(steps):
        A = ifft(X)
        A *= cis(nonlinear_phase(A, span.gamma, effective_length(span.alpha_db_per_km, h), cfg.manakov))
        A *= 10 ** (-span.alpha_db_per_km * h / 20)
        X = fft(A)
        nxt = steps[k + 1] if k + 1 < n else 0.0
        X *= disp((h + nxt) / 2)
    return fld.replace(ifft(X))


# --- amplifiers ---------------------------------------------------------------

def photon_energy(wavelength_nm: float) -> float:
    return const.h * const.c / (wavelength_nm * 1e-9)


def ase_psd_per_pol(gain_db: float, nf_db: float, wavelength_nm: float) -> float:
    """ASE power spectral density per polarisation, (G F - 1) h nu / 2 [W/Hz]."""
    gf = 10 ** ((gain_db + nf_db) / 10)
    return max(gf - 1.0, 0.0) * photon_energy(wavelength_nm) / 2


def amplify(fld: SampledField, gain_db: float, nf_db: float, wavelength_nm: float, seed: SeedLike) -> SampledField:
    """Lumped amplifier: amplitude gain plus white ASE over the full sampling band."""
    if gain_db < 0 or nf_db < 0:
        raise ValueError("gain and noise figure must be >= 0 dB")
    out = fld.samples * 10 ** (gain_db / 20)
    var = ase_psd_per_pol(gain_db, nf_db, wavelength_nm) * fld.grid.sample_rate
    if var > 0:
        out = out + complex_gaussian(as_generator(seed), out.shape, var)
    return fld.replace(out)


def gain_for_output_power(p_in: float, p_out: float, nf_db: float, wavelength_nm: float, bandwidth: float) -> float:
    """Gain [dB] whose amplified signal plus ASE (both polarisations, ``bandwidth`` Hz) totals ``p_out`` W.

    Solves ``G p_in + (G F - 1) h nu B = p_out`` for ``G``.
    """
    if p_in <= 0 or p_out <= 0:
        raise ValueError("amplifier input and output powers must be positive")
    n = photon_energy(wavelength_nm) * bandwidth
    f = 10 ** (nf_db / 10)
    return 10 * math.log10((p_out + n) / (p_in + f * n))


@dataclass(frozen=True)
class AmplifierProfile:
    """Gain and noise figure versus wavelength, linearly interpolated."""

    wavelength_nm: np.ndarray = field(repr=False)
    gain_db: np.ndarray = field(repr=False)
    nf_db: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.wavelength_nm, float)
        g = np.asarray(self.gain_db, float)
        nf = np.asarray(self.nf_db, float)
        if not (w.shape == g.shape == nf.shape) or w.ndim != 1 or w.size < 2:
            raise ValueError("profile needs at least two rows of equal-length columns")
        if np.any(np.diff(w) <= 0):
            raise ValueError("profile wavelengths must be strictly increasing")
        if np.any(nf < 0) or not np.all(np.isfinite(g)):
            raise ValueError("profile has negative NF or non-finite gain")
        for name, a in (("wavelength_nm", w), ("gain_db", g), ("nf_db", nf)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.wavelength_nm[0]), float(self.wavelength_nm[-1])

    def lookup(self, wavelength_nm: float) -> Tuple[float, float]:
        lo, hi = self.span
        if not lo <= wavelength_nm <= hi:
            raise ValueError(f"wavelength {wavelength_nm} nm outside profile range [{lo}, {hi}] nm")
        return (
            float(np.interp(wavelength_nm, self.wavelength_nm, self.gain_db)),
            float(np.interp(wavelength_nm, self.wavelength_nm, self.nf_db)),
        )


def profile_lookup(profile: AmplifierProfile, wavelength_nm: float) -> Tuple[float, float]:
    return profile.lookup(wavelength_nm)


def load_amplifier_profile(path: Union[str, Path, None] = None) -> AmplifierProfile:
    """Read a ``wavelength_nm,gain_db,nf_db`` CSV; defaults to the shipped BDFA data."""
    if path is None:
        text = resources.files("oband_dbp.data").joinpath("bdfa_profile.csv").read_text()
    else:
        text = Path(path).read_text()
    reader = csv.reader(text.splitlines())
    header = next(reader)
    if [h.strip() for h in header] != ["wavelength_nm", "gain_db", "nf_db"]:
        raise ValueError(f"unexpected profile header {header}")
    rows = np.array([[float(v) for v in r] for r in reader if r], dtype=float)
    return AmplifierProfile(rows[:, 0], rows[:, 1], rows[:, 2])


# --- link ---------------------------------------------------------------------

@dataclass(frozen=True)
class Lop2Table:
    """Measured second-span launch power as a function of the first, interpolated in dB."""

    lop1_dbm: Tuple[float, ...]
    lop2_dbm: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lop1_dbm", tuple(float(v) for v in self.lop1_dbm))
        object.__setattr__(self, "lop2_dbm", tuple(float(v) for v in self.lop2_dbm))
        if len(self.lop1_dbm) != len(self.lop2_dbm) or not self.lop1_dbm:
            raise ValueError("LOP table columns must be non-empty and of equal length")
        if np.any(np.diff(self.lop1_dbm) <= 0):
            raise ValueError("LOP1 values must be strictly increasing")

    def __call__(self, lop1_dbm: float, span_loss_db: float = 0.0) -> float:
        lo, hi = self.lop1_dbm[0], self.lop1_dbm[-1]
        if not lo <= lop1_dbm <= hi:
            raise ValueError(f"LOP1 {lop1_dbm} dBm outside table range [{lo}, {hi}] dBm")
        return float(np.interp(lop1_dbm, self.lop1_dbm, self.lop2_dbm))


@dataclass(frozen=True)
class FixedGain:
    """Amplifier with constant gain: LOP2 = LOP1 - span loss + gain."""

    gain_db: float

    def __call__(self, lop1_dbm: float, span_loss_db: float = 0.0) -> float:
        return lop1_dbm - span_loss_db + self.gain_db


@dataclass(frozen=True)
class LinkConfig:
    """Multi-span link with an inline amplifier after every span but the last.

    Span ``k >= 1`` is launched at ``lop2_rule(lop1)``.  The inline amplifier
    gain is chosen so that its total output (signal plus ASE) equals that
    launch power, which without ASE is the launch-power step plus the
    preceding span's loss.  Its NF comes
    from ``mid_amp`` (a profile, or an explicit ``(gain_db, nf_db)`` pair whose
    gain entry is unused) plus ``excess_noise_db``, which lumps noise sources
    the lumped-amplifier model does not capture.  The receive amplifier restores
    the last span's loss and is noiseless unless ``rx_amp_ase`` is set; the
    result is then normalised to ``rx_power_dbm``.
    """

    spans: Tuple[FiberSpan, ...]
    mid_amp: Union[AmplifierProfile, Tuple[float, float]]
    signal_wavelength: float
    lop1: float
    lop2_rule: Union[Lop2Table, FixedGain]
    ase: bool = True
    excess_noise_db: float = 0.0
    rx_amp_ase: bool = False
    rx_power_dbm: float = 2.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))
        if not self.spans:
            raise ValueError("link needs at least one span")

    def nf_db(self) -> float:
        """Inline-amplifier noise figure at the signal wavelength, including ``excess_noise_db``."""
        if isinstance(self.mid_amp, AmplifierProfile):
            nf = self.mid_amp.lookup(self.signal_wavelength)[1]
        else:
            nf = float(self.mid_amp[1])
        return nf + self.excess_noise_db

    def launch_powers_dbm(self) -> Tuple[float, ...]:
        p = [float(self.lop1)]
        for prev in self.spans[:-1]:
            p.append(self.lop2_rule(self.lop1, prev.loss_db))
        return tuple(p)


@dataclass(frozen=True)
class SpanKnowledge:
    length: float
    alpha_db_per_km: float
    launch_power: float  # W


@dataclass(frozen=True)
class LinkKnowledge:
    """What the receiver knows about the link: per-span geometry and launch powers."""

    spans: Tuple[SpanKnowledge, ...]
    wavelength_nm: float
    mid_gains_db: Tuple[float, ...] = ()

    @property
    def total_length(self) -> float:
        return float(sum(s.length for s in self.spans))

    @classmethod
    def from_link(cls, link: LinkConfig) -> "LinkKnowledge":
        """Nominal knowledge (launch powers from the rule, not measured)."""
        p = dbm_to_watts(np.array(link.launch_powers_dbm()))
        spans = tuple(SpanKnowledge(s.length, s.alpha_db_per_km, float(pw)) for s, pw in zip(link.spans, p))
        return cls(spans, link.signal_wavelength)


def propagate_link(
    fld: SampledField,
    link: LinkConfig,
    cfg: SsfmConfig = SsfmConfig(),
    seed: int = 0,
    trace_index: int = 0,
) -> Tuple[SampledField, LinkKnowledge]:
    """Send ``fld`` through ``link``.

    Returns the received field and the link knowledge a receiver would have,
    with launch powers as measured at each span input.
    ASE draws use the streams ``("ase_mid<k>", trace_index)`` and
    ``("ase_rx", trace_index)`` of ``seed``.
    """
    targets = link.launch_powers_dbm()
    nf = link.nf_db()
    a = set_average_power(fld, float(dbm_to_watts(targets[0])))
    known, gains = [], []
    for k, span in enumerate(link.spans):
        if k > 0:
            prev = link.spans[k - 1]
            p_out = float(dbm_to_watts(targets[k]))
            if link.ase:
                gain = gain_for_output_power(a.power, p_out, nf, link.signal_wavelength, a.grid.sample_rate)
            else:
                gain = 10 * math.log10(p_out / a.power)
            if gain < 0:
                raise ValueError(f"LOP{k + 1} {targets[k]:.2f} dBm needs negative amplifier gain")
            if link.ase:
                a = amplify(a, gain, nf, link.signal_wavelength, rng_stream(seed, f"ase_mid{k}", trace_index))
            else:
                a = a.replace(a.samples * 10 ** (gain / 20))
            gains.append(gain)
        known.append(SpanKnowledge(span.length, span.alpha_db_per_km, a.power))
        a = ssfm_propagate(a, span, cfg)

    last = link.spans[-1]
    if link.ase and link.rx_amp_ase:
        a = amplify(a, last.loss_db, nf, link.signal_wavelength, rng_stream(seed, "ase_rx", trace_index))
    a = set_average_power(a, float(dbm_to_watts(link.rx_power_dbm)))
    return a, LinkKnowledge(tuple(known), link.signal_wavelength, tuple(gains))


__all__ = [
    "AmplifierProfile",
    "FiberSpan",
    "FixedGain",
    "LinkConfig",
    "LinkKnowledge",
    "Lop2Table",
    "MANAKOV_FACTOR",
    "SpanKnowledge",
    "SsfmConfig",
    "StepSizeWarning",
    "amplify",
    "apply_attenuation",
    "apply_dispersion",
    "apply_nonlinear",
    "ase_psd_per_pol",
    "dispersion_to_beta2",
    "effective_length",
    "gain_for_output_power",
    "load_amplifier_profile",
    "profile_lookup",
    "propagate_link",
    "ssfm_propagate",
]
