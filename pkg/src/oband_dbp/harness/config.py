"""Experiment configuration files and shipped presets.

Configs are TOML with a fixed set of sections and keys; units are part of the
key names.  Anything not in ``SCHEMA`` is rejected with the offending line.

Sections and keys (defaults in parentheses)::

    [experiment]
    link_preset          shipped link name ("1310nm") or path to a link TOML (required)
    symbol_rate_bd       symbol rate in baud (required)
    qam_order            4, 16, 64 or 256 (256)
    n_symbols            power of two (32768)
    samples_per_symbol   integer >= 2 (2)
    rolloff              RRC roll-off in (0, 1] (0.01)
    b2b_snr_db           transceiver SNR floor, inf disables (inf)
    tx_noise_fraction    share of the floor added at the transmitter (0.5)
    lop1_dbm             first-span launch power (0.0)

    [channel]
    gamma_per_w_km       overrides the preset fibre nonlinearity (preset)
    excess_noise_db      overrides the preset inline-amplifier excess noise (preset)
    ase                  amplifier noise on/off (true)
    ssfm_steps_per_span  fixed step count; adaptive when absent
    ssfm_max_phase_rad   adaptive nonlinear-phase bound per step (0.003)
    manakov              8/9 Manakov Kerr term, else scalar per polarisation (true)

    [dbp]
    kappa                dispersion split (0.5)
    d_dbp_ps_nm_km       DBP dispersion (fibre value of the preset)
    gamma_dbp_per_w_km   DBP nonlinear coefficient (forward gamma)
    mode                 "single_step_wh" or "multi_step" ("single_step_wh")
    steps_per_span       multi-step DBP steps (1)
    gamma_grid_per_w_km  if set, LOP sweeps pick the best gamma from this list ([])

    [seeds]
    master_seed          (1)
    n_traces             (50)

    [sweep]
    lop1_dbm             launch powers for sweep-lop ([])
    kappa                splits for sweep-kappa ([])

    [dbp_grid]
    d_values_ps_nm_km    dispersion grid for sweep-dbp ([])
    gamma_values_per_w_km  gamma grid for sweep-dbp ([])
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Dict, NamedTuple, Optional, Tuple, Union

import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ..channel import FiberSpan, LinkConfig, Lop2Table, SsfmConfig, load_amplifier_profile
from ..dsp import DbpConfig, MULTI_STEP, SINGLE_STEP_WH
from ..txrx import SUPPORTED_ORDERS, TxConfig


class ConfigError(ValueError):
    """Invalid configuration; the message carries ``file:line`` when known."""


class Key(NamedTuple):
    field: str
    kind: str  # float | int | bool | str | floats
    default: Any = None
    check: Optional[Callable[[Any], Optional[str]]] = None
    required: bool = False


def _positive(v):
    return None if v > 0 else "must be positive"


def _non_negative(v):
    return None if v >= 0 else "must be non-negative"


def _unit(v):
    return None if 0 <= v <= 1 else "must lie in [0, 1]"


def _pow2(v):
    return None if v >= 32 and not v & (v - 1) else "must be a power of two >= 32"


def _sorted_list(v):
    return None if list(v) == sorted(v) else "values must be sorted ascending"


def _kappas(v):
    return _sorted_list(v) or (None if all(0 <= k <= 1 for k in v) else "values must lie in [0, 1]")


SCHEMA: Dict[str, Dict[str, Key]] = {
    "experiment": {
        "link_preset": Key("link_preset", "str", required=True),
        "symbol_rate_bd": Key("symbol_rate_bd", "float", check=_positive, required=True),
        "qam_order": Key("qam_order", "int", 256, lambda v: None if v in SUPPORTED_ORDERS else f"must be one of {SUPPORTED_ORDERS}"),
        "n_symbols": Key("n_symbols", "int", 32768, _pow2),
        "samples_per_symbol": Key("samples_per_symbol", "int", 2, lambda v: None if v >= 2 else "must be >= 2"),
        "rolloff": Key("rolloff", "float", 0.01, lambda v: None if 0 < v <= 1 else "must lie in (0, 1]"),
        "b2b_snr_db": Key("b2b_snr_db", "float", math.inf, lambda v: None if not math.isnan(v) else "must be a number"),
        "tx_noise_fraction": Key("tx_noise_fraction", "float", 0.5, _unit),
        "lop1_dbm": Key("lop1_dbm", "float", 0.0),
    },
    "channel": {
        "gamma_per_w_km": Key("gamma_per_w_km", "float", None, _non_negative),
        "excess_noise_db": Key("excess_noise_db", "float", None, _non_negative),
        "ase": Key("ase", "bool", True),
        "ssfm_steps_per_span": Key("ssfm_steps_per_span", "int", None, _positive),
        "ssfm_max_phase_rad": Key("ssfm_max_phase_rad", "float", 3e-3, _positive),
        "manakov": Key("manakov", "bool", True),
    },
    "dbp": {
        "kappa": Key("kappa", "float", 0.5, _unit),
        "d_dbp_ps_nm_km": Key("d_dbp", "float", None),
        "gamma_dbp_per_w_km": Key("gamma_dbp", "float", None, _non_negative),
        "mode": Key("dbp_mode", "str", SINGLE_STEP_WH, lambda v: None if v in (SINGLE_STEP_WH, MULTI_STEP) else f"must be {SINGLE_STEP_WH!r} or {MULTI_STEP!r}"),
        "steps_per_span": Key("dbp_steps_per_span", "int", 1, _positive),
        "gamma_grid_per_w_km": Key("dbp_gamma_grid", "floats", (), _sorted_list),
    },
    "seeds": {
        "master_seed": Key("master_seed", "int", 1, _non_negative),
        "n_traces": Key("n_traces", "int", 50, _positive),
    },
    "sweep": {
        "lop1_dbm": Key("sweep_lop1_dbm", "floats", (), _sorted_list),
        "kappa": Key("sweep_kappa", "floats", (), _kappas),
    },
    "dbp_grid": {
        "d_values_ps_nm_km": Key("grid_d_values", "floats", (), _sorted_list),
        "gamma_values_per_w_km": Key("grid_gamma_values", "floats", (), _sorted_list),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    link_preset: str
    symbol_rate_bd: float
    qam_order: int = 256
    n_symbols: int = 32768
    samples_per_symbol: int = 2
    rolloff: float = 0.01
    b2b_snr_db: float = math.inf
    tx_noise_fraction: float = 0.5
    lop1_dbm: float = 0.0
    gamma_per_w_km: Optional[float] = None
    excess_noise_db: Optional[float] = None
    ase: bool = True
    ssfm_steps_per_span: Optional[int] = None
    ssfm_max_phase_rad: float = 3e-3
    manakov: bool = True
    kappa: float = 0.5
    d_dbp: Optional[float] = None
    gamma_dbp: Optional[float] = None
    dbp_mode: str = SINGLE_STEP_WH
    dbp_steps_per_span: int = 1
    dbp_gamma_grid: Tuple[float, ...] = ()
    master_seed: int = 1
    n_traces: int = 50
    sweep_lop1_dbm: Tuple[float, ...] = ()
    sweep_kappa: Tuple[float, ...] = ()
    grid_d_values: Tuple[float, ...] = ()
    grid_gamma_values: Tuple[float, ...] = ()

    # --- resolved views -------------------------------------------------------

    def link(self, lop1_dbm: Optional[float] = None) -> LinkConfig:
        base = load_link_preset(self.link_preset)
        spans = base.spans
        if self.gamma_per_w_km is not None:
            spans = tuple(dataclasses.replace(s, gamma=self.gamma_per_w_km) for s in spans)
        changes = dict(spans=spans, lop1=self.lop1_dbm if lop1_dbm is None else lop1_dbm, ase=self.ase)
        if self.excess_noise_db is not None:
            changes["excess_noise_db"] = self.excess_noise_db
        return dataclasses.replace(base, **changes)

    @property
    def wavelength_nm(self) -> float:
        return load_link_preset(self.link_preset).signal_wavelength

    @property
    def fibre_dispersion(self) -> float:
        return load_link_preset(self.link_preset).spans[0].D

    @property
    def forward_gamma(self) -> float:
        if self.gamma_per_w_km is not None:
            return self.gamma_per_w_km
        return load_link_preset(self.link_preset).spans[0].gamma

    def tx(self) -> TxConfig:
        return TxConfig(self.symbol_rate_bd, self.rolloff, self.samples_per_symbol, self.n_symbols)

    def ssfm(self) -> SsfmConfig:
        return SsfmConfig(self.ssfm_steps_per_span, self.ssfm_max_phase_rad, self.manakov)

    def dbp(self, **overrides) -> DbpConfig:
        kw = dict(
            kappa=self.kappa,
            d_dbp=self.fibre_dispersion if self.d_dbp is None else self.d_dbp,
            gamma_dbp=self.forward_gamma if self.gamma_dbp is None else self.gamma_dbp,
            mode=self.dbp_mode,
            steps_per_span=self.dbp_steps_per_span,
            manakov=self.manakov,
        )
        kw.update(overrides)
        return DbpConfig(**kw)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # --- serialisation ----------------------------------------------------------

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        out: Dict[str, Dict[str, Any]] = {}
        for section, keys in SCHEMA.items():
            sec = {}
            for name, key in keys.items():
                v = getattr(self, key.field)
                if v is None:
                    continue
                sec[name] = list(v) if key.kind == "floats" else v
            if sec:
                out[section] = sec
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_toml().encode()).hexdigest()[:16]


# --- parsing --------------------------------------------------------------------

_SECTION_RE = re.compile(r"^\s*\[\s*([A-Za-z0-9_.]+)\s*\]")


def _line_of(text: str, section: Optional[str], key: Optional[str]) -> Optional[int]:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(line)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return no
    return None


def _coerce(value, key: Key):
    if key.kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        return float(value)
    if key.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError("expected an integer")
        return value
    if key.kind == "bool":
        if not isinstance(value, bool):
            raise TypeError("expected true or false")
        return value
    if key.kind == "str":
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value
    if key.kind == "floats":
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise TypeError("expected a list of numbers")
        return tuple(float(v) for v in value)
    raise AssertionError(key.kind)


def config_from_text(text: str, source: str = "<string>", base_dir: Optional[Path] = None) -> ExperimentConfig:
    def fail(msg, section=None, key=None):
        line = _line_of(text, section, key) if section else None
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: {msg}")

    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    values: Dict[str, Any] = {}
    for section, body in data.items():
        if section not in SCHEMA:
            fail(f"unknown section [{section}]", section)
        if not isinstance(body, dict):
            fail(f"[{section}] must be a table", section)
        for name, raw in body.items():
            key = SCHEMA[section].get(name)
            if key is None:
                fail(f"unknown key '{name}' in [{section}]", section, name)
            try:
                v = _coerce(raw, key)
            except TypeError as exc:
                fail(f"{section}.{name}: {exc}", section, name)
            if key.check is not None:
                err = key.check(v)
                if err:
                    fail(f"{section}.{name} {err}", section, name)
            values[key.field] = v

    for section, keys in SCHEMA.items():
        for name, key in keys.items():
            if key.required and key.field not in values:
                fail(f"missing required key {section}.{name}", section)

    preset = values["link_preset"]
    if preset not in shipped_link_presets():
        p = Path(preset)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            fail(f"unknown link preset {preset!r} (shipped: {', '.join(shipped_link_presets())})", "experiment", "link_preset")
        values["link_preset"] = str(p.resolve())

    cfg = ExperimentConfig(**values)
    try:
        cfg.tx()
    except ValueError as exc:
        fail(f"inconsistent transmitter settings: {exc}", "experiment")
    return cfg


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p}: no such config file")
    return config_from_text(p.read_text(), str(p), p.parent)


def shipped_presets() -> Tuple[str, ...]:
    names = [f.name[:-5] for f in resources.files("oband_dbp.data.presets").iterdir() if f.name.endswith(".toml")]
    return tuple(sorted(n for n in names if not n.startswith("link_")))


def shipped_link_presets() -> Tuple[str, ...]:
    names = [f.name[5:-5] for f in resources.files("oband_dbp.data.presets").iterdir() if f.name.startswith("link_")]
    return tuple(sorted(names))


def load_preset(name: str) -> ExperimentConfig:
    """Experiment preset such as ``"1310nm_50gbd"``."""
    if name not in shipped_presets():
        raise ConfigError(f"unknown preset {name!r} (shipped: {', '.join(shipped_presets())})")
    text = resources.files("oband_dbp.data.presets").joinpath(f"{name}.toml").read_text()
    return config_from_text(text, f"preset:{name}")


_LINK_CACHE: Dict[str, LinkConfig] = {}


def load_link_preset(name_or_path: str) -> LinkConfig:
    """Link description from a shipped name or a TOML file, with ``lop1`` = 0 dBm."""
    if name_or_path in _LINK_CACHE:
        return _LINK_CACHE[name_or_path]
    if name_or_path in shipped_link_presets():
        src = f"link:{name_or_path}"
        text = resources.files("oband_dbp.data.presets").joinpath(f"link_{name_or_path}.toml").read_text()
        base = None
    else:
        p = Path(name_or_path)
        src, text, base = str(p), p.read_text(), p.parent
    link = _link_from_text(text, src, base)
    _LINK_CACHE[name_or_path] = link
    return link


def _link_from_text(text: str, source: str, base_dir: Optional[Path]) -> LinkConfig:
    try:
        d = tomllib.loads(text)
        wl = float(d["signal_wavelength_nm"])
        spans = tuple(
            FiberSpan(
                length=float(s["length_km"]),
                alpha_db_per_km=float(s["alpha_db_per_km"]),
                D=float(s["dispersion_ps_nm_km"]),
                gamma=float(s["gamma_per_w_km"]),
                ref_wavelength=wl,
            )
            for s in d["spans"]
        )
        amp = d["mid_amp"]
        if "profile" in amp:
            prof = amp["profile"]
            if base_dir is not None and (base_dir / prof).is_file():
                mid = load_amplifier_profile(base_dir / prof)
            else:
                mid = load_amplifier_profile(None if prof == "bdfa_profile.csv" else prof)
        else:
            mid = (float(amp.get("gain_db", 0.0)), float(amp["nf_db"]))
        table = d["lop2_table"]
        rx = d.get("rx", {})
        return LinkConfig(
            spans=spans,
            mid_amp=mid,
            signal_wavelength=wl,
            lop1=0.0,
            lop2_rule=Lop2Table(table["lop1_dbm"], table["lop2_dbm"]),
            excess_noise_db=float(d.get("excess_noise_db", 0.0)),
            rx_amp_ase=bool(rx.get("amp_ase", False)),
            rx_power_dbm=float(rx.get("power_dbm", 2.0)),
            name=str(d.get("name", "")),
        )
    except (KeyError, TypeError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{source}: invalid link preset: {exc}") from None
