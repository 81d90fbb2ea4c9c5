"""Scenario configuration: physical constants, node densities, batteries, biases.

All internal power arithmetic is linear (mW); dBm appears only at the
configuration boundary.  Instances are immutable and safe to share across
worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path


def dbm_to_mw(x_dbm: float) -> float:
    """Convert a power from dBm to linear mW."""
    return 10.0 ** (x_dbm / 10.0)


def mw_to_dbm(p_mw: float) -> float:
    """Convert a power from linear mW to dBm (p_mw must be > 0)."""
    return 10.0 * math.log10(p_mw)


class BsType(Enum):
    """Base-station powering class.

    EH has no grid access, OG has no battery, HY has both.
    """

    EH = "eh"
    HY = "hy"
    OG = "og"


@dataclass(frozen=True)
class BatterySpec:
    """Finite battery: `capacity_units` levels of `unit_mw` each."""

    capacity_units: int = 1000
    unit_mw: float = 0.75


@dataclass(frozen=True)
class HarvestSpec:
    """Bursty renewable arrivals.

    Bursts per slot are Poisson with rate ``mean_units_per_slot /
    burst_units``; every burst delivers ``burst_units`` whole battery units,
    so the per-slot mean is ``mean_units_per_slot``.
    """

    mean_units_per_slot: float = 100.0
    burst_units: int = 30


def _default_lambda(fraction: float, spacing_m: float = 80.0) -> float:
    return fraction / (math.pi * spacing_m**2)


@dataclass(frozen=True)
class NetworkConfig:
    """One scenario: channel, geometry, batteries, biases, run controls.

    Defaults reproduce the reference operating point: mean BS spacing
    R = 80 m with a 40/60 hybrid/harvesting split and no on-grid tier.
    """

    # channel
    kappa: float = 1.0                 # free-space loss at 1 m
    alpha: float = 4.0                 # path-loss exponent, must exceed 2
    sigma_db: float = 4.0              # log-normal shadowing std-dev (dB)
    p_rx_dbm: float = -65.0            # received-power constraint
    p_tx_max_mw: float = 500.0         # per-user grid transmit-power cap

    # geometry (nodes per m^2)
    lambda_eh: float = field(default_factory=lambda: _default_lambda(0.6))
    lambda_hy: float = field(default_factory=lambda: _default_lambda(0.4))
    lambda_og: float = 0.0
    omega: float = field(default_factory=lambda: 50.0 / (math.pi * 100.0**2))

    # association biases (renewable / grid supply)
    beta_a: float = 1.0
    beta_g: float = 1.0

    # energy subsystem
    battery_eh: BatterySpec = BatterySpec()
    battery_hy: BatterySpec = BatterySpec()
    harvest_eh: HarvestSpec = HarvestSpec()
    harvest_hy: HarvestSpec = HarvestSpec()

    # Monte-Carlo controls
    sim_area_m2: float = 1.0e6
    slots: int = 2000
    warmup_slots: int = 200
    replications: int = 20
    seed: int = 1

    @property
    def p_rx_mw(self) -> float:
        return dbm_to_mw(self.p_rx_dbm)

    def bs_density(self, bs_type: BsType) -> float:
        return {
            BsType.EH: self.lambda_eh,
            BsType.HY: self.lambda_hy,
            BsType.OG: self.lambda_og,
        }[bs_type]

    def battery(self, bs_type: BsType) -> BatterySpec:
        if bs_type is BsType.EH:
            return self.battery_eh
        if bs_type is BsType.HY:
            return self.battery_hy
        raise ValueError("on-grid base stations have no battery")

    def harvest(self, bs_type: BsType) -> HarvestSpec:
        if bs_type is BsType.EH:
            return self.harvest_eh
        if bs_type is BsType.HY:
            return self.harvest_hy
        raise ValueError("on-grid base stations have no harvester")


def validate(config: NetworkConfig) -> list[str]:
    """Return the list of invariant violations (empty means valid).

    Violations are data, not exceptions: callers decide whether to abort.
    """
    bad: list[str] = []
    if not config.alpha > 2.0:
        bad.append("alpha must exceed 2")
    if config.kappa <= 0.0:
        bad.append("kappa must be positive")
    if config.sigma_db < 0.0:
        bad.append("sigma_db must be nonnegative")
    if config.p_tx_max_mw < 0.0:
        bad.append("p_tx_max_mw must be nonnegative")
    for name in ("lambda_eh", "lambda_hy", "lambda_og", "omega"):
        if getattr(config, name) < 0.0:
            bad.append(f"{name} must be nonnegative")
    if config.beta_a <= 0.0 or config.beta_g <= 0.0:
        bad.append("biases must be positive")
    for name in ("battery_eh", "battery_hy"):
        spec = getattr(config, name)
        if spec.capacity_units < 1:
            bad.append(f"{name}: capacity_units must be at least 1")
        if spec.unit_mw <= 0.0:
            bad.append(f"{name}: unit_mw must be positive")
    for name in ("harvest_eh", "harvest_hy"):
        spec = getattr(config, name)
        if spec.mean_units_per_slot < 0.0:
            bad.append(f"{name}: mean_units_per_slot must be nonnegative")
        if spec.burst_units < 1:
            bad.append(f"{name}: burst_units must be at least 1")
    if config.sim_area_m2 <= 0.0:
        bad.append("sim_area_m2 must be positive")
    if config.slots < 1:
        bad.append("slots must be at least 1")
    if config.warmup_slots < 0:
        bad.append("warmup_slots must be nonnegative")
    if config.replications < 1:
        bad.append("replications must be at least 1")
    return bad


def spaced_densities(
    spacing_r_m: float, hybrid_fraction_c: float, og_spacing_r_m: float = math.inf
) -> dict[str, float]:
    """Densities for the (R, c, r) parameterization.

    The small-cell tier has overall density 1/(pi R^2) split into a hybrid
    fraction c and a harvesting-only fraction 1 - c; on-grid stations form
    an extra tier of density 1/(pi r^2), with r = inf meaning none.
    """
    base = 1.0 / (math.pi * spacing_r_m**2)
    og = 0.0 if math.isinf(og_spacing_r_m) else 1.0 / (math.pi * og_spacing_r_m**2)
    return {
        "lambda_hy": hybrid_fraction_c * base,
        "lambda_eh": (1.0 - hybrid_fraction_c) * base,
        "lambda_og": og,
    }


# --- flat key-value config files -------------------------------------------

_SCALAR_KEYS = {
    "kappa": float,
    "alpha": float,
    "sigma_db": float,
    "p_rx_dbm": float,
    "p_tx_max_mw": float,
    "lambda_eh": float,
    "lambda_hy": float,
    "lambda_og": float,
    "omega": float,
    "beta_a": float,
    "beta_g": float,
    "sim_area_m2": float,
    "slots": int,
    "warmup_slots": int,
    "replications": int,
    "seed": int,
}

_NESTED_KEYS = {
    "battery_eh_capacity_units": ("battery_eh", "capacity_units", int),
    "battery_eh_unit_mw": ("battery_eh", "unit_mw", float),
    "battery_hy_capacity_units": ("battery_hy", "capacity_units", int),
    "battery_hy_unit_mw": ("battery_hy", "unit_mw", float),
    "harvest_eh_mean_units_per_slot": ("harvest_eh", "mean_units_per_slot", float),
    "harvest_eh_burst_units": ("harvest_eh", "burst_units", int),
    "harvest_hy_mean_units_per_slot": ("harvest_hy", "mean_units_per_slot", float),
    "harvest_hy_burst_units": ("harvest_hy", "burst_units", int),
}

# geometry convenience keys, expanded through spaced_densities()
_SPACING_KEYS = ("mean_spacing_r_m", "hybrid_fraction_c", "og_spacing_r_m")


class ConfigError(ValueError):
    """Raised for unreadable or inconsistent configuration files."""


def parse_config_text(text: str, base: NetworkConfig | None = None) -> NetworkConfig:
    """Parse ``key = value`` lines (# comments allowed) into a NetworkConfig.

    Every key is optional and defaults to the base scenario.  The spacing
    keys (mean_spacing_r_m, hybrid_fraction_c, og_spacing_r_m) are expanded
    into the three densities and may not be mixed with explicit lambda_*.
    """
    config = base if base is not None else NetworkConfig()
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    spacing = {k: raw.pop(k) for k in list(raw) if k in _SPACING_KEYS}
    if spacing and any(k.startswith("lambda_") for k in raw):
        raise ConfigError("give either lambda_* densities or spacing keys, not both")

    updates: dict[str, object] = {}
    nested: dict[str, dict[str, object]] = {}
    for key, value in raw.items():
        try:
            if key in _SCALAR_KEYS:
                updates[key] = _SCALAR_KEYS[key](value)
            elif key in _NESTED_KEYS:
                parent, attr, cast = _NESTED_KEYS[key]
                nested.setdefault(parent, {})[attr] = cast(value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"key {key!r}: bad value {value!r}") from exc

    if spacing:
        try:
            r = float(spacing.get("mean_spacing_r_m", 80.0))
            c = float(spacing.get("hybrid_fraction_c", 0.4))
            og_r = float(spacing.get("og_spacing_r_m", "inf"))
        except ValueError as exc:
            raise ConfigError(f"bad spacing value: {exc}") from exc
        updates.update(spaced_densities(r, c, og_r))

    for parent, attrs in nested.items():
        updates[parent] = replace(getattr(config, parent), **attrs)
    return replace(config, **updates)


def load_config(path: str | Path, base: NetworkConfig | None = None) -> NetworkConfig:
    """Load a flat key-value config file; see parse_config_text."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config_text(text, base=base)


def config_keys_reference() -> str:
    """Human-readable list of recognized config keys with defaults."""
    default = NetworkConfig()
    lines = []
    for key in _SCALAR_KEYS:
        lines.append(f"{key} = {getattr(default, key)}")
    for key, (parent, attr, _) in _NESTED_KEYS.items():
        lines.append(f"{key} = {getattr(getattr(default, parent), attr)}")
    lines.append("# alternative geometry keys (replace the lambda_* entries):")
    for key in _SPACING_KEYS:
        lines.append(f"# {key}")
    return "\n".join(lines)
