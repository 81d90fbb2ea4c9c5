"""Power-domain analysis: thinned intensities, association and served-user laws.

Works from the station perspective ("how many users does a tagged station
serve, split by supply") and the user perspective ("which candidate wins
the biased comparison"), everything expressed through piecewise power-law
intensities so the downstream integrals stay closed-form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import BatterySpec, BsType, NetworkConfig
from .powerlaw import PowerLawDensity, combine, exp_weighted_measure
from .radio import invert_loaded_demand, upsilon, user_intensity_coefficient


# --- coverage --------------------------------------------------------------


def power_coverage(level: int, battery: BatterySpec, config: NetworkConfig) -> float:
    """Largest renewable-servable demand at the given battery level.

    Monotone inversion of demand + estimated closer-user load against the
    stored budget level * unit.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    return invert_loaded_demand(level * battery.unit_mw, config)


def coverage_levels(battery: BatterySpec, config: NetworkConfig) -> np.ndarray:
    """Coverage powers for every battery state 0..L (vectorized Newton)."""
    targets = np.arange(battery.capacity_units + 1) * battery.unit_mw
    s = 2.0 / config.alpha
    coef = user_intensity_coefficient(config) * s / (s + 1.0)
    if coef == 0.0:
        return targets.astype(float)
    p = targets.astype(float)
    for _ in range(200):
        g = p + coef * p ** (s + 1.0)
        dg = 1.0 + coef * (s + 1.0) * p**s
        step = (g - targets) / dg
        p = np.maximum(p - step, 0.0)
        if np.all(np.abs(step) <= 1e-15 * np.maximum(p, 1e-300) + 1e-300):
            break
    return p


@dataclass(frozen=True)
class CoverageTable:
    """Per-state coverage powers for the two battery-equipped tiers."""

    eh: np.ndarray
    hy: np.ndarray

    def covers(self, bs_type: BsType) -> np.ndarray:
        if bs_type is BsType.EH:
            return self.eh
        if bs_type is BsType.HY:
            return self.hy
        raise ValueError("on-grid stations have no coverage table")

    def lowest_available_state(self, p_mw: float, bs_type: BsType) -> int:
        """Smallest battery state able to cover demand p (L+1 if none)."""
        covers = self.covers(bs_type)
        return int(np.searchsorted(covers, p_mw, side="left"))


@lru_cache(maxsize=32)
def _context(config: NetworkConfig) -> dict:
    s = 2.0 / config.alpha
    ups = upsilon(config)
    return {
        "s": s,
        "ups": ups,
        "user_coef": config.omega * ups,
        "covers": CoverageTable(
            coverage_levels(config.battery_eh, config),
            coverage_levels(config.battery_hy, config),
        ),
    }


def coverage_table(config: NetworkConfig) -> CoverageTable:
    return _context(config)["covers"]


# --- plain and thinned intensities ------------------------------------------


def bs_intensity(bs_type: BsType, config: NetworkConfig) -> PowerLawDensity:
    ctx = _context(config)
    return PowerLawDensity.power_law(config.bs_density(bs_type) * ctx["ups"], ctx["s"])


def density_bs(p_mw: float, bs_type: BsType, config: NetworkConfig) -> float:
    """Expected number of type-X stations with required power <= p."""
    return bs_intensity(bs_type, config)(p_mw)


def available_intensity(
    bs_type: BsType, v: np.ndarray, config: NetworkConfig
) -> PowerLawDensity:
    """Battery-weighted intensity of stations declared available."""
    ctx = _context(config)
    if bs_type is BsType.OG:
        return PowerLawDensity.zero(ctx["s"])
    covers = ctx["covers"].covers(bs_type)
    return PowerLawDensity.battery_mixture(
        config.bs_density(bs_type) * ctx["ups"], covers, np.asarray(v, float), ctx["s"]
    )


def density_available(
    p_mw: float, bs_type: BsType, v: np.ndarray, config: NetworkConfig
) -> float:
    return available_intensity(bs_type, v, config)(p_mw)


def grid_intensity(
    bs_type: BsType, v: np.ndarray | None, config: NetworkConfig
) -> PowerLawDensity:
    """Intensity of stations that would have to serve from the grid.

    Total minus available, with the available part frozen at the transmit
    cap; harvesting-only stations never qualify.
    """
    ctx = _context(config)
    if bs_type is BsType.EH:
        return PowerLawDensity.zero(ctx["s"])
    total = bs_intensity(bs_type, config)
    if bs_type is BsType.OG:
        return total
    avail = available_intensity(bs_type, v, config).frozen_beyond(config.p_tx_max_mw)
    return combine([(1.0, total), (-1.0, avail)])


def density_grid(
    p_mw: float, bs_type: BsType, v: np.ndarray | None, config: NetworkConfig
) -> float:
    return grid_intensity(bs_type, v, config)(p_mw)


def density_scaled_available(
    t_mw: float,
    bs_type: BsType,
    v: np.ndarray,
    beta_a: float,
    beta_g: float,
    config: NetworkConfig,
) -> float:
    """Intensity of available stations on the bias-scaled power axis.

    A station at required power p appears at t = p * beta_a / beta_g when it
    competes against grid-tagged candidates, so the scaled intensity is the
    available one evaluated at t * beta_g / beta_a.
    """
    if beta_a <= 0.0 or beta_g <= 0.0:
        raise ValueError("biases must be positive")
    return available_intensity(bs_type, v, config)(t_mw * beta_g / beta_a)


# --- association ------------------------------------------------------------


@dataclass(frozen=True)
class BiasWeights:
    """Multiplicative association weights by candidate class."""

    eh_avail: float
    hy_avail: float
    hy_grid: float
    og_grid: float

    @classmethod
    def adaptive(cls, beta_a: float, beta_g: float) -> "BiasWeights":
        """Supply-aware weights: one bias for renewable, one for grid."""
        return cls(beta_a, beta_a, beta_g, beta_g)

    @classmethod
    def tiered(cls, beta_eh: float, beta_hy: float, beta_og: float) -> "BiasWeights":
        """Conventional per-tier weights, blind to the battery state."""
        return cls(beta_eh, beta_hy, beta_hy, beta_og)

    @classmethod
    def unbiased(cls) -> "BiasWeights":
        return cls(1.0, 1.0, 1.0, 1.0)

    def weight(self, bs_type: BsType, renewable: bool) -> float:
        if bs_type is BsType.EH:
            if not renewable:
                raise ValueError("harvesting-only stations cannot serve from grid")
            return self.eh_avail
        if bs_type is BsType.OG:
            if renewable:
                raise ValueError("on-grid stations cannot serve renewably")
            return self.og_grid
        return self.hy_avail if renewable else self.hy_grid


@dataclass(frozen=True)
class BatteryStates:
    """Stationary battery-state vectors for the two equipped tiers."""

    eh: np.ndarray
    hy: np.ndarray

    def of(self, bs_type: BsType) -> np.ndarray:
        if bs_type is BsType.EH:
            return np.asarray(self.eh)
        if bs_type is BsType.HY:
            return np.asarray(self.hy)
        raise ValueError("on-grid stations carry no battery state")

    @classmethod
    def full(cls, config: NetworkConfig) -> "BatteryStates":
        eh = np.zeros(config.battery_eh.capacity_units + 1)
        hy = np.zeros(config.battery_hy.capacity_units + 1)
        eh[-1] = 1.0
        hy[-1] = 1.0
        return cls(eh, hy)


def competitor_field(
    tagged_weight: float,
    weights: BiasWeights,
    states: BatteryStates,
    config: NetworkConfig,
) -> PowerLawDensity:
    """Intensity of candidates beating a tagged one at biased power t.

    A class-(Y, tag) competitor at power p wins when w_yt * p < w* * t, so
    its intensity enters evaluated at t * w* / w_yt.  Summing the four
    classes gives the void-probability exponent for association.
    """
    terms: list[tuple[float, PowerLawDensity]] = []
    if config.lambda_eh > 0.0:
        avail_eh = available_intensity(BsType.EH, states.eh, config)
        terms.append((1.0, avail_eh.scaled(tagged_weight / weights.eh_avail)))
    if config.lambda_hy > 0.0:
        avail_hy = available_intensity(BsType.HY, states.hy, config)
        grid_hy = grid_intensity(BsType.HY, states.hy, config)
        terms.append((1.0, avail_hy.scaled(tagged_weight / weights.hy_avail)))
        terms.append((1.0, grid_hy.scaled(tagged_weight / weights.hy_grid)))
    if config.lambda_og > 0.0:
        grid_og = grid_intensity(BsType.OG, None, config)
        terms.append((1.0, grid_og.scaled(tagged_weight / weights.og_grid)))
    if not terms:
        return PowerLawDensity.zero(_context(config)["s"])
    return combine(terms)


def assoc_prob(
    p_star_mw: float,
    bs_type: BsType,
    renewable: bool,
    level: int,
    states: BatteryStates,
    config: NetworkConfig,
    weights: BiasWeights | None = None,
) -> float:
    """Probability that the tagged station wins the biased comparison.

    Void probability of the competitor field below the tagged biased power,
    gated by the tag feasibility: renewable needs the battery to cover the
    demand, grid needs it not to (and only grid-capable tiers qualify).
    """
    if weights is None:
        weights = BiasWeights.adaptive(config.beta_a, config.beta_g)
    if bs_type is BsType.OG and renewable:
        return 0.0
    if bs_type is BsType.EH and not renewable:
        return 0.0
    if bs_type is BsType.OG:
        cover = 0.0
    else:
        covers = _context(config)["covers"].covers(bs_type)
        cover = float(covers[min(level, len(covers) - 1)])
    if renewable and p_star_mw > cover:
        return 0.0
    if not renewable and p_star_mw <= cover:
        return 0.0
    field = competitor_field(
        weights.weight(bs_type, renewable), weights, states, config
    )
    return math.exp(-field(p_star_mw))


def served_user_measure(
    bs_type: BsType,
    renewable: bool,
    level: int,
    states: BatteryStates,
    config: NetworkConfig,
    weights: BiasWeights | None = None,
):
    """Cumulative intensity p -> expected served users with demand <= p.

    Returns a vectorized callable; the renewable branch integrates the user
    intensity damped by the winning probability up to the coverage power,
    the grid branch over (coverage, transmit cap].
    """
    if weights is None:
        weights = BiasWeights.adaptive(config.beta_a, config.beta_g)
    ctx = _context(config)
    if bs_type is BsType.OG:
        cover = 0.0
    else:
        covers = ctx["covers"].covers(bs_type)
        cover = float(covers[min(level, len(covers) - 1)])
    field = competitor_field(
        weights.weight(bs_type, renewable), weights, states, config
    )
    user_coef = ctx["user_coef"]
    p_max = config.p_tx_max_mw

    def measure_at(points: np.ndarray) -> np.ndarray:
        flat = points.ravel()
        order = np.argsort(flat, kind="stable")
        vals = np.empty_like(flat)
        vals[order] = exp_weighted_measure(field, user_coef, flat[order])
        return vals.reshape(points.shape)

    if renewable:

        def cum(p):
            pts = np.minimum(np.atleast_1d(np.asarray(p, dtype=float)), cover)
            return measure_at(pts)

    else:
        base = float(exp_weighted_measure(field, user_coef, np.array([cover]))[0])

        def cum(p):
            pts = np.clip(np.atleast_1d(np.asarray(p, dtype=float)), cover, p_max)
            return np.maximum(measure_at(pts) - base, 0.0)

    return cum


def served_density(
    p_mw: float,
    bs_type: BsType,
    renewable: bool,
    level: int,
    states: BatteryStates,
    config: NetworkConfig,
    weights: BiasWeights | None = None,
) -> float:
    """Expected users with demand <= p served by the tagged station."""
    cum = served_user_measure(bs_type, renewable, level, states, config, weights)
    return float(cum(np.array([p_mw]))[0])


# --- closed-form metrics -----------------------------------------------------


def outage_probability(states: BatteryStates, config: NetworkConfig) -> float:
    """Probability that a user finds no candidate at all.

    No available harvesting-tier station within the top coverage power and
    no grid-capable station within the transmit cap; the grid-capable tiers
    enter unthinned.
    """
    ctx = _context(config)
    covers_eh = ctx["covers"].eh
    exponent = available_intensity(BsType.EH, states.eh, config)(covers_eh[-1])
    for bs_type in (BsType.HY, BsType.OG):
        exponent += bs_intensity(bs_type, config)(config.p_tx_max_mw)
    return math.exp(-exponent)


@dataclass(frozen=True)
class GridConsumption:
    """Expected grid units drawn per slot: flat for OG, per level for HY."""

    og_mean_units: float
    hy_mean_units: np.ndarray


def grid_power(
    states: BatteryStates, consumption: GridConsumption, config: NetworkConfig
) -> tuple[float, float]:
    """Average grid power density (mW per m^2) split (on-grid, hybrid)."""
    og = config.lambda_og * consumption.og_mean_units * config.battery_hy.unit_mw
    v_hy = states.of(BsType.HY)
    hy = (
        config.lambda_hy
        * float(np.dot(v_hy, consumption.hy_mean_units))
        * config.battery_hy.unit_mw
    )
    return og, hy


def unit_demand_means(
    cum_measure,
    lo_mw: np.ndarray,
    hi_mw: float,
    unit_mw: float,
) -> np.ndarray:
    """Expected whole units demanded between per-level lower cuts and a cap.

    For each ascending lower cut c, sums ceil(t/unit) over the measure on
    (c, hi]; used for grid-side draws where the window shrinks as the
    battery fills.  The unit grid is anchored at zero, so the cut never
    shifts a user's cell.
    """
    lo = np.clip(np.asarray(lo_mw, dtype=float), 0.0, max(hi_mw, 0.0))
    if hi_mw <= 0.0:
        return np.zeros_like(lo)
    q_max = int(np.ceil(hi_mw / unit_mw - 1e-12))
    edges = np.minimum(np.arange(q_max + 1) * unit_mw, hi_mw)
    vals = np.asarray(cum_measure(edges), dtype=float)
    cell_mass = np.maximum(np.diff(vals), 0.0)
    weighted_cum = np.concatenate(
        ([0.0], np.cumsum(np.arange(1, q_max + 1) * cell_mass))
    )
    total = weighted_cum[-1]
    full_cells = np.clip(np.floor(lo / unit_mw + 1e-12).astype(int), 0, q_max)
    cut_vals = np.asarray(cum_measure(lo), dtype=float)
    partial = np.where(
        full_cells < q_max,
        (full_cells + 1) * np.maximum(cut_vals - vals[full_cells], 0.0),
        0.0,
    )
    below = weighted_cum[full_cells] + partial
    return np.maximum(total - below, 0.0)
