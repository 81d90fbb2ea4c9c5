"""Three-step cell association: partition, biased choice, station-side selection.

Users tag every reachable station as renewable-capable (the broadcast
battery covers the demand plus the estimated closer-user load), grid-capable
(within the transmit cap but not renewable-capable), or excluded, then the
scheme's weights decide the winner.  Stations later serve cheapest-first
within the battery they actually have.

The array functions operate on a users x stations block at once and are the
single source of truth; the per-user / per-station wrappers expose the same
logic on plain objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Sequence, Union

import numpy as np

from .config import BsType, NetworkConfig
from .radio import loaded_demand

EH, HY, OG = 0, 1, 2  # compact type codes used by the array engine
_CODE = {BsType.EH: EH, BsType.HY: HY, BsType.OG: OG}
_TYPE = {v: k for k, v in _CODE.items()}


class SetTag(IntEnum):
    EXCLUDED = 0
    AVAILABLE = 1
    GRID = 2


class Supply(Enum):
    RENEWABLE = "renewable"
    GRID = "grid"
    OUTAGE = "outage"


# --- schemes -----------------------------------------------------------------


@dataclass(frozen=True)
class AdaptiveBias:
    """Supply-aware biasing: users weigh candidates by the power source.

    The renewable bias applies to stations tagged available, the grid bias
    to the rest; users announce the chosen supply, so a hybrid station may
    burn grid power while its battery holds charge.
    """

    beta_a: float | None = None  # None: take the scenario's value
    beta_g: float | None = None


@dataclass(frozen=True)
class TierBias:
    """Conventional per-tier biasing; the station decides the supply.

    Hybrid stations serve their whole queue battery-first and only fall
    back to the grid once units run out.
    """

    beta_eh: float = 1.0
    beta_hy: float = 1.0
    beta_og: float = 1.0


@dataclass(frozen=True)
class Unbiased:
    """Cheapest candidate wins; equivalent to unit tier biases."""


@dataclass(frozen=True)
class FullBattery:
    """Ideal reference: batteries read full, unit weights."""


Scheme = Union[AdaptiveBias, TierBias, Unbiased, FullBattery]


def scheme_label(scheme: Scheme) -> str:
    return {
        AdaptiveBias: "adaptive",
        TierBias: "tiered",
        Unbiased: "unbiased",
        FullBattery: "full-battery",
    }[type(scheme)]


def scheme_from_label(label: str, **kwargs) -> Scheme:
    table = {
        "adaptive": AdaptiveBias,
        "tiered": TierBias,
        "unbiased": Unbiased,
        "full-battery": FullBattery,
    }
    if label not in table:
        raise ValueError(f"unknown scheme {label!r}")
    return table[label](**kwargs)


def user_picks_supply(scheme: Scheme) -> bool:
    """Whether the announced tag fixes the supply at hybrid stations."""
    return isinstance(scheme, (AdaptiveBias, FullBattery))


def assume_full_battery(scheme: Scheme) -> bool:
    return isinstance(scheme, FullBattery)


def _resolve_biases(scheme: Scheme, config: NetworkConfig) -> tuple[float, float, float, float]:
    """Weights (eh_avail, hy_avail, hy_grid, og_grid) for the argmin."""
    if isinstance(scheme, AdaptiveBias):
        ba = config.beta_a if scheme.beta_a is None else scheme.beta_a
        bg = config.beta_g if scheme.beta_g is None else scheme.beta_g
        if ba <= 0.0 or bg <= 0.0:
            raise ValueError("biases must be positive")
        return (ba, ba, bg, bg)
    if isinstance(scheme, TierBias):
        if min(scheme.beta_eh, scheme.beta_hy, scheme.beta_og) <= 0.0:
            raise ValueError("biases must be positive")
        return (scheme.beta_eh, scheme.beta_hy, scheme.beta_hy, scheme.beta_og)
    return (1.0, 1.0, 1.0, 1.0)


# --- array engine -------------------------------------------------------------


def tag_block(
    p_mw: np.ndarray,
    type_codes: np.ndarray,
    battery_units: np.ndarray,
    config: NetworkConfig,
    full_battery: bool = False,
) -> np.ndarray:
    """Tags for a users x stations block of required powers.

    Availability compares the loaded demand against the broadcast budget
    (boundary counts as available); grid capability needs the transmit cap
    and, for hybrids, unavailability.  Harvesting-only stations are never
    grid candidates and on-grid ones never available.
    """
    if full_battery:
        budget = np.where(
            type_codes == EH,
            config.battery_eh.capacity_units * config.battery_eh.unit_mw,
            config.battery_hy.capacity_units * config.battery_hy.unit_mw,
        )
    else:
        unit = np.where(
            type_codes == EH, config.battery_eh.unit_mw, config.battery_hy.unit_mw
        )
        budget = battery_units * unit
    budget = np.where(type_codes == OG, -np.inf, budget)
    available = loaded_demand(p_mw, config) <= budget[None, :]
    grid_capable = (type_codes != EH)[None, :] & (p_mw <= config.p_tx_max_mw)
    tags = np.full(p_mw.shape, SetTag.EXCLUDED.value, dtype=np.int8)
    tags[grid_capable & ~available] = SetTag.GRID.value
    tags[available] = SetTag.AVAILABLE.value
    return tags


def choose_block(
    p_mw: np.ndarray,
    tags: np.ndarray,
    type_codes: np.ndarray,
    scheme: Scheme,
    config: NetworkConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Winning station per user: (index or -1, renewable flag, biased power).

    Argmin of the biased power over non-excluded candidates; exact ties go
    to renewable supply first, then to the lowest station index.
    """
    w_eh, w_hy_a, w_hy_g, w_og = _resolve_biases(scheme, config)
    # weight lookup by (tag, type); excluded entries weigh infinite
    table = np.full((3, 3), np.inf)
    table[SetTag.AVAILABLE.value, EH] = w_eh
    table[SetTag.AVAILABLE.value, HY] = w_hy_a
    table[SetTag.GRID.value, HY] = w_hy_g
    table[SetTag.GRID.value, OG] = w_og
    avail = tags == SetTag.AVAILABLE.value
    value = table[tags, type_codes[None, :]] * p_mw
    # inf * 0 for an excluded co-located link must stay excluded
    np.nan_to_num(value, copy=False, nan=np.inf, posinf=np.inf, neginf=-np.inf)
    best = value.min(axis=1)
    chosen = np.full(p_mw.shape[0], -1, dtype=np.int64)
    renewable = np.zeros(p_mw.shape[0], dtype=bool)
    feasible = np.isfinite(best)
    if feasible.any():
        is_min = value == best[:, None]
        min_avail = is_min & avail
        prefer_avail = min_avail.any(axis=1) & feasible
        pick = np.where(
            prefer_avail[:, None], min_avail, is_min
        )  # renewable-first tie rule
        chosen_idx = pick.argmax(axis=1)  # first True: lowest station index
        chosen[feasible] = chosen_idx[feasible]
        renewable[feasible] = avail[np.flatnonzero(feasible), chosen[feasible]]
    return chosen, renewable, best


def serve_station(
    p_mw: np.ndarray,
    renewable: np.ndarray,
    type_code: int,
    battery_units: int,
    config: NetworkConfig,
    battery_first: bool,
) -> tuple[np.ndarray, np.ndarray, int, float]:
    """Select the served users of one station.

    Returns (served-renewably mask, served-from-grid mask, units drawn,
    grid mW drawn); unserved users are dropped.  The battery queue runs
    cheapest-first and a user is skipped once its rounded units exceed the
    remaining charge; at hybrids the overflow and the grid-tagged users go
    to the grid within the transmit cap.
    """
    n = p_mw.shape[0]
    served_renew = np.zeros(n, dtype=bool)
    served_grid = np.zeros(n, dtype=bool)
    units_drawn = 0
    grid_mw = 0.0
    if n == 0:
        return served_renew, served_grid, units_drawn, grid_mw

    if type_code == OG:
        ok = p_mw <= config.p_tx_max_mw
        served_grid[:] = ok
        return served_renew, served_grid, 0, float(p_mw[ok].sum())

    unit = (config.battery_eh if type_code == EH else config.battery_hy).unit_mw
    queue = np.arange(n) if battery_first else np.flatnonzero(renewable)
    order = queue[np.argsort(p_mw[queue], kind="stable")]
    units = np.ceil(p_mw[order] / unit - 1e-12).astype(np.int64)
    units = np.maximum(units, 0)
    cum = np.cumsum(units)
    # cheapest-first queue: the feasible prefix is exactly the served set
    n_fit = int((cum <= battery_units).sum())
    from_battery = order[:n_fit]
    overflow = order[n_fit:]
    served_renew[from_battery] = True
    units_drawn = int(cum[n_fit - 1]) if n_fit > 0 else 0

    grid_pool = overflow if battery_first else np.concatenate(
        [overflow, np.flatnonzero(~renewable)]
    )
    if type_code == HY and grid_pool.size:
        ok = p_mw[grid_pool] <= config.p_tx_max_mw
        chosen = grid_pool[ok]
        served_grid[chosen] = True
        grid_mw = float(p_mw[chosen].sum())
    return served_renew, served_grid, units_drawn, grid_mw


# --- per-user / per-station contract -----------------------------------------


@dataclass(frozen=True)
class CandidateBs:
    bs_id: int
    bs_type: BsType
    battery_units: int | None
    required_power_mw: float
    set_tag: SetTag


@dataclass(frozen=True)
class AssociationOutcome:
    user_id: int
    chosen_bs: int | None
    supply: Supply
    biased_power_mw: float
    required_power_mw: float


def partition(
    user_id: int,
    stations: Sequence[tuple[int, BsType, float]],
    batteries: dict[int, int],
    config: NetworkConfig,
    full_battery: bool = False,
) -> list[CandidateBs]:
    """Tag each (bs_id, type, required power) triple for one user."""
    if not stations:
        return []
    ids = [bs_id for bs_id, _, _ in stations]
    codes = np.array([_CODE[t] for _, t, _ in stations])
    p = np.array([[pw for _, _, pw in stations]], dtype=float)
    levels = np.array(
        [batteries.get(bs_id, 0) if code != OG else 0 for bs_id, code in zip(ids, codes)]
    )
    tags = tag_block(p, codes, levels, config, full_battery=full_battery)[0]
    out = []
    for k, (bs_id, bs_type, pw) in enumerate(stations):
        level = None if bs_type is BsType.OG else int(levels[k])
        out.append(CandidateBs(bs_id, bs_type, level, pw, SetTag(tags[k])))
    del user_id
    return out


def choose(
    candidates: Sequence[CandidateBs],
    scheme: Scheme,
    config: NetworkConfig,
    user_id: int = 0,
) -> AssociationOutcome:
    """Biased argmin over the tagged candidates of one user."""
    active = [c for c in candidates if c.set_tag != SetTag.EXCLUDED]
    if not active:
        return AssociationOutcome(user_id, None, Supply.OUTAGE, np.inf, np.inf)
    p = np.array([[c.required_power_mw for c in active]], dtype=float)
    tags = np.array([[c.set_tag.value for c in active]], dtype=np.int8)
    codes = np.array([_CODE[c.bs_type] for c in active])
    # choose_block breaks index ties by position, so order by bs_id first
    order = np.argsort([c.bs_id for c in active], kind="stable")
    p, tags, codes = p[:, order], tags[:, order], codes[order]
    chosen, renewable, best = choose_block(p, tags, codes, scheme, config)
    k = order[chosen[0]]
    winner = active[int(k)]
    supply = Supply.RENEWABLE if renewable[0] else Supply.GRID
    return AssociationOutcome(
        user_id, winner.bs_id, supply, float(best[0]), winner.required_power_mw
    )


@dataclass(frozen=True)
class ServiceResult:
    served_renewable: tuple[int, ...]
    served_grid: tuple[int, ...]
    dropped: tuple[int, ...]
    battery_draw_units: int
    grid_draw_mw: float


def select_users(
    bs_type: BsType,
    associated: Sequence[AssociationOutcome],
    battery_units: int,
    config: NetworkConfig,
    battery_first: bool = False,
) -> ServiceResult:
    """Station-side selection among the users associated with one station."""
    if not associated:
        return ServiceResult((), (), (), 0, 0.0)
    p = np.array([o.required_power_mw for o in associated], dtype=float)
    renewable = np.array([o.supply is Supply.RENEWABLE for o in associated])
    renew_mask, grid_mask, units, grid_mw = serve_station(
        p, renewable, _CODE[bs_type], battery_units, config, battery_first
    )
    ids = np.array([o.user_id for o in associated])
    dropped = ~(renew_mask | grid_mask)
    return ServiceResult(
        tuple(int(u) for u in ids[renew_mask]),
        tuple(int(u) for u in ids[grid_mask]),
        tuple(int(u) for u in ids[dropped]),
        units,
        grid_mw,
    )
