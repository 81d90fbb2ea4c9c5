"""Slotted-time Monte-Carlo engine on a torus window.

Stations are sampled once per replication; users arrive as a fresh Poisson
scatter every slot with independently redrawn shadowing, so slots are
linked only through the battery levels.  Replication streams are spawned
deterministically from the scenario seed alone, which gives common random
numbers across schemes and byte-stable estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as student_t

from .association import (
    EH,
    HY,
    OG,
    Scheme,
    assume_full_battery,
    choose_block,
    scheme_label,
    serve_station,
    tag_block,
    user_picks_supply,
)
from .config import NetworkConfig
from .metrics import MetricsReport
from .radio import ZETA

_TYPE_ORDER = (EH, HY, OG)


@dataclass
class Realization:
    """One sampled network plus the per-replication random streams."""

    world_m: float
    bs_xy: np.ndarray          # (B, 2) positions
    type_codes: np.ndarray     # (B,) EH/HY/OG codes, grouped by type
    battery: np.ndarray        # (B,) units; zero and unused for OG
    capacity: np.ndarray       # (B,) unit capacity; zero for OG
    unit_mw: np.ndarray        # (B,) battery unit; zero for OG
    burst_rate: np.ndarray     # (B,) Poisson burst rate per slot
    burst_units: np.ndarray    # (B,) units delivered per burst
    rng_users: np.random.Generator
    rng_harvest: np.random.Generator


@dataclass
class SlotLedger:
    """Tallies of one slot."""

    users: int = 0
    outage: int = 0
    served_renewable: int = 0
    served_grid: int = 0
    dropped: int = 0
    battery_units_drawn: int = 0
    grid_mw: float = 0.0
    harvest_units: int = 0
    grid_mw_og: float = 0.0
    grid_mw_hy: float = 0.0


def sample_realization(config: NetworkConfig, rng: np.random.Generator) -> Realization:
    """Poisson station counts per tier, uniform positions, full batteries."""
    world = math.sqrt(config.sim_area_m2)
    rng_bs, rng_users, rng_harvest = rng.spawn(3)
    xs, codes = [], []
    caps, units, rates, bursts = [], [], [], []
    for code, lam in ((EH, config.lambda_eh), (HY, config.lambda_hy), (OG, config.lambda_og)):
        n = int(rng_bs.poisson(lam * config.sim_area_m2))
        xs.append(rng_bs.uniform(0.0, world, size=(n, 2)))
        codes.append(np.full(n, code, dtype=np.int8))
        if code == OG:
            caps.append(np.zeros(n, dtype=np.int64))
            units.append(np.zeros(n))
            rates.append(np.zeros(n))
            bursts.append(np.ones(n, dtype=np.int64))
        else:
            battery = config.battery_eh if code == EH else config.battery_hy
            harvest = config.harvest_eh if code == EH else config.harvest_hy
            caps.append(np.full(n, battery.capacity_units, dtype=np.int64))
            units.append(np.full(n, battery.unit_mw))
            rates.append(
                np.full(n, harvest.mean_units_per_slot / harvest.burst_units)
            )
            bursts.append(np.full(n, harvest.burst_units, dtype=np.int64))
    return Realization(
        world_m=world,
        bs_xy=np.concatenate(xs, axis=0),
        type_codes=np.concatenate(codes),
        battery=np.concatenate(caps).copy(),  # start full; warm-up discards transient
        capacity=np.concatenate(caps),
        unit_mw=np.concatenate(units),
        burst_rate=np.concatenate(rates),
        burst_units=np.concatenate(bursts),
        rng_users=rng_users,
        rng_harvest=rng_harvest,
    )


def _torus_distance_sq(
    users_xy: np.ndarray, bs_xy: np.ndarray, world: float
) -> np.ndarray:
    dx = np.abs(users_xy[:, 0:1] - bs_xy[None, :, 0])
    np.minimum(dx, world - dx, out=dx)
    dy = np.abs(users_xy[:, 1:2] - bs_xy[None, :, 1])
    np.minimum(dy, world - dy, out=dy)
    dx *= dx
    dy *= dy
    dx += dy
    return dx


def _pow_half_alpha(d_sq: np.ndarray, alpha: float) -> np.ndarray:
    half = alpha / 2.0
    if half == 2.0:
        return d_sq * d_sq
    if half == 1.0:
        return d_sq.copy()
    if half == 1.5:
        return d_sq * np.sqrt(d_sq)
    return d_sq**half


def run_slot(real: Realization, scheme: Scheme, config: NetworkConfig) -> SlotLedger:
    """One slot: fresh users, association, selection, harvest, battery update."""
    ledger = SlotLedger()
    n_bs = real.type_codes.shape[0]
    n_users = int(real.rng_users.poisson(config.omega * config.sim_area_m2))
    ledger.users = n_users

    full = assume_full_battery(scheme)
    tag_supply = user_picks_supply(scheme)

    if n_users > 0 and n_bs > 0:
        users_xy = real.rng_users.uniform(0.0, real.world_m, size=(n_users, 2))
        d_sq = _torus_distance_sq(users_xy, real.bs_xy, real.world_m)
        p = _pow_half_alpha(d_sq, config.alpha)
        p *= config.p_rx_mw * config.kappa
        if config.sigma_db > 0.0:
            x_db = real.rng_users.normal(0.0, config.sigma_db, size=p.shape)
            x_db *= -1.0 / ZETA
            p *= np.exp(x_db, out=x_db)  # divide by the shadowing gain

        tags = tag_block(p, real.type_codes, real.battery, config, full_battery=full)
        chosen, renewable, _ = choose_block(p, tags, real.type_codes, scheme, config)

        ledger.outage = int((chosen < 0).sum())
        assigned = np.flatnonzero(chosen >= 0)
        order = assigned[np.argsort(chosen[assigned], kind="stable")]
        stations, starts = np.unique(chosen[order], return_index=True)
        bounds = np.append(starts, order.size)
        for k, bs in enumerate(stations):
            members = order[bounds[k] : bounds[k + 1]]
            level = int(real.capacity[bs]) if full else int(real.battery[bs])
            srv_r, srv_g, units_drawn, grid_mw = serve_station(
                p[members, bs],
                renewable[members],
                int(real.type_codes[bs]),
                level,
                config,
                battery_first=not tag_supply,
            )
            ledger.served_renewable += int(srv_r.sum())
            ledger.served_grid += int(srv_g.sum())
            ledger.dropped += int(members.size - srv_r.sum() - srv_g.sum())
            ledger.battery_units_drawn += units_drawn
            ledger.grid_mw += grid_mw
            if real.type_codes[bs] == OG:
                ledger.grid_mw_og += grid_mw
            else:
                ledger.grid_mw_hy += grid_mw
            if not full and units_drawn:
                real.battery[bs] -= units_drawn

    # harvest is drawn even in the full-battery reference so that the random
    # streams stay aligned across schemes (common random numbers)
    powered = real.type_codes != OG
    bursts = real.rng_harvest.poisson(real.burst_rate[powered])
    gained = bursts * real.burst_units[powered]
    ledger.harvest_units = int(gained.sum())
    if full:
        real.battery[:] = real.capacity
    else:
        levels = real.battery[powered] + gained
        real.battery[powered] = np.minimum(levels, real.capacity[powered])
    return ledger


@dataclass
class _RepStats:
    users: int = 0
    outage: int = 0
    grid_mw_slots: float = 0.0
    grid_og_mw_slots: float = 0.0
    grid_hy_mw_slots: float = 0.0
    served_renewable: int = 0
    served_grid: int = 0
    dropped: int = 0
    measured_slots: int = 0


def _run_replication(args) -> _RepStats:
    config, scheme, rep_index = args
    seed_seq = np.random.SeedSequence(entropy=config.seed, spawn_key=(rep_index,))
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    real = sample_realization(config, rng)
    stats = _RepStats()
    for slot in range(config.warmup_slots + config.slots):
        ledger = run_slot(real, scheme, config)
        if slot < config.warmup_slots:
            continue
        stats.users += ledger.users
        stats.outage += ledger.outage
        stats.grid_mw_slots += ledger.grid_mw
        stats.grid_og_mw_slots += ledger.grid_mw_og
        stats.grid_hy_mw_slots += ledger.grid_mw_hy
        stats.served_renewable += ledger.served_renewable
        stats.served_grid += ledger.served_grid
        stats.dropped += ledger.dropped
        stats.measured_slots += 1
    return stats


def _half_width(values: np.ndarray) -> float:
    n = values.size
    if n < 2:
        return 0.0
    crit = float(student_t.ppf(0.975, n - 1))
    return crit * float(values.std(ddof=1)) / math.sqrt(n)


def estimate(
    config: NetworkConfig,
    scheme: Scheme,
    n_workers: int | None = None,
) -> MetricsReport:
    """Replicated Monte-Carlo estimate with 95% confidence half-widths.

    Replications run on independent spawned streams (parallelizable); the
    warm-up slots are excluded from every tally.
    """
    jobs = [(config, scheme, r) for r in range(config.replications)]
    if n_workers is None or n_workers > 1:
        import multiprocessing as mp

        workers = n_workers or mp.cpu_count()
        if workers > 1 and len(jobs) > 1:
            with mp.get_context("fork").Pool(min(workers, len(jobs))) as pool:
                stats = pool.map(_run_replication, jobs)
        else:
            stats = [_run_replication(j) for j in jobs]
    else:
        stats = [_run_replication(j) for j in jobs]

    per_rep_users = np.array([s.users for s in stats], dtype=float)
    measured = np.array([s.measured_slots for s in stats], dtype=float)
    area = config.sim_area_m2

    if per_rep_users.sum() == 0:
        outage = None
        outage_ci = 0.0
    else:
        ratios = np.array(
            [s.outage / s.users for s in stats if s.users > 0], dtype=float
        )
        outage = float(ratios.mean())
        outage_ci = _half_width(ratios)

    grid_per_area = np.array(
        [s.grid_mw_slots / (s.measured_slots * area) for s in stats], dtype=float
    )
    grid_og = np.array(
        [s.grid_og_mw_slots / (s.measured_slots * area) for s in stats], dtype=float
    )
    grid_hy = np.array(
        [s.grid_hy_mw_slots / (s.measured_slots * area) for s in stats], dtype=float
    )
    total_users = float(per_rep_users.sum())
    diag = {
        "replications": len(stats),
        "measured_slots": int(measured.sum()),
        "mean_users_per_slot": total_users / max(measured.sum(), 1.0),
        "served_renewable_share": (
            sum(s.served_renewable for s in stats) / total_users if total_users else 0.0
        ),
        "served_grid_share": (
            sum(s.served_grid for s in stats) / total_users if total_users else 0.0
        ),
        "dropped_share": (
            sum(s.dropped for s in stats) / total_users if total_users else 0.0
        ),
    }
    return MetricsReport(
        engine="sim",
        scheme=scheme_label(scheme),
        outage_prob=outage,
        outage_ci=outage_ci,
        grid_og_mw_per_m2=float(grid_og.mean()),
        grid_hy_mw_per_m2=float(grid_hy.mean()),
        grid_total_mw=float(grid_per_area.mean()) * area,
        grid_total_ci_mw=_half_width(grid_per_area) * area,
        diagnostics=diag,
    )
