"""Finite-state battery chains: harvest pmf, consumption pmf, stationary solve.

The per-slot unit consumption of a station is a compound Poisson total
(served users arrive as a power-domain Poisson process; each consumes its
demand rounded up to whole battery units), so its pmf obeys the classic
recursion m*P(m) = sum_q q*C_q*P(m-q) with C_q the mean number of served
users demanding exactly q units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .config import BatterySpec, HarvestSpec


class SolverFailure(RuntimeError):
    """Stationary solve did not reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def harvest_pmf(spec: HarvestSpec, cap_units: int) -> np.ndarray:
    """Pmf of the units harvested in one slot, folded at ``cap_units``.

    Bursts are Poisson with rate mean/burst and deliver whole-burst unit
    packets; any mass at or above the cap is aggregated into the last entry,
    which therefore reads "at least cap units" and belongs to the
    saturation handling of the transition matrix.
    """
    if cap_units < 0:
        raise ValueError("cap_units must be nonnegative")
    probs = np.zeros(cap_units + 1)
    if spec.mean_units_per_slot == 0.0:
        probs[0] = 1.0
        return probs
    rate = spec.mean_units_per_slot / spec.burst_units
    k = 0
    pk = math.exp(-rate)
    total = 0.0
    while True:
        units = k * spec.burst_units
        if units >= cap_units:
            probs[cap_units] = max(1.0 - total, 0.0)
            break
        probs[units] = pk
        total += pk
        k += 1
        pk *= rate / k
    return probs


def compound_pmf(mass: np.ndarray, length: int) -> np.ndarray:
    """Pmf (indices 0..length-1) of a compound Poisson unit total.

    ``mass[q]`` is the Poisson mean of atoms contributing q units each;
    index 0 must be empty.  The returned prefix is exact: truncation only
    drops mass beyond ``length - 1``.
    """
    mass = np.asarray(mass, dtype=float)
    if mass.size and mass[0] != 0.0:
        raise ValueError("mass at 0 units is meaningless")
    out = np.zeros(length)
    out[0] = math.exp(-float(mass.sum()))
    qm = np.arange(mass.size) * mass
    top = mass.size - 1
    for m in range(1, length):
        k = min(m, top)
        if k < 1:
            continue
        out[m] = np.dot(qm[1 : k + 1], out[m - 1 :: -1][:k]) / m
    return out


def demand_atoms(
    omega_cum: Callable[[np.ndarray], np.ndarray],
    cap_mw: float,
    unit_mw: float,
) -> np.ndarray:
    """Mean counts of served users per whole-unit demand, up to ``cap_mw``.

    Entry q is the measure of demands in ((q-1)*unit, q*unit] clipped at the
    cap, i.e. the users whose unit-rounded requirement is exactly q.
    """
    if cap_mw <= 0.0:
        return np.zeros(1)
    q_max = int(np.ceil(cap_mw / unit_mw - 1e-12))
    edges = np.minimum(np.arange(q_max + 1) * unit_mw, cap_mw)
    values = np.asarray(omega_cum(edges), dtype=float)
    mass = np.zeros(q_max + 1)
    mass[1:] = np.maximum(np.diff(values), 0.0)
    return mass


def _normalize_row(prefix: np.ndarray, include_idle: bool) -> np.ndarray:
    row = np.zeros_like(prefix)
    if include_idle:
        norm = prefix.sum()
        if norm <= 0.0:
            row[0] = 1.0
            return row
        return prefix / norm
    norm = prefix[1:].sum()
    if norm <= 0.0:
        row[0] = 1.0
        return row
    row[1:] = prefix[1:] / norm
    return row


def total_consumption_pmf(
    user_density: Callable[[np.ndarray], np.ndarray],
    level: int,
    cov_cap_mw: float,
    battery: BatterySpec,
    include_idle: bool = False,
) -> np.ndarray:
    """One battery-consumption row P(m | level), m = 0..level.

    The compound-Poisson prefix is truncated at the battery level and
    renormalized over m >= 1; ``include_idle`` switches to a variant that
    keeps the no-consumption mass exp(-Omega) in the row.  A row that can
    serve no user is a point mass at zero.
    """
    if level == 0:
        return np.array([1.0])
    mass = demand_atoms(user_density, cov_cap_mw, battery.unit_mw)
    raw = compound_pmf(mass, level + 1)
    return _normalize_row(raw, include_idle)


def _sparse_compound_kernel(idx: np.ndarray, val: np.ndarray, max_index: int):
    """Compound-Poisson pmf of a small measure, as sparse (indices, values).

    Expands exp-of-measure order by order; safe for means up to ~30 because
    the atom support is tiny and dictionary terms stay sparse.
    """
    total = float(val.sum())
    scale = math.exp(-total)
    acc = {0: scale}
    term = {0: scale}
    order = 0
    while term and order < 2000:
        order += 1
        nxt: dict[int, float] = {}
        for i, v in term.items():
            share = v / order
            for q, c in zip(idx, val):
                k = i + int(q)
                if k <= max_index:
                    nxt[k] = nxt.get(k, 0.0) + share * c
        term = {k: v for k, v in nxt.items() if v > 1e-22}
        for k, v in term.items():
            acc[k] = acc.get(k, 0.0) + v
    keys = np.fromiter(acc.keys(), dtype=int)
    order_sort = np.argsort(keys)
    vals = np.fromiter(acc.values(), dtype=float)
    return keys[order_sort], vals[order_sort]


def consumption_rows(
    omega_cum: Callable[[np.ndarray], np.ndarray],
    covers_mw: np.ndarray,
    battery: BatterySpec,
    include_idle: bool = False,
) -> np.ndarray:
    """All battery rows P(m | l) for l = 0..L as one (L+1, L+1) matrix.

    The served-user measure at level l is the level-(l-1) measure plus the
    demand window between the two coverage powers, so each row's compound
    pmf is the previous one convolved with the window's kernel.  Agrees
    with per-level total_consumption_pmf calls but costs linear instead of
    quadratic work in the touched mass.
    """
    capacity = len(covers_mw) - 1
    unit = battery.unit_mw
    rows = np.zeros((capacity + 1, capacity + 1))
    rows[0, 0] = 1.0
    raw = np.zeros(capacity + 1)
    raw[0] = 1.0
    mass_acc = np.zeros(int(np.ceil(covers_mw[-1] / unit - 1e-12)) + 2)
    for level in range(1, capacity + 1):
        lo, hi = covers_mw[level - 1], covers_mw[level]
        if hi > lo:
            q_lo = int(np.floor(lo / unit + 1e-12)) + 1
            q_hi = int(np.ceil(hi / unit - 1e-12))
            edges = np.clip(np.arange(q_lo - 1, q_hi + 1) * unit, lo, hi)
            vals = np.asarray(omega_cum(edges), dtype=float)
            win_val = np.maximum(np.diff(vals), 0.0)
            win_idx = np.arange(q_lo, q_hi + 1)
            keep = win_val > 0.0
            if keep.any():
                mass_acc[win_idx[keep]] += win_val[keep]
                if win_val.sum() > 0.25:
                    # heavy window (low levels): rebuild outright
                    raw = compound_pmf(mass_acc, capacity + 1)
                else:
                    k_idx, k_val = _sparse_compound_kernel(
                        win_idx[keep], win_val[keep], capacity
                    )
                    new = k_val[0] * raw if k_idx[0] == 0 else np.zeros_like(raw)
                    for j, kv in zip(k_idx[1:], k_val[1:]):
                        new[j:] += kv * raw[:-j]
                    raw = new
        rows[level, : level + 1] = _normalize_row(raw[: level + 1], include_idle)
    return rows


def saturating_rows(total_pmf: np.ndarray, capacity: int) -> np.ndarray:
    """Battery rows for first-come battery service without announcements.

    The demanded total does not depend on the level; a level-l station
    drains min(total, l), so each row is the total's pmf with the tail
    lumped at l.
    """
    rows = np.zeros((capacity + 1, capacity + 1))
    padded = np.zeros(capacity + 1)
    n = min(len(total_pmf), capacity + 1)
    padded[:n] = total_pmf[:n]
    cum = np.concatenate(([0.0], np.cumsum(padded)))
    for level in range(capacity + 1):
        rows[level, :level] = padded[:level]
        rows[level, level] = max(1.0 - cum[level], 0.0)
    return rows


def transition_matrix(
    consumption: np.ndarray, harvest: np.ndarray, capacity: int
) -> np.ndarray:
    """Level-transition matrix from consumption rows and the harvest pmf.

    P(l -> q) pairs consumption m with harvest q - l + m; the top state
    collects every harvest that at least refills the battery, so rows sum
    to one exactly (folded harvest tail included).
    """
    rows = np.asarray(consumption, dtype=float)
    if rows.shape != (capacity + 1, capacity + 1):
        raise ValueError("consumption rows must be (L+1, L+1)")
    h = np.asarray(harvest, dtype=float)
    if h.size < capacity + 1:
        h = np.pad(h, (0, capacity + 1 - h.size))
    conv = fftconvolve(rows[:, ::-1], h[None, :], axes=1)
    conv = np.maximum(conv, 0.0)
    out = np.empty((capacity + 1, capacity + 1))
    for level in range(capacity + 1):
        start = capacity - level
        out[level, :capacity] = conv[level, start : start + capacity]
    out[:, capacity] = np.maximum(1.0 - out[:, :capacity].sum(axis=1), 0.0)
    return out


def stationary(
    transition: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 50_000,
    start: np.ndarray | None = None,
) -> np.ndarray:
    """Stationary probability vector by power iteration from uniform.

    Terminates when the L1 step residual drops below ``tol``; raises
    SolverFailure with the last residual otherwise.
    """
    n = transition.shape[0]
    v = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float)
    v = v / v.sum()
    residual = math.inf
    for _ in range(max_iter):
        nxt = v @ transition
        total = nxt.sum()
        if total <= 0.0:
            raise SolverFailure("transition matrix lost probability mass", math.inf)
        nxt = nxt / total
        residual = float(np.abs(nxt - v).sum())
        v = nxt
        if residual < tol:
            return v
    raise SolverFailure("power iteration did not converge", residual)


@dataclass(frozen=True)
class BatteryChain:
    """Bundled chain for one station type."""

    spec: BatterySpec
    transition: np.ndarray
    stationary: np.ndarray

    @classmethod
    def build(
        cls, spec: BatterySpec, consumption: np.ndarray, harvest: np.ndarray
    ) -> "BatteryChain":
        matrix = transition_matrix(consumption, harvest, spec.capacity_units)
        return cls(spec, matrix, stationary(matrix))
