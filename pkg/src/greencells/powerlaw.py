"""Piecewise power-law cumulative intensities on the power half-line.

Every intensity handled by the analytical engine has the form
``K_i + S_i * t**s`` on each piece of a breakpoint partition (s = 2/alpha):
plain node intensities are a single live piece, battery-weighted ones
freeze progressively at the per-state coverage powers, and bias-scaled or
subtracted combinations stay in the family.  Keeping the exact piecewise
form lets association probabilities and served-user integrals be computed
with per-piece antiderivatives instead of generic quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_DUP_TOL = 0.0  # exact duplicate bounds only; pieces are kept otherwise


@dataclass(frozen=True)
class PowerLawDensity:
    """Nondecreasing cumulative intensity, zero at the origin.

    ``bounds`` holds ascending left edges starting at 0.0; piece i applies
    on [bounds[i], bounds[i+1]) and the last piece extends to infinity.
    A frozen (constant) piece simply has coefficient 0.
    """

    exponent: float
    bounds: np.ndarray
    offsets: np.ndarray
    coefs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "bounds", np.asarray(self.bounds, dtype=float))
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=float))
        object.__setattr__(self, "coefs", np.asarray(self.coefs, dtype=float))
        if self.bounds[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if np.any(np.diff(self.bounds) <= 0):
            raise ValueError("breakpoints must be strictly increasing")

    # --- constructors -------------------------------------------------------

    @classmethod
    def power_law(cls, coef: float, exponent: float) -> "PowerLawDensity":
        """Single live piece coef * t**exponent."""
        return cls(exponent, np.array([0.0]), np.array([0.0]), np.array([coef]))

    @classmethod
    def zero(cls, exponent: float) -> "PowerLawDensity":
        return cls.power_law(0.0, exponent)

    @classmethod
    def battery_mixture(
        cls,
        coef: float,
        covers: np.ndarray,
        weights: np.ndarray,
        exponent: float,
    ) -> "PowerLawDensity":
        """State-weighted thinned intensity.

        States whose coverage power lies below the demand contribute their
        intensity frozen at that coverage; states at or above contribute the
        live ``coef * t**exponent`` term.  ``covers`` must be nondecreasing
        with covers[0] == 0 and ``weights`` a probability vector over states.
        """
        covers = np.asarray(covers, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if covers.shape != weights.shape:
            raise ValueError("covers and weights must align")
        frozen_vals = coef * covers**exponent
        # piece l on [covers[l], covers[l+1]): states 0..l frozen, rest live
        offsets = np.concatenate(([0.0], np.cumsum(weights * frozen_vals)))[:-1]
        offsets = offsets + weights * frozen_vals  # include state l itself
        live = coef * (1.0 - np.cumsum(weights))
        bounds = covers
        keep = np.concatenate(([True], np.diff(bounds) > _DUP_TOL))
        # merging zero-width pieces keeps the later (more frozen) one
        idx = np.flatnonzero(keep)
        last = np.append(idx[1:], len(bounds)) - 1
        return cls(exponent, bounds[idx], offsets[last], live[last])

    # --- evaluation ---------------------------------------------------------

    def piece_index(self, t) -> np.ndarray:
        return np.clip(
            np.searchsorted(self.bounds, np.asarray(t, dtype=float), side="right") - 1,
            0,
            len(self.bounds) - 1,
        )

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        idx = self.piece_index(t_arr)
        out = self.offsets[idx] + self.coefs[idx] * t_arr**self.exponent
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    # --- algebra ------------------------------------------------------------

    def scaled(self, factor: float) -> "PowerLawDensity":
        """Intensity of the process with every point divided by ``factor``.

        Returns t -> self(factor * t); breakpoints shrink accordingly.
        """
        if factor <= 0.0:
            raise ValueError("scale factor must be positive")
        return PowerLawDensity(
            self.exponent,
            self.bounds / factor,
            self.offsets,
            self.coefs * factor**self.exponent,
        )

    def frozen_beyond(self, cap: float) -> "PowerLawDensity":
        """Identical up to ``cap``, constant self(cap) afterwards."""
        keep = self.bounds < cap
        bounds = np.append(self.bounds[keep], cap)
        offsets = np.append(self.offsets[keep], self(cap))
        coefs = np.append(self.coefs[keep], 0.0)
        return PowerLawDensity(self.exponent, bounds, offsets, coefs)


def combine(terms: list[tuple[float, PowerLawDensity]]) -> PowerLawDensity:
    """Exact linear combination sum(w * density) on a merged partition."""
    if not terms:
        raise ValueError("need at least one term")
    exponent = terms[0][1].exponent
    for _, d in terms:
        if d.exponent != exponent:
            raise ValueError("all terms must share the exponent")
    bounds = np.unique(np.concatenate([d.bounds for _, d in terms]))
    offsets = np.zeros_like(bounds)
    coefs = np.zeros_like(bounds)
    for w, d in terms:
        idx = np.clip(np.searchsorted(d.bounds, bounds, side="right") - 1, 0, None)
        offsets += w * d.offsets[idx]
        coefs += w * d.coefs[idx]
    return PowerLawDensity(exponent, bounds, offsets, coefs)


def exp_weighted_measure(
    density: PowerLawDensity, weight_coef: float, points: np.ndarray
) -> np.ndarray:
    """Cumulative F(x) = integral_0^x exp(-density(t)) d(weight_coef * t**s).

    Evaluated at the sorted probe ``points``; the integrand is handled with
    the per-piece antiderivative of exp(-(K + S u)) in u = t**s, so the
    result is exact up to roundoff.  This is the served-user primitive: the
    weight measure is a plain power law and the exponential damping is the
    void probability of the competitor field.
    """
    points = np.asarray(points, dtype=float)
    if np.any(points < 0.0):
        raise ValueError("probe points must be nonnegative")
    if np.any(np.diff(points) < 0.0):
        raise ValueError("probe points must be sorted")
    s = density.exponent
    edges = np.unique(np.concatenate([density.bounds, points, [0.0]]))
    lo, hi = edges[:-1], edges[1:]
    idx = density.piece_index(lo)
    K = density.offsets[idx]
    S = density.coefs[idx]
    a = lo**s
    b = hi**s
    live = S != 0.0
    seg = np.empty_like(a)
    with np.errstate(over="ignore"):
        seg[live] = (
            np.exp(-K[live] - S[live] * a[live])
            * -np.expm1(-S[live] * (b[live] - a[live]))
            / S[live]
        )
    seg[~live] = np.exp(-K[~live]) * (b[~live] - a[~live])
    cum = np.concatenate(([0.0], np.cumsum(weight_coef * seg)))
    return cum[np.searchsorted(edges, points, side="left")]
