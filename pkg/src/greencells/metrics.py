"""Common result container for both engines, plus derived comparisons."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class MetricsReport:
    """Outage and grid-power estimates with 95% half-widths.

    Analytical results carry zero half-widths; an undefined outage (no user
    observed) is None.  Grid figures come per unit area and totaled over
    the simulated window.
    """

    engine: str
    scheme: str
    outage_prob: float | None
    outage_ci: float
    grid_og_mw_per_m2: float
    grid_hy_mw_per_m2: float
    grid_total_mw: float
    grid_total_ci_mw: float
    gain_rho_pct: float | None = None
    outage_loss_ratio: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid_mw_per_m2(self) -> float:
        return self.grid_og_mw_per_m2 + self.grid_hy_mw_per_m2

    def describe(self) -> str:
        outage = "undefined" if self.outage_prob is None else (
            f"{self.outage_prob:.6f} +- {self.outage_ci:.6f}"
        )
        return (
            f"[{self.engine}/{self.scheme}] outage {outage}; grid total "
            f"{self.grid_total_mw:.3f} mW (+- {self.grid_total_ci_mw:.3f}) "
            f"= OG {self.grid_og_mw_per_m2:.3e} + HY {self.grid_hy_mw_per_m2:.3e} mW/m^2"
        )


def gain_rho(
    grid_biased_mw: float, grid_unbiased_mw: float, grid_full_battery_mw: float
) -> float | None:
    """Grid-power saving of a biased run, in percent of the feasible range.

    The range is the unbiased total minus the ideal full-battery total;
    positive means the bias saved power, negative that it hurt.  Undefined
    (None) when the range is numerically empty.
    """
    span = grid_unbiased_mw - grid_full_battery_mw
    if abs(span) < 1e-15:
        return None
    return 100.0 * (grid_unbiased_mw - grid_biased_mw) / span


def outage_loss(outage_scheme: float, outage_full_battery: float) -> float | None:
    """Relative outage excess over the always-full reference (None if p=0)."""
    if outage_full_battery <= 0.0:
        return None
    return (outage_scheme - outage_full_battery) / outage_full_battery
