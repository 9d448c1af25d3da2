"""Experimental error budget for the adiabatic preparation.

Two competing losses set the optimal slew rate: incoherent photon loss
accumulated over the sweep time T = pi/2w at rate J0/sqrt(C), and
non-adiabatic pair breaking of bonds whose effective coupling falls below
the slew rate.  The paired fraction is the product of the two survival
factors.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO

import numpy as np

__all__ = [
    "FidelityParams",
    "f_paired",
    "f_unpaired",
    "optimize_f_paired",
    "p_inc",
    "write_fidelity_csv",
]


@dataclass(frozen=True)
class FidelityParams:
    """Cooperativity and chain parameters for the error budget.

    `threshold_const` rescales the bond-formation criterion Jt = c * w;
    the default c = 1 matches the unit-slope scaling of the breaking scans.
    """

    cooperativity: float = 1e4
    j0: float = 1.0
    filling: float = 0.12
    interaction_range: float = 5.0
    threshold_const: float = 1.0

    def __post_init__(self) -> None:
        if self.cooperativity <= 0:
            raise ValueError("cooperativity must be > 0")
        if self.j0 <= 0:
            raise ValueError("j0 must be > 0")
        if self.threshold_const <= 0:
            raise ValueError("threshold_const must be > 0")


def p_inc(omega: float, params: FidelityParams) -> float:
    """Incoherent singlet-loss probability J0 T / sqrt(C), clamped to [0, 1]."""
    if omega <= 0:
        raise ValueError("omega must be > 0")
    T = math.pi / (2.0 * omega)
    return min(1.0, params.j0 * T / math.sqrt(params.cooperativity))


def f_unpaired(
    omega: float, params: FidelityParams, flow_curve: tuple[np.ndarray, np.ndarray]
) -> float:
    """Non-adiabatic unpaired fraction via the slew-rate-to-cutoff mapping.

    Bonds with effective coupling below c * w fail to form, so the cutoff
    reached is l_m / L = ln(J0 / (c w)); the survival curve is evaluated
    there.  Rates at or above J0/c map to the curve start.
    """
    if omega <= 0:
        raise ValueError("omega must be > 0")
    lm, surv = flow_curve
    if lm is None or len(lm) == 0:
        raise ValueError("flow survival curve is required")
    cutoff = math.log(params.j0 / (params.threshold_const * omega)) if params.threshold_const * omega < params.j0 else -math.inf
    if cutoff <= lm[0]:
        return float(surv[0])
    if cutoff >= lm[-1]:
        return float(surv[-1])
    return float(np.interp(cutoff, lm, surv))


def f_paired(
    omega: float, params: FidelityParams, flow_curve: tuple[np.ndarray, np.ndarray]
) -> float:
    """F_paired(w) = (1 - F_unpaired(w)) (1 - P_inc(w))."""
    return (1.0 - f_unpaired(omega, params, flow_curve)) * (1.0 - p_inc(omega, params))


def optimize_f_paired(
    params: FidelityParams,
    flow_curve: tuple[np.ndarray, np.ndarray],
    omega_grid: np.ndarray,
) -> tuple[float, float]:
    """(omega*, F_paired*) over a slew-rate grid."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.size == 0:
        raise ValueError("omega_grid must be non-empty")
    vals = np.array([f_paired(w, params, flow_curve) for w in omega_grid])
    k = int(np.argmax(vals))
    return float(omega_grid[k]), float(vals[k])


def write_fidelity_csv(
    fh: IO[str],
    params: FidelityParams,
    flow_curve: tuple[np.ndarray, np.ndarray],
    omega_grid: np.ndarray,
) -> None:
    """(omega, p_inc, f_unpaired, f_paired) rows."""
    w = csv.writer(fh)
    w.writerow(["omega", "p_inc", "f_unpaired", "f_paired"])
    for om in omega_grid:
        pi_ = p_inc(float(om), params)
        fu = f_unpaired(float(om), params, flow_curve)
        w.writerow([repr(float(om)), repr(pi_), repr(fu), repr((1.0 - fu) * (1.0 - pi_))])
