"""Adiabatic preparation dynamics and bond-breaking scans.

The sweep Hamiltonian H(t) = cos(wt) H0 + sin(wt) Hint interpolates from a
rotating transverse field (whose ground state is a known product state) to
the interacting chain over t in [0, pi/2w].  Two propagators are provided:

* an adaptive DOP853 integration of the Schrodinger equation, with the
  tolerance knob mapped to the integrator's relative error (used as the
  accuracy reference);
* a midpoint-Magnus propagator on a fixed grid of schedule angles
  theta = wt, whose per-cell eigendecompositions are independent of w and
  are reused across an entire slew-rate scan.  Each step is exactly
  unitary; the cell count is chosen from the documented error model
  err ~ 0.2 h^3 ||[H0, Hint]|| / w^2 and verified against the reference
  propagator in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from rsphase.lattice import AtomChain, LatticeParams
from rsphase.rsrg import PairingReport, assign_effective_couplings
from rsphase.spinsim import (
    StateVector,
    XYHamiltonian,
    ground_state,
    identify_pairs,
    product_state,
    rdm2,
    singlet_fraction,
    xy_hamiltonian_for_chain,
)

__all__ = [
    "BaselineError",
    "FitRangeError",
    "LZFit",
    "MagnusPropagator",
    "ScanResult",
    "StiffIntegrationError",
    "SweepParams",
    "SweepRecord",
    "bond_break_scan",
    "evolve",
    "log_omega_grid",
    "lz_fit",
    "sweep_hamiltonians",
]

PHI0_DEFAULT = math.pi / 6


class StiffIntegrationError(RuntimeError):
    """The adaptive integrator underflowed its step size."""


class BaselineError(RuntimeError):
    """No slew rate in the grid reaches an adiabatic baseline."""


class FitRangeError(ValueError):
    """Not enough uncensored records, or insufficient j_eff span, to fit."""


@dataclass(frozen=True)
class SweepParams:
    """Slew rate and schedule parameters (energies in units of J0)."""

    omega: float
    epsilon0: float = 1.0
    phi0: float = PHI0_DEFAULT
    tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if self.omega <= 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not (0.0 <= self.phi0 < 2.0 * math.pi):
            raise ValueError(f"phi0 must be in [0, 2pi), got {self.phi0}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class SweepRecord:
    """Breaking slew rate of one singlet bond.

    `censored` is None for a clean in-grid break, otherwise one of
    "below_grid" (j_eff below the smallest scanned omega), "always_broken"
    (already broken at the slowest omega) or "never_broke".
    """

    bond: tuple[int, int]
    j_eff: float
    omega_break: float
    censored: str | None = None


def sweep_hamiltonians(
    chain: AtomChain, lat: LatticeParams, params: SweepParams
) -> tuple[XYHamiltonian, XYHamiltonian]:
    """(H0, Hint) for a disorder realization."""
    h0 = XYHamiltonian(
        chain.n,
        [],
        [(i, params.epsilon0, float(chain.positions[i]) * params.phi0) for i in range(chain.n)],
    )
    hint = xy_hamiltonian_for_chain(chain, lat.interaction_range, lat.j0)
    return h0, hint


def initial_state(chain: AtomChain, params: SweepParams) -> StateVector:
    """Exact product ground state of the rotating field H0."""
    return product_state(chain.positions.astype(float) * params.phi0)


def _dense_pair(h0: XYHamiltonian, hint: XYHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    return h0.dense(), hint.dense().real


def evolve(
    chain: AtomChain,
    lat: LatticeParams,
    params: SweepParams,
    method: str = "dop853",
    magnus_cells: int | None = None,
) -> StateVector:
    """Integrate the sweep from t = 0 to t = pi/2w starting from the H0 ground state."""
    h0, hint = sweep_hamiltonians(chain, lat, params)
    psi0 = initial_state(chain, params).amplitudes
    if method == "magnus":
        H0, H1 = _dense_pair(h0, hint)
        prop = MagnusPropagator(H0, H1, n_cells=magnus_cells or magnus_cell_count(H0, H1, params.omega, params.tolerance))
        psi = prop.evolve(psi0, params.omega)
    elif method == "dop853":
        omega = params.omega
        t_end = math.pi / (2.0 * omega)
        if chain.n <= 12:
            H0, H1 = _dense_pair(h0, hint)

            def rhs(t: float, y: np.ndarray) -> np.ndarray:
                return -1j * (math.cos(omega * t) * (H0 @ y) + math.sin(omega * t) * (H1 @ y))

        else:

            def rhs(t: float, y: np.ndarray) -> np.ndarray:
                return -1j * (math.cos(omega * t) * h0.apply(y) + math.sin(omega * t) * hint.apply(y))

        sol = solve_ivp(
            rhs,
            (0.0, t_end),
            psi0,
            method="DOP853",
            rtol=params.tolerance,
            atol=params.tolerance * 1e-2,
        )
        if not sol.success:
            raise StiffIntegrationError(sol.message)
        psi = sol.y[:, -1]
    else:
        raise ValueError(f"unknown method {method!r}")
    return StateVector(chain.n, psi / np.linalg.norm(psi))


def magnus_cell_count(
    H0: np.ndarray, H1: np.ndarray, omega_min: float, tol: float, n_min: int = 50, n_cap: int = 1200
) -> int:
    """Cell count from the midpoint-Magnus error model at the slowest rate."""
    comm = np.linalg.norm(H0 @ H1 - H1 @ H0, 2)
    h = (tol * omega_min**2 / (0.2 * max(comm, 1e-12))) ** (1.0 / 3.0)
    return int(np.clip(math.ceil((math.pi / 2.0) / h), n_min, n_cap))


class MagnusPropagator:
    """Midpoint-frozen Magnus steps on a fixed schedule-angle grid.

    The generator at cell k is H(theta_k) with theta the schedule angle;
    its eigendecomposition does not depend on the slew rate, so one
    precomputation serves every omega of a scan.  Eigenvectors are stored
    in single precision (phase errors ~1e-6, far below the scan needs);
    each step is exactly unitary up to roundoff.
    """

    def __init__(self, H0: np.ndarray, H1: np.ndarray, n_cells: int):
        if H0.shape[0] > 2048:
            raise ValueError("MagnusPropagator limited to dimension 2048")
        self.n_cells = n_cells
        self.dtheta = (math.pi / 2.0) / n_cells
        mids = (np.arange(n_cells) + 0.5) * self.dtheta
        self._evals = np.empty((n_cells, H0.shape[0]))
        self._evecs = np.empty((n_cells, H0.shape[0], H0.shape[0]), dtype=np.complex64)
        for k, th in enumerate(mids):
            w, V = np.linalg.eigh(math.cos(th) * H0 + math.sin(th) * H1)
            self._evals[k] = w
            self._evecs[k] = V.astype(np.complex64)

    def evolve(self, psi0: np.ndarray, omega: float) -> np.ndarray:
        dt = self.dtheta / omega
        psi = psi0.astype(np.complex64)
        for k in range(self.n_cells):
            V = self._evecs[k]
            psi = V @ (np.exp(-1j * self._evals[k] * dt) * (V.conj().T @ psi)).astype(np.complex64)
        psi = psi.astype(complex)
        return psi / np.linalg.norm(psi)


@dataclass(frozen=True)
class ScanResult:
    """Outcome of a bond-breaking scan on one realization."""

    records: list[SweepRecord]
    pairing: PairingReport
    baseline_overlap: float
    baseline_ok: bool


def log_omega_grid(lo: float = 1e-4, hi: float = 10.0, per_decade: int = 40) -> np.ndarray:
    """Logarithmic slew-rate grid; default 40 points per decade."""
    n = int(round(math.log10(hi / lo) * per_decade)) + 1
    return np.logspace(math.log10(lo), math.log10(hi), n)


def bond_break_scan(
    chain: AtomChain,
    lat: LatticeParams,
    omega_grid: np.ndarray,
    params: SweepParams,
    method: str = "magnus",
    scan_tolerance: float = 5e-3,
    baseline_overlap_min: float = 0.99,
    ground_seed: int = 0,
) -> ScanResult:
    """Scan slew rates and record where each ground-state singlet breaks.

    The pairing is read off the exact ground state of the interacting
    Hamiltonian; each bond's breaking rate is the first grid omega at which
    its final-state singlet fraction drops below 0.5.  The scan stops early
    once every bond is broken.  j_eff comes from the RG replay of the
    pairing; bonds weaker than the smallest scanned omega are censored
    rather than extrapolated.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.size == 0 or np.any(np.diff(omega_grid) <= 0):
        raise ValueError("omega_grid must be non-empty and strictly increasing")
    h0, hint = sweep_hamiltonians(chain, lat, SweepParams(omega=float(omega_grid[0]), epsilon0=params.epsilon0, phi0=params.phi0))
    _, gs = ground_state(hint, seed=ground_seed)
    pairing = identify_pairs(gs)
    if not pairing.bonds:
        raise BaselineError("ground state has no identifiable singlet bonds")
    j_eff = assign_effective_couplings(pairing, chain, lat.interaction_range, lat.j0)
    pairs = [(b.left, b.right) for b in pairing.bonds]

    H0, H1 = _dense_pair(h0, hint)
    if method == "magnus":
        prop = MagnusPropagator(
            H0, H1, magnus_cell_count(H0, H1, float(omega_grid[0]), scan_tolerance)
        )
    psi0 = initial_state(chain, params).amplitudes

    break_at: dict[tuple[int, int], float] = {}
    baseline_overlap = 0.0
    for k, omega in enumerate(omega_grid):
        if all(p in break_at for p in pairs):
            break
        if method == "magnus":
            psi = prop.evolve(psi0, float(omega))
        else:
            psi = evolve(
                chain, lat, SweepParams(float(omega), params.epsilon0, params.phi0, params.tolerance),
                method=method,
            ).amplitudes
        state = StateVector(chain.n, psi / np.linalg.norm(psi))
        if k == 0:
            baseline_overlap = float(abs(np.vdot(gs.amplitudes, state.amplitudes)) ** 2)
        for p in pairs:
            if p not in break_at and singlet_fraction(rdm2(state, *p)) < 0.5:
                break_at[p] = float(omega)

    records = []
    for p in pairs:
        je = j_eff[p]
        if p not in break_at:
            records.append(SweepRecord(p, je, float("nan"), censored="never_broke"))
        elif break_at[p] == omega_grid[0]:
            records.append(SweepRecord(p, je, break_at[p], censored="always_broken"))
        elif je < omega_grid[0]:
            records.append(SweepRecord(p, je, break_at[p], censored="below_grid"))
        else:
            records.append(SweepRecord(p, je, break_at[p]))
    return ScanResult(
        records=records,
        pairing=pairing,
        baseline_overlap=baseline_overlap,
        baseline_ok=baseline_overlap >= baseline_overlap_min,
    )


@dataclass(frozen=True)
class LZFit:
    slope: float
    intercept: float
    rms_residual: float
    n_used: int


def lz_fit(records: list[SweepRecord], min_records: int = 10, min_decades: float = 2.0) -> LZFit:
    """Least-squares log(omega_break) vs log(j_eff) over uncensored records."""
    ok = [r for r in records if r.censored is None]
    if len(ok) < min_records:
        raise FitRangeError(f"need >= {min_records} uncensored records, got {len(ok)}")
    x = np.log10([r.j_eff for r in ok])
    y = np.log10([r.omega_break for r in ok])
    if x.max() - x.min() < min_decades:
        raise FitRangeError(
            f"j_eff span {x.max() - x.min():.2f} decades < required {min_decades}"
        )
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return LZFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))), len(ok))
