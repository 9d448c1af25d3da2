"""Disorder-ensemble drivers: seeded parallel runs and aggregation.

Every realization gets an independent RNG stream derived from
(master seed, realization index), so results are independent of worker
count and scheduling; aggregation merges by realization index.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from rsphase.lattice import AtomChain, LatticeParams, sample_chain
from rsphase.rsrg import assign_effective_couplings, run_no_rg, run_rsrg
from rsphase.spinsim import ground_state, identify_pairs, xy_hamiltonian_for_chain
from rsphase.sweep import ScanResult, SweepParams, SweepRecord, bond_break_scan

__all__ = [
    "EdCompareResult",
    "RsrgEnsembleResult",
    "ed_compare",
    "norg_unpaired_mc",
    "realization_rng",
    "rsrg_ensemble",
    "sweep_ensemble",
    "two_atom_scan_set",
]


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one realization of an ensemble."""
    return np.random.default_rng([seed, index])


@dataclass(frozen=True)
class RsrgEnsembleResult:
    """Disorder-averaged decimation statistics on a common cutoff grid."""

    lm_over_L: np.ndarray
    survival_rg: np.ndarray
    survival_norg: np.ndarray
    fractions: np.ndarray  # shape (len(lm_bins)-1, 3): f0, f1, f2 per lm bin
    fraction_bin_centers: np.ndarray
    n_realizations: int


def _rsrg_one(args) -> tuple[np.ndarray, np.ndarray, list[tuple[float, int]]]:
    params, seed, index, lm_grid = args
    rng = realization_rng(seed, index)
    chain = sample_chain(params, rng)
    if chain.n < 2:
        return np.ones_like(lm_grid), np.ones_like(lm_grid), []
    L = params.interaction_range
    rg = run_rsrg(chain, L)
    norg = run_no_rg(chain)
    n = chain.n
    lrg = np.sort([b.l_m for b in rg.bonds]) / L
    lnorg = np.sort([b.l_m for b in norg.bonds]) / L
    surv_rg = 1.0 - 2.0 * np.searchsorted(lrg, lm_grid, side="right") / n
    surv_norg = 1.0 - 2.0 * np.searchsorted(lnorg, lm_grid, side="right") / n
    pool = [(b.l_m / L, b.nesting) for b in rg.bonds]
    return surv_rg, surv_norg, pool


def rsrg_ensemble(
    params: LatticeParams,
    n_realizations: int,
    lm_grid_over_L: np.ndarray | None = None,
    seed: int | None = None,
    n_fraction_bins: int = 25,
    workers: int = 1,
) -> RsrgEnsembleResult:
    """Monte Carlo decimation statistics: survival curves and nesting fractions.

    Survival counts an atom as unpaired at cutoff l_m while its bond (if
    any) has effective length above l_m.  Nesting fractions pool bonds over
    the ensemble into log-spaced l_m bins.
    """
    seed = params.seed if seed is None else seed
    if lm_grid_over_L is None:
        lm_grid_over_L = np.logspace(
            math.log10(1.0 / params.interaction_range), 1.0, 200
        )
    jobs = [(params, seed, i, lm_grid_over_L) for i in range(n_realizations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_rsrg_one, jobs, chunksize=64))
    else:
        results = [_rsrg_one(j) for j in jobs]
    surv_rg = np.mean([r[0] for r in results], axis=0)
    surv_norg = np.mean([r[1] for r in results], axis=0)
    pool_lm = np.array([p[0] for r in results for p in r[2]])
    pool_n = np.array([p[1] for r in results for p in r[2]])
    edges = np.logspace(
        math.log10(max(pool_lm.min(), 1e-6)), math.log10(pool_lm.max() + 1e-9), n_fraction_bins + 1
    )
    centers = np.sqrt(edges[:-1] * edges[1:])
    fr = np.full((n_fraction_bins, 3), np.nan)
    which = np.digitize(pool_lm, edges) - 1
    for b in range(n_fraction_bins):
        sel = pool_n[which == b]
        if sel.size:
            fr[b] = [(sel == k).mean() for k in (0, 1, 2)]
    return RsrgEnsembleResult(
        lm_over_L=lm_grid_over_L,
        survival_rg=surv_rg,
        survival_norg=surv_norg,
        fractions=fr,
        fraction_bin_centers=centers,
        n_realizations=n_realizations,
    )


def norg_unpaired_mc(
    params: LatticeParams, n_realizations: int, seed: int | None = None
) -> float:
    """Asymptotic unpaired fraction of the greedy no-RG pairing."""
    seed = params.seed if seed is None else seed
    total_unpaired = 0
    total_atoms = 0
    for i in range(n_realizations):
        chain = sample_chain(params, realization_rng(seed, i))
        if chain.n == 0:
            continue
        rep = run_no_rg(chain)
        total_unpaired += len(rep.unpaired)
        total_atoms += chain.n
    return total_unpaired / total_atoms


@dataclass(frozen=True)
class EdCompareResult:
    """Exact-diagonalization pairing versus decimation RG over an ensemble."""

    n_realizations: int
    complete_rate: float  # fraction where every atom paired with fraction >= 0.5
    match_rate: float  # fraction where ED pairing equals the RG pairing exactly
    rows: list[tuple[int, bool, bool]]  # (realization, complete, matches)


def _ed_one(args) -> tuple[int, bool, bool]:
    params, seed, index = args
    chain = sample_chain(params, realization_rng(seed, index))
    h = xy_hamiltonian_for_chain(chain, params.interaction_range, params.j0)
    _, gs = ground_state(h, seed=index)
    ed = identify_pairs(gs)
    complete = not ed.unpaired
    rg = run_rsrg(chain, params.interaction_range)
    matches = {(b.left, b.right) for b in ed.bonds} == {(b.left, b.right) for b in rg.bonds}
    return index, complete, matches


def ed_compare(
    params: LatticeParams, n_realizations: int, seed: int | None = None, workers: int = 1
) -> EdCompareResult:
    """Rate at which exact ground-state pairings are complete and match the RG."""
    seed = params.seed if seed is None else seed
    jobs = [(params, seed, i) for i in range(n_realizations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_ed_one, jobs, chunksize=8))
    else:
        rows = [_ed_one(j) for j in jobs]
    rows.sort()
    complete = np.mean([r[1] for r in rows])
    match = np.mean([r[2] for r in rows])
    return EdCompareResult(n_realizations, float(complete), float(match), rows)


def _sweep_one(args) -> tuple[int, ScanResult]:
    params, sweep_params, seed, index, omega_grid, omega_min_factor, scan_tol = args
    chain = sample_chain(params, realization_rng(seed, index))
    h = xy_hamiltonian_for_chain(chain, params.interaction_range, params.j0)
    _, gs = ground_state(h, seed=index)
    pairing = identify_pairs(gs)
    grid = omega_grid
    if pairing.bonds and omega_min_factor > 0:
        j_eff = assign_effective_couplings(pairing, chain, params.interaction_range, params.j0)
        lo = omega_min_factor * min(j_eff.values())
        trimmed = omega_grid[omega_grid >= lo]
        if trimmed.size >= 2:
            grid = trimmed
    res = bond_break_scan(
        chain, params, grid, sweep_params, method="magnus", scan_tolerance=scan_tol,
        ground_seed=index,
    )
    return index, res


def sweep_ensemble(
    params: LatticeParams,
    sweep_params: SweepParams,
    omega_grid: np.ndarray,
    n_realizations: int,
    seed: int | None = None,
    omega_min_factor: float = 0.02,
    scan_tolerance: float = 5e-3,
    workers: int = 1,
) -> list[tuple[int, ScanResult]]:
    """Bond-breaking scans over a disorder ensemble.

    Each realization's grid is trimmed below omega_min_factor times its
    weakest effective coupling (bonds below the trimmed grid are censored,
    matching the no-extrapolation rule) to keep the slowest sweeps bounded.
    """
    seed = params.seed if seed is None else seed
    jobs = [
        (params, sweep_params, seed, i, np.asarray(omega_grid, float), omega_min_factor, scan_tolerance)
        for i in range(n_realizations)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    results.sort(key=lambda t: t[0])
    return results


def two_atom_scan_set(
    separations: list[int],
    interaction_range: float,
    sweep_params: SweepParams,
    omega_grid: np.ndarray,
    j0: float = 1.0,
    scan_tolerance: float = 1e-4,
) -> list[SweepRecord]:
    """Breaking scans for isolated pairs at fixed separations."""
    records: list[SweepRecord] = []
    for d in separations:
        lat = LatticeParams(n_sites=d + 1, interaction_range=interaction_range, j0=j0, n_atoms=2)
        chain = AtomChain(np.array([0, d]))
        res = bond_break_scan(
            chain, lat, np.asarray(omega_grid, float), sweep_params,
            method="magnus", scan_tolerance=scan_tolerance,
        )
        records.extend(res.records)
    return records
