"""End-to-end acceptance checks for the random singlet simulation suite.

Each test prints one "criterion N: PASS/FAIL" line with the measured
quantities.  The expensive artifacts (flow solutions, decimation Monte
Carlo, exact-diagonalization ensemble, sweep ensembles) are shared through
module-scoped fixtures.  Total runtime is dominated by the many-body sweep
ensemble and is well under an hour on a desktop core.
"""

import math
import os

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from rsphase.ensemble import ed_compare, rsrg_ensemble, sweep_ensemble, two_atom_scan_set
from rsphase.fidelity import FidelityParams, optimize_f_paired
from rsphase.flow import no_rg_unpaired, run_flow, run_joint_flow
from rsphase.lattice import AtomChain, LatticeParams, coupling_matrix
from rsphase.rsrg import GapList, decimate_step, sw_coupling
from rsphase.spinsim import (
    collective_spin_stats,
    singlet_product_state,
    sw_effective_spectrum_check,
)
from rsphase.sweep import (
    SweepParams,
    initial_state,
    log_omega_grid,
    lz_fit,
    sweep_hamiltonians,
)

L = 5.0
WORKERS = max(1, min(4, os.cpu_count() or 1))


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def scalar_flow():
    return run_flow(0.3, L, lm_max_over_L=10.0)


@pytest.fixture(scope="module")
def joint_flow():
    return run_joint_flow(0.3, L, lm_max_over_L=10.0)


@pytest.fixture(scope="module")
def mc():
    lat = LatticeParams(n_sites=100, interaction_range=L, n_atoms=30, seed=0)
    return rsrg_ensemble(lat, 10_000, seed=0)


@pytest.fixture(scope="module")
def fidelity_flow():
    return run_flow(0.12, L, lm_max_over_L=12.0)


def test_criterion_01_sw_matches_decimation():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        Lr = rng.uniform(2.0, 10.0)
        lm = rng.uniform(0.1, 3.0)
        outer = lm + rng.uniform(0.5, 10.0, size=2)
        gaps = np.array([outer[0], lm, outer[1]])
        positions = np.concatenate([[0.0], np.cumsum(gaps)])
        state, _ = decimate_step(GapList(atoms=[0, 1, 2, 3], gaps=gaps), Lr)
        j_merged = math.exp(-state.gaps[0] / Lr)
        j_sw = sw_coupling(coupling_matrix(positions, Lr), (1, 2), 0, 3)
        worst = max(worst, abs(j_sw - j_merged) / j_merged)
    _report(1, worst <= 1e-9, f"max relative deviation {worst:.3e} over 1000 configs")


def test_criterion_02_sw_spectral_accuracy():
    # Known red: with distance-additive couplings the outer-outer coupling of a
    # four-atom chain is order r^2 in r = J_max/J12, so every closed coupling
    # loop carries an even power of r and eigenvalues are even functions of r.
    # The remainder after the full second-order effective Hamiltonian is then
    # exactly fourth order; a fitted exponent of 3 cannot occur for any
    # faithful implementation on chain geometries.
    rng = np.random.default_rng(2)
    ratios = np.array([0.05, 0.1, 0.2])
    draws = [(rng.uniform(0.5, 1.5), rng.uniform(0.5, 2.0)) for _ in range(20)]
    errs = []
    for r in ratios:
        vals = []
        for lm, off in draws:
            g1 = lm + L * math.log(1.0 / r)
            positions = np.array([0.0, g1, g1 + lm, 2.0 * g1 + lm + off])
            vals.append(sw_effective_spectrum_check(positions, L))
        errs.append(np.mean(vals))
    slope = np.polyfit(np.log(ratios), np.log(errs), 1)[0]
    _report(
        2,
        abs(slope - 3.0) <= 0.5,
        f"spectral error exponent {slope:.3f}, required 3 +/- 0.5; the exact "
        "exponent is 4 for chain geometries (even-parity loop structure), so "
        "the effective spectrum is better than required and this check is "
        "expected to stay red",
    )


def test_criterion_03_no_rg_asymptote(joint_flow, mc):
    flow_val = no_rg_unpaired(joint_flow)
    mc_val = float(mc.survival_norg[-1])
    ok = abs(flow_val - 0.15) <= 0.03 and abs(mc_val - 0.15) <= 0.03
    _report(3, ok, f"flow asymptote {flow_val:.4f}, Monte Carlo {mc_val:.4f}, target 0.15 +/- 0.03")


def test_criterion_04_flow_vs_monte_carlo(scalar_flow, mc):
    mask = mc.lm_over_L >= 1.0
    on_mc = np.interp(
        np.log(mc.lm_over_L[mask]), np.log(scalar_flow.lm_over_L), scalar_flow.survival
    )
    max_dev = float(np.abs(on_mc - mc.survival_rg[mask]).max())
    k6 = int(np.argmin(np.abs(mc.lm_over_L - 6.0)))
    surv6_mc = float(mc.survival_rg[k6])
    surv6_flow = float(np.interp(6.0, scalar_flow.lm_over_L, scalar_flow.survival))
    ok = max_dev <= 0.05 and surv6_mc < 0.05 and surv6_flow < 0.05
    _report(
        4,
        ok,
        f"max |flow - MC| = {max_dev:.4f} for l_m/L >= 1; "
        f"survival at l_m/L = 6: MC {surv6_mc:.4f}, flow {surv6_flow:.4f}",
    )


def test_criterion_05_nesting_crossover(joint_flow, mc):
    f = joint_flow.fractions
    early = joint_flow.lm_over_L < 0.5
    flow_order = bool(np.all(f[early, 0] > f[early, 1]) and np.all(f[early, 1] >= f[early, 2]))
    flow_cross = bool(np.any(f[:, 1] > f[:, 0]))

    good = np.all(np.isfinite(mc.fractions), axis=1)
    c = mc.fraction_bin_centers[good]
    g = mc.fractions[good]
    small = c <= 0.7
    mc_order = bool(np.all(g[small, 0] > g[small, 1]) and np.all(g[small, 1] >= g[small, 2]))
    mid = (c >= 1.0) & (c <= 4.0)
    mc_cross = bool(np.any(g[mid, 1] > g[mid, 0]))

    ok = flow_order and flow_cross and mc_order and mc_cross
    _report(
        5,
        ok,
        f"flow ordering {flow_order}, flow crossover {flow_cross}, "
        f"MC ordering {mc_order}, MC crossover {mc_cross}",
    )


def test_criterion_06_ed_cross_validation():
    lat = LatticeParams(n_sites=29, interaction_range=L, n_atoms=8, seed=0)
    res = ed_compare(lat, 12_000, seed=0, workers=WORKERS)
    ok = res.complete_rate >= 0.90 and res.match_rate >= 0.60
    _report(
        6,
        ok,
        f"complete pairing rate {res.complete_rate:.4f} (>= 0.90), "
        f"RG match rate {res.match_rate:.4f} (>= 0.60) over {res.n_realizations} realizations",
    )


def test_criterion_07_landau_zener_slope():
    params = SweepParams(omega=1.0, epsilon0=1.0, phi0=math.pi / 6)
    records = two_atom_scan_set(
        list(range(1, 11)), L, params, log_omega_grid(1e-2, 10.0, 40), scan_tolerance=1e-4
    )
    fit2 = lz_fit(records, min_records=8, min_decades=0.5)

    lat = LatticeParams(n_sites=60, interaction_range=L, n_atoms=8, seed=0)
    results = sweep_ensemble(
        lat, params, log_omega_grid(3e-4, 10.0, 16), 100, seed=0, workers=WORKERS
    )
    many = [rec for _, res in results for rec in res.records]
    fit_m = lz_fit(many)

    ok = abs(fit2.slope - 1.0) <= 0.3 and abs(fit_m.slope - 1.0) <= 0.4
    _report(
        7,
        ok,
        f"two-atom slope {fit2.slope:.3f} (1 +/- 0.3, {fit2.n_used} bonds), "
        f"many-body slope {fit_m.slope:.3f} (1 +/- 0.4, {fit_m.n_used} bonds)",
    )


def test_criterion_08_singlet_witness():
    rng = np.random.default_rng(8)
    worst = 0.0
    for n in (2, 4, 6, 8, 10, 12):
        for _ in range(3):
            perm = rng.permutation(n)
            pairs = [(int(perm[2 * k]), int(perm[2 * k + 1])) for k in range(n // 2)]
            stats = collective_spin_stats(singlet_product_state(n, pairs))
            for alpha in ("x", "y", "z"):
                mean, var = stats[alpha]
                worst = max(worst, abs(mean), abs(var))
    _report(8, worst < 1e-12, f"max |<S_a>| and Var(S_a) = {worst:.3e} for N <= 12")


def test_criterion_09_paired_fraction_optimum(fidelity_flow):
    params = FidelityParams(cooperativity=1e4, filling=0.12, interaction_range=L)
    curve = (fidelity_flow.lm_over_L, fidelity_flow.survival)
    omega_star, f_star = optimize_f_paired(params, curve, np.logspace(-4, 1, 201))
    ok = abs(f_star - 0.70) <= 0.05
    _report(9, ok, f"optimal F_paired {f_star:.4f} at omega* = {omega_star:.4g} (0.70 +/- 0.05)")


def test_criterion_10_numerical_hygiene(scalar_flow, joint_flow, fidelity_flow):
    drift_scalar = abs(scalar_flow.final.normalization() - 1.0)
    drift_joint = abs(joint_flow.final.normalization() - 1.0)

    chain = AtomChain(np.array([0, 2, 5, 9]))
    lat = LatticeParams(n_sites=10, interaction_range=L, n_atoms=4)
    params = SweepParams(omega=0.5)
    h0, hint = sweep_hamiltonians(chain, lat, params)
    d0, d1 = h0.dense(), hint.dense()
    psi0 = initial_state(chain, params).amplitudes
    T = math.pi / (2.0 * params.omega)
    sol = solve_ivp(
        lambda t, y: -1j * ((math.cos(params.omega * t) * d0 + math.sin(params.omega * t) * d1) @ y),
        (0.0, T),
        psi0,
        method="DOP853",
        rtol=1e-10,
        atol=1e-12,
    )
    drift_evolve = abs(np.linalg.norm(sol.y[:, -1]) - 1.0)

    coarse = run_flow(0.3, L, lm_max_over_L=10.0, dlnlm=2e-3, n_conv=3000)
    coarse_joint = run_joint_flow(0.3, L, lm_max_over_L=10.0, dlnlm=2e-3, n_conv=3000)
    coarse_fid = run_flow(0.12, L, lm_max_over_L=12.0, dlnlm=2e-3, n_conv=3000)

    probes = np.array([1.0, 6.0, 10.0])
    d_surv = np.abs(
        np.interp(probes, scalar_flow.lm_over_L, scalar_flow.survival)
        - np.interp(probes, coarse.lm_over_L, coarse.survival)
    ).max()
    d_norg = abs(no_rg_unpaired(joint_flow) - no_rg_unpaired(coarse_joint))
    d_frac = max(
        abs(
            np.interp(1.0, joint_flow.lm_over_L, joint_flow.fractions[:, k])
            - np.interp(1.0, coarse_joint.lm_over_L, coarse_joint.fractions[:, k])
        )
        for k in range(3)
    )
    fparams = FidelityParams(cooperativity=1e4, filling=0.12, interaction_range=L)
    grid = np.logspace(-4, 1, 201)
    _, f_fine = optimize_f_paired(fparams, (fidelity_flow.lm_over_L, fidelity_flow.survival), grid)
    _, f_coarse = optimize_f_paired(fparams, (coarse_fid.lm_over_L, coarse_fid.survival), grid)
    d_fid = abs(f_fine - f_coarse)
    d_refine = max(d_surv, d_norg, d_frac, d_fid)

    ok = drift_scalar < 1e-3 and drift_joint < 1e-3 and drift_evolve < 1e-8 and d_refine < 1e-2
    _report(
        10,
        ok,
        f"flow norm drift {drift_scalar:.2e}/{drift_joint:.2e} (< 1e-3), "
        f"sweep norm drift {drift_evolve:.2e} (< 1e-8), "
        f"refinement shift {d_refine:.2e} (< 1e-2)",
    )
