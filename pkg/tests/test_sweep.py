import numpy as np
import pytest

from rsphase.lattice import AtomChain, LatticeParams
from rsphase.spinsim import ground_state, rdm2, singlet_fraction
from rsphase.sweep import (
    FitRangeError,
    MagnusPropagator,
    SweepParams,
    SweepRecord,
    bond_break_scan,
    evolve,
    initial_state,
    log_omega_grid,
    lz_fit,
    magnus_cell_count,
    sweep_hamiltonians,
)

TWO_ATOMS = AtomChain(np.array([0, 3]))
TWO_LAT = LatticeParams(n_sites=4, interaction_range=5.0, n_atoms=2)


def params(omega, **kw):
    return SweepParams(omega=omega, epsilon0=1.0, phi0=np.pi / 6, **kw)


def test_params_validation():
    with pytest.raises(ValueError):
        SweepParams(omega=0.0)
    with pytest.raises(ValueError):
        SweepParams(omega=1.0, tolerance=-1.0)


def test_hamiltonian_split():
    h0, hint = sweep_hamiltonians(TWO_ATOMS, TWO_LAT, params(1.0))
    # the field part annihilates nothing, the interaction annihilates polarized states
    up = np.zeros(4, dtype=complex)
    up[0] = 1.0
    assert np.allclose(hint.apply(up), 0.0)
    assert np.linalg.norm(h0.apply(up)) > 0


def test_initial_state_is_field_ground_state():
    h0, _ = sweep_hamiltonians(TWO_ATOMS, TWO_LAT, params(1.0))
    psi0 = initial_state(TWO_ATOMS, params(1.0))
    e0, gs = ground_state(h0)
    assert e0 == pytest.approx(-2.0, rel=1e-12)
    assert abs(np.vdot(psi0.amplitudes, gs.amplitudes)) == pytest.approx(1.0, abs=1e-9)


def test_adiabatic_sweep_forms_singlet():
    final = evolve(TWO_ATOMS, TWO_LAT, params(0.01))
    assert singlet_fraction(rdm2(final, 0, 1)) > 0.99


def test_diabatic_sweep_keeps_product_state():
    final = evolve(TWO_ATOMS, TWO_LAT, params(50.0))
    psi0 = initial_state(TWO_ATOMS, params(50.0))
    assert abs(np.vdot(final.amplitudes, psi0.amplitudes)) ** 2 > 0.98


def test_magnus_matches_dop853():
    for omega in (0.05, 0.5):
        a = evolve(TWO_ATOMS, TWO_LAT, params(omega), method="dop853")
        b = evolve(TWO_ATOMS, TWO_LAT, params(omega), method="magnus")
        assert abs(np.vdot(a.amplitudes, b.amplitudes)) == pytest.approx(1.0, abs=1e-5)


def test_magnus_unitary():
    h0, hint = sweep_hamiltonians(TWO_ATOMS, TWO_LAT, params(1.0))
    prop = MagnusPropagator(h0.dense(), hint.dense(), n_cells=64)
    rng = np.random.default_rng(0)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    v /= np.linalg.norm(v)
    out = prop.evolve(v, 0.3)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)


def test_magnus_cell_count_clipped():
    h0, hint = sweep_hamiltonians(TWO_ATOMS, TWO_LAT, params(1.0))
    n_slow = magnus_cell_count(h0.dense(), hint.dense(), 1e-4, 1e-3)
    n_fast = magnus_cell_count(h0.dense(), hint.dense(), 10.0, 1e-3)
    assert n_slow == 1200
    assert n_fast == 50


def test_unknown_method():
    with pytest.raises(ValueError):
        evolve(TWO_ATOMS, TWO_LAT, params(1.0), method="euler")


def test_two_atom_scan_break_point():
    grid = log_omega_grid(lo=1e-2, hi=2.0, per_decade=20)
    res = bond_break_scan(TWO_ATOMS, TWO_LAT, grid, params(1.0), scan_tolerance=1e-4)
    assert len(res.records) == 1
    rec = res.records[0]
    assert rec.bond == (0, 1)
    assert rec.censored is None
    assert rec.j_eff == pytest.approx(np.exp(-3.0 / 5.0), rel=1e-12)
    # J = 0.55: the singlet breaks at a rate below the coupling scale
    assert 0.05 < rec.omega_break < 1.0
    assert res.baseline_ok


def test_scan_censors_fast_grid():
    # the grid starts above the breaking point: bond already broken everywhere
    grid = log_omega_grid(lo=3.0, hi=10.0, per_decade=10)
    res = bond_break_scan(TWO_ATOMS, TWO_LAT, grid, params(1.0), scan_tolerance=1e-4)
    assert res.records[0].censored == "always_broken"
    assert not res.baseline_ok


def test_scan_censors_slow_grid():
    # the grid tops out below the breaking point: bond never breaks
    grid = log_omega_grid(lo=1e-3, hi=5e-3, per_decade=10)
    res = bond_break_scan(TWO_ATOMS, TWO_LAT, grid, params(1.0), scan_tolerance=1e-4)
    assert res.records[0].censored == "never_broke"


def test_lz_fit_recovers_power_law():
    rng = np.random.default_rng(1)
    j = 10 ** rng.uniform(-3, 0, size=40)
    records = [
        SweepRecord(bond=(0, 1), j_eff=float(ji), omega_break=float(0.3 * ji), censored=None)
        for ji in j
    ]
    fit = lz_fit(records)
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert 10 ** fit.intercept == pytest.approx(0.3, rel=1e-10)
    assert fit.rms_residual < 1e-12
    assert fit.n_used == 40


def test_lz_fit_range_guards():
    records = [
        SweepRecord(bond=(0, 1), j_eff=0.5, omega_break=0.1, censored=None)
    ] * 12
    with pytest.raises(FitRangeError):
        lz_fit(records)  # no j_eff span
    with pytest.raises(FitRangeError):
        lz_fit(records[:3])  # too few


def test_log_omega_grid_shape():
    grid = log_omega_grid(lo=1e-2, hi=10.0, per_decade=10)
    assert grid[0] == pytest.approx(1e-2)
    assert grid[-1] == pytest.approx(10.0)
    assert len(grid) == 31
    assert np.all(np.diff(np.log(grid)) > 0)
