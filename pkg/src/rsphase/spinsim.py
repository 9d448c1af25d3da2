"""Exact quantum mechanics at small atom number.

Basis convention: amplitude index b encodes spins as bits, bit i = spin i,
0 = up, 1 = down.  Global phase of stored states is fixed by making the
largest-magnitude amplitude real positive.  Resource guard: iterative
ground states up to n = 14 (dimension 16384), dense cross-checks at small n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from rsphase.lattice import AtomChain, coupling_matrix
from rsphase.rsrg import Bond, PairingReport

__all__ = [
    "ConvergenceError",
    "Rdm2",
    "StateVector",
    "XYHamiltonian",
    "apply_h",
    "collective_spin_stats",
    "ground_state",
    "identify_pairs",
    "product_state",
    "rdm2",
    "singlet_fraction",
    "singlet_product_state",
    "sw_effective_spectrum_check",
    "xy_hamiltonian_for_chain",
]

N_MAX = 14

SINGLET = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2.0)  # basis {uu, ud, du, dd}


class ConvergenceError(RuntimeError):
    """Iterative eigensolver failed to reach the residual target."""


@dataclass(frozen=True)
class StateVector:
    """Normalized complex amplitudes over the 2^n spin basis."""

    n: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amp)
        if amp.shape != (2**self.n,):
            raise ValueError(f"expected {2**self.n} amplitudes for n={self.n}, got {amp.shape}")
        if abs(np.linalg.norm(amp) - 1.0) > 1e-10:
            raise ValueError("state is not normalized")

    def fixed_phase(self) -> "StateVector":
        """Global phase fixed: largest-magnitude amplitude real positive."""
        amp = self.amplitudes
        k = int(np.argmax(np.abs(amp)))
        return StateVector(self.n, amp * np.exp(-1j * np.angle(amp[k])))

    def save(self, path: str | Path) -> None:
        """Binary dump (little-endian complex doubles) plus a JSON sidecar."""
        path = Path(path)
        self.amplitudes.astype("<c16").tofile(path)
        sidecar = {
            "n": self.n,
            "basis": "bit i = spin i, 0 = up, 1 = down",
            "phase": "largest-magnitude amplitude real positive (if fixed_phase was applied)",
            "dtype": "<c16",
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar))

    @classmethod
    def load(cls, path: str | Path) -> "StateVector":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        amp = np.fromfile(path, dtype="<c16")
        return cls(meta["n"], amp)


class XYHamiltonian:
    """XY flip-flop couplings plus an optional rotating transverse field.

    H = (1/2) sum_{i<j} J_ij (sx_i sx_j + sy_i sy_j)
        + sum_i eps_i (cos(phi_i) sx_i + sin(phi_i) sy_i)

    The action is matrix-free; index tables are cached per term.
    """

    def __init__(
        self,
        n: int,
        couplings: list[tuple[int, int, float]],
        transverse_field: list[tuple[int, float, float]] | None = None,
    ):
        if n < 1:
            raise ValueError("need n >= 1")
        self.n = n
        self.dim = 2**n
        self.couplings = list(couplings)
        self.transverse_field = list(transverse_field or [])
        b = np.arange(self.dim)
        self._xy_terms = []
        for i, j, J in self.couplings:
            idx = b[(((b >> i) ^ (b >> j)) & 1).astype(bool)]
            self._xy_terms.append((idx, idx ^ ((1 << i) | (1 << j)), J))
        self._field_terms = []
        for i, eps, phi in self.transverse_field:
            bit = (b >> i) & 1
            coef = eps * np.where(bit == 0, np.exp(1j * phi), np.exp(-1j * phi))
            self._field_terms.append((b ^ (1 << i), coef))

    def apply(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {v.shape}")
        out = np.zeros(self.dim, dtype=complex)
        for idx, flip, J in self._xy_terms:
            out[flip] += J * v[idx]
        for flip, coef in self._field_terms:
            out[flip] += coef * v
        return out

    def aslinearoperator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.dim, self.dim), matvec=self.apply, dtype=complex)

    def dense(self) -> np.ndarray:
        """Dense matrix; only for small n."""
        if self.n > 12:
            raise ValueError("dense form limited to n <= 12")
        H = np.zeros((self.dim, self.dim), dtype=complex)
        for idx, flip, J in self._xy_terms:
            H[flip, idx] += J
        b = np.arange(self.dim)
        for flip, coef in self._field_terms:
            H[flip, b] += coef
        return H


def xy_hamiltonian_for_chain(
    chain: AtomChain,
    interaction_range: float,
    j0: float = 1.0,
    epsilon0: float = 0.0,
    phi0: float = 0.0,
) -> XYHamiltonian:
    """Interaction Hamiltonian for a disorder realization.

    With epsilon0 nonzero the per-site rotating field at angle
    phi_i = x_i * phi0 is included.
    """
    J = coupling_matrix(chain.positions, interaction_range, j0)
    couplings = [(i, j, J[i, j]) for i in range(chain.n) for j in range(i + 1, chain.n)]
    field = None
    if epsilon0 != 0.0:
        field = [(i, epsilon0, float(chain.positions[i]) * phi0) for i in range(chain.n)]
    return XYHamiltonian(chain.n, couplings, field)


def apply_h(h: XYHamiltonian, v: StateVector) -> np.ndarray:
    """H|v> as a raw (unnormalized) amplitude array."""
    if v.n != h.n:
        raise ValueError("dimension mismatch")
    return h.apply(v.amplitudes)


def ground_state(
    h: XYHamiltonian, seed: int = 0, residual_tol: float = 1e-8, maxiter: int = 100_000
) -> tuple[float, StateVector]:
    """Lowest eigenpair via restarted Lanczos with matrix-free application.

    Deterministic for a fixed seed.  Small dimensions fall back to dense
    diagonalization.
    """
    if h.n > N_MAX:
        raise ValueError(f"n={h.n} exceeds the resource guard N_MAX={N_MAX}")
    if h.dim <= 16:
        w, V = np.linalg.eigh(h.dense())
        e, v = float(w[0]), V[:, 0]
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(h.dim) + 1j * rng.standard_normal(h.dim)
        try:
            w, V = spla.eigsh(h.aslinearoperator(), k=1, which="SA", v0=v0, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos did not converge: {exc}") from exc
        e, v = float(w[0]), V[:, 0]
    v = v / np.linalg.norm(v)
    res = np.linalg.norm(h.apply(v) - e * v)
    if res > residual_tol:
        raise ConvergenceError(f"residual {res:.3e} exceeds {residual_tol:.1e}")
    return e, StateVector(h.n, v).fixed_phase()


@dataclass(frozen=True)
class Rdm2:
    """Two-atom reduced density matrix over basis {uu, ud, du, dd} of (i, j)."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.shape != (4, 4):
            raise ValueError("Rdm2 must be 4x4")
        if abs(np.trace(m).real - 1.0) > 1e-10 or abs(np.trace(m).imag) > 1e-10:
            raise ValueError("Rdm2 must have trace 1")
        if np.linalg.norm(m - m.conj().T) > 1e-10:
            raise ValueError("Rdm2 must be Hermitian")


def rdm2(v: StateVector, i: int, j: int) -> Rdm2:
    """Partial trace onto atoms (i, j); row/column index is 2*s_i + s_j."""
    if i == j:
        raise ValueError("atoms must be distinct")
    tensor = v.amplitudes.reshape((2,) * v.n)
    # spin k lives on axis n-1-k
    T = np.moveaxis(tensor, (v.n - 1 - i, v.n - 1 - j), (0, 1)).reshape(4, -1)
    return Rdm2(T @ T.conj().T)


def singlet_fraction(r: Rdm2) -> float:
    """Projection of the two-atom state onto the singlet, in [0, 1]."""
    val = float(np.real(SINGLET @ r.matrix @ SINGLET))
    return min(max(val, 0.0), 1.0)


def identify_pairs(v: StateVector, floor: float = 0.5) -> PairingReport:
    """Read a pairing off a many-body state via singlet projections.

    Greedy mutual-argmax: repeatedly pair the two unassigned atoms with the
    globally largest singlet fraction, as long as it reaches `floor`;
    remaining atoms are reported unpaired.  Ties resolve to the lowest
    (i, j).  Bond l_m is NaN (unknown here); nesting is computed from the
    pair positions.
    """
    n = v.n
    frac = np.full((n, n), -1.0)
    for i in range(n):
        for j in range(i + 1, n):
            frac[i, j] = singlet_fraction(rdm2(v, i, j))
    free = set(range(n))
    bonds: list[Bond] = []
    order = 0
    while len(free) >= 2:
        best, pair = -1.0, None
        for i in sorted(free):
            for j in sorted(free):
                if j > i and frac[i, j] > best:
                    best, pair = frac[i, j], (i, j)
        if best < floor:
            break
        i, j = pair
        nesting = sum(1 for b in bonds if i < b.left and b.right < j)
        bonds.append(Bond(left=i, right=j, l_m=float("nan"), nesting=nesting, order=order))
        free -= {i, j}
        order += 1
    return PairingReport(bonds=bonds, unpaired=sorted(free))


def product_state(site_phases: np.ndarray) -> StateVector:
    """Per-atom state (|up> - e^{i phi_i} |down>) / sqrt(2), the ground
    state of the rotating transverse field."""
    phis = np.asarray(site_phases, dtype=float)
    psi = np.ones(1, dtype=complex)
    for i in range(phis.size - 1, -1, -1):
        psi = np.kron(psi, np.array([1.0, -np.exp(1j * phis[i])]) / np.sqrt(2.0))
    return StateVector(phis.size, psi)


def singlet_product_state(n: int, pairs: list[tuple[int, int]]) -> StateVector:
    """Product of exact singlets on `pairs`; any atom not covered is |up>."""
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    covered = set()
    for i, j in pairs:
        if i in covered or j in covered:
            raise ValueError("pairs must be disjoint")
        covered |= {i, j}
        bi, bj = 1 << i, 1 << j
        b = np.arange(2**n)
        keep = ((b & bi) == 0) & ((b & bj) == 0)
        new = np.zeros_like(psi)
        new[b[keep] | bj] += psi[b[keep]] / np.sqrt(2.0)
        new[b[keep] | bi] -= psi[b[keep]] / np.sqrt(2.0)
        psi = new
    return StateVector(n, psi)


def collective_spin_stats(v: StateVector) -> dict[str, tuple[float, float]]:
    """Mean and variance of the collective spin S_alpha = (1/2) sum_i sigma_alpha^i."""
    n, amp = v.n, v.amplitudes
    b = np.arange(2**n)
    out = {}
    wx = np.zeros_like(amp)
    wy = np.zeros_like(amp)
    wz = np.zeros_like(amp)
    for i in range(n):
        bit = (b >> i) & 1
        flip = b ^ (1 << i)
        wx[flip] += 0.5 * amp
        wy[flip] += 0.5 * np.where(bit == 0, 1j, -1j) * amp
        wz += 0.5 * np.where(bit == 0, 1.0, -1.0) * amp
    for name, w in (("x", wx), ("y", wy), ("z", wz)):
        mean = float(np.real(np.vdot(amp, w)))
        second = float(np.real(np.vdot(w, w)))
        out[name] = (mean, second - mean**2)
    return out


def sw_effective_spectrum_check(
    positions: np.ndarray, L: float, j0: float = 1.0
) -> float:
    """Low-spectrum error of the frozen-pair effective Hamiltonian.

    For 4 atoms whose middle gap is strictly smallest, builds the effective
    outer-pair Hamiltonian (constant shift -J12 - sum (J_2j - J_1j)^2 / 2J12
    plus the renormalized outer coupling) and returns the maximum deviation
    of its spectrum from the exact lowest 4 eigenvalues, relative to J12.
    The deviation scales as the cube of J_max / J12.
    """
    pos = np.sort(np.asarray(positions, dtype=float))
    if pos.size != 4:
        raise ValueError("need exactly 4 atoms")
    gaps = np.diff(pos)
    if not (gaps[1] < gaps[0] and gaps[1] < gaps[2]):
        raise ValueError("middle gap must be strictly smallest")
    J = coupling_matrix(pos, L, j0)
    j12 = J[1, 2]
    from rsphase.rsrg import sw_coupling

    jt = sw_coupling(J, (1, 2), 0, 3)
    shift = -j12 - (J[2, 0] - J[1, 0]) ** 2 / (2 * j12) - (J[2, 3] - J[1, 3]) ** 2 / (2 * j12)
    eff = np.sort(shift + np.array([-jt, 0.0, 0.0, jt]))
    chain_like = XYHamiltonian(4, [(i, j, J[i, j]) for i in range(4) for j in range(i + 1, 4)])
    exact = np.sort(np.linalg.eigvalsh(chain_like.dense().real))[:4]
    return float(np.max(np.abs(eff - exact)) / j12)
