"""Disorder realizations and the bare coupling model.

Atoms occupy integer sites of a 1D lattice (lattice constant a = 1); the
coupling between two atoms decays exponentially with their separation,
J_ij = J0 * exp(-|x_i - x_j| / L).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AtomChain",
    "LatticeParams",
    "coupling",
    "coupling_list",
    "coupling_matrix",
    "sample_chain",
]


@dataclass(frozen=True)
class LatticeParams:
    """Trap lattice, coupling model and filling mode.

    Exactly one of `n_atoms` (fixed atom count, drawn without replacement)
    or `p_fill` (independent Bernoulli occupancy) must be set.  All lengths
    are in units of the lattice constant; energies in units of J0.
    """

    n_sites: int
    interaction_range: float
    j0: float = 1.0
    n_atoms: int | None = None
    p_fill: float | None = None
    seed: int = 0
    lattice_const: float = 1.0

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise ValueError(f"n_sites must be positive, got {self.n_sites}")
        if self.interaction_range <= 0:
            raise ValueError(f"interaction_range must be > 0, got {self.interaction_range}")
        if self.j0 <= 0:
            raise ValueError(f"j0 must be > 0, got {self.j0}")
        if self.lattice_const != 1.0:
            raise ValueError("lattice_const is fixed to 1; lengths are in units of a")
        if (self.n_atoms is None) == (self.p_fill is None):
            raise ValueError("exactly one of n_atoms or p_fill must be given")
        if self.n_atoms is not None and not (0 < self.n_atoms <= self.n_sites):
            raise ValueError(f"n_atoms must be in [1, n_sites], got {self.n_atoms}")
        if self.p_fill is not None and not (0.0 < self.p_fill < 1.0):
            raise ValueError(f"p_fill must be in (0, 1), got {self.p_fill}")

    @property
    def filling(self) -> float:
        """Mean filling fraction of the trap lattice."""
        if self.p_fill is not None:
            return self.p_fill
        return self.n_atoms / self.n_sites

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "interaction_range": self.interaction_range,
            "j0": self.j0,
            "n_atoms": self.n_atoms,
            "p_fill": self.p_fill,
            "seed": self.seed,
            "filling_mode": "fixed_n" if self.n_atoms is not None else "bernoulli",
        }


@dataclass(frozen=True)
class AtomChain:
    """One disorder realization: sorted occupied site indices."""

    positions: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.int64)
        object.__setattr__(self, "positions", pos)
        if pos.ndim != 1:
            raise ValueError("positions must be a 1D array")
        if pos.size > 1 and not np.all(np.diff(pos) > 0):
            raise ValueError("positions must be strictly increasing")
        if pos.size and pos[0] < 0:
            raise ValueError("positions must be non-negative")

    @property
    def n(self) -> int:
        return int(self.positions.size)

    def to_json(self) -> str:
        return json.dumps([int(x) for x in self.positions])

    @classmethod
    def from_json(cls, text: str) -> "AtomChain":
        return cls(np.asarray(json.loads(text), dtype=np.int64))


def sample_chain(params: LatticeParams, rng: np.random.Generator | None = None) -> AtomChain:
    """Draw one disorder realization.

    Fixed-N mode places `n_atoms` atoms on distinct sites uniformly at
    random; Bernoulli mode occupies each site independently with
    probability `p_fill`.  Identical params + seed give identical output.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    if params.n_atoms is not None:
        pos = np.sort(rng.choice(params.n_sites, size=params.n_atoms, replace=False))
    else:
        pos = np.flatnonzero(rng.random(params.n_sites) < params.p_fill)
    return AtomChain(pos.astype(np.int64))


def coupling(params: LatticeParams, xi: float, xj: float) -> float:
    """Bare coupling J0 * exp(-|xi - xj| / L) between two distinct sites."""
    if xi == xj:
        raise ValueError(f"self-coupling is undefined (xi = xj = {xi})")
    return params.j0 * float(np.exp(-abs(xi - xj) / params.interaction_range))


def coupling_list(chain: AtomChain, params: LatticeParams) -> list[tuple[int, int, float]]:
    """All unordered atom pairs with their couplings, lexicographic in (i, j).

    Indices are atom indices within the chain (not site indices).  Fewer
    than 2 atoms gives an empty list.
    """
    pos = chain.positions
    out = []
    for i in range(chain.n):
        for j in range(i + 1, chain.n):
            out.append((i, j, coupling(params, pos[i], pos[j])))
    return out


def coupling_matrix(positions: np.ndarray, interaction_range: float, j0: float = 1.0) -> np.ndarray:
    """Symmetric coupling matrix over positions, zero diagonal."""
    x = np.asarray(positions, dtype=float)
    J = j0 * np.exp(-np.abs(x[:, None] - x[None, :]) / interaction_range)
    np.fill_diagonal(J, 0.0)
    return J
