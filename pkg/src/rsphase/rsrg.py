"""Strong-disorder decimation RG for the exponentially-coupled XY chain.

The strongest-coupled pair is always the pair of active atoms at the
smallest effective distance.  Decimating it freezes the pair into a
singlet and shortens the distance between its outer neighbors by
`d_eff`, so couplings mediated across the pair become stronger.  Repeating
until no pairs remain yields the random-singlet pairing structure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from rsphase.lattice import AtomChain

__all__ = [
    "Bond",
    "CrossingPairingError",
    "GapList",
    "NothingToDecimateError",
    "PairingReport",
    "assign_effective_couplings",
    "d_eff",
    "decimate_step",
    "run_no_rg",
    "run_rsrg",
    "sw_coupling",
]

# gaps within this relative distance of the minimum count as ties
_TIE_RTOL = 1e-12


class NothingToDecimateError(ValueError):
    """Fewer than two active atoms remain."""


class CrossingPairingError(ValueError):
    """A supplied pairing contains crossing bonds and is not replayable."""

    def __init__(self, bond_a: "Bond", bond_b: "Bond"):
        self.bond_a = bond_a
        self.bond_b = bond_b
        super().__init__(f"crossing bonds ({bond_a.left},{bond_a.right}) and ({bond_b.left},{bond_b.right})")


def d_eff(l_m: float, L: float) -> float:
    """Effective-distance shrinkage for a decimated pair at distance l_m.

    d_eff = L * [2 l_m / L + ln(1 - 2 e^{-l_m/L} + 2 e^{-2 l_m/L})].
    The log argument is >= 1/2, so the result is always finite.
    """
    if l_m <= 0 or L <= 0:
        raise ValueError(f"l_m and L must be > 0, got l_m={l_m}, L={L}")
    r = l_m / L
    e = np.exp(-r)
    return L * float(2.0 * r + np.log1p(-2.0 * e + 2.0 * e * e))


@dataclass(frozen=True)
class Bond:
    """A decimated singlet pair.

    `left`/`right` are atom ids (chain indices), `l_m` the effective length
    at decimation in units of a (NaN when unknown, e.g. for pairings read
    off an exact ground state), `nesting` the number of bonds contained
    strictly inside, `order` the decimation step index.
    """

    left: int
    right: int
    l_m: float
    nesting: int
    order: int


@dataclass
class GapList:
    """Active atoms and the effective gaps between consecutive ones.

    `contained[k]` counts bonds already frozen strictly inside gap k; the
    gap spanning a decimated pair inherits the counts of the three merged
    gaps plus one, which reproduces the positional nesting count for the
    non-crossing structures the RG generates.
    """

    atoms: list[int]
    gaps: np.ndarray
    contained: list[int] = field(default_factory=list)
    step: int = 0

    def __post_init__(self) -> None:
        self.gaps = np.asarray(self.gaps, dtype=float)
        if self.gaps.size != max(len(self.atoms) - 1, 0):
            raise ValueError("gaps must have length atoms-1")
        if np.any(self.gaps <= 0):
            raise ValueError("all gaps must be > 0")
        if not self.contained:
            self.contained = [0] * self.gaps.size

    @classmethod
    def from_chain(cls, chain: AtomChain) -> "GapList":
        return cls(atoms=list(range(chain.n)), gaps=np.diff(chain.positions).astype(float))


def decimate_step(state: GapList, L: float) -> tuple[GapList, Bond]:
    """Freeze the closest active pair; merge the flanking gaps.

    The minimum gap l_m (leftmost on ties) is decimated.  With neighbors on
    both sides the three gaps merge into l_left + l_m + l_right - d_eff;
    at a chain end the pair and its one adjacent gap are simply dropped.
    """
    if len(state.atoms) < 2:
        raise NothingToDecimateError("need at least 2 active atoms")
    gaps = state.gaps
    m = gaps.min()
    k = int(np.flatnonzero(gaps <= m * (1.0 + _TIE_RTOL))[0])
    bond = Bond(
        left=state.atoms[k],
        right=state.atoms[k + 1],
        l_m=float(gaps[k]),
        nesting=state.contained[k],
        order=state.step,
    )
    atoms = state.atoms[:k] + state.atoms[k + 2 :]
    if 0 < k < gaps.size - 1:
        merged = gaps[k - 1] + gaps[k] + gaps[k + 1] - d_eff(gaps[k], L)
        new_gaps = np.concatenate([gaps[: k - 1], [merged], gaps[k + 2 :]])
        contained = (
            state.contained[: k - 1]
            + [state.contained[k - 1] + state.contained[k] + state.contained[k + 1] + 1]
            + state.contained[k + 2 :]
        )
    elif k == 0:
        new_gaps = gaps[2:].copy()
        contained = state.contained[2:]
    else:
        new_gaps = gaps[:-2].copy()
        contained = state.contained[:-2]
    return GapList(atoms=atoms, gaps=new_gaps, contained=contained, step=state.step + 1), bond


@dataclass(frozen=True)
class PairingReport:
    """Complete pairing of a chain: bonds plus leftover unpaired atoms."""

    bonds: list[Bond]
    unpaired: list[int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "bonds": [
                    {"left": b.left, "right": b.right, "l_m": b.l_m, "nesting": b.nesting, "order": b.order}
                    for b in self.bonds
                ],
                "unpaired": list(self.unpaired),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PairingReport":
        d = json.loads(text)
        bonds = [Bond(**b) for b in d["bonds"]]
        return cls(bonds=bonds, unpaired=list(d["unpaired"]))

    def write_csv(self, fh: IO[str]) -> None:
        """(l_m, nesting) rows for histogramming."""
        w = csv.writer(fh)
        w.writerow(["l_m", "nesting"])
        for b in self.bonds:
            w.writerow([repr(b.l_m), b.nesting])


def run_rsrg(chain: AtomChain, L: float) -> PairingReport:
    """Decimate until fewer than two atoms remain.

    The sequence of decimated l_m is non-decreasing (the RG cutoff only
    grows); this is asserted.  Odd N leaves exactly one unpaired atom.
    """
    if chain.n < 1:
        raise ValueError("need at least 1 atom")
    state = GapList.from_chain(chain)
    bonds: list[Bond] = []
    last = 0.0
    while len(state.atoms) >= 2:
        state, bond = decimate_step(state, L)
        assert bond.l_m >= last * (1.0 - 1e-9), "RG cutoff must be non-decreasing"
        last = bond.l_m
        bonds.append(bond)
    return PairingReport(bonds=bonds, unpaired=list(state.atoms))


def run_no_rg(chain: AtomChain) -> PairingReport:
    """Greedy nearest-neighbor pairing without renormalization.

    Repeatedly pairs the two adjacent unpaired atoms at minimal bare
    separation (leftmost on ties).  No gap merging and no cross-pair bonds:
    an atom whose original neighbors are both paired stays unpaired.
    """
    if chain.n < 1:
        raise ValueError("need at least 1 atom")
    d = np.diff(chain.positions).astype(float)
    free = np.ones(chain.n, dtype=bool)
    bonds: list[Bond] = []
    order = 0
    while True:
        ok = np.flatnonzero(free[:-1] & free[1:]) if chain.n > 1 else np.array([], dtype=int)
        if ok.size == 0:
            break
        k = int(ok[np.argmin(d[ok])])
        bonds.append(Bond(left=k, right=k + 1, l_m=float(d[k]), nesting=0, order=order))
        free[k] = free[k + 1] = False
        order += 1
    return PairingReport(bonds=bonds, unpaired=[int(i) for i in np.flatnonzero(free)])


def sw_coupling(J: np.ndarray, pair: tuple[int, int], j: int, jp: int) -> float:
    """Second-order renormalized coupling between j and j' after freezing `pair`.

    Jt_{jj'} = J_{jj'} - (J_{2j} - J_{1j}) (J_{2j'} - J_{1j'}) / J_{12},
    where 1, 2 are the frozen pair.  Exact formula, no exponential
    approximation.
    """
    a, b = pair
    if len({a, b, j, jp}) != 4:
        raise ValueError(f"indices must be distinct, got pair={pair}, j={j}, j'={jp}")
    J = np.asarray(J, dtype=float)
    return float(J[j, jp] - (J[b, j] - J[a, j]) * (J[b, jp] - J[a, jp]) / J[a, b])


def _nesting_depths(bonds: list[Bond]) -> list[int]:
    depth = [0] * len(bonds)
    for i, bi in enumerate(bonds):
        for k, bk in enumerate(bonds):
            if k != i and bk.left < bi.left and bi.right < bk.right:
                depth[i] += 1
    return depth


def _check_non_crossing(bonds: list[Bond]) -> None:
    by_left = sorted(bonds, key=lambda b: (b.left, b.right))
    for i, bi in enumerate(by_left):
        for bk in by_left[i + 1 :]:
            if bk.left >= bi.right:
                break
            if bk.right > bi.right:  # bi.left < bk.left < bi.right < bk.right
                raise CrossingPairingError(bi, bk)


def assign_effective_couplings(
    report: PairingReport, chain: AtomChain, L: float, j0: float = 1.0
) -> dict[tuple[int, int], float]:
    """Effective coupling J~ = j0 * exp(-l_m / L) for every bond of a pairing.

    Replays the RG gap merging under the given pairing, innermost bonds
    first (ties by bare length, then position), and assigns each bond the
    effective length found at its decimation.  Crossing pairings raise
    CrossingPairingError naming the offending bonds.  Unpaired atoms are
    dropped from the replay chain.
    """
    _check_non_crossing(report.bonds)
    pos = chain.positions.astype(float)
    depth = _nesting_depths(report.bonds)
    order = sorted(
        range(len(report.bonds)),
        key=lambda i: (
            -depth[i],
            pos[report.bonds[i].right] - pos[report.bonds[i].left],
            report.bonds[i].left,
        ),
    )
    unpaired = set(report.unpaired)
    atoms = [i for i in range(chain.n) if i not in unpaired]
    gaps = list(np.diff(pos[atoms]))
    out: dict[tuple[int, int], float] = {}
    for i in order:
        b = report.bonds[i]
        k = atoms.index(b.left)
        if k + 1 >= len(atoms) or atoms[k + 1] != b.right:
            # cannot happen for a non-crossing pairing processed inner-first
            raise CrossingPairingError(b, b)
        l_m = gaps[k]
        out[(b.left, b.right)] = j0 * float(np.exp(-l_m / L))
        del atoms[k : k + 2]
        if 0 < k < len(gaps) - 1:
            merged = gaps[k - 1] + gaps[k] + gaps[k + 1] - d_eff(l_m, L)
            gaps[k - 1 : k + 2] = [merged]
        elif k == 0:
            del gaps[:2]
        else:
            del gaps[-2:]
    return out
