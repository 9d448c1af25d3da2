"""Random singlet phase of a disordered XY spin chain with exponential couplings.

Subpackages cover disorder realizations (`lattice`), strong-disorder
decimation RG (`rsrg`), the RG flow-equation solvers (`flow`), exact
diagonalization at small atom number (`spinsim`), adiabatic sweep dynamics
(`sweep`), and the experimental error budget (`fidelity`).

Units: lengths in units of the lattice constant a, energies in units of the
bare coupling J0, times in units of 1/J0 (hbar = 1).
"""

from rsphase.fidelity import FidelityParams, f_paired, f_unpaired, optimize_f_paired, p_inc
from rsphase.flow import (
    FlowHistory,
    JointFlowHistory,
    g_of_lm,
    init_q,
    no_rg_unpaired,
    run_flow,
    run_joint_flow,
    step_flow,
    unpaired_fraction,
)
from rsphase.lattice import AtomChain, LatticeParams, coupling, coupling_list, sample_chain
from rsphase.rsrg import (
    Bond,
    GapList,
    PairingReport,
    assign_effective_couplings,
    d_eff,
    decimate_step,
    run_no_rg,
    run_rsrg,
    sw_coupling,
)
from rsphase.spinsim import (
    StateVector,
    XYHamiltonian,
    ground_state,
    identify_pairs,
    rdm2,
    singlet_fraction,
    xy_hamiltonian_for_chain,
)
from rsphase.sweep import SweepParams, bond_break_scan, evolve, log_omega_grid, lz_fit

__version__ = "0.1.0"

__all__ = [
    "AtomChain",
    "Bond",
    "FidelityParams",
    "FlowHistory",
    "GapList",
    "JointFlowHistory",
    "LatticeParams",
    "PairingReport",
    "StateVector",
    "SweepParams",
    "XYHamiltonian",
    "assign_effective_couplings",
    "bond_break_scan",
    "coupling",
    "coupling_list",
    "d_eff",
    "decimate_step",
    "evolve",
    "f_paired",
    "f_unpaired",
    "g_of_lm",
    "ground_state",
    "identify_pairs",
    "init_q",
    "log_omega_grid",
    "lz_fit",
    "no_rg_unpaired",
    "optimize_f_paired",
    "p_inc",
    "rdm2",
    "run_flow",
    "run_joint_flow",
    "run_no_rg",
    "run_rsrg",
    "sample_chain",
    "singlet_fraction",
    "step_flow",
    "sw_coupling",
    "unpaired_fraction",
    "xy_hamiltonian_for_chain",
]
