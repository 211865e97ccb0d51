"""Discrete Schrodinger potentials with prescribed embedded eigenvalues.

The package builds half-line potentials ``V(n) = O(1)/(1+n)`` for which a
given list of energies in ``(-2, 2)``, resonant pairs ``E, -E`` included,
are eigenvalues with given boundary angles, and checks the result with
independent tools.
"""

from .averaging import BlockChoice, choose_block_length
from .errors import EmbeddedError
from .generator import GeneratorParams, generate_pair, generate_single, block_diagnostics
from .gluer import Envelope, GluingPlan, GluedResult, boundary_thread, build, plan, replay_traces
from .model import (
    BoundaryAngle,
    EnergyPoint,
    PieceKind,
    Potential,
    PotentialPiece,
    PruferState,
    SolutionTrace,
    make_energy_point,
    read_potential,
    resonance_classes,
    write_potential,
)
from .prufer import (
    SolutionPair,
    boundary_to_prufer,
    prufer_step,
    prufer_to_solution,
    solution_to_prufer,
    transfer_step,
)
from .verify import decay_exponent, l2_report, oscillatory_sum, truncated_spectrum

__all__ = [
    "BlockChoice", "BoundaryAngle", "EmbeddedError", "EnergyPoint", "Envelope",
    "GeneratorParams", "GluedResult", "GluingPlan", "PieceKind", "Potential",
    "PotentialPiece", "PruferState", "SolutionPair", "SolutionTrace",
    "block_diagnostics", "boundary_thread", "boundary_to_prufer", "build",
    "choose_block_length", "decay_exponent", "generate_pair", "generate_single",
    "l2_report", "make_energy_point", "oscillatory_sum", "plan", "prufer_step",
    "prufer_to_solution", "read_potential", "replay_traces", "resonance_classes",
    "solution_to_prufer", "transfer_step", "truncated_spectrum", "write_potential",
]
