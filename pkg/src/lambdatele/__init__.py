"""State-vector simulation of cavity-QED EPR preparation and atomic teleportation."""

from .errors import (
    CapacityError,
    DomainError,
    ModelMismatchError,
    PostSelectionError,
    ShapeError,
    SimulationError,
    TruncationError,
    TruncationWarning,
    UnsupportedOperationError,
)
from .fockspace import (
    Atom2,
    Atom3,
    CavityMode,
    CompositeState,
    PhysicalParams,
    atom_state,
    coherent_state,
    default_n_max,
    even_odd_state,
    fidelity,
    fock_state,
    tail_mass,
    tensor,
)
from .protocols import (
    BellVariant,
    TeleportConfig,
    bell_basis,
    prepare_epr,
    probe_pulse_heuristic,
    probe_pulse_optimize,
    teleport,
)

__version__ = "0.1.0"
