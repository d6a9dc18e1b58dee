"""vbsprep: simulate and variationally recompile valence-bond-solid state preparation."""

__version__ = "0.1.0"

from .qcore import (  # noqa: F401
    BIT_ORDER,
    Circuit,
    GateOp,
    ShotCounts,
    StateVector,
    apply_circuit,
    apply_gate,
    basis_state,
    distribution,
    sample,
    u3_matrix,
    zero_state,
)
from .errors import CalibrationError, EmptyResultError, InvalidStateError  # noqa: F401
