"""Dense statevector simulator core.

Conventions used throughout the package:

* A register of ``n`` qubits is a complex vector of length ``2**n``.
* Qubit ``q`` is bit ``q`` of the integer basis index: ``bit = (i >> q) & 1``,
  i.e. qubit 0 is the least significant bit.
* Bitstrings are written with qubit 0 leftmost, and ``'0'`` denotes spin-up
  (``|0> == |up>``).  Every serialized histogram carries this convention as
  the tag ``BIT_ORDER``.
* Multi-qubit gate matrices index their local basis with the *first listed*
  qubit as the most significant bit, so ``CX_MAT`` on qubits ``(c, t)`` reads
  ``index = 2*bit(c) + bit(t)``.

Gates are applied by reshaping the amplitude vector into a rank-``n`` tensor
and contracting the gate against the addressed axes; no ``2**n x 2**n``
operator is ever materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidStateError

BIT_ORDER = "q0-leftmost,0=up"

NORM_ATOL = 1e-10
UNITARY_ATOL = 1e-10

# fixed 2x2 / 4x4 gate matrices
X_MAT = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
H_MAT = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0)
CX_MAT = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
    ],
    dtype=np.complex128,
)

PAULI_1Q = (
    np.eye(2, dtype=np.complex128),
    X_MAT,
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128),
)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """General single-qubit rotation.

    ``u3(theta, phi, lam) = [[cos(t/2), -e^{i lam} sin(t/2)],
    [e^{i phi} sin(t/2), e^{i(phi+lam)} cos(t/2)]]`` so that
    ``u3(pi, 0, pi) = X`` and ``u3(pi/2, 0, pi) = H``.
    """
    if not (np.isfinite(theta) and np.isfinite(phi) and np.isfinite(lam)):
        raise ValueError("u3 angles must be finite")
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=np.complex128,
    )


def bitstring_to_index(bits: str) -> int:
    """Map a q0-leftmost bitstring to its basis index."""
    i = 0
    for q, ch in enumerate(bits):
        if ch == "1":
            i |= 1 << q
        elif ch != "0":
            raise ValueError(f"invalid bitstring character {ch!r}")
    return i


def index_to_bitstring(i: int, num_qubits: int) -> str:
    """Map a basis index to its q0-leftmost bitstring."""
    return "".join("1" if (i >> q) & 1 else "0" for q in range(num_qubits))


@dataclass
class StateVector:
    """Normalized pure state on ``num_qubits`` qubits."""

    num_qubits: int
    amps: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (2**self.num_qubits,):
            raise InvalidStateError(
                f"amplitude vector has shape {self.amps.shape}, expected "
                f"({2**self.num_qubits},)"
            )
        if not np.all(np.isfinite(self.amps.view(np.float64))):
            raise InvalidStateError("non-finite amplitude")
        if self.normalized and abs(self.norm_sq() - 1.0) > NORM_ATOL:
            raise InvalidStateError(
                f"state marked normalized but |psi|^2 = {self.norm_sq()!r}"
            )

    def norm_sq(self) -> float:
        return float(np.real(np.vdot(self.amps, self.amps)))

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amps) ** 2
        return p / p.sum()

    def amplitude(self, bits: str) -> complex:
        if len(bits) != self.num_qubits:
            raise ValueError("bitstring length mismatch")
        return complex(self.amps[bitstring_to_index(bits)])


def zero_state(num_qubits: int) -> StateVector:
    """|up...up> = |00...0>."""
    if num_qubits < 1:
        raise ValueError("need at least one qubit")
    amps = np.zeros(2**num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def basis_state(bits: str) -> StateVector:
    amps = np.zeros(2 ** len(bits), dtype=np.complex128)
    amps[bitstring_to_index(bits)] = 1.0
    return StateVector(len(bits), amps)


_GATE_KINDS = ("X", "H", "CX", "U3", "U8")


@dataclass
class GateOp:
    """One gate: kind in {X, H, CX, U3, U8} acting on ``qubits``.

    ``params`` carries (theta, phi, lam) for U3; ``matrix`` carries the
    explicit 8x8 unitary for U8.
    """

    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    matrix: np.ndarray | None = None

    def __post_init__(self):
        self.qubits = tuple(int(q) for q in self.qubits)
        if self.kind not in _GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = {"X": 1, "H": 1, "U3": 1, "CX": 2, "U8": 3}[self.kind]
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s)")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("repeated qubit in gate")
        if any(q < 0 for q in self.qubits):
            raise ValueError("negative qubit index")
        if self.kind == "U3":
            if len(self.params) != 3:
                raise ValueError("U3 needs (theta, phi, lam)")
            if not all(np.isfinite(p) for p in self.params):
                raise ValueError("non-finite U3 angle")
        if self.kind == "U8":
            m = np.asarray(self.matrix, dtype=np.complex128)
            if m.shape != (8, 8):
                raise ValueError("U8 matrix must be 8x8")
            if np.max(np.abs(m.conj().T @ m - np.eye(8))) > UNITARY_ATOL:
                raise ValueError("U8 matrix is not unitary")
            self.matrix = m

    def resolve_matrix(self) -> np.ndarray:
        if self.kind == "X":
            return X_MAT
        if self.kind == "H":
            return H_MAT
        if self.kind == "CX":
            return CX_MAT
        if self.kind == "U3":
            return u3_matrix(*self.params)
        return self.matrix


@dataclass
class Circuit:
    """Ordered gate list over a fixed-width register."""

    num_qubits: int
    ops: list[GateOp] = field(default_factory=list)

    def _check(self, op: GateOp) -> GateOp:
        if max(op.qubits) >= self.num_qubits:
            raise ValueError(
                f"gate on qubit {max(op.qubits)} exceeds register width "
                f"{self.num_qubits}"
            )
        return op

    def append(self, op: GateOp) -> None:
        self.ops.append(self._check(op))

    # fluent builders
    def x(self, q: int) -> "Circuit":
        self.append(GateOp("X", (q,)))
        return self

    def h(self, q: int) -> "Circuit":
        self.append(GateOp("H", (q,)))
        return self

    def cx(self, control: int, target: int) -> "Circuit":
        self.append(GateOp("CX", (control, target)))
        return self

    def u3(self, q: int, theta: float, phi: float, lam: float) -> "Circuit":
        self.append(GateOp("U3", (q,), (float(theta), float(phi), float(lam))))
        return self

    def u8(self, qubits: Sequence[int], matrix: np.ndarray) -> "Circuit":
        self.append(GateOp("U8", tuple(qubits), matrix=matrix))
        return self

    def extend(self, ops: Iterable[GateOp]) -> "Circuit":
        for op in ops:
            self.append(op)
        return self

    def cx_count(self) -> int:
        return sum(1 for op in self.ops if op.kind == "CX")

    def __len__(self) -> int:
        return len(self.ops)


def _apply_matrix(amps: np.ndarray, mat: np.ndarray, qubits: Sequence[int],
                  num_qubits: int) -> np.ndarray:
    """Contract a 2^k x 2^k gate into the amplitude tensor; returns a new array."""
    k = len(qubits)
    psi = amps.reshape((2,) * num_qubits)
    gate = mat.reshape((2,) * (2 * k))
    axes = [num_qubits - 1 - q for q in qubits]
    out = np.tensordot(gate, psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return np.ascontiguousarray(out).reshape(-1)


def apply_gate(state: StateVector, op: GateOp) -> StateVector:
    """Apply one gate, returning a new StateVector."""
    if max(op.qubits) >= state.num_qubits:
        raise ValueError("gate qubit out of range")
    amps = _apply_matrix(state.amps, op.resolve_matrix(), op.qubits,
                         state.num_qubits)
    return StateVector(state.num_qubits, amps, normalized=state.normalized)


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    """Run every gate of ``circuit`` in order."""
    if circuit.num_qubits != state.num_qubits:
        raise ValueError("circuit and state widths differ")
    amps = state.amps
    for op in circuit.ops:
        amps = _apply_matrix(amps, op.resolve_matrix(), op.qubits,
                             state.num_qubits)
    return StateVector(state.num_qubits, amps, normalized=state.normalized)


def distribution(state: StateVector) -> np.ndarray:
    """Measurement distribution over all 2^n basis indices."""
    return state.probabilities()


@dataclass
class ShotCounts:
    """Histogram of measured bitstrings (q0-leftmost, 0 = up)."""

    num_qubits: int
    shots: int
    counts: dict[str, int]
    stage: str = "raw"
    bit_order: str = BIT_ORDER
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.counts.values())
        if total > self.shots:
            raise ValueError("histogram total exceeds shot count")
        for b in self.counts:
            if len(b) != self.num_qubits:
                raise ValueError(f"bitstring {b!r} has wrong width")

    def total(self) -> int:
        return sum(self.counts.values())


def sample(state: StateVector, shots: int, seed: int) -> ShotCounts:
    """Draw ``shots`` measurement outcomes (multinomial, seeded)."""
    if shots < 1:
        raise ValueError("shots must be positive")
    if not state.normalized and abs(state.norm_sq() - 1.0) > NORM_ATOL:
        raise InvalidStateError("cannot sample an unnormalized state")
    rng = np.random.default_rng(seed)
    hits = rng.multinomial(shots, state.probabilities())
    counts = {
        index_to_bitstring(i, state.num_qubits): int(c)
        for i, c in enumerate(hits)
        if c
    }
    return ShotCounts(state.num_qubits, shots, counts, meta={"seed": seed})
