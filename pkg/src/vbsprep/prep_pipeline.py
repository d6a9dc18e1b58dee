"""Valence-bond-solid preparation circuit, noise model, and post-selection.

Register layout for an L-site chain (3L qubits): the block for site j is the
triple ``(3j, 3j+1, 3j+2)`` with the ancilla at ``3j`` and the two physical
spin-1/2 qubits at ``3j+1`` and ``3j+2``.  Stage 1 entangles neighboring
sites into singlets — the five-gate sequence ``X,H,X`` on ``3j+2``,
``CX(3j+2 -> 3j+4)``, ``X`` on ``3j+2`` — leaving the open-chain boundary
qubits 1 and 3L-1 as |up>.  Periodic chains place L singlets on a ring, the
last one pairing qubit 3L-1 with qubit 1.  Stage 2 applies the 3-qubit
projector-embedding unitary on every block (exact 8x8, its QR twin, or the
recompiled ansatz).

Measured histograms pass two post-selection stages: keep shots whose ancilla
bits all read 0 (dropping those bits), then keep strings whose up-spin count
matches the initial product state — L+1 ups for OBC, L for PBC.

Noise is modeled by stochastic Pauli trajectories: after each CX (resp.
single-qubit gate) a uniformly random non-identity two-qubit (resp. one-
qubit) Pauli is inserted with the configured probability, and measured bits
are flipped per the readout confusion probabilities.  Each shot draws its
randomness from ``default_rng([seed, shot_index])``, so results do not
depend on how trajectories are batched or parallelized; shots sharing an
error pattern share one statevector simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qcore
from .embedding import embedded_unitary
from .errors import EmptyResultError
from .qcore import Circuit, GateOp, ShotCounts, StateVector
from .recompiler import AnsatzParams, ansatz_circuit

BOUNDARIES = ("obc", "pbc")
PROJECTOR_IMPLS = ("direct", "qr", "recompiled")

DEFAULT_CX_ERROR = 1e-2
DEFAULT_1Q_ERROR = 3e-4
DEFAULT_READOUT = (0.02, 0.02)


@dataclass
class NoiseModel:
    """Synthetic device noise: depolarizing gates plus readout flips.

    ``readout[q] = (p_flip_0to1, p_flip_1to0)`` for qubit q.
    """

    cx_depolarizing_prob: float = DEFAULT_CX_ERROR
    single_qubit_depolarizing_prob: float = DEFAULT_1Q_ERROR
    readout: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        for p in (self.cx_depolarizing_prob, self.single_qubit_depolarizing_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("depolarizing probability outside [0,1]")
        self.readout = [(float(a), float(b)) for a, b in self.readout]
        for a, b in self.readout:
            if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
                raise ValueError("readout probability outside [0,1]")

    def readout_pair(self, qubit: int) -> tuple[float, float]:
        if not self.readout:
            return (0.0, 0.0)
        if len(self.readout) == 1:
            return self.readout[0]
        return self.readout[qubit]

    def to_dict(self) -> dict:
        return {
            "cx_depolarizing_prob": self.cx_depolarizing_prob,
            "single_qubit_depolarizing_prob": self.single_qubit_depolarizing_prob,
            "readout": [list(p) for p in self.readout],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        readout = d.get("readout", [])
        if readout and not isinstance(readout[0], (list, tuple)):
            readout = [tuple(readout)]
        return cls(
            cx_depolarizing_prob=float(d.get("cx_depolarizing_prob", 0.0)),
            single_qubit_depolarizing_prob=float(
                d.get("single_qubit_depolarizing_prob", 0.0)
            ),
            readout=[tuple(p) for p in readout],
        )


def default_noise_model(num_qubits: int) -> NoiseModel:
    """Order-of-magnitude stand-in for reported device error rates."""
    return NoiseModel(
        cx_depolarizing_prob=DEFAULT_CX_ERROR,
        single_qubit_depolarizing_prob=DEFAULT_1Q_ERROR,
        readout=[DEFAULT_READOUT] * num_qubits,
    )


@dataclass
class PrepConfig:
    sites: int
    boundary: str = "obc"
    projector_impl: str = "direct"
    params: AnsatzParams | None = None
    shots: int = 1024
    seed: int = 0
    noise: NoiseModel | None = None

    def __post_init__(self):
        if self.sites < 2:
            raise ValueError("need at least 2 sites")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if self.projector_impl not in PROJECTOR_IMPLS:
            raise ValueError(f"projector_impl must be one of {PROJECTOR_IMPLS}")
        if self.projector_impl == "recompiled" and self.params is None:
            raise ValueError("recompiled projector needs ansatz params")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    @property
    def num_qubits(self) -> int:
        return 3 * self.sites


def expected_up_count(num_sites: int, boundary: str) -> int:
    """Up-spins in the post-selected 2L-bit register: L+1 (OBC) or L (PBC)."""
    return num_sites + 1 if boundary == "obc" else num_sites


def _singlet_ops(a: int, b: int) -> list[GateOp]:
    # (|up,down> - |down,up>)/sqrt(2) on (a, b)
    return [
        GateOp("X", (a,)),
        GateOp("H", (a,)),
        GateOp("X", (a,)),
        GateOp("CX", (a, b)),
        GateOp("X", (a,)),
    ]


def singlet_init_circuit(num_sites: int, boundary: str) -> Circuit:
    """Stage 1 of the preparation: the valence-bond singlet layer."""
    if num_sites < 2:
        raise ValueError("need at least 2 sites")
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}")
    circ = Circuit(3 * num_sites)
    for j in range(num_sites - 1):
        circ.extend(_singlet_ops(3 * j + 2, 3 * j + 4))
    if boundary == "pbc":
        circ.extend(_singlet_ops(3 * num_sites - 1, 1))
    return circ


def _projector_block_ops(cfg: PrepConfig, site: int) -> list[GateOp]:
    base = 3 * site
    triple = (base, base + 1, base + 2)
    if cfg.projector_impl == "recompiled":
        block = ansatz_circuit(cfg.params)
        return [
            GateOp(op.kind, tuple(base + q for q in op.qubits), op.params,
                   op.matrix)
            for op in block.ops
        ]
    return [GateOp("U8", triple, matrix=embedded_unitary(cfg.projector_impl))]


def build_prep_circuit(cfg: PrepConfig) -> Circuit:
    """Full preparation circuit: singlet layer, then a projector per site."""
    circ = singlet_init_circuit(cfg.sites, cfg.boundary)
    for j in range(cfg.sites):
        circ.extend(_projector_block_ops(cfg, j))
    return circ


def run_noiseless(cfg: PrepConfig) -> StateVector:
    """Exact 3L-qubit statevector of the preparation circuit on |up...up>."""
    return qcore.apply_circuit(qcore.zero_state(cfg.num_qubits),
                               build_prep_circuit(cfg))


def project_ancillas(state: StateVector, num_sites: int):
    """Post-select every ancilla on |up> and drop it from the register.

    Returns ``(physical_state, success_probability)`` where the 2L-qubit
    state is renormalized and the probability is the discarded branch weight.
    """
    n = 3 * num_sites
    if state.num_qubits != n:
        raise ValueError(f"expected a {n}-qubit state")
    psi = state.amps.reshape((2,) * n)
    # axis of qubit q is n-1-q; ancillas sit at qubits 0, 3, ..., 3(L-1)
    index = tuple(
        0 if (n - 1 - ax) % 3 == 0 else slice(None) for ax in range(n)
    )
    kept = np.ascontiguousarray(psi[index]).reshape(-1)
    success = float(np.real(np.vdot(kept, kept)))
    if success == 0.0:
        raise EmptyResultError("ancilla projection removed all amplitude")
    return StateVector(2 * num_sites, kept / np.sqrt(success)), success


# ---------------------------------------------------------------------------
# shot sampling

def _local_embed(mat: np.ndarray, op_qubits: Sequence[int],
                 unit_qubits: Sequence[int]) -> np.ndarray:
    """Embed a gate into the 2^k space of a unit (first unit qubit = MSB)."""
    k = len(unit_qubits)
    local = {q: k - 1 - i for i, q in enumerate(unit_qubits)}
    dim = 2**k
    u = np.empty((dim, dim), dtype=np.complex128)
    targets = tuple(local[q] for q in op_qubits)
    for col in range(dim):
        amps = np.zeros(dim, dtype=np.complex128)
        amps[col] = 1.0
        u[:, col] = qcore._apply_matrix(amps, mat, targets, k)
    return u


@dataclass
class _Unit:
    """Maximal run of consecutive gates confined to <= 3 qubits."""

    qubits: tuple[int, ...]       # ascending; first = MSB of the matrices
    cums: list[np.ndarray]        # cums[m] = product of the first m gates
    gate_qubits: list[tuple[int, ...]]

    @property
    def net(self) -> np.ndarray:
        return self.cums[-1]


def _compile_units(circuit: Circuit) -> tuple[list[_Unit], list[tuple]]:
    """Group gates into units and enumerate noise sites.

    A noise site is ``(unit_index, gate_position, kind, qubits)`` with kind
    1 or 2 (qubit count of the inserted Pauli); sites are ordered exactly as
    the gates they follow.
    """
    groups: list[list[GateOp]] = []
    active: list[GateOp] = []
    active_qubits: set[int] = set()
    for op in circuit.ops:
        merged = active_qubits | set(op.qubits)
        if active and len(merged) > 3:
            groups.append(active)
            active, active_qubits = [], set()
            merged = set(op.qubits)
        active.append(op)
        active_qubits = merged
    if active:
        groups.append(active)

    units: list[_Unit] = []
    sites: list[tuple] = []
    for ops in groups:
        qubits = tuple(sorted({q for op in ops for q in op.qubits}))
        dim = 2 ** len(qubits)
        cums = [np.eye(dim, dtype=np.complex128)]
        gate_qubits = []
        for pos, op in enumerate(ops):
            g = _local_embed(op.resolve_matrix(), op.qubits, qubits)
            cums.append(g @ cums[-1])
            gate_qubits.append(op.qubits)
            if op.kind == "CX":
                sites.append((len(units), pos, 2, op.qubits))
            elif op.kind in ("X", "H", "U3"):
                sites.append((len(units), pos, 1, op.qubits))
        units.append(_Unit(qubits, cums, gate_qubits))
    return units, sites


def _apply_unit(amps: np.ndarray, unit: _Unit, n: int,
                errors: list[tuple[int, int]]) -> np.ndarray:
    """Apply one unit, inserting Pauli codes after the flagged gate positions."""
    if not errors:
        return qcore._apply_matrix(amps, unit.net, unit.qubits, n)
    prev = None
    for pos, code in errors:
        seg = unit.cums[pos + 1] if prev is None else (
            unit.cums[pos + 1] @ unit.cums[prev + 1].conj().T
        )
        amps = qcore._apply_matrix(amps, seg, unit.qubits, n)
        gq = unit.gate_qubits[pos]
        if len(gq) == 1:
            amps = qcore._apply_matrix(amps, qcore.PAULI_1Q[code], gq, n)
        else:
            c, t = gq
            amps = qcore._apply_matrix(amps, qcore.PAULI_1Q[code // 4], (c,), n)
            amps = qcore._apply_matrix(amps, qcore.PAULI_1Q[code % 4], (t,), n)
        prev = pos
    tail = unit.cums[-1] @ unit.cums[prev + 1].conj().T
    return qcore._apply_matrix(amps, tail, unit.qubits, n)


def _sample_trajectories(cfg: PrepConfig) -> dict[str, int]:
    noise = cfg.noise
    n = cfg.num_qubits
    circuit = build_prep_circuit(cfg)
    units, sites = _compile_units(circuit)
    p_site = np.array([
        noise.cx_depolarizing_prob if kind == 2
        else noise.single_qubit_depolarizing_prob
        for (_, _, kind, _) in sites
    ])
    p01 = np.array([noise.readout_pair(q)[0] for q in range(n)])
    p10 = np.array([noise.readout_pair(q)[1] for q in range(n)])

    # draw all per-shot randomness up front, keyed by error pattern
    patterns: dict[tuple, list[int]] = {}
    u_meas = np.empty(cfg.shots)
    u_read = np.empty((cfg.shots, n))
    for shot in range(cfg.shots):
        rng = np.random.default_rng([cfg.seed, shot])
        hits = np.flatnonzero(rng.random(len(sites)) < p_site)
        pattern = tuple(
            (int(s), int(rng.integers(1, 4 if sites[s][2] == 1 else 16)))
            for s in hits
        )
        u_meas[shot] = rng.random()
        u_read[shot] = rng.random(n)
        patterns.setdefault(pattern, []).append(shot)

    qubit_bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    counts: dict[str, int] = {}
    for pattern, members in patterns.items():
        amps = qcore.zero_state(n).amps
        by_unit: dict[int, list[tuple[int, int]]] = {}
        for site_idx, code in pattern:
            unit_idx, pos, _, _ = sites[site_idx]
            by_unit.setdefault(unit_idx, []).append((pos, code))
        for ui, unit in enumerate(units):
            amps = _apply_unit(amps, unit, n, by_unit.get(ui, []))
        cdf = np.cumsum(np.abs(amps) ** 2)
        for shot in members:
            idx = min(int(np.searchsorted(cdf, u_meas[shot] * cdf[-1],
                                          side="right")), 2**n - 1)
            bits = qubit_bits[idx].copy()
            flip = np.where(bits == 0, u_read[shot] < p01, u_read[shot] < p10)
            bits ^= flip
            key = "".join("1" if b else "0" for b in bits)
            counts[key] = counts.get(key, 0) + 1
    return counts


def run_shots(cfg: PrepConfig) -> ShotCounts:
    """Measured raw histogram over all 3L bits (ancillas included).

    Without a noise model this is a seeded multinomial draw from the exact
    state; with one, per-shot Pauli trajectories plus readout flips.
    """
    meta = {"seed": cfg.seed,
            "noise": cfg.noise.to_dict() if cfg.noise else None}
    if cfg.noise is None:
        sampled = qcore.sample(run_noiseless(cfg), cfg.shots, cfg.seed)
        return ShotCounts(cfg.num_qubits, cfg.shots, sampled.counts,
                          stage="raw", meta=meta)
    counts = _sample_trajectories(cfg)
    return ShotCounts(cfg.num_qubits, cfg.shots, counts, stage="raw",
                      meta=meta)


def postselect_ancilla(counts: ShotCounts, num_sites: int) -> ShotCounts:
    """Stage 1: keep shots whose ancilla bits all read 0; drop those bits."""
    if counts.num_qubits != 3 * num_sites:
        raise ValueError("raw counts must cover all 3L bits")
    anc = range(0, 3 * num_sites, 3)
    keep_pos = [q for q in range(3 * num_sites) if q % 3 != 0]
    out: dict[str, int] = {}
    for key, c in counts.counts.items():
        if all(key[q] == "0" for q in anc):
            phys = "".join(key[q] for q in keep_pos)
            out[phys] = out.get(phys, 0) + c
    if not out:
        raise EmptyResultError("no shots survived ancilla post-selection")
    return ShotCounts(2 * num_sites, counts.shots, out, stage="ancilla",
                      meta=dict(counts.meta))


def postselect_conserved(counts: ShotCounts, num_sites: int,
                         boundary: str) -> ShotCounts:
    """Stage 2: enforce up-spin conservation on the 2L physical bits."""
    if counts.num_qubits != 2 * num_sites:
        raise ValueError("stage-2 input must cover the 2L physical bits")
    ups = expected_up_count(num_sites, boundary)
    out = {k: c for k, c in counts.counts.items() if k.count("0") == ups}
    if not out:
        raise EmptyResultError("no shots survived up-count post-selection")
    return ShotCounts(2 * num_sites, counts.shots, out, stage="conserved",
                      meta=dict(counts.meta))


def postselect(counts: ShotCounts, cfg: PrepConfig) -> ShotCounts:
    """Both post-selection stages: ancilla reads, then up-count conservation."""
    return postselect_conserved(postselect_ancilla(counts, cfg.sites),
                                cfg.sites, cfg.boundary)
