"""Exact matrix-product-state oracle for the spin-1 AKLT / VBS chain.

The target state is defined by the bond-dimension-2 MPS

    A(+) = +sqrt(2/3) tau_plus
    A(0) = -sqrt(1/3) tau_z
    A(-) = -sqrt(2/3) tau_minus

with open-chain boundary vectors b_l = (1, 0)^T, b_r = (0, 1)^T, or a trace
for the periodic chain.  Site symbols are written '+', 'O', '-'.

Each spin-1 site is realized on two qubits in the symmetric (triplet)
subspace: ``+ -> |00>``, ``O -> (|01> + |10>)/sqrt(2)``, ``- -> |11>``
(remember '0' = up).  ``qubit_distribution`` and ``brute_force_statevector``
expand the 3^L spin configurations into this 2L-qubit register; they are
independent of the circuit simulator and serve as the verification oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .qcore import StateVector, bitstring_to_index

SQ23 = np.sqrt(2.0 / 3.0)
SQ13 = np.sqrt(1.0 / 3.0)

_A_PLUS = SQ23 * np.array([[0.0, 1.0], [0.0, 0.0]])
_A_ZERO = -SQ13 * np.array([[1.0, 0.0], [0.0, -1.0]])
_A_MINUS = -SQ23 * np.array([[0.0, 0.0], [1.0, 0.0]])

SYMBOLS = ("+", "O", "-")

# two-qubit expansion of each spin-1 triplet basis state
_SYMBOL_BITS = {
    "+": (("00", 1.0),),
    "O": (("01", 1.0 / np.sqrt(2.0)), ("10", 1.0 / np.sqrt(2.0))),
    "-": (("11", 1.0),),
}


@dataclass
class MpsAklt:
    """AKLT MPS data: the three site matrices plus boundary handling."""

    boundary: str
    a_plus: np.ndarray = field(default_factory=lambda: _A_PLUS.copy())
    a_zero: np.ndarray = field(default_factory=lambda: _A_ZERO.copy())
    a_minus: np.ndarray = field(default_factory=lambda: _A_MINUS.copy())
    b_left: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    b_right: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def __post_init__(self):
        if self.boundary not in ("obc", "pbc"):
            raise ValueError("boundary must be 'obc' or 'pbc'")

    def site_matrix(self, symbol: str) -> np.ndarray:
        try:
            return {"+": self.a_plus, "O": self.a_zero, "-": self.a_minus}[symbol]
        except KeyError:
            raise ValueError(f"unknown spin-1 symbol {symbol!r}") from None


def aklt_mps(boundary: str = "obc") -> MpsAklt:
    return MpsAklt(boundary)


def amplitude(mps: MpsAklt, sigma) -> float:
    """Unnormalized amplitude of one spin-1 configuration.

    ``sigma`` is a sequence of symbols from ``SYMBOLS``; OBC contracts the
    matrix product between the boundary vectors, PBC takes the trace.
    """
    if len(sigma) < 1:
        raise ValueError("configuration must have at least one site")
    m = np.eye(2)
    for s in sigma:
        m = m @ mps.site_matrix(s)
    if mps.boundary == "obc":
        return float(mps.b_left @ m @ mps.b_right)
    return float(np.trace(m))


def _spin_amplitudes(mps: MpsAklt, num_sites: int) -> dict[tuple, float]:
    """All nonzero unnormalized spin-1 amplitudes for an L-site chain."""
    out = {}
    for sigma in itertools.product(SYMBOLS, repeat=num_sites):
        a = amplitude(mps, sigma)
        if a != 0.0:
            out[sigma] = a
    if not out:
        raise ValueError("MPS has no support; check site matrices")
    return out


def brute_force_statevector(mps: MpsAklt, num_sites: int) -> StateVector:
    """Normalized 2L-qubit statevector by expanding every spin configuration.

    Exponential in L by design; intended as an oracle for small chains.
    """
    if not 1 <= num_sites <= 12:
        raise ValueError("brute-force oracle supports 1 <= L <= 12")
    n = 2 * num_sites
    amps = np.zeros(2**n, dtype=np.complex128)
    for sigma, a in _spin_amplitudes(mps, num_sites).items():
        # expand each site's symbol into its two-qubit bit pattern
        for combo in itertools.product(*(_SYMBOL_BITS[s] for s in sigma)):
            bits = "".join(b for b, _ in combo)
            w = 1.0
            for _, c in combo:
                w *= c
            amps[bitstring_to_index(bits)] += a * w
    norm = np.linalg.norm(amps)
    return StateVector(n, amps / norm)


def qubit_distribution(mps: MpsAklt, num_sites: int) -> dict[str, float]:
    """Exact measurement distribution over 2L-qubit bitstrings.

    Only strings with nonzero probability appear; values sum to 1.
    """
    state = brute_force_statevector(mps, num_sites)
    probs = state.probabilities()
    out = {}
    for i, p in enumerate(probs):
        if p > 0.0:
            bits = format(i, "b").zfill(2 * num_sites)[::-1]
            out[bits] = float(p)
    return out
