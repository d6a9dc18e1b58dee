"""Embedding of the non-unitary spin-1 projector into a 3-qubit unitary.

The two-qubit symmetrization projector

    P = |00><00| + |T0><T0| + |11><11|,   |T0> = (|01> + |10>)/sqrt(2)

is not unitary, so it cannot be run as a gate.  Adding one ancilla lifts it
into the 8x8 block unitary

    U = [[P, Q],
         [Q, P]],      Q = I - P  (the singlet projector),

whose action on |0>_anc x |phi> leaves P|phi> on the ancilla-0 branch and
Q|phi> on the ancilla-1 branch: post-selecting the ancilla on 0 implements P.
Here the ancilla is the *first* qubit of the three-qubit block, i.e. the most
significant bit of the 8x8 matrix index.

Two independent constructions are provided: the closed-form block matrix
above, and a QR completion of the non-square array [[P], [Q]] padded with
identity columns.  They must agree to high precision; tests enforce this.
"""

from __future__ import annotations

import numpy as np

UNITARY_ATOL = 1e-12


def spin1_projector() -> np.ndarray:
    """4x4 projector onto the two-qubit triplet (spin-1) subspace."""
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def singlet_projector() -> np.ndarray:
    """4x4 complement Q = I - P, projecting onto the singlet."""
    return np.eye(4) - spin1_projector()


def complement_sqrt(p: np.ndarray) -> np.ndarray:
    """Hermitian square root of I - P^dag P for a contraction P.

    For a projector this is simply its complement; defined generally so the
    construction extends to any block one may want to embed.
    """
    p = np.asarray(p, dtype=np.complex128)
    gram = np.eye(p.shape[1]) - p.conj().T @ p
    vals, vecs = np.linalg.eigh(gram)
    if np.min(vals) < -1e-10:
        raise ValueError(
            f"I - P^dag P has negative eigenvalue {np.min(vals):.3e}; "
            "input is not a contraction"
        )
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def embedded_unitary_direct() -> np.ndarray:
    """Closed-form 8x8 embedding [[P, Q], [Q, P]]."""
    p = spin1_projector()
    q = singlet_projector()
    return np.block([[p, q], [q, p]])


def embedded_unitary_qr() -> np.ndarray:
    """8x8 embedding via QR completion of the stacked [[P], [Q]] columns.

    The first four columns of the target unitary must be (P, Q) stacked; the
    remaining four are found by orthonormalizing identity padding.  Column
    signs are fixed so diag(R) >= 0, which makes the output deterministic and
    reproduces the closed form exactly.
    """
    p = spin1_projector()
    q = singlet_projector()
    stacked = np.block([[p, np.eye(4)], [q, np.eye(4)]])
    qf, r = np.linalg.qr(stacked)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    u = qf * signs
    _assert_unitary(u)
    return u


def _assert_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> None:
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > atol:
        raise ValueError(f"matrix deviates from unitarity by {err:.3e}")


def embedded_unitary(method: str = "direct") -> np.ndarray:
    """The projector-embedding unitary; ``method`` in {'direct', 'qr'}."""
    if method == "direct":
        u = embedded_unitary_direct()
        _assert_unitary(u)
        return u
    if method == "qr":
        return embedded_unitary_qr()
    raise ValueError(f"unknown embedding method {method!r}")
