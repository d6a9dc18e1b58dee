"""Embed the non-unitary spin-1 projector into a 3-qubit unitary.

The projector P onto a site's triplet subspace cannot be run directly on a
circuit, so it is placed in the upper-left block of a unitary that acts on
the two physical qubits plus one ancilla.  Measuring the ancilla in |0>
applies P; the |1> branch carries the complement Q = I - P.
"""

import numpy as np

from vbsprep import embedding, qcore

p = embedding.spin1_projector()
q = np.eye(4) - p
print("=== projector onto the two-qubit triplet subspace ===")
print(p)
print(f"\nP^2 = P: {np.max(np.abs(p @ p - p)):.1e}"
      f"   rank (trace) = {np.trace(p):.0f}")

print("\n=== block embedding U = [[P, Q], [Q, P]] ===")
u_direct = embedding.embedded_unitary("direct")
u_qr = embedding.embedded_unitary("qr")
print(f"direct unitarity defect: "
      f"{np.max(np.abs(u_direct.conj().T @ u_direct - np.eye(8))):.1e}")
print(f"qr completion vs direct: {np.max(np.abs(u_qr - u_direct)):.1e}")
print("The QR route rebuilds the same matrix from scratch, so agreement at")
print("machine precision cross-validates the closed-form block structure.")

print("\n=== branch identity on a random state ===")
rng = np.random.default_rng(1)
v = rng.normal(size=4) + 1j * rng.normal(size=4)
v /= np.linalg.norm(v)
# ancilla is the first block qubit (most significant bit): |0>(x)|v>
inp = np.concatenate([v, np.zeros(4)])
out = u_direct @ inp
print(f"|0> branch == P|v>: {np.max(np.abs(out[:4] - p @ v)):.1e}")
print(f"|1> branch == Q|v>: {np.max(np.abs(out[4:] - q @ v)):.1e}")
print(f"branch weights sum to 1: "
      f"{abs(np.linalg.norm(out[:4])**2 + np.linalg.norm(out[4:])**2 - 1):.1e}")
