"""Walk through the exact AKLT state: MPS amplitudes, qubit encoding, and
the circuit that prepares it.

The chain of checks here is the backbone of the whole package: a hand-rolled
matrix-product-state contraction gives exact amplitudes, those amplitudes map
onto qubit pairs, and the preparation circuit must land on the same vector.
"""

import numpy as np

from vbsprep import mps_oracle, prep_pipeline, qcore

print("=== spin-1 site matrices ===")
mps = mps_oracle.aklt_mps("obc")
for sym, mat in zip(mps_oracle.SYMBOLS,
                    (mps.a_plus, mps.a_zero, mps.a_minus)):
    print(f"A[{sym}] =\n{mat}")

print("\n=== L=2 open-chain spin amplitudes ===")
for sigma in (("O", "+"), ("+", "O"), ("+", "-"), ("O", "O")):
    amp = mps_oracle.amplitude(mps, sigma)
    print(f"  <{''.join(sigma):>3}|psi> = {amp:+.6f}")

print("\n=== qubit encoding (two qubits per site, 0 = up) ===")
dist = mps_oracle.qubit_distribution(mps, 2)
for key in sorted(dist):
    print(f"  P({key}) = {dist[key]:.6f}")
print("Four strings at exactly 1/4 each: one spin flipped per chain.")

print("\n=== circuit vs oracle, L = 2..4, both boundaries ===")
for boundary in ("obc", "pbc"):
    for sites in (2, 3, 4):
        cfg = prep_pipeline.PrepConfig(sites=sites, boundary=boundary)
        state, success = prep_pipeline.project_ancillas(
            prep_pipeline.run_noiseless(cfg), sites)
        oracle = mps_oracle.brute_force_statevector(
            mps_oracle.aklt_mps(boundary), sites)
        diff = np.max(np.abs(state.amps - oracle.amps))
        print(f"  {boundary} L={sites}: max amplitude diff = {diff:.2e}, "
              f"post-selection success = {success:.4f}")

print("\nThe prepared state matches the contraction to machine precision.")
