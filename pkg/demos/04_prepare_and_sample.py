"""Sample the preparation circuit and post-select, stage by stage.

Raw histograms cover all 3L bits.  Stage one keeps shots whose ancillas all
read 0 (the projector branches succeeded) and drops those bits; stage two
enforces the up-spin count fixed by the state's symmetry.  What survives is
compared against the exact distribution.
"""

from vbsprep import analysis, prep_pipeline, qcore

SITES, SHOTS = 3, 32000
cfg = prep_pipeline.PrepConfig(sites=SITES, boundary="obc", shots=SHOTS,
                               seed=7)

raw = prep_pipeline.run_shots(cfg)
print(f"raw: {raw.num_qubits} bits, {len(raw.counts)} distinct strings, "
      f"{raw.total()} shots")

anc = prep_pipeline.postselect_ancilla(raw, SITES)
print(f"after ancilla stage: {anc.num_qubits} bits, "
      f"{anc.total()} shots survive")

fin = prep_pipeline.postselect_conserved(anc, SITES, cfg.boundary)
ups = prep_pipeline.expected_up_count(SITES, cfg.boundary)
print(f"after up-count stage (exactly {ups} zeros): {fin.total()} survive")

_, success = prep_pipeline.project_ancillas(
    prep_pipeline.run_noiseless(cfg), SITES)
print(f"\nsurvivor fraction {fin.total() / SHOTS:.4f} "
      f"vs exact success probability {success:.4f}")

print("\n=== post-selected distribution vs oracle ===")
golden = analysis.oracle_distribution(SITES, cfg.boundary)
empirical = analysis.counts_to_distribution(fin)
rows = sorted(golden.probs, key=golden.get, reverse=True)
print(f"{'string':>8} {'exact':>9} {'measured':>9}")
for key in rows:
    print(f"{key:>8} {golden.get(key):9.5f} {empirical.get(key):9.5f}")
fid = analysis.hellinger_fidelity(empirical, golden)
print(f"\nHellinger fidelity = {fid:.5f}")
print("The dominant string is the alternating up-down-down-up pattern at")
print("weight 4/7; the twelve others share the rest at 1/28 each.")
