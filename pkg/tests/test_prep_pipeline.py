import numpy as np
import pytest

from vbsprep import analysis, mps_oracle, prep_pipeline as pp, qcore
from vbsprep.embedding import embedded_unitary
from vbsprep.errors import EmptyResultError

SQ2 = np.sqrt(2.0)


def _support(state: qcore.StateVector) -> set:
    p = qcore.distribution(state)
    return {qcore.index_to_bitstring(i, state.num_qubits)
            for i in np.flatnonzero(p > 1e-12)}


def test_prep_config_validation():
    pp.PrepConfig(sites=2)
    with pytest.raises(ValueError):
        pp.PrepConfig(sites=1)
    with pytest.raises(ValueError):
        pp.PrepConfig(sites=2, boundary="ring")
    with pytest.raises(ValueError):
        pp.PrepConfig(sites=2, projector_impl="magic")
    with pytest.raises(ValueError):
        pp.PrepConfig(sites=2, projector_impl="recompiled")  # params missing
    with pytest.raises(ValueError):
        pp.PrepConfig(sites=2, shots=0)
    assert pp.PrepConfig(sites=4).num_qubits == 12


def test_noise_model_validation_and_roundtrip():
    with pytest.raises(ValueError):
        pp.NoiseModel(cx_depolarizing_prob=1.5)
    with pytest.raises(ValueError):
        pp.NoiseModel(readout=[(0.1, -0.2)])
    m = pp.default_noise_model(6)
    assert m.readout_pair(5) == (0.02, 0.02)
    again = pp.NoiseModel.from_dict(m.to_dict())
    assert again == m
    # single readout pair broadcasts to every qubit
    one = pp.NoiseModel(readout=[(0.01, 0.03)])
    assert one.readout_pair(0) == one.readout_pair(7) == (0.01, 0.03)
    assert pp.NoiseModel().readout_pair(3) == (0.0, 0.0)
    flat = pp.NoiseModel.from_dict({"cx_depolarizing_prob": 0.1,
                                    "readout": [0.02, 0.05]})
    assert flat.readout == [(0.02, 0.05)]


def test_expected_up_count():
    assert pp.expected_up_count(2, "obc") == 3
    assert pp.expected_up_count(2, "pbc") == 2
    assert pp.expected_up_count(5, "obc") == 6


def test_singlet_init_state():
    """L=2 open chain: one singlet on (2,4), everything else spin-up."""
    circ = pp.singlet_init_circuit(2, "obc")
    state = qcore.apply_circuit(qcore.zero_state(6), circ)
    expect = np.zeros(64, dtype=complex)
    expect[1 << 4] = +1 / SQ2   # q2=0, q4=1
    expect[1 << 2] = -1 / SQ2   # q2=1, q4=0
    assert np.max(np.abs(state.amps - expect)) < 1e-15


def test_circuit_structure_obc():
    cfg = pp.PrepConfig(sites=3, boundary="obc")
    circ = pp.build_prep_circuit(cfg)
    assert circ.num_qubits == 9
    kinds = [(op.kind, op.qubits) for op in circ.ops]
    singlet = lambda a, b: [("X", (a,)), ("H", (a,)), ("X", (a,)),
                            ("CX", (a, b)), ("X", (a,))]
    assert kinds == (singlet(2, 4) + singlet(5, 7)
                     + [("U8", (0, 1, 2)), ("U8", (3, 4, 5)),
                        ("U8", (6, 7, 8))])
    assert circ.cx_count() == 2


def test_circuit_structure_pbc_wrap():
    circ = pp.build_prep_circuit(pp.PrepConfig(sites=2, boundary="pbc"))
    cx_ops = [op.qubits for op in circ.ops if op.kind == "CX"]
    assert cx_ops == [(2, 4), (5, 1)]
    assert circ.cx_count() == 2


def test_recompiled_circuit_cx_budget(recompiled_block):
    for L in (2, 3, 5):
        cfg = pp.PrepConfig(sites=L, projector_impl="recompiled",
                            params=recompiled_block.params)
        assert pp.build_prep_circuit(cfg).cx_count() == (L - 1) + 8 * L


@pytest.mark.parametrize("boundary", ["obc", "pbc"])
@pytest.mark.parametrize("impl", ["direct", "qr"])
@pytest.mark.parametrize("sites", [2, 3, 4])
def test_prepared_state_matches_oracle(sites, impl, boundary):
    """The projected circuit output reproduces the exact state amplitudes."""
    cfg = pp.PrepConfig(sites=sites, boundary=boundary, projector_impl=impl)
    state, _ = pp.project_ancillas(pp.run_noiseless(cfg), sites)
    oracle = mps_oracle.brute_force_statevector(
        mps_oracle.aklt_mps(boundary), sites)
    assert np.max(np.abs(state.amps - oracle.amps)) < 1e-10


def test_prepared_state_matches_oracle_l5():
    cfg = pp.PrepConfig(sites=5, boundary="obc")
    state, success = pp.project_ancillas(pp.run_noiseless(cfg), 5)
    oracle = mps_oracle.brute_force_statevector(mps_oracle.aklt_mps("obc"), 5)
    assert np.max(np.abs(state.amps - oracle.amps)) < 1e-10
    assert 0.0 < success < 1.0


def test_recompiled_state_overlap(recompiled_block):
    for sites, boundary in ((2, "obc"), (3, "pbc")):
        cfg = pp.PrepConfig(sites=sites, boundary=boundary,
                            projector_impl="recompiled",
                            params=recompiled_block.params)
        state, _ = pp.project_ancillas(pp.run_noiseless(cfg), sites)
        oracle = mps_oracle.brute_force_statevector(
            mps_oracle.aklt_mps(boundary), sites)
        overlap = abs(np.vdot(oracle.amps, state.amps)) ** 2
        assert overlap > 1 - 1e-5


def test_success_probability_independent_oracle():
    """L=2 open chain, checked against a from-scratch dense contraction."""
    u8 = embedded_unitary("direct")

    psi = np.zeros(64, dtype=complex)
    psi[1 << 4] = +1 / SQ2
    psi[1 << 2] = -1 / SQ2
    for block in ((0, 1, 2), (3, 4, 5)):
        out = np.zeros_like(psi)
        for i in range(64):
            gi = sum(((i >> q) & 1) << (2 - pos)
                     for pos, q in enumerate(block))
            rest = i & ~sum(1 << q for q in block)
            for gj in range(8):
                j = rest | sum(((gj >> (2 - pos)) & 1) << q
                               for pos, q in enumerate(block))
                out[i] += u8[gi, gj] * psi[j]
        psi = out
    mask = [(i >> 0) & 1 == 0 and (i >> 3) & 1 == 0 for i in range(64)]
    success_ref = float(np.sum(np.abs(psi[mask]) ** 2))

    cfg = pp.PrepConfig(sites=2, boundary="obc")
    full = pp.run_noiseless(cfg)
    assert np.max(np.abs(full.amps - psi)) < 1e-12
    _, success = pp.project_ancillas(full, 2)
    assert abs(success - success_ref) < 1e-12
    assert abs(success - 0.5) < 1e-12


def test_success_probabilities_frozen():
    values = {("obc", 2): 0.5, ("pbc", 2): 0.75,
              ("obc", 3): 0.4375, ("pbc", 3): 0.375,
              ("obc", 4): 0.3125, ("pbc", 4): 0.328125}
    for (boundary, sites), ref in values.items():
        cfg = pp.PrepConfig(sites=sites, boundary=boundary)
        _, success = pp.project_ancillas(pp.run_noiseless(cfg), sites)
        assert abs(success - ref) < 1e-12


def test_project_ancillas_validation():
    with pytest.raises(ValueError):
        pp.project_ancillas(qcore.zero_state(5), 2)
    # all weight on ancilla |1>: nothing survives
    dead = qcore.basis_state("100000")
    with pytest.raises(EmptyResultError):
        pp.project_ancillas(dead, 2)


def test_run_shots_noiseless_support_and_determinism():
    cfg = pp.PrepConfig(sites=2, boundary="obc", shots=4096, seed=5)
    counts = pp.run_shots(cfg)
    assert counts.stage == "raw"
    assert counts.total() == 4096
    assert counts.meta["noise"] is None
    again = pp.run_shots(cfg)
    assert again.counts == counts.counts
    assert set(counts.counts) <= _support(pp.run_noiseless(cfg))


def test_postselect_stages_synthetic():
    raw = qcore.ShotCounts(6, 20, {
        "000001": 7,   # survives both stages
        "001001": 4,   # survives ancilla, fails up-count (2 ups)
        "010000": 2,   # survives both stages
        "100000": 1,   # ancilla q0 read 1: dropped
    }, stage="raw")
    anc = pp.postselect_ancilla(raw, 2)
    assert anc.stage == "ancilla"
    assert anc.num_qubits == 4
    assert anc.counts == {"0001": 7, "0101": 4, "1000": 2}
    assert anc.shots == 20
    fin = pp.postselect_conserved(anc, 2, "obc")
    assert fin.stage == "conserved"
    assert fin.counts == {"0001": 7, "1000": 2}

    cfg = pp.PrepConfig(sites=2, boundary="obc")
    assert pp.postselect(raw, cfg).counts == fin.counts


def test_postselect_empty_raises():
    raw = qcore.ShotCounts(6, 5, {"100100": 5}, stage="raw")
    with pytest.raises(EmptyResultError):
        pp.postselect_ancilla(raw, 2)
    anc = qcore.ShotCounts(4, 5, {"0101": 5}, stage="ancilla")
    with pytest.raises(EmptyResultError):
        pp.postselect_conserved(anc, 2, "obc")
    with pytest.raises(ValueError):
        pp.postselect_ancilla(qcore.ShotCounts(4, 1, {"0000": 1}), 2)


def test_survivor_fraction_matches_success_probability():
    shots = 20000
    cfg = pp.PrepConfig(sites=2, boundary="obc", shots=shots, seed=3)
    kept = pp.postselect(pp.run_shots(cfg), cfg)
    # success probability is exactly 1/2; allow 5 sigma of binomial noise
    sigma = np.sqrt(shots * 0.25)
    assert abs(kept.total() - shots * 0.5) < 5 * sigma
    # post-selected support obeys the up-count rule by construction
    ups = pp.expected_up_count(2, "obc")
    assert all(k.count("0") == ups for k in kept.counts)


def test_trajectory_engine_matches_pauli_mixture_oracle():
    """cx error prob 1 on the only CX: the measured histogram must equal the
    uniform mixture over the 15 two-qubit Pauli insertions, computed here by
    direct statevector enumeration."""
    shots = 20000
    noise = pp.NoiseModel(cx_depolarizing_prob=1.0,
                          single_qubit_depolarizing_prob=0.0,
                          readout=[(0.0, 0.0)])
    cfg = pp.PrepConfig(sites=2, boundary="obc", shots=shots, seed=11,
                        noise=noise)
    counts = pp.run_shots(cfg)

    prefix = qcore.Circuit(6).x(2).h(2).x(2).cx(2, 4)
    u8 = embedded_unitary("direct")
    expect = np.zeros(64)
    for code in range(1, 16):
        state = qcore.apply_circuit(qcore.zero_state(6), prefix)
        amps = qcore._apply_matrix(state.amps, qcore.PAULI_1Q[code // 4],
                                   (2,), 6)
        amps = qcore._apply_matrix(amps, qcore.PAULI_1Q[code % 4], (4,), 6)
        tail = qcore.Circuit(6).x(2).u8((0, 1, 2), u8).u8((3, 4, 5), u8)
        final = qcore.apply_circuit(qcore.StateVector(6, amps), tail)
        expect += final.probabilities() / 15.0

    emp = np.zeros(64)
    for key, c in counts.counts.items():
        emp[qcore.bitstring_to_index(key)] = c / shots
    sigma = np.sqrt(expect * (1 - expect) / shots)
    assert np.all(np.abs(emp - expect) <= 5 * sigma + 1e-12)

    # the Pauli mixture reaches strings the noiseless circuit cannot
    assert set(counts.counts) - _support(pp.run_noiseless(cfg))


def test_trajectory_engine_noise_free_limit():
    """Zero error probabilities reproduce the noiseless sampler exactly."""
    silent = pp.NoiseModel(0.0, 0.0, [(0.0, 0.0)])
    shots = 3000
    noisy_cfg = pp.PrepConfig(sites=2, boundary="pbc", shots=shots, seed=21,
                              noise=silent)
    counts = pp.run_shots(noisy_cfg)
    assert set(counts.counts) <= _support(pp.run_noiseless(noisy_cfg))
    assert counts.total() == shots


def test_readout_noise_degrades_raw_fidelity():
    """Readout flips visibly distort the raw histogram (post-selection later
    filters most of them, so the comparison runs before any filtering)."""
    shots = 16384
    base = dict(sites=2, boundary="obc", shots=shots, seed=13)
    exact = pp.run_noiseless(pp.PrepConfig(**base))
    p = qcore.distribution(exact)
    golden_raw = analysis.ProbabilityDistribution(6, {
        qcore.index_to_bitstring(i, 6): float(p[i])
        for i in np.flatnonzero(p > 1e-15)
    })
    clean_cfg = pp.PrepConfig(**base)
    noisy_cfg = pp.PrepConfig(**base, noise=pp.NoiseModel(
        0.0, 0.0, [(0.02, 0.02)]))
    fids = {}
    for name, cfg in (("clean", clean_cfg), ("noisy", noisy_cfg)):
        fids[name] = analysis.hellinger_fidelity(
            analysis.counts_to_distribution(pp.run_shots(cfg)), golden_raw)
    # ~11% of shots carry at least one flipped bit: far above sampling noise
    assert fids["noisy"] < fids["clean"] - 0.01
    assert fids["clean"] > 0.999


def test_postselection_filters_readout_errors():
    """Single-bit readout flips either hit an ancilla or break the up-count,
    so the post-selected fidelity stays near the sampling floor."""
    shots = 16384
    base = dict(sites=2, boundary="obc", shots=shots, seed=13)
    golden = analysis.oracle_distribution(2, "obc")
    cfg = pp.PrepConfig(**base, noise=pp.NoiseModel(
        0.0, 0.0, [(0.02, 0.02)]))
    kept = pp.postselect(pp.run_shots(cfg), cfg)
    fid = analysis.hellinger_fidelity(
        analysis.counts_to_distribution(kept), golden)
    assert fid > 0.999


def test_noisy_sampling_deterministic_and_grouped():
    noise = pp.default_noise_model(6)
    cfg = pp.PrepConfig(sites=2, boundary="obc", shots=500, seed=9,
                        noise=noise)
    a = pp.run_shots(cfg)
    b = pp.run_shots(cfg)
    assert a.counts == b.counts
    assert a.meta["noise"] == noise.to_dict()
    assert a.total() == 500
