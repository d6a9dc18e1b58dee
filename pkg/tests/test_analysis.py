import numpy as np
import pytest

from vbsprep import analysis as an
from vbsprep import prep_pipeline as pp, qcore
from vbsprep.errors import CalibrationError, EmptyResultError, InvalidStateError

GOLDEN_L2 = {"1000": 0.25, "0100": 0.25, "0010": 0.25, "0001": 0.25}


def test_probability_distribution_validation():
    an.ProbabilityDistribution(4, GOLDEN_L2)
    with pytest.raises(ValueError):
        an.ProbabilityDistribution(3, GOLDEN_L2)
    with pytest.raises(ValueError):
        an.ProbabilityDistribution(1, {"0": -0.5, "1": 1.5})
    with pytest.raises(ValueError):
        an.ProbabilityDistribution(1, {"0": 0.6, "1": 0.6})
    assert an.ProbabilityDistribution(1, {"0": 1.0}).get("1") == 0.0


def test_hellinger_basics():
    p = an.ProbabilityDistribution(4, GOLDEN_L2)
    assert an.hellinger_fidelity(p, p) == 1.0
    point = an.ProbabilityDistribution(4, {"0001": 1.0})
    assert abs(an.hellinger_fidelity(point, p) - 0.25) < 1e-15
    assert an.hellinger_fidelity(p, point) == an.hellinger_fidelity(point, p)
    other = an.ProbabilityDistribution(4, {"1111": 1.0})
    assert an.hellinger_fidelity(point, other) == 0.0
    with pytest.raises(ValueError):
        an.hellinger_fidelity(p, an.ProbabilityDistribution(2, {"00": 1.0}))


def test_counts_to_distribution():
    c = qcore.ShotCounts(2, 10, {"00": 6, "11": 4})
    d = an.counts_to_distribution(c)
    assert d.probs == {"00": 0.6, "11": 0.4}
    with pytest.raises(EmptyResultError):
        an.counts_to_distribution(qcore.ShotCounts(2, 10, {}))


def test_readout_calibration_construction():
    cal = an.ReadoutCalibration.from_flip_probs([(0.02, 0.05)])
    assert np.allclose(cal.matrices[0], [[0.98, 0.05], [0.02, 0.95]])
    ident = an.ReadoutCalibration.identity(3)
    assert all(np.array_equal(m, np.eye(2)) for m in ident.matrices)
    noise = pp.NoiseModel(readout=[(0.1, 0.2)])
    from_model = an.ReadoutCalibration.from_noise_model(noise, 2)
    assert len(from_model.matrices) == 2
    assert np.allclose(from_model.matrices[1], [[0.9, 0.2], [0.1, 0.8]])
    with pytest.raises(CalibrationError):
        an.ReadoutCalibration([np.eye(3)])
    with pytest.raises(CalibrationError):
        an.ReadoutCalibration([np.array([[0.9, 0.1], [0.2, 0.9]])])
    with pytest.raises(CalibrationError):
        an.ReadoutCalibration([np.array([[1.4, -0.4], [-0.4, 1.4]])])


def test_mitigate_identity_is_noop():
    c = qcore.ShotCounts(2, 10, {"00": 6, "10": 3, "11": 1})
    d = an.mitigate(c, an.ReadoutCalibration.identity(2))
    assert d.probs == pytest.approx({"00": 0.6, "10": 0.3, "11": 0.1})


def test_mitigate_guards():
    c = qcore.ShotCounts(2, 10, {"00": 10})
    with pytest.raises(CalibrationError):  # singular confusion matrix
        an.mitigate(c, an.ReadoutCalibration.from_flip_probs([(0.5, 0.5)] * 2))
    with pytest.raises(CalibrationError):  # not enough per-qubit matrices
        an.mitigate(c, an.ReadoutCalibration.identity(1))
    with pytest.raises(EmptyResultError):
        an.mitigate(qcore.ShotCounts(2, 10, {}),
                    an.ReadoutCalibration.identity(2))


def test_mitigate_clips_to_valid_distribution():
    c = qcore.ShotCounts(2, 10, {"00": 1, "11": 9})
    cal = an.ReadoutCalibration.from_flip_probs([(0.3, 0.0)] * 2)
    d = an.mitigate(c, cal)
    assert all(v >= 0.0 for v in d.probs.values())
    assert abs(sum(d.probs.values()) - 1.0) < 1e-9
    # the inverse drives the inconsistent 01/10 weight negative: clipped out
    assert d.get("01") == 0.0 and d.get("10") == 0.0


def test_forward_corrupt_deterministic():
    golden = an.ProbabilityDistribution(4, GOLDEN_L2)
    flips = [(0.02, 0.03)] * 4
    a = an.forward_corrupt(golden, flips, 5000, 7)
    b = an.forward_corrupt(golden, flips, 5000, 7)
    assert a.counts == b.counts
    assert a.total() == 5000
    assert a.stage == "raw"
    # flips reach strings outside the golden support
    assert set(a.counts) - set(GOLDEN_L2)


def test_mitigation_round_trip_recovers_golden():
    """Corrupt the exact L=2 distribution with (0.02, 0.03) flips at 1e6
    shots, mitigate, and land within 5e-3 of the original in max-norm."""
    golden = an.oracle_distribution(2, "obc")
    flips = [(0.02, 0.03)] * 4
    raw = an.forward_corrupt(golden, flips, 1_000_000, 42)
    mit = an.mitigate(raw, an.ReadoutCalibration.from_flip_probs(flips))
    keys = set(mit.probs) | set(golden.probs)
    err_mit = max(abs(mit.get(k) - golden.get(k)) for k in keys)
    emp = an.counts_to_distribution(raw)
    err_raw = max(abs(emp.get(k) - golden.get(k)) for k in keys)
    assert err_mit < 5e-3
    assert err_mit < err_raw  # mitigation strictly improved the estimate


def test_postselect_distribution_matches_shot_postselection():
    cfg = pp.PrepConfig(sites=2, boundary="obc", shots=2000, seed=19,
                        noise=pp.default_noise_model(6))
    raw = pp.run_shots(cfg)
    via_counts = an.counts_to_distribution(pp.postselect(raw, cfg))
    via_dist = an.postselect_distribution(an.counts_to_distribution(raw),
                                          2, "obc")
    assert set(via_counts.probs) == set(via_dist.probs)
    for k, v in via_counts.probs.items():
        assert abs(v - via_dist.probs[k]) < 1e-12


def test_postselect_distribution_guards():
    with pytest.raises(ValueError):
        an.postselect_distribution(
            an.ProbabilityDistribution(4, GOLDEN_L2), 2, "obc")
    dead = an.ProbabilityDistribution(6, {"100000": 1.0})
    with pytest.raises(EmptyResultError):
        an.postselect_distribution(dead, 2, "obc")


def test_bond_operator_spectrum():
    h = an.bond_operator()
    assert h.shape == (16, 16)
    assert np.allclose(h, h.T)
    evs = np.linalg.eigvalsh(h)
    assert set(np.round(evs, 9)) == {0.0, round(2.0 / 3.0, 9), 2.0}


def test_pair_projector_on_triplet_subspace():
    """Restricted to triplet x triplet the halved bond term is the exact
    projector onto the five-dimensional total-spin-2 multiplet."""
    p = an.pair_projector()
    s4 = np.array([[1, 0, 0],
                   [0, 1 / np.sqrt(2), 0],
                   [0, 1 / np.sqrt(2), 0],
                   [0, 0, 1]])
    s16 = np.kron(s4, s4)
    sub = s16.T @ p @ s16
    assert np.allclose(sub @ sub, sub, atol=1e-12)
    assert abs(np.trace(sub) - 5.0) < 1e-12
    # |m=+1, m=+1> has total spin 2: eigenvalue exactly 1
    assert np.allclose(p[:, 0], np.eye(16)[:, 0])


@pytest.mark.parametrize("boundary", ["obc", "pbc"])
@pytest.mark.parametrize("sites", [2, 3])
def test_prepared_state_has_zero_energy(sites, boundary):
    cfg = pp.PrepConfig(sites=sites, boundary=boundary)
    state, _ = pp.project_ancillas(pp.run_noiseless(cfg), sites)
    e = an.aklt_energy(state, sites, boundary)
    assert abs(e) < 1e-8


def test_energy_of_polarized_product_state():
    # every site in m=+1: each bond sees total spin 2, eigenvalue 2
    all_up = qcore.zero_state(4)
    assert abs(an.aklt_energy(all_up, 2, "obc") - 2.0) < 1e-12
    assert abs(an.aklt_energy(all_up, 2, "pbc") - 4.0) < 1e-12


def test_energy_nonnegative_on_valid_states():
    rng = np.random.default_rng(3)
    s4 = np.array([[1, 0, 0],
                   [0, 1 / np.sqrt(2), 0],
                   [0, 1 / np.sqrt(2), 0],
                   [0, 0, 1]])
    s16 = np.kron(s4, s4)  # spin-1 embedding for two sites
    for _ in range(10):
        v = rng.normal(size=9) + 1j * rng.normal(size=9)
        amps = s16 @ (v / np.linalg.norm(v))
        e = an.aklt_energy(qcore.StateVector(4, amps), 2, "obc")
        assert e >= -1e-10


def test_energy_rejects_singlet_contamination():
    amps = np.zeros(16, dtype=complex)
    amps[qcore.bitstring_to_index("0100")] = 1 / np.sqrt(2)
    amps[qcore.bitstring_to_index("1000")] = -1 / np.sqrt(2)
    state = qcore.StateVector(4, amps)
    with pytest.raises(InvalidStateError):
        an.aklt_energy(state, 2, "obc")


def test_energy_validation():
    with pytest.raises(ValueError):
        an.aklt_energy(qcore.zero_state(3), 2, "obc")
    with pytest.raises(ValueError):
        an.aklt_energy(qcore.zero_state(4), 2, "ring")


def test_oracle_distribution_golden_and_cached():
    d = an.oracle_distribution(2, "obc")
    assert d.probs == pytest.approx(GOLDEN_L2)
    assert an.oracle_distribution(2, "obc") is d


def test_score_run_noiseless():
    cfg = pp.PrepConfig(sites=2, boundary="obc", shots=8192, seed=1)
    rec = an.score_run(cfg)
    assert rec["L"] == 2 and rec["boundary"] == "obc"
    assert rec["impl"] == "direct" and rec["cx_count"] == 1
    assert rec["hellinger_unmitigated"] > 0.995
    assert rec["hellinger_mitigated"] is None  # no noise model configured
    assert abs(rec["success_prob"] - 0.5) < 5 * np.sqrt(0.25 / 8192)
    assert abs(rec["energy"]) < 1e-8
    assert set(rec) == set(an._CSV_FIELDS)


def test_score_run_noisy_has_both_fidelities():
    cfg = pp.PrepConfig(sites=2, boundary="obc", shots=2000, seed=2,
                        noise=pp.default_noise_model(6))
    rec = an.score_run(cfg, include_energy=False)
    assert 0.0 < rec["hellinger_unmitigated"] <= 1.0
    assert 0.0 < rec["hellinger_mitigated"] <= 1.0
    assert rec["energy"] is None


def test_score_run_empty_postselection_yields_nulls():
    # ancillas always read 1: stage 1 keeps nothing, no exception escapes
    noise = pp.NoiseModel(0.0, 0.0, [(1.0, 0.5)])
    cfg = pp.PrepConfig(sites=2, boundary="obc", shots=200, seed=3,
                        noise=noise)
    rec = an.score_run(cfg, include_energy=False)
    assert rec["hellinger_unmitigated"] is None
    assert rec["success_prob"] == 0.0
    # the confusion matrix is invertible, so mitigation still reconstructs
    assert rec["hellinger_mitigated"] is not None


def test_report_grouping_and_stats():
    base = {"boundary": "obc", "impl": "direct", "shots": 100,
            "hellinger_mitigated": None, "success_prob": 0.5,
            "energy": 0.0, "cx_count": 1}
    records = [
        dict(base, L=2, seed=0, hellinger_unmitigated=0.9, success_prob=0.5),
        dict(base, L=2, seed=1, hellinger_unmitigated=0.7, success_prob=0.3),
        dict(base, L=3, seed=0, hellinger_unmitigated=0.8),
    ]
    doc = an.report(records)
    assert doc["tool"] == "vbsprep"
    assert doc["isometry_cx_baseline"] == 24
    assert doc["runs"] == records
    assert len(doc["series"]) == 2
    g2, g3 = doc["series"]
    assert g2["L"] == 2 and g2["runs"] == 2
    assert abs(g2["hellinger_unmitigated_mean"] - 0.8) < 1e-12
    expected_se = np.std([0.9, 0.7], ddof=1) / np.sqrt(2)
    assert abs(g2["hellinger_unmitigated_stderr"] - expected_se) < 1e-12
    assert abs(g2["success_prob_mean"] - 0.4) < 1e-12
    assert "hellinger_mitigated_mean" not in g2  # all None: excluded
    assert g3["runs"] == 1 and g3["hellinger_unmitigated_stderr"] == 0.0


def test_report_empty():
    doc = an.report([])
    assert doc["runs"] == [] and doc["series"] == []


def test_write_report_csv(tmp_path):
    records = [{
        "L": 2, "boundary": "obc", "impl": "direct", "shots": 10, "seed": 0,
        "hellinger_unmitigated": 0.5, "hellinger_mitigated": None,
        "success_prob": 0.5, "energy": 0.0, "cx_count": 1,
    }]
    path = tmp_path / "runs.csv"
    an.write_report_csv(records, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(an._CSV_FIELDS)
    assert lines[1] == "2,obc,direct,10,0,0.5,,0.5,0.0,1"
