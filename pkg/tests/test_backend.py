import itertools
from functools import reduce

import numpy as np
import pytest

from conftest import brute_partial_trace
from qot import InvalidArgument, ResourceLimit
from qot.backend import (
    BELL,
    MAX_MIXED_2,
    CountsTable,
    DimerState,
    PureState,
    _rotated_probs,
    dimer_chain,
    exact_expectation,
    exact_rdm,
    ghz_state,
    product_state,
    random_state,
    sample,
    werner,
    zero_state,
)
from qot.hash_family import PerfectHashFamily, binary_family
from qot.schedule import MeasurementPlan, Provenance, Setting, plan_k2

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0 + 0j, -1.0])
I2 = np.eye(2, dtype=complex)


def single_plan(n, *bases, shots=1):
    return MeasurementPlan(n, 2, shots, tuple(Setting(b, Provenance("external")) for b in bases))


def means(counts, sid, n):
    return [counts.expectation(sid, [q]) for q in range(n)]


def test_zero_state_z_readout_all_zero():
    counts = sample(zero_state(4), single_plan(4, "zzzz", shots=50), seed=1)
    assert counts.tally(0) == {"0000": 50}


def test_x_readout_of_zero_is_fair_coin():
    shots = 100_000
    counts = sample(zero_state(1), MeasurementPlan(1, 1, shots, (Setting("x", Provenance("external")),)), seed=3)
    assert abs(counts.expectation(0, [0])) < 4 / np.sqrt(shots)


def test_bell_correlations(bell):
    shots = 20_000
    counts = sample(bell, single_plan(2, "xx", "zz", "xy", shots=shots), seed=11)
    for sid in (0, 1):
        assert set(counts.tally(sid)) <= {"00", "11"}
    agree = sum(c for o, c in counts.tally(2).items() if o[0] == o[1]) / shots
    assert abs(agree - 0.5) < 4 / np.sqrt(shots)


def _born_oracle(amps, bases):
    """Outcome distribution from explicit full-register unitaries."""
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    sdg = np.diag([1, -1j])
    gate = {"x": h, "y": h @ sdg, "z": np.eye(2)}
    u = reduce(np.kron, [gate[b] for b in bases])
    return np.abs(u @ amps) ** 2


def test_sampling_matches_born_oracle():
    state = random_state(3, seed=5)
    shots = 40_000
    settings = ["xyz", "yyx", "zxz"]
    counts = sample(state, single_plan(3, *settings, shots=shots), seed=2)
    for sid, bases in enumerate(settings):
        p = _born_oracle(state.amplitudes, bases)
        emp = np.zeros(8)
        for o, c in counts.tally(sid).items():
            emp[int(o, 2)] = c / shots
        assert 0.5 * np.abs(emp - p).sum() < 0.02


def test_single_qubit_means_converge():
    state = random_state(3, seed=9)
    shots = 100_000
    plan = plan_k2(binary_family(3), shots)
    counts = sample(state, plan, seed=4)
    for sid, s in enumerate(plan.settings):
        for q in range(3):
            exact = exact_expectation(state, [q], [s.bases[q].upper()])
            assert abs(counts.expectation(sid, [q]) - exact) < 5 / np.sqrt(shots)


def test_relabelling_commutes_with_born_distribution():
    state = random_state(4, seed=1)
    perm = [2, 0, 3, 1]  # new qubit j is old qubit perm[j]
    moved = PureState(np.transpose(state.tensor(), perm).ravel())
    bases = "xyzy"
    p_old = _rotated_probs(state, bases).reshape((2,) * 4)
    p_new = _rotated_probs(moved, "".join(bases[q] for q in perm)).reshape((2,) * 4)
    assert np.allclose(np.transpose(p_old, perm), p_new)


def test_dimer_matches_dense_two_qubit():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    dense = PureState(psi)
    dimer = DimerState(2, ((0, 1),), (np.outer(psi, psi.conj()),))
    shots = 30_000
    plan = plan_k2(PerfectHashFamily.from_colors([[0, 1]], 2), shots)
    a, b = sample(dense, plan, seed=1), sample(dimer, plan, seed=2)
    for sid, s in enumerate(plan.settings):
        p = _born_oracle(psi, s.bases)
        for counts in (a, b):
            emp = np.zeros(4)
            for o, c in counts.tally(sid).items():
                emp[int(o, 2)] = c / shots
            assert 0.5 * np.abs(emp - p).sum() < 0.02


def test_dimer_scales_to_1024():
    state = dimer_chain(1024)
    plan = plan_k2(binary_family(1024), 200)
    counts = sample(state, plan, seed=0)
    assert all(counts.shots(sid) == 200 for sid in range(len(plan)))
    zz = plan.find("z" * 1024)
    assert counts.expectation(zz, [0, 1]) == 1.0
    assert counts.expectation(plan.find("x" * 1024), [1022, 1023]) == 1.0


def test_bit_flip_noise():
    shots = 100_000
    counts = sample(zero_state(2), single_plan(2, "zz", shots=shots), seed=8, flip=0.1)
    for q in range(2):
        assert abs(counts.expectation(0, [q]) - 0.8) < 5 / np.sqrt(shots)
    with pytest.raises(InvalidArgument):
        sample(zero_state(2), single_plan(2, "zz"), seed=8, flip=1.5)


def test_sampling_reproducible_and_worker_independent():
    state = random_state(5, seed=2)
    plan = plan_k2(binary_family(5), 500)
    a = sample(state, plan, seed=42)
    b = sample(state, plan, seed=42, workers=4)
    assert a.dumps() == b.dumps()
    assert sample(state, plan, seed=43).dumps() != a.dumps()


def test_sampling_preconditions():
    with pytest.raises(InvalidArgument):
        sample(zero_state(3), single_plan(2, "zz"), seed=1)
    with pytest.raises(InvalidArgument):
        sample(zero_state(2), single_plan(2, "zz"), seed=None)


def test_counts_round_trip():
    plan = plan_k2(binary_family(4), 300)
    counts = sample(random_state(4, seed=0), plan, seed=5)
    back = CountsTable.loads(counts.dumps())
    assert back.dumps() == counts.dumps()
    assert all(back.shots(s) == 300 for s in range(len(plan)))
    line = counts.dumps().splitlines()[0]
    assert set(__import__("json").loads(line)) == {"setting", "outcome", "count"}


def test_counts_loader_merges_and_validates():
    text = '{"setting": 0, "outcome": "01", "count": 2}\n{"setting": 0, "outcome": "01", "count": 3}\n'
    assert CountsTable.loads(text).tally(0) == {"01": 5}
    with pytest.raises(InvalidArgument):
        CountsTable.loads('{"setting": 0, "outcome": "0a", "count": 1}')
    with pytest.raises(InvalidArgument):
        CountsTable.loads('{"setting": 0, "outcome": "01", "count": 1}\n{"setting": 1, "outcome": "1", "count": 1}')


def test_exact_expectation_bell(bell):
    rho = np.outer(bell.amplitudes, bell.amplitudes.conj())
    for label, mats, want in [("XX", (X, X), 1), ("YY", (Y, Y), -1), ("ZZ", (Z, Z), 1), ("XI", (X, I2), 0)]:
        direct = np.trace(np.kron(*mats) @ rho).real
        assert direct == pytest.approx(want)
        assert exact_expectation(bell, [0, 1], list(label)) == pytest.approx(want)


def test_exact_expectation_zero_state():
    assert exact_expectation(zero_state(5), [3], ["Z"]) == 1.0


def test_exact_expectation_rejects():
    s = random_state(3, seed=0)
    with pytest.raises(InvalidArgument):
        exact_expectation(s, [0, 1], ["I", "I"])
    with pytest.raises(InvalidArgument):
        exact_expectation(s, [0, 0], ["X", "Z"])
    with pytest.raises(InvalidArgument):
        exact_expectation(s, [0, 3], ["X", "Z"])


def test_exact_rdm_matches_brute_partial_trace():
    state = random_state(5, seed=3)
    for keep in [(0, 1), (3, 1), (4, 0, 2)]:
        assert np.allclose(exact_rdm(state, keep), brute_partial_trace(state.amplitudes, 5, keep), atol=1e-12)


def test_exact_rdm_product_state():
    plus = np.array([1, 1]) / np.sqrt(2)
    one = np.array([0, 1])
    state = product_state([plus, one, plus])
    rdm = exact_rdm(state, (1, 2))
    assert np.allclose(rdm, np.kron(np.outer(one, one), np.outer(plus, plus)))


def test_exact_rdm_bell_with_spectator(bell):
    plus = np.array([1, 1]) / np.sqrt(2)
    state = PureState(np.kron(bell.amplitudes, plus))
    assert np.allclose(exact_rdm(state, (0, 1)), BELL)
    assert np.allclose(exact_rdm(state, (1, 2)), np.kron(I2 / 2, np.outer(plus, plus)))


def test_fixtures(bell):
    assert np.allclose(ghz_state(2).amplitudes, bell.amplitudes)
    for seed in range(5):
        amps = random_state(10, seed=seed).amplitudes
        assert abs(np.vdot(amps, amps).real - 1) < 1e-10
    assert np.array_equal(random_state(6, 3).amplitudes, random_state(6, 3).amplitudes)
    with pytest.raises(ResourceLimit):
        random_state(21)
    with pytest.raises(ResourceLimit):
        ghz_state(25)


def test_dimer_chain_exact_rdms():
    state = dimer_chain(1024)
    assert np.allclose(exact_rdm(state, (0, 1)), BELL)
    assert np.allclose(exact_rdm(state, (1, 2)), MAX_MIXED_2)
    assert np.allclose(exact_rdm(state, (1, 0)), BELL)
    assert exact_expectation(state, [0, 1], ["Y", "Y"]) == pytest.approx(-1)


def test_dimer_rdm_matches_dense():
    rng = np.random.default_rng(1)
    pairs = []
    for _ in range(3):
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        pairs.append(v / np.linalg.norm(v))
    dimer = DimerState(6, ((0, 3), (1, 5), (2, 4)), tuple(np.outer(v, v.conj()) for v in pairs))
    # dense equivalent: build in pair order then permute qubits into place
    amps = reduce(np.kron, pairs).reshape((2,) * 6)
    order = [0, 3, 1, 5, 2, 4]  # axis j of amps holds qubit order[j]
    dense = PureState(np.transpose(amps, np.argsort(order)).ravel())
    for subset in itertools.permutations(range(6), 3):
        assert np.allclose(exact_rdm(dimer, subset), exact_rdm(dense, subset), atol=1e-12)
    for subset, label in [((0, 3), "XY"), ((1, 2, 5), "ZXY"), ((4,), "Y")]:
        assert exact_expectation(dimer, subset, list(label)) == pytest.approx(
            exact_expectation(dense, subset, list(label)), abs=1e-12
        )


def test_dimer_validation():
    with pytest.raises(InvalidArgument):
        DimerState(4, ((0, 1), (1, 2)), (BELL,))
    with pytest.raises(InvalidArgument):
        DimerState(2, ((0, 1),), (np.diag([1.2, -0.2, 0, 0]),))
    with pytest.raises(InvalidArgument):
        DimerState(2, ((0, 1),), (2 * BELL,))
    assert np.allclose(dimer_chain(4, werner(0.3)).pair_states[1], werner(0.3))
