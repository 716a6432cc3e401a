import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

import oracles as o
from qevote import qsim
from qevote.errors import PreconditionError, ResourceLimitError, SpentStateError

SQ = 1 / np.sqrt(2)


def test_ghz_small_cases():
    assert np.allclose(qsim.ghz_state(1).amplitudes, [SQ, SQ])
    assert np.allclose(qsim.ghz_state(2).amplitudes, [SQ, 0, 0, SQ])
    a = qsim.ghz_state(4).amplitudes
    assert np.flatnonzero(np.abs(a) > 0).tolist() == [0, 15]


def test_ghz_cap():
    with pytest.raises(ResourceLimitError, match="16"):
        qsim.ghz_state(17)
    assert qsim.ghz_state(17, cap=17).n_qubits == 17


def test_state_rejects_bad_norm_and_length():
    with pytest.raises(PreconditionError):
        qsim.PureState(1, [1.0, 1.0])
    with pytest.raises(PreconditionError):
        qsim.PureState(2, [1.0, 0.0])


def test_phi0_single_qubit_matches_explicit_product():
    expected = o.SZ @ o.H @ o.ghz(1)
    assert np.allclose(qsim.phi_basis_state(1, 0).amplitudes, expected)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_phi_states_match_oracle(n):
    assert np.allclose(qsim.phi_basis_state(n, 0).amplitudes, o.layer(n, o.SZ @ o.H) @ o.ghz(n))
    assert np.allclose(qsim.phi_basis_state(n, 1).amplitudes, o.phi1(n))


def test_phi_states_orthogonal():
    assert abs(qsim.phi_basis_state(3, 0).overlap(qsim.phi_basis_state(3, 1))) < 1e-12


@pytest.mark.parametrize("n", [1, 3, 4, 5])
def test_voter_transform_maps_between_phi_states(n):
    p0, p1 = qsim.phi_basis_state(n, 0), qsim.phi_basis_state(n, 1)
    for agent in range(n):
        assert np.allclose(qsim.voter_transform(p0, agent).amplitudes, p1.amplitudes)
        assert np.allclose(qsim.voter_transform(p1, agent).amplitudes, -p0.amplitudes)


def test_voter_transform_squares_to_minus_identity():
    rng = np.random.default_rng(3)
    psi = qsim.random_direction(qsim.ghz_state(3), rng)
    twice = qsim.voter_transform(qsim.voter_transform(psi, 1), 1)
    assert np.allclose(twice.amplitudes, -psi.amplitudes)
    with pytest.raises(PreconditionError):
        qsim.voter_transform(psi, 3)


def test_state_at_trace_distance():
    d = qsim.canonical_direction(4)
    assert np.allclose(qsim.state_at_trace_distance(4, 0.0, d).amplitudes, qsim.ghz_state(4).amplitudes)
    assert np.allclose(qsim.state_at_trace_distance(4, 1.0, d).amplitudes, d.amplitudes)
    psi = qsim.state_at_trace_distance(4, 0.3, d)
    ghz = o.ghz(4)
    assert abs(np.sqrt(1 - abs(np.vdot(psi.amplitudes, ghz)) ** 2) - 0.3) < 1e-10
    assert abs(qsim.ghz_fidelity_sq(qsim.state_at_trace_distance(4, 0.6)) - 0.64) < 1e-12


def test_state_at_trace_distance_rejects_overlapping_direction():
    with pytest.raises(PreconditionError):
        qsim.state_at_trace_distance(3, 0.3, qsim.phi_basis_state(3, 0))


def test_ghz_fidelity_of_pulled_back_phi1_is_zero():
    pulled = qsim.from_phi_frame(qsim.phi_basis_state(4, 1))
    assert qsim.ghz_fidelity_sq(pulled) < 1e-24
    assert qsim.ghz_fidelity_sq(qsim.ghz_state(4)) == pytest.approx(1.0)


def test_outcome_distribution_small_cases():
    d = qsim.outcome_distribution(qsim.ghz_state(2), (0.0, 0.0))
    assert d[(0, 0)] == pytest.approx(0.5) and d[(1, 1)] == pytest.approx(0.5)
    d = qsim.outcome_distribution(qsim.computational_state((0,)), (0.0,))
    assert d[(0,)] == pytest.approx(0.5) and d[(1,)] == pytest.approx(0.5)


def test_rotated_distribution_matches_oracle():
    rng = np.random.default_rng(0)
    for n in (2, 3, 4):
        psi = qsim.random_direction(qsim.ghz_state(n), rng)
        free = rng.random(n - 1) * np.pi
        last = (-free.sum()) % np.pi
        thetas = tuple(free) + (last,)
        got = qsim.outcome_distribution(psi, thetas)
        want = o.rotated_distribution(psi.amplitudes, thetas)
        for k in want:
            assert got[k] == pytest.approx(want[k], abs=1e-12)


def test_ghz_rotated_parity_examples():
    rng = np.random.default_rng(1)
    for _ in range(200):
        assert sum(qsim.measure_all_rotated(qsim.ghz_state(3), (0, 0, 0), rng)) % 2 == 0
        assert sum(qsim.measure_all_rotated(qsim.ghz_state(3), (np.pi / 2, np.pi / 2, 0), rng)) % 2 == 1


def test_product_state_bits_uniform():
    rng = np.random.default_rng(2)
    idx = qsim.sample_outcomes(qsim.computational_state((0, 0, 0)), (0, 0, 0), rng, 40_000)
    counts = np.bincount(idx, minlength=8)
    assert stats.chisquare(counts).pvalue > 0.001


def test_measurement_consumes_state():
    rng = np.random.default_rng(0)
    s = qsim.ghz_state(2)
    qsim.measure_all_hadamard(s, rng)
    with pytest.raises(SpentStateError):
        qsim.measure_all_hadamard(s, rng)
    with pytest.raises(PreconditionError):
        qsim.measure_all_rotated(qsim.ghz_state(2), (0.0,), rng)


def test_hadamard_even_parity_law_ghz4():
    rng = np.random.default_rng(5)
    idx = qsim.sample_outcomes(qsim.ghz_state(4), (0,) * 4, rng, 100_000)
    par = qsim.parity_table(4)
    assert (par[idx] == 0).all()
    counts = np.bincount(idx, minlength=16)[par == 0]
    assert stats.chisquare(counts).pvalue > 0.001


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sampler_matches_oracle_total_variation(n):
    rng = np.random.default_rng(n)
    psi = qsim.random_direction(qsim.ghz_state(n), rng)
    angles = (0.4,) * (n - 1) + ((-0.4 * (n - 1)) % np.pi,)
    probs = qsim.outcome_probabilities(psi, angles)
    idx = qsim.sample_outcomes(psi, angles, rng, 100_000)
    emp = np.bincount(idx, minlength=2 ** n) / 100_000
    assert 0.5 * np.abs(emp - probs).sum() < 0.02


def test_partial_trace_cases():
    assert np.allclose(qsim.partial_trace(qsim.ghz_state(2), {0}).matrix, np.eye(2) / 2)
    assert np.allclose(qsim.partial_trace(qsim.computational_state((0, 0)), {1}).matrix, [[1, 0], [0, 0]])
    assert np.allclose(qsim.partial_trace(qsim.ghz_state(3), {0, 1}).matrix, o.reduced(o.ghz(3), 3, [0, 1]))
    with pytest.raises(PreconditionError):
        qsim.partial_trace(qsim.ghz_state(3), set())
    with pytest.raises(PreconditionError):
        qsim.partial_trace(qsim.ghz_state(3), {3})


def test_partial_trace_matches_oracle_on_random_states():
    rng = np.random.default_rng(9)
    psi = qsim.random_direction(qsim.ghz_state(4), rng)
    for keep in ([0], [1, 3], [0, 2, 3]):
        assert np.allclose(qsim.partial_trace(psi, keep).matrix, o.reduced(psi.amplitudes, 4, keep))


def test_measurement_angles_validation():
    a = qsim.MeasurementAngles((np.pi / 2, np.pi / 2, 0.0))
    assert a.parity_target == 1
    with pytest.raises(PreconditionError):
        qsim.MeasurementAngles((0.3, 0.3))
    with pytest.raises(PreconditionError):
        qsim.MeasurementAngles((np.pi, 0.0))


def test_density_operator_validation():
    with pytest.raises(PreconditionError):
        qsim.DensityOperator(2, [[1, 1], [0, 0]])
    with pytest.raises(PreconditionError):
        qsim.DensityOperator(2, [[2, 0], [0, -1]])


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_norm_preserved_under_many_operations(n, seed):
    rng = np.random.default_rng(seed)
    psi = qsim.random_direction(qsim.ghz_state(n), rng)
    for _ in range(1000):
        psi = qsim.voter_transform(psi, int(rng.integers(n)))
    psi = qsim.from_phi_frame(qsim.to_phi_frame(psi))
    assert abs(psi.norm_sq() - 1) < 1e-10


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_ghz_passes_any_valid_angles(n, seed):
    rng = np.random.default_rng(seed)
    free = rng.random(n - 1) * np.pi
    last = (-free.sum()) % np.pi
    angles = qsim.MeasurementAngles(tuple(free) + (0.0 if last >= np.pi else last,))
    probs = qsim.outcome_probabilities(qsim.ghz_state(n), angles)
    assert probs[qsim.parity_table(n) != angles.parity_target].sum() < 1e-10


@given(st.integers(2, 5), st.data())
def test_ghz_partial_trace_purity_half(n, data):
    keep = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n - 1))
    rho = qsim.partial_trace(qsim.ghz_state(n), keep)
    assert rho.purity() == pytest.approx(0.5)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_ghz_hadamard_always_even(n):
    rng = np.random.default_rng(n)
    idx = qsim.sample_outcomes(qsim.ghz_state(n), (0,) * n, rng, 10_000)
    assert (qsim.parity_table(n)[idx] == 0).all()


def test_state_dump_records():
    from qevote import transcript as tr

    t = tr.Transcript(tr.FULL)
    tr.state_dump(t, qsim.ghz_state(2))
    assert [ev.payload.split(",")[0] for ev in t] == ["0", "3"]
    re_bits = t.events[0].payload.split(",")[1]
    assert tr.bits_float(re_bits) == pytest.approx(SQ)
