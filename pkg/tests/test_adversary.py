import numpy as np
import pytest

from qevote import adversary as adv
from qevote import anoncast as ac
from qevote import election as el
from qevote import qsim, verify
from qevote import transcript as tr
from qevote.errors import BoardRejected, ConfigError, PreconditionError, StrategyFault
from qevote.network import Network, make_agents

EPS_TILDE_06 = 0.6997142273814361  # sqrt(0.36 + 0.1296)


def ctx(n=4):
    return el.SourceContext(0, 1, 0, n, None)


def test_sources_emit_expected_states():
    rng = np.random.default_rng(0)
    g = adv.IdealSource().emit(ctx(), rng)
    assert qsim.ghz_fidelity_sq(g) == pytest.approx(1.0)
    f = adv.FixedTraceDistance(0.6).emit(ctx(), rng)
    assert qsim.ghz_fidelity_sq(f) == pytest.approx(0.64)
    o = adv.FixedOverlapAmp(0.9).emit(ctx(), rng)
    assert abs(np.vdot(qsim.ghz_state(4).amplitudes, o.amplitudes)) == pytest.approx(0.9)
    # every emission is a fresh, unspent copy
    src = adv.FixedTraceDistance(0.3)
    a = src.emit(ctx(), rng)
    qsim.measure_all_hadamard(a, rng)
    assert not src.emit(ctx(), rng).spent


def test_source_argument_checks():
    with pytest.raises(ConfigError):
        adv.FixedTraceDistance(1.5)
    with pytest.raises(ConfigError):
        adv.FixedOverlapAmp(-0.1)
    with pytest.raises(ConfigError):
        adv.ScheduleSource([])


def test_adaptive_ideal_equals_ideal_source():
    ideal = adv.AdaptiveSource(lambda c, history, rng: qsim.ghz_state(c.n), "ideal-adaptive")
    t1, t2 = tr.Transcript(tr.PUBLIC), tr.Transcript(tr.PUBLIC)
    cfg = el.ElectionConfig(4, coins=2, seed=3)
    a = el.run_election(cfg, (0, 1, 1, 0), adv.IdealSource(), transcript=t1)
    b = el.run_election(cfg, (0, 1, 1, 0), ideal, transcript=t2)
    assert t1.text() == t2.text() and a.tally == b.tally


def test_adaptive_source_sees_only_public_history():
    seen = []

    def strategy(c, history, rng):
        seen.append(max((e.level for e in history), default=0))
        return qsim.ghz_state(c.n)

    el.run_election(el.ElectionConfig(4, coins=1, seed=1), (0, 1, 1, 0), adv.AdaptiveSource(strategy),
                    transcript=tr.Transcript(tr.FULL))
    assert seen and max(seen) <= tr.PUBLIC


def test_adaptive_source_faults():
    with pytest.raises(StrategyFault):
        adv.AdaptiveSource(lambda c, h, r: "not a state").emit(ctx(), None)
    with pytest.raises(StrategyFault):
        adv.AdaptiveSource(lambda c, h, r: qsim.ghz_state(3)).emit(ctx(), None)


def test_worst_case_source_is_constant_far_state():
    s = adv.worst_case_source(0.6).emit(ctx(), None)
    assert qsim.ghz_fidelity_sq(s) == pytest.approx(0.64)


def test_alternating_schedule_halves_rejection_rate():
    n, trials = 4, 20_000
    net = Network(make_agents(n, 0))
    rng = np.random.default_rng(1)
    src = adv.ScheduleSource([adv.IdealSource(), adv.FixedTraceDistance(0.6)])
    rejected = sum(not verify.verification_round(src.emit(ctx(), rng), i % n, net, rng).accepted
                   for i in range(trials))
    constant = verify.mean_rejection_probability(qsim.state_at_trace_distance(4, 0.6), 20_000,
                                                 np.random.default_rng(2))
    p = constant / 2
    assert abs(rejected / trials - p) < 3 * np.sqrt(p * (1 - p) / trials) + 0.002


def test_coalition_validation():
    c = adv.Coalition(frozenset({0, 2}), 4)
    assert c.honest == (1, 3) and c.h == 2
    for members in (set(), {4}, {0, 1, 2, 3}):
        with pytest.raises(PreconditionError):
            adv.Coalition(frozenset(members), 4)


def test_lying_verifier_always_passes_and_needs_membership():
    net = Network(make_agents(4, 0))
    rng = np.random.default_rng(0)
    coalition = adv.Coalition(frozenset({2}), 4)
    counters = verify.VerifierCounters.fresh(4)
    for _ in range(10_000):
        out = adv.lying_verifier_round(qsim.computational_state((0, 1, 0, 0)), 2, net, rng, coalition)
        verify.record_trial(counters, 2, out.accepted)
    assert counters.rejections[2] == 0 and counters.trials[2] == 10_000
    with pytest.raises(PreconditionError):
        adv.lying_verifier_round(qsim.ghz_state(4), 0, net, rng, coalition)


def test_dishonest_verifiers_hide_a_bad_source():
    coalition = adv.Coalition(frozenset({0, 1, 2}), 4)
    src = adv.FixedTraceDistance(0.9)
    seen_clean = 0
    for seed in range(25):
        run = el.ElectionRun(el.ElectionConfig(4, coins=3, seed=seed), src, adv.Adversary(coalition))
        run.assign(ac.IndexAssignment((1, 2, 3, 4)))
        row, counters = run.voting_phase_round(1, 0)
        assert all(counters.rejections[m] == 0 for m in coalition.members)
        if counters.trials[3] == 0:
            seen_clean += 1
            assert row is not None
    assert seen_clean > 0


def test_board_tamper_grow_and_flip():
    board, _, _ = el.worked_example()
    grown = adv.board_tamper(board, adv.AddRowCol())
    assert grown.n == 5
    with pytest.raises(BoardRejected):
        el.assemble_and_tally(grown.rows, 4)
    flipped = adv.board_tamper(board, adv.FlipRowBit(2, 1))
    assert el.VoteVector.of(flipped).e[2] != el.VoteVector.of(board).e[2]
    assert adv.board_tamper(flipped, adv.FlipRowBit(2, 1)) == board
    with pytest.raises(PreconditionError):
        adv.board_tamper(board, adv.FlipRowBit(4, 0))
    with pytest.raises(PreconditionError):
        adv.board_tamper(board, "nonsense")


# ---------------------------------------------------------------------------
# identity guessing
# ---------------------------------------------------------------------------

def test_helstrom_limits():
    a = np.diag([1.0, 0.0])
    b = np.diag([0.0, 1.0])
    assert adv.helstrom_success(a, b) == pytest.approx(1.0)
    assert adv.helstrom_success(a, a) == pytest.approx(0.5)
    plus = np.full((2, 2), 0.5)
    # pure states with overlap 1/sqrt2: (1 + sqrt(1 - 1/2)) / 2
    assert adv.helstrom_success(a, plus) == pytest.approx(0.5 * (1 + np.sqrt(0.5)))


def test_pgm_on_identical_states_is_uniform_guess():
    rho = np.diag([0.3, 0.7])
    for h in (2, 3, 5):
        assert adv.pgm_success([rho] * h) == pytest.approx(1.0 / h, abs=1e-12)


def test_pgm_on_orthogonal_states_is_perfect():
    states = [np.diag(v) for v in np.eye(3)]
    assert adv.pgm_success(states) == pytest.approx(1.0)


@pytest.mark.parametrize("view", adv.VIEWS)
def test_ideal_state_gives_exactly_one_over_h(view):
    for n in (3, 4, 5):
        psi = adv.rotated_family_state(n, 0.0)
        for size in range(1, n - 1):
            coalition = adv.Coalition(frozenset(range(size)), n)
            s, rep = adv.pgm_identity_guess(psi, coalition, 0.0, view)
            assert s == pytest.approx(1.0 / coalition.h, abs=1e-12)
            assert rep.guess_frequencies.sum() == pytest.approx(1.0)


def test_coalition_only_view_never_learns():
    rng = np.random.default_rng(0)
    ref = qsim.phi_basis_state(4, 0)
    psi = adv.rotated_family_state(4, 0.6, qsim.random_direction(ref, rng))
    s, rep = adv.pgm_identity_guess(psi, adv.Coalition(frozenset({0}), 4), 0.6, "coalition")
    assert s == pytest.approx(1 / 3, abs=1e-10)


def test_example_family_single_member_bound():
    psi = adv.rotated_family_state(4, 0.6)
    assert adv.eps_tilde(0.6) == pytest.approx(EPS_TILDE_06)
    for view in adv.VIEWS:
        s, rep = adv.pgm_identity_guess(psi, adv.Coalition(frozenset({0}), 4), 0.6, view)
        assert s <= 1 / 3 + EPS_TILDE_06 + 1e-9
        assert rep.bound == pytest.approx(1 / 3 + EPS_TILDE_06)


def test_two_state_sandwich():
    rng = np.random.default_rng(4)
    ref = qsim.phi_basis_state(4, 0)
    for eps in (0.3, 0.6):
        psi = adv.rotated_family_state(4, eps, qsim.random_direction(ref, rng))
        for view in adv.VIEWS:
            s, rep = adv.pgm_identity_guess(psi, adv.Coalition(frozenset({0, 1}), 4), eps, view)
            assert rep.optimum is not None
            assert s <= rep.optimum + 1e-12
            assert rep.optimum <= 0.5 + adv.eps_tilde(eps) + 1e-9
            assert rep.within_bound


def test_rotated_family_overlap():
    for eps in (0.0, 0.3, 0.6):
        psi = adv.rotated_family_state(4, eps)
        ov = abs(np.vdot(qsim.phi_basis_state(4, 0).amplitudes, psi.amplitudes))
        assert ov == pytest.approx((1 - eps * eps) ** 0.25)


def test_unknown_view():
    with pytest.raises(PreconditionError):
        adv.identity_family(qsim.ghz_state(3), adv.Coalition(frozenset({0}), 3), "oracle")


# ---------------------------------------------------------------------------
# model strings
# ---------------------------------------------------------------------------

def test_parse_source_models():
    assert isinstance(adv.parse_source_model("ideal"), adv.IdealSource)
    assert adv.parse_source_model("eps_far:0.6").eps == 0.6
    assert adv.parse_source_model("overlap:0.9").amp == 0.9
    assert adv.parse_source_model("worst:0.3").describe() == "worst:0.3"
    sched = adv.parse_source_model("schedule:ideal,eps_far=0.6")
    assert sched.describe() == "schedule:ideal,eps_far=0.6"
    for bad in ("nope", "eps_far:x", "schedule:"):
        with pytest.raises(ConfigError):
            adv.parse_source_model(bad)


def test_parse_adversary_models():
    assert isinstance(adv.parse_adversary_model("none", 4), adv.NoAdversary)
    a = adv.parse_adversary_model("coalition:[0,2]+tamper:flip:1,3", 4)
    assert a.members == {0, 2} and a.attack == adv.FlipRowBit(1, 3)
    assert a.describe() == "coalition:[0,2]+tamper:flip:1,3"
    assert isinstance(adv.parse_adversary_model("tamper:grow", 4).attack, adv.AddRowCol)
    for bad in ("coalition:[0,1,2,3]", "coalition:[a]", "tamper:flip:9,0", "tamper:flip:1", "evil"):
        with pytest.raises(ConfigError):
            adv.parse_adversary_model(bad, 4)
