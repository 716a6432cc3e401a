"""Monte Carlo experiments checking the closed-form bounds.

Every experiment returns an :class:`ExperimentReport`. A report compares
one empirical frequency against one reference value in a stated
direction, with a margin of three standard errors; extra comparisons are
attached as sub-reports and the overall verdict requires all of them.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .. import adversary as adv
from .. import anoncast, qsim, verify
from ..election import ElectionConfig, ElectionRun, cast_row, voting_round
from ..network import Network, make_agents
from . import bounds as bnd

LE = "<="
GE = ">="
CLOSE = "~="
EXACT = "=="


def binomial_se(p, trials):
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials) if trials else 0.0


@dataclass
class ExperimentReport:
    experiment: str
    trials: int
    estimate: float
    stderr: float
    bound: float
    direction: str
    runtime: float = 0.0
    seed: int = 0
    label: str = ""
    extra: dict = field(default_factory=dict)
    subreports: list = field(default_factory=list)

    @property
    def margin(self):
        return 3.0 * self.stderr

    @property
    def own_verdict(self):
        if self.direction == LE:
            return self.estimate <= self.bound + self.margin
        if self.direction == GE:
            return self.estimate >= self.bound - self.margin
        if self.direction == EXACT:
            return self.estimate == self.bound
        return abs(self.estimate - self.bound) <= self.margin

    @property
    def passed(self):
        return self.own_verdict and all(r.passed for r in self.subreports)

    def lines(self, indent=""):
        verdict = "PASS" if self.passed else "FAIL"
        head = (f"{indent}{verdict} {self.experiment}{(' ' + self.label) if self.label else ''}: "
                f"estimate={self.estimate:.6g} (se {self.stderr:.3g}, 3se {self.margin:.3g}) "
                f"{self.direction} {self.bound:.6g} trials={self.trials}")
        out = [head]
        if self.runtime:
            out.append(f"{indent}  runtime={self.runtime:.2f}s seed={self.seed}")
        for key in sorted(self.extra):
            out.append(f"{indent}  {key}={self.extra[key]}")
        for sub in self.subreports:
            out.extend(sub.lines(indent + "  "))
        return out

    def text(self):
        return "\n".join(self.lines()) + "\n"

    def to_dict(self):
        return {
            "experiment": self.experiment, "label": self.label, "trials": self.trials,
            "estimate": self.estimate, "stderr": self.stderr, "bound": self.bound,
            "direction": self.direction, "passed": self.passed, "runtime": self.runtime,
            "seed": self.seed, "extra": {k: _plain(v) for k, v in self.extra.items()},
            "subreports": [s.to_dict() for s in self.subreports],
        }


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (tuple, list)):
        return [_plain(x) for x in v]
    return v


def _freq_report(name, hits, trials, bound, direction, label="", **extra):
    p = hits / trials
    return ExperimentReport(name, trials, p, binomial_se(p, trials), bound, direction, label=label, extra=extra)


def _oracle_report(name, hits, trials, exact, label=""):
    """Two-sided comparison against an exact value, margin from the exact variance."""
    p = hits / trials
    return ExperimentReport(name, trials, p, binomial_se(exact, trials), exact, CLOSE, label=label)


def _streams(seed, k):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def experiment_verification(n, eps, trials, seed=0, oracle_draws=10_000):
    """Protocol-level verification rounds on the canonical ``eps``-far state."""
    t0 = time.perf_counter()
    rng_agents, rng_nature, rng_pick, rng_oracle = _streams(seed, 4)
    state = qsim.state_at_trace_distance(n, eps)
    net = Network(make_agents(n, rng_agents))
    rejected = 0
    for _ in range(trials):
        verifier = int(rng_pick.integers(n))
        if not verify.verification_round(state.copy(), verifier, net, rng_nature).accepted:
            rejected += 1
    exact = verify.mean_rejection_probability(state, oracle_draws, rng_oracle)
    rep = _freq_report("verification", rejected, trials, eps * eps / 4.0, GE, label=f"n={n} eps={eps}")
    rep.extra["oracle_rejection"] = exact
    diff = abs(rep.estimate - exact)
    rep.subreports.append(ExperimentReport("verification-oracle", trials, diff, 0.0, 0.01, LE,
                                           label="|MC - oracle|"))
    rep.runtime = time.perf_counter() - t0
    rep.seed = seed
    return rep


# ---------------------------------------------------------------------------
# no-abort frequency under a far source
# ---------------------------------------------------------------------------

def experiment_theorem1(config, trials, seed=0, source=None):
    """Single Phase-2 voting rounds fed a constant ``epsilon``-far state.

    Counts rounds where the threshold check lets the vote through and
    compares that frequency with the Chernoff bound at the configured
    coin count.
    """
    t0 = time.perf_counter()
    n = config.n_agents
    if source is None:
        source = adv.FixedTraceDistance(config.epsilon)
    bound = bnd.no_abort_bound(config.M, n, config.epsilon, config.delta)
    identity = anoncast.IndexAssignment(tuple(range(1, n + 1)))
    passed = 0
    verifications = 0
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        run = ElectionRun(config, source, None, None, child)
        run.assign(identity)
        row, _ = run.voting_phase_round(1, 0)
        passed += row is not None
        verifications += run.stats["verifications"]
    rep = _freq_report("theorem1", passed, trials, bound, LE,
                       label=f"n={n} eps={config.epsilon} delta={config.delta} M={config.M}",
                       mean_verifications=verifications / trials, source=source.describe()
                       if hasattr(source, "describe") else "custom")
    rep.runtime = time.perf_counter() - t0
    rep.seed = seed
    return rep


# ---------------------------------------------------------------------------
# tally error per voting round
# ---------------------------------------------------------------------------

def exact_parity_error(state):
    """Probability that Hadamard outcomes of ``state`` have odd parity."""
    probs = qsim.outcome_probabilities(state, qsim.MeasurementAngles.zeros(state.n_qubits))
    return float(probs[qsim.parity_table(state.n_qubits) == 1].sum())


def experiment_theorem3(n, eps, trials, seed=0, direction=None):
    t0 = time.perf_counter()
    rng_agents, rng_nature, rng_votes = _streams(seed, 3)
    state = qsim.state_at_trace_distance(n, eps, direction)
    net = Network(make_agents(n, rng_agents))
    errors = 0
    for _ in range(trials):
        voter = int(rng_votes.integers(n))
        vote = int(rng_votes.integers(2))
        row = voting_round(state.copy(), voter, vote, net, rng_nature)
        errors += (sum(row) % 2) != vote
    exact = exact_parity_error(state)
    rep = _freq_report("theorem3", errors, trials, eps, LE, label=f"n={n} eps={eps}", oracle_error=exact)
    rep.subreports.append(ExperimentReport("theorem3-oracle", 0, exact, 0.0, eps, LE, label="exact error"))
    rep.runtime = time.perf_counter() - t0
    rep.seed = seed
    return rep


# ---------------------------------------------------------------------------
# coalition identity guessing
# ---------------------------------------------------------------------------

def experiment_theorem2(ns=(3, 4, 5, 6), epsilons=(0.0, 0.3, 0.6), views=adv.VIEWS, directions=3, seed=0):
    """Exact pretty-good-measurement identity guessing over a parameter grid.

    For every case the report stores the worst slack ``success - bound``;
    it must not exceed ``1e-9``. At ``eps = 0`` success must equal ``1/H``.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = -np.inf
    worst_case = None
    ideal_dev = 0.0
    cases = 0
    for n in ns:
        ref = qsim.phi_basis_state(n, 0)
        dirs = [None] + [qsim.random_direction(ref, rng) for _ in range(directions)]
        for eps in epsilons:
            for d in (dirs if eps > 0 else [None]):
                psi = adv.rotated_family_state(n, eps, d)
                for size in range(1, n - 1):
                    coalition = adv.Coalition(frozenset(range(size)), n)
                    for view in views:
                        success, rep = adv.pgm_identity_guess(psi, coalition, eps, view)
                        cases += 1
                        slack = max(success, rep.optimum or 0.0) - rep.bound
                        if slack > worst:
                            worst, worst_case = slack, (n, eps, size, view, round(success, 6))
                        if eps == 0:
                            ideal_dev = max(ideal_dev, abs(success - 1.0 / coalition.h))
    rep = ExperimentReport("theorem2", cases, worst, 0.0, 1e-9, LE, label="max(success - bound)",
                           extra={"worst_case": worst_case})
    rep.subreports.append(ExperimentReport("theorem2-ideal", cases, ideal_dev, 0.0, 1e-12, LE,
                                           label="max |success - 1/H| at eps=0"))
    rep.runtime = time.perf_counter() - t0
    rep.seed = seed
    return rep


def experiment_privacy(n, eps, coalition, trials, seed=0, view="public", amplification=1,
                       honest_zero_votes=None, eta=0.0):
    """Sampled identity and vote guessing by a coalition using the PGM.

    Each trial plays one election's honest rounds: every honest agent
    votes once in a random round, and in each round the coalition's PGM
    outcome is sampled exactly. To guess the vote of a target honest
    agent it picks a round whose guess named that agent (or any honest
    round if none did) and reads that round's public vote.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    ref = qsim.phi_basis_state(n, 0)
    direction = qsim.random_direction(ref, np.random.default_rng(seed + 1)) if eps > 0 else None
    psi = adv.rotated_family_state(n, eps, direction)
    _, grep = adv.pgm_identity_guess(psi, coalition, eps, view)
    g = grep.guess_given_true
    g = np.clip(g, 0.0, None)
    g = g / g.sum(axis=1, keepdims=True)
    h = coalition.h
    h0 = h // 2 if honest_zero_votes is None else honest_zero_votes
    base_votes = np.array([0] * h0 + [1] * (h - h0))

    identity_hits = 0
    vote_hits = 0
    full_hits = 0
    baseline = 0.0
    for _ in range(trials):
        full_ok = True
        for _q in range(amplification):
            votes = rng.permutation(base_votes)  # honest position -> vote
            order = rng.permutation(h)  # round -> honest position
            guesses = np.array([rng.choice(h, p=g[i]) for i in order])
            identity_hits += int(guesses[0] == order[0])
            target = 0
            named = np.flatnonzero(guesses == target)
            pick = rng.choice(named) if named.size else rng.integers(h)
            ok = votes[order[pick]] == votes[target]
            vote_hits += int(ok)
            baseline += np.mean(votes == votes[target])
            full_ok &= bool(ok)
        full_hits += int(full_ok)
    rounds = trials * amplification
    id_rep = _freq_report("privacy-identity", identity_hits, rounds, grep.bound, LE,
                          label=f"n={n} eps={eps} view={view} H={h}", exact_pgm=grep.success)
    advantage = vote_hits / rounds - baseline / rounds
    z = bnd.zeta(n, eps, eta)
    vote_rep = ExperimentReport("privacy-vote", rounds, advantage, binomial_se(vote_hits / rounds, rounds),
                                z, LE, label="guess rate minus board prior")
    id_rep.subreports.append(vote_rep)
    if amplification > 1:
        single = vote_hits / rounds
        full = full_hits / trials
        id_rep.subreports.append(ExperimentReport(
            "privacy-amplified", trials, full, binomial_se(full, trials), single ** amplification, LE,
            label=f"all {amplification} sub-votes guessed"))
    id_rep.runtime = time.perf_counter() - t0
    id_rep.seed = seed
    return id_rep


# ---------------------------------------------------------------------------
# correctness (completeness and soundness of the tally)
# ---------------------------------------------------------------------------

def acceptance_oracle(n, round_error, params):
    """Exact acceptance probability when each round errs independently with ``round_error``."""
    total = 0.0
    for j in range(n + 1):
        weight = math.comb(n, j) * round_error ** j * (1.0 - round_error) ** (n - j)
        total += weight * anoncast.or_zero_probability(j, params, n)
    return total


def experiment_correctness(config, trials, source_eps=None, inject=0, seed=0):
    """Voting rounds followed by the objection round, without the verification loop.

    With ``inject = 0`` the acceptance rate is checked against the
    completeness parameter and against the exact oracle. With
    ``inject = k`` the first ``k`` rounds are forced wrong after voting
    on ideal states, and acceptance is checked against ``S**k``.
    """
    t0 = time.perf_counter()
    n = config.n_agents
    params = config.or_params
    eps = config.epsilon if source_eps is None else source_eps
    state = qsim.state_at_trace_distance(n, eps) if inject == 0 else qsim.ghz_state(n)
    rng_agents, rng_nature, rng_public = _streams(seed, 3)
    agents = make_agents(n, rng_agents)
    accepted = 0
    for _ in range(trials):
        net = Network(agents)
        net.schedule = anoncast.OrderingSchedule.draw(n, rng_public)
        order = rng_public.permutation(n)  # round -> voter
        votes = rng_public.integers(0, 2, size=n)
        wronged = [0] * n
        for ell in range(n):
            voter = int(order[ell])
            row = voting_round(state.copy(), voter, int(votes[voter]), net, rng_nature)
            if ell < inject:
                row = cast_row(row, voter, 1)
            wronged[voter] = int(sum(row) % 2 != votes[voter])
        accepted += anoncast.logical_or(wronged, params, None, net, kind="object").y == 0
    if inject == 0:
        p_err = exact_parity_error(state)
        sig = bnd.sigma_h(n, eps, config.S)
        rep = _freq_report("correctness", accepted, trials, sig, GE,
                           label=f"n={n} eps={eps} S={config.S:.4g}", round_error=p_err)
        rep.subreports.append(_oracle_report("correctness-oracle", accepted, trials,
                                             acceptance_oracle(n, p_err, params)))
    else:
        rep = _freq_report("soundness", accepted, trials, config.S ** inject, LE,
                           label=f"n={n} wrong_rows={inject} S={config.S:.4g}")
        rep.subreports.append(_oracle_report("soundness-oracle", accepted, trials,
                                             anoncast.or_zero_probability(inject, params, n)))
    rep.runtime = time.perf_counter() - t0
    rep.seed = seed
    return rep


# ---------------------------------------------------------------------------
# LogicalOr laws
# ---------------------------------------------------------------------------

def experiment_logicalor(n=4, gamma=3, sigma=4, trials=100_000, ones=(1, 2, 3), seed=0):
    t0 = time.perf_counter()
    params = anoncast.OrParams(gamma, sigma)
    rngs = _streams(seed, len(ones) + 1)
    y0 = anoncast.logical_or_trials([0] * n, params, trials, rngs[0])
    rep = ExperimentReport("logicalor", trials, float((y0 == 0).mean()), 0.0, 1.0, EXACT,
                           label="all inputs 0 give 0")
    for j, rng in zip(ones, rngs[1:]):
        inputs = [1] * j + [0] * (n - j)
        y = anoncast.logical_or_trials(inputs, params, trials, rng)
        zeros = int((y == 0).sum())
        exact = anoncast.or_zero_probability(j, params, n)
        chi = stats.chisquare([zeros, trials - zeros], [exact * trials, (1 - exact) * trials])
        sub = _freq_report("logicalor", zeros, trials, params.security ** j, LE,
                           label=f"j={j} Pr[y=0] vs S^j", oracle=exact, chi2_p=float(chi.pvalue))
        sub.subreports.append(ExperimentReport("logicalor-chi2", trials, float(chi.pvalue), 0.0, 0.01, GE,
                                               label=f"j={j} chi2 p-value vs oracle"))
        rep.subreports.append(sub)
    rep.runtime = time.perf_counter() - t0
    rep.seed = seed
    return rep


# ---------------------------------------------------------------------------
# the worked parameter example
# ---------------------------------------------------------------------------

EXAMPLE = ElectionConfig(4, epsilon=0.6, delta=0.05, eta=0.001, amplification_rounds=15)


def sig_figs(x, k=2):
    return float(f"{x:.{k}g}")


def experiment_example(config=EXAMPLE):
    b = bnd.compute_bounds(config)
    rep = ExperimentReport("example", 0, sig_figs(b.eps_tilde), 0.0, 0.7, EXACT, label="eps_tilde (2 s.f.)",
                           extra={"eps_tilde": b.eps_tilde, "M_raw": b.M_raw, "M_used": b.M,
                                  "M_floor": b.M_floor, "zeta": b.zeta.value,
                                  "zeta_tilde": b.zeta_tilde.value,
                                  "no_abort_bound_at_M": b.theorem1.value,
                                  "no_abort_bound_at_floor": b.theorem1_at_floor.value})
    rep.subreports.append(ExperimentReport("example", 0, sig_figs(0.7 ** 15, 1), 0.0, 0.005, EXACT,
                                           label="0.7^15 (1 s.f.)"))
    rep.subreports.append(ExperimentReport("example", 0, sig_figs(b.zeta_tilde.value, 1), 0.0, 0.005, EXACT,
                                           label="zeta^Q (1 s.f.)"))
    rep.subreports.append(ExperimentReport("example", 0, sig_figs(b.M_raw, 3), 0.0, 12.6, EXACT,
                                           label="raw coin count (3 s.f.)"))
    rep.subreports.append(ExperimentReport("example", 0, float(b.any_clamped()), 0.0, 0.0, EXACT,
                                           label="no bound needed clamping"))
    return rep

