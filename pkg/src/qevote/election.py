"""Casting, tallying and the full three-phase election.

An election runs in three phases over one :class:`~qevote.network.Network`:

1. every agent anonymously receives a distinct secret round index;
2. for each round, the agent holding that index repeatedly either
   triggers a verification of a fresh shared state or, once its coins
   all come up heads, casts its vote on the current state;
3. the board is tallied and every agent may anonymously object if its
   own row does not carry its vote.

Randomness is split from one root seed into independent streams for the
agents, for measurement outcomes and for the public ordering shuffle, so
an election is a pure function of ``(config, votes, source, adversary)``.
"""

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import anoncast, qsim
from . import transcript as tr
from . import verify
from .errors import BoardRejected, ConfigError, PreconditionError, StrategyFault
from .network import Network, make_agents
from .transcript import bitstr

ACCEPTED = "accepted"
ABORTED = "aborted"
ABORT_THRESHOLD = "verification-threshold"
ABORT_OBJECTION = "phase3-objection"
ABORT_BOARD = "malformed-board"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def coin_count_raw(n, epsilon, delta, eta):
    """Unrounded base-2 log of the coin-count formula."""
    if not 0.0 < eta < 1.0:
        raise ConfigError("eta must lie strictly between 0 and 1")
    gap = epsilon * epsilon - 4.0 * delta
    if gap <= 0.0:
        raise ConfigError(
            f"need epsilon^2 > 4*delta (alpha = 1 - 4 delta / epsilon^2 must be positive); "
            f"got epsilon={epsilon}, delta={delta}"
        )
    return math.log2(16.0 * n * epsilon * epsilon / (gap * gap) * math.log(1.0 / eta))


def coin_count(n, epsilon, delta, eta):
    """Coins the voting agent tosses per repetition, rounded up."""
    return max(1, math.ceil(coin_count_raw(n, epsilon, delta, eta)))


@dataclass(frozen=True)
class ElectionConfig:
    n_agents: int
    epsilon: float = 0.6
    delta: float = 0.05
    eta: float = 0.001
    gamma: int = 3
    sigma: int = 1
    lam: float = 0.1
    candidates: int = 2
    amplification_rounds: int = 1
    seed: int = 0
    qubit_cap: int = qsim.DEFAULT_QUBIT_CAP
    coins: int = None

    def __post_init__(self):
        n = self.n_agents
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise ConfigError("n_agents must be an integer >= 2")
        if n > self.qubit_cap:
            raise ConfigError(f"n_agents={n} exceeds the qubit cap {self.qubit_cap}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie strictly between 0 and 1")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigError("delta must lie in [0, 1)")
        if self.gamma < 0 or self.sigma < 1:
            raise ConfigError("gamma must be >= 0 and sigma >= 1")
        if self.lam <= 0.0:
            raise ConfigError("lambda must be positive")
        if self.candidates < 2:
            raise ConfigError("need at least two candidates")
        if self.amplification_rounds < 1:
            raise ConfigError("amplification_rounds must be >= 1")
        if self.coins is not None and self.coins < 0:
            raise ConfigError("coins must be nonnegative")
        coin_count_raw(n, self.epsilon, self.delta, self.eta)  # validates eta and alpha

    @property
    def or_params(self):
        return anoncast.OrParams(self.gamma, self.sigma)

    @property
    def S(self):
        return self.or_params.security

    @property
    def alpha(self):
        return 1.0 - 4.0 * self.delta / (self.epsilon * self.epsilon)

    @property
    def M_raw(self):
        return coin_count_raw(self.n_agents, self.epsilon, self.delta, self.eta)

    @property
    def M(self):
        if self.coins is not None:
            return self.coins
        return coin_count(self.n_agents, self.epsilon, self.delta, self.eta)

    def with_(self, **changes):
        return replace(self, **changes)

    KEYS = ("n_agents", "epsilon", "delta", "eta", "gamma", "sigma", "lambda", "candidates",
            "amplification_rounds", "seed", "qubit_cap", "coins")

    @classmethod
    def from_mapping(cls, data):
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "n_agents" not in data:
            raise ConfigError("configuration must set n_agents")
        return cls(**data)

    def to_mapping(self):
        out = {}
        for key in self.KEYS:
            value = getattr(self, "lam" if key == "lambda" else key)
            if value is not None:
                out[key] = value
        return out


# ---------------------------------------------------------------------------
# board and tally
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BulletinBoard:
    """Row ``l`` holds the bits broadcast in round ``l`` (one column per agent)."""

    rows: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(b) & 1 for b in r) for r in self.rows)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            shape = (n, sorted({len(r) for r in rows}))
            raise BoardRejected(f"board must be square N x N; got {shape[0]} rows of lengths {shape[1]}")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self):
        return len(self.rows)

    def as_array(self):
        return np.array(self.rows, dtype=np.uint8)

    def encode(self):
        return "/".join(bitstr(r) for r in self.rows)


@dataclass(frozen=True)
class VoteVector:
    e: tuple

    @classmethod
    def of(cls, board):
        return cls(tuple(sum(r) % 2 for r in board.rows))


@dataclass(frozen=True)
class Tally:
    counts: tuple
    invalid: int = 0

    @property
    def total(self):
        return sum(self.counts) + self.invalid

    @property
    def tie(self):
        top = max(self.counts)
        return sum(1 for c in self.counts if c == top) > 1

    @property
    def winner(self):
        return None if self.tie else int(np.argmax(self.counts))

    @classmethod
    def of(cls, values, candidates=2):
        counts = [0] * candidates
        invalid = 0
        for v in values:
            if 0 <= v < candidates:
                counts[v] += 1
            else:
                invalid += 1
        return cls(tuple(counts), invalid)


def assemble_and_tally(rows, n=None):
    """Build the board, its row parities and their histogram.

    ``n`` is the roster size; a board whose shape differs from ``n x n``
    is rejected with :class:`BoardRejected`.
    """
    board = BulletinBoard(tuple(rows))
    if n is not None and board.n != n:
        raise BoardRejected(f"board is {board.n} x {board.n} but there are {n} agents")
    e = VoteVector.of(board)
    return board, e, Tally.of(e.e)


def cast_row(outcomes, voter, vote):
    """Round bits as broadcast: the measurement outcomes with the voter's bit XORed with its vote."""
    row = [int(b) for b in outcomes]
    row[voter] ^= int(vote)
    return tuple(row)


def verifiability(board, omega, vote):
    """1 iff the round indexed by ``omega`` (1-based) carries ``vote``."""
    e = VoteVector.of(board).e
    return int(e[omega - 1] == int(vote))


# ---------------------------------------------------------------------------
# outcome
# ---------------------------------------------------------------------------

@dataclass
class ElectionOutcome:
    status: str
    reason: str = None
    board: BulletinBoard = None
    votes: VoteVector = None
    tally: Tally = None
    assignment: anoncast.IndexAssignment = None
    parts: list = field(default_factory=list)
    table: tuple = None
    stats: dict = field(default_factory=dict)
    transcript: tr.Transcript = None

    @property
    def accepted(self):
        return self.status == ACCEPTED

    @property
    def tie(self):
        return self.tally is not None and self.tally.tie

    def record(self):
        """Canonical text form; two runs agree iff their records are equal."""
        lines = [f"status={self.status}", f"reason={self.reason or '-'}"]
        if self.board is not None:
            lines.append(f"board={self.board.encode()}")
        if self.votes is not None:
            lines.append(f"E={bitstr(self.votes.e)}")
        if self.tally is not None:
            lines.append("T=" + ",".join(str(c) for c in self.tally.counts) + f";invalid={self.tally.invalid}")
            lines.append(f"tie={int(self.tally.tie)}")
        for i, part in enumerate(self.parts):
            lines.append(f"part{i}.E={bitstr(part.votes.e) if part.votes else '-'}")
        for key in sorted(self.stats):
            lines.append(f"{key}={self.stats[key]}")
        if self.transcript is not None and len(self.transcript):
            lines.append(f"transcript={self.transcript.digest()}")
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.record().encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# protocol steps
# ---------------------------------------------------------------------------

def voting_round(state, voter, vote, net, rng):
    """All agents measure in the Hadamard basis; the voter XORs its vote in; all broadcast.

    Returns the broadcast row. ``rng`` drives the joint measurement outcome.
    """
    if not 0 <= voter < state.n_qubits:
        raise PreconditionError(f"voter {voter} out of range")
    d = qsim.measure_all_hadamard(state, rng)
    for k, agent in enumerate(net.agents):
        agent.outcomes.append(d[k])
        net.local(k, "vote.d", d[k])
    row = cast_row(d, voter, vote)
    for k, b in enumerate(row):
        net.broadcast(k, "vote.b", b)
    return row


def phase3_objection(objections, params, net, rng=None):
    """Anonymous objection round. Returns True (accept) iff nobody's objection got through."""
    res = anoncast.logical_or(objections, params, None, net, rng, kind="object")
    return res.y == 0


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceContext:
    """Public facts handed to the state source with every request."""

    sub: int
    round: int
    repeat: int
    n: int
    history: object = None


class ElectionRun:
    """Mutable state of one election: agents, streams and network."""

    def __init__(self, config, source=None, adversary=None, transcript=None, seed=None):
        from . import adversary as adv  # deferred: the adversary module builds on this one

        self.config = config
        self.source = source if source is not None else adv.IdealSource()
        self.adversary = adversary if adversary is not None else adv.NoAdversary()
        seed = config.seed if seed is None else seed
        root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        agent_ss, nature_ss, public_ss, adversary_ss = root.spawn(4)
        n = config.n_agents
        self.nature = np.random.default_rng(nature_ss)
        self.adv_rng = np.random.default_rng(adversary_ss)
        self.net = Network(make_agents(n, agent_ss), transcript)
        self.net.schedule = anoncast.OrderingSchedule.draw(n, np.random.default_rng(public_ss))
        self.net.announce("or.schedule", self.net.schedule.encode())
        self.stats = {"verifications": 0, "rejections": 0, "repeats": 0}
        self.assignment = None

    @property
    def n(self):
        return self.config.n_agents

    def phase1(self):
        self.net.at(1, 0)
        self.assignment = anoncast.unique_index(self.n, anoncast.detection_params(self.n), self.net)
        return self.assignment

    def assign(self, assignment):
        """Skip Phase 1 with a given index assignment (experiments and worked examples)."""
        self.assignment = assignment
        for k, agent in enumerate(self.net.agents):
            agent.omega = assignment.omega[k]

    def _emit_state(self, ctx):
        state = self.source.emit(ctx, self.adv_rng)
        if not isinstance(state, qsim.PureState) or state.n_qubits != self.n or state.spent:
            raise StrategyFault(f"source produced an invalid state for {self.n} agents: {state!r}")
        if abs(state.norm_sq() - 1.0) > 1e-10:
            raise StrategyFault("source produced an unnormalised state")
        return state

    def voting_phase_round(self, ell, vote, sub=0):
        """Run round ``ell`` of Phase 2. Returns ``(row, counters)``; row is None on abort."""
        net = self.net
        net.at(2, ell)
        voter = self.assignment.voter_of(ell)
        agent = net.agents[voter]
        m = self.config.M
        counters = verify.VerifierCounters.fresh(self.n)
        repeat = 0
        while True:
            ctx = SourceContext(sub, ell, repeat, self.n, net.transcript)
            state = self._emit_state(ctx)
            repeat += 1
            go_verify = 0 if agent.toss(m) else 1
            inputs = [0] * self.n
            inputs[voter] = go_verify
            if anoncast.logical_or(inputs, anoncast.DETERMINISTIC, None, net, kind="announce").y == 0:
                break
            verifier = anoncast.random_agent(voter, self.n, anoncast.DETERMINISTIC, None, net)
            if self.adversary.controls(verifier):
                outcome = self.adversary.verify_as(state, verifier, net, self.nature)
            else:
                outcome = verify.verification_round(state, verifier, net, self.nature)
            verify.record_trial(counters, verifier, outcome.accepted)
            self.stats["verifications"] += 1
            self.stats["rejections"] += int(not outcome.accepted)
        self.stats["repeats"] += repeat
        if verify.threshold_abort(counters, self.config.delta):
            net.announce("phase2.abort", ABORT_THRESHOLD)
            return None, counters
        return voting_round(state, voter, vote, net, self.nature), counters

    def phase2(self, votes_of_agent, sub=0):
        """All N rounds; ``votes_of_agent[k]`` is agent k's bit. Returns rows or None on abort."""
        rows = []
        for ell in range(1, self.n + 1):
            voter = self.assignment.voter_of(ell)
            row, _ = self.voting_phase_round(ell, votes_of_agent[voter], sub)
            if row is None:
                return None
            rows.append(row)
        return rows

    def tally(self, rows):
        rows = self.adversary.tamper_rows(rows)
        try:
            return assemble_and_tally(rows, self.n)
        except BoardRejected:
            self.net.announce("phase3.reject", "board-shape")
            raise

    def phase3(self, wronged):
        """``wronged[k]`` is True if agent k saw its vote misrecorded."""
        self.net.at(3, 0)
        objections = [0 if self.adversary.controls(k) else int(bool(w)) for k, w in enumerate(wronged)]
        return phase3_objection(objections, self.config.or_params, self.net)

    def aborted(self, reason, **kw):
        self.net.announce("election.abort", reason)
        return ElectionOutcome(ABORTED, reason, assignment=self.assignment,
                               stats=dict(self.stats), transcript=self.net.transcript, **kw)


def _check_votes(votes, n, candidates=2):
    votes = tuple(int(v) for v in votes)
    if len(votes) != n:
        raise ConfigError(f"{len(votes)} votes for {n} agents")
    if any(not 0 <= v < candidates for v in votes):
        raise ConfigError(f"votes must lie in 0..{candidates - 1}")
    return votes


def run_election(config, votes, source=None, adversary=None, transcript=None, seed=None):
    """One binary election; ``votes[k]`` is agent k's vote."""
    if config.candidates > 2:
        raise ConfigError("use multi_candidate_election for more than two candidates")
    votes = _check_votes(votes, config.n_agents)
    run = ElectionRun(config, source, adversary, transcript, seed)
    run.phase1()
    rows = run.phase2(votes)
    if rows is None:
        return run.aborted(ABORT_THRESHOLD)
    try:
        board, e, tally = run.tally(rows)
    except BoardRejected:
        return run.aborted(ABORT_BOARD)
    omega = run.assignment.omega
    wronged = [e.e[omega[k] - 1] != votes[k] for k in range(config.n_agents)]
    if not run.phase3(wronged):
        return run.aborted(ABORT_OBJECTION, board=board, votes=e)
    run.net.announce("election.accept", bitstr(e.e))
    return ElectionOutcome(ACCEPTED, None, board, e, tally, run.assignment,
                           stats=dict(run.stats), transcript=run.net.transcript)


def candidate_bits(candidate, width):
    return tuple((candidate >> (width - 1 - i)) & 1 for i in range(width))


def multi_candidate_election(config, votes, source=None, adversary=None, transcript=None, seed=None):
    """``ceil(log2 K)`` binary elections sharing one index assignment.

    Each sub-election carries one bit of every voter's candidate id
    (most significant first). A single objection round runs at the end.
    Row ``l`` of ``outcome.table`` lists the bits recorded in round ``l``
    across the sub-elections.
    """
    k = config.candidates
    if k == 2:
        return run_election(config, votes, source, adversary, transcript, seed)
    n = config.n_agents
    votes = _check_votes(votes, n, k)
    width = math.ceil(math.log2(k))
    run = ElectionRun(config, source, adversary, transcript, seed)
    run.phase1()
    parts = []
    for i in range(width):
        bit_votes = [candidate_bits(v, width)[i] for v in votes]
        rows = run.phase2(bit_votes, sub=i)
        if rows is None:
            out = run.aborted(ABORT_THRESHOLD)
            out.parts = parts
            return out
        try:
            board, e, tally = run.tally(rows)
        except BoardRejected:
            out = run.aborted(ABORT_BOARD)
            out.parts = parts
            return out
        parts.append(ElectionOutcome(ACCEPTED, None, board, e, tally, run.assignment))
    table = tuple(tuple(p.votes.e[ell] for p in parts) for ell in range(n))
    omega = run.assignment.omega
    wronged = [table[omega[a] - 1] != candidate_bits(votes[a], width) for a in range(n)]
    if not run.phase3(wronged):
        out = run.aborted(ABORT_OBJECTION)
        out.parts = parts
        out.table = table
        return out
    decoded = [int("".join(map(str, row)), 2) for row in table]
    return ElectionOutcome(ACCEPTED, None, None, VoteVector(tuple(decoded)), Tally.of(decoded, k),
                           run.assignment, parts, table, dict(run.stats), run.net.transcript)


def amplified_election(config, votes, source=None, adversary=None, transcript=None, seed=None):
    """``Q`` binary elections whose per-voter XOR encodes the vote.

    In every sub-election but the last a voter casts a fresh uniform bit
    from its own stream; in the last it casts whatever makes the XOR of
    its bits equal its vote. The recovered vote vector is the XOR of the
    sub-elections' vote vectors.
    """
    q = config.amplification_rounds
    if q == 1:
        return run_election(config, votes, source, adversary, transcript, seed)
    n = config.n_agents
    votes = _check_votes(votes, n)
    run = ElectionRun(config, source, adversary, transcript, seed)
    run.phase1()
    parity = list(votes)
    cast = []
    parts = []
    for sub in range(q):
        if sub < q - 1:
            bits = [a.draw_bit() for a in run.net.agents]
            parity = [p ^ b for p, b in zip(parity, bits)]
        else:
            bits = parity
        cast.append(bits)
        rows = run.phase2(bits, sub=sub)
        if rows is None:
            out = run.aborted(ABORT_THRESHOLD)
            out.parts = parts
            return out
        try:
            board, e, tally = run.tally(rows)
        except BoardRejected:
            out = run.aborted(ABORT_BOARD)
            out.parts = parts
            return out
        parts.append(ElectionOutcome(ACCEPTED, None, board, e, tally, run.assignment))
    omega = run.assignment.omega
    wronged = [any(p.votes.e[omega[a] - 1] != cast[s][a] for s, p in enumerate(parts)) for a in range(n)]
    if not run.phase3(wronged):
        out = run.aborted(ABORT_OBJECTION)
        out.parts = parts
        return out
    e = tuple(int(np.bitwise_xor.reduce([p.votes.e[ell] for p in parts])) for ell in range(n))
    return ElectionOutcome(ACCEPTED, None, None, VoteVector(e), Tally.of(e), run.assignment,
                           parts, None, dict(run.stats), run.net.transcript)


# ---------------------------------------------------------------------------
# the worked four-agent example
# ---------------------------------------------------------------------------

FIG1_OUTCOMES = ((0, 1, 1, 0), (0, 0, 0, 1), (1, 1, 1, 1), (1, 0, 0, 0))
"""Per-agent Hadamard outcomes across the four rounds."""
FIG1_ORDER = (3, 1, 0, 2)
"""Voter of each round (0-based agents)."""
FIG1_ROUND_VOTES = (0, 1, 1, 1)
"""Vote cast in each round."""


def worked_example(outcomes=FIG1_OUTCOMES, order=FIG1_ORDER, round_votes=FIG1_ROUND_VOTES):
    """Rebuild the board from fixed outcomes, voting order and votes."""
    n = len(order)
    rows = []
    for ell in range(n):
        d = tuple(outcomes[k][ell] for k in range(n))
        rows.append(cast_row(d, order[ell], round_votes[ell]))
    return assemble_and_tally(rows, n)
