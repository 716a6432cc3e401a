"""Classical anonymity subroutines built on XOR secret sharing.

``logical_or`` is the primitive; ``random_bit``, ``random_agent`` and
``unique_index`` are built from it. All of them run over a
:class:`~qevote.network.Network` whose agents draw coins and share bits
from their own random streams, so an agent's behaviour depends only on
its own stream and on public data.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import transcript as tr
from .errors import PreconditionError, ProtocolError
from .transcript import bitstr


@dataclass(frozen=True)
class OrParams:
    """``gamma`` coins per agent and ``sigma`` repetitions per ordering."""

    gamma: int
    sigma: int

    def __post_init__(self):
        if self.gamma < 0:
            raise PreconditionError("gamma must be nonnegative")
        if self.sigma < 1:
            raise PreconditionError("sigma must be positive")

    @property
    def security(self):
        """``S = (1 - 2**-gamma) ** sigma``; 0 for the deterministic variant."""
        return (1.0 - 2.0 ** (-self.gamma)) ** self.sigma

    @property
    def fire_prob(self):
        return 2.0 ** (-self.gamma)


DETERMINISTIC = OrParams(0, 1)


def detection_params(n, target_bits=64):
    """Parameters for collision detection in ``unique_index``.

    One fair coin per repetition makes every repetition expose a
    colliding agent with probability 1/2, so ``n * sigma >= target_bits``
    bounds the chance of a missed collision by ``2**-target_bits``.
    """
    return OrParams(1, max(1, math.ceil(target_bits / n)))


@dataclass(frozen=True)
class OrderingSchedule:
    """N broadcast orderings; every agent is last in exactly one."""

    orderings: tuple

    def __post_init__(self):
        orders = tuple(tuple(int(a) for a in o) for o in self.orderings)
        n = len(orders)
        if n == 0:
            raise PreconditionError("schedule needs at least one ordering")
        for o in orders:
            if sorted(o) != list(range(n)):
                raise PreconditionError(f"ordering {o} is not a permutation of 0..{n - 1}")
        if sorted(o[-1] for o in orders) != list(range(n)):
            raise PreconditionError("each agent must be last in exactly one ordering")
        object.__setattr__(self, "orderings", orders)

    @property
    def n(self):
        return len(self.orderings)

    @classmethod
    def draw(cls, n, rng):
        lasts = rng.permutation(n)
        orders = []
        for k in lasts:
            others = np.array([j for j in range(n) if j != k], dtype=np.int64)
            rng.shuffle(others)
            orders.append(tuple(int(j) for j in others) + (int(k),))
        return cls(tuple(orders))

    def encode(self):
        return "/".join(",".join(str(a) for a in o) for o in self.orderings)


@dataclass(frozen=True)
class IndexAssignment:
    """``omega[k]`` is agent k's secret round index, in ``1..N``."""

    omega: tuple

    def __post_init__(self):
        om = tuple(int(x) for x in self.omega)
        if sorted(om) != list(range(1, len(om) + 1)):
            raise PreconditionError(f"omega {om} is not a permutation of 1..{len(om)}")
        object.__setattr__(self, "omega", om)

    @property
    def n(self):
        return len(self.omega)

    def voter_of(self, round_index):
        return self.omega.index(round_index)

    def voting_order(self):
        """Agents listed by the round in which they vote."""
        return tuple(self.voter_of(r) for r in range(1, self.n + 1))

    @classmethod
    def from_order(cls, order):
        omega = [0] * len(order)
        for r, k in enumerate(order, start=1):
            omega[k] = r
        return cls(tuple(omega))


@dataclass
class OrResult:
    y: int
    w: np.ndarray
    rep_outputs: np.ndarray
    w_reps: np.ndarray
    forced_by: int = None

    def __iter__(self):
        # allows ``y, w = logical_or(...)``
        yield self.y
        yield self.w


def _schedule_for(net, schedule, rng):
    if schedule is not None:
        return schedule
    if net.schedule is None:
        if rng is None:
            raise PreconditionError("no ordering schedule available and no generator to draw one")
        net.schedule = OrderingSchedule.draw(net.n, rng)
        net.announce("or.schedule", net.schedule.encode())
    return net.schedule


def logical_or(inputs, params, schedule=None, net=None, rng=None, kind="or"):
    """Anonymously compute the OR of the agents' private bits.

    For each of the N orderings and each of ``sigma`` repetitions, every
    agent derives ``p_k`` (0 if its input is 0, otherwise 1 iff ``gamma``
    fresh coins are all heads), XOR-shares it among all agents, and the
    agents broadcast the parity of what they received in ordering order.
    The output is 1 iff some repetition had odd parity.

    An agent refusing to broadcast, or sending a malformed share vector,
    forces the output to 1.
    """
    if net is None:
        raise PreconditionError("logical_or needs a network")
    n = net.n
    if n < 2:
        raise PreconditionError("logical_or needs at least two agents")
    x = [int(bool(v)) for v in inputs]
    if len(x) != n:
        raise PreconditionError(f"{len(x)} inputs for {n} agents")
    schedule = _schedule_for(net, schedule, rng)
    if schedule.n != n:
        raise PreconditionError("schedule size does not match the number of agents")

    reps = n * params.sigma
    agents = net.agents
    p = np.empty((reps, n), dtype=np.uint8)
    free = np.empty((reps, n, n - 1), dtype=np.uint8)
    for k, agent in enumerate(agents):
        p[:, k] = agent.or_inputs(x[k], params.gamma, reps)
        free[:, k] = agent.share_noise(reps, n)
    shares, z, yrep, w = _kernels.or_repetitions(p, free)

    malformed = [a.index for a in agents if a.malformed]
    stop_rep, culprit = reps, None
    if malformed:
        stop_rep, culprit = 0, malformed[0]
    else:
        for rep in range(reps):
            order = schedule.orderings[rep // params.sigma]
            silent = [k for k in order if agents[k].refuses_at(rep)]
            if silent:
                stop_rep, culprit = rep, silent[0]
                break

    if net.wants(tr.PUBLIC):
        _emit_or_messages(net, kind, params, schedule, shares, z, stop_rep, culprit, malformed)

    for agent in agents:
        agent.or_reps_seen += min(stop_rep + 1, reps)

    if culprit is not None:
        reason = "malformed" if malformed else "silent"
        net.announce(f"{kind}.forced_one", f"{reason}:{culprit}")
        done = slice(0, stop_rep)
        return OrResult(1, w[done].any(axis=0).astype(np.uint8), yrep[done], w[done], forced_by=culprit)

    y = int(yrep.any())
    net.announce(f"{kind}.result", y)
    return OrResult(y, w.any(axis=0).astype(np.uint8), yrep, w)


def _emit_or_messages(net, kind, params, schedule, shares, z, stop_rep, culprit, malformed):
    n = net.n
    full = net.wants(tr.FULL)
    last = min(stop_rep + 1, shares.shape[0])
    for rep in range(last):
        o, s = divmod(rep, params.sigma)
        step = f"{o}.{s}"
        if full:
            for k in range(n):
                for i in range(n):
                    if i == k:
                        net.local(k, f"{kind}.keep", int(shares[rep, k, k]), step)
                    elif k in malformed:
                        net.send(k, i, f"{kind}.share", bitstr(shares[rep, k]) + "0", step)
                    else:
                        net.send(k, i, f"{kind}.share", int(shares[rep, k, i]), step)
        if malformed:
            return
        for i in schedule.orderings[o]:
            if rep == stop_rep and i == culprit:
                return
            net.broadcast(i, f"{kind}.z", int(z[rep, i]), step)


def random_bit(voting_agent, params, schedule=None, net=None, rng=None, bit=None):
    """The voting agent anonymously announces a random bit.

    Everyone else inputs 0. With ``gamma = 0`` the output equals the
    voting agent's bit.
    """
    if bit is None:
        bit = net.agents[voting_agent].draw_bit()
    inputs = [0] * net.n
    inputs[voting_agent] = int(bit)
    return logical_or(inputs, params, schedule, net, rng, kind="rbit").y


def random_agent(voting_agent, n, params, schedule=None, net=None, rng=None):
    """The voting agent anonymously picks an agent uniformly at random.

    Draws ``ceil(log2 n)`` bits with ``random_bit`` and redraws whenever
    the resulting integer is out of range.
    """
    if n < 2:
        raise PreconditionError("random_agent needs at least two agents")
    nbits = max(1, math.ceil(math.log2(n)))
    while True:
        value = 0
        for _ in range(nbits):
            value = (value << 1) | random_bit(voting_agent, params, schedule, net, rng)
        if value < n:
            net.announce("ragent.result", value)
            return value
        net.announce("ragent.redraw", value)


def unique_index(n, params, net, rng=None, max_or_calls=10_000):
    """Anonymously hand every agent a distinct secret round index.

    Round ``R`` assigns index ``R``: every agent still without an index
    volunteers with probability ``1/t`` (``t`` agents unassigned) and a
    LogicalOr with parameters ``params`` runs. A volunteer who saw
    ``w_k = 0`` in every repetition knows nobody else volunteered and
    claims the index; a deterministic notification LogicalOr where the
    claimant inputs 1 tells everyone the round is over. Otherwise the
    round is retried.

    ``params`` should use at least one coin (see :func:`detection_params`);
    with ``gamma = 0`` an even number of volunteers cannot be told apart
    from none.
    """
    if n != net.n:
        raise PreconditionError(f"network has {net.n} agents, expected {n}")
    if n < 2:
        raise PreconditionError("unique_index needs at least two agents")
    agents = net.agents
    for a in agents:
        a.omega = None
    calls = 0
    r = 1
    while r <= n:
        net.round = r
        unassigned = [a for a in agents if a.omega is None]
        t = len(unassigned)
        prob = 1.0 / t
        x = [0] * n
        for a in unassigned:
            x[a.index] = int(a.rng.random() < prob)
        res = logical_or(x, params, None, net, rng, kind="uidx.or")
        calls += 1
        if res.y == 1:
            claims = [int(x[k] == 1 and not res.w_reps[:, k].any()) for k in range(n)]
            note = logical_or(claims, DETERMINISTIC, None, net, rng, kind="uidx.note")
            calls += 1
            if note.y == 1:
                for k in range(n):
                    if claims[k]:
                        agents[k].omega = r
                        net.local(k, "uidx.assigned", r)
                r += 1
        if calls >= max_or_calls and r <= n:
            raise ProtocolError(
                f"unique_index did not finish within {max_or_calls} LogicalOr invocations "
                f"({r - 1} of {n} indices assigned)"
            )
    omega = tuple(a.omega for a in agents)
    if sorted(omega) != list(range(1, n + 1)):
        raise ProtocolError(f"unique_index produced a non-bijective assignment {omega}")
    net.announce("uidx.done", calls)
    return IndexAssignment(omega)


# ---------------------------------------------------------------------------
# exact laws and batched Monte Carlo
# ---------------------------------------------------------------------------

def or_zero_probability(j, params, n):
    """Exact ``Pr[y = 0]`` when exactly ``j`` agents input 1.

    Each repetition has even parity with probability
    ``(1 + (1 - 2q)**j) / 2`` where ``q = 2**-gamma``; there are
    ``n * sigma`` independent repetitions.
    """
    q = params.fire_prob
    per_rep = 0.5 * (1.0 + (1.0 - 2.0 * q) ** j)
    return per_rep ** (n * params.sigma)


def logical_or_trials(inputs, params, trials, rng, chunk=20_000):
    """Outputs of ``trials`` independent honest LogicalOr runs (no network).

    Same algorithm as :func:`logical_or` with all randomness drawn from
    ``rng`` in bulk; used for large Monte Carlo experiments.
    """
    x = np.array([int(bool(v)) for v in inputs], dtype=np.uint8)
    n = x.shape[0]
    reps = n * params.sigma
    out = np.empty(trials, dtype=np.uint8)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        if params.gamma == 0:
            p = np.broadcast_to(x, (m * reps, n)).copy()
        else:
            coins = rng.integers(0, 2, size=(m * reps, n, params.gamma), dtype=np.uint8)
            p = coins.all(axis=2).astype(np.uint8) & x
        free = rng.integers(0, 2, size=(m * reps, n, n - 1), dtype=np.uint8)
        _, _, yrep, _ = _kernels.or_repetitions(p, free)
        out[done:done + m] = yrep.reshape(m, reps).any(axis=1)
        done += m
    return out


def or_views(transcript, agent, kind="or"):
    """Per-repetition view of ``agent`` from a FULL transcript.

    Each view is ``(kept_share, received_bits, broadcast_bits)`` where
    received bits are ordered by sender and broadcast bits by broadcaster.
    """
    by_step = {}
    call = 0
    for ev in transcript:
        if ev.kind in (f"{kind}.result", f"{kind}.forced_one"):
            call += 1
            continue
        if ev.kind not in (f"{kind}.keep", f"{kind}.share", f"{kind}.z"):
            continue
        entry = by_step.setdefault((call, ev.step), {"keep": None, "recv": {}, "z": {}})
        if ev.kind == f"{kind}.keep" and ev.sender == str(agent):
            entry["keep"] = int(ev.payload)
        elif ev.kind == f"{kind}.share" and ev.receiver == str(agent):
            entry["recv"][int(ev.sender)] = int(ev.payload)
        elif ev.kind == f"{kind}.z":
            entry["z"][int(ev.sender)] = int(ev.payload)
    views = []
    for entry in by_step.values():
        recv = tuple(entry["recv"][s] for s in sorted(entry["recv"]))
        z = tuple(entry["z"][s] for s in sorted(entry["z"]))
        views.append((entry["keep"], recv, z))
    return views


def simulate_or_view(n, agent, kept_share, y_rep, rng):
    """Sample an agent's view of one repetition from its own data and the output.

    Received shares are uniform; the agent's own broadcast follows from
    them and its kept share; the remaining broadcasts are uniform subject
    to their total parity being ``y_rep``.
    """
    recv = rng.integers(0, 2, size=n - 1)
    z = np.empty(n, dtype=np.int64)
    z[agent] = (int(recv.sum()) + kept_share) % 2
    others = [i for i in range(n) if i != agent]
    free = rng.integers(0, 2, size=len(others) - 1)
    for i, b in zip(others[:-1], free):
        z[i] = b
    z[others[-1]] = (y_rep + int(z[agent]) + int(free.sum())) % 2
    return (int(kept_share), tuple(int(b) for b in recv), tuple(int(b) for b in z))
