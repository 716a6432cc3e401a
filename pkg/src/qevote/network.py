"""Agents and the simulated network connecting them.

The network offers authenticated broadcast and perfectly private,
authenticated pairwise channels. Delivery is synchronous: subroutines
drive the agents in the order the protocol prescribes and every message
passes through :class:`Network`, which records it in the transcript at
the appropriate level.
"""

from dataclasses import dataclass, field

import numpy as np

from . import transcript as tr


@dataclass(eq=False)
class Agent:
    """One voter. Holds its own random stream and private protocol state.

    ``silent_at`` makes the agent refuse to broadcast from the given
    LogicalOr repetition onwards (counted across the agent's lifetime);
    ``malformed`` makes it send share vectors of the wrong length.
    """

    index: int
    rng: np.random.Generator
    silent_at: int = None
    malformed: bool = False
    omega: int = None
    vote: int = None
    outcomes: list = field(default_factory=list)
    or_reps_seen: int = 0

    def or_inputs(self, x, gamma, reps):
        """Randomised inputs ``p_k`` for ``reps`` repetitions of LogicalOr."""
        if not x:
            return np.zeros(reps, dtype=np.uint8)
        if gamma == 0:
            return np.ones(reps, dtype=np.uint8)
        coins = self.rng.integers(0, 2, size=(reps, gamma), dtype=np.uint8)
        return coins.all(axis=1).astype(np.uint8)

    def share_noise(self, reps, n):
        return self.rng.integers(0, 2, size=(reps, n - 1), dtype=np.uint8)

    def refuses_at(self, rep):
        """True if this agent will not broadcast in its ``rep``-th repetition overall."""
        return self.silent_at is not None and self.or_reps_seen + rep >= self.silent_at

    def toss(self, m):
        """``m`` fair coins; True iff all heads."""
        if m <= 0:
            return True
        return bool(self.rng.integers(0, 2, size=m).all())

    def draw_bit(self):
        return int(self.rng.integers(0, 2))


def make_agents(n, seed):
    """Agents with independent streams spawned from ``seed``.

    ``seed`` may be an int, a SeedSequence or a Generator.
    """
    if isinstance(seed, np.random.Generator):
        children = seed.spawn(n)
    else:
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        children = [np.random.default_rng(s) for s in ss.spawn(n)]
    return [Agent(i, g) for i, g in enumerate(children)]


class Network:
    def __init__(self, agents, transcript=None, schedule=None):
        self.agents = list(agents)
        self.transcript = transcript if transcript is not None else tr.Transcript(tr.OFF)
        self.schedule = schedule
        self.phase = 0
        self.round = 0

    @property
    def n(self):
        return len(self.agents)

    def at(self, phase, round):
        self.phase = phase
        self.round = round
        return self

    def wants(self, level):
        return self.transcript.level >= level

    def send(self, sender, receiver, kind, payload, step="-"):
        """Private message over an authenticated confidential channel."""
        self.transcript.emit(tr.FULL, self.phase, self.round, kind, sender, receiver, payload, step)

    def broadcast(self, sender, kind, payload, step="-"):
        self.transcript.emit(tr.PUBLIC, self.phase, self.round, kind, sender, "*", payload, step)

    def announce(self, kind, payload="-", step="-"):
        """Public protocol-level result every agent can compute."""
        self.transcript.emit(tr.SUMMARY, self.phase, self.round, kind, "*", "*", payload, step)

    def local(self, agent, kind, payload="-", step="-"):
        """Agent-private knowledge (e.g. the secret index); FULL level only."""
        self.transcript.emit(tr.FULL, self.phase, self.round, kind, agent, agent, payload, step)
