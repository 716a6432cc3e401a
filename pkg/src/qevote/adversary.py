"""Dishonest behaviour: state sources, lying verifiers, identity guessing and board tampering.

Sources and adversaries plug into :class:`~qevote.election.ElectionRun`.
A source implements ``emit(ctx, rng) -> PureState``; an adversary
implements ``controls(agent)``, ``verify_as(state, verifier, net, rng)``
and ``tamper_rows(rows)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from . import qsim, verify
from .election import BulletinBoard
from .errors import ConfigError, PreconditionError, StrategyFault

# ---------------------------------------------------------------------------
# state sources
# ---------------------------------------------------------------------------


class IdealSource:
    """Always emits a fresh GHZ state."""

    def __init__(self):
        self._cache = {}

    def emit(self, ctx, rng):
        ghz = self._cache.get(ctx.n)
        if ghz is None:
            ghz = self._cache[ctx.n] = qsim.ghz_state(ctx.n)
        return ghz.copy()

    def describe(self):
        return "ideal"


class FixedTraceDistance:
    """Emits ``sqrt(1 - eps**2)|GHZ> + eps|direction>`` every time."""

    def __init__(self, eps, direction=None):
        if not 0.0 <= eps <= 1.0:
            raise ConfigError("eps must lie in [0, 1]")
        self.eps = eps
        self.direction = direction
        self._cache = {}

    def state(self, n):
        st = self._cache.get(n)
        if st is None:
            st = self._cache[n] = qsim.state_at_trace_distance(n, self.eps, self.direction)
        return st

    def emit(self, ctx, rng):
        return self.state(ctx.n).copy()

    def describe(self):
        return f"eps_far:{self.eps!r}"


class FixedOverlapAmp:
    """Emits the state with ``<reference|psi> = amp`` (reference defaults to GHZ)."""

    def __init__(self, amp, direction=None, reference=None):
        if not 0.0 <= amp <= 1.0:
            raise ConfigError("overlap amplitude must lie in [0, 1]")
        self.amp = amp
        self.direction = direction
        self.reference = reference
        self._cache = {}

    def emit(self, ctx, rng):
        st = self._cache.get(ctx.n)
        if st is None:
            st = self._cache[ctx.n] = qsim.state_at_overlap_amp(ctx.n, self.amp, self.direction, self.reference)
        return st.copy()

    def describe(self):
        return f"overlap:{self.amp!r}"


class ScheduleSource:
    """Cycles through a fixed list of sources, one request at a time."""

    def __init__(self, sources):
        if not sources:
            raise ConfigError("schedule needs at least one entry")
        self.sources = list(sources)
        self.count = 0

    def emit(self, ctx, rng):
        src = self.sources[self.count % len(self.sources)]
        self.count += 1
        return src.emit(ctx, rng)

    def describe(self):
        return "schedule:" + ",".join(s.describe().replace(":", "=") for s in self.sources)


class AdaptiveSource:
    """Wraps ``strategy(ctx, public_history, rng) -> PureState``.

    The strategy sees only the public part of the transcript. Its output
    is checked before being handed to the agents.
    """

    def __init__(self, strategy, name="adaptive"):
        self.strategy = strategy
        self.name = name

    def emit(self, ctx, rng):
        history = ctx.history.public_events() if ctx.history is not None else []
        st = self.strategy(ctx, history, rng)
        if not isinstance(st, qsim.PureState) or st.n_qubits != ctx.n:
            raise StrategyFault(f"adaptive strategy returned {st!r}")
        if abs(st.norm_sq() - 1.0) > 1e-10:
            raise StrategyFault("adaptive strategy returned an unnormalised state")
        return st

    def describe(self):
        return self.name


def worst_case_source(eps):
    """The constant ``eps``-far adaptive strategy; more distance only gets caught more often."""
    fixed = FixedTraceDistance(eps)
    return AdaptiveSource(lambda ctx, history, rng: fixed.emit(ctx, rng), f"worst:{eps!r}")


# ---------------------------------------------------------------------------
# coalitions and attacks on the protocol
# ---------------------------------------------------------------------------


class NoAdversary:
    members = frozenset()

    def controls(self, agent):
        return False

    def verify_as(self, state, verifier, net, rng):  # pragma: no cover - never called
        raise PreconditionError("no dishonest agents")

    def tamper_rows(self, rows):
        return rows

    def describe(self):
        return "none"


@dataclass(frozen=True)
class Coalition:
    """A set of dishonest agents among ``n``; at least one agent stays honest."""

    members: frozenset
    n: int

    def __post_init__(self):
        members = frozenset(int(m) for m in self.members)
        if not members:
            raise PreconditionError("coalition must have at least one member")
        if any(not 0 <= m < self.n for m in members):
            raise PreconditionError(f"coalition {sorted(members)} out of range for {self.n} agents")
        if len(members) >= self.n:
            raise PreconditionError("at least one agent must be honest")
        object.__setattr__(self, "members", members)

    @property
    def honest(self):
        return tuple(k for k in range(self.n) if k not in self.members)

    @property
    def h(self):
        return self.n - len(self.members)


class BoardAttack:
    """Base class for board tampering."""


@dataclass(frozen=True)
class AddRowCol(BoardAttack):
    """Grow the board by one round and one agent."""

    fill: int = 0


@dataclass(frozen=True)
class FlipRowBit(BoardAttack):
    row: int
    col: int


def board_tamper(board, attack):
    """Return a tampered copy of ``board``."""
    rows = [list(r) for r in board.rows]
    if isinstance(attack, AddRowCol):
        for r in rows:
            r.append(attack.fill)
        rows.append([attack.fill] * (board.n + 1))
    elif isinstance(attack, FlipRowBit):
        if not (0 <= attack.row < board.n and 0 <= attack.col < board.n):
            raise PreconditionError("flip position outside the board")
        rows[attack.row][attack.col] ^= 1
    else:
        raise PreconditionError(f"unknown attack {attack!r}")
    return BulletinBoard(tuple(tuple(r) for r in rows))


def lying_verifier_round(state, verifier, net, rng, coalition=None):
    """A dishonest verifier makes the test pass whatever the state.

    Angles are drawn and the other agents measure as usual; the verifier
    then broadcasts whichever bit makes the parity condition hold.
    """
    if coalition is not None and verifier not in coalition.members:
        raise PreconditionError("the lying verifier must belong to the coalition")
    n = state.n_qubits
    angles = verify.generate_angles(n, net.agents[verifier].rng)
    bits = list(qsim.measure_all_rotated(state, angles, rng))
    others = (sum(bits) - bits[verifier]) % 2
    bits[verifier] = (angles.parity_target - others) % 2
    for j, b in enumerate(bits):
        net.broadcast(j, "verify.y", b)
    outcome = verify.VerificationOutcome(verifier, angles, tuple(bits), True)
    net.announce("verify.result", 1)
    return outcome


class Adversary:
    """A coalition that lies when verifying and optionally tampers with the board."""

    def __init__(self, coalition=None, attack=None, lie=True):
        self.coalition = coalition
        self.attack = attack
        self.lie = lie

    @property
    def members(self):
        return self.coalition.members if self.coalition is not None else frozenset()

    def controls(self, agent):
        return self.lie and agent in self.members

    def verify_as(self, state, verifier, net, rng):
        return lying_verifier_round(state, verifier, net, rng, self.coalition)

    def tamper_rows(self, rows):
        if self.attack is None:
            return rows
        return [list(r) for r in board_tamper(BulletinBoard(tuple(map(tuple, rows))), self.attack).rows]

    def describe(self):
        parts = []
        if self.coalition is not None:
            parts.append("coalition:[" + ",".join(str(m) for m in sorted(self.members)) + "]")
        if isinstance(self.attack, AddRowCol):
            parts.append("tamper:grow")
        elif isinstance(self.attack, FlipRowBit):
            parts.append(f"tamper:flip:{self.attack.row},{self.attack.col}")
        return "+".join(parts) or "none"


# ---------------------------------------------------------------------------
# identity guessing
# ---------------------------------------------------------------------------

VIEWS = ("coalition", "global", "public")


def eps_tilde(eps):
    return math.sqrt(eps * eps + eps ** 4)


def _inv_sqrt_psd(m, tol=1e-12):
    w, v = np.linalg.eigh(m)
    inv = np.zeros_like(w)
    keep = w > tol * max(1.0, w.max())
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (v * inv) @ v.conj().T, bool((~keep).any())


def pgm_povm(states, priors=None):
    """Pretty-good measurement for density matrices ``states`` with ``priors``.

    Returns ``(povm, singular)``; on a rank-deficient average state the
    inverse square root is taken on its support.
    """
    h = len(states)
    p = np.full(h, 1.0 / h) if priors is None else np.asarray(priors, dtype=np.float64)
    avg = sum(pi * r for pi, r in zip(p, states))
    root, singular = _inv_sqrt_psd(avg)
    return [root @ (pi * r) @ root for pi, r in zip(p, states)], singular


def guess_matrix(states, povm):
    """``G[i, j] = Tr(Pi_j rho_i)``: probability of guessing j when i is true."""
    return np.array([[float(np.trace(e @ r).real) for e in povm] for r in states])


def pgm_success(states, priors=None):
    h = len(states)
    p = np.full(h, 1.0 / h) if priors is None else np.asarray(priors, dtype=np.float64)
    povm, _ = pgm_povm(states, p)
    return float(np.dot(p, np.diag(guess_matrix(states, povm))))


def helstrom_success(rho0, rho1, p0=0.5):
    """Optimal probability of telling two states apart."""
    gap = p0 * rho0 - (1.0 - p0) * rho1
    return 0.5 * (1.0 + float(np.abs(np.linalg.eigvalsh(gap)).sum()))


def _dephase_honest(amps, n, honest):
    """Density matrix after measuring the honest qubits in the computational basis."""
    t = amps.reshape((2,) * n)
    members = [q for q in range(n) if q not in honest]
    t = t.transpose(list(honest) + members).reshape(1 << len(honest), 1 << len(members))
    blocks = [np.outer(row, row.conj()) for row in t]
    return block_diag(*blocks)


def identity_family(psi, coalition, view="public"):
    """What the coalition holds after each honest agent applies the voter transform.

    ``psi`` is the state in the frame where an honest agent's measurement
    is computational (see :func:`qsim.to_phi_frame`). Views:

    ``coalition``
        reduced state of the coalition's qubits alone;
    ``global``
        the whole post-transform pure state (an upper bound on any view);
    ``public``
        the honest agents' broadcast outcomes together with the
        coalition's qubits, i.e. the honest qubits dephased.
    """
    if view not in VIEWS:
        raise PreconditionError(f"unknown view {view!r}; expected one of {VIEWS}")
    n = psi.n_qubits
    out = []
    for i in coalition.honest:
        phi = qsim.voter_transform(psi, i)
        if view == "coalition":
            out.append(qsim.partial_trace(phi, coalition.members).matrix)
        elif view == "global":
            out.append(np.outer(phi.amplitudes, phi.amplitudes.conj()))
        else:
            out.append(_dephase_honest(phi.amplitudes, n, coalition.honest))
    return out


@dataclass
class GuessReport:
    coalition: tuple
    honest: tuple
    view: str
    guess_given_true: np.ndarray
    guess_frequencies: np.ndarray
    success: float
    bound: float
    optimum: float = None
    singular: bool = False

    @property
    def h(self):
        return len(self.honest)

    @property
    def within_bound(self):
        return self.success <= self.bound + 1e-9 and (self.optimum is None or self.optimum <= self.bound + 1e-9)


def pgm_identity_guess(psi, coalition, eps, view="public"):
    """Exact success of the coalition's pretty-good identity guess, with the bound ``1/H + eps_tilde``."""
    states = identity_family(psi, coalition, view)
    h = len(states)
    povm, singular = pgm_povm(states)
    g = guess_matrix(states, povm)
    success = float(np.trace(g) / h)
    optimum = helstrom_success(states[0], states[1]) if h == 2 else None
    return success, GuessReport(
        coalition=tuple(sorted(coalition.members)),
        honest=coalition.honest,
        view=view,
        guess_given_true=g,
        guess_frequencies=g.mean(axis=0),
        success=success,
        bound=1.0 / h + eps_tilde(eps),
        optimum=optimum,
        singular=singular,
    )


def rotated_family_state(n, eps, direction=None):
    """Rotated-frame state with overlap ``(1 - eps**2) ** 0.25`` against the reference."""
    ref = qsim.phi_basis_state(n, 0)
    amp = (1.0 - eps * eps) ** 0.25
    if direction is not None and abs(np.vdot(ref.amplitudes, direction.amplitudes)) > 1e-10:
        direction = qsim.orthogonalize(direction, ref)
    return qsim.state_at_overlap_amp(n, amp, direction, reference=ref)


# ---------------------------------------------------------------------------
# model strings
# ---------------------------------------------------------------------------


def parse_source_model(text):
    """``ideal`` | ``eps_far:<eps>`` | ``overlap:<amp>`` | ``schedule:<m1>,<m2>,...``.

    Schedule entries use ``=`` instead of ``:`` (``schedule:ideal,eps_far=0.6``).
    """
    text = (text or "ideal").strip()
    kind, _, arg = text.partition(":")
    try:
        if kind == "ideal":
            return IdealSource()
        if kind == "eps_far":
            return FixedTraceDistance(float(arg))
        if kind == "overlap":
            return FixedOverlapAmp(float(arg))
        if kind == "worst":
            return worst_case_source(float(arg))
        if kind == "schedule":
            return ScheduleSource([parse_source_model(p.replace("=", ":")) for p in arg.split(",") if p])
    except ValueError as exc:
        raise ConfigError(f"bad source model {text!r}: {exc}") from exc
    raise ConfigError(f"unknown source model {text!r}")


def parse_adversary_model(text, n):
    """``none`` | ``coalition:[i,j]`` | ``tamper:flip:l,k`` | ``tamper:grow``, joined with ``+``."""
    text = (text or "none").strip()
    if text == "none":
        return NoAdversary()
    coalition = attack = None
    for part in text.split("+"):
        if part.startswith("coalition:"):
            body = part[len("coalition:"):].strip("[]")
            try:
                members = [int(x) for x in body.split(",") if x.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad coalition {part!r}") from exc
            try:
                coalition = Coalition(frozenset(members), n)
            except PreconditionError as exc:
                raise ConfigError(str(exc)) from exc
        elif part == "tamper:grow":
            attack = AddRowCol()
        elif part.startswith("tamper:flip:"):
            try:
                row, col = (int(x) for x in part[len("tamper:flip:"):].split(","))
            except ValueError as exc:
                raise ConfigError(f"bad flip position {part!r}") from exc
            if not (0 <= row < n and 0 <= col < n):
                raise ConfigError(f"flip position {row},{col} outside a {n}x{n} board")
            attack = FlipRowBit(row, col)
        else:
            raise ConfigError(f"unknown adversary model {part!r}")
    return Adversary(coalition, attack)
