"""GHZ verification rounds and the per-verifier rejection statistics."""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, qsim
from . import transcript as tr
from .errors import PreconditionError
from .transcript import bitstr

MICRO = 1_000_000


@dataclass
class VerifierCounters:
    """Trials run and rejections seen by each agent acting as verifier."""

    trials: np.ndarray
    rejections: np.ndarray = field(default=None)

    def __post_init__(self):
        if np.isscalar(self.trials):
            self.trials = np.zeros(int(self.trials), dtype=np.int64)
        self.trials = np.asarray(self.trials, dtype=np.int64)
        if self.rejections is None:
            self.rejections = np.zeros_like(self.trials)
        self.rejections = np.asarray(self.rejections, dtype=np.int64)
        if self.trials.shape != self.rejections.shape:
            raise PreconditionError("trials and rejections must have the same length")
        if (self.trials < 0).any() or (self.rejections < 0).any():
            raise PreconditionError("counters must be nonnegative")
        if (self.rejections > self.trials).any():
            raise PreconditionError("an agent cannot have more rejections than trials")

    @classmethod
    def fresh(cls, n):
        return cls(np.zeros(n, dtype=np.int64))

    def copy(self):
        return VerifierCounters(self.trials.copy(), self.rejections.copy())

    def rates(self):
        """Per-agent rejection fraction, 0 for agents that never verified."""
        out = np.zeros(self.trials.shape, dtype=np.float64)
        mask = self.trials > 0
        out[mask] = self.rejections[mask] / self.trials[mask]
        return out


@dataclass(frozen=True)
class VerificationOutcome:
    verifier: int
    angles: qsim.MeasurementAngles
    outcomes: tuple
    accepted: bool

    def __post_init__(self):
        parity = sum(self.outcomes) % 2
        if bool(self.accepted) != (parity == self.angles.parity_target):
            raise PreconditionError("accepted flag disagrees with the parity condition")


def generate_angles(n, rng):
    """``n - 1`` uniform angles in ``[0, pi)`` and a last one closing the sum to a multiple of pi."""
    if n < 1:
        raise PreconditionError("need at least one agent")
    free = rng.random(n - 1) * np.pi
    return qsim.MeasurementAngles(tuple(free) + (_closing_angle(free.sum()),))


def _closing_angle(partial_sum):
    last = (-partial_sum) % np.pi
    # fmod can land on pi itself after rounding
    return 0.0 if last >= np.pi else float(last)


def angle_batch(n, size, rng):
    """``size`` angle vectors drawn as in :func:`generate_angles`, shape ``(size, n)``."""
    th = np.empty((size, n), dtype=np.float64)
    th[:, : n - 1] = rng.random((size, n - 1)) * np.pi
    last = np.mod(-th[:, : n - 1].sum(axis=1), np.pi)
    last[last >= np.pi] = 0.0
    th[:, n - 1] = last
    return th


def batch_parity_targets(thetas):
    return (np.rint(thetas.sum(axis=1) / np.pi).astype(np.int64) % 2).astype(np.uint8)


def verification_round(state, verifier, net, rng=None):
    """One verification test of ``state`` run by ``verifier``.

    The verifier draws angles from its own stream and sends each agent
    its angle privately. Every agent measures its qubit in the rotated
    basis and broadcasts the bit; the state passes iff the bits' parity
    equals ``(sum of angles / pi) mod 2``. ``rng`` drives the joint
    measurement outcome (defaults to the verifier's stream).
    """
    n = state.n_qubits
    if not 0 <= verifier < n:
        raise PreconditionError(f"verifier {verifier} out of range")
    if state.spent:
        state.consume()  # raises
    vrng = net.agents[verifier].rng
    angles = generate_angles(n, vrng)
    if net.wants(tr.FULL):
        for j, t in enumerate(angles.thetas):
            net.send(verifier, j, "verify.theta", to_microrad(t))
    bits = qsim.measure_all_rotated(state, angles, rng if rng is not None else vrng)
    for j, b in enumerate(bits):
        net.broadcast(j, "verify.y", b)
    accepted = sum(bits) % 2 == angles.parity_target
    outcome = VerificationOutcome(verifier, angles, bits, accepted)
    net.local(verifier, "verify.record", outcome_record(outcome))
    net.announce("verify.result", int(accepted))
    return outcome


def record_trial(counters, verifier, accepted):
    """Count one trial for ``verifier`` (and a rejection if it failed). Updates in place."""
    counters.trials[verifier] += 1
    if not accepted:
        counters.rejections[verifier] += 1
    return counters


def threshold_abort(counters, delta):
    """True iff some agent's rejection fraction strictly exceeds ``delta``."""
    if not 0.0 <= delta < 1.0:
        raise PreconditionError("delta must lie in [0, 1)")
    return bool((counters.rates() > delta).any())


# ---------------------------------------------------------------------------
# exact rejection probabilities
# ---------------------------------------------------------------------------

def rejection_probability(state, angles):
    """Exact probability that ``state`` fails the test with these angles."""
    angles = qsim._as_angles(angles, state.n_qubits)
    probs = qsim.outcome_probabilities(state, angles)
    par = qsim.parity_table(state.n_qubits)
    return float(probs[par != angles.parity_target].sum())


def mean_rejection_probability(state, draws, rng, chunk=4096):
    """Rejection probability averaged over ``draws`` honest angle choices."""
    n = state.n_qubits
    par = qsim.parity_table(n)
    total = 0.0
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        th = angle_batch(n, m, rng)
        probs = qsim.batch_outcome_probabilities(state, th)
        target = batch_parity_targets(th)
        wrong = par[None, :] != target[:, None]
        total += float((probs * wrong).sum())
        done += m
    return total / draws


def rejection_trials(state, trials, rng, chunk=4096):
    """Number of rejections in ``trials`` simulated verification rounds on fresh copies of ``state``."""
    n = state.n_qubits
    par = qsim.parity_table(n)
    rejected = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        th = angle_batch(n, m, rng)
        probs = qsim.batch_outcome_probabilities(state, th)
        idx = _kernels.sample_indices(probs, rng.random(m))
        rejected += int((par[idx] != batch_parity_targets(th)).sum())
        done += m
    return rejected


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def to_microrad(theta):
    return int(round(theta * MICRO))


def outcome_record(outcome):
    th = ",".join(str(to_microrad(t)) for t in outcome.angles.thetas)
    return f"v={outcome.verifier};th={th};y={bitstr(outcome.outcomes)};acc={int(outcome.accepted)}"


def parse_outcome_record(text):
    """Inverse of :func:`outcome_record`; angles come back in radians at microradian precision."""
    fields = dict(part.split("=", 1) for part in text.split(";"))
    return {
        "verifier": int(fields["v"]),
        "thetas": tuple(int(x) / MICRO for x in fields["th"].split(",")),
        "outcomes": tuple(int(c) for c in fields["y"]),
        "accepted": fields["acc"] == "1",
    }
