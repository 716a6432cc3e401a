"""Exact statevector simulation for the shared N-qubit resource.

Conventions
-----------
* Qubit ``j`` belongs to agent ``j`` and is the ``j``-th most significant
  bit of a basis index, so ``index = sum(bit_j << (n - 1 - j))``.
* Outcome strings are tuples of bits in agent order.
* A :class:`PureState` handed to agents is a one-shot resource: measuring
  it marks it spent and any later use raises :class:`SpentStateError`.
  Oracle functions (distributions, partial traces, fidelities) read the
  amplitudes without consuming the state.
* Distances use the pure-state trace distance ``sqrt(1 - |<a|b>|**2)``.
  ``state_at_trace_distance`` parametrises by that distance from GHZ;
  ``state_at_overlap_amp`` parametrises by the amplitude overlap, which
  is the family needed for the identity-guessing experiment.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from . import _kernels
from .errors import PreconditionError, ResourceLimitError, SpentStateError

DEFAULT_QUBIT_CAP = 16

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-10
ANGLE_SUM_TOL = 1e-9

SQRT_HALF = 1.0 / np.sqrt(2.0)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) * SQRT_HALF
SQRT_Z = np.diag([1.0, 1.0j]).astype(np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Z = np.diag([1.0, -1.0]).astype(np.complex128)
VOTER_OP = PAULI_X @ PAULI_Z
IDENTITY = np.eye(2, dtype=np.complex128)


@dataclass(eq=False)
class PureState:
    n_qubits: int
    amplitudes: np.ndarray
    spent: bool = field(default=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if self.n_qubits < 1:
            raise PreconditionError("n_qubits must be positive")
        if amps.shape[0] != 1 << self.n_qubits:
            raise PreconditionError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got {amps.shape[0]}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise PreconditionError(f"state is not normalised (|psi|^2 = {norm!r})")
        self.amplitudes = amps

    @classmethod
    def _trusted(cls, n_qubits, amps):
        # Skips the normalisation check for results of unitary maps.
        obj = cls.__new__(cls)
        obj.n_qubits = n_qubits
        obj.amplitudes = np.ascontiguousarray(amps, dtype=np.complex128)
        obj.spent = False
        return obj

    @property
    def dim(self):
        return self.amplitudes.shape[0]

    def norm_sq(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def overlap(self, other):
        """Return ``<self|other>``."""
        _check_same_size(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def copy(self):
        return PureState._trusted(self.n_qubits, self.amplitudes.copy())

    def consume(self):
        if self.spent:
            raise SpentStateError("state has already been measured")
        self.spent = True

    def records(self):
        """Debug dump as ``(index, re, im)`` triples for nonzero amplitudes."""
        nz = np.flatnonzero(np.abs(self.amplitudes) > 0)
        return [(int(i), float(self.amplitudes[i].real), float(self.amplitudes[i].imag)) for i in nz]


@dataclass(eq=False)
class DensityOperator:
    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (self.dim, self.dim):
            raise PreconditionError(f"matrix shape {m.shape} does not match dim {self.dim}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise PreconditionError("density operator is not Hermitian")
        if abs(np.trace(m).real - 1.0) > HERMITIAN_TOL:
            raise PreconditionError("density operator does not have unit trace")
        if np.linalg.eigvalsh(m).min() < -HERMITIAN_TOL:
            raise PreconditionError("density operator has a negative eigenvalue")
        self.matrix = m

    def purity(self):
        return float(np.trace(self.matrix @ self.matrix).real)

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class MeasurementAngles:
    """Per-agent rotation angles whose sum is an integer multiple of pi."""

    thetas: tuple

    def __post_init__(self):
        th = tuple(float(t) for t in self.thetas)
        if not th:
            raise PreconditionError("need at least one angle")
        for t in th:
            if not (0.0 <= t < np.pi):
                raise PreconditionError(f"angle {t!r} outside [0, pi)")
        total = sum(th)
        k = round(total / np.pi)
        if abs(total - k * np.pi) > ANGLE_SUM_TOL:
            raise PreconditionError(f"angle sum {total!r} is not a multiple of pi")
        object.__setattr__(self, "thetas", th)

    def __len__(self):
        return len(self.thetas)

    @property
    def parity_target(self):
        return int(round(sum(self.thetas) / np.pi)) % 2

    @classmethod
    def zeros(cls, n):
        return cls((0.0,) * n)


def _check_same_size(a, b):
    if a.n_qubits != b.n_qubits:
        raise PreconditionError(f"qubit counts differ ({a.n_qubits} vs {b.n_qubits})")


def _check_cap(n, cap):
    if n < 1:
        raise PreconditionError("number of qubits must be positive")
    if n > cap:
        raise ResourceLimitError(f"{n} qubits exceeds the simulation cap of {cap}")


def _as_angles(angles, n):
    if not isinstance(angles, MeasurementAngles):
        angles = MeasurementAngles(tuple(angles))
    if len(angles) != n:
        raise PreconditionError(f"{len(angles)} angles given for {n} qubits")
    return angles


@lru_cache(maxsize=None)
def parity_table(n):
    """Hamming-weight parity of every basis index for ``n`` qubits."""
    idx = np.arange(1 << n, dtype=np.int64)
    par = np.zeros(1 << n, dtype=np.uint8)
    for b in range(n):
        par ^= ((idx >> b) & 1).astype(np.uint8)
    par.setflags(write=False)
    return par


def index_to_bits(index, n):
    return tuple((index >> (n - 1 - j)) & 1 for j in range(n))


def bits_to_index(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


# ---------------------------------------------------------------------------
# state preparation
# ---------------------------------------------------------------------------

def ghz_state(n, cap=DEFAULT_QUBIT_CAP):
    """Return ``(|0...0> + |1...1>)/sqrt(2)`` on ``n`` qubits."""
    _check_cap(n, cap)
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = SQRT_HALF
    amps[-1] = SQRT_HALF
    return PureState._trusted(n, amps)


def computational_state(bits):
    bits = tuple(int(b) for b in bits)
    amps = np.zeros(1 << len(bits), dtype=np.complex128)
    amps[bits_to_index(bits)] = 1.0
    return PureState(len(bits), amps)


def apply_gates(state, gates):
    """Apply single-qubit gates ``{qubit: 2x2 matrix}`` and return a new state."""
    n = state.n_qubits
    layer = np.broadcast_to(IDENTITY, (n, 2, 2)).copy()
    for q, g in gates.items():
        if not 0 <= q < n:
            raise PreconditionError(f"qubit index {q} out of range for {n} qubits")
        layer[q] = g
    out = _kernels.apply_local_gates(state.amplitudes[None, :], layer[None])
    return PureState._trusted(n, out[0])


def apply_layer(state, gate):
    """Apply the same single-qubit gate to every qubit."""
    return apply_gates(state, {q: gate for q in range(state.n_qubits)})


PHI_FRAME_GATE = SQRT_Z @ HADAMARD


def phi_basis_state(n, which, cap=DEFAULT_QUBIT_CAP):
    """Return the rotated-frame states used by the anonymity argument.

    ``which=0`` is GHZ after a Hadamard followed by ``sqrt(Z)`` on every
    qubit. ``which=1`` is the equal-weight superposition of odd-weight
    strings, negative where the weight is 3 mod 4.
    """
    if which not in (0, 1):
        raise PreconditionError("which must be 0 or 1")
    if which == 0:
        return apply_layer(ghz_state(n, cap), PHI_FRAME_GATE)
    _check_cap(n, cap)
    idx = np.arange(1 << n)
    weight = np.array([bin(i).count("1") for i in idx])
    amps = np.where(weight % 4 == 1, 1.0, np.where(weight % 4 == 3, -1.0, 0.0)).astype(np.complex128)
    return PureState._trusted(n, amps / np.sqrt(2.0 ** (n - 1)))


def to_phi_frame(state):
    return apply_layer(state, PHI_FRAME_GATE)


def from_phi_frame(state):
    return apply_layer(state, PHI_FRAME_GATE.conj().T)


def orthogonalize(direction, reference):
    """Component of ``direction`` orthogonal to ``reference``, normalised."""
    _check_same_size(direction, reference)
    v = direction.amplitudes - np.vdot(reference.amplitudes, direction.amplitudes) * reference.amplitudes
    nrm = np.linalg.norm(v)
    if nrm < 1e-12:
        raise PreconditionError("direction is parallel to the reference state")
    return PureState._trusted(direction.n_qubits, v / nrm)


def canonical_direction(n, cap=DEFAULT_QUBIT_CAP):
    """Default error direction: the odd-weight state orthogonalised against GHZ."""
    return orthogonalize(phi_basis_state(n, 1, cap), ghz_state(n, cap))


def _mix(reference, coeff, direction, eps_coeff, tol=1e-10):
    _check_same_size(reference, direction)
    ov = np.vdot(reference.amplitudes, direction.amplitudes)
    if abs(ov) > tol:
        raise PreconditionError(f"direction overlaps the reference state (|<ref|d>| = {abs(ov):.3g})")
    dn = direction.amplitudes / np.linalg.norm(direction.amplitudes)
    amps = coeff * reference.amplitudes + eps_coeff * dn
    return PureState._trusted(reference.n_qubits, amps / np.linalg.norm(amps))


def state_at_trace_distance(n, eps, direction=None, cap=DEFAULT_QUBIT_CAP):
    """``sqrt(1 - eps**2)|GHZ> + eps|direction>``; trace distance to GHZ is ``eps``."""
    if not 0.0 <= eps <= 1.0:
        raise PreconditionError("eps must lie in [0, 1]")
    ghz = ghz_state(n, cap)
    if direction is None:
        direction = canonical_direction(n, cap)
    return _mix(ghz, np.sqrt(1.0 - eps * eps), direction, eps)


def state_at_overlap_amp(n, amp, direction=None, reference=None, cap=DEFAULT_QUBIT_CAP):
    """``amp|ref> + sqrt(1 - amp**2)|direction>`` with ``<ref|psi> = amp``.

    ``reference`` defaults to GHZ. Passing ``phi_basis_state(n, 0)`` gives
    the rotated-frame family where ``amp = (1 - eps**2) ** 0.25``.
    """
    if not 0.0 <= amp <= 1.0:
        raise PreconditionError("overlap amplitude must lie in [0, 1]")
    if reference is None:
        reference = ghz_state(n, cap)
    if direction is None:
        direction = canonical_direction(n, cap)
        if reference.n_qubits == n and abs(np.vdot(reference.amplitudes, direction.amplitudes)) > 1e-10:
            direction = orthogonalize(direction, reference)
    return _mix(reference, amp, direction, np.sqrt(max(0.0, 1.0 - amp * amp)))


def random_direction(reference, rng):
    """Haar-ish random unit vector orthogonal to ``reference``."""
    d = reference.dim
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v = PureState._trusted(reference.n_qubits, v / np.linalg.norm(v))
    return orthogonalize(v, reference)


# ---------------------------------------------------------------------------
# transformations and measurement
# ---------------------------------------------------------------------------

def voter_transform(state, agent):
    """Apply ``X Z`` to ``agent``'s qubit."""
    if state.spent:
        raise SpentStateError("cannot transform a measured state")
    if not 0 <= agent < state.n_qubits:
        raise PreconditionError(f"agent {agent} out of range for {state.n_qubits} qubits")
    return apply_gates(state, {agent: VOTER_OP})


def rotated_basis_gate(theta):
    """Maps ``|+_theta>`` to ``|0>`` and ``|-_theta>`` to ``|1>``."""
    ph = np.exp(-1j * theta)
    return np.array([[1.0, ph], [1.0, -ph]], dtype=np.complex128) * SQRT_HALF


def _rotated_layer(thetas):
    return np.stack([rotated_basis_gate(t) for t in thetas])


def outcome_probabilities(state, angles):
    """Born probabilities of every outcome index after the rotated-basis change."""
    angles = _as_angles(angles, state.n_qubits)
    out = _kernels.apply_local_gates(state.amplitudes[None, :], _rotated_layer(angles.thetas)[None])
    probs = np.abs(out[0]) ** 2
    return probs / probs.sum()


def outcome_distribution(state, angles):
    """Map every outcome string to its exact probability."""
    probs = outcome_probabilities(state, angles)
    n = state.n_qubits
    return {index_to_bits(i, n): float(p) for i, p in enumerate(probs)}


def batch_outcome_probabilities(state, thetas):
    """Outcome probabilities for many angle vectors at once, shape ``(B, 2**n)``."""
    thetas = np.asarray(thetas, dtype=np.float64)
    if thetas.ndim != 2 or thetas.shape[1] != state.n_qubits:
        raise PreconditionError("thetas must have shape (B, n_qubits)")
    ph = np.exp(-1j * thetas)
    gates = np.empty(thetas.shape + (2, 2), dtype=np.complex128)
    gates[..., 0, 0] = SQRT_HALF
    gates[..., 1, 0] = SQRT_HALF
    gates[..., 0, 1] = ph * SQRT_HALF
    gates[..., 1, 1] = -ph * SQRT_HALF
    amps = np.broadcast_to(state.amplitudes, (thetas.shape[0], state.dim))
    out = _kernels.apply_local_gates(amps, gates)
    probs = np.abs(out) ** 2
    return probs / probs.sum(axis=1, keepdims=True)


def measure_all_rotated(state, angles, rng):
    """Every agent measures in ``{|+_theta_j>, |-_theta_j>}``; returns the bits.

    The state is consumed.
    """
    angles = _as_angles(angles, state.n_qubits)
    if state.spent:
        raise SpentStateError("state has already been measured")
    probs = outcome_probabilities(state, angles)
    idx = _kernels.sample_indices(probs[None, :], np.array([rng.random()]))[0]
    state.consume()
    return index_to_bits(int(idx), state.n_qubits)


def measure_all_hadamard(state, rng):
    """Every agent measures in the Hadamard basis; returns the bits."""
    return measure_all_rotated(state, MeasurementAngles.zeros(state.n_qubits), rng)


def sample_outcomes(state, angles, rng, shots):
    """Draw ``shots`` independent outcome indices from fresh copies of ``state``.

    Statistical helper: the state itself is not consumed.
    """
    probs = outcome_probabilities(state, angles)
    u = rng.random(shots)
    return _kernels.sample_indices(np.broadcast_to(probs, (shots, probs.shape[0])), u)


# ---------------------------------------------------------------------------
# reduced states and distances
# ---------------------------------------------------------------------------

def partial_trace(state, keep):
    """Reduced density operator on the qubits in ``keep`` (ascending order)."""
    n = state.n_qubits
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise PreconditionError("keep-set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise PreconditionError(f"keep-set {keep} out of range for {n} qubits")
    traced = [q for q in range(n) if q not in keep]
    t = state.amplitudes.reshape((2,) * n).transpose(keep + traced)
    m = t.reshape(1 << len(keep), 1 << len(traced))
    return DensityOperator(1 << len(keep), m @ m.conj().T)


def ghz_fidelity_sq(state):
    """``|<GHZ|psi>|**2``."""
    ghz = ghz_state(state.n_qubits, cap=max(DEFAULT_QUBIT_CAP, state.n_qubits))
    return float(abs(np.vdot(ghz.amplitudes, state.amplitudes)) ** 2)


def pure_trace_distance(a, b):
    ov = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(np.sqrt(max(0.0, 1.0 - ov)))


def trace_distance(rho, sigma):
    """``0.5 * ||rho - sigma||_1`` for density matrices (arrays or DensityOperator)."""
    a = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    b = sigma.matrix if isinstance(sigma, DensityOperator) else np.asarray(sigma)
    return float(0.5 * np.abs(np.linalg.eigvalsh(a - b)).sum())


def all_bitstrings(n):
    return list(product((0, 1), repeat=n))
