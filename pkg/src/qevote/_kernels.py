"""Hot inner loops, compiled with numba when available.

Every kernel has a numba implementation and a pure-numpy implementation
with identical semantics. The numba path is used by default; set
``QEVOTE_DISABLE_NUMBA=1`` to force the numpy path (useful for debugging
and for platforms without a working LLVM).

Kernels are pure functions of their array arguments. They never draw
random numbers themselves: callers pass pre-drawn uniforms/bits from a
seeded generator, so both backends consume randomness identically.
"""

import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_DISABLED = os.environ.get("QEVOTE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")
BACKEND = "numba" if HAVE_NUMBA and not _DISABLED else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _apply_local_gates_np(amps, gates):
    # amps: (B, 2**n) complex, gates: (B, n, 2, 2) complex; qubit 0 is the MSB.
    b, dim = amps.shape
    n = gates.shape[1]
    t = amps.reshape((b,) + (2,) * n)
    for q in range(n):
        t = np.moveaxis(t, q + 1, -1)
        g = gates[:, q].reshape((b,) + (1,) * (n - 1) + (2, 2))
        t = (g @ t[..., None])[..., 0]
        t = np.moveaxis(t, -1, q + 1)
    return np.ascontiguousarray(t.reshape(b, dim))


def _or_repetitions_np(p, free):
    # p: (R, N) uint8, free: (R, N, N-1) uint8 uniformly random share bits.
    last = p ^ np.bitwise_xor.reduce(free, axis=2)
    shares = np.concatenate([free, last[:, :, None]], axis=2)
    z = np.bitwise_xor.reduce(shares, axis=1)
    y = np.bitwise_xor.reduce(z, axis=1)
    w = y[:, None] ^ p
    return shares, z, y, w


def _sample_indices_np(probs, u):
    cdf = np.cumsum(probs, axis=1)
    idx = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1).astype(np.int64)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _apply_local_gates_nb(amps, gates):
        b, dim = amps.shape
        n = gates.shape[1]
        out = amps.copy()
        for s in range(b):
            v = out[s]
            for q in range(n):
                stride = 1 << (n - 1 - q)
                g00 = gates[s, q, 0, 0]
                g01 = gates[s, q, 0, 1]
                g10 = gates[s, q, 1, 0]
                g11 = gates[s, q, 1, 1]
                for i in range(dim):
                    if i & stride == 0:
                        j = i | stride
                        a0 = v[i]
                        a1 = v[j]
                        v[i] = g00 * a0 + g01 * a1
                        v[j] = g10 * a0 + g11 * a1
        return out

    @njit(cache=True)
    def _or_repetitions_nb(p, free):
        reps, n = p.shape
        shares = np.empty((reps, n, n), dtype=np.uint8)
        z = np.zeros((reps, n), dtype=np.uint8)
        y = np.zeros(reps, dtype=np.uint8)
        w = np.empty((reps, n), dtype=np.uint8)
        for r in range(reps):
            for k in range(n):
                acc = p[r, k]
                for i in range(n - 1):
                    bit = free[r, k, i]
                    shares[r, k, i] = bit
                    acc ^= bit
                shares[r, k, n - 1] = acc
            for i in range(n):
                acc = 0
                for k in range(n):
                    acc ^= shares[r, k, i]
                z[r, i] = acc
                y[r] ^= acc
            for k in range(n):
                w[r, k] = y[r] ^ p[r, k]
        return shares, z, y, w

    @njit(cache=True)
    def _sample_indices_nb(probs, u):
        b, dim = probs.shape
        out = np.empty(b, dtype=np.int64)
        for s in range(b):
            acc = 0.0
            idx = 0
            for i in range(dim):
                acc += probs[s, i]
                if acc <= u[s]:
                    idx += 1
            out[s] = min(idx, dim - 1)
        return out


KERNELS = {
    "numpy": {
        "apply_local_gates": _apply_local_gates_np,
        "or_repetitions": _or_repetitions_np,
        "sample_indices": _sample_indices_np,
    },
}
if HAVE_NUMBA:
    KERNELS["numba"] = {
        "apply_local_gates": _apply_local_gates_nb,
        "or_repetitions": _or_repetitions_nb,
        "sample_indices": _sample_indices_nb,
    }


def apply_local_gates(amps, gates):
    """Apply one 2x2 gate per qubit to each row of a batch of statevectors.

    Parameters
    ----------
    amps : ndarray, shape (B, 2**n), complex128
    gates : ndarray, shape (B, n, 2, 2), complex128
        ``gates[b, q]`` acts on qubit ``q`` of row ``b``. Qubit 0 is the
        most significant bit of the basis index.
    """
    amps = np.ascontiguousarray(amps, dtype=np.complex128)
    gates = np.ascontiguousarray(gates, dtype=np.complex128)
    return KERNELS[BACKEND]["apply_local_gates"](amps, gates)


def or_repetitions(p, free):
    """XOR-secret-share each agent's bit and compute broadcast parities.

    ``p[r, k]`` is agent k's (randomised) input in repetition r and
    ``free[r, k]`` the N-1 uniformly random share bits it draws; the last
    share is fixed so agent k's shares XOR to ``p[r, k]``.

    Returns ``(shares, z, y, w)``: ``shares[r, k, i]`` is the bit agent k
    sends to agent i, ``z[r, i]`` agent i's broadcast parity, ``y[r]`` the
    repetition output and ``w[r, k] = y[r] ^ p[r, k]`` the parity of all
    other inputs as seen by agent k.
    """
    p = np.ascontiguousarray(p, dtype=np.uint8)
    free = np.ascontiguousarray(free, dtype=np.uint8)
    return KERNELS[BACKEND]["or_repetitions"](p, free)


def sample_indices(probs, u):
    """Inverse-CDF sampling, one index per row of ``probs`` using uniform ``u``."""
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    return KERNELS[BACKEND]["sample_indices"](probs, u)
