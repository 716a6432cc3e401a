"""Closed-form security and correctness parameters of an election configuration."""

import math
from dataclasses import dataclass, field

from ..election import coin_count_raw
from ..errors import ConfigError


def _clamp(x):
    return min(1.0, max(0.0, x))


@dataclass(frozen=True)
class Bound:
    value: float
    raw: float

    @classmethod
    def prob(cls, raw):
        return cls(_clamp(raw), raw)

    @property
    def clamped(self):
        return self.value != self.raw


@dataclass(frozen=True)
class BoundSet:
    params: dict
    S: float
    M_raw: float
    M: int
    M_floor: int
    theorem1: Bound
    theorem1_at_floor: Bound
    sigma_H: Bound
    gamma_threshold: float
    sigma_D: Bound
    eps_tilde: float
    zeta: Bound
    epsilon_star: Bound
    sigma_H_star: Bound
    zeta_star: Bound
    zeta_tilde: Bound
    notes: list = field(default_factory=list)

    def probabilities(self):
        names = ("theorem1", "theorem1_at_floor", "sigma_H", "sigma_D", "zeta", "epsilon_star",
                 "sigma_H_star", "zeta_star", "zeta_tilde")
        return {name: getattr(self, name) for name in names}

    def any_clamped(self):
        return any(b.clamped for b in self.probabilities().values())

    def table(self):
        """Rows of ``(name, value, raw-or-note)`` for display."""
        rows = [("S", self.S, ""), ("M (raw)", self.M_raw, ""),
                ("M (ceiling, used)", self.M, ""), ("M (floor)", self.M_floor, "")]
        rows.append(("no-abort bound at M", self.theorem1.value, self.theorem1.raw))
        rows.append(("no-abort bound at floor M", self.theorem1_at_floor.value, self.theorem1_at_floor.raw))
        rows += [("sigma_H", self.sigma_H.value, self.sigma_H.raw),
                 ("gamma", self.gamma_threshold, ""),
                 ("sigma_D", self.sigma_D.value, self.sigma_D.raw),
                 ("eps_tilde", self.eps_tilde, ""),
                 ("zeta", self.zeta.value, self.zeta.raw),
                 ("epsilon_star", self.epsilon_star.value, self.epsilon_star.raw),
                 ("sigma_H_star", self.sigma_H_star.value, self.sigma_H_star.raw),
                 ("zeta_star", self.zeta_star.value, self.zeta_star.raw),
                 ("zeta_tilde", self.zeta_tilde.value, self.zeta_tilde.raw)]
        return rows


def no_abort_bound(m, n, eps, delta):
    """Chernoff bound on passing the threshold check with an ``eps``-far state."""
    gap = eps * eps - 4.0 * delta
    if gap <= 0.0:
        raise ConfigError("need epsilon^2 > 4*delta")
    return math.exp(-(2.0 ** m) * gap * gap / (16.0 * n * eps * eps))


def eps_tilde(eps):
    return math.sqrt(eps * eps + eps ** 4)


def sigma_h(n, eps, s):
    return (1.0 - eps * (1.0 - s)) ** n


def gamma_threshold(eps, eta, lam):
    return (1.0 + lam) * (eps * (1.0 - eta) + eta)


def zeta(n, eps, eta):
    keep = (1.0 - eta) ** n
    return keep * eps_tilde(eps) + (1.0 - keep)


def compute_bounds(config):
    """Evaluate every closed form for ``config`` (an ElectionConfig)."""
    n, eps, delta, eta = config.n_agents, config.epsilon, config.delta, config.eta
    s = config.S
    m_raw = coin_count_raw(n, eps, delta, eta)
    m = config.M
    m_floor = max(1, math.floor(m_raw))
    bits = math.log2(config.candidates)
    g = gamma_threshold(eps, eta, config.lam)
    z = zeta(n, eps, eta)
    e_star = 1.0 - (1.0 - eps) ** bits
    notes = []
    if m != math.ceil(m_raw):
        notes.append(f"coin count overridden to {m}")
    if m_floor != m:
        notes.append(f"raw coin count {m_raw:.3f}; rounding down gives {m_floor}, up gives {math.ceil(m_raw)}")
    return BoundSet(
        params={"n_agents": n, "epsilon": eps, "delta": delta, "eta": eta, "gamma": config.gamma,
                "sigma": config.sigma, "lambda": config.lam, "candidates": config.candidates,
                "amplification_rounds": config.amplification_rounds},
        S=s,
        M_raw=m_raw,
        M=m,
        M_floor=m_floor,
        theorem1=Bound.prob(no_abort_bound(m, n, eps, delta)),
        theorem1_at_floor=Bound.prob(no_abort_bound(m_floor, n, eps, delta)),
        sigma_H=Bound.prob(sigma_h(n, eps, s)),
        gamma_threshold=g,
        sigma_D=Bound.prob(s ** (n * g)),
        eps_tilde=eps_tilde(eps),
        zeta=Bound.prob(z),
        epsilon_star=Bound.prob(e_star),
        sigma_H_star=Bound.prob(sigma_h(n, e_star, s)),
        zeta_star=Bound.prob(1.0 - (1.0 - z) ** bits),
        zeta_tilde=Bound.prob(z ** config.amplification_rounds),
        notes=notes,
    )
