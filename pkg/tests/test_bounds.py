import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qevote import election as el
from qevote.harness import bounds as bnd

# reference values from 40-digit decimal arithmetic
EPS_TILDE = 0.6997142273814361
ZETA = 0.7009135699581174
ZETA_TILDE = 0.004841356042046480
NO_ABORT = {6: 0.931358402111352, 12: 0.0105554695661988, 13: 0.00011141793776294907}
SIGMA_H = 0.732094140625
GAMMA = 0.66044
EPS_STAR_K4 = 0.84
ZETA_STAR_K4 = 0.9105473073648021

EXAMPLE = el.ElectionConfig(4, epsilon=0.6, delta=0.05, eta=0.001, amplification_rounds=15)


def test_example_values():
    b = bnd.compute_bounds(EXAMPLE)
    assert b.eps_tilde == pytest.approx(EPS_TILDE, rel=1e-12)
    assert b.zeta.value == pytest.approx(ZETA, rel=1e-12)
    assert b.zeta_tilde.value == pytest.approx(ZETA_TILDE, rel=1e-10)
    assert b.M == 13 and b.M_floor == 12 and b.M_raw == pytest.approx(12.601998164637915)
    assert b.theorem1.value == pytest.approx(NO_ABORT[13], rel=1e-10)
    assert b.theorem1_at_floor.value == pytest.approx(NO_ABORT[12], rel=1e-10)
    assert b.sigma_H.value == pytest.approx(SIGMA_H, rel=1e-12)
    assert b.gamma_threshold == pytest.approx(GAMMA, rel=1e-12)
    assert b.sigma_D.value == pytest.approx(0.875 ** (4 * GAMMA), rel=1e-12)
    assert not b.any_clamped()
    assert any("rounding down gives 12" in n for n in b.notes)


def test_example_to_two_significant_figures():
    b = bnd.compute_bounds(EXAMPLE)
    assert float(f"{b.eps_tilde:.2g}") == 0.7
    assert float(f"{b.zeta_tilde.value:.1g}") == 0.005
    assert float(f"{b.M_raw:.3g}") == 12.6


def test_reduced_coin_count_bound():
    assert bnd.no_abort_bound(6, 4, 0.6, 0.05) == pytest.approx(NO_ABORT[6], rel=1e-12)


def test_multi_candidate_parameters():
    b = bnd.compute_bounds(EXAMPLE.with_(candidates=4, amplification_rounds=1))
    assert b.epsilon_star.value == pytest.approx(EPS_STAR_K4)
    assert b.zeta_star.value == pytest.approx(ZETA_STAR_K4, rel=1e-12)
    assert b.sigma_H_star.value == pytest.approx((1 - EPS_STAR_K4 * 0.125) ** 4)
    b2 = bnd.compute_bounds(EXAMPLE)
    assert b2.epsilon_star.value == pytest.approx(0.6) and b2.zeta_star.value == pytest.approx(b2.zeta.value)


def test_coin_override_is_noted():
    b = bnd.compute_bounds(EXAMPLE.with_(coins=6))
    assert b.M == 6 and b.theorem1.value == pytest.approx(NO_ABORT[6])
    assert any("overridden" in n for n in b.notes)


def test_clamping_reported():
    b = bnd.Bound.prob(1.3)
    assert b.value == 1.0 and b.raw == 1.3 and b.clamped
    assert not bnd.Bound.prob(0.2).clamped


def test_table_rows():
    rows = bnd.compute_bounds(EXAMPLE).table()
    names = [r[0] for r in rows]
    assert "zeta_tilde" in names and "M (floor)" in names


def test_bad_gap():
    from qevote.errors import ConfigError

    with pytest.raises(ConfigError):
        bnd.no_abort_bound(6, 4, 0.3, 0.05)


# ---------------------------------------------------------------------------
# monotonicity over parameter grids
# ---------------------------------------------------------------------------

@given(st.integers(1, 20), st.integers(2, 16), st.floats(0.3, 0.95))
def test_no_abort_bound_decreases_in_coins(m, n, eps):
    delta = eps * eps / 8
    assert bnd.no_abort_bound(m + 1, n, eps, delta) <= bnd.no_abort_bound(m, n, eps, delta)


@given(st.integers(2, 15), st.floats(0.01, 0.99), st.floats(0.0, 0.99))
def test_sigma_h_decreases_in_n_and_eps(n, eps, s):
    assert bnd.sigma_h(n + 1, eps, s) <= bnd.sigma_h(n, eps, s) + 1e-15
    assert bnd.sigma_h(n, min(eps + 0.01, 1.0), s) <= bnd.sigma_h(n, eps, s) + 1e-15


@given(st.integers(1, 30), st.floats(0.05, 0.95))
def test_zeta_tilde_decreases_in_rounds(q, eps):
    cfg = el.ElectionConfig(4, epsilon=eps, delta=eps * eps / 8)
    a = bnd.compute_bounds(cfg.with_(amplification_rounds=q)).zeta_tilde.value
    b = bnd.compute_bounds(cfg.with_(amplification_rounds=q + 1)).zeta_tilde.value
    assert b <= a


def test_formula_spot_checks():
    assert bnd.eps_tilde(0.6) == pytest.approx(0.6 * math.sqrt(1.36))
    assert bnd.zeta(4, 0.6, 0.0) == pytest.approx(EPS_TILDE)
    assert bnd.gamma_threshold(0.6, 0.0, 0.1) == pytest.approx(0.66)
