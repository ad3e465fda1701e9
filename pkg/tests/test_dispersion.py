import json
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hsc import dispersion, spectral
from hsc.dispersion import (
    A_n,
    RangeError,
    Verdict,
    classify_stability,
    compute_l_n,
    compute_q_n,
    dispersion_table,
    fastest_growing_mode,
    linear_propagator,
    mu,
    safe_spectral_bound,
    spectral_bound,
)
from hsc.elliptic import inner_mode_factor, outer_mode_flux
from hsc.params import PhysicalParams, derived_coefficients

logu = lambda lo, hi: st.floats(math.log(lo), math.log(hi)).map(math.exp)  # noqa: E731


@st.composite
def coefficient_sets(draw, neutral=False):
    g_i = draw(logu(1e-3, 10))
    return derived_coefficients(
        alpha_i=draw(logu(0.01, 100)),
        alpha_o=draw(logu(0.01, 100)),
        beta_i=draw(st.one_of(st.just(0.0), logu(1e-3, 100))),
        beta_o=draw(st.one_of(st.just(0.0), logu(1e-3, 100))),
        gamma_i=g_i,
        gamma_o=g_i if neutral else draw(logu(1e-3, 10)),
        sigma=draw(logu(0.01, 10)),
        R=draw(st.floats(2.0, 10.0)),
    )


# ---------------------------------------------------------------- closed forms vs hand values


def test_l_1_by_hand(p0):
    assert compute_l_n(p0, 1) == pytest.approx(-3 / 10, rel=1e-14)
    assert compute_l_n(p0, -1).imag == 0
    assert compute_l_n(p0, 40) == pytest.approx(-0.5, abs=1e-10)


def test_l_n_limit_general(p0_coriolis):
    c = p0_coriolis
    limit = -c.theta_i * c.theta_o / abs(c.theta_o) ** 2
    assert compute_l_n(c, 40) == pytest.approx(limit, abs=1e-10)
    assert compute_l_n(c, -40) == pytest.approx(np.conj(limit), abs=1e-10)


def test_q_by_hand(p0, p0_coriolis):
    assert A_n(p0, 1) == pytest.approx(13 / 3)
    assert mu(p0, 1) == pytest.approx(-2)
    assert compute_q_n(p0, 1) == pytest.approx(-6 / 13, rel=1e-14)
    assert compute_q_n(p0, 2) == pytest.approx(-150 / 49, rel=1e-14)
    unstable = p0.replace(gamma_i=1.0, gamma_o=0.0)
    assert compute_q_n(unstable, 1) == pytest.approx(6 / 13, rel=1e-14)
    assert compute_q_n(p0_coriolis, 1) == pytest.approx(-39 / 89 - 9j / 89, rel=1e-14)
    assert compute_q_n(p0, 0) == 0


def test_composed_oracle(p0_coriolis):
    # l_n and q_n rebuilt from the exact mode solutions at the circle
    c = p0_coriolis
    for n in [*range(-64, 0), *range(1, 65)]:
        l = outer_mode_flux(c, n) * complex(inner_mode_factor(c, n))
        assert compute_l_n(c, n) == pytest.approx(l, rel=1e-12)
        k = c.sigma * (n * n - 1) + 2 * c.dgamma
        q = outer_mode_flux(c, n) * (-k) / (1 - l)
        assert compute_q_n(c, n) == pytest.approx(q, rel=1e-12)


def test_spectral_bound_values(p0):
    assert spectral_bound(p0) == pytest.approx(5 / 3)
    assert spectral_bound(p0.replace(gamma_o=0.0)) == 1.0


def test_lambda_star_can_be_exceeded_by_dense_inner_fluid():
    c = derived_coefficients(alpha_i=1, alpha_o=1, gamma_i=10, gamma_o=0, sigma=1, R=2)
    assert compute_q_n(c, 2).real == pytest.approx(15.9375, rel=1e-3)
    assert compute_q_n(c, 2).real > spectral_bound(c) == 11
    assert np.max(dispersion_table(c, 64).q.real) < safe_spectral_bound(c)


# ---------------------------------------------------------------- properties


@given(coefficient_sets(), st.integers(1, 512))
def test_conjugate_symmetry(c, n):
    assert compute_q_n(c, -n) == pytest.approx(np.conj(compute_q_n(c, n)), rel=1e-13, abs=1e-300)
    assert A_n(c, -n) == A_n(c, n) and mu(c, -n) == mu(c, n)
    assert np.isfinite(compute_l_n(c, n)) and np.isfinite(compute_l_n(c, -n))
    assert compute_l_n(c, n) != 1


@given(coefficient_sets())
def test_no_rotation_without_coriolis_asymmetry(c):
    c = c.replace(beta_o=c.beta_i)
    assert np.all(dispersion_table(c, 64).q.imag == 0)


@given(coefficient_sets())
def test_A_n_decreases_to_limit(c):
    A = A_n(c, np.arange(1, 65))
    limit = c.alpha_o + c.alpha_i
    assert np.all(A >= limit)
    live = A[:-1] - limit > 1e-12 * limit
    assert np.all(np.diff(A)[live] < 0)


@given(coefficient_sets())
def test_cubic_growth_limit(c):
    assume(c.sigma * 64**2 > 100 * abs(c.dgamma))
    lim = -c.sigma * (c.alpha_o + c.alpha_i) / ((c.alpha_o + c.alpha_i) ** 2 + c.B**2)
    assert compute_q_n(c, 64).real / 64**3 == pytest.approx(lim, rel=0.02)


@given(coefficient_sets())
def test_lambda_star_holds_for_stable_layering(c):
    c = c.replace(gamma_o=max(c.gamma_o, c.gamma_i))
    assert np.max(dispersion_table(c, 256).q.real) < spectral_bound(c)


@given(coefficient_sets())
def test_safe_bound_holds_everywhere(c):
    assert np.max(dispersion_table(c, 256).q.real) < safe_spectral_bound(c)


# ---------------------------------------------------------------- guards


def test_range_guards(p0):
    assert np.isfinite(compute_q_n(p0, 512))
    with pytest.raises(RangeError):
        compute_q_n(p0, 513)
    with pytest.raises(RangeError):
        compute_l_n(p0, 0)
    with pytest.raises(RangeError):
        compute_q_n(p0, 1.5)
    with pytest.raises(RangeError):
        dispersion_table(p0, 0)


def test_vector_and_scalar_agree(p0_coriolis):
    n = np.array([-3, -1, 0, 2, 7])
    q = compute_q_n(p0_coriolis, n)
    assert q.shape == n.shape
    assert all(q[k] == compute_q_n(p0_coriolis, int(m)) for k, m in enumerate(n))


def test_grid_multipliers_real_nyquist(p0_coriolis):
    q = dispersion.grid_multipliers(p0_coriolis, 16)
    assert q[8].imag == 0 and q[0] == 0
    l = dispersion.grid_l_multipliers(p0_coriolis, 16)
    assert l[0] == 0 and l[8].imag == 0


# ---------------------------------------------------------------- table, classifier, propagator


def test_table_layout(p0):
    t = dispersion_table(p0, 5)
    assert list(t.n) == [-5, -4, -3, -2, -1, 1, 2, 3, 4, 5]
    assert t.q_of(1) == compute_q_n(p0, 1) and t.q_of(0) == 0
    assert t.lambda_star == pytest.approx(5 / 3)
    with pytest.raises(RangeError):
        t.index(6)


def physical(rho_i, rho_o):
    return PhysicalParams(eta_i=1, eta_o=1, rho_i=rho_i, rho_o=rho_o, b=1, omega=1, sigma=1, R=2)


def test_classifier():
    assert classify_stability(physical(1, 2)) is Verdict.STABLE
    assert classify_stability(physical(2, 1)) is Verdict.UNSTABLE
    t = dispersion_table(physical(1.5, 1.5), 8)
    assert classify_stability(physical(1.5, 1.5)) is Verdict.NEUTRAL
    assert t.q_of(1) == 0 and t.q_of(-1) == 0


@given(coefficient_sets())
def test_classifier_agrees_with_spectrum(c):
    v = classify_stability(c, 128)
    re = dispersion_table(c, 128).q.real
    assert (v is Verdict.UNSTABLE) == bool(np.any(re > 0))


@given(coefficient_sets(neutral=True))
def test_classifier_neutral(c):
    assert classify_stability(c, 64) is Verdict.NEUTRAL


def test_propagator(p0, p0_coriolis):
    N = 16
    rho0 = spectral.to_spectral(1e-3 * np.cos(spectral.nodes(N)))
    t = dispersion_table(p0, 8)
    assert np.array_equal(linear_propagator(t, rho0, 0.0), rho0)
    out = linear_propagator(t, rho0, 1.0)
    assert out[1] == pytest.approx(rho0[1] * math.exp(-6 / 13))
    tc = dispersion_table(p0_coriolis, 8)
    out = linear_propagator(tc, rho0, 1.0)
    assert np.angle(out[1]) == pytest.approx(-9 / 89)
    assert np.allclose(out[-1], np.conj(out[1]))
    with pytest.raises(ValueError):
        linear_propagator(t, rho0, -1.0)


def test_fastest_growing_mode(p0):
    assert fastest_growing_mode(dispersion_table(p0)) == (1, pytest.approx(-6 / 13))
    assert fastest_growing_mode(dispersion_table(p0.replace(gamma_i=1.0, gamma_o=0.0))) == (1, pytest.approx(6 / 13))
    assert fastest_growing_mode(dispersion_table(p0.replace(gamma_o=0.0))) == (1, 0.0)


def test_write_dispersion(tmp_path, p0):
    t = dispersion_table(p0, 4)
    csv_path, json_path = dispersion.write_dispersion(tmp_path, t, classify_stability(p0, 4))
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "n,re_l,im_l,A_n,mu_n,re_q,im_q" and len(rows) == 9
    row1 = dict(zip(rows[0].split(","), rows[5].split(",")))
    assert int(row1["n"]) == 1 and float(row1["re_q"]) == pytest.approx(-6 / 13, rel=1e-15)
    meta = json.loads(json_path.read_text())
    assert meta["verdict"] == "Stable" and meta["lambda_star"] == pytest.approx(5 / 3)
