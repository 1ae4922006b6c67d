import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fblab.mesh import Domain
from fblab.model import (
    BorderlineRegime,
    BoundarySpec,
    ExponentInputs,
    InvalidSpec,
    ProblemSpec,
    SourceSpec,
    UnsupportedPotential,
    jet_slope,
    potential_slope,
    potential_value,
    predicted_alpha,
    profile_constant,
    smoothed_potential,
    threshold_q,
)

DOM = Domain.interval(0, 1)


def spec(**kw):
    base = dict(p=2.0, gamma=0.5, lambda_plus=1.0, lambda_minus=0.0, domain=DOM)
    base.update(kw)
    return ProblemSpec(**base)


def test_spec_invariants():
    with pytest.raises(InvalidSpec):
        spec(p=1.5)
    with pytest.raises(InvalidSpec):
        spec(gamma=1.2)
    with pytest.raises(InvalidSpec):
        spec(lambda_plus=1.0, lambda_minus=1.0)
    with pytest.raises(InvalidSpec):
        spec(alpha_p=0.0)
    with pytest.raises(InvalidSpec):
        SourceSpec(q=1.0)
    with pytest.raises(InvalidSpec):
        BoundarySpec(kind="endpoints", values=(1.0,))


def test_potential_examples():
    assert potential_value(4.0, spec(gamma=0.5, lambda_plus=1, lambda_minus=0.5)) == pytest.approx(2.0)
    assert potential_value(4.0, spec(gamma=0.5, lambda_plus=1, lambda_minus=0.9)) == pytest.approx(2.0)
    assert potential_value(0.0, spec(gamma=0.0, lambda_plus=2, lambda_minus=1)) == 1.0
    assert potential_value(-1.0, spec(gamma=1.0, lambda_plus=3, lambda_minus=2)) == 2.0


def test_potential_slope_examples():
    assert potential_slope(1.0, spec(gamma=1.0, lambda_plus=2.0)) == 2.0
    assert potential_slope(0.0, spec(gamma=0.5)) == 0.0
    with pytest.raises(UnsupportedPotential):
        potential_slope(0.0, spec(gamma=0.0, lambda_plus=2, lambda_minus=1), eps=0.1)


@settings(max_examples=100, deadline=None)
@given(st.one_of(st.just(0.0), st.floats(1e-6, 10), st.floats(-10, -1e-6)), st.floats(0.01, 10), st.floats(0.0, 1.0))
def test_homogeneity(v, t, gamma):
    s = spec(gamma=gamma, lambda_plus=2.0, lambda_minus=0.5)
    lhs = potential_value(t * v, s)
    rhs = potential_value(v, s) if gamma == 0 else t**gamma * potential_value(v, s)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 5), st.floats(0.0, 1.0), st.floats(1e-6, 0.5))
def test_smoothed_slope_matches_finite_difference(v, gamma, eps):
    assume(gamma > 0)
    s = spec(gamma=gamma, lambda_plus=1.5, lambda_minus=0.5)
    d = 1e-6
    for x in (v, -v):
        fd = (smoothed_potential(x + d, gamma, 1.5, 0.5, eps) - smoothed_potential(x - d, gamma, 1.5, 0.5, eps)) / (2 * d)
        assert potential_slope(x, s, eps) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_smoothed_potential_nonnegative_and_exact_at_zero_eps():
    v = np.linspace(-2, 2, 101)
    assert np.all(smoothed_potential(v, 0.5, 2, 1, 0.1) >= 0)
    assert np.allclose(smoothed_potential(v, 0.5, 2, 1, 0.0), potential_value(v, spec(gamma=0.5, lambda_plus=2, lambda_minus=1)))


def test_subadditivity_lemma():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(1e-6, 10, (2, 10_000))
    g = rng.uniform(1e-3, 1 - 1e-3, 10_000)
    assert np.all((a + b) ** g < a**g + b**g)


def test_predicted_alpha_examples():
    assert predicted_alpha(ExponentInputs(2, 1, math.inf, 1, 1)) == (1.0, "alpha_p")
    a, regime = predicted_alpha(ExponentInputs(3, 0.6, 6, 3, 0.5))
    assert a == pytest.approx(0.25)
    assert regime in ("singular", "source")
    with pytest.raises(BorderlineRegime):
        predicted_alpha(ExponentInputs(2, 0.5, 2, 2))


def test_default_alpha_p():
    assert ExponentInputs(2, 0.5, 3, 1).alpha_p == 1.0
    assert ExponentInputs(3, 0.5, 3, 1).alpha_p == 0.5


@settings(max_examples=200, deadline=None)
@given(st.floats(2, 6), st.floats(0.01, 1), st.floats(1.01, 50), st.integers(1, 3), st.floats(0.01, 0.5))
def test_predicted_alpha_monotone(p, g, qf, n, dp):
    q = n * qf
    a0, r0 = predicted_alpha(ExponentInputs(p, g, q, n, 1.0))
    ap, _ = predicted_alpha(ExponentInputs(p + dp, g, q, n, 1.0))
    aq, _ = predicted_alpha(ExponentInputs(p, g, q * (1 + dp), n, 1.0))
    ag, _ = predicted_alpha(ExponentInputs(p, min(g + dp, 1.0), q, n, 1.0))
    assert ap <= a0 + 1e-15
    assert aq >= a0 - 1e-15
    assert ag >= a0 - 1e-15


def test_threshold_q():
    assert threshold_q(2, 2, 1.0) == math.inf
    assert threshold_q(3, 2, 0.0) == 2
    assert threshold_q(2, 2, 0.5) == pytest.approx(3.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(2, 8), st.integers(1, 3), st.one_of(st.just(0.0), st.floats(1e-6, 0.999)))
def test_threshold_q_at_least_n(p, n, g):
    t = threshold_q(p, n, g)
    assert t >= n
    if g > 1e-3:
        assert t > n
    if g == 0:
        assert t == n


@pytest.mark.parametrize("p,gamma,lp", [(2, 1, 1), (2, 1, 2), (3, 1, 27 / 4), (2, 0.5, 1), (3, 0.25, 2), (4, 0.75, 0.5)])
def test_profile_constant_solves_the_ode(p, gamma, lp):
    """Finite-difference check that c x^beta satisfies (|u'|^(p-2) u')' = (gamma/p) lp u^(gamma-1)."""
    c = profile_constant(p, gamma, lp)
    beta = p / (p - gamma)
    x = np.linspace(0.3, 1.0, 8)
    d = 1e-4

    def flux(t):
        du = c * beta * t ** (beta - 1)
        return abs(du) ** (p - 2) * du

    lhs = (flux(x + d) - flux(x - d)) / (2 * d)
    rhs = gamma / p * lp * (c * x**beta) ** (gamma - 1)
    assert np.allclose(lhs, rhs, rtol=1e-6)


def test_profile_constant_examples():
    assert profile_constant(2, 1, 1) == pytest.approx(0.25)
    assert profile_constant(2, 1, 2) == pytest.approx(0.5)
    assert profile_constant(3, 1, 27 / 4) == pytest.approx(1.0)
    with pytest.raises(UnsupportedPotential):
        profile_constant(2, 0, 1)


def test_jet_slope_examples():
    assert jet_slope(2, 1, 0) == pytest.approx(1.0)
    assert jet_slope(2, 5, 1) == pytest.approx(2.0)
    assert jet_slope(3, 9, 1) == pytest.approx(4 ** (1 / 3))
    with pytest.raises(InvalidSpec):
        jet_slope(2, 1, 1)


def test_radial_source_integrability():
    assert SourceSpec(family="radial_power", s=0.5, q=1.5).in_lq(1)
    assert not SourceSpec(family="radial_power", s=0.5, q=3).in_lq(1)


def test_spec_to_dict_roundtrip_fields():
    s = spec(source=SourceSpec(family="constant", value=2.0, q=4))
    d = s.to_dict()
    assert d["source"]["q"] == 4 and d["domain"]
    assert spec().to_dict()["source"]["q"] == "inf"
