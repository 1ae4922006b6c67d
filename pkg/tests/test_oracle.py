import numpy as np
import pytest
from scipy.optimize import brentq

from fblab.diagnostics import free_boundary, growth_fit
from fblab.energy import pde_residual, total_energy
from fblab.mesh import DiscreteFunction, build_grid
from fblab.model import InvalidSpec, UnsupportedPotential
from fblab.oracle import (
    alt_phillips_profile,
    brute_force_minimizer_1d,
    discrete_energy_1d,
    jet_energy,
    two_phase_jet_1d,
)
from fblab.solver import minimize

from conftest import interval_spec


def jet_kink_root(lp, lm):
    """Kink of the p = 2, A = -1, B = 1 jet: slopes 1/(1 + a), 1/(1 - a) in the flux balance."""
    return brentq(lambda a: 1 / (1 - a) ** 2 - 1 / (1 + a) ** 2 - (lp - lm), -1 + 1e-9, 1 - 1e-9)


def test_alt_phillips_examples():
    grid = build_grid(interval_spec().domain, 64)
    o = alt_phillips_profile(2, 1, 1, 0.0, grid)
    x = grid.coords[:, 0]
    assert np.allclose(o.u.values, np.maximum(x, 0) ** 2 / 4)
    o = alt_phillips_profile(2, 0.5, 1)
    assert o.params["beta"] == pytest.approx(4 / 3)
    assert o(np.array([1.0]))[0] == pytest.approx(o.params["c"])
    with pytest.raises(UnsupportedPotential):
        alt_phillips_profile(2, 0, 1)


@pytest.mark.parametrize("p,gamma", [(2, 0.25), (2, 0.5), (3, 0.75), (3, 1.0)])
def test_alt_phillips_growth_self_consistency(p, gamma):
    grid = build_grid(interval_spec().domain, 4096)
    o = alt_phillips_profile(p, gamma, 1.0, 0.0, grid)
    fit = growth_fit(o.u, free_boundary(o.u))
    assert fit.exponent == pytest.approx(p / (p - gamma), rel=0.01)


@pytest.mark.parametrize("p,gamma", [(2, 0.5), (3, 1.0)])
def test_alt_phillips_pde_residual_first_order(p, gamma):
    res = []
    for N in (128, 256):
        spec = interval_spec(p=p, gamma=gamma)
        grid = build_grid(spec.domain, N)
        o = alt_phillips_profile(p, gamma, 1.0, 0.0, grid)
        x = grid.coords[:, 0]
        r = pde_residual(o.u, spec, band=0.0).values
        res.append(np.nanmax(np.abs(r[x > 0.25])))
    assert res[1] <= 0.6 * res[0] + 1e-12


def test_jet_kink_equation(jet_spec):
    o = two_phase_jet_1d(-1.0, 1.0, jet_spec)
    a = jet_kink_root(2.0, 1.0)
    assert 4 * a == pytest.approx((1 - a * a) ** 2)
    assert o.extras["kink"] == pytest.approx(a, abs=1e-10)
    assert abs(o.extras["flux_residual"]) < 1e-9
    assert o.extras["energy"] == pytest.approx(jet_energy(a, -1, 1, 2, 2, 1))


def test_jet_flux_residual_first_order_in_scan(jet_spec):
    errs = [abs(two_phase_jet_1d(-1, 1, jet_spec, resolution=r, newton_steps=0).extras["flux_residual"]) for r in (1e-2, 1e-3)]
    assert errs[1] < errs[0]
    assert errs[1] <= 2e-2


def test_jet_symmetric_limit():
    spec = interval_spec(gamma=0.0, lp=1.0 + 1e-8, lm=1.0, left=-1, right=1)
    assert abs(two_phase_jet_1d(-1, 1, spec).extras["kink"]) < 1e-6


def test_jet_kink_moves_with_lambda_plus():
    kinks = [two_phase_jet_1d(-1, 1, interval_spec(gamma=0.0, lp=lp, lm=1.0)).extras["kink"] for lp in (1.5, 2, 4, 8)]
    assert all(b > a for a, b in zip(kinks, kinks[1:]))
    for lp, k in zip((1.5, 2, 4, 8), kinks):
        assert k == pytest.approx(jet_kink_root(lp, 1.0), abs=1e-9)


def test_jet_same_sign_affine():
    spec = interval_spec(gamma=0.0, lp=2.0, lm=1.0, left=0.5, right=1.0)
    o = two_phase_jet_1d(0.5, 1.0, spec)
    assert o.kind == "affine" and o.note
    assert o(np.array([0.0]))[0] == pytest.approx(0.75)


def test_jet_preconditions():
    with pytest.raises(InvalidSpec):
        two_phase_jet_1d(-1, 1, interval_spec(gamma=0.0, lp=2, lm=1, a=0.0, b=1.0))


def test_discrete_energy_matches_energy_module():
    spec = interval_spec(p=3.0, gamma=0.5, lp=2.0, lm=0.5, left=-0.5, right=1.0)
    grid = build_grid(spec.domain, 32)
    rng = np.random.default_rng(3)
    for gamma in (0.5, 0.0):
        s = interval_spec(p=3.0, gamma=gamma, lp=2.0, lm=0.5, left=-0.5, right=1.0)
        U = rng.normal(size=(5, grid.n_nodes))
        mine = discrete_energy_1d(U, grid.h[0], s, s.source.on_elements(grid))
        ref = [total_energy(DiscreteFunction(grid, u), s).total for u in U]
        assert np.allclose(mine, ref, rtol=1e-12)


def test_brute_force_trivial():
    spec = interval_spec(gamma=0.5, lp=1.0, lm=0.5, left=0.0, right=0.0)
    u = brute_force_minimizer_1d(spec, 16, starts=4)
    assert np.all(u.values == 0)


def test_brute_force_convex_matches_minimize():
    spec = interval_spec(gamma=1.0, lp=1.0, lm=0.5, left=-0.3, right=0.8)
    u = brute_force_minimizer_1d(spec, 16, starts=8)
    rep = minimize(spec, build_grid(spec.domain, 16))
    assert total_energy(u, spec).total == pytest.approx(rep.energy.total, abs=1e-6)


def test_brute_force_rejects_large_grids():
    with pytest.raises(InvalidSpec):
        brute_force_minimizer_1d(interval_spec(), 64)


def test_brute_force_jet_cross_oracle(jet_spec):
    u = brute_force_minimizer_1d(jet_spec, 32, starts=64)
    target = two_phase_jet_1d(-1, 1, jet_spec).extras["energy"]
    assert total_energy(u, jet_spec).total == pytest.approx(target, rel=0.01)
