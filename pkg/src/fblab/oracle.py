"""
Ground truth for the solver and the diagnostics: closed-form 1-D profiles and
a brute-force multi-start minimizer for coarse grids.

The brute-force minimizer evaluates the discrete energy with its own
per-node formula and does not use fblab.energy, so the two can check each
other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fblab.mesh import DiscreteFunction, Grid, build_grid
from fblab.model import InvalidSpec, ProblemSpec, UnsupportedPotential, profile_constant

GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass
class OracleSolution:
    kind: str
    params: dict
    u: DiscreteFunction | None = None
    note: str = ""
    extras: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.params["fn"](np.asarray(x, dtype=float))

    def to_dict(self) -> dict:
        params = {k: v for k, v in self.params.items() if k != "fn"}
        return {"kind": self.kind, "params": params, "note": self.note, **self.extras}


def alt_phillips_profile(p: float, gamma: float, lambda_plus: float, a: float = 0.0, grid: Grid | None = None) -> OracleSolution:
    """c ((x - a)+)^(p/(p - gamma)): one-phase solution with f = 0 (x = first coordinate)."""
    if gamma == 0:
        raise UnsupportedPotential("gamma = 0 has no Alt-Phillips profile; use two_phase_jet_1d")
    c = profile_constant(p, gamma, lambda_plus)
    beta = p / (p - gamma)

    def fn(x):
        return c * np.maximum(x - a, 0.0) ** beta

    u = None
    if grid is not None:
        u = DiscreteFunction(grid, fn(grid.coords[:, 0]))
    return OracleSolution(
        "alt_phillips",
        {"p": p, "gamma": gamma, "lambda_plus": lambda_plus, "a": a, "c": c, "beta": beta, "fn": fn},
        u,
        "planar one-phase profile",
    )


def jet_energy(a, A: float, B: float, p: float, lambda_plus: float, lambda_minus: float):
    """Continuum J_0 on [-1, 1] of the two affine pieces through (-1, A), (a, 0), (1, B)."""
    a = np.asarray(a, dtype=float)
    return (
        abs(A) ** p * (a + 1) ** (1 - p)
        + B**p * (1 - a) ** (1 - p)
        + lambda_minus * (a + 1)
        + lambda_plus * (1 - a)
    )


def _jet_derivatives(a, A, B, p, lp, lm):
    mm = abs(A) / (a + 1)
    mp = B / (1 - a)
    d1 = (p - 1) * (mp**p - mm**p) - (lp - lm)
    d2 = (p - 1) * p * (mp**p / (1 - a) + mm**p / (a + 1))
    return d1, d2


def two_phase_jet_1d(
    A: float,
    B: float,
    spec: ProblemSpec,
    grid: Grid | None = None,
    resolution: float = 1e-4,
    newton_steps: int = 3,
) -> OracleSolution:
    """Best kink location for the piecewise-affine gamma = 0 candidate on [-1, 1].

    Scans a with step `resolution` times the domain length, then polishes
    with Newton steps on the smooth energy-in-a function.
    """
    if spec.domain.bounds != ((-1.0, 1.0),):
        raise InvalidSpec("the jet oracle is set on [-1, 1]")
    if spec.source.family != "zero":
        raise InvalidSpec("the jet oracle needs f = 0")
    p, lp, lm = spec.p, spec.lambda_plus, spec.lambda_minus
    if lp <= lm:
        raise InvalidSpec("the jet oracle needs lambda_plus > lambda_minus")
    if A * B >= 0:
        fn = lambda x: A + (B - A) * (x + 1) / 2  # noqa: E731
        slope = abs(B - A) / 2
        energy = 2 * slope**p + (lp if min(A, B) > 0 else lm) * 2
        u = DiscreteFunction(grid, fn(grid.coords[:, 0])) if grid is not None else None
        return OracleSolution("affine", {"A": A, "B": B, "fn": fn}, u, "boundary data of one sign: affine interpolant", {"energy": energy})
    if A > 0:
        raise InvalidSpec("the jet oracle takes A < 0 < B")
    step = 2 * resolution
    a_grid = np.arange(-1 + step, 1 - step / 2, step)
    E = jet_energy(a_grid, A, B, p, lp, lm)
    k = int(np.argmin(E))
    a = float(a_grid[k])
    lo, hi = a_grid[max(k - 1, 0)], a_grid[min(k + 1, a_grid.size - 1)]
    for _ in range(newton_steps):
        d1, d2 = _jet_derivatives(a, A, B, p, lp, lm)
        a = float(min(max(a - d1 / d2, lo), hi))
    mm, mp = abs(A) / (a + 1), B / (1 - a)
    flux = mp**p - mm**p - (lp - lm) / (p - 1)
    energy = float(jet_energy(a, A, B, p, lp, lm))

    def fn(x):
        return np.where(x <= a, A * (a - x) / (a + 1), B * (x - a) / (1 - a))

    u = DiscreteFunction(grid, fn(grid.coords[:, 0])) if grid is not None else None
    return OracleSolution(
        "two_phase_jet",
        {"A": A, "B": B, "p": p, "lambda_plus": lp, "lambda_minus": lm, "a": a, "fn": fn},
        u,
        f"kink scan at step {step:g} with {newton_steps} Newton steps",
        {"kink": a, "m_plus": mp, "m_minus": mm, "energy": energy, "flux_residual": flux, "scan_step": step},
    )


# --- brute force ------------------------------------------------------------------------


def _local_energy(t, left, right, h, p, gamma, lp, lm, fl, fr):
    """Part of the discrete energy that depends on one interior node value t."""
    ml = (left + t) / 2
    mr = (t + right) / 2
    if gamma == 0:
        Fl = np.where(ml > 0, lp, lm)
        Fr = np.where(mr > 0, lp, lm)
    else:
        Fl = lp * np.maximum(ml, 0) ** gamma + lm * np.maximum(-ml, 0) ** gamma
        Fr = lp * np.maximum(mr, 0) ** gamma + lm * np.maximum(-mr, 0) ** gamma
    return h * (
        np.abs((t - left) / h) ** p + np.abs((right - t) / h) ** p + Fl + Fr + fl * ml + fr * mr
    )


def discrete_energy_1d(U: np.ndarray, h: float, spec: ProblemSpec, f_el: np.ndarray) -> np.ndarray:
    """Discrete J_gamma of each row of U (P1, midpoint quadrature for F and f)."""
    p, gamma, lp, lm = spec.p, spec.gamma, spec.lambda_plus, spec.lambda_minus
    d = np.diff(U, axis=-1) / h
    m = (U[..., 1:] + U[..., :-1]) / 2
    if gamma == 0:
        F = np.where(m > 0, lp, lm)
    else:
        F = lp * np.maximum(m, 0) ** gamma + lm * np.maximum(-m, 0) ** gamma
    return h * np.sum(np.abs(d) ** p + F + f_el * m, axis=-1)


def brute_force_minimizer_1d(
    spec: ProblemSpec,
    N: int,
    starts: int = 16,
    seed: int = 0,
    max_sweeps: int = 5000,
    tol: float = 1e-9,
    scan_points: int = 65,
    golden_steps: int = 40,
) -> DiscreteFunction:
    """Multi-start red-black coordinate descent with golden-section node updates.

    Each node value is searched in [-2 S - 1, 2 S + 1], S = sup|phi|: a coarse
    scan (plus the values 0 and those zeroing a neighboring midpoint) picks a
    bracket, golden-section search refines it. All starts advance together.
    Returns the lowest-energy result (ties: lowest start index).
    """
    if spec.n != 1:
        raise InvalidSpec("brute force is 1-D only")
    if N > 32:
        raise InvalidSpec("brute force is meant for N <= 32")
    grid = build_grid(spec.domain, N)
    h = grid.h[0]
    phi = spec.boundary.trace(grid)  # values at the two endpoints
    S = float(np.max(np.abs(phi)))
    lo, hi = -2 * S - 1, 2 * S + 1
    f_el = spec.source.on_elements(grid)
    p, gamma, lp, lm = spec.p, spec.gamma, spec.lambda_plus, spec.lambda_minus
    rng = np.random.default_rng(seed)
    U = rng.uniform(lo, hi, size=(starts, N + 1))
    U[:, 0], U[:, -1] = phi[0], phi[-1]
    scan = np.linspace(lo, hi, scan_points)
    dscan = scan[1] - scan[0]

    def update(idx):
        left, right = U[:, idx - 1][..., None], U[:, idx + 1][..., None]
        fl, fr = f_el[idx - 1][None, :, None], f_el[idx][None, :, None]
        extra = np.concatenate([np.zeros_like(left), -left, -right, U[:, idx][..., None]], axis=-1)
        T = np.concatenate([np.broadcast_to(scan, left.shape[:-1] + scan.shape), extra], axis=-1)
        Ev = _local_energy(T, left, right, h, p, gamma, lp, lm, fl, fr)
        best = np.take_along_axis(T, np.argmin(Ev, axis=-1)[..., None], -1)
        # golden section on a one-step bracket around the best candidate
        a = np.maximum(best - dscan, lo)
        b = np.minimum(best + dscan, hi)
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc = _local_energy(c, left, right, h, p, gamma, lp, lm, fl, fr)
        fd = _local_energy(d, left, right, h, p, gamma, lp, lm, fl, fr)
        for _ in range(golden_steps):
            sel = fc < fd  # minimum lies in [a, d]
            b = np.where(sel, d, b)
            a = np.where(sel, a, c)
            keep = np.where(sel, c, d)
            fkeep = np.where(sel, fc, fd)
            x_new = np.where(sel, b - GOLDEN * (b - a), a + GOLDEN * (b - a))
            f_new = _local_energy(x_new, left, right, h, p, gamma, lp, lm, fl, fr)
            c = np.where(sel, x_new, keep)
            fc = np.where(sel, f_new, fkeep)
            d = np.where(sel, keep, x_new)
            fd = np.where(sel, fkeep, f_new)
        g = (a + b) / 2
        cand = np.concatenate([best, g], axis=-1)
        Ec = _local_energy(cand, left, right, h, p, gamma, lp, lm, fl, fr)
        new = np.take_along_axis(cand, np.argmin(Ec, axis=-1)[..., None], -1)[..., 0]
        change = float(np.max(np.abs(new - U[:, idx]))) if idx.size else 0.0
        U[:, idx] = new
        return change

    odd = np.arange(1, N, 2)
    even = np.arange(2, N, 2)
    J_last = discrete_energy_1d(U, h, spec, f_el)
    for sweep in range(1, max_sweeps + 1):
        ch = update(odd)
        if even.size:
            ch = max(ch, update(even))
        if ch <= tol * max(1.0, S):
            break
        if sweep % 50 == 0:
            # ties in the gamma = 0 potential can make a start cycle without gaining energy
            J = discrete_energy_1d(U, h, spec, f_el)
            if np.all(J_last - J <= tol * np.maximum(1.0, np.abs(J))):
                break
            J_last = J
    J = discrete_energy_1d(U, h, spec, f_el)
    k = int(np.argmin(J))
    return DiscreteFunction(grid, U[k])


__all__ = [
    "OracleSolution",
    "alt_phillips_profile",
    "two_phase_jet_1d",
    "jet_energy",
    "brute_force_minimizer_1d",
    "discrete_energy_1d",
]
