"""
Discrete energy J_gamma, its smoothed gradient, the Euler-Lagrange residual
and p-harmonic replacements.

Element sums go through np.sum, which reduces pairwise in a fixed order for
a given array; results do not depend on thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from fblab.mesh import DiscreteFunction, Grid, GridMismatch
from fblab.model import ProblemSpec, UnsupportedPotential, smoothed_potential, smoothed_slope

# regularizes 0^(p-2) in the Dirichlet gradient for p > 2; far below discretization error
EPS_DIRICHLET = 1e-10


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    potential: float
    source: float

    @property
    def total(self) -> float:
        return self.dirichlet + self.potential + self.source

    def to_dict(self) -> dict:
        return {
            "dirichlet": self.dirichlet,
            "potential": self.potential,
            "source": self.source,
            "total": self.total,
        }


class ReplacementNotConverged(RuntimeError):
    def __init__(self, message, last: DiscreteFunction):
        super().__init__(message)
        self.last = last


def _block_hessian(grads: np.ndarray, p: float, delta: float) -> sp.csr_matrix:
    """Block-diagonal Hessian of |g|^p per element, with |g|^2 -> |g|^2 + delta^2."""
    ne, dim = grads.shape
    s = np.einsum("ij,ij->i", grads, grads) + delta * delta
    a = p * s ** ((p - 2) / 2)
    b = p * (p - 2) * s ** ((p - 4) / 2) if p != 2 else np.zeros(ne)
    if dim == 1:
        return sp.diags(a + b * grads[:, 0] ** 2)
    blocks = a[:, None, None] * np.eye(dim) + b[:, None, None] * grads[:, :, None] * grads[:, None, :]
    base = np.arange(ne) * dim
    rows = np.repeat(base[:, None] + np.arange(dim), dim, axis=1).ravel()
    cols = np.tile(base[:, None] + np.arange(dim), (1, dim)).ravel()
    return sp.csr_matrix((blocks.reshape(ne, -1).ravel(), (rows, cols)), shape=(ne * dim, ne * dim))


class DiscreteEnergy:
    """Precomputed operators for evaluating J_gamma on one grid.

    `gamma` may be overridden per call so one instance serves a whole
    continuation run.
    """

    def __init__(self, grid: Grid, spec: ProblemSpec):
        if grid.domain != spec.domain:
            raise GridMismatch("grid and problem live on different domains")
        self.grid = grid
        self.spec = spec
        self.G = grid.gradient_operator
        self.GT = self.G.T.tocsr()
        self.M = grid.midpoint_operator
        self.MT = self.M.T.tocsr()
        self.meas = grid.element_measure
        self.f_el = spec.source.on_elements(grid)
        self.boundary = grid.boundary_mask
        self.free = np.flatnonzero(~self.boundary)

    def check(self, u: DiscreteFunction):
        if u.grid != self.grid:
            raise GridMismatch("discrete function lives on a different grid")

    def grads(self, v: np.ndarray) -> np.ndarray:
        return (self.G @ v).reshape(self.grid.n_elements, self.grid.dim)

    # -- values ---------------------------------------------------------------

    def dirichlet(self, v: np.ndarray) -> float:
        g = self.grads(v)
        s = np.einsum("ij,ij->i", g, g)
        return float(np.sum(s ** (self.spec.p / 2)) * self.meas)

    def potential(self, v: np.ndarray, gamma: float | None = None, eps: float = 0.0) -> float:
        gamma = self.spec.gamma if gamma is None else gamma
        mid = self.M @ v
        lp, lm = self.spec.lambda_plus, self.spec.lambda_minus
        if gamma == 0:
            F = np.where(mid > 0, lp, lm)
        else:
            F = smoothed_potential(mid, gamma, lp, lm, eps)
        return float(np.sum(F) * self.meas)

    def source(self, v: np.ndarray) -> float:
        return float(np.sum(self.f_el * (self.M @ v)) * self.meas)

    def breakdown(self, v: np.ndarray, gamma: float | None = None) -> EnergyBreakdown:
        return EnergyBreakdown(self.dirichlet(v), self.potential(v, gamma), self.source(v))

    def value(self, v: np.ndarray, gamma: float | None = None, eps: float = 0.0) -> float:
        return self.dirichlet(v) + self.potential(v, gamma, eps) + self.source(v)

    # -- derivatives ------------------------------------------------------------

    def dirichlet_gradient(self, v: np.ndarray) -> np.ndarray:
        p = self.spec.p
        g = self.grads(v)
        s = np.einsum("ij,ij->i", g, g)
        flux = (p * (s + EPS_DIRICHLET**2) ** ((p - 2) / 2))[:, None] * g
        return self.meas * (self.GT @ flux.ravel())

    def smooth_gradient(self, v: np.ndarray) -> np.ndarray:
        """Gradient of the Dirichlet and source terms, zero on the boundary."""
        out = self.dirichlet_gradient(v) + self.meas * (self.MT @ self.f_el)
        out[self.boundary] = 0.0
        return out

    def gradient(self, v: np.ndarray, gamma: float | None = None, eps: float = 0.0) -> np.ndarray:
        gamma = self.spec.gamma if gamma is None else gamma
        if gamma == 0:
            raise UnsupportedPotential("no gradient for the discontinuous gamma = 0 potential")
        mid = self.M @ v
        slope = smoothed_slope(mid, gamma, self.spec.lambda_plus, self.spec.lambda_minus, eps)
        out = self.dirichlet_gradient(v) + self.meas * (self.MT @ (slope + self.f_el))
        out[self.boundary] = 0.0
        return out

    def dirichlet_metric(self, v: np.ndarray, delta: float | None = None) -> sp.csr_matrix:
        """Hessian of the Dirichlet term, floored so flat regions stay positive definite."""
        p = self.spec.p
        g = self.grads(v)
        if delta is None:
            gmax = float(np.max(np.linalg.norm(g, axis=1))) if g.size else 0.0
            delta = 1e-3 * gmax + 1e-12
        H = _block_hessian(g, p, delta if p != 2 else 0.0)
        return (self.meas * (self.GT @ H @ self.G)).tocsr()

    def potential_weights(self, v: np.ndarray, gamma: float, eps: float) -> np.ndarray:
        """Curvature of the quadratic majorant of the smoothed potential, per element.

        ((w)^2 + eps^2)^(gamma/2) is concave in w^2, so its tangent in w^2 gives
        a quadratic upper bound with curvature gamma ((w)^2 + eps^2)^(gamma/2 - 1).
        """
        mid = self.M @ v
        lam = np.where(mid >= 0, self.spec.lambda_plus, self.spec.lambda_minus)
        with np.errstate(divide="ignore"):
            w = gamma * lam * (mid * mid + eps * eps) ** (gamma / 2 - 1)
        return np.where(np.isfinite(w), w, 1e300)

    def metric(self, v: np.ndarray, gamma: float, eps: float) -> sp.csr_matrix:
        K = self.dirichlet_metric(v)
        if gamma > 0 and gamma < 2:
            w = self.potential_weights(v, gamma, eps)
            K = K + self.meas * (self.MT @ sp.diags(w) @ self.M)
        return K.tocsr()


def total_energy(u: DiscreteFunction, spec: ProblemSpec) -> EnergyBreakdown:
    E = DiscreteEnergy(u.grid, spec)
    return E.breakdown(u.values)


def energy_gradient(u: DiscreteFunction, spec: ProblemSpec, eps: float = 0.0) -> DiscreteFunction:
    if spec.gamma == 0:
        raise UnsupportedPotential("no gradient for the discontinuous gamma = 0 potential")
    E = DiscreteEnergy(u.grid, spec)
    return u.with_values(E.gradient(u.values, eps=eps))


@dataclass
class PdeResidual:
    values: np.ndarray  # NaN on excluded nodes
    evaluated: np.ndarray  # boolean mask of nodes where the residual was computed

    @property
    def sup(self) -> float:
        v = self.values[self.evaluated]
        return float(np.max(np.abs(v))) if v.size else 0.0

    def summary(self) -> dict:
        v = self.values[self.evaluated]
        return {
            "sup": self.sup,
            "mean_abs": float(np.mean(np.abs(v))) if v.size else 0.0,
            "n_evaluated": int(v.size),
            "n_excluded": int(self.evaluated.size - v.size),
        }


def pde_residual(u: DiscreteFunction, spec: ProblemSpec, band: float | None = None) -> PdeResidual:
    """Nodal residual of the Euler-Lagrange equation away from the free boundary.

    The discrete p-Laplacian is the weak form divided by the lumped mass:
    Delta_p u(x_i) ~ -(dD/du_i) / (p m_i). Nodes on the boundary or with
    |u| <= band (default: one grid spacing) are excluded.
    """
    grid = u.grid
    band = grid.hmin if band is None else band
    E = DiscreteEnergy(grid, spec)
    v = u.values
    lap_p = -E.dirichlet_gradient(v) / (spec.p * grid.lumped_mass)
    g, lp, lm = spec.gamma, spec.lambda_plus, spec.lambda_minus
    evaluated = ~grid.boundary_mask & (np.abs(v) > band)
    absorb = np.zeros_like(v)
    if g > 0:
        pos = evaluated & (v > 0)
        neg = evaluated & (v < 0)
        absorb[pos] = lp * v[pos] ** (g - 1)
        absorb[neg] = -lm * (-v[neg]) ** (g - 1)
    f = spec.source.on_nodes(grid)
    res = lap_p - (g / spec.p) * absorb - f / spec.p
    res[~evaluated] = np.nan
    return PdeResidual(res, evaluated)


def region_free_nodes(grid: Grid, region) -> tuple[np.ndarray, np.ndarray]:
    """Free nodes of a region (its discrete interior) and the elements inside it."""
    mask = np.zeros(grid.n_nodes, dtype=bool)
    region = np.asarray(region)
    if region.dtype == bool:
        mask[:] = region
    else:
        mask[region.astype(int)] = True
    E = grid.elements
    inside = np.all(mask[E], axis=1)
    touches_outside = np.zeros(grid.n_nodes, dtype=bool)
    touches_outside[E[~inside].ravel()] = True
    free = mask & ~touches_outside & ~grid.boundary_mask
    return np.flatnonzero(free), np.flatnonzero(inside)


def _dirichlet_only(grid: Grid, p: float) -> DiscreteEnergy:
    spec = ProblemSpec(p=p, gamma=1.0, lambda_plus=1.0, lambda_minus=0.0, domain=grid.domain)
    return DiscreteEnergy(grid, spec)


def p_harmonic_replacement(
    u: DiscreteFunction,
    region,
    p: float,
    tol: float = 1e-11,
    max_iter: int = 200,
) -> DiscreteFunction:
    """Minimize int |grad h|^p over the region's interior with h = u elsewhere."""
    grid = u.grid
    free, _ = region_free_nodes(grid, region)
    if free.size == 0:
        raise ValueError("region has no interior nodes")
    E = _dirichlet_only(grid, p)
    v = u.values.copy()
    for it in range(max_iter + 1):
        g = E.dirichlet_gradient(v)[free]
        scale = p * max(float(np.max(np.abs(E.grads(v)))), 1e-300) ** (p - 1)
        if np.max(np.abs(g) / grid.lumped_mass[free]) <= tol * max(scale, 1.0) and it > 0:
            return u.with_values(v)
        if it == max_iter:
            break
        K = E.dirichlet_metric(v)[free][:, free].tocsc()
        d = spla.spsolve(K, -g)
        if p == 2:
            v[free] += d
            continue
        e0 = E.dirichlet(v)
        slope = float(g @ d)
        if abs(slope) <= 1e-13 * max(e0, 1e-300):
            # energy differences are at round-off level; judge the Newton step by the gradient
            trial = v.copy()
            trial[free] += d
            if np.linalg.norm(E.dirichlet_gradient(trial)[free]) < np.linalg.norm(g):
                v = trial
                continue
            return u.with_values(v)
        t = 1.0
        while t > 1e-12:
            trial = v.copy()
            trial[free] += t * d
            if E.dirichlet(trial) <= e0 + 1e-4 * t * slope:
                v = trial
                break
            t *= 0.5
        else:
            return u.with_values(v)  # no further decrease representable
    raise ReplacementNotConverged(f"p-harmonic replacement did not converge in {max_iter} steps", u.with_values(v))


def dirichlet_gap(psi: DiscreteFunction, region, p: float) -> tuple[float, float]:
    """(int |grad psi|^p - |grad h|^p, int |grad(psi - h)|^p) over the region."""
    h = p_harmonic_replacement(psi, region, p)
    _, inside = region_free_nodes(psi.grid, region)
    grid = psi.grid
    G = grid.gradient_operator

    def pnorm(vals):
        g = (G @ vals).reshape(grid.n_elements, grid.dim)[inside]
        return np.einsum("ij,ij->i", g, g) ** (p / 2)

    lhs = float(np.sum(pnorm(psi.values) - pnorm(h.values)) * grid.element_measure)
    rhs = float(np.sum(pnorm(psi.values - h.values)) * grid.element_measure)
    return lhs, rhs
