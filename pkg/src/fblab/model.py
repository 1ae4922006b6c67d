"""
Problem description, the two-phase potentials and the closed-form exponents.

The energy is

    J_gamma(v) = int |grad v|^p + F_gamma(v) + f v  dX

with F_gamma(v) = lp (v+)^gamma + lm (v-)^gamma for gamma > 0 and the
indicator form F_0(v) = lp [v > 0] + lm [v <= 0]. The zero set is charged
to the negative phase at gamma = 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from fblab.mesh import Domain, Grid, GridMismatch, read_node_csv


class InvalidSpec(ValueError):
    pass


class UnsupportedPotential(ValueError):
    """Raised for operations that need a differentiable potential (gamma = 0)."""


class BorderlineRegime(ValueError):
    """q <= n: the C^{1,alpha} formula does not apply (Log-Lipschitz regime)."""


SOURCE_FAMILIES = ("zero", "constant", "radial_power", "grid")
BOUNDARY_KINDS = ("constant", "endpoints", "affine", "expression", "nodes")


def _as_q(q) -> float:
    if isinstance(q, str):
        if q.lower() in ("inf", "infinity"):
            return math.inf
        q = float(q)
    return float(q)


@dataclass(frozen=True)
class SourceSpec:
    """Right-hand side f and its declared integrability exponent q."""

    family: str = "zero"
    value: float = 0.0  # constant family
    amplitude: float = 1.0  # radial_power: A |X - X0|^(-s)
    center: tuple[float, ...] = (0.0,)
    s: float = 0.0
    path: str | None = None  # grid family: node CSV with header x[,y],f
    q: float = math.inf

    def __post_init__(self):
        if self.family not in SOURCE_FAMILIES:
            raise InvalidSpec(f"unknown source family {self.family!r}")
        object.__setattr__(self, "q", _as_q(self.q))
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.q > 1:
            raise InvalidSpec("declared integrability q must exceed 1")
        if self.family == "radial_power" and self.s < 0:
            raise InvalidSpec("radial power exponent s must be nonnegative")
        if self.family == "grid" and not self.path:
            raise InvalidSpec("grid source needs a path")

    def in_lq(self, n: int) -> bool:
        """Whether f really lies in L^q for the declared q (radial power needs s q < n)."""
        if self.family != "radial_power" or self.s == 0:
            return True
        return self.s * self.q < n

    def _at(self, X: np.ndarray, grid: Grid) -> np.ndarray:
        if self.family == "zero":
            return np.zeros(len(X))
        if self.family == "constant":
            return np.full(len(X), float(self.value))
        c = np.array(self.center[: grid.dim] + (0.0,) * (grid.dim - len(self.center)))
        r = np.linalg.norm(X - c, axis=1)
        # held constant inside one grid spacing of the singular point
        return self.amplitude * np.maximum(r, grid.hmin) ** (-self.s)

    def _grid_data(self, grid: Grid) -> np.ndarray:
        data = read_node_csv(self.path)
        if data.shape[0] != grid.n_nodes:
            raise GridMismatch(f"{self.path}: {data.shape[0]} rows for {grid.n_nodes} nodes")
        return data[:, -1]

    def on_elements(self, grid: Grid) -> np.ndarray:
        """f at element midpoints."""
        if self.family == "grid":
            return grid.midpoint_operator @ self._grid_data(grid)
        return self._at(grid.midpoints, grid)

    def on_nodes(self, grid: Grid) -> np.ndarray:
        if self.family == "grid":
            return self._grid_data(grid)
        return self._at(grid.coords, grid)


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet data phi on the boundary of the domain.

    kinds: constant(value), endpoints(values=[phi(a), phi(b)], 1-D only),
    affine(value + grad . X), expression(expr in x, y using numpy names),
    nodes(values listed in boundary-node order for a fixed grid).
    """

    kind: str = "constant"
    value: float = 0.0
    values: tuple[float, ...] = ()
    grad: tuple[float, ...] = ()
    expr: str = ""

    def __post_init__(self):
        if self.kind not in BOUNDARY_KINDS:
            raise InvalidSpec(f"unknown boundary kind {self.kind!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "grad", tuple(float(v) for v in self.grad))
        if self.kind == "endpoints" and len(self.values) != 2:
            raise InvalidSpec("endpoints boundary needs exactly two values")
        if self.kind == "expression" and not self.expr:
            raise InvalidSpec("expression boundary needs expr")
        if not all(math.isfinite(v) for v in (self.value, *self.values, *self.grad)):
            raise InvalidSpec("boundary values must be finite")

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """phi at arbitrary points X, shape (m, dim); not defined for kind 'nodes'."""
        X = np.atleast_2d(X)
        m, dim = X.shape
        if self.kind == "constant":
            return np.full(m, float(self.value))
        if self.kind == "endpoints":
            if dim != 1:
                raise InvalidSpec("endpoints boundary is 1-D only")
            return np.full(m, np.nan)  # meaningful only at the two endpoints
        if self.kind == "affine":
            g = np.zeros(dim)
            g[: len(self.grad)] = self.grad[:dim]
            return self.value + X @ g
        if self.kind == "expression":
            names = {k: getattr(np, k) for k in ("sin", "cos", "exp", "log", "sqrt", "abs", "pi", "tanh", "maximum", "minimum", "sign", "where")}
            names["x"] = X[:, 0]
            if dim > 1:
                names["y"] = X[:, 1]
            out = eval(self.expr, {"__builtins__": {}}, names)  # noqa: S307 - trusted config
            return np.broadcast_to(np.asarray(out, dtype=float), (m,)).copy()
        raise InvalidSpec("nodes boundary cannot be evaluated off its grid")

    def trace(self, grid: Grid) -> np.ndarray:
        """Boundary values on grid.boundary_mask nodes (in node order)."""
        idx = np.flatnonzero(grid.boundary_mask)
        if self.kind == "nodes":
            if len(self.values) != idx.size:
                raise GridMismatch(f"{len(self.values)} boundary values for {idx.size} boundary nodes")
            out = np.array(self.values)
        elif self.kind == "endpoints":
            if grid.dim != 1:
                raise InvalidSpec("endpoints boundary is 1-D only")
            out = np.array(self.values)
        else:
            out = self.evaluate(grid.coords[idx])
        if not np.all(np.isfinite(out)):
            raise InvalidSpec("boundary data evaluates to non-finite values")
        return out

    def sup_abs(self, grid: Grid) -> float:
        return float(np.max(np.abs(self.trace(grid))))


@dataclass(frozen=True)
class ProblemSpec:
    p: float
    gamma: float
    lambda_plus: float
    lambda_minus: float
    domain: Domain
    source: SourceSpec = field(default_factory=SourceSpec)
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    alpha_p: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 2):
            raise InvalidSpec(f"p must be >= 2, got {self.p}")
        if not (0 <= self.gamma <= 1):
            raise InvalidSpec(f"gamma must lie in [0, 1], got {self.gamma}")
        if not (0 <= self.lambda_minus < self.lambda_plus < math.inf):
            raise InvalidSpec(
                f"need 0 <= lambda_minus < lambda_plus < inf, got "
                f"{self.lambda_minus}, {self.lambda_plus}"
            )
        if self.alpha_p is not None and not (0 < self.alpha_p <= 1):
            raise InvalidSpec("alpha_p must lie in (0, 1]")

    @property
    def n(self) -> int:
        return self.domain.dim

    def with_gamma(self, gamma: float) -> ProblemSpec:
        return replace(self, gamma=float(gamma))

    def exponent_inputs(self, q: float | None = None) -> ExponentInputs:
        return ExponentInputs(
            p=self.p,
            gamma=self.gamma,
            q=self.source.q if q is None else q,
            n=self.n,
            alpha_p=self.alpha_p,
        )

    def to_dict(self) -> dict[str, Any]:
        src = asdict(self.source)
        src["q"] = "inf" if math.isinf(self.source.q) else self.source.q
        src["center"] = list(self.source.center)
        bnd = asdict(self.boundary)
        bnd["values"] = list(self.boundary.values)
        bnd["grad"] = list(self.boundary.grad)
        return {
            "p": self.p,
            "gamma": self.gamma,
            "lambda_plus": self.lambda_plus,
            "lambda_minus": self.lambda_minus,
            "domain": self.domain.to_dict(),
            "source": src,
            "boundary": bnd,
            "alpha_p": self.alpha_p,
        }


def default_alpha_p(p: float) -> float:
    return 1.0 if p == 2 else 1.0 / (p - 1.0)


@dataclass(frozen=True)
class ExponentInputs:
    p: float
    gamma: float
    q: float
    n: int
    alpha_p: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", _as_q(self.q))
        if self.alpha_p is None:
            object.__setattr__(self, "alpha_p", default_alpha_p(self.p))
        if not (0 < self.alpha_p <= 1):
            raise InvalidSpec("alpha_p must lie in (0, 1]")


def potential_value(v, spec: ProblemSpec):
    """F_gamma(v); works elementwise on arrays."""
    v = np.asarray(v, dtype=float)
    lp, lm, g = spec.lambda_plus, spec.lambda_minus, spec.gamma
    if g == 0:
        out = np.where(v > 0, lp, lm)
    else:
        out = lp * np.maximum(v, 0.0) ** g + lm * np.maximum(-v, 0.0) ** g
    return out if out.ndim else float(out)


def smoothed_potential(v, gamma, lp, lm, eps):
    """lp(((v+)^2 + eps^2)^(gamma/2) - eps^gamma) + same for the negative phase."""
    vp = np.maximum(v, 0.0)
    vm = np.maximum(-v, 0.0)
    if eps == 0:
        return lp * vp**gamma + lm * vm**gamma
    e2 = eps * eps
    eg = eps**gamma
    return lp * ((vp * vp + e2) ** (gamma / 2) - eg) + lm * ((vm * vm + e2) ** (gamma / 2) - eg)


def smoothed_slope(v, gamma, lp, lm, eps):
    """Derivative of smoothed_potential; the subgradient 0 is taken at v = 0 when eps = 0."""
    vp = np.maximum(v, 0.0)
    vm = np.maximum(-v, 0.0)
    e2 = eps * eps

    def side(w):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if eps == 0:
                # w^2 underflows for subnormal w, so use the closed form
                out = gamma * w ** (gamma - 1)
            else:
                out = gamma * w * (w * w + e2) ** (gamma / 2 - 1)
        return np.where(w > 0, out, 0.0)

    out = lp * side(vp)
    if lm != 0:
        out = out - lm * side(vm)
    return out


def potential_slope(v, spec: ProblemSpec, eps: float = 0.0):
    if spec.gamma == 0:
        raise UnsupportedPotential("F_0 is discontinuous; reach gamma = 0 by continuation")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    out = smoothed_slope(np.asarray(v, dtype=float), spec.gamma, spec.lambda_plus, spec.lambda_minus, eps)
    return out if out.ndim else float(out)


def threshold_q(p: float, n: int, gamma: float) -> float:
    """Integrability above which the source no longer limits the exponent."""
    if gamma >= 1:
        return math.inf
    # n (p - gamma) / (p (1 - gamma)), written so that gamma = 0 gives n exactly
    return n * (1.0 + gamma * (p - 1) / (p * (1 - gamma)))


def predicted_alpha(inp: ExponentInputs) -> tuple[float, str]:
    """Sharp C^{1,alpha} exponent and which term attains it.

    Regimes: 'alpha_p' (any exponent below alpha_p), 'singular' (gamma/(p-gamma)),
    'source' ((q-n)/((p-1)q)).
    """
    p, g, q, n = inp.p, inp.gamma, inp.q, inp.n
    if not q > n:
        raise BorderlineRegime(
            f"q = {q} <= n = {n}: borderline integrability, expect a Log-Lipschitz modulus instead"
        )
    if not 0 < g <= 1:
        raise ValueError("predicted_alpha needs 0 < gamma <= 1")
    singular = g / (p - g)
    source = 1.0 / (p - 1) if math.isinf(q) else (q - n) / ((p - 1) * q)
    closed = min(singular, source)
    if closed >= inp.alpha_p:
        return inp.alpha_p, "alpha_p"
    return closed, "singular" if singular <= source else "source"


def profile_constant(p: float, gamma: float, lambda_plus: float) -> float:
    """c making c (x+)^(p/(p-gamma)) an exact one-phase solution with f = 0."""
    if gamma == 0:
        raise UnsupportedPotential("gamma = 0 has no Alt-Phillips profile; use jet_slope")
    if not (0 < gamma <= 1) or lambda_plus <= 0:
        raise ValueError("need 0 < gamma <= 1 and lambda_plus > 0")
    return (lambda_plus * (p - gamma) ** p / (p**p * (p - 1))) ** (1.0 / (p - gamma))


def jet_slope(p: float, lambda_plus: float, lambda_minus: float, m_minus: float = 0.0) -> float:
    """Positive-phase slope balancing the flux across a gamma = 0 free boundary."""
    if not (0 <= lambda_minus < lambda_plus):
        raise InvalidSpec("need 0 <= lambda_minus < lambda_plus")
    if m_minus < 0:
        raise ValueError("m_minus must be nonnegative")
    return (m_minus**p + (lambda_plus - lambda_minus) / (p - 1)) ** (1.0 / p)
