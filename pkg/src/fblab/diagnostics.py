"""
Regularity measurements on discrete solutions: free boundary extraction,
growth and nondegeneracy constants, flux balance, oscillation decay and
moduli of continuity.

All fits are least-squares lines in log-log coordinates over dyadic radii.
Radii below 4h or above half the distance to the boundary are discarded and
at least four scales must remain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from fblab.mesh import DiscreteFunction, Grid, ball_nodes, cell_gradients, element_ball
from fblab.model import ProblemSpec

MIN_SCALES = 4


class InsufficientScales(ValueError):
    pass


class NoPositivePhase(ValueError):
    pass


def _label(x: float) -> str:
    return "+" if x > 0 else ("-" if x < 0 else "0")


@dataclass
class FreeBoundary:
    """Interface points on sign-change edges, with the phase at each edge end."""

    points: np.ndarray  # (k, dim)
    edges: np.ndarray  # (k, 2) node ids
    labels: list[tuple[str, str]]
    plus: np.ndarray  # edge lies on the boundary of {u > 0}
    minus: np.ndarray  # edge lies on the boundary of {u < 0}

    def __len__(self):
        return len(self.points)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0

    def positive_points(self) -> np.ndarray:
        return self.points[self.plus]

    def negative_points(self) -> np.ndarray:
        return self.points[self.minus]

    def unique_points(self, tol: float = 1e-12) -> np.ndarray:
        if self.empty:
            return self.points
        P = np.unique(np.round(self.points / tol) * tol, axis=0)
        return P

    def to_dict(self) -> dict:
        return {
            "n_points": len(self),
            "points": self.points.tolist(),
            "labels": [list(x) for x in self.labels],
        }


def free_boundary(u: DiscreteFunction, zero_tol: float = 0.0) -> FreeBoundary:
    """Crossings of 0 on grid edges, by linear interpolation along the edge.

    An edge is on the boundary of {u > 0} when one end is > 0 and the other
    <= 0, and on the boundary of {u < 0} when one end is < 0 and the other
    >= 0. Values with |u| <= zero_tol count as 0.
    """
    grid = u.grid
    v = np.where(np.abs(u.values) <= zero_tol, 0.0, u.values)
    ed = grid.edges
    a, b = v[ed[:, 0]], v[ed[:, 1]]
    plus = ((a > 0) & (b <= 0)) | ((b > 0) & (a <= 0))
    minus = ((a < 0) & (b >= 0)) | ((b < 0) & (a >= 0))
    keep = plus | minus
    ed, a, b = ed[keep], a[keep], b[keep]
    t = a / (a - b)  # a != b on every kept edge
    X = grid.coords
    pts = X[ed[:, 0]] + t[:, None] * (X[ed[:, 1]] - X[ed[:, 0]])
    labels = [(_label(x), _label(y)) for x, y in zip(a, b)]
    return FreeBoundary(pts, ed, labels, plus[keep], minus[keep])


@dataclass
class FitResult:
    exponent: float
    constant: float
    r_squared: float
    radii: tuple[float, ...]
    values: tuple[float, ...] = ()
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "constant": self.constant,
            "r_squared": self.r_squared,
            "radii": list(self.radii),
            "values": list(self.values),
            **self.extras,
        }


def loglog_fit(radii, values) -> tuple[float, float, float]:
    """Slope, exp(intercept) and r^2 of log(values) against log(radii)."""
    x = np.log(np.asarray(radii, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(slope), float(math.exp(icpt)), max(0.0, min(1.0, r2))


def dyadic_radii(grid: Grid, center, r_max: float | None = None) -> list[float]:
    """4h, 8h, ... up to half the distance from `center` to the boundary."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    R = grid.domain.distance_to_boundary(c)
    top = R / 2 if r_max is None else min(r_max, R / 2)
    r = 4 * grid.hmin
    out = []
    while r <= top * (1 + 1e-12):
        out.append(r)
        r *= 2
    return out


def _usable_radii(grid: Grid, center, radii) -> list[float]:
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if radii is None:
        radii = dyadic_radii(grid, c)
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    R = grid.domain.distance_to_boundary(c)
    lo = 4 * grid.hmin * (1 - 1e-12)
    kept = [r for r in radii if lo <= r <= R / 2 * (1 + 1e-12)]
    if len(kept) < MIN_SCALES:
        raise InsufficientScales(f"{len(kept)} usable radii in [4h, R/2]; need {MIN_SCALES}")
    return kept


def _pick_center(grid: Grid, fb: FreeBoundary, positive: bool = True) -> np.ndarray:
    """The free boundary point farthest from the domain boundary."""
    pts = fb.positive_points() if positive else fb.points
    if len(pts) == 0:
        raise NoPositivePhase("free boundary has no point on the boundary of {u > 0}")
    d = [grid.domain.distance_to_boundary(p) for p in pts]
    return pts[int(np.argmax(d))]


def _sup_plus(u: DiscreteFunction, center, r: float) -> float:
    idx = ball_nodes(u.grid, center, r)
    return float(np.max(np.maximum(u.values[idx], 0.0))) if idx.size else 0.0


def growth_fit(u: DiscreteFunction, fb: FreeBoundary, radii=None, center=None) -> FitResult:
    """Fit sup_{B_r(X0)} u+ ~ C r^beta at a point X0 of the boundary of {u > 0}."""
    if fb.empty:
        raise NoPositivePhase("empty free boundary")
    grid = u.grid
    c = _pick_center(grid, fb) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    radii = _usable_radii(grid, c, radii)
    vals = [_sup_plus(u, c, r) for r in radii]
    if min(vals) <= 0:
        raise InsufficientScales("u+ vanishes on some ball; no growth to fit")
    beta, C, r2 = loglog_fit(radii, vals)
    return FitResult(beta, C, r2, tuple(radii), tuple(vals), {"center": c.tolist()})


@dataclass
class NondegeneracyResult:
    c_growth: float
    c_sup: float
    radii: tuple[float, ...]
    growth_by_radius: tuple[float, ...]
    sup_by_radius: tuple[float, ...]

    def spread(self, which: str = "growth") -> float:
        """(max - min) / max of the per-radius constants."""
        v = np.asarray(self.growth_by_radius if which == "growth" else self.sup_by_radius)
        v = v[np.isfinite(v)]
        return float((v.max() - v.min()) / v.max()) if v.size and v.max() > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "c_growth": self.c_growth,
            "c_sup": self.c_sup,
            "radii": list(self.radii),
            "growth_by_radius": list(self.growth_by_radius),
            "sup_by_radius": list(self.sup_by_radius),
        }


def nondegeneracy_check(u: DiscreteFunction, fb: FreeBoundary, radii=None) -> NondegeneracyResult:
    """Linear-growth constants away from the boundary of {u > 0}.

    c_growth: min of u(X)/dist(X, F+) over positive nodes, computed per distance
    band [r, 2r); c_sup: min over radii and F+ points of sup_{B_r} u+ / r.
    """
    grid = u.grid
    v = u.values
    Fp = fb.positive_points()
    pos = np.flatnonzero(v > 0)
    if pos.size == 0 or len(Fp) == 0:
        raise NoPositivePhase("u has no positive phase")
    c0 = _pick_center(grid, fb)
    radii = _usable_radii(grid, c0, radii)
    dist, _ = cKDTree(Fp).query(grid.coords[pos])
    ratio = v[pos] / np.where(dist > 0, dist, np.nan)
    growth = []
    for r in radii:
        band = (dist >= r * (1 - 1e-12)) & (dist < 2 * r * (1 - 1e-12))
        growth.append(float(np.nanmin(ratio[band])) if band.any() else math.nan)
    # F+ points far enough from the domain boundary for the largest ball
    far = np.array([grid.domain.distance_to_boundary(p) >= 2 * radii[-1] * (1 - 1e-12) for p in Fp])
    centers = Fp[far] if far.any() else c0[None, :]
    sups = [min(_sup_plus(u, x, r) / r for x in centers) for r in radii]
    g = np.asarray(growth)
    c_growth = float(np.nanmin(g)) if np.isfinite(g).any() else math.nan
    return NondegeneracyResult(c_growth, float(min(sups)), tuple(radii), tuple(growth), tuple(sups))


def flux_balance(m_plus: float, m_minus: float, p: float, lambda_plus: float, lambda_minus: float) -> float:
    """|grad u+|^p - |grad u-|^p - (lambda_+ - lambda_-)/(p - 1)."""
    return m_plus**p - m_minus**p - (lambda_plus - lambda_minus) / (p - 1)


@dataclass
class FluxPoint:
    point: tuple[float, ...]
    m_plus: float
    m_minus: float
    residual: float
    skipped: bool = False
    reason: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__, point=list(self.point))


def _one_sided_1d(u: DiscreteFunction, x0: float) -> tuple[float, float] | None:
    """Slopes (positive side, negative side) from the cells next to the crossing."""
    grid = u.grid
    v = u.values
    h = grid.h[0]
    lo = grid.domain.bounds[0][0]
    t = (x0 - lo) / h
    k = int(round(t))
    n = grid.N
    if abs(t - k) < 1e-9:  # crossing at node k
        if k <= 0 or k >= n:
            return None
        left, right = (k - 1, k), (k, k + 1)
    else:
        i = int(math.floor(t))
        if i - 1 < 0 or i + 2 > n:
            return None
        left, right = (i - 1, i), (i + 1, i + 2)
    sl = abs(v[left[1]] - v[left[0]]) / h
    sr = abs(v[right[1]] - v[right[0]]) / h
    # the positive phase is on the side whose far node is larger
    if v[right[1]] >= v[left[0]]:
        return sr, sl
    return sl, sr


def _one_sided_nd(u: DiscreteFunction, fb: FreeBoundary, j: int) -> tuple[float, float] | None:
    """One-sided normal derivatives at interface point j, sampled at distance h..2h.

    The normal is the average gradient of the triangles sharing the edge.
    """
    grid = u.grid
    a, b = fb.edges[j]
    E = grid.elements
    tri = np.flatnonzero(np.any(E == a, axis=1) & np.any(E == b, axis=1))
    g = cell_gradients(u)[tri].mean(axis=0)
    norm = float(np.linalg.norm(g))
    if norm == 0:
        return None
    n = g / norm
    h = grid.hmin
    x0 = fb.points[j]
    S = np.array([x0 + h * n, x0 + 2 * h * n, x0 - h * n, x0 - 2 * h * n])
    if not all(grid.domain.contains(s) for s in S):
        return None
    w = u.at_points(S)
    return abs(w[1] - w[0]) / h, abs(w[3] - w[2]) / h


def flux_residual(u: DiscreteFunction, fb: FreeBoundary, spec: ProblemSpec) -> list[FluxPoint]:
    """Flux-balance residual at each interface point (1-D: each distinct crossing)."""
    grid = u.grid
    out = []
    if grid.dim == 1:
        for x0 in np.unique(np.round(fb.points[:, 0], 12)):
            s = _one_sided_1d(u, float(x0))
            if s is None:
                out.append(FluxPoint((float(x0),), math.nan, math.nan, math.nan, True, "next to the domain boundary"))
                continue
            mp, mm = s
            out.append(FluxPoint((float(x0),), mp, mm, flux_balance(mp, mm, spec.p, spec.lambda_plus, spec.lambda_minus)))
        return out
    for j in range(len(fb)):
        pt = tuple(float(c) for c in fb.points[j])
        s = _one_sided_nd(u, fb, j)
        if s is None:
            out.append(FluxPoint(pt, math.nan, math.nan, math.nan, True, "normal samples leave the domain"))
            continue
        mp, mm = s
        out.append(FluxPoint(pt, mp, mm, flux_balance(mp, mm, spec.p, spec.lambda_plus, spec.lambda_minus)))
    return out


def oscillation_decay_fit(u: DiscreteFunction, center, radii=None, p: float = 2.0, bmo_tol: float = 0.05) -> FitResult:
    """Fit the ball mean of |grad u - (grad u)_r|^p against r.

    The log-log slope is p * alpha; the returned exponent is alpha. An affine
    u has no oscillation: the fit is flagged degenerate and the exponent is
    +inf.
    """
    grid = u.grid
    c = np.atleast_1d(np.asarray(center, dtype=float))
    radii = _usable_radii(grid, c, radii)
    G = cell_gradients(u)
    gscale = float(np.max(np.abs(G))) if G.size else 0.0
    vals = []
    for r in radii:
        idx = element_ball(grid, c, r)
        g = G[idx]
        dev = g - g.mean(axis=0)
        vals.append(float(np.mean(np.einsum("ij,ij->i", dev, dev) ** (p / 2))))
    vals_a = np.asarray(vals)
    floor = (1e-12 * max(gscale, 1e-300)) ** p
    if np.any(vals_a <= floor):
        return FitResult(math.inf, 0.0, 0.0, tuple(radii), tuple(vals), {"degenerate": True, "bmo": False, "p_alpha": math.inf})
    slope, C, r2 = loglog_fit(radii, vals_a)
    alpha = slope / p
    return FitResult(alpha, C, r2, tuple(radii), tuple(vals), {"degenerate": False, "bmo": abs(alpha) < bmo_tol, "p_alpha": slope})


MODULI = {
    "lipschitz": lambda t: t,
    "log-lipschitz": lambda t: t * (1 + np.abs(np.log(t))),
}


def _pair_increments(u: DiscreteFunction, max_offset: int | None = None):
    """Yield (distance, |u(X)-u(Y)|) arrays over lattice offsets."""
    grid = u.grid
    if grid.dim == 1:
        v = u.values
        h = grid.h[0]
        for k in range(1, (grid.N if max_offset is None else min(max_offset, grid.N)) + 1):
            yield np.full(v.size - k, k * h), np.abs(v[k:] - v[:-k])
        return
    A = u.as_array()
    hx, hy = grid.h
    K = max_offset if max_offset is not None else min(grid.N, 32)
    for i in range(0, K + 1):
        for j in range(-K, K + 1):
            if (i, j) <= (0, 0) and not (i == 0 and j > 0):
                continue
            if i > grid.N or abs(j) > grid.N:
                continue
            a = A[i:, max(j, 0): A.shape[1] + min(j, 0)]
            b = A[: A.shape[0] - i, max(-j, 0): A.shape[1] - max(j, 0)]
            d = math.hypot(i * hx, j * hy)
            diff = np.abs(a - b).ravel()
            yield np.full(diff.size, d), diff


def modulus_of_continuity(u: DiscreteFunction, form: str = "lipschitz", alpha: float | None = None, max_offset: int | None = None) -> FitResult:
    """Smallest K with |u(X) - u(Y)| <= K omega(|X - Y|) over sampled node pairs.

    form: "holder" (omega = t^alpha, alpha fitted unless given), "lipschitz"
    or "log-lipschitz" (omega = t (1 + |log t|)). In 1-D all node pairs are
    used; in 2-D all lattice offsets up to `max_offset` (default 32) cells.
    The fitted exponent/r^2 are those of the per-scale maximal increment
    against t; extras carry the per-scale constants and the maximal
    one-sided discrete slope.
    """
    if form not in ("holder", "lipschitz", "log-lipschitz"):
        raise ValueError(f"unknown modulus form {form!r}")
    grid = u.grid
    G = cell_gradients(u)
    max_slope = float(np.max(np.linalg.norm(G, axis=1))) if G.size else 0.0
    dmin = grid.hmin
    # dyadic scale bands [t, 2t) from one cell upward
    nb = max(1, int(math.floor(math.log2(grid.domain.diameter / dmin))) + 1)
    band_max = np.zeros(nb)
    pairs = []
    for d, inc in _pair_increments(u, max_offset):
        b = min(nb - 1, int(math.floor(math.log2(d[0] / dmin * (1 + 1e-12)))))
        if inc.size:
            band_max[b] = max(band_max[b], float(inc.max()))
            pairs.append((d[0], float(inc.max())))
    dist = np.array([p[0] for p in pairs])
    incm = np.array([p[1] for p in pairs])
    scales = dmin * 2.0 ** np.arange(nb)
    ok = band_max > 0
    if ok.sum() >= 2:
        expo, _, r2 = loglog_fit(scales[ok], band_max[ok])
    else:
        expo, r2 = math.nan, 0.0
    if form == "holder":
        a = expo if alpha is None else alpha
        omega = lambda t: t**a  # noqa: E731
    else:
        omega = MODULI[form]
    ratio = incm / omega(dist)
    K = float(ratio.max()) if ratio.size else 0.0
    if form == "lipschitz" and grid.dim == 1:
        # for a piecewise-linear function the all-pairs maximum is attained by neighbors
        K = max_slope
    per_scale = []
    for k in range(nb):
        sel = (dist >= scales[k] * (1 - 1e-12)) & (dist < 2 * scales[k] * (1 - 1e-12))
        per_scale.append(float(ratio[sel].max()) if sel.any() else math.nan)
    return FitResult(
        expo,
        K,
        r2,
        tuple(scales.tolist()),
        tuple(band_max.tolist()),
        {"form": form, "max_slope": max_slope, "per_scale_constant": per_scale},
    )


def lipschitz_estimate(u: DiscreteFunction) -> float:
    return modulus_of_continuity(u, "lipschitz").constant


def monotonicity_ratio(x1: np.ndarray, x2: np.ndarray, p: float) -> np.ndarray:
    """<|x1|^{p-2} x1 - |x2|^{p-2} x2, x1 - x2> / |x1 - x2|^p, row-wise."""
    n1 = np.linalg.norm(x1, axis=-1, keepdims=True)
    n2 = np.linalg.norm(x2, axis=-1, keepdims=True)
    a = n1 ** (p - 2) * x1 - n2 ** (p - 2) * x2
    d = x1 - x2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(a * d, axis=-1) / np.linalg.norm(d, axis=-1) ** p  # nan for x1 = x2


def vector_monotonicity_probe(p: float, trials: int = 100_000, dim: int = 3, seed: int = 0) -> float:
    """Minimum monotonicity ratio over random pairs and antipodal pairs."""
    if p < 2:
        raise ValueError("the probe is defined for p >= 2")
    rng = np.random.default_rng(seed)
    n_anti = max(1, trials // 10)
    n_rand = max(1, trials - n_anti)
    x1 = rng.standard_normal((n_rand, dim)) * np.exp(rng.uniform(-3, 3, (n_rand, 1)))
    x2 = rng.standard_normal((n_rand, dim)) * np.exp(rng.uniform(-3, 3, (n_rand, 1)))
    e = rng.standard_normal((n_anti, dim))
    e *= np.exp(rng.uniform(-3, 3, (n_anti, 1))) / np.linalg.norm(e, axis=1, keepdims=True)
    r = np.concatenate([monotonicity_ratio(x1, x2, p), monotonicity_ratio(e, -e, p)])
    r = r[np.isfinite(r)]
    return float(r.min())


@dataclass
class RegularityReport:
    free_boundary: dict
    growth: dict | None
    nondegeneracy: dict | None
    flux: list[dict]
    oscillation: dict | None
    lipschitz: dict
    log_lipschitz: dict
    errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def regularity_report(u: DiscreteFunction, spec: ProblemSpec, zero_tol: float = 0.0) -> RegularityReport:
    """Every diagnostic that applies; inapplicable ones are recorded under errors."""
    fb = free_boundary(u, zero_tol)
    errors = {}
    growth = nondeg = osc = None
    try:
        growth = growth_fit(u, fb).to_dict()
    except (InsufficientScales, NoPositivePhase) as exc:
        errors["growth"] = str(exc)
    try:
        nondeg = nondegeneracy_check(u, fb).to_dict()
    except (InsufficientScales, NoPositivePhase) as exc:
        errors["nondegeneracy"] = str(exc)
    try:
        center = _pick_center(u.grid, fb, positive=False)
        osc = oscillation_decay_fit(u, center, p=spec.p).to_dict()
    except (InsufficientScales, NoPositivePhase) as exc:
        errors["oscillation"] = str(exc)
    flux = [f.to_dict() for f in flux_residual(u, fb, spec)] if not fb.empty else []
    if fb.empty:
        errors["flux"] = "no interface"
    return RegularityReport(
        fb.to_dict(),
        growth,
        nondeg,
        flux,
        osc,
        modulus_of_continuity(u, "lipschitz").to_dict(),
        modulus_of_continuity(u, "log-lipschitz").to_dict(),
        errors,
    )
