"""
Minimization of the discrete J_gamma and the gamma -> 0 continuation.

For gamma > 0 the potential is smoothed with a geometric sequence of eps
values. Each eps stage runs a variable-metric descent: the direction solves
K d = -g with K the (floored) Hessian of the Dirichlet term plus the
curvature of a quadratic majorant of the smoothed potential. Steps are
accepted by backtracking; an accepted step must satisfy the Armijo test on
the smoothed energy and must not increase the true (unsmoothed) energy, so
the recorded energy trace is nonincreasing.

The gamma = 0 stage cannot use a gradient of the potential (it is piecewise
constant in u). It alternates a descent on the Dirichlet + source part with
the phase of every element near the interface frozen by linear constraints
on its midpoint value, and a local search over single-node sign flips that
is accepted only when the exact J_0 decreases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from fblab.energy import DiscreteEnergy, EnergyBreakdown, pde_residual, p_harmonic_replacement
from fblab.mesh import DiscreteFunction, Grid, GridMismatch
from fblab.model import InvalidSpec, ProblemSpec, UnsupportedPotential

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (0.5, 0.25, 0.1, 0.05, 0.02, 0.0)


class NumericalFailure(RuntimeError):
    def __init__(self, message, report: SolveReport | None = None):
        super().__init__(message)
        self.report = report


class InvalidLevel(ValueError):
    pass


@dataclass(frozen=True)
class SolverParams:
    eps0: float | None = None  # None: 1e-2 * oscillation of the boundary data
    eps_shrink: float = 10.0
    eps_min: float = 1e-8
    step_init: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-12
    tol_energy: float = 1e-13
    tol_grad: float = 1e-9
    stall_tol: float = 1e-8  # relative decrease counted as a stalled iteration
    max_iter: int = 400
    seed: int = 0
    direction: str = "metric"  # or "diagonal"
    zero_set_search: bool = True

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise InvalidSpec("shrink factor must lie in (0, 1)")
        if not 0 < self.armijo < 1:
            raise InvalidSpec("sufficient-decrease constant must lie in (0, 1)")
        if min(self.tol_energy, self.tol_grad, self.stall_tol, self.step_init, self.eps_shrink - 1) <= 0:
            raise InvalidSpec("tolerances and step sizes must be positive, eps_shrink > 1")
        if self.eps_min < 0 or (self.eps0 is not None and self.eps0 < self.eps_min):
            raise InvalidSpec("need eps0 >= eps_min >= 0")
        if self.max_iter < 1:
            raise InvalidSpec("max_iter must be positive")
        if self.direction not in ("metric", "diagonal"):
            raise InvalidSpec(f"unknown descent direction {self.direction!r}")

    def eps_schedule(self, oscillation: float) -> list[float]:
        eps = self.eps0 if self.eps0 is not None else 1e-2 * (oscillation if oscillation > 0 else 1.0)
        out = []
        while eps > self.eps_min * (1 + 1e-9):
            out.append(eps)
            eps /= self.eps_shrink
        out.append(self.eps_min)
        return out


@dataclass(frozen=True)
class ContinuationSchedule:
    gammas: tuple[float, ...] = DEFAULT_SCHEDULE
    params: tuple[SolverParams, ...] | None = None

    def __post_init__(self):
        g = tuple(float(x) for x in self.gammas)
        object.__setattr__(self, "gammas", g)
        if not g or g[-1] != 0:
            raise InvalidSpec("continuation schedule must end at gamma = 0")
        if any(b >= a for a, b in zip(g, g[1:])):
            raise InvalidSpec("continuation schedule must be strictly decreasing")
        if not all(0 <= x <= 1 for x in g):
            raise InvalidSpec("schedule gammas must lie in [0, 1]")
        if self.params is not None and len(self.params) != len(g):
            raise InvalidSpec("one SolverParams per stage")

    def stage_params(self, k: int, default: SolverParams) -> SolverParams:
        return default if self.params is None else self.params[k]


@dataclass
class TraceRow:
    iteration: int
    stage: int
    epsilon: float
    energy: float
    grad_norm: float
    gamma: float = math.nan


@dataclass
class SolveReport:
    u: DiscreteFunction
    gamma: float
    energy: EnergyBreakdown
    trace: list[TraceRow]
    iterations: list[int]
    residual: dict
    sup_norm: float
    w1p_norm: float
    converged: bool
    stage_gammas: list[float] = field(default_factory=list)
    stage_energies_j0: list[float] = field(default_factory=list)
    stage_energies_own: list[float] = field(default_factory=list)
    stage_start_energies_own: list[float] = field(default_factory=list)
    w1p_gaps: list[float] = field(default_factory=list)
    stage_solutions: list[DiscreteFunction] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def trace_monotone(self) -> bool:
        """True-energy trace nonincreasing within every (gamma) stage."""
        for a, b in zip(self.trace, self.trace[1:]):
            if a.gamma == b.gamma and b.energy > a.energy:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "energy": self.energy.to_dict(),
            "iterations": list(self.iterations),
            "residual": self.residual,
            "sup_norm": self.sup_norm,
            "w1p_norm": self.w1p_norm,
            "converged": self.converged,
            "stage_gammas": list(self.stage_gammas),
            "stage_energies_j0": list(self.stage_energies_j0),
            "stage_energies_own": list(self.stage_energies_own),
            "stage_start_energies_own": list(self.stage_start_energies_own),
            "w1p_gaps": list(self.w1p_gaps),
            "trace_monotone": self.trace_monotone(),
            "notes": list(self.notes),
        }


def w1p_norm(u: DiscreteFunction, p: float) -> float:
    g = u.grid
    grads = (g.gradient_operator @ u.values).reshape(g.n_elements, g.dim)
    mid = g.midpoint_operator @ u.values
    val = np.sum(np.abs(mid) ** p) + np.sum(np.einsum("ij,ij->i", grads, grads) ** (p / 2))
    return float((val * g.element_measure) ** (1 / p))


def boundary_function(spec: ProblemSpec, grid: Grid) -> np.ndarray:
    v = np.zeros(grid.n_nodes)
    v[grid.boundary_mask] = spec.boundary.trace(grid)
    return v


def default_init(spec: ProblemSpec, grid: Grid) -> DiscreteFunction:
    """Discrete p-harmonic extension of the boundary data (affine in 1-D)."""
    v = boundary_function(spec, grid)
    if grid.dim == 1:
        a, b = v[0], v[-1]
        return DiscreteFunction(grid, np.linspace(a, b, grid.N + 1))
    u = DiscreteFunction(grid, v)
    return p_harmonic_replacement(u, np.arange(grid.n_nodes), spec.p)


def _check_init(spec: ProblemSpec, grid: Grid, init: DiscreteFunction | None) -> np.ndarray:
    if init is None:
        return default_init(spec, grid).values.copy()
    if init.grid != grid:
        raise GridMismatch("initial guess lives on a different grid")
    v = init.values.copy()
    phi = boundary_function(spec, grid)
    v[grid.boundary_mask] = phi[grid.boundary_mask]
    return v


def _finish(E: DiscreteEnergy, spec: ProblemSpec, v, gamma, trace, iters, converged, notes) -> SolveReport:
    grid = E.grid
    u = DiscreteFunction(grid, v)
    sp_ = spec.with_gamma(gamma)
    return SolveReport(
        u=u,
        gamma=gamma,
        energy=E.breakdown(v, gamma),
        trace=trace,
        iterations=iters,
        residual=pde_residual(u, sp_).summary(),
        sup_norm=float(np.max(np.abs(v))),
        w1p_norm=w1p_norm(u, spec.p),
        converged=converged,
        notes=notes,
    )


def _direction(E: DiscreteEnergy, v, g, gamma, eps, params: SolverParams) -> np.ndarray:
    free = E.free
    if params.direction == "diagonal":
        # scale by the number of elements per node
        counts = np.bincount(E.grid.elements.ravel(), minlength=E.grid.n_nodes)[free]
        d = np.zeros_like(v)
        d[free] = -g[free] / counts
        return d
    K = E.metric(v, gamma, eps)[free][:, free].tocsc()
    d = np.zeros_like(v)
    d[free] = spla.spsolve(K, -g[free])
    return d


def _zero_snap(E: DiscreteEnergy, v, gamma, threshold) -> np.ndarray | None:
    """Set tiny interior values to exactly 0 if that lowers the true energy."""
    small = (np.abs(v) <= threshold) & (v != 0) & ~E.boundary
    if not small.any():
        return None
    w = v.copy()
    w[small] = 0.0
    if E.value(w, gamma) < E.value(v, gamma):
        return w
    return None


def minimize(
    spec: ProblemSpec,
    grid: Grid,
    params: SolverParams | None = None,
    init: DiscreteFunction | None = None,
    stage_offset: int = 0,
) -> SolveReport:
    """Boundary-pinned descent on the discrete J_gamma, gamma > 0."""
    if spec.gamma <= 0:
        raise UnsupportedPotential("minimize needs gamma > 0; use continuation for gamma = 0")
    if grid.domain != spec.domain:
        raise GridMismatch("grid domain differs from the problem domain")
    params = params or SolverParams()
    E = DiscreteEnergy(grid, spec)
    gamma = spec.gamma
    v = _check_init(spec, grid, init)
    trace_ = spec.boundary.trace(grid)
    osc = float(np.ptp(trace_)) if trace_.size else 0.0
    schedule = params.eps_schedule(osc)

    e_true = E.value(v, gamma)
    if not math.isfinite(e_true):
        raise NumericalFailure("initial energy is not finite")
    trace = [TraceRow(0, stage_offset, schedule[0], e_true, math.nan, gamma)]
    iters: list[int] = []
    it_total = 0
    converged = False
    notes: list[str] = []

    for k, eps in enumerate(schedule):
        stage = stage_offset + k
        stage_done = False
        stalled = 0
        n_it = 0
        for n_it in range(1, params.max_iter + 1):
            g = E.gradient(v, gamma, eps)
            d = _direction(E, v, g, gamma, eps, params)
            slope = float(g @ d)
            gnorm = math.sqrt(max(-slope, 0.0))
            scale = max(abs(e_true), 1.0)
            if slope >= 0 or gnorm <= params.tol_grad * math.sqrt(scale):
                stage_done = True
                break
            e_eps = E.value(v, gamma, eps)
            t = params.step_init
            accepted = False
            while t >= params.min_step:
                w = v + t * d
                w_eps = E.value(w, gamma, eps)
                w_true = E.value(w, gamma)
                if not (math.isfinite(w_eps) and math.isfinite(w_true)):
                    t *= params.shrink
                    continue
                if w_eps <= e_eps + params.armijo * t * slope and w_true <= e_true:
                    accepted = True
                    break
                t *= params.shrink
            if not accepted:
                # no representable decrease in the direction of this stage
                stage_done = gnorm <= 1e3 * params.tol_grad * math.sqrt(scale) or -slope <= 1e-10 * scale
                break
            dec = e_true - w_true
            v, e_true = w, w_true
            it_total += 1
            trace.append(TraceRow(it_total, stage, eps, e_true, gnorm, gamma))
            if dec <= params.tol_energy * scale and -slope <= 10 * params.tol_energy * scale:
                stage_done = True
                break
            # the true energy has stopped moving; the next eps stage or the zero-set search takes over
            stalled = stalled + 1 if dec <= params.stall_tol * scale else 0
            if stalled >= 5:
                stage_done = True
                break
        iters.append(n_it)
        if not math.isfinite(e_true):
            raise NumericalFailure("energy became non-finite", _finish(E, spec, v, gamma, trace, iters, False, notes))
        converged = stage_done
        log.debug("gamma=%g eps=%.1e iterations=%d energy=%.12g", gamma, eps, n_it, e_true)

    snapped = _zero_snap(E, v, gamma, threshold=max(100 * params.eps_min, 1e-12) * max(osc, 1.0))
    if snapped is not None:
        v = snapped
        e_true = E.value(v, gamma)
        it_total += 1
        trace.append(TraceRow(it_total, stage_offset + len(schedule) - 1, schedule[-1], e_true, math.nan, gamma))
        notes.append("zero-set snap accepted")
    if params.zero_set_search:
        v, moves, converged = _zero_set_search(E, v, gamma, params, trace, stage_offset + len(schedule) - 1)
        if moves:
            notes.append(f"zero-set search: {moves} accepted moves")
    if not converged:
        notes.append("iteration cap or line-search stall before tolerances were met")
    return _finish(E, spec, v, gamma, trace, iters, converged, notes)


def _node_adjacency(grid: Grid) -> sp.csr_matrix:
    E = grid.elements
    k = E.shape[1]
    rows = np.repeat(E, k, axis=1).ravel()
    cols = np.tile(E, (1, k)).ravel()
    A = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(grid.n_nodes, grid.n_nodes))
    A.setdiag(0)
    A.eliminate_zeros()
    return A


def _restricted_descent(E: DiscreteEnergy, v, gamma, zero, params: SolverParams):
    """Descent on the true J_gamma with the nodes in `zero` pinned at 0 and
    every other free node kept in its phase.

    Away from a vanishing midpoint the true energy is differentiable, so this
    runs the metric descent at eps = 0 (the metric keeps eps_min as a floor).
    """
    v = v.copy()
    v[zero] = 0.0
    free = np.flatnonzero(~E.boundary & ~zero)
    e = E.value(v, gamma)
    if free.size == 0:
        return v, e, True
    floor = max(params.eps_min, 1e-12)
    ok = False
    for _ in range(params.max_iter):
        g = E.gradient(v, gamma, 0.0)[free]
        K = E.metric(v, gamma, floor)[free][:, free].tocsc()
        d = spla.spsolve(K, -g)
        with np.errstate(over="ignore", invalid="ignore"):
            slope = float(g @ d)
        if not math.isfinite(slope):
            # near-singular metric on the pinned set: no usable direction
            break
        scale = max(abs(e), 1.0)
        if not slope < -params.tol_energy * scale:
            ok = True
            break
        # keep every free node in its phase; crossing zero is a zero-set move
        vf = v[free]
        cross = vf * d < 0
        t_max = float(np.min(-vf[cross] / d[cross])) if cross.any() else math.inf
        t = min(params.step_init, 0.5 * t_max)
        while t >= params.min_step:
            w = v.copy()
            w[free] += t * d
            we = E.value(w, gamma)
            if we <= e + params.armijo * t * slope:
                break
            t *= params.shrink
        else:
            break
        dec = e - we
        v, e = w, we
        if dec <= params.tol_energy * scale:
            ok = True
            break
    return v, e, ok


def _zero_set_search(E: DiscreteEnergy, v, gamma, params: SolverParams, trace, stage, max_moves=100_000):
    """Local search over the zero set, accepted only on a strict true-energy decrease.

    A move grows the zero set by `layers` rings of positive (or negative)
    nodes, or releases `layers` rings of zero nodes next to one phase; the
    remaining values are re-minimized with the zero set pinned. Accepted moves
    double the ring count, a failed round falls back to a single ring.
    """
    A = _node_adjacency(E.grid)
    interior = ~E.boundary
    zero = interior & (v == 0)
    v, e, ok = _restricted_descent(E, v, gamma, zero, params)
    tol = 1e-14
    moves = 0
    layers = 1
    it0 = trace[-1].iteration + 1 if trace else 0
    trace.append(TraceRow(it0, stage, 0.0, e, math.nan, gamma))

    def ring(mask, target):
        return (A @ mask.astype(float) > 0) & target & ~mask

    def candidates(layers):
        # zero every node below a threshold (clears small wrong-sign tails)
        vmax = float(np.max(np.abs(v))) if v.size else 0.0
        for tau in vmax * 10.0 ** np.arange(-8, -1):
            z = zero | (interior & (np.abs(v) < tau))
            if z.sum() > zero.sum():
                yield z, None
        for phase in (1.0, -1.0, 0.0):
            # grow the zero set into one phase (phase 0: into both)
            z = zero.copy()
            seed = z.any()
            target = interior & ((phase * v > 0) if phase else (v != 0))
            if not seed:
                side = target
                if not side.any():
                    continue
                idx = np.flatnonzero(side)
                z[idx[np.argmin(np.abs(v[idx]))]] = True
            for _ in range(layers - (0 if seed else 1)):
                r = ring(z, target)
                if not r.any():
                    break
                z |= r
            if z.sum() > zero.sum():
                yield z, None
            if not phase:
                continue
            # release zero nodes next to the given phase
            z = zero.copy()
            w0 = v.copy()
            for _ in range(layers):
                side = ~z & (phase * w0 > 0)
                r = ring(side, z & interior)
                if not r.any():
                    break
                nb = A[r] @ np.where(side, w0, 0.0)
                cnt = A[r] @ side.astype(float)
                w0[r] = 0.5 * nb / np.maximum(cnt, 1.0)
                z &= ~r
            if z.sum() < zero.sum():
                yield z, w0

    while moves < max_moves:
        accepted = False
        for z, w0 in candidates(layers):
            w, we, wok = _restricted_descent(E, v if w0 is None else w0, gamma, z, params)
            if we < e - tol * max(abs(e), 1.0):
                v, e, zero, ok = w, we, z, wok
                moves += 1
                trace.append(TraceRow(it0 + moves, stage, 0.0, e, math.nan, gamma))
                accepted = True
                break
        if accepted:
            layers *= 2
        elif layers > 1:
            layers = 1
        else:
            break
    return v, moves, ok


# --- gamma = 0 ---------------------------------------------------------------------


def _box_descent(E: DiscreteEnergy, v, sign, params: SolverParams):
    """Projected Newton on the Dirichlet + source part with each free node kept
    on its side of zero: v_i >= 0 where sign = +1, v_i <= 0 where sign = -1.
    """
    free = E.free
    s = sign[free]
    v = v.copy()
    v[free] = np.where(s > 0, np.maximum(v[free], 0.0), np.minimum(v[free], 0.0))

    def smooth(w):
        return E.dirichlet(w) + E.source(w)

    e = smooth(v)
    for _ in range(params.max_iter):
        g = E.smooth_gradient(v)[free]
        vf = v[free]
        # at a bound with the gradient pushing outward
        binding = (vf == 0) & (s * g > 0)
        act = np.flatnonzero(~binding)
        if act.size == 0:
            break
        K = E.dirichlet_metric(v)[free[act]][:, free[act]].tocsc()
        d = np.zeros_like(vf)
        d[act] = spla.spsolve(K, -g[act])
        scale = max(abs(e), 1.0)
        if -float(g @ d) <= params.tol_energy * scale:
            break
        t = params.step_init
        while t >= params.min_step:
            wf = vf + t * d
            wf = np.where(s > 0, np.maximum(wf, 0.0), np.minimum(wf, 0.0))
            w = v.copy()
            w[free] = wf
            we = smooth(w)
            if we <= e + params.armijo * float(g @ (wf - vf)):
                break
            t *= params.shrink
        else:
            break
        dec = e - we
        v, e = w, we
        if dec <= params.tol_energy * scale:
            break
    return v


def _phase_search(E: DiscreteEnergy, v, params: SolverParams, trace, counters, max_moves=100_000):
    """Local search over the sign pattern of the free nodes for gamma = 0.

    For a sign pattern the values come from `_box_descent`; the pattern moves
    by switching rings of nodes next to the other phase (ring count doubles
    after a success). A candidate replaces the iterate only if the exact
    J_0 decreases, so the recorded trace is monotone.
    """
    A = _node_adjacency(E.grid)
    interior = ~E.boundary
    j0 = E.value(v, 0.0)
    tol = 1e-14

    def accept(w):
        nonlocal v, j0
        wj = E.value(w, 0.0)
        if wj < j0 - tol * max(abs(j0), 1.0):
            v, j0 = w, wj
            counters["it"] += 1
            trace.append(TraceRow(counters["it"], counters["stage"], 0.0, j0, math.nan, 0.0))
            return True
        return False

    sign = np.where(v > 0, 1.0, -1.0)
    accept(_box_descent(E, v, sign, params))
    moves = 0
    layers = 1
    while moves < max_moves:
        done = False
        for phase in (1.0, -1.0):
            sign = np.where(v > 0, 1.0, -1.0)
            new = sign.copy()
            for _ in range(layers):
                # nodes of the other phase next to this phase switch to it
                r = (A @ (new == phase).astype(float) > 0) & (new != phase) & interior
                if not r.any():
                    break
                new[r] = phase
            if np.array_equal(new, sign):
                continue
            w = v.copy()
            w[new != sign] = 0.0
            if phase > 0:
                # a node moved to the positive phase needs a positive value to count there
                w[new != sign] = 1e-12 * max(1.0, float(np.max(np.abs(v))))
            if accept(_box_descent(E, w, new, params)):
                moves += 1
                done = True
                break
        if done:
            layers *= 2
        elif layers > 1:
            layers = 1
        else:
            break
    return v, moves


def continuation(
    spec: ProblemSpec,
    grid: Grid,
    schedule: ContinuationSchedule | None = None,
    params: SolverParams | None = None,
    init: DiscreteFunction | None = None,
) -> SolveReport:
    """Solve the gamma stages in decreasing order, warm-starting each from the last."""
    schedule = schedule or ContinuationSchedule()
    params = params or SolverParams()
    if spec.lambda_plus <= spec.lambda_minus:
        raise InvalidSpec("continuation needs lambda_plus > lambda_minus")
    E = DiscreteEnergy(grid, spec)
    v = _check_init(spec, grid, init)
    trace: list[TraceRow] = []
    iters: list[int] = []
    stage_j0, stage_own, stage_start, gaps, sols = [], [], [], [], []
    notes: list[str] = []
    prev = None
    converged = True
    stage_offset = 0
    for k, gamma in enumerate(schedule.gammas):
        p_k = schedule.stage_params(k, params)
        stage_start.append(E.value(v, gamma))
        try:
            if gamma > 0:
                rep = minimize(spec.with_gamma(gamma), grid, p_k, DiscreteFunction(grid, v), stage_offset=stage_offset)
                v = rep.u.values.copy()
                offset = trace[-1].iteration if trace else 0
                for row in rep.trace:
                    trace.append(TraceRow(row.iteration + offset, row.stage, row.epsilon, row.energy, row.grad_norm, gamma))
                iters.extend(rep.iterations)
                stage_offset += len(rep.iterations)
                converged = rep.converged
            else:
                counters = {"it": trace[-1].iteration if trace else 0, "stage": stage_offset}
                trace.append(TraceRow(counters["it"], stage_offset, 0.0, E.value(v, 0.0), math.nan, 0.0))
                start_it = counters["it"]
                v, moves = _phase_search(E, v, p_k, trace, counters)
                iters.append(counters["it"] - start_it)
                notes.append(f"gamma=0 stage: {moves} accepted sign-pattern moves")
                converged = True
        except NumericalFailure as exc:
            partial = _finish(E, spec, v, gamma, trace, iters, False, notes + [f"stage {k} failed: {exc}"])
            raise NumericalFailure(f"continuation stage gamma={gamma} failed: {exc}", partial) from exc
        u_k = DiscreteFunction(grid, v.copy())
        sols.append(u_k)
        stage_own.append(E.value(v, gamma))
        stage_j0.append(E.value(v, 0.0))
        if prev is not None:
            gaps.append(w1p_norm(DiscreteFunction(grid, v - prev), spec.p))
        prev = v.copy()
    rep = _finish(E, spec, v, 0.0, trace, iters, converged, notes)
    rep.stage_gammas = list(schedule.gammas)
    rep.stage_energies_j0 = stage_j0
    rep.stage_energies_own = stage_own
    rep.stage_start_energies_own = stage_start
    rep.w1p_gaps = gaps
    rep.stage_solutions = sols
    return rep


# --- audits ---------------------------------------------------------------------------


@dataclass
class MinimalityResult:
    passed: bool
    worst_violation: float
    trials: int
    energy: float
    truncation_energy: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def truncation_audit(u: DiscreteFunction, spec: ProblemSpec, level: float) -> tuple[float, float]:
    """Energies of u and of u truncated at +-level."""
    sup_phi = spec.boundary.sup_abs(u.grid)
    if level < sup_phi:
        raise InvalidLevel(f"truncation level {level} is below sup|phi| = {sup_phi}")
    E = DiscreteEnergy(u.grid, spec)
    return E.value(u.values), E.value(np.clip(u.values, -level, level))


def local_minimality_check(
    u: DiscreteFunction,
    spec: ProblemSpec,
    trials: int = 200,
    magnitude: float | None = None,
    rel_tol: float = 1e-8,
    seed: int = 0,
) -> MinimalityResult:
    """Compare J(u) against random single-node perturbations and the truncation competitor."""
    grid = u.grid
    E = DiscreteEnergy(grid, spec)
    magnitude = grid.hmin**2 if magnitude is None else magnitude
    j = E.value(u.values)
    tol = rel_tol * abs(j)
    rng = np.random.default_rng(seed)
    worst = -math.inf
    nodes = rng.choice(E.free, size=trials, replace=True)
    signs = rng.choice([-1.0, 1.0], size=trials)
    v = u.values.copy()
    for i, s in zip(nodes, signs):
        old = v[i]
        v[i] = old + s * magnitude
        worst = max(worst, j - E.value(v))
        v[i] = old
    _, jt = truncation_audit(u, spec, spec.boundary.sup_abs(grid))
    worst = max(worst, j - jt)
    return MinimalityResult(bool(worst <= tol), float(worst), int(trials), j, jt)
