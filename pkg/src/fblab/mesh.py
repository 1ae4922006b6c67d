"""
Uniform grids on intervals and rectangles.

Discretization is by piecewise-linear conforming elements: segments in 1-D,
and in 2-D a structured triangulation with two triangles per cell, split
along the diagonal from the lower-left to the upper-right corner. Gradients
are constant on every element, so |grad u|^p integrates exactly per element;
all other integrands use the one-point element-midpoint (barycenter) rule.

Node values are stored flat in row-major order of the index tuple (i, j),
with i the x index. Coordinates are derived on demand, never stored on the
DiscreteFunction itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class InvalidResolution(ValueError):
    pass


class InvalidExponent(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box: an interval (1-D) or a rectangle (2-D)."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        if len(bounds) not in (1, 2):
            raise ValueError("only 1-D intervals and 2-D rectangles are supported")
        for a, b in bounds:
            if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
                raise ValueError(f"axis [{a}, {b}] must have positive length")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def interval(cls, a: float, b: float) -> Domain:
        return cls(((a, b),))

    @classmethod
    def rectangle(cls, a1: float, b1: float, a2: float, b2: float) -> Domain:
        return cls(((a1, b1), (a2, b2)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in self.bounds)

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def diameter(self) -> float:
        return float(np.hypot.reduce(self.lengths)) if self.dim > 1 else self.lengths[0]

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return all(a <= xi <= b for (a, b), xi in zip(self.bounds, x))

    def distance_to_boundary(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(min(min(xi - a, b - xi) for (a, b), xi in zip(self.bounds, x)))

    def to_dict(self) -> dict:
        return {"bounds": [list(b) for b in self.bounds]}


@dataclass(frozen=True)
class Grid:
    """Uniform grid with N subdivisions on every axis of `domain`."""

    domain: Domain
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise InvalidResolution(f"need N >= 2 subdivisions per axis, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / self.N for L in self.domain.lengths)

    @property
    def hmin(self) -> float:
        return min(self.h)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N + 1,) * self.dim

    @property
    def n_nodes(self) -> int:
        return (self.N + 1) ** self.dim

    @property
    def n_cells(self) -> int:
        return self.N**self.dim

    @property
    def n_elements(self) -> int:
        return self.N if self.dim == 1 else 2 * self.N**2

    @property
    def element_measure(self) -> float:
        m = float(np.prod(self.h))
        return m if self.dim == 1 else 0.5 * m

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, self.N + 1) for a, b in self.domain.bounds]

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape (n_nodes, dim)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        idx = np.indices(self.shape).reshape(self.dim, -1)
        return np.any((idx == 0) | (idx == self.N), axis=0)

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def elements(self) -> np.ndarray:
        """Element connectivity, shape (n_elements, dim + 1)."""
        N = self.N
        if self.dim == 1:
            k = np.arange(N)
            return np.stack([k, k + 1], axis=1)
        i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        i, j = i.ravel(), j.ravel()
        a = i * (N + 1) + j
        b = (i + 1) * (N + 1) + j
        c = (i + 1) * (N + 1) + j + 1
        d = i * (N + 1) + j + 1
        lower = np.stack([a, b, c], axis=1)
        upper = np.stack([a, c, d], axis=1)
        # lower/upper triangle of the same cell are adjacent in element order
        return np.stack([lower, upper], axis=1).reshape(-1, 3)

    @cached_property
    def element_cell(self) -> np.ndarray:
        if self.dim == 1:
            return np.arange(self.N)
        return np.repeat(np.arange(self.n_cells), 2)

    @cached_property
    def midpoints(self) -> np.ndarray:
        """Element barycenters, shape (n_elements, dim)."""
        return self.coords[self.elements].mean(axis=1)

    @cached_property
    def gradient_operator(self) -> sp.csr_matrix:
        """Sparse G with (G @ u).reshape(n_elements, dim) = element gradients."""
        E = self.elements
        ne = self.n_elements
        if self.dim == 1:
            (hx,) = self.h
            rows = np.repeat(np.arange(ne), 2)
            cols = E.ravel()
            vals = np.tile([-1.0 / hx, 1.0 / hx], ne)
            return sp.csr_matrix((vals, (rows, cols)), shape=(ne, self.n_nodes))
        hx, hy = self.h
        lower = np.arange(0, ne, 2)
        upper = lower + 1
        a, b, c = E[lower].T
        a2, c2, d2 = E[upper].T
        rows, cols, vals = [], [], []

        def put(r, col, v):
            rows.append(r)
            cols.append(col)
            vals.append(np.full(r.shape, v))

        # lower triangle (a, b, c): gx = (b - a)/hx, gy = (c - b)/hy
        put(2 * lower, a, -1 / hx)
        put(2 * lower, b, 1 / hx)
        put(2 * lower + 1, b, -1 / hy)
        put(2 * lower + 1, c, 1 / hy)
        # upper triangle (a, c, d): gx = (c - d)/hx, gy = (d - a)/hy
        put(2 * upper, d2, -1 / hx)
        put(2 * upper, c2, 1 / hx)
        put(2 * upper + 1, a2, -1 / hy)
        put(2 * upper + 1, d2, 1 / hy)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * ne, self.n_nodes),
        )

    @cached_property
    def midpoint_operator(self) -> sp.csr_matrix:
        """Sparse M with M @ u = element-midpoint values of the P1 interpolant."""
        E = self.elements
        k = E.shape[1]
        rows = np.repeat(np.arange(self.n_elements), k)
        return sp.csr_matrix(
            (np.full(E.size, 1.0 / k), (rows, E.ravel())),
            shape=(self.n_elements, self.n_nodes),
        )

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        """Integral of each nodal hat function."""
        k = self.dim + 1
        m = np.zeros(self.n_nodes)
        np.add.at(m, self.elements.ravel(), self.element_measure / k)
        return m

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique element edges as node pairs (lo, hi), sorted."""
        E = self.elements
        if self.dim == 1:
            return E.copy()
        pairs = np.concatenate([E[:, [0, 1]], E[:, [1, 2]], E[:, [0, 2]]])
        pairs.sort(axis=1)
        return np.unique(pairs, axis=0)

    def node_index(self, *ij: int) -> int:
        return int(np.ravel_multi_index(ij, self.shape))

    def locate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Element containing point x, and its barycentric weights on that element's nodes."""
        x = np.asarray(x, dtype=float)
        lo = np.array([a for a, _ in self.domain.bounds])
        t = (x - lo) / np.array(self.h)
        cell = np.clip(np.floor(t).astype(int), 0, self.N - 1)
        loc = t - cell
        if self.dim == 1:
            e = int(cell[0])
            return self.elements[e], np.array([1 - loc[0], loc[0]])
        ci, cj = int(cell[0]), int(cell[1])
        xi, eta = loc
        e = 2 * (ci * self.N + cj)
        if xi >= eta:  # lower triangle (a, b, c)
            return self.elements[e], np.array([1 - xi, xi - eta, eta])
        return self.elements[e + 1], np.array([1 - eta, xi, eta - xi])  # (a, c, d)


    def locate_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized locate: element node ids (m, dim+1) and weights (m, dim+1)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lo = np.array([a for a, _ in self.domain.bounds])
        t = (X - lo) / np.array(self.h)
        cell = np.clip(np.floor(t).astype(int), 0, self.N - 1)
        loc = t - cell
        if self.dim == 1:
            return self.elements[cell[:, 0]], np.stack([1 - loc[:, 0], loc[:, 0]], axis=1)
        xi, eta = loc[:, 0], loc[:, 1]
        lower = xi >= eta
        e = 2 * (cell[:, 0] * self.N + cell[:, 1]) + (~lower)
        w = np.where(
            lower[:, None],
            np.stack([1 - xi, xi - eta, eta], axis=1),
            np.stack([1 - eta, xi, eta - xi], axis=1),
        )
        return self.elements[e], w


def build_grid(domain: Domain, N: int) -> Grid:
    return Grid(domain, N)


@dataclass
class DiscreteFunction:
    """One real value per node of `grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.n_nodes:
            raise GridMismatch(f"{v.size} values for a grid with {self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("discrete function values must be finite")
        self.values = v

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> DiscreteFunction:
        X = grid.coords
        return cls(grid, fn(*X.T))

    @classmethod
    def zeros(cls, grid: Grid) -> DiscreteFunction:
        return cls(grid, np.zeros(grid.n_nodes))

    def with_values(self, values) -> DiscreteFunction:
        return DiscreteFunction(self.grid, values)

    def copy(self) -> DiscreteFunction:
        return DiscreteFunction(self.grid, self.values.copy())

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def at(self, x) -> float:
        """P1 interpolant evaluated at a point of the domain."""
        nodes, w = self.grid.locate(x)
        return float(w @ self.values[nodes])

    def at_points(self, X) -> np.ndarray:
        nodes, w = self.grid.locate_many(X)
        return np.sum(w * self.values[nodes], axis=1)

    def midpoint_values(self) -> np.ndarray:
        return self.grid.midpoint_operator @ self.values

    def to_csv(self, path) -> None:
        names = ["x", "y"][: self.grid.dim] + ["u"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for xs, v in zip(self.grid.coords, self.values):
                w.writerow([repr(float(c)) for c in xs] + [repr(float(v))])

    @classmethod
    def from_csv(cls, path, grid: Grid) -> DiscreteFunction:
        data = read_node_csv(path)
        if data.shape[1] != grid.dim + 1:
            raise GridMismatch(f"{path}: expected {grid.dim} coordinate columns")
        if data.shape[0] != grid.n_nodes:
            raise GridMismatch(f"{path}: {data.shape[0]} rows for {grid.n_nodes} nodes")
        if not np.allclose(data[:, :-1], grid.coords, atol=1e-9 * grid.domain.diameter):
            raise GridMismatch(f"{path}: node coordinates do not match the grid")
        return cls(grid, data[:, -1])


def read_node_csv(path) -> np.ndarray:
    text = Path(path).read_text().strip().splitlines()
    rows = list(csv.reader(text[1:]))
    return np.array([[float(c) for c in r] for r in rows], dtype=float)


def cell_gradients(u: DiscreteFunction) -> np.ndarray:
    """Constant gradient of the P1 interpolant on each element, shape (n_elements, dim)."""
    g = u.grid
    return (g.gradient_operator @ u.values).reshape(g.n_elements, g.dim)


def integrate(grid: Grid, values) -> float:
    """Sum of per-element (or per-cell) values times their measure."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == grid.n_elements:
        return float(np.sum(v) * grid.element_measure)
    if v.size == grid.n_cells:
        return float(np.sum(v) * np.prod(grid.h))
    raise GridMismatch(
        f"{v.size} values; expected {grid.n_elements} elements or {grid.n_cells} cells"
    )


def lq_norm(u: DiscreteFunction, q: float) -> float:
    """L^q norm by midpoint quadrature; q = inf gives the max over nodes."""
    q = float(q)
    if math.isnan(q) or q < 1:
        raise InvalidExponent(f"L^q norm needs q >= 1, got {q}")
    if math.isinf(q):
        return float(np.max(np.abs(u.values)))
    mid = np.abs(u.midpoint_values())
    return integrate(u.grid, mid**q) ** (1.0 / q)


def ball_nodes(grid: Grid, center, r: float) -> np.ndarray:
    """Indices of nodes within Euclidean distance r of `center` (possibly empty)."""
    if r <= 0:
        raise ValueError("ball radius must be positive")
    c = np.atleast_1d(np.asarray(center, dtype=float))
    d = np.linalg.norm(grid.coords - c, axis=1)
    return np.flatnonzero(d <= r * (1 + 1e-12))


def element_ball(grid: Grid, center, r: float) -> np.ndarray:
    """Indices of elements whose midpoint lies within distance r of `center`."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    d = np.linalg.norm(grid.midpoints - c, axis=1)
    return np.flatnonzero(d <= r * (1 + 1e-12))
