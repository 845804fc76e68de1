"""Discretized L2[0, 1] of Lipschitz functions: grids, norms, bases and covering."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from farboot.errors import GridMismatchError

__all__ = [
    "Grid",
    "GridFunction",
    "Basis",
    "SmoothClass",
    "make_grid",
    "inner",
    "l2_norm",
    "sup_norm",
    "lip_seminorm",
    "smooth_norm",
    "in_class",
    "project",
    "reconstruct",
    "interp_l2_norm",
    "sup_norm_bound_check",
    "greedy_cover",
    "SUP_NORM_CONSTANT",
]

# Extremal constant of the sup-norm bound for d = 1 (boundary half-cone).
SUP_NORM_CONSTANT = 3.0 ** (1.0 / 3.0)


class Grid:
    """Equispaced grid on [0, 1] with trapezoid weights summing to one."""

    __slots__ = ("m", "points", "weights", "step")

    def __init__(self, m: int = 101):
        if m < 2:
            raise ValueError(f"grid needs at least 2 points, got {m}")
        self.m = int(m)
        self.points = np.linspace(0.0, 1.0, self.m)
        self.step = 1.0 / (self.m - 1)
        w = np.full(self.m, self.step)
        w[0] = w[-1] = 0.5 * self.step
        self.weights = w
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Grid) and other.m == self.m

    def __hash__(self) -> int:
        return hash(("Grid", self.m))

    def __repr__(self) -> str:
        return f"Grid(m={self.m})"

    def __len__(self) -> int:
        return self.m


@functools.lru_cache(maxsize=None)
def make_grid(m: int = 101) -> Grid:
    return Grid(m)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A function on ``grid`` given by its values at the grid points."""

    grid: Grid
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.m,):
            raise ValueError(f"expected {self.grid.m} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> GridFunction:
        return cls(grid, np.asarray(fn(grid.points), dtype=float) * np.ones(grid.m))

    @classmethod
    def zeros(cls, grid: Grid) -> GridFunction:
        return cls(grid, np.zeros(grid.m))

    def _check(self, other: GridFunction) -> None:
        if self.grid != other.grid:
            raise GridMismatchError(f"{self.grid!r} vs {other.grid!r}")

    def __add__(self, other: GridFunction) -> GridFunction:
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: GridFunction) -> GridFunction:
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> GridFunction:
        return GridFunction(self.grid, float(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return GridFunction(self.grid, -self.values)

    def __repr__(self) -> str:
        return f"GridFunction(m={self.grid.m}, sup={np.abs(self.values).max():.4g})"


@dataclass(frozen=True)
class SmoothClass:
    """The ball U(r) of the norm ``sup |f| + Lip(f)``."""

    r: float

    def __post_init__(self) -> None:
        if not self.r >= 0:
            raise ValueError(f"radius must be nonnegative, got {self.r}")


class Basis:
    """Cosine basis e_1 = 1, e_k(u) = sqrt(2) cos((k - 1) pi u) sampled on a grid.

    On an equispaced grid with trapezoid weights the sampled functions are
    orthonormal to machine precision for ``K < m`` (discrete cosine
    orthogonality), so projections and reconstructions are exact within the span.
    """

    kind = "cosine"

    def __init__(self, grid: Grid, K: int):
        if not 1 <= K < grid.m:
            raise ValueError(f"need 1 <= K < m, got K={K}, m={grid.m}")
        self.grid = grid
        self.K = int(K)
        k = np.arange(self.K)[:, None]
        mat = np.sqrt(2.0) * np.cos(k * np.pi * grid.points[None, :])
        mat[0] = 1.0
        mat.setflags(write=False)
        self.matrix = mat
        # exact Lipschitz constant of each sampled basis function
        lips = np.abs(np.diff(mat, axis=1)).max(axis=1) / grid.step
        lips.setflags(write=False)
        self.lip_constants = lips

    @property
    def functions(self) -> list[GridFunction]:
        return [GridFunction(self.grid, row) for row in self.matrix]

    def __getitem__(self, k: int) -> GridFunction:
        """1-based access, ``basis[1]`` is the constant function."""
        if not 1 <= k <= self.K:
            raise IndexError(k)
        return GridFunction(self.grid, self.matrix[k - 1])

    def gram(self) -> NDArray[np.float64]:
        return (self.matrix * self.grid.weights) @ self.matrix.T

    def coefficients(self, values: ArrayLike, K: int | None = None) -> NDArray[np.float64]:
        """Coefficients of (a stack of) value arrays along the last axis."""
        K = self.K if K is None else K
        return np.asarray(values) @ (self.matrix[:K] * self.grid.weights).T

    def synthesize(self, coeffs: ArrayLike) -> NDArray[np.float64]:
        coeffs = np.asarray(coeffs, dtype=float)
        return coeffs @ self.matrix[: coeffs.shape[-1]]


def _values(f: GridFunction | NDArray) -> NDArray[np.float64]:
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


def inner(f: GridFunction, g: GridFunction) -> float:
    """Trapezoid-rule L2 inner product."""
    if f.grid != g.grid:
        raise GridMismatchError(f"{f.grid!r} vs {g.grid!r}")
    return float(np.dot(f.grid.weights * f.values, g.values))


def l2_norm(f: GridFunction) -> float:
    return math.sqrt(max(inner(f, f), 0.0))


def sup_norm(f: GridFunction) -> float:
    return float(np.abs(f.values).max())


def lip_seminorm(f: GridFunction) -> float:
    """Exact Lipschitz constant of the piecewise-linear interpolant.

    The maximal slope of a piecewise-linear function is attained on one of its
    pieces, so adjacent differences suffice.
    """
    return float(np.abs(np.diff(f.values)).max() / f.grid.step)


def smooth_norm(f: GridFunction) -> float:
    return sup_norm(f) + lip_seminorm(f)


def in_class(f: GridFunction, c: SmoothClass | float) -> bool:
    r = c.r if isinstance(c, SmoothClass) else float(c)
    return smooth_norm(f) <= r


def smooth_norms(values: NDArray, step: float) -> NDArray[np.float64]:
    """Row-wise ``smooth_norm`` for a stack of value arrays on a grid with ``step``."""
    values = np.asarray(values)
    return np.abs(values).max(axis=-1) + np.abs(np.diff(values, axis=-1)).max(axis=-1) / step


def project(f: GridFunction, basis: Basis, K: int | None = None) -> NDArray[np.float64]:
    """Coefficients <f, e_k>, k = 1..K."""
    if f.grid != basis.grid:
        raise GridMismatchError(f"{f.grid!r} vs {basis.grid!r}")
    K = basis.K if K is None else K
    if not 1 <= K <= basis.K:
        raise ValueError(f"K must lie in [1, {basis.K}], got {K}")
    return basis.coefficients(f.values, K)


def reconstruct(coeffs: ArrayLike, basis: Basis) -> GridFunction:
    return GridFunction(basis.grid, basis.synthesize(coeffs))


def interp_l2_norm(f: GridFunction) -> float:
    """Exact L2 norm of the piecewise-linear interpolant of ``f``.

    Integrates (a + (b - a) s)^2 exactly on each cell; never exceeds the
    trapezoid value since the integrand is convex.
    """
    a, b = f.values[:-1], f.values[1:]
    return math.sqrt(float(np.sum(a * a + a * b + b * b)) * f.grid.step / 3.0)


def sup_norm_bound_check(f: GridFunction) -> tuple[float, float]:
    """Both sides of ``sup|f| <= 3^(1/3) Lip(f)^(1/3) ||f||^(2/3)``.

    The L2 norm is that of the piecewise-linear interpolant, the same function
    whose Lipschitz constant ``lip_seminorm`` reports. The bound is attained by
    the half-cone ``L (r - u)^+`` with ``r <= 1`` and holds whenever the cone of
    height ``sup|f|`` fits in [0, 1], in particular whenever ``f`` has a zero.
    It fails for functions bounded away from zero with a small slope (constants).
    """
    lhs = sup_norm(f)
    rhs = SUP_NORM_CONSTANT * lip_seminorm(f) ** (1.0 / 3.0) * interp_l2_norm(f) ** (2.0 / 3.0)
    return lhs, rhs


def random_smooth_members(
    c: SmoothClass, grid: Grid, count: int, rng: np.random.Generator, n_terms: int = 8
) -> NDArray[np.float64]:
    """Random elements of U(r) as rows: cosine sums rescaled to a random norm <= r."""
    basis = Basis(grid, n_terms)
    coeffs = rng.standard_normal((count, n_terms)) / (1.0 + np.arange(n_terms)) ** 2
    vals = basis.synthesize(coeffs)
    norms = smooth_norms(vals, grid.step)
    norms[norms == 0] = 1.0
    scale = c.r * rng.uniform(0.0, 1.0, size=count) / norms
    return vals * scale[:, None]


def greedy_cover(
    c: SmoothClass,
    eps: float,
    probe_count: int,
    rng_seed: int | np.random.Generator | None = 0,
    grid: Grid | None = None,
) -> int:
    """Size of a farthest-first greedy eps-net over random members of U(r).

    Centers are added in farthest-point order until every probe lies within
    ``eps`` (L2) of a center. The traversal does not depend on ``eps``, so the
    count is nonincreasing in ``eps`` for a fixed seed.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    grid = grid or make_grid()
    rng = np.random.default_rng(rng_seed)
    probes = random_smooth_members(c, grid, probe_count, rng) * np.sqrt(grid.weights)
    dist = np.linalg.norm(probes - probes[0], axis=1)
    count = 1
    while True:
        far = int(np.argmax(dist))
        if dist[far] <= eps:
            return count
        count += 1
        dist = np.minimum(dist, np.linalg.norm(probes - probes[far], axis=1))
