"""Mallows (Wasserstein-p) distances between equal-size empirical laws, KS and scalar W_p."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from farboot.errors import GridMismatchError, UnsupportedCaseError
from farboot.function_space import Grid, GridFunction

__all__ = [
    "EmpiricalLaw",
    "AssignmentResult",
    "mallows_distance",
    "kolmogorov_distance",
    "scalar_wasserstein",
]


@dataclass(frozen=True, eq=False)
class EmpiricalLaw:
    """Equally weighted atoms: scalars (1-d array) or functions (rows on ``grid``)."""

    atoms: NDArray[np.float64]
    grid: Grid | None = None

    def __post_init__(self) -> None:
        a = np.array(self.atoms, dtype=float)
        if a.ndim not in (1, 2) or a.shape[0] < 1:
            raise ValueError("need at least one atom")
        if a.ndim == 2:
            if self.grid is None:
                raise ValueError("function atoms need a grid")
            if a.shape[1] != self.grid.m:
                raise GridMismatchError(f"atoms have {a.shape[1]} values, grid has {self.grid.m}")
        a.setflags(write=False)
        object.__setattr__(self, "atoms", a)

    @classmethod
    def from_functions(cls, fns: list[GridFunction]) -> EmpiricalLaw:
        grid = fns[0].grid
        if any(f.grid != grid for f in fns):
            raise GridMismatchError("atoms live on different grids")
        return cls(np.stack([f.values for f in fns]), grid)

    def __len__(self) -> int:
        return self.atoms.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.atoms.ndim == 1

    def _embedded(self) -> NDArray[np.float64]:
        """Atoms as Euclidean vectors whose distances equal the L2 distances."""
        if self.is_scalar:
            return self.atoms[:, None]
        return self.atoms * np.sqrt(self.grid.weights)


@dataclass(frozen=True)
class AssignmentResult:
    """Optimal coupling: atom i of F is paired with atom ``permutation[i]`` of G."""

    permutation: NDArray[np.intp]
    cost: float
    p: float


def cost_matrix(F: EmpiricalLaw, G: EmpiricalLaw, p: float = 2.0) -> NDArray[np.float64]:
    if F.is_scalar != G.is_scalar:
        raise UnsupportedCaseError("cannot compare scalar and function laws")
    if not F.is_scalar and F.grid != G.grid:
        raise GridMismatchError(f"{F.grid!r} vs {G.grid!r}")
    return cdist(F._embedded(), G._embedded()) ** p


def mallows_distance(F: EmpiricalLaw, G: EmpiricalLaw, p: float = 2.0) -> AssignmentResult:
    """Exact d_p between two empirical laws with the same number of atoms."""
    if p < 1:
        raise ValueError(f"order p must be >= 1, got {p}")
    if len(F) != len(G):
        raise UnsupportedCaseError(f"laws must have equal atom counts, got {len(F)} and {len(G)}")
    c = cost_matrix(F, G, p)
    rows, cols = linear_sum_assignment(c)
    perm = np.empty(len(F), dtype=np.intp)
    perm[rows] = cols
    total = float(c[rows, cols].mean())
    return AssignmentResult(perm, total ** (1.0 / p), float(p))


def kolmogorov_distance(a: ArrayLike, b: ArrayLike) -> float:
    """Two-sample KS statistic sup_z |F_a(z) - F_b(z)|."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    z = np.concatenate([a, b])
    fa = np.searchsorted(a, z, side="right") / a.size
    fb = np.searchsorted(b, z, side="right") / b.size
    return float(np.abs(fa - fb).max())


def scalar_wasserstein(a: ArrayLike, b: ArrayLike, p: float = 2.0) -> float:
    """W_p between equal-size scalar samples via the sorted pairing."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size != b.size:
        raise UnsupportedCaseError("scalar samples must have equal sizes")
    if a.size == 0:
        raise ValueError("samples must be nonempty")
    return float(np.mean(np.abs(a - b) ** p) ** (1.0 / p))
