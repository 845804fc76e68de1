"""Innovation laws, regression operators and the FAR(1) simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from farboot.errors import ConfigurationError, GridMismatchError
from farboot.function_space import Basis, Grid, GridFunction

__all__ = [
    "InnovationModel",
    "RegressionOperator",
    "FunctionalSeries",
    "draw_innovation",
    "draw_innovations",
    "apply_operator",
    "simulate_far1",
    "simulate_far1_batch",
    "as_generator",
    "MAX_REJECTIONS",
]

MAX_REJECTIONS = 1000

CoeffLaw = Literal["uniform", "truncated_gaussian"]

# truncated standard normal on [-3, 3] rescaled to unit variance
_TN_CUT = 3.0
_TN_SD = math.sqrt(
    1.0
    - 2 * _TN_CUT * math.exp(-0.5 * _TN_CUT**2) / math.sqrt(2 * math.pi) / math.erf(_TN_CUT / math.sqrt(2))
)


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class InnovationModel:
    """Innovations ``sum_k sigma_k xi_k e_k`` with i.i.d. unit-variance, mean-zero ``xi_k``.

    Draws whose Lipschitz constant exceeds ``lip_cap`` are rejected and redrawn.
    """

    basis: Basis
    coeff_scales: NDArray[np.float64]
    coeff_law: CoeffLaw = "uniform"
    lip_cap: float = 25.0
    name: str = "innovation"

    def __post_init__(self) -> None:
        s = np.array(self.coeff_scales, dtype=float)
        if s.ndim != 1 or s.size > self.basis.K:
            raise ConfigurationError(f"need at most K={self.basis.K} coefficient scales")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ConfigurationError("coefficient scales must be finite and nonnegative")
        if np.all(s > 0) and s.size > 1:
            ratios = s[1:] / s[:-1]
            if ratios.max() >= 1.0:
                raise ConfigurationError("coefficient scales must decay strictly")
        if self.coeff_law not in ("uniform", "truncated_gaussian"):
            raise ConfigurationError(f"unknown coefficient law {self.coeff_law!r}")
        if not self.lip_cap > 0:
            raise ConfigurationError("lip_cap must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "coeff_scales", s)

    @classmethod
    def exponential(
        cls,
        basis: Basis,
        a: float = 0.3,
        c: float = 0.5,
        coeff_law: CoeffLaw = "uniform",
        lip_cap: float = 25.0,
    ) -> InnovationModel:
        """``sigma_k = a exp(-c (k - 1))`` for k = 1..K."""
        if c <= 0:
            raise ConfigurationError("decay rate c must be positive")
        scales = a * np.exp(-c * np.arange(basis.K))
        return cls(basis, scales, coeff_law, lip_cap, name=f"exp(a={a},c={c},{coeff_law})")

    @classmethod
    def zero(cls, basis: Basis) -> InnovationModel:
        return cls(basis, np.zeros(basis.K), name="zero")

    @property
    def grid(self) -> Grid:
        return self.basis.grid

    @property
    def coeff_bound(self) -> NDArray[np.float64]:
        """Almost-sure bound on |<eps, e_k>|."""
        half_width = math.sqrt(3.0) if self.coeff_law == "uniform" else _TN_CUT / _TN_SD
        return half_width * self.coeff_scales

    @property
    def lip_bound(self) -> float:
        """Almost-sure bound on the Lipschitz constant of a draw."""
        k = self.coeff_scales.size
        return min(self.lip_cap, float(self.coeff_bound @ self.basis.lip_constants[:k]))

    def variance(self, v: NDArray | None = None) -> float:
        """E <eps, v>^2 for a direction given by basis coefficients ``v``."""
        k = self.coeff_scales.size
        v = np.zeros(k) if v is None else np.asarray(v, dtype=float)[:k]
        return float(np.sum((self.coeff_scales * v) ** 2))

    def _xi(self, rng: np.random.Generator, shape: tuple[int, ...]) -> NDArray[np.float64]:
        if self.coeff_law == "uniform":
            return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=shape)
        z = rng.standard_normal(shape)
        bad = np.abs(z) > _TN_CUT
        while bad.any():
            z[bad] = rng.standard_normal(int(bad.sum()))
            bad = np.abs(z) > _TN_CUT
        return z / _TN_SD


def draw_innovations(
    model: InnovationModel, rng: np.random.Generator | int | None, size: int
) -> NDArray[np.float64]:
    """``size`` independent innovations as rows of grid values."""
    rng = as_generator(rng)
    k = model.coeff_scales.size
    step = model.grid.step
    out = model.basis.synthesize(model._xi(rng, (size, k)) * model.coeff_scales)
    todo = np.flatnonzero(np.abs(np.diff(out, axis=1)).max(axis=1) / step > model.lip_cap)
    attempts = 1
    while todo.size:
        if attempts >= MAX_REJECTIONS:
            raise ConfigurationError(
                f"lip_cap={model.lip_cap} rejected {MAX_REJECTIONS} consecutive draws; cap too tight"
            )
        redraw = model.basis.synthesize(model._xi(rng, (todo.size, k)) * model.coeff_scales)
        out[todo] = redraw
        ok = np.abs(np.diff(redraw, axis=1)).max(axis=1) / step <= model.lip_cap
        todo = todo[~ok]
        attempts += 1
    return out


def draw_innovation(model: InnovationModel, rng: np.random.Generator | int | None) -> GridFunction:
    return GridFunction(model.grid, draw_innovations(model, rng, 1)[0])


@dataclass(frozen=True, eq=False)
class RegressionOperator:
    """Lipschitz regression operator acting diagonally in the cosine basis.

    ``linear_diagonal``: coefficient k is multiplied by ``rho_k``.
    ``nonlinear_saturating``: coefficient a_k is mapped to
    ``L * gain_k * scale * tanh(a_k / scale)``; the squash keeps output
    coefficients bounded, hence a bounded Lipschitz seminorm on the range.
    ``constant``: every input goes to the fixed function ``params["values"]``.
    """

    kind: Literal["linear_diagonal", "nonlinear_saturating", "constant"]
    basis: Basis
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind == "linear_diagonal":
            rho = np.asarray(self.params["rho"], dtype=float)
            if rho.size > self.basis.K:
                raise ConfigurationError("more rho values than basis functions")
            lip = float(np.abs(rho).max()) if rho.size else 0.0
        elif self.kind == "nonlinear_saturating":
            gains = np.asarray(self.params["gains"], dtype=float)
            if gains.size > self.basis.K or np.any(np.abs(gains) > 1):
                raise ConfigurationError("need |gain_k| <= 1 and at most K gains")
            if not self.params.get("scale", 1.0) > 0:
                raise ConfigurationError("saturation scale must be positive")
            lip = float(self.params["L"]) * float(np.abs(gains).max())
        elif self.kind == "constant":
            vals = np.asarray(self.params["values"], dtype=float)
            if vals.shape != (self.basis.grid.m,):
                raise ConfigurationError("constant operator needs one value per grid point")
            lip = 0.0
        else:
            raise ConfigurationError(f"unknown operator kind {self.kind!r}")
        if not lip < 1.0:
            raise ConfigurationError(f"Lipschitz constant must be < 1, got {lip}")
        object.__setattr__(self, "_lip", lip)

    @classmethod
    def linear_diagonal(cls, basis: Basis, rho) -> RegressionOperator:
        rho = np.asarray(rho, dtype=float)
        return cls("linear_diagonal", basis, {"rho": rho}, name="linear_diagonal")

    @classmethod
    def exponential_linear(cls, basis: Basis, a: float = 0.5, c: float = 0.2) -> RegressionOperator:
        """``rho_k = a exp(-c (k - 1))``."""
        return cls.linear_diagonal(basis, a * np.exp(-c * np.arange(basis.K)))

    @classmethod
    def nonlinear_saturating(
        cls, basis: Basis, L: float = 0.5, gains=None, scale: float = 0.5
    ) -> RegressionOperator:
        gains = np.exp(-0.2 * np.arange(basis.K)) if gains is None else np.asarray(gains, dtype=float)
        return cls(
            "nonlinear_saturating",
            basis,
            {"L": float(L), "gains": gains, "scale": float(scale)},
            name="nonlinear_saturating",
        )

    @classmethod
    def constant(cls, g: GridFunction, basis: Basis) -> RegressionOperator:
        return cls("constant", basis, {"values": g.values}, name="constant")

    @property
    def lip_const(self) -> float:
        return self._lip

    @property
    def grid(self) -> Grid:
        return self.basis.grid

    @property
    def range_lip_bound(self) -> float:
        """sup of the Lipschitz seminorm over the operator's range (inf if unbounded)."""
        if self.kind == "nonlinear_saturating":
            g = np.abs(np.asarray(self.params["gains"]))
            return float(self.params["L"] * self.params["scale"] * g @ self.basis.lip_constants[: g.size])
        if self.kind == "constant":
            v = np.asarray(self.params["values"])
            return float(np.abs(np.diff(v)).max() / self.grid.step)
        return math.inf

    def apply_values(self, values: NDArray) -> NDArray[np.float64]:
        """Apply to a stack of value arrays (last axis = grid)."""
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.grid.m:
            raise GridMismatchError(f"expected {self.grid.m} grid values, got {values.shape[-1]}")
        if self.kind == "constant":
            return np.broadcast_to(np.asarray(self.params["values"]), values.shape).copy()
        if self.kind == "linear_diagonal":
            rho = np.asarray(self.params["rho"])
            coef = self.basis.coefficients(values, rho.size)
            return self.basis.synthesize(coef * rho)
        gains = np.asarray(self.params["gains"])
        s = self.params["scale"]
        coef = self.basis.coefficients(values, gains.size)
        return self.basis.synthesize(self.params["L"] * gains * s * np.tanh(coef / s))

    def __call__(self, f: GridFunction) -> GridFunction:
        return apply_operator(self, f)


def apply_operator(op: RegressionOperator, f: GridFunction) -> GridFunction:
    if f.grid != op.grid:
        raise GridMismatchError(f"{f.grid!r} vs {op.grid!r}")
    return GridFunction(f.grid, op.apply_values(f.values))


def state_lip_bound(op: RegressionOperator, innov: InnovationModel) -> float:
    """Almost-sure bound on the Lipschitz seminorm of every simulated state.

    ``Lip(X_t) <= Lip(eps_t) + Lip(Psi(X_{t-1}))``. For the diagonal linear map
    the state coefficients are bounded by ``c_k / (1 - |rho_k|)`` with ``c_k`` the
    innovation coefficient bound, which bounds the range term.
    """
    eps_lip = innov.lip_bound
    if op.kind == "linear_diagonal":
        rho = np.abs(np.asarray(op.params["rho"]))
        k = min(rho.size, innov.coeff_scales.size)
        coef_x = innov.coeff_bound[:k] / (1.0 - rho[:k])
        range_lip = float((rho[:k] * coef_x) @ op.basis.lip_constants[:k])
        full = float(coef_x @ op.basis.lip_constants[:k])
        return min(full, eps_lip + range_lip)
    return eps_lip + op.range_lip_bound


@dataclass(frozen=True, eq=False)
class FunctionalSeries:
    """A sample X_0, ..., X_{n+1} stored as an (n + 2, m) array."""

    grid: Grid
    values: NDArray[np.float64]
    seed: int | None = None
    model_ids: tuple[str, ...] = ()
    burn_in: int = 0

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.grid.m:
            raise ValueError(f"series must have shape (n + 2, {self.grid.m}), got {v.shape}")
        if v.shape[0] < 3:
            raise ValueError("series needs at least 3 states (n >= 1)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0] - 2

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, t: int) -> GridFunction:
        return GridFunction(self.grid, self.values[t])

    @property
    def items(self) -> list[GridFunction]:
        return [GridFunction(self.grid, v) for v in self.values]


def _stationary_start(op, innov, burn_in, rng, reps):
    x = np.zeros((reps, op.grid.m))
    for _ in range(burn_in):
        x = op.apply_values(x) + draw_innovations(innov, rng, reps)
    return x


def simulate_far1_batch(
    op: RegressionOperator,
    innov: InnovationModel,
    n: int,
    burn_in: int,
    rng: np.random.Generator | int | None,
    reps: int,
) -> NDArray[np.float64]:
    """``reps`` independent paths as a (reps, n + 2, m) array."""
    if n < 1 or burn_in < 0 or reps < 1:
        raise ConfigurationError("need n >= 1, burn_in >= 0, reps >= 1")
    if op.grid != innov.grid:
        raise GridMismatchError("operator and innovation model use different grids")
    rng = as_generator(rng)
    out = np.empty((reps, n + 2, op.grid.m))
    x = _stationary_start(op, innov, burn_in, rng, reps)
    out[:, 0] = x
    for t in range(1, n + 2):
        x = op.apply_values(x) + draw_innovations(innov, rng, reps)
        out[:, t] = x
    return out


def simulate_far1(
    op: RegressionOperator,
    innov: InnovationModel,
    n: int,
    burn_in: int,
    rng: np.random.Generator | int | None,
) -> FunctionalSeries:
    """Iterate ``X <- Psi(X) + eps`` from X = 0, drop ``burn_in`` states, keep n + 2."""
    if n < 2:
        raise ConfigurationError("n must be at least 2")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    vals = simulate_far1_batch(op, innov, n, burn_in, rng, 1)[0]
    return FunctionalSeries(op.grid, vals, seed=seed, model_ids=(op.name, innov.name), burn_in=burn_in)
