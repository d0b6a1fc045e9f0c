"""Uniform 1-D grids on (0, L) with Neumann boundary conditions.

Quadrature is the trapezoid rule, gradient energies use the midpoint rule on
cell edges, and the Laplacian is the second-order central stencil with
reflected ghost nodes. All three are second-order accurate.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from .errors import DomainError

__all__ = [
    "Grid",
    "Field",
    "NeumannLaplacian",
    "build_grid",
    "neumann_laplacian",
    "laplacian_apply",
    "integrate",
    "inner",
    "norm",
    "dirichlet_energy",
]


@dataclass(frozen=True)
class Grid:
    """Uniform node set x_j = j*h, j = 0..n_nodes-1, spanning [0, length]."""

    length: float
    n_nodes: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.length) or self.length <= 0:
            raise ValueError(f"grid length must be positive, got {self.length!r}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 3:
            raise ValueError(f"n_nodes must be an integer >= 3, got {self.n_nodes!r}")
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "n_nodes", int(self.n_nodes))

    @property
    def spacing(self) -> float:
        return self.length / (self.n_nodes - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.n_nodes) * self.spacing
        x[-1] = self.length
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights; also the diagonal of the discrete L2 inner product."""
        w = np.full(self.n_nodes, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        w.flags.writeable = False
        return w

    def field(self, values) -> "Field":
        return Field(self, values)

    def constant(self, value: float) -> "Field":
        return Field(self, np.full(self.n_nodes, float(value)))


def build_grid(L: float, n_nodes: int) -> Grid:
    return Grid(L, n_nodes)


@dataclass(frozen=True, eq=False)
class Field:
    """Real values sampled at the nodes of a grid.

    The value array is copied on construction and made read-only.
    """

    grid: Grid
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field has shape {v.shape}, grid expects ({self.grid.n_nodes},)"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.grid.n_nodes

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def _wrap(self, other):
        if isinstance(other, Field):
            _check_same_grid(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._wrap(other))

    def __rsub__(self, other):
        return Field(self.grid, self._wrap(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._wrap(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())


def _check_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class NeumannLaplacian:
    """Tridiagonal Neumann Laplacian stored as three length-n diagonals.

    ``sub[j]`` multiplies f[j-1] and ``sup[j]`` multiplies f[j+1] in row j, so
    ``sub[0]`` and ``sup[-1]`` are zero. Boundary rows use the ghost values
    f[-1] = f[1] and f[n] = f[n-2].
    """

    grid: Grid
    sub: np.ndarray = dc_field(repr=False)
    diag: np.ndarray = dc_field(repr=False)
    sup: np.ndarray = dc_field(repr=False)

    def matrix(self):
        """Return the operator as a scipy CSR matrix."""
        from scipy.sparse import diags

        return diags([self.sub[1:], self.diag, self.sup[:-1]], [-1, 0, 1], format="csr")

    def apply(self, values: np.ndarray) -> np.ndarray:
        out = self.diag * values
        out[1:] += self.sub[1:] * values[:-1]
        out[:-1] += self.sup[:-1] * values[1:]
        return out


def neumann_laplacian(grid: Grid) -> NeumannLaplacian:
    n = grid.n_nodes
    c = 1.0 / grid.spacing**2
    sub = np.full(n, c)
    sup = np.full(n, c)
    diag = np.full(n, -2.0 * c)
    sub[0] = 0.0
    sup[-1] = 0.0
    sup[0] = 2.0 * c
    sub[-1] = 2.0 * c
    for a in (sub, diag, sup):
        a.flags.writeable = False
    return NeumannLaplacian(grid, sub, diag, sup)


def laplacian_apply(op: NeumannLaplacian, f: Field) -> Field:
    _check_same_grid(op.grid, f.grid)
    return Field(f.grid, op.apply(f.values))


def integrate(f: Field) -> float:
    """Trapezoid rule for the integral of f over (0, L)."""
    return float(np.dot(f.grid.weights, f.values))


def inner(f: Field, g: Field) -> float:
    """Discrete L2 inner product (trapezoid weights)."""
    _check_same_grid(f.grid, g.grid)
    return float(np.dot(f.grid.weights, f.values * g.values))


def norm(f: Field, kind: str = "L2") -> float:
    kind = kind.upper()
    v = f.values
    if kind == "L1":
        return float(np.dot(f.grid.weights, np.abs(v)))
    if kind == "L2":
        return float(np.sqrt(np.dot(f.grid.weights, v * v)))
    if kind in ("SUP", "LINF", "C"):
        return float(np.max(np.abs(v)))
    raise ValueError(f"unknown norm kind {kind!r}; expected L1, L2 or Sup")


def dirichlet_energy(f: Field, weight: Field | None = None) -> float:
    """Midpoint-rule value of the integral of |f'|^2 / w^2.

    ``weight=None`` means w = 1. The weight is averaged arithmetically onto
    cell edges and must be strictly positive.
    """
    h = f.grid.spacing
    grad = np.diff(f.values) / h
    if weight is None:
        return float(h * np.dot(grad, grad))
    _check_same_grid(f.grid, weight.grid)
    if np.any(weight.values <= 0):
        j = int(np.argmax(weight.values <= 0))
        raise DomainError(f"weight must be strictly positive (node {j} = {weight.values[j]!r})")
    w_mid = 0.5 * (weight.values[1:] + weight.values[:-1])
    return float(h * np.sum((grad / w_mid) ** 2))
