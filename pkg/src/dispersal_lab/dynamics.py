"""Time integration of the N-species diffusive competition system.

    du_i/dt = d_i * Lap(u_i) + u_i * (m(x) - sum_j u_j),   Neumann boundary,

stepped with first-order IMEX Euler: diffusion implicit (one tridiagonal solve
per species), reaction explicit. Also the single-species steady state theta_d,
the semi-trivial equilibria E_i and the blockwise aggregation map.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Sequence

import numpy as np
from numba import njit

from .errors import BlowUpError, DegenerateSteadyStateError, SolverError
from .grid import Field, Grid, integrate, neumann_laplacian
from .tridiag import _factor, _solve_into, factor, solve

__all__ = [
    "ModelParams",
    "SpeciesState",
    "Trajectory",
    "dt_max",
    "step_imex",
    "integrate_to",
    "solve_theta",
    "equilibrium",
    "aggregate",
    "validate_partition",
    "constant_state",
]

log = logging.getLogger(__name__)


def validate_partition(partition, n_species: int) -> tuple[tuple[int, ...], ...]:
    """Check that ``partition`` (0-based index blocks) is a disjoint cover."""
    blocks = tuple(tuple(int(i) for i in block) for block in partition)
    if any(len(b) == 0 for b in blocks):
        raise ValueError("partition blocks must be non-empty")
    flat = [i for b in blocks for i in b]
    if sorted(flat) != list(range(n_species)):
        raise ValueError(
            f"partition {blocks} is not a disjoint cover of species 0..{n_species - 1}"
        )
    return blocks


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Resource profile m, diffusion rates and optional species partition.

    Diffusion rates must be positive and sorted non-decreasing; equal values
    are allowed. Partition blocks use 0-based species indices.
    """

    m: Field
    diffusions: tuple[float, ...]
    partition: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self) -> None:
        ds = tuple(float(d) for d in self.diffusions)
        if len(ds) == 0:
            raise ValueError("diffusions: need at least one species")
        if any(not d > 0 for d in ds):
            raise ValueError(f"diffusions: all rates must be positive, got {ds}")
        if any(b < a for a, b in zip(ds, ds[1:])):
            raise ValueError(f"diffusions: must be sorted non-decreasing, got {ds}")
        object.__setattr__(self, "diffusions", ds)
        if self.partition is not None:
            object.__setattr__(self, "partition", validate_partition(self.partition, len(ds)))
        if integrate(self.m) < -1e-12:
            warnings.warn("integral of m is negative", stacklevel=2)
        if not self.m.max() - self.m.min() > 0:
            warnings.warn("m is constant", stacklevel=2)

    @property
    def grid(self) -> Grid:
        return self.m.grid

    @property
    def n_species(self) -> int:
        return len(self.diffusions)

    def with_diffusions(self, diffusions, partition=None) -> "ModelParams":
        return ModelParams(self.m, tuple(diffusions), partition)


@dataclass(frozen=True, eq=False)
class SpeciesState:
    """Densities of N species on one grid, stored as an (N, n_nodes) array."""

    grid: Grid
    values: np.ndarray = dc_field(repr=False)
    time: float = 0.0

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float, ndmin=2)
        if v.ndim != 2 or v.shape[1] != self.grid.n_nodes:
            raise ValueError(f"state shape {v.shape} does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("state values must be finite")
        if np.any(v < 0):
            raise ValueError("state values must be non-negative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def from_fields(cls, fields: Sequence[Field], time: float = 0.0) -> "SpeciesState":
        grid = fields[0].grid
        if any(f.grid != grid for f in fields):
            raise ValueError("all fields must share one grid")
        return cls(grid, np.stack([f.values for f in fields]), time)

    @property
    def n_species(self) -> int:
        return self.values.shape[0]

    @property
    def fields(self) -> list[Field]:
        return [Field(self.grid, row) for row in self.values]

    def total(self) -> np.ndarray:
        return self.values.sum(axis=0)

    def mass(self) -> float:
        """Sum over species of the L1 norms."""
        return float(self.grid.weights @ self.total())


def constant_state(grid: Grid, levels: Sequence[float], time: float = 0.0) -> SpeciesState:
    return SpeciesState(grid, np.outer(np.asarray(levels, float), np.ones(grid.n_nodes)), time)


def dt_max(p: ModelParams) -> float:
    """Largest step for which the explicit logistic term stays monotone in practice."""
    sup_m = p.m.max()
    return 0.25 / (np.max(np.abs(p.m.values)) + 2.0 * max(sup_m, 0.0))


@njit(cache=True)
def _imex_steps(u, m, sub, cp, inv_den, dt, nsteps, rhs, tot):
    n_species, n = u.shape
    clamped = 0
    for _ in range(nsteps):
        for j in range(n):
            s = 0.0
            for i in range(n_species):
                s += u[i, j]
            tot[j] = s
        for i in range(n_species):
            for j in range(n):
                rhs[j] = u[i, j] + dt * u[i, j] * (m[j] - tot[j])
            _solve_into(sub[i], cp[i], inv_den[i], rhs, u[i])
            for j in range(n):
                if u[i, j] < 0.0:
                    u[i, j] = 0.0
                    clamped += 1
    return clamped


class _Stepper:
    """Factorized implicit-diffusion matrices for a fixed (params, dt)."""

    def __init__(self, p: ModelParams, dt: float):
        lap = neumann_laplacian(p.grid)
        n = p.grid.n_nodes
        k = p.n_species
        self.sub = np.empty((k, n))
        self.cp = np.empty((k, n))
        self.inv_den = np.empty((k, n))
        for i, d in enumerate(p.diffusions):
            a = -dt * d * lap.sub
            b = 1.0 - dt * d * lap.diag
            c = -dt * d * lap.sup
            self.sub[i] = a
            if _factor(a, b, c, self.cp[i], self.inv_den[i]) >= 0:
                raise SolverError("singular implicit diffusion matrix")
        self.m = np.ascontiguousarray(p.m.values)
        self.dt = float(dt)
        self.rhs = np.empty(n)
        self.tot = np.empty(n)

    def advance(self, u: np.ndarray, nsteps: int) -> int:
        return _imex_steps(
            u, self.m, self.sub, self.cp, self.inv_den, self.dt, nsteps, self.rhs, self.tot
        )


def step_imex(state: SpeciesState, p: ModelParams, dt: float) -> SpeciesState:
    """One IMEX Euler step followed by clamping negative values to zero."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if state.grid != p.grid or state.n_species != p.n_species:
        raise ValueError("state does not match model parameters")
    u = np.array(state.values)
    _Stepper(p, dt).advance(u, 1)
    if not np.all(np.isfinite(u)):
        raise BlowUpError("non-finite state", state.time + dt)
    return SpeciesState(state.grid, u, state.time + dt)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States sampled every ``stride`` steps, plus the final state.

    ``values`` has shape (samples, N, n_nodes). ``mass`` is the total L1 mass
    and ``sup`` the per-species sup norms at each sample.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray = dc_field(repr=False)
    dt: float = 0.0
    clamp_count: int = 0

    @property
    def mass(self) -> np.ndarray:
        return self.values.sum(axis=1) @ self.grid.weights

    @property
    def sup(self) -> np.ndarray:
        return self.values.max(axis=2)

    @property
    def final(self) -> SpeciesState:
        return self.state(-1)

    def state(self, k: int) -> SpeciesState:
        return SpeciesState(self.grid, self.values[k], self.times[k])

    def __len__(self) -> int:
        return len(self.times)

    def to_csv(self, path) -> None:
        """Write time, per-species sup norms and total L1 mass."""
        sup = self.sup
        mass = self.mass
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + [f"sup_u{i + 1}" for i in range(sup.shape[1])] + ["l1_mass"])
            for k, t in enumerate(self.times):
                w.writerow([f"{v:.17g}" for v in (t, *sup[k], mass[k])])


def _step_count(T: float, dt: float) -> int:
    nsteps = int(round(T / dt))
    if nsteps < 1 or abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T={T!r} is not an integer multiple of dt={dt!r}")
    return nsteps


def integrate_to(
    state: SpeciesState,
    p: ModelParams,
    dt: float,
    T: float,
    stride: int = 100,
) -> Trajectory:
    """Advance ``state`` by time ``T`` in steps of ``dt``.

    The initial state, every ``stride``-th state and the final state are
    recorded. Raises BlowUpError with the time of the first sample found to
    be non-finite.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T!r}")
    if not 0 < dt <= dt_max(p) * (1 + 1e-12):
        raise ValueError(f"dt={dt!r} must lie in (0, dt_max={dt_max(p):.6g}]")
    if state.grid != p.grid or state.n_species != p.n_species:
        raise ValueError("state does not match model parameters")
    stride = max(1, int(stride))
    nsteps = _step_count(T, dt)
    stepper = _Stepper(p, dt)
    u = np.array(state.values)

    times = [state.time]
    samples = [u.copy()]
    clamped = 0
    done = 0
    while done < nsteps:
        k = min(stride, nsteps - done)
        clamped += stepper.advance(u, k)
        done += k
        t = state.time + done * dt
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"solution blew up by t={t:.6g}", t)
        times.append(t)
        samples.append(u.copy())
    if clamped:
        log.debug("clamped %d negative node values", clamped)
    return Trajectory(p.grid, np.array(times), np.array(samples), float(dt), clamped)


def _newton_theta(d: float, m: Field, theta: np.ndarray, tol: float, max_iter: int = 50):
    lap = neumann_laplacian(m.grid)
    mv = m.values
    for _ in range(max_iter):
        F = d * lap.apply(theta) + theta * (mv - theta)
        res = np.max(np.abs(F))
        if res < tol:
            return theta, res
        fac = factor(d * lap.sub, d * lap.diag + mv - 2.0 * theta, d * lap.sup)
        step = solve(fac, -F)
        theta = theta + step
        if not np.all(np.isfinite(theta)):
            raise SolverError("Newton iteration diverged", residual=res)
        # residual floor set by rounding in d/h^2-scaled differences
        if np.max(np.abs(step)) < 1e-14 * max(1.0, np.max(np.abs(theta))):
            F = d * lap.apply(theta) + theta * (mv - theta)
            return theta, np.max(np.abs(F))
    raise SolverError("Newton iteration did not converge", residual=res)


@lru_cache(maxsize=256)
def _theta_cached(d: float, grid: Grid, m_bytes: bytes) -> np.ndarray:
    m = Field(grid, np.frombuffer(m_bytes))
    p = ModelParams(m, (d,))
    dt = dt_max(p)
    u0 = 0.5 * max(m.max(), 1.0)
    u = np.full((1, grid.n_nodes), u0)
    stepper = _Stepper(p, dt)
    per_unit = max(1, int(round(1.0 / dt)))
    for _ in range(20_000):
        prev = u.copy()
        stepper.advance(u, per_unit)
        if np.max(np.abs(u - prev)) < 1e-10:
            break
    else:
        log.warning("theta time-marching for d=%g did not settle; continuing with Newton", d)
    theta, res = _newton_theta(d, m, u[0].copy(), tol=1e-12)
    if np.max(theta) < 1e-8 or np.any(theta <= 0):
        raise DegenerateSteadyStateError(
            f"steady state for d={d!r} is zero or changes sign", residual=res
        )
    theta.flags.writeable = False
    return theta


def solve_theta(d: float, m: Field) -> Field:
    """Positive steady state of d*Lap(u) + u*(m - u) = 0 with Neumann conditions.

    Time-marching from a positive constant supplies the basin, Newton on the
    tridiagonal Jacobian polishes the residual down to rounding level.
    """
    if not d > 0:
        raise ValueError(f"diffusion rate must be positive, got {d!r}")
    if integrate(m) < 0 or not m.max() - m.min() > 0:
        warnings.warn("solve_theta expects a non-constant m with non-negative integral", stacklevel=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values = _theta_cached(float(d), m.grid, m.values.tobytes())
    return Field(m.grid, values)


def equilibrium(i: int, p: ModelParams) -> SpeciesState:
    """E_0 = 0 and E_i = theta_{d_i} in slot i (1-based), zero elsewhere."""
    if not 0 <= i <= p.n_species:
        raise IndexError(f"equilibrium index {i} out of range 0..{p.n_species}")
    u = np.zeros((p.n_species, p.grid.n_nodes))
    if i > 0:
        u[i - 1] = solve_theta(p.diffusions[i - 1], p.m).values
    return SpeciesState(p.grid, u)


def aggregate(state: SpeciesState, partition) -> SpeciesState:
    """Blockwise sums U_k = sum of u_i over block k."""
    blocks = validate_partition(partition, state.n_species)
    U = np.stack([state.values[list(b)].sum(axis=0) for b in blocks])
    return SpeciesState(state.grid, U, state.time)
