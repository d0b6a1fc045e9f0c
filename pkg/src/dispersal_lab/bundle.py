"""Normalized principal bundles of dt(psi) = d*Lap(psi) + h(x, t)*psi.

The bundle (psi1(., t), H1(t)) is the unique entire positive solution of the
linear problem, rescaled to unit L2 norm at every time, together with the
growth rate removed by the rescaling. It is approximated by forward
integration from a positive constant: the transient is forgotten at the rate
of exponential separation, so a spin-up of a few dozen spectral-gap times
leaves only rounding error.

Each step is linearly implicit,

    (I - dt*d*Lap - dt*diag(h(t_{n+1}))) phi_{n+1} = psi_n,

and H1(t_{n+1}) = (1/rho - 1)/dt with rho = ||phi_{n+1}||. For
time-independent h this reproduces the discrete principal eigenpair exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import SolverError
from .expr import Expr, evaluate, parse
from .grid import Field, Grid, dirichlet_energy, neumann_laplacian
from .tridiag import factor, solve

__all__ = [
    "CoefficientPath",
    "BundleTrajectory",
    "compute_bundle",
    "default_spinup",
    "project_off_bundle",
    "separation_rate",
    "bundle_d_derivative",
    "bundle_quotient_gap",
]


class CoefficientPath:
    """A coefficient h(x, t) on a fixed grid, evaluable on a time span.

    Use one of the constructors: :meth:`static`, :meth:`from_expr`,
    :meth:`from_function` or :meth:`from_trajectory`.
    """

    def __init__(
        self,
        grid: Grid,
        func: Callable[[float], np.ndarray],
        span: tuple[float, float] = (-math.inf, math.inf),
        static: bool = False,
        label: str = "",
    ):
        self.grid = grid
        self._func = func
        self.span = (float(span[0]), float(span[1]))
        self.is_static = static
        self.label = label

    def __call__(self, t: float) -> np.ndarray:
        if not self.span[0] - 1e-12 <= t <= self.span[1] + 1e-12:
            raise ValueError(f"t={t!r} outside coefficient span {self.span}")
        values = self._func(t)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"coefficient is not finite at t={t!r}")
        return values

    def field(self, t: float) -> Field:
        return Field(self.grid, self(t))

    def __repr__(self) -> str:
        return f"CoefficientPath({self.label or 'custom'}, span={self.span})"

    @classmethod
    def static(cls, h: Field) -> "CoefficientPath":
        values = np.array(h.values)
        values.flags.writeable = False
        return cls(h.grid, lambda t: values, static=True, label="static")

    @classmethod
    def from_expr(cls, expr: Expr | str, grid: Grid) -> "CoefficientPath":
        e = parse(expr) if isinstance(expr, (str, bytes)) else expr
        x = grid.nodes
        return cls(grid, lambda t: evaluate(e, x, t), label="expr")

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[float], np.ndarray]) -> "CoefficientPath":
        x = grid.nodes
        return cls(grid, lambda t: np.broadcast_to(np.asarray(func(x, t), float), x.shape), label="function")

    @classmethod
    def from_trajectory(cls, traj, m: Field) -> "CoefficientPath":
        """h = m - sum_j u_j along a recorded trajectory.

        Linear interpolation between samples; for times before the first
        sample the path is extended evenly about it.
        """
        times = np.asarray(traj.times, float)
        h = m.values[None, :] - traj.values.sum(axis=1)
        t_start, t_end = times[0], times[-1]

        def func(t):
            if t < t_start:
                t = 2.0 * t_start - t
            k = int(np.searchsorted(times, t, side="right")) - 1
            k = min(max(k, 0), len(times) - 2)
            s = (t - times[k]) / (times[k + 1] - times[k])
            s = min(max(s, 0.0), 1.0)
            return (1.0 - s) * h[k] + s * h[k + 1]

        return cls(m.grid, func, span=(2.0 * t_start - t_end, t_end), label="trajectory")


@dataclass(frozen=True, eq=False)
class BundleTrajectory:
    """Recorded bundle: ``psi`` has shape (samples, n_nodes), ``H`` (samples,)."""

    d: float
    grid: Grid
    times: np.ndarray
    psi: np.ndarray = dc_field(repr=False)
    H: np.ndarray = dc_field(repr=False)
    spinup: float = 0.0
    dt: float = 0.0

    @property
    def harnack(self) -> float:
        """Largest ratio sup(psi1)/inf(psi1) over the recorded times."""
        return float(np.max(self.psi.max(axis=1) / self.psi.min(axis=1)))

    @property
    def normalization_error(self) -> float:
        return float(np.max(np.abs(np.sqrt(self.psi**2 @ self.grid.weights) - 1.0)))

    def psi_field(self, k: int) -> Field:
        return Field(self.grid, self.psi[k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "H1", "sup_psi1", "inf_psi1"])
            for t, H, hi, lo in zip(self.times, self.H, self.psi.max(axis=1), self.psi.min(axis=1)):
                w.writerow([f"{v:.17g}" for v in (t, H, hi, lo)])


def _spectral_gap(d: float, h: np.ndarray, grid: Grid) -> float:
    lap = neumann_laplacian(grid)
    diag = -d * lap.diag - h
    off = -d * np.sqrt(lap.sup[:-1] * lap.sub[1:])
    vals = scipy.linalg.eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 1))
    return float(vals[1] - vals[0])


def default_spinup(d: float, path: CoefficientPath, t: float) -> float:
    """50 relaxation times of the frozen profile h(., t)."""
    return 50.0 / _spectral_gap(d, path(t), path.grid)


def _steps(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(abs(T), 1.0):
        raise ValueError(f"{T!r} is not an integer multiple of dt={dt!r}")
    return n


def _bundle_steps(d, path, t_start, nsteps, dt):
    """Yield (t, psi, H, sub, diag, sup) after each implicit step."""
    g = path.grid
    lap = neumann_laplacian(g)
    w = g.weights
    sub = -dt * d * lap.sub
    sup = -dt * d * lap.sup
    diag0 = 1.0 - dt * d * lap.diag
    psi = np.full(g.n_nodes, 1.0 / np.sqrt(g.length))
    fac = None
    for k in range(1, nsteps + 1):
        t = t_start + k * dt
        if fac is None or not path.is_static:
            h = path(t)
            if dt * np.max(h) >= 1.0:
                raise ValueError("dt * sup h must be below 1 for the implicit bundle step")
            diag = diag0 - dt * h
            fac = factor(sub, diag, sup)
        phi = solve(fac, psi)
        if not np.all(phi > 0):
            raise SolverError(f"bundle iterate lost positivity at t={t:.6g}")
        rho = math.sqrt(float(w @ (phi * phi)))
        psi = phi / rho
        yield t, psi, (1.0 / rho - 1.0) / dt, sub, diag, sup


def compute_bundle(
    d: float,
    path: CoefficientPath,
    t0: float,
    t1: float,
    spinup: float | None = None,
    dt: float = 1e-3,
    stride: int = 1,
) -> BundleTrajectory:
    """Approximate the normalized principal bundle on [t0, t1].

    Integration starts at t0 - spinup from the constant unit-norm field.
    ``spinup=None`` uses :func:`default_spinup` at t0. At least one step of
    spin-up is always taken so that H1(t0) is defined.
    """
    if not d > 0 or not dt > 0 or not t1 >= t0:
        raise ValueError("need d > 0, dt > 0 and t1 >= t0")
    if spinup is None:
        spinup = default_spinup(d, path, t0)
    if spinup < 0:
        raise ValueError("spinup must be non-negative")
    n_spin = max(1, int(math.ceil(spinup / dt - 1e-9)))
    n_win = _steps(t1 - t0, dt)
    t_start = t0 - n_spin * dt
    stride = max(1, int(stride))

    times, psis, Hs = [], [], []
    for k, (t, psi, H, *_) in enumerate(_bundle_steps(d, path, t_start, n_spin + n_win, dt), 1):
        j = k - n_spin
        if j >= 0 and (j % stride == 0 or j == n_win):
            times.append(t0 + j * dt)
            psis.append(psi.copy())
            Hs.append(H)
    return BundleTrajectory(
        d=float(d),
        grid=path.grid,
        times=np.array(times),
        psi=np.array(psis),
        H=np.array(Hs),
        spinup=n_spin * dt,
        dt=float(dt),
    )


def project_off_bundle(w: Field, psi1: Field) -> Field:
    """Remove the component of ``w`` along the unit vector ``psi1``."""
    weights = w.grid.weights
    c = float(weights @ (w.values * psi1.values))
    return Field(w.grid, w.values - c * psi1.values)


def separation_rate(
    d: float,
    path: CoefficientPath,
    t0: float,
    t1: float,
    dt: float = 1e-3,
    trials: int = 3,
    seed: int = 42,
    spinup: float | None = None,
    fit_fraction: float = 0.5,
) -> float:
    """Estimate the exponential-separation rate gamma on [t0, t1].

    Random data orthogonal to psi1(t0) are evolved by the normalized equation
    dt(w) = d*Lap(w) + h*w + H1*w and projected off psi1(t) after every step.
    gamma is minus the least-squares slope of log||w|| over the final
    ``fit_fraction`` of the window, minimized over trials.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if spinup is None:
        spinup = default_spinup(d, path, t0)
    n_spin = max(1, int(math.ceil(spinup / dt - 1e-9)))
    n_win = _steps(t1 - t0, dt)
    if n_win < 4:
        raise ValueError("window too short for a slope fit")
    g = path.grid
    weights = g.weights
    rng = np.random.default_rng(seed)

    W = None
    logs = np.zeros((n_win + 1, trials))
    alive = n_win + 1
    for k, (t, psi, H, sub, diag, sup) in enumerate(
        _bundle_steps(d, path, t0 - n_spin * dt, n_spin + n_win, dt), 1
    ):
        j = k - n_spin
        if j < 0:
            continue
        if j == 0:
            W = rng.standard_normal((trials, g.n_nodes))
        else:
            fac = factor(sub, diag - dt * H, sup)
            W = np.stack([solve(fac, row) for row in W])
        W -= np.outer(W @ (weights * psi), psi)
        norms = np.sqrt((W * W) @ weights)
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            alive = j
            break
        logs[j] = (logs[j - 1] if j > 0 else 0.0) + (np.log(norms) if j > 0 else 0.0)
        W /= norms[:, None]

    start = int((1.0 - fit_fraction) * (alive - 1))
    if alive - start < 3:
        raise SolverError("perturbation vanished before the fit window")
    ts = t0 + dt * np.arange(start, alive)
    slopes = np.polyfit(ts, logs[start:alive], 1)[0]
    return float(-np.max(slopes))


def bundle_d_derivative(
    d: float,
    path: CoefficientPath,
    t0: float,
    t1: float,
    delta: float | None = None,
    spinup: float | None = None,
    dt: float = 1e-3,
    stride: int = 1,
) -> np.ndarray:
    """Central difference in d of H1(t) on the recorded times of [t0, t1]."""
    if delta is None:
        delta = 1e-3 * d
    if not 0 < delta < d:
        raise ValueError(f"need 0 < delta < d, got d={d!r}, delta={delta!r}")
    if spinup is None:
        spinup = default_spinup(d - delta, path, t0)
    hi = compute_bundle(d + delta, path, t0, t1, spinup, dt, stride)
    lo = compute_bundle(d - delta, path, t0, t1, spinup, dt, stride)
    return (hi.H - lo.H) / (2.0 * delta)


def bundle_quotient_gap(bt: BundleTrajectory, path: CoefficientPath) -> float:
    """Max over samples of |H1 - (d*int|psi1'|^2 - int h*psi1^2)|.

    Testing the bundle equation against psi1 gives the quotient form of H1;
    the implicit stepper satisfies it up to O(dt).
    """
    w = bt.grid.weights
    gaps = []
    for t, psi, H in zip(bt.times, bt.psi, bt.H):
        q = bt.d * dirichlet_energy(Field(bt.grid, psi)) - float(w @ (path(t) * psi * psi))
        gaps.append(abs(H - q))
    return float(max(gaps))
