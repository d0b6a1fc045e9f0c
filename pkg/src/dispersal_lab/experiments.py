"""Scenario-level experiments on the competition system.

Exclusion of faster diffusers, decay of density ratios, closeness of the
aggregated flows for clustered diffusion rates, invasion signs at
semi-trivial equilibria, the three-equilibrium picture for two species, and
random sweeps of diffusion sets near a reference set.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field, fields
from typing import Sequence

import numpy as np

from .bundle import CoefficientPath, bundle_d_derivative
from .dynamics import (
    ModelParams,
    SpeciesState,
    Trajectory,
    aggregate,
    constant_state,
    equilibrium,
    integrate_to,
    solve_theta,
    validate_partition,
)
from .eigen import principal_eigenpair
from .grid import Field, Grid

__all__ = [
    "ExclusionReport",
    "ClosenessReport",
    "MorseReport",
    "exclusion_experiment",
    "ratio_series",
    "ratio_rate_bound",
    "closeness_experiment",
    "hausdorff_distance",
    "invasion_matrix",
    "dockery_morse_check",
    "random_diffusion_sets",
    "sweep",
]

DEFAULT_TOL = 1e-3


def _default_stride(T: float, dt: float, samples: int = 1000) -> int:
    return max(1, int(round(T / dt / samples)))


def _params_snapshot(p: ModelParams) -> dict:
    return {
        "L": p.grid.length,
        "n_nodes": p.grid.n_nodes,
        "diffusions": list(p.diffusions),
        "m_sup": p.m.max(),
        "m_inf": p.m.min(),
    }


@dataclass
class ExclusionReport:
    params: dict
    T: float
    dt: float
    tol: float
    final_distance: float
    slopes: list[float]
    aggregate_limsup: float
    theta1_sup: float
    mass_limsup: float
    mass_bound: float
    mass_bound_ok: bool
    clamp_count: int
    verdict: str
    trajectory: Trajectory | None = dc_field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "trajectory"}


def ratio_series(traj: Trajectory) -> np.ndarray:
    """log of sup_x(u_i/u_1) for i = 2..N at each sample, shape (samples, N-1)."""
    u = traj.values
    with np.errstate(divide="ignore"):
        ratios = (u[:, 1:, :] / u[:, :1, :]).max(axis=2)
        return np.log(ratios)


def _fit_slopes(times: np.ndarray, series: np.ndarray, fraction: float = 0.5) -> list[float]:
    start = int((1.0 - fraction) * (len(times) - 1))
    t = times[start:]
    y = series[start:]
    if len(t) < 2 or not np.all(np.isfinite(y)):
        return [float("nan")] * series.shape[1]
    return [float(s) for s in np.polyfit(t, y, 1)[0]]


def exclusion_experiment(
    p: ModelParams,
    u0: SpeciesState,
    T: float,
    dt: float,
    stride: int | None = None,
    tol: float = DEFAULT_TOL,
) -> ExclusionReport:
    """Run interior data to time T and test convergence to E_1.

    The verdict is "excluded" when the final sup distance to E_1 is below
    ``tol`` and every ratio slope is negative, "undecided" otherwise.
    """
    if np.any(u0.values <= 0):
        raise ValueError("initial data must be strictly positive (interior)")
    ds = p.diffusions
    if any(b <= a for a, b in zip(ds, ds[1:])):
        raise ValueError(f"diffusions must be strictly increasing, got {ds}")
    if stride is None:
        stride = _default_stride(T, dt)
    traj = integrate_to(u0, p, dt, T, stride)
    theta1 = solve_theta(ds[0], p.m).values
    e1 = np.zeros_like(u0.values)
    e1[0] = theta1

    final = traj.values[-1]
    final_distance = float(np.max(np.abs(final - e1)))
    slopes = _fit_slopes(traj.times, ratio_series(traj)) if p.n_species > 1 else []

    n = len(traj.times)
    quarter = traj.values[int(0.75 * (n - 1)):]
    aggregate_limsup = float(np.max(np.abs(quarter.sum(axis=1) - theta1)))
    mass = traj.mass[int(0.5 * (n - 1)):]
    mass_bound = 2.0 * p.grid.length * p.m.max()
    mass_limsup = float(mass.max())

    excluded = final_distance < tol and all(s < 0 for s in slopes)
    return ExclusionReport(
        params=_params_snapshot(p),
        T=float(T),
        dt=float(dt),
        tol=float(tol),
        final_distance=final_distance,
        slopes=slopes,
        aggregate_limsup=aggregate_limsup,
        theta1_sup=float(theta1.max()),
        mass_limsup=mass_limsup,
        mass_bound=mass_bound,
        mass_bound_ok=bool(mass_limsup < mass_bound),
        clamp_count=traj.clamp_count,
        verdict="excluded" if excluded else "undecided",
        trajectory=traj,
    )


def ratio_rate_bound(
    p: ModelParams,
    n_rates: int = 5,
    window: float = 1.0,
    dt: float = 1e-3,
) -> float:
    """Half the smallest measured d-derivative of H1 on h = m - theta_{d_1}.

    The derivative is sampled at ``n_rates`` diffusion values spanning
    [d_1, d_N] over a time window of length ``window``; the ratio u_i/u_1
    should then decay at least at rate (d_i - d_1) times the returned value.
    """
    h = p.m - solve_theta(p.diffusions[0], p.m)
    path = CoefficientPath.static(h)
    rates = np.linspace(p.diffusions[0], p.diffusions[-1], n_rates)
    smallest = min(float(bundle_d_derivative(d, path, 0.0, window, dt=dt).min()) for d in rates)
    return 0.5 * smallest


@dataclass
class ClosenessReport:
    epsilon: float
    T: float
    dt: float
    gap: float
    gap_half: float
    ratio: float
    hat_diffusions: list[float]
    diffusions: list[float]
    partition: list[list[int]]

    def to_dict(self) -> dict:
        return asdict(self)


def _aggregated_gap(p0, pe, u0, blocks, T, dt, stride):
    a = integrate_to(u0, p0, dt, T, stride)
    b = integrate_to(u0, pe, dt, T, stride)
    ga = np.stack([a.values[:, list(blk)].sum(axis=1) for blk in blocks], axis=1)
    gb = np.stack([b.values[:, list(blk)].sum(axis=1) for blk in blocks], axis=1)
    return float(np.max(np.abs(ga - gb)))


def closeness_experiment(
    hat_ds: Sequence[float],
    ds: Sequence[float],
    partition,
    u0: SpeciesState,
    T: float,
    dt: float,
    m: Field,
    stride: int = 10,
) -> ClosenessReport:
    """Sup-in-time gap between the aggregated clustered and perturbed flows.

    Both systems start from ``u0``. In the clustered system every species of
    block k diffuses at ``hat_ds[k]``; in the perturbed one species i diffuses
    at ``ds[i]``. The experiment is repeated with all perturbations halved.
    """
    blocks = validate_partition(partition, len(ds))
    if len(blocks) != len(hat_ds):
        raise ValueError(f"partition has {len(blocks)} blocks but {len(hat_ds)} clustered rates")
    base = np.empty(len(ds))
    for k, blk in enumerate(blocks):
        base[list(blk)] = hat_ds[k]
    ds = np.asarray(ds, float)
    eps = float(np.max(np.abs(ds - base)))
    half = base + 0.5 * (ds - base)

    p0 = ModelParams(m, tuple(base))
    gap = _aggregated_gap(p0, ModelParams(m, tuple(ds)), u0, blocks, T, dt, stride)
    gap_half = _aggregated_gap(p0, ModelParams(m, tuple(half)), u0, blocks, T, dt, stride)
    return ClosenessReport(
        epsilon=eps,
        T=float(T),
        dt=float(dt),
        gap=gap,
        gap_half=gap_half,
        ratio=gap_half / gap if gap > 0 else float("nan"),
        hat_diffusions=[float(v) for v in hat_ds],
        diffusions=[float(v) for v in ds],
        partition=[list(b) for b in blocks],
    )


def hausdorff_distance(A: Sequence[float], B: Sequence[float]) -> float:
    a = np.asarray(A, float).ravel()
    b = np.asarray(B, float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("Hausdorff distance needs non-empty sets")
    diff = np.abs(a[:, None] - b[None, :])
    return float(max(diff.min(axis=1).max(), diff.min(axis=0).max()))


def invasion_matrix(p: ModelParams) -> np.ndarray:
    """Entry (i, j) is the principal eigenvalue for rate d_i against h = m - theta_{d_j}.

    A negative entry means species i can invade the resident equilibrium of
    species j.
    """
    ds = p.diffusions
    thetas = [solve_theta(d, p.m) for d in ds]
    M = np.empty((len(ds), len(ds)))
    for j, th in enumerate(thetas):
        h = p.m - th
        for i, d in enumerate(ds):
            M[i, j] = principal_eigenpair(d, h).lam
    return M


@dataclass
class MorseReport:
    cases: dict
    tol: float
    T: float
    passed: bool

    @property
    def verdict(self) -> str:
        return "passed" if self.passed else "undecided"

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return asdict(self)


def dockery_morse_check(
    p: ModelParams,
    dt: float,
    T: float,
    tol: float = DEFAULT_TOL,
    interior: tuple[float, float] = (0.3, 0.3),
    kick: float = 1e-3,
) -> MorseReport:
    """Check the three-equilibrium ordering for two species.

    Interior data and data near E_2 must reach E_1, data on the face u_1 = 0
    must reach E_2, and zero data must stay at E_0, each within ``tol`` in
    sup norm at time T.
    """
    if p.n_species != 2:
        raise ValueError("the two-species check needs exactly two diffusion rates")
    g = p.grid
    e = {i: equilibrium(i, p).values for i in range(3)}
    near_e2 = e[2].copy()
    near_e2[0] += kick
    starts = {
        "interior": (constant_state(g, interior).values, 1),
        "face": (np.vstack([np.zeros(g.n_nodes), np.full(g.n_nodes, interior[1])]), 2),
        "zero": (np.zeros((2, g.n_nodes)), 0),
        "near_E2": (near_e2, 1),
    }
    stride = _default_stride(T, dt, 10)
    cases = {}
    for name, (u0, target) in starts.items():
        traj = integrate_to(SpeciesState(g, u0), p, dt, T, stride)
        dist = float(np.max(np.abs(traj.values[-1] - e[target])))
        cases[name] = {"target": f"E{target}", "distance": dist, "converged": dist < tol}
    return MorseReport(cases, float(tol), float(T), all(c["converged"] for c in cases.values()))


def random_diffusion_sets(
    around: Sequence[float],
    radius: float,
    count: int,
    sizes: Sequence[int] = (3, 4),
    seed: int = 42,
) -> list[tuple[float, ...]]:
    """Random sorted diffusion sets within Hausdorff distance ``radius`` of ``around``.

    Every anchor receives at least one member; set sizes cycle through ``sizes``.
    """
    anchors = np.asarray(sorted(around), float)
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        size = sizes[len(out) % len(sizes)]
        if size < len(anchors):
            raise ValueError("set size smaller than the number of anchors")
        owners = np.concatenate([np.arange(len(anchors)), rng.integers(0, len(anchors), size - len(anchors))])
        values = anchors[owners] + rng.uniform(-radius, radius, size) * 0.99
        values = np.sort(values)
        if np.any(values <= 0) or np.any(np.diff(values) < 1e-6):
            continue
        if hausdorff_distance(values, anchors) < radius:
            out.append(tuple(float(v) for v in values))
    return out


def _sweep_job(args):
    length, n_nodes, m_values, ds, level, T, dt, tol = args
    g = Grid(length, n_nodes)
    p = ModelParams(Field(g, m_values), ds)
    report = exclusion_experiment(p, constant_state(g, [level] * len(ds)), T, dt, tol=tol)
    report.trajectory = None
    return report


def sweep(
    m: Field,
    sets: Sequence[Sequence[float]],
    T: float,
    dt: float,
    level: float = 0.3,
    tol: float = DEFAULT_TOL,
    workers: int | None = None,
) -> list[ExclusionReport]:
    """Exclusion experiments for each diffusion set, on a process pool.

    Initial data are the constants ``level`` in every species.
    """
    workers = workers or os.cpu_count() or 1
    jobs = [
        (m.grid.length, m.grid.n_nodes, np.array(m.values), tuple(ds), level, T, dt, tol)
        for ds in sets
    ]
    if workers == 1:
        return [_sweep_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_sweep_job, jobs))
