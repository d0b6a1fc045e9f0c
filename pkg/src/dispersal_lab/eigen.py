"""Principal eigenpairs of -d*Lap - h with Neumann boundary conditions.

Sign convention: ``lam`` is the smallest eigenvalue, so that
d*Lap(psi) + h*psi + lam*psi = 0 with psi > 0. Eigenfunctions are normalized
to unit discrete L2 norm (trapezoid weights).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, SolverError
from .grid import Field, dirichlet_energy, integrate, neumann_laplacian, norm
from .tridiag import factor, solve

__all__ = [
    "PrincipalPair",
    "principal_eigenpair",
    "dense_spectrum",
    "eigen_identity_residual",
    "d_lambda_formula",
    "d_lambda_fd",
]


@dataclass(frozen=True, eq=False)
class PrincipalPair:
    """Principal eigenvalue ``lam`` and positive unit-norm eigenfunction ``psi``.

    ``residual`` is the sup norm of d*Lap(psi) + h*psi + lam*psi.
    """

    d: float
    lam: float
    psi: Field
    residual: float
    iterations: int


def _operator_diagonals(d: float, h: Field):
    lap = neumann_laplacian(h.grid)
    return -d * lap.sub, -d * lap.diag - h.values, -d * lap.sup


def _residual(d: float, h: Field, lam: float, psi: np.ndarray) -> float:
    lap = neumann_laplacian(h.grid)
    return float(np.max(np.abs(d * lap.apply(psi) + (h.values + lam) * psi)))


def principal_eigenpair(
    d: float,
    h: Field,
    *,
    tol: float = 1e-12,
    vector_tol: float = 1e-11,
    max_iter: int = 10_000,
) -> PrincipalPair:
    """Inverse power iteration on A - sigma*I with sigma = -(sup h) - 1.

    The eigenvalue estimate at each step is sigma + 1/<x, (A - sigma)^-1 x>
    for the current unit vector x. Iteration stops once successive estimates
    differ by less than ``tol`` and the iterate moves by less than
    ``vector_tol`` in sup norm.
    """
    if not d > 0:
        raise ValueError(f"diffusion rate must be positive, got {d!r}")
    g = h.grid
    w = g.weights
    sigma = -h.max() - 1.0
    sub, diag, sup = _operator_diagonals(d, h)
    fac = factor(sub, diag - sigma, sup)

    x = np.ones(g.n_nodes) / np.sqrt(g.length)
    prev = None
    for it in range(1, max_iter + 1):
        y = solve(fac, x)
        est = sigma + 1.0 / np.dot(w, x * y)
        y /= np.sqrt(np.dot(w, y * y))
        change = np.max(np.abs(y - x))
        x = y
        if prev is not None and abs(est - prev) < tol and change < vector_tol:
            break
        prev = est
    else:
        raise SolverError(
            f"inverse iteration did not converge in {max_iter} iterations",
            residual=_residual(d, h, est, x),
        )

    if x.sum() < 0:
        x = -x
    if np.any(x <= 0):
        raise SolverError("principal eigenvector changes sign", residual=_residual(d, h, est, x))
    return PrincipalPair(
        d=float(d),
        lam=float(est),
        psi=Field(g, x),
        residual=_residual(d, h, est, x),
        iterations=it,
    )


def dense_spectrum(d: float, h: Field, vectors: bool = False):
    """Full spectrum of the same discrete operator via a dense symmetric solve.

    The ghost-node Laplacian is self-adjoint in the trapezoid inner product,
    so W^(1/2) A W^(-1/2) is symmetric. Eigenvectors, when requested, are
    mapped back and normalized to unit discrete L2 norm.
    """
    g = h.grid
    sub, diag, sup = _operator_diagonals(d, h)
    A = np.diag(diag) + np.diag(sub[1:], -1) + np.diag(sup[:-1], 1)
    s = np.sqrt(g.weights)
    S = s[:, None] * A / s[None, :]
    S = 0.5 * (S + S.T)
    if not vectors:
        return scipy.linalg.eigh(S, eigvals_only=True)
    vals, V = scipy.linalg.eigh(S)
    V = V / s[:, None]
    V /= np.sqrt(g.weights @ V**2)
    return vals, V


def eigen_identity_residual(d: float, m: Field, pair: PrincipalPair) -> float:
    """|d * int |psi'|^2/psi^2 + int m + lam*L| for the pair of (d, m).

    Dividing the eigen-equation by psi and integrating by parts makes this
    vanish in the continuum; on the grid it is O(h^2).
    """
    psi = pair.psi
    if np.any(psi.values <= 0):
        raise DomainError("eigenfunction must be strictly positive")
    return abs(d * dirichlet_energy(psi, psi) + integrate(m) + pair.lam * m.grid.length)


def d_lambda_formula(pair: PrincipalPair) -> float:
    """Derivative of the principal eigenvalue in d: int |psi'|^2 / int psi^2."""
    return dirichlet_energy(pair.psi) / norm(pair.psi, "L2") ** 2


def d_lambda_fd(d: float, h: Field, delta: float | None = None) -> float:
    """Central difference of the principal eigenvalue in d."""
    if delta is None:
        delta = 1e-4 * d
    if not delta > 0 or not d - delta > 0:
        raise ValueError(f"need 0 < delta < d, got d={d!r}, delta={delta!r}")
    hi = principal_eigenpair(d + delta, h).lam
    lo = principal_eigenpair(d - delta, h).lam
    return (hi - lo) / (2.0 * delta)
