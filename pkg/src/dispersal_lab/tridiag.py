"""Thomas algorithm for tridiagonal systems.

Matrices are given as three length-n arrays ``sub``, ``diag``, ``sup`` with
row j reading ``sub[j]*x[j-1] + diag[j]*x[j] + sup[j]*x[j+1]``; ``sub[0]`` and
``sup[-1]`` are ignored. Factorizations are reused across many right-hand
sides, which is the common case for constant-coefficient implicit steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = ["TridiagonalFactor", "factor", "solve", "thomas"]


@njit(cache=True)
def _factor(sub, diag, sup, cp, inv_den):
    n = diag.shape[0]
    den = diag[0]
    if den == 0.0:
        return 0
    inv_den[0] = 1.0 / den
    cp[0] = sup[0] * inv_den[0]
    for j in range(1, n):
        den = diag[j] - sub[j] * cp[j - 1]
        if den == 0.0:
            return j
        inv_den[j] = 1.0 / den
        cp[j] = sup[j] * inv_den[j] if j < n - 1 else 0.0
    return -1


@njit(cache=True)
def _solve_into(sub, cp, inv_den, rhs, out):
    n = rhs.shape[0]
    out[0] = rhs[0] * inv_den[0]
    for j in range(1, n):
        out[j] = (rhs[j] - sub[j] * out[j - 1]) * inv_den[j]
    for j in range(n - 2, -1, -1):
        out[j] -= cp[j] * out[j + 1]


@dataclass(frozen=True, eq=False)
class TridiagonalFactor:
    """Forward-elimination data: subdiagonal, modified superdiagonal, pivots."""

    sub: np.ndarray
    cp: np.ndarray
    inv_den: np.ndarray


def factor(sub, diag, sup) -> TridiagonalFactor:
    sub = np.ascontiguousarray(sub, dtype=float)
    diag = np.ascontiguousarray(diag, dtype=float)
    sup = np.ascontiguousarray(sup, dtype=float)
    if not (sub.shape == diag.shape == sup.shape) or diag.ndim != 1:
        raise ValueError("sub, diag and sup must be 1-D arrays of equal length")
    n = diag.shape[0]
    cp = np.empty(n)
    inv_den = np.empty(n)
    bad = _factor(sub, diag, sup, cp, inv_den)
    if bad >= 0:
        raise ZeroDivisionError(f"zero pivot in tridiagonal elimination at row {bad}")
    return TridiagonalFactor(sub, cp, inv_den)


def solve(fac: TridiagonalFactor, rhs) -> np.ndarray:
    rhs = np.ascontiguousarray(rhs, dtype=float)
    if rhs.shape != fac.cp.shape:
        raise ValueError(f"rhs has shape {rhs.shape}, expected {fac.cp.shape}")
    out = np.empty_like(rhs)
    _solve_into(fac.sub, fac.cp, fac.inv_den, rhs, out)
    return out


def thomas(sub, diag, sup, rhs) -> np.ndarray:
    """One-shot solve without keeping the factorization."""
    return solve(factor(sub, diag, sup), rhs)
