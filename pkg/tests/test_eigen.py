import numpy as np
import pytest

from dispersal_lab.dynamics import solve_theta
from dispersal_lab.eigen import (
    d_lambda_fd,
    d_lambda_formula,
    dense_spectrum,
    eigen_identity_residual,
    principal_eigenpair,
)
from dispersal_lab.errors import DomainError
from dispersal_lab.grid import Field, build_grid, norm

from conftest import m_profile


def test_zero_potential(grid201):
    pair = principal_eigenpair(0.7, grid201.constant(0.0))
    assert abs(pair.lam) < 1e-12
    np.testing.assert_allclose(pair.psi.values, 1.0 / np.sqrt(grid201.length), rtol=1e-12)


@pytest.mark.parametrize("c", [-2.0, 0.3, 5.0])
def test_constant_potential_shifts(c):
    g = build_grid(2.0, 101)
    pair = principal_eigenpair(0.3, g.constant(c))
    assert pair.lam == pytest.approx(-c, abs=1e-12)
    np.testing.assert_allclose(pair.psi.values, 1 / np.sqrt(2.0), rtol=1e-12)


def test_pair_invariants(m401):
    pair = principal_eigenpair(0.5, m401)
    assert np.all(pair.psi.values > 0)
    assert norm(pair.psi, "L2") == pytest.approx(1.0, abs=1e-12)
    assert pair.residual < 1e-8


def test_invader_against_slower_resident_has_negative_eigenvalue(grid401, m401):
    # d = 0.1 is slower than the resident's 0.3
    h = m401 - solve_theta(0.3, m401)
    lam = principal_eigenpair(0.1, h).lam
    assert lam < 0
    # value frozen from the dense full-spectrum oracle on the same grid
    assert lam == pytest.approx(-0.043015721673147836, abs=1e-10)
    assert lam == pytest.approx(dense_spectrum(0.1, h)[0], abs=1e-10)


@pytest.mark.parametrize(
    "d, h_of",
    [
        (0.1, lambda g: g.field(1 + 0.5 * np.cos(np.pi * g.nodes))),
        (0.5, lambda g: g.field(np.sin(3 * g.nodes) - 0.2)),
        (1.0, lambda g: g.field(np.exp(-((g.nodes - 0.3) ** 2) * 20))),
        (0.05, lambda g: g.field(np.abs(g.nodes - 0.6))),
    ],
)
def test_matches_dense_oracle(grid201, d, h_of):
    h = h_of(grid201)
    assert principal_eigenpair(d, h).lam == pytest.approx(dense_spectrum(d, h)[0], abs=1e-10)


def test_dense_eigenvector_agrees(grid201, m201):
    vals, V = dense_spectrum(0.5, m201, vectors=True)
    psi = V[:, 0] * np.sign(V[0, 0])
    pair = principal_eigenpair(0.5, m201)
    np.testing.assert_allclose(pair.psi.values, psi, atol=1e-9)


def test_monotone_in_d(m401):
    lams = [principal_eigenpair(d, m401).lam for d in (0.1, 0.2, 0.4, 0.8, 1.6)]
    assert np.all(np.diff(lams) > 0)


@pytest.mark.parametrize("c", [-1.0, 0.25, 3.0])
def test_shift_covariance(m201, c):
    a = principal_eigenpair(0.4, m201).lam
    b = principal_eigenpair(0.4, m201 + c).lam
    assert b == pytest.approx(a - c, abs=1e-10)


@pytest.mark.parametrize("d", [0.1, 0.3, 0.5, 1.0])
def test_zero_is_the_eigenvalue_at_the_steady_state(grid401, m401, d):
    h = m401 - solve_theta(d, m401)
    assert abs(principal_eigenpair(d, h).lam) < 10 * grid401.spacing**2


def test_identity_residual_constant_m(grid201):
    m = grid201.constant(0.7)
    assert eigen_identity_residual(0.5, m, principal_eigenpair(0.5, m)) < 1e-8


@pytest.mark.parametrize("d", [0.1, 0.5, 1.0])
def test_identity_residual_is_second_order(d):
    res = []
    for n in (201, 401, 801):
        g = build_grid(1.0, n)
        m = m_profile(g)
        r = eigen_identity_residual(d, m, principal_eigenpair(d, m))
        assert r < 10 * g.spacing**2
        res.append(r)
    ratios = np.array(res[:-1]) / np.array(res[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.1)


def test_identity_residual_needs_positive_psi(m201, grid201):
    pair = principal_eigenpair(0.5, m201)
    bad = type(pair)(pair.d, pair.lam, Field(grid201, -pair.psi.values), pair.residual, 0)
    with pytest.raises(DomainError):
        eigen_identity_residual(0.5, m201, bad)


def test_identity_residual_is_normalization_free(m401):
    pair = principal_eigenpair(0.5, m401)
    same = type(pair)(pair.d, pair.lam, 1.0 * pair.psi, pair.residual, 0)
    assert eigen_identity_residual(0.5, m401, same) == pytest.approx(
        eigen_identity_residual(0.5, m401, pair), abs=1e-10
    )


def test_d_lambda_zero_for_constant_h(grid201):
    h = grid201.constant(0.4)
    assert d_lambda_formula(principal_eigenpair(0.5, h)) == pytest.approx(0.0, abs=1e-20)
    assert abs(d_lambda_fd(0.5, h)) < 1e-8


@pytest.mark.parametrize("d", [0.1, 0.5, 1.0])
def test_d_lambda_formula_matches_fd(m401, d):
    formula = d_lambda_formula(principal_eigenpair(d, m401))
    fd = d_lambda_fd(d, m401)
    assert formula > 0 and fd > 0
    assert abs(fd - formula) < 1e-4 * formula


def test_fd_error_is_second_order_in_delta(m401):
    formula = d_lambda_formula(principal_eigenpair(0.5, m401))
    errs = [abs(d_lambda_fd(0.5, m401, delta) - formula) for delta in (4e-2, 2e-2, 1e-2, 5e-3)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.1)


def test_fd_rejects_bad_delta(m201):
    with pytest.raises(ValueError):
        d_lambda_fd(0.1, m201, 0.2)


def test_bad_diffusion(m201):
    with pytest.raises(ValueError):
        principal_eigenpair(0.0, m201)
