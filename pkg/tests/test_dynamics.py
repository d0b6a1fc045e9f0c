import csv

import numpy as np
import pytest

from dispersal_lab.dynamics import (
    ModelParams,
    SpeciesState,
    aggregate,
    constant_state,
    dt_max,
    equilibrium,
    integrate_to,
    solve_theta,
    step_imex,
    validate_partition,
)
from dispersal_lab.eigen import principal_eigenpair
from dispersal_lab.grid import build_grid, integrate

from conftest import m_profile


@pytest.fixture(scope="module")
def p2(m401):
    return ModelParams(m401, (0.2, 0.4))


# --- parameters and states -------------------------------------------------


def test_params_reject_unsorted(m201):
    with pytest.raises(ValueError, match="sorted"):
        ModelParams(m201, (0.4, 0.2))


def test_params_reject_nonpositive(m201):
    with pytest.raises(ValueError):
        ModelParams(m201, (0.0, 0.2))


def test_params_warn_on_constant_m(grid201):
    with pytest.warns(UserWarning):
        ModelParams(grid201.constant(1.0), (0.5,))


def test_params_warn_on_negative_integral(grid201):
    with pytest.warns(UserWarning):
        ModelParams(grid201.field(grid201.nodes - 0.9), (0.5,))


def test_equal_rates_allowed(m201):
    assert ModelParams(m201, (0.2, 0.2, 0.4)).n_species == 3


@pytest.mark.parametrize(
    "partition",
    [[[0], [1]], [[0, 1], [1, 2]], [[0, 1]], [[0, 1], [3]], [[], [0, 1, 2]]],
)
def test_bad_partitions(partition):
    with pytest.raises(ValueError):
        validate_partition(partition, 3)


def test_good_partition_keeps_order():
    assert validate_partition([[2, 0], [1]], 3) == ((2, 0), (1,))


def test_state_rejects_negative(grid201):
    with pytest.raises(ValueError):
        SpeciesState(grid201, -np.ones((1, 201)))


def test_state_is_read_only(grid201):
    s = constant_state(grid201, [0.1, 0.2])
    with pytest.raises(ValueError):
        s.values[0, 0] = 1.0


def test_dt_max(p2):
    assert dt_max(p2) == pytest.approx(0.25 / (1.5 + 3.0))


# --- stepping ----------------------------------------------------------------


def test_zero_state_is_fixed(p2, grid401):
    z = constant_state(grid401, [0.0, 0.0])
    assert np.all(step_imex(z, p2, 1e-3).values == 0.0)
    traj = integrate_to(z, p2, 1e-2, 5.0, stride=50)
    assert np.all(traj.values == 0.0)


def test_logistic_step_constant_state():
    g = build_grid(1.0, 51)
    with pytest.warns(UserWarning):
        p = ModelParams(g.constant(1.0), (0.3,))
    out = step_imex(constant_state(g, [0.5]), p, 0.01)
    np.testing.assert_allclose(out.values, 0.5025, rtol=0, atol=1e-14)
    assert out.time == pytest.approx(0.01)


@pytest.mark.parametrize("i", [1, 2])
def test_equilibria_are_fixed_points(p2, grid401, i):
    e = equilibrium(i, p2)
    moved = np.max(np.abs(step_imex(e, p2, 1e-3).values - e.values))
    assert moved <= 10 * grid401.spacing**2


def test_equilibria_layout(p2):
    e0, e1, e2 = (equilibrium(i, p2) for i in range(3))
    assert np.all(e0.values == 0)
    assert np.all(e1.values[1] == 0) and np.all(e1.values[0] > 0)
    differing = [k for k in range(2) if not np.array_equal(e1.values[k], e2.values[k])]
    assert differing == [0, 1]
    with pytest.raises(IndexError):
        equilibrium(3, p2)


def test_step_validates(p2, grid201):
    with pytest.raises(ValueError):
        step_imex(constant_state(grid201, [0.1, 0.1]), p2, 1e-3)
    with pytest.raises(ValueError):
        step_imex(equilibrium(0, p2), p2, 0.0)


def test_integrate_validates(p2):
    e = equilibrium(0, p2)
    with pytest.raises(ValueError):
        integrate_to(e, p2, 1.0, 10.0)
    with pytest.raises(ValueError):
        integrate_to(e, p2, 0.03, 1.0)
    with pytest.raises(ValueError):
        integrate_to(e, p2, 0.01, -1.0)


def test_single_species_reaches_theta(m401):
    p = ModelParams(m401, (0.5,))
    traj = integrate_to(constant_state(m401.grid, [0.1]), p, 1e-3, 200.0, stride=10_000)
    theta = solve_theta(0.5, m401)
    assert np.max(np.abs(traj.final.values[0] - theta.values)) < 1e-4
    assert traj.clamp_count == 0


def test_trajectory_bookkeeping(p2, grid401):
    traj = integrate_to(constant_state(grid401, [0.3, 0.3]), p2, 1e-2, 1.05, stride=10)
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(1.05)
    assert np.all(np.diff(traj.times) > 0)
    assert len(traj) == 12
    assert traj.values.shape == (12, 2, 401)
    assert traj.sup.shape == (12, 2)


def test_mass_bounds(p2, grid401):
    u0 = constant_state(grid401, [0.3, 0.3])
    traj = integrate_to(u0, p2, 1e-3, 40.0, stride=100)
    sup_m = p2.m.max()
    L = grid401.length
    assert traj.mass[0] < L * sup_m
    assert np.all(traj.mass <= max(traj.mass[0], L * sup_m) + 1e-6)
    half = traj.times >= traj.times[-1] / 2
    assert np.all(traj.mass[half] < 2 * L * sup_m)
    assert traj.clamp_count == 0


def test_mass_decreases_from_above(p2, grid401):
    u0 = constant_state(grid401, [2.0, 2.0])
    traj = integrate_to(u0, p2, 1e-2, 20.0, stride=10)
    assert traj.mass[-1] < 2 * grid401.length * p2.m.max()
    assert np.all(traj.mass <= traj.mass[0] + 1e-6)


def test_first_order_in_dt(p2, grid401):
    u0 = constant_state(grid401, [0.3, 0.3])
    dts = [0.04, 0.02, 0.01, 0.005, 0.0025]
    finals = [integrate_to(u0, p2, dt, 10.0, stride=10**6).final.values for dt in dts]
    diffs = [np.max(np.abs(a - b)) for a, b in zip(finals, finals[1:])]
    slope = np.polyfit(np.log(dts[:-1]), np.log(diffs), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.2)


def test_csv_export(p2, grid401, tmp_path):
    traj = integrate_to(constant_state(grid401, [0.3, 0.3]), p2, 1e-2, 1.0, stride=50)
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["time", "sup_u1", "sup_u2", "l1_mass"]
    assert len(rows) == len(traj) + 1
    assert float(rows[-1][3]) == traj.mass[-1]


# --- steady states -----------------------------------------------------------


@pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("d", [0.1, 1.0])
def test_theta_constant_m(grid201, c, d):
    with pytest.warns(UserWarning):
        theta = solve_theta(d, grid201.constant(c))
    assert np.max(np.abs(theta.values - c)) < 1e-10


def test_theta_positive_nonconstant(m401):
    theta = solve_theta(0.3, m401)
    assert theta.min() > 0
    assert theta.max() - theta.min() > 0.1
    # integrating the equation: the diffusion term has zero mean
    assert integrate(theta * (m401 - theta)) == pytest.approx(0.0, abs=1e-10)


def test_theta_fine_grid_oracle():
    fine = solve_theta(0.3, m_profile(build_grid(1.0, 3201))).values
    errs = []
    for n in (201, 401, 801):
        theta = solve_theta(0.3, m_profile(build_grid(1.0, n))).values
        err = np.max(np.abs(theta - fine[:: 3200 // (n - 1)]))
        assert err < 10 * (1.0 / (n - 1)) ** 2
        errs.append(err)
    order = np.log2(errs[0] / errs[1])
    assert order == pytest.approx(2.0, abs=0.2)


@pytest.mark.parametrize("d", [0.1, 0.3, 0.5, 1.0])
def test_theta_is_neutral(m401, grid401, d):
    lam = principal_eigenpair(d, m401 - solve_theta(d, m401)).lam
    assert abs(lam) < 10 * grid401.spacing**2


def test_theta_rejects_bad_d(m201):
    with pytest.raises(ValueError):
        solve_theta(-1.0, m201)


# --- aggregation -------------------------------------------------------------


def test_aggregate_trivial_and_total(grid201):
    s = SpeciesState(grid201, np.random.default_rng(0).random((3, 201)), 1.5)
    assert np.array_equal(aggregate(s, [[0], [1], [2]]).values, s.values)
    one = aggregate(s, [[0, 1, 2]])
    np.testing.assert_array_equal(one.values[0], s.total())
    assert one.time == 1.5


def test_aggregation_commutes_with_flow(m401, grid401):
    fine = ModelParams(m401, (0.2, 0.2, 0.4))
    coarse = ModelParams(m401, (0.2, 0.4))
    rng = np.random.default_rng(7)
    u0 = SpeciesState(grid401, 0.1 + 0.3 * rng.random((3, 401)))
    blocks = [[0, 1], [2]]
    a = integrate_to(u0, fine, 1e-3, 10.0, stride=10**6).final
    b = integrate_to(aggregate(u0, blocks), coarse, 1e-3, 10.0, stride=10**6).final
    assert np.max(np.abs(aggregate(a, blocks).values - b.values)) < 5e-9
