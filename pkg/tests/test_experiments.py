import json
import math

import numpy as np
import pytest

from dispersal_lab.dynamics import ModelParams, SpeciesState, constant_state
from dispersal_lab.experiments import (
    closeness_experiment,
    dockery_morse_check,
    exclusion_experiment,
    hausdorff_distance,
    invasion_matrix,
    random_diffusion_sets,
    ratio_rate_bound,
    sweep,
)
from dispersal_lab.grid import build_grid


@pytest.fixture(scope="module")
def strong():
    """A strongly heterogeneous habitat where exclusion is fast."""
    g = build_grid(1.0, 201)
    return g.field(1 + 2 * np.cos(np.pi * g.nodes))


# --- Hausdorff ---------------------------------------------------------------


@pytest.mark.parametrize(
    "A, B, expected",
    [
        ([0.2, 0.4], [0.2, 0.21, 0.4], 0.01),
        ([0.2, 0.4], [0.2, 0.4], 0.0),
        ([1.0], [0.0, 3.0], 2.0),
        ([0.0, 3.0], [1.0], 2.0),
    ],
)
def test_hausdorff_examples(A, B, expected):
    assert hausdorff_distance(A, B) == pytest.approx(expected, abs=1e-15)


def test_hausdorff_empty():
    with pytest.raises(ValueError):
        hausdorff_distance([], [1.0])


def test_random_sets_within_radius():
    sets = random_diffusion_sets([0.2, 0.4], 0.02, 12, seed=5)
    assert len(sets) == 12
    assert {len(s) for s in sets} == {3, 4}
    for s in sets:
        assert list(s) == sorted(s)
        assert hausdorff_distance(s, [0.2, 0.4]) < 0.02
    assert sets == random_diffusion_sets([0.2, 0.4], 0.02, 12, seed=5)


# --- invasion ----------------------------------------------------------------


def test_invasion_matrix_signs(m201):
    M = invasion_matrix(ModelParams(m201, (0.2, 0.21, 0.4)))
    assert np.all(np.abs(np.diag(M)) < 10 * (1 / 200) ** 2)
    # slower species invade faster residents, never the reverse
    for i in range(3):
        for j in range(3):
            if i < j:
                assert M[i, j] < 0
            elif i > j:
                assert M[i, j] > 0


# --- exclusion ---------------------------------------------------------------


@pytest.fixture(scope="module")
def fast_report(strong):
    p = ModelParams(strong, (0.02, 1.0))
    return exclusion_experiment(p, constant_state(strong.grid, [0.3, 0.3]), 100.0, 0.01)


def test_fast_exclusion(fast_report, strong):
    r = fast_report
    assert r.verdict == "excluded"
    assert r.final_distance < 1e-3
    assert r.slopes[0] < 0
    assert r.clamp_count == 0
    assert r.mass_bound_ok
    assert r.aggregate_limsup < 0.1 * r.theta1_sup


def test_ratio_slope_matches_invasion_rate(fast_report, strong):
    # u2 decays like exp(-mu t) with mu the invasion eigenvalue of species 2
    mu = invasion_matrix(ModelParams(strong, (0.02, 1.0)))[1, 0]
    assert fast_report.slopes[0] == pytest.approx(-mu, rel=0.02)


def test_report_serialises(fast_report):
    d = fast_report.to_dict()
    assert "trajectory" not in d
    assert json.loads(json.dumps(d))["verdict"] == "excluded"


def test_short_run_is_undecided(m201):
    p = ModelParams(m201, (0.2, 0.4))
    r = exclusion_experiment(p, constant_state(m201.grid, [0.3, 0.3]), 5.0, 0.01)
    assert r.verdict == "undecided"
    assert r.final_distance > 1e-3


def test_exclusion_validates(m201):
    g = m201.grid
    with pytest.raises(ValueError):
        exclusion_experiment(ModelParams(m201, (0.2, 0.4)), constant_state(g, [0.3, 0.0]), 1.0, 0.01)
    with pytest.raises(ValueError):
        exclusion_experiment(ModelParams(m201, (0.2, 0.2)), constant_state(g, [0.3, 0.3]), 1.0, 0.01)


def test_ratio_rate_bound_positive(m201):
    r = ratio_rate_bound(ModelParams(m201, (0.2, 0.4)), n_rates=2, window=0.1)
    assert r > 0


# --- Morse check -------------------------------------------------------------


def test_morse_passes_when_fast(strong):
    report = dockery_morse_check(ModelParams(strong, (0.02, 1.0)), 0.01, 150.0)
    assert report and report.verdict == "passed"
    assert set(report.cases) == {"interior", "face", "zero", "near_E2"}


def test_morse_short_horizon(m201):
    report = dockery_morse_check(ModelParams(m201, (0.2, 0.4)), 0.01, 50.0)
    assert not report
    assert report.cases["zero"]["converged"]
    assert report.cases["face"]["converged"]
    assert not report.cases["interior"]["converged"]


def test_morse_needs_two_species(m201):
    with pytest.raises(ValueError):
        dockery_morse_check(ModelParams(m201, (0.2, 0.3, 0.4)), 0.01, 1.0)


# --- closeness ---------------------------------------------------------------


def test_closeness_zero_perturbation(m201):
    u0 = constant_state(m201.grid, [0.3, 0.1, 0.3])
    r = closeness_experiment([0.2, 0.4], [0.2, 0.2, 0.4], [[0, 1], [2]], u0, 2.0, 0.01, m201)
    assert r.gap < 1e-12 and r.epsilon == 0.0


def test_closeness_is_first_order(m201):
    u0 = constant_state(m201.grid, [0.3, 0.1, 0.3])
    r = closeness_experiment([0.2, 0.4], [0.19, 0.21, 0.4], [[0, 1], [2]], u0, 10.0, 0.01, m201)
    assert math.isfinite(r.gap) and r.gap > 0
    assert 0.35 <= r.ratio <= 0.65
    assert r.epsilon == pytest.approx(0.01)


def test_closeness_symmetric_cancellation(m201):
    # equal in-block data with a symmetric split cancels the O(eps) term
    u0 = constant_state(m201.grid, [0.3, 0.3, 0.3])
    r = closeness_experiment([0.2, 0.4], [0.19, 0.21, 0.4], [[0, 1], [2]], u0, 10.0, 0.01, m201)
    assert r.ratio == pytest.approx(0.25, abs=0.02)


def test_closeness_gap_grows_with_horizon(m201):
    u0 = constant_state(m201.grid, [0.3, 0.1, 0.3])
    args = ([0.2, 0.4], [0.19, 0.21, 0.4], [[0, 1], [2]], u0)
    a = closeness_experiment(*args, 10.0, 0.01, m201)
    b = closeness_experiment(*args, 20.0, 0.01, m201)
    assert a.gap <= b.gap


def test_closeness_block_mismatch(m201):
    u0 = constant_state(m201.grid, [0.3, 0.1, 0.3])
    with pytest.raises(ValueError):
        closeness_experiment([0.2], [0.2, 0.2, 0.4], [[0, 1], [2]], u0, 1.0, 0.01, m201)


# --- sweep -------------------------------------------------------------------


def test_sweep_parallel_matches_serial(strong):
    sets = [(0.02, 1.0), (0.03, 1.5), (0.02, 0.5, 2.0)]
    par = sweep(strong, sets, 80.0, 0.01, workers=2)
    ser = sweep(strong, sets, 80.0, 0.01, workers=1)
    assert [r.verdict for r in par] == ["excluded"] * 3
    assert [r.final_distance for r in par] == [r.final_distance for r in ser]
