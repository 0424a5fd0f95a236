import numpy as np
import pytest

from oracles import static_optimum_lstsq, team_cost_by_execution
from teamsub.errors import AssumptionViolated, InfoViolation
from teamsub.generate import random_team_problem
from teamsub.io import fixture_path, load_pi_override
from teamsub.linalg import DEFAULT_TOL
from teamsub.static import (
    LinearTeamStrategy,
    assemble_static_system,
    composite,
    expand,
    expected_cost,
    realize_static_strategy,
    solve_static,
    static_blocks,
    static_cost,
    to_static,
)


def _pipeline(problem, pi=None):
    ex = expand(problem)
    obs = to_static(ex)
    return ex, obs, solve_static(problem, obs, DEFAULT_TOL, pi=pi)


def test_zero_cost_team_expansion(zero_cost):
    ex = expand(zero_cost)
    assert ex.expanded_info[2] == ("u1", "xi")
    assert ex.attribution[2]["xi"] == 1
    assert ex.attribution[2]["u1"] == 2
    assert static_blocks(ex)[2] == ("xi",)


def test_shared_column_team_system(shared_column):
    a, b, shapes = assemble_static_system(shared_column, to_static(expand(shared_column)))
    np.testing.assert_allclose(a, [[10, 0, 0], [0, 10, 10], [0, 10, 10]], atol=1e-12)
    np.testing.assert_allclose(b, [0, -5, -5], atol=1e-12)
    assert shapes == {1: (1, 1), 2: (1, 1), 3: (1, 1)}


def test_shared_column_team_solutions_share_cost(shared_column):
    ex, obs, mn = _pipeline(shared_column)
    np.testing.assert_allclose([mn.pi[i][0, 0] for i in (1, 2, 3)], [0, -0.25, -0.25], atol=1e-12)
    pi = load_pi_override(fixture_path("shared_column_pi"))
    _, _, given = _pipeline(shared_column, pi)
    assert given.system_residual <= 1e-12
    for sol in (mn, given):
        assert static_cost(shared_column, obs, sol) == pytest.approx(1.5, abs=1e-12)
        assert expected_cost(ex, realize_static_strategy(ex, sol)) == pytest.approx(1.5, abs=1e-12)


def test_pi_override_must_solve_system(shared_column):
    with pytest.raises(AssumptionViolated):
        _pipeline(shared_column, {1: np.zeros((1, 1)), 2: np.ones((1, 1)), 3: np.ones((1, 1))})


def test_zero_cost_team_optimum_is_zero(zero_cost):
    ex, obs, sol = _pipeline(zero_cost)
    assert expected_cost(ex, realize_static_strategy(ex, sol)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_static_solution_is_least_squares_optimum(seed):
    p = random_team_problem(seed)
    ex, obs, sol = _pipeline(p)
    ref = static_optimum_lstsq(p, obs)
    got = static_cost(p, obs, sol)
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-9)
    assert expected_cost(ex, realize_static_strategy(ex, sol)) == pytest.approx(got, rel=1e-9, abs=1e-9)


def test_realized_strategy_uses_expanded_information_only(four_member):
    ex, obs, sol = _pipeline(four_member)
    gamma = realize_static_strategy(ex, sol)
    assert gamma.info_mode == "expanded"
    for i, row in gamma.coeffs.items():
        assert set(row) <= set(ex.expanded_info[i])


def test_composite_rejects_unavailable_block(zero_cost):
    bad = LinearTeamStrategy({1: {}, 2: {"xi": np.ones((1, 1))}, 3: {}}, "original")
    with pytest.raises(InfoViolation):
        composite(zero_cost, bad)


def test_cost_by_execution_matches_composite():
    for seed in range(10):
        p = random_team_problem(seed)
        rng = np.random.default_rng(seed)
        coeffs = {
            mb.index: {b: rng.standard_normal((mb.d_u, p.blocks[b].rows)) for b in mb.info}
            for mb in p.members
        }
        s = LinearTeamStrategy(coeffs, "original")
        assert expected_cost(p, s) == pytest.approx(team_cost_by_execution(p, s), rel=1e-10)


def test_monte_carlo_agrees_with_exact_cost(shared_column):
    ex, obs, sol = _pipeline(shared_column)
    comp = composite(ex, realize_static_strategy(ex, sol))
    rng = np.random.default_rng(3)
    xi = rng.multivariate_normal(np.zeros(2), shared_column.sigma, size=200_000)
    err = xi @ (shared_column.m + shared_column.n_full @ comp.stacked()).T
    c = np.einsum("ij,ij->i", err, err)
    assert abs(c.mean() - 1.5) <= 4 * c.std(ddof=1) / np.sqrt(c.size)

