import pytest

from teamsub.generate import CAPS, generate_random_problem, random_lqg_problem, random_team_problem
from teamsub.lqg import certify_lqg_substitutability
from teamsub.team import analyze_precedence, certify_substitutability, validate


def test_team_seed_7_certifies():
    p = random_team_problem(7)
    st = analyze_precedence(p)
    assert st.critical_pairs
    assert set(certify_substitutability(p, st)) == set(st.critical_pairs)


def test_lqg_seed_7_certifies():
    assert len(certify_lqg_substitutability(random_lqg_problem(7))) == random_lqg_problem(7).n


@pytest.mark.parametrize("seed", range(40))
def test_generated_teams_are_valid_and_substitutable(seed):
    p = random_team_problem(seed)
    assert validate(p) == []
    assert p.n <= CAPS["n"] and p.d_xi <= CAPS["d"]
    certify_substitutability(p, analyze_precedence(p))


def test_caps_enforced():
    with pytest.raises(ValueError, match="outside"):
        random_team_problem(0, n=7)
    with pytest.raises(ValueError, match="outside"):
        random_lqg_problem(0, d_x=9)
    with pytest.raises(ValueError, match="outside"):
        generate_random_problem("lqg", {"T": 11})
    with pytest.raises(ValueError):
        generate_random_problem("other")


def test_same_seed_same_instance():
    assert generate_random_problem("team", {"n": 4}, 3) == generate_random_problem("team", {"n": 4}, 3)
    assert generate_random_problem("lqg", {}, 3) == generate_random_problem("lqg", {}, 3)
