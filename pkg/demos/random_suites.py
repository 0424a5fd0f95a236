# Random instances that satisfy the substitutability assumptions by
# construction, pushed through both pipelines.
import numpy as np

from teamsub.generate import random_lqg_problem, random_team_problem
from teamsub.linalg import DEFAULT_TOL
from teamsub.lqg import exact_cost, synthesize, transition_growth
from teamsub.static import expand, expected_cost, realize_static_strategy, solve_static, to_static
from teamsub.team import analyze_precedence, certify_substitutability
from teamsub.transform import remove_violations

gaps, moves = [], 0
for seed in range(50):
    p = random_team_problem(seed)
    st = analyze_precedence(p)
    certs = certify_substitutability(p, st)
    ex = expand(p, st)
    gamma = realize_static_strategy(ex, solve_static(p, to_static(ex), DEFAULT_TOL))
    final, trace = remove_violations(gamma, ex, certs)
    moves += len(trace.iterations)
    gaps.append(abs(expected_cost(p, final) - expected_cost(ex, gamma)))
print(f"teams: {moves} rewrites over 50 problems, largest cost gap {max(gaps):.1e}")

rows = []
for seed in range(20):
    p = random_lqg_problem(seed)
    s = synthesize(p)
    c, d = exact_cost(p, s, "centralized"), exact_cost(p, s, "decentralized")
    rows.append((seed, p.n, p.d_x, p.T, c, abs(c - d) / c, transition_growth(p, s)))
print("\nseed  n  d_x  T      cost   rel gap   growth")
for r in rows:
    print("%4d %2d %4d %2d %9.4f %9.1e %8.1f" % r)
