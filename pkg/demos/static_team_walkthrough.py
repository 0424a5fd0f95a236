# A three-member team where member 2 cannot see what member 1 knows,
# yet member 3 can act on member 2's behalf.
import numpy as np

from teamsub.io import fixture_path, load_pi_override, load_team
from teamsub.linalg import DEFAULT_TOL
from teamsub.static import assemble_static_system, expand, expected_cost, realize_static_strategy, solve_static, to_static
from teamsub.team import analyze_precedence, certify_substitutability
from teamsub.transform import remove_violations, violations

problem = load_team(fixture_path("shared_column_team"))
for mb in problem.members:
    print(f"member {mb.index} reads {list(mb.info)}, N = {mb.n_block.ravel()}")

# member 1's action shows up in member 2's observation, but member 2 does
# not know what member 1 knew: (1, 2) is a critical pair
structure = analyze_precedence(problem)
print("critical pairs:", structure.critical_pairs)

# member 3 knows Z^1 and its columns span member 2's, so it can stand in
certs = certify_substitutability(problem, structure)
c = certs[(1, 2)]
print(f"pair (1,2) handled by member {c.k}, Lambda = {c.lambda_kst.ravel()}")

# give member 2 member 1's information and solve the resulting static team
expanded = expand(problem, structure)
obs = to_static(expanded)
a, b, _ = assemble_static_system(problem, obs)
print("stationarity system\n", a, "\n rhs", b)

# the system is singular: any Pi^2 + Pi^3 = -0.5 is optimal
for label, pi in (("minimum norm", None), ("hand-picked", load_pi_override(fixture_path("shared_column_pi")))):
    sol = solve_static(problem, obs, DEFAULT_TOL, pi=pi)
    gamma = realize_static_strategy(expanded, sol)
    print(f"\n{label}: Pi = {[float(sol.pi[i][0, 0]) for i in (1, 2, 3)]}")
    print("  members reading a partner's information:", {i: sorted(v) for i, v in violations(gamma, expanded).sets.items() if v})

    final, trace = remove_violations(gamma, expanded, certs)
    for step in trace.iterations:
        print(f"  moved ({step.s},{step.t}) to member {step.k}; drift {step.nu_drift:.1e}/{step.z_drift:.1e}")
    print("  final strategy:", {i: {blk: float(k[0, 0]) for blk, k in row.items()} for i, row in final.coeffs.items()})
    print(f"  cost expanded {expected_cost(expanded, gamma):.6f}, original {expected_cost(problem, final):.6f}")
