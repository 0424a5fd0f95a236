# Two controllers push the same state through actuators with a shared
# column space.  Each runs its own filter on its own sensor and the
# team still matches the centralized optimum.
import numpy as np

from teamsub.io import fixture_path, load_lqg
from teamsub.lqg import exact_cost, sum_identity_residual, simulate, synthesize

p = load_lqg(fixture_path("lqg_scalar"))
sched = synthesize(p)

print("Lambda^i (how much of the full action each controller issues):")
for i, lam in enumerate(sched.lambdas, start=1):
    print(f"  {i}: {np.round(lam, 4)}")
for t, (k, l) in enumerate(zip(sched.k, sched.l), start=1):
    print(f"t={t}  K={np.round(k.ravel(), 4)}  L={np.round(l.ravel(), 4)}")

cen = exact_cost(p, sched, "centralized")
dec = exact_cost(p, sched, "decentralized")
print(f"\nexact cost: centralized {cen:.10f}, decentralized {dec:.10f}")
print(f"row-sum identity residual {sum_identity_residual(p, sched):.1e}")

res = simulate(p, sched, "both", 50_000, seed=1)
print(f"Monte Carlo (50k paths): {res.mean_centralized:.4f} +- {res.stderr_centralized:.4f} (centralized)")
print(f"                         {res.mean_decentralized:.4f} +- {res.stderr_decentralized:.4f} (decentralized)")
print(f"largest |Z - sum S^i| over all paths and steps: {res.max_sum_residual:.1e}")

# with noiseless identity sensors each local statistic is just the
# controller's own slice of the state
q = load_lqg(fixture_path("lqg_perfect_obs"))
qs = synthesize(q, allow_psd_noise=True)
r = simulate(q, qs, "decentralized", 3, seed=0, record=True)
print("\nperfect observation, path 0, t=2:")
print("  X      ", r.trajectories["x"][1, 0])
for i in range(q.n):
    print(f"  S^{i + 1}    ", r.trajectories["s"][1, i, 0])
