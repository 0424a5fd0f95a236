"""Random instances that satisfy the substitutability assumptions by construction.

Team instances
    Some members ("shadows") observe only a private block driven by earlier
    decisions, so they form critical pairs with every precedent.  Each
    shadow ``t`` is paired with a later member ``k`` whose information
    contains everything the shadow's precedents know, and the shadow's
    cost/information columns are drawn as ``[N^k; D^k] R``.  Every other
    member's information is closed under precedence, so it has no critical
    pairs.

LQG instances
    ``[B^i; N^i] = S R^i`` for a common base ``S`` and full-row-rank
    ``R^i``, giving every controller the same column space.  Draws whose
    closed-loop transition products grow beyond ``MAX_GROWTH`` are redrawn
    from the same stream: the local statistics of such instances reach
    magnitudes where rounding, not the model, dominates the comparisons.
"""
from __future__ import annotations

import numpy as np

from .io import lqg_to_dict, team_to_dict
from .lqg import LqgProblem, synthesize, transition_growth
from .team import InfoBlock, Member, TeamProblem

__all__ = ["CAPS", "MAX_GROWTH", "random_team_problem", "random_lqg_problem", "generate_random_problem"]

CAPS = {"n": 6, "d": 8, "T": 10}
MAX_GROWTH = 100.0
_MAX_DRAWS = 200


def _check_caps(**dims):
    for key, val in dims.items():
        cap = CAPS["d"] if key.startswith("d") else CAPS[key]
        if val is not None and not 1 <= val <= cap:
            raise ValueError(f"{key}={val} outside the allowed range 1..{cap}")


def _spd(rng, d, floor=0.1):
    g = rng.standard_normal((d, d))
    return g @ g.T / d + floor * np.eye(d)


def random_team_problem(seed: int, n: int | None = None, d_xi: int | None = None) -> TeamProblem:
    _check_caps(n=n, d_xi=d_xi)
    rng = np.random.default_rng(seed)
    n = int(n if n is not None else rng.integers(3, CAPS["n"] + 1))
    d_xi = int(d_xi if d_xi is not None else rng.integers(1, CAPS["d"] + 1))
    d_cost = int(rng.integers(1, 4))
    d_u = {i: int(rng.integers(1, 3)) for i in range(1, n + 1)}

    # roles: shadow t -> substituting member k > t
    shadow: dict[int, int] = {}
    subs: set[int] = set()
    for t in range(2, n):
        if t in subs or rng.random() >= 0.5:
            continue
        k = int(rng.integers(t + 1, n + 1))
        shadow[t] = k
        subs.add(k)
    if not shadow and n >= 3:
        k = int(rng.integers(3, n + 1))
        shadow[2] = k
        subs.add(k)

    own = {i: f"o{i}" for i in range(1, n + 1)}
    rows = {i: int(rng.integers(1, 3)) for i in range(1, n + 1)}
    h = {}
    for i in range(1, n + 1):
        if i in shadow and rng.random() < 0.4:
            h[i] = np.zeros((rows[i], d_xi))
        else:
            h[i] = rng.standard_normal((rows[i], d_xi))

    # d[m][j]: rows of block o_m driven by member j
    d: dict[int, dict[int, np.ndarray]] = {m: {} for m in range(1, n + 1)}
    plain = [j for j in range(1, n + 1) if j not in shadow]
    for j in plain:
        for m in range(j + 1, n + 1):
            if rng.random() < 0.4:
                d[m][j] = rng.standard_normal((rows[m], d_u[j]))
    for t in shadow:
        if not any(j < t for j in d[t]):
            j = int(rng.choice([j for j in plain if j < t]))
            d[t][j] = rng.standard_normal((rows[t], d_u[j]))

    n_blocks = {j: rng.standard_normal((d_cost, d_u[j])) for j in plain}
    for t, k in shadow.items():
        r = rng.standard_normal((d_u[k], d_u[t]))
        n_blocks[t] = n_blocks[k] @ r
        for m in range(k + 1, n + 1):
            if k in d[m]:
                d[m][t] = d[m][k] @ r

    blocks = {own[i]: InfoBlock(own[i], h[i], d[i]) for i in range(1, n + 1)}
    influencers = {i: sorted(d[i]) for i in range(1, n + 1)}
    info: dict[int, list[str]] = {}
    for p in range(1, n + 1):
        if p in shadow:
            info[p] = [own[p]]
            continue
        lst = [own[p]]
        for t, k in shadow.items():
            if k == p:
                for j in influencers[t]:
                    lst += [b for b in info[j] if b not in lst]
        for m in range(1, p):
            if rng.random() < 0.3 and own[m] not in lst:
                lst.append(own[m])
        changed = True
        while changed:
            changed = False
            for b in list(lst):
                for j in influencers[int(b[1:])]:
                    for bj in info[j]:
                        if bj not in lst:
                            lst.append(bj)
                            changed = True
        info[p] = lst

    members = [Member(i, d_u[i], n_blocks[i], tuple(info[i])) for i in range(1, n + 1)]
    sigma = _spd(rng, d_xi, 0.2)
    m = rng.standard_normal((d_cost, d_xi))
    return TeamProblem(sigma, m, members, blocks)


def random_lqg_problem(seed: int, n: int | None = None, d_x: int | None = None, T: int | None = None) -> LqgProblem:
    _check_caps(n=n, d_x=d_x, T=T)
    rng = np.random.default_rng(seed)
    n = int(n if n is not None else rng.integers(1, 5))
    d_x = int(d_x if d_x is not None else rng.integers(1, 7))
    T = int(T if T is not None else rng.integers(1, CAPS["T"] + 1))
    for _ in range(_MAX_DRAWS):
        problem = _draw_lqg(rng, n, d_x, T)
        schedule = synthesize(problem)
        if max(transition_growth(problem, schedule, mode) for mode in ("centralized", "decentralized")) <= MAX_GROWTH:
            return problem
    raise RuntimeError(f"no well-conditioned LQG instance found for seed {seed}")


def _draw_lqg(rng, n, d_x, T) -> LqgProblem:
    d_m = int(rng.integers(1, 4))
    r = int(rng.integers(1, min(2, d_x + d_m) + 1))
    base = rng.standard_normal((d_x + d_m, r))
    b_blocks, n_blocks, c_blocks = [], [], []
    for _ in range(n):
        du = int(rng.integers(r, r + 2))
        ri = rng.standard_normal((r, du))
        stack = base @ ri
        b_blocks.append(stack[:d_x])
        n_blocks.append(stack[d_x:])
        c_blocks.append(rng.standard_normal((int(rng.integers(1, 3)), d_x)))
    a = rng.standard_normal((d_x, d_x))
    rho = max(np.abs(np.linalg.eigvals(a)).max(), 1e-12)
    a *= rng.uniform(0.5, 1.1) / rho
    dy = sum(c.shape[0] for c in c_blocks)
    return LqgProblem(
        T=T,
        a=a,
        b_blocks=b_blocks,
        c_blocks=c_blocks,
        sigma_x=_spd(rng, d_x),
        sigma_w=_spd(rng, d_x),
        sigma_v=_spd(rng, dy),
        m=rng.standard_normal((d_m, d_x)),
        n_blocks=n_blocks,
    )


def generate_random_problem(kind: str, dims: dict | None = None, seed: int = 0) -> dict:
    """File-ready dict for a random ``team`` or ``lqg`` instance."""
    dims = dict(dims or {})
    if kind == "team":
        return team_to_dict(random_team_problem(seed, n=dims.get("n"), d_xi=dims.get("d")))
    if kind == "lqg":
        return lqg_to_dict(random_lqg_problem(seed, n=dims.get("n"), d_x=dims.get("d"), T=dims.get("T")))
    raise ValueError(f"kind must be 'team' or 'lqg', got {kind!r}")
