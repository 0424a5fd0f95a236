"""Partially nested expansion, static reduction and linear team strategies.

The pipeline is::

    expand -> to_static -> solve_static -> realize_static_strategy

and :func:`expected_cost` evaluates any linear strategy exactly through its
composite control maps ``U^i = P^i xi``.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Union

import numpy as np

from .errors import AssumptionViolated, DimensionMismatch, InfoViolation, InternalError
from .linalg import DEFAULT_TOL, Tolerance, quad_cost, solve_minimum_norm
from .team import PrecedenceStructure, TeamProblem, analyze_precedence

__all__ = [
    "ExpandedProblem",
    "StaticStrategy",
    "LinearTeamStrategy",
    "CompositeControl",
    "expand",
    "static_blocks",
    "to_static",
    "assemble_static_system",
    "solve_static",
    "realize_static_strategy",
    "composite",
    "expected_cost",
    "static_cost",
]


@dataclass(frozen=True)
class ExpandedProblem:
    base: TeamProblem
    structure: PrecedenceStructure
    expanded_info: Mapping[int, tuple[str, ...]]
    # which member's information each expanded block was adjoined for:
    # i itself for own blocks, else the smallest r in C^i listing it
    attribution: Mapping[int, Mapping[str, int]]
    h_tilde: Mapping[int, np.ndarray]
    d_tilde: Mapping[tuple[int, int], np.ndarray]


@dataclass(frozen=True)
class StaticStrategy:
    pi: Mapping[int, np.ndarray]
    system_residual: float


@dataclass(frozen=True)
class LinearTeamStrategy:
    """``U^i = sum_b coeffs[i][b] @ Z_b`` over named information blocks."""

    coeffs: Mapping[int, Mapping[str, np.ndarray]]
    info_mode: str = "original"

    def __post_init__(self):
        if self.info_mode not in ("original", "expanded"):
            raise ValueError(f"info_mode must be 'original' or 'expanded', got {self.info_mode!r}")
        frozen = {}
        for i, row in self.coeffs.items():
            inner = {}
            for b, k in row.items():
                k = np.array(k, dtype=float, ndmin=2)
                k.setflags(write=False)
                inner[b] = k
            frozen[int(i)] = MappingProxyType(inner)
        object.__setattr__(self, "coeffs", MappingProxyType(frozen))

    def member_coeffs(self, i: int) -> Mapping[str, np.ndarray]:
        return self.coeffs.get(i, MappingProxyType({}))

    def as_dict(self) -> dict[int, dict[str, np.ndarray]]:
        return {i: {b: k.copy() for b, k in row.items()} for i, row in self.coeffs.items()}

    def retag(self, info_mode: str) -> "LinearTeamStrategy":
        return LinearTeamStrategy(self.as_dict(), info_mode)


@dataclass(frozen=True)
class CompositeControl:
    p: Mapping[int, np.ndarray]
    z_composite: Mapping[str, np.ndarray]

    def stacked(self) -> np.ndarray:
        return np.vstack([self.p[i] for i in sorted(self.p)])


ProblemLike = Union[TeamProblem, ExpandedProblem]


def expand(problem: TeamProblem, structure: PrecedenceStructure | None = None) -> ExpandedProblem:
    """Give every member the information of its critical-pair partners."""
    if structure is None:
        structure = analyze_precedence(problem)
    info, attribution = {}, {}
    for mb in problem.members:
        i = mb.index
        blocks = list(mb.info)
        attr = {b: i for b in blocks}
        for r in sorted(structure.critical[i]):
            for b in problem.member(r).info:
                if b not in attr:
                    attr[b] = r
                    blocks.append(b)
        info[i] = tuple(blocks)
        attribution[i] = MappingProxyType(attr)

    check = analyze_precedence(problem, info)
    if not check.partially_nested:
        raise InternalError(f"expanded structure is not partially nested: {check.critical_pairs}")

    h_tilde = {i: problem.stack_h(info[i]) for i in info}
    d_tilde = {(i, j): problem.stack_d(info[i], j) for i in info for j in info}
    return ExpandedProblem(
        problem,
        structure,
        MappingProxyType(info),
        MappingProxyType(attribution),
        MappingProxyType(h_tilde),
        MappingProxyType(d_tilde),
    )


def static_blocks(expanded: ExpandedProblem) -> dict[int, tuple[str, ...]]:
    """Expanded blocks that carry exogenous information (nonzero H rows).

    Blocks driven purely by decisions are dropped: after the expansion the
    deciding member's own information is already present.
    """
    base = expanded.base
    return {
        i: tuple(b for b in blocks if np.any(base.blocks[b].h_rows != 0))
        for i, blocks in expanded.expanded_info.items()
    }


def to_static(expanded: ExpandedProblem) -> dict[int, np.ndarray]:
    """Observation matrices ``H_hat^i`` of the equivalent static team."""
    return {i: expanded.base.stack_h(b) for i, b in static_blocks(expanded).items()}


def _vec(a: np.ndarray) -> np.ndarray:
    return a.reshape(-1, order="F")


def assemble_static_system(problem: TeamProblem, static_obs: Mapping[int, np.ndarray]):
    """Stack the stationarity conditions into one system ``A vec(Pi) = b``.

    For every member ``i``::

        sum_j N^i' N^j Pi^j S_ji = -N^i' M Sigma H^i'

    with ``S_ji = H^j Sigma H^i'``.  Unknowns are the column-major
    vectorisations of ``Pi^1 .. Pi^n`` in member order, and equations are
    ordered the same way.  Returns ``(A, b, shapes)`` where ``shapes[i]`` is
    the shape of ``Pi^i``.
    """
    sigma, m = problem.sigma, problem.m
    idx = range(1, problem.n + 1)
    shapes = {i: (problem.d_u(i), static_obs[i].shape[0]) for i in idx}
    for i in idx:
        if static_obs[i].shape[1] != problem.d_xi:
            raise DimensionMismatch(f"H_hat^{i} has {static_obs[i].shape[1]} columns, expected {problem.d_xi}")
    offsets, off = {}, 0
    for i in idx:
        offsets[i] = off
        off += shapes[i][0] * shapes[i][1]
    a = np.zeros((off, off))
    b = np.zeros(off)
    for i in idx:
        ni = problem.member(i).n_block
        hi = static_obs[i]
        rows = slice(offsets[i], offsets[i] + shapes[i][0] * shapes[i][1])
        for j in idx:
            hj = static_obs[j]
            s_ji = hj @ sigma @ hi.T
            cols = slice(offsets[j], offsets[j] + shapes[j][0] * shapes[j][1])
            a[rows, cols] = np.kron(s_ji.T, ni.T @ problem.member(j).n_block)
        b[rows] = _vec(-ni.T @ m @ sigma @ hi.T)
    return a, b, shapes


def _unvec(x: np.ndarray, shapes) -> dict[int, np.ndarray]:
    out, off = {}, 0
    for i in sorted(shapes):
        r, c = shapes[i]
        out[i] = x[off:off + r * c].reshape((r, c), order="F")
        off += r * c
    return out


def solve_static(
    problem: TeamProblem,
    static_obs: Mapping[int, np.ndarray],
    tol: Tolerance = DEFAULT_TOL,
    pi: Mapping[int, np.ndarray] | None = None,
) -> StaticStrategy:
    """Solve the stationarity system; minimum-norm unless ``pi`` is given.

    A user-supplied ``pi`` is accepted only if it satisfies the system.
    """
    a, b, shapes = assemble_static_system(problem, static_obs)
    bound = tol.bound(float(np.linalg.norm(b)))
    if pi is None:
        sol = solve_minimum_norm(a, b.reshape(-1, 1), tol)
        if not sol.consistent:
            raise AssumptionViolated(
                f"static team stationarity system has no solution (residual {sol.residual:.3g})",
                residual=sol.residual,
            )
        return StaticStrategy(MappingProxyType(_unvec(sol.solution[:, 0], shapes)), sol.residual)

    given = {}
    for i in sorted(shapes):
        if i not in pi:
            raise DimensionMismatch(f"Pi override is missing member {i}")
        p = np.array(pi[i], dtype=float, ndmin=2)
        if shapes[i][1] == 0:
            p = p.reshape(shapes[i])
        if p.shape != shapes[i]:
            raise DimensionMismatch(f"Pi^{i} override has shape {p.shape}, expected {shapes[i]}")
        given[i] = p
    x = np.concatenate([_vec(given[i]) for i in sorted(given)]) if given else np.zeros(0)
    resid = float(np.linalg.norm(a @ x - b))
    if resid > bound:
        raise AssumptionViolated(f"supplied Pi does not solve the stationarity system (residual {resid:.3g})", residual=resid)
    return StaticStrategy(MappingProxyType(given), resid)


def _add(row: dict, b: str, k: np.ndarray) -> None:
    if b in row:
        row[b] = row[b] + k
    else:
        row[b] = k.copy()


def realize_static_strategy(expanded: ExpandedProblem, static: StaticStrategy) -> LinearTeamStrategy:
    """Rewrite ``U^i = Pi^i Z_hat^i`` as a strategy over expanded blocks.

    ``Z_hat^i`` equals the informative expanded blocks minus the decision
    terms ``D U^j``; each ``U^j`` is replaced by member j's already
    realized strategy, which reads only blocks available to member i.
    """
    base = expanded.base
    sblocks = static_blocks(expanded)
    coeffs: dict[int, dict[str, np.ndarray]] = {}
    for i in range(1, base.n + 1):
        row: dict[str, np.ndarray] = {}
        pi = static.pi[i]
        avail = set(expanded.expanded_info[i])
        for b, sl in zip(sblocks[i], base.block_rows(sblocks[i])):
            pb = pi[:, sl]
            _add(row, b, pb)
            for j in base.blocks[b].nonzero_d():
                dj = base.blocks[b].d_rows[j]
                for bj, kj in coeffs[j].items():
                    if bj not in avail:
                        raise InternalError(
                            f"member {i} needs block {bj!r} of precedent {j}, absent from its expanded information"
                        )
                    _add(row, bj, -pb @ dj @ kj)
        coeffs[i] = row
    return LinearTeamStrategy(coeffs, "expanded")


def _available(problem: ProblemLike) -> tuple[TeamProblem, Mapping[int, tuple[str, ...]]]:
    if isinstance(problem, ExpandedProblem):
        return problem.base, problem.expanded_info
    return problem, problem.info_lists()


def composite(problem: ProblemLike, strategy: LinearTeamStrategy) -> CompositeControl:
    """Composite maps ``U^i = P^i xi`` and ``Z_b = z_b xi`` for every block."""
    base, avail = _available(problem)
    d_xi = base.d_xi
    p: dict[int, np.ndarray] = {}
    z: dict[str, np.ndarray] = {}

    def block_map(b: str) -> np.ndarray:
        if b not in z:
            blk = base.blocks[b]
            acc = blk.h_rows.copy()
            for j in blk.nonzero_d():
                if j not in p:
                    raise InternalError(f"block {b!r} depends on member {j} before it has acted")
                acc = acc + blk.d_rows[j] @ p[j]
            z[b] = acc
        return z[b]

    for i in range(1, base.n + 1):
        allowed = set(avail[i])
        acc = np.zeros((base.d_u(i), d_xi))
        for b, k in strategy.member_coeffs(i).items():
            if b not in allowed:
                raise InfoViolation(f"member {i} reads block {b!r}, which is not in its information")
            zb = block_map(b)
            if k.shape != (base.d_u(i), zb.shape[0]):
                raise DimensionMismatch(f"coefficient of member {i} on block {b!r} has shape {k.shape}")
            acc = acc + k @ zb
        p[i] = acc
    for b in base.blocks:
        block_map(b)
    return CompositeControl(MappingProxyType(p), MappingProxyType(z))


def expected_cost(problem: ProblemLike, strategy: LinearTeamStrategy) -> float:
    base, _ = _available(problem)
    comp = composite(problem, strategy)
    return quad_cost(base.m + base.n_full @ comp.stacked(), base.sigma)


def static_cost(problem: TeamProblem, static_obs: Mapping[int, np.ndarray], static: StaticStrategy) -> float:
    """Cost of ``U^i = Pi^i H_hat^i xi`` in the static team."""
    eff = problem.m.copy()
    for i in range(1, problem.n + 1):
        eff = eff + problem.member(i).n_block @ static.pi[i] @ static_obs[i]
    return quad_cost(eff, problem.sigma)
