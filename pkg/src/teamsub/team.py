"""One-shot LQG team problems: data model, precedence analysis and
substitutability certificates.

A problem is described by a registry of named information blocks.  Each
block is a group of rows ``H_b xi + sum_j D_bj u^j``; a member's information
is the stack of the blocks it lists.  Two members listing the same block id
observe the very same random vector, which is how sub-vector relations are
decided (no numeric row matching).

Members are indexed 1..n throughout the public API.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AssumptionViolated, BadIndex, InvalidMatrix
from .linalg import DEFAULT_TOL, Tolerance, colspace_contains, pinv

__all__ = [
    "InfoBlock",
    "Member",
    "TeamProblem",
    "PrecedenceStructure",
    "SubstitutionCertificate",
    "validate",
    "require_valid",
    "subvector",
    "analyze_precedence",
    "action_stack",
    "certify_substitutability",
    "infer_blocks",
]


def _frozen(a) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1) if m.size else m.reshape(0, 0)
    elif m.ndim == 0:
        m = m.reshape(1, 1)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class InfoBlock:
    block_id: str
    h_rows: np.ndarray
    d_rows: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "h_rows", _frozen(self.h_rows))
        d = {int(j): _frozen(v) for j, v in dict(self.d_rows).items()}
        object.__setattr__(self, "d_rows", MappingProxyType(d))

    @property
    def rows(self) -> int:
        return self.h_rows.shape[0]

    def d(self, j: int, d_u: int) -> np.ndarray:
        """Rows of ``D^{.j}`` for this block; zeros when absent."""
        if j in self.d_rows:
            return self.d_rows[j]
        return np.zeros((self.rows, d_u))

    def nonzero_d(self) -> list[int]:
        """Members whose action enters this block (exact-zero semantics)."""
        return sorted(j for j, v in self.d_rows.items() if np.any(v != 0))

    def same_as(self, other: "InfoBlock") -> bool:
        if self.h_rows.shape != other.h_rows.shape or np.any(self.h_rows != other.h_rows):
            return False
        keys = set(self.nonzero_d()) | set(other.nonzero_d())
        for j in keys:
            a, b = self.d_rows.get(j), other.d_rows.get(j)
            if a is None or b is None or a.shape != b.shape or np.any(a != b):
                return False
        return True


@dataclass(frozen=True)
class Member:
    index: int
    d_u: int
    n_block: np.ndarray
    info: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "n_block", _frozen(self.n_block))
        object.__setattr__(self, "info", tuple(self.info))


@dataclass(frozen=True)
class TeamProblem:
    """Problem instance: cost ``E|M xi + N u|^2`` with ``xi ~ N(0, sigma)``."""

    sigma: np.ndarray
    m: np.ndarray
    members: tuple[Member, ...]
    blocks: Mapping[str, InfoBlock]

    def __post_init__(self):
        object.__setattr__(self, "sigma", _frozen(self.sigma))
        object.__setattr__(self, "m", _frozen(self.m))
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "blocks", MappingProxyType(dict(self.blocks)))

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def d_xi(self) -> int:
        return self.sigma.shape[0]

    def member(self, i: int) -> Member:
        if not isinstance(i, (int, np.integer)) or not 1 <= i <= self.n:
            raise BadIndex(f"member index {i!r} outside 1..{self.n}")
        return self.members[i - 1]

    def d_u(self, i: int) -> int:
        return self.member(i).d_u

    @property
    def n_full(self) -> np.ndarray:
        return np.hstack([mb.n_block for mb in self.members])

    def info_lists(self) -> dict[int, tuple[str, ...]]:
        return {mb.index: mb.info for mb in self.members}

    def stack_h(self, block_ids: Sequence[str]) -> np.ndarray:
        if not block_ids:
            return np.zeros((0, self.d_xi))
        return np.vstack([self.blocks[b].h_rows for b in block_ids])

    def stack_d(self, block_ids: Sequence[str], j: int) -> np.ndarray:
        du = self.d_u(j)
        if not block_ids:
            return np.zeros((0, du))
        return np.vstack([self.blocks[b].d(j, du) for b in block_ids])

    def block_rows(self, block_ids: Sequence[str]) -> list[slice]:
        out, r = [], 0
        for b in block_ids:
            k = self.blocks[b].rows
            out.append(slice(r, r + k))
            r += k
        return out


@dataclass(frozen=True)
class PrecedenceStructure:
    related: np.ndarray                      # related[s-1, t-1] <=> D^{ts} != 0
    precedents: Mapping[int, frozenset]
    critical: Mapping[int, frozenset]

    @property
    def partially_nested(self) -> bool:
        return all(not c for c in self.critical.values())

    @property
    def critical_pairs(self) -> list[tuple[int, int]]:
        return sorted((s, t) for t, cs in self.critical.items() for s in cs)


@dataclass(frozen=True)
class SubstitutionCertificate:
    s: int
    t: int
    k: int
    lambda_kst: np.ndarray
    containment_residual: float


def validate(problem: TeamProblem, tol: Tolerance = DEFAULT_TOL) -> list[str]:
    """Return a list of human-readable violations; empty means valid."""
    out: list[str] = []
    sigma, m = problem.sigma, problem.m
    arrays = [("Sigma", sigma), ("M", m)]
    arrays += [(f"N^{mb.index}", mb.n_block) for mb in problem.members]
    for b in problem.blocks.values():
        arrays.append((f"block {b.block_id!r} H", b.h_rows))
        arrays += [(f"block {b.block_id!r} D[{j}]", v) for j, v in b.d_rows.items()]
    for name, a in arrays:
        if not np.all(np.isfinite(a)):
            out.append(f"{name}: non-finite entries")
    if out:
        return out

    d_xi = sigma.shape[0]
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or d_xi == 0:
        out.append(f"Sigma: must be a non-empty square matrix, got shape {sigma.shape}")
        return out
    if np.abs(sigma - sigma.T).max() > tol.bound(np.abs(sigma).max()):
        out.append("Sigma: not symmetric")
    elif np.linalg.eigvalsh(sigma).min() <= 0:
        out.append("Sigma: not positive definite")
    if m.shape[1] != d_xi:
        out.append(f"M: has {m.shape[1]} columns, expected d_xi={d_xi}")

    n = problem.n
    for pos, mb in enumerate(problem.members, start=1):
        if mb.index != pos:
            out.append(f"member {pos}: index field is {mb.index}")
        if mb.d_u < 1:
            out.append(f"member {pos}: d_u must be >= 1, got {mb.d_u}")
        if mb.n_block.shape != (m.shape[0], mb.d_u):
            out.append(
                f"member {pos}: N^{pos} has shape {mb.n_block.shape}, "
                f"expected {(m.shape[0], mb.d_u)}"
            )
        if len(set(mb.info)) != len(mb.info):
            out.append(f"member {pos}: repeated block ids in info list")
        for bid in mb.info:
            if bid not in problem.blocks:
                out.append(f"member {pos}: unknown block {bid!r}")

    d_us = {mb.index: mb.d_u for mb in problem.members}
    for b in problem.blocks.values():
        if b.h_rows.ndim != 2 or b.h_rows.shape[1] != d_xi:
            out.append(f"block {b.block_id!r}: H rows have shape {b.h_rows.shape}, expected d_xi={d_xi} columns")
            continue
        for j, v in b.d_rows.items():
            if j not in d_us:
                out.append(f"block {b.block_id!r}: D refers to unknown member {j}")
            elif v.shape != (b.rows, d_us[j]):
                out.append(
                    f"block {b.block_id!r}: D[{j}] has shape {v.shape}, expected {(b.rows, d_us[j])}"
                )
    if out:
        return out

    # sequencing: information of member i may depend only on members 1..i-1
    for mb in problem.members:
        for bid in mb.info:
            for j in problem.blocks[bid].nonzero_d():
                if j >= mb.index:
                    out.append(
                        f"member {mb.index}, block {bid!r}: D^{{{mb.index}{j}}} must be zero "
                        f"since decisions are sequential (j >= i)"
                    )
    return out


def require_valid(problem: TeamProblem) -> None:
    bad = validate(problem)
    if bad:
        raise InvalidMatrix("invalid team problem: " + "; ".join(bad))


def subvector(problem: TeamProblem, s: int, k: int, info: Mapping[int, Sequence[str]] | None = None) -> bool:
    """True iff every block of member ``s`` is also a block of member ``k``."""
    problem.member(s), problem.member(k)
    info = problem.info_lists() if info is None else info
    return set(info[s]) <= set(info[k])


def _transitive_closure(rel: np.ndarray) -> np.ndarray:
    reach = rel.copy()
    for k in range(reach.shape[0]):
        reach |= np.outer(reach[:, k], reach[k, :])
    return reach


def analyze_precedence(problem: TeamProblem, info: Mapping[int, Sequence[str]] | None = None) -> PrecedenceStructure:
    """Relation, precedents and critical pairs for the given information lists.

    ``info`` defaults to the members' own lists; passing an expanded map
    analyses the expanded structure instead.
    """
    info = problem.info_lists() if info is None else info
    n = problem.n
    rel = np.zeros((n, n), dtype=bool)
    for t in range(1, n + 1):
        for bid in info[t]:
            for s in problem.blocks[bid].nonzero_d():
                rel[s - 1, t - 1] = True
    reach = _transitive_closure(rel)
    rel.setflags(write=False)
    precedents, critical = {}, {}
    for t in range(1, n + 1):
        p = frozenset(int(s) + 1 for s in np.flatnonzero(reach[:, t - 1]))
        precedents[t] = p
        critical[t] = frozenset(s for s in p if not set(info[s]) <= set(info[t]))
    return PrecedenceStructure(rel, MappingProxyType(precedents), MappingProxyType(critical))


def action_stack(problem: TeamProblem, i: int) -> np.ndarray:
    """``[N^i; D^{1i}; ...; D^{ni}]`` with each ``D^{mi}`` over member m's blocks."""
    parts = [problem.member(i).n_block]
    for mb in problem.members:
        parts.append(problem.stack_d(mb.info, i))
    return np.vstack(parts)


def certify_substitutability(
    problem: TeamProblem,
    structure: PrecedenceStructure,
    tol: Tolerance = DEFAULT_TOL,
) -> dict[tuple[int, int], SubstitutionCertificate]:
    """Find a substituting member for every critical pair.

    The smallest index ``k`` whose information contains that of ``s`` and
    whose action stack spans the stack of ``t`` is chosen.  Raises
    :class:`AssumptionViolated` listing every pair without such a member.
    """
    certs: dict[tuple[int, int], SubstitutionCertificate] = {}
    failures = []
    stacks = {i: action_stack(problem, i) for i in range(1, problem.n + 1)}
    for s, t in structure.critical_pairs:
        target = stacks[t]
        best = np.inf
        for k in range(1, problem.n + 1):
            if not subvector(problem, s, k):
                continue
            cont = colspace_contains(target, stacks[k], tol)
            best = min(best, cont.max_residual)
            if cont.contained:
                lam = pinv(stacks[k], tol) @ target
                resid = float(np.linalg.norm(stacks[k] @ lam - target))
                lam.setflags(write=False)
                certs[(s, t)] = SubstitutionCertificate(s, t, k, lam, resid)
                break
        else:
            failures.append(((s, t), float(best)))
    if failures:
        desc = ", ".join(
            f"({s},{t}) best residual {r:.3g}" if np.isfinite(r) else f"({s},{t}) no member knows Z^{s}"
            for (s, t), r in failures
        )
        raise AssumptionViolated(
            f"no substituting member for critical pair(s): {desc}",
            pairs=[p for p, _ in failures],
            best_residuals=[r for _, r in failures],
        )
    return certs


def infer_blocks(
    sigma,
    m,
    n_blocks: Sequence,
    h: Sequence,
    d: Mapping[tuple[int, int], object] | None = None,
) -> TeamProblem:
    """Build a problem from raw ``H^i`` / ``D^{ij}`` matrices.

    Every distinct row ``(H^i_r, D^{i1}_r, ..., D^{in}_r)`` becomes its own
    one-row block; rows that are bitwise identical across members share a
    block id, so a member's information is a sub-vector of another's exactly
    when all its rows reappear there.  Rows repeated within one member are
    kept once.
    """
    d = dict(d or {})
    n = len(n_blocks)
    n_blocks = [_frozen(x) for x in n_blocks]
    d_us = [x.shape[1] for x in n_blocks]
    seen: dict[bytes, str] = {}
    blocks: dict[str, InfoBlock] = {}
    members = []
    for i in range(1, n + 1):
        hi = _frozen(h[i - 1])
        ids: list[str] = []
        for r in range(hi.shape[0]):
            drow = {}
            for j in range(1, n + 1):
                if (i, j) in d:
                    row = _frozen(d[(i, j)])[r]
                    if np.any(row != 0):
                        drow[j] = row.reshape(1, -1)
            key = hi[r].tobytes() + b"|" + b"|".join(
                f"{j}:".encode() + drow[j].tobytes() for j in sorted(drow)
            )
            if key not in seen:
                bid = f"r{len(seen) + 1}"
                seen[key] = bid
                blocks[bid] = InfoBlock(bid, hi[r].reshape(1, -1), drow)
            if seen[key] not in ids:
                ids.append(seen[key])
        members.append(Member(i, d_us[i - 1], n_blocks[i - 1], tuple(ids)))
    return TeamProblem(sigma, m, members, blocks)


def members_using(problem: TeamProblem, block_id: str) -> list[int]:
    return [mb.index for mb in problem.members if block_id in mb.info]


def block_union(info: Mapping[int, Sequence[str]], members: Iterable[int]) -> list[str]:
    out: list[str] = []
    for i in members:
        for b in info[i]:
            if b not in out:
                out.append(b)
    return out
