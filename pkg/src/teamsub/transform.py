"""Rewrite an expanded-structure strategy into one each member can implement.

Whenever member ``t`` reads information of a critical partner ``s``, that
term is removed from ``t`` and re-issued by a substituting member ``k`` (who
knows ``Z^s``) through the map ``Lambda^{kst}``.  The team's combined
effect ``N U`` and every information block are unchanged by each rewrite;
this is checked numerically after every step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .errors import AssumptionViolated, BadCertificate, InvarianceBroken, NothingToDo
from .static import ExpandedProblem, LinearTeamStrategy, composite
from .team import SubstitutionCertificate

__all__ = [
    "ViolationSet",
    "TraceStep",
    "TransformTrace",
    "Drift",
    "violations",
    "substitute_pair",
    "remove_violations",
    "measure_drift",
]


@dataclass(frozen=True)
class ViolationSet:
    sets: Mapping[int, frozenset]

    @property
    def total(self) -> int:
        return sum(len(v) for v in self.sets.values())

    def __getitem__(self, i: int) -> frozenset:
        return self.sets.get(i, frozenset())


class TraceStep(NamedTuple):
    l: int
    t: int
    s: int
    k: int
    nu_drift: float
    z_drift: float
    violations_after: int


@dataclass
class TransformTrace:
    iterations: list[TraceStep] = field(default_factory=list)

    def to_records(self) -> list[dict]:
        return [step._asdict() for step in self.iterations]


class Drift(NamedTuple):
    nu_drift: float
    z_drift: float


def _uses(k: np.ndarray, threshold: float) -> bool:
    return bool(np.any(np.abs(k) > threshold))


def violations(
    strategy: LinearTeamStrategy,
    expanded: ExpandedProblem,
    threshold: float = 0.0,
) -> ViolationSet:
    """Critical partners whose information each member's strategy reads.

    A coefficient on a block outside the member's own list is charged to the
    partner for which that block was adjoined during expansion.  Entries with
    magnitude ``<= threshold`` are ignored (default: exact zero only).
    """
    base = expanded.base
    sets = {}
    for i in range(1, base.n + 1):
        own = set(base.member(i).info)
        attr = expanded.attribution[i]
        e = set()
        if strategy.info_mode == "expanded":
            for b, k in strategy.member_coeffs(i).items():
                if b not in own and b in attr and _uses(k, threshold):
                    e.add(attr[b])
        sets[i] = frozenset(e)
    return ViolationSet(sets)


def _blocks_for(expanded: ExpandedProblem, t: int, s: int) -> list[str]:
    return [b for b, r in expanded.attribution[t].items() if r == s]


def substitute_pair(
    strategy: LinearTeamStrategy,
    expanded: ExpandedProblem,
    t: int,
    s: int,
    certificate: SubstitutionCertificate,
    threshold: float = 0.0,
) -> LinearTeamStrategy:
    """Move member t's use of ``Z^s`` to the substituting member."""
    if (certificate.s, certificate.t) != (s, t):
        raise BadCertificate(f"certificate is for pair ({certificate.s},{certificate.t}), not ({s},{t})")
    k = certificate.k
    base = expanded.base
    if not set(base.member(s).info) <= set(base.member(k).info):
        raise BadCertificate(f"Z^{s} is not a sub-vector of Z^{k}")
    coeffs = strategy.as_dict()
    row_t = coeffs.setdefault(t, {})
    moved = {b: row_t[b] for b in _blocks_for(expanded, t, s) if b in row_t}
    if not any(_uses(v, threshold) for v in moved.values()):
        raise NothingToDo(f"member {t} does not use Z^{s}")
    row_k = coeffs.setdefault(k, {})
    lam = certificate.lambda_kst
    for b, kts in moved.items():
        del row_t[b]
        extra = lam @ kts
        row_k[b] = row_k[b] + extra if b in row_k else extra
    return LinearTeamStrategy(coeffs, strategy.info_mode)


def measure_drift(
    before: LinearTeamStrategy,
    after: LinearTeamStrategy,
    expanded: ExpandedProblem,
) -> Drift:
    """Differences in ``N U`` and in every block map between two strategies."""
    base = expanded.base
    cb, ca = composite(expanded, before), composite(expanded, after)
    n = base.n_full
    nu = float(np.linalg.norm(n @ ca.stacked() - n @ cb.stacked()))
    z = max((float(np.linalg.norm(ca.z_composite[b] - cb.z_composite[b])) for b in base.blocks), default=0.0)
    return Drift(nu, z)


def _scale(comp, n) -> tuple[float, float]:
    nu = float(np.linalg.norm(n @ comp.stacked()))
    z = max((float(np.linalg.norm(v)) for v in comp.z_composite.values()), default=0.0)
    return nu, z


def remove_violations(
    strategy: LinearTeamStrategy,
    expanded: ExpandedProblem,
    certificates: Mapping[tuple[int, int], SubstitutionCertificate],
    *,
    drift_checks: bool = True,
    drift_tol: float = 1e-9,
    threshold: float = 0.0,
) -> tuple[LinearTeamStrategy, TransformTrace]:
    """Remove every information violation, one critical partner at a time.

    Members are processed in increasing order and, for each, partners are
    removed smallest first.  Returns the final strategy (tagged
    ``original``) and the per-iteration trace.
    """
    base = expanded.base
    trace = TransformTrace()
    current = strategy
    if threshold > 0:
        current = LinearTeamStrategy(
            {i: {b: np.where(np.abs(k) > threshold, k, 0.0) for b, k in row.items()} for i, row in current.coeffs.items()},
            current.info_mode,
        )
    e = {i: set(v) for i, v in violations(current, expanded, threshold).sets.items()}
    remaining = sum(len(v) for v in e.values())
    missing = sorted((s, t) for t, ss in e.items() for s in ss if (s, t) not in certificates)
    if missing:
        raise AssumptionViolated(f"no substitution certificate for pair(s) {missing}", pairs=missing)

    n_full = base.n_full
    l = 0
    for t in range(1, base.n + 1):
        while e[t]:
            s = min(e[t])
            cert = certificates[(s, t)]
            nxt = substitute_pair(current, expanded, t, s, cert, threshold)
            e[t].discard(s)
            remaining -= 1
            nu_d = z_d = 0.0
            if drift_checks:
                nu_d, z_d = measure_drift(current, nxt, expanded)
                nu_s, z_s = _scale(composite(expanded, current), n_full)
                if nu_d > drift_tol * (1 + nu_s) or z_d > drift_tol * (1 + z_s):
                    raise InvarianceBroken(
                        f"rewrite of pair ({s},{t}) via member {cert.k} changed N U by {nu_d:.3g} "
                        f"and information by {z_d:.3g}",
                        pair=(s, t),
                        nu_drift=nu_d,
                        z_drift=z_d,
                    )
            trace.iterations.append(TraceStep(l, t, s, cert.k, nu_d, z_d, remaining))
            current = nxt
            l += 1

    left = violations(current, expanded, threshold)
    if left.total:
        raise InvarianceBroken(f"violations remain after rewriting: {dict(left.sets)}")
    # drop coefficients on blocks the member cannot see (all zero by now)
    final = {}
    for i in range(1, base.n + 1):
        own = set(base.member(i).info)
        final[i] = {b: k for b, k in current.member_coeffs(i).items() if b in own}
    return LinearTeamStrategy(final, "original"), trace
