"""Finite-horizon decentralized LQG control with substitutable actions.

Model (t = 1..T)::

    X_{t+1} = A X_t + sum_i B^i U^i_t + W_t
    Y^i_t   = C^i X_t + V^i_t
    cost    = E sum_t |M X_t + N U_t|^2

The centralized optimum is ``U_t = K_t Z_t`` with ``Z_t`` the Kalman
estimate.  When every ``[B^i; N^i]`` spans the same column space, controller
``i`` can run ``U^i_t = Lambda^i K_t S^i_t`` where ``S^i_t`` is driven only by
its own observations and actions, and the per-controller statistics sum
to ``Z_t``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import (
    AssumptionViolated,
    DimensionMismatch,
    InvalidCovariance,
    InvarianceBroken,
    SingularInnovation,
)
from .linalg import DEFAULT_TOL, Tolerance, colspace_contains, pinv, psd_factor

__all__ = [
    "LqgProblem",
    "GainSchedule",
    "SimulationResult",
    "validate_lqg",
    "certify_lqg_substitutability",
    "kalman_schedule",
    "lqr_schedule",
    "synthesize",
    "decentralized_gains",
    "CentralizedController",
    "LocalController",
    "simulate",
    "closed_loop",
    "exact_cost",
    "sum_identity_residual",
    "transition_growth",
]

SUM_TOL = 1e-8


def _mat(a) -> np.ndarray:
    m = np.array(a, dtype=float, ndmin=2)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class LqgProblem:
    T: int
    a: np.ndarray
    b_blocks: tuple
    c_blocks: tuple
    sigma_x: np.ndarray
    sigma_w: np.ndarray
    sigma_v: np.ndarray
    m: np.ndarray
    n_blocks: tuple

    def __post_init__(self):
        for name in ("a", "sigma_x", "sigma_w", "sigma_v", "m"):
            object.__setattr__(self, name, _mat(getattr(self, name)))
        for name in ("b_blocks", "c_blocks", "n_blocks"):
            object.__setattr__(self, name, tuple(_mat(x) for x in getattr(self, name)))
        object.__setattr__(self, "T", int(self.T))

    @property
    def n(self) -> int:
        return len(self.b_blocks)

    @property
    def d_x(self) -> int:
        return self.a.shape[0]

    @property
    def d_u(self) -> list[int]:
        return [b.shape[1] for b in self.b_blocks]

    @property
    def d_y(self) -> list[int]:
        return [c.shape[0] for c in self.c_blocks]

    @property
    def B(self) -> np.ndarray:
        return np.hstack(self.b_blocks)

    @property
    def C(self) -> np.ndarray:
        return np.vstack(self.c_blocks)

    @property
    def N(self) -> np.ndarray:
        return np.hstack(self.n_blocks)

    def u_slices(self) -> list[slice]:
        return _slices(self.d_u)

    def y_slices(self) -> list[slice]:
        return _slices(self.d_y)


def _slices(sizes: Sequence[int]) -> list[slice]:
    out, o = [], 0
    for s in sizes:
        out.append(slice(o, o + s))
        o += s
    return out


@dataclass(frozen=True)
class GainSchedule:
    k: list            # K_t, t = 1..T (index 0 is t = 1)
    l: list            # L_t
    lambdas: list      # Lambda^i, i = 1..n (index 0 is controller 1)
    prior_covs: list   # error covariance before the update with Y_t
    post_covs: list    # error covariance after the update with Y_t
    riccati: list = field(default_factory=list)  # P_t, t = 1..T+1


@dataclass
class SimulationResult:
    seed: int
    paths: int
    mode: str
    cost_centralized: np.ndarray | None
    cost_decentralized: np.ndarray | None
    max_sum_residual: float
    trajectories: dict | None = None

    @staticmethod
    def _summary(c):
        if c is None:
            return None, None
        se = float(c.std(ddof=1) / np.sqrt(c.size)) if c.size > 1 else float("nan")
        return float(c.mean()), se

    @property
    def mean_centralized(self):
        return self._summary(self.cost_centralized)[0]

    @property
    def stderr_centralized(self):
        return self._summary(self.cost_centralized)[1]

    @property
    def mean_decentralized(self):
        return self._summary(self.cost_decentralized)[0]

    @property
    def stderr_decentralized(self):
        return self._summary(self.cost_decentralized)[1]


def _psd_issue(s: np.ndarray, name: str, tol: Tolerance, pd: bool) -> str | None:
    if s.shape[0] != s.shape[1]:
        return f"{name}: must be square, got {s.shape}"
    if s.size == 0:
        return None
    scale = np.abs(s).max()
    if np.abs(s - s.T).max() > tol.bound(scale):
        return f"{name}: not symmetric"
    w = np.linalg.eigvalsh(0.5 * (s + s.T))
    if pd and w.min() <= 0:
        return f"{name}: not positive definite"
    if w.min() < -tol.bound(scale):
        return f"{name}: not positive semidefinite"
    return None


def validate_lqg(problem: LqgProblem, allow_psd_noise: bool = False, tol: Tolerance = DEFAULT_TOL) -> list[str]:
    out = []
    p = problem
    arrays = [("A", p.a), ("Sigma_x", p.sigma_x), ("Sigma_w", p.sigma_w), ("Sigma_v", p.sigma_v), ("M", p.m)]
    for name, blocks in (("B", p.b_blocks), ("C", p.c_blocks), ("N", p.n_blocks)):
        arrays += [(f"{name}^{i}", x) for i, x in enumerate(blocks, start=1)]
    for name, x in arrays:
        if not np.all(np.isfinite(x)):
            out.append(f"{name}: non-finite entries")
    if out:
        return out
    if p.T < 1:
        out.append(f"T must be >= 1, got {p.T}")
    if p.n < 1:
        out.append("need at least one controller")
    if not (len(p.b_blocks) == len(p.c_blocks) == len(p.n_blocks)):
        out.append("B_blocks, C_blocks and N_blocks must have one entry per controller")
        return out
    dx = p.a.shape[0]
    if p.a.shape != (dx, dx):
        out.append(f"A: must be square, got {p.a.shape}")
    for i, (b, c, nb) in enumerate(zip(p.b_blocks, p.c_blocks, p.n_blocks), start=1):
        if b.shape[0] != dx:
            out.append(f"B^{i}: has {b.shape[0]} rows, expected d_x={dx}")
        if c.shape[1] != dx:
            out.append(f"C^{i}: has {c.shape[1]} columns, expected d_x={dx}")
        if nb.shape != (p.m.shape[0], b.shape[1]):
            out.append(f"N^{i}: has shape {nb.shape}, expected {(p.m.shape[0], b.shape[1])}")
    if p.m.shape[1] != dx:
        out.append(f"M: has {p.m.shape[1]} columns, expected d_x={dx}")
    dy = sum(c.shape[0] for c in p.c_blocks)
    for name, s, d in (("Sigma_x", p.sigma_x, dx), ("Sigma_w", p.sigma_w, dx), ("Sigma_v", p.sigma_v, dy)):
        if s.shape != (d, d):
            out.append(f"{name}: has shape {s.shape}, expected {(d, d)}")
    if out:
        return out
    for name, s, pd in (
        ("Sigma_x", p.sigma_x, False),
        ("Sigma_w", p.sigma_w, False),
        ("Sigma_v", p.sigma_v, not allow_psd_noise),
    ):
        issue = _psd_issue(s, name, tol, pd)
        if issue:
            out.append(issue)
    return out


def _require_valid(problem: LqgProblem, allow_psd_noise: bool = False) -> None:
    bad = validate_lqg(problem, allow_psd_noise)
    if bad:
        cls = InvalidCovariance if all("Sigma" in b for b in bad) else DimensionMismatch
        raise cls("invalid LQG problem: " + "; ".join(bad))


def certify_lqg_substitutability(problem: LqgProblem, tol: Tolerance = DEFAULT_TOL) -> list[np.ndarray]:
    """Return ``Lambda^i = [B^i; N^i]^+ [B; N]`` for every controller.

    Raises :class:`AssumptionViolated` naming each controller whose stacked
    actuation block does not span the full ``[B; N]`` column space.
    """
    full = np.vstack([problem.B, problem.N])
    lambdas, failures = [], []
    for i, (b, nb) in enumerate(zip(problem.b_blocks, problem.n_blocks), start=1):
        own = np.vstack([b, nb])
        fwd = colspace_contains(full, own, tol)
        back = colspace_contains(own, full, tol)
        if not (fwd.contained and back.contained):
            failures.append((i, max(fwd.max_residual, back.max_residual)))
            continue
        lam = pinv(own, tol) @ full
        lam.setflags(write=False)
        lambdas.append(lam)
    if failures:
        desc = ", ".join(f"controller {i} (residual {r:.3g})" for i, r in failures)
        raise AssumptionViolated(
            f"actuation blocks do not share a column space: {desc}",
            controllers=[i for i, _ in failures],
            residuals=[r for _, r in failures],
        )
    return lambdas


def kalman_schedule(problem: LqgProblem, allow_psd_noise: bool = False, tol: Tolerance = DEFAULT_TOL):
    """Filter gains ``L_t`` and error covariances for t = 1..T.

    ``Z_1 = L_1 Y_1`` and ``Z_{t+1} = (I - L_{t+1} C)(A Z_t + B U_t) + L_{t+1} Y_{t+1}``.
    Returns ``(gains, priors, posteriors)``.
    """
    _require_valid(problem, allow_psd_noise)
    a, c = problem.a, problem.C
    eye = np.eye(problem.d_x)
    prior = problem.sigma_x.copy()
    gains, priors, posts = [], [], []
    if allow_psd_noise and problem.sigma_v.size and np.linalg.eigvalsh(problem.sigma_v).min() <= 0:
        warnings.warn("Sigma_v is singular; innovations are inverted with the pseudo-inverse", RuntimeWarning, stacklevel=2)
    for _ in range(problem.T):
        s = c @ prior @ c.T + problem.sigma_v
        s = 0.5 * (s + s.T)
        try:
            if allow_psd_noise:
                raise np.linalg.LinAlgError
            chol = np.linalg.cholesky(s)
            gain = np.linalg.solve(chol.T, np.linalg.solve(chol, c @ prior)).T
        except np.linalg.LinAlgError:
            if not allow_psd_noise:
                raise SingularInnovation("innovation covariance is singular; Sigma_v must be positive definite")
            gain = prior @ c.T @ pinv(s, tol)
        post = (eye - gain @ c) @ prior
        post = 0.5 * (post + post.T)
        gains.append(gain)
        priors.append(prior)
        posts.append(post)
        prior = a @ post @ a.T + problem.sigma_w
        prior = 0.5 * (prior + prior.T)
    return gains, priors, posts


def lqr_schedule(problem: LqgProblem, tol: Tolerance = DEFAULT_TOL):
    """Backward Riccati recursion for stage cost ``|M x + N u|^2``.

    Singular ``N'N + B'PB`` is handled with the pseudo-inverse, which picks
    the minimum-norm gain.  Returns ``(K, P)`` with ``P[T] = 0``.
    """
    a, b, m, n = problem.a, problem.B, problem.m, problem.N
    p_next = np.zeros((problem.d_x, problem.d_x))
    ks, ps = [], [p_next]
    for _ in range(problem.T):
        g = n.T @ n + b.T @ p_next @ b
        f = n.T @ m + b.T @ p_next @ a
        gi = pinv(0.5 * (g + g.T), tol)
        k = -gi @ f
        p = m.T @ m + a.T @ p_next @ a - f.T @ gi @ f
        p_next = 0.5 * (p + p.T)
        ks.append(k)
        ps.append(p_next)
    return ks[::-1], ps[::-1]


def synthesize(problem: LqgProblem, allow_psd_noise: bool = False, tol: Tolerance = DEFAULT_TOL) -> GainSchedule:
    """Certify substitutability and compute every gain the controllers need."""
    _require_valid(problem, allow_psd_noise)
    lambdas = certify_lqg_substitutability(problem, tol)
    l, priors, posts = kalman_schedule(problem, allow_psd_noise, tol)
    k, p = lqr_schedule(problem, tol)
    return GainSchedule(k, l, lambdas, priors, posts, p)


def decentralized_gains(schedule: GainSchedule) -> list[list[np.ndarray]]:
    """``gains[i][t] = Lambda^{i+1} K_{t+1}`` (zero-based lists)."""
    return [[lam @ k for k in schedule.k] for lam in schedule.lambdas]


class CentralizedController:
    """``U_t = K_t Z_t`` with the Kalman estimate ``Z_t``; batched over rows."""

    def __init__(self, problem: LqgProblem, schedule: GainSchedule):
        self.p, self.s = problem, schedule
        self.t = 0
        self.z = None
        self.u = None

    def start(self, y):
        self.t = 0
        self.z = y @ self.s.l[0].T
        self.u = self.z @ self.s.k[0].T
        return self.u

    def step(self, y, u_applied=None):
        """Advance with the next observation; ``u_applied`` overrides the last action."""
        u = self.u if u_applied is None else u_applied
        self.t += 1
        self.z = _filter_update(self.p, self.s.l[self.t], self.z, u @ self.p.B.T, y)
        self.u = self.z @ self.s.k[self.t].T
        return self.u


class LocalController:
    """Controller ``i``'s statistic ``S^i`` and action ``U^i = G^i_t S^i``.

    Only this controller's observations ``Y^i`` are ever passed in.
    """

    def __init__(self, problem: LqgProblem, schedule: GainSchedule, i: int, gains=None):
        self.p, self.s, self.i = problem, schedule, i
        self.ysl = problem.y_slices()[i - 1]
        self.gains = gains if gains is not None else [schedule.lambdas[i - 1] @ k for k in schedule.k]
        self.t = 0
        self.state = None
        self.u = None

    def _li(self, t):
        return self.s.l[t][:, self.ysl]

    def start(self, y_i):
        self.t = 0
        self.state = y_i @ self._li(0).T
        self.u = self.state @ self.gains[0].T
        return self.u

    def step(self, y_i):
        p, t1 = self.p, self.t + 1
        l = self.s.l[t1]
        pred = self.state @ p.a.T + self.u @ p.b_blocks[self.i - 1].T
        self.state = pred - pred @ (l @ p.C).T + y_i @ self._li(t1).T
        self.t = t1
        self.u = self.state @ self.gains[t1].T
        return self.u


def _filter_update(p: LqgProblem, l_next, z, bu, y_next):
    pred = z @ p.a.T + bu
    return pred - pred @ (l_next @ p.C).T + y_next @ l_next.T


def _draw(problem: LqgProblem, paths: int, seed: int):
    """Per-path standard normal draws from independent substreams."""
    dx, dy, T = problem.d_x, sum(problem.d_y), problem.T
    width = dx + dy + (T - 1) * (dx + dy)
    out = np.empty((paths, width))
    for j in range(paths):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(j,))))
        out[j] = rng.standard_normal(width)
    fx, fw, fv = psd_factor(problem.sigma_x), psd_factor(problem.sigma_w), psd_factor(problem.sigma_v)
    x1 = out[:, :dx] @ fx.T
    v = [out[:, dx:dx + dy] @ fv.T]
    w = []
    o = dx + dy
    for _ in range(T - 1):
        w.append(out[:, o:o + dx] @ fw.T)
        v.append(out[:, o + dx:o + dx + dy] @ fv.T)
        o += dx + dy
    return x1, w, v


def simulate(
    problem: LqgProblem,
    schedule: GainSchedule,
    mode: str = "both",
    paths: int = 1000,
    seed: int = 0,
    record: bool = False,
    sum_tol: float = SUM_TOL,
) -> SimulationResult:
    """Monte Carlo run of the centralized and/or decentralized closed loops.

    Both loops see the same noise realisations.  In the decentralized loop
    the centralized estimate of that loop is also propagated and compared
    with the sum of local statistics at every step.
    """
    if mode not in ("centralized", "decentralized", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    if paths < 1:
        raise ValueError("paths must be >= 1")
    p = problem
    x1, w, v = _draw(p, paths, seed)
    ysl = p.y_slices()
    c, m, nmat = p.C, p.m, p.N
    rec = {"x": [], "s": [], "z": []} if record else None
    cost_c = cost_d = None
    resid = 0.0

    if mode in ("centralized", "both"):
        ctrl = CentralizedController(p, schedule)
        x = x1
        u = ctrl.start(x @ c.T + v[0])
        cost_c = np.zeros(paths)
        for t in range(p.T):
            e = x @ m.T + u @ nmat.T
            cost_c += np.einsum("ij,ij->i", e, e)
            if t + 1 < p.T:
                x = x @ p.a.T + u @ p.B.T + w[t]
                u = ctrl.step(x @ c.T + v[t + 1])

    if mode in ("decentralized", "both"):
        locs = [LocalController(p, schedule, i) for i in range(1, p.n + 1)]
        x = x1
        y = x @ c.T + v[0]
        us = [lc.start(y[:, ysl[i]]) for i, lc in enumerate(locs)]
        z = y @ schedule.l[0].T
        cost_d = np.zeros(paths)
        for t in range(p.T):
            u = np.hstack(us)
            s_sum = sum(lc.state for lc in locs)
            resid = max(resid, float(np.abs(z - s_sum).max()))
            if resid > sum_tol:
                raise InvarianceBroken(
                    f"sum of local statistics departs from the central estimate by {resid:.3g} at t={t + 1}",
                    t=t + 1,
                    residual=resid,
                )
            if record:
                rec["x"].append(x.copy())
                rec["s"].append(np.stack([lc.state.copy() for lc in locs]))
                rec["z"].append(z.copy())
            e = x @ m.T + u @ nmat.T
            cost_d += np.einsum("ij,ij->i", e, e)
            if t + 1 < p.T:
                x = x @ p.a.T + u @ p.B.T + w[t]
                y = x @ c.T + v[t + 1]
                z = _filter_update(p, schedule.l[t + 1], z, u @ p.B.T, y)
                us = [lc.step(y[:, ysl[i]]) for i, lc in enumerate(locs)]

    traj = None
    if record:
        traj = {k: np.stack(vals) for k, vals in rec.items() if vals}
    return SimulationResult(int(seed), int(paths), mode, cost_c, cost_d, resid, traj)


@dataclass(frozen=True)
class ClosedLoop:
    """Augmented linear system ``xi_{t+1} = F_t xi_t + G_t nu_t``.

    ``xi_1 = F0 nu_0`` with ``nu_0 ~ N(0, cov0)``; ``nu_t ~ N(0, cov)``
    and the stage error is ``H_t xi_t``.
    """

    f0: np.ndarray
    cov0: np.ndarray
    f: list
    g: list
    cov: np.ndarray
    h: list


def closed_loop(problem: LqgProblem, schedule: GainSchedule, mode: str, gains=None) -> ClosedLoop:
    """Closed-loop matrices over ``(X, Z)`` or ``(X, S^1, ..., S^n)``.

    ``gains`` optionally replaces the decentralized gains ``Lambda^i K_t``
    with arbitrary per-controller gains ``gains[i][t]``.
    """
    p = problem
    dx, T, n = p.d_x, p.T, p.n
    a, b, c, m, nm = p.a, p.B, p.C, p.m, p.N
    l = schedule.l
    eye = np.eye(dx)
    cov0 = block_diag(p.sigma_x, p.sigma_v)
    cov = block_diag(p.sigma_w, p.sigma_v)
    dy = c.shape[0]
    fs, gs, hs = [], [], []
    if mode == "centralized":
        f0 = np.block([[eye, np.zeros((dx, dy))], [l[0] @ c, l[0]]])
        for t in range(T):
            k = schedule.k[t]
            hs.append(np.hstack([m, nm @ k]))
            if t + 1 < T:
                ln = l[t + 1]
                f = np.block([
                    [a, b @ k],
                    [ln @ c @ a, (eye - ln @ c) @ (a + b @ k) + ln @ c @ b @ k],
                ])
                g = np.block([[eye, np.zeros((dx, dy))], [ln @ c, ln]])
                fs.append(f)
                gs.append(g)
        return ClosedLoop(f0, cov0, fs, gs, cov, hs)
    if mode != "decentralized":
        raise ValueError(f"unknown mode {mode!r}")

    if gains is None:
        gains = decentralized_gains(schedule)
    ysl = p.y_slices()
    size = dx * (n + 1)

    def sl(i):  # S^i coordinates, i = 1..n
        return slice(dx * i, dx * (i + 1))

    f0 = np.zeros((size, dx + dy))
    f0[:dx, :dx] = eye
    for i in range(1, n + 1):
        li = l[0][:, ysl[i - 1]]
        f0[sl(i), :dx] = li @ p.c_blocks[i - 1]
        f0[sl(i), dx + ysl[i - 1].start:dx + ysl[i - 1].stop] = li
    for t in range(T):
        h = np.zeros((m.shape[0], size))
        h[:, :dx] = m
        bg = np.zeros((dx, size))  # B U_t as a map of the augmented state
        for i in range(1, n + 1):
            h[:, sl(i)] = p.n_blocks[i - 1] @ gains[i - 1][t]
            bg[:, sl(i)] = p.b_blocks[i - 1] @ gains[i - 1][t]
        hs.append(h)
        if t + 1 < T:
            ln = l[t + 1]
            xrow = np.zeros((dx, size))
            xrow[:, :dx] = a
            xrow += bg
            f = np.zeros((size, size))
            g = np.zeros((size, dx + dy))
            f[:dx] = xrow
            g[:dx, :dx] = eye
            proj = eye - ln @ c
            for i in range(1, n + 1):
                lni = ln[:, ysl[i - 1]]
                ci = p.c_blocks[i - 1]
                own = proj @ (a + p.b_blocks[i - 1] @ gains[i - 1][t])
                f[sl(i), sl(i)] += own
                f[sl(i)] += lni @ ci @ xrow
                g[sl(i), :dx] = lni @ ci
                g[sl(i), dx + ysl[i - 1].start:dx + ysl[i - 1].stop] = lni
            fs.append(f)
            gs.append(g)
    return ClosedLoop(f0, cov0, fs, gs, cov, hs)


def exact_cost(problem: LqgProblem, schedule: GainSchedule, mode: str, gains=None) -> float:
    """Expected total cost by exact covariance propagation."""
    cl = closed_loop(problem, schedule, mode, gains)
    cov = cl.f0 @ cl.cov0 @ cl.f0.T
    total = 0.0
    for t, h in enumerate(cl.h):
        total += float(np.einsum("ij,jk,ik->", h, cov, h))
        if t < len(cl.f):
            cov = cl.f[t] @ cov @ cl.f[t].T + cl.g[t] @ cl.cov @ cl.g[t].T
            cov = 0.5 * (cov + cov.T)
    return total


def sum_identity_residual(problem: LqgProblem, schedule: GainSchedule) -> float:
    """Max relative residual of ``E F_dec = F_cen E`` and companions.

    ``E`` maps ``(X, S^1..S^n)`` to ``(X, sum_i S^i)``.  Summing the local
    statistic rows must reproduce the centralized estimator exactly, as
    must the stage error map; relative to ``1 + |centralized matrix|``.
    """
    cen = closed_loop(problem, schedule, "centralized")
    dec = closed_loop(problem, schedule, "decentralized")
    dx, n = problem.d_x, problem.n
    e = np.zeros((2 * dx, dx * (n + 1)))
    e[:dx, :dx] = np.eye(dx)
    for i in range(1, n + 1):
        e[dx:, dx * i:dx * (i + 1)] = np.eye(dx)

    def rel(lhs, rhs):
        return float(np.abs(lhs - rhs).max(initial=0.0) / (1.0 + np.abs(rhs).max(initial=0.0)))

    worst = rel(e @ dec.f0, cen.f0)
    for t in range(len(cen.h)):
        worst = max(worst, rel(dec.h[t], cen.h[t] @ e))
    for t in range(len(cen.f)):
        worst = max(worst, rel(e @ dec.f[t], cen.f[t] @ e), rel(e @ dec.g[t], cen.g[t]))
    return worst


def transition_growth(problem: LqgProblem, schedule: GainSchedule, mode: str = "decentralized", gains=None) -> float:
    """Largest spectral norm of any closed-loop transition product ``F_t ... F_s``.

    The local statistics can grow even when their sum stays small; rounding
    error in the cost and in the pathwise sum identity scales with this
    number.
    """
    cl = closed_loop(problem, schedule, mode, gains)
    worst = 1.0
    for start in range(len(cl.f)):
        phi = np.eye(cl.f0.shape[0])
        for f in cl.f[start:]:
            phi = f @ phi
            worst = max(worst, float(np.linalg.norm(phi, 2)))
    return worst
