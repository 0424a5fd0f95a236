"""JSON file formats for team problems, strategies and LQG problems.

Matrices are arrays of row arrays.  Floats are written with ``repr``
precision, so every file round-trips exactly.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ParseError
from .lqg import GainSchedule, LqgProblem
from .static import LinearTeamStrategy
from .team import InfoBlock, Member, TeamProblem

__all__ = [
    "matrix_from_json",
    "matrix_to_json",
    "team_from_dict",
    "team_to_dict",
    "strategy_from_dict",
    "strategy_to_dict",
    "lqg_from_dict",
    "lqg_to_dict",
    "schedule_to_dict",
    "load_json",
    "dump_json",
    "load_team",
    "load_lqg",
    "load_strategy",
    "load_pi_override",
    "fixture_path",
]


def matrix_from_json(obj, name: str = "matrix", cols: int | None = None) -> np.ndarray:
    try:
        m = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{name}: not a numeric matrix ({exc})") from None
    if m.ndim == 1 and m.size == 0:
        m = m.reshape(0, cols or 0)
    if m.ndim != 2:
        raise ParseError(f"{name}: expected an array of row arrays, got {m.ndim}-D data")
    return m


def matrix_to_json(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _get(d: Mapping, key: str, where: str):
    if not isinstance(d, Mapping):
        raise ParseError(f"{where}: expected an object")
    if key not in d:
        raise ParseError(f"{where}: missing field {key!r}")
    return d[key]


def team_from_dict(d: Mapping[str, Any]) -> TeamProblem:
    sigma = matrix_from_json(_get(d, "sigma", "problem"), "sigma")
    m = matrix_from_json(_get(d, "M", "problem"), "M")
    raw_members = _get(d, "members", "problem")
    if not isinstance(raw_members, list):
        raise ParseError("members: expected a list")
    if "n" in d and d["n"] != len(raw_members):
        raise ParseError(f"n={d['n']} but {len(raw_members)} members are listed")
    if "d_xi" in d and d["d_xi"] != sigma.shape[0]:
        raise ParseError(f"d_xi={d['d_xi']} but sigma is {sigma.shape}")
    blocks: dict[str, InfoBlock] = {}
    members = []
    for i, rm in enumerate(raw_members, start=1):
        where = f"member {i}"
        n_block = matrix_from_json(_get(rm, "N", where), f"{where} N")
        d_u = int(rm.get("d_u", n_block.shape[1]))
        ids = []
        for rb in _get(rm, "info_blocks", where):
            bid = str(_get(rb, "block_id", where))
            h = matrix_from_json(_get(rb, "H_rows", f"{where} block {bid}"), f"block {bid} H_rows", sigma.shape[0])
            raw_d = rb.get("D_rows", {}) or {}
            if not isinstance(raw_d, Mapping):
                raise ParseError(f"block {bid}: D_rows must be an object keyed by member index")
            try:
                dr = {int(j): matrix_from_json(v, f"block {bid} D_rows[{j}]") for j, v in raw_d.items()}
            except ValueError:
                raise ParseError(f"block {bid}: D_rows keys must be member indices") from None
            blk = InfoBlock(bid, h, dr)
            if bid in blocks and not blocks[bid].same_as(blk):
                raise ParseError(f"block {bid!r} is defined inconsistently by different members")
            blocks.setdefault(bid, blk)
            ids.append(bid)
        members.append(Member(i, d_u, n_block, tuple(ids)))
    return TeamProblem(sigma, m, members, blocks)


def team_to_dict(p: TeamProblem) -> dict:
    members = []
    for mb in p.members:
        infos = []
        for bid in mb.info:
            b = p.blocks[bid]
            infos.append({
                "block_id": bid,
                "H_rows": matrix_to_json(b.h_rows),
                "D_rows": {str(j): matrix_to_json(v) for j, v in sorted(b.d_rows.items())},
            })
        members.append({"d_u": mb.d_u, "N": matrix_to_json(mb.n_block), "info_blocks": infos})
    return {
        "n": p.n,
        "d_xi": p.d_xi,
        "sigma": matrix_to_json(p.sigma),
        "M": matrix_to_json(p.m),
        "members": members,
    }


def strategy_from_dict(d: Mapping[str, Any], info_mode: str = "original") -> LinearTeamStrategy:
    if "coeffs" in d:
        info_mode = d.get("info_mode", info_mode)
        d = d["coeffs"]
    coeffs = {}
    for i, row in d.items():
        try:
            i = int(i)
        except ValueError:
            raise ParseError(f"strategy: member key {i!r} is not an index") from None
        if not isinstance(row, Mapping):
            raise ParseError(f"strategy member {i}: expected an object of block coefficients")
        coeffs[i] = {str(b): matrix_from_json(k, f"strategy[{i}][{b}]") for b, k in row.items()}
    return LinearTeamStrategy(coeffs, info_mode)


def strategy_to_dict(s: LinearTeamStrategy) -> dict:
    return {str(i): {b: matrix_to_json(k) for b, k in row.items()} for i, row in sorted(s.coeffs.items())}


def lqg_from_dict(d: Mapping[str, Any]) -> LqgProblem:
    def mats(key):
        raw = _get(d, key, "LQG problem")
        if not isinstance(raw, list):
            raise ParseError(f"{key}: expected a list of matrices")
        return [matrix_from_json(x, f"{key}[{i}]") for i, x in enumerate(raw, start=1)]

    b, c, nb = mats("B_blocks"), mats("C_blocks"), mats("N_blocks")
    if "n" in d and not (d["n"] == len(b) == len(c) == len(nb)):
        raise ParseError(f"n={d['n']} does not match the number of B/C/N blocks")
    try:
        T = int(_get(d, "T", "LQG problem"))
    except (TypeError, ValueError):
        raise ParseError("T must be an integer") from None
    return LqgProblem(
        T=T,
        a=matrix_from_json(_get(d, "A", "LQG problem"), "A"),
        b_blocks=b,
        c_blocks=c,
        sigma_x=matrix_from_json(_get(d, "Sigma_x", "LQG problem"), "Sigma_x"),
        sigma_w=matrix_from_json(_get(d, "Sigma_w", "LQG problem"), "Sigma_w"),
        sigma_v=matrix_from_json(_get(d, "Sigma_v", "LQG problem"), "Sigma_v"),
        m=matrix_from_json(_get(d, "M", "LQG problem"), "M"),
        n_blocks=nb,
    )


def lqg_to_dict(p: LqgProblem) -> dict:
    return {
        "n": p.n,
        "T": p.T,
        "A": matrix_to_json(p.a),
        "B_blocks": [matrix_to_json(x) for x in p.b_blocks],
        "C_blocks": [matrix_to_json(x) for x in p.c_blocks],
        "Sigma_x": matrix_to_json(p.sigma_x),
        "Sigma_w": matrix_to_json(p.sigma_w),
        "Sigma_v": matrix_to_json(p.sigma_v),
        "M": matrix_to_json(p.m),
        "N_blocks": [matrix_to_json(x) for x in p.n_blocks],
    }


def schedule_to_dict(s: GainSchedule) -> dict:
    return {
        "Lambda": [matrix_to_json(x) for x in s.lambdas],
        "K": [matrix_to_json(x) for x in s.k],
        "L": [matrix_to_json(x) for x in s.l],
        "prior_covariances": [matrix_to_json(x) for x in s.prior_covs],
        "posterior_covariances": [matrix_to_json(x) for x in s.post_covs],
    }


def load_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, allow_nan=False)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text


def load_team(path) -> TeamProblem:
    return team_from_dict(load_json(path))


def load_lqg(path) -> LqgProblem:
    return lqg_from_dict(load_json(path))


def load_strategy(path, info_mode: str = "original") -> LinearTeamStrategy:
    return strategy_from_dict(load_json(path), info_mode)


def load_pi_override(path) -> dict[int, np.ndarray]:
    raw = load_json(path)
    if not isinstance(raw, Mapping):
        raise ParseError("Pi override: expected an object keyed by member index")
    try:
        return {int(i): matrix_from_json(v, f"Pi^{i}") for i, v in raw.items()}
    except ValueError:
        raise ParseError("Pi override: keys must be member indices") from None


def fixture_path(name: str) -> Path:
    """Path of a JSON fixture shipped with the package (``zero_cost``, ``lqg_scalar``, ...)."""
    if not name.endswith(".json"):
        name += ".json"
    return Path(str(resources.files("teamsub") / "fixtures" / name))
