import json

import numpy as np
import pytest

from teamsub.cli import main
from teamsub.generate import random_lqg_problem, random_team_problem
from teamsub.io import (
    dump_json,
    fixture_path,
    load_json,
    lqg_from_dict,
    lqg_to_dict,
    strategy_from_dict,
    strategy_to_dict,
    team_from_dict,
    team_to_dict,
)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_analyze_zero_cost_team(capsys):
    code, rep = run(capsys, "analyze", fixture_path("zero_cost_team"))
    assert code == 0
    assert rep["summary"] == "not partially nested; critical pair (1,2); substituting member 3"


def test_analyze_nested(capsys):
    code, rep = run(capsys, "analyze", fixture_path("nested"))
    assert code == 0 and rep["summary"] == "partially nested; nothing to do"


def test_analyze_orthogonal_exits_3(capsys):
    code, rep = run(capsys, "analyze", fixture_path("orthogonal_team"))
    assert code == 3
    assert rep["substitutability"]["failing_pairs"] == [[1, 2]]


def test_solve_team_shared_column_team_with_override(capsys):
    code, rep = run(capsys, "solve-team", fixture_path("shared_column_team"), "--pi-override", fixture_path("shared_column_pi"))
    assert code == 0
    np.testing.assert_allclose(rep["final_strategy"]["3"]["xi2"], [[-0.5]], atol=1e-12)
    assert rep["costs"]["original"] == pytest.approx(1.5, abs=1e-12)
    assert rep["costs"]["expanded"] == pytest.approx(1.5, abs=1e-12)


def test_solve_team_shared_column_team_minimum_norm(capsys):
    code, rep = run(capsys, "solve-team", fixture_path("shared_column_team"))
    assert code == 0 and rep["static"]["selection"] == "minimum-norm"
    assert rep["costs"]["original"] == pytest.approx(1.5, abs=1e-12)


def test_solve_lqg_scalar(capsys, tmp_path):
    out = tmp_path / "rep.json"
    code = main(["solve-lqg", str(fixture_path("lqg_scalar")), "--paths", "200", "--output", str(out)])
    assert code == 0
    rep = load_json(out)
    assert rep["costs"]["difference"] <= 1e-9
    assert rep["simulation"]["paths"] == 200
    assert len(rep["schedule"]["K"]) == 3


def test_solve_lqg_perfect_observation_note(capsys):
    code, rep = run(capsys, "solve-lqg", fixture_path("lqg_perfect_obs"), "--paths", "100")
    assert code == 0
    assert rep["perfect_observation"]["coordinate_embedding_max_error"] <= 1e-8
    assert any("pseudo-inverse" in w for w in rep["warnings"])


def test_solve_lqg_single_controller_note(capsys):
    code, rep = run(capsys, "solve-lqg", fixture_path("lqg_single"), "--paths", "50")
    assert code == 0 and "coincide" in rep["note"]
    assert rep["simulation"]["mean_centralized"] == rep["simulation"]["mean_decentralized"]


def test_solve_lqg_orthogonal_exits_3(capsys):
    code, rep = run(capsys, "solve-lqg", fixture_path("lqg_orthogonal"))
    assert code == 3
    assert rep["substitutability"]["failing_controllers"] == [1, 2]


def test_simulate_mode(capsys):
    code, rep = run(capsys, "simulate", fixture_path("lqg_scalar"), "--mode", "centralized", "--paths", "30", "--seed", "2")
    assert code == 0
    assert rep["simulation"]["mean_decentralized"] is None
    code2, rep2 = run(capsys, "simulate", fixture_path("lqg_scalar"), "--mode", "centralized", "--paths", "30", "--seed", "2")
    assert rep2["simulation"] == rep["simulation"]


@pytest.mark.parametrize("content", ["{not json", '{"sigma": [[1]]}', '{"sigma": "x", "M": [[1]], "members": []}'])
def test_parse_errors_exit_2(tmp_path, capsys, content):
    f = tmp_path / "bad.json"
    f.write_text(content)
    code, rep = run(capsys, "solve-team", f)
    assert code == 2 and "error" in rep


def test_missing_file_exits_2(tmp_path, capsys):
    code, _ = run(capsys, "analyze", tmp_path / "absent.json")
    assert code == 2


def test_invalid_problem_exits_2(tmp_path, capsys):
    d = load_json(fixture_path("zero_cost_team"))
    d["sigma"] = [[-1.0]]
    f = tmp_path / "neg.json"
    f.write_text(json.dumps(d))
    code, rep = run(capsys, "analyze", f)
    assert code == 2 and "Sigma: not positive definite" in rep["errors"]


def test_bad_pi_override_exits_3(tmp_path, capsys):
    f = tmp_path / "pi.json"
    f.write_text(json.dumps({"1": [[0.0]], "2": [[1.0]], "3": [[1.0]]}))
    code, _ = run(capsys, "solve-team", fixture_path("shared_column_team"), "--pi-override", f)
    assert code == 3


def test_generate_then_solve(tmp_path, capsys):
    f = tmp_path / "team.json"
    assert main(["generate", "--kind", "team", "--seed", "7", "--output", str(f)]) == 0
    capsys.readouterr()
    code, rep = run(capsys, "solve-team", f)
    assert code == 0 and rep["costs"]["difference"] <= 1e-7
    g = tmp_path / "lqg.json"
    assert main(["generate", "--kind", "lqg", "--seed", "7", "--output", str(g)]) == 0
    capsys.readouterr()
    code, _ = run(capsys, "solve-lqg", g, "--paths", "50")
    assert code == 0


def test_generate_rejects_oversized_dims(capsys):
    code, rep = run(capsys, "generate", "--kind", "team", "--n", "9")
    assert code == 2 and "n=9" in rep["error"]


def test_nonpositive_paths_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["simulate", str(fixture_path("lqg_scalar")), "--paths", "0"])


@pytest.mark.parametrize("seed", range(5))
def test_team_round_trip(seed):
    p = random_team_problem(seed)
    text = dump_json(team_to_dict(p))
    assert team_to_dict(team_from_dict(json.loads(text))) == team_to_dict(p)


@pytest.mark.parametrize("seed", range(5))
def test_lqg_round_trip(seed):
    p = random_lqg_problem(seed)
    q = lqg_from_dict(json.loads(dump_json(lqg_to_dict(p))))
    np.testing.assert_array_equal(q.a, p.a)
    np.testing.assert_array_equal(q.sigma_v, p.sigma_v)
    assert lqg_to_dict(q) == lqg_to_dict(p)


def test_strategy_round_trip():
    s = strategy_from_dict(load_json(fixture_path("shared_column_strategy")), "expanded")
    again = strategy_from_dict(json.loads(dump_json(strategy_to_dict(s))), "expanded")
    assert strategy_to_dict(again) == strategy_to_dict(s)


def test_report_round_trips(tmp_path, capsys):
    out = tmp_path / "r.json"
    main(["solve-team", str(fixture_path("zero_cost_team")), "--output", str(out)])
    rep = load_json(out)
    assert json.loads(dump_json(rep)) == rep
    final = strategy_from_dict(rep["final_strategy"])
    assert strategy_to_dict(final) == rep["final_strategy"]


def test_inconsistent_shared_block_rejected(capsys, tmp_path):
    d = load_json(fixture_path("shared_column_team"))
    d["members"][2]["info_blocks"][0]["H_rows"] = [[1.0, 1.0]]
    f = tmp_path / "x.json"
    f.write_text(json.dumps(d))
    code, rep = run(capsys, "analyze", f)
    assert code == 2 and "inconsistently" in rep["error"]
