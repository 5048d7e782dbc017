import json
import os
import subprocess
import sys

import numpy as np
import pytest

from semnav.cli import main
from semnav.generators import Family, generate_environment
from semnav.gridworld import Direction, GoalSpec, load_environment, make_environment, save_environment
from semnav.planning import astar

from stub_server import StubServer


def test_gen_writes_loadable_deterministic_file(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["gen", "--family", "SmallHShape", "--seed", "1", "--out", str(out1)]) == 0
    assert main(["gen", "--family", "SmallHShape", "--seed", "1", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert load_environment(out1.read_bytes()).shape == (11, 7)


def test_gen_rejects_invalid_params(capsys):
    assert main(["gen", "--family", "SmallHShape", "--noise", "2"]) == 2
    assert "error" in capsys.readouterr().err


def test_run_success_trace_and_frames(tmp_path, capsys):
    env = generate_environment(Family.SMALL_H_SHAPE, 1)
    path = tmp_path / "env.json"
    path.write_bytes(save_environment(env))
    goal = GoalSpec.resolve(env, "505")
    script = [ "right", "right", "right", "right"]  # ignored after the goal is seen
    (tmp_path / "script.json").write_text(json.dumps(script))
    code = main([
        "run", "--env", str(path), "--goal", "Go to Room 505", "--predictor", f"scripted:{tmp_path / 'script.json'}",
        "--trace", str(tmp_path / "trace.ndjson"), "--render", "ascii", "--out", str(tmp_path / "frames"),
    ])
    summary = json.loads(capsys.readouterr().out)
    assert code == 0 and summary["status"] == "Success"
    frames = sorted((tmp_path / "frames").iterdir())
    assert len(frames) == summary["steps"] + 1
    assert frames[0].name == "step_0000.txt"
    lines = (tmp_path / "trace.ndjson").read_text().splitlines()
    assert len(lines) == summary["steps"] + 1
    assert json.loads(lines[-1])["status"] == "Success"


def test_run_exhausted_exit_code(tmp_path, capsys):
    env = make_environment(["..#.D"], start=(0, 0), doors={(0, 4): "9"})
    path = tmp_path / "env.json"
    path.write_bytes(save_environment(env))
    assert main(["run", "--env", str(path), "--goal", "room 9", "--k", "3"]) == 1
    assert json.loads(capsys.readouterr().out)["status"] == "Exhausted"


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--goal", "room 5"],
        ["run", "--family", "SmallPlaza", "--goal", "wander"],
        ["run", "--family", "SmallPlaza", "--goal", "room 999"],
        ["run", "--family", "SmallPlaza", "--goal", "room 405", "--predictor", "psychic"],
        ["run", "--family", "SmallPlaza", "--goal", "room 405", "--env", "x.json"],
        ["run", "--env", "/nonexistent.json", "--goal", "room 1"],
        ["run", "--family", "SmallPlaza", "--goal", "room 405", "--k", "4"],
    ],
)
def test_run_config_errors(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("semnav: error:")


def test_run_step_and_frontier_policies(capsys):
    for policy in ("frontier", "frontier-nearest", "step-llm", "history-llm"):
        code = main(["run", "--family", "SmallPlaza", "--seed", "2", "--goal", "room 405", "--policy", policy])
        out = json.loads(capsys.readouterr().out)
        assert code == (0 if out["status"] == "Success" else 1)


def test_run_external_predictor_with_transcript_and_replay(tmp_path, capsys, monkeypatch):
    with StubServer(lambda req: {"region": "right"}) as server:
        monkeypatch.setenv("SEMNAV_PREDICTOR_URL", server.url)
        args = ["run", "--family", "SmallHShape", "--seed", "1", "--goal", "room 516"]
        main(args + ["--predictor", "external", "--transcript", str(tmp_path / "t.ndjson"), "--trace", str(tmp_path / "live.ndjson")])
        live = capsys.readouterr().out
    main(args + ["--replay", str(tmp_path / "t.ndjson"), "--trace", str(tmp_path / "replay.ndjson")])
    assert capsys.readouterr().out == live
    assert (tmp_path / "live.ndjson").read_text() == (tmp_path / "replay.ndjson").read_text()


def test_external_without_endpoint(monkeypatch, capsys):
    monkeypatch.delenv("SEMNAV_PREDICTOR_URL", raising=False)
    assert main(["run", "--family", "SmallPlaza", "--goal", "room 405", "--predictor", "external"]) == 2


def test_bench_outputs_and_determinism(tmp_path, capsys):
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"name": "t", "environments": [{"family": "SmallPlaza", "seed": 0, "goals": 2}]}))
    args = ["bench", "--suite", str(suite), "--policies", "ours+rule,frontier,step-random", "--seeds", "0-1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    table = capsys.readouterr().out
    assert "[Small]" in table
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "episodes.csv").exists()


def test_bench_errors(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"environments": []}))
    assert main(["bench", "--suite", str(empty)]) == 2
    assert main(["bench", "--suite", str(tmp_path / "missing.json")]) == 2
    assert main(["bench", "--suite", "bundled:small", "--policies", "teleport"]) == 2
    assert main(["bench", "--suite", "bundled:small", "--seeds", "x"]) == 2


def test_render_command(tmp_path, capsys):
    assert main(["render", "--family", "SmallPlaza", "--seed", "0"]) == 0
    assert "@" in capsys.readouterr().out
    out = tmp_path / "map.ppm"
    assert main(["render", "--family", "SmallPlaza", "--format", "ppm", "--out", str(out)]) == 0
    assert out.read_bytes().startswith(b"P6")


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "semnav.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "bench" in proc.stdout
