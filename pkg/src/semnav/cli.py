"""Command-line interface: ``semnav gen | run | bench | render``.

Exit codes: 0 success; 1 the episode did not succeed (``run``); 2 bad
arguments, unreadable inputs or invalid environments.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import agent as agent_mod
from .agent import AgentConfig, NoGoalFound, Policy, extract_goal
from .belief import ConfidenceGrid
from .benchmark import POLICY_NAMES, SuiteError, bundled_suite, load_suite, run_benchmark, write_report
from .evaluation import episode_return
from .generators import Family, GenerationError, GeneratorParams, generate_environment
from .gridworld import GridworldError, load_environment, save_environment
from .perception import AgentBelief
from .predictor import (
    ExternalPredictor,
    ReplayPredictor,
    RuleBasedPredictor,
    ScriptedPredictor,
    TranscriptLog,
    UniformPredictor,
    load_transcript,
)
from .render import RenderSpec, render

ENDPOINT_ENV = "SEMNAV_PREDICTOR_URL"
RUN_POLICIES = {
    "ours": Policy.OURS,
    "frontier": Policy.FRONTIER,
    "frontier-nearest": Policy.FRONTIER,
    "step-llm": Policy.STEP_LLM,
    "history-llm": Policy.HISTORY_LLM,
}


class CliError(Exception):
    pass


def _fail(message: str, code: int = 2) -> int:
    print(f"semnav: error: {message}", file=sys.stderr)
    return code


def _write_bytes(data: bytes, out: str | None):
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)


def _generator_params(args) -> GeneratorParams | None:
    values = {}
    if args.noise is not None:
        values["noise"] = args.noise
    if args.rooms is not None:
        values["rooms"] = args.rooms
    if not values:
        return None
    params = GeneratorParams(**values)
    params.validate()
    return params


def cmd_gen(args) -> int:
    try:
        env = generate_environment(args.family, args.seed, _generator_params(args))
    except (GenerationError, ValueError) as exc:
        return _fail(str(exc))
    _write_bytes(save_environment(env), args.out)
    return 0


def _load_env(args):
    if args.env is not None:
        if args.family is not None:
            raise CliError("give either --env or --family, not both")
        try:
            return load_environment(Path(args.env).read_bytes())
        except OSError as exc:
            raise CliError(f"cannot read {args.env}: {exc}") from None
    if args.family is None:
        raise CliError("an environment is required: --env PATH or --family NAME [--seed N]")
    return generate_environment(args.family, args.seed, _generator_params(args))


def _read_json_list(path: str, what: str) -> list:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {what} {path}: {exc}") from None
    if not isinstance(doc, list):
        raise CliError(f"{what} {path} must hold a JSON list")
    return doc


def _endpoint(spec_rest: str) -> str:
    endpoint = spec_rest or os.environ.get(ENDPOINT_ENV, "")
    if not endpoint:
        raise CliError(f"external predictor needs an endpoint (external:<url> or ${ENDPOINT_ENV})")
    return endpoint


def build_predictor(spec: str, transcript: TranscriptLog | None, replay: str | None):
    """rule | uniform:<seed> | scripted:<path> | external[:<endpoint>]"""
    if replay is not None:
        return ReplayPredictor.from_file(replay)
    kind, _, rest = spec.partition(":")
    if kind == "rule":
        return RuleBasedPredictor()
    if kind == "uniform":
        try:
            return UniformPredictor(int(rest or 0))
        except ValueError:
            raise CliError(f"uniform predictor seed must be an integer, got {rest!r}") from None
    if kind == "scripted":
        return ScriptedPredictor(_read_json_list(rest, "predictor script"))
    if kind == "external":
        return ExternalPredictor(_endpoint(rest), transcript=transcript)
    raise CliError(f"unknown predictor {spec!r}")


def build_chooser(spec: str, transcript: TranscriptLog | None, replay: str | None):
    """random:<seed> | scripted:<path> | external[:<endpoint>]"""
    if replay is not None:
        return agent_mod.ReplayActionChooser(load_transcript(replay))
    kind, _, rest = spec.partition(":")
    if kind == "random":
        try:
            return agent_mod.RandomActionChooser(int(rest or 0))
        except ValueError:
            raise CliError(f"random chooser seed must be an integer, got {rest!r}") from None
    if kind == "scripted":
        return agent_mod.ScriptedActionChooser(_read_json_list(rest, "action script"))
    if kind == "external":
        return agent_mod.ExternalActionChooser(_endpoint(rest), transcript=transcript)
    raise CliError(f"unknown chooser {spec!r}")


class _FrameWriter:
    """Writes step_%04d.<ext> after every step of an episode."""

    def __init__(self, out_dir: Path, fmt: str, goal: str, cell_px: int):
        layers = ("occupancy", "semantics", "confidence", "trajectory")
        self.spec = RenderSpec(layers=layers, format=fmt, cell_px=cell_px)
        self.out_dir = out_dir
        self.ext = {"ascii": "txt", "ppm": "ppm", "svg": "svg"}[fmt]
        self.goal = goal
        self.count = 0

    def __call__(self, state):
        belief = AgentBelief(state.belief.seen_occ, state.belief.seen_labels, state.belief.seen_sem)
        conf = state.confidence if isinstance(state.confidence, ConfidenceGrid) else None
        data = render(belief, self.spec, conf, state.trajectory, state.agent_pos, self.goal)
        (self.out_dir / f"step_{state.steps:04d}.{self.ext}").write_bytes(data)
        self.count += 1


def cmd_run(args) -> int:
    try:
        env = _load_env(args)
        goal = extract_goal(args.goal)
        policy = RUN_POLICIES[args.policy]
        cfg = AgentConfig(
            k=args.k, alpha=args.alpha, horizon=args.horizon, policy=policy, snap=args.snap,
        )
        out_dir = Path(args.out) if args.out else None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
        transcript = None
        if args.transcript:
            Path(args.transcript).parent.mkdir(parents=True, exist_ok=True)
            Path(args.transcript).write_text("", encoding="utf-8")
            transcript = TranscriptLog(Path(args.transcript))
        callback = None
        if args.render:
            frames_dir = out_dir or Path(".")
            callback = _FrameWriter(frames_dir, args.render, goal, args.cell_px)
        if policy is Policy.OURS:
            predictor = build_predictor(args.predictor, transcript, args.replay)
            record = agent_mod.run_ours(env, goal, cfg, predictor, seed=args.rng_seed, callback=callback)
        elif args.policy == "frontier":
            record = agent_mod.run_frontier(env, goal, cfg, args.rng_seed, callback=callback)
        elif args.policy == "frontier-nearest":
            record = agent_mod.run_frontier_nearest(env, goal, cfg, args.rng_seed, callback=callback)
        else:
            chooser = build_chooser(args.chooser or f"random:{args.rng_seed}", transcript, args.replay)
            if policy is Policy.STEP_LLM:
                record = agent_mod.run_step_llm(env, goal, cfg, chooser, args.rng_seed, callback=callback)
            else:
                record = agent_mod.run_history_llm(
                    env, goal, cfg, chooser, args.summary_budget, args.rng_seed, callback=callback
                )
    except (CliError, NoGoalFound, GridworldError, GenerationError, ValueError, OSError) as exc:
        return _fail(str(exc))

    if args.trace:
        lines = agent_mod.trace_lines(record)
        Path(args.trace).parent.mkdir(parents=True, exist_ok=True)
        Path(args.trace).write_text("\n".join(lines) + "\n", encoding="utf-8")
    summary = {
        "env": record.env_name,
        "goal": record.goal,
        "status": record.status,
        "steps": record.steps,
        "L": record.shortest,
        "spl": record.spl_term,
        "return": episode_return(record),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0 if record.success else 1


def cmd_bench(args) -> int:
    try:
        suite = bundled_suite(args.suite[len("bundled:"):]) if args.suite.startswith("bundled:") else load_suite(args.suite)
        policies = [p.strip() for p in args.policies.split(",") if p.strip()]
        seeds = parse_seeds(args.seeds)
        cfg = AgentConfig(k=args.k, alpha=args.alpha, horizon=args.horizon, snap=args.snap)
        report = run_benchmark(suite, policies, seeds, cfg, jobs=args.jobs)
    except (SuiteError, GridworldError, GenerationError, ValueError, OSError) as exc:
        return _fail(str(exc))
    if args.out:
        write_report(report, args.out)
    print(report.to_table(), end="")
    return 0


def parse_seeds(text: str) -> list[int]:
    """"0,1,2" or "0-9" (inclusive), or a mix: "0-4,10"."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ValueError(f"bad seed list {text!r}") from None
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def cmd_render(args) -> int:
    try:
        env = _load_env(args)
    except (CliError, GridworldError, GenerationError, ValueError) as exc:
        return _fail(str(exc))
    spec = RenderSpec(layers=("occupancy", "semantics"), format=args.format, cell_px=args.cell_px)
    goal = extract_goal(args.goal) if args.goal else None
    _write_bytes(render(env, spec, agent=env.start, goal=goal), args.out)
    return 0


def _add_env_flags(p: argparse.ArgumentParser, need_out_for_gen: bool = False):
    p.add_argument("--env", help="environment JSON file")
    p.add_argument("--family", choices=[f.value for f in Family], help="generate this family instead of --env")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    p.add_argument("--noise", type=float, help="occupancy flip probability for generated maps")
    p.add_argument("--rooms", type=int, help="number of rooms for generated maps")


def _add_agent_flags(p: argparse.ArgumentParser):
    p.add_argument("--k", type=int, default=5, help="odd observation window size (default 5)")
    p.add_argument("--alpha", type=float, default=0.9, help="confidence decay factor (default 0.9)")
    p.add_argument("--horizon", type=int, default=None, help="step budget T (default: per policy)")
    p.add_argument("--snap", choices=("frontier", "free"), default="frontier",
                   help="where the confidence centroid is snapped before planning")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semnav", description="Semantic grid navigation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an environment file")
    gen.add_argument("--family", required=True, choices=[f.value for f in Family])
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise", type=float)
    gen.add_argument("--rooms", type=int)
    gen.add_argument("--out", help="output path (default stdout)")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run one episode")
    _add_env_flags(run)
    run.add_argument("--goal", required=True, help='instruction, e.g. "Go to Room 621"')
    run.add_argument("--policy", choices=list(RUN_POLICIES), default="ours")
    run.add_argument("--predictor", default="rule",
                     help="rule | uniform:<seed> | scripted:<path> | external[:<url>] (default rule)")
    run.add_argument("--chooser", help="step policies: random:<seed> | scripted:<path> | external[:<url>]")
    run.add_argument("--summary-budget", type=int, default=8, help="history entries shown (history-llm)")
    run.add_argument("--rng-seed", type=int, default=0, help="seed for sampling policies (default 0)")
    _add_agent_flags(run)
    run.add_argument("--render", choices=("ascii", "ppm", "svg"), help="write step_NNNN frames")
    run.add_argument("--cell-px", type=int, default=8)
    run.add_argument("--trace", help="write the NDJSON episode trace here")
    run.add_argument("--transcript", help="log external request/response pairs (NDJSON)")
    run.add_argument("--replay", help="replay a transcript instead of calling the endpoint")
    run.add_argument("--out", help="directory for rendered frames")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="run a benchmark suite")
    bench.add_argument("--suite", default="bundled:desk", help="suite JSON path or bundled:<name> (desk, small)")
    bench.add_argument("--policies", default="ours+rule,frontier,step-random",
                       help=f"comma-separated, from: {', '.join(POLICY_NAMES)}")
    bench.add_argument("--seeds", default="0", help='e.g. "0-9" or "0,3,7"')
    bench.add_argument("--jobs", type=int, default=1)
    _add_agent_flags(bench)
    bench.add_argument("--out", help="directory for report.json, episodes.csv, table.txt")
    bench.set_defaults(func=cmd_bench)

    rend = sub.add_parser("render", help="render an environment")
    _add_env_flags(rend)
    rend.add_argument("--format", choices=("ascii", "ppm", "svg"), default="ascii")
    rend.add_argument("--goal", help="highlight this goal room")
    rend.add_argument("--cell-px", type=int, default=8)
    rend.add_argument("--out", help="output path (default stdout)")
    rend.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
