"""Benchmark runner: environments x goals x policies x seeds, aggregated into
an SPL/SR table grouped the way the Small/Large/Noisy suite is organized."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .agent import (
    AgentConfig,
    Policy,
    RandomActionChooser,
    run_frontier,
    run_frontier_nearest,
    run_history_llm,
    run_ours,
    run_step_llm,
)
from .evaluation import EpisodeRecord, episode_return, spl, success_rate
from .generators import Family, GeneratorParams, generate_environment
from .gridworld import Environment, load_environment
from .predictor import AbstainingPredictor, OraclePredictor, RuleBasedPredictor, UniformPredictor

GROUP_ORDER = ("Small", "Large", "Noisy", "Other")
POLICY_NAMES = (
    "ours+rule",
    "ours+oracle",
    "ours+abstain",
    "ours+uniform",
    "frontier",
    "frontier-nearest",
    "step-random",
    "history-random",
)


class SuiteError(ValueError):
    pass


@dataclass(frozen=True)
class SuiteEntry:
    """One environment plus the goals to run in it."""

    name: str
    group: str
    goals: tuple[str, ...]
    family: str | None = None
    seed: int = 0
    params: dict = field(default_factory=dict)
    path: str | None = None

    def build(self, base_dir: Path | None = None) -> Environment:
        if self.path is not None:
            path = Path(self.path)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return load_environment(path.read_bytes())
        params = GeneratorParams(**self.params) if self.params else None
        env = generate_environment(self.family, self.seed, params)
        return env


@dataclass(frozen=True)
class Suite:
    name: str
    entries: tuple[SuiteEntry, ...]
    base_dir: Path | None = None


def _pick_goals(env: Environment, count: int, seed: int) -> tuple[str, ...]:
    rooms = sorted(env.rooms())
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 0x60A1])
    count = min(count, len(rooms))
    picks = rng.choice(len(rooms), size=count, replace=False)
    return tuple(rooms[int(i)] for i in sorted(picks))


def parse_suite(doc, base_dir: Path | None = None) -> Suite:
    """Suite document:

    {"name": "...", "environments": [
        {"family": "SmallHShape", "seed": 1, "params": {...}, "goals": 10},
        {"path": "my_env.json", "group": "Small", "goals": ["204", "217"]}]}

    An integer ``goals`` draws that many distinct rooms with a fixed RNG.
    """
    if not isinstance(doc, dict) or not isinstance(doc.get("environments"), list):
        raise SuiteError("suite needs an 'environments' list")
    if not doc["environments"]:
        raise SuiteError("suite has no environments")
    entries = []
    for i, item in enumerate(doc["environments"]):
        if not isinstance(item, dict):
            raise SuiteError(f"environments[{i}] is not an object")
        family = item.get("family")
        path = item.get("path")
        if (family is None) == (path is None):
            raise SuiteError(f"environments[{i}] needs exactly one of 'family' or 'path'")
        seed = int(item.get("seed", 0))
        group = item.get("group")
        if family is not None:
            try:
                fam = Family(family)
            except ValueError:
                raise SuiteError(f"environments[{i}]: unknown family {family!r}") from None
            group = group or fam.group
            name = item.get("name", f"{fam.value}-{seed}")
        else:
            group = group or "Other"
            name = item.get("name", Path(path).stem)
        entry = SuiteEntry(name, group, (), family, seed, dict(item.get("params", {})), path)
        goals = item.get("goals", 10)
        if isinstance(goals, int):
            goals = _pick_goals(entry.build(base_dir), goals, seed)
        elif isinstance(goals, list) and all(isinstance(g, str) for g in goals):
            goals = tuple(goals)
        else:
            raise SuiteError(f"environments[{i}]: 'goals' must be an int or a list of strings")
        if not goals:
            raise SuiteError(f"environments[{i}] has no goals")
        entries.append(SuiteEntry(name, group, goals, family, seed, entry.params, path))
    return Suite(str(doc.get("name", "suite")), tuple(entries), base_dir)


def load_suite(path) -> Suite:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SuiteError(f"{path}: {exc}") from None
    return parse_suite(doc, path.parent)


def bundled_suite(name: str = "desk") -> Suite:
    text = resources.files("semnav.suites").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return parse_suite(json.loads(text))


def run_episode(env: Environment, goal: str, policy: str, seed: int, cfg: AgentConfig) -> EpisodeRecord:
    """Run one (goal, policy, seed) episode; policy names as in POLICY_NAMES."""
    if policy.startswith("ours+"):
        kind = policy.split("+", 1)[1]
        cfg = _with_policy(cfg, Policy.OURS)
        if kind == "rule":
            predictor = RuleBasedPredictor()
        elif kind == "oracle":
            predictor = OraclePredictor.for_goal(env, goal)
        elif kind == "abstain":
            predictor = AbstainingPredictor()
        elif kind == "uniform":
            predictor = UniformPredictor(seed)
        else:
            raise ValueError(f"unknown predictor in policy {policy!r}")
        return run_ours(env, goal, cfg, predictor, seed=seed, policy_name=policy)
    if policy == "frontier":
        return run_frontier(env, goal, _with_policy(cfg, Policy.FRONTIER), seed)
    if policy == "frontier-nearest":
        return run_frontier_nearest(env, goal, _with_policy(cfg, Policy.FRONTIER), seed)
    if policy == "step-random":
        rec = run_step_llm(env, goal, _with_policy(cfg, Policy.STEP_LLM), RandomActionChooser(seed), seed)
        rec.policy = policy
        return rec
    if policy == "history-random":
        rec = run_history_llm(env, goal, _with_policy(cfg, Policy.HISTORY_LLM), RandomActionChooser(seed), seed=seed)
        rec.policy = policy
        return rec
    raise ValueError(f"unknown policy {policy!r}; choose from {', '.join(POLICY_NAMES)}")


def _with_policy(cfg: AgentConfig, policy: Policy) -> AgentConfig:
    return AgentConfig(cfg.k, cfg.alpha, cfg.horizon, cfg.uniformity_epsilon, policy, cfg.snap)


def _run_entry_task(args):
    suite_entry, base_dir, goal, policy, seed, cfg = args
    env = suite_entry.build(base_dir)
    rec = run_episode(env, goal, policy, seed, cfg)
    rec.env_name = suite_entry.name
    return suite_entry.name, suite_entry.group, rec


def _stats(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _cell(records: list[EpisodeRecord]) -> dict:
    spl_terms = [r.spl_term for r in records]
    successes = [r.S for r in records]
    spl_mean, spl_std = _stats(spl_terms)
    sr_mean, sr_std = _stats(successes)
    return {
        "n": len(records),
        "spl_mean": spl_mean,
        "spl_std": spl_std,
        "sr_mean": sr_mean,
        "sr_std": sr_std,
    }


@dataclass
class BenchmarkReport:
    suite: str
    policies: list[str]
    seeds: list[int]
    config: dict
    records: list[tuple[str, str, EpisodeRecord]]

    def environments(self) -> list[tuple[str, str]]:
        seen = {}
        for env_name, group, _ in self.records:
            seen.setdefault(env_name, group)
        return sorted(seen.items(), key=lambda kv: (GROUP_ORDER.index(kv[1]) if kv[1] in GROUP_ORDER else len(GROUP_ORDER), kv[0]))

    def select(self, policy: str, env_name: str | None = None, group: str | None = None) -> list[EpisodeRecord]:
        return [
            rec
            for name, grp, rec in self.records
            if rec.policy == policy
            and (env_name is None or name == env_name)
            and (group is None or grp == group)
        ]

    def cells(self) -> list[dict]:
        out = []
        for env_name, group in self.environments():
            for policy in self.policies:
                recs = self.select(policy, env_name=env_name)
                out.append({"env": env_name, "group": group, "policy": policy, **_cell(recs)})
        return out

    def groups(self) -> list[dict]:
        present = sorted({g for _, g, _ in self.records}, key=lambda g: GROUP_ORDER.index(g) if g in GROUP_ORDER else 99)
        out = []
        for group in present + ["Overall"]:
            for policy in self.policies:
                recs = self.select(policy, group=None if group == "Overall" else group)
                out.append({"group": group, "policy": policy, **_cell(recs)})
        return out

    def to_dict(self) -> dict:
        episodes = []
        for env_name, group, rec in self.records:
            row = rec.summary()
            row["group"] = group
            row["trajectory"] = [list(c) for c in rec.trajectory]
            episodes.append(row)
        return {
            "suite": self.suite,
            "policies": list(self.policies),
            "seeds": list(self.seeds),
            "config": self.config,
            "cells": self.cells(),
            "groups": self.groups(),
            "episodes": episodes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["env", "group", "policy", "seed", "goal", "status", "success", "L", "P", "spl", "return"])
        for env_name, group, rec in self.records:
            writer.writerow([
                env_name, group, rec.policy, rec.seed, rec.goal, rec.status, rec.S,
                "" if rec.shortest is None else rec.shortest, rec.steps, repr(rec.spl_term), episode_return(rec),
            ])
        return buf.getvalue()

    def to_table(self) -> str:
        """Fixed-width text table: one row per environment, SPL and SR as mean ± std."""
        def fmt(mean, std):
            return f"{mean:.2f} ± {std:.2f}"

        header = ["Environment"]
        for policy in self.policies:
            header += [f"{policy} SPL", f"{policy} SR"]
        rows = []
        cells = {(c["env"], c["policy"]): c for c in self.cells()}
        groups = {(g["group"], g["policy"]): g for g in self.groups()}
        current = None
        for env_name, group in self.environments():
            if group != current:
                rows.append([f"[{group}]"] + [""] * (len(header) - 1))
                current = group
            row = [env_name]
            for policy in self.policies:
                c = cells[(env_name, policy)]
                row += [fmt(c["spl_mean"], c["spl_std"]), fmt(c["sr_mean"], c["sr_std"])]
            rows.append(row)
        rows.append(["[Rollups]"] + [""] * (len(header) - 1))
        for group in dict.fromkeys(g for g, _ in groups):
            row = [group]
            for policy in self.policies:
                c = groups[(group, policy)]
                row += [fmt(c["spl_mean"], c["spl_std"]), fmt(c["sr_mean"], c["sr_std"])]
            rows.append(row)
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
        return "\n".join(lines) + "\n"


def run_benchmark(
    suite: Suite,
    policies: Sequence[str],
    seeds: Sequence[int],
    cfg: AgentConfig | None = None,
    jobs: int = 1,
) -> BenchmarkReport:
    """Run every (environment, goal, policy, seed) episode and aggregate.

    Results are sorted by (environment, policy, seed, goal) before
    aggregation, so the report does not depend on seed order or ``jobs``.
    """
    if not suite.entries:
        raise SuiteError("suite has no environments")
    if not policies:
        raise ValueError("need at least one policy")
    if not seeds:
        raise ValueError("need at least one seed")
    for policy in policies:
        if policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {policy!r}; choose from {', '.join(POLICY_NAMES)}")
    cfg = cfg or AgentConfig()
    seeds = sorted(set(int(s) for s in seeds))
    for entry in suite.entries:
        entry.build(suite.base_dir)  # surface validation errors before running anything
    tasks = [
        (entry, suite.base_dir, goal, policy, seed, cfg)
        for entry in suite.entries
        for goal in entry.goals
        for policy in policies
        for seed in seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_entry_task, tasks, chunksize=4))
    else:
        results = [_run_entry_task(t) for t in tasks]
    order = {p: i for i, p in enumerate(policies)}
    results.sort(key=lambda item: (item[0], order[item[2].policy], item[2].seed, item[2].goal))
    config = {
        "k": cfg.k,
        "alpha": cfg.alpha,
        "horizon": cfg.horizon,
        "uniformity_epsilon": cfg.uniformity_epsilon,
        "snap": cfg.snap,
    }
    return BenchmarkReport(suite.name, list(policies), seeds, config, results)


def write_report(report: BenchmarkReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / "report.json", "csv": out / "episodes.csv", "table": out / "table.txt"}
    paths["json"].write_text(report.to_json(), encoding="utf-8")
    paths["csv"].write_text(report.to_csv(), encoding="utf-8")
    paths["table"].write_text(report.to_table(), encoding="utf-8")
    return paths


__all__ = [
    "BenchmarkReport",
    "POLICY_NAMES",
    "Suite",
    "SuiteEntry",
    "SuiteError",
    "bundled_suite",
    "load_suite",
    "parse_suite",
    "run_benchmark",
    "run_episode",
    "spl",
    "success_rate",
    "write_report",
]
