"""Episode records, the shortest-path oracle and the SPL / SR metrics."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .gridworld import Cell, Environment, GoalSpec, neighbors4


class Unreachable(Exception):
    pass


class EmptyInput(ValueError):
    pass


STATUSES = ("Running", "Success", "Timeout", "Exhausted")


@dataclass
class EpisodeRecord:
    """Outcome of one episode.

    ``shortest`` is the oracle step count L (None if the goal cannot be
    reached at all); ``steps`` is the actual step count P.
    """

    env_name: str
    policy: str
    seed: int
    goal: str
    success: bool
    shortest: int | None
    steps: int
    status: str
    horizon: int
    trajectory: list[Cell] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)

    @property
    def S(self) -> int:
        return int(self.success)

    @property
    def L(self) -> int | None:
        return self.shortest

    @property
    def P(self) -> int:
        return self.steps

    @property
    def spl_term(self) -> float:
        return spl_contribution(self.success, self.shortest, self.steps)

    def summary(self) -> dict:
        return {
            "env": self.env_name,
            "policy": self.policy,
            "seed": self.seed,
            "goal": self.goal,
            "status": self.status,
            "success": self.S,
            "L": self.shortest,
            "P": self.steps,
            "spl": self.spl_term,
            "return": episode_return(self),
        }


def success_set(env: Environment, goal: GoalSpec) -> set[Cell]:
    """Cells where the episode counts as solved: the goal itself if free,
    else its free 4-neighbors (doors cannot be entered)."""
    target = goal.target_cell
    if env.occupancy[target] == 0:
        return {target}
    return {n for n in neighbors4(target, env.rows, env.cols) if env.occupancy[n] == 0}


def oracle_shortest(env: Environment, goal: GoalSpec, start: Cell | None = None) -> int:
    """BFS over ground-truth free cells from the start to the success set."""
    start = env.start if start is None else start
    targets = success_set(env, goal)
    if start in targets:
        return 0
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        for n in neighbors4(cell, env.rows, env.cols):
            if n in dist or env.occupancy[n] != 0:
                continue
            dist[n] = dist[cell] + 1
            if n in targets:
                return dist[n]
            queue.append(n)
    raise Unreachable(f"room {goal.identifier} unreachable from {start} in {env.name}")


def episode_return(record: EpisodeRecord) -> int:
    """-1 per step until success; failures collect the full -T."""
    return -record.steps if record.success else -record.horizon


def spl_contribution(success: bool, shortest: int | None, steps: int) -> float:
    if not success:
        return 0.0
    if shortest is None:
        raise ValueError("a successful episode needs an oracle path length")
    if shortest == 0 and steps == 0:
        return 1.0
    return shortest / max(steps, shortest)


def spl(records: Sequence[EpisodeRecord]) -> float:
    """Success weighted by path length, averaged over episodes."""
    if not records:
        raise EmptyInput("SPL needs at least one episode")
    return sum(r.spl_term for r in records) / len(records)


def success_rate(records: Sequence[EpisodeRecord]) -> float:
    if not records:
        raise EmptyInput("success rate needs at least one episode")
    return sum(r.S for r in records) / len(records)
