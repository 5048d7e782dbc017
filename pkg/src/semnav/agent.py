"""Control loops: the confidence-grid method and its baselines.

Every policy observes and fuses its k x k window after each move, stops on
success (standing on a free goal cell or next to a door goal), on running
out of its step budget, or when nothing reachable is left to explore.
"""

from __future__ import annotations

import json
import re
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .belief import ConfidenceGrid, argmax_centroid, is_uniform, prediction_update
from .evaluation import EpisodeRecord, Unreachable, oracle_shortest, success_set
from .gridworld import (
    ROOM_NUMBER,
    SIGN_TEXT,
    Cell,
    Direction,
    Environment,
    GoalSpec,
    in_bounds,
)
from .perception import AgentBelief, Observation, fuse, goal_visible, observe
from .planning import (
    NoFrontier,
    NoPath,
    astar,
    frontier_distances,
    nearest_frontier,
    snap_to_frontier,
    snap_to_reachable,
)
from .predictor import (
    ABSTAIN,
    GoalRegionPredictor,
    PredictionQuery,
    PredictionResult,
    PredictorError,
    TranscriptLog,
    post_json,
    query_to_wire,
)

StepAction = Direction


class Policy(str, Enum):
    OURS = "Ours"
    FRONTIER = "FrontierOnly"
    STEP_LLM = "StepLLM"
    HISTORY_LLM = "HistoryLLM"


class NoGoalFound(ValueError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    """Run parameters. ``horizon=None`` picks the per-policy default:
    10*(rows+cols) for planner policies, 4*rows*cols for step-wise ones.

    ``snap`` chooses where the argmax centroid is moved before planning:
    the closest reachable frontier (default), which cannot stall on a
    two-cell oscillation, or the closest reachable known-free cell.
    """

    k: int = 5
    alpha: float = 0.9
    horizon: int | None = None
    uniformity_epsilon: float = 1e-9
    policy: Policy = Policy.OURS
    snap: str = "frontier"

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"k must be odd and >= 1, got {self.k}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.uniformity_epsilon < 0:
            raise ValueError("uniformity_epsilon must be non-negative")
        if self.snap not in ("frontier", "free"):
            raise ValueError(f"snap must be 'frontier' or 'free', got {self.snap!r}")
        object.__setattr__(self, "policy", Policy(self.policy))

    def horizon_for(self, env: Environment) -> int:
        if self.horizon is not None:
            return self.horizon
        if self.policy in (Policy.STEP_LLM, Policy.HISTORY_LLM):
            return 4 * env.rows * env.cols
        return 10 * (env.rows + env.cols)


_GOAL_TOKEN = re.compile(r"(?<![A-Za-z0-9])[0-9]+[A-Za-z]?(?![A-Za-z0-9])")


def extract_goal(command: str, extractor: Callable[[str], str | None] | None = None) -> str:
    """Goal identifier from a command such as "Go to Room 621".

    Without an ``extractor`` the last number token (optionally with a one
    letter suffix) wins.
    """
    if not command or not command.strip():
        raise NoGoalFound("empty command")
    if extractor is not None:
        goal = extractor(command)
        if not goal:
            raise NoGoalFound(f"extractor found no goal in {command!r}")
        return goal
    tokens = _GOAL_TOKEN.findall(command)
    if not tokens:
        raise NoGoalFound(f"no room identifier in {command!r}")
    return tokens[-1]


def step_transition(env: Environment, pos: Cell, action: StepAction) -> Cell:
    dr, dc = StepAction(action).delta
    nxt = (pos[0] + dr, pos[1] + dc)
    if in_bounds(nxt, env.rows, env.cols) and env.occupancy[nxt] == 0:
        return nxt
    return pos


def is_success(env: Environment, goal: GoalSpec, pos: Cell) -> bool:
    return tuple(pos) in success_set(env, goal)


def _resolve_goal(env: Environment, goal) -> GoalSpec:
    return goal if isinstance(goal, GoalSpec) else GoalSpec.resolve(env, goal)


@dataclass
class EpisodeState:
    env: Environment
    goal: GoalSpec
    cfg: AgentConfig
    agent_pos: Cell
    belief: AgentBelief
    confidence: ConfidenceGrid | None = None
    steps: int = 0
    trajectory: list[Cell] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)
    status: str = "Running"


class _Episode:
    """Bookkeeping shared by every policy: moving, sensing, tracing, stopping."""

    def __init__(self, env: Environment, goal, cfg: AgentConfig, policy: str, seed: int, callback=None):
        goal = _resolve_goal(env, goal)
        self.callback = callback
        self.policy = policy
        self.seed = seed
        self.horizon = cfg.horizon_for(env)
        self.success_cells = success_set(env, goal)
        self.state = EpisodeState(
            env=env,
            goal=goal,
            cfg=cfg,
            agent_pos=env.start,
            belief=AgentBelief.for_env(env),
            trajectory=[env.start],
        )
        self.last_obs = self._sense()
        if callback is not None:
            callback(self.state)

    @property
    def env(self) -> Environment:
        return self.state.env

    @property
    def goal(self) -> GoalSpec:
        return self.state.goal

    @property
    def pos(self) -> Cell:
        return self.state.agent_pos

    @property
    def belief(self) -> AgentBelief:
        return self.state.belief

    def _sense(self) -> Observation:
        obs = observe(self.env, self.pos, self.state.cfg.k)
        self.state.belief = fuse(self.state.belief, obs)
        return obs

    def annotate(self, patterns: Sequence[str]):
        if patterns:
            self.state.belief = self.state.belief.with_notes(patterns)

    def move(self, action: StepAction | None, **fields) -> None:
        """Take one step (a None action burns the step in place) and re-sense."""
        s = self.state
        if action is not None:
            s.agent_pos = step_transition(self.env, s.agent_pos, action)
        s.steps += 1
        s.trajectory.append(s.agent_pos)
        self.last_obs = self._sense()
        entry = {
            "t": s.steps,
            "pos": [s.agent_pos[0], s.agent_pos[1]],
            "action": None if action is None else StepAction(action).value,
        }
        entry.update(fields)
        s.trace.append(entry)
        if self.callback is not None:
            self.callback(s)

    def check(self) -> str | None:
        if self.pos in self.success_cells:
            return "Success"
        if self.state.steps >= self.horizon:
            return "Timeout"
        return None

    def finish(self, status: str) -> EpisodeRecord:
        s = self.state
        s.status = status
        try:
            shortest = oracle_shortest(self.env, self.goal)
        except Unreachable:
            shortest = None
        return EpisodeRecord(
            env_name=self.env.name,
            policy=self.policy,
            seed=self.seed,
            goal=self.goal.identifier,
            success=status == "Success",
            shortest=shortest,
            steps=s.steps,
            status=status,
            horizon=self.horizon,
            trajectory=list(s.trajectory),
            trace=list(s.trace),
        )


def _follow_visible_goal(ep: _Episode, goal_cell: Cell) -> bool:
    """Walk the A* path to a seen goal, sensing each step. False if no known path yet."""
    try:
        path = astar(ep.belief.seen_occ, ep.pos, goal_cell, allow_occupied_target=True)
    except NoPath:
        return False
    moved = False
    for nxt in path[1:]:
        if ep.env.occupancy[nxt] != 0:
            break
        ep.move(
            Direction.between(ep.pos, nxt),
            goal_visible=True,
            prediction=None,
            subgoal=[goal_cell[0], goal_cell[1]],
            frontier_used=False,
        )
        moved = True
        if ep.check():
            break
    return moved


class _CommittedFrontierSampler:
    """Uniformly samples a reachable frontier and keeps it until it is reached
    or stops being a frontier."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.target: Cell | None = None

    def __call__(self, seen_occ: np.ndarray, pos: Cell) -> Cell:
        reachable = frontier_distances(seen_occ, pos)
        reachable.pop(pos, None)
        if not reachable:
            raise NoFrontier("no reachable frontier")
        if self.target not in reachable:
            candidates = sorted(reachable)
            self.target = candidates[int(self.rng.integers(len(candidates)))]
        return self.target


def _nearest(seen_occ: np.ndarray, pos: Cell) -> Cell:
    return nearest_frontier(seen_occ, pos)


def _planner_loop(
    ep: _Episode,
    predictor: GoalRegionPredictor | None,
    choose_frontier: Callable[[np.ndarray, Cell], Cell],
) -> EpisodeRecord:
    cfg = ep.state.cfg
    goal_id = ep.goal.identifier
    if predictor is not None:
        ep.state.confidence = ConfidenceGrid.zeros(ep.env.rows, ep.env.cols, cfg.alpha)
    while True:
        status = ep.check()
        if status:
            return ep.finish(status)
        goal_cell = goal_visible(ep.belief, goal_id)
        if goal_cell is not None and _follow_visible_goal(ep, goal_cell):
            continue

        prediction = None
        subgoal = None
        if predictor is not None:
            query = PredictionQuery.from_belief(goal_id, ep.pos, ep.belief, cfg.k)
            try:
                result = predictor.predict(query)
            except PredictorError as exc:
                result = PredictionResult(reasoning=f"predictor failed: {exc}")
            if not isinstance(result, PredictionResult):
                result = ABSTAIN
            ep.annotate(result.patterns)
            prediction = {"region": None if result.region is None else result.region.value}
            grid = prediction_update(ep.state.confidence, ep.belief, ep.pos, result.region, goal_id)
            ep.state.confidence = grid
            if not is_uniform(grid, cfg.uniformity_epsilon):
                centroid = argmax_centroid(grid)
                if cfg.snap == "free":
                    subgoal = snap_to_reachable(ep.belief.seen_occ, ep.pos, centroid)
                else:
                    try:
                        subgoal = snap_to_frontier(ep.belief.seen_occ, ep.pos, centroid)
                    except NoFrontier:
                        subgoal = None

        frontier_used = False
        if subgoal is None or subgoal == ep.pos:
            try:
                subgoal = choose_frontier(ep.belief.seen_occ, ep.pos)
            except NoFrontier:
                return ep.finish("Exhausted")
            frontier_used = True
        path = astar(ep.belief.seen_occ, ep.pos, subgoal)
        if len(path) < 2:
            return ep.finish("Exhausted")
        ep.move(
            Direction.between(path[0], path[1]),
            goal_visible=goal_cell is not None,
            prediction=prediction,
            subgoal=[subgoal[0], subgoal[1]],
            frontier_used=frontier_used,
        )


def run_ours(
    env: Environment,
    goal,
    cfg: AgentConfig,
    predictor: GoalRegionPredictor,
    seed: int = 0,
    policy_name: str = "ours",
    callback: Callable[[EpisodeState], None] | None = None,
) -> EpisodeRecord:
    """Confidence-grid navigation guided by ``predictor``.

    Per iteration: sense; if the goal has been seen, walk the A* path to it.
    Otherwise query the predictor, then decay, bump the predicted
    half-plane and zero explored non-goal cells. The subgoal is the
    argmax centroid snapped to a reachable cell (see ``AgentConfig.snap``); when the grid is
    uniform or the subgoal is the agent's own cell, the nearest frontier is
    used instead. One step along the A* path is taken per iteration.

    ``callback`` (on every runner) sees the episode state at the start and
    after every step.
    """
    ep = _Episode(env, goal, cfg, policy_name, seed, callback)
    return _planner_loop(ep, predictor, _nearest)


def run_frontier(env: Environment, goal, cfg: AgentConfig, rng_seed: int = 0, callback=None) -> EpisodeRecord:
    """Frontier baseline: a uniformly sampled reachable frontier, one A* step at a time."""
    ep = _Episode(env, goal, cfg, "frontier", rng_seed, callback)
    return _planner_loop(ep, None, _CommittedFrontierSampler(rng_seed))


def run_frontier_nearest(env: Environment, goal, cfg: AgentConfig, seed: int = 0, callback=None) -> EpisodeRecord:
    """Greedy nearest-frontier exploration (the method's fallback on its own)."""
    ep = _Episode(env, goal, cfg, "frontier-nearest", seed, callback)
    return _planner_loop(ep, None, _nearest)


# --- step-wise language-model baselines -------------------------------------


@dataclass(frozen=True, eq=False)
class ActionQuery:
    goal: str
    agent_pos: Cell
    seen_occ: np.ndarray
    seen_sem: Mapping[Cell, Mapping[str, str]]
    history: tuple[str, ...] = ()
    visit_counts: Mapping[Cell, int] = field(default_factory=dict)
    k: int = 5


@dataclass(frozen=True)
class ActionChoice:
    action: StepAction | None
    reasoning: str = ""


class ActionChooser(ABC):
    deterministic = True

    @abstractmethod
    def choose(self, query: ActionQuery) -> ActionChoice:
        ...


class RandomActionChooser(ActionChooser):
    """Seeded uniform actions: the offline stand-in for a language model."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)

    def choose(self, query: ActionQuery) -> ActionChoice:
        action = list(StepAction)[int(self.rng.integers(4))]
        return ActionChoice(action, "random")


class ScriptedActionChooser(ActionChooser):
    def __init__(self, actions: Sequence[StepAction | str | None]):
        self.actions = [None if a is None else StepAction(a) for a in actions]
        self.position = 0

    def choose(self, query: ActionQuery) -> ActionChoice:
        if self.position >= len(self.actions):
            return ActionChoice(None, "script exhausted")
        action = self.actions[self.position]
        self.position += 1
        return ActionChoice(action, "scripted")


def action_query_to_wire(q: ActionQuery) -> dict:
    base = query_to_wire(PredictionQuery(q.goal, q.agent_pos, q.seen_occ, q.seen_sem, (), q.k))
    del base["pattern_notes"]
    base["history"] = list(q.history)
    base["visits"] = [[r, c, n] for (r, c), n in sorted(q.visit_counts.items())]
    return base


def action_from_wire(doc) -> ActionChoice:
    if not isinstance(doc, dict):
        return ActionChoice(None, f"malformed response {doc!r}")
    reasoning = doc.get("reasoning") if isinstance(doc.get("reasoning"), str) else ""
    action = StepAction.parse(doc.get("action"))
    if action is None:
        raw = json.dumps(doc.get("action"), ensure_ascii=False)
        reasoning = f"{reasoning} [invalid action {raw}]".strip()
    return ActionChoice(action, reasoning)


class ExternalActionChooser(ActionChooser):
    """Remote chooser answering {"action": "up"|"down"|"left"|"right"}."""

    deterministic = False

    def __init__(self, endpoint: str, timeout: float = 30.0, transcript: TranscriptLog | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.transcript = transcript if transcript is not None else TranscriptLog()

    def choose(self, query: ActionQuery) -> ActionChoice:
        request = action_query_to_wire(query)
        try:
            response = post_json(self.endpoint, request, self.timeout)
        except PredictorError as exc:
            self.transcript.append(request, {"error": type(exc).__name__, "message": str(exc)})
            return ActionChoice(None, f"transport failure: {exc}")
        self.transcript.append(request, response)
        return action_from_wire(response)


class ReplayActionChooser(ActionChooser):
    def __init__(self, records: Sequence[dict]):
        self.records = list(records)
        self.position = 0

    def choose(self, query: ActionQuery) -> ActionChoice:
        from .predictor import ReplayMismatch

        if self.position >= len(self.records):
            raise ReplayMismatch("transcript exhausted")
        record = self.records[self.position]
        self.position += 1
        if record["request"] != action_query_to_wire(query):
            raise ReplayMismatch(f"action query {record['t']} differs from the recording")
        response = record["response"]
        if isinstance(response, dict) and "error" in response and "action" not in response:
            return ActionChoice(None, f"transport failure: {response.get('message', '')}")
        return action_from_wire(response)


def describe_observation(obs: Observation, pos: Cell) -> str:
    """Plain-text rendering of one window, as a language model would receive it."""
    cells = {cell: (value, sem) for cell, value, sem in obs.patch}
    open_dirs = []
    for d in StepAction:
        n = (pos[0] + d.delta[0], pos[1] + d.delta[1])
        if n in cells and cells[n][0] == 0:
            open_dirs.append(d.value)
    parts = [f"at {list(pos)}", f"open: {', '.join(open_dirs) or 'none'}"]
    rooms = [f"{sem.attributes[ROOM_NUMBER]}@{list(cell)}" for cell, (_, sem) in sorted(cells.items()) if ROOM_NUMBER in sem.attributes]
    signs = [f"sign@{list(cell)}: {sem.attributes[SIGN_TEXT]}" for cell, (_, sem) in sorted(cells.items()) if SIGN_TEXT in sem.attributes]
    if rooms:
        parts.append("rooms " + ", ".join(rooms))
    parts.extend(signs)
    return "; ".join(parts)


def _stepwise_loop(ep: _Episode, chooser: ActionChooser, summary_budget: int | None) -> EpisodeRecord:
    history: list[str] = []
    visits: Counter = Counter({ep.pos: 1})
    cfg = ep.state.cfg
    while True:
        status = ep.check()
        if status:
            return ep.finish(status)
        if summary_budget is None:
            query = ActionQuery(ep.goal.identifier, ep.pos, ep.belief.seen_occ, ep.belief.seen_sem, k=cfg.k)
        else:
            recent = tuple(history[-summary_budget:]) if summary_budget > 0 else ()
            query = ActionQuery(
                ep.goal.identifier, ep.pos, ep.belief.seen_occ, ep.belief.seen_sem,
                history=recent, visit_counts=dict(visits), k=cfg.k,
            )
        description = describe_observation(ep.last_obs, ep.pos)
        choice = chooser.choose(query)
        if not isinstance(choice, ActionChoice):
            choice = ActionChoice(StepAction.parse(choice))
        ep.move(
            choice.action,
            goal_visible=goal_visible(ep.belief, ep.goal.identifier) is not None,
            prediction=None,
            subgoal=None,
            frontier_used=False,
        )
        visits[ep.pos] += 1
        if summary_budget is not None:
            action = "none" if choice.action is None else choice.action.value
            history.append(f"t={ep.state.steps - 1} obs: {description} | reasoning: {choice.reasoning} | action: {action}")


def run_step_llm(
    env: Environment, goal, cfg: AgentConfig, action_chooser: ActionChooser, seed: int = 0, callback=None
) -> EpisodeRecord:
    """One chooser-selected action per step, no global planning. A missing
    or malformed action burns the step in place."""
    ep = _Episode(env, goal, cfg, "step-llm", seed, callback)
    return _stepwise_loop(ep, action_chooser, None)


def run_history_llm(
    env: Environment,
    goal,
    cfg: AgentConfig,
    chooser: ActionChooser,
    summary_budget: int = 8,
    seed: int = 0,
    callback=None,
) -> EpisodeRecord:
    """Step-wise chooser that also sees a summarized history: the last
    ``summary_budget`` (observation, reasoning, action) entries plus visit counts."""
    if summary_budget < 0:
        raise ValueError("summary_budget must be >= 0")
    ep = _Episode(env, goal, cfg, "history-llm", seed, callback)
    return _stepwise_loop(ep, chooser, summary_budget)


def trace_lines(record: EpisodeRecord) -> list[str]:
    """Newline-delimited JSON trace: one line per step plus a final summary line."""
    from .evaluation import episode_return

    lines = [json.dumps(entry, ensure_ascii=False, sort_keys=True) for entry in record.trace]
    final = {"status": record.status, "steps": record.steps, "return": episode_return(record)}
    lines.append(json.dumps(final, sort_keys=True))
    return lines
