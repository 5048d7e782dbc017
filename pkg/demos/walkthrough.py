"""Watch one episode of the confidence-grid agent, step by step.

Prints the agent's belief with its confidence overlay and the sign-based
prediction made at each step, then the episode summary.

    python demos/walkthrough.py [--family SmallHShape] [--seed 1] [--goal 516]
"""

import argparse

from semnav import AgentConfig, Family, GoalSpec, RuleBasedPredictor, generate_environment, run_ours
from semnav.render import render_ascii


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--family", default="SmallHShape")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--goal", default=None, help="room identifier (default: the last room)")
    args = parser.parse_args()

    env = generate_environment(Family(args.family), args.seed)
    goal = GoalSpec.resolve(env, args.goal or sorted(env.rooms())[-1])
    print(f"{env.name}: go to room {goal.identifier} at {goal.target_cell}\n")
    print(render_ascii(env, agent=env.start, goal=goal.identifier), "\n")

    def show(state):
        entry = state.trace[-1] if state.trace else {}
        print(f"t={state.steps} pos={state.agent_pos} prediction={entry.get('prediction')} "
              f"subgoal={entry.get('subgoal')}")
        print(render_ascii(state.belief, state.confidence, state.trajectory, state.agent_pos, goal.identifier), "\n")

    record = run_ours(env, goal, AgentConfig(), RuleBasedPredictor(), callback=show)
    print(f"status={record.status} steps(P)={record.steps} shortest(L)={record.shortest} "
          f"SPL term={record.spl_term:.3f}")


if __name__ == "__main__":
    main()
