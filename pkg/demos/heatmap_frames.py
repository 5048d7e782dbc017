"""Write the confidence grid of one episode as a sequence of PPM images.

    python demos/heatmap_frames.py OUT_DIR [--family SmallHallways] [--seed 2]
"""

import argparse
from pathlib import Path

from semnav import AgentConfig, Family, RuleBasedPredictor, generate_environment, run_ours
from semnav.render import RenderSpec, render


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--family", default="SmallHallways")
    parser.add_argument("--seed", type=int, default=2)
    args = parser.parse_args()

    env = generate_environment(Family(args.family), args.seed)
    goal = sorted(env.rooms())[-1]
    args.out_dir.mkdir(parents=True, exist_ok=True)
    spec = RenderSpec(layers=("occupancy", "confidence", "semantics", "trajectory"), format="ppm", cell_px=16)

    def save(state):
        image = render(state.belief, spec, state.confidence, state.trajectory, state.agent_pos, goal)
        (args.out_dir / f"step_{state.steps:04d}.ppm").write_bytes(image)

    record = run_ours(env, goal, AgentConfig(), RuleBasedPredictor(), callback=save)
    print(f"{record.status} in {record.steps} steps; wrote {record.steps + 1} frames to {args.out_dir}")


if __name__ == "__main__":
    main()
