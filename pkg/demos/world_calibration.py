"""Turn a grid plan into odometry-frame waypoints for a wheeled robot.

The robot reports its odometry pose while standing on a known cell; that
single observation fixes the grid->odometry transform, after which every
cell on a planned path maps to a commanded pose.

    python demos/world_calibration.py
"""

import math

from semnav import Direction, Family, generate_environment
from semnav.planning import astar
from semnav.worldlink import GridFrame, SE2Pose, calibrate, odometry_goal


def facing(a, b):
    return {(0, 1): Direction.RIGHT, (0, -1): Direction.LEFT, (-1, 0): Direction.UP, (1, 0): Direction.DOWN}[
        (b[0] - a[0], b[1] - a[1])
    ]


def main():
    env = generate_environment(Family.SMALL_PLAZA, 0)
    frame = GridFrame(origin=(0.0, 0.0), heading=0.0, resolution=0.5)  # 0.5 m cells
    # The robot booted at an arbitrary odometry pose while standing on the start cell facing right.
    observed = SE2Pose(4.2, -1.3, math.radians(30))
    transform = calibrate(env.start, frame, observed)
    print(f"grid->odometry transform: {transform}")

    target = next(c for c in zip(*(env.occupancy == 0).nonzero()) if c != env.start)
    path = astar(env.occupancy, env.start, tuple(int(v) for v in target))
    for a, b in zip(path, path[1:]):
        pose = odometry_goal(transform, frame, b, facing(a, b))
        print(f"cell {b} -> x={pose.x:+.3f} y={pose.y:+.3f} theta={math.degrees(pose.theta):+.1f} deg")


if __name__ == "__main__":
    main()
