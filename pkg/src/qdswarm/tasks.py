"""The five swarm task fitness functions, computed from trial logs.

All fitnesses are means over control cycles (and robots or robot pairs) of
per-cycle rewards, normalised so that values lie in [0, 1]. Distances are
normalised by the arena diagonal M (aggregation) or M/2 (dispersion);
patrolling uses a 10 x 10 cell grid whose values decay linearly at 0.005/s
between visits.
"""

from enum import Enum

import numpy as np

from .sim import CONTROL_DT, TrialLog, run_trial


class TaskKind(str, Enum):
    AGGREGATION = "aggregation"
    DISPERSION = "dispersion"
    FLOCKING = "flocking"
    PATROLLING = "patrolling"
    BORDER_PATROLLING = "border-patrolling"


PATROL_GRID_SIZE = 10
PATROL_DECAY_RATE = 0.005  # per second
PATROL_DECAY_PER_CYCLE = PATROL_DECAY_RATE * CONTROL_DT
FLOCKING_RANGE = 0.5  # metres
FLOCKING_ANGLE = np.pi / 2.0


def _pair_distances(xy):
    diff = xy[:, :, None, :] - xy[:, None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def fitness_aggregation(log: TrialLog) -> float:
    """Mean of 1 - (distance to swarm centroid) / M over robots and cycles."""
    xy = log.poses[:, :, :2]
    centroid = xy.mean(axis=1, keepdims=True)
    distances = np.hypot(*(xy - centroid).transpose(2, 0, 1))
    return float(np.mean(1.0 - distances / log.arena.diagonal))


def fitness_dispersion(log: TrialLog) -> float:
    """Mean nearest-neighbour distance normalised by M/2, clamped to [0, 1]."""
    if log.n_robots < 2:
        raise ValueError("dispersion needs at least 2 robots")
    dist = _pair_distances(log.poses[:, :, :2])
    idx = np.arange(log.n_robots)
    dist[:, idx, idx] = np.inf
    nearest = dist.min(axis=2)
    raw = float(np.mean(nearest / (log.arena.diagonal / 2.0)))
    return min(1.0, max(0.0, raw))


def fitness_flocking(log: TrialLog) -> float:
    """Reward pairs within 0.5 m for fast, same-direction movement.

    A pair (i, j) with heading difference below 90 degrees earns
    (1 - dtheta/90deg) * max(0, Vi * Vj), with V the signed linear speed as a
    fraction of the maximum; the sum is normalised by T * N(N-1)/2.
    """
    n = log.n_robots
    if n < 2:
        raise ValueError("flocking needs at least 2 robots")
    dist = _pair_distances(log.poses[:, :, :2])
    headings = log.poses[:, :, 2]
    dtheta = np.abs(
        np.remainder(headings[:, :, None] - headings[:, None, :] + np.pi, 2 * np.pi) - np.pi
    )
    v = log.linear_velocity / log.body.max_linear_speed
    reward = (1.0 - np.minimum(1.0, dtheta / FLOCKING_ANGLE)) * np.maximum(
        0.0, v[:, :, None] * v[:, None, :]
    )
    in_range = dist < FLOCKING_RANGE
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    total = float((reward * in_range * upper).sum())
    return total / (log.n_cycles * n * (n - 1) / 2.0)


def linear_decay(value: float, cycles: int) -> float:
    """Patrol cell value after `cycles` unvisited control cycles."""
    return max(0.0, value - PATROL_DECAY_PER_CYCLE * cycles)


def patrol_cell_trace(log: TrialLog) -> np.ndarray:
    """(T, 10, 10) patrol grid values: 1 on visit, linear decay in between.

    Cells start at 0; a cell is visited when at least one robot centre lies
    inside it. Both patrolling fitnesses read from this shared trace.
    """
    cell = log.arena.side / PATROL_GRID_SIZE
    ij = np.clip((log.poses[:, :, :2] // cell).astype(int), 0, PATROL_GRID_SIZE - 1)
    trace = np.zeros((log.n_cycles, PATROL_GRID_SIZE, PATROL_GRID_SIZE))
    last_visit = np.full((PATROL_GRID_SIZE, PATROL_GRID_SIZE), -1, dtype=int)
    for t in range(log.n_cycles):
        last_visit[ij[t, :, 0], ij[t, :, 1]] = t
        visited = last_visit >= 0
        trace[t][visited] = np.maximum(
            0.0, 1.0 - PATROL_DECAY_PER_CYCLE * (t - last_visit[visited])
        )
    return trace


def _border_mask() -> np.ndarray:
    mask = np.zeros((PATROL_GRID_SIZE, PATROL_GRID_SIZE), dtype=bool)
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
    return mask


BORDER_MASK = _border_mask()


def fitness_patrolling(log: TrialLog) -> float:
    """Mean patrol grid value over all 100 cells and all cycles."""
    return float(patrol_cell_trace(log).mean())


def fitness_border_patrolling(log: TrialLog) -> float:
    """Mean patrol grid value over the 36 outermost cells and all cycles."""
    return float(patrol_cell_trace(log)[:, BORDER_MASK].mean())


_FITNESS = {
    TaskKind.AGGREGATION: fitness_aggregation,
    TaskKind.DISPERSION: fitness_dispersion,
    TaskKind.FLOCKING: fitness_flocking,
    TaskKind.PATROLLING: fitness_patrolling,
    TaskKind.BORDER_PATROLLING: fitness_border_patrolling,
}


def fitness(task, log: TrialLog) -> float:
    return _FITNESS[TaskKind(task)](log)


def performance(task, env, genome, faults, seeds, duration: float = 400.0) -> float:
    """Mean fitness over one independent trial per seed."""
    if not len(seeds):
        raise ValueError("at least one trial seed is required")
    values = [
        fitness(task, run_trial(env, genome, faults=faults, seed=s, duration=duration))
        for s in seeds
    ]
    return float(np.mean(values))
