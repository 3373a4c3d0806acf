"""Deterministic 2D kinematic simulation of a differential-drive robot swarm.

Robots are discs with two wheels, five frontal and two rear proximity rays,
and a range-and-bearing sensor that bins neighbouring robots into eight 45
degree cones. One forward-Euler integration step is taken per control cycle
(0.20 s). Collisions are resolved by positional projection only: overlapping
discs are pushed apart along their centre line, robots are pushed out of
obstacles, and positions are clamped to the walls. Per-robot sensor/actuator
faults can be injected each cycle. A trial is a pure function of
(environment, genome, fault assignment, seed).
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .environment import EnvironmentSpec
from .genome import CompiledNetwork, Genome, N_INPUTS

CONTROL_DT = 0.20
ROBOT_RADIUS = 0.06
AXLE_LENGTH = 0.09
MAX_ANGULAR_SPEED = 2.2222  # rad/s, 127.32 deg/s
OBSTACLE_SIDE = 0.25
PLACEMENT_ATTEMPTS = 10_000
MAX_RESOLUTION_PASSES = 64
PAIR_OVERLAP_TOL = 1e-9

# Body-frame ray angles: five frontal, two rear.
PROXIMITY_ANGLES = np.radians([-40.0, -20.0, 0.0, 20.0, 40.0, 160.0, -160.0])
N_PROXIMITY_RAYS = 7
N_FRONT_PROXIMITY = 5

N_RAB_CONES = 8
RAB_CONE_WIDTH = 2.0 * np.pi / N_RAB_CONES
RAB_CONE_HALF = RAB_CONE_WIDTH / 2.0


class FaultType(IntEnum):
    PMIN = 0
    PMAX = 1
    PRAND = 2
    LW_H = 3
    RW_H = 4
    BW_H = 5
    ROFS = 6
    NONE = 7


class PlacementError(RuntimeError):
    """Raised when rejection sampling cannot place all robots/obstacles."""


@dataclass(frozen=True)
class ArenaSpec:
    """Square arena with axis-aligned square obstacles (side 0.25 m)."""

    side: float
    obstacles: np.ndarray  # (K, 2) obstacle centres; may be empty

    @property
    def diagonal(self) -> float:
        return self.side * np.sqrt(2.0)


@dataclass(frozen=True)
class RobotBody:
    radius: float = ROBOT_RADIUS
    max_linear_speed: float = 0.10
    max_angular_speed: float = MAX_ANGULAR_SPEED
    axle_length: float = AXLE_LENGTH
    proximity_range: float = 0.11
    rab_range: float = 1.00
    dt: float = CONTROL_DT

    @classmethod
    def from_env(cls, env: EnvironmentSpec) -> "RobotBody":
        return cls(
            max_linear_speed=env.max_linear_speed,
            proximity_range=env.proximity_range,
            rab_range=env.rab_range,
        )


@dataclass
class World:
    """Snapshot of a trial: arena, robot body parameters, current poses."""

    arena: ArenaSpec
    body: RobotBody
    poses: np.ndarray  # (N, 3) x, y, heading


@dataclass(frozen=True)
class SensorFrame:
    """One robot's sensor readings for one control cycle.

    `neighbor_rel` holds the body-frame offsets to every other robot (used to
    re-bin the range-and-bearing readings under the ROFS fault).
    """

    proximity: np.ndarray  # (7,) activations in [0, 1]
    rab: np.ndarray  # (8,) activations in [0, 1]
    neighbor_rel: np.ndarray  # (K, 2)
    rab_range: float


@dataclass
class TrialLog:
    """Complete per-cycle record of one trial.

    `poses[t]` is the configuration at the start of cycle t (where sensing
    happened); `commands[t]` are the executed wheel speeds of that cycle,
    after actuator faults. `final_poses` is the configuration after the last
    integration step.
    """

    arena: ArenaSpec
    body: RobotBody
    poses: np.ndarray  # (T, N, 3)
    proximity: np.ndarray  # (T, N, 7), after sensor faults
    rab: np.ndarray  # (T, N, 8), after sensor faults
    commands: np.ndarray  # (T, N, 2) vl, vr in m/s
    linear_velocity: np.ndarray  # (T, N) m/s, signed
    angular_velocity: np.ndarray  # (T, N) rad/s
    final_poses: np.ndarray  # (N, 3)

    @property
    def n_cycles(self) -> int:
        return self.poses.shape[0]

    @property
    def n_robots(self) -> int:
        return self.poses.shape[1]


def wrap_angle(theta):
    """Wrap angles to (-pi, pi]."""
    wrapped = np.remainder(theta, 2.0 * np.pi)
    return np.where(wrapped > np.pi, wrapped - 2.0 * np.pi, wrapped)


def sensor_input_scale(activations):
    """Affine map of sensor activations [0, 1] onto network inputs [-1, 1]."""
    return 2.0 * np.asarray(activations, dtype=float) - 1.0


def differential_drive_step(pose, vl: float, vr: float, body: RobotBody) -> np.ndarray:
    """Advance one control cycle: translate along the old heading, then turn.

    The angular rate (vr - vl) / axle is clamped to the body's maximum.
    """
    x, y, heading = np.asarray(pose, dtype=float)
    v = 0.5 * (vl + vr)
    omega = np.clip((vr - vl) / body.axle_length, -body.max_angular_speed, body.max_angular_speed)
    return np.array(
        [
            x + v * body.dt * np.cos(heading),
            y + v * body.dt * np.sin(heading),
            float(wrap_angle(heading + omega * body.dt)),
        ]
    )


# ---------------------------------------------------------------------------
# Ray casting


def _ray_wall_t(origins, dirs, side):
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(
            dirs[:, 0] > 0,
            (side - origins[:, 0]) / dirs[:, 0],
            np.where(dirs[:, 0] < 0, -origins[:, 0] / dirs[:, 0], np.inf),
        )
        ty = np.where(
            dirs[:, 1] > 0,
            (side - origins[:, 1]) / dirs[:, 1],
            np.where(dirs[:, 1] < 0, -origins[:, 1] / dirs[:, 1], np.inf),
        )
    return np.minimum(tx, ty)


def _ray_box_t(origins, dirs, centers, half):
    """Slab test of rays against axis-aligned boxes; (K, O) hit distances."""
    o = origins[:, None, :]
    d = dirs[:, None, :]
    lo = centers[None, :, :] - half
    hi = centers[None, :, :] + half
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    parallel = np.abs(d) < 1e-12
    inside = (o >= lo) & (o <= hi)
    tmin = np.where(parallel, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(parallel, np.where(inside, np.inf, -np.inf), tmax)
    near = tmin.max(axis=2)
    far = tmax.min(axis=2)
    hit = (near <= far) & (far >= 0.0)
    return np.where(hit, np.maximum(near, 0.0), np.inf)


def _ray_circle_t(origins, dirs, centers, radius, self_index=None):
    """Entry distances of rays against circles; (K, C), inf when missed."""
    oc = centers[None, :, :] - origins[:, None, :]
    b = np.einsum("kci,ki->kc", oc, dirs)
    c = np.einsum("kci,kci->kc", oc, oc) - radius * radius
    disc = b * b - c
    t = b - np.sqrt(np.maximum(disc, 0.0))
    valid = (disc >= 0.0) & (t > 1e-12)
    t = np.where(valid, t, np.inf)
    if self_index is not None:
        t[np.arange(len(origins)), self_index] = np.inf
    return t


def proximity_activations(poses, arena: ArenaSpec, body: RobotBody) -> np.ndarray:
    """Batched proximity readings, (N, 7) activations in [0, 1].

    Activation is 1 - d / range clipped to [0, 1], with d the distance from
    the body surface to the nearest wall, obstacle, or robot along the ray.
    """
    poses = np.asarray(poses, dtype=float)
    n = poses.shape[0]
    angles = poses[:, 2:3] + PROXIMITY_ANGLES[None, :]
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=-1).reshape(-1, 2)
    origins = np.repeat(poses[:, :2], N_PROXIMITY_RAYS, axis=0)
    t = _ray_wall_t(origins, dirs, arena.side)
    if len(arena.obstacles):
        t = np.minimum(t, _ray_box_t(origins, dirs, arena.obstacles, OBSTACLE_SIDE / 2).min(axis=1))
    if n > 1:
        self_index = np.repeat(np.arange(n), N_PROXIMITY_RAYS)
        t = np.minimum(
            t, _ray_circle_t(origins, dirs, poses[:, :2], body.radius, self_index).min(axis=1)
        )
    distance = t - body.radius
    activation = np.clip(1.0 - distance / body.proximity_range, 0.0, 1.0)
    return activation.reshape(n, N_PROXIMITY_RAYS)


_OFFDIAG_MASKS: dict[int, np.ndarray] = {}


def _offdiag_mask(n: int) -> np.ndarray:
    mask = _OFFDIAG_MASKS.get(n)
    if mask is None:
        mask = ~np.eye(n, dtype=bool)
        _OFFDIAG_MASKS[n] = mask
    return mask


def body_frame_offsets(poses) -> np.ndarray:
    """(N, N-1, 2) offsets from each robot to the others in its body frame.

    Row i lists the other robots in ascending index order.
    """
    poses = np.asarray(poses, dtype=float)
    n = poses.shape[0]
    rel = poses[None, :, :2] - poses[:, None, :2]
    cos = np.cos(poses[:, 2])
    sin = np.sin(poses[:, 2])
    rx = rel[..., 0] * cos[:, None] + rel[..., 1] * sin[:, None]
    ry = -rel[..., 0] * sin[:, None] + rel[..., 1] * cos[:, None]
    rotated = np.stack([rx, ry], axis=-1)
    return rotated[_offdiag_mask(n)].reshape(n, n - 1, 2)


def rab_activations(neighbor_rel, rab_range: float) -> np.ndarray:
    """Range-and-bearing readings from body-frame neighbour offsets.

    Cone k is centred at k * 45 degrees (cone 0 on the heading). Each cone
    reports the range of its closest neighbour as a fraction of `rab_range`,
    or 1 if no neighbour is within range.
    """
    rel = np.asarray(neighbor_rel, dtype=float)
    squeeze = rel.ndim == 2
    if squeeze:
        rel = rel[None, :, :]
    batch, count = rel.shape[:2]
    closest = np.full((batch, N_RAB_CONES), np.inf)
    if count:
        ranges = np.hypot(rel[..., 0], rel[..., 1])
        bearings = np.arctan2(rel[..., 1], rel[..., 0])
        cones = (
            np.floor((bearings + RAB_CONE_HALF) / RAB_CONE_WIDTH).astype(int) % N_RAB_CONES
        )
        rows, cols = np.nonzero(ranges <= rab_range)
        np.minimum.at(closest, (rows, cones[rows, cols]), ranges[rows, cols])
    out = np.where(np.isfinite(closest), closest / rab_range, 1.0)
    return out[0] if squeeze else out


def sense_proximity(world: World, robot_index: int) -> np.ndarray:
    return proximity_activations(world.poses, world.arena, world.body)[robot_index]


def sense_rab(world: World, robot_index: int) -> np.ndarray:
    rel = body_frame_offsets(world.poses)[robot_index]
    return rab_activations(rel, world.body.rab_range)


def sense_frame(world: World, robot_index: int) -> SensorFrame:
    """Full sensor frame of one robot (before any fault is applied)."""
    rel = body_frame_offsets(world.poses)[robot_index]
    return SensorFrame(
        proximity=proximity_activations(world.poses, world.arena, world.body)[robot_index],
        rab=rab_activations(rel, world.body.rab_range),
        neighbor_rel=rel,
        rab_range=world.body.rab_range,
    )


# ---------------------------------------------------------------------------
# Fault injection


def _rofs_offsets(rng: np.random.Generator, count: int, rab_range: float) -> np.ndarray:
    r = rng.uniform(0.75, 1.0, size=count) * rab_range
    theta = rng.uniform(-np.pi, np.pi, size=count)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def apply_faults(frame: SensorFrame, commands, fault: FaultType, rng: np.random.Generator):
    """Apply one robot's fault to its sensor frame and wheel commands.

    Sensor faults (PMIN/PMAX/PRAND/ROFS) act before the controller, actuator
    faults (LW_H/RW_H/BW_H) after it; this helper applies both sides at once
    for a given cycle. NONE is the identity. Random faults redraw each call.
    """
    vl, vr = float(commands[0]), float(commands[1])
    proximity = frame.proximity
    rab = frame.rab
    if fault == FaultType.PMIN:
        proximity = proximity.copy()
        proximity[:N_FRONT_PROXIMITY] = 0.0
    elif fault == FaultType.PMAX:
        proximity = proximity.copy()
        proximity[:N_FRONT_PROXIMITY] = 1.0
    elif fault == FaultType.PRAND:
        proximity = proximity.copy()
        proximity[:N_FRONT_PROXIMITY] = rng.random(N_FRONT_PROXIMITY)
    elif fault == FaultType.ROFS:
        offset = _rofs_offsets(rng, 1, frame.rab_range)[0]
        rab = rab_activations(frame.neighbor_rel + offset, frame.rab_range)
    elif fault == FaultType.LW_H:
        vl *= 0.5
    elif fault == FaultType.RW_H:
        vr *= 0.5
    elif fault == FaultType.BW_H:
        vl *= 0.5
        vr *= 0.5
    new_frame = SensorFrame(proximity, rab, frame.neighbor_rel, frame.rab_range)
    return new_frame, (vl, vr)


@dataclass
class _FaultMasks:
    """Per-trial-constant boolean masks for the swarm's fault assignment."""

    pmin: np.ndarray
    pmax: np.ndarray
    prand: np.ndarray
    rofs: np.ndarray
    n_prand: int
    n_rofs: int
    any_prox: bool
    actuator_scale: np.ndarray
    any_actuator: bool


def _compile_faults(fault_arr: np.ndarray) -> _FaultMasks:
    pmin = fault_arr == int(FaultType.PMIN)
    pmax = fault_arr == int(FaultType.PMAX)
    prand = fault_arr == int(FaultType.PRAND)
    rofs = fault_arr == int(FaultType.ROFS)
    scale = np.ones((len(fault_arr), 2))
    scale[fault_arr == int(FaultType.LW_H), 0] = 0.5
    scale[fault_arr == int(FaultType.RW_H), 1] = 0.5
    scale[fault_arr == int(FaultType.BW_H), :] = 0.5
    return _FaultMasks(
        pmin=pmin,
        pmax=pmax,
        prand=prand,
        rofs=rofs,
        n_prand=int(prand.sum()),
        n_rofs=int(rofs.sum()),
        any_prox=bool(pmin.any() or pmax.any() or prand.any()),
        actuator_scale=scale,
        any_actuator=bool((scale != 1.0).any()),
    )


def _apply_sensor_faults_batch(proximity, neighbor_rel, masks: _FaultMasks, rab_range, rng):
    """Faulted (proximity, rab) arrays for the whole swarm, one cycle.

    Draw order is fixed: all PRAND rows (ascending robot index), then all
    ROFS offsets.
    """
    rab = rab_activations(neighbor_rel, rab_range)
    if masks.any_prox:
        proximity = proximity.copy()
        proximity[masks.pmin, :N_FRONT_PROXIMITY] = 0.0
        proximity[masks.pmax, :N_FRONT_PROXIMITY] = 1.0
        if masks.n_prand:
            proximity[masks.prand, :N_FRONT_PROXIMITY] = rng.random(
                (masks.n_prand, N_FRONT_PROXIMITY)
            )
    if masks.n_rofs:
        offsets = _rofs_offsets(rng, masks.n_rofs, rab_range)
        shifted = neighbor_rel[masks.rofs] + offsets[:, None, :]
        rab[masks.rofs] = rab_activations(shifted, rab_range)
    return proximity, rab


# ---------------------------------------------------------------------------
# Placement and collision resolution


def _circle_box_distance(xy, centers, half):
    """Distance from points (N, 2) to boxes (K, 2); (N, K)."""
    nearest = np.clip(xy[:, None, :], centers[None] - half, centers[None] + half)
    return np.hypot(*(xy[:, None, :] - nearest).transpose(2, 0, 1))


def place_entities(rng: np.random.Generator, env: EnvironmentSpec):
    """Rejection-sample non-overlapping obstacle centres and robot poses.

    Raises PlacementError after 10,000 failed attempts for any single entity,
    signalling that the arena is too crowded.
    """
    side = env.arena_side
    half = OBSTACLE_SIDE / 2.0
    obstacles = np.empty((0, 2))
    for _ in range(env.n_obstacles):
        for _ in range(PLACEMENT_ATTEMPTS):
            c = rng.uniform(half, side - half, size=2)
            if not len(obstacles) or np.all(
                np.max(np.abs(obstacles - c), axis=1) >= OBSTACLE_SIDE
            ):
                obstacles = np.vstack([obstacles, c])
                break
        else:
            raise PlacementError(
                f"could not place obstacle {len(obstacles) + 1} of {env.n_obstacles}"
            )
    poses = np.empty((0, 3))
    for _ in range(env.n_robots):
        for _ in range(PLACEMENT_ATTEMPTS):
            xy = rng.uniform(ROBOT_RADIUS, side - ROBOT_RADIUS, size=2)
            if len(poses) and np.min(np.hypot(*(poses[:, :2] - xy).T)) < 2 * ROBOT_RADIUS:
                continue
            if len(obstacles) and _circle_box_distance(xy[None], obstacles, half).min() < ROBOT_RADIUS:
                continue
            heading = float(wrap_angle(rng.uniform(-np.pi, np.pi)))
            poses = np.vstack([poses, [xy[0], xy[1], heading]])
            break
        else:
            raise PlacementError(f"could not place robot {len(poses) + 1} of {env.n_robots}")
    return obstacles, poses


def resolve_collisions(poses, arena: ArenaSpec, body: RobotBody) -> np.ndarray:
    """Project robots out of walls, obstacles, and each other.

    Iterates positional corrections until no two discs overlap by more than
    1e-9 m; walls are clamped last so robots can never leave the arena.
    """
    poses = np.array(poses, dtype=float)
    xy = poses[:, :2]
    n = len(xy)
    r = body.radius
    half = OBSTACLE_SIDE / 2.0
    has_obstacles = len(arena.obstacles) > 0
    for _ in range(MAX_RESOLUTION_PASSES):
        np.clip(xy, r, arena.side - r, out=xy)
        if has_obstacles:
            nearest = np.clip(xy[:, None, :], arena.obstacles[None] - half, arena.obstacles[None] + half)
            delta = xy[:, None, :] - nearest
            dist = np.hypot(delta[..., 0], delta[..., 1])
            for i, k in zip(*np.nonzero(dist < r)):
                d = dist[i, k]
                if d > 1e-12:
                    xy[i] += delta[i, k] / d * (r - d)
                else:  # centre inside the box: exit along the shallower axis
                    gap = xy[i] - arena.obstacles[k]
                    axis = int(np.argmin(half - np.abs(gap)))
                    direction = 1.0 if gap[axis] >= 0 else -1.0
                    xy[i][axis] = arena.obstacles[k][axis] + direction * (half + r)
        clean = True
        if n > 1:
            diff = xy[:, None, :] - xy[None, :, :]
            dist = np.hypot(diff[..., 0], diff[..., 1])
            np.fill_diagonal(dist, np.inf)
            overlap = 2 * r - dist
            if (overlap > PAIR_OVERLAP_TOL).any():
                clean = False
                push = np.zeros_like(xy)
                for i, j in zip(*np.nonzero(np.triu(overlap > PAIR_OVERLAP_TOL, k=1))):
                    d = dist[i, j]
                    if d > 1e-12:
                        unit = diff[i, j] / d
                    else:
                        unit = np.array([1.0, 0.0])
                    push[i] += 0.5 * overlap[i, j] * unit
                    push[j] -= 0.5 * overlap[i, j] * unit
                xy += push
        if has_obstacles:
            sep = _circle_box_distance(xy, arena.obstacles, half)
            if (sep < r - PAIR_OVERLAP_TOL).any():
                clean = False
        if (xy < r).any() or (xy > arena.side - r).any():
            clean = False
        if clean:
            break
    np.clip(xy, r, arena.side - r, out=xy)
    return poses


# ---------------------------------------------------------------------------
# Trial execution


def run_trial(
    env: EnvironmentSpec,
    genome: Genome,
    faults=None,
    seed=0,
    duration: float = 400.0,
) -> TrialLog:
    """Simulate one trial and return its complete log.

    Robots and obstacles are placed uniformly at random without overlap; the
    swarm then runs duration / 0.2 control cycles of sense, fault injection,
    clonal controller update, actuation, integration, and collision
    resolution. The result is a deterministic function of all arguments.
    """
    rng = np.random.default_rng(seed)
    body = RobotBody.from_env(env)
    n = env.n_robots
    if faults is None:
        fault_arr = np.full(n, int(FaultType.NONE))
    else:
        fault_arr = np.asarray([int(f) for f in faults])
        if len(fault_arr) != n:
            raise ValueError(f"fault assignment length {len(fault_arr)} != swarm size {n}")
    obstacles, poses = place_entities(rng, env)
    arena = ArenaSpec(env.arena_side, obstacles)
    n_cycles = int(round(duration / CONTROL_DT))
    masks = _compile_faults(fault_arr)

    net = CompiledNetwork(genome)
    activations = net.initial_state(n)

    log_poses = np.empty((n_cycles, n, 3))
    log_prox = np.empty((n_cycles, n, N_PROXIMITY_RAYS))
    log_rab = np.empty((n_cycles, n, N_RAB_CONES))
    log_cmds = np.empty((n_cycles, n, 2))
    log_v = np.empty((n_cycles, n))
    log_omega = np.empty((n_cycles, n))

    inputs = np.empty((n, N_INPUTS))
    inputs[:, -1] = 1.0  # bias

    for t in range(n_cycles):
        prox = proximity_activations(poses, arena, body)
        rel = body_frame_offsets(poses)
        prox, rab = _apply_sensor_faults_batch(prox, rel, masks, body.rab_range, rng)

        inputs[:, :7] = sensor_input_scale(prox)
        inputs[:, 7:15] = sensor_input_scale(rab)
        activations = net.step(activations, inputs)
        commands = net.outputs(activations) * body.max_linear_speed
        if masks.any_actuator:
            commands = commands * masks.actuator_scale

        v = 0.5 * (commands[:, 0] + commands[:, 1])
        omega = np.clip(
            (commands[:, 1] - commands[:, 0]) / body.axle_length,
            -body.max_angular_speed,
            body.max_angular_speed,
        )

        log_poses[t] = poses
        log_prox[t] = prox
        log_rab[t] = rab
        log_cmds[t] = commands
        log_v[t] = v
        log_omega[t] = omega

        moved = np.empty_like(poses)
        moved[:, 0] = poses[:, 0] + v * CONTROL_DT * np.cos(poses[:, 2])
        moved[:, 1] = poses[:, 1] + v * CONTROL_DT * np.sin(poses[:, 2])
        moved[:, 2] = wrap_angle(poses[:, 2] + omega * CONTROL_DT)
        poses = resolve_collisions(moved, arena, body)

    return TrialLog(
        arena=arena,
        body=body,
        poses=log_poses,
        proximity=log_prox,
        rab=log_rab,
        commands=log_cmds,
        linear_velocity=log_v,
        angular_velocity=log_omega,
        final_poses=poses,
    )


def trial_log_to_csv(log: TrialLog, path) -> None:
    """Debug export: one row per (cycle, robot) with pose and wheel commands."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("cycle,robot,x,y,heading,vl,vr\n")
        for t in range(log.n_cycles):
            for i in range(log.n_robots):
                x, y, heading = (float(v) for v in log.poses[t, i])
                vl, vr = (float(v) for v in log.commands[t, i])
                fh.write(
                    f"{t},{i},{x!r},{y!r},{heading!r},{vl!r},{vr!r}\n"
                )
