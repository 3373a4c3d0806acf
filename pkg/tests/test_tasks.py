import numpy as np
import pytest

from conftest import make_log
from qdswarm.environment import EnvironmentSpec
from qdswarm.genome import Genome
from qdswarm.seeding import derive_seed
from qdswarm.tasks import (
    PATROL_DECAY_PER_CYCLE,
    TaskKind,
    fitness,
    fitness_aggregation,
    fitness_border_patrolling,
    fitness_dispersion,
    fitness_flocking,
    fitness_patrolling,
    linear_decay,
    patrol_cell_trace,
    performance,
)

T = 40
M4 = 4.0 * np.sqrt(2.0)


def stack_positions(points, cycles=T):
    return np.tile(np.asarray(points, dtype=float)[None, :, :], (cycles, 1, 1))


class TestAggregation:
    def test_coincident_robots_score_one(self):
        log = make_log(stack_positions([[2.0, 2.0]] * 4))
        assert fitness_aggregation(log) == pytest.approx(1.0, abs=1e-9)

    def test_opposite_corners_score_half(self):
        log = make_log(stack_positions([[0.0, 0.0], [4.0, 4.0]]))
        assert fitness_aggregation(log) == pytest.approx(0.5, abs=1e-9)

    def test_single_robot_scores_one(self):
        log = make_log(stack_positions([[1.0, 3.0]]))
        assert fitness_aggregation(log) == pytest.approx(1.0, abs=1e-9)


class TestDispersion:
    def test_coincident_robots_score_zero(self):
        log = make_log(stack_positions([[2.0, 2.0]] * 3))
        assert fitness_dispersion(log) == pytest.approx(0.0, abs=1e-9)

    def test_two_robots_one_metre(self):
        log = make_log(stack_positions([[1.5, 2.0], [2.5, 2.0]]))
        assert fitness_dispersion(log) == pytest.approx(1.0 / (2.0 * np.sqrt(2.0)), abs=1e-9)

    def test_corner_pinned_clamped_to_one(self):
        log = make_log(stack_positions([[0.0, 0.0], [4.0, 4.0]]))
        assert fitness_dispersion(log) == pytest.approx(1.0, abs=0)

    def test_single_robot_rejected(self):
        with pytest.raises(ValueError):
            fitness_dispersion(make_log(stack_positions([[2.0, 2.0]])))

    def test_antitone_with_aggregation(self):
        # moving two robots from coincident towards corner-pinned strictly
        # decreases aggregation and strictly increases dispersion (below the
        # clamp); the corner-pinned extreme saturates the clamp at 1
        spreads = [0.0, 0.5, 1.5, 2.5]
        agg, disp = [], []
        for s in spreads:
            offset = s / (2.0 * np.sqrt(2.0))
            pts = [[2.0 - offset, 2.0 - offset], [2.0 + offset, 2.0 + offset]]
            log = make_log(stack_positions(pts))
            agg.append(fitness_aggregation(log))
            disp.append(fitness_dispersion(log))
        assert all(a > b for a, b in zip(agg, agg[1:]))
        assert all(a < b for a, b in zip(disp, disp[1:]))
        corners = make_log(stack_positions([[0.0, 0.0], [4.0, 4.0]]))
        assert fitness_dispersion(corners) == 1.0
        assert fitness_aggregation(corners) < agg[-1]


class TestFlocking:
    def test_stationary_scores_zero(self):
        log = make_log(stack_positions([[2.0, 2.0], [2.3, 2.0]]))
        assert fitness_flocking(log) == pytest.approx(0.0, abs=0)

    def test_aligned_full_speed_neighbours_score_one(self):
        positions = stack_positions([[2.0, 2.0], [2.3, 2.0]])
        v = np.full((T, 2), 0.10)
        log = make_log(positions, linear_velocity=v)
        assert fitness_flocking(log) == pytest.approx(1.0, abs=1e-9)

    def test_out_of_range_pairs_score_zero(self):
        positions = stack_positions([[1.0, 2.0], [2.6, 2.0]])
        v = np.full((T, 2), 0.10)
        log = make_log(positions, linear_velocity=v)
        assert fitness_flocking(log) == pytest.approx(0.0, abs=0)

    def test_heading_difference_discounts(self):
        positions = stack_positions([[2.0, 2.0], [2.3, 2.0]])
        headings = np.zeros((T, 2))
        headings[:, 1] = np.pi / 4  # 45 degrees: reward factor 0.5
        v = np.full((T, 2), 0.10)
        log = make_log(positions, headings=headings, linear_velocity=v)
        assert fitness_flocking(log) == pytest.approx(0.5, abs=1e-9)

    def test_opposed_velocities_not_rewarded(self):
        positions = stack_positions([[2.0, 2.0], [2.3, 2.0]])
        v = np.tile(np.array([0.10, -0.10]), (T, 1))
        log = make_log(positions, linear_velocity=v)
        assert fitness_flocking(log) == pytest.approx(0.0, abs=0)

    def test_coordinated_reverse_rewarded(self):
        # both robots driving backwards keep max(0, Vi*Vj) positive
        positions = stack_positions([[2.0, 2.0], [2.3, 2.0]])
        v = np.full((T, 2), -0.10)
        log = make_log(positions, linear_velocity=v)
        assert fitness_flocking(log) == pytest.approx(1.0, abs=1e-9)


class TestPatrolling:
    def test_single_stationary_robot(self):
        log = make_log(stack_positions([[2.05, 2.05]], cycles=100))
        assert fitness_patrolling(log) == pytest.approx(0.01, abs=1e-9)
        assert fitness_border_patrolling(log) == pytest.approx(0.0, abs=0)

    def test_border_robot_counts_for_both(self):
        log = make_log(stack_positions([[0.1, 0.1]], cycles=100))
        assert fitness_patrolling(log) == pytest.approx(1.0 / 100.0, abs=1e-9)
        assert fitness_border_patrolling(log) == pytest.approx(1.0 / 36.0, abs=1e-9)

    def test_visit_only_at_cycle_zero_decays_to_zero(self):
        # 200 s = 1000 cycles of decay empties the cell exactly
        positions = np.tile([[3.5, 3.5]], (1001, 1, 1))
        positions[1:] = [[0.1, 0.1]]
        log = make_log(positions)
        trace = patrol_cell_trace(log)
        cell = trace[:, 8, 8]
        assert cell[0] == 1.0
        assert cell[500] == pytest.approx(0.5, abs=1e-12)
        assert cell[1000] == 0.0

    def test_decay_formula_exact(self):
        for v0 in (1.0, 0.731, 0.002):
            for k in (0, 1, 7, 400, 1000, 5000):
                assert linear_decay(v0, k) == max(0.0, v0 - 0.005 * 0.2 * k)

    def test_border_mask_has_36_cells(self):
        from qdswarm.tasks import BORDER_MASK

        assert BORDER_MASK.sum() == 36

    def test_trace_shared_between_fitnesses(self):
        rng = np.random.default_rng(5)
        positions = rng.uniform(0, 4, size=(60, 3, 2))
        log = make_log(positions)
        trace = patrol_cell_trace(log)
        from qdswarm.tasks import BORDER_MASK

        assert fitness_patrolling(log) == pytest.approx(trace.mean(), abs=0)
        assert fitness_border_patrolling(log) == pytest.approx(trace[:, BORDER_MASK].mean(), abs=0)

    def test_values_bounded(self):
        rng = np.random.default_rng(8)
        positions = rng.uniform(0, 4, size=(80, 5, 2))
        log = make_log(positions)
        trace = patrol_cell_trace(log)
        assert np.all(trace >= 0.0)
        assert np.all(trace <= 1.0)


class TestAllFitnessesBounded:
    def test_random_logs_in_unit_interval(self):
        rng = np.random.default_rng(99)
        for _ in range(10):
            n = int(rng.integers(2, 8))
            positions = rng.uniform(0, 4, size=(30, n, 2))
            headings = rng.uniform(-np.pi, np.pi, size=(30, n))
            v = rng.uniform(-0.1, 0.1, size=(30, n))
            log = make_log(positions, headings=headings, linear_velocity=v)
            for task in TaskKind:
                value = fitness(task, log)
                assert 0.0 <= value <= 1.0, task


class TestPerformance:
    ENV = EnvironmentSpec(n_robots=5, arena_side=2.0)

    def test_single_seed_equals_single_trial(self):
        from qdswarm.sim import run_trial

        p = performance(TaskKind.AGGREGATION, self.ENV, Genome(), None, [11], duration=4.0)
        log = run_trial(self.ENV, Genome(), seed=11, duration=4.0)
        assert p == fitness_aggregation(log)

    def test_identical_seeds_collapse(self):
        p1 = performance(TaskKind.AGGREGATION, self.ENV, Genome(), None, [7], duration=4.0)
        pk = performance(TaskKind.AGGREGATION, self.ENV, Genome(), None, [7] * 4, duration=4.0)
        assert pk == pytest.approx(p1, abs=1e-15)

    def test_mean_matches_streaming_mean(self):
        seeds = [derive_seed(0, "perf", t) for t in range(50)]
        values = [
            performance(TaskKind.AGGREGATION, self.ENV, Genome(), None, [s], duration=2.0)
            for s in seeds
        ]
        combined = performance(TaskKind.AGGREGATION, self.ENV, Genome(), None, seeds, duration=2.0)
        assert combined == pytest.approx(np.mean(values), abs=1e-12)

    def test_empty_seeds_rejected(self):
        with pytest.raises(ValueError):
            performance(TaskKind.AGGREGATION, self.ENV, Genome(), None, [])
