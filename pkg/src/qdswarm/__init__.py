"""qdswarm: quality-diversity evolution and fault recovery for robot swarms.

A deterministic 2D kinematic swarm simulator, evolvable recurrent network
controllers, five swarm task fitness functions, four archive descriptor
families (hand-coded, feature-statistics, policy-profile, and
environment-index), MAP-Elites style evolution, per-robot fault injection,
and the statistics used to quantify fault recovery.
"""

from .archive import (
    CvtArchive,
    Elite,
    GridArchive,
    generate_cvt_centroids,
    load_archive,
    nearest_centroid,
    save_archive,
    try_insert,
)
from .descriptors import (
    compute_hbd,
    compute_sdbc,
    compute_spirit,
    decode_env_descriptor,
    env_descriptor,
    geometric_median,
)
from .environment import (
    NORMAL_ENV,
    EnvironmentSpec,
    all_environments,
    env_from_index,
    env_index,
    generate_environment,
)
from .evolve import EvolutionConfig, EvolveResult, evolve
from .genome import (
    Genome,
    MutationParams,
    NetworkState,
    forward,
    genome_from_text,
    genome_to_text,
    mutate,
    polynomial_mutation,
    random_genome,
)
from .recovery import (
    RecoveryRecord,
    evaluate_archive,
    fault_recovery_records,
    impact,
    project_archive,
    recover,
    resilience,
    sample_combined_fault,
    spirit_distance,
)
from .sim import (
    ArenaSpec,
    FaultType,
    PlacementError,
    RobotBody,
    SensorFrame,
    TrialLog,
    World,
    apply_faults,
    differential_drive_step,
    run_trial,
    sense_proximity,
    sense_rab,
    trial_log_to_csv,
)
from .stats import (
    SignatureResult,
    StatResult,
    cliffs_delta,
    kde_grid_2d,
    linear_fit,
    signature,
    wilcoxon_rank_sum,
)
from .tasks import (
    TaskKind,
    fitness,
    fitness_aggregation,
    fitness_border_patrolling,
    fitness_dispersion,
    fitness_flocking,
    fitness_patrolling,
    performance,
)

__version__ = "0.1.0"
