"""Experiment configuration, orchestration, and file persistence.

Configuration is a flat key = value text format with dotted section keys;
unknown keys are errors. Two presets ship: `desk` (default, runs on a
workstation) and `paper` (the full-scale budget). Every output file carries a
provenance header line with the config hash and master seed, and each
pipeline stage writes a `.done` manifest of output hashes so that rerunning a
completed stage verifies the files and becomes a no-op.
"""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .archive import generate_cvt_centroids, load_archive, save_archive
from .environment import NORMAL_ENV
from .evolve import DESCRIPTOR_DIMS, EvolutionConfig, evolve
from .descriptors import compute_hbd, compute_sdbc, compute_spirit
from .recovery import (
    evaluate_archive,
    fault_recovery_records,
    project_archive,
    sample_combined_fault,
)
from .seeding import derive_rng, derive_seed
from .sim import run_trial, trial_log_to_csv
from .stats import cliffs_delta, signature
from .tasks import TaskKind

# key -> (type, desk default, paper default); cvt.seeds "auto" resolves per
# algorithm (behaviour-space dimensionality drives the seed-cloud size)
CONFIG_KEYS = {
    "task": (str, "aggregation", "aggregation"),
    "algorithm": (str, "qed", "qed"),
    "seed": (int, 0, 0),
    "replicates": (int, 1, 5),
    "out": (str, "runs/experiment", "runs/experiment"),
    "evolve.initial_population": (int, 200, 2000),
    "evolve.generations": (int, 1000, 30000),
    "evolve.evals_per_generation": (int, 20, 80),
    "evolve.trials": (int, 5, 50),
    "evolve.trial_duration": (float, 400.0, 400.0),
    "cvt.seeds": (str, "auto", "auto"),
    "cvt.iterations": (int, 20, 100),
    "reevaluate.trials": (int, 10, 10),
    "faults.count": (int, 25, 50),
    "faults.trials": (int, 10, 10),
}

AUTO_CVT_SEEDS = {
    "desk": {"sdbc": 20_000, "spirit": 8192},
    "paper": {"sdbc": 100_000, "spirit": 1_000_000},
}

PRESETS = ("desk", "paper")


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict:
    """Parse key = value lines; '#' starts a comment; unknown keys error."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def resolve_config(preset: str = "desk", file_text: str = "", overrides: dict | None = None) -> dict:
    """Merge preset defaults, config file values, and CLI overrides."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    column = 1 if preset == "desk" else 2
    config = {key: spec[column] for key, spec in CONFIG_KEYS.items()}
    config["_preset"] = preset
    for key, raw in parse_config_text(file_text).items():
        config[key] = _coerce(key, raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown override {key!r}")
        config[key] = _coerce(key, str(value))
    _validate(config)
    # materialize the seed-cloud size so stored configs are self-contained
    if config["cvt.seeds"] == "auto" and config["algorithm"] in ("sdbc", "spirit"):
        config["cvt.seeds"] = str(AUTO_CVT_SEEDS[preset][config["algorithm"]])
    return config


def _coerce(key: str, raw: str):
    kind = CONFIG_KEYS[key][0]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r}") from None
    return raw


def _validate(config: dict) -> None:
    TaskKind(config["task"])
    if config["algorithm"] not in DESCRIPTOR_DIMS:
        raise ConfigError(f"unknown algorithm {config['algorithm']!r}")
    for key in (
        "replicates",
        "evolve.initial_population",
        "evolve.generations",
        "evolve.evals_per_generation",
        "evolve.trials",
        "reevaluate.trials",
        "faults.count",
        "faults.trials",
    ):
        if config[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    if config["cvt.seeds"] != "auto":
        _coerce_auto_seeds(config["cvt.seeds"])


def _coerce_auto_seeds(raw) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"cvt.seeds must be an integer or 'auto', got {raw!r}") from None


def cvt_seed_count(config: dict) -> int:
    if config["cvt.seeds"] == "auto":
        return AUTO_CVT_SEEDS[config.get("_preset", "desk")][config["algorithm"]]
    return _coerce_auto_seeds(config["cvt.seeds"])


def config_text(config: dict) -> str:
    lines = []
    for key in sorted(CONFIG_KEYS):
        value = config[key]
        lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(config: dict) -> str:
    """Hash of the semantically relevant configuration (output path excluded)."""
    lines = [
        line
        for line in config_text(config).splitlines()
        if not line.startswith("out =")
    ]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:12]


def provenance(config: dict) -> str:
    return (
        f"# qdswarm config_hash={config_hash(config)} seed={config['seed']} "
        f"algorithm={config['algorithm']} task={config['task']}"
    )


def read_provenance(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    fields = {}
    if first.startswith("# qdswarm"):
        for token in first.split()[2:]:
            key, _, value = token.partition("=")
            fields[key] = value
    return fields


# ---------------------------------------------------------------------------
# Stage manifests


def _file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _manifest_path(directory, stage: str) -> Path:
    return Path(directory) / f"{stage}.done"


def stage_is_complete(directory, stage: str) -> bool:
    """True when the stage manifest exists and all recorded hashes match."""
    manifest = _manifest_path(directory, stage)
    if not manifest.exists():
        return False
    recorded = json.loads(manifest.read_text())
    for name, digest in recorded["files"].items():
        path = Path(directory) / name
        if not path.exists() or _file_hash(path) != digest:
            return False
    return True


def write_manifest(directory, stage: str, files) -> None:
    digests = {name: _file_hash(Path(directory) / name) for name in files}
    _manifest_path(directory, stage).write_text(
        json.dumps({"stage": stage, "files": digests}, indent=2, sort_keys=True) + "\n"
    )


def _tree_files(directory, root) -> list[str]:
    out = []
    for path in sorted(Path(directory).rglob("*")):
        if path.is_file():
            out.append(str(path.relative_to(root)))
    return out


# ---------------------------------------------------------------------------
# Stages


def replicate_dirs(config: dict) -> list[Path]:
    return [Path(config["out"]) / f"rep{r:02d}" for r in range(config["replicates"])]


def _replicate_seed(config: dict, rep: int) -> int:
    return derive_seed(config["seed"], "replicate", rep)


def _build_centroids(config: dict, rep_seed: int) -> np.ndarray | None:
    algorithm = config["algorithm"]
    if algorithm not in ("sdbc", "spirit"):
        return None
    return generate_cvt_centroids(
        k=4096,
        dim=DESCRIPTOR_DIMS[algorithm],
        n_seeds=cvt_seed_count(config),
        seed=derive_seed(rep_seed, "cvt"),
        simplex_blocks=algorithm == "spirit",
        max_iter=config["cvt.iterations"],
    )


def stage_evolve(config: dict, n_jobs: int = 1, log=print) -> list[Path]:
    """Evolve one archive per replicate; writes archive/, stats.csv, events.csv."""
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config_text(config))
    header = provenance(config)
    for rep, rep_dir in enumerate(replicate_dirs(config)):
        if stage_is_complete(rep_dir, "evolve"):
            log(f"evolve: {rep_dir} already complete, skipping")
            continue
        rep_dir.mkdir(parents=True, exist_ok=True)
        rep_seed = _replicate_seed(config, rep)
        centroids = _build_centroids(config, rep_seed)
        evo = EvolutionConfig(
            task=config["task"],
            algorithm=config["algorithm"],
            initial_population=config["evolve.initial_population"],
            generations=config["evolve.generations"],
            evals_per_generation=config["evolve.evals_per_generation"],
            trials=config["evolve.trials"],
            seed=rep_seed,
            trial_duration=config["evolve.trial_duration"],
            centroids=centroids,
            n_jobs=n_jobs,
        )
        result = evolve(evo)
        archive_dir = rep_dir / "archive"
        archive_dir.mkdir(exist_ok=True)
        save_archive(result.archive, archive_dir, header=header)
        with open(rep_dir / "stats.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            writer = csv.writer(fh)
            writer.writerow(["generation", "evaluations", "coverage", "best", "mean"])
            for row in result.stats:
                writer.writerow(
                    [row.generation, row.evaluations, row.coverage, repr(row.best), repr(row.mean)]
                )
        with open(rep_dir / "events.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            writer = csv.writer(fh)
            writer.writerow(["evaluation", "key", "previous", "performance"])
            for ev in result.events:
                writer.writerow(
                    [
                        ev.evaluation,
                        ev.key,
                        "" if ev.previous is None else repr(ev.previous),
                        repr(ev.performance),
                    ]
                )
        files = sorted(set(_tree_files(rep_dir, rep_dir)) - {"evolve.done"})
        write_manifest(rep_dir, "evolve", files)
        log(f"evolve: {rep_dir} coverage={result.archive.coverage}")
    return replicate_dirs(config)


def stage_reevaluate(config: dict, n_jobs: int = 1, log=print) -> None:
    """Re-score every elite in the normal operating environment."""
    header = provenance(config)
    for rep, rep_dir in enumerate(replicate_dirs(config)):
        if stage_is_complete(rep_dir, "reevaluate"):
            log(f"reevaluate: {rep_dir} already complete, skipping")
            continue
        archive = load_archive(rep_dir / "archive", config["algorithm"])
        rep_seed = _replicate_seed(config, rep)
        scores = evaluate_archive(
            archive,
            config["task"],
            fault=None,
            trials=config["reevaluate.trials"],
            seed=derive_seed(rep_seed, "recovery"),
            duration=config["evolve.trial_duration"],
            n_jobs=n_jobs,
        )
        best_key = max(sorted(scores), key=lambda k: scores[k])
        with open(rep_dir / "reevaluation.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            writer = csv.writer(fh)
            writer.writerow(["key", "performance"])
            for key in sorted(scores):
                writer.writerow([key, repr(scores[key])])
        with open(rep_dir / "reevaluation_summary.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            writer = csv.writer(fh)
            writer.writerow(["best_key", "best", "mean"])
            writer.writerow(
                [best_key, repr(scores[best_key]), repr(float(np.mean(list(scores.values()))))]
            )
        write_manifest(rep_dir, "reevaluate", ["reevaluation.csv", "reevaluation_summary.csv"])
        log(
            f"reevaluate: {rep_dir} best={scores[best_key]:.4f} "
            f"mean={np.mean(list(scores.values())):.4f}"
        )


RECORD_COLUMNS = [
    "task",
    "fault_id",
    "fault_codes",
    "impact",
    "recovered_perf",
    "recovered_perf_norm",
    "resilience",
    "distance",
    "best_cell_key",
]


def stage_faults(config: dict, n_jobs: int = 1, log=print) -> None:
    """Sample combined faults per replicate and write recovery records."""
    header = provenance(config)
    for rep, rep_dir in enumerate(replicate_dirs(config)):
        if stage_is_complete(rep_dir, "faults"):
            log(f"faults: {rep_dir} already complete, skipping")
            continue
        if not (rep_dir / "reevaluation.csv").exists():
            raise FileNotFoundError(
                f"{rep_dir} has no reevaluation.csv; run the reevaluate stage first"
            )
        archive = load_archive(rep_dir / "archive", config["algorithm"])
        rep_seed = _replicate_seed(config, rep)
        fault_rng = derive_rng(config["seed"], "faults", rep)
        faults = [
            sample_combined_fault(fault_rng, NORMAL_ENV.n_robots)
            for _ in range(config["faults.count"])
        ]
        fault_ids = [f"{rep:02d}-{i:03d}" for i in range(len(faults))]
        records = fault_recovery_records(
            archive,
            config["task"],
            faults,
            trials=config["faults.trials"],
            seed=derive_seed(rep_seed, "recovery"),
            duration=config["evolve.trial_duration"],
            fault_ids=fault_ids,
            n_jobs=n_jobs,
        )
        with open(rep_dir / "records.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            writer = csv.writer(fh)
            writer.writerow(RECORD_COLUMNS)
            for r in records:
                writer.writerow(
                    [
                        r.task,
                        r.fault_id,
                        ";".join(r.faults),
                        repr(r.impact),
                        repr(r.recovered),
                        repr(r.recovered_norm),
                        repr(r.resilience),
                        repr(r.distance),
                        r.best_key,
                    ]
                )
        write_manifest(rep_dir, "faults", ["records.csv"])
        log(f"faults: {rep_dir} wrote {len(records)} records")


def load_records_csv(path):
    """Records plus their provenance (algorithm/task) from one records.csv."""
    from .recovery import RecoveryRecord

    meta = read_provenance(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    for row in csv.DictReader(rows):
        records.append(
            RecoveryRecord(
                fault_id=row["fault_id"],
                task=row["task"],
                faults=tuple(row["fault_codes"].split(";")),
                impact=float(row["impact"]),
                recovered=float(row["recovered_perf"]),
                recovered_norm=float(row["recovered_perf_norm"]),
                resilience=float(row["resilience"]),
                distance=float(row["distance"]),
                best_key=int(row["best_cell_key"]),
            )
        )
    return meta.get("algorithm", "unknown"), records


SIGNATURE_PAIRS = (("impact", "resilience"), ("resilience", "distance"), ("impact", "distance"))


def stage_analyze(record_paths, out_dir, header: str = "# qdswarm analyze", log=print) -> None:
    """Signatures per record set plus pairwise statistics across algorithms."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, str], list] = {}
    for path in record_paths:
        algorithm, records = load_records_csv(path)
        if not records:
            continue
        key = (records[0].task, algorithm)
        groups.setdefault(key, []).extend(records)

    summary_rows = []
    for (task, algorithm), records in sorted(groups.items()):
        for x_field, y_field in SIGNATURE_PAIRS:
            try:
                sig = signature(records, x_field, y_field)
            except ValueError as exc:  # degenerate tiny record sets
                log(f"analyze: skipping {x_field}/{y_field} for {task}/{algorithm}: {exc}")
                summary_rows.append([task, algorithm, x_field, y_field, "", "", ""])
                continue
            grid_name = f"signature_{x_field}_{y_field}_{task}_{algorithm}.csv"
            with open(out / grid_name, "w", encoding="utf-8", newline="") as fh:
                fh.write(header + "\n")
                writer = csv.writer(fh)
                writer.writerow([x_field, y_field, "density"])
                for i, gx in enumerate(sig.x_grid):
                    for j, gy in enumerate(sig.y_grid):
                        writer.writerow([repr(float(gx)), repr(float(gy)), repr(float(sig.density[i, j]))])
            summary_rows.append(
                [task, algorithm, x_field, y_field, repr(sig.slope), repr(sig.correlation), grid_name]
            )
    with open(out / "signatures.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        writer = csv.writer(fh)
        writer.writerow(["task", "algorithm", "x_field", "y_field", "slope", "correlation", "grid_file"])
        writer.writerows(summary_rows)

    # pairwise tables only when at least two algorithms share a task
    table_rows = []
    tasks = sorted({task for task, _ in groups})
    for task in tasks:
        algorithms = sorted(alg for t, alg in groups if t == task)
        task_max = max(
            (r.recovered for alg in algorithms for r in groups[(task, alg)]), default=0.0
        )
        for i, alg_a in enumerate(algorithms):
            for alg_b in algorithms[i + 1 :]:
                for metric in ("resilience", "recovered"):
                    a = [getattr(r, metric) for r in groups[(task, alg_a)]]
                    b = [getattr(r, metric) for r in groups[(task, alg_b)]]
                    if metric == "recovered" and task_max > 0:
                        a = [v / task_max for v in a]
                        b = [v / task_max for v in b]
                    result = cliffs_delta(a, b)
                    table_rows.append(
                        [
                            task,
                            metric,
                            alg_a,
                            alg_b,
                            repr(result.p_value),
                            repr(result.delta),
                            result.magnitude,
                        ]
                    )
    if table_rows:
        with open(out / "stats_tables.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            writer = csv.writer(fh)
            writer.writerow(
                ["task", "metric", "algorithm_a", "algorithm_b", "p_value", "cliffs_delta", "magnitude"]
            )
            writer.writerows(table_rows)
    log(
        f"analyze: wrote {len(summary_rows)} signatures"
        + (f" and {len(table_rows)} pairwise rows" if table_rows else "")
    )


def stage_export(config: dict, what: str, cell: int | None = None, log=print) -> None:
    """Debug/export helpers: trial log, descriptors, or a projection."""
    for rep, rep_dir in enumerate(replicate_dirs(config)):
        archive = load_archive(rep_dir / "archive", config["algorithm"])
        rep_seed = _replicate_seed(config, rep)
        if cell is not None:
            key = cell
        else:
            key = max(sorted(archive.cells), key=lambda k: archive.cells[k].performance)
        genome = archive.cells[key].genome
        seed = derive_seed(rep_seed, "export")
        if what == "triallog":
            trial = run_trial(
                NORMAL_ENV, genome, seed=seed, duration=config["evolve.trial_duration"]
            )
            trial_log_to_csv(trial, rep_dir / f"trial_cell_{key:05d}.csv")
            log(f"export: {rep_dir} trial log for cell {key}")
        elif what == "descriptors":
            logs = [
                run_trial(
                    NORMAL_ENV,
                    genome,
                    seed=derive_seed(seed, t),
                    duration=config["evolve.trial_duration"],
                )
                for t in range(config["reevaluate.trials"])
            ]
            from .descriptors import descriptor_to_csv

            descriptor_to_csv("hbd", compute_hbd(logs), rep_dir / f"descriptor_hbd_{key:05d}.csv")
            descriptor_to_csv("sdbc", compute_sdbc(logs), rep_dir / f"descriptor_sdbc_{key:05d}.csv")
            descriptor_to_csv(
                "spirit", compute_spirit(logs), rep_dir / f"descriptor_spirit_{key:05d}.csv"
            )
            log(f"export: {rep_dir} descriptors for cell {key}")
        elif what == "projection":
            centroids = generate_cvt_centroids(
                k=4096,
                dim=1024,
                n_seeds=AUTO_CVT_SEEDS[config.get("_preset", "desk")]["spirit"],
                seed=derive_seed(config["seed"], "projection-cvt"),
                simplex_blocks=True,
                max_iter=config["cvt.iterations"],
            )
            projected = project_archive(
                archive,
                centroids,
                config["task"],
                trials=config["reevaluate.trials"],
                seed=derive_seed(rep_seed, "projection"),
                duration=config["evolve.trial_duration"],
            )
            with open(rep_dir / "projection.csv", "w", encoding="utf-8", newline="") as fh:
                fh.write(provenance(config) + "\n")
                writer = csv.writer(fh)
                writer.writerow(["centroid", "source_key", "performance"])
                for cid in sorted(projected.cells):
                    src, perf, _ = projected.cells[cid]
                    writer.writerow([cid, src, repr(perf)])
            with open(rep_dir / "projection_summary.csv", "w", encoding="utf-8", newline="") as fh:
                fh.write(provenance(config) + "\n")
                writer = csv.writer(fh)
                writer.writerow(["coverage", "diversity"])
                writer.writerow([projected.coverage, repr(projected.diversity)])
            log(
                f"export: {rep_dir} projection coverage={projected.coverage} "
                f"diversity={projected.diversity:.4f}"
            )
        else:
            raise ConfigError(f"unknown export kind {what!r}")
