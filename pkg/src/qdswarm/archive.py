"""Behaviour-performance archives: fixed grids and CVT tessellations.

Both archive kinds hold at most one elite per cell and only replace an
incumbent on a strict performance improvement. Grid archives serve the
hand-coded descriptor (16^3 bins) and the environment descriptor (4^6 bins);
CVT archives partition higher-dimensional descriptor spaces into 4096 cells
around k-means centroids.
"""

import csv
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .environment import (
    EnvironmentSpec,
    N_LEVELS,
    env_from_index,
    env_index_from_flat,
)
from .genome import Genome, load_genome, save_genome

ARCHIVE_CAPACITY = 4096
HBD_BINS = 16


@dataclass
class Elite:
    """One archive cell's occupant and its evaluation metadata."""

    genome: Genome
    performance: float
    descriptor: object = None
    env: EnvironmentSpec = None
    seeds: Optional[tuple[int, ...]] = None


def hbd_bins(descriptor) -> tuple[int, ...]:
    """Bin a [0,1]^3 descriptor into 16 bins per dimension."""
    d = np.asarray(descriptor, dtype=float)
    return tuple(int(min(HBD_BINS - 1, max(0, np.floor(v * HBD_BINS)))) for v in d)


@dataclass
class GridArchive:
    """Sparse fixed-resolution archive keyed by flattened bin index."""

    dims: tuple[int, ...]
    binner: callable
    cells: dict[int, Elite] = field(default_factory=dict)

    @classmethod
    def hbd(cls) -> "GridArchive":
        return cls(dims=(HBD_BINS,) * 3, binner=hbd_bins)

    @classmethod
    def qed(cls) -> "GridArchive":
        return cls(dims=(N_LEVELS,) * 6, binner=lambda idx: tuple(int(i) for i in idx))

    @property
    def capacity(self) -> int:
        return int(np.prod(self.dims))

    def key_of(self, descriptor) -> int:
        bins = self.binner(descriptor)
        if len(bins) != len(self.dims):
            raise ValueError("descriptor dimensionality mismatch")
        key = 0
        for b, d in zip(bins, self.dims):
            if not 0 <= b < d:
                raise ValueError(f"bin {bins} outside grid {self.dims}")
            key = key * d + b
        return key

    def try_insert(self, key: int, elite: Elite) -> bool:
        incumbent = self.cells.get(key)
        if incumbent is None or elite.performance > incumbent.performance:
            self.cells[key] = elite
            return True
        return False

    def insert(self, elite: Elite) -> bool:
        return self.try_insert(self.key_of(elite.descriptor), elite)

    @property
    def coverage(self) -> int:
        return len(self.cells)


@dataclass
class CvtArchive:
    """Archive keyed by the nearest of k fixed centroids."""

    centroids: np.ndarray
    cells: dict[int, Elite] = field(default_factory=dict)

    @property
    def capacity(self) -> int:
        return len(self.centroids)

    def key_of(self, descriptor) -> int:
        return nearest_centroid(descriptor, self.centroids)

    def try_insert(self, key: int, elite: Elite) -> bool:
        incumbent = self.cells.get(key)
        if incumbent is None or elite.performance > incumbent.performance:
            self.cells[key] = elite
            return True
        return False

    def insert(self, elite: Elite) -> bool:
        return self.try_insert(self.key_of(elite.descriptor), elite)

    @property
    def coverage(self) -> int:
        return len(self.cells)


def try_insert(archive, elite: Elite) -> bool:
    """Insert `elite` at the cell its descriptor maps to; strict improvement
    only, incumbents win ties."""
    return archive.insert(elite)


def archive_best(archive) -> Elite:
    return max(archive.cells.values(), key=lambda e: e.performance)


def archive_mean(archive) -> float:
    return float(np.mean([e.performance for e in archive.cells.values()]))


# ---------------------------------------------------------------------------
# CVT construction


def nearest_centroid(descriptor, centroids) -> int:
    """Index of the Euclidean-nearest centroid; ties go to the lowest index."""
    d = np.asarray(descriptor, dtype=float).ravel()
    c = np.asarray(centroids, dtype=float)
    dist = ((c - d[None, :]) ** 2).sum(axis=1)
    return int(np.argmin(dist))


def sample_simplex_blocks(rng, count: int, dim: int, block: int = 16) -> np.ndarray:
    """Seed points whose consecutive `block`-sized slices each lie on the
    probability simplex (uniformly, via normalised exponentials)."""
    if dim % block:
        raise ValueError("dim must be a multiple of the block size")
    draws = rng.exponential(1.0, size=(count, dim // block, block))
    draws /= draws.sum(axis=2, keepdims=True)
    return draws.reshape(count, dim)


def _kmeans_pp_init(points, k, rng) -> np.ndarray:
    """Classic k-means++ seeding. O(k n d): prohibitive for k ~ 4096 in high
    dimension, kept for small problems and comparisons."""
    n = len(points)
    norms = (points**2).sum(axis=1)
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(0, n))
    centroids[0] = points[first]
    d2 = np.maximum(norms - 2.0 * (points @ centroids[0]) + norms[first], 0.0)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(0, n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[i] = points[idx]
        cnorm = (centroids[i] ** 2).sum()
        d2 = np.minimum(d2, np.maximum(norms - 2.0 * (points @ centroids[i]) + cnorm, 0.0))
    return centroids


def _subset_init(points, k, rng) -> np.ndarray:
    """Uniform distinct-subset seeding; on the uniform clouds used for CVT
    construction this matches k-means++ quality at a fraction of the cost."""
    idx = rng.choice(len(points), size=k, replace=False)
    return points[np.sort(idx)].copy()


def _assign(points, centroids, chunk: int = 2048) -> np.ndarray:
    """Nearest-centroid labels, chunked to bound memory for large clouds."""
    norms = (centroids**2).sum(axis=1)
    labels = np.empty(len(points), dtype=np.int64)
    for start in range(0, len(points), chunk):
        block = points[start : start + chunk]
        scores = norms[None, :] - 2.0 * (block @ centroids.T)
        labels[start : start + chunk] = np.argmin(scores, axis=1)
    return labels


def _label_means(points, labels, k) -> tuple[np.ndarray, np.ndarray]:
    """Per-label sums and counts via sort + reduceat (fast scatter-add)."""
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    boundaries = np.flatnonzero(np.diff(sorted_labels)) + 1
    starts = np.concatenate([[0], boundaries])
    sums = np.zeros((k, points.shape[1]))
    present = sorted_labels[starts]
    sums[present] = np.add.reduceat(points[order], starts, axis=0)
    counts = np.bincount(labels, minlength=k)
    return sums, counts


def generate_cvt_centroids(
    k: int,
    dim: int,
    n_seeds: int,
    seed: int = 0,
    simplex_blocks: bool = False,
    max_iter: int = 100,
    tol: float = 1e-6,
    points=None,
    init: str = "subset",
) -> np.ndarray:
    """Lloyd's k-means over a uniform seed cloud.

    With `simplex_blocks`, seeds are drawn per 16-value block uniformly on
    the probability simplex, so centroids inherit unit block sums. Iteration
    stops when the largest centroid shift falls below `tol`. An explicit
    `points` cloud overrides the internal sampling. `init` selects the
    seeding: "subset" (uniform distinct seeds, the default; on uniform clouds
    this matches k-means++ at a fraction of the cost) or "k-means++".
    """
    rng = np.random.default_rng(seed)
    if points is not None:
        points = np.asarray(points, dtype=float)
        n_seeds, dim = points.shape
    if n_seeds < k:
        raise ValueError(f"need at least k={k} seed points, got {n_seeds}")
    if points is None:
        if simplex_blocks:
            points = sample_simplex_blocks(rng, n_seeds, dim)
        else:
            points = rng.random((n_seeds, dim))
    if init == "k-means++":
        centroids = _kmeans_pp_init(points, k, rng)
    elif init == "subset":
        centroids = _subset_init(points, k, rng)
    else:
        raise ValueError(f"unknown init {init!r}")
    for _ in range(max_iter):
        labels = _assign(points, centroids)
        new = centroids.copy()
        sums, counts = _label_means(points, labels, k)
        occupied = counts > 0
        new[occupied] = sums[occupied] / counts[occupied, None]
        shift = np.linalg.norm(new - centroids, axis=1).max()
        centroids = new
        if shift < tol:
            break
    return centroids


# ---------------------------------------------------------------------------
# Persistence


def save_centroids(centroids, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(centroids, dtype=float):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_centroids(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def save_archive(archive, directory, header: str = "") -> None:
    """Write the archive index CSV plus one genome file per elite.

    Index columns: cell key, performance, the six environment attributes the
    elite was evaluated in, and its genome file name.
    """
    os.makedirs(os.path.join(directory, "genomes"), exist_ok=True)
    index_path = os.path.join(directory, "index.csv")
    with open(index_path, "w", encoding="utf-8", newline="") as fh:
        if header:
            fh.write(header.rstrip("\n") + "\n")
        writer = csv.writer(fh)
        writer.writerow(
            [
                "key",
                "performance",
                "max_linear_speed",
                "n_robots",
                "arena_side",
                "n_obstacles",
                "rab_range",
                "proximity_range",
                "genome_file",
            ]
        )
        for key in sorted(archive.cells):
            elite = archive.cells[key]
            env = elite.env if elite.env is not None else EnvironmentSpec()
            name = f"cell_{key:05d}.txt"
            save_genome(elite.genome, os.path.join(directory, "genomes", name))
            writer.writerow(
                [
                    key,
                    repr(float(elite.performance)),
                    repr(float(env.max_linear_speed)),
                    env.n_robots,
                    repr(float(env.arena_side)),
                    env.n_obstacles,
                    repr(float(env.rab_range)),
                    repr(float(env.proximity_range)),
                    name,
                ]
            )
    if isinstance(archive, CvtArchive):
        save_centroids(archive.centroids, os.path.join(directory, "centroids.csv"))


def load_archive(directory, kind: str):
    """Load an archive saved by :func:`save_archive`.

    `kind` is one of hbd/sdbc/spirit/qed; CVT kinds require the centroid file
    saved next to the index. Descriptors are not persisted and are left None.
    """
    if kind in ("sdbc", "spirit"):
        centroids = load_centroids(os.path.join(directory, "centroids.csv"))
        archive = CvtArchive(centroids=centroids)
    elif kind == "hbd":
        archive = GridArchive.hbd()
    elif kind == "qed":
        archive = GridArchive.qed()
    else:
        raise ValueError(f"unknown archive kind {kind!r}")
    index_path = os.path.join(directory, "index.csv")
    with open(index_path, encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(rows)
    for row in reader:
        env = EnvironmentSpec(
            max_linear_speed=float(row["max_linear_speed"]),
            n_robots=int(row["n_robots"]),
            arena_side=float(row["arena_side"]),
            n_obstacles=int(row["n_obstacles"]),
            rab_range=float(row["rab_range"]),
            proximity_range=float(row["proximity_range"]),
        )
        genome = load_genome(os.path.join(directory, "genomes", row["genome_file"]))
        archive.cells[int(row["key"])] = Elite(
            genome=genome, performance=float(row["performance"]), env=env
        )
    return archive


def qed_key_environment(key: int) -> EnvironmentSpec:
    """Decode a QED archive cell key back to its evaluation environment."""
    return env_from_index(env_index_from_flat(key))
