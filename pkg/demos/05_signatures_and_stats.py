"""Statistical analysis of recovery records: signatures and pairwise tests.

Builds two synthetic record sets with different resilience profiles, fits
the impact-resilience signature (slope, correlation, and a kernel density
grid), and compares the sets with the rank-sum test and Cliff's delta.
"""

import numpy as np

from qdswarm import RecoveryRecord, cliffs_delta, signature, wilcoxon_rank_sum


def synth_records(slope, noise, n, seed):
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        imp = float(-0.6 * rng.random())
        res = float(slope * imp + noise * rng.normal())
        records.append(
            RecoveryRecord(
                fault_id=str(i),
                task="aggregation",
                faults=("NONE",) * 10,
                impact=imp,
                recovered=float(rng.uniform(0.6, 0.9)),
                recovered_norm=float(rng.uniform(0.7, 1.0)),
                resilience=min(0.0, res),
                distance=float(rng.random()),
                best_key=i,
            )
        )
    return records


shallow = synth_records(slope=0.17, noise=0.02, n=250, seed=0)
steep = synth_records(slope=0.60, noise=0.02, n=250, seed=1)

for name, records in (("shallow", shallow), ("steep", steep)):
    sig = signature(records, "impact", "resilience")
    mass = sig.density.sum() * (sig.x_grid[1] - sig.x_grid[0]) * (sig.y_grid[1] - sig.y_grid[0])
    print(
        f"{name:>8}: slope {sig.slope:.3f}  correlation {sig.correlation:.3f}  "
        f"KDE grid {sig.density.shape} (mass {mass:.3f})"
    )

a = [r.resilience for r in shallow]
b = [r.resilience for r in steep]
p = wilcoxon_rank_sum(a, b)
effect = cliffs_delta(a, b)
print(f"\nresilience comparison: p = {p:.3g}, delta = {effect.delta:.3f} ({effect.magnitude})")
print("the flatter signature recovers better from high-impact faults")
