"""The acquisition score predicts training horizon before any training.

Scores disjoint candidate label groups by the smallest positive
eigenvalue of the bordered tangent kernel (labeled set plus group) at a
shared initialization, then actually trains on each candidate set and
records how many epochs the run needs to reach its best test loss. If the
theory holds at desk scale, high scores go with short horizons: the
Spearman rank correlation between score and epochs-to-convergence should
come out negative.

Run:  python3 demos/score_predicts_horizon.py
"""

import numpy as np

from crcal.data import generate_moons, initial_pool
from crcal.diagnostics import horizon_correlation, score_vs_horizon
from crcal.nets import NetworkSpec
from crcal.pool import _raw_labels
from crcal.training import TrainConfig

base = generate_moons(300, 0.1, 2, seed=5, binarize=True)
pool = initial_pool(base, 2, seed=6)
test = generate_moons(200, 0.1, 2, seed=7, binarize=True)
test_data = (test.features, _raw_labels(test))

spec = NetworkSpec(input_dim=2, hidden_widths=(64,), num_classes=2,
                   use_bias=True)
cfg = TrainConfig(step_size=0.05, max_steps=1500, trace_every=50)

rows = score_vs_horizon(pool, test_data, spec, cfg,
                        num_groups=12, group_size=4, seed=8)

print(f"{'group':>5} {'score':>12} {'epochs to best':>15}")
for row in rows:
    score = row["score"]
    stext = f"{score:.4e}" if score is not None else "none"
    print(f"{row['group_index']:>5} {stext:>12} "
          f"{row['epochs_to_convergence']:>15}")

scored = [(r["score"], r["epochs_to_convergence"])
          for r in rows if r["score"] is not None]
rho = horizon_correlation([s for s, _ in scored], [e for _, e in scored])
print()
print(f"Spearman(score, epochs) = {rho:+.3f}  (negative = score is predictive)")
