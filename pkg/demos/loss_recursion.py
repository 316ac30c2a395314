"""Watch the one-step loss recursion hold exactly during training.

Trains a scalar-output ReLU net by full-batch gradient descent and checks,
at every step, the decomposition

    L_{t+1} = L_t - e_t . df_t + eps_t
            = (1 - 2 eta lambda_min) L_t + xi_t + eps_t + slack

where e_t is the residual y - f_t, df_t the prediction change, xi_t the
quadrature correction, eps_t = ||df_t||^2 / 2, and lambda_min the smallest
eigenvalue of the empirical tangent kernel on the training set. The first
line is an identity; the second is an inequality whose slack is the
Rayleigh gap of the error direction. Both residuals print at every traced
step and should sit at rounding scale relative to the loss.

Run:  python3 demos/loss_recursion.py
"""

import numpy as np

from crcal.nets import NetworkSpec, init_network
from crcal.pool import Pool
from crcal.training import TrainConfig, train_supervised, verify_recursion

rng = np.random.default_rng(0)
n, d = 16, 8
X = rng.standard_normal((n, d))
labels = (rng.random(n) > 0.5).astype(np.int64)
pool = Pool(X, labels, labeled_idx=range(n), num_classes=1)

spec = NetworkSpec(input_dim=d, hidden_widths=(128,), num_classes=1)
params = init_network(spec, 1)
cfg = TrainConfig(step_size=0.05, max_steps=60, trace_every=1)

model, trace = train_supervised(params, spec, pool, cfg)
report = verify_recursion(trace, cfg.step_size)

loss = trace.column("loss")
print(f"{'step':>4} {'loss':>12} {'identity':>12} {'inequality':>12}")
for i, step in enumerate(report["steps"]):
    print(f"{int(step):>4} {loss[i]:>12.3e} "
          f"{report['identity'][i]:>12.3e} {report['inequality'][i]:>12.3e}")

rel_id = report["max_abs_identity"] / loss[0]
rel_in = report["max_inequality"] / loss[0]
print()
print(f"max |identity residual|  = {report['max_abs_identity']:.3e} "
      f"({rel_id:.1e} relative to L_0)")
print(f"max inequality violation = {report['max_inequality']:.3e} "
      f"({rel_in:.1e} relative to L_0)")
print("both should be at numerical rounding scale (<= 1e-9 relative)")
