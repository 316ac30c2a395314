"""Full-batch gradient-descent trainers with instrumented traces.

Conventions fixed here and used everywhere: the labeled loss is
L = 1/2 * sum of squared residuals (summed, not averaged), the error
vector is e_t = y - f_t, and the per-step recursion is checked as

    L_{t+1} = (1 - 2*eta*lambda_min) L_t + xi_t + eps_t + r_t

with lambda_min the plain smallest eigenvalue of the traced kernel over
the labeled set (with the 1/2 convention, e^T K e >= 2*lambda_min*L, so
the coefficient carries the factor 2) and r_t <= 0 up to rounding. The
exact identity L_{t+1} = L_t - e_t . df_t + eps_t holds for any update
rule and is stored per row through the err_dot_df column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CadenceError
from .eigen import symmetric_eigvals
from .nets import (
    ParamVector,
    accuracy,
    forward_batch,
    grad_mse,
    mse_loss,
    one_hot,
    predict_classes,
    vjp_batch,
)
from .ntk import gram_values

_SSL_MODES = ("none", "pi_model", "mean_teacher")


@dataclass(frozen=True)
class TrainConfig:
    step_size: float = 0.1
    max_steps: int = 1000
    early_stop_patience: int | None = None
    ssl_mode: str = "none"
    consistency_weight: float = 0.0
    perturbation_sigma: float = 0.1
    ema_decay: float = 0.99
    trace_every: int = 1
    quadrature_points: int = 5

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1 when set")
        if self.ssl_mode not in _SSL_MODES:
            raise ValueError(f"ssl_mode must be one of {_SSL_MODES}")
        if self.consistency_weight < 0:
            raise ValueError("consistency_weight must be >= 0")
        if self.perturbation_sigma < 0:
            raise ValueError("perturbation_sigma must be >= 0")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must lie in [0, 1)")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        if self.quadrature_points < 3 or self.quadrature_points % 2 == 0:
            raise ValueError("quadrature_points must be odd and >= 3")


class TrainingTrace:
    """Append-only per-step record, one row per traced step."""

    COLUMNS = (
        "step",
        "loss",
        "lambda_min",
        "xi",
        "eps",
        "residual",
        "train_acc",
        "test_acc",
        "grad_sq",
        "test_loss",
        "err_dot_df",
    )

    def __init__(self):
        self._rows = []

    def append(self, **fields):
        missing = set(self.COLUMNS) - set(fields)
        if missing or set(fields) - set(self.COLUMNS):
            raise ValueError(f"trace row fields must be exactly {self.COLUMNS}")
        self._rows.append(tuple(float(fields[c]) for c in self.COLUMNS))

    def __len__(self):
        return len(self._rows)

    def column(self, name) -> np.ndarray:
        i = self.COLUMNS.index(name)
        return np.array([row[i] for row in self._rows], dtype=np.float64)

    def row(self, i) -> dict:
        return dict(zip(self.COLUMNS, self._rows[i]))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            for row in self._rows:
                writer.writerow([repr(v) for v in row])

    @classmethod
    def from_csv(cls, path):
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != cls.COLUMNS:
                raise ValueError(f"trace header must be {cls.COLUMNS}")
            for row in reader:
                trace._rows.append(tuple(float(v) for v in row))
        return trace


def gd_step(params: ParamVector, spec, X, Y, step_size: float) -> ParamVector:
    """One full-batch step theta - step_size * grad of the summed MSE."""
    grad = grad_mse(params, spec, X, Y)
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    return params.with_values(params.values - step_size * grad)


def compute_xi(params: ParamVector, spec, X, Y, step_size, quadrature_points) -> float:
    """Quadrature of grad_0 . (grad_0 - grad(theta - gamma*grad_0)) over
    gamma in [0, step_size], composite Simpson on quadrature_points nodes."""
    if quadrature_points < 3 or quadrature_points % 2 == 0:
        raise ValueError("quadrature_points must be odd and >= 3")
    g0 = grad_mse(params, spec, X, Y)
    return _xi_from_grad(params, spec, X, Y, step_size, quadrature_points, g0)


def _xi_from_grad(params, spec, X, Y, step_size, quadrature_points, g0) -> float:
    if step_size == 0.0:
        return 0.0
    h = step_size / (quadrature_points - 1)
    vals = np.empty(quadrature_points)
    vals[0] = 0.0  # integrand vanishes at gamma = 0 exactly
    for k in range(1, quadrature_points):
        shifted = params.with_values(params.values - (k * h) * g0)
        gk = grad_mse(shifted, spec, X, Y)
        vals[k] = g0 @ (g0 - gk)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite quadrature integrand")
    weights = np.ones(quadrature_points)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(h / 3.0 * (weights @ vals))


def _labeled_lambda_min(params, spec, X) -> float:
    kernel = gram_values(params, spec, X, scope="full", reduction="traced")
    return float(symmetric_eigvals(kernel)[-1])


def evaluate_model(params, spec, X, labels) -> tuple:
    """(accuracy, summed half-MSE against one-hot targets) on a dataset."""
    labels = np.asarray(labels, dtype=np.int64)
    targets = one_hot(labels, spec.num_classes)
    outputs = forward_batch(params, spec, X)
    loss = 0.5 * float(np.sum((outputs - targets) ** 2))
    preds = np.argmax(outputs, axis=1) if spec.num_classes > 1 else (
        outputs[:, 0] >= 0.5
    ).astype(np.int64)
    acc = float(np.mean(preds == labels))
    return acc, loss


def _run_gd(params, spec, pool, cfg: TrainConfig, mode, test_data, seed):
    if pool.labeled_idx.size == 0:
        raise ValueError("labeled set is empty")
    Xl = pool.labeled_features()
    yl = pool.labeled_labels()
    Y = one_hot(yl, spec.num_classes)
    eta = cfg.step_size
    w = cfg.consistency_weight
    sigma = cfg.perturbation_sigma
    rng = np.random.default_rng(seed)
    Xall = pool.features
    n_all = Xall.shape[0]

    student = params.copy()
    teacher = params.copy() if mode == "mean_teacher" else None

    Xt = yt = None
    if test_data is not None:
        Xt = np.asarray(test_data[0], dtype=np.float64)
        yt = np.asarray(test_data[1], dtype=np.int64)

    trace = TrainingTrace()
    best_acc = -np.inf
    stale = 0
    t = 0
    while t < cfg.max_steps:
        traced = t % cfg.trace_every == 0
        pre = None
        if traced:
            f_l = forward_batch(student, spec, Xl)
            loss = mse_loss(f_l, Y)
            g0 = vjp_batch(student, spec, Xl, f_l - Y)
            lam = _labeled_lambda_min(student, spec, Xl)
            xi = _xi_from_grad(student, spec, Xl, Y, eta, cfg.quadrature_points, g0)
            model = teacher if mode == "mean_teacher" else student
            train_acc = accuracy(model, spec, Xl, yl)
            if Xt is not None:
                test_acc, test_loss = evaluate_model(model, spec, Xt, yt)
                if cfg.early_stop_patience is not None:
                    if test_acc > best_acc:
                        best_acc = test_acc
                        stale = 0
                    else:
                        stale += 1
                        if stale >= cfg.early_stop_patience:
                            break
            else:
                test_acc = test_loss = float("nan")
            pre = (f_l, loss, g0, lam, xi, train_acc, test_acc, test_loss)

        grad = vjp_batch(student, spec, Xl, forward_batch(student, spec, Xl) - Y) if pre is None else pre[2].copy()
        if mode != "none" and w > 0.0:
            delta = rng.standard_normal(Xall.shape) * sigma
            delta2 = rng.standard_normal(Xall.shape) * sigma
            A, B = Xall + delta, Xall + delta2
            f_a = forward_batch(student, spec, A)
            if mode == "pi_model":
                f_b = forward_batch(student, spec, B)
                cot = f_a - f_b
                grad += (2.0 * w / n_all) * (
                    vjp_batch(student, spec, A, cot)
                    - vjp_batch(student, spec, B, cot)
                )
            else:
                f_b = forward_batch(teacher, spec, B)
                grad += (2.0 * w / n_all) * vjp_batch(student, spec, A, f_a - f_b)
        if not np.all(np.isfinite(grad)):
            raise ValueError(f"non-finite gradient at step {t}")

        new_student = student.with_values(student.values - eta * grad)
        if mode == "mean_teacher":
            teacher = teacher.with_values(
                cfg.ema_decay * teacher.values
                + (1.0 - cfg.ema_decay) * new_student.values
            )

        if traced:
            f_l, loss, g0, lam, xi, train_acc, test_acc, test_loss = pre
            f_next = forward_batch(new_student, spec, Xl)
            df = f_next - f_l
            eps = 0.5 * float(np.sum(df * df))
            err_dot_df = float(np.sum((Y - f_l) * df))
            next_loss = mse_loss(f_next, Y)
            residual = next_loss - ((1.0 - 2.0 * eta * lam) * loss + xi + eps)
            trace.append(
                step=t,
                loss=loss,
                lambda_min=lam,
                xi=xi,
                eps=eps,
                residual=residual,
                train_acc=train_acc,
                test_acc=test_acc,
                grad_sq=float(g0 @ g0),
                test_loss=test_loss,
                err_dot_df=err_dot_df,
            )

        student = new_student
        t += 1

    if mode == "mean_teacher":
        return student, teacher, trace
    return student, trace


def train_supervised(params, spec, pool, cfg: TrainConfig, test_data=None):
    """Full-batch GD on the summed MSE over the labeled set."""
    return _run_gd(params, spec, pool, cfg, "none", test_data, None)


def train_pi_model(params, spec, pool, cfg: TrainConfig, test_data=None, seed=None):
    """Supervised loss plus consistency_weight * mean over every pool
    sample of ||f(x+delta) - f(x+delta')||^2, fresh Gaussian noise per
    step, gradient through both branches."""
    return _run_gd(params, spec, pool, cfg, "pi_model", test_data, seed)


def train_mean_teacher(params, spec, pool, cfg: TrainConfig, test_data=None, seed=None):
    """Student GD on supervised + consistency against an EMA teacher;
    teacher_{t+1} = ema_decay*teacher_t + (1-ema_decay)*student_{t+1};
    accuracies in the trace are the teacher's."""
    return _run_gd(params, spec, pool, cfg, "mean_teacher", test_data, seed)


def verify_recursion(trace: TrainingTrace, step_size: float) -> dict:
    """Recompute per-step residuals from consecutive trace rows.

    identity[t] = L_{t+1} - (L_t - e_t.df_t + eps_t), zero to rounding
    for any update rule; inequality[t] = L_{t+1} - ((1 - 2*eta*lam_t)L_t
    + xi_t + eps_t), nonpositive up to rounding for plain GD.
    """
    steps = trace.column("step").astype(np.int64)
    if steps.size < 2:
        raise CadenceError("need at least two traced steps to verify")
    if np.any(np.diff(steps) != 1):
        raise CadenceError(
            "recursion check needs step-level cadence (trace_every=1); "
            f"got steps {steps[:4].tolist()}..."
        )
    loss = trace.column("loss")
    lam = trace.column("lambda_min")
    xi = trace.column("xi")
    eps = trace.column("eps")
    err_dot_df = trace.column("err_dot_df")
    l_next = loss[1:]
    l_now = loss[:-1]
    identity = l_next - (l_now - err_dot_df[:-1] + eps[:-1])
    inequality = l_next - (
        (1.0 - 2.0 * step_size * lam[:-1]) * l_now + xi[:-1] + eps[:-1]
    )
    return {
        "steps": steps[:-1],
        "identity": identity,
        "inequality": inequality,
        "max_abs_identity": float(np.max(np.abs(identity))),
        "max_inequality": float(np.max(inequality)),
    }


def epochs_to_convergence(trace: TrainingTrace, loss_threshold=None) -> int:
    """Step number of the first traced step whose test loss equals the
    run's global minimum (default), or first falls at or below
    loss_threshold when one is given."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    test_loss = trace.column("test_loss")
    if np.all(np.isnan(test_loss)):
        raise ValueError("trace has no test loss (trained without test data)")
    if loss_threshold is None:
        idx = int(np.argmin(test_loss))
    else:
        hits = np.flatnonzero(test_loss <= loss_threshold)
        if hits.size == 0:
            raise ValueError(f"test loss never reached {loss_threshold}")
        idx = int(hits[0])
    return int(trace.column("step")[idx])
