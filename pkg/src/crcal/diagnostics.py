"""Numerical checks tying training dynamics to kernel spectra: the
constant-kernel flow, width sweeps, eigenvalue concentration, horizon
correlation, scope comparison, and the pass/fail property suite behind
the verify CLI subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .acquisition import crc_acquire
from .data import generate_moons, initial_pool, moons_arc_distance
from .eigen import symmetric_eigh, symmetric_eigvals
from .errors import EigenError
from .nets import (
    NetworkSpec,
    finite_diff_jacobian,
    forward_batch,
    init_network,
    jacobian_batch,
    one_hot,
)
from .ntk import (
    DEFAULT_POSITIVITY_THRESHOLD,
    eigen_spectrum,
    gram_values,
    min_positive_eigenvalue,
)
from .pool import Pool, _raw_labels
from .training import (
    TrainConfig,
    compute_xi,
    epochs_to_convergence,
    gd_step,
    train_mean_teacher,
    train_pi_model,
    train_supervised,
    verify_recursion,
)

_FLOW_RESIDUAL_TOL = 1e-10


@dataclass
class KernelFlow:
    """Constant-kernel gradient flow df/dt = -K (f - y) from f0."""

    kernel: np.ndarray
    targets: np.ndarray
    f0: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def make_kernel_flow(kernel, targets, f0) -> KernelFlow:
    kernel = np.asarray(kernel, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64).ravel()
    f0 = np.asarray(f0, dtype=np.float64).ravel()
    n = targets.size
    if kernel.shape != (n, n) or f0.size != n:
        raise ValueError(
            f"shape mismatch: kernel {kernel.shape}, targets {n}, f0 {f0.size}"
        )
    evals, vecs = symmetric_eigh(kernel)
    scale = float(np.linalg.norm(kernel))
    residual = np.linalg.norm(kernel @ vecs - vecs * evals[None, :], axis=0)
    if residual.max() > _FLOW_RESIDUAL_TOL * max(scale, 1e-300):
        raise EigenError(
            f"eigenpair residual {residual.max():.3e} above "
            f"{_FLOW_RESIDUAL_TOL:.0e} * ||K||"
        )
    if evals[-1] < -1e-10 * max(evals[0], 1.0):
        raise ValueError(f"kernel is not PSD: min eigenvalue {evals[-1]:.3e}")
    return KernelFlow(kernel, targets, f0, evals, vecs)


def kernel_flow_solution(flow: KernelFlow, t: float) -> np.ndarray:
    """f(t) = y + V (exp(-lambda t) * V^T (f0 - y)); exact solution."""
    if t < 0:
        raise ValueError("t must be >= 0")
    modes = flow.eigenvectors.T @ (flow.f0 - flow.targets)
    return flow.targets + flow.eigenvectors @ (np.exp(-flow.eigenvalues * t) * modes)


def linearization_gap(
    template: NetworkSpec,
    widths,
    X,
    labels,
    step_size: float,
    num_steps: int,
    num_seeds: int = 10,
    seed=0,
) -> dict:
    """Per width: max over the trajectory of ||f_net - f_flow|| where the
    flow uses the blocked kernel frozen at initialization and continuous
    time t = step_size * step. One gap per seed."""
    widths = [int(w) for w in widths]
    if widths != sorted(widths):
        raise ValueError("widths must be ascending")
    X = np.asarray(X, dtype=np.float64)
    Y = one_hot(labels, template.num_classes)
    gaps = {}
    for w in widths:
        spec = replace(template, hidden_widths=(w,))
        per_seed = []
        for i in range(num_seeds):
            params = init_network(spec, np.random.SeedSequence(seed, spawn_key=(w, i)))
            kernel = gram_values(params, spec, X, scope="full", reduction="blocked")
            f0 = forward_batch(params, spec, X).ravel()
            flow = make_kernel_flow(kernel, Y.ravel(), f0)
            p = params
            gap = 0.0
            for t in range(num_steps + 1):
                f_net = forward_batch(p, spec, X).ravel()
                if not np.all(np.isfinite(f_net)):
                    raise ValueError(
                        f"training diverged at width {w}, step {t}, "
                        f"step_size {step_size}"
                    )
                f_flow = kernel_flow_solution(flow, step_size * t)
                gap = max(gap, float(np.linalg.norm(f_net - f_flow)))
                if t < num_steps:
                    p = gd_step(p, spec, X, Y, step_size)
            per_seed.append(gap)
        gaps[w] = np.array(per_seed)
    return gaps


def eig_concentration_report(
    pool: Pool,
    params,
    spec,
    sizes,
    seed,
    num_subsets: int = 100,
    scope: str = "full",
    positivity_threshold: float = DEFAULT_POSITIVITY_THRESHOLD,
) -> list:
    """For each set size: lambda_min_plus over random subsets of the pool,
    summarized by quantiles. Absent values (no positive eigenvalue) are
    counted separately."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise ValueError("need at least two set sizes")
    n = pool.size
    if max(sizes) > n:
        raise ValueError(f"size {max(sizes)} exceeds pool of {n}")
    kernel = gram_values(params, spec, pool.features, scope=scope, reduction="traced")
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        values = []
        absent = 0
        for _ in range(num_subsets):
            idx = rng.choice(n, size=size, replace=False)
            evals = symmetric_eigvals(kernel[np.ix_(idx, idx)])
            cut = positivity_threshold * evals[0]
            positive = evals[evals > cut]
            if positive.size:
                values.append(float(positive[-1]))
            else:
                absent += 1
        arr = np.array(values) if values else np.array([np.nan])
        rows.append(
            {
                "size": size,
                "num_subsets": num_subsets,
                "num_absent": absent,
                "min": float(np.min(arr)),
                "q25": float(np.quantile(arr, 0.25)),
                "median": float(np.quantile(arr, 0.5)),
                "q75": float(np.quantile(arr, 0.75)),
                "max": float(np.max(arr)),
            }
        )
    return rows


def eig_report_to_csv(rows, path):
    cols = ("size", "num_subsets", "num_absent", "min", "q25", "median", "q75", "max")
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    repr(float(row[c])) if isinstance(row[c], float) else str(row[c])
                    for c in cols
                )
                + "\n"
            )


def _average_ranks(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def horizon_correlation(scores, horizons) -> float:
    """Spearman rank correlation with average ranks for ties; 0 when
    either side has zero rank variance."""
    scores = np.asarray(scores, dtype=np.float64)
    horizons = np.asarray(horizons, dtype=np.float64)
    if scores.shape != horizons.shape or scores.ndim != 1:
        raise ValueError(
            f"scores and horizons must be equal-length vectors, got "
            f"{scores.shape} and {horizons.shape}"
        )
    if scores.size < 5:
        raise ValueError("need at least 5 pairs")
    ra = _average_ranks(scores)
    rb = _average_ranks(horizons)
    da = ra - ra.mean()
    db = rb - rb.mean()
    denom = np.sqrt((da @ da) * (db @ db))
    if denom == 0.0:
        return 0.0
    return float((da @ db) / denom)


def score_vs_horizon(
    pool: Pool,
    test_data,
    spec: NetworkSpec,
    train_cfg: TrainConfig,
    num_groups: int,
    group_size: int,
    seed,
    scope: str = "full",
    positivity_threshold: float = DEFAULT_POSITIVITY_THRESHOLD,
) -> list:
    """Score disjoint candidate groups by bordered-kernel lambda_min_plus
    at a shared initialization, then train labeled+group from that same
    initialization and record epochs_to_convergence. Training honors
    train_cfg.ssl_mode. A diagnostic, not a strategy: it trains on
    candidate labels by design, bypassing the oracle counter through
    pool construction.
    """
    unlabeled = pool.unlabeled_idx
    if num_groups * group_size > unlabeled.size:
        raise ValueError(
            f"need {num_groups * group_size} unlabeled samples, have {unlabeled.size}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    perm = rng.permutation(unlabeled)
    groups = perm[: num_groups * group_size].reshape(num_groups, group_size)
    params0 = init_network(spec, np.random.SeedSequence(seed, spawn_key=(1,)))

    labeled = pool.labeled_idx
    all_idx = np.concatenate([labeled, perm[: num_groups * group_size]])
    kernel = gram_values(
        params0, spec, pool.features[all_idx], scope=scope, reduction="traced"
    )
    pos_of = {int(s): p for p, s in enumerate(all_idx)}
    labeled_pos = [pos_of[int(s)] for s in labeled]
    labels_raw = _raw_labels(pool)

    rows = []
    for g in range(num_groups):
        pos = labeled_pos + [pos_of[int(s)] for s in groups[g]]
        evals = symmetric_eigvals(kernel[np.ix_(pos, pos)])
        cut = positivity_threshold * evals[0]
        positive = evals[evals > cut]
        score = float(positive[-1]) if positive.size else None
        bordered = Pool(
            pool.features,
            labels_raw,
            labeled_idx=np.concatenate([labeled, groups[g]]).tolist(),
            num_classes=pool.num_classes,
        )
        noise_seed = np.random.SeedSequence(seed, spawn_key=(2, g))
        if train_cfg.ssl_mode == "pi_model":
            _, trace = train_pi_model(
                params0, spec, bordered, train_cfg, test_data, seed=noise_seed
            )
        elif train_cfg.ssl_mode == "mean_teacher":
            _, _, trace = train_mean_teacher(
                params0, spec, bordered, train_cfg, test_data, seed=noise_seed
            )
        else:
            _, trace = train_supervised(params0, spec, bordered, train_cfg, test_data)
        rows.append(
            {
                "group_index": g,
                "members": [int(i) for i in groups[g]],
                "score": score,
                "epochs_to_convergence": int(epochs_to_convergence(trace)),
            }
        )
    return rows


def last_vs_full_study(cfg) -> list:
    """Paired scope comparison: run_assl per seed with scope last_layer
    and full, everything else shared (data, initial pool, round seeds).
    Returns one row per (scope, seed, round)."""
    from .harness import run_assl

    if cfg.strategy not in ("crc", "crc_balanced"):
        raise ValueError("scope study needs a kernel strategy (crc or crc_balanced)")
    rows = []
    for scope in ("last_layer", "full"):
        arm = replace(cfg, scope=scope, output_dir=None)
        for s in cfg.seeds:
            record = run_assl(arm, s)
            for rd in record.rounds:
                rows.append(
                    {
                        "scope": scope,
                        "seed": int(s),
                        "round": rd["round"],
                        "labeled_size": rd["labeled_size"],
                        "test_accuracy": rd["test_accuracy"],
                    }
                )
    return rows


def last_vs_full_to_csv(rows, path):
    cols = ("scope", "seed", "round", "labeled_size", "test_accuracy")
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    repr(float(row[c])) if isinstance(row[c], float) else str(row[c])
                    for c in cols
                )
                + "\n"
            )


def loglinear_fit(steps, values) -> tuple:
    """(slope, intercept, r_squared) of a least-squares line through
    (step, log value); values must be positive."""
    steps = np.asarray(steps, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        raise ValueError("log-linear fit needs positive values")
    y = np.log(values)
    A = np.column_stack([steps, np.ones_like(steps)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2


def first_order_gap(params, spec, X, labels, step_size) -> float:
    """||df - step_size * K (y - f)|| for one GD step, blocked kernel:
    the O(step_size^2) defect of the first-order dynamics."""
    Y = one_hot(labels, spec.num_classes)
    kernel = gram_values(params, spec, X, scope="full", reduction="blocked")
    f0 = forward_batch(params, spec, X)
    p1 = gd_step(params, spec, X, Y, step_size)
    df = (forward_batch(p1, spec, X) - f0).ravel()
    predicted = step_size * (kernel @ (Y - f0).ravel())
    return float(np.linalg.norm(df - predicted))


def curvature_proxy(params, spec, X, delta_scale, seed, num_probes=8) -> float:
    """Mean finite-difference curvature ||f(x+d)+f(x-d)-2f(x)|| / ||d||^2
    over Gaussian probe directions."""
    rng = np.random.default_rng(seed)
    X = np.asarray(X, dtype=np.float64)
    f = forward_batch(params, spec, X)
    total, count = 0.0, 0
    for _ in range(num_probes):
        d = rng.standard_normal(X.shape) * delta_scale
        plus = forward_batch(params, spec, X + d)
        minus = forward_batch(params, spec, X - d)
        second = np.linalg.norm(plus + minus - 2.0 * f, axis=1)
        norms = np.sum(d * d, axis=1)
        total += float(np.mean(second / norms))
        count += 1
    return total / count


def _brute_spearman(a, b) -> float:
    ra, rb = _average_ranks(a), _average_ranks(b)
    va = ra - ra.mean()
    vb = rb - rb.mean()
    denom = float(np.sqrt(np.sum(va * va) * np.sum(vb * vb)))
    if denom == 0.0:
        return 0.0
    return float(np.sum(va * vb) / denom)


def verify_suite(fast: bool = True, seed: int = 0) -> list:
    """Run the property suite; returns (name, passed, detail) triples."""
    results = []

    def run(name, fn):
        try:
            detail = fn()
            results.append((name, True, detail if detail else "ok"))
        except Exception as exc:
            results.append((name, False, f"{type(exc).__name__}: {exc}"))

    rng = np.random.default_rng(seed)

    def jacobian_fd():
        trials = 3 if fast else 10
        worst = 0.0
        for i in range(trials):
            spec = NetworkSpec(
                input_dim=3, hidden_widths=(7, 5), num_classes=2,
                use_bias=bool(i % 2),
            )
            params = init_network(spec, 100 + i)
            x = rng.standard_normal(3)
            jac = jacobian_batch(params, spec, x[None, :], "full")[0]
            fd = finite_diff_jacobian(params, spec, x, 1e-5).values
            rel = np.max(np.abs(jac - fd)) / max(np.max(np.abs(fd)), 1e-12)
            worst = max(worst, rel)
        if worst > 1e-4:
            raise AssertionError(f"max relative error {worst:.2e} > 1e-4")
        return f"max relative error {worst:.2e} over {trials} nets"

    def jacobian_restriction():
        spec = NetworkSpec(input_dim=4, hidden_widths=(6,), num_classes=3)
        params = init_network(spec, 7)
        X = rng.standard_normal((5, 4))
        full = jacobian_batch(params, spec, X, "full")
        last = jacobian_batch(params, spec, X, "last_layer")
        start, length = spec.layer_offsets[-1]
        if not np.array_equal(full[:, :, start : start + length], last):
            raise AssertionError("last_layer block differs from full-Jacobian slice")

    def traced_blocked_c1():
        spec = NetworkSpec(input_dim=3, hidden_widths=(8,), num_classes=1)
        params = init_network(spec, 11)
        X = rng.standard_normal((6, 3))
        traced = gram_values(params, spec, X, "full", "traced")
        blocked = gram_values(params, spec, X, "full", "blocked")
        if not np.allclose(traced, blocked, rtol=0, atol=1e-12):
            raise AssertionError("traced and blocked matrices differ for C=1")

    def gram_psd():
        spec = NetworkSpec(input_dim=4, hidden_widths=(10,), num_classes=2)
        params = init_network(spec, 5)
        X = rng.standard_normal((9, 4))
        evals = symmetric_eigvals(gram_values(params, spec, X, "full", "traced"))
        if evals[-1] < -1e-8 * max(evals[0], 1.0):
            raise AssertionError(f"kernel has negative eigenvalue {evals[-1]:.3e}")
        return f"eigenvalues in [{evals[-1]:.3e}, {evals[0]:.3e}]"

    def eigen_fixtures():
        fixtures = [
            (np.array([[2.0, 1.0], [1.0, 2.0]]), [3.0, 1.0]),
            (np.array([[1.0, 1.0], [1.0, 1.0]]), [2.0, 0.0]),
            (
                np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]]),
                [2.0 + np.sqrt(2.0), 2.0, 2.0 - np.sqrt(2.0)],
            ),
            (np.eye(3), [1.0, 1.0, 1.0]),
        ]
        for matrix, expected in fixtures:
            got = symmetric_eigvals(matrix)
            if np.max(np.abs(got - np.array(expected))) > 1e-10:
                raise AssertionError(f"fixture {matrix.tolist()} gave {got}")
        trials = 5 if fast else 20
        for i in range(trials):
            n = int(rng.integers(2, 129))
            root = rng.standard_normal((n, n))
            mat = root @ root.T
            eigen_spectrum(mat)  # raises if ||Gv - lambda v|| > 1e-8 ||G||
        return f"fixtures exact to 1e-10; residual bound held on {trials} random PSD"

    def min_positive_rules():
        ones = np.array([[1.0, 1.0], [1.0, 1.0]])
        got = min_positive_eigenvalue(ones)
        if got is None or abs(got - 2.0) > 1e-12:
            raise AssertionError(f"ones matrix gave {got}, expected 2")
        if min_positive_eigenvalue(np.zeros((3, 3))) is not None:
            raise AssertionError("zero matrix should have no positive eigenvalue")

    def recursion_residuals():
        spec = NetworkSpec(input_dim=6, hidden_widths=(64,), num_classes=1)
        params = init_network(spec, 3)
        X = rng.standard_normal((8, 6))
        labels = (rng.random(8) > 0.5).astype(np.int64)
        pool = Pool(X, labels, labeled_idx=range(8), num_classes=1)
        cfg = TrainConfig(step_size=0.05, max_steps=50, trace_every=1)
        _, trace = train_supervised(params, spec, pool, cfg)
        res = verify_recursion(trace, cfg.step_size)
        loss = trace.column("loss")[:-1]
        idworst = float(np.max(np.abs(res["identity"]) / np.maximum(loss, 1e-300)))
        iworst = float(np.max(res["inequality"] / np.maximum(loss, 1e-300)))
        if idworst > 1e-9:
            raise AssertionError(f"identity residual {idworst:.2e} > 1e-9 relative")
        if iworst > 1e-9:
            raise AssertionError(f"inequality residual {iworst:.2e} > 1e-9 relative")
        return f"identity {idworst:.2e}, inequality {iworst:.2e} (relative)"

    def first_order():
        spec = NetworkSpec(input_dim=5, hidden_widths=(128,), num_classes=2)
        params = init_network(spec, 9)
        X = rng.standard_normal((10, 5))
        labels = rng.integers(0, 2, 10)
        gaps = [
            first_order_gap(params, spec, X, labels, eta)
            for eta in (1e-2, 5e-3, 2.5e-3)
        ]
        for a, b in zip(gaps, gaps[1:]):
            ratio = a / b
            if not 4.0 * 0.7 <= ratio <= 4.0 * 1.3:
                raise AssertionError(
                    f"halving step_size scaled the defect by {ratio:.2f}, not ~4"
                )
        return f"defects {['%.2e' % g for g in gaps]} shrink ~4x per halving"

    def xi_closed_form():
        spec = NetworkSpec(
            input_dim=4, hidden_widths=(), num_classes=1, ntk_parameterization=False
        )
        params = init_network(spec, 21)
        X = rng.standard_normal((6, 4))
        Y = rng.standard_normal((6, 1))
        eta = 0.05
        g0 = X.T @ (X @ params.values[:, None] - Y).ravel()
        expected = 0.5 * eta**2 * float(g0 @ (X.T @ (X @ g0)))
        got = compute_xi(params, spec, X, Y, eta, 5)
        if abs(got - expected) > 1e-10 * max(abs(expected), 1.0):
            raise AssertionError(f"xi {got!r} != closed form {expected!r}")

    def flow_euler():
        n = 5
        root = rng.standard_normal((n, n))
        kernel = root @ root.T
        kernel *= 0.05 / symmetric_eigvals(kernel)[0]
        y = rng.standard_normal(n)
        f0 = rng.standard_normal(n)
        flow = make_kernel_flow(kernel, y, f0)
        h = 1e-4
        f = f0.copy()
        for _ in range(int(round(1.0 / h))):
            f = f - h * (kernel @ (f - y))
        exact = kernel_flow_solution(flow, 1.0)
        err = float(np.max(np.abs(f - exact)))
        if err > 1e-6:
            raise AssertionError(f"Euler mismatch {err:.2e} > 1e-6 at t=1")
        return f"Euler mismatch {err:.2e} at t=1"

    def flow_ode():
        n = 6
        root = rng.standard_normal((n, n))
        kernel = root @ root.T / n
        y = rng.standard_normal(n)
        f0 = rng.standard_normal(n)
        flow = make_kernel_flow(kernel, y, f0)
        t = 0.7
        errs = []
        for h in (1e-3, 5e-4):
            lhs = (kernel_flow_solution(flow, t + h) - kernel_flow_solution(flow, t)) / h
            rhs = -kernel @ (kernel_flow_solution(flow, t) - y)
            errs.append(float(np.linalg.norm(lhs - rhs)))
        ratio = errs[0] / max(errs[1], 1e-300)
        if not 2.0 * 0.7 <= ratio <= 2.0 * 1.3:
            raise AssertionError(f"halving h scaled the ODE defect by {ratio:.2f}, not ~2")
        return f"ODE defect {errs[0]:.2e} -> {errs[1]:.2e} under h halving"

    def flow_modes():
        n = 5
        root = rng.standard_normal((n, n))
        kernel = root @ root.T
        y = rng.standard_normal(n)
        f0 = rng.standard_normal(n)
        flow = make_kernel_flow(kernel, y, f0)
        t = 0.9
        err_t = flow.eigenvectors.T @ (kernel_flow_solution(flow, t) - y)
        err_0 = flow.eigenvectors.T @ (f0 - y)
        expected = np.exp(-flow.eigenvalues * t) * err_0
        rel = np.max(np.abs(err_t - expected)) / max(np.max(np.abs(expected)), 1e-300)
        if rel > 1e-8:
            raise AssertionError(f"mode decay off by {rel:.2e} relative")

    def spearman_brute():
        trials = 100 if fast else 1000
        for _ in range(trials):
            n = int(rng.integers(5, 40))
            a = rng.integers(0, 10, n).astype(float)
            b = rng.integers(0, 10, n).astype(float)
            got = horizon_correlation(a, b)
            ref = _brute_spearman(a, b)
            if abs(got - ref) > 1e-12:
                raise AssertionError(f"spearman {got!r} != brute force {ref!r}")
        return f"matches brute force on {trials} instances"

    def spearman_edges():
        a = np.arange(8.0)
        if abs(horizon_correlation(a, -a) + 1.0) > 1e-12:
            raise AssertionError("anti-monotone pairs should give -1")
        if horizon_correlation(np.ones(6), np.arange(6.0)) != 0.0:
            raise AssertionError("constant scores should give 0")

    def moons_geometry():
        pool = generate_moons(101, 0.0, 4, seed=2)
        dists = moons_arc_distance(pool.features, 4)
        labels = _raw_labels(pool)
        on_arc = dists[np.arange(pool.size), labels]
        if np.max(on_arc) > 1e-12:
            raise AssertionError(f"noiseless point off its arc by {np.max(on_arc):.2e}")
        counts = np.bincount(labels, minlength=4)
        if counts.max() - counts.min() > 1:
            raise AssertionError(f"class counts unbalanced: {counts.tolist()}")

    def crc_determinism_and_duplicates():
        base = generate_moons(60, 0.08, 2, seed=4, binarize=True)
        features = np.concatenate([base.features, base.features])
        labels = np.concatenate([_raw_labels(base), _raw_labels(base)])
        pool = Pool(features, labels, labeled_idx=[0, 65], num_classes=2)
        spec = NetworkSpec(input_dim=2, hidden_widths=(32,), num_classes=2)
        params = init_network(spec, 13)
        first = crc_acquire(pool, params, spec, 6, 2, seed=5)
        again = crc_acquire(pool, params, spec, 6, 2, seed=5)
        if first.selected != again.selected:
            raise AssertionError("repeated call changed the selection")
        chosen = pool.features[list(first.selected)]
        stacked = np.concatenate([pool.labeled_features(), chosen])
        for i in range(stacked.shape[0]):
            for j in range(i + 1, stacked.shape[0]):
                if np.array_equal(stacked[i], stacked[j]):
                    raise AssertionError(
                        f"selection contains a duplicated feature row ({i}, {j})"
                    )
        return "selection deterministic; no duplicate rows on a doubled pool"

    def pi_reduction():
        pool = generate_moons(40, 0.1, 2, seed=6, binarize=True)
        pool = initial_pool(pool, 3, seed=7)
        spec = NetworkSpec(input_dim=2, hidden_widths=(16,), num_classes=2)
        params = init_network(spec, 8)
        cfg = TrainConfig(step_size=0.05, max_steps=20, trace_every=5,
                          consistency_weight=0.0)
        sup, _ = train_supervised(params, spec, pool, cfg)
        pi, _ = train_pi_model(params, spec, pool, cfg, seed=9)
        if np.max(np.abs(sup.values - pi.values)) != 0.0:
            raise AssertionError("w=0 consistency changed the trajectory")

    run("jacobian_vs_finite_difference", jacobian_fd)
    run("last_layer_restriction", jacobian_restriction)
    run("traced_equals_blocked_single_output", traced_blocked_c1)
    run("kernel_psd", gram_psd)
    run("eigen_fixtures_and_residuals", eigen_fixtures)
    run("min_positive_eigenvalue_rules", min_positive_rules)
    run("recursion_residuals", recursion_residuals)
    run("first_order_dynamics_quadratic", first_order)
    run("xi_quadrature_closed_form", xi_closed_form)
    run("kernel_flow_euler_oracle", flow_euler)
    run("kernel_flow_ode_defect", flow_ode)
    run("kernel_flow_mode_decoupling", flow_modes)
    run("spearman_matches_brute_force", spearman_brute)
    run("spearman_edge_cases", spearman_edges)
    run("moons_geometry", moons_geometry)
    run("selection_determinism_and_nondegeneracy", crc_determinism_and_duplicates)
    run("consistency_weight_zero_reduction", pi_reduction)

    if not fast:
        def eta_scaling():
            spec = NetworkSpec(input_dim=8, hidden_widths=(512,), num_classes=1)
            params = init_network(spec, 17)
            X = rng.standard_normal((12, 8))
            labels = (rng.random(12) > 0.5).astype(np.int64)
            pool = Pool(X, labels, labeled_idx=range(12), num_classes=1)
            ratios = {}
            for eta in (0.2, 0.1):
                cfg = TrainConfig(step_size=eta, max_steps=30, trace_every=1)
                _, trace = train_supervised(params, spec, pool, cfg)
                loss = trace.column("loss")
                ratios[eta] = (
                    float(np.mean(trace.column("xi") / loss)),
                    float(np.mean(trace.column("eps") / loss)),
                )
            xi_ratio = ratios[0.2][0] / ratios[0.1][0]
            eps_ratio = ratios[0.2][1] / ratios[0.1][1]
            for name, r in (("xi", xi_ratio), ("eps", eps_ratio)):
                if not 4.0 * 0.8 <= r <= 4.0 * 1.2:
                    raise AssertionError(f"{name} scaled by {r:.2f}, expected 4 +- 20%")
            return f"xi x{xi_ratio:.2f}, eps x{eps_ratio:.2f} under step halving"

        def gradient_band():
            spec = NetworkSpec(input_dim=8, hidden_widths=(256,), num_classes=1)
            params = init_network(spec, 19)
            X = rng.standard_normal((12, 8))
            labels = (rng.random(12) > 0.5).astype(np.int64)
            pool = Pool(X, labels, labeled_idx=range(12), num_classes=1)
            cfg = TrainConfig(step_size=0.1, max_steps=200, trace_every=1)
            _, trace = train_supervised(params, spec, pool, cfg)
            band = trace.column("grad_sq") / np.maximum(trace.column("loss"), 1e-300)
            ratio = float(band.max() / band.min())
            if ratio > 1e3:
                raise AssertionError(f"gradient-scale band ratio {ratio:.1f} > 1e3")
            return f"band [{band.min():.3e}, {band.max():.3e}], ratio {ratio:.1f}"

        def hessian_proxy():
            base = generate_moons(120, 0.1, 2, seed=23, binarize=True)
            pool = initial_pool(base, 2, seed=24)
            spec = NetworkSpec(input_dim=2, hidden_widths=(64,), num_classes=2)
            curvatures = {}
            for w in (0.0, 4.0):
                vals = []
                for s in range(3):
                    params = init_network(spec, 30 + s)
                    cfg = TrainConfig(
                        step_size=0.05, max_steps=400, trace_every=100,
                        consistency_weight=w, perturbation_sigma=0.2,
                    )
                    model, _ = train_pi_model(params, spec, pool, cfg, seed=40 + s)
                    vals.append(
                        curvature_proxy(model, spec, pool.features, 1e-3, 50 + s)
                    )
                curvatures[w] = float(np.median(vals))
            if curvatures[4.0] >= curvatures[0.0]:
                raise AssertionError(
                    f"consistency did not lower curvature: {curvatures}"
                )
            return (
                f"median curvature {curvatures[0.0]:.3e} (w=0) -> "
                f"{curvatures[4.0]:.3e} (w=4)"
            )

        run("xi_eps_quadratic_in_step", eta_scaling)
        run("gradient_scale_band", gradient_band)
        run("consistency_curvature_penalty", hessian_proxy)

    return results
