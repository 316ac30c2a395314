"""Experiment orchestration: config parsing, the acquisition loop,
run records, reports, grids, and checkpoints.

Seeding contract: every stochastic ingredient of a run draws from its
own stream derived from (master seed, purpose key) so that strategies
share identical data, initial pools, and network initializations.
Streams: data=0, test=1, initial pool=2, per-round net init=(3, round),
transfer-reseed net init=(4, round), acquisition=(5, round),
consistency noise=(6, round).
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .acquisition import (
    confidence_acquire,
    crc_acquire,
    crc_acquire_balanced,
    egl_acquire,
    entropy_acquire,
    random_acquire,
)
from .data import (
    generate_blobs,
    generate_moons,
    initial_pool,
    initial_pool_from_indices,
    load_csv_dataset,
)
from .errors import ConfigError, DataError, RunError
from .nets import NetworkSpec, ParamVector, forward_batch, init_network, softmax
from .ntk import empirical_ntk, min_positive_eigenvalue
from .pool import _raw_labels
from .training import (
    TrainConfig,
    epochs_to_convergence,
    evaluate_model,
    train_mean_teacher,
    train_pi_model,
    train_supervised,
)

RECORD_SCHEMA_VERSION = 1
CONFIG_SCHEMA_VERSION = 1

_DATASETS = ("moons", "blobs", "csv")
_STRATEGIES = ("crc", "crc_balanced", "random", "entropy", "confidence", "egl")
_SCOPES = ("full", "last_layer")


@dataclass
class ExperimentConfig:
    dataset: str
    data_n: int = 1000
    data_noise: float = 0.1
    data_arms: int = 4
    data_binarize: bool = False
    data_centers: tuple | None = None
    data_sigma: float = 0.5
    data_csv_path: str | None = None
    data_test_csv_path: str | None = None
    data_label_column: str = "label"
    net_hidden: tuple = (128,)
    net_activation: str = "relu"
    net_init_scale: float = 1.0
    net_ntk_param: bool = True
    net_bias: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    strategy: str = "random"
    num_queries: int = 4
    group_size: int | None = None
    per_class: int = 1
    scope: str | None = None
    initial_per_class: int = 1
    initial_labeled: tuple | None = None
    num_acquisitions: int = 0
    seeds: tuple = (0,)
    transfer_reseed: bool = False
    output_dir: str | None = None

    def canonical_items(self):
        """Normalized (key, value-string) pairs; excludes output_dir so
        the hash identifies the experiment, not where it is written."""
        items = []
        for key, value in vars(self).items():
            if key == "output_dir":
                continue
            if key == "train":
                for tk, tv in vars(value).items():
                    items.append((f"train.{tk}", _canon(tv)))
            else:
                items.append((key, _canon(value)))
        return sorted(items)


def _canon(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ";".join(_canon(v) for v in value)
    return str(value)


def config_hash(cfg: ExperimentConfig) -> str:
    text = "\n".join(f"{k}={v}" for k, v in cfg.canonical_items())
    return hashlib.sha256(text.encode()).hexdigest()


def _parse_bool(key, raw):
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ConfigError(f"{key}: expected true or false, got {raw!r}")


def _parse_int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_int_list(key, raw):
    if raw == "":
        return ()
    return tuple(_parse_int(key, part.strip()) for part in raw.split(","))


def _parse_centers(key, raw):
    centers = []
    for part in raw.split(";"):
        coords = [p.strip() for p in part.split(",")]
        if len(coords) < 1:
            raise ConfigError(f"{key}: empty center in {raw!r}")
        centers.append(tuple(_parse_float(key, c) for c in coords))
    dims = {len(c) for c in centers}
    if len(dims) != 1:
        raise ConfigError(f"{key}: centers have mixed dimensionality")
    return tuple(centers)


def parse_config(text: str) -> ExperimentConfig:
    """Flat key=value lines; # starts a comment; keys are single-valued."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    if "schema_version" not in raw:
        raise ConfigError("missing required key schema_version")
    if _parse_int("schema_version", raw.pop("schema_version")) != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {CONFIG_SCHEMA_VERSION}")
    if "dataset" not in raw:
        raise ConfigError("missing required key dataset")

    known = {
        "dataset": ("dataset", str),
        "data_n": ("data_n", _parse_int),
        "data_noise": ("data_noise", _parse_float),
        "data_arms": ("data_arms", _parse_int),
        "data_binarize": ("data_binarize", _parse_bool),
        "data_centers": ("data_centers", _parse_centers),
        "data_sigma": ("data_sigma", _parse_float),
        "data_csv_path": ("data_csv_path", str),
        "data_test_csv_path": ("data_test_csv_path", str),
        "data_label_column": ("data_label_column", str),
        "net_hidden": ("net_hidden", _parse_int_list),
        "net_activation": ("net_activation", str),
        "net_init_scale": ("net_init_scale", _parse_float),
        "net_ntk_param": ("net_ntk_param", _parse_bool),
        "net_bias": ("net_bias", _parse_bool),
        "strategy": ("strategy", str),
        "strategy_q": ("num_queries", _parse_int),
        "strategy_g": ("group_size", _parse_int),
        "strategy_r": ("per_class", _parse_int),
        "strategy_scope": ("scope", str),
        "initial_per_class": ("initial_per_class", _parse_int),
        "initial_labeled": ("initial_labeled", _parse_int_list),
        "num_acquisitions": ("num_acquisitions", _parse_int),
        "seeds": ("seeds", _parse_int_list),
        "transfer_reseed": ("transfer_reseed", _parse_bool),
        "output_dir": ("output_dir", str),
    }
    train_keys = {
        "train_step_size": ("step_size", _parse_float),
        "train_max_steps": ("max_steps", _parse_int),
        "train_patience": ("early_stop_patience", _parse_int),
        "train_ssl": ("ssl_mode", str),
        "train_consistency": ("consistency_weight", _parse_float),
        "train_sigma": ("perturbation_sigma", _parse_float),
        "train_ema": ("ema_decay", _parse_float),
        "train_trace_every": ("trace_every", _parse_int),
        "train_quadrature": ("quadrature_points", _parse_int),
    }

    fields = {}
    train_fields = {}
    for key, value in raw.items():
        if key in known:
            name, parse = known[key]
            fields[name] = value if parse is str else parse(key, value)
        elif key in train_keys:
            name, parse = train_keys[key]
            if key == "train_patience" and value == "":
                train_fields[name] = None
            else:
                train_fields[name] = value if parse is str else parse(key, value)
        else:
            raise ConfigError(f"unknown key {key!r}")

    try:
        fields["train"] = TrainConfig(**train_fields)
        cfg = ExperimentConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: ExperimentConfig):
    if cfg.dataset not in _DATASETS:
        raise ConfigError(f"dataset must be one of {_DATASETS}, got {cfg.dataset!r}")
    if cfg.dataset == "blobs" and cfg.data_centers is None:
        raise ConfigError("blobs dataset needs data_centers")
    if cfg.dataset == "csv" and not cfg.data_csv_path:
        raise ConfigError("csv dataset needs data_csv_path")
    if cfg.strategy not in _STRATEGIES:
        raise ConfigError(f"strategy must be one of {_STRATEGIES}, got {cfg.strategy!r}")
    if cfg.scope is not None and cfg.scope not in _SCOPES:
        raise ConfigError(f"strategy_scope must be one of {_SCOPES}, got {cfg.scope!r}")
    if cfg.num_queries < 1:
        raise ConfigError("strategy_q must be >= 1")
    group = cfg.group_size if cfg.group_size is not None else cfg.num_queries
    if cfg.strategy == "crc" and cfg.num_queries % group:
        raise ConfigError(
            f"strategy_g {group} must divide strategy_q {cfg.num_queries}"
        )
    if cfg.strategy == "crc_balanced" and cfg.per_class < 1:
        raise ConfigError("strategy_r must be >= 1 for crc_balanced")
    if cfg.initial_per_class < 1:
        raise ConfigError("initial_per_class must be >= 1")
    if cfg.num_acquisitions < 0:
        raise ConfigError("num_acquisitions must be >= 0")
    if not cfg.seeds:
        raise ConfigError("seeds must name at least one seed")
    if cfg.initial_labeled is not None and len(cfg.initial_labeled) == 0:
        raise ConfigError("initial_labeled, when given, must not be empty")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    return parse_config(text)


@dataclass
class RunRecord:
    schema_version: int
    config_hash: str
    seed: int
    strategy: str
    rounds: list

    def as_dict(self):
        return {
            "schema_version": self.schema_version,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "strategy": self.strategy,
            "rounds": [dict(r) for r in self.rounds],
        }

    def comparable_dict(self):
        """as_dict without wall-clock fields, for reproducibility checks."""
        d = self.as_dict()
        for r in d["rounds"]:
            r.pop("train_seconds", None)
            r.pop("acquire_seconds", None)
        return d

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise DataError(f"{path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        try:
            return cls(
                schema_version=d["schema_version"],
                config_hash=d["config_hash"],
                seed=d["seed"],
                strategy=d["strategy"],
                rounds=d["rounds"],
            )
        except KeyError as exc:
            raise DataError(f"{path}: missing record field {exc}") from None


def _stream(seed, *key):
    return np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))


def _build_pools(cfg: ExperimentConfig, seed):
    if cfg.dataset == "moons":
        train = generate_moons(
            cfg.data_n, cfg.data_noise, cfg.data_arms, _stream(seed, 0),
            binarize=cfg.data_binarize,
        )
        test = generate_moons(
            cfg.data_n, cfg.data_noise, cfg.data_arms, _stream(seed, 1),
            binarize=cfg.data_binarize,
        )
        return train, (test.features, _raw_labels(test))
    if cfg.dataset == "blobs":
        centers = np.asarray(cfg.data_centers, dtype=np.float64)
        train = generate_blobs(
            cfg.data_n, centers.shape[0], centers, cfg.data_sigma, _stream(seed, 0)
        )
        test = generate_blobs(
            cfg.data_n, centers.shape[0], centers, cfg.data_sigma, _stream(seed, 1)
        )
        return train, (test.features, _raw_labels(test))
    train = load_csv_dataset(cfg.data_csv_path, cfg.data_label_column)
    test_data = None
    if cfg.data_test_csv_path:
        test = load_csv_dataset(cfg.data_test_csv_path, cfg.data_label_column)
        test_data = (test.features, _raw_labels(test))
    return train, test_data


def _acquire(cfg: ExperimentConfig, pool, params, spec, seed):
    group = cfg.group_size if cfg.group_size is not None else cfg.num_queries
    if cfg.strategy == "crc":
        scope = cfg.scope if cfg.scope is not None else "last_layer"
        return crc_acquire(
            pool, params, spec, cfg.num_queries, group, seed, scope=scope
        )
    if cfg.strategy == "crc_balanced":
        scope = cfg.scope if cfg.scope is not None else "last_layer"
        return crc_acquire_balanced(
            pool, params, spec, cfg.per_class, seed, scope=scope
        )
    if cfg.strategy == "random":
        return random_acquire(pool, cfg.num_queries, seed)
    if cfg.strategy == "entropy":
        return entropy_acquire(pool, params, spec, cfg.num_queries)
    if cfg.strategy == "confidence":
        return confidence_acquire(pool, params, spec, cfg.num_queries)
    scope = cfg.scope if cfg.scope is not None else "full"
    return egl_acquire(pool, params, spec, cfg.num_queries, scope=scope)


def _train_round(cfg: ExperimentConfig, params0, spec, pool, test_data, seed, r):
    mode = cfg.train.ssl_mode
    if mode == "none":
        model, trace = train_supervised(params0, spec, pool, cfg.train, test_data)
    elif mode == "pi_model":
        model, trace = train_pi_model(
            params0, spec, pool, cfg.train, test_data, seed=_stream(seed, 6, r)
        )
    else:
        _student, model, trace = train_mean_teacher(
            params0, spec, pool, cfg.train, test_data, seed=_stream(seed, 6, r)
        )
    return model, trace


def run_assl(cfg: ExperimentConfig, seed) -> RunRecord:
    """One acquisition-loop run: train, record, acquire, repeat.

    Rounds 0..num_acquisitions each retrain from scratch; every round
    except the last ends with an acquisition of new labels. Persists
    the record (JSON) and per-round traces (CSV) under output_dir when
    one is configured.
    """
    seed = int(seed)
    try:
        base_pool, test_data = _build_pools(cfg, seed)
        if cfg.initial_labeled is not None:
            pool = initial_pool_from_indices(base_pool, cfg.initial_labeled)
        else:
            pool = initial_pool(base_pool, cfg.initial_per_class, _stream(seed, 2))
    except (ConfigError, DataError):
        raise
    except Exception as exc:
        raise RunError(str(exc), phase="data") from exc

    try:
        spec = NetworkSpec(
            input_dim=pool.input_dim,
            hidden_widths=cfg.net_hidden,
            num_classes=pool.num_classes,
            activation=cfg.net_activation,
            init_scale=cfg.net_init_scale,
            ntk_parameterization=cfg.net_ntk_param,
            use_bias=cfg.net_bias,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    rounds = []
    traces = []
    for r in range(cfg.num_acquisitions + 1):
        t0 = time.perf_counter()
        try:
            stream = 4 if cfg.transfer_reseed else 3
            params0 = init_network(spec, _stream(seed, stream, r))
            model, trace = _train_round(cfg, params0, spec, pool, test_data, seed, r)
        except Exception as exc:
            raise RunError(str(exc), phase="train", round_index=r) from exc
        train_seconds = time.perf_counter() - t0
        traces.append(trace)

        test_accuracy = test_loss = epochs = None
        if test_data is not None:
            acc, loss = evaluate_model(model, spec, test_data[0], test_data[1])
            test_accuracy, test_loss = float(acc), float(loss)
            if len(trace):
                epochs = int(epochs_to_convergence(trace))

        selected, group_scores = [], []
        reads_delta = 0
        acquire_seconds = 0.0
        if r < cfg.num_acquisitions:
            t1 = time.perf_counter()
            before = pool.oracle_reads
            try:
                result = _acquire(cfg, pool, model, spec, _stream(seed, 5, r))
                pool.acquire(np.asarray(result.selected, dtype=np.int64))
            except Exception as exc:
                raise RunError(str(exc), phase="acquisition", round_index=r) from exc
            reads_delta = pool.oracle_reads - before
            acquire_seconds = time.perf_counter() - t1
            selected = [int(i) for i in result.selected]
            group_scores = [g.as_dict() for g in result.group_scores]

        try:
            gram = empirical_ntk(
                model, spec, pool.labeled_features(), scope="full", reduction="traced"
            )
            lam_plus = min_positive_eigenvalue(gram)
        except Exception as exc:
            raise RunError(str(exc), phase="spectrum", round_index=r) from exc

        rounds.append(
            {
                "round": r,
                "labeled_size": int(pool.labeled_idx.size) - len(selected),
                "test_accuracy": test_accuracy,
                "test_loss": test_loss,
                "epochs_to_convergence": epochs,
                "lambda_min_plus": None if lam_plus is None else float(lam_plus),
                "selected": selected,
                "group_scores": group_scores,
                "oracle_reads": int(reads_delta),
                "train_seconds": train_seconds,
                "acquire_seconds": acquire_seconds,
            }
        )

    sizes = [r["labeled_size"] for r in rounds]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise RunError(f"labeled sizes not strictly increasing: {sizes}", phase="record")

    record = RunRecord(RECORD_SCHEMA_VERSION, config_hash(cfg), seed, cfg.strategy, rounds)
    if cfg.output_dir:
        os.makedirs(cfg.output_dir, exist_ok=True)
        stem = f"{cfg.strategy}_seed{seed}"
        record.to_json(os.path.join(cfg.output_dir, f"record_{stem}.json"))
        for r, trace in enumerate(traces):
            trace.to_csv(os.path.join(cfg.output_dir, f"trace_{stem}_round{r}.csv"))
    return record


def run_experiment(cfg: ExperimentConfig) -> list:
    """run_assl over every seed in the config."""
    return [run_assl(cfg, s) for s in cfg.seeds]


def decision_boundary_grid(params: ParamVector, spec: NetworkSpec, bounds, resolution):
    """(resolution^2, 4) rows of (x, y, predicted class, max softmax),
    row-major: y varies across rows, x within a row."""
    if spec.input_dim != 2:
        raise ValueError("decision boundary grids need a 2-D input space")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    xmin, xmax, ymin, ymax = (float(b) for b in bounds)
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    xx, yy = np.meshgrid(xs, ys)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    out = forward_batch(params, spec, pts)
    if spec.num_classes == 1:
        cls = (out[:, 0] >= 0.5).astype(np.float64)
        conf = np.ones(pts.shape[0])
    else:
        probs = softmax(out)
        cls = np.argmax(probs, axis=1).astype(np.float64)
        conf = probs.max(axis=1)
    return np.column_stack([pts, cls, conf])


def boundary_to_csv(grid, path):
    with open(path, "w") as fh:
        fh.write("x,y,predicted_class,max_softmax\n")
        for x, y, c, p in grid:
            fh.write(f"{float(x)!r},{float(y)!r},{int(c)},{float(p)!r}\n")


def emit_report(records) -> list:
    """Rows of (strategy, labeled_size, mean/std/min/max accuracy, n),
    population std, grouped over records, sorted by strategy then size."""
    if not records:
        raise ValueError("no records to report on")
    groups = {}
    for rec in records:
        for rd in rec.rounds:
            if rd["test_accuracy"] is None:
                continue
            groups.setdefault((rec.strategy, rd["labeled_size"]), []).append(
                rd["test_accuracy"]
            )
    rows = []
    for (strategy, size), accs in sorted(groups.items()):
        arr = np.asarray(accs)
        rows.append(
            {
                "strategy": strategy,
                "labeled_size": int(size),
                "mean_accuracy": float(arr.mean()),
                "std_accuracy": float(arr.std(ddof=0)),
                "min_accuracy": float(arr.min()),
                "max_accuracy": float(arr.max()),
                "num_runs": int(arr.size),
            }
        )
    return rows


def report_to_csv(rows, path):
    cols = (
        "strategy",
        "labeled_size",
        "mean_accuracy",
        "std_accuracy",
        "min_accuracy",
        "max_accuracy",
        "num_runs",
    )
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    repr(row[c]) if isinstance(row[c], float) else str(row[c])
                    for c in cols
                )
                + "\n"
            )


def load_records(directory) -> list:
    """Every record_*.json under directory, sorted by filename."""
    try:
        names = sorted(os.listdir(directory))
    except OSError as exc:
        raise DataError(f"{directory}: {exc.strerror or exc}") from None
    records = []
    for name in names:
        if name.startswith("record_") and name.endswith(".json"):
            records.append(RunRecord.from_json(os.path.join(directory, name)))
    if not records:
        raise DataError(f"{directory}: no record_*.json files")
    return records


def save_checkpoint(path, params: ParamVector, spec: NetworkSpec):
    meta = {
        "input_dim": spec.input_dim,
        "hidden_widths": list(spec.hidden_widths),
        "num_classes": spec.num_classes,
        "activation": spec.activation,
        "init_scale": spec.init_scale,
        "ntk_parameterization": spec.ntk_parameterization,
        "use_bias": spec.use_bias,
    }
    np.savez(path, values=params.values, spec=np.array(json.dumps(meta)))


def load_checkpoint(path):
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["spec"].item()))
            values = np.array(z["values"], dtype=np.float64)
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"{path}: not a readable checkpoint ({exc})") from None
    spec = NetworkSpec(
        input_dim=int(meta["input_dim"]),
        hidden_widths=tuple(int(w) for w in meta["hidden_widths"]),
        num_classes=int(meta["num_classes"]),
        activation=meta["activation"],
        init_scale=float(meta["init_scale"]),
        ntk_parameterization=bool(meta["ntk_parameterization"]),
        use_bias=bool(meta["use_bias"]),
    )
    return ParamVector(values, spec.layer_offsets), spec
