"""Dataset generators, CSV import/export, and initial labeling."""

from __future__ import annotations

import csv

import numpy as np

from .errors import DataError
from .pool import Pool, _raw_labels


# Horizontal gap between consecutive arm centers. 1.25 keeps adjacent
# arms interlocked while same-parity arms stay 0.5 apart; at 1.0 the
# upper arcs of a 4-arm chain would touch at their endpoints.
_ARM_SPACING = 1.25


def generate_moons(n, noise_sigma, arms, seed, binarize=False) -> Pool:
    """Interleaved half-circle clusters in 2-D.

    Arm centers sit 1.25 apart on the x axis, centered on the origin.
    Even arm k runs through (cos t + cx_k, sin t), odd arm k through
    (cx_k - cos t, 0.5 - sin t), t uniform on [0, pi], so consecutive
    arms interlock along the x axis. Gaussian noise is added on top.
    Class is the arm index, or arm mod 2 with binarize.
    """
    if arms not in (2, 4):
        raise ValueError(f"arms must be 2 or 4, got {arms}")
    if n < arms:
        raise ValueError(f"need at least {arms} samples, got {n}")
    rng = np.random.default_rng(seed)
    counts = [n // arms + (1 if k < n % arms else 0) for k in range(arms)]
    xs, labels = [], []
    for k, nk in enumerate(counts):
        t = rng.uniform(0.0, np.pi, size=nk)
        cx = _ARM_SPACING * (k - (arms - 1) / 2.0)
        if k % 2 == 0:
            pts = np.column_stack([np.cos(t) + cx, np.sin(t)])
        else:
            pts = np.column_stack([cx - np.cos(t), 0.5 - np.sin(t)])
        xs.append(pts)
        labels.append(np.full(nk, k % 2 if binarize else k, dtype=np.int64))
    X = np.concatenate(xs)
    y = np.concatenate(labels)
    X = X + rng.standard_normal(X.shape) * noise_sigma
    return Pool(X, y, num_classes=2 if binarize else arms)


def moons_arc_distance(X, arms) -> np.ndarray:
    """Distance from each point to its nearest noiseless arc, per arm.

    Returns an (n, arms) matrix; used as a geometric oracle for label
    checks. The arc of arm k is a unit half-circle around (cx_k, 0) for
    even k (upper half) and (cx_k, 0.5) for odd k (lower half), where
    cx_k matches the generate_moons centers.
    """
    X = np.asarray(X, dtype=np.float64)
    out = np.empty((X.shape[0], arms))
    for k in range(arms):
        cx = _ARM_SPACING * (k - (arms - 1) / 2.0)
        if k % 2 == 0:
            center = np.array([cx, 0.0])
            flip = 1.0
        else:
            center = np.array([cx, 0.5])
            flip = -1.0
        rel = (X - center) * np.array([1.0, flip])
        # clamp to the generated half: angles below the axis snap to the
        # nearer endpoint (0 on the right side, pi on the left)
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        ang = np.where(ang >= 0.0, ang, np.where(ang >= -np.pi / 2, 0.0, np.pi))
        nearest = np.column_stack([np.cos(ang), np.sin(ang)])
        out[:, k] = np.linalg.norm(rel - nearest, axis=1)
    return out


def generate_blobs(n, num_classes, centers, sigma, seed) -> Pool:
    """Isotropic Gaussian clusters with balanced class counts."""
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] != num_classes:
        raise ValueError(
            f"centers shape {centers.shape} does not provide {num_classes} rows"
        )
    if n < num_classes:
        raise ValueError(f"need at least {num_classes} samples, got {n}")
    rng = np.random.default_rng(seed)
    counts = [n // num_classes + (1 if c < n % num_classes else 0) for c in range(num_classes)]
    xs, labels = [], []
    for c, nc in enumerate(counts):
        xs.append(centers[c] + sigma * rng.standard_normal((nc, centers.shape[1])))
        labels.append(np.full(nc, c, dtype=np.int64))
    return Pool(np.concatenate(xs), np.concatenate(labels), num_classes=num_classes)


def load_csv_dataset(path, label_column="label") -> Pool:
    """Numeric CSV with header; labels re-indexed 0..C-1 in first-appearance
    order. Errors name the offending row (1-based, header excluded) and
    column."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise DataError(f"{path}: empty file, expected a header row")
            header = [h.strip() for h in header]
            if label_column not in header:
                raise DataError(
                    f"{path}: missing label column {label_column!r}, "
                    f"columns are {header}"
                )
            label_pos = header.index(label_column)
            feature_pos = [i for i in range(len(header)) if i != label_pos]
            rows, raw_labels = [], []
            for r, row in enumerate(reader, start=1):
                if len(row) != len(header):
                    raise DataError(
                        f"{path}: row {r} has {len(row)} cells, expected {len(header)}"
                    )
                parsed = []
                for i in feature_pos + [label_pos]:
                    try:
                        parsed.append(float(row[i]))
                    except ValueError:
                        raise DataError(
                            f"{path}: row {r}, column {header[i]!r}: "
                            f"could not parse {row[i]!r} as a number"
                        ) from None
                rows.append(parsed[:-1])
                raw_labels.append(parsed[-1])
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    classes = {}
    labels = []
    for v in raw_labels:
        if v not in classes:
            classes[v] = len(classes)
        labels.append(classes[v])
    return Pool(np.array(rows), np.array(labels, dtype=np.int64), num_classes=len(classes))


def save_csv_dataset(pool: Pool, path, label_column="label"):
    """Inverse of load_csv_dataset for pools whose labels are already
    0..C-1; feature columns are named x0..x{d-1}."""
    labels = _raw_labels(pool)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(pool.input_dim)] + [label_column])
        for row, lab in zip(pool.features, labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])


def initial_pool(pool: Pool, per_class, seed) -> Pool:
    """Fresh copy of pool with per_class labeled samples drawn uniformly
    per class. Runs before any strategy, so the label reads here go
    through the construction-time path and are not oracle-counted."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    labels = _raw_labels(pool)
    rng = np.random.default_rng(seed)
    picked = []
    for c in range(pool.num_classes):
        mine = np.flatnonzero(labels == c)
        if mine.size < per_class:
            raise ValueError(
                f"class {c} has {mine.size} samples, need {per_class}"
            )
        picked.extend(rng.choice(mine, size=per_class, replace=False).tolist())
    return Pool(pool.features.copy(), labels, labeled_idx=picked, num_classes=pool.num_classes)


def initial_pool_from_indices(pool: Pool, indices) -> Pool:
    """Pivot mode: label an explicit index set (fresh copy)."""
    indices = [int(i) for i in indices]
    if not indices:
        raise ValueError("pivot index list is empty")
    return Pool(
        pool.features.copy(),
        _raw_labels(pool),
        labeled_idx=indices,
        num_classes=pool.num_classes,
    )
