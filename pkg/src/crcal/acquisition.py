"""Batch acquisition strategies over a partially labeled pool.

The kernel-spectrum strategy scores candidate groups by the smallest
positive eigenvalue of the empirical kernel over labeled + group.
Groups whose bordered kernel carries a numerically zero mode (the
signature of duplicated or linearly dependent rows) are demoted below
every clean group, and the final selection vetoes any group that would
introduce a zero mode into the running union. For clean groups the
demotion is a no-op: their smallest positive eigenvalue is the plain
smallest eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigen import symmetric_eigvals
from .nets import forward_batch, jacobian_layer_blocks, softmax
from .ntk import DEFAULT_POSITIVITY_THRESHOLD, gram_values
from .pool import Pool

_EGL_CHUNK = 256


@dataclass
class GroupScore:
    group_index: int
    members: tuple
    score: float | None
    degenerate: bool
    selected: bool = False

    def as_dict(self):
        return {
            "group_index": int(self.group_index),
            "members": [int(i) for i in self.members],
            "score": None if self.score is None else float(self.score),
            "degenerate": bool(self.degenerate),
            "selected": bool(self.selected),
        }


@dataclass
class AcquisitionResult:
    strategy: str
    selected: tuple
    group_scores: list = field(default_factory=list)
    seed: int | None = None

    def as_dict(self):
        return {
            "strategy": self.strategy,
            "seed": None if self.seed is None else int(self.seed),
            "selected": [int(i) for i in self.selected],
            "group_scores": [g.as_dict() for g in self.group_scores],
        }


def _echo_seed(seed):
    """Plain integer seeds are recorded on the result; derived seed
    streams have no single integer form and are recorded as None."""
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return None


def _spectrum_flags(sub, threshold):
    """(smallest positive eigenvalue or None, has numerically zero mode)."""
    evals = symmetric_eigvals(sub)
    cut = threshold * evals[0]
    positive = evals[evals > cut]
    score = float(positive[-1]) if positive.size else None
    return score, bool((evals <= cut).any())


def _block_rows(positions, block_dim):
    positions = np.asarray(positions, dtype=np.int64)
    if block_dim == 1:
        return positions
    return (positions[:, None] * block_dim + np.arange(block_dim)[None, :]).reshape(-1)


def _rank_key(gs: GroupScore):
    score = gs.score if gs.score is not None else -np.inf
    return (1 if gs.degenerate else 0, -score, gs.group_index)


def crc_acquire(
    pool: Pool,
    params,
    spec,
    num_queries: int,
    group_size: int,
    seed,
    scope: str = "last_layer",
    positivity_threshold: float = DEFAULT_POSITIVITY_THRESHOLD,
    reduction: str = "traced",
) -> AcquisitionResult:
    """Select num_queries unlabeled samples by bordered-kernel spectra.

    A random permutation of the unlabeled set is cut into disjoint
    groups of group_size (remainder dropped). Each group's score is the
    smallest positive eigenvalue of the kernel over labeled + group.
    The top num_queries/group_size groups are taken in rank order,
    skipping any group that would put a zero mode into the kernel over
    labeled + already selected + group; skipped groups fill remaining
    slots by rank only when too few clean groups exist.
    """
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    if num_queries < 1:
        raise ValueError("num_queries must be >= 1")
    if num_queries % group_size:
        raise ValueError(
            f"group_size {group_size} must divide num_queries {num_queries}"
        )
    unlabeled = pool.unlabeled_idx
    num_groups = unlabeled.size // group_size
    needed = num_queries // group_size
    if num_groups < needed:
        raise ValueError(
            f"need {needed} groups of size {group_size} but only "
            f"{unlabeled.size} unlabeled samples remain"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(unlabeled)
    members = perm[: num_groups * group_size]
    groups = members.reshape(num_groups, group_size)

    labeled = pool.labeled_idx
    all_idx = np.concatenate([labeled, members])
    kernel = gram_values(
        params, spec, pool.features[all_idx], scope=scope, reduction=reduction
    )
    block_dim = spec.num_classes if reduction == "blocked" else 1
    pos_of = {int(s): p for p, s in enumerate(all_idx)}
    labeled_pos = [pos_of[int(s)] for s in labeled]

    scores = []
    for g in range(num_groups):
        pos = labeled_pos + [pos_of[int(s)] for s in groups[g]]
        rows = _block_rows(pos, block_dim)
        score, degenerate = _spectrum_flags(
            kernel[np.ix_(rows, rows)], positivity_threshold
        )
        scores.append(
            GroupScore(g, tuple(int(i) for i in groups[g]), score, degenerate)
        )

    ranked = sorted(scores, key=_rank_key)
    chosen, skipped = [], []
    union_pos = list(labeled_pos)
    for gs in ranked:
        if len(chosen) == needed:
            break
        pos = union_pos + [pos_of[i] for i in gs.members]
        rows = _block_rows(pos, block_dim)
        _, union_degenerate = _spectrum_flags(
            kernel[np.ix_(rows, rows)], positivity_threshold
        )
        if union_degenerate:
            skipped.append(gs)
            continue
        chosen.append(gs)
        union_pos = pos
    for gs in skipped:
        if len(chosen) == needed:
            break
        chosen.append(gs)
    for gs in chosen:
        gs.selected = True

    selected = tuple(i for gs in chosen for i in gs.members)
    return AcquisitionResult("crc", selected, scores, seed=_echo_seed(seed))


def crc_acquire_balanced(
    pool: Pool,
    params,
    spec,
    per_class: int,
    seed,
    scope: str = "last_layer",
    positivity_threshold: float = DEFAULT_POSITIVITY_THRESHOLD,
    reduction: str = "traced",
) -> AcquisitionResult:
    """Class-balanced variant: one group holding per_class samples of
    every class, chosen among stratified random candidates by the same
    bordered-kernel score. Reads unlabeled labels through the counted
    oracle, so pool.oracle_reads grows.
    """
    if per_class < 0:
        raise ValueError("per_class must be >= 0")
    if per_class == 0:
        return AcquisitionResult("crc_balanced", (), [], seed=_echo_seed(seed))
    unlabeled = pool.unlabeled_idx
    labels = pool.hidden_labels(unlabeled)
    rng = np.random.default_rng(seed)
    slates = []
    for c in range(pool.num_classes):
        mine = unlabeled[labels == c]
        if mine.size < per_class:
            raise ValueError(
                f"class {c} has {mine.size} unlabeled samples, need {per_class}"
            )
        slates.append(rng.permutation(mine))
    num_candidates = min(s.size // per_class for s in slates)
    groups = [
        np.concatenate([s[j * per_class : (j + 1) * per_class] for s in slates])
        for j in range(num_candidates)
    ]

    labeled = pool.labeled_idx
    all_idx = np.concatenate([labeled, unlabeled])
    kernel = gram_values(
        params, spec, pool.features[all_idx], scope=scope, reduction=reduction
    )
    block_dim = spec.num_classes if reduction == "blocked" else 1
    pos_of = {int(s): p for p, s in enumerate(all_idx)}
    labeled_pos = [pos_of[int(s)] for s in labeled]

    scores = []
    for g, group in enumerate(groups):
        pos = labeled_pos + [pos_of[int(s)] for s in group]
        rows = _block_rows(pos, block_dim)
        score, degenerate = _spectrum_flags(
            kernel[np.ix_(rows, rows)], positivity_threshold
        )
        scores.append(GroupScore(g, tuple(int(i) for i in group), score, degenerate))

    best = min(scores, key=_rank_key)
    best.selected = True
    return AcquisitionResult("crc_balanced", best.members, scores, seed=_echo_seed(seed))


def random_acquire(pool: Pool, num_queries: int, seed) -> AcquisitionResult:
    """Uniform sample without replacement from the unlabeled set."""
    if num_queries > pool.unlabeled_idx.size:
        raise ValueError(
            f"cannot pick {num_queries} from {pool.unlabeled_idx.size} unlabeled"
        )
    rng = np.random.default_rng(seed)
    picked = rng.choice(pool.unlabeled_idx, size=num_queries, replace=False)
    return AcquisitionResult("random", tuple(int(i) for i in picked), [], seed=_echo_seed(seed))


def _top_by(pool, order_scores, num_queries, descending):
    """Indices of the num_queries best unlabeled samples; ties go to the
    lower pool index (unlabeled_idx is ascending, stable sort keeps it)."""
    key = -order_scores if descending else order_scores
    order = np.argsort(key, kind="stable")
    return tuple(int(i) for i in pool.unlabeled_idx[order[:num_queries]])


def entropy_acquire(pool: Pool, params, spec, num_queries: int) -> AcquisitionResult:
    """Highest softmax predictive entropy first."""
    if num_queries > pool.unlabeled_idx.size:
        raise ValueError(
            f"cannot pick {num_queries} from {pool.unlabeled_idx.size} unlabeled"
        )
    probs = softmax(forward_batch(params, spec, pool.features[pool.unlabeled_idx]))
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    entropy = -plogp.sum(axis=1)
    return AcquisitionResult(
        "entropy", _top_by(pool, entropy, num_queries, descending=True), []
    )


def confidence_acquire(pool: Pool, params, spec, num_queries: int) -> AcquisitionResult:
    """Lowest maximum softmax probability first."""
    if num_queries > pool.unlabeled_idx.size:
        raise ValueError(
            f"cannot pick {num_queries} from {pool.unlabeled_idx.size} unlabeled"
        )
    probs = softmax(forward_batch(params, spec, pool.features[pool.unlabeled_idx]))
    confidence = probs.max(axis=1)
    return AcquisitionResult(
        "confidence", _top_by(pool, confidence, num_queries, descending=False), []
    )


def egl_acquire(
    pool: Pool, params, spec, num_queries: int, scope: str = "full"
) -> AcquisitionResult:
    """Expected gradient length: sum_y p_y (p - e_y)^T Kxx (p - e_y) with
    Kxx the per-sample output kernel J(x) J(x)^T."""
    if num_queries > pool.unlabeled_idx.size:
        raise ValueError(
            f"cannot pick {num_queries} from {pool.unlabeled_idx.size} unlabeled"
        )
    X = pool.features[pool.unlabeled_idx]
    n, C = X.shape[0], spec.num_classes
    probs = softmax(forward_batch(params, spec, X))
    kxx = np.zeros((n, C, C))
    for start in range(0, n, _EGL_CHUNK):
        stop = min(start + _EGL_CHUNK, n)
        for _, block in jacobian_layer_blocks(params, spec, X[start:stop], scope):
            kxx[start:stop] += np.einsum("ncp,ndp->ncd", block, block)
    diffs = probs[:, None, :] - np.eye(C)[None, :, :]
    quad = np.einsum("nyc,ncd,nyd->ny", diffs, kxx, diffs)
    grad_len = np.einsum("ny,ny->n", probs, quad)
    return AcquisitionResult(
        "egl", _top_by(pool, grad_len, num_queries, descending=True), []
    )
