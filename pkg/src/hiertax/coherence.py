"""Hierarchy coherence: label expansion, constraint checks, score propagation.

Propagation replaces each positive node's score by the minimum over its
ancestors and each negative node's score by the maximum over its
descendants, which guarantees the resulting vector satisfies both
hierarchy constraints restricted by the label expansion. Self-sets include
the node itself.
"""

from __future__ import annotations

import numpy as np

from .fields import IGNORE, LabelField, ScoreField
from .taxonomy import ClassHierarchy


def expand_labels(h: ClassHierarchy, leaf: int) -> np.ndarray:
    """Binary vector over V: 1 on the leaf's ancestor chain, 0 elsewhere."""
    if not h.is_leaf(leaf):
        raise ValueError(f"node {leaf} is not a leaf")
    out = np.zeros(len(h), dtype=np.int8)
    out[list(h.ancestors(leaf))] = 1
    return out


def _check_lengths(h: ClassHierarchy, *vecs: np.ndarray) -> None:
    for v in vecs:
        if v.shape != (len(h),):
            raise ValueError(f"expected vector of length {len(h)}, got shape {v.shape}")


def check_positive_constraint(
    h: ClassHierarchy, s: np.ndarray, threshold: float = 0.5
) -> list[tuple[int, int]]:
    """Pairs (v, ancestor u) where v scores above threshold but above u.

    An empty list means every thresholded positive has all its ancestors
    scored at least as high.
    """
    s = np.asarray(s, dtype=np.float64)
    _check_lengths(h, s)
    violations = []
    for v in range(len(h)):
        if s[v] <= threshold:
            continue
        for u in sorted(h.ancestors(v)):
            if u != v and s[v] > s[u]:
                violations.append((v, u))
    return violations


def check_negative_constraint(
    h: ClassHierarchy, s: np.ndarray, threshold: float = 0.5
) -> list[tuple[int, int]]:
    """Pairs (v, descendant u) where v scores at or below threshold but below u."""
    s = np.asarray(s, dtype=np.float64)
    _check_lengths(h, s)
    violations = []
    for v in range(len(h)):
        if s[v] > threshold:
            continue
        for u in sorted(h.descendants(v)):
            if u != v and s[u] > s[v]:
                violations.append((v, u))
    return violations


def _validate_expansion(h: ClassHierarchy, labels: np.ndarray) -> None:
    positives = np.flatnonzero(labels)
    if positives.size == 0:
        raise ValueError("label vector has no positive nodes")
    # The positive set of a valid expansion is exactly one leaf's chain.
    deepest = max(positives, key=lambda v: len(h.ancestors(v)))
    if set(positives) != set(h.ancestors(int(deepest))) or not h.is_leaf(int(deepest)):
        raise ValueError("label vector is not the expansion of a single leaf")


def propagate(h: ClassHierarchy, s: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Hierarchy-coherent score vector: min over ancestors on positives,
    max over descendants on negatives."""
    s = np.asarray(s, dtype=np.float64)
    labels = np.asarray(labels)
    _check_lengths(h, s, labels)
    _validate_expansion(h, labels)
    p = np.empty_like(s)
    for v in range(len(h)):
        if labels[v]:
            p[v] = min(s[u] for u in h.ancestors(v))
        else:
            p[v] = max(s[u] for u in h.descendants(v))
    return p


def propagate_winners(h: ClassHierarchy, s: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """For each node, the source node id whose score the propagation copied.

    Ties resolve to the smallest node id, so the backward pass routes all
    gradient mass to a single deterministic source per output.
    """
    s = np.asarray(s, dtype=np.float64)
    labels = np.asarray(labels)
    _check_lengths(h, s, labels)
    winners = np.empty(len(h), dtype=np.int64)
    for v in range(len(h)):
        group = sorted(h.ancestors(v)) if labels[v] else sorted(h.descendants(v))
        vals = s[group]
        best = np.argmin(vals) if labels[v] else np.argmax(vals)
        winners[v] = group[int(best)]
    return winners


def propagate_grad(
    h: ClassHierarchy, s: np.ndarray, labels: np.ndarray, upstream: np.ndarray
) -> np.ndarray:
    """Backward pass of propagate: route each upstream component to its
    arg-min/arg-max source entry of s."""
    upstream = np.asarray(upstream, dtype=np.float64)
    _check_lengths(h, np.asarray(s), upstream)
    _validate_expansion(h, np.asarray(labels))
    winners = propagate_winners(h, s, labels)
    grad = np.zeros(len(h), dtype=np.float64)
    np.add.at(grad, winners, upstream)
    return grad


def propagate_field(h: ClassHierarchy, scores: ScoreField, labels: LabelField) -> ScoreField:
    """Per-pixel propagate over a whole field; ignored pixels pass through."""
    scores.check_hierarchy(h)
    labels.check_hierarchy(h)
    if (scores.height, scores.width) != (labels.height, labels.width):
        raise ValueError("score and label fields have mismatched dimensions")
    flat_s = scores.scores.reshape(-1, len(h))
    flat_l = labels.leaf.reshape(-1)
    out = flat_s.copy()
    valid = flat_l != IGNORE
    if valid.any():
        out[valid] = propagate_batch(h, flat_s[valid], flat_l[valid].astype(np.int64))
    return ScoreField(scores=out.reshape(scores.scores.shape))


def _group_lists(h: ClassHierarchy) -> tuple[list[np.ndarray], list[np.ndarray]]:
    anc = [np.array(sorted(h.ancestors(v)), dtype=np.int64) for v in range(len(h))]
    dec = [np.array(sorted(h.descendants(v)), dtype=np.int64) for v in range(len(h))]
    return anc, dec


def propagate_batch(h: ClassHierarchy, s: np.ndarray, leaf_ids: np.ndarray) -> np.ndarray:
    """Vectorized propagate for N score vectors with per-row leaf labels."""
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    anc, dec = _group_lists(h)
    chain = np.zeros((len(h), len(h)), dtype=bool)  # chain[leaf, v] = positive
    for leaf in h.leaves:
        chain[leaf, list(h.ancestors(leaf))] = True
    pos = chain[leaf_ids]  # (N, |V|)
    p = np.empty_like(s)
    for v in range(len(h)):
        mins = s[:, anc[v]].min(axis=1)
        maxs = s[:, dec[v]].max(axis=1)
        p[:, v] = np.where(pos[:, v], mins, maxs)
    return p


def propagate_batch_winners(
    h: ClassHierarchy, s: np.ndarray, leaf_ids: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized propagate returning (p, winners, positive-mask).

    Winner ties resolve to the smallest node id (groups are scanned in
    ascending id order and argmin/argmax take the first occurrence).
    """
    s = np.asarray(s, dtype=np.float64)
    anc, dec = _group_lists(h)
    chain = np.zeros((len(h), len(h)), dtype=bool)
    for leaf in h.leaves:
        chain[leaf, list(h.ancestors(leaf))] = True
    pos = chain[leaf_ids]
    p = np.empty_like(s)
    winners = np.empty(s.shape, dtype=np.int64)
    for v in range(len(h)):
        sub_a = s[:, anc[v]]
        sub_d = s[:, dec[v]]
        w_min = anc[v][sub_a.argmin(axis=1)]
        w_max = dec[v][sub_d.argmax(axis=1)]
        p[:, v] = np.where(pos[:, v], sub_a.min(axis=1), sub_d.max(axis=1))
        winners[:, v] = np.where(pos[:, v], w_min, w_max)
    return p, winners, pos
