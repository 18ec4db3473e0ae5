"""Hierarchy-coherent decoding and per-level segmentation metrics.

Decoding assigns each pixel the root-to-leaf path with the highest score
sum, computed in a single bottom-up pass; ties resolve to the smallest
leaf id. Evaluation merges predictions into each hierarchy level and
reports per-class IoU plus the level mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import IGNORE, LabelField, ScoreField
from .taxonomy import ClassHierarchy


@dataclass
class LevelScore:
    level: int
    iou: dict[int, float]  # class id -> IoU, classes with empty union omitted
    miou: float


def _bottom_up_order(h: ClassHierarchy) -> list[int]:
    # Children before parents: sort by decreasing depth (chain length).
    return sorted(range(len(h)), key=lambda v: -len(h.ancestor_chain(v)))


def decode_batch(h: ClassHierarchy, s: np.ndarray) -> np.ndarray:
    """Vectorized best-path decode for N score vectors; returns leaf ids.

    Per node the best suffix sum and its leaf are kept; equal sums keep the
    smaller leaf id. Accumulation runs leaf-to-root so float results match
    per-path sequential summation exactly.
    """
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    best_sum = np.empty((len(h), n))
    best_leaf = np.empty((len(h), n), dtype=np.int64)
    for v in _bottom_up_order(h):
        kids = h.children[v]
        if not kids:
            best_sum[v] = s[:, v]
            best_leaf[v] = v
            continue
        cur_sum = np.full(n, -np.inf)
        cur_leaf = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        for c in kids:
            take = (best_sum[c] > cur_sum) | (
                (best_sum[c] == cur_sum) & (best_leaf[c] < cur_leaf)
            )
            cur_sum = np.where(take, best_sum[c], cur_sum)
            cur_leaf = np.where(take, best_leaf[c], cur_leaf)
        best_sum[v] = cur_sum + s[:, v]
        best_leaf[v] = cur_leaf
    return best_leaf[h.root]


def decode_path(h: ClassHierarchy, s: np.ndarray) -> int:
    """Leaf id of the top-scoring root-to-leaf path for one score vector."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (len(h),):
        raise ValueError(f"expected score vector of length {len(h)}, got {s.shape}")
    return int(decode_batch(h, s[None, :])[0])


def decode_field(h: ClassHierarchy, scores: ScoreField) -> LabelField:
    """Per-pixel best-path decode over a whole score field."""
    scores.check_hierarchy(h)
    flat = scores.scores.reshape(-1, len(h))
    leaves = decode_batch(h, flat).astype(np.uint32)
    return LabelField(leaf=leaves.reshape(scores.height, scores.width))


def level_ancestor_map(h: ClassHierarchy, level: int) -> np.ndarray:
    """For each node, its merge target at the given level.

    The target is the node's highest ancestor whose level does not exceed
    the requested one; in balanced trees this is the exact level-``level``
    ancestor, and nodes on short branches keep their own identity.
    """
    if not 1 <= level <= h.height + 1:
        raise ValueError(f"level {level} out of range [1, {h.height + 1}]")
    out = np.empty(len(h), dtype=np.int64)
    for v in range(len(h)):
        target = v
        for u in h.ancestor_chain(v):
            if h.level[u] <= level:
                target = u
            else:
                break
        out[v] = target
    return out


def merge_to_level(h: ClassHierarchy, labels: LabelField, level: int) -> LabelField:
    """Relabel each pixel to its ancestor at the given hierarchy level."""
    labels.check_hierarchy(h)
    mapping = level_ancestor_map(h, level)
    flat = labels.leaf.reshape(-1)
    out = flat.copy()
    valid = flat != IGNORE
    out[valid] = mapping[flat[valid].astype(np.int64)].astype(np.uint32)
    return LabelField(leaf=out.reshape(labels.leaf.shape))


def level_class_set(h: ClassHierarchy, level: int) -> list[int]:
    """Distinct merge targets reachable from the leaves at a level."""
    mapping = level_ancestor_map(h, level)
    return sorted({int(mapping[leaf]) for leaf in h.leaves})


def miou(pred: LabelField, gt: LabelField, class_set, level: int = 1) -> LevelScore:
    """Per-class IoU and the mean over classes present on either side.

    Pixels with an ignored ground truth are excluded entirely; classes
    with an empty union are dropped from the mean.
    """
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ValueError("prediction and ground truth dimensions differ")
    pv = pred.leaf.reshape(-1)
    gv = gt.leaf.reshape(-1)
    valid = gv != IGNORE
    pv, gv = pv[valid], gv[valid]
    iou: dict[int, float] = {}
    for c in class_set:
        in_pred = pv == c
        in_gt = gv == c
        union = int(np.count_nonzero(in_pred | in_gt))
        if union == 0:
            continue
        inter = int(np.count_nonzero(in_pred & in_gt))
        iou[int(c)] = inter / union
    if not iou:
        raise ValueError("no class from the set occurs in prediction or ground truth")
    return LevelScore(level=level, iou=iou, miou=float(np.mean(list(iou.values()))))


def evaluate_all_levels(
    h: ClassHierarchy, scores: ScoreField, gt: LabelField
) -> list[LevelScore]:
    """Decode, then merge and score every hierarchy level from leaves to root."""
    pred = decode_field(h, scores)
    return evaluate_prediction_levels(h, pred, gt)


def evaluate_prediction_levels(
    h: ClassHierarchy, pred: LabelField, gt: LabelField
) -> list[LevelScore]:
    out = []
    for level in range(1, h.height + 2):
        merged_pred = merge_to_level(h, pred, level)
        merged_gt = merge_to_level(h, gt, level)
        out.append(miou(merged_pred, merged_gt, level_class_set(h, level), level=level))
    return out
