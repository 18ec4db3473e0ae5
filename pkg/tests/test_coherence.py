import numpy as np
import pytest

from hiertax.coherence import (
    check_negative_constraint,
    check_positive_constraint,
    expand_labels,
    propagate,
    propagate_batch,
    propagate_field,
    propagate_grad,
    propagate_winners,
)
from hiertax.fields import IGNORE, LabelField, ScoreField
from hiertax.gradcheck import central_difference, random_hierarchy, relative_error, tie_free_scores
from hiertax.taxonomy import build_hierarchy


def test_expand_labels(tiny):
    lab = expand_labels(tiny, 3)
    assert lab.tolist() == [1, 1, 0, 1, 0]
    assert lab.sum() == len(tiny.ancestors(3))
    single = build_hierarchy(["r"], [-1])
    assert expand_labels(single, 0).tolist() == [1]
    with pytest.raises(ValueError, match="not a leaf"):
        expand_labels(tiny, 1)


def test_check_positive_constraint_example():
    h = build_hierarchy(["root", "A", "B", "a1"], [-1, 0, 0, 1])
    s = np.array([0.2, 0.3, 0.1, 0.9])
    viol = check_positive_constraint(h, s, threshold=0.5)
    assert set(viol) == {(3, 1), (3, 0)}
    assert check_positive_constraint(h, np.full(4, 0.7)) == []
    assert check_negative_constraint(h, np.full(4, 0.3)) == []


def test_check_negative_constraint_example():
    h = build_hierarchy(["root", "A", "B", "a1"], [-1, 0, 0, 1])
    s = np.array([0.9, 0.2, 0.6, 0.7])  # A negative but child a1 scores higher
    viol = check_negative_constraint(h, s, threshold=0.5)
    assert (1, 3) in viol


def test_check_length_mismatch(tiny):
    with pytest.raises(ValueError, match="length"):
        check_positive_constraint(tiny, np.zeros(3))


def test_propagate_worked_example(tiny):
    lab = expand_labels(tiny, 3)
    s = np.array([0.9, 0.5, 0.4, 0.7, 0.6])
    p = propagate(tiny, s, lab)
    assert np.allclose(p, [0.9, 0.5, 0.4, 0.5, 0.6])


def test_propagate_negative_subtree_max():
    # B has a child b1 scoring higher; p_B takes the subtree max
    h = build_hierarchy(["root", "A", "B", "a1", "a2", "b1"], [-1, 0, 0, 1, 1, 2])
    lab = expand_labels(h, 3)
    s = np.array([0.9, 0.5, 0.2, 0.7, 0.6, 0.8])
    p = propagate(h, s, lab)
    assert p[2] == 0.8


def test_propagate_identity_on_coherent(tiny):
    lab = expand_labels(tiny, 3)
    s = np.array([0.9, 0.8, 0.3, 0.7, 0.2])  # already coherent for leaf a1
    assert np.array_equal(propagate(tiny, s, lab), s)


def test_propagate_invalid_labels(tiny):
    with pytest.raises(ValueError, match="expansion"):
        propagate(tiny, np.full(5, 0.5), np.array([1, 0, 0, 1, 0]))
    with pytest.raises(ValueError, match="length"):
        propagate(tiny, np.full(4, 0.5), expand_labels(tiny, 3))


@pytest.mark.parametrize("seed", range(20))
def test_propagate_satisfies_restricted_constraints(seed):
    rng = np.random.default_rng(seed)
    h = random_hierarchy(rng, int(rng.integers(2, 60)))
    leaf = int(rng.choice(h.leaves))
    lab = expand_labels(h, leaf)
    s = rng.uniform(0, 1, len(h))
    p = propagate(h, s, lab)
    pos_viol = [(v, u) for v, u in check_positive_constraint(h, p, 0.0) if lab[v]]
    neg_viol = [(v, u) for v, u in check_negative_constraint(h, p, 1.0) if not lab[v]]
    assert pos_viol == []
    assert neg_viol == []
    # propagating again leaves the positive chain fixed
    p2 = propagate(h, p, lab)
    assert np.array_equal(p2[lab == 1], p[lab == 1])
    # output never leaves the envelope of s
    assert p.min() >= s.min() and p.max() <= s.max()


def test_propagate_grad_matches_finite_differences(tiny):
    rng = np.random.default_rng(7)
    lab = expand_labels(tiny, 3)
    s = tie_free_scores(rng, len(tiny))
    upstream = rng.normal(size=len(tiny))

    def f(s):
        return float(propagate(tiny, s, lab) @ upstream)

    analytic = propagate_grad(tiny, s, lab, upstream)
    numeric = central_difference(f, s, 1e-5)
    assert relative_error(analytic, numeric) < 1e-4


def test_propagate_grad_tie_goes_to_smallest_id(tiny):
    lab = expand_labels(tiny, 3)
    s = np.array([0.5, 0.5, 0.2, 0.5, 0.1])  # three-way tie on the positive chain
    winners = propagate_winners(tiny, s, lab)
    assert winners[3] == 0 and winners[1] == 0 and winners[0] == 0
    grad = propagate_grad(tiny, s, lab, np.ones(5))
    assert grad[0] == 3.0  # all positive-chain mass routed to the root


def test_propagate_grad_monotone_chain_routes_one_source(tiny):
    lab = expand_labels(tiny, 3)
    s = np.array([0.9, 0.6, 0.3, 0.4, 0.2])  # strictly decreasing chain, distinct subtrees
    winners = propagate_winners(tiny, s, lab)
    assert winners.tolist() == [0, 1, 2, 3, 4]  # every output sourced from itself
    upstream = np.arange(1.0, 6.0)
    grad = propagate_grad(tiny, s, lab, upstream)
    assert np.array_equal(grad, upstream)


def test_propagate_batch_matches_scalar(tiny):
    rng = np.random.default_rng(3)
    leaves = rng.choice(tiny.leaves, size=16)
    s = rng.uniform(0, 1, size=(16, len(tiny)))
    batch = propagate_batch(tiny, s, leaves.astype(np.int64))
    for i in range(16):
        expected = propagate(tiny, s[i], expand_labels(tiny, int(leaves[i])))
        assert np.array_equal(batch[i], expected)


def test_propagate_field_ignores_sentinel(tiny):
    rng = np.random.default_rng(5)
    scores = ScoreField(rng.uniform(0, 1, size=(2, 2, len(tiny))))
    leaf = np.array([[3, IGNORE], [4, 3]], dtype=np.uint32)
    out = propagate_field(tiny, scores, LabelField(leaf))
    assert np.array_equal(out.scores[0, 1], scores.scores[0, 1])  # untouched
    expected = propagate(tiny, scores.scores[1, 0], expand_labels(tiny, 4))
    assert np.array_equal(out.scores[1, 0], expected)
