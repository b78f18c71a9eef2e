import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcsc.errors import ArgumentError
from gcsc.metrics import evaluate, kappa, matched_confusion, nmi, overall_accuracy

from oracles import brute_force_accuracy


def test_permuted_prediction_is_perfect():
    truth = np.array([1, 1, 2, 2, 3, 3])
    pred = np.array([7, 7, 0, 0, 4, 4])
    assert overall_accuracy(pred, truth)[0] == 1.0
    assert nmi(pred, truth) == pytest.approx(1.0)
    assert kappa(pred, truth) == pytest.approx(1.0)


def test_constant_prediction_on_balanced_two_classes():
    truth = np.array([1, 1, 2, 2])
    assert overall_accuracy(np.zeros(4, dtype=int), truth)[0] == 0.5


@pytest.mark.parametrize("seed", range(5))
def test_hungarian_equals_factorial_brute_force(seed):
    r = np.random.default_rng(seed)
    truth = r.integers(1, 7, 30)
    pred = r.integers(0, 6, 30)
    assert overall_accuracy(pred, truth)[0] == pytest.approx(brute_force_accuracy(pred, truth), abs=0)


def test_nmi_independent_split_is_zero():
    truth = np.array([1, 1, 2, 2])
    pred = np.array([0, 1, 0, 1])
    assert nmi(pred, truth) == 0.0


def test_nmi_hand_computed_two_by_two():
    # contingency [[2, 1], [1, 2]], N = 6
    truth = np.array([1, 1, 1, 2, 2, 2])
    pred = np.array([0, 0, 1, 0, 1, 1])
    mi = 2 * (2 / 6) * math.log((2 / 6) / (1 / 4)) + 2 * (1 / 6) * math.log((1 / 6) / (1 / 4))
    expected = mi / math.log(2)
    assert nmi(pred, truth) == pytest.approx(expected, abs=1e-12)


def test_kappa_chance_level_is_zero():
    truth = np.repeat([1, 1, 2, 2], 25)
    pred = np.tile(np.repeat([0, 1], 25), 2)
    _, conf = matched_confusion(pred, truth, overall_accuracy(pred, truth)[1])
    np.testing.assert_array_equal(conf, [[25, 25], [25, 25]])
    assert kappa(pred, truth) == pytest.approx(0.0, abs=1e-12)


def test_kappa_hand_computed():
    # matched confusion [[3, 1], [2, 4]]:
    # p_o = 0.7, p_e = (4*5 + 6*5)/100 = 0.5, kappa = 0.4
    truth = np.array([1] * 4 + [2] * 6)
    pred = np.array([0, 0, 0, 1, 0, 0, 1, 1, 1, 1])
    oa, matching = overall_accuracy(pred, truth)
    assert oa == pytest.approx(0.7)
    assert kappa(pred, truth, matching) == pytest.approx(0.4, abs=1e-12)


def test_kappa_degenerate_chance():
    assert kappa(np.zeros(5, dtype=int), np.ones(5, dtype=int)) == 0.0


def test_report_invariants(rng):
    truth = rng.integers(1, 5, 50)
    pred = rng.integers(0, 4, 50)
    rep = evaluate(pred, truth)
    assert rep.confusion.sum() == 50
    _, conf = matched_confusion(pred, truth, rep.matching)
    assert rep.oa == np.trace(conf) / 50
    d = rep.to_dict()
    assert set(d) >= {"oa", "nmi", "kappa", "confusion", "matching", "runtime_seconds"}


def test_majority_and_constant_bounds():
    truth = np.array([1] * 6 + [2] * 3 + [3] * 3)
    assert overall_accuracy(np.zeros(12, dtype=int), truth)[0] >= 6 / 12
    bal = np.repeat([1, 2, 3], 4)
    assert overall_accuracy(np.zeros(12, dtype=int), bal)[0] >= 1 / 3


def test_input_errors():
    with pytest.raises(ArgumentError):
        overall_accuracy(np.array([1, 2]), np.array([1]))
    with pytest.raises(ArgumentError):
        nmi(np.array([]), np.array([]))


labelings = st.lists(st.integers(0, 5), min_size=2, max_size=40)


@settings(max_examples=80, deadline=None)
@given(labelings, st.randoms(use_true_random=False))
def test_permutation_invariance_and_symmetry(pred_list, rnd):
    pred = np.array(pred_list)
    truth = np.array([rnd.randint(1, 4) for _ in pred_list])
    ids = list(range(6))
    rnd.shuffle(ids)
    relabeled = np.array([ids[p] + 10 for p in pred])
    assert overall_accuracy(relabeled, truth)[0] == overall_accuracy(pred, truth)[0]
    assert nmi(relabeled, truth) == pytest.approx(nmi(pred, truth), abs=1e-12)
    assert kappa(relabeled, truth) == pytest.approx(kappa(pred, truth), abs=1e-12)
    assert nmi(pred, truth) == pytest.approx(nmi(truth, pred), abs=1e-12)
