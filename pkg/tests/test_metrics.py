import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rssiloc.metrics import (
    ZONES,
    ConfusionMatrix3,
    accuracy,
    confusion_build,
    error_2d,
    error_3d,
    mean_pointwise_error,
    metrics_from_counts,
    zone_metrics,
)
from rssiloc.pathloss import ProximityZone

from published_data import ENV1_CURRENT_MATRIX, ENV1_METRICS

IMM, NEAR, FAR = ZONES


class TestConfusion:
    def test_perfect(self):
        labels = [IMM] * 40 + [NEAR] * 40 + [FAR] * 40
        cm = confusion_build(labels, labels)
        assert np.trace(cm.counts) == 120
        assert cm.total == 120

    def test_empty(self):
        assert confusion_build([], []).total == 0

    def test_single_pair(self):
        cm = confusion_build([NEAR], [FAR])
        assert cm.counts[1, 2] == 1 and cm.total == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_build([NEAR], [])

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            confusion_build([NEAR], [ProximityZone.UNKNOWN])


@pytest.mark.parametrize("key", sorted(ENV1_METRICS))
def test_published_ratios(key):
    tp, tn, fp, fn, *ratios = ENV1_METRICS[key]
    m = metrics_from_counts(ProximityZone.parse(key[0]), tp, tn, fp, fn)
    got = [m.precision, m.sensitivity, m.specificity, m.fallout, m.fdr, m.fnr]
    for g, want in zip(got, ratios):
        assert g == pytest.approx(want, abs=0.001)


def test_current_matrix_reproduces_table_counts():
    cm = ConfusionMatrix3(ENV1_CURRENT_MATRIX)
    for zone in ZONES:
        m = zone_metrics(cm, zone)
        assert (m.tp, m.tn, m.fp, m.fn) == ENV1_METRICS[(zone.value, "current")][:4]
    assert accuracy(cm) == pytest.approx(79 / 120)


def test_all_diagonal():
    cm = ConfusionMatrix3(np.diag([5, 7, 9]))
    for z in ZONES:
        m = zone_metrics(cm, z)
        assert m.sensitivity == m.specificity == 1
        assert m.fallout == m.fdr == m.fnr == 0


def test_zero_denominator_is_undefined():
    cm = ConfusionMatrix3([[3, 0, 0], [0, 0, 0], [0, 0, 2]])
    m = zone_metrics(cm, NEAR)
    assert m.precision is None and m.sensitivity is None and m.fdr is None
    assert m.specificity == 1.0


def test_accuracy():
    assert accuracy(ConfusionMatrix3(np.eye(3, dtype=int) * 4)) == 1.0
    assert accuracy(ConfusionMatrix3(np.ones((3, 3), dtype=int) - np.eye(3, dtype=int))) == 0.0
    with pytest.raises(ValueError):
        accuracy(ConfusionMatrix3(np.zeros((3, 3), dtype=int)))


matrices = st.lists(st.integers(0, 50), min_size=9, max_size=9).map(lambda v: ConfusionMatrix3(np.array(v).reshape(3, 3)))


@given(matrices)
def test_one_vs_rest_bookkeeping(cm):
    for i, z in enumerate(ZONES):
        m = zone_metrics(cm, z)
        assert m.tp + m.fn == cm.counts[i].sum()
        assert m.tn + m.fp == cm.total - cm.counts[i].sum()
        assert m.tp + m.tn + m.fp + m.fn == cm.total
        for a, b in ((m.fallout, m.specificity), (m.fdr, m.precision), (m.fnr, m.sensitivity)):
            if a is not None:
                assert a == pytest.approx(1 - b, abs=1e-12)
    if cm.total:
        assert accuracy(cm) == pytest.approx(sum(zone_metrics(cm, z).tp for z in ZONES) / cm.total)


class TestLocalizationError:
    def test_zero(self):
        pts = [(2.0, 3.0)] * 5
        assert error_2d(pts, pts) == 0.0

    def test_345(self):
        assert error_2d([(0, 0)], [(3, 4)]) == pytest.approx(5.0)

    def test_mean_estimate_used(self):
        est = [(1, 1.5), (1, 2.5), (0.5, 2), (1.5, 2)] + [(1, 2)] * 6
        assert error_2d([(1, 1)] * 10, est) == pytest.approx(1.0)

    def test_3d_is_sum_of_horizontal_and_vertical(self):
        assert error_3d([(0, 0, 0)], [(3, 4, 2)]) == pytest.approx(7.0)
        assert error_3d([(1, 1, 1)], [(1, 1, 1)]) == 0.0
        assert error_3d([(1, 2, 0.0)] * 3, [(1, 2, 1.5)]) == pytest.approx(1.5)

    def test_empty(self):
        with pytest.raises(ValueError):
            error_2d([], [(0, 0)])
        with pytest.raises(ValueError):
            error_3d([(0, 0, 0)], [])

    def test_pointwise_alternative(self):
        assert mean_pointwise_error([(0, 0), (0, 0)], [(3, 4), (0, 1)]) == pytest.approx(3.0)
        # differs from the averaged-estimate form
        assert error_2d([(0, 0), (0, 0)], [(3, 4), (-3, -4)]) == 0.0

    @given(
        st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=10),
        st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=10),
        st.floats(0, 2 * math.pi),
        st.tuples(st.floats(-50, 50), st.floats(-50, 50)),
    )
    def test_2d_rigid_invariance(self, act, est, theta, shift):
        rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        a2 = np.asarray(act) @ rot.T + shift
        e2 = np.asarray(est) @ rot.T + shift
        assert error_2d(a2, e2) == pytest.approx(error_2d(act, est), abs=1e-9)

    @given(
        st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 3)), min_size=1, max_size=10),
        st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 3)), min_size=1, max_size=10),
        st.floats(0, 2 * math.pi),
        st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(-5, 5)),
    )
    def test_3d_horizontal_rotation_and_translation_invariance(self, act, est, theta, shift):
        rot = np.array([[math.cos(theta), -math.sin(theta), 0], [math.sin(theta), math.cos(theta), 0], [0, 0, 1]])
        a2 = np.asarray(act) @ rot.T + shift
        e2 = np.asarray(est) @ rot.T + shift
        assert error_3d(a2, e2) == pytest.approx(error_3d(act, est), abs=1e-9)
