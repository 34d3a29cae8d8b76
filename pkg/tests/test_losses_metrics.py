import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mrcp.autodiff import ContractViolation, DimensionError, Tape, Tensor, backward, grad_check
from mrcp.losses import LossConfig, depth_loss, edge_aware_smoothness, seg_loss, smooth_l1, total_loss
from mrcp.metrics import ConfusionAccumulator, DepthAccumulator, MetricError, depth_metrics, miou
from oracles import depth_metrics_direct, miou_counting, smoothness_direct


def val(t):
    return float(np.asarray(t.data).reshape(-1)[0])


def test_smooth_l1_examples():
    t = np.full((3, 3), 4.0)
    assert val(smooth_l1(t, t)) == 0.0
    assert val(smooth_l1(t + 2.0, t, 1.0)) == 1.5
    assert val(smooth_l1(t + 0.5, t, 1.0)) == 0.125


def test_smooth_l1_continuous_at_beta():
    beta, eps = 0.7, 1e-6
    below = val(smooth_l1(np.array([beta - eps]), np.zeros(1), beta))
    above = val(smooth_l1(np.array([beta + eps]), np.zeros(1), beta))
    assert abs(above - below) < 3 * eps

    def slope(d):
        x = Tensor(np.array([d]), requires_grad=True)
        with Tape() as tape:
            loss = smooth_l1(x, np.zeros(1), beta)
        backward(loss, tape)
        return x.grad[0]

    assert abs(slope(beta - eps) - slope(beta + eps)) < 3 * eps / beta


def test_smoothness_examples():
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(3, 5, 5))
    assert val(edge_aware_smoothness(np.full((5, 5), 3.0), img)) == 0.0
    ramp = np.tile(np.arange(5.0), (5, 1))
    assert val(edge_aware_smoothness(ramp, np.full((3, 5, 5), 0.2))) == 1.0


def test_smoothness_matches_direct_formula():
    rng = np.random.default_rng(1)
    for _ in range(10):
        pred, img = rng.normal(size=(4, 4)), rng.uniform(size=(3, 4, 4))
        assert abs(val(edge_aware_smoothness(pred, img)) - smoothness_direct(pred, img)) < 1e-12


def test_depth_loss_examples():
    rng = np.random.default_rng(2)
    img, pred, tgt = rng.uniform(size=(3, 4, 4)), rng.uniform(1, 5, size=(4, 4)), rng.uniform(1, 5, size=(4, 4))
    assert val(depth_loss(img, pred, tgt, LossConfig(alpha_smooth=0.0))) == val(smooth_l1(pred, tgt))
    c = np.full((4, 4), 2.0)
    assert val(depth_loss(img, c, c)) == 0.0


def test_depth_loss_gradient():
    rng = np.random.default_rng(3)
    img, tgt = rng.uniform(size=(3, 4, 4)), rng.uniform(1, 5, size=(4, 4))
    pt = tgt + rng.choice([-1, 1], size=(4, 4)) * rng.uniform(0.2, 2.0, size=(4, 4))
    assert grad_check(lambda p: depth_loss(img, p, tgt, LossConfig(alpha_smooth=0.1)), pt) < 1e-4


def test_seg_loss_examples():
    for k in (2, 4, 7):
        assert abs(val(seg_loss(np.zeros((k, 3, 3)), np.zeros((3, 3), int))) - np.log(k)) < 1e-12
    logits = np.zeros((3, 1, 1))
    logits[1] = 20.0
    assert val(seg_loss(logits, np.ones((1, 1), int))) < 1e-8
    two = np.array([0.0, 1.0]).reshape(2, 1, 1)
    assert abs(val(seg_loss(two, np.zeros((1, 1), int))) - 1.31326) < 1e-5


def test_seg_loss_rejects_bad_target():
    with pytest.raises(ValueError):
        seg_loss(np.zeros((2, 2, 2)), np.full((2, 2), 2))
    with pytest.raises(DimensionError):
        seg_loss(np.zeros((2, 2, 2)), np.zeros((3, 2), int))


def test_seg_loss_gradient():
    rng = np.random.default_rng(4)
    tgt = rng.integers(0, 3, size=(2, 3))
    assert grad_check(lambda x: seg_loss(x, tgt), rng.normal(size=(3, 2, 3))) < 1e-6


def test_total_loss_examples():
    assert val(total_loss([Tensor(2.5)] * 4)) == 2.5
    assert val(total_loss([Tensor(0.0), Tensor(2.0)])) == 1.0
    parts = [Tensor(np.array(v), requires_grad=True) for v in (1.0, 4.0, -2.0)]
    with Tape() as tape:
        loss = total_loss(parts)
    backward(loss, tape)
    assert [float(p.grad) for p in parts] == [1 / 3] * 3
    with pytest.raises(ContractViolation):
        total_loss([])


def test_depth_metrics_examples():
    t = np.full((4, 4), 3.0)
    assert depth_metrics(t, t) == (0.0, 0.0, 0.0)
    np.testing.assert_allclose(depth_metrics(2 * t, t), (1.0, 3.0, 3.0), rtol=1e-15)


def test_depth_metrics_match_direct_formulas():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p, t = rng.uniform(0.5, 20, size=(4, 4)), rng.uniform(0.5, 20, size=(4, 4))
        np.testing.assert_allclose(depth_metrics(p, t), depth_metrics_direct(p, t), rtol=0, atol=1e-12)


def test_depth_metrics_mask_far_pixels():
    t = np.array([[2.0, 40.0]])
    p = np.array([[2.0, 10.0]])
    assert depth_metrics(p, t, max_depth=40.0) == (0.0, 0.0, 0.0)
    with pytest.raises(MetricError):
        depth_metrics(p[:, 1:], t[:, 1:], max_depth=40.0)


def test_depth_accumulator_pools_pixels():
    rng = np.random.default_rng(6)
    p, t = rng.uniform(1, 5, size=(2, 4, 4)), rng.uniform(1, 5, size=(2, 4, 4))
    acc = DepthAccumulator()
    acc.update(p[0], t[0])
    acc.update(p[1], t[1])
    np.testing.assert_allclose(acc.result(), depth_metrics(p, t), rtol=1e-14)


def test_miou_examples():
    assert miou(np.array([0, 1, 2]), np.array([0, 1, 2]), 3) == 1.0
    assert abs(miou(np.array([0, 1, 1, 0]), np.array([0, 1, 0, 0]), 2) - 7 / 12) < 1e-15
    assert miou(np.zeros(4, int), np.ones(4, int), 2) == 0.0


def test_miou_matches_counting_oracle():
    rng = np.random.default_rng(7)
    for _ in range(100):
        k = int(rng.integers(2, 5))
        p, t = rng.integers(0, k, size=(4, 4)), rng.integers(0, k, size=(4, 4))
        assert abs(miou(p, t, k) - miou_counting(p, t, k)) < 1e-12


def test_miou_rejects_out_of_range():
    with pytest.raises(MetricError):
        miou(np.array([0, 3]), np.array([0, 1]), 2)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.int64, (3, 4), elements=st.integers(0, 3)),
       hnp.arrays(np.int64, (3, 4), elements=st.integers(0, 3)))
def test_miou_bounded_and_symmetric(p, t):
    m = miou(p, t, 4)
    assert 0.0 <= m <= 1.0
    assert m == miou(t, p, 4)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, (3, 3), elements=st.floats(0.1, 50)),
       hnp.arrays(np.float64, (3, 3), elements=st.floats(0.1, 50)))
def test_depth_metrics_nonnegative(p, t):
    a, s, r = depth_metrics(p, t)
    assert a >= 0 and s >= 0 and r >= 0


def test_confusion_accumulator_streaming_equals_batch():
    rng = np.random.default_rng(8)
    p, t = rng.integers(0, 3, size=(5, 6)), rng.integers(0, 3, size=(5, 6))
    acc = ConfusionAccumulator(3)
    for i in range(5):
        acc.update(p[i], t[i])
    assert acc.miou() == miou(p, t, 3)
