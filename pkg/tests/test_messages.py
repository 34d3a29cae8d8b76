import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrcp.autodiff import ContractViolation, ParamStore, Tape, Tensor, backward, grad_check
from mrcp.autodiff import functional as F
from mrcp.graph import project_to_rotation
from mrcp.messages import (
    attention_messages,
    attention_score,
    attention_weights,
    decode_continuous_pose,
    encode_continuous_pose,
    film_generate,
    film_message,
    init_attention_head,
    init_film,
    plain_message,
)


def _rotz(deg):
    a = np.radians(deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def _ones_head(store, prefix, c=1, hw=(1, 1)):
    init_attention_head(store, prefix, c, hw, np.random.default_rng(0))
    for k in ("conv0", "conv1", "fc"):
        store[f"{prefix}.{k}.weight"].data[...] = 1.0
        store[f"{prefix}.{k}.bias"].data[...] = 0.0


def _film_store(c=4, seed=0):
    store = ParamStore()
    init_film(store, "film", c, np.random.default_rng(seed))
    return store


def test_continuous_pose_examples():
    np.testing.assert_array_equal(encode_continuous_pose(np.eye(3), np.zeros(3)), [0, 0, 0, 1, 0, 0, 0, 1, 0])
    p = encode_continuous_pose(_rotz(90), [1, 2, 3])
    np.testing.assert_allclose(p, [1, 2, 3, 0, 1, 0, -1, 0, 0], atol=1e-15)


def test_continuous_pose_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        encode_continuous_pose(np.diag([2.0, 1, 1]), np.zeros(3))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_continuous_pose_roundtrip(seed):
    rng = np.random.default_rng(seed)
    r = project_to_rotation(rng.normal(size=(3, 3)))
    t = rng.normal(size=3)
    r2, t2 = decode_continuous_pose(encode_continuous_pose(r, t))
    assert np.max(np.abs(r2 - r)) < 1e-12
    assert np.array_equal(t2, t)


def test_film_zero_weights_give_zero_affine():
    store = _film_store()
    for _, t in store.items():
        t.data[...] = 0.0
    a, b = film_generate(np.arange(9.0), store, "film")
    assert np.all(a.data == 0) and np.all(b.data == 0)


def test_film_identity_affine_is_plain_message():
    store = _film_store()
    for _, t in store.items():
        t.data[...] = 0.0
    store["film.fc1.bias"].data[:4] = 1.0
    a, b = film_generate(np.random.default_rng(1).normal(size=9), store, "film")
    h = np.random.default_rng(2).normal(size=(4, 3, 3))
    assert np.array_equal(film_message(h, a, b).data, plain_message(h).data)


def test_film_message_examples():
    out = film_message(np.ones((3, 2, 2)), np.full(3, 2.0), np.full(3, -1.0)).data
    assert np.array_equal(out, np.ones((3, 2, 2)))
    h = np.random.default_rng(0).normal(size=(3, 2, 2))
    b = np.array([1.0, -2.0, 0.5])
    out = film_message(h, np.zeros(3), b).data
    np.testing.assert_array_equal(out, np.broadcast_to(b[:, None, None], h.shape))


def test_film_gradient_wrt_pose():
    store = _film_store(c=3, seed=4)

    def f(p):
        a, b = film_generate(p, store, "film")
        return F.sum(a * a) + F.sum(b * np.arange(3.0))

    # keep away from ReLU kinks by checking a few random points
    worst = min(grad_check(f, np.random.default_rng(s).normal(size=9)) for s in range(3))
    assert worst < 1e-4


def test_film_init_starts_near_identity():
    a, _ = film_generate(np.zeros(9), _film_store(c=8), "film")
    assert np.all(np.abs(a.data - 1.0) < 0.5)


def test_attention_zero_weights_zero_score():
    store = ParamStore()
    init_attention_head(store, "h", 2, (4, 4), np.random.default_rng(0))
    for _, t in store.items():
        t.data[...] = 0.0
    rng = np.random.default_rng(1)
    s = attention_score(rng.normal(size=(2, 4, 4)), rng.normal(size=(2, 4, 4)), store, "h")
    assert float(s.data) == 0.0


def test_attention_score_examples():
    store = ParamStore()
    _ones_head(store, "h")
    assert float(attention_score(np.ones((1, 1, 1)), np.full((1, 1, 1), 2.0), store, "h", 0.2).data) == 3.0
    s = float(attention_score(np.full((1, 1, 1), -4.0), np.ones((1, 1, 1)), store, "h", 0.2).data)
    assert abs(s + 0.6) < 1e-15


def test_attention_messages_worked_example():
    store = ParamStore()
    _ones_head(store, "h")
    msgs = attention_messages(np.full((1, 1, 1), 2.0), [np.full((1, 1, 1), 1.0), np.full((1, 1, 1), 3.0)],
                              store, ["h"], 0.2)
    np.testing.assert_allclose([float(m.data.reshape(-1)[0]) for m in msgs], [0.11920, 2.64241], atol=1e-4)


def test_attention_identical_neighbors_split_evenly():
    store = ParamStore()
    init_attention_head(store, "h", 2, (4, 4), np.random.default_rng(3))
    rng = np.random.default_rng(4)
    h = rng.normal(size=(2, 4, 4))
    msgs = attention_messages(rng.normal(size=(2, 4, 4)), [h, h], store, ["h"])
    for m in msgs:
        np.testing.assert_allclose(m.data, 0.5 * h, rtol=1e-15)


def test_identical_heads_equal_single_head_bitwise():
    store = ParamStore()
    init_attention_head(store, "h0", 2, (4, 4), np.random.default_rng(5))
    for d in (1, 2, 3):
        for k in ("conv0", "conv1", "fc"):
            for part in ("weight", "bias"):
                store.add(f"h{d}.{k}.{part}", store[f"h0.{k}.{part}"].data.copy())
    rng = np.random.default_rng(6)
    nbrs = [rng.normal(size=(2, 4, 4)) for _ in range(3)]
    dest = rng.normal(size=(2, 4, 4))
    one = attention_messages(dest, nbrs, store, ["h0"])
    four = attention_messages(dest, nbrs, store, ["h0", "h1", "h2", "h3"])
    for a, b in zip(one, four):
        assert np.array_equal(a.data, b.data)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=6))
def test_attention_weights_sum_to_one(scores):
    w = attention_weights(np.array(scores)).data
    assert abs(w.sum() - 1.0) < 1e-12


def test_attention_empty_neighbors_is_contract_violation():
    with pytest.raises(ContractViolation):
        attention_weights(np.zeros(0))
    with pytest.raises(ContractViolation):
        attention_messages(np.zeros((1, 1, 1)), [], ParamStore(), ["h"])


def test_attention_score_is_directional():
    store = ParamStore()
    init_attention_head(store, "h", 2, (4, 4), np.random.default_rng(7))
    rng = np.random.default_rng(8)
    a, b = rng.normal(size=(2, 4, 4)), rng.normal(size=(2, 4, 4))
    assert float(attention_score(a, b, store, "h").data) != float(attention_score(b, a, store, "h").data)


def test_plain_message_passes_gradient_unchanged():
    h = Tensor(np.random.default_rng(9).normal(size=(2, 3, 3)), requires_grad=True)
    assert plain_message(h) is h
    w = np.random.default_rng(10).normal(size=(2, 3, 3))
    with Tape() as tape:
        loss = F.sum(plain_message(h) * w)
    backward(loss, tape)
    np.testing.assert_array_equal(h.grad, w)
