"""Message construction between robots: plain, pose-conditioned FiLM, and cross attention.

A message ``m_ij`` flows from robot i to robot j. FiLM messages are
conditioned on the pose of j expressed in i's frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import ContractViolation, DimensionError, ParamStore, Tensor, uniform_init
from .autodiff import functional as F
from .autodiff.tensor import as_tensor
from .graph import is_rotation

FILM_HIDDEN = 64


@dataclass
class Message:
    m: Tensor
    src: int
    dst: int
    level: int = 0


def encode_continuous_pose(rotation, translation) -> np.ndarray:
    """9-vector ``[t, first column of R, second column of R]``."""
    r = np.asarray(rotation, dtype=np.float64)
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    if not is_rotation(r):
        raise ValueError("relative rotation is not orthonormal")
    return np.concatenate([t, r[:, 0], r[:, 1]])


def decode_continuous_pose(p) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`encode_continuous_pose`; the third column is ``c1 × c2``."""
    p = np.asarray(p, dtype=np.float64)
    c1, c2 = p[3:6], p[6:9]
    return np.column_stack([c1, c2, np.cross(c1, c2)]), p[:3]


# ---------------------------------------------------------------------------
# FiLM
# ---------------------------------------------------------------------------

def init_film(store: ParamStore, prefix: str, channels: int, rng: np.random.Generator,
              hidden: int = FILM_HIDDEN) -> None:
    store.add(f"{prefix}.fc0.weight", uniform_init(rng, (hidden, 9), 9))
    store.add(f"{prefix}.fc0.bias", uniform_init(rng, (hidden,), 9))
    store.add(f"{prefix}.fc1.weight", uniform_init(rng, (2 * channels, hidden), hidden))
    bias = uniform_init(rng, (2 * channels,), hidden)
    # scale half starts near 1 so an untrained message is close to the plain one
    bias[:channels] += 1.0
    store.add(f"{prefix}.fc1.bias", bias)


def film_generate(p, params: ParamStore, prefix: str) -> tuple[Tensor, Tensor]:
    """Map continuous relative pose(s) (9,) or (E, 9) to per-channel scale and shift."""
    p = as_tensor(p)
    w0, w1 = params[f"{prefix}.fc0.weight"], params[f"{prefix}.fc1.weight"]
    if p.shape[-1] != w0.shape[1]:
        raise DimensionError(f"film_generate: pose {p.shape} vs first layer {w0.shape}")
    hidden = F.relu(F.linear(p, w0, params[f"{prefix}.fc0.bias"]))
    out = F.linear(hidden, w1, params[f"{prefix}.fc1.bias"])
    c = out.shape[-1] // 2
    return out[..., :c], out[..., c:]


def film_message(h, scale, shift) -> Tensor:
    """Channel k of the message is ``scale[k] * h[k] + shift[k]`` everywhere."""
    h = as_tensor(h)
    if as_tensor(scale).shape[-1] != h.shape[-3]:
        raise DimensionError(f"film_message: {as_tensor(scale).shape[-1]} scales for {h.shape[-3]} channels")
    return F.film(h, scale, shift)


def plain_message(h) -> Tensor:
    return as_tensor(h)


# ---------------------------------------------------------------------------
# cross attention
# ---------------------------------------------------------------------------

def _reduced(n: int) -> int:
    return (n + 1) // 2


def init_attention_head(store: ParamStore, prefix: str, channels: int, feat_hw: tuple[int, int],
                        rng: np.random.Generator) -> None:
    """Transform module: two stride-2 3×3 convolutions (2C -> C -> C), flatten, one dense row."""
    c = channels
    store.add(f"{prefix}.conv0.weight", uniform_init(rng, (c, 2 * c, 3, 3), 2 * c * 9))
    store.add(f"{prefix}.conv0.bias", uniform_init(rng, (c,), 2 * c * 9))
    store.add(f"{prefix}.conv1.weight", uniform_init(rng, (c, c, 3, 3), c * 9))
    store.add(f"{prefix}.conv1.bias", uniform_init(rng, (c,), c * 9))
    flat = c * _reduced(_reduced(feat_hw[0])) * _reduced(_reduced(feat_hw[1]))
    store.add(f"{prefix}.fc.weight", uniform_init(rng, (1, flat), flat))
    store.add(f"{prefix}.fc.bias", uniform_init(rng, (1,), flat))


def edge_attention_scores(h_src, h_dst, params: ParamStore, prefix: str, slope: float = F.LEAKY_SLOPE) -> Tensor:
    """Scores LeakyReLU(F[h_src ∥ h_dst]) for a batch of edges: (E, C, h, w) pairs -> (E,)."""
    h_src, h_dst = as_tensor(h_src), as_tensor(h_dst)
    if h_src.shape != h_dst.shape:
        raise DimensionError(f"attention: feature shapes differ {h_src.shape} vs {h_dst.shape}")
    x = F.concat([h_src, h_dst], axis=1)
    x = F.conv2d(x, params[f"{prefix}.conv0.weight"], params[f"{prefix}.conv0.bias"], stride=2, padding=1)
    x = F.conv2d(x, params[f"{prefix}.conv1.weight"], params[f"{prefix}.conv1.bias"], stride=2, padding=1)
    x = F.reshape(x, (x.shape[0], -1))
    w = params[f"{prefix}.fc.weight"]
    if x.shape[1] != w.shape[1]:
        raise DimensionError(f"attention: flattened size {x.shape[1]} vs dense row {w.shape}")
    return F.leaky_relu(F.linear(x, w, params[f"{prefix}.fc.bias"])[:, 0], slope)


def attention_score(h_i, h_j, params: ParamStore, prefix: str, slope: float = F.LEAKY_SLOPE) -> Tensor:
    """Score of sender ``h_i`` as seen by receiver ``h_j``; not symmetric in (i, j)."""
    h_i, h_j = as_tensor(h_i), as_tensor(h_j)
    if h_i.shape != h_j.shape:
        raise DimensionError(f"attention: feature shapes differ {h_i.shape} vs {h_j.shape}")
    s = edge_attention_scores(F.reshape(h_i, (1,) + h_i.shape), F.reshape(h_j, (1,) + h_j.shape),
                              params, prefix, slope)
    return s[0]


def attention_weights(scores) -> Tensor:
    """Softmax of the incoming-edge scores of one destination."""
    scores = as_tensor(scores)
    if scores.shape[0] == 0:
        raise ContractViolation("attention over an empty neighbor set")
    return F.softmax(scores, axis=0)


def head_mean(values: Sequence) -> Tensor:
    """Average over heads as ``v0 + sum_d (v_d - v0) / D``.

    Mathematically the plain mean, but exact when all heads agree, so D
    copies of one head reproduce the single-head result bit for bit.
    """
    first = as_tensor(values[0])
    if len(values) == 1:
        return first
    deltas = F.stack([as_tensor(v) - first for v in values[1:]], axis=0)
    return first + deltas.sum(axis=0) * (1.0 / len(values))


def attention_messages(dest, neighbor_features: Sequence, params: ParamStore, head_prefixes: Sequence[str],
                       slope: float = F.LEAKY_SLOPE) -> list:
    """Messages from each neighbor to ``dest``, averaged over attention heads.

    Per head d the neighbor weights are a softmax over the incoming scores;
    neighbor i sends ``mean_d(w_i^d) * h_i``.
    """
    if len(neighbor_features) == 0:
        raise ContractViolation("attention_messages needs at least one neighbor")
    if len(head_prefixes) == 0:
        raise ContractViolation("attention needs at least one head")
    dest = as_tensor(dest)
    src = F.stack(list(neighbor_features), axis=0)
    dst = F.stack([dest] * len(neighbor_features), axis=0)
    per_head = [attention_weights(edge_attention_scores(src, dst, params, p, slope)) for p in head_prefixes]
    weights = head_mean(per_head)
    msgs = F.scale_rows(weights, src)
    return [msgs[k] for k in range(len(neighbor_features))]
