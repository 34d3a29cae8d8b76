"""Central-difference gradient oracle."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .tensor import Tape, Tensor, backward


class EvaluationError(ValueError):
    """The checked function produced a non-finite value."""


def _eval(f: Callable[[Tensor], Tensor], data: np.ndarray) -> float:
    out = f(Tensor(data))
    val = float(np.asarray(out.data).reshape(-1)[0])
    if not np.isfinite(val):
        raise EvaluationError(f"function value is not finite: {val}")
    return val


def grad_check(
    f: Callable[[Tensor], Tensor],
    point,
    epsilon: float = 1e-5,
    max_components: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Worst relative error between tape gradients and central differences.

    Args:
        f: scalar-valued function of one tensor.
        point: where to evaluate.
        epsilon: half-width of the central difference.
        max_components: if given, check only this many randomly chosen
            coordinates (seeded), for large inputs.
        seed: selects the coordinate subset.

    Returns:
        max over checked coordinates of
        |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    base = np.array(point.data if isinstance(point, Tensor) else point, dtype=np.float64)
    x = Tensor(base.copy(), requires_grad=True)
    with Tape() as tape:
        out = f(x)
    val = float(out.data.reshape(-1)[0])
    if not np.isfinite(val):
        raise EvaluationError(f"function value is not finite: {val}")
    backward(out, tape)
    analytic = np.zeros_like(base) if x.grad is None else x.grad

    flat_idx = np.arange(base.size)
    if max_components is not None and max_components < base.size:
        flat_idx = np.sort(np.random.default_rng(seed).choice(base.size, max_components, replace=False))

    worst = 0.0
    for fi in flat_idx:
        idx = np.unravel_index(fi, base.shape)
        plus = base.copy()
        plus[idx] += epsilon
        minus = base.copy()
        minus[idx] -= epsilon
        numeric = (_eval(f, plus) - _eval(f, minus)) / (2.0 * epsilon)
        a = float(analytic[idx])
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
