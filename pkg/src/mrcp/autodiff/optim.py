"""Named parameter storage, initialisation, and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .tensor import ContractViolation, Tensor


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


@dataclass
class ParamStore:
    """Ordered map from dotted parameter path to tensor, plus Adam moments."""

    params: dict = field(default_factory=dict)
    state: dict = field(default_factory=dict)

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def items(self):
        return self.params.items()

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def num_values(self) -> int:
        return int(sum(t.size for t in self.params.values()))

    def snapshot(self) -> dict:
        return {k: t.data.copy() for k, t in self.params.items()}

    def load(self, arrays: dict) -> None:
        missing = set(self.params) - set(arrays)
        extra = set(arrays) - set(self.params)
        if missing or extra:
            raise KeyError(f"parameter mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for k, arr in arrays.items():
            if arr.shape != self.params[k].shape:
                raise ValueError(f"parameter {k!r}: shape {arr.shape} != expected {self.params[k].shape}")
            self.params[k].data = np.array(arr, dtype=np.float64)


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int, gain: float = 1.0) -> np.ndarray:
    """Uniform(±sqrt(gain / fan_in)); gain 6 is the Kaiming bound for ReLU stacks."""
    bound = np.sqrt(gain / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def adam_step(
    params: ParamStore,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ParamStore:
    """One bias-corrected Adam update of every parameter; clears gradients."""
    for name, t in params.items():
        if t.grad is None:
            raise ContractViolation(f"parameter {name!r} has no gradient")
    for name, t in params.items():
        g = t.grad
        st = params.state.get(name)
        if st is None:
            st = params.state[name] = AdamState(np.zeros_like(t.data), np.zeros_like(t.data))
        st.step += 1
        st.m = beta1 * st.m + (1.0 - beta1) * g
        st.v = beta2 * st.v + (1.0 - beta2) * g * g
        m_hat = st.m / (1.0 - beta1 ** st.step)
        v_hat = st.v / (1.0 - beta2 ** st.step)
        t.data = t.data - lr * m_hat / (np.sqrt(v_hat) + eps)
        t.grad = None
    return params
