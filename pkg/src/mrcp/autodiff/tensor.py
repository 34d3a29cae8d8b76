"""Tensor carrier and the operation tape used for reverse-mode differentiation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

DTYPE = np.float64

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class ContractViolation(ValueError):
    """Raised when an operation is called outside its preconditions."""


@dataclass
class _Node:
    op: str
    parents: tuple
    out: "Tensor"
    backward: BackwardFn


@dataclass
class Tape:
    """Ordered record of differentiable operations.

    Operations executed while a tape is active (``with tape:``) append one
    node each; nodes are therefore stored in topological order.
    """

    nodes: list = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _ACTIVE.pop()
        assert popped is self, "tape stack corrupted"

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, parents: Sequence["Tensor"], out: "Tensor", backward: BackwardFn) -> None:
        out.tape_id = len(self.nodes)
        out._tape = self
        self.nodes.append(_Node(op, tuple(parents), out, backward))


_ACTIVE: list[Tape] = []


def active_tape() -> Optional[Tape]:
    return _ACTIVE[-1] if _ACTIVE else None


class Tensor:
    """Dense float64 array with an optional gradient buffer."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=DTYPE, copy=True) if not isinstance(data, np.ndarray) else data.astype(DTYPE, copy=False)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.tape_id: Optional[int] = None
        self._tape: Optional[Tape] = None
        self.name = name

    # --- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_not_scalar(self)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # --- operator sugar; implementations live in functional ---------------
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import functional as F
        return F.div(self, other)

    def __rtruediv__(self, other):
        from . import functional as F
        return F.div(other, self)

    def __neg__(self):
        from . import functional as F
        return F.neg(self)

    def __pow__(self, exponent: float):
        from . import functional as F
        return F.power(self, exponent)

    def __getitem__(self, index):
        from . import functional as F
        return F.getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        from . import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def backward(self) -> None:
        backward(self)


def _raise_not_scalar(t: Tensor):
    raise ContractViolation(f"expected a scalar tensor, got shape {t.shape}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_result(op: str, data: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Wrap ``data`` as the output of ``op`` and record it when gradients are needed."""
    needs_grad = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs_grad)
    tape = active_tape()
    if needs_grad and tape is not None:
        tape.record(op, parents, out, backward_fn)
    return out


def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
    """Populate ``.grad`` on every requires-grad tensor the loss depends on.

    Walks the tape once in reverse from the loss node. Leaf tensors
    accumulate into any existing ``.grad``; recorded intermediates get the
    gradient of this pass only.
    """
    if loss.data.size != 1:
        raise ContractViolation(f"backward() needs a scalar loss, got shape {loss.shape}")
    tape = tape if tape is not None else loss._tape
    if tape is None or loss.tape_id is None or loss._tape is not tape:
        raise ContractViolation("loss was not recorded on the given tape")

    pending: dict[int, np.ndarray] = {loss.tape_id: np.ones_like(loss.data)}
    for idx in range(loss.tape_id, -1, -1):
        g = pending.pop(idx, None)
        if g is None:
            continue
        node = tape.nodes[idx]
        node.out.grad = g
        parent_grads = node.backward(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if parent._tape is tape and parent.tape_id is not None:
                prev = pending.get(parent.tape_id)
                pending[parent.tape_id] = pg if prev is None else prev + pg
            else:
                parent.grad = np.array(pg, dtype=DTYPE) if parent.grad is None else parent.grad + pg
