"""
Gradient Tape
Records op applications while active so backward() can replay them in reverse
"""

from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.tensor import Tensor

LEAF_OP = "leaf"

_active_tape: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)


@dataclass(eq=False)
class TapeNode:
    """
    Tape Node

    One recorded op application. Nodes are appended in creation order, so the
    tape order is a topological order of the DAG.
    """

    op: str
    inputs: Tuple[Optional["TapeNode"], ...]
    value: Tensor
    tape: "Tape"
    index: int
    saved: Dict[str, Any] = field(default_factory=dict)
    input_values: Tuple[Optional[np.ndarray], ...] = ()
    grad: Optional[Tensor] = None

    @property
    def is_leaf(self) -> bool:
        return self.op == LEAF_OP


class Tape:
    """
    Tape

    Single-threaded during construction and backward; independent tapes
    (one per ERF sample) can live in different threads.
    """

    def __init__(self):
        self.nodes: List[TapeNode] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _active_tape.reset(self._token)
        self._token = None

    def watch(self, x: Tensor) -> Tensor:
        """Register x as a leaf; returns the tracked tensor to compute with"""
        leaf = Tensor.adopt(x.data)
        leaf.node = self._append(LEAF_OP, (), leaf, {})
        return leaf

    @property
    def leaves(self) -> List[TapeNode]:
        return [node for node in self.nodes if node.is_leaf]

    def _append(
        self, op: str, inputs, value: Tensor, saved: Dict[str, Any], input_values=()
    ) -> TapeNode:
        node = TapeNode(
            op=op,
            inputs=tuple(inputs),
            value=value,
            tape=self,
            index=len(self.nodes),
            saved=saved,
            input_values=tuple(input_values),
        )
        self.nodes.append(node)
        return node


def active_tape() -> Optional[Tape]:
    return _active_tape.get()


def record(op: str, array: np.ndarray, inputs: Sequence[Optional[Tensor]], **saved: Any) -> Tensor:
    """
    Wrap an op result; attach a TapeNode when a tape is active and an input is tracked

    Args:
        op: op identifier, looked up in the gradient rule registry on backward
        array: freshly computed output values
        inputs: the op's tensor inputs (None for absent optional inputs)
        saved: whatever the gradient rule needs besides the input values
    """
    out = Tensor.adopt(array)
    tape = _active_tape.get()
    if tape is None:
        return out

    parents = tuple(
        t.node if t is not None and t.node is not None and t.node.tape is tape else None
        for t in inputs
    )
    if all(parent is None for parent in parents):
        return out

    values = tuple(t.data if t is not None else None for t in inputs)
    out.node = tape._append(op, parents, out, saved, values)
    return out
