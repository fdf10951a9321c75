"""
Cost Counters
Per-run MAC and activation tallies, scoped with a context variable
"""

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Iterator, Tuple

from app.core.tensor import Tensor
from app.errors import ContractError

LINEAR = "linear"
ATTENTION = "attention"
CATEGORIES = (LINEAR, ATTENTION)

_active_counters: ContextVar[Tuple["CostCounter", ...]] = ContextVar("active_counters", default=())


@dataclass
class CostCounter:
    """
    Cost Counter

    Tallies multiply-accumulates and activation element counts per category.
    Bias adds, softmax and interpolation are not counted.
    """

    macs_linear: int = 0
    macs_attention: int = 0
    mem_linear_elems: int = 0
    mem_attn_elems: int = 0

    def add_macs(self, category: str, count: int):
        if category == LINEAR:
            self.macs_linear += count
        elif category == ATTENTION:
            self.macs_attention += count
        else:
            raise ContractError(f"unknown cost category '{category}'")

    def add_elems(self, category: str, count: int):
        if category == LINEAR:
            self.mem_linear_elems += count
        elif category == ATTENTION:
            self.mem_attn_elems += count
        else:
            raise ContractError(f"unknown cost category '{category}'")

    @property
    def macs_total(self) -> int:
        return self.macs_linear + self.macs_attention

    def reset(self):
        self.macs_linear = 0
        self.macs_attention = 0
        self.mem_linear_elems = 0
        self.mem_attn_elems = 0


@contextmanager
def measuring() -> Iterator[CostCounter]:
    """
    Open a fresh counter for the enclosed run

    Counters nest: an op records into every counter that is open in the
    current context, so a decoder-wide counter also sees each branch.
    """
    counter = CostCounter()
    token = _active_counters.set(_active_counters.get() + (counter,))
    try:
        yield counter
    finally:
        _active_counters.reset(token)


def record_macs(category: str, count: int):
    for counter in _active_counters.get():
        counter.add_macs(category, count)


def record_activation(category: str, tensor: Tensor, groups: int = 1):
    """
    Count an activation's elements

    Args:
        groups: divisor for stacked per-head tensors (attention maps are
            counted once per head group, not once per head)
    """
    if tensor.size % groups:
        raise ContractError(f"{tensor.size} elements do not split into {groups} groups")
    for counter in _active_counters.get():
        counter.add_elems(category, tensor.size // groups)
