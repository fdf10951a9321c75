"""
Reverse-Mode Differentiation
Tape replay, central finite differences and the gradient check built on both
"""

from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np
import structlog

from app.config import settings
from app.core.tape import Tape, TapeNode
from app.core.tensor import Tensor
from app.errors import ContractError, UnsupportedError
from app.registry import GradRuleRegistry, grad_registry

logger = structlog.get_logger()

ScalarFn = Callable[[Tensor], Union[Tensor, float]]


def backward(
    root: Union[Tensor, TapeNode], registry: Optional[GradRuleRegistry] = None
) -> Dict[Tensor, Tensor]:
    """
    Gradient of a scalar w.r.t. every watched leaf of its tape

    Visits the recorded nodes in reverse tape order (a reverse topological
    order), each at most once, and sums contributions across fan-out.

    Args:
        root: tracked tensor of shape (1,), or its TapeNode
        registry: rule lookup; defaults to the global registry

    Returns:
        {leaf tensor -> gradient}; leaves the root does not depend on get zeros

    Raises:
        ContractError: root untracked or not of shape (1,)
        UnsupportedError: a reached node has no gradient rule
    """
    registry = registry or grad_registry
    node = root if isinstance(root, TapeNode) else root.node
    if node is None:
        raise ContractError("backward() needs a tensor computed under an active Tape")
    if node.value.shape != (1,):
        raise ContractError(f"backward() root must have shape (1,), got {node.value.shape}")

    tape = node.tape
    for candidate in tape.nodes:
        candidate.grad = None

    grads: Dict[int, np.ndarray] = {node.index: np.ones(1)}
    for current in reversed(tape.nodes[: node.index + 1]):
        grad = grads.get(current.index)
        if grad is None:
            continue
        current.grad = Tensor.adopt(grad)
        if current.is_leaf:
            continue

        rule = registry.get_rule(current.op)
        if rule is None:
            raise UnsupportedError(f"no gradient rule registered for op '{current.op}'")

        input_grads = rule.backward(current, grad)
        rule.log_node(current, "grad_pulled")
        for parent, contribution in zip(current.inputs, input_grads):
            if parent is None or contribution is None:
                continue
            if contribution.shape != parent.value.shape:
                raise ContractError(
                    f"{rule.rule_name} produced gradient {contribution.shape} "
                    f"for input of shape {parent.value.shape}"
                )
            previous = grads.get(parent.index)
            grads[parent.index] = contribution if previous is None else previous + contribution

    return {
        leaf.value: Tensor.adopt(grads.get(leaf.index, np.zeros(leaf.value.shape)))
        for leaf in tape.leaves
    }


def _scalar(value: Union[Tensor, float]) -> float:
    return value.item() if isinstance(value, Tensor) else float(value)


def finite_diff(
    f: ScalarFn,
    x: Tensor,
    eps: Optional[float] = None,
    coords: Optional[Sequence[int]] = None,
) -> Tensor:
    """
    Central differences (f(x+εeᵢ) − f(x−εeᵢ)) / 2ε

    Args:
        coords: flat indices to probe; the others are left at 0 (default: all)
    """
    eps = settings.gradcheck_eps if eps is None else eps
    if eps <= 0:
        raise ContractError(f"eps must be > 0, got {eps}")

    base = x.numpy().reshape(-1)
    out = np.zeros(base.size)
    for index in range(base.size) if coords is None else coords:
        original = base[index]
        base[index] = original + eps
        upper = _scalar(f(Tensor.adopt(base.reshape(x.shape).copy())))
        base[index] = original - eps
        lower = _scalar(f(Tensor.adopt(base.reshape(x.shape).copy())))
        base[index] = original
        out[index] = (upper - lower) / (2.0 * eps)
    return Tensor.adopt(out.reshape(x.shape))


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """max |a−b| / max(1, |a|, |b|) over all entries"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0


def sample_coords(size: int, count: int, seed: int = 0) -> np.ndarray:
    """Distinct flat indices to probe, sorted (all of them when count >= size)"""
    if count >= size:
        return np.arange(size)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(size, size=count, replace=False))


def gradcheck(
    f: ScalarFn,
    x: Tensor,
    eps: Optional[float] = None,
    coords: Optional[Sequence[int]] = None,
) -> float:
    """
    Max relative error between backward() and finite_diff() for f at x

    f must build its graph from the op set so the tape sees it.
    """
    with Tape() as tape:
        watched = tape.watch(x)
        result = f(watched)
        if not isinstance(result, Tensor):
            raise ContractError("gradcheck needs f to return a Tensor of shape (1,)")
        analytic = backward(result)[watched].flat

    numeric = finite_diff(f, x, eps=eps, coords=coords).flat
    probe = np.arange(x.size) if coords is None else np.asarray(coords)
    error = relative_error(analytic[probe], numeric[probe])
    logger.debug("gradcheck_done", size=x.size, probed=int(probe.size), max_rel_error=error)
    return error
