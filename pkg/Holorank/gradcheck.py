"""Central finite-difference checks for tape gradients."""

import numpy as np

from .exceptions import ContractError
from .tensor import Tape, Tensor, backward


def _scalar(value):
    if not isinstance(value, Tensor) or value.size != 1:
        raise ContractError("gradient checks need a function returning a scalar tensor")
    return float(value.data.reshape(-1)[0])


def _evaluate(f, arrays):
    return _scalar(f(*[Tensor(array, dtype=np.float64) for array in arrays]))


def gradient_check(f, tensors, step=1e-5):
    """Compare tape gradients of ``f(*tensors)`` with central differences.

    Returns the worst |analytic - numeric| / max(1, |analytic|) over every
    element of every tensor. All evaluation happens in float64.
    """
    if step <= 0:
        raise ContractError(f"finite-difference step must be positive, got {step}")
    base = [np.array(t.data if isinstance(t, Tensor) else t, dtype=np.float64) for t in tensors]
    leaves = [Tensor(array, requires_grad=True, dtype=np.float64) for array in base]
    with Tape():
        output = f(*leaves)
    recorded = _scalar(output)
    if recorded != _evaluate(f, base):
        raise ContractError("function is not deterministic: two evaluations at the same point differ")
    backward(output)

    worst = 0.0
    for position, leaf in enumerate(leaves):
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        for flat in range(leaf.data.size):
            shifted = [array.copy() for array in base]
            shifted[position].flat[flat] += step
            upper = _evaluate(f, shifted)
            shifted[position].flat[flat] -= 2 * step
            lower = _evaluate(f, shifted)
            numeric = (upper - lower) / (2 * step)
            exact = float(analytic.flat[flat])
            worst = max(worst, abs(exact - numeric) / max(1.0, abs(exact)))
    return worst


def finite_difference_check(f, x, step=1e-5):
    return gradient_check(f, [x], step)
