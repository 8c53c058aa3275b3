"""Runtime scaling of the compositional operators against their parameter cost.

Each operator is timed as a median over repeated single calls after a few
warmups; a least-squares fit of log(time) on log(d) gives its scaling slope.
"""

import dataclasses
import logging
import statistics
import time

import numpy as np

from .architectures import Architecture, head_parameter_count
from .exceptions import ConfigError
from .holo import CompositionBackend, circular_correlation

logger = logging.getLogger(__name__)

OPERATORS = ("correlation_fft", "correlation_direct", "tensor_slices", "concat_dense")
DEFAULT_DIMS = tuple(2**power for power in range(8, 15))


@dataclasses.dataclass(frozen=True)
class BenchRow:
    operator: str
    d: int
    params: int
    median_ns: object = None
    skipped: bool = False


def _operator_params(operator, d, h, k):
    if operator == "tensor_slices":
        return head_parameter_count(Architecture.NTNLSTM, d, k=k)
    if operator == "concat_dense":
        return head_parameter_count(Architecture.CONCATLSTM, d, h=h)
    return head_parameter_count(Architecture.HDLSTM, d, h=h)


def _make_call(operator, d, h, k, rng):
    q = rng.standard_normal(d)
    a = rng.standard_normal(d)
    if operator == "correlation_fft":
        return lambda: circular_correlation(q, a, CompositionBackend.FFT)
    if operator == "correlation_direct":
        return lambda: circular_correlation(q, a, CompositionBackend.DIRECT_SUM)
    if operator == "tensor_slices":
        slices = rng.standard_normal((k * d, d))
        return lambda: (slices @ a).reshape(k, d) @ q
    if operator == "concat_dense":
        W_h = rng.standard_normal((2 * d, h))
        W_f = rng.standard_normal((h, 2))
        return lambda: np.tanh(np.concatenate([q, a]) @ W_h) @ W_f
    raise ConfigError(f"unknown operator {operator!r}; expected one of {OPERATORS}")


def median_runtime_ns(call, repetitions=30, warmups=5):
    for _ in range(warmups):
        call()
    samples = []
    for _ in range(repetitions):
        started = time.perf_counter_ns()
        call()
        samples.append(time.perf_counter_ns() - started)
    return int(statistics.median(samples))


def run_bench(
    dims=DEFAULT_DIMS,
    slices=5,
    hidden=64,
    repetitions=30,
    warmups=5,
    operators=OPERATORS,
    max_tensor_elements=2**25,
    seed=1,
):
    dims = [int(d) for d in dims]
    if not dims or min(dims) < 1:
        raise ConfigError("bench needs at least one positive dimension")
    if repetitions < 1 or warmups < 0:
        raise ConfigError("repetitions must be positive and warmups non-negative")
    rng = np.random.default_rng(seed)
    rows = []
    for operator in operators:
        for d in dims:
            params = _operator_params(operator, d, hidden, slices)
            if operator == "tensor_slices" and slices * d * d > max_tensor_elements:
                rows.append(BenchRow(operator, d, params, skipped=True))
                continue
            median = median_runtime_ns(_make_call(operator, d, hidden, slices, rng), repetitions, warmups)
            logger.info("%s at d=%d: %d ns", operator, d, median)
            rows.append(BenchRow(operator, d, params, median))
    return rows


def fit_slopes(rows):
    """Log-log slope per operator over its timed rows (needs two distinct sizes)."""
    slopes = {}
    for operator in dict.fromkeys(row.operator for row in rows):
        timed = [row for row in rows if row.operator == operator and not row.skipped and row.median_ns]
        if len({row.d for row in timed}) < 2:
            continue
        x = np.log([row.d for row in timed])
        y = np.log([row.median_ns for row in timed])
        slopes[operator] = float(np.polyfit(x, y, 1)[0])
    return slopes
