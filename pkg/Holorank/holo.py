"""Circular correlation, circular convolution and the approximate inverse.

Arrays are vectors ``[d]`` or row batches ``[B x d]``; every operation works
along the last axis and preserves its length. Two backends compute the same
values: a direct O(d^2) summation used as the oracle and a numpy FFT path.
"""

import enum

import numpy as np

from .exceptions import DimensionError, NumericError
from .tensor import as_tensor, record_op

# Largest imaginary part (relative to the output scale) tolerated after the inverse FFT.
IMAG_RESIDUE_TOLERANCE = 1e-6

# Elements gathered per block by the direct backend.
DIRECT_BLOCK_ELEMENTS = 1 << 22


class CompositionBackend(str, enum.Enum):
    DIRECT_SUM = "direct"
    FFT = "fft"


def _as_backend(backend):
    if isinstance(backend, CompositionBackend):
        return backend
    try:
        return CompositionBackend(str(backend).lower())
    except ValueError:
        raise DimensionError(f"unknown composition backend {backend!r}") from None


def _check_pair(q, a, op_name):
    q = np.asarray(q)
    a = np.asarray(a)
    if q.ndim not in (1, 2) or q.shape != a.shape or q.shape[-1] < 1:
        raise DimensionError(
            f"{op_name}: operands must share a shape [d] or [B x d] with d >= 1, got {q.shape} and {a.shape}"
        )
    return q, a


def _result_dtype(q, a):
    dtype = np.result_type(q.dtype, a.dtype)
    return dtype if np.issubdtype(dtype, np.floating) else np.float64


def _direct(q, a, sign):
    d = q.shape[-1]
    rows_q = q.reshape(-1, d)
    rows_a = a.reshape(-1, d)
    out = np.empty_like(rows_q, dtype=_result_dtype(q, a))
    positions = np.arange(d)
    block = max(1, DIRECT_BLOCK_ELEMENTS // (d * rows_q.shape[0]))
    for start in range(0, d, block):
        shifts = positions[start:start + block]
        index = (shifts[:, None] + sign * positions[None, :]) % d
        out[:, start:start + block] = np.einsum("bi,bki->bk", rows_q, rows_a[:, index])
    return out.reshape(q.shape)


def _real_part(spectrum_out, dtype):
    real = spectrum_out.real
    if real.size:
        residue = float(np.max(np.abs(spectrum_out.imag)))
        bound = IMAG_RESIDUE_TOLERANCE * max(1.0, float(np.max(np.abs(real))))
        if residue > bound:
            raise NumericError(f"inverse FFT left an imaginary residue of {residue:.3g}")
    return real.astype(dtype, copy=False)


def _fft_correlation(q, a):
    spectrum = np.conj(np.fft.fft(q, axis=-1)) * np.fft.fft(a, axis=-1)
    return _real_part(np.fft.ifft(spectrum, axis=-1), _result_dtype(q, a))


def _fft_convolution(q, a):
    spectrum = np.fft.fft(q, axis=-1) * np.fft.fft(a, axis=-1)
    return _real_part(np.fft.ifft(spectrum, axis=-1), _result_dtype(q, a))


def circular_correlation(q, a, backend=CompositionBackend.FFT):
    """[q * a]_k = sum_i q_i a_{(k + i) mod d}; element 0 is dot(q, a)."""
    q, a = _check_pair(q, a, "circular_correlation")
    if _as_backend(backend) is CompositionBackend.DIRECT_SUM:
        return _direct(q, a, 1)
    return _fft_correlation(q, a)


def circular_convolution(q, a, backend=CompositionBackend.FFT):
    """[q (*) a]_k = sum_i q_i a_{(k - i) mod d}; commutative."""
    q, a = _check_pair(q, a, "circular_convolution")
    if _as_backend(backend) is CompositionBackend.DIRECT_SUM:
        return _direct(q, a, -1)
    return _fft_convolution(q, a)


def approximate_inverse(q):
    """Index permutation q~_i = q_{(-i) mod d}: element 0 stays, the rest reverse."""
    q = np.asarray(q)
    if q.ndim not in (1, 2) or q.shape[-1] < 1:
        raise DimensionError(f"approximate_inverse needs [d] or [B x d] with d >= 1, got {q.shape}")
    return np.roll(q[..., ::-1], 1, axis=-1)


def correlation_backward(upstream, q, a, backend=CompositionBackend.FFT):
    """Gradients of sum_k upstream_k [q * a]_k with respect to q and a."""
    upstream = np.asarray(upstream)
    q, a = _check_pair(q, a, "correlation_backward")
    if upstream.shape != q.shape:
        raise DimensionError(f"correlation_backward: upstream shape {upstream.shape} does not match {q.shape}")
    grad_q = circular_correlation(upstream, a, backend)
    grad_a = circular_convolution(q, upstream, backend)
    return grad_q, grad_a


def zero_pad(v, d):
    v = np.asarray(v)
    if v.ndim != 1:
        raise DimensionError(f"zero_pad needs a vector, got shape {v.shape}")
    if v.shape[0] > d:
        raise DimensionError(f"cannot pad a vector of length {v.shape[0]} down to {d}")
    padded = np.zeros(d, dtype=_result_dtype(v, v))
    padded[:v.shape[0]] = v
    return padded


def compose(q, a, operator="correlation", backend=CompositionBackend.FFT):
    """Apply one of the compositional operators compared in the complexity tables."""
    q, a = _check_pair(q, a, "compose")
    if operator == "correlation":
        return circular_correlation(q, a, backend)
    if operator == "convolution":
        return circular_convolution(q, a, backend)
    if operator == "concatenation":
        return np.concatenate([q, a], axis=-1)
    if operator == "tensor_product":
        outer = q[..., :, None] * a[..., None, :]
        return outer.reshape(q.shape[:-1] + (-1,))
    raise DimensionError(f"unknown compositional operator {operator!r}")


def correlate(q, a, backend=CompositionBackend.FFT):
    """Tape-aware circular correlation of two tensors (row-wise for matrices)."""
    q = as_tensor(q)
    a = as_tensor(a, q)
    data = circular_correlation(q.data, a.data, backend)

    def backward_fn(upstream):
        return correlation_backward(upstream, q.data, a.data, backend)

    return record_op(data, (q, a), backward_fn, "circular_correlation")

