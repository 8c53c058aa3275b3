"""Dense tensors with a reverse-mode tape.

Every value in the ranking models is a ``Tensor`` wrapping an immutable numpy
array. Operations record themselves on the thread's active ``Tape`` when one
of their inputs requires grad; ``backward`` replays that tape in reverse.

Broadcasting is limited to adding a bias vector to every row of a matrix.
"""

import threading

import numpy as np

from .exceptions import ContractError, DimensionError, NumericError

PRECISIONS = {"f64": np.float64, "f32": np.float32}

# Finite-difference tolerance per precision; f32 checks are only indicative.
GRADCHECK_TOLERANCE = {"f64": 1e-4, "f32": 5e-2}

_local = threading.local()


def dtype_for(precision):
    try:
        return PRECISIONS[precision]
    except KeyError:
        raise ContractError(f"unknown precision {precision!r}; expected one of {sorted(PRECISIONS)}") from None


def current_tape():
    return getattr(_local, "tape", None)


class _Node:
    __slots__ = ("output", "inputs", "backward_fn", "name")

    def __init__(self, output, inputs, backward_fn, name):
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.name = name


class Tape:
    """Ordered record of the primitives executed during one forward pass.

    A tape belongs to the thread that entered it. ``backward`` consumes it;
    a consumed tape refuses both new records and a second backward.
    """

    def __init__(self):
        self.nodes = []
        self.consumed = False
        self._previous = None

    def __enter__(self):
        self._previous = current_tape()
        _local.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _local.tape = self._previous
        self._previous = None
        return False

    def __len__(self):
        return len(self.nodes)

    def record(self, output, inputs, backward_fn, name):
        if self.consumed:
            raise ContractError("tape was already consumed by backward(); start a new forward pass")
        self.nodes.append(_Node(output, inputs, backward_fn, name))
        output._tape = self


class Tensor:
    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            source = np.asarray(data)
            dtype = source.dtype if np.issubdtype(source.dtype, np.floating) else np.float64
        array = np.array(data, dtype=dtype, copy=True)
        array.setflags(write=False)
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._tape = None

    @classmethod
    def _wrap(cls, array, requires_grad):
        tensor = cls.__new__(cls)
        array = np.asarray(array)
        array.setflags(write=False)
        tensor.data = array
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor._tape = None
        return tensor

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor._wrap(self.data, False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data, dtype=None):
    return Tensor(data, requires_grad=False, dtype=dtype)


def parameter(data, dtype=None):
    return Tensor(data, requires_grad=True, dtype=dtype)


def as_tensor(value, like=None):
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if isinstance(like, Tensor) else None
    return Tensor(value, dtype=dtype)


def record_op(data, inputs, backward_fn, name):
    """Wrap ``data`` as the output of a primitive and record it if needed.

    ``backward_fn(upstream)`` must return one gradient (or None) per input,
    each with that input's shape.
    """
    requires_grad = any(tensor.requires_grad for tensor in inputs)
    output = Tensor._wrap(data, requires_grad)
    tape = current_tape()
    if requires_grad and tape is not None:
        tape.record(output, tuple(inputs), backward_fn, name)
    return output


def backward(loss):
    """Populate ``.grad`` on every requires-grad leaf reachable from ``loss``."""
    if not isinstance(loss, Tensor) or loss.size != 1:
        shape = loss.shape if isinstance(loss, Tensor) else type(loss).__name__
        raise ContractError(f"backward() needs a scalar loss, got shape {shape}")
    tape = loss._tape
    if tape is None:
        raise ContractError("loss was not recorded on a tape; run the forward pass inside `with Tape():`")
    if tape.consumed:
        raise ContractError("tape was already consumed by backward(); run a fresh forward pass")
    if not tape.nodes:
        raise ContractError("tape is empty")

    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        upstream = pending.pop(id(node.output), None)
        if upstream is None:
            continue
        input_grads = node.backward_fn(upstream)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            grad = np.asarray(grad, dtype=tensor.dtype).reshape(tensor.shape)
            if tensor._tape is tape:
                key = id(tensor)
                pending[key] = pending[key] + grad if key in pending else grad
            elif tensor.grad is None:
                tensor.grad = grad.copy()
            else:
                tensor.grad = tensor.grad + grad
    tape.consumed = True
    tape.nodes = []


def _shape_error(op_name, a, b):
    return DimensionError(f"{op_name}: incompatible shapes {tuple(a.shape)} and {tuple(b.shape)}")


def _bias_axis(a, b):
    """Return which operand is a row-broadcast bias, or None for equal shapes."""
    if a.shape == b.shape:
        return None
    if a.ndim == 2 and b.ndim in (1, 2) and b.shape[-1] == a.shape[1] and b.size == a.shape[1]:
        return "b"
    if b.ndim == 2 and a.ndim in (1, 2) and a.shape[-1] == b.shape[1] and a.size == b.shape[1]:
        return "a"
    return False


def _reduce_to(grad, tensor):
    if grad.shape == tensor.shape:
        return grad
    return grad.sum(axis=0).reshape(tensor.shape)


def add(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    if _bias_axis(a, b) is False:
        raise _shape_error("add", a, b)
    data = a.data + b.data

    def backward_fn(upstream):
        return _reduce_to(upstream, a), _reduce_to(upstream, b)

    return record_op(data, (a, b), backward_fn, "add")


def sub(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    if _bias_axis(a, b) is False:
        raise _shape_error("sub", a, b)
    data = a.data - b.data

    def backward_fn(upstream):
        return _reduce_to(upstream, a), _reduce_to(-upstream, b)

    return record_op(data, (a, b), backward_fn, "sub")


def mul(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    if a.shape != b.shape:
        raise _shape_error("mul", a, b)
    data = a.data * b.data

    def backward_fn(upstream):
        return upstream * b.data, upstream * a.data

    return record_op(data, (a, b), backward_fn, "mul")


def scale(x, factor):
    x = as_tensor(x)
    factor = float(factor)
    data = x.data * x.dtype.type(factor)

    def backward_fn(upstream):
        return (upstream * factor,)

    return record_op(data, (x,), backward_fn, "scale")


def sigmoid(x):
    x = as_tensor(x)
    # 0.5 * (1 + tanh(x / 2)) never overflows.
    data = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def backward_fn(upstream):
        return (upstream * data * (1.0 - data),)

    return record_op(data.astype(x.dtype, copy=False), (x,), backward_fn, "sigmoid")


def tanh(x):
    x = as_tensor(x)
    data = np.tanh(x.data)

    def backward_fn(upstream):
        return (upstream * (1.0 - data * data),)

    return record_op(data, (x,), backward_fn, "tanh")


def exp(x):
    x = as_tensor(x)
    with np.errstate(over="raise"):
        try:
            data = np.exp(x.data)
        except FloatingPointError as exc:
            raise NumericError("exp overflow") from exc

    def backward_fn(upstream):
        return (upstream * data,)

    return record_op(data, (x,), backward_fn, "exp")


def log(x):
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise NumericError("log of a non-positive value")
    data = np.log(x.data)

    def backward_fn(upstream):
        return (upstream / x.data,)

    return record_op(data, (x,), backward_fn, "log")


def clamp(x, low, high):
    x = as_tensor(x)
    data = np.clip(x.data, low, high)
    inside = (x.data >= low) & (x.data <= high)

    def backward_fn(upstream):
        return (upstream * inside,)

    return record_op(data, (x,), backward_fn, "clamp")


def matmul(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise _shape_error("matmul", a, b)
    data = a.data @ b.data

    def backward_fn(upstream):
        return upstream @ b.data.T, a.data.T @ upstream

    return record_op(data, (a, b), backward_fn, "matmul")


def sum(x):
    x = as_tensor(x)
    data = np.asarray(x.data.sum(), dtype=x.dtype)

    def backward_fn(upstream):
        return (np.broadcast_to(upstream, x.shape),)

    return record_op(data, (x,), backward_fn, "sum")


def row_sum(x):
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"row_sum needs a matrix, got shape {x.shape}")
    data = x.data.sum(axis=1, keepdims=True)

    def backward_fn(upstream):
        return (np.broadcast_to(upstream, x.shape),)

    return record_op(data, (x,), backward_fn, "row_sum")


def dot(a, b):
    a, b = as_tensor(a, b), as_tensor(b, a)
    if a.ndim != 1 or a.shape != b.shape:
        raise _shape_error("dot", a, b)
    data = np.asarray(a.data @ b.data, dtype=a.dtype)

    def backward_fn(upstream):
        return upstream * b.data, upstream * a.data

    return record_op(data, (a, b), backward_fn, "dot")


def reshape(x, shape):
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        data = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {x.shape} to {shape}") from exc

    def backward_fn(upstream):
        return (upstream.reshape(x.shape),)

    return record_op(data, (x,), backward_fn, "reshape")


def concat_cols(tensors):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat_cols needs at least one tensor")
    rows = tensors[0].shape[0] if tensors[0].ndim == 2 else None
    for tensor in tensors:
        if tensor.ndim != 2 or tensor.shape[0] != rows:
            raise DimensionError(
                "concat_cols: all inputs must be matrices with equal row counts, got "
                + ", ".join(str(t.shape) for t in tensors)
            )
    data = np.concatenate([t.data for t in tensors], axis=1)
    edges = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward_fn(upstream):
        return tuple(upstream[:, edges[i]:edges[i + 1]] for i in range(len(tensors)))

    return record_op(data, tuple(tensors), backward_fn, "concat_cols")


def stack_rows(tensors):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("stack_rows needs at least one tensor")
    width = tensors[0].shape[-1]
    for tensor in tensors:
        if tensor.size != width or tensor.ndim not in (1, 2):
            raise DimensionError(f"stack_rows: expected rows of width {width}, got {tensor.shape}")
    data = np.stack([t.data.reshape(width) for t in tensors], axis=0)

    def backward_fn(upstream):
        return tuple(upstream[i] for i in range(len(tensors)))

    return record_op(data, tuple(tensors), backward_fn, "stack_rows")


def take_row(x, index):
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"take_row needs a matrix, got shape {x.shape}")
    data = x.data[index:index + 1]

    def backward_fn(upstream):
        grad = np.zeros_like(x.data)
        grad[index:index + 1] = upstream
        return (grad,)

    return record_op(data, (x,), backward_fn, "take_row")


def take_column(x, index):
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"take_column needs a matrix, got shape {x.shape}")
    data = x.data[:, index]

    def backward_fn(upstream):
        grad = np.zeros_like(x.data)
        grad[:, index] = upstream
        return (grad,)

    return record_op(data, (x,), backward_fn, "take_column")


def softmax_rows(x):
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"softmax_rows needs a matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax received NaN or infinite logits")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    data = weights / weights.sum(axis=1, keepdims=True)

    def backward_fn(upstream):
        inner = (upstream * data).sum(axis=1, keepdims=True)
        return (data * (upstream - inner),)

    return record_op(data, (x,), backward_fn, "softmax_rows")


POINTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
}


def pointwise(op, *operands):
    try:
        function = POINTWISE[op]
    except KeyError:
        raise ContractError(f"unknown pointwise op {op!r}") from None
    return function(*operands)


def zero_grad(tensors):
    for tensor in tensors:
        tensor.grad = None
