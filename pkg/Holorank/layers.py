"""Embedding lookup, LSTM encoder, NTN scorer and the dense heads.

Batched layers take row matrices ``[B x .]``; weights are stored so that a
layer computes ``X @ W + b`` (the transpose of the column-vector notation).
The single-pair functions wrap the batched ones with a batch of one.
"""

import dataclasses

import numpy as np

from .exceptions import ConfigError, DimensionError, VocabularyError
from .holo import correlate
from .tensor import (
    Tensor,
    add,
    concat_cols,
    constant,
    matmul,
    mul,
    parameter,
    reshape,
    row_sum,
    sigmoid,
    softmax_rows,
    stack_rows,
    take_row,
    tanh,
)

GATES = ("i", "f", "c", "o")

ACTIVATIONS = {
    "tanh": tanh,
    "sigmoid": sigmoid,
}

OVERLAP_FEATURE_WIDTH = 4
FORGET_GATE_BIAS = 1.0


def get_activation(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ConfigError(f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}") from None


def glorot_uniform(rng, rows, cols, dtype=np.float64):
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols)).astype(dtype)


def dropout_mask(shape, rate, rng, dtype=np.float64):
    """Inverted dropout: kept units are scaled by 1 / (1 - rate)."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return constant(keep.astype(dtype) / (1.0 - rate), dtype=dtype)


@dataclasses.dataclass(frozen=True, eq=False)
class EmbeddingTable:
    matrix: np.ndarray
    trainable: bool = False

    def __post_init__(self):
        matrix = np.array(self.matrix, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] < 1:
            raise DimensionError(f"embedding matrix must be |V| x n, got shape {matrix.shape}")
        matrix[0] = 0.0
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "trainable", False)

    @property
    def vocab_size(self):
        return self.matrix.shape[0]

    @property
    def dim(self):
        return self.matrix.shape[1]

    def astype(self, dtype):
        return EmbeddingTable(self.matrix.astype(dtype))


def _check_ids(token_ids, table):
    ids = np.asarray(token_ids)
    if ids.size and not np.issubdtype(ids.dtype, np.integer):
        raise VocabularyError(f"token ids must be integers, got dtype {ids.dtype}")
    bad = np.flatnonzero((ids.reshape(-1) < 0) | (ids.reshape(-1) >= table.vocab_size))
    if bad.size:
        position = int(bad[0])
        raise VocabularyError(
            f"token id {int(ids.reshape(-1)[position])} at position {position} is outside [0, {table.vocab_size})",
            position=position,
        )
    return ids.astype(np.int64)


def embed(token_ids, table):
    """Look up ``[L]`` token ids; the table is frozen, so the result is a constant."""
    ids = _check_ids(token_ids, table)
    if ids.ndim != 1:
        raise DimensionError(f"embed expects a 1-d id sequence, got shape {ids.shape}")
    return constant(table.matrix[ids], dtype=table.matrix.dtype)


def embed_steps(token_ids, table):
    """Look up a ``[B x L]`` id matrix as L timestep tensors of shape ``[B x n]``."""
    ids = _check_ids(token_ids, table)
    if ids.ndim != 2:
        raise DimensionError(f"embed_steps expects a [B x L] id matrix, got shape {ids.shape}")
    vectors = table.matrix[ids]
    return [constant(vectors[:, step, :], dtype=table.matrix.dtype) for step in range(ids.shape[1])]


@dataclasses.dataclass(frozen=True)
class LstmParams:
    input_size: int
    hidden_size: int
    num_layers: int
    tensors: dict

    def gate(self, layer, gate):
        return (
            self.tensors[f"{layer}.W_{gate}"],
            self.tensors[f"{layer}.U_{gate}"],
            self.tensors[f"{layer}.b_{gate}"],
        )

    def parameter_count(self):
        return sum(tensor.size for tensor in self.tensors.values())

    def replace(self, tensors):
        return dataclasses.replace(self, tensors=dict(tensors))


def lstm_parameter_count(input_size, hidden_size, num_layers):
    total = 0
    for layer in range(num_layers):
        width = input_size if layer == 0 else hidden_size
        total += 4 * (width * hidden_size + hidden_size * hidden_size + hidden_size)
    return total


def init_lstm_params(input_size, hidden_size, num_layers, rng, dtype=np.float64):
    if min(input_size, hidden_size, num_layers) < 1:
        raise ConfigError("LSTM sizes and layer count must be positive")
    tensors = {}
    for layer in range(num_layers):
        width = input_size if layer == 0 else hidden_size
        for gate in GATES:
            tensors[f"{layer}.W_{gate}"] = parameter(glorot_uniform(rng, width, hidden_size, dtype))
            tensors[f"{layer}.U_{gate}"] = parameter(glorot_uniform(rng, hidden_size, hidden_size, dtype))
            bias = np.full(hidden_size, FORGET_GATE_BIAS if gate == "f" else 0.0, dtype=dtype)
            tensors[f"{layer}.b_{gate}"] = parameter(bias)
    return LstmParams(input_size, hidden_size, num_layers, tensors)


def lstm_encode(steps, params):
    """Run the stacked LSTM over timestep tensors ``[B x n]``.

    Returns the final layer's hidden state at every timestep. The initial
    hidden and cell states are zero and padded steps are not masked.
    """
    if not steps:
        raise DimensionError("LSTM input sequence is empty")
    batch = steps[0].shape[0]
    dtype = steps[0].dtype
    inputs = steps
    for layer in range(params.num_layers):
        hidden = constant(np.zeros((batch, params.hidden_size), dtype=dtype))
        cell = constant(np.zeros((batch, params.hidden_size), dtype=dtype))
        weights = {gate: params.gate(layer, gate) for gate in GATES}
        outputs = []
        for x_t in inputs:
            pre = {
                gate: add(add(matmul(x_t, W), matmul(hidden, U)), b)
                for gate, (W, U, b) in weights.items()
            }
            input_gate = sigmoid(pre["i"])
            forget_gate = sigmoid(pre["f"])
            output_gate = sigmoid(pre["o"])
            candidate = tanh(pre["c"])
            cell = add(mul(forget_gate, cell), mul(input_gate, candidate))
            hidden = mul(output_gate, tanh(cell))
            outputs.append(hidden)
        inputs = outputs
    return inputs


def lstm_forward(x, params):
    """Encode one sequence ``[L x n]``; returns (all hidden ``[L x d]``, last hidden ``[d]``)."""
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError(f"lstm_forward expects a non-empty [L x n] input, got shape {x.shape}")
    if x.shape[1] != params.input_size:
        raise DimensionError(f"lstm_forward: input width {x.shape[1]} does not match {params.input_size}")
    steps = [take_row(x, t) for t in range(x.shape[0])]
    hidden = lstm_encode(steps, params)
    return stack_rows(hidden), reshape(hidden[-1], (params.hidden_size,))


@dataclasses.dataclass(frozen=True)
class NtnParams:
    dim: int
    slices: int
    use_overlap_feats: bool
    tensors: dict

    def parameter_count(self):
        return sum(tensor.size for tensor in self.tensors.values())

    def replace(self, tensors):
        return dataclasses.replace(self, tensors=dict(tensors))


def init_ntn_params(dim, slices, rng, use_overlap_feats=False, dtype=np.float64):
    if min(dim, slices) < 1:
        raise ConfigError("NTN dimension and slice count must be positive")
    tensors = {}
    for r in range(slices):
        tensors[f"M{r}"] = parameter(glorot_uniform(rng, dim, dim, dtype))
    tensors["V"] = parameter(glorot_uniform(rng, 2 * dim, slices, dtype))
    tensors["b"] = parameter(np.zeros(slices, dtype=dtype))
    out_width = slices + (OVERLAP_FEATURE_WIDTH if use_overlap_feats else 0)
    tensors["u"] = parameter(glorot_uniform(rng, out_width, 2, dtype))
    tensors["u_bias"] = parameter(np.zeros(2, dtype=dtype))
    return NtnParams(dim, slices, use_overlap_feats, tensors)


def _check_features(x_feat, enabled, rows):
    if enabled and x_feat is None:
        raise ConfigError("overlap features are enabled but none were supplied")
    if not enabled and x_feat is not None:
        raise ConfigError("overlap features were supplied but the head was built without them")
    if x_feat is not None and tuple(x_feat.shape) != (rows, OVERLAP_FEATURE_WIDTH):
        raise DimensionError(f"overlap features must be [{rows} x {OVERLAP_FEATURE_WIDTH}], got {x_feat.shape}")


def bilinear_rows(q, a, M):
    """Row-wise q_b^T M a_b for ``[B x n]`` inputs; returns ``[B x 1]``."""
    if q.ndim != 2 or q.shape != a.shape or M.shape != (q.shape[1], q.shape[1]):
        raise DimensionError(f"bilinear similarity: shapes {q.shape}, {M.shape}, {a.shape} are not conformable")
    return row_sum(mul(matmul(q, M), a))


def bilinear_similarity(q, a, M):
    if q.ndim != 1:
        raise DimensionError(f"bilinear_similarity expects vectors, got shape {q.shape}")
    n = q.shape[0]
    return reshape(bilinear_rows(reshape(q, (1, n)), reshape(a, (1, a.size)), M), ())


def ntn_logits(q, a, params, x_feat=None):
    """u^T tanh(q^T M^[1:k] a + V [q; a] + b) + u_bias for ``[B x n]`` rows."""
    if q.ndim != 2 or q.shape != a.shape or q.shape[1] != params.dim:
        raise DimensionError(f"ntn: expected [B x {params.dim}] inputs, got {q.shape} and {a.shape}")
    _check_features(x_feat, params.use_overlap_feats, q.shape[0])
    slices = [bilinear_rows(q, a, params.tensors[f"M{r}"]) for r in range(params.slices)]
    linear = matmul(concat_cols([q, a]), params.tensors["V"])
    activated = tanh(add(add(concat_cols(slices), linear), params.tensors["b"]))
    if x_feat is not None:
        activated = concat_cols([activated, x_feat])
    return add(matmul(activated, params.tensors["u"]), params.tensors["u_bias"])


def ntn_score(q, a, params, x_feat=None):
    n = params.dim
    if q.shape != (n,) or a.shape != (n,):
        raise DimensionError(f"ntn_score expects two vectors of length {n}, got {q.shape} and {a.shape}")
    features = None if x_feat is None else reshape(x_feat, (1, OVERLAP_FEATURE_WIDTH))
    return reshape(ntn_logits(reshape(q, (1, n)), reshape(a, (1, n)), params, features), (2,))


@dataclasses.dataclass(frozen=True)
class HoloHeadParams:
    """Hidden + softmax head over a composed QA vector.

    ``composition`` is "correlation" for the holographic layer or
    "concatenation" for the LSTM-concat baseline.
    """

    dim: int
    hidden: int
    composition: str
    use_bilinear_sim: bool
    use_overlap_feats: bool
    activation: str
    tensors: dict

    @property
    def composed_width(self):
        return self.dim * (2 if self.composition == "concatenation" else 1)

    @property
    def input_width(self):
        return (
            self.composed_width
            + (1 if self.use_bilinear_sim else 0)
            + (OVERLAP_FEATURE_WIDTH if self.use_overlap_feats else 0)
        )

    def parameter_count(self):
        return sum(tensor.size for tensor in self.tensors.values())

    def replace(self, tensors):
        return dataclasses.replace(self, tensors=dict(tensors))


def init_head_params(
    dim,
    hidden,
    rng,
    *,
    composition="correlation",
    use_bilinear_sim=False,
    use_overlap_feats=False,
    activation="tanh",
    dtype=np.float64,
):
    if composition not in ("correlation", "concatenation"):
        raise ConfigError(f"unknown head composition {composition!r}")
    if min(dim, hidden) < 1:
        raise ConfigError("head dimension and hidden size must be positive")
    get_activation(activation)
    shell = HoloHeadParams(dim, hidden, composition, use_bilinear_sim, use_overlap_feats, activation, {})
    tensors = {
        "W_h": parameter(glorot_uniform(rng, shell.input_width, hidden, dtype)),
        "b_h": parameter(np.zeros(hidden, dtype=dtype)),
        "W_f": parameter(glorot_uniform(rng, hidden, 2, dtype)),
        "b_f": parameter(np.zeros(2, dtype=dtype)),
    }
    if use_bilinear_sim:
        tensors["M_sim"] = parameter(glorot_uniform(rng, dim, dim, dtype))
    return shell.replace(tensors)


def head_logits(q, a, params, x_feat=None, dropout=None):
    """W_f f(W_h [compose(q, a), sim, X_feat] + b_h) + b_f for ``[B x d]`` rows.

    ``dropout`` is an optional mask over the head input, applied before W_h.
    """
    if q.ndim != 2 or q.shape != a.shape or q.shape[1] != params.dim:
        raise DimensionError(f"head: expected [B x {params.dim}] inputs, got {q.shape} and {a.shape}")
    _check_features(x_feat, params.use_overlap_feats, q.shape[0])
    if params.composition == "correlation":
        parts = [correlate(q, a)]
    else:
        parts = [concat_cols([q, a])]
    if params.use_bilinear_sim:
        parts.append(bilinear_rows(q, a, params.tensors["M_sim"]))
    if x_feat is not None:
        parts.append(x_feat)
    joined = parts[0] if len(parts) == 1 else concat_cols(parts)
    if joined.shape[1] != params.input_width:
        raise DimensionError(f"head input width {joined.shape[1]} does not match W_h ({params.input_width})")
    if dropout is not None:
        joined = mul(joined, dropout)
    activation = get_activation(params.activation)
    hidden = activation(add(matmul(joined, params.tensors["W_h"]), params.tensors["b_h"]))
    return add(matmul(hidden, params.tensors["W_f"]), params.tensors["b_f"])


def holographic_head(q, a, params, x_feat=None, dropout=None):
    """Single-pair holographic head: two vectors ``[d]`` in, two logits out."""
    d = params.dim
    if q.shape != (d,) or a.shape != (d,):
        raise DimensionError(f"holographic_head expects two vectors of length {d}, got {q.shape} and {a.shape}")
    features = None if x_feat is None else reshape(x_feat, (1, OVERLAP_FEATURE_WIDTH))
    mask = None if dropout is None else reshape(dropout, (1, params.input_width))
    logits = head_logits(reshape(q, (1, d)), reshape(a, (1, d)), params, features, mask)
    return reshape(logits, (2,))


def softmax2(logits):
    if not isinstance(logits, Tensor) or logits.shape != (2,):
        raise DimensionError(f"softmax2 expects two logits, got {getattr(logits, 'shape', None)}")
    return reshape(softmax_rows(reshape(logits, (1, 2))), (2,))
