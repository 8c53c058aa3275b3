"""The three comparable rankers behind one scoring interface.

Every architecture encodes the question and the answer with its own stacked
LSTM over frozen embeddings and scores the final hidden states with a head:

* ``hdlstm``: holographic head (circular correlation + hidden layer)
* ``ntnlstm``: neural tensor network with ``k`` bilinear slices
* ``concatlstm``: hidden layer over the concatenated states
"""

import collections
import concurrent.futures
import dataclasses
import enum
import logging

import numpy as np

from .exceptions import ConfigError, ContractError, DimensionError
from .layers import (
    ACTIVATIONS,
    OVERLAP_FEATURE_WIDTH,
    dropout_mask,
    embed_steps,
    head_logits,
    init_head_params,
    init_lstm_params,
    init_ntn_params,
    lstm_encode,
    ntn_logits,
)
from .tensor import PRECISIONS, constant, dtype_for, mul, parameter, softmax_rows

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN_DIM = 64
DEFAULT_NTN_SLICES = 5


class Architecture(str, enum.Enum):
    HDLSTM = "hdlstm"
    NTNLSTM = "ntnlstm"
    CONCATLSTM = "concatlstm"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            choices = ", ".join(member.value for member in cls)
            raise ConfigError(f"unknown architecture {value!r}; expected one of {choices}") from None


@dataclasses.dataclass(frozen=True)
class ModelConfig:
    architecture: Architecture = Architecture.HDLSTM
    embed_dim: int = 50
    lstm_dim: int = 640
    lstm_layers: int = 2
    hidden_dim: object = None
    ntn_slices: object = None
    use_bilinear_sim: bool = False
    use_overlap_feats: bool = False
    max_len_q: int = 11
    max_len_a: int = 38
    dropout_rate: float = 0.5
    seed: int = 1
    activation: str = "tanh"
    precision: str = "f32"

    def __post_init__(self):
        object.__setattr__(self, "architecture", Architecture.parse(self.architecture))

    def resolved(self):
        """Fill the architecture's unset size and warn about sizes it ignores."""
        if self.architecture is Architecture.NTNLSTM:
            if self.hidden_dim is not None:
                logger.warning("hidden_dim=%s is ignored by the NTN-LSTM head", self.hidden_dim)
            if self.use_bilinear_sim:
                logger.warning("use_bilinear_sim is ignored by the NTN-LSTM head; its slices are already bilinear")
            slices = DEFAULT_NTN_SLICES if self.ntn_slices is None else self.ntn_slices
            return dataclasses.replace(self, hidden_dim=None, ntn_slices=slices, use_bilinear_sim=False)
        if self.ntn_slices is not None:
            logger.warning("ntn_slices=%s is ignored by the %s head", self.ntn_slices, self.architecture.value)
        hidden = DEFAULT_HIDDEN_DIM if self.hidden_dim is None else self.hidden_dim
        return dataclasses.replace(self, hidden_dim=hidden, ntn_slices=None)

    def validate(self):
        sizes = {
            "embed_dim": self.embed_dim,
            "lstm_dim": self.lstm_dim,
            "lstm_layers": self.lstm_layers,
            "max_len_q": self.max_len_q,
            "max_len_a": self.max_len_a,
        }
        if self.hidden_dim is not None:
            sizes["hidden_dim"] = self.hidden_dim
        if self.ntn_slices is not None:
            sizes["ntn_slices"] = self.ntn_slices
        for name, value in sizes.items():
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0.0 <= float(self.dropout_rate) < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}; expected one of {sorted(ACTIVATIONS)}")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"unknown precision {self.precision!r}; expected one of {sorted(PRECISIONS)}")
        return self

    def to_dict(self):
        payload = dataclasses.asdict(self)
        payload["architecture"] = self.architecture.value
        return payload

    @classmethod
    def from_dict(cls, payload):
        known = {field.name for field in dataclasses.fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"unknown model settings: {', '.join(unknown)}")
        return cls(**payload)


class Model:
    """Parameters of one ranker. Read-only once built; training swaps in new tensors."""

    def __init__(self, config, embeddings, q_lstm, a_lstm, head):
        self.config = config
        self.embeddings = embeddings
        self.q_lstm = q_lstm
        self.a_lstm = a_lstm
        self.head = head

    @property
    def dtype(self):
        return self.embeddings.matrix.dtype

    def parameters(self):
        named = collections.OrderedDict()
        for prefix, part in (("q_lstm", self.q_lstm), ("a_lstm", self.a_lstm), ("head", self.head)):
            for name, tensor in part.tensors.items():
                named[f"{prefix}.{name}"] = tensor
        return named

    def with_parameters(self, arrays):
        """A copy whose parameters are ``arrays`` (name -> ndarray), every name required."""
        current = self.parameters()
        if set(arrays) != set(current):
            missing = sorted(set(current) - set(arrays))
            extra = sorted(set(arrays) - set(current))
            raise ContractError(f"parameter names differ: missing {missing}, unexpected {extra}")
        parts = {"q_lstm": {}, "a_lstm": {}, "head": {}}
        for name, tensor in current.items():
            array = np.asarray(arrays[name])
            if array.shape != tensor.shape:
                raise DimensionError(f"parameter {name} expects shape {tensor.shape}, got {array.shape}")
            prefix, local = name.split(".", 1)
            parts[prefix][local] = parameter(array, dtype=self.dtype)
        return Model(
            self.config,
            self.embeddings,
            self.q_lstm.replace(parts["q_lstm"]),
            self.a_lstm.replace(parts["a_lstm"]),
            self.head.replace(parts["head"]),
        )

    def encode(self, q_ids, a_ids):
        q_ids = np.asarray(q_ids)
        a_ids = np.asarray(a_ids)
        expected = (self.config.max_len_q, self.config.max_len_a)
        if q_ids.ndim != 2 or a_ids.ndim != 2 or (q_ids.shape[1], a_ids.shape[1]) != expected:
            raise DimensionError(
                f"expected padded id matrices [B x {expected[0]}] and [B x {expected[1]}], "
                f"got {q_ids.shape} and {a_ids.shape}"
            )
        if q_ids.shape[0] != a_ids.shape[0] or q_ids.shape[0] < 1:
            raise DimensionError(f"question and answer batches differ: {q_ids.shape[0]} vs {a_ids.shape[0]}")
        q_state = lstm_encode(embed_steps(q_ids, self.embeddings), self.q_lstm)[-1]
        a_state = lstm_encode(embed_steps(a_ids, self.embeddings), self.a_lstm)[-1]
        return q_state, a_state

    def logits(self, q_ids, a_ids, x_feat=None, dropout_rng=None):
        """Two logits per pair ``[B x 2]``; column 1 is the relevant class.

        Dropout is applied only when ``dropout_rng`` is given.
        """
        q_state, a_state = self.encode(q_ids, a_ids)
        features = None if x_feat is None else constant(np.asarray(x_feat), dtype=self.dtype)
        rate = float(self.config.dropout_rate)
        train = dropout_rng is not None and rate > 0.0
        batch = q_state.shape[0]
        if self.config.architecture is Architecture.NTNLSTM:
            if train:
                q_state = mul(q_state, dropout_mask(q_state.shape, rate, dropout_rng, self.dtype))
                a_state = mul(a_state, dropout_mask(a_state.shape, rate, dropout_rng, self.dtype))
            return ntn_logits(q_state, a_state, self.head, features)
        mask = dropout_mask((batch, self.head.input_width), rate, dropout_rng, self.dtype) if train else None
        return head_logits(q_state, a_state, self.head, features, mask)

    def probabilities(self, q_ids, a_ids, x_feat=None, dropout_rng=None):
        return softmax_rows(self.logits(q_ids, a_ids, x_feat, dropout_rng))


def build_model(config, embeddings):
    config = config.resolved().validate()
    if embeddings.dim != config.embed_dim:
        raise ConfigError(f"embedding table has dimension {embeddings.dim} but the model expects {config.embed_dim}")
    dtype = dtype_for(config.precision)
    embeddings = embeddings.astype(dtype)
    rng = np.random.default_rng(config.seed)
    n, d = config.embed_dim, config.lstm_dim
    q_lstm = init_lstm_params(n, d, config.lstm_layers, rng, dtype)
    a_lstm = init_lstm_params(n, d, config.lstm_layers, rng, dtype)
    if config.architecture is Architecture.NTNLSTM:
        head = init_ntn_params(d, config.ntn_slices, rng, config.use_overlap_feats, dtype)
    else:
        head = init_head_params(
            d,
            config.hidden_dim,
            rng,
            composition="correlation" if config.architecture is Architecture.HDLSTM else "concatenation",
            use_bilinear_sim=config.use_bilinear_sim,
            use_overlap_feats=config.use_overlap_feats,
            activation=config.activation,
            dtype=dtype,
        )
    model = Model(config, embeddings, q_lstm, a_lstm, head)
    counts = count_parameters(model)
    logger.info(
        "Built %s model: head %d, LSTMs %d parameters",
        config.architecture.value,
        counts["head"],
        counts["q_lstm"] + counts["a_lstm"],
    )
    return model


def score_batch(model, q_ids, a_ids, x_feat=None):
    """Probability of relevance for each pair of a padded batch."""
    probabilities = model.probabilities(q_ids, a_ids, x_feat)
    return np.asarray(probabilities.data[:, 1], dtype=np.float64)


def score_pair(model, q_ids, a_ids, x_feat=None):
    features = None if x_feat is None else np.asarray(x_feat).reshape(1, OVERLAP_FEATURE_WIDTH)
    return float(score_batch(model, np.asarray(q_ids)[None, :], np.asarray(a_ids)[None, :], features)[0])


def _group_batches(encoded, batch_size):
    """Pair positions chunked so a query group never straddles two batches."""
    batches = []
    current = []
    for positions in encoded.groups().values():
        if current and len(current) + len(positions) > batch_size:
            batches.append(current)
            current = []
        current.extend(positions)
    if current:
        batches.append(current)
    return batches


def score_encoded(model, encoded, batch_size=256, workers=1):
    """Score every pair of an encoded dataset; returns scores in pair order.

    Batches hold whole query groups and may be scored on a bounded thread
    pool; results are written back by position so the output is identical
    for any worker count.
    """
    if batch_size < 1 or workers < 1:
        raise ConfigError("batch_size and workers must be positive")
    batches = _group_batches(encoded, batch_size)

    def run(positions):
        x_feat = None if encoded.x_feat is None else encoded.x_feat[positions]
        return score_batch(model, encoded.q_ids[positions], encoded.a_ids[positions], x_feat)

    scores = np.empty(len(encoded), dtype=np.float64)
    if workers == 1:
        results = map(run, batches)
    else:
        pool = concurrent.futures.ThreadPoolExecutor(max_workers=workers)
        with pool:
            results = list(pool.map(run, batches))
    for positions, values in zip(batches, results):
        scores[positions] = values
    return scores


def head_parameter_count(architecture, d, h=None, k=None, use_bilinear_sim=False, use_overlap_feats=False):
    """Closed-form head size, excluding embeddings and LSTMs."""
    architecture = Architecture.parse(architecture)
    feats = OVERLAP_FEATURE_WIDTH if use_overlap_feats else 0
    if architecture is Architecture.NTNLSTM:
        if k is None:
            raise ConfigError("the NTN head size needs the slice count k")
        return k * d * d + 2 * d * k + k + (k + feats) * 2 + 2
    if h is None:
        raise ConfigError("a dense head size needs the hidden size h")
    composed = d if architecture is Architecture.HDLSTM else 2 * d
    width = composed + (1 if use_bilinear_sim else 0) + feats
    total = width * h + h + 2 * h + 2
    if use_bilinear_sim:
        total += d * d
    return total


def table_formula(architecture, d, h=None, k=None):
    """Commonly quoted closed-form head sizes: 2dh + 4h and d^2k + 2dk + 2k.

    The holographic form overstates the real head (see head_parameter_count)
    and is kept only for comparison output.
    """
    architecture = Architecture.parse(architecture)
    if architecture is Architecture.NTNLSTM:
        return d * d * k + 2 * d * k + 2 * k
    if architecture is Architecture.HDLSTM:
        return 2 * d * h + 4 * h
    return None


def count_parameters(model):
    q_lstm = model.q_lstm.parameter_count()
    a_lstm = model.a_lstm.parameter_count()
    head = model.head.parameter_count()
    embedding = int(model.embeddings.matrix.size)
    return {
        "embedding": embedding,
        "q_lstm": q_lstm,
        "a_lstm": a_lstm,
        "head": head,
        "total": embedding + q_lstm + a_lstm + head,
    }
