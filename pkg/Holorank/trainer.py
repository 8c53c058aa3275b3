"""Pointwise training: summed cross-entropy + L2, clipped Adam, dev-MAP early stopping."""

import dataclasses
import json
import logging
import math
import time
from pathlib import Path

import numpy as np

from .architectures import score_encoded
from .checkpoints import save_checkpoint
from .evaluation import evaluate_run, run_from_scores
from .exceptions import ConfigError, ContractError, DimensionError, DivergenceError, NumericError
from .tensor import Tape, add, backward, clamp, constant, log, mul, scale, sub, take_column, zero_grad
from .tensor import sum as tensor_sum

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-7
TRAIN_LOG_NAME = "train_log.jsonl"


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    l2_lambda: float = 1e-5
    clip_norm: float = 1.0
    batch_size: int = 256
    max_epochs: int = 30
    patience: int = 5
    keep_top_k: int = 3
    seed: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    workers: int = 1

    def validate(self):
        for name in ("batch_size", "max_epochs", "patience", "keep_top_k", "workers"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.patience > self.max_epochs:
            raise ConfigError(f"patience ({self.patience}) cannot exceed max_epochs ({self.max_epochs})")
        if self.learning_rate < 0 or self.l2_lambda < 0:
            raise ConfigError("learning_rate and l2_lambda cannot be negative")
        if self.clip_norm <= 0 or self.epsilon <= 0:
            raise ConfigError("clip_norm and epsilon must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, payload):
        known = {field.name for field in dataclasses.fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"unknown training settings: {', '.join(unknown)}")
        return cls(**payload)


@dataclasses.dataclass(frozen=True)
class OptimizerState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def zeros(cls, params):
        return cls(
            m={name: np.zeros(np.shape(value), dtype=np.float64) for name, value in params.items()},
            v={name: np.zeros(np.shape(value), dtype=np.float64) for name, value in params.items()},
        )


@dataclasses.dataclass(frozen=True, eq=False)
class KeptCheckpoint:
    epoch: int
    dev_map: float
    dev_mrr: float
    params: dict
    path: object = None
    test_metrics: object = None


@dataclasses.dataclass(frozen=True, eq=False)
class TrainingResult:
    model: object
    checkpoints: tuple
    log: tuple
    stopped_epoch: int
    stop_reason: str

    @property
    def best(self):
        return self.checkpoints[0]

    @property
    def best_test_map(self):
        scores = [kept.test_metrics["map"] for kept in self.checkpoints if kept.test_metrics]
        return max(scores) if scores else None


def loss(pos_probs, labels, params, l2_lambda):
    """-sum[y log a + (1 - y) log(1 - a)] + lambda * ||theta||^2, summed over the batch."""
    labels = np.asarray(labels)
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise ContractError("labels must be 0 or 1")
    probs = pos_probs if hasattr(pos_probs, "data") else constant(pos_probs)
    if tuple(probs.shape) != labels.shape:
        raise DimensionError(f"predictions of shape {probs.shape} do not match labels of shape {labels.shape}")
    probs = clamp(probs, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
    y = constant(labels.astype(probs.dtype))
    ones = constant(np.ones(labels.shape, dtype=probs.dtype))
    log_likelihood = add(mul(y, log(probs)), mul(sub(ones, y), log(sub(ones, probs))))
    total = scale(tensor_sum(log_likelihood), -1.0)
    if l2_lambda:
        for tensor in params:
            total = add(total, scale(tensor_sum(mul(tensor, tensor)), l2_lambda))
    return total


def global_norm(grads):
    return math.sqrt(float(np.sum([np.sum(np.square(g, dtype=np.float64)) for g in grads.values()])))


def clip_gradients(grads, max_norm=1.0):
    """Rescale every gradient by max_norm / g when the global norm g exceeds max_norm."""
    if max_norm <= 0:
        raise ConfigError(f"max_norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if not math.isfinite(norm):
        raise NumericError(f"gradient norm is {norm}")
    if norm <= max_norm:
        return dict(grads), norm
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}, norm


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, epsilon=1e-8):
    """One bias-corrected Adam update; returns (new params, new state)."""
    step = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        value = np.asarray(value)
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != value.shape or state.m[name].shape != value.shape:
            raise DimensionError(f"{name}: parameter {value.shape}, gradient {grad.shape}, moment {state.m[name].shape}")
        m = beta1 * state.m[name] + (1.0 - beta1) * grad
        v = beta2 * state.v[name] + (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        updated = value.astype(np.float64) - lr * m_hat / (np.sqrt(v_hat) + epsilon)
        new_params[name] = updated.astype(value.dtype)
        new_m[name] = m
        new_v[name] = v
    return new_params, OptimizerState(new_m, new_v, step)


def batch_loss(model, batch, l2_lambda, dropout_rng=None):
    """Forward pass on the active tape; returns the scalar loss tensor."""
    probs = model.probabilities(batch.q_ids, batch.a_ids, batch.x_feat, dropout_rng)
    return loss(take_column(probs, 1), batch.labels, model.parameters().values(), l2_lambda)


def train_step(model, batch, state, config, dropout_rng=None):
    """Forward, backward, clip and Adam on one batch; returns (model, state, loss, grad norm)."""
    params = model.parameters()
    zero_grad(params.values())
    with Tape():
        total = batch_loss(model, batch, config.l2_lambda, dropout_rng)
    value = float(total.item())
    if not math.isfinite(value):
        raise DivergenceError(f"loss became {value}")
    backward(total)
    grads = {
        name: tensor.grad if tensor.grad is not None else np.zeros(tensor.shape, dtype=tensor.dtype)
        for name, tensor in params.items()
    }
    clipped, norm = clip_gradients(grads, config.clip_norm)
    arrays = {name: tensor.data for name, tensor in params.items()}
    updated, state = adam_step(arrays, clipped, state, config.learning_rate, config.beta1, config.beta2, config.epsilon)
    return model.with_parameters(updated), state, value, norm


def evaluate_model(model, encoded, workers=1, batch_size=256, tag="holorank"):
    scores = score_encoded(model, encoded, batch_size=batch_size, workers=workers)
    run = run_from_scores(encoded, scores, tag)
    return run, evaluate_run(run)


def _has_positive_group(encoded):
    return any(encoded.labels[positions].any() for positions in encoded.groups().values())


def _checkpoint_path(out_dir, epoch):
    return Path(out_dir) / "checkpoints" / f"epoch_{epoch:03d}.npz"


def train(
    model,
    train_encoded,
    dev_encoded,
    config,
    out_dir=None,
    on_epoch=None,
    test_encoded=None,
    checkpoint_context=None,
):
    """Train until dev MAP stops improving for ``patience`` epochs or ``max_epochs`` pass.

    The ``keep_top_k`` best epoch-end snapshots by dev MAP are kept (ties go
    to the earlier epoch); with ``out_dir`` they are also saved as
    checkpoints, and checkpoints that fall out of the top are deleted.
    """
    config = config.validate()
    if not len(train_encoded):
        raise ConfigError("training set is empty")
    if not len(dev_encoded) or not _has_positive_group(dev_encoded):
        raise ConfigError("development set needs at least one query with a positive answer")
    context = dict(checkpoint_context or {})

    shuffle_rng, dropout_rng = np.random.default_rng(config.seed).spawn(2)
    state = OptimizerState.zeros({name: tensor.data for name, tensor in model.parameters().items()})
    kept = []
    records = []
    best_map = -math.inf
    stale = 0
    stop_reason = "max_epochs"
    epoch = 0

    log_handle = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_handle = (out_dir / TRAIN_LOG_NAME).open("w", encoding="utf-8")

    try:
        for epoch in range(1, config.max_epochs + 1):
            started = time.perf_counter()
            order = shuffle_rng.permutation(len(train_encoded))
            epoch_loss = 0.0
            for batch_number, start in enumerate(range(0, len(order), config.batch_size), start=1):
                batch = train_encoded.take(order[start:start + config.batch_size])
                try:
                    model, state, value, _norm = train_step(model, batch, state, config, dropout_rng)
                except NumericError as exc:
                    raise DivergenceError(f"training diverged at epoch {epoch}, batch {batch_number}: {exc}") from exc
                epoch_loss += value

            _run, metrics = evaluate_model(model, dev_encoded, config.workers, config.batch_size)
            snapshot = KeptCheckpoint(
                epoch=epoch,
                dev_map=metrics["map"],
                dev_mrr=metrics["mrr"],
                params={name: tensor.data for name, tensor in model.parameters().items()},
            )
            kept, dropped = _update_kept(kept, snapshot, config.keep_top_k)
            if out_dir is not None:
                kept = [_saved(entry, model, out_dir, context) if entry is snapshot else entry for entry in kept]
                for entry in dropped:
                    if entry.path is not None and Path(entry.path).exists():
                        Path(entry.path).unlink()
            saved = next((entry for entry in kept if entry.epoch == epoch), None)

            record = {
                "epoch": epoch,
                "loss": epoch_loss,
                "dev_map": metrics["map"],
                "dev_mrr": metrics["mrr"],
                "wall_seconds": round(time.perf_counter() - started, 3),
                "checkpoint": None if saved is None or saved.path is None else str(saved.path),
            }
            records.append(record)
            if log_handle is not None:
                log_handle.write(json.dumps(record, sort_keys=True) + "\n")
                log_handle.flush()
            logger.info(
                "Epoch %d: loss %.6f, dev MAP %.4f, dev MRR %.4f", epoch, epoch_loss, metrics["map"], metrics["mrr"]
            )
            if on_epoch is not None:
                on_epoch(record)

            if metrics["map"] > best_map:
                best_map = metrics["map"]
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    stop_reason = "patience"
                    break
    finally:
        if log_handle is not None:
            log_handle.close()

    if test_encoded is not None and len(test_encoded):
        kept = [
            dataclasses.replace(
                entry,
                test_metrics=evaluate_model(
                    model.with_parameters(entry.params), test_encoded, config.workers, config.batch_size
                )[1],
            )
            for entry in kept
        ]
    best_model = model.with_parameters(kept[0].params)
    logger.info("Stopped after epoch %d (%s); best dev MAP %.4f", epoch, stop_reason, kept[0].dev_map)
    return TrainingResult(
        model=best_model,
        checkpoints=tuple(kept),
        log=tuple(records),
        stopped_epoch=epoch,
        stop_reason=stop_reason,
    )


def _update_kept(kept, snapshot, limit):
    ranked = sorted(kept + [snapshot], key=lambda entry: (-entry.dev_map, entry.epoch))
    return ranked[:limit], ranked[limit:]


def _saved(entry, model, out_dir, context):
    path = save_checkpoint(
        _checkpoint_path(out_dir, entry.epoch),
        model,
        vocab=context.get("vocab"),
        idf=context.get("idf"),
        stopwords=context.get("stopwords"),
        epoch=entry.epoch,
        dev_map=entry.dev_map,
    )
    return dataclasses.replace(entry, path=str(path))
