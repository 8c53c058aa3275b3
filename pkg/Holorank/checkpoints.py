"""Versioned ``.npz`` checkpoints: parameters, frozen embeddings and a JSON meta record."""

import dataclasses
import json
import logging
import zipfile
from pathlib import Path

import numpy as np

from .architectures import ModelConfig, build_model
from .constants import MIN_VOCABULARY_COVERAGE, STOPWORDS
from .data import IdfTable, Vocabulary, encode_dataset
from .exceptions import CheckpointError, ConfigError, ContractError, DimensionError, VocabularyError
from .layers import EmbeddingTable

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PARAM_PREFIX = "param/"


@dataclasses.dataclass(frozen=True, eq=False)
class Checkpoint:
    model: object
    vocab: object = None
    idf: object = None
    stopwords: object = None
    epoch: object = None
    dev_map: object = None


def save_checkpoint(path, model, vocab=None, idf=None, stopwords=None, epoch=None, dev_map=None):
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "vocab": None if vocab is None else list(vocab.tokens),
        "idf": None if idf is None else idf.to_dict(),
        "stopwords": None if stopwords is None else sorted(stopwords),
        "epoch": epoch,
        "dev_map": dev_map,
    }
    arrays = {PARAM_PREFIX + name: tensor.data for name, tensor in model.parameters().items()}
    arrays["embedding"] = model.embeddings.matrix
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with path.open("wb") as handle:
        np.savez(handle, **arrays)
    return path


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {key: archive[key] for key in archive.files}
    except (zipfile.BadZipFile, ValueError, OSError) as exc:
        raise CheckpointError(f"{path} is not a readable checkpoint: {exc}") from None
    if "meta" not in arrays or "embedding" not in arrays:
        raise CheckpointError(f"{path} lacks the meta record or the embedding matrix")
    try:
        meta = json.loads(str(arrays["meta"]))
    except json.JSONDecodeError:
        raise CheckpointError(f"{path} has a corrupt meta record") from None
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} has format version {version!r}; this build reads version {FORMAT_VERSION}")

    try:
        config = ModelConfig.from_dict(meta["config"])
        skeleton = build_model(config, EmbeddingTable(arrays["embedding"]))
        params = {
            key[len(PARAM_PREFIX):]: value for key, value in arrays.items() if key.startswith(PARAM_PREFIX)
        }
        model = skeleton.with_parameters(params)
    except (ConfigError, ContractError, DimensionError) as exc:
        raise CheckpointError(f"{path} does not match its recorded config: {exc}") from None

    vocab = None if meta.get("vocab") is None else Vocabulary(meta["vocab"])
    if vocab is not None and len(vocab) != model.embeddings.vocab_size:
        raise CheckpointError(f"{path}: vocabulary of {len(vocab)} tokens does not match the embedding rows")
    return Checkpoint(
        model=model,
        vocab=vocab,
        idf=None if meta.get("idf") is None else IdfTable.from_dict(meta["idf"]),
        stopwords=None if meta.get("stopwords") is None else frozenset(meta["stopwords"]),
        epoch=meta.get("epoch"),
        dev_map=meta.get("dev_map"),
    )


def encode_for_checkpoint(checkpoint, dataset):
    """Encode ``dataset`` with the vocabulary, lengths and feature tables the checkpoint was trained with."""
    config = checkpoint.model.config
    if checkpoint.vocab is None:
        raise CheckpointError("checkpoint carries no vocabulary; it cannot encode raw text")
    if config.use_overlap_feats and checkpoint.idf is None:
        raise CheckpointError("checkpoint uses overlap features but carries no idf table")
    return encode_dataset(
        dataset,
        checkpoint.vocab,
        config.max_len_q,
        config.max_len_a,
        idf=checkpoint.idf,
        stopwords=checkpoint.stopwords if checkpoint.stopwords is not None else STOPWORDS,
        with_features=config.use_overlap_feats,
    )


def check_vocabulary_coverage(checkpoint, dataset, min_coverage=MIN_VOCABULARY_COVERAGE):
    """Share of the dataset's token occurrences the checkpoint vocabulary knows.

    Raises VocabularyError below ``min_coverage``: the dataset was most
    likely prepared for a different model and would be scored mostly as UNK.
    """
    if checkpoint.vocab is None:
        raise CheckpointError("checkpoint carries no vocabulary; it cannot encode raw text")
    known = 0
    total = 0
    unknown = set()
    for instance in dataset.instances:
        for token in instance.question_tokens + instance.answer_tokens:
            total += 1
            if token in checkpoint.vocab:
                known += 1
            else:
                unknown.add(token)
    coverage = known / total if total else 1.0
    if coverage < min_coverage:
        sample = ", ".join(sorted(unknown)[:5])
        raise VocabularyError(
            f"checkpoint vocabulary covers {coverage:.1%} of the dataset tokens "
            f"(minimum {min_coverage:.0%}); unknown tokens include {sample}"
        )
    if unknown:
        logger.warning("%d dataset token types are not in the checkpoint vocabulary and map to UNK", len(unknown))
    return coverage
