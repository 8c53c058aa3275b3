"""QA datasets, vocabulary, pretrained embeddings and overlap features."""

import collections
import dataclasses
import json
import logging
import math
import re
from pathlib import Path

import numpy as np

from .constants import (
    CQA_MAX_TOKENS,
    CQA_MIN_TOKENS,
    DATASET_FIELDS,
    DATASET_FORMATS,
    OOV_INIT_RANGE,
    PAD_ID,
    PAD_TOKEN,
    STOPWORDS,
    UNK_ID,
    UNK_TOKEN,
)
from .bm25 import index_corpus, sample_negatives
from .exceptions import ConfigError, ContractError, DataFormatError
from .layers import EmbeddingTable

logger = logging.getLogger(__name__)

_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def tokenize(text):
    return _NON_ALNUM.sub(" ", str(text or "").lower()).split()


@dataclasses.dataclass(frozen=True)
class QAInstance:
    query_id: str
    question_tokens: tuple
    answer_tokens: tuple
    label: int
    candidate_id: str

    def __post_init__(self):
        object.__setattr__(self, "question_tokens", tuple(self.question_tokens))
        object.__setattr__(self, "answer_tokens", tuple(self.answer_tokens))
        if self.label not in (0, 1):
            raise DataFormatError(f"label must be 0 or 1, got {self.label!r}")
        for token in self.question_tokens + self.answer_tokens:
            if not token or token != token.lower():
                raise DataFormatError(f"tokens must be non-empty lowercase strings, got {token!r}")


@dataclasses.dataclass(frozen=True)
class QADataset:
    split: str
    instances: tuple

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        seen = set()
        for instance in self.instances:
            key = (instance.query_id, instance.candidate_id)
            if key in seen:
                raise DataFormatError(
                    f"duplicate candidate_id {instance.candidate_id!r} for query {instance.query_id!r}"
                )
            seen.add(key)

    def __len__(self):
        return len(self.instances)

    def groups(self):
        grouped = collections.OrderedDict()
        for instance in self.instances:
            grouped.setdefault(instance.query_id, []).append(instance)
        return grouped

    def label_groups(self):
        return {
            query_id: [(item.candidate_id, item.label) for item in items]
            for query_id, items in self.groups().items()
        }

    def documents(self):
        """Every distinct question and answer as a token list (IDF corpus)."""
        seen = set()
        documents = []
        for instance in self.instances:
            for tokens in (instance.question_tokens, instance.answer_tokens):
                if tokens not in seen:
                    seen.add(tokens)
                    documents.append(list(tokens))
        return documents


def dataset_statistics(dataset):
    questions = len(dataset.groups())
    pairs = len(dataset)
    correct = sum(instance.label for instance in dataset.instances)
    return {
        "split": dataset.split,
        "questions": questions,
        "pairs": pairs,
        "correct": correct,
        "pct_correct": round(100.0 * correct / pairs, 1) if pairs else 0.0,
    }


def _infer_format(path, data_format):
    if data_format:
        value = str(data_format).lower()
    else:
        value = Path(path).suffix.lstrip(".").lower()
    if value not in DATASET_FORMATS:
        raise DataFormatError(f"unknown dataset format {value!r}; expected one of {DATASET_FORMATS}", path=path)
    return value


def _parse_label(raw, path, line_number):
    try:
        label = int(str(raw).strip())
    except ValueError:
        raise DataFormatError(f"label {raw!r} is not an integer", path, line_number) from None
    if label not in (0, 1):
        raise DataFormatError(f"label must be 0 or 1, got {label}", path, line_number)
    return label


def _make_instance(record, path, line_number):
    question = tokenize(record["question"])
    answer = tokenize(record["answer"])
    if not question or not answer:
        raise DataFormatError("question and answer must contain at least one token", path, line_number)
    query_id = str(record["query_id"]).strip()
    candidate_id = str(record["candidate_id"]).strip()
    if not query_id or not candidate_id:
        raise DataFormatError("query_id and candidate_id must be non-empty", path, line_number)
    return QAInstance(
        query_id=query_id,
        question_tokens=question,
        answer_tokens=answer,
        label=_parse_label(record["label"], path, line_number),
        candidate_id=candidate_id,
    )


def load_dataset(path, data_format=None, split="train"):
    """Read a TSV or JSONL file of ``query_id, candidate_id, label, question, answer`` rows."""
    path = Path(path)
    data_format = _infer_format(path, data_format)
    instances = []
    with path.open(encoding="utf-8") as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            line = raw_line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if data_format == "tsv":
                columns = line.split("\t")
                if line_number == 1 and columns[0].strip().lower() == "query_id":
                    continue
                if len(columns) != len(DATASET_FIELDS):
                    raise DataFormatError(
                        f"expected {len(DATASET_FIELDS)} tab-separated columns, got {len(columns)}",
                        path,
                        line_number,
                    )
                record = dict(zip(DATASET_FIELDS, columns))
            else:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataFormatError(f"invalid JSON: {exc.msg}", path, line_number) from None
                if not isinstance(record, dict):
                    raise DataFormatError("each JSONL line must be an object", path, line_number)
                missing = [field for field in DATASET_FIELDS if field not in record]
                if missing:
                    raise DataFormatError(f"missing fields {missing}", path, line_number)
            try:
                instances.append(_make_instance(record, path, line_number))
            except DataFormatError as exc:
                if exc.line_number is None:
                    raise DataFormatError(str(exc), path, line_number) from None
                raise
    if not instances:
        raise DataFormatError("dataset file is empty", path=path)
    try:
        return QADataset(split=split, instances=instances)
    except DataFormatError as exc:
        raise DataFormatError(str(exc), path=path) from None


def write_dataset(dataset, path, data_format=None):
    path = Path(path)
    data_format = _infer_format(path, data_format)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for instance in dataset.instances:
            record = {
                "query_id": instance.query_id,
                "candidate_id": instance.candidate_id,
                "label": instance.label,
                "question": " ".join(instance.question_tokens),
                "answer": " ".join(instance.answer_tokens),
            }
            if data_format == "tsv":
                handle.write("\t".join(str(record[field]) for field in DATASET_FIELDS) + "\n")
            else:
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


class Vocabulary:
    """Token <-> id mapping with PAD at 0 and UNK at 1."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tokens[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ConfigError("vocabulary must start with the PAD and UNK tokens")
        if len(set(tokens)) != len(tokens):
            raise ConfigError("vocabulary tokens must be unique")
        self.tokens = tokens
        self.index = {token: position for position, token in enumerate(tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id_of(self, token):
        return self.index.get(token, UNK_ID)

    def encode(self, tokens):
        return [self.id_of(token) for token in tokens]

    def decode(self, ids):
        return [self.tokens[i] for i in ids if i != PAD_ID]


def build_vocabulary(*datasets):
    if not datasets:
        raise ContractError("build_vocabulary needs at least one dataset")
    counts = collections.Counter()
    for dataset in datasets:
        for instance in dataset.instances:
            counts.update(instance.question_tokens)
            counts.update(instance.answer_tokens)
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return Vocabulary([PAD_TOKEN, UNK_TOKEN] + [token for token, _count in ordered])


def _is_header(parts):
    return len(parts) == 2 and all(part.isdigit() for part in parts)


def load_pretrained_embeddings(path, vocab, dim=None, seed=1, dtype=np.float64):
    """Read a word2vec-style text file into a frozen table aligned with ``vocab``.

    Words missing from the file get uniform draws in [-0.25, 0.25] from
    ``seed``; the PAD row is always zero.
    """
    path = Path(path)
    found = {}
    file_dim = None
    with path.open(encoding="utf-8") as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            parts = raw_line.rstrip().split()
            if not parts:
                continue
            if line_number == 1 and _is_header(parts):
                continue
            token, values = parts[0], parts[1:]
            if file_dim is None:
                file_dim = len(values)
            if len(values) != file_dim or not values:
                raise DataFormatError(
                    f"expected {file_dim} values for {token!r}, got {len(values)}", path, line_number
                )
            if token not in vocab or token in found:
                continue
            try:
                found[token] = np.array([float(value) for value in values], dtype=np.float64)
            except ValueError:
                raise DataFormatError(f"non-numeric vector for {token!r}", path, line_number) from None
    if file_dim is None:
        raise DataFormatError("embedding file holds no vectors", path=path)
    if dim is not None and file_dim != dim:
        raise ConfigError(f"embedding file {path} has dimension {file_dim} but the model expects {dim}")

    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-OOV_INIT_RANGE, OOV_INIT_RANGE, size=(len(vocab), file_dim))
    for token, vector in found.items():
        matrix[vocab.index[token]] = vector
    matrix[PAD_ID] = 0.0
    logger.info("Loaded %d of %d vocabulary vectors from %s", len(found), len(vocab), path)
    return EmbeddingTable(matrix.astype(dtype))


def write_embeddings(tokens_and_vectors, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(tokens_and_vectors)
    with path.open("w", encoding="utf-8") as handle:
        if rows:
            handle.write(f"{len(rows)} {len(rows[0][1])}\n")
        for token, vector in rows:
            handle.write(token + " " + " ".join(repr(float(value)) for value in vector) + "\n")
    return path


def encode_and_pad(tokens, vocab, max_len):
    if max_len < 1:
        raise ConfigError(f"max_len must be at least 1, got {max_len}")
    ids = vocab.encode(list(tokens)[:max_len])
    return ids + [PAD_ID] * (max_len - len(ids))


@dataclasses.dataclass(frozen=True)
class IdfTable:
    document_count: int
    document_frequency: dict

    def idf(self, token):
        df = self.document_frequency.get(token, 0)
        return math.log((self.document_count + 1) / (df + 1)) + 1.0

    @property
    def max_idf(self):
        return math.log(self.document_count + 1) + 1.0

    def to_dict(self):
        return {"document_count": self.document_count, "document_frequency": dict(self.document_frequency)}

    @classmethod
    def from_dict(cls, payload):
        return cls(int(payload["document_count"]), dict(payload["document_frequency"]))


def compute_idf(documents):
    """Smoothed idf(t) = ln((N + 1) / (df(t) + 1)) + 1 over token-list documents."""
    documents = list(documents)
    if not documents:
        raise ContractError("compute_idf needs at least one document")
    frequency = collections.Counter()
    for document in documents:
        frequency.update(set(document))
    return IdfTable(len(documents), dict(frequency))


def load_stopwords(path=None):
    if path is None:
        return STOPWORDS
    path = Path(path)
    words = set()
    for raw_line in path.read_text(encoding="utf-8").splitlines():
        word = raw_line.strip().lower()
        if word and not word.startswith("#"):
            words.add(word)
    return frozenset(words)


def overlap_features(question_tokens, answer_tokens, idf, stopwords=STOPWORDS, normalize=True):
    """Word-overlap features on unique tokens.

    [raw overlap, idf overlap, raw overlap without stopwords, idf overlap
    without stopwords]; with ``normalize`` each feature is divided by
    |q_unique| + |a_unique| of the token sets it was computed on.
    """
    question = set(question_tokens)
    answer = set(answer_tokens)
    features = []
    for drop_stopwords in (False, True):
        q_set = question - stopwords if drop_stopwords else question
        a_set = answer - stopwords if drop_stopwords else answer
        shared = q_set & a_set
        raw = float(len(shared))
        weighted = sum(idf.idf(token) for token in sorted(shared))
        if normalize:
            total = len(q_set) + len(a_set)
            raw = raw / total if total else 0.0
            weighted = weighted / total if total else 0.0
        features.extend([raw, weighted])
    return np.array(features, dtype=np.float64)


@dataclasses.dataclass(frozen=True, eq=False)
class EncodedDataset:
    """Padded id matrices for every pair of a dataset, in file order."""

    query_ids: tuple
    candidate_ids: tuple
    q_ids: np.ndarray
    a_ids: np.ndarray
    labels: np.ndarray
    x_feat: object = None

    def __len__(self):
        return len(self.query_ids)

    def groups(self):
        grouped = collections.OrderedDict()
        for position, query_id in enumerate(self.query_ids):
            grouped.setdefault(query_id, []).append(position)
        return grouped

    def take(self, positions):
        positions = np.asarray(positions, dtype=np.int64)
        return EncodedDataset(
            query_ids=tuple(self.query_ids[i] for i in positions),
            candidate_ids=tuple(self.candidate_ids[i] for i in positions),
            q_ids=self.q_ids[positions],
            a_ids=self.a_ids[positions],
            labels=self.labels[positions],
            x_feat=None if self.x_feat is None else self.x_feat[positions],
        )


def encode_dataset(dataset, vocab, max_len_q, max_len_a, idf=None, stopwords=STOPWORDS, with_features=False):
    if with_features and idf is None:
        raise ConfigError("overlap features need an idf table")
    instances = dataset.instances
    x_feat = None
    if with_features:
        x_feat = np.stack(
            [overlap_features(i.question_tokens, i.answer_tokens, idf, stopwords) for i in instances]
        )
    return EncodedDataset(
        query_ids=tuple(i.query_id for i in instances),
        candidate_ids=tuple(i.candidate_id for i in instances),
        q_ids=np.array([encode_and_pad(i.question_tokens, vocab, max_len_q) for i in instances], dtype=np.int64),
        a_ids=np.array([encode_and_pad(i.answer_tokens, vocab, max_len_a) for i in instances], dtype=np.int64),
        labels=np.array([i.label for i in instances], dtype=np.int64),
        x_feat=x_feat,
    )


def filter_by_length(pairs, min_len=CQA_MIN_TOKENS, max_len=CQA_MAX_TOKENS):
    """Keep (query_id, question_tokens, answer_tokens) pairs whose sides have min..max tokens."""
    return [
        (query_id, question, answer)
        for query_id, question, answer in pairs
        if min_len <= len(question) <= max_len and min_len <= len(answer) <= max_len
    ]


def build_cqa_dataset(pairs, negatives=4, pool_size=1000, seed=1, split="train", sampler="uniform", k1=1.2, b=0.75):
    """Turn (question, best answer) pairs into one-positive groups with BM25 negatives.

    Each answer is indexed under its own query id; a question's negatives
    are answers of other questions drawn from its top BM25 hits.
    """
    pairs = list(pairs)
    answers = {query_id: list(answer) for query_id, _question, answer in pairs}
    index = index_corpus(answers.items())
    instances = []
    for offset, (query_id, question, answer) in enumerate(pairs):
        instances.append(QAInstance(query_id, question, answer, 1, query_id))
        chosen = sample_negatives(
            question,
            query_id,
            index,
            pool_size=pool_size,
            k=negatives,
            seed=seed + offset,
            sampler=sampler,
            k1=k1,
            b=b,
        )
        for doc_id in chosen:
            instances.append(QAInstance(query_id, question, answers[doc_id], 0, doc_id))
    return QADataset(split=split, instances=instances)
