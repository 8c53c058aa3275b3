"""Okapi BM25 over an in-memory inverted index.

Used twice: as the lexical baseline ranker and as the source of hard
negatives when community-QA groups are assembled.
"""

import collections
import dataclasses
import logging
import math

import numpy as np

from .evaluation import build_run
from .exceptions import ConfigError, DataFormatError, UnknownDocumentError

logger = logging.getLogger(__name__)

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


@dataclasses.dataclass(frozen=True, eq=False)
class InvertedIndex:
    postings: dict
    term_counts: dict
    lengths: dict
    doc_ids: tuple

    @property
    def document_count(self):
        return len(self.doc_ids)

    @property
    def avgdl(self):
        return sum(self.lengths.values()) / len(self.lengths)

    def document_frequency(self, term):
        return len(self.postings.get(term, ()))

    def idf(self, term):
        n = self.document_count
        df = self.document_frequency(term)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def index_corpus(documents):
    """Build an index from ``(doc_id, tokens)`` pairs or a mapping of them."""
    if hasattr(documents, "items"):
        documents = documents.items()
    postings = collections.defaultdict(list)
    term_counts = {}
    lengths = {}
    for doc_id, tokens in documents:
        if doc_id in term_counts:
            raise DataFormatError(f"duplicate document id {doc_id!r}")
        tokens = list(tokens)
        counts = collections.Counter(tokens)
        term_counts[doc_id] = counts
        lengths[doc_id] = len(tokens)
        for term, tf in counts.items():
            postings[term].append((doc_id, tf))
    if not term_counts:
        raise ConfigError("cannot index an empty corpus")
    doc_ids = tuple(sorted(term_counts))
    ordered = {term: tuple(sorted(entries)) for term, entries in sorted(postings.items())}
    return InvertedIndex(postings=ordered, term_counts=term_counts, lengths=lengths, doc_ids=doc_ids)


def bm25_score(query_tokens, doc_id, index, k1=DEFAULT_K1, b=DEFAULT_B):
    if doc_id not in index.term_counts:
        raise UnknownDocumentError(f"document {doc_id!r} is not in the index")
    counts = index.term_counts[doc_id]
    avgdl = index.avgdl
    norm = k1 * (1.0 - b + b * index.lengths[doc_id] / avgdl) if avgdl else k1
    score = 0.0
    for term in query_tokens:
        tf = counts.get(term, 0)
        if tf:
            score += index.idf(term) * tf * (k1 + 1.0) / (tf + norm)
    return score


def score_all(query_tokens, index, k1=DEFAULT_K1, b=DEFAULT_B):
    """Scores for every document that shares at least one term with the query."""
    touched = set()
    for term in set(query_tokens):
        touched.update(doc_id for doc_id, _tf in index.postings.get(term, ()))
    return {doc_id: bm25_score(query_tokens, doc_id, index, k1, b) for doc_id in touched}


def top_hits(query_tokens, index, pool_size=1000, k1=DEFAULT_K1, b=DEFAULT_B):
    """Positive-score hits as ``(doc_id, score)``, best first, ties by id ascending."""
    scored = [(doc_id, score) for doc_id, score in score_all(query_tokens, index, k1, b).items() if score > 0]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:pool_size]


def _uniform_sampler(pool, k, rng):
    picks = rng.choice(len(pool), size=k, replace=False)
    return [pool[i][0] for i in picks]


def _score_weighted_sampler(pool, k, rng):
    weights = np.array([score for _doc_id, score in pool], dtype=np.float64)
    picks = rng.choice(len(pool), size=k, replace=False, p=weights / weights.sum())
    return [pool[i][0] for i in picks]


NEGATIVE_SAMPLERS = {
    "uniform": _uniform_sampler,
    "score_weighted": _score_weighted_sampler,
}


def sample_negatives(
    question,
    gold_id,
    index,
    pool_size=1000,
    k=4,
    seed=1,
    sampler="uniform",
    k1=DEFAULT_K1,
    b=DEFAULT_B,
    exclude_ids=(),
):
    """Draw ``k`` distinct non-gold ids from the question's top BM25 hits.

    When the hit pool holds fewer than ``k`` usable ids, the remainder is
    drawn uniformly from the rest of the corpus. Returns ``min(k, available)``
    ids; raises only when no candidate other than the gold exists.
    """
    try:
        draw = NEGATIVE_SAMPLERS[sampler]
    except KeyError:
        raise ConfigError(f"unknown negative sampler {sampler!r}; expected one of {sorted(NEGATIVE_SAMPLERS)}") from None
    if k < 1 or pool_size < 1:
        raise ConfigError("k and pool_size must be positive")
    banned = set(exclude_ids)
    banned.add(gold_id)
    available = [doc_id for doc_id in index.doc_ids if doc_id not in banned]
    if not available:
        raise ConfigError(f"corpus of {index.document_count} documents has no negative for {gold_id!r}")

    rng = np.random.default_rng(seed)
    pool = [hit for hit in top_hits(question, index, pool_size + len(banned), k1, b) if hit[0] not in banned]
    pool = pool[:pool_size]
    if len(pool) >= k:
        return draw(pool, k, rng)

    chosen = [doc_id for doc_id, _score in pool]
    taken = set(chosen)
    rest = [doc_id for doc_id in available if doc_id not in taken]
    needed = min(k - len(chosen), len(rest))
    logger.warning(
        "BM25 pool for %r holds %d of %d negatives; drawing %d uniformly from the corpus",
        gold_id,
        len(chosen),
        k,
        needed,
    )
    if needed:
        chosen.extend(rest[i] for i in rng.choice(len(rest), size=needed, replace=False))
    return chosen


def bm25_run(dataset, k1=DEFAULT_K1, b=DEFAULT_B, tag="bm25"):
    """Rank each query group by BM25 of its question against its own candidates.

    The index covers every candidate answer in the dataset so idf reflects
    the whole answer collection.
    """
    index = index_corpus(
        ((instance.query_id, instance.candidate_id), instance.answer_tokens) for instance in dataset.instances
    )
    rows = []
    for instance in dataset.instances:
        doc_id = (instance.query_id, instance.candidate_id)
        score = bm25_score(instance.question_tokens, doc_id, index, k1, b)
        rows.append((instance.query_id, instance.candidate_id, score, instance.label))
    return build_run(rows, tag)
