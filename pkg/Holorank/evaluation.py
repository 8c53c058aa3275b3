"""MAP, MRR and P@1 over ranked runs, plus trec_eval run and qrels files.

Queries without a positive label are left out of every metric and counted
as skipped, the way trec_eval treats unjudged topics.
"""

import collections
import dataclasses
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError, EmptyRunError


@dataclasses.dataclass(frozen=True)
class RankedCandidate:
    candidate_id: str
    score: float
    label: object = None


@dataclasses.dataclass(frozen=True, eq=False)
class RankedRun:
    """Per query, candidates in rank order. Scores never increase down a list."""

    queries: dict
    tag: str = "holorank"

    def __post_init__(self):
        queries = collections.OrderedDict()
        for query_id, candidates in self.queries.items():
            candidates = tuple(candidates)
            ids = [candidate.candidate_id for candidate in candidates]
            if len(set(ids)) != len(ids):
                raise DataFormatError(f"query {query_id!r} lists a candidate id twice")
            for upper, lower in zip(candidates, candidates[1:]):
                if lower.score > upper.score:
                    raise DataFormatError(f"scores for query {query_id!r} are not in rank order")
            queries[query_id] = candidates
        object.__setattr__(self, "queries", queries)

    def __len__(self):
        return len(self.queries)

    def labels(self, query_id):
        return [candidate.label for candidate in self.queries[query_id]]


def build_run(rows, tag="holorank"):
    """Group ``(query_id, candidate_id, score, label)`` rows into a run.

    Queries keep their first-seen order; candidates are sorted by score
    descending, then candidate id ascending.
    """
    grouped = collections.OrderedDict()
    for query_id, candidate_id, score, label in rows:
        grouped.setdefault(str(query_id), []).append(
            RankedCandidate(str(candidate_id), float(score), None if label is None else int(label))
        )
    for query_id, candidates in grouped.items():
        candidates.sort(key=lambda candidate: (-candidate.score, candidate.candidate_id))
    return RankedRun(grouped, tag)


def run_from_scores(encoded, scores, tag="holorank"):
    """Ranked run for an encoded dataset given one score per pair, in pair order."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(encoded),):
        raise DataFormatError(f"expected {len(encoded)} scores, got shape {scores.shape}")
    rows = zip(encoded.query_ids, encoded.candidate_ids, scores.tolist(), encoded.labels.tolist())
    return build_run(rows, tag)


def _judged(run):
    if not len(run):
        raise EmptyRunError("run holds no queries")
    judged = []
    for query_id in run.queries:
        labels = run.labels(query_id)
        if any(labels):
            judged.append(labels)
    if not judged:
        raise EmptyRunError("no query in the run has a positive label")
    return judged


def average_precision(labels):
    hits = 0
    total = 0.0
    for rank, label in enumerate(labels, start=1):
        if label:
            hits += 1
            total += hits / rank
    return total / hits if hits else 0.0


def reciprocal_rank(labels):
    for rank, label in enumerate(labels, start=1):
        if label:
            return 1.0 / rank
    return 0.0


def mean_average_precision(run):
    judged = _judged(run)
    return sum(average_precision(labels) for labels in judged) / len(judged)


def mean_reciprocal_rank(run):
    judged = _judged(run)
    return sum(reciprocal_rank(labels) for labels in judged) / len(judged)


def precision_at_1(run):
    judged = _judged(run)
    return sum(1.0 for labels in judged if labels[0]) / len(judged)


def evaluate_run(run):
    judged = _judged(run)
    return {
        "map": mean_average_precision(run),
        "mrr": mean_reciprocal_rank(run),
        "p_at_1": precision_at_1(run),
        "queries": len(judged),
        "skipped_queries": len(run) - len(judged),
    }


def _check_token(value, what):
    if not value or any(ch.isspace() for ch in value):
        raise DataFormatError(f"{what} {value!r} must be non-empty and free of whitespace")


def write_run_file(run, path):
    """Write ``query_id Q0 candidate_id rank score tag`` lines, rank from 1."""
    _check_token(run.tag, "run tag")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for query_id, candidates in run.queries.items():
            _check_token(query_id, "query id")
            for rank, candidate in enumerate(candidates, start=1):
                _check_token(candidate.candidate_id, "candidate id")
                handle.write(f"{query_id} Q0 {candidate.candidate_id} {rank} {candidate.score:.6f} {run.tag}\n")
    return path


def read_run_file(path, qrels=None):
    """Parse a run file back, keeping the written rank order.

    Labels come from ``qrels`` (``{query_id: {candidate_id: label}}``) when
    given; unjudged candidates count as non-relevant.
    """
    path = Path(path)
    grouped = collections.OrderedDict()
    tag = None
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise DataFormatError(f"expected 6 fields, got {len(parts)}", path, line_number)
            query_id, _q0, candidate_id, rank, score, line_tag = parts
            try:
                rank = int(rank)
                score = float(score)
            except ValueError:
                raise DataFormatError("rank must be an integer and score a number", path, line_number) from None
            label = None
            if qrels is not None:
                label = int(qrels.get(query_id, {}).get(candidate_id, 0))
            grouped.setdefault(query_id, []).append((rank, RankedCandidate(candidate_id, score, label)))
            tag = tag or line_tag
    queries = collections.OrderedDict(
        (query_id, [candidate for _rank, candidate in sorted(entries, key=lambda entry: entry[0])])
        for query_id, entries in grouped.items()
    )
    if not queries:
        raise DataFormatError("run file is empty", path=path)
    return RankedRun(queries, tag)


def write_qrels(label_groups, path):
    """Write ``query_id 0 candidate_id label`` lines from ``{query_id: [(candidate_id, label)]}``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for query_id, pairs in label_groups.items():
            for candidate_id, label in pairs:
                handle.write(f"{query_id} 0 {candidate_id} {int(label)}\n")
    return path


def read_qrels(path):
    path = Path(path)
    qrels = collections.OrderedDict()
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataFormatError(f"expected 4 fields, got {len(parts)}", path, line_number)
            try:
                label = int(parts[3])
            except ValueError:
                raise DataFormatError(f"label {parts[3]!r} is not an integer", path, line_number) from None
            qrels.setdefault(parts[0], {})[parts[2]] = label
    return qrels


def random_guess_run(label_groups, seed=1, tag="random"):
    """Baseline that orders each group by a seeded random permutation."""
    rng = np.random.default_rng(seed)
    queries = collections.OrderedDict()
    for query_id, pairs in label_groups.items():
        order = rng.permutation(len(pairs))
        queries[str(query_id)] = [
            RankedCandidate(str(pairs[i][0]), float(len(pairs) - rank), int(pairs[i][1]))
            for rank, i in enumerate(order)
        ]
    return RankedRun(queries, tag)
