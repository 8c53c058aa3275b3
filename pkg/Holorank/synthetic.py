"""A separable toy QA corpus for end-to-end sanity runs.

Every question holds three content tokens. Its positive answer repeats two
or three of them among filler; its negatives are BM25-sampled answers of
other questions that share none of the question's content tokens. Common
stopwords appear on both sides so BM25 still ranks the negatives.
"""

import numpy as np

from .bm25 import index_corpus, sample_negatives
from .constants import PAD_TOKEN, UNK_TOKEN
from .data import QADataset, QAInstance, write_embeddings

CONTENT_VOCABULARY_SIZE = 240
QUESTION_CONTENT_TOKENS = 3
ANSWER_FILLER_TOKENS = 3
QUESTION_STOPWORDS = ("what", "is", "the")
ANSWER_STOPWORDS = ("the", "is", "of", "a")


def content_token(index):
    return f"t{index:03d}"


def _make_split(split, questions, negatives, rng, seed):
    vocabulary = np.arange(CONTENT_VOCABULARY_SIZE)
    records = []
    for number in range(questions):
        content = rng.choice(vocabulary, size=QUESTION_CONTENT_TOKENS, replace=False)
        kept = int(rng.integers(2, QUESTION_CONTENT_TOKENS + 1))
        others = np.setdiff1d(vocabulary, content)
        filler = rng.choice(others, size=ANSWER_FILLER_TOKENS, replace=False)
        answer_content = list(rng.permutation(np.concatenate([content[:kept], filler])))
        question = list(QUESTION_STOPWORDS) + [content_token(i) for i in content]
        answer = [ANSWER_STOPWORDS[0]] + [content_token(i) for i in answer_content] + list(ANSWER_STOPWORDS[1:])
        records.append((f"{split}-q{number:04d}", question, answer, {content_token(i) for i in content}))

    index = index_corpus((query_id, answer) for query_id, _question, answer, _content in records)
    answers = {query_id: answer for query_id, _question, answer, _content in records}
    answer_sets = {query_id: set(answer) for query_id, answer in answers.items()}
    instances = []
    for offset, (query_id, question, answer, content) in enumerate(records):
        instances.append(QAInstance(query_id, question, answer, 1, query_id))
        overlapping = [other for other, tokens in answer_sets.items() if tokens & content]
        chosen = sample_negatives(
            question,
            query_id,
            index,
            k=negatives,
            seed=seed + offset,
            exclude_ids=overlapping,
        )
        for doc_id in chosen:
            instances.append(QAInstance(query_id, question, answers[doc_id], 0, doc_id))
    return QADataset(split=split, instances=instances)


def make_synthetic_corpus(train_questions=500, dev_questions=100, test_questions=100, negatives=4, seed=1):
    rng = np.random.default_rng(seed)
    sizes = {"train": train_questions, "dev": dev_questions, "test": test_questions}
    return {
        split: _make_split(split, count, negatives, rng, seed * 100003 + position * 10007)
        for position, (split, count) in enumerate(sizes.items())
    }


def write_synthetic_embeddings(tokens, path, dim=50, seed=1):
    """Random vectors for every real token; PAD and UNK are left to the loader."""
    rng = np.random.default_rng(seed)
    rows = [(token, rng.normal(0.0, 0.5, size=dim)) for token in tokens if token not in (PAD_TOKEN, UNK_TOKEN)]
    return write_embeddings(rows, path)
