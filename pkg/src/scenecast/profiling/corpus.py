"""Users as documents whose words are the categories of the venues they review."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..errors import ProfilingError
from ..ingest import Dataset


@dataclass
class Corpus:
    """Bag-of-category documents, one per user.

    Documents are kept sorted by user id and tokens sorted within each
    document, so downstream sampling does not depend on input order.
    """

    documents: list[tuple[str, list[str]]]
    vocabulary: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.documents = sorted((uid, sorted(toks)) for uid, toks in self.documents)
        for uid, toks in self.documents:
            if not toks:
                raise ProfilingError(f"document for user {uid} is empty")
        if not self.vocabulary:
            vocab = sorted({t for _, toks in self.documents for t in toks})
            self.vocabulary = {t: i for i, t in enumerate(vocab)}
        missing = {t for _, toks in self.documents for t in toks} - self.vocabulary.keys()
        if missing:
            raise ProfilingError(f"tokens missing from vocabulary: {sorted(missing)[:5]}")

    def __len__(self):
        return len(self.documents)

    @property
    def user_ids(self) -> list[str]:
        return [uid for uid, _ in self.documents]

    @property
    def words(self) -> list[str]:
        return sorted(self.vocabulary, key=self.vocabulary.__getitem__)

    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """Token stream as (doc index, word index) arrays."""
        docs, words = [], []
        for d, (_, toks) in enumerate(self.documents):
            docs.extend([d] * len(toks))
            words.extend(self.vocabulary[t] for t in toks)
        return np.asarray(docs, dtype=np.int64), np.asarray(words, dtype=np.int64)

    def doc_word_sets(self) -> np.ndarray:
        """Boolean |D| x |V| incidence: word appears in document."""
        m = np.zeros((len(self.documents), len(self.vocabulary)), dtype=bool)
        for d, (_, toks) in enumerate(self.documents):
            m[d, [self.vocabulary[t] for t in toks]] = True
        return m


def build_documents(dataset: Dataset) -> Corpus:
    """One document per reviewing user; duplicate categories are kept."""
    bags: dict[str, list[str]] = defaultdict(list)
    for r in dataset.reviews:
        bags[r.user_id].extend(dataset.venues[r.venue_id].categories)
    docs = [(uid, toks) for uid, toks in bags.items() if toks]
    if not docs:
        raise ProfilingError("corpus is empty: no user has reviews in retained FSAs")
    return Corpus(docs)


def clean_token(token: str) -> str:
    """Lowercase, drop digits and punctuation, join words with underscores."""
    kept = "".join(c for c in token.lower() if c.isalpha() or c.isspace())
    return "_".join(kept.split())


def preprocess(corpus: Corpus) -> Corpus:
    docs = []
    for uid, toks in corpus.documents:
        cleaned = [c for c in (clean_token(t) for t in toks) if c]
        if cleaned:
            docs.append((uid, cleaned))
    if not docs:
        raise ProfilingError("preprocessing emptied every document")
    return Corpus(docs)
