"""Latent Dirichlet allocation by collapsed Gibbs sampling, and UMass coherence."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .. import kernels
from ..errors import ProfilingError
from .corpus import Corpus

log = logging.getLogger(__name__)

BETA = 0.01
GIBBS_ITERS = 1000


def default_alpha(K: int) -> float:
    return 50.0 / K


@dataclass
class TopicModel:
    K: int
    word_topic: np.ndarray  # K x V
    doc_topic: np.ndarray  # D x K
    seed: int
    gibbs_iters: int
    alpha: float
    beta: float
    words: list[str]
    user_ids: list[str]

    def top_words(self, top_n: int = 10) -> list[list[int]]:
        n = min(top_n, self.word_topic.shape[1])
        # stable sort so equal probabilities keep vocabulary order
        return [list(np.argsort(-row, kind="stable")[:n]) for row in self.word_topic]

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "seed": self.seed,
            "gibbs_iters": self.gibbs_iters,
            "alpha": self.alpha,
            "beta": self.beta,
            "words": self.words,
            "user_ids": self.user_ids,
            "word_topic": self.word_topic.tolist(),
            "doc_topic": self.doc_topic.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TopicModel":
        return cls(
            K=d["K"], seed=d["seed"], gibbs_iters=d["gibbs_iters"], alpha=d["alpha"],
            beta=d["beta"], words=list(d["words"]), user_ids=list(d["user_ids"]),
            word_topic=np.asarray(d["word_topic"], dtype=float),
            doc_topic=np.asarray(d["doc_topic"], dtype=float),
        )


def fit_lda(
    corpus: Corpus,
    K: int,
    seed: int,
    iters: int = GIBBS_ITERS,
    *,
    alpha: float | None = None,
    beta: float = BETA,
    backend: str | None = None,
) -> TopicModel:
    """Collapsed Gibbs LDA; estimates come from the final sample."""
    V = len(corpus.vocabulary)
    if K < 1:
        raise ProfilingError("K must be at least 1")
    if iters < 1:
        raise ProfilingError("iters must be at least 1")
    if K > V:
        raise ProfilingError(f"K={K} exceeds vocabulary size {V}")
    alpha = default_alpha(K) if alpha is None else alpha
    sweep = kernels.get_backend(backend).gibbs_sweep

    doc_ids, word_ids = corpus.flat()
    D = len(corpus)
    rng = np.random.default_rng(seed)
    z = rng.integers(K, size=doc_ids.shape[0]).astype(np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (doc_ids, z), 1)
    np.add.at(nkw, (z, word_ids), 1)
    nk = nkw.sum(axis=1)

    for _ in range(iters):
        sweep(doc_ids, word_ids, z, ndk, nkw, nk, float(alpha), float(beta), rng.random(doc_ids.shape[0]))

    doc_len = ndk.sum(axis=1, keepdims=True)
    doc_topic = (ndk + alpha) / (doc_len + K * alpha)
    word_topic = (nkw + beta) / (nk[:, None] + V * beta)
    return TopicModel(K, word_topic, doc_topic, seed, iters, alpha, beta, corpus.words, corpus.user_ids)


def umass_coherence(model: TopicModel, corpus: Corpus, top_n: int = 10, eps: float = 1.0) -> tuple[np.ndarray, float]:
    """UMass coherence of each topic's top words against training-corpus document counts.

    For top words ranked w_1, w_2, ... the score sums
    log((D(w_i, w_j) + eps) / D(w_i)) over pairs i < j, where D counts
    documents containing the word(s) and w_i is the higher-ranked word.
    """
    if top_n < 2:
        raise ProfilingError("top_n must be at least 2")
    inc = corpus.doc_word_sets().astype(np.int64)
    doc_count = inc.sum(axis=0)
    co = inc.T @ inc
    scores = []
    for top in model.top_words(top_n):
        s = 0.0
        for wi, wj in combinations(top, 2):
            if doc_count[wi] == 0:
                raise ProfilingError(f"word {model.words[wi]!r} has zero document count")
            s += np.log((co[wi, wj] + eps) / doc_count[wi])
        scores.append(s)
    scores = np.array(scores)
    return scores, float(scores.mean())


def select_topic_count(
    corpus: Corpus,
    k_min: int = 1,
    k_max: int = 30,
    seed: int = 0,
    iters: int = GIBBS_ITERS,
    top_n: int = 10,
    backend: str | None = None,
) -> tuple[int, dict[int, float], dict[int, TopicModel]]:
    """Fit LDA for each K in [k_min, k_max] and keep the highest mean coherence.

    Each K uses seed ``seed + K``. Ties go to the smaller K. Returns the chosen
    K, the coherence table and the fitted models.
    """
    V = len(corpus.vocabulary)
    if k_max > V:
        raise ProfilingError(f"k_max={k_max} exceeds vocabulary size {V}")
    if k_min < 1 or k_min > k_max:
        raise ProfilingError(f"invalid topic range {k_min}:{k_max}")
    table: dict[int, float] = {}
    models: dict[int, TopicModel] = {}
    for K in range(k_min, k_max + 1):
        models[K] = fit_lda(corpus, K, seed + K, iters, backend=backend)
        _, table[K] = umass_coherence(models[K], corpus, top_n)
        log.debug("K=%d coherence=%.4f", K, table[K])
    best = max(table, key=lambda k: (table[k], -k))
    return best, table, models
