"""Reviewer group profiles: category documents, LDA topics, k-means groups."""
from __future__ import annotations

from dataclasses import dataclass

from ..ingest import Dataset
from .clustering import GroupModel, cluster_users, kmeans, silhouette
from .corpus import Corpus, build_documents, clean_token, preprocess
from .lda import TopicModel, fit_lda, select_topic_count, umass_coherence

__all__ = [
    "Corpus", "GroupModel", "ProfileResult", "TopicModel", "build_documents", "clean_token",
    "cluster_users", "fit_lda", "kmeans", "preprocess", "profile_users", "select_topic_count",
    "silhouette", "umass_coherence",
]


@dataclass
class ProfileResult:
    topic_model: TopicModel
    group_model: GroupModel
    coherence: dict[int, float]
    silhouettes: dict[int, float]


def profile_users(
    dataset: Dataset,
    topics: tuple[int, int] = (1, 30),
    groups: tuple[int, int] = (2, 15),
    seed: int = 0,
    iters: int = 1000,
) -> ProfileResult:
    """Documents -> cleaned corpus -> LDA (K by coherence) -> k-means groups (k by silhouette)."""
    corpus = preprocess(build_documents(dataset))
    k_hi = min(topics[1], len(corpus.vocabulary))
    K, coherence, models = select_topic_count(corpus, topics[0], k_hi, seed=seed, iters=iters)
    model = models[K]
    groups_model, sil = cluster_users(model.doc_topic, corpus.user_ids, groups[0], groups[1], seed=seed)
    return ProfileResult(model, groups_model, coherence, sil)
