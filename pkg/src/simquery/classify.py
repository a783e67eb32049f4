"""Label resolution by majority vote over retrieved neighbors.

The vote is unweighted. Ties are resolved deterministically: among the
labels with the maximal count, take the one with the greatest summed
similarity; if sums are also equal, the lexicographically smallest label
wins. ``tie_broken`` records that the mode was not unique, which the
evaluation layer aggregates into a per-experiment tie rate.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .embedding import EmbeddingVector
from .errors import DataError
from .index import NeighborSet, QueryIndex, search_topk


@dataclass(frozen=True)
class Prediction:
    predicted_label: str
    vote_counts: dict[str, int]
    tie_broken: bool
    support: NeighborSet


@dataclass(frozen=True)
class BatchPrediction:
    """One batch slot: either a prediction or the error that replaced it."""

    id: str
    prediction: Prediction | None = None
    error: str | None = None


def resolve_label(
    ns: NeighborSet,
    weighted: bool = False,
    min_similarity: float | None = None,
) -> Prediction:
    """Mode of the neighbor labels with deterministic tie-breaking.

    ``weighted`` switches to similarity-weighted voting (off by default;
    the plain majority vote is the reference behaviour). ``min_similarity``
    excludes weaker neighbors from the vote; if nothing survives, the
    single nearest neighbor still decides so that a label is always
    emitted.
    """
    if not ns.items:
        raise DataError("cannot resolve a label from an empty neighbor set")
    items = ns.items
    if min_similarity is not None:
        kept = tuple(it for it in items if it.similarity >= min_similarity)
        items = kept if kept else (ns.items[0],)

    counts: dict[str, int] = {}
    sim_sums: dict[str, float] = {}
    for it in items:
        counts[it.label] = counts.get(it.label, 0) + 1
        sim_sums[it.label] = sim_sums.get(it.label, 0.0) + it.similarity

    score = sim_sums if weighted else counts
    best = max(score.values())
    leaders = sorted(label for label, s in score.items() if s == best)
    if len(leaders) == 1:
        return Prediction(leaders[0], counts, False, ns)
    best_sum = max(sim_sums[label] for label in leaders)
    by_sum = [label for label in leaders if sim_sums[label] == best_sum]
    return Prediction(min(by_sum), counts, True, ns)


def classify_query(
    ix: QueryIndex,
    q: EmbeddingVector,
    k: int,
    ef_search: int | None = None,
    weighted: bool = False,
    min_similarity: float | None = None,
) -> Prediction:
    ns = search_topk(ix, q, k, ef_search=ef_search)
    return resolve_label(ns, weighted=weighted, min_similarity=min_similarity)


def default_threads() -> int:
    env = os.environ.get("SIMQUERY_THREADS")
    if env:
        try:
            n = int(env)
            if n >= 1:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1


def classify_batch(
    ix: QueryIndex,
    queries: list[tuple[str, EmbeddingVector]],
    k: int,
    threads: int | None = None,
    ef_search: int | None = None,
    weighted: bool = False,
    min_similarity: float | None = None,
) -> list[BatchPrediction]:
    """Classify many queries; output order matches input order.

    Failures are collected per item rather than aborting the batch. The
    result is independent of the thread count because each item is a pure
    function of the immutable index.
    """
    threads = threads if threads is not None else default_threads()

    def one(item: tuple[str, EmbeddingVector]) -> BatchPrediction:
        qid, vec = item
        try:
            pred = classify_query(
                ix, vec, k, ef_search=ef_search,
                weighted=weighted, min_similarity=min_similarity,
            )
            return BatchPrediction(id=qid, prediction=pred)
        except DataError as e:
            return BatchPrediction(id=qid, error=str(e))

    if threads <= 1 or len(queries) <= 1:
        return [one(item) for item in queries]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, queries))
