"""The labeled query index: exact cosine top-k search, an HNSW approximate
index, recall measurement, and binary persistence.

Exact mode is the reference path used for all evaluation runs: it ranks
every entry by cosine similarity (vectors are stored normalized, so this
is a dot product) with ties broken by ascending id bytes. HNSW mode builds
a hierarchical navigable-small-world proximity graph for sub-linear search
and is quantified against the exact path by ``measure_recall``.

Determinism: entries are inserted in dataset order, node levels come from
the portable seeded RNG, construction is single threaded, and every heap
tie is broken by node ordinal, so a (dataset, store, params) triple always
produces the same graph and the same search results.

QIDX binary format (little-endian)::

    magic  b"QIDX"
    u16    version (= 1)
    u8     mode (0 exact, 1 hnsw)
    u32    dim
    u64    count
    count entries of: id, label, language (each u32 len + UTF-8 bytes),
                      dim x f32 normalized vector
    hnsw only, per node: u8 max_level, then per level 0..max_level:
                      u32 neighbor count + that many u32 neighbor ordinals
    u32    CRC32 of everything above

The graph block stores adjacency only; the search entry point is recoverable
because insertion order equals ordinal order, so the entry point is always
the lowest ordinal among nodes at the top level.
"""

from __future__ import annotations

import heapq
import math
import zlib
from dataclasses import dataclass

import numpy as np

from . import binio
from .dataset import Dataset
from .embedding import EmbeddingStore, EmbeddingVector
from .errors import DataError, FormatError
from .rng import PortableRng, derive_seed

QIDX_MAGIC = b"QIDX"
QIDX_VERSION = 1

_MAX_LEVEL = 64


@dataclass(frozen=True)
class BuildParams:
    """HNSW construction parameters (ignored by exact mode)."""

    m_max: int = 16
    ef_construction: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.m_max < 2:
            raise DataError("m_max must be >= 2")
        if self.ef_construction < 1:
            raise DataError("ef_construction must be >= 1")


@dataclass(frozen=True)
class IndexEntry:
    id: str
    vector: EmbeddingVector
    label: str
    language: str


@dataclass(frozen=True)
class NeighborItem:
    similarity: float
    id: str
    label: str
    language: str


@dataclass(frozen=True)
class NeighborSet:
    """Top-k search results, sorted by descending similarity."""

    items: tuple[NeighborItem, ...]
    k_requested: int

    def __post_init__(self) -> None:
        if self.k_requested < 1:
            raise DataError("k must be >= 1")
        sims = [it.similarity for it in self.items]
        if any(sims[i] < sims[i + 1] for i in range(len(sims) - 1)):
            raise DataError("neighbor similarities must be non-increasing")

    def labels(self) -> list[str]:
        return [it.label for it in self.items]

    def ids(self) -> list[str]:
        return [it.id for it in self.items]


class QueryIndex:
    """Immutable searchable collection of (vector, label, language) entries."""

    def __init__(
        self,
        dim: int,
        mode: str,
        ids: list[str],
        labels: list[str],
        languages: list[str],
        matrix: np.ndarray,
        params: BuildParams | None = None,
        levels: list[int] | None = None,
        graph: list[list[list[int]]] | None = None,
    ) -> None:
        if mode not in ("exact", "hnsw"):
            raise DataError(f"unknown index mode '{mode}'")
        if matrix.shape != (len(ids), dim):
            raise DataError("index matrix shape does not match entries")
        if mode == "hnsw" and (graph is None or len(graph) != len(ids)):
            raise DataError("hnsw index requires a graph node per entry")
        self.dim = dim
        self.mode = mode
        self.ids = list(ids)
        self.labels = list(labels)
        self.languages = list(languages)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.matrix.flags.writeable = False
        self.params = params
        self.levels = list(levels) if levels is not None else None
        self.graph = graph
        self._id_bytes = [s.encode("utf-8") for s in self.ids]
        self._mat64 = self.matrix.astype(np.float64)
        if self.mode == "hnsw":
            assert self.levels is not None
            self.max_level = max(self.levels) if self.levels else 0
            self.entry_point = min(
                i for i, lv in enumerate(self.levels) if lv == self.max_level
            ) if self.levels else None
        else:
            self.max_level = 0
            self.entry_point = None

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def entries(self) -> list[IndexEntry]:
        return [
            IndexEntry(
                id=self.ids[i],
                vector=EmbeddingVector(self.matrix[i], normalized=True),
                label=self.labels[i],
                language=self.languages[i],
            )
            for i in range(len(self.ids))
        ]

    def label_universe(self) -> frozenset[str]:
        return frozenset(self.labels)


def default_ef_search(k: int) -> int:
    return max(64, 2 * k)


def build_index(
    d: Dataset,
    store: EmbeddingStore,
    mode: str = "exact",
    params: BuildParams | None = None,
    allow_unbalanced: bool = False,
) -> QueryIndex:
    """Normalize every record's vector and assemble the search structure.

    The class-balance invariant is enforced here: every label must appear
    the same number of times unless ``allow_unbalanced`` is set.
    """
    params = params or BuildParams()
    counts = d.class_counts()
    if len(set(counts.values())) > 1 and not allow_unbalanced:
        lo = min(counts, key=lambda c: (counts[c], c))
        hi = max(counts, key=lambda c: (counts[c], c))
        raise DataError(
            "index would be unbalanced: "
            f"class '{lo}' has {counts[lo]} entries while '{hi}' has {counts[hi]} "
            "(pass allow_unbalanced to override)"
        )
    ids, labels, languages = [], [], []
    rows = np.empty((len(d.records), store.dim), dtype=np.float64)
    for i, rec in enumerate(d.records):
        vec = store.vector(rec.id)
        rows[i] = vec.values.astype(np.float64)
        ids.append(rec.id)
        labels.append(rec.label)
        languages.append(rec.language)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms <= 1e-12):
        bad = ids[int(np.argmax(norms <= 1e-12))]
        raise DataError(f"record '{bad}' has a zero embedding vector")
    matrix = (rows / norms[:, None]).astype(np.float32)

    levels = graph = None
    if mode == "hnsw":
        levels, graph = _build_hnsw(matrix.astype(np.float64), params)
    return QueryIndex(
        dim=store.dim, mode=mode, ids=ids, labels=labels, languages=languages,
        matrix=matrix, params=params, levels=levels, graph=graph,
    )


def _query_as_unit64(ix: QueryIndex, q: EmbeddingVector) -> np.ndarray:
    if q.dim != ix.dim:
        raise DataError(f"query dim {q.dim} does not match index dim {ix.dim}")
    qv = q.values.astype(np.float64)
    norm = float(np.linalg.norm(qv))
    if norm <= 1e-12:
        raise DataError("cannot search with a zero query vector")
    return qv / norm


def _topk_from_sims(ix: QueryIndex, sims: np.ndarray, k: int) -> NeighborSet:
    n = len(ix)
    kk = min(k, n)
    if kk == n:
        cand = np.arange(n)
    else:
        # Everything at or above the k-th similarity, so boundary ties are
        # resolved by id rather than by argpartition's arbitrary split.
        thresh = np.partition(sims, n - kk)[n - kk]
        cand = np.nonzero(sims >= thresh)[0]
    order = sorted(cand, key=lambda i: (-sims[i], ix._id_bytes[i]))[:kk]
    items = tuple(
        NeighborItem(
            similarity=min(1.0, max(-1.0, float(sims[i]))),
            id=ix.ids[i],
            label=ix.labels[i],
            language=ix.languages[i],
        )
        for i in order
    )
    return NeighborSet(items=items, k_requested=k)


def search_topk(
    ix: QueryIndex,
    q: EmbeddingVector,
    k: int,
    ef_search: int | None = None,
) -> NeighborSet:
    """Top-k most similar entries; exact or HNSW depending on index mode.

    Requesting more neighbors than the index holds returns every entry,
    sorted. HNSW searches with ``ef_search`` (default ``max(64, 2k)``) and
    degenerates to an exhaustive scan when that reaches the index size.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    if len(ix) == 0:
        raise DataError("cannot search an empty index")
    qu = _query_as_unit64(ix, q)
    if ix.mode == "exact":
        return _topk_from_sims(ix, ix._mat64 @ qu, k)
    ef = ef_search if ef_search is not None else default_ef_search(k)
    ef = max(ef, k)
    if ef >= len(ix):
        return _topk_from_sims(ix, ix._mat64 @ qu, k)
    cand = _hnsw_search(ix, qu, ef)
    sims = ix._mat64[cand] @ qu
    kk = min(k, len(cand))
    order = sorted(range(len(cand)), key=lambda j: (-sims[j], ix._id_bytes[cand[j]]))[:kk]
    items = tuple(
        NeighborItem(
            similarity=min(1.0, max(-1.0, float(sims[j]))),
            id=ix.ids[cand[j]],
            label=ix.labels[cand[j]],
            language=ix.languages[cand[j]],
        )
        for j in order
    )
    return NeighborSet(items=items, k_requested=k)


def measure_recall(
    ix_ann: QueryIndex,
    ix_exact: QueryIndex,
    queries: list[EmbeddingVector],
    k: int,
    ef_search: int | None = None,
) -> float:
    """Mean fraction of true top-k ids that the approximate search returns."""
    if ix_ann.ids != ix_exact.ids or ix_ann.dim != ix_exact.dim:
        raise DataError("recall requires indexes built from identical entries")
    if not np.array_equal(ix_ann.matrix, ix_exact.matrix):
        raise DataError("recall requires indexes built from identical entries")
    if not queries:
        raise DataError("recall requires at least one query")
    denom = min(k, len(ix_exact))
    total = 0.0
    for q in queries:
        truth = set(search_topk(ix_exact, q, k).ids())
        approx = set(search_topk(ix_ann, q, k, ef_search=ef_search).ids())
        total += len(truth & approx) / denom
    return total / len(queries)


# ---------------------------------------------------------------------------
# HNSW construction and search.
#
# Layered proximity graph in the style of Malkov & Yashunin: node levels are
# geometric with multiplier 1/ln(M), upper layers hold at most M neighbors,
# the base layer at most 2M. Both construction and queries use the greedy
# best-first layer search below; neighbor selection uses the diversity
# heuristic (keep a candidate only if it is closer to the query than to any
# already-kept neighbor), back-filled with pruned candidates.
# ---------------------------------------------------------------------------


def _layer_search(
    mat64: np.ndarray,
    adjacency: list[list[list[int]]],
    q: np.ndarray,
    entry_points: list[int],
    layer: int,
    ef: int,
) -> list[tuple[float, int]]:
    """Greedy best-first search on one layer.

    Works in distance space (1 - cosine). Returns up to ``ef`` pairs of
    (distance, ordinal) sorted ascending; all heap ties resolve by ordinal.
    """
    visited = set(entry_points)
    dists = 1.0 - (mat64[entry_points] @ q)
    candidates: list[tuple[float, int]] = []   # min-heap: closest first
    best: list[tuple[float, int]] = []         # min-heap on -dist: worst kept first
    for ep, dist in zip(entry_points, dists):
        heapq.heappush(candidates, (float(dist), ep))
        heapq.heappush(best, (-float(dist), ep))
    while candidates:
        dist, node = heapq.heappop(candidates)
        if len(best) >= ef and dist > -best[0][0]:
            break
        neighbors = [v for v in adjacency[node][layer] if v not in visited]
        if not neighbors:
            continue
        visited.update(neighbors)
        ndists = 1.0 - (mat64[neighbors] @ q)
        for v, nd in zip(neighbors, ndists):
            nd = float(nd)
            if len(best) < ef:
                heapq.heappush(candidates, (nd, v))
                heapq.heappush(best, (-nd, v))
            elif nd < -best[0][0]:
                heapq.heappush(candidates, (nd, v))
                heapq.heapreplace(best, (-nd, v))
    out = [(-negd, node) for negd, node in best]
    out.sort()
    return out


def _select_neighbors(
    mat64: np.ndarray,
    candidates: list[tuple[float, int]],
    m: int,
) -> list[int]:
    """Diversity-aware neighbor selection with pruned-candidate back-fill."""
    if len(candidates) <= m:
        return [node for _, node in sorted(candidates)]
    kept: list[int] = []
    pruned: list[tuple[float, int]] = []
    for dist, node in sorted(candidates):
        if len(kept) >= m:
            break
        if not kept:
            kept.append(node)
            continue
        to_kept = 1.0 - (mat64[kept] @ mat64[node])
        if dist < float(np.min(to_kept)):
            kept.append(node)
        else:
            pruned.append((dist, node))
    for dist, node in pruned:
        if len(kept) >= m:
            break
        kept.append(node)
    return kept


def _build_hnsw(
    mat64: np.ndarray, params: BuildParams
) -> tuple[list[int], list[list[list[int]]]]:
    n = len(mat64)
    m = params.m_max
    m0 = 2 * m
    ml = 1.0 / math.log(m)
    rng = PortableRng(derive_seed(params.seed, "hnsw-levels"))
    levels = [min(int(-math.log(rng.uniform01()) * ml), _MAX_LEVEL) for _ in range(n)]
    adjacency: list[list[list[int]]] = [
        [[] for _ in range(levels[i] + 1)] for i in range(n)
    ]
    entry = 0
    top = levels[0] if n else 0
    for node in range(1, n):
        q = mat64[node]
        level = levels[node]
        eps = [entry]
        for layer in range(top, level, -1):
            found = _layer_search(mat64, adjacency, q, eps, layer, 1)
            eps = [found[0][1]]
        for layer in range(min(level, top), -1, -1):
            found = _layer_search(mat64, adjacency, q, eps, layer, params.ef_construction)
            cap = m0 if layer == 0 else m
            selected = _select_neighbors(mat64, found, cap)
            for peer in selected:
                adjacency[node][layer].append(peer)
                adjacency[peer][layer].append(node)
                if len(adjacency[peer][layer]) > cap:
                    peers = adjacency[peer][layer]
                    pd = 1.0 - (mat64[peers] @ mat64[peer])
                    ranked = [(float(pd[i]), peers[i]) for i in range(len(peers))]
                    adjacency[peer][layer] = _select_neighbors(mat64, ranked, cap)
            eps = [node_ for _, node_ in found]
        if level > top:
            entry = node
            top = level
    return levels, adjacency


def _hnsw_search(ix: QueryIndex, q: np.ndarray, ef: int) -> list[int]:
    assert ix.graph is not None and ix.entry_point is not None
    eps = [ix.entry_point]
    for layer in range(ix.max_level, 0, -1):
        found = _layer_search(ix._mat64, ix.graph, q, eps, layer, 1)
        eps = [found[0][1]]
    found = _layer_search(ix._mat64, ix.graph, q, eps, 0, ef)
    return [node for _, node in found]


# ---------------------------------------------------------------------------
# Persistence.
# ---------------------------------------------------------------------------


def save_index(ix: QueryIndex, path: str) -> None:
    import io

    buf = io.BytesIO()
    buf.write(QIDX_MAGIC)
    binio.write_u16(buf, QIDX_VERSION)
    binio.write_u8(buf, 0 if ix.mode == "exact" else 1)
    binio.write_u32(buf, ix.dim)
    binio.write_u64(buf, len(ix))
    for i in range(len(ix)):
        binio.write_str(buf, ix.ids[i])
        binio.write_str(buf, ix.labels[i])
        binio.write_str(buf, ix.languages[i])
        binio.write_f32_array(buf, ix.matrix[i])
    if ix.mode == "hnsw":
        assert ix.levels is not None and ix.graph is not None
        for i in range(len(ix)):
            binio.write_u8(buf, ix.levels[i])
            for layer in range(ix.levels[i] + 1):
                neigh = ix.graph[i][layer]
                binio.write_u32(buf, len(neigh))
                for v in neigh:
                    binio.write_u32(buf, v)
    payload = buf.getvalue()
    with open(path, "wb") as f:
        f.write(payload)
        f.write(zlib.crc32(payload).to_bytes(4, "little"))


def load_index(path: str) -> QueryIndex:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4:
        raise FormatError(f"{path}: file too short to be a QIDX index")
    payload, stored = blob[:-4], int.from_bytes(blob[-4:], "little")
    if zlib.crc32(payload) != stored:
        raise FormatError(f"{path}: checksum mismatch, file is corrupt")
    import io

    f = io.BytesIO(payload)
    magic = binio.read_exact(f, 4, "magic")
    if magic != QIDX_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {QIDX_MAGIC!r}")
    version = binio.read_u16(f, "version")
    if version != QIDX_VERSION:
        raise FormatError(f"{path}: unsupported QIDX version {version}")
    mode_byte = binio.read_u8(f, "mode")
    if mode_byte not in (0, 1):
        raise FormatError(f"{path}: unknown index mode byte {mode_byte}")
    mode = "exact" if mode_byte == 0 else "hnsw"
    dim = binio.read_u32(f, "dim")
    count = binio.read_u64(f, "count")
    ids, labels, languages = [], [], []
    matrix = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        ids.append(binio.read_str(f, f"entry {i} id"))
        labels.append(binio.read_str(f, f"entry {i} label"))
        languages.append(binio.read_str(f, f"entry {i} language"))
        matrix[i] = binio.read_f32_array(f, dim, f"entry {i} vector")
    if count and not np.all(np.isfinite(matrix)):
        raise FormatError(f"{path}: index contains non-finite vector components")
    levels = graph = None
    if mode == "hnsw":
        levels, graph = [], []
        for i in range(count):
            lv = binio.read_u8(f, f"node {i} level")
            levels.append(lv)
            node_adj = []
            for layer in range(lv + 1):
                cnt = binio.read_u32(f, f"node {i} layer {layer} neighbor count")
                neigh = [
                    binio.read_u32(f, f"node {i} layer {layer} neighbor") for _ in range(cnt)
                ]
                if any(v >= count for v in neigh):
                    raise FormatError(f"{path}: node {i} references an out-of-range ordinal")
                node_adj.append(neigh)
            graph.append(node_adj)
    if f.read(1):
        raise FormatError(f"{path}: trailing bytes after index payload")
    return QueryIndex(
        dim=dim, mode=mode, ids=ids, labels=labels, languages=languages,
        matrix=matrix, params=None, levels=levels, graph=graph,
    )
