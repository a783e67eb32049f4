import numpy as np
import pytest

from simquery.dataset import Dataset, QueryRecord
from simquery.embedding import EmbeddingVector, cosine_similarity
from simquery.errors import DataError, FormatError
from simquery.index import (
    BuildParams,
    NeighborItem,
    NeighborSet,
    build_index,
    load_index,
    measure_recall,
    save_index,
    search_topk,
)

from conftest import random_index_data, store_from_vectors


def brute_force_topk_ids(ix, store, q: EmbeddingVector, k: int) -> list[str]:
    """Independent oracle: score every entry with the scalar cosine op and fully sort."""
    scored = []
    for rid in ix.ids:
        scored.append((cosine_similarity(store.vector(rid), q), rid))
    scored.sort(key=lambda t: (-t[0], t[1].encode("utf-8")))
    return [rid for _, rid in scored[: min(k, len(scored))]]


def random_query(dim: int, seed: int) -> EmbeddingVector:
    rng = np.random.default_rng(seed)
    return EmbeddingVector(rng.normal(size=dim).astype(np.float32))


# --- build ---------------------------------------------------------------


def test_build_exact_has_no_graph():
    d, store = random_index_data(93, 8, seed=1, n_classes=3)
    ix = build_index(d, store, mode="exact")
    assert len(ix) == 93
    assert ix.graph is None
    assert ix.mode == "exact"


def test_build_hnsw_node_count_matches():
    d, store = random_index_data(93, 8, seed=1, n_classes=3)
    ix = build_index(d, store, mode="hnsw", params=BuildParams(m_max=16, ef_construction=100))
    assert ix.graph is not None
    assert len(ix.graph) == 93
    assert len(ix.levels) == 93


def test_build_missing_embedding_names_record():
    d, store = random_index_data(10, 8, seed=2)
    entries = dict(store.entries)
    del entries["r00009"]
    from simquery.embedding import EmbeddingStore

    partial = EmbeddingStore(dim=8, provider_name="t", entries=entries)
    with pytest.raises(DataError, match="r00009"):
        build_index(d, partial)


def test_build_entries_are_normalized():
    d, store = random_index_data(20, 8, seed=3)
    ix = build_index(d, store)
    norms = np.linalg.norm(ix.matrix.astype(np.float64), axis=1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-5
    assert all(e.vector.normalized for e in ix.entries)


def test_build_rejects_unbalanced_without_override():
    recs = tuple(
        QueryRecord(id=f"x{i}", text=f"t {i}", label="a" if i < 6 else "b", language="en")
        for i in range(10)
    )
    d = Dataset(recs)
    rng = np.random.default_rng(0)
    store = store_from_vectors([r.id for r in recs], rng.normal(size=(10, 8)))
    with pytest.raises(DataError, match="unbalanced"):
        build_index(d, store)
    ix = build_index(d, store, allow_unbalanced=True)
    assert len(ix) == 10


# --- exact search -----------------------------------------------------------


def test_self_retrieval_similarity_one():
    d, store = random_index_data(30, 8, seed=4)
    ix = build_index(d, store)
    q = store.vector("r00007")
    ns = search_topk(ix, q, 1)
    assert ns.items[0].id == "r00007"
    assert ns.items[0].similarity == pytest.approx(1.0, abs=1e-6)


def test_k_larger_than_index_returns_everything_sorted():
    d, store = random_index_data(10, 8, seed=5)
    ix = build_index(d, store)
    ns = search_topk(ix, random_query(8, 0), 50)
    assert len(ns.items) == 10
    sims = [it.similarity for it in ns.items]
    assert sims == sorted(sims, reverse=True)


def test_exact_matches_full_sort_oracle_200():
    d, store = random_index_data(200, 16, seed=6)
    ix = build_index(d, store)
    for qseed in range(10):
        q = random_query(16, 100 + qseed)
        got = search_topk(ix, q, 31).ids()
        assert got == brute_force_topk_ids(ix, store, q, 31)


def test_exact_oracle_across_sizes_and_dims():
    for dim in (8, 64):
        for n in (10, 200):
            d, store = random_index_data(n, dim, seed=dim + n)
            ix = build_index(d, store)
            for k in (1, 5, 31):
                q = random_query(dim, n * k)
                assert search_topk(ix, q, k).ids() == brute_force_topk_ids(ix, store, q, k)


def test_monotone_containment():
    d, store = random_index_data(50, 8, seed=7)
    ix = build_index(d, store)
    q = random_query(8, 1)
    prev: set[str] = set()
    for k in range(1, 20):
        ids = set(search_topk(ix, q, k).ids())
        assert prev <= ids
        prev = ids


def test_ranking_scale_invariance():
    d, store = random_index_data(40, 8, seed=8)
    ix = build_index(d, store)
    scaled = store_from_vectors(
        [r.id for r in d.records],
        np.stack([store.vector(r.id).values * np.float32(3.7) for r in d.records]),
    )
    ix_scaled = build_index(d, scaled)
    q = random_query(8, 9)
    q_scaled = EmbeddingVector(q.values * np.float32(0.21))
    assert search_topk(ix, q, 15).ids() == search_topk(ix_scaled, q_scaled, 15).ids()


def test_tie_break_by_ascending_id_bytes():
    recs = tuple(
        QueryRecord(id=rid, text="same", label="a", language="en") for rid in ("zz", "aa", "mm")
    )
    d = Dataset(recs)
    vectors = np.tile(np.array([1.0, 0.0], dtype=np.float64), (3, 1))
    store = store_from_vectors(["zz", "aa", "mm"], vectors)
    ix = build_index(d, store)
    ns = search_topk(ix, EmbeddingVector(np.array([1.0, 0.0], dtype=np.float32)), 3)
    assert ns.ids() == ["aa", "mm", "zz"]


def test_search_errors():
    d, store = random_index_data(10, 8, seed=10)
    ix = build_index(d, store)
    with pytest.raises(DataError, match="dim"):
        search_topk(ix, random_query(9, 0), 3)
    with pytest.raises(DataError):
        search_topk(ix, random_query(8, 0), 0)


# --- neighbor set invariants ---------------------------------------------


def test_neighborset_rejects_increasing_similarities():
    items = (
        NeighborItem(similarity=0.1, id="a", label="x", language="en"),
        NeighborItem(similarity=0.9, id="b", label="x", language="en"),
    )
    with pytest.raises(DataError):
        NeighborSet(items=items, k_requested=2)


# --- hnsw -------------------------------------------------------------------


def test_hnsw_recall_reasonable_small():
    d, store = random_index_data(300, 16, seed=11)
    exact = build_index(d, store, mode="exact")
    ann = build_index(d, store, mode="hnsw", params=BuildParams(seed=12))
    queries = [random_query(16, 500 + i) for i in range(50)]
    assert measure_recall(ann, exact, queries, 10) >= 0.9


def test_hnsw_ef_equal_to_size_gives_full_recall():
    d, store = random_index_data(150, 8, seed=13)
    exact = build_index(d, store, mode="exact")
    ann = build_index(d, store, mode="hnsw", params=BuildParams(seed=14))
    queries = [random_query(8, 900 + i) for i in range(25)]
    assert measure_recall(ann, exact, queries, 10, ef_search=150) == 1.0


def test_hnsw_deterministic_given_seed():
    d, store = random_index_data(120, 8, seed=15)
    a = build_index(d, store, mode="hnsw", params=BuildParams(seed=1))
    b = build_index(d, store, mode="hnsw", params=BuildParams(seed=1))
    c = build_index(d, store, mode="hnsw", params=BuildParams(seed=2))
    assert a.graph == b.graph and a.levels == b.levels
    assert a.levels != c.levels or a.graph != c.graph


def test_measure_recall_requires_identical_entries():
    d1, s1 = random_index_data(20, 8, seed=16)
    d2, s2 = random_index_data(20, 8, seed=17)
    a = build_index(d1, s1)
    b = build_index(d2, s2)
    with pytest.raises(DataError, match="identical"):
        measure_recall(a, b, [random_query(8, 0)], 5)


def test_recall_identical_results_give_one():
    d, store = random_index_data(60, 8, seed=18)
    exact = build_index(d, store)
    clone = build_index(d, store)
    queries = [random_query(8, 40 + i) for i in range(10)]
    assert measure_recall(clone, exact, queries, 7) == 1.0


def test_recall_equals_independent_per_query_average():
    # Two-path check of the definition: mean over queries of |ann & exact| / k.
    d, store = random_index_data(400, 32, seed=19)
    exact = build_index(d, store)
    ann = build_index(d, store, mode="hnsw", params=BuildParams(seed=20))
    queries = [random_query(32, 700 + i) for i in range(30)]
    k, ef = 10, 12  # low ef so some queries genuinely miss neighbors
    got = measure_recall(ann, exact, queries, k, ef_search=ef)
    by_hand = []
    for q in queries:
        truth = set(search_topk(exact, q, k).ids())
        approx = set(search_topk(ann, q, k, ef_search=ef).ids())
        by_hand.append(len(truth & approx) / k)
    assert got == pytest.approx(sum(by_hand) / len(by_hand), abs=1e-12)
    assert any(v < 1.0 for v in by_hand) or got == 1.0


# --- persistence ---------------------------------------------------------


def test_exact_roundtrip_same_search_results(tmp_path):
    d, store = random_index_data(60, 8, seed=19)
    ix = build_index(d, store)
    p = tmp_path / "i.qidx"
    save_index(ix, str(p))
    loaded = load_index(str(p))
    for i in range(20):
        q = random_query(8, 2000 + i)
        assert search_topk(ix, q, 7).items == search_topk(loaded, q, 7).items


def test_hnsw_roundtrip_graph_identical(tmp_path):
    d, store = random_index_data(80, 8, seed=20)
    ix = build_index(d, store, mode="hnsw", params=BuildParams(seed=21))
    p = tmp_path / "i.qidx"
    save_index(ix, str(p))
    loaded = load_index(str(p))
    assert loaded.graph == ix.graph
    assert loaded.levels == ix.levels
    assert loaded.entry_point == ix.entry_point
    q = random_query(8, 5)
    assert search_topk(ix, q, 9, ef_search=20).items == search_topk(loaded, q, 9, ef_search=20).items


def test_corrupted_payload_fails_checksum(tmp_path):
    d, store = random_index_data(20, 8, seed=22)
    save_index(build_index(d, store), str(tmp_path / "i.qidx"))
    blob = bytearray((tmp_path / "i.qidx").read_bytes())
    blob[30] ^= 0xFF
    (tmp_path / "i.qidx").write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="checksum"):
        load_index(str(tmp_path / "i.qidx"))


def test_version_mismatch_rejected(tmp_path):
    import zlib

    d, store = random_index_data(10, 8, seed=23)
    save_index(build_index(d, store), str(tmp_path / "i.qidx"))
    blob = bytearray((tmp_path / "i.qidx").read_bytes())
    payload = bytearray(blob[:-4])
    payload[4:6] = (99).to_bytes(2, "little")
    fixed = bytes(payload) + zlib.crc32(bytes(payload)).to_bytes(4, "little")
    (tmp_path / "i.qidx").write_bytes(fixed)
    with pytest.raises(FormatError, match="version"):
        load_index(str(tmp_path / "i.qidx"))
