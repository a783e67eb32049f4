"""Grid search over k: evaluate the vote for every k in a range.

The search runs once per test query at the largest k; each smaller k is
scored on a prefix of that neighbor list. Because search results are
totally ordered (similarity, then id), every prefix is exactly what an
independent search at that k would return, which the tests assert.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .classify import default_threads, resolve_label
from .dataset import Dataset
from .embedding import EmbeddingStore
from .errors import DataError
from .index import NeighborSet, QueryIndex, search_topk
from .metrics import accuracy, macro_f1

log = logging.getLogger("simquery")


@dataclass(frozen=True)
class SweepRow:
    k: int
    accuracy: float
    macro_f1: float
    tie_rate: float


@dataclass(frozen=True)
class AggregateRow:
    k: int
    mean_accuracy: float
    mean_macro_f1: float


@dataclass(frozen=True)
class AggregateSweep:
    rows: tuple[AggregateRow, ...]
    best_k_accuracy: int
    best_k_macro_f1: int


def k_grid(k_min: int, k_max: int, step: int) -> list[int]:
    if k_min < 1 or k_max < k_min or step < 1:
        raise DataError(f"invalid k grid: min={k_min} max={k_max} step={step}")
    return list(range(k_min, k_max + 1, step))


def sweep_k(
    ix: QueryIndex,
    test: Dataset,
    store: EmbeddingStore,
    k_min: int = 1,
    k_max: int = 75,
    step: int = 2,
    threads: int | None = None,
) -> list[SweepRow]:
    """One (k, accuracy, macro_f1, tie_rate) row per k in the grid.

    Grid values above the index size are evaluated at the clamped k (with
    a warning) but keep their requested k in the output row.
    """
    grid = k_grid(k_min, k_max, step)
    if grid[-1] > len(ix):
        log.warning(
            "event=k_clamped requested=%d index_size=%d", grid[-1], len(ix)
        )
    top_k = min(grid[-1], len(ix))
    threads = threads if threads is not None else default_threads()

    def full_search(rec) -> NeighborSet:
        return search_topk(ix, store.vector(rec.id), top_k)

    if threads <= 1 or len(test.records) <= 1:
        searches = [full_search(r) for r in test.records]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            searches = list(pool.map(full_search, test.records))

    rows = []
    for k in grid:
        kk = min(k, top_k)
        preds = []
        ties = 0
        for rec, ns in zip(test.records, searches):
            prefix = NeighborSet(items=ns.items[:kk], k_requested=kk)
            pred = resolve_label(prefix)
            preds.append((rec.id, pred.predicted_label))
            ties += 1 if pred.tie_broken else 0
        rows.append(
            SweepRow(
                k=k,
                accuracy=accuracy(preds, test),
                macro_f1=macro_f1(preds, test),
                tie_rate=ties / len(preds),
            )
        )
    return rows


def aggregate_sweeps(tables: list[list[SweepRow]]) -> AggregateSweep:
    """Unweighted per-k mean across providers, plus the argmax k per metric.

    Argmax ties resolve to the smaller k.
    """
    if not tables:
        raise DataError("nothing to aggregate")
    grid = [row.k for row in tables[0]]
    for t in tables[1:]:
        if [row.k for row in t] != grid:
            raise DataError("sweep tables do not share an identical k grid")
    rows = []
    for i, k in enumerate(grid):
        accs = [t[i].accuracy for t in tables]
        f1s = [t[i].macro_f1 for t in tables]
        rows.append(
            AggregateRow(
                k=k,
                mean_accuracy=sum(accs) / len(accs),
                mean_macro_f1=sum(f1s) / len(f1s),
            )
        )
    best_acc = min(rows, key=lambda r: (-r.mean_accuracy, r.k)).k
    best_f1 = min(rows, key=lambda r: (-r.mean_macro_f1, r.k)).k
    return AggregateSweep(rows=tuple(rows), best_k_accuracy=best_acc, best_k_macro_f1=best_f1)


def sweep_rows_to_csv(rows: list[SweepRow]) -> str:
    lines = ["k,accuracy,macro_f1,tie_rate"]
    for r in rows:
        lines.append(f"{r.k},{r.accuracy!r},{r.macro_f1!r},{r.tie_rate!r}")
    return "\n".join(lines) + "\n"


def sweep_plot_svg(rows: list[SweepRow], title: str = "vote size sweep") -> str:
    """Minimal static SVG line chart of accuracy and macro-F1 against k."""
    width, height, pad = 640, 400, 48
    ks = [r.k for r in rows]
    lo_k, hi_k = min(ks), max(ks)
    span_k = max(hi_k - lo_k, 1)

    def x(k: float) -> float:
        return pad + (k - lo_k) / span_k * (width - 2 * pad)

    def y(v: float) -> float:
        return height - pad - v * (height - 2 * pad)

    def polyline(values: list[float], color: str) -> str:
        pts = " ".join(f"{x(k):.1f},{y(v):.1f}" for k, v in zip(ks, values))
        return f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>'

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        polyline([r.accuracy for r in rows], "#1f77b4"),
        polyline([r.macro_f1 for r in rows], "#d62728"),
        f'<text x="{width - pad}" y="{height - 8}" text-anchor="end" font-size="12">k ({lo_k}..{hi_k})</text>',
        f'<text x="{pad + 4}" y="{pad - 6}" font-size="12" fill="#1f77b4">accuracy</text>',
        f'<text x="{pad + 84}" y="{pad - 6}" font-size="12" fill="#d62728">macro-F1</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"
