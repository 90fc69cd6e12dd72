"""Spatial autocorrelation of per-region case counts.

The statistic is the classic Moran's I cross-product form: with region
values v_a, mean v̄, and a binary adjacency matrix w,

    sc = (o / Σ_ab w_ab) * Σ_ab w_ab (v_a - v̄)(v_b - v̄) / Σ_a (v_a - v̄)²

where o is the number of regions observed in the window. A zero-variance
value vector yields sc = 0 by convention, matching the "no autocorrelation"
class. The weekly panel evaluates all six adjacency metrics per 7-day bucket.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .geo import AdjacencyMatrix, AdjacencyMetric, Region, adjacency_matrix
from .kgraph import CaseEvent

WEEK_S = 7 * 86400.0


class ScError(ValueError):
    """Invalid autocorrelation input."""


class ScClass(Enum):
    NONE = "none"
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class ScResult:
    metric: AdjacencyMetric
    week_index: int
    window: tuple[float, float]
    sc: float
    classification: ScClass


def moran_sc(values: Sequence[float] | Mapping[str, float], weights: AdjacencyMatrix) -> float:
    """Moran autocorrelation of `values` under a fixed adjacency matrix.

    `values` is either a sequence aligned with `weights.ids` or a mapping
    from region id to value.
    """
    if isinstance(values, Mapping):
        missing = [rid for rid in weights.ids if rid not in values]
        if missing:
            raise ScError(f"values missing for regions {missing}")
        v = np.array([float(values[rid]) for rid in weights.ids])
    else:
        v = np.asarray(values, dtype=float)
    n = len(weights.ids)
    if n < 2 or v.shape != (n,):
        raise ScError(f"need one value per region; got shape {v.shape} for {n} regions")
    w = weights.weights
    w_sum = w.sum()
    if w_sum == 0:
        raise ScError("adjacency matrix has no edges")
    dev = v - v.mean()
    denom = float(dev @ dev)
    if denom == 0.0:
        return 0.0
    cross = float(dev @ w @ dev)
    return float((n / w_sum) * cross / denom)


def classify_sc(sc: float) -> ScClass:
    if not math.isfinite(sc):
        raise ScError(f"sc must be finite, got {sc}")
    if sc > 0:
        return ScClass.POSITIVE
    if sc < 0:
        return ScClass.NEGATIVE
    return ScClass.NONE


def weekly_case_matrix(
    cases: Sequence[CaseEvent], regions: Sequence[Region]
) -> tuple[dict[str, list[float]], float]:
    """Per-region weekly counts in 7-day buckets anchored at the first case.

    Returns (region id -> weekly counts, anchor time). Every region gets a
    row; weeks with no cases count zero.
    """
    if not cases:
        return ({r.id: [] for r in regions}, 0.0)
    known = {r.id for r in regions}
    for c in cases:
        if c.region_id not in known:
            raise ScError(f"case references unknown region {c.region_id!r}")
    t0 = min(c.t for c in cases)
    n_weeks = int((max(c.t for c in cases) - t0) // WEEK_S) + 1
    matrix = {r.id: [0.0] * n_weeks for r in regions}
    for c in cases:
        matrix[c.region_id][int((c.t - t0) // WEEK_S)] += c.count
    return matrix, t0


def sc_panel(
    weekly_cases: Mapping[str, Sequence[float]],
    regions: Sequence[Region],
    routes: Optional[Iterable[tuple[str, str]]] = None,
    anchor_t: float = 0.0,
) -> list[ScResult]:
    """One result per (adjacency metric, week), metrics in enum order.

    `weekly_cases` maps every region id to the same-length weekly count
    vector; a missing region or a short vector is reported by name. A metric
    whose adjacency has no edges at all (e.g. direct_route with no routes)
    contributes zero-autocorrelation rows rather than failing the panel.
    """
    lengths = {len(v) for v in weekly_cases.values()}
    if len(lengths) > 1:
        raise ScError(f"weekly case vectors have differing lengths {sorted(lengths)}")
    n_weeks = lengths.pop() if lengths else 0
    for r in regions:
        if r.id not in weekly_cases:
            raise ScError(f"region {r.id} missing from weekly cases")
        if len(weekly_cases[r.id]) != n_weeks:
            raise ScError(f"region {r.id} missing weeks")
    results = []
    for metric in AdjacencyMetric:
        weights = adjacency_matrix(regions, metric, routes=routes)
        edgeless = weights.weights.sum() == 0
        for week in range(n_weeks):
            values = [float(weekly_cases[r.id][week]) for r in regions]
            sc = 0.0 if edgeless else moran_sc(values, weights)
            results.append(
                ScResult(
                    metric=metric,
                    week_index=week,
                    window=(anchor_t + week * WEEK_S, anchor_t + (week + 1) * WEEK_S),
                    sc=sc,
                    classification=classify_sc(sc),
                )
            )
    return results


def panel_to_csv(results: Sequence[ScResult]) -> str:
    out = io.StringIO()
    out.write("metric,week_start,sc,classification\n")
    for r in results:
        out.write(f"{r.metric.value},{r.window[0]!r},{r.sc!r},{r.classification.value}\n")
    return out.getvalue()


def panel_from_csv(text: str) -> list[ScResult]:
    results = []
    week_counter: dict[str, int] = {}
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        metric_s, week_start, sc, classification = line.split(",")
        metric = AdjacencyMetric(metric_s)
        week = week_counter.get(metric_s, 0)
        week_counter[metric_s] = week + 1
        start = float(week_start)
        results.append(
            ScResult(
                metric=metric,
                week_index=week,
                window=(start, start + WEEK_S),
                sc=float(sc),
                classification=ScClass(classification),
            )
        )
    return results
