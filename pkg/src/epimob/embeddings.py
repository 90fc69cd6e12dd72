"""Dense location representations from trajectory corpora.

Locations are embedded with a skip-gram model trained by plain SGD against
the full softmax: for every (center, context) pair within the window radius
the model raises log p(context | center) where

    p(l_o | l_c) = exp(out_o · in_c) / Σ_i exp(out_i · in_c).

The corpus is small enough at desk scale that the exact softmax is
affordable, and it keeps the gradient checkable against finite differences.
Temporal context (day of week, hour, dwell-duration bucket) is encoded as
stacked one-hots with a seeded dense projection; the classifier trains its
own copy of that projection end to end.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

DURATION_BUCKET_EDGES_S = (900.0, 3600.0, 10800.0, 28800.0, 86400.0)
N_DURATION_BUCKETS = len(DURATION_BUCKET_EDGES_S) + 1
TEMPORAL_ONEHOT_WIDTH = 7 + 24 + N_DURATION_BUCKETS


class EmbeddingError(ValueError):
    """Invalid embedding input."""


@dataclass(frozen=True)
class EmbedConfig:
    dim: int = 16
    window: int = 2
    epochs: int = 20
    learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise EmbeddingError("dim must be >= 2")
        if self.window < 1:
            raise EmbeddingError("window must be >= 1")
        if self.learning_rate <= 0:
            raise EmbeddingError("learning_rate must be > 0")


@dataclass(frozen=True)
class EmbeddingTable:
    ids: tuple[str, ...]
    input_vectors: np.ndarray  # (N, dim)
    output_vectors: np.ndarray  # (N, dim)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.input_vectors).all() and np.isfinite(self.output_vectors).all()):
            raise EmbeddingError("embedding tables must be finite")

    def index(self, location_id: str) -> int:
        try:
            return self.ids.index(location_id)
        except ValueError:
            raise EmbeddingError(f"unknown location {location_id!r}") from None

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]


def init_vectors(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-0.5 / dim, 0.5 / dim, size=(n, dim))


def train_location_embeddings(corpus: Sequence[Sequence[str]], cfg: EmbedConfig) -> EmbeddingTable:
    """Skip-gram training over location-id sequences; deterministic per seed."""
    if not corpus:
        raise EmbeddingError("corpus is empty")
    for k, seq in enumerate(corpus):
        if len(seq) < 2:
            raise EmbeddingError(f"corpus sequence {k} has fewer than 2 locations")
    ids = tuple(sorted({loc for seq in corpus for loc in seq}))
    index = {loc: i for i, loc in enumerate(ids)}
    rng = np.random.default_rng(cfg.seed)
    vin = init_vectors(len(ids), cfg.dim, rng)
    vout = init_vectors(len(ids), cfg.dim, rng)
    pairs = list(_skipgram_pairs(corpus, index, cfg.window))
    for _ in range(cfg.epochs):
        for center, context in pairs:
            _, grad_in, grad_out = pair_loss_and_grads(vin, vout, center, context)
            vin[center] -= cfg.learning_rate * grad_in
            vout -= cfg.learning_rate * grad_out
    return EmbeddingTable(ids=ids, input_vectors=vin, output_vectors=vout)


def _skipgram_pairs(corpus, index, window) -> Iterable[tuple[int, int]]:
    for seq in corpus:
        idx = [index[loc] for loc in seq]
        for t, center in enumerate(idx):
            for j in range(-window, window + 1):
                if j == 0:
                    continue
                if 0 <= t + j < len(idx):
                    yield center, idx[t + j]


def pair_loss_and_grads(
    vin: np.ndarray, vout: np.ndarray, center: int, context: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """Negative log-likelihood of one pair and its gradients.

    Returns (loss, d loss/d vin[center], d loss/d vout).
    """
    scores = vout @ vin[center]
    scores -= scores.max()
    exp = np.exp(scores)
    probs = exp / exp.sum()
    loss = -math.log(probs[context])
    dscores = probs.copy()
    dscores[context] -= 1.0
    grad_in = vout.T @ dscores
    grad_out = np.outer(dscores, vin[center])
    return loss, grad_in, grad_out


def corpus_objective(corpus: Sequence[Sequence[str]], table: EmbeddingTable, window: int) -> float:
    """Mean log-probability of all context pairs: the training objective."""
    index = {loc: i for i, loc in enumerate(table.ids)}
    total = 0.0
    count = 0
    tokens = 0
    for seq in corpus:
        tokens += len(seq)
        idx = [index[loc] for loc in seq]
        for t, center in enumerate(idx):
            for j in range(-window, window + 1):
                if j == 0 or not (0 <= t + j < len(idx)):
                    continue
                total += math.log(_probability(table, center, idx[t + j]))
                count += 1
    if count == 0:
        raise EmbeddingError("corpus yields no context pairs")
    return total / tokens


def context_probability(center: str, context: str, table: EmbeddingTable) -> float:
    """Softmax probability of seeing `context` next to `center`."""
    return _probability(table, table.index(center), table.index(context))


def _probability(table: EmbeddingTable, center: int, context: int) -> float:
    scores = table.output_vectors @ table.input_vectors[center]
    scores -= scores.max()
    exp = np.exp(scores)
    return float(exp[context] / exp.sum())


# ---------------------------------------------------------------------------
# Temporal context vectors

@dataclass(frozen=True)
class TemporalVector:
    day_of_week: np.ndarray  # (7,)
    time_bucket: np.ndarray  # (24,)
    duration_bucket: np.ndarray  # (N_DURATION_BUCKETS,)
    projection: np.ndarray  # (dim,)


def duration_bucket(duration_s: float) -> int:
    for k, edge in enumerate(DURATION_BUCKET_EDGES_S):
        if duration_s < edge:
            return k
    return N_DURATION_BUCKETS - 1


def temporal_onehot(day: int, timestamp: float, duration_s: float) -> np.ndarray:
    """Stacked one-hot of (weekday, hour of day, dwell-duration bucket)."""
    if not (0 <= day <= 6):
        raise EmbeddingError(f"day must be in 0..6, got {day}")
    if duration_s < 0:
        raise EmbeddingError("duration_s must be >= 0")
    hour = int((timestamp % 86400.0) // 3600.0)
    vec = np.zeros(TEMPORAL_ONEHOT_WIDTH)
    vec[day] = 1.0
    vec[7 + hour] = 1.0
    vec[31 + duration_bucket(duration_s)] = 1.0
    return vec


def temporal_projection_matrix(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return init_vectors(TEMPORAL_ONEHOT_WIDTH, dim, rng)


def embed_temporal(day: int, timestamp: float, duration_s: float, cfg: EmbedConfig) -> TemporalVector:
    """Deterministic dense vector for a (day, time, dwell duration) triple."""
    onehot = temporal_onehot(day, timestamp, duration_s)
    matrix = temporal_projection_matrix(cfg.dim, cfg.seed)
    return TemporalVector(
        day_of_week=onehot[:7],
        time_bucket=onehot[7:31],
        duration_bucket=onehot[31:],
        projection=onehot @ matrix,
    )


# ---------------------------------------------------------------------------
# CSV persistence

def table_to_csv(table: EmbeddingTable) -> tuple[str, str]:
    """(input vectors CSV, output vectors CSV), one row per location id."""
    return (
        _vectors_csv(table.ids, table.input_vectors),
        _vectors_csv(table.ids, table.output_vectors),
    )


def table_from_csv(input_csv: str, output_csv: str) -> EmbeddingTable:
    ids_in, vin = _vectors_from_csv(input_csv)
    ids_out, vout = _vectors_from_csv(output_csv)
    if ids_in != ids_out:
        raise EmbeddingError("input/output vector files disagree on location ids")
    return EmbeddingTable(ids=ids_in, input_vectors=vin, output_vectors=vout)


def _vectors_csv(ids: Sequence[str], vectors: np.ndarray) -> str:
    out = io.StringIO()
    dim = vectors.shape[1]
    out.write("id," + ",".join(f"v_{k}" for k in range(dim)) + "\n")
    for rid, row in zip(ids, vectors):
        out.write(rid + "," + ",".join(repr(float(x)) for x in row) + "\n")
    return out.getvalue()


def _vectors_from_csv(text: str) -> tuple[tuple[str, ...], np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    ids = []
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        ids.append(parts[0])
        rows.append([float(x) for x in parts[1:]])
    return tuple(ids), np.array(rows)
