"""Recurrent hotspot classifier: embeddings -> bi-LSTM -> attention -> GRU -> softmax.

Per-step inputs are a location embedding concatenated with a projected
temporal one-hot. A bidirectional LSTM encodes the sequence; its output at
each step is the *sum* of the forward and backward hidden states. Dot-product
attention scores each step against the sample's context vector (mapped to
hidden width by a fixed seeded projection, so attention itself has no
trainable weights); in the initial-outbreak phase an additive bias
proportional to the step's air-connectivity index steers attention toward
long-distance travel steps. The attention-weighted summary, concatenated
with the context vector, drives a GRU (no gate biases) whose final state
feeds a 5-way softmax over the four case-density classes plus NONE.

Ablation flags swap attention for mean pooling, drop the backward LSTM
stream, zero the knowledge-graph-derived context entries, or drop the
air-connectivity attention bias. All gradients are exact and checkable
against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .embeddings import TEMPORAL_ONEHOT_WIDTH, init_vectors, temporal_onehot
from .labels import CLASS_ORDER, HotspotClass, label_region

N_CLASSES = 5
LOG_FLOOR = 1e-12

CONTEXT_LAYOUT = (
    ("sc", 6),
    ("population_density", 1),
    ("demography", 3),
    ("poi_counts", 4),
    ("pattern_flags", 2),
    ("connectivity", 1),
    ("mobility_deltas", 2),
    ("containment_14d", 1),
)
CONTEXT_WIDTH = sum(width for _, width in CONTEXT_LAYOUT)
SC_SLICE = slice(0, 6)
PATTERN_SLICE = slice(14, 16)


class NetError(ValueError):
    """Shape mismatch or invalid configuration."""


@dataclass(frozen=True)
class Ablations:
    no_pkg_features: bool = False
    no_attention: bool = False
    no_bilstm: bool = False
    no_two_phase: bool = False


@dataclass(frozen=True)
class TrainConfig:
    cell_size: int = 64
    batch_size: int = 10
    epochs: int = 100
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    loc_dim: int = 12
    time_dim: int = 8
    ablations: Ablations = Ablations()

    def __post_init__(self) -> None:
        if self.cell_size < 1 or self.batch_size < 1 or self.epochs < 1:
            raise NetError("cell_size, batch_size, and epochs must be >= 1")


@dataclass(frozen=True)
class RegionSample:
    """One region's recent mobility trace plus its contextual features."""

    region_id: str
    locations: tuple[str, ...]
    step_days: tuple[int, ...]
    step_timestamps: tuple[float, ...]
    step_durations: tuple[float, ...]
    context: tuple[float, ...]
    label: HotspotClass
    step_air_ci: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        t = len(self.locations)
        if t < 1:
            raise NetError("location sequence must have length >= 1")
        for name in ("step_days", "step_timestamps", "step_durations"):
            if len(getattr(self, name)) != t:
                raise NetError(f"{name} length must match the location sequence")
        if self.step_air_ci and len(self.step_air_ci) != t:
            raise NetError("step_air_ci length must match the location sequence")

    @property
    def air_ci(self) -> tuple[float, ...]:
        return self.step_air_ci or (0.0,) * len(self.locations)


TRAINABLE_TENSORS = (
    "emb_loc",
    "emb_time",
    "lstm_fwd_W",
    "lstm_fwd_b",
    "lstm_bwd_W",
    "lstm_bwd_b",
    "gru_Wz",
    "gru_Wr",
    "gru_Wh",
    "out_W",
    "out_b",
)


@dataclass
class NetParams:
    """All weights, keyed by tensor name.

    LSTM weights are stacked over the gate order (input, forget, output,
    candidate): shape (4H, H + d). GRU weights follow the no-bias gate
    equations with input [state, attention summary, context]. `ctx_proj`
    aligns the context vector with the hidden width for the attention dot
    product; it is seeded, fixed, and never trained.
    """

    location_ids: tuple[str, ...]
    tensors: dict[str, np.ndarray]
    ctx_proj: np.ndarray

    @property
    def hidden(self) -> int:
        return self.tensors["out_W"].shape[1]

    @property
    def context_width(self) -> int:
        return self.ctx_proj.shape[0]

    def loc_index(self, loc: str) -> int:
        try:
            return self.location_ids.index(loc)
        except ValueError:
            raise NetError(f"unknown location {loc!r}") from None

    def copy(self) -> "NetParams":
        return NetParams(
            location_ids=self.location_ids,
            tensors={k: v.copy() for k, v in self.tensors.items()},
            ctx_proj=self.ctx_proj.copy(),
        )


def init_params(
    location_ids: Sequence[str],
    cfg: TrainConfig,
    context_width: int = CONTEXT_WIDTH,
    loc_init: Optional[np.ndarray] = None,
) -> NetParams:
    """Seeded parameter initialization; `loc_init` seeds the location table."""
    rng = np.random.default_rng(cfg.seed)
    h, dl, dt = cfg.cell_size, cfg.loc_dim, cfg.time_dim
    d = dl + dt
    u = h + context_width  # GRU exogenous input width

    def uniform(shape):
        fan_in = shape[-1] if len(shape) > 1 else shape[0]
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    tensors = {
        "emb_loc": uniform((len(location_ids), dl)),
        "emb_time": uniform((TEMPORAL_ONEHOT_WIDTH, dt)),
        "lstm_fwd_W": uniform((4 * h, h + d)),
        "lstm_fwd_b": np.zeros(4 * h),
        "lstm_bwd_W": uniform((4 * h, h + d)),
        "lstm_bwd_b": np.zeros(4 * h),
        "gru_Wz": uniform((h, h + u)),
        "gru_Wr": uniform((h, h + u)),
        "gru_Wh": uniform((h, h + u)),
        "out_W": uniform((N_CLASSES, h)),
        "out_b": np.zeros(N_CLASSES),
    }
    if loc_init is not None:
        if loc_init.shape != tensors["emb_loc"].shape:
            raise NetError(
                f"location init shape {loc_init.shape} != {tensors['emb_loc'].shape}"
            )
        tensors["emb_loc"] = loc_init.copy()
    ctx_proj = init_vectors(context_width, h, np.random.default_rng(cfg.seed + 1)) * math.sqrt(h)
    return NetParams(location_ids=tuple(location_ids), tensors=tensors, ctx_proj=ctx_proj)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class EncodedBatch:
    loc_idx: np.ndarray  # (B, T) int
    time_oh: np.ndarray  # (B, T, 37)
    air: np.ndarray  # (B, T)
    ctx: np.ndarray  # (B, C)
    labels_idx: np.ndarray  # (B,) int

    def take(self, rows: np.ndarray) -> "EncodedBatch":
        return EncodedBatch(
            loc_idx=self.loc_idx[rows],
            time_oh=self.time_oh[rows],
            air=self.air[rows],
            ctx=self.ctx[rows],
            labels_idx=self.labels_idx[rows],
        )

    def __len__(self) -> int:
        return self.loc_idx.shape[0]


def encode_dataset(samples: Sequence[RegionSample], params: NetParams) -> EncodedBatch:
    """Dense arrays for a sample set; done once per training run."""
    t_len = len(samples[0].locations)
    c = params.context_width
    for s in samples:
        if len(s.locations) != t_len:
            raise NetError("all samples in a batch must share a sequence length")
        if len(s.context) != c:
            raise NetError(f"context width {len(s.context)} != expected {c}")
    index = {loc: k for k, loc in enumerate(params.location_ids)}
    try:
        loc_idx = np.array([[index[l] for l in s.locations] for s in samples])
    except KeyError as exc:
        raise NetError(f"unknown location {exc.args[0]!r}") from None
    time_oh = np.array(
        [
            [temporal_onehot(s.step_days[t], s.step_timestamps[t], s.step_durations[t]) for t in range(t_len)]
            for s in samples
        ]
    )
    air = np.array([s.air_ci for s in samples], dtype=float)
    ctx = np.array([s.context for s in samples], dtype=float)
    labels_idx = np.array([CLASS_ORDER.index(s.label) for s in samples])
    return EncodedBatch(loc_idx=loc_idx, time_oh=time_oh, air=air, ctx=ctx, labels_idx=labels_idx)


def _lstm_direction(x: np.ndarray, w: np.ndarray, b: np.ndarray, reverse: bool):
    """Run one LSTM direction over (B, T, d) inputs; returns states + caches."""
    bsz, t_len, _ = x.shape
    h_dim = w.shape[0] // 4
    order = range(t_len - 1, -1, -1) if reverse else range(t_len)
    h = np.zeros((bsz, h_dim))
    c = np.zeros((bsz, h_dim))
    hs = [None] * t_len
    caches = [None] * t_len
    for t in order:
        xhat = np.concatenate([h, x[:, t, :]], axis=1)
        pre = xhat @ w.T + b
        i = _sigmoid(pre[:, :h_dim])
        f = _sigmoid(pre[:, h_dim : 2 * h_dim])
        o = _sigmoid(pre[:, 2 * h_dim : 3 * h_dim])
        g = np.tanh(pre[:, 3 * h_dim :])
        c_new = f * c + i * g
        h_new = o * np.tanh(c_new)
        caches[t] = (xhat, i, f, o, g, c, c_new)
        h, c = h_new, c_new
        hs[t] = h
    return hs, caches


def _lstm_direction_backward(dhs, x, w, caches, reverse: bool):
    """Backprop one direction; returns (dW, db, dx)."""
    bsz, t_len, d_in = x.shape
    h_dim = w.shape[0] // 4
    dw = np.zeros_like(w)
    db = np.zeros(4 * h_dim)
    dx = np.zeros_like(x)
    order = range(t_len) if reverse else range(t_len - 1, -1, -1)
    dh_next = np.zeros((bsz, h_dim))
    dc_next = np.zeros((bsz, h_dim))
    for t in order:
        xhat, i, f, o, g, c_prev, c_new = caches[t]
        dh = dhs[t] + dh_next
        tanh_c = np.tanh(c_new)
        do = dh * tanh_c
        dc = dc_next + dh * o * (1.0 - tanh_c ** 2)
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        dc_next = dc * f
        dpre = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g ** 2)], axis=1
        )
        dw += dpre.T @ xhat
        db += dpre.sum(axis=0)
        dxhat = dpre @ w
        dh_next = dxhat[:, :h_dim]
        dx[:, t, :] = dxhat[:, h_dim:]
    return dw, db, dx


def forward_batch(
    samples: Sequence[RegionSample],
    params: NetParams,
    flags: Ablations = Ablations(),
) -> tuple[np.ndarray, dict]:
    """Class probabilities (B, 5) and a trace with every activation."""
    if not samples:
        raise NetError("empty batch")
    return _forward_encoded(encode_dataset(samples, params), params, flags)


def _forward_encoded(enc: EncodedBatch, params: NetParams, flags: Ablations) -> tuple[np.ndarray, dict]:
    loc_idx, time_oh, air, ctx = enc.loc_idx, enc.time_oh, enc.air, enc.ctx
    p = params.tensors
    bsz, t_len = loc_idx.shape
    h_dim = params.hidden

    m_eff = ctx.copy()
    if flags.no_pkg_features:
        m_eff[:, SC_SLICE] = 0.0
        m_eff[:, PATTERN_SLICE] = 0.0

    x_loc = p["emb_loc"][loc_idx]  # (B, T, dl)
    x_time = time_oh @ p["emb_time"]  # (B, T, dt)
    x = np.concatenate([x_loc, x_time], axis=2)

    hs_f, cache_f = _lstm_direction(x, p["lstm_fwd_W"], p["lstm_fwd_b"], reverse=False)
    if flags.no_bilstm:
        hs = [hf.copy() for hf in hs_f]
        hs_b, cache_b = None, None
    else:
        hs_b, cache_b = _lstm_direction(x, p["lstm_bwd_W"], p["lstm_bwd_b"], reverse=True)
        hs = [hf + hb for hf, hb in zip(hs_f, hs_b)]

    trace: dict = {"x": x, "h": hs, "m_eff": m_eff}
    if flags.no_attention:
        r_att = np.mean(hs, axis=0)
    else:
        proj = m_eff @ params.ctx_proj  # (B, H)
        scores = np.stack([(h * proj).sum(axis=1) for h in hs], axis=1)  # (B, T)
        if not flags.no_two_phase:
            scores = scores + air
        alpha = _softmax(scores, axis=1)
        r_att = np.einsum("bt,tbh->bh", alpha, np.stack(hs))
        trace["attention"] = alpha
        trace["scores"] = scores
        trace["ctx_projected"] = proj

    u = np.concatenate([r_att, m_eff], axis=1)  # (B, H + C)
    hprime = np.zeros((bsz, h_dim))
    gru_cache = []
    for _ in range(t_len):
        ghat = np.concatenate([hprime, u], axis=1)
        z = _sigmoid(ghat @ p["gru_Wz"].T)
        rr = _sigmoid(ghat @ p["gru_Wr"].T)
        gh = np.concatenate([rr * hprime, u], axis=1)
        hh = np.tanh(gh @ p["gru_Wh"].T)
        h_new = (1.0 - z) * hprime + z * hh
        gru_cache.append((hprime, ghat, z, rr, gh, hh))
        hprime = h_new

    logits = hprime @ p["out_W"].T + p["out_b"]
    probs = _softmax(logits, axis=1)
    trace.update(
        {
            "r_att": r_att,
            "u": u,
            "gru_cache": gru_cache,
            "gru_final": hprime,
            "logits": logits,
            "probs": probs,
            "loc_idx": loc_idx,
            "time_oh": time_oh,
            "cache_f": cache_f,
            "cache_b": cache_b,
            "air": air,
        }
    )
    return probs, trace


def forward(
    sample: RegionSample, params: NetParams, flags: Ablations = Ablations()
) -> tuple[np.ndarray, dict]:
    probs, trace = forward_batch([sample], params, flags)
    return probs[0], trace


def cross_entropy_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean negative log-likelihood; probabilities floored at 1e-12.

    `pred` and `truth` are (B, n_classes) with one-hot truth rows, or single
    (n_classes,) vectors.
    """
    pred = np.atleast_2d(pred)
    truth = np.atleast_2d(truth)
    if pred.shape != truth.shape:
        raise NetError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    clamped = np.maximum(pred, LOG_FLOOR)
    return float(-(truth * np.log(clamped)).sum(axis=1).mean())


def backward_batch(
    params: NetParams,
    trace: dict,
    labels_idx: np.ndarray,
    flags: Ablations = Ablations(),
) -> dict[str, np.ndarray]:
    """Exact gradients of the mean cross-entropy for one batch."""
    p = params.tensors
    bsz, t_len = trace["loc_idx"].shape
    h_dim = params.hidden
    grads = {name: np.zeros_like(p[name]) for name in TRAINABLE_TENSORS}

    probs = trace["probs"]
    dlogits = probs.copy()
    dlogits[np.arange(bsz), labels_idx] -= 1.0
    dlogits /= bsz

    grads["out_W"] += dlogits.T @ trace["gru_final"]
    grads["out_b"] += dlogits.sum(axis=0)
    dh = dlogits @ p["out_W"]

    du = np.zeros((bsz, trace["u"].shape[1]))
    for hprev, ghat, z, rr, gh, hh in reversed(trace["gru_cache"]):
        dz = dh * (hh - hprev)
        dhh = dh * z
        dhprev = dh * (1.0 - z)
        dzh = dhh * (1.0 - hh ** 2)
        grads["gru_Wh"] += dzh.T @ gh
        dgh = dzh @ p["gru_Wh"]
        drh = dgh[:, :h_dim]
        du += dgh[:, h_dim:]
        drr = drh * hprev
        dhprev += drh * rr
        dzz = dz * z * (1.0 - z)
        dzr = drr * rr * (1.0 - rr)
        grads["gru_Wz"] += dzz.T @ ghat
        grads["gru_Wr"] += dzr.T @ ghat
        dghat = dzz @ p["gru_Wz"] + dzr @ p["gru_Wr"]
        dhprev += dghat[:, :h_dim]
        du += dghat[:, h_dim:]
        dh = dhprev

    dr_att = du[:, :h_dim]
    hs = trace["h"]
    dhs = [np.zeros((bsz, h_dim)) for _ in range(t_len)]
    if flags.no_attention:
        for t in range(t_len):
            dhs[t] += dr_att / t_len
    else:
        alpha = trace["attention"]
        proj = trace["ctx_projected"]
        dalpha = np.stack([(dr_att * hs[t]).sum(axis=1) for t in range(t_len)], axis=1)
        dscores = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        for t in range(t_len):
            dhs[t] += alpha[:, t : t + 1] * dr_att
            dhs[t] += dscores[:, t : t + 1] * proj

    x = trace["x"]
    dw_f, db_f, dx = _lstm_direction_backward(dhs, x, p["lstm_fwd_W"], trace["cache_f"], reverse=False)
    grads["lstm_fwd_W"] += dw_f
    grads["lstm_fwd_b"] += db_f
    if not flags.no_bilstm:
        dw_b, db_b, dx_b = _lstm_direction_backward(dhs, x, p["lstm_bwd_W"], trace["cache_b"], reverse=True)
        grads["lstm_bwd_W"] += dw_b
        grads["lstm_bwd_b"] += db_b
        dx = dx + dx_b

    dl = p["emb_loc"].shape[1]
    dx_loc = dx[:, :, :dl]
    dx_time = dx[:, :, dl:]
    np.add.at(grads["emb_loc"], trace["loc_idx"].reshape(-1), dx_loc.reshape(-1, dl))
    grads["emb_time"] += np.einsum("btw,btd->wd", trace["time_oh"], dx_time)
    return grads


def _loss_and_grads_encoded(
    enc: EncodedBatch, params: NetParams, flags: Ablations
) -> tuple[float, dict[str, np.ndarray]]:
    probs, trace = _forward_encoded(enc, params, flags)
    truth = np.zeros_like(probs)
    truth[np.arange(len(enc)), enc.labels_idx] = 1.0
    loss = cross_entropy_loss(probs, truth)
    grads = backward_batch(params, trace, enc.labels_idx, flags)
    return loss, grads


def batch_loss_and_grads(
    samples: Sequence[RegionSample], params: NetParams, flags: Ablations = Ablations()
) -> tuple[float, dict[str, np.ndarray]]:
    return _loss_and_grads_encoded(encode_dataset(samples, params), params, flags)


def train(
    dataset: Sequence[RegionSample], cfg: TrainConfig, params: Optional[NetParams] = None
) -> tuple[NetParams, list[float]]:
    """Adam training; returns final parameters and the per-epoch loss curve."""
    if not dataset:
        raise NetError("dataset is empty")
    if len({s.label for s in dataset}) < 2:
        raise NetError("dataset labels must cover at least 2 classes")
    if params is None:
        ids = tuple(sorted({l for s in dataset for l in s.locations}))
        params = init_params(ids, cfg, context_width=len(dataset[0].context))
    else:
        params = params.copy()
    flags = cfg.ablations
    rng = np.random.default_rng(cfg.seed)
    encoded = encode_dataset(dataset, params)
    moment1 = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    moment2 = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    step = 0
    curve = []
    n = len(dataset)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            batch = encoded.take(order[start : start + cfg.batch_size])
            loss, grads = _loss_and_grads_encoded(batch, params, flags)
            losses.append(loss)
            step += 1
            for name in TRAINABLE_TENSORS:
                g = grads[name]
                moment1[name] = cfg.beta1 * moment1[name] + (1 - cfg.beta1) * g
                moment2[name] = cfg.beta2 * moment2[name] + (1 - cfg.beta2) * g * g
                m_hat = moment1[name] / (1 - cfg.beta1 ** step)
                v_hat = moment2[name] / (1 - cfg.beta2 ** step)
                params.tensors[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
        curve.append(float(np.mean(losses)))
    return params, curve


def predict(
    samples: Sequence[RegionSample], params: NetParams, flags: Ablations = Ablations()
) -> list[HotspotClass]:
    out: list[Optional[HotspotClass]] = [None] * len(samples)
    by_len: dict[int, list[int]] = {}
    for k, s in enumerate(samples):
        by_len.setdefault(len(s.locations), []).append(k)
    for rows in by_len.values():
        probs, _ = forward_batch([samples[k] for k in rows], params, flags)
        for k, row in zip(rows, probs):
            out[k] = CLASS_ORDER[int(np.argmax(row))]
    return out  # type: ignore[return-value]


def accuracy(
    samples: Sequence[RegionSample], params: NetParams, flags: Ablations = Ablations()
) -> float:
    preds = predict(samples, params, flags)
    return float(np.mean([p is s.label for p, s in zip(preds, samples)]))


def gradient_check(
    params: NetParams,
    samples: Sequence[RegionSample],
    epsilon: float = 1e-5,
    flags: Ablations = Ablations(),
) -> float:
    """Max per-tensor relative error between analytic and numeric gradients."""
    if not (1e-7 <= epsilon <= 1e-4):
        raise NetError(f"epsilon must be in [1e-7, 1e-4], got {epsilon}")

    def loss_fn() -> float:
        labels_idx = np.array([CLASS_ORDER.index(s.label) for s in samples])
        probs, _ = forward_batch(samples, params, flags)
        truth = np.zeros_like(probs)
        truth[np.arange(len(samples)), labels_idx] = 1.0
        return cross_entropy_loss(probs, truth)

    _, analytic = batch_loss_and_grads(samples, params, flags)
    worst = 0.0
    for name in TRAINABLE_TENSORS:
        tensor = params.tensors[name]
        numeric = np.zeros_like(tensor)
        flat = tensor.reshape(-1)
        num_flat = numeric.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + epsilon
            up = loss_fn()
            flat[k] = orig - epsilon
            down = loss_fn()
            flat[k] = orig
            num_flat[k] = (up - down) / (2 * epsilon)
        ga, gn = analytic[name], numeric
        denom = np.linalg.norm(ga) + np.linalg.norm(gn)
        err = 0.0 if denom < 1e-12 else float(np.linalg.norm(ga - gn) / denom)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# Parameter persistence (versioned plain text, named tensors)

_PARAMS_HEADER = "# epimob-net-params v1"


def params_to_text(params: NetParams) -> str:
    lines = [_PARAMS_HEADER, "locations " + ",".join(params.location_ids)]
    for name in list(TRAINABLE_TENSORS) + ["ctx_proj"]:
        tensor = params.ctx_proj if name == "ctx_proj" else params.tensors[name]
        mat = np.atleast_2d(tensor)
        lines.append(f"tensor {name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> NetParams:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _PARAMS_HEADER:
        raise NetError(f"missing params header {_PARAMS_HEADER!r}")
    if not lines[1].startswith("locations "):
        raise NetError("missing locations line")
    ids = tuple(lines[1].removeprefix("locations ").split(","))
    tensors: dict[str, np.ndarray] = {}
    k = 2
    while k < len(lines):
        line = lines[k].strip()
        if not line:
            k += 1
            continue
        head = line.split()
        if head[0] != "tensor" or len(head) != 4:
            raise NetError(f"line {k + 1}: expected 'tensor name rows cols'")
        name, rows, cols = head[1], int(head[2]), int(head[3])
        block = []
        for r in range(rows):
            block.append([float(v) for v in lines[k + 1 + r].split()])
        mat = np.array(block)
        if mat.shape != (rows, cols):
            raise NetError(f"tensor {name}: expected shape {(rows, cols)}, got {mat.shape}")
        tensors[name] = mat
        k += 1 + rows
    ctx_proj = tensors.pop("ctx_proj")
    for vec_name in ("lstm_fwd_b", "lstm_bwd_b", "out_b"):
        if vec_name in tensors:
            tensors[vec_name] = tensors[vec_name].reshape(-1)
    missing = set(TRAINABLE_TENSORS) - tensors.keys()
    if missing:
        raise NetError(f"params file missing tensors: {sorted(missing)}")
    return NetParams(location_ids=ids, tensors=tensors, ctx_proj=ctx_proj)
