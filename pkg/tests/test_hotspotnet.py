import math

import numpy as np
import pytest

from epimob.geo import Region, haversine_m
from epimob.hotspotnet import (
    CONTEXT_WIDTH,
    Ablations,
    NetError,
    NetParams,
    RegionSample,
    TrainConfig,
    accuracy,
    batch_loss_and_grads,
    cross_entropy_loss,
    forward,
    forward_batch,
    gradient_check,
    init_params,
    params_from_text,
    params_to_text,
    predict,
    train,
)
from epimob.kgraph import CaseEvent
from epimob.labels import CLASS_ORDER, HotspotClass, label_region

from conftest import metric_bbox

RNG = np.random.default_rng(99)
VOCAB = ["A", "B", "C", "D", "E"]


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def make_sample(label=HotspotClass.C1, T=3, context_width=CONTEXT_WIDTH, rng=RNG):
    return RegionSample(
        region_id="r0",
        locations=tuple(str(rng.choice(VOCAB)) for _ in range(T)),
        step_days=tuple(int(x) for x in rng.integers(0, 7, T)),
        step_timestamps=tuple(float(x) for x in rng.uniform(0, 86400, T)),
        step_durations=tuple(float(x) for x in rng.uniform(0, 90000, T)),
        step_air_ci=tuple(float(x) for x in rng.uniform(0, 2, T)),
        context=tuple(float(x) for x in rng.normal(size=context_width)),
        label=label,
    )


def small_params(seed=1, context_width=CONTEXT_WIDTH):
    cfg = TrainConfig(cell_size=6, loc_dim=4, time_dim=3, seed=seed)
    return init_params(VOCAB, cfg, context_width=context_width)


class TestForward:
    def test_zero_weights_uniform_output(self):
        params = small_params()
        for name in params.tensors:
            params.tensors[name][:] = 0.0
        probs, _ = forward(make_sample(), params)
        assert probs == pytest.approx([0.2] * 5, abs=1e-12)

    def test_probabilities_normalized(self):
        params = small_params()
        for _ in range(5):
            probs, _ = forward(make_sample(), params)
            assert (probs >= 0).all()
            assert probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_attention_weights_are_distribution(self):
        params = small_params()
        _, trace = forward(make_sample(T=6), params)
        alpha = trace["attention"]
        assert (alpha >= 0).all()
        assert alpha.sum(axis=1) == pytest.approx([1.0], abs=1e-9)

    def test_no_attention_flag_removes_attention_from_trace(self):
        params = small_params()
        _, trace = forward(make_sample(), params, Ablations(no_attention=True))
        assert "attention" not in trace

    def test_batch_permutation_equivariance(self):
        params = small_params()
        samples = [make_sample(T=4) for _ in range(6)]
        batch_probs, _ = forward_batch(samples, params)
        for k, s in enumerate(samples):
            single, _ = forward(s, params)
            assert batch_probs[k] == pytest.approx(single, abs=1e-12)
        order = (3, 1, 5, 0, 4, 2)
        probs2, _ = forward_batch([samples[k] for k in order], params)
        for row, k in enumerate(order):
            assert probs2[row] == pytest.approx(batch_probs[k], abs=1e-12)

    def test_shape_mismatch_rejected(self):
        params = small_params()
        bad = make_sample(context_width=CONTEXT_WIDTH - 1)
        with pytest.raises(NetError):
            forward(bad, params)

    def test_unknown_location_rejected(self):
        params = small_params()
        s = make_sample()
        bad = RegionSample(**{**s.__dict__, "locations": ("Z",) + s.locations[1:]})
        with pytest.raises(NetError):
            forward(bad, params)


class TestGoldenForward:
    """Single-step network with hand-set 2-unit weights, checked against an
    explicit scalar evaluation of the gate equations."""

    def build(self):
        cfg = TrainConfig(cell_size=2, loc_dim=1, time_dim=1, seed=0)
        params = init_params(["L"], cfg, context_width=2)
        t = params.tensors
        t["emb_loc"][:] = [[0.3]]
        t["emb_time"][:] = 0.0
        t["emb_time"][0, 0] = 0.05
        t["emb_time"][7, 0] = 0.10
        t["emb_time"][31, 0] = 0.15
        t["lstm_fwd_W"][:] = [
            [0.1, 0.0, 0.2, 0.2],
            [0.0, 0.1, -0.1, 0.3],
            [0.0, 0.0, 0.1, 0.1],
            [0.1, 0.0, 0.0, -0.2],
            [0.2, 0.1, 0.3, 0.0],
            [0.0, 0.0, 0.2, 0.2],
            [0.1, 0.1, 0.4, -0.1],
            [0.2, 0.0, 0.1, 0.1],
        ]
        t["lstm_fwd_b"][:] = [0.01, -0.02, 0.0, 0.03, 0.02, 0.0, 0.0, 0.01]
        t["lstm_bwd_W"][:] = 0.0
        t["lstm_bwd_b"][:] = 0.0
        t["gru_Wz"][:] = [
            [0.1, 0.0, 0.2, 0.0, 0.1, -0.1],
            [0.0, 0.1, 0.0, 0.2, -0.1, 0.1],
        ]
        t["gru_Wr"][:] = 0.05
        t["gru_Wh"][:] = [
            [0.2, 0.1, 0.3, -0.2, 0.1, 0.0],
            [0.0, 0.2, -0.1, 0.1, 0.05, 0.15],
        ]
        t["out_W"][:] = [[0.5, -0.5], [0.2, 0.1], [0.0, 0.3], [-0.1, 0.2], [0.1, 0.0]]
        t["out_b"][:] = [0.01, 0.02, 0.03, 0.04, 0.05]
        sample = RegionSample(
            region_id="r",
            locations=("L",),
            step_days=(0,),
            step_timestamps=(0.0,),
            step_durations=(0.0,),
            step_air_ci=(0.0,),
            context=(0.5, -0.5),
            label=HotspotClass.C1,
        )
        return params, sample

    def test_matches_scalar_chain(self):
        params, sample = self.build()
        probs, trace = forward(sample, params)

        # embedding: x = [0.3, 0.05 + 0.10 + 0.15]
        x = (0.3, 0.3)
        xhat = (0.0, 0.0, x[0], x[1])

        def dot(row, vec, bias):
            return sum(r * v for r, v in zip(row, vec)) + bias

        w = params.tensors["lstm_fwd_W"]
        b = params.tensors["lstm_fwd_b"]
        i = [sigmoid(dot(w[k], xhat, b[k])) for k in (0, 1)]
        f = [sigmoid(dot(w[k], xhat, b[k])) for k in (2, 3)]
        o = [sigmoid(dot(w[k], xhat, b[k])) for k in (4, 5)]
        g = [math.tanh(dot(w[k], xhat, b[k])) for k in (6, 7)]
        c = [i[k] * g[k] for k in range(2)]
        h = [o[k] * math.tanh(c[k]) for k in range(2)]  # backward stream is zero

        # single step: attention weight is 1, summary equals h
        u = (h[0], h[1], 0.5, -0.5)
        ghat = (0.0, 0.0) + u
        wz = params.tensors["gru_Wz"]
        wh = params.tensors["gru_Wh"]
        z = [sigmoid(dot(wz[k], ghat, 0.0)) for k in range(2)]
        gh = (0.0, 0.0) + u
        hh = [math.tanh(dot(wh[k], gh, 0.0)) for k in range(2)]
        hprime = [z[k] * hh[k] for k in range(2)]

        wo = params.tensors["out_W"]
        bo = params.tensors["out_b"]
        logits = [dot(wo[k], hprime, bo[k]) for k in range(5)]
        peak = max(logits)
        exps = [math.exp(v - peak) for v in logits]
        total = sum(exps)
        expected = [e / total for e in exps]

        assert trace["h"][0][0] == pytest.approx(h, abs=1e-14)
        assert probs == pytest.approx(expected, abs=1e-14)


class TestLoss:
    def test_perfect_prediction_zero(self):
        one_hot = np.array([0.0, 1.0, 0.0, 0.0, 0.0])
        assert cross_entropy_loss(one_hot, one_hot) == 0.0

    def test_uniform_is_log5(self):
        pred = np.full(5, 0.2)
        truth = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
        assert cross_entropy_loss(pred, truth) == pytest.approx(math.log(5))

    def test_batch_mean(self):
        preds = np.array([[0.0, 1.0, 0.0, 0.0, 0.0], [0.2] * 5])
        truth = np.array([[0.0, 1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0, 0.0]])
        assert cross_entropy_loss(preds, truth) == pytest.approx(math.log(5) / 2)

    def test_zero_probability_clamped(self):
        pred = np.array([0.0, 1.0, 0.0, 0.0, 0.0])
        truth = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
        loss = cross_entropy_loss(pred, truth)
        assert math.isfinite(loss)
        assert loss == pytest.approx(-math.log(1e-12))


class TestGradientCheck:
    def samples(self):
        rng = np.random.default_rng(6)
        return [make_sample(label, T=3, rng=rng) for label in (HotspotClass.C1, HotspotClass.C3, HotspotClass.NONE)]

    def test_full_network_accurate(self):
        err = gradient_check(small_params(), self.samples(), epsilon=1e-5)
        assert err < 1e-4

    def test_ablated_branch_has_zero_gradient(self):
        params = small_params()
        flags = Ablations(no_bilstm=True)
        _, grads = batch_loss_and_grads(self.samples(), params, flags)
        assert not grads["lstm_bwd_W"].any()
        assert not grads["lstm_bwd_b"].any()
        assert gradient_check(params, self.samples(), epsilon=1e-5, flags=flags) < 1e-4

    def test_epsilon_precondition(self):
        with pytest.raises(NetError):
            gradient_check(small_params(), self.samples(), epsilon=1e-2)


class TestTraining:
    def dataset(self, n=60):
        rng = np.random.default_rng(12)
        data = []
        for _ in range(n):
            s = make_sample(rng=rng, T=4)
            label = HotspotClass.C1 if s.context[6] > 0 else HotspotClass.C3
            data.append(RegionSample(**{**s.__dict__, "label": label}))
        return data

    def test_deterministic_final_params(self):
        data = self.dataset()
        cfg = TrainConfig(cell_size=8, loc_dim=4, time_dim=3, epochs=5, seed=4)
        p1, c1 = train(data, cfg)
        p2, c2 = train(data, cfg)
        assert c1 == c2
        assert all(np.array_equal(p1.tensors[k], p2.tensors[k]) for k in p1.tensors)

    def test_separable_data_loss_collapses(self):
        data = self.dataset()
        cfg = TrainConfig(cell_size=8, loc_dim=4, time_dim=3, epochs=100, seed=4, learning_rate=5e-3)
        _, curve = train(data, cfg)
        assert curve[-1] < 0.1 * curve[0]

    def test_single_class_rejected(self):
        data = [make_sample(HotspotClass.C1, T=3) for _ in range(8)]
        with pytest.raises(NetError):
            train(data, TrainConfig(epochs=1))

    def test_no_bilstm_matches_forward_only_reference(self):
        params = small_params(seed=8)
        rng = np.random.default_rng(3)
        for _ in range(10):
            sample = make_sample(T=4, rng=rng)
            _, trace = forward(sample, params, Ablations(no_bilstm=True))
            ref = reference_forward_lstm(sample, params)
            for t in range(4):
                assert trace["h"][t][0] == pytest.approx(ref[t], abs=1e-12)


def reference_forward_lstm(sample, params):
    """Minimal independent forward-only LSTM over the embedded sequence."""
    from epimob.embeddings import temporal_onehot

    t_ten = params.tensors
    h_dim = params.hidden
    idx = {loc: k for k, loc in enumerate(params.location_ids)}
    hs = []
    h = np.zeros(h_dim)
    c = np.zeros(h_dim)
    for t in range(len(sample.locations)):
        x_loc = t_ten["emb_loc"][idx[sample.locations[t]]]
        oh = temporal_onehot(sample.step_days[t], sample.step_timestamps[t], sample.step_durations[t])
        x = np.concatenate([x_loc, oh @ t_ten["emb_time"]])
        xhat = np.concatenate([h, x])
        pre = t_ten["lstm_fwd_W"] @ xhat + t_ten["lstm_fwd_b"]
        i = 1 / (1 + np.exp(-pre[:h_dim]))
        f = 1 / (1 + np.exp(-pre[h_dim : 2 * h_dim]))
        o = 1 / (1 + np.exp(-pre[2 * h_dim : 3 * h_dim]))
        g = np.tanh(pre[3 * h_dim :])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs.append(h)
    return hs


class TestLabelRegion:
    def region(self):
        return Region(id="R", bbox=metric_bbox(5000, 5000, lat0=20.0))

    def cases_at(self, region, distance_m, n, t=0.0):
        clat, clon = region.center
        lat = clat + distance_m / 111_320.0
        return [CaseEvent(region_id=region.id, t=t, count=1.0, lat=lat, lon=clon) for _ in range(n)]

    def test_dense_cluster_is_c1(self):
        region = self.region()
        assert label_region(self.cases_at(region, 100.0, 25), region) is HotspotClass.C1

    def test_sparse_nearby_is_c3(self):
        region = self.region()
        assert label_region(self.cases_at(region, 800.0, 3), region) is HotspotClass.C3

    def test_ring_cluster_is_c2(self):
        region = self.region()
        assert label_region(self.cases_at(region, 700.0, 60), region) is HotspotClass.C2

    def test_definition_gap_yields_none(self):
        region = self.region()
        cases = self.cases_at(region, 100.0, 15) + self.cases_at(region, 1800.0, 3)
        # 15 within 500 m (<=20), 15 within 1 km (in [5, 50]), 18 within 2 km (>=10)
        assert label_region(cases, region) is HotspotClass.NONE

    def test_monotone_adding_cases_preserves_hotspot(self):
        region = self.region()
        rng = np.random.default_rng(21)
        for _ in range(200):
            cases = []
            for _ in range(int(rng.integers(0, 40))):
                cases += self.cases_at(region, float(rng.uniform(0, 2500)), 1)
            before = label_region(cases, region)
            extra = self.cases_at(region, float(rng.uniform(0, 2500)), 1)
            after = label_region(cases + extra, region)
            if before.is_hotspot:
                assert after.is_hotspot


class TestEmbeddingInit:
    def test_location_table_seeds_the_net(self):
        from epimob.embeddings import EmbedConfig, train_location_embeddings

        corpus = [["A", "B", "C", "A"], ["C", "D", "E", "D"]]
        table = train_location_embeddings(corpus, EmbedConfig(dim=4, window=1, epochs=2, seed=0))
        cfg = TrainConfig(cell_size=6, loc_dim=4, time_dim=3, seed=1)
        params = init_params(table.ids, cfg, loc_init=table.input_vectors)
        assert np.array_equal(params.tensors["emb_loc"], table.input_vectors)

    def test_shape_mismatch_rejected(self):
        cfg = TrainConfig(cell_size=6, loc_dim=4, time_dim=3, seed=1)
        with pytest.raises(NetError):
            init_params(VOCAB, cfg, loc_init=np.zeros((len(VOCAB), 9)))


class TestPersistence:
    def test_params_text_round_trip(self):
        params = small_params(seed=13)
        parsed = params_from_text(params_to_text(params))
        assert parsed.location_ids == params.location_ids
        for name, tensor in params.tensors.items():
            assert np.array_equal(parsed.tensors[name], tensor), name
        assert np.array_equal(parsed.ctx_proj, params.ctx_proj)

    def test_header_required(self):
        with pytest.raises(NetError):
            params_from_text("locations A\n")
