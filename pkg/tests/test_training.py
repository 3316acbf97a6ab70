import json
import math

import numpy as np
import pytest

from natkit.corpus import TokenSeq, synth_task
from natkit.glancing import GlanceSchedule
from natkit.model import ModelConfig, init_params
from natkit.training import (
    AdamState,
    DivergedError,
    TrainConfig,
    adam_update,
    lr_at,
    train_model,
    train_step,
    validation_loss,
)


def small_cfg(**kw):
    base = dict(vocab_size=15, d_model=8, enc_layers=1, dec_layers=1, max_len=32)
    base.update(kw)
    return ModelConfig(**base)


def make_batch(n=6, modes=1, seed=0, lens=(3, 5)):
    return synth_task(n, lens, modes, seed=seed, n_words=10).pairs


class TestSchedule:
    def test_one_based(self):
        with pytest.raises(ValueError):
            lr_at(0, 1e-3, 100)

    def test_peak_at_warmup(self):
        assert lr_at(100, 4e-3, 100) == pytest.approx(4e-3)
        assert lr_at(50, 4e-3, 100) == pytest.approx(2e-3)
        assert lr_at(400, 4e-3, 100) == pytest.approx(2e-3)  # sqrt(100/400) = 1/2

    def test_monotone_rise_then_decay(self):
        vals = [lr_at(s, 1.0, 20) for s in range(1, 100)]
        peak = max(vals)
        assert vals.index(peak) == 19
        assert all(a < b or b == peak for a, b in zip(vals[:19], vals[1:20]))
        assert all(a >= b for a, b in zip(vals[19:], vals[20:]))


class TestAdam:
    def test_hand_step(self):
        params = {"w": np.array([1.0])}
        grads = {"w": np.array([0.5])}
        new, state = adam_update(params, grads, AdamState.zeros(params), 0.1,
                                 beta1=0.9, beta2=0.98, eps=1e-8)
        # m_hat = g, v_hat = g^2 after bias correction at t=1
        assert new["w"][0] == pytest.approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8), rel=1e-12)
        assert state.t == 1
        assert state.m["w"][0] == pytest.approx(0.05)
        assert state.v["w"][0] == pytest.approx(0.02 * 0.25)

    def test_first_step_size_is_gradient_scale_free(self):
        for g in (1e-6, 1.0, 1e6):
            params = {"w": np.array([0.0])}
            grads = {"w": np.array([g])}
            new, _ = adam_update(params, grads, AdamState.zeros(params), 0.01,
                                 beta1=0.9, beta2=0.98, eps=1e-12)
            assert abs(new["w"][0]) == pytest.approx(0.01, rel=1e-5)


class TestConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            TrainConfig(steps=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(warmup=0)
        with pytest.raises(ValueError):
            TrainConfig(beta1=1.0)
        with pytest.raises(ValueError):
            TrainConfig(adam_eps=0.0)
        with pytest.raises(ValueError):
            TrainConfig(keep_best=0)


class TestTrainStep:
    def test_bitwise_deterministic(self):
        cfg = small_cfg()
        hyper = TrainConfig(seed=4)
        batch = make_batch()
        p0 = init_params(cfg, 0)
        opt0 = AdamState.zeros(p0)
        a, _, rec_a = train_step(p0, cfg, batch, hyper, opt0, step=1)
        b, _, rec_b = train_step(p0, cfg, batch, hyper, AdamState.zeros(p0), step=1)
        assert all(np.array_equal(a[k], b[k]) for k in a)
        assert rec_a == rec_b

    def test_zero_lambda_matches_no_schedule(self):
        cfg = small_cfg(upsample=2)
        hyper = TrainConfig(seed=4)
        batch = make_batch()
        p0 = init_params(cfg, 0)
        sched = GlanceSchedule(0.0, 0.0, 0, 10)
        a, _, _ = train_step(p0, cfg, batch, hyper, AdamState.zeros(p0), 1, sched)
        b, _, _ = train_step(p0, cfg, batch, hyper, AdamState.zeros(p0), 1, None)
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_glancing_changes_update_and_is_recorded(self):
        cfg = small_cfg(upsample=2, dec_self_attention=(True,))
        hyper = TrainConfig(seed=4)
        batch = make_batch(8)
        p0 = init_params(cfg, 0)
        sched = GlanceSchedule(0.5, 0.0, 0, 10)
        a, _, rec = train_step(p0, cfg, batch, hyper, AdamState.zeros(p0), 1, sched)
        b, _, _ = train_step(p0, cfg, batch, hyper, AdamState.zeros(p0), 1, None)
        assert rec["lambda"] == 0.5
        assert any(not np.array_equal(a[k], b[k]) for k in a)

    def test_infeasible_pair_skipped(self):
        cfg = small_cfg(upsample=2)
        hyper = TrainConfig(seed=1)
        src = TokenSeq((5, 6), "source")
        tgt = TokenSeq((7, 7, 7), "target")  # needs 5 slots, table has 4
        p0 = init_params(cfg, 0)
        params, _, rec = train_step(p0, cfg, [(src, tgt)], hyper, AdamState.zeros(p0), 1)
        assert rec["skipped"] == 1
        assert rec["loss"] == 0.0
        assert all(np.array_equal(params[k], p0[k]) for k in params)

    def test_length_clamp_counted(self):
        cfg = small_cfg(length_bound=2)
        hyper = TrainConfig(seed=1)
        src = TokenSeq((5, 6, 7), "source")
        tgt = TokenSeq((8, 9, 10, 11, 12, 13, 14, 5), "target")  # offset +5 > 2
        p0 = init_params(cfg, 0)
        _, _, rec = train_step(p0, cfg, [(src, tgt)], hyper, AdamState.zeros(p0), 1)
        assert rec["components"]["length_clamped"] == 1.0

    def test_nonfinite_loss_raises(self):
        cfg = small_cfg()
        hyper = TrainConfig(seed=1)
        p0 = init_params(cfg, 0)
        p0["emb"][5, 0] = np.inf
        with pytest.raises(DivergedError) as exc:
            with np.errstate(all="ignore"):
                train_step(p0, cfg, make_batch(), hyper, AdamState.zeros(p0), 7)
        assert exc.value.step == 7

    def test_components_recorded(self):
        cfg = small_cfg()
        hyper = TrainConfig(seed=2)
        p0 = init_params(cfg, 0)
        _, _, rec = train_step(p0, cfg, make_batch(), hyper, AdamState.zeros(p0), 1)
        assert set(rec["components"]) == {"token", "length", "length_clamped"}
        assert rec["loss"] == pytest.approx(
            rec["components"]["token"] + hyper.length_loss_weight * rec["components"]["length"]
        )
        assert "lr" in rec


class TestValidation:
    def test_mean_over_feasible_pairs(self):
        cfg = small_cfg(upsample=2)
        hyper = TrainConfig()
        p = init_params(cfg, 3)
        good = make_batch(4)
        bad = (TokenSeq((5, 6), "source"), TokenSeq((7, 7, 7), "target"))
        v_good = validation_loss(p, cfg, good, hyper)
        v_mixed = validation_loss(p, cfg, list(good) + [bad], hyper)
        assert v_good == pytest.approx(v_mixed)
        assert math.isnan(validation_loss(p, cfg, [bad], hyper))

    def test_eval_mode_ignores_schedule_state(self):
        cfg = small_cfg()
        hyper_a = TrainConfig(seed=1, glat_start=0.5)
        hyper_b = TrainConfig(seed=99)
        p = init_params(cfg, 3)
        pairs = make_batch(4)
        assert validation_loss(p, cfg, pairs, hyper_a) == validation_loss(p, cfg, pairs, hyper_b)


class TestTrainModel:
    def test_overfit_single_sentence_monotone_smoothed(self):
        corpus = synth_task(1, (4, 4), 1, seed=6, n_words=10)
        cfg = small_cfg(d_model=16)
        hyper = TrainConfig(steps=200, batch_size=2, lr=5e-3, warmup=20,
                            eval_every=50, seed=2)
        res = train_model(corpus, cfg, hyper)
        losses = [r["loss"] for r in res.log]
        smoothed = [np.mean(losses[i:i + 5]) for i in range(0, len(losses) - 4, 5)]
        assert all(b <= a + 1e-9 for a, b in zip(smoothed, smoothed[1:]))
        assert smoothed[-1] < 0.1 * smoothed[0]

    def test_log_and_history_shapes(self, tmp_path):
        corpus = synth_task(12, (3, 4), 1, seed=8, n_words=10)
        cfg = small_cfg()
        hyper = TrainConfig(steps=12, batch_size=4, eval_every=5, keep_best=2, seed=5)
        log_path = tmp_path / "log.jsonl"
        res = train_model(corpus, cfg, hyper, log_path=log_path)
        assert len(res.log) == 12
        assert [s for s, _ in res.val_history] == [5, 10, 12]
        assert res.n_averaged == 2
        lines = log_path.read_text().splitlines()
        assert len(lines) == 12
        assert json.loads(lines[0])["step"] == 1

    def test_heldout_validation_drives_selection(self):
        corpus = synth_task(12, (3, 4), 1, seed=8, n_words=10)
        held = synth_task(6, (3, 4), 1, seed=9, n_words=10).pairs
        cfg = small_cfg()
        hyper = TrainConfig(steps=10, batch_size=4, eval_every=5, keep_best=1, seed=5)
        res = train_model(corpus, cfg, hyper, heldout=held)
        assert len(res.val_history) == 2
        best_step = min(res.val_history, key=lambda sv: (sv[1], sv[0]))[0]
        assert res.n_averaged == 1
        # with keep_best=1 the averaged params are exactly the best snapshot
        re_run = train_model(corpus, cfg, hyper, heldout=held)
        assert all(np.array_equal(res.params[k], re_run.params[k]) for k in res.params)
        assert best_step in [s for s, _ in res.val_history]

    def test_rerun_bit_identical(self):
        corpus = synth_task(10, (3, 4), 1, seed=3, n_words=10)
        cfg = small_cfg()
        hyper = TrainConfig(steps=8, batch_size=4, eval_every=4, seed=11)
        a = train_model(corpus, cfg, hyper)
        b = train_model(corpus, cfg, hyper)
        assert all(np.array_equal(a.final_params[k], b.final_params[k]) for k in a.final_params)
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
        assert a.log == b.log

    def test_huge_lr_diverges(self):
        corpus = synth_task(10, (3, 4), 1, seed=3, n_words=10)
        cfg = small_cfg()
        hyper = TrainConfig(steps=50, batch_size=4, lr=1e100, warmup=1, seed=0)
        with pytest.raises(DivergedError):
            with np.errstate(all="ignore"):
                train_model(corpus, cfg, hyper)

    def test_empty_corpus_rejected(self):
        from natkit.corpus import ParallelCorpus

        cfg = small_cfg()
        with pytest.raises(ValueError):
            train_model(ParallelCorpus((), name="empty", seed=0, modes=1), cfg, TrainConfig())
