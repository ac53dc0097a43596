# Copyright 2026 The kanspot Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest
from numpy.polynomial import legendre

import kanspot

TINY = dict(w=8, e=2, blocks=2, K=3)


def test_gram_matches_legendre():
    x = np.linspace(-3.0, 3.0, 101)
    values, derivs = kanspot.gram_eval(x, 4)
    assert values.shape == (101, 5) and derivs.shape == (101, 5)
    t = np.tanh(x)
    for m in range(5):
        c = np.zeros(m + 1)
        c[m] = 1.0
        np.testing.assert_allclose(values[:, m], legendre.legval(t, c), atol=1e-12)
        dp = legendre.legval(t, legendre.legder(c)) * (1.0 - t * t)
        np.testing.assert_allclose(derivs[:, m], dp, atol=1e-12)


def test_phi():
    x = 0.3
    coeffs = [0.5, -1.0, 2.0, 0.25]
    t = math.tanh(x)
    expect = 0.7 * x / (1 + math.exp(-x)) + 1.5 * legendre.legval(t, coeffs)
    assert kanspot.phi(x, 0.7, 1.5, coeffs) == pytest.approx(expect, abs=1e-12)


def test_variants_and_counts():
    names = kanspot.variants()
    assert names[0] == "MLP" and "GKAN_post" in names and len(names) == 8
    for name in names:
        cfg = kanspot.VariantConfig(name, **TINY)
        model = kanspot.Model(cfg, seed=3)
        total = sum(p.size for p in model.parameters().values())
        assert model.param_count() == total == kanspot.param_count(cfg)


def test_width_for_budget():
    cfg = kanspot.VariantConfig("GKAN_post")
    budget = kanspot.param_count(kanspot.VariantConfig("MLP", w=72))
    w = kanspot.width_for_budget(cfg, budget)
    cfg.w = w
    assert kanspot.param_count(cfg) <= budget
    cfg.w = w + 1
    assert kanspot.param_count(cfg) > budget
    with pytest.raises(kanspot.InfeasibleError):
        kanspot.width_for_budget(cfg, 5)


def test_errors_share_a_base():
    with pytest.raises(kanspot.ContractError):
        kanspot.VariantConfig("NOT_A_VARIANT")
    with pytest.raises(kanspot.Error):
        kanspot.gram_eval(np.zeros(2), -1)
    with pytest.raises(kanspot.IoError):
        kanspot.load_model("/no/such/model.kspt")
    assert issubclass(kanspot.DataError, RuntimeError)


def test_forward_and_checkpoint(tmp_path):
    model = kanspot.Model(kanspot.VariantConfig("GKAN_post", **TINY), seed=4)
    feats = np.random.default_rng(0).standard_normal((40, 25))
    logits = model.forward(feats)
    assert logits.shape == (kanspot.NUM_CLASSES, 25)
    batched = model.forward(feats[None])
    np.testing.assert_array_equal(batched[0], logits)
    path = str(tmp_path / "m.kspt")
    model.save(path)
    again = kanspot.load_model(path)
    assert again.config == model.config
    np.testing.assert_array_equal(again.forward(feats), logits)
    with pytest.raises(kanspot.DimensionError):
        model.forward(np.zeros((39, 25)))


def test_frontend_shapes():
    rng = np.random.default_rng(1)
    audio = 0.1 * rng.standard_normal(16000)
    feats = kanspot.compute_features(audio)
    assert feats.shape == (40, kanspot.frame_count(16000))
    np.testing.assert_allclose(feats.mean(axis=1), 0.0, atol=1e-9)
    raw = kanspot.logmel(audio)
    assert raw.shape == feats.shape
    with pytest.raises(kanspot.LengthError):
        kanspot.compute_features(np.zeros(100))


def test_mix_at_snr():
    rng = np.random.default_rng(2)
    clean = 0.1 * np.sin(np.arange(16000) * 0.05)
    noise = 0.05 * rng.standard_normal(4000)
    mixed = kanspot.mix_at_snr(clean, noise, 10.0)
    assert mixed.shape == clean.shape
    assert kanspot.power_ratio_db(clean, mixed - clean) == pytest.approx(10.0, abs=0.01)


def test_decoder_finds_an_ideal_keyword():
    kws = kanspot.keywords()
    ids = kws["volume_up"]
    frames = [0] * 10
    for i in ids:
        frames += [i] * 6
    frames += [0] * 40
    post = np.full((len(frames), kanspot.NUM_CLASSES), 0.001)
    for t, c in enumerate(frames):
        post[t, c] = 1.0 - 0.001 * (kanspot.NUM_CLASSES - 1)
    trace = kanspot.score_trace(post, "volume_up")
    assert trace.shape == (len(frames),) and trace.max() > 0.9
    events = kanspot.decode(post)
    best = max(events, key=lambda e: e["score"])
    assert best["keyword"] == "volume_up"
    with pytest.raises(kanspot.ContractError):
        kanspot.score_trace(post, "no_such_keyword")


def test_sweep_threshold():
    pts = kanspot.sweep_threshold([0.9, 0.8, 0.2], [0.5, 0.1], 1.0, [0.5, 1.0])
    assert [p["fa_per_hour"] for p in pts] == [0.0, 1.0]
    assert pts[0]["threshold"] == 0.5 and pts[1]["threshold"] == 0.1
    assert pts[0]["frr"] == pytest.approx(1.0 / 3.0)
    assert pts[1]["frr"] == 0.0


def test_pipeline(tmp_path):
    manifest = kanspot.synth(str(tmp_path / "data"), seed=3, positives=8,
                             negative_hours=0.003, workers=1)
    model = kanspot.Model(kanspot.VariantConfig("GKAN_post", **TINY), seed=2)
    history = kanspot.train(model, manifest, epochs=2, workers=1,
                            out_dir=str(tmp_path / "run"))
    assert [h["epoch"] for h in history] == [1, 2]
    assert (tmp_path / "run" / "metrics.jsonl").exists()
    report = kanspot.evaluate(model, manifest, workers=1)
    assert report["condition"] == "clean"
    assert len(report["pooled_frr"]) == len(report["targets"]) == 4
    assert all(0.0 <= f <= 1.0 for f in report["pooled_frr"])
    assert report["text"].startswith("variant=GKAN_post")
    noisy = kanspot.evaluate(model, manifest, noisy=True, snr_db=5.0, workers=1)
    assert noisy["condition"] == "noisy" and noisy["snr_db"] == 5.0
