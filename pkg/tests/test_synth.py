from __future__ import annotations

import json

import numpy as np
import pytest
from scipy.special import expit

from wbslr import featurize, metrics, synth
from wbslr.featurize import EventVocabulary
from wbslr.synth import GeneratorConfig


def rate(cfg):
    seqs, _ = synth.generate(cfg)
    return np.mean([s.label for s in seqs])


def test_null_model_is_a_coin_flip():
    assert 0.45 <= rate(GeneratorConfig(2000, 3, 5, seed=1)) <= 0.55


def test_strong_negative_bias_gives_rare_positives():
    assert rate(GeneratorConfig(2000, 3, 5, bias=-10.0, seed=2)) < 0.01


def test_planted_factor_is_learnable_from_oracle_logit():
    cfg = GeneratorConfig(2000, 3, 5, planted=((1, 2, 3.0),), base_rate=0.3, bias=-1.0, seed=3)
    seqs, truth = synth.generate(cfg)
    labels = np.array([s.label for s in seqs])
    assert metrics.auc(labels, truth.logits) > 0.8


def test_featurizing_reproduces_generator_counts():
    cfg = GeneratorConfig(300, 4, 6, window_days=30, base_rate=0.4, visit_rate=3.0,
                          event_rates={5: 0.9}, seed=4)
    seqs, truth = synth.generate(cfg)
    vocab = EventVocabulary([synth.event_code(p) for p in range(6)])
    m = featurize.preliminary_matrix(seqs, truth.grid, vocab)
    assert np.array_equal(m.values, truth.counts)
    assert m.labels.tolist() == [s.label for s in seqs]


def test_marginal_count_mean():
    cfg = GeneratorConfig(4000, 2, 3, window_days=60, base_rate=0.25, visit_rate=2.0, seed=5)
    _, truth = synth.generate(cfg)
    assert truth.counts.mean() == pytest.approx(0.5, abs=0.03)


def test_labels_calibrated_by_decile():
    cfg = GeneratorConfig(6000, 3, 4, planted=((0, 0, 1.5), (2, 3, -1.0)), base_rate=0.4,
                          seed=6)
    seqs, truth = synth.generate(cfg)
    labels = np.array([s.label for s in seqs])
    p = expit(truth.logits)
    order = np.argsort(p, kind="stable")
    for chunk in np.array_split(order, 10):
        assert abs(labels[chunk].mean() - p[chunk].mean()) <= 0.05


def test_generation_deterministic():
    cfg = GeneratorConfig(50, 3, 4, planted=((0, 1, 1.0),), seed=7)
    a, ta = synth.generate(cfg)
    b, tb = synth.generate(cfg)
    assert a == b and np.array_equal(ta.counts, tb.counts)
    c, _ = synth.generate(GeneratorConfig(50, 3, 4, planted=((0, 1, 1.0),), seed=8))
    assert a != c


def test_observation_span_and_truth_file():
    cfg = GeneratorConfig(20, 3, 4, window_days=40, planted=((2, 1, 0.5),), seed=9)
    seqs, truth = synth.generate(cfg)
    for s in seqs:
        assert (s.observation_end - s.observation_start).days == 120
        assert all(s.observation_start <= v.date < s.observation_end for v in s.visits)
    d = json.loads(synth.truth_json(truth, cfg))
    assert d["support"] == [[2, 1]] and d["betas"] == [[2, 1, 0.5]]
    assert GeneratorConfig.from_dict(d["config"]) == cfg


@pytest.mark.parametrize("kw", [
    {"n_patients": 0}, {"planted": ((3, 0, 1.0),)}, {"planted": ((0, 0, 1.0), (0, 0, 2.0))},
    {"base_rate": 0.0}, {"base_rate": 1.5}, {"visit_rate": -1.0}, {"event_rates": {9: 0.5}},
])
def test_config_validation(kw):
    base = {"n_patients": 10, "t_windows": 3, "p_events": 4}
    with pytest.raises(ValueError):
        GeneratorConfig(**{**base, **kw})
