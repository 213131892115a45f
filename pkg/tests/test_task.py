import dataclasses

import pytest

from pcmtrace.errors import ConfigError
from pcmtrace.scenarios import run_scenario
from pcmtrace.config import ExperimentConfig
from pcmtrace.task import TaskConfig, default_task_network, run_learning_task

SMALL = TaskConfig(n_train=20, n_eval=6)


def test_trial_bookkeeping():
    res = run_learning_task(SMALL, seed=2)
    phases = [t.phase for t in res.trials]
    assert phases == ["pre"] * 6 + ["train"] * 20 + ["post"] * 6
    assert all(t.t_reward is None for t in res.trials if t.phase != "train")
    for t in res.trials:
        if t.t_reward is not None:
            assert t.correct
            assert 2.0 <= t.t_reward - (t.t_start + 1.3) <= 5.0
    assert len(res.final_weights) == 40
    assert res.log.resets and len(res.log.resets) == 20


def test_same_seed_same_result():
    a, b = run_learning_task(SMALL, 5), run_learning_task(SMALL, 5)
    assert [(t.counts, t.correct, t.t_reward) for t in a.trials] == \
           [(t.counts, t.correct, t.t_reward) for t in b.trials]
    assert a.final_weights == b.final_weights


def test_evaluation_does_not_learn():
    res = run_learning_task(dataclasses.replace(SMALL, n_train=0), seed=1)
    assert res.log.rewards == [] and res.log.tags == []
    assert res.pre_rate == res.post_rate


def test_learning_improves_most_seeds():
    cfg = TaskConfig(n_train=100, n_eval=20)
    improved = sum(run_learning_task(cfg, s).improved for s in range(4))
    assert improved >= 3


@pytest.mark.parametrize("kw", [
    {"reward_delay": (5.0, 2.0)},
    {"trial_period": 4.0},
    {"t_cue_start": 0.2},
    {"n_per_class": 3},
])
def test_invalid_task(kw):
    with pytest.raises(ConfigError):
        TaskConfig(**kw)


def test_default_network_shape():
    net = default_task_network()
    assert (net.n_inputs, net.n_outputs) == (20, 2)


def test_learning_demo_scenario(tmp_path):
    cfg = ExperimentConfig.load(None, "learning_demo", {
        "experiment.seeds": "2", "task.n_train": "10", "task.n_eval": "4"})
    res = run_scenario(cfg, tmp_path / "o", plots=True)
    assert res.summary["n_seeds"] == 2
    assert (tmp_path / "o" / "seed_0" / "trials.csv").exists()
    assert (tmp_path / "o" / "learning.svg").exists()
