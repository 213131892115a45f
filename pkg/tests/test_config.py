import pytest

from pcmtrace.config import SCENARIOS, ExperimentConfig
from pcmtrace.errors import ConfigError
from pcmtrace.learning import Transfer


def write(tmp_path, text):
    p = tmp_path / "cfg.ini"
    p.write_text(text)
    return p


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_defaults_validate(scenario):
    cfg = ExperimentConfig.load(None, scenario)
    assert cfg.scenario == scenario


def test_scenario_defaults():
    assert ExperimentConfig.defaults("multi_trace")["trace"]["n_devices"] == 3
    assert ExperimentConfig.defaults("single_trace")["trace"]["verify"] is False
    assert ExperimentConfig.defaults("learning_demo")["experiment"]["seeds"] == 20


def test_file_then_overrides(tmp_path):
    p = write(tmp_path, "[experiment]\nscenario = multi_trace\nseed = 4\n[device]\nnu = 0.08\n")
    cfg = ExperimentConfig.load(p, None, {"device.nu": "0.05", "trace.n_devices": "2"})
    assert cfg.scenario == "multi_trace" and cfg.seed == 4
    assert cfg["device"]["nu"] == 0.05 and cfg.trace_params().n_devices == 2


def test_scenario_mismatch(tmp_path):
    p = write(tmp_path, "[experiment]\nscenario = multi_trace\n")
    with pytest.raises(ConfigError, match="multi_trace"):
        ExperimentConfig.load(p, "single_trace")


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n",
    "[device]\nflux = 3\n",
    "[device]\nnu = abc\n",
    "[device]\nnu = -0.1\n",
    "[trace]\nn_devices = 0\n",
    "[scenario]\ntag_window = 1.0\n",
    "[learning]\ntransfer = cubic\n",
    "[experiment]\nscenario = nope\n",
    "not an ini file",
])
def test_rejects_bad_files(tmp_path, text):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(write(tmp_path, text))


@pytest.mark.parametrize("override", [{"nosection": "1"}, {"bogus.key": "1"}, {"device.nope": "1"}])
def test_rejects_bad_overrides(override):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(None, "single_trace", override)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.ini")


def test_ini_round_trip(tmp_path):
    cfg = ExperimentConfig.load(None, "learning_demo", {"learning.i_th_plus": "0.8",
                                                        "scenario.initial_r": "1e6, 2e6"})
    again = ExperimentConfig.load(cfg.write(tmp_path / "out.ini"))
    assert again.as_dict() == cfg.as_dict()
    assert again.hash() == cfg.hash()


def test_hash_ignores_output_dir_only():
    a = ExperimentConfig.load(None, "single_trace", {"experiment.out": "x"})
    b = ExperimentConfig.load(None, "single_trace", {"experiment.out": "y"})
    c = ExperimentConfig.load(None, "single_trace", {"device.nu": "0.11"})
    assert a.hash() == b.hash() != c.hash()


def test_builders():
    cfg = ExperimentConfig.load(None, "learning_demo", {"device.stochastic": "yes"})
    assert cfg.device_params().noise is not None
    task = cfg.task_config()
    assert task.network.n_inputs == 20 and task.network.vprog.transfer is Transfer.DIFFPAIR
    assert cfg.network_config(3, 2).n_inputs == 3
