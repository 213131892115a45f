"""Experiment configuration files.

Configs are INI files with one section per subsystem. Every key has a type
and a default; unknown sections or keys are rejected so typos fail loudly.
Each scenario starts from its own defaults, then the file, then command
line overrides of the form ``section.key=value``.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from .device import DeviceNoise, DeviceParams
from .errors import ConfigError
from .learning import SdspConfig, Transfer, VprogConfig
from .network import NetworkConfig, NeuronParams
from .task import TaskConfig, default_task_network
from .trace import TraceParams

SCENARIOS = ("drift_curves", "single_trace", "multi_trace", "learning_demo", "capacity_sweep")


def _bool(raw: str) -> bool:
    v = str(raw).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _floats(raw) -> tuple[float, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(float(x) for x in raw)
    return tuple(float(x) for x in str(raw).replace(";", ",").split(",") if x.strip())


def _ints(raw) -> tuple[int, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(int(x) for x in raw)
    return tuple(int(x) for x in str(raw).replace(";", ",").split(",") if x.strip())


def _strs(raw) -> tuple[str, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(str(x) for x in raw)
    return tuple(x.strip() for x in str(raw).split(",") if x.strip())


def _opt_float(raw):
    if raw is None or str(raw).strip().lower() in ("", "none", "auto"):
        return None
    return float(raw)


def _float(raw) -> float:
    v = float(raw)
    if math.isnan(v):
        raise ValueError("NaN is not allowed")
    return v


_TASK_NET = default_task_network()
_DEV = DeviceParams()
_VP = VprogConfig()
_TASK = TaskConfig()

# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Callable, Any]]] = {
    "experiment": {
        "scenario": (str, "single_trace"),
        "seed": (int, 0),
        "seeds": (int, 1),
        "out": (str, ""),
    },
    "device": {
        "nu": (_float, _DEV.nu),
        "t_ref": (_float, _DEV.t_ref),
        "r_lrs": (_float, _DEV.r_lrs),
        "r_hrs": (_float, _DEV.r_hrs),
        "delta_nom": (_float, _DEV.delta_nom),
        "i_nom": (_float, _DEV.i_nom),
        "stochastic": (_bool, False),
        "read_sigma": (_float, DeviceNoise.read_sigma),
        "reset_sigma": (_float, DeviceNoise.reset_sigma),
        "nu_sigma": (_float, DeviceNoise.nu_sigma),
    },
    "trace": {
        "n_devices": (int, 1),
        "t_init": (_float, 0.25),
        "eta": (_float, 1.0),
        "verify": (_bool, True),
    },
    "learning": {
        "i_th_plus": (_float, _TASK_NET.sdsp.i_th_plus),
        "i_th_minus": (_float, _TASK_NET.sdsp.i_th_minus),
        "transfer": (str, _TASK_NET.vprog.transfer.value),
        "v_read": (_float, _VP.v_read),
        "scale_const": (_float, _VP.scale_const),
        "i_prog_max": (_float, _VP.i_prog_max),
        "i_prog_min": (_float, _VP.i_prog_min),
        "r_pseudo": (_float, _VP.r_pseudo),
        "i_tail": (_float, _VP.i_tail),
        "v_ref": (_float, _VP.v_ref),
        "v_gain": (_float, _VP.v_gain),
        "clear_traces": (_bool, _VP.clear_traces),
    },
    "network": {
        "v_th": (_float, _TASK_NET.neuron.v_th),
        "tau_leak": (_float, _TASK_NET.neuron.tau_leak),
        "t_refrac": (_float, _TASK_NET.neuron.t_refrac),
        "gain": (_opt_float, _TASK_NET.gain),
        "inhibition": (_float, _TASK_NET.inhibition),
        "release_prob": (_float, _TASK_NET.release_prob),
        "w_init_plus": (_floats, _TASK_NET.w_init_plus),
        "w_init_minus": (_floats, _TASK_NET.w_init_minus),
        "weight_nu": (_float, _TASK_NET.weight_device.nu),
        "weight_r_lrs": (_float, _TASK_NET.weight_device.r_lrs),
        "weight_delta_nom": (_float, _TASK_NET.weight_device.delta_nom),
    },
    "task": {
        "n_per_class": (int, _TASK.n_per_class),
        "rate_cue": (_float, _TASK.rate_cue),
        "rate_background": (_float, _TASK.rate_background),
        "t_cue_start": (_float, _TASK.t_cue_start),
        "cue_duration": (_float, _TASK.cue_duration),
        "reward_delay": (_floats, _TASK.reward_delay),
        "trial_period": (_float, _TASK.trial_period),
        "n_train": (int, _TASK.n_train),
        "n_eval": (int, _TASK.n_eval),
    },
    "scenario": {
        # drift_curves
        "r_1s": (_floats, (1.77e6, 2.39e6, 2.89e6)),
        "cards": (_strs, ()),
        "n_points": (int, 30),
        "sample_dt": (_float, 1.0),
        # single_trace / multi_trace
        "n_tags": (int, 5),
        "tag_window": (_floats, (0.25, 0.75)),
        "tag_times": (_floats, ()),
        "random_tags": (_bool, True),
        "initial_r": (_floats, ()),
        "t_reward": (_float, 5.0),
        "t_end": (_float, 10.0),
        "probe_dt": (_float, 0.01),
        "tau_m": (_opt_float, None),
        # capacity_sweep
        "n_values": (_ints, (1, 2, 3, 4)),
        "interval": (_float, 0.1),
        "max_tags": (int, 10_000),
    },
}

SCENARIO_DEFAULTS: dict[str, dict[str, dict[str, Any]]] = {
    "drift_curves": {},
    "single_trace": {
        "trace": {"verify": False, "n_devices": 1},
    },
    "multi_trace": {
        "trace": {"n_devices": 3},
        "scenario": {
            "n_tags": 15,
            "tag_window": (0.3, 1.3),
            "random_tags": False,
        },
    },
    "learning_demo": {
        "experiment": {"seeds": 20},
    },
    "capacity_sweep": {},
}


def _parse(section: str, key: str, raw):
    try:
        parser, _ = SCHEMA[section][key]
    except KeyError:
        raise ConfigError(f"unknown key [{section}] {key}") from None
    try:
        return parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from None


@dataclass
class ExperimentConfig:
    """Fully resolved settings for one scenario run."""

    values: dict[str, dict[str, Any]] = field(default_factory=dict)
    source: str | None = None

    # -- construction -----------------------------------------------------

    @classmethod
    def defaults(cls, scenario: str) -> ExperimentConfig:
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; valid: {', '.join(SCENARIOS)}")
        values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
        for sec, keys in SCENARIO_DEFAULTS[scenario].items():
            values[sec].update(keys)
        values["experiment"]["scenario"] = scenario
        return cls(values)

    @classmethod
    def load(cls, path=None, scenario: str | None = None,
             overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
        """Resolve defaults < file < overrides; the scenario named by the caller wins."""
        cp = configparser.ConfigParser(interpolation=None)
        if path is not None:
            try:
                with open(path, encoding="utf-8") as fh:
                    cp.read_file(fh)
            except configparser.Error as exc:
                raise ConfigError(f"{path}: {exc}") from None
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
        file_scenario = cp.get("experiment", "scenario", fallback=None)
        if scenario and file_scenario and scenario != file_scenario:
            raise ConfigError(
                f"config {path} is for scenario {file_scenario!r}, not {scenario!r}"
            )
        cfg = cls.defaults(scenario or file_scenario or "single_trace")
        cfg.source = str(path) if path is not None else None
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            for key, raw in cp[sec].items():
                cfg.values[sec][key] = _parse(sec, key, raw)
        for dotted, raw in (overrides or {}).items():
            sec, _, key = dotted.partition(".")
            if not key:
                raise ConfigError(f"override {dotted!r} must look like section.key")
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            cfg.values[sec][key] = _parse(sec, key, raw)
        cfg.validate()
        return cfg

    # -- accessors --------------------------------------------------------

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    @property
    def scenario(self) -> str:
        return self.values["experiment"]["scenario"]

    @property
    def seed(self) -> int:
        return self.values["experiment"]["seed"]

    def validate(self) -> None:
        """Build every derived object once so bad values surface before a run."""
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; valid: {', '.join(SCENARIOS)}")
        self.device_params()
        self.trace_params()
        self.network_config()
        if self.scenario == "learning_demo":
            self.task_config()
        sc = self.values["scenario"]
        for key in ("tag_window",):
            if len(sc[key]) != 2 or not 0 <= sc[key][0] <= sc[key][1]:
                raise ConfigError(f"[scenario] {key} must be 'lo, hi' with 0 <= lo <= hi")
        for key in ("n_points", "n_tags", "max_tags"):
            if sc[key] < 0:
                raise ConfigError(f"[scenario] {key} must be >= 0")
        for key in ("sample_dt", "probe_dt", "interval", "t_end"):
            if not sc[key] > 0:
                raise ConfigError(f"[scenario] {key} must be > 0")
        if any(n < 1 for n in sc["n_values"]):
            raise ConfigError("[scenario] n_values must all be >= 1")
        if any(r <= 0 for r in sc["r_1s"] + sc["initial_r"]):
            raise ConfigError("[scenario] resistances must be > 0")
        if sc["tau_m"] is not None and not sc["tau_m"] > 0:
            raise ConfigError("[scenario] tau_m must be > 0")
        if self.values["experiment"]["seeds"] < 1:
            raise ConfigError("[experiment] seeds must be >= 1")

    def device_params(self) -> DeviceParams:
        d = self.values["device"]
        noise = None
        if d["stochastic"]:
            noise = DeviceNoise(d["read_sigma"], d["reset_sigma"], d["nu_sigma"])
        return DeviceParams(
            nu=d["nu"], t_ref=d["t_ref"], r_lrs=d["r_lrs"], r_hrs=d["r_hrs"],
            delta_nom=d["delta_nom"], i_nom=d["i_nom"], noise=noise,
        )

    def trace_params(self) -> TraceParams:
        t = self.values["trace"]
        return TraceParams(
            n_devices=t["n_devices"], t_init=t["t_init"], eta=t["eta"], verify=t["verify"],
            device=self.device_params(),
        )

    def sdsp_config(self) -> SdspConfig:
        lr = self.values["learning"]
        return SdspConfig(i_th_plus=lr["i_th_plus"], i_th_minus=lr["i_th_minus"],
                          v_th=self.values["network"]["v_th"])

    def vprog_config(self) -> VprogConfig:
        lr = self.values["learning"]
        try:
            transfer = Transfer(lr["transfer"])
        except ValueError:
            raise ConfigError(
                f"[learning] transfer must be one of {[t.value for t in Transfer]}"
            ) from None
        return VprogConfig(
            v_read=lr["v_read"], scale_const=lr["scale_const"], i_prog_max=lr["i_prog_max"],
            i_prog_min=lr["i_prog_min"], transfer=transfer, r_pseudo=lr["r_pseudo"],
            i_tail=lr["i_tail"], v_ref=lr["v_ref"], v_gain=lr["v_gain"],
            clear_traces=lr["clear_traces"],
        )

    def network_config(self, n_inputs: int = 2, n_outputs: int = 1) -> NetworkConfig:
        n = self.values["network"]
        for key in ("w_init_plus", "w_init_minus"):
            if len(n[key]) != 2:
                raise ConfigError(f"[network] {key} must be 'lo, hi'")
        return NetworkConfig(
            n_inputs=n_inputs,
            n_outputs=n_outputs,
            neuron=NeuronParams(v_th=n["v_th"], tau_leak=n["tau_leak"], t_refrac=n["t_refrac"]),
            gain=n["gain"],
            sdsp=self.sdsp_config(),
            vprog=self.vprog_config(),
            trace=self.trace_params(),
            weight_device=DeviceParams(
                nu=n["weight_nu"], r_lrs=n["weight_r_lrs"], delta_nom=n["weight_delta_nom"],
            ),
            w_init_plus=tuple(n["w_init_plus"]),
            w_init_minus=tuple(n["w_init_minus"]),
            inhibition=n["inhibition"],
            release_prob=n["release_prob"],
        )

    def task_config(self) -> TaskConfig:
        tk = self.values["task"]
        if len(tk["reward_delay"]) != 2:
            raise ConfigError("[task] reward_delay must be 'lo, hi'")
        return TaskConfig(
            network=self.network_config(2 * tk["n_per_class"], 2),
            n_per_class=tk["n_per_class"],
            rate_cue=tk["rate_cue"],
            rate_background=tk["rate_background"],
            t_cue_start=tk["t_cue_start"],
            cue_duration=tk["cue_duration"],
            reward_delay=tuple(tk["reward_delay"]),
            trial_period=tk["trial_period"],
            n_train=tk["n_train"],
            n_eval=tk["n_eval"],
        )

    # -- provenance -------------------------------------------------------

    def as_dict(self) -> dict[str, dict[str, Any]]:
        def plain(v):
            return list(v) if isinstance(v, tuple) else v
        return {sec: {k: plain(v) for k, v in sorted(keys.items())} for sec, keys in sorted(self.values.items())}

    def hash(self) -> str:
        """sha256 of the resolved settings; the output directory is not part of it."""
        d = self.as_dict()
        d["experiment"] = {k: v for k, v in d["experiment"].items() if k != "out"}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for sec, keys in self.as_dict().items():
            cp[sec] = {}
            for k, v in keys.items():
                if isinstance(v, list):
                    v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
                elif isinstance(v, bool):
                    v = "true" if v else "false"
                elif v is None:
                    v = "none"
                elif isinstance(v, float):
                    v = repr(v)
                cp[sec][k] = str(v)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_ini(), encoding="utf-8", newline="\n")
        return path
