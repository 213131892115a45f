"""Event-driven spiking network with differential PCM synapses and PCM-trace eligibility.

Input neurons are pure spike sources; output neurons are leaky
integrate-and-fire units whose membrane is decayed analytically between
events. Every input-to-output synapse owns a weight pair (W+, W-) and a
trace pair (e+, e-). The simulator dispatches events in time order and
logs everything needed to replay a run.
"""

from __future__ import annotations

import csv
import enum
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import device as dev
from . import learning as lrn
from . import trace as tr
from .device import DeviceParams, PcmDevice
from .errors import ConfigError, ContractViolation, ValidationError
from .learning import SdspConfig, SetCall, TagKind, VprogConfig
from .trace import TagOutcome, TraceBlock, TraceParams


# ---------------------------------------------------------------------------
# neurons and the ideal exponential trace
# ---------------------------------------------------------------------------

@dataclass
class Neuron:
    id: int
    v_th: float = 1.0
    tau_leak: float = 20e-3
    t_refrac: float = 2e-3
    v_mem: float = 0.0
    t_last: float = 0.0
    refractory_until: float = -math.inf
    spike_pending: bool = False

    def advance(self, t: float) -> None:
        """Decay the membrane up to ``t``."""
        if t < self.t_last:
            raise ContractViolation(f"neuron {self.id}: time went backwards ({t} < {self.t_last})")
        if t > self.t_last:
            self.v_mem *= math.exp(-(t - self.t_last) / self.tau_leak)
            self.t_last = t

    def refractory(self, t: float) -> bool:
        return t < self.refractory_until


@dataclass
class IdealTrace:
    e: float = 0.0
    tau_m: float = 25.0
    eta: float = 1.0
    t_last: float = 0.0


def step_ideal_trace(trace: IdealTrace, t: float, tag_value: float = 0.0) -> IdealTrace:
    """Exponential eligibility trace: decay to ``t`` then add ``eta * tag_value``."""
    if t < trace.t_last:
        raise ContractViolation(f"ideal trace stepped backwards ({t} < {trace.t_last})")
    trace.e = trace.e * math.exp(-(t - trace.t_last) / trace.tau_m) + trace.eta * tag_value
    trace.t_last = t
    return trace


# ---------------------------------------------------------------------------
# synapses and configuration
# ---------------------------------------------------------------------------

@dataclass
class Synapse:
    id: int
    pre: int
    post: int
    w_plus: PcmDevice
    w_minus: PcmDevice
    e_plus: TraceBlock
    e_minus: TraceBlock

    def weight(self, t: float) -> float:
        """Effective weight G(W+) - G(W-) in siemens."""
        return dev.read_conductance(self.w_plus, t) - dev.read_conductance(self.w_minus, t)


@dataclass(frozen=True)
class NeuronParams:
    v_th: float = 1.0
    tau_leak: float = 20e-3
    t_refrac: float = 2e-3

    def __post_init__(self):
        if not (self.v_th > 0 and self.tau_leak > 0 and self.t_refrac >= 0):
            raise ConfigError("neuron needs v_th > 0, tau_leak > 0, t_refrac >= 0")


@dataclass(frozen=True)
class NetworkConfig:
    """Network, synapse and plasticity parameters.

    ``gain`` converts siemens of effective weight into volts of membrane
    jump; ``None`` picks the value that maps one weight device at the LRS
    boundary to 10 % of the firing threshold. Initial W+ and W- conductances
    are drawn uniformly from ``w_init_plus`` and ``w_init_minus``. Every
    output spike lowers the membrane of the other outputs by ``inhibition``.
    Each pre-synaptic spike reaches a given membrane with probability
    ``release_prob``; tagging sees every spike regardless.
    """

    n_inputs: int = 2
    n_outputs: int = 1
    neuron: NeuronParams = field(default_factory=NeuronParams)
    gain: float | None = None
    sdsp: SdspConfig = field(default_factory=SdspConfig)
    vprog: VprogConfig = field(default_factory=VprogConfig)
    trace: TraceParams = field(default_factory=TraceParams)
    weight_device: DeviceParams = field(default_factory=lambda: DeviceParams(nu=0.0))
    w_init_plus: tuple[float, float] = (0.1e-6, 0.4e-6)
    w_init_minus: tuple[float, float] = (0.1e-6, 0.4e-6)
    inhibition: float = 0.0
    release_prob: float = 1.0
    plastic: bool = True

    def __post_init__(self):
        if self.n_inputs < 1 or self.n_outputs < 1:
            raise ConfigError("need at least one input and one output neuron")
        for name in ("w_init_plus", "w_init_minus"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigError(f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
        if self.gain is not None and not self.gain > 0:
            raise ConfigError(f"gain must be > 0, got {self.gain}")
        if self.inhibition < 0:
            raise ConfigError(f"inhibition must be >= 0, got {self.inhibition}")
        if not 0 < self.release_prob <= 1:
            raise ConfigError(f"release_prob must be in (0, 1], got {self.release_prob}")

    @property
    def synaptic_gain(self) -> float:
        if self.gain is not None:
            return self.gain
        return 0.1 * self.neuron.v_th * self.weight_device.r_lrs


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------

class EventKind(enum.IntEnum):
    # value is the dispatch priority among simultaneous events
    RESET = 0
    CLAMP = 1
    INPUT = 2
    NEURON_SPIKE = 3
    REWARD = 4
    PROBE = 5


STIMULUS_KINDS = {
    "reset": EventKind.RESET,
    "clamp": EventKind.CLAMP,
    "input": EventKind.INPUT,
    "reward": EventKind.REWARD,
    "probe": EventKind.PROBE,
}


class Event(NamedTuple):
    t: float
    kind: EventKind
    target: int = -1
    value: float = 0.0


class EventQueue:
    """Time-ordered queue; ties broken by kind, then target id, then insertion order."""

    def __init__(self):
        self._heap = []
        self._seq = 0

    def push(self, ev: Event) -> None:
        heapq.heappush(self._heap, (ev.t, int(ev.kind), ev.target, self._seq, ev))
        self._seq += 1

    def pop(self) -> Event:
        return heapq.heappop(self._heap)[-1]

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def __len__(self):
        return len(self._heap)


def load_stimulus(path) -> list[Event]:
    """Read a stimulus CSV with header ``t_seconds,kind,target_id,value``."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"t_seconds", "kind", "target_id", "value"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(f"{path}: header must contain {sorted(required)}")
        for row in reader:
            rows.append(row)
    return parse_stimulus(rows)


def parse_stimulus(rows: Iterable[dict], n_inputs: int | None = None, n_outputs: int | None = None,
                   n_synapses: int | None = None) -> list[Event]:
    """Validate raw stimulus rows; every offending row is listed in the error."""
    events, problems = [], []
    for lineno, row in enumerate(rows, start=2):
        try:
            t = float(row["t_seconds"])
            kind = STIMULUS_KINDS[str(row["kind"]).strip().lower()]
            target = int(row["target_id"])
            value = float(row["value"]) if str(row.get("value", "")).strip() != "" else 0.0
        except (KeyError, ValueError, TypeError) as exc:
            problems.append(f"row {lineno}: cannot parse {dict(row)!r} ({exc.__class__.__name__}: {exc})")
            continue
        if not math.isfinite(t) or t < 0:
            problems.append(f"row {lineno}: t_seconds must be finite and >= 0, got {t}")
            continue
        if kind is EventKind.INPUT and n_inputs is not None and not 0 <= target < n_inputs:
            problems.append(f"row {lineno}: input target {target} outside [0, {n_inputs})")
            continue
        if kind is EventKind.CLAMP and n_outputs is not None and not 0 <= target < n_outputs:
            problems.append(f"row {lineno}: clamp target {target} outside [0, {n_outputs})")
            continue
        if kind in (EventKind.PROBE, EventKind.RESET) and n_synapses is not None \
                and not -1 <= target < n_synapses:
            problems.append(f"row {lineno}: synapse target {target} outside [-1, {n_synapses})")
            continue
        events.append(Event(t, kind, target, value))
    if problems:
        raise ValidationError("malformed stimulus", problems)
    return events


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

class TagRecord(NamedTuple):
    t: float
    synapse: int
    kind: str
    outcome: str


class ProbeRecord(NamedTuple):
    t: float
    synapse: int
    trace: str
    device: int
    resistance: float
    in_lrs: bool
    g_effective: float


class WeightRecord(NamedTuple):
    t: float
    synapse: int
    g_plus: float
    g_minus: float
    weight: float


@dataclass
class ResultLog:
    spikes: list[tuple[float, int]] = field(default_factory=list)
    tags: list[TagRecord] = field(default_factory=list)
    probes: list[ProbeRecord] = field(default_factory=list)
    rewards: list[lrn.RewardUpdate] = field(default_factory=list)
    weights: list[WeightRecord] = field(default_factory=list)
    set_calls: list[SetCall] = field(default_factory=list)
    resets: list[tuple[float, int]] = field(default_factory=list)

    def tag_summary(self) -> dict[str, int]:
        out = {"issued": 0, "accepted": 0, "rejected_init": 0, "rejected_lrs": 0}
        for rec in self.tags:
            if rec.kind == TagKind.STOP.value:
                continue
            out["issued"] += 1
            out[rec.outcome] += 1
        return out

    def write_csvs(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        tables = {
            "spikes.csv": (("t_seconds", "neuron"), self.spikes),
            "tags.csv": (TagRecord._fields, self.tags),
            "probes.csv": (ProbeRecord._fields, self.probes),
            "rewards.csv": (
                ("t_seconds", "synapse", "r_e_plus", "r_e_minus", "i_plus", "i_minus",
                 "applied_plus", "applied_minus", "saturated_plus", "saturated_minus"),
                [(u.t, u.synapse, u.r_e_plus, u.r_e_minus, u.i_plus, u.i_minus, u.applied_plus,
                  u.applied_minus, u.saturated_plus, u.saturated_minus) for u in self.rewards],
            ),
            "weights.csv": (WeightRecord._fields, self.weights),
            "set_calls.csv": (SetCall._fields, self.set_calls),
        }
        written = []
        for name, (header, rows) in tables.items():
            written.append(write_csv(out_dir / name, header, rows))
        return written


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Comma-separated, header row, UTF-8, LF line endings, shortest round-trip floats."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


# ---------------------------------------------------------------------------
# simulator
# ---------------------------------------------------------------------------

def _tag_call_target(kind: TagKind) -> str:
    return "e+" if kind is TagKind.UP else "e-"


def integrate_pre_spike(synapse: Synapse, post: Neuron, t: float, sim: Simulator) -> None:
    """Deliver one pre-synaptic spike: integrate the weight, then tag the trace."""
    post.advance(t)
    p = sim.config.release_prob
    released = p >= 1.0 or sim.rng.random() < p
    if released and not post.refractory(t):
        post.v_mem += sim.gain * synapse.weight(t)
    if post.v_mem >= post.v_th and not post.spike_pending:
        post.spike_pending = True
        sim.queue.push(Event(t, EventKind.NEURON_SPIKE, post.id))
    if not sim.plastic:
        return
    decision = lrn.evaluate_tag(post.v_mem, post.v_th, sim.config.sdsp, t, synapse.id)
    if decision.kind is TagKind.STOP:
        sim.log.tags.append(TagRecord(t, synapse.id, decision.kind.value, "none"))
        return
    block = synapse.e_plus if decision.kind is TagKind.UP else synapse.e_minus
    outcome = tr.apply_tag(block, t)
    sim.log.tags.append(TagRecord(t, synapse.id, decision.kind.value, outcome.value))
    if outcome is not TagOutcome.REJECTED_INIT:
        sim.log.set_calls.append(SetCall(
            t, synapse.id, _tag_call_target(decision.kind),
            block.eta * block.devices[0].i_nom, outcome is TagOutcome.ACCEPTED,
        ))


class Simulator:
    """Stateful event loop. ``schedule`` events, then ``run_until`` a time."""

    def __init__(self, config: NetworkConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.gain = config.synaptic_gain
        self.queue = EventQueue()
        self.log = ResultLog()
        self.t = 0.0
        self.plastic = config.plastic
        self.log_weights_on_reward = True
        self.probe_weights = True
        np_ = config.neuron
        self.neurons = [
            Neuron(i, v_th=np_.v_th, tau_leak=np_.tau_leak, t_refrac=np_.t_refrac)
            for i in range(config.n_outputs)
        ]
        self.synapses: list[Synapse] = []
        self._by_pre: dict[int, list[Synapse]] = {j: [] for j in range(config.n_inputs)}
        trace_rng = self.rng if config.trace.device.noise is not None else None
        w_rng = self.rng if config.weight_device.noise is not None else None
        for j in range(config.n_inputs):
            for i in range(config.n_outputs):
                sid = len(self.synapses)
                w_plus = PcmDevice.from_params(config.weight_device, 0.0, w_rng)
                w_minus = PcmDevice.from_params(config.weight_device, 0.0, w_rng)
                w_plus.r_prog = 1.0 / float(self.rng.uniform(*config.w_init_plus))
                w_minus.r_prog = 1.0 / float(self.rng.uniform(*config.w_init_minus))
                syn = Synapse(
                    sid, j, i, w_plus, w_minus,
                    tr.init_block(config.trace.n_devices, config.trace, 0.0, trace_rng),
                    tr.init_block(config.trace.n_devices, config.trace, 0.0, trace_rng),
                )
                self.synapses.append(syn)
                self._by_pre[j].append(syn)

    def schedule(self, ev: Event) -> None:
        if ev.t < self.t:
            raise ContractViolation(f"cannot schedule an event at {ev.t} before current time {self.t}")
        self.queue.push(ev)

    def schedule_all(self, events: Iterable[Event]) -> None:
        for ev in events:
            self.schedule(ev)

    def run_until(self, t_end: float = math.inf) -> None:
        while len(self.queue) and self.queue.peek_time() <= t_end:
            ev = self.queue.pop()
            self.t = ev.t
            self._dispatch(ev)
        if math.isfinite(t_end):
            self.t = max(self.t, t_end)

    def _targets(self, target: int) -> list[Synapse]:
        return self.synapses if target < 0 else [self.synapses[target]]

    def _dispatch(self, ev: Event) -> None:
        t = ev.t
        if ev.kind is EventKind.INPUT:
            for syn in self._by_pre[ev.target]:
                integrate_pre_spike(syn, self.neurons[syn.post], t, self)
        elif ev.kind is EventKind.NEURON_SPIKE:
            n = self.neurons[ev.target]
            n.advance(t)
            n.v_mem = 0.0
            n.spike_pending = False
            n.refractory_until = t + n.t_refrac
            self.log.spikes.append((t, n.id))
            if self.config.inhibition:
                for other in self.neurons:
                    if other is not n:
                        other.advance(t)
                        other.v_mem -= self.config.inhibition
        elif ev.kind is EventKind.CLAMP:
            n = self.neurons[ev.target]
            n.advance(t)
            n.v_mem = ev.value
        elif ev.kind is EventKind.RESET:
            for syn in self._targets(ev.target):
                tr.reset_block(syn.e_plus, t)
                tr.reset_block(syn.e_minus, t)
            self.log.resets.append((t, ev.target))
        elif ev.kind is EventKind.REWARD:
            if self.plastic:
                updates = lrn.apply_reward(self.synapses, t, self.config.vprog, self.log.set_calls)
                self.log.rewards.extend(updates)
                if self.log_weights_on_reward:
                    self._log_weights(t)
        elif ev.kind is EventKind.PROBE:
            self._probe(t, ev.target)

    def _log_weights(self, t: float, target: int = -1) -> None:
        for syn in self._targets(target):
            gp = dev.read_conductance(syn.w_plus, t)
            gm = dev.read_conductance(syn.w_minus, t)
            self.log.weights.append(WeightRecord(t, syn.id, gp, gm, gp - gm))

    def _probe(self, t: float, target: int) -> None:
        for syn in self._targets(target):
            for name, block in (("e+", syn.e_plus), ("e-", syn.e_minus)):
                ro = tr.read_trace(block, t)
                for k, (r, in_lrs) in enumerate(ro.per_device):
                    self.log.probes.append(ProbeRecord(t, syn.id, name, k, r, in_lrs, ro.g_effective))
        if self.probe_weights:
            self._log_weights(t, target)


def run_simulation(config: NetworkConfig, stimulus: Sequence[Event], seed: int = 0) -> ResultLog:
    """Run one stimulus schedule to completion and return the log."""
    bad = [f"event {k}: {ev!r}" for k, ev in enumerate(stimulus)
           if not (isinstance(ev, Event) and math.isfinite(ev.t) and ev.t >= 0)]
    if bad:
        raise ValidationError("malformed stimulus", bad)
    # validate targets against this network
    parse_stimulus(
        ({"t_seconds": ev.t, "kind": ev.kind.name.lower(), "target_id": ev.target, "value": ev.value}
         for ev in stimulus),
        config.n_inputs, config.n_outputs, config.n_inputs * config.n_outputs,
    )
    sim = Simulator(config, seed)
    sim.schedule_all(stimulus)
    sim.run_until()
    return sim.log


# ---------------------------------------------------------------------------
# PCM trace vs ideal exponential trace
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceHistory:
    """Sampled trace with the tag schedule that produced it.

    ``baseline`` is the same quantity for an identical but never-tagged trace.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]
    tags: tuple[float, ...]
    baseline: tuple[float, ...]


def record_pcm_history(tag_times: Sequence[float], probe_times: Sequence[float],
                       params: TraceParams | None = None, n_devices: int | None = None) -> TraceHistory:
    """Drive a fresh block (reset at 0) with ``tag_times``; sample at ``probe_times``."""
    params = params or TraceParams()
    n = params.n_devices if n_devices is None else n_devices
    block = tr.init_block(n, params, 0.0)
    control = tr.init_block(n, params, 0.0)
    events = sorted([(t, 0) for t in tag_times] + [(t, 1) for t in probe_times])
    times, values, base = [], [], []
    for t, is_probe in events:
        if is_probe:
            times.append(t)
            values.append(tr.read_trace(block, t).g_effective)
            base.append(tr.read_trace(control, t).g_effective)
        else:
            tr.apply_tag(block, t)
    return TraceHistory(tuple(times), tuple(values), tuple(sorted(tag_times)), tuple(base))


def record_ideal_history(tag_times: Sequence[float], probe_times: Sequence[float], tau_m: float,
                         eta: float = 1.0) -> TraceHistory:
    trace = IdealTrace(tau_m=tau_m, eta=eta)
    events = sorted([(t, 0) for t in tag_times] + [(t, 1) for t in probe_times])
    times, values = [], []
    for t, is_probe in events:
        step_ideal_trace(trace, t, 0.0 if is_probe else 1.0)
        if is_probe:
            times.append(t)
            values.append(trace.e)
    return TraceHistory(tuple(times), tuple(values), tuple(sorted(tag_times)), (0.0,) * len(times))


@dataclass(frozen=True)
class DivergenceReport:
    times: tuple[float, ...]
    pcm_normalized: tuple[float, ...]
    ideal_normalized: tuple[float, ...]
    rmse: float
    pcm_tau: tuple[tuple[float, float, float], ...]
    ideal_tau: tuple[tuple[float, float, float], ...]


def _normalize(values, baseline):
    excess = np.asarray(values, float) - np.asarray(baseline, float)
    peak = float(np.max(np.abs(excess))) if excess.size else 0.0
    return excess / peak if peak > 0 else np.zeros_like(excess)


def empirical_time_constants(history: TraceHistory) -> tuple[tuple[float, float, float], ...]:
    """(t_a, t_b, tau) for each probe interval without a tag; tau = inf when there is no decay."""
    out = []
    tags = history.tags
    for (ta, va), (tb, vb) in zip(zip(history.times, history.values),
                                  zip(history.times[1:], history.values[1:])):
        if any(ta < s <= tb for s in tags) or tb <= ta:
            continue
        if va > 0 and 0 < vb < va:
            tau = -(tb - ta) / math.log(vb / va)
        else:
            tau = math.inf
        out.append((ta, tb, tau))
    return tuple(out)


def compare_traces(pcm: TraceHistory, ideal: TraceHistory) -> DivergenceReport:
    """Compare a PCM trace and an ideal trace driven by the same tags.

    Each trajectory is expressed as excess over its own untagged baseline
    and scaled by its peak, so the comparison is about shape only.
    """
    if len(pcm.tags) != len(ideal.tags) or any(
            not math.isclose(a, b, rel_tol=0, abs_tol=1e-12) for a, b in zip(pcm.tags, ideal.tags)):
        raise ContractViolation("traces were driven by different tag schedules")
    if pcm.times != ideal.times:
        raise ContractViolation("traces were sampled at different probe times")
    pn = _normalize(pcm.values, pcm.baseline)
    inn = _normalize(ideal.values, ideal.baseline)
    rmse = float(np.sqrt(np.mean((pn - inn) ** 2))) if pn.size else 0.0
    return DivergenceReport(
        times=pcm.times,
        pcm_normalized=tuple(float(x) for x in pn),
        ideal_normalized=tuple(float(x) for x in inn),
        rmse=rmse,
        pcm_tau=empirical_time_constants(pcm),
        ideal_tau=empirical_time_constants(ideal),
    )


def half_life(history: TraceHistory, t_from: float) -> float:
    """Time after ``t_from`` until the raw trace first falls to half its value at ``t_from``.

    Linear interpolation between probes; inf if it never does.
    """
    pts = [(t, v) for t, v in zip(history.times, history.values) if t >= t_from]
    if not pts:
        raise ContractViolation(f"no probes at or after {t_from}")
    v0 = pts[0][1]
    target = 0.5 * v0
    for (ta, va), (tb, vb) in zip(pts, pts[1:]):
        if vb <= target < va:
            return ta + (va - target) / (va - vb) * (tb - ta) - t_from
    return math.inf
