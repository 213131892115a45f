"""Delayed-reward two-class discrimination task.

Each trial RESETs the trace blocks, waits out the initialization window,
then drives one of two Poisson input ensembles for the cue period. The
trial is correct when the output neuron matching the cue fired more spikes
than the other one; a correct trial is rewarded after a random 2-5 s
delay, long after all synaptic activity has stopped, so only the
eligibility traces can carry the credit.

Reward rate before and after training is measured on the same frozen set
of evaluation trials with plasticity switched off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import device as dev
from .device import DeviceParams
from .errors import ConfigError
from .learning import SdspConfig, Transfer, VprogConfig
from .network import Event, EventKind, NetworkConfig, NeuronParams, ResultLog, Simulator
from .trace import TraceParams


def default_task_network() -> NetworkConfig:
    # Strong lateral inhibition makes the first output to fire the winner;
    # sparse synaptic release keeps the two outputs from seeing identical
    # drive, so the losing neuron still wins now and then and can be rewarded.
    return NetworkConfig(
        n_inputs=20,
        n_outputs=2,
        neuron=NeuronParams(v_th=1.0, tau_leak=20e-3, t_refrac=2e-3),
        gain=2.0e6,
        sdsp=SdspConfig(i_th_plus=0.7, i_th_minus=0.0, v_th=1.0),
        vprog=VprogConfig(transfer=Transfer.DIFFPAIR, r_pseudo=2.3e6, v_ref=0.0252, v_gain=1.3e-3),
        trace=TraceParams(n_devices=1, t_init=0.25),
        weight_device=DeviceParams(nu=0.0, r_lrs=1.0e6, delta_nom=0.1),
        w_init_plus=(0.3e-6, 0.4e-6),
        w_init_minus=(0.1e-6, 0.15e-6),
        inhibition=3.0,
        release_prob=0.3,
    )


@dataclass(frozen=True)
class TaskConfig:
    network: NetworkConfig = field(default_factory=default_task_network)
    n_per_class: int = 10
    rate_cue: float = 20.0
    rate_background: float = 0.0
    t_cue_start: float = 0.3
    cue_duration: float = 1.0
    reward_delay: tuple[float, float] = (2.0, 5.0)
    trial_period: float = 7.0
    n_train: int = 200
    n_eval: int = 50

    def __post_init__(self):
        if self.network.n_inputs != 2 * self.n_per_class or self.network.n_outputs != 2:
            raise ConfigError("task needs 2*n_per_class inputs and exactly 2 outputs")
        lo, hi = self.reward_delay
        if not 0 <= lo <= hi:
            raise ConfigError(f"bad reward delay range {self.reward_delay}")
        if self.t_cue_start + self.cue_duration + hi >= self.trial_period:
            raise ConfigError("trial_period must cover cue and the longest reward delay")
        if self.t_cue_start <= self.network.trace.t_init:
            raise ConfigError("cue must start after the trace initialization window")


@dataclass
class TrialRecord:
    index: int
    phase: str
    cue: int
    counts: tuple[int, int]
    correct: bool
    t_start: float
    t_reward: float | None


@dataclass
class TaskResult:
    seed: int
    pre_rate: float
    post_rate: float
    train_rate: float
    trials: list[TrialRecord]
    log: ResultLog
    n_saturated: int
    final_weights: list[tuple[int, int, int, float, float, float]] = field(default_factory=list)

    @property
    def improved(self) -> bool:
        return self.post_rate > self.pre_rate


def _cue_spikes(cfg: TaskConfig, cue: int, t0: float, rng: np.random.Generator) -> list[Event]:
    events = []
    for j in range(2 * cfg.n_per_class):
        rate = cfg.rate_cue if j // cfg.n_per_class == cue else cfg.rate_background
        n = rng.poisson(rate * cfg.cue_duration)
        for t in np.sort(rng.uniform(0.0, cfg.cue_duration, size=n)):
            events.append(Event(t0 + cfg.t_cue_start + float(t), EventKind.INPUT, j))
    return events


def _run_trial(sim: Simulator, cfg: TaskConfig, cue: int, t0: float, rng, plastic: bool):
    sim.plastic = plastic
    if plastic:
        sim.schedule(Event(t0, EventKind.RESET, -1))
    sim.schedule_all(_cue_spikes(cfg, cue, t0, rng))
    n_before = len(sim.log.spikes)
    t_cue_end = t0 + cfg.t_cue_start + cfg.cue_duration
    sim.run_until(t_cue_end)
    counts = [0, 0]
    for _, nid in sim.log.spikes[n_before:]:
        counts[nid] += 1
    correct = counts[cue] > counts[1 - cue]
    t_reward = None
    if plastic and correct:
        t_reward = t_cue_end + float(rng.uniform(*cfg.reward_delay))
        sim.schedule(Event(t_reward, EventKind.REWARD, -1))
    sim.run_until(t0 + cfg.trial_period)
    return tuple(counts), correct, t_reward


def _evaluate(sim, cfg, t0, eval_seed, phase, trials):
    # cue spikes and synaptic release both replay identically in every evaluation
    stim_seed, release_seed = np.random.SeedSequence(eval_seed).spawn(2)
    rng = np.random.default_rng(stim_seed)
    train_release, sim.rng = sim.rng, np.random.default_rng(release_seed)
    hits = 0
    for k in range(cfg.n_eval):
        cue = k % 2
        counts, correct, _ = _run_trial(sim, cfg, cue, t0, rng, plastic=False)
        trials.append(TrialRecord(k, phase, cue, counts, correct, t0, None))
        hits += correct
        t0 += cfg.trial_period
    sim.rng = train_release
    return hits / cfg.n_eval, t0


def run_learning_task(cfg: TaskConfig | None = None, seed: int = 0) -> TaskResult:
    """Pre-evaluate, train for ``n_train`` trials, post-evaluate; all seeded from ``seed``."""
    cfg = cfg or TaskConfig()
    seeds = np.random.SeedSequence(seed).spawn(3)
    sim = Simulator(cfg.network, seed=int(seeds[0].generate_state(1)[0]))
    sim.probe_weights = False
    eval_seed = int(seeds[1].generate_state(1)[0])
    train_rng = np.random.default_rng(seeds[2])
    trials: list[TrialRecord] = []

    t0 = 0.0
    pre_rate, t0 = _evaluate(sim, cfg, t0, eval_seed, "pre", trials)
    hits = 0
    for k in range(cfg.n_train):
        cue = int(train_rng.integers(2))
        counts, correct, t_reward = _run_trial(sim, cfg, cue, t0, train_rng, plastic=True)
        trials.append(TrialRecord(k, "train", cue, counts, correct, t0, t_reward))
        hits += correct
        t0 += cfg.trial_period
    post_rate, t0 = _evaluate(sim, cfg, t0, eval_seed, "post", trials)
    n_sat = sum(u.saturated_plus + u.saturated_minus for u in sim.log.rewards)
    weights = []
    for syn in sim.synapses:
        gp = dev.read_conductance(syn.w_plus, t0)
        gm = dev.read_conductance(syn.w_minus, t0)
        weights.append((syn.id, syn.pre, syn.post, gp, gm, gp - gm))
    return TaskResult(
        seed=seed,
        pre_rate=pre_rate,
        post_rate=post_rate,
        train_rate=hits / cfg.n_train if cfg.n_train else 0.0,
        trials=trials,
        log=sim.log,
        n_saturated=n_sat,
        final_weights=weights,
    )
