"""Learning block: SDSP tag generation and reward-gated weight programming.

At every pre-synaptic spike the post-synaptic membrane, normalized to the
firing threshold, is compared against two thresholds: above the upper one
the synapse is tagged UP, below the lower one DN, and in between (the dead
zone) nothing happens. When a reward arrives the two eligibility traces of
each synapse are read and converted into SET currents for the matching
weight devices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

from . import device as dev
from . import trace as tr
from .errors import ConfigError, ContractViolation

if TYPE_CHECKING:
    from .network import Synapse


class TagKind(enum.Enum):
    UP = "UP"
    DN = "DN"
    STOP = "STOP"


@dataclass(frozen=True)
class SdspConfig:
    i_th_plus: float = 0.9
    i_th_minus: float = 0.3
    v_th: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.i_th_minus <= self.i_th_plus <= 1.0):
            raise ConfigError(
                f"need 0 <= i_th_minus <= i_th_plus <= 1, got {self.i_th_minus}, {self.i_th_plus}"
            )
        if not self.v_th > 0:
            raise ConfigError(f"v_th must be > 0, got {self.v_th}")


@dataclass(frozen=True)
class TagDecision:
    kind: TagKind
    t: float = 0.0
    synapse: int | None = None


def evaluate_tag(v_mem: float, v_th: float, cfg: SdspConfig, t: float = 0.0,
                 synapse: int | None = None) -> TagDecision:
    # 1 - (v_th - v_mem) / v_th == v_mem / v_th
    if not v_th > 0:
        raise ConfigError(f"firing threshold must be > 0, got {v_th}")
    i_x = v_mem / v_th
    if i_x > cfg.i_th_plus:
        kind = TagKind.UP
    elif i_x < cfg.i_th_minus:
        kind = TagKind.DN
    else:
        kind = TagKind.STOP
    return TagDecision(kind, t, synapse)


class Transfer(enum.Enum):
    LINEAR = "linear"
    DIFFPAIR = "diffpair"


@dataclass(frozen=True)
class VprogConfig:
    """Trace read-out to programming-current conversion.

    The ``diffpair`` defaults put the sigmoid midpoint inside the measured
    1.77-2.89 MOhm window with roughly a 10x output swing across it.
    """

    v_read: float = 0.05
    scale_const: float = 5000.0
    i_prog_max: float = 100e-6
    i_prog_min: float = 1e-6
    transfer: Transfer = Transfer.LINEAR
    r_pseudo: float = 2.3e6
    i_tail: float = 100e-6
    v_ref: float = 0.0252
    v_gain: float = 1.3e-3
    clear_traces: bool = False

    def __post_init__(self):
        if isinstance(self.transfer, str):
            object.__setattr__(self, "transfer", Transfer(self.transfer))
        for name in ("v_read", "scale_const", "i_prog_max", "r_pseudo", "i_tail", "v_gain"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.i_prog_min < 0:
            raise ConfigError(f"i_prog_min must be >= 0, got {self.i_prog_min}")


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def vprog_transfer(r_trace: float, cfg: VprogConfig) -> float:
    """SET current for the weight device given the trace resistance.

    Lower trace resistance (more accumulated tags) means more current.
    """
    if not r_trace > 0:
        raise ContractViolation(f"trace resistance must be > 0, got {r_trace}")
    if math.isinf(r_trace):
        return 0.0
    if cfg.transfer is Transfer.LINEAR:
        return min(cfg.i_prog_max, cfg.scale_const * cfg.v_read / r_trace)
    v_div = cfg.v_read * cfg.r_pseudo / (r_trace + cfg.r_pseudo)
    return cfg.i_tail * _logistic((v_div - cfg.v_ref) / cfg.v_gain)


class SetCall(NamedTuple):
    """One GRADUAL_SET issued to a device of a synapse (target in e+, e-, w+, w-)."""

    t: float
    synapse: int
    target: str
    i_prog: float
    applied: bool


@dataclass(frozen=True)
class RewardUpdate:
    synapse: int
    t: float
    r_e_plus: float
    r_e_minus: float
    i_plus: float
    i_minus: float
    applied_plus: bool
    applied_minus: bool
    saturated_plus: bool
    saturated_minus: bool


def apply_reward(synapses: list[Synapse], t: float, cfg: VprogConfig,
                 calls: list[SetCall] | None = None) -> list[RewardUpdate]:
    """Third-factor update: program every weight pair from its trace pair.

    A polarity whose current falls below ``cfg.i_prog_min`` is skipped. A
    weight device that refuses the SET (already in LRS) is reported as
    saturated. Trace devices are never programmed here; they are RESET only
    when ``cfg.clear_traces`` is set.
    """
    report = []
    for syn in synapses:
        r_plus = tr.read_trace(syn.e_plus, t).r_effective
        r_minus = tr.read_trace(syn.e_minus, t).r_effective
        i_plus = vprog_transfer(r_plus, cfg)
        i_minus = vprog_transfer(r_minus, cfg)
        applied = {}
        saturated = {}
        for target, device, current in (("w+", syn.w_plus, i_plus), ("w-", syn.w_minus, i_minus)):
            if current < cfg.i_prog_min or current <= 0:
                applied[target] = saturated[target] = False
                continue
            ok = dev.gradual_set(device, t, current)
            applied[target] = ok
            saturated[target] = not ok
            if calls is not None:
                calls.append(SetCall(t, syn.id, target, current, ok))
        if cfg.clear_traces:
            tr.reset_block(syn.e_plus, t)
            tr.reset_block(syn.e_minus, t)
        report.append(RewardUpdate(
            synapse=syn.id, t=t, r_e_plus=r_plus, r_e_minus=r_minus,
            i_plus=i_plus, i_minus=i_minus,
            applied_plus=applied["w+"], applied_minus=applied["w-"],
            saturated_plus=saturated["w+"], saturated_minus=saturated["w-"],
        ))
    return report
