"""PCM-trace: an eligibility trace stored in the drift of one or more PCM cells.

A synaptic tag is written as a single gradual SET, which bumps the
conductance and restarts drift; drift then lets the conductance relax. With
several devices in parallel the tags are routed round-robin so each cell
sees fewer SETs, and the effective trace is the summed conductance under one
READ.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

from . import device as dev
from .device import DeviceParams, PcmDevice
from .errors import ConfigError, ContractViolation

#: capacity value reported when the block can absorb tags indefinitely
CAPACITY_UNBOUNDED = math.inf


class TagOutcome(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED_INIT = "rejected_init"
    REJECTED_LRS = "rejected_lrs"


@dataclass(frozen=True)
class TraceParams:
    n_devices: int = 1
    t_init: float = 0.25
    eta: float = 1.0
    verify: bool = True
    device: DeviceParams = field(default_factory=DeviceParams)

    def __post_init__(self):
        if self.n_devices < 1:
            raise ConfigError(f"a trace block needs at least one device, got {self.n_devices}")
        if self.t_init < 0:
            raise ConfigError(f"t_init must be >= 0, got {self.t_init}")
        if not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")


@dataclass
class TraceBlock:
    devices: list[PcmDevice]
    cursor: int = 0
    t_reset: float = 0.0
    t_init: float = 0.25
    eta: float = 1.0
    verify: bool = True
    tag_counts: list[int] = field(default_factory=list)
    n_rejected_init: int = 0
    n_rejected_lrs: int = 0

    def __post_init__(self):
        if not self.devices:
            raise ConfigError("a trace block needs at least one device")
        if not self.tag_counts:
            self.tag_counts = [0] * len(self.devices)

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def n_accepted(self) -> int:
        return sum(self.tag_counts)

    @property
    def t_accept(self) -> float:
        """First time at which tags are accepted."""
        return self.t_reset + self.t_init


@dataclass(frozen=True)
class TraceReadout:
    g_effective: float
    per_device: tuple[tuple[float, bool], ...]
    t_read: float

    @property
    def r_effective(self) -> float:
        return 1.0 / self.g_effective


def init_block(n_devices: int, params: TraceParams | None = None, t: float = 0.0, rng=None,
               r_hrs: Sequence[float] | None = None) -> TraceBlock:
    """RESET ``n_devices`` fresh cells at ``t``; tags are accepted from ``t + t_init``.

    ``r_hrs`` optionally gives each member its own post-RESET resistance.
    """
    params = params or TraceParams()
    if n_devices < 1:
        raise ConfigError(f"a trace block needs at least one device, got {n_devices}")
    if r_hrs is None:
        dev_params = [params.device] * n_devices
    else:
        if len(r_hrs) != n_devices:
            raise ConfigError(f"got {len(r_hrs)} HRS values for {n_devices} devices")
        dev_params = [params.device.with_(r_hrs=float(r)) for r in r_hrs]
    devices = [PcmDevice.from_params(p, t, rng) for p in dev_params]
    return TraceBlock(
        devices=devices,
        t_reset=t,
        t_init=params.t_init,
        eta=params.eta,
        verify=params.verify,
    )


def reset_block(block: TraceBlock, t: float) -> None:
    """RESET every member and restart the initialization window. Counters are kept."""
    for d in block.devices:
        dev.reset(d, t)
    block.cursor = 0
    block.t_reset = t


def apply_tag(block: TraceBlock, t: float, i_prog: float | None = None) -> TagOutcome:
    """Accumulate one synaptic tag as a gradual SET on the next device in line.

    ``i_prog`` defaults to ``eta`` times the nominal SET current. If the
    target fails verify the following devices are tried in order.
    """
    if t < block.t_reset:
        raise ContractViolation(f"tag at {t!r} precedes block reset at {block.t_reset!r}")
    if t < block.t_accept:
        block.n_rejected_init += 1
        return TagOutcome.REJECTED_INIT
    n = block.n_devices
    for k in range(n):
        idx = (block.cursor + k) % n
        d = block.devices[idx]
        current = i_prog if i_prog is not None else block.eta * d.i_nom
        if dev.gradual_set(d, t, current, verify=block.verify):
            block.tag_counts[idx] += 1
            block.cursor = (idx + 1) % n
            return TagOutcome.ACCEPTED
    block.n_rejected_lrs += 1
    return TagOutcome.REJECTED_LRS


def read_trace(block: TraceBlock, t: float) -> TraceReadout:
    if t < block.t_reset:
        raise ContractViolation(f"read at {t!r} precedes block reset at {block.t_reset!r}")
    per_device = []
    g = 0.0
    for d in block.devices:
        r = dev.read_resistance(d, t)
        per_device.append((r, r < d.r_lrs))
        g += 1.0 / r
    return TraceReadout(g_effective=g, per_device=tuple(per_device), t_read=t)


def trace_step_reference(g, t, t_p, dt, nu, eta, tag_value):
    """One step of the drift-trace difference equation.

    ``g`` decays by ((t - t_p) / (t - t_p + dt)) ** nu and ``eta * tag_value``
    is added. Independent of the device model; used as its oracle.
    """
    if not t > t_p:
        raise ContractViolation(f"reference step needs t > t_p, got t={t!r}, t_p={t_p!r}")
    if not dt > 0:
        raise ContractViolation(f"dt must be > 0, got {dt!r}")
    s = t - t_p
    return (s / (s + dt)) ** nu * g + eta * tag_value


def capacity(params: TraceParams, interval: float, n_devices: int | None = None,
             max_tags: int = 10_000, rng=None) -> float:
    """Number of tags a fresh block accepts before verify rejects a tag.

    Tags arrive every ``interval`` seconds starting at the end of the
    initialization window. Returns :data:`CAPACITY_UNBOUNDED` when SETs do
    not move the conductance or no rejection happens within ``max_tags``.
    """
    if not interval > 0:
        raise ConfigError(f"tag interval must be > 0, got {interval}")
    n = params.n_devices if n_devices is None else n_devices
    if params.device.delta_nom == 0 or not params.verify:
        return CAPACITY_UNBOUNDED
    block = init_block(n, params, t=0.0, rng=rng)
    for k in range(max_tags):
        if apply_tag(block, block.t_accept + k * interval) is TagOutcome.REJECTED_LRS:
            return k
    return CAPACITY_UNBOUNDED
