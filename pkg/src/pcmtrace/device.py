"""Behavioral model of a single phase-change memory cell.

The amorphous phase of a PCM cell relaxes after every programming event and
its resistance climbs along a power law,

    R(t) = r_prog * max(1, (t - t_prog) / t_ref) ** nu

where ``t_prog`` is the time of the last RESET or gradual SET. Below
``t_ref`` the drift is frozen, which keeps the model finite right after a
programming pulse. Electrical pulse shapes are carried as metadata only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ContractViolation

#: returned by :func:`tau_pcm` when the drift coefficient is zero
NO_DECAY = math.inf


class PulseKind(enum.Enum):
    RESET = "reset"
    READ = "read"
    GRADUAL_SET = "gradual_set"


@dataclass(frozen=True)
class PulseSpec:
    """Electrical pulse description. Amplitude is volts for RESET/READ, amperes for GRADUAL_SET."""

    kind: PulseKind
    width: float
    rise_fall: float
    amplitude: float

    def __post_init__(self):
        if self.width <= 0:
            raise ConfigError(f"pulse width must be > 0, got {self.width}")
        if self.amplitude <= 0:
            raise ConfigError(f"pulse amplitude must be > 0, got {self.amplitude}")
        if self.rise_fall < 0:
            raise ConfigError(f"pulse rise/fall time must be >= 0, got {self.rise_fall}")

    @property
    def unit(self) -> str:
        return "A" if self.kind is PulseKind.GRADUAL_SET else "V"


RESET_PULSE = PulseSpec(PulseKind.RESET, width=100e-9, rise_fall=5e-9, amplitude=1.85)
READ_PULSE = PulseSpec(PulseKind.READ, width=100e-9, rise_fall=5e-9, amplitude=0.05)
GRADUAL_SET_PULSE = PulseSpec(PulseKind.GRADUAL_SET, width=100e-9, rise_fall=5e-9, amplitude=100e-6)


@dataclass(frozen=True)
class DeviceNoise:
    """Stochastic knobs. All sigmas are lognormal shape parameters (relative spread)."""

    read_sigma: float = 0.01
    reset_sigma: float = 0.05
    nu_sigma: float = 0.0

    def __post_init__(self):
        for name in ("read_sigma", "reset_sigma", "nu_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass(frozen=True)
class DeviceParams:
    """Parameter set shared by a population of devices.

    ``r_hrs`` is the resistance right after RESET (read at ``t_ref``);
    ``delta_nom`` is the relative conductance increase of one gradual SET at
    the nominal current ``i_nom``.
    """

    nu: float = 0.1
    t_ref: float = 10e-3
    r_lrs: float = 2.0e6
    r_hrs: float = 2.4e6
    delta_nom: float = 0.5
    i_nom: float = 100e-6
    noise: DeviceNoise | None = None

    def __post_init__(self):
        if not self.nu >= 0 or not math.isfinite(self.nu):
            raise ConfigError(f"nu must be finite and >= 0, got {self.nu}")
        for name in ("t_ref", "r_lrs", "r_hrs", "i_nom"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.delta_nom < 0:
            raise ConfigError(f"delta_nom must be >= 0, got {self.delta_nom}")

    def with_(self, **changes) -> DeviceParams:
        return replace(self, **changes)


@dataclass
class PcmDevice:
    r_prog: float
    t_prog: float
    nu: float = 0.1
    t_ref: float = 10e-3
    r_lrs: float = 2.0e6
    r_hrs: float = 2.4e6
    delta_nom: float = 0.5
    i_nom: float = 100e-6
    noise: DeviceNoise | None = None
    rng: np.random.Generator | None = field(default=None, repr=False, compare=False)
    n_resets: int = 0
    n_sets: int = 0

    def __post_init__(self):
        if not self.r_prog > 0:
            raise ContractViolation(f"r_prog must be > 0, got {self.r_prog}")
        if self.nu < 0 or self.t_ref <= 0 or self.r_lrs <= 0:
            raise ContractViolation("require nu >= 0, t_ref > 0, r_lrs > 0")
        if self.noise is not None and self.rng is None:
            raise ContractViolation("a stochastic device needs its own random generator")

    @classmethod
    def from_params(cls, params: DeviceParams, t: float = 0.0, rng=None) -> PcmDevice:
        """Build a device from ``params`` and RESET it at ``t``.

        With noise enabled, ``rng`` is required and ``nu`` is drawn once per
        device when ``noise.nu_sigma > 0``.
        """
        nu = params.nu
        if params.noise is not None:
            if rng is None:
                raise ContractViolation("stochastic params need an rng")
            if params.noise.nu_sigma > 0:
                nu = max(0.0, float(rng.normal(params.nu, params.noise.nu_sigma)))
        dev = cls(
            r_prog=params.r_hrs,
            t_prog=t,
            nu=nu,
            t_ref=params.t_ref,
            r_lrs=params.r_lrs,
            r_hrs=params.r_hrs,
            delta_nom=params.delta_nom,
            i_nom=params.i_nom,
            noise=params.noise,
            rng=rng,
        )
        reset(dev, t)
        return dev

    @classmethod
    def with_reading(cls, r_read: float, t_read: float, params: DeviceParams, t_prog: float = 0.0,
                     rng=None) -> PcmDevice:
        """Device whose noise-free read at ``t_read`` returns ``r_read``.

        Handy for reproducing measured initial conditions such as R(1 s).
        Read noise from ``params.noise`` still applies to later reads.
        """
        if t_read < t_prog:
            raise ContractViolation("t_read must not precede t_prog")
        scale = drift_factor(t_read - t_prog, params.t_ref, params.nu)
        return cls(
            r_prog=r_read / scale,
            t_prog=t_prog,
            nu=params.nu,
            t_ref=params.t_ref,
            r_lrs=params.r_lrs,
            r_hrs=params.r_hrs,
            delta_nom=params.delta_nom,
            i_nom=params.i_nom,
            noise=params.noise,
            rng=rng,
        )

    @property
    def stochastic(self) -> bool:
        return self.noise is not None


def drift_factor(t_since: float, t_ref: float, nu: float) -> float:
    """Multiplicative resistance growth after ``t_since`` seconds of drift."""
    return max(1.0, t_since / t_ref) ** nu


def _check_time(device: PcmDevice, t: float) -> None:
    if t < device.t_prog:
        raise ContractViolation(
            f"time {t!r} precedes the last programming event at {device.t_prog!r}"
        )


def read_resistance(device: PcmDevice, t: float) -> float:
    """Resistance in ohms at absolute time ``t``. Pure unless the device is stochastic."""
    _check_time(device, t)
    r = device.r_prog * drift_factor(t - device.t_prog, device.t_ref, device.nu)
    if device.noise is not None and device.noise.read_sigma > 0:
        r *= float(device.rng.lognormal(0.0, device.noise.read_sigma))
    return r


def read_conductance(device: PcmDevice, t: float) -> float:
    return 1.0 / read_resistance(device, t)


def reset(device: PcmDevice, t: float) -> None:
    """Melt-quench the cell back to its high-resistive state; drift restarts at ``t``."""
    r = device.r_hrs
    if device.noise is not None and device.noise.reset_sigma > 0:
        r *= float(device.rng.lognormal(0.0, device.noise.reset_sigma))
    device.r_prog = r
    device.t_prog = t
    device.n_resets += 1


def set_gain(device: PcmDevice, i_prog: float) -> float:
    """Relative conductance increase for a SET at ``i_prog`` (linear up to ``i_nom``)."""
    if not i_prog > 0:
        raise ContractViolation(f"programming current must be > 0, got {i_prog}")
    return device.delta_nom * min(1.0, i_prog / device.i_nom)


def gradual_set(device: PcmDevice, t: float, i_prog: float, verify: bool = True) -> bool:
    """Apply one gradual SET pulse with read-verify.

    Returns False and leaves the device untouched when the verify read is
    already below ``r_lrs``. ``verify=False`` programs unconditionally.
    """
    _check_time(device, t)
    delta = set_gain(device, i_prog)
    r = read_resistance(device, t)
    if verify and r < device.r_lrs:
        return False
    g = 1.0 / r
    device.r_prog = 1.0 / (g * (1.0 + delta))
    device.t_prog = t
    device.n_sets += 1
    return True


def tau_pcm(nu: float, t_since_prog: float, dt: float) -> float:
    """Equivalent exponential time constant of drift decay over ``[t, t + dt]``.

    Conductance falls by the factor (t / (t + dt)) ** nu over the step, which
    an exponential trace would match with ``exp(-dt / tau)``.
    """
    if nu < 0:
        raise ContractViolation(f"nu must be >= 0, got {nu}")
    if not (t_since_prog > 0 and dt > 0):
        raise ContractViolation("t_since_prog and dt must be > 0")
    if nu == 0:
        return NO_DECAY
    return -dt / (nu * math.log(t_since_prog / (t_since_prog + dt)))
