"""Fit the power-law drift model to measured resistance traces.

The fit is ordinary least squares in log-log space,

    log R = log R(t0) + nu * log(t / t0)

which is exact for the model and matches the usual way drift exponents are
extracted from measurements. Results can be exported as device model cards
in the same INI format the experiment configs use.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .device import DeviceParams
from .errors import ConfigError, InsufficientDataError, ValidationError

CSV_HEADER = ("device_id", "t_seconds", "resistance_ohms")


@dataclass(frozen=True)
class DriftSample:
    device_id: str
    t: float
    r: float
    row: int | None = field(default=None, compare=False)

    def where(self, index: int) -> str:
        return f"row {self.row}" if self.row is not None else f"sample {index}"


@dataclass(frozen=True)
class FitResult:
    device_id: str
    r_t0: float
    nu: float
    t0: float
    rmse_log: float
    n_samples: int
    trimmed: int = 0

    @property
    def anomalous(self) -> bool:
        """A negative exponent means resistance fell over time, which drift cannot do."""
        return self.nu < 0

    def predict(self, t) -> np.ndarray:
        return self.r_t0 * (np.asarray(t, dtype=float) / self.t0) ** self.nu


def _check_samples(samples: Sequence[DriftSample]) -> None:
    problems = []
    for i, s in enumerate(samples):
        bad = []
        if not (math.isfinite(s.t) and s.t > 0):
            bad.append(f"t_seconds must be > 0, got {s.t!r}")
        if not (math.isfinite(s.r) and s.r > 0):
            bad.append(f"resistance_ohms must be > 0, got {s.r!r}")
        if bad:
            problems.append(f"{s.where(i)} ({s.device_id}): " + "; ".join(bad))
    if problems:
        raise ValidationError("invalid drift samples", problems)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    # centered sums are better conditioned than the normal equations
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    return ym - slope * xm, slope


def fit_drift(samples: Sequence[DriftSample], t0: float = 1.0, trim: bool = False) -> FitResult:
    """Fit one device. ``trim`` drops the 5 % largest and 5 % smallest residuals and refits."""
    if not (math.isfinite(t0) and t0 > 0):
        raise ConfigError(f"t0 must be > 0, got {t0!r}")
    samples = list(samples)
    _check_samples(samples)
    ids = {s.device_id for s in samples}
    if len(ids) > 1:
        raise ValidationError(f"fit_drift expects one device, got {sorted(ids)}")
    t = np.array([s.t for s in samples], dtype=float)
    if np.unique(t).size < 2:
        raise InsufficientDataError(
            f"need at least 2 distinct sample times, got {np.unique(t).size}"
        )
    x = np.log(t / t0)
    y = np.log(np.array([s.r for s in samples], dtype=float))
    intercept, nu = _ols(x, y)
    n_trimmed = 0
    if trim:
        resid = y - (intercept + nu * x)
        k = int(len(resid) * 0.05)
        if k > 0:
            order = np.argsort(resid, kind="stable")
            keep = np.sort(order[k:len(order) - k])
            if np.unique(x[keep]).size >= 2:
                x, y = x[keep], y[keep]
                intercept, nu = _ols(x, y)
                n_trimmed = 2 * k
    resid = y - (intercept + nu * x)
    return FitResult(
        device_id=samples[0].device_id,
        r_t0=math.exp(intercept),
        nu=nu,
        t0=t0,
        rmse_log=float(np.sqrt(np.mean(resid ** 2))),
        n_samples=len(x),
        trimmed=n_trimmed,
    )


def group_by_device(samples: Iterable[DriftSample]) -> "OrderedDict[str, list[DriftSample]]":
    groups: OrderedDict[str, list[DriftSample]] = OrderedDict()
    for s in samples:
        groups.setdefault(s.device_id, []).append(s)
    return groups


def fit_all(samples: Iterable[DriftSample], t0: float = 1.0, trim: bool = False) -> list[FitResult]:
    """One fit per device, in order of first appearance."""
    samples = list(samples)
    _check_samples(samples)
    return [fit_drift(group, t0, trim) for group in group_by_device(samples).values()]


def load_samples(path) -> list[DriftSample]:
    """Parse a measurement CSV; every malformed row is reported with its line number."""
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_samples(fh, source=str(path))


def parse_samples(stream, source: str = "<input>") -> list[DriftSample]:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or list(reader.fieldnames[:3]) != list(CSV_HEADER):
        raise ValidationError(f"{source}: header must start with {','.join(CSV_HEADER)}")
    out, problems = [], []
    for lineno, row in enumerate(reader, start=2):
        dev_id = (row.get("device_id") or "").strip()
        try:
            t = float(row["t_seconds"])
            r = float(row["resistance_ohms"])
        except (TypeError, ValueError):
            problems.append(f"row {lineno}: not a number in {row!r}")
            continue
        if not dev_id:
            problems.append(f"row {lineno}: empty device_id")
            continue
        bad = []
        if not (math.isfinite(t) and t > 0):
            bad.append(f"t_seconds must be > 0, got {t!r}")
        if not (math.isfinite(r) and r > 0):
            bad.append(f"resistance_ohms must be > 0, got {r!r}")
        if bad:
            problems.append(f"row {lineno}: " + "; ".join(bad))
            continue
        out.append(DriftSample(dev_id, t, r, row=lineno))
    if problems:
        raise ValidationError(f"{source}: invalid rows", problems)
    if not out:
        raise InsufficientDataError(f"{source}: no samples")
    return out


def synthesize(r_t0: float, nu: float, times: Sequence[float], t0: float = 1.0,
               device_id: str = "d0") -> list[DriftSample]:
    """Noiseless samples from the power law itself."""
    return [DriftSample(device_id, float(t), r_t0 * (float(t) / t0) ** nu) for t in times]


# ---------------------------------------------------------------------------
# model cards
# ---------------------------------------------------------------------------

def card_params(fit: FitResult, t_ref: float = DeviceParams.t_ref, base: DeviceParams | None = None) -> dict:
    """Device keys reproducing the fitted curve for reads at t >= t_ref after RESET."""
    base = base or DeviceParams()
    # r_prog * (t / t_ref)**nu == r_t0 * (t / t0)**nu
    r_hrs = fit.r_t0 * (t_ref / fit.t0) ** fit.nu
    return {
        "nu": fit.nu,
        "t_ref": t_ref,
        "r_hrs": r_hrs,
        "r_lrs": base.r_lrs,
        "delta_nom": base.delta_nom,
        "i_nom": base.i_nom,
    }


def export_model_card(fit: FitResult, t_ref: float = DeviceParams.t_ref,
                      base: DeviceParams | None = None) -> str:
    """Render an INI fragment with a ``[device]`` section and fit provenance.

    A fit with a negative exponent is still written, with
    ``anomalous_drift = true`` in the provenance section.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp["device"] = {k: repr(float(v)) for k, v in card_params(fit, t_ref, base).items()}
    cp["provenance"] = {
        "device_id": fit.device_id,
        "r_t0": repr(fit.r_t0),
        "t0": repr(fit.t0),
        "rmse_log": repr(fit.rmse_log),
        "n_samples": str(fit.n_samples),
        "trimmed": str(fit.trimmed),
        "anomalous_drift": "true" if fit.anomalous else "false",
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue().replace("\r\n", "\n")


def read_model_card(source) -> tuple[DeviceParams, dict]:
    """Load a card (path or INI text) into :class:`DeviceParams` plus its provenance."""
    cp = configparser.ConfigParser(interpolation=None)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        with open(source, encoding="utf-8") as fh:
            cp.read_file(fh)
    else:
        cp.read_string(source)
    if "device" not in cp:
        raise ConfigError("model card has no [device] section")
    allowed = set(DeviceParams.__dataclass_fields__) - {"noise"}
    values = {}
    for key, raw in cp["device"].items():
        if key not in allowed:
            raise ConfigError(f"unknown device key {key!r} in model card")
        values[key] = float(raw)
    prov = dict(cp["provenance"]) if "provenance" in cp else {}
    return DeviceParams(**values), prov
