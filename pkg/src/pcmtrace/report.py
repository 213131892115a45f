"""Area-per-time-constant cost comparison of eligibility-trace implementations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import ValidationError


@dataclass(frozen=True)
class CostRow:
    name: str
    area_um2: float
    tau_s: float

    @property
    def area_per_tau(self) -> float:
        return self.area_um2 / self.tau_s


class PublishedRow(NamedTuple):
    """A published figure to check against: ``relation`` is "=" or "<"."""

    name: str
    area_um2: float
    tau_s: float
    area_per_tau: float
    relation: str


# capacitor-based CMOS trace vs single-PCM trace; the PCM time constant is a
# lower bound (> 30 s) so its figure of merit is an upper bound
PUBLISHED_ROWS = (
    PublishedRow("CMOS", 20.0 * 17.0, 6.0, 56.6, "="),
    PublishedRow("PCM", 12.0 * 12.0, 30.0, 4.8, "<"),
)


class RowCheck(NamedTuple):
    name: str
    computed: float
    published: float
    relation: str
    ok: bool


@dataclass(frozen=True)
class CostReport:
    rows: tuple[CostRow, ...]

    def row(self, name: str) -> CostRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def ratio(self, worse: str, better: str) -> float:
        """How many times more area per second of memory ``worse`` needs than ``better``."""
        return self.row(worse).area_per_tau / self.row(better).area_per_tau

    def table(self) -> list[tuple[str, float, float, float]]:
        return [(r.name, r.area_um2, r.tau_s, r.area_per_tau) for r in self.rows]


def cost_report(entries: Iterable) -> CostReport:
    """Build a report from ``(name, area_um2, tau_s)`` entries or :class:`CostRow` objects."""
    rows, problems = [], []
    for i, e in enumerate(entries):
        if isinstance(e, CostRow):
            name, area, tau = e.name, e.area_um2, e.tau_s
        else:
            name, area, tau = e[0], e[1], e[2]
        try:
            area, tau = float(area), float(tau)
        except (TypeError, ValueError):
            problems.append(f"entry {i} ({name}): area and tau must be numbers")
            continue
        bad = [f"{label} must be > 0, got {v!r}" for label, v in (("area", area), ("tau", tau))
               if not (math.isfinite(v) and v > 0)]
        if bad:
            problems.append(f"entry {i} ({name}): " + "; ".join(bad))
            continue
        rows.append(CostRow(str(name), area, tau))
    if problems:
        raise ValidationError("invalid cost entries", problems)
    return CostReport(tuple(rows))


def truncate(x: float, decimals: int) -> float:
    # published figures are truncated rather than rounded (340/6 = 56.67 is listed as 56.6)
    f = 10 ** decimals
    return math.floor(x * f + 1e-9) / f


def check_published(report: CostReport, published: Sequence[PublishedRow] = PUBLISHED_ROWS,
                    decimals: int = 1) -> list[RowCheck]:
    """Compare computed figures with published ones at the published precision.

    An "=" row matches when the computed value truncates to the published
    one; a "<" row (time constant given as a lower bound) matches when the
    value at the bound does not exceed the published figure.
    """
    out = []
    for p in published:
        got = report.row(p.name).area_per_tau
        if p.relation == "=":
            ok = math.isclose(truncate(got, decimals), p.area_per_tau, abs_tol=1e-9)
        elif p.relation == "<":
            ok = got <= p.area_per_tau + 1e-9
        else:
            raise ValueError(f"unknown relation {p.relation!r}")
        out.append(RowCheck(p.name, got, p.area_per_tau, p.relation, ok))
    return out


def load_cost_entries(path) -> list[tuple[str, str, str]]:
    """Read ``name,area_um2,tau_s`` rows. ``area_um2`` may be written as ``WxH``."""
    problems, out = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"name", "area_um2", "tau_s"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValidationError(f"{path}: header must contain name,area_um2,tau_s")
        for lineno, row in enumerate(reader, start=2):
            area = (row["area_um2"] or "").strip().lower().replace("×", "x")
            try:
                if "x" in area:
                    w, h = area.split("x")
                    area_v = float(w) * float(h)
                else:
                    area_v = float(area)
                tau_v = float(row["tau_s"])
            except (TypeError, ValueError):
                problems.append(f"row {lineno}: cannot parse {row!r}")
                continue
            if not (area_v > 0 and tau_v > 0):
                problems.append(f"row {lineno}: area and tau must be > 0")
                continue
            out.append(((row["name"] or "").strip(), area_v, tau_v))
    if problems:
        raise ValidationError(f"{path}: invalid rows", problems)
    return out
