"""Reference implementations used by the tests.

Everything here is written from the model equations only and does not
import the package's device, trace or network code, so agreement between
the two is evidence rather than tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class Cell:
    """Bare power-law cell: r_prog, t_prog and the constants it needs."""

    r: float
    tp: float
    nu: float
    t_ref: float
    r_lrs: float
    delta: float
    i_nom: float

    def read(self, t: float) -> float:
        return self.r * max(1.0, (t - self.tp) / self.t_ref) ** self.nu

    def set(self, t: float, i: float) -> bool:
        r = self.read(t)
        if r < self.r_lrs:
            return False
        g = 1.0 / r * (1.0 + self.delta * min(1.0, i / self.i_nom))
        self.r, self.tp = 1.0 / g, t
        return True


def brute_force_capacity(n: int, interval: float, *, r_hrs=2.4e6, nu=0.1, t_ref=10e-3,
                         r_lrs=2.0e6, delta=0.5, t_init=0.25, max_tags=10_000) -> int:
    """Tags every ``interval`` from ``t_init`` on, routed round-robin with skip."""
    cells = [Cell(r_hrs, 0.0, nu, t_ref, r_lrs, delta, 100e-6) for _ in range(n)]
    cursor = 0
    for k in range(max_tags):
        t = t_init + k * interval
        for j in range(n):
            idx = (cursor + j) % n
            if cells[idx].set(t, 100e-6):
                cursor = (idx + 1) % n
                break
        else:
            return k
    return math.inf


def learning_loop_calls(script, t_reward, *, g_w_plus, g_w_minus, gain, v_th, i_th_plus, i_th_minus,
                     t_init, r_hrs, nu, t_ref, r_lrs, delta, i_nom, w_nu, w_r_lrs, w_delta,
                     v_read, scale_const, i_prog_max, i_prog_min):
    """Line-by-line replay of the three-factor learning loop for one synapse.

    ``script`` is a list of (t, v_mem) pairs: the membrane value right before
    each pre-spike. Returns (t, target, i_prog, applied) for every
    GRADUAL_SET issued, in order.
    """
    e_plus = Cell(r_hrs, 0.0, nu, t_ref, r_lrs, delta, i_nom)
    e_minus = Cell(r_hrs, 0.0, nu, t_ref, r_lrs, delta, i_nom)
    w_plus = Cell(1.0 / g_w_plus, 0.0, w_nu, t_ref, w_r_lrs, w_delta, i_nom)
    w_minus = Cell(1.0 / g_w_minus, 0.0, w_nu, t_ref, w_r_lrs, w_delta, i_nom)
    calls = []
    for t, v in script:
        # @Pre: W is read and integrated
        v_mem = v + gain * (1.0 / w_plus.read(t) - 1.0 / w_minus.read(t))
        i_x = 1.0 - (v_th - v_mem) / v_th
        if t > t_init:
            if i_x > i_th_plus:
                calls.append((t, "e+", i_nom, e_plus.set(t, i_nom)))
            if i_x < i_th_minus:
                calls.append((t, "e-", i_nom, e_minus.set(t, i_nom)))
    # Reward: READ(e+, e-), scale to programming currents, SET W+ then W-
    i_plus = min(i_prog_max, v_read / e_plus.read(t_reward) * scale_const)
    i_minus = min(i_prog_max, v_read / e_minus.read(t_reward) * scale_const)
    for target, cell, i in (("w+", w_plus, i_plus), ("w-", w_minus, i_minus)):
        if i >= i_prog_min:
            calls.append((t_reward, target, i, cell.set(t_reward, i)))
    return calls


def power_law_fit(ts, rs, t0=1.0):
    """Closed-form simple regression of log r on log(t / t0)."""
    xs = [math.log(t / t0) for t in ts]
    ys = [math.log(r) for r in rs]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    nu = sxy / sxx
    return math.exp(my - nu * mx), nu
