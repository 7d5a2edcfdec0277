"""Unit sharpening: steepen a unit around a knot while pinning its value there.

The sharpened unit is act(rho (w x + b) + gamma).  The first shift
gamma' = (w x_k + b)(1 - rho) keeps the value at x_k.  A second shift gamma''
moves that value to the requested level, which is equivalent to pinning the
steepened unit at an auxiliary point x_k' = x_k + gamma'' / (rho w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ..activation import LOGISTIC, ActivationKind


class SharpenError(ValueError):
    pass


@dataclass(frozen=True)
class SharpenResult:
    w: float
    b: float
    rho: float
    gamma: float
    gamma_prime: float
    gamma_second: float
    x_k: float
    x_k_aux: float
    level: float
    c_k: float
    zero_part_l2: float

    def __call__(self, x: np.ndarray | float, kind: ActivationKind = LOGISTIC) -> np.ndarray:
        return kind(self.w * np.asarray(x, dtype=float) + self.b)


def chebyshev_points(lo: float, hi: float, count: int) -> np.ndarray:
    t = np.cos(np.pi * (np.arange(count) + 0.5) / count)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * t[::-1]


def truncated_fit(func, x_k: float, other: float, m: int) -> float:
    """Least-squares c in func(x) ~ c |x - x_k|^m over the interval between x_k and other."""
    x = chebyshev_points(min(x_k, other), max(x_k, other), 10 * (m + 1))
    basis = np.abs(x - x_k) ** m
    return float(basis @ np.asarray(func(x)) / (basis @ basis))


def sharpen(
    w: float,
    b: float,
    x_k: float,
    rho: float,
    eps_level: float | None = None,
    kind: ActivationKind = LOGISTIC,
    m: int = 3,
    neighbour: float | None = None,
) -> SharpenResult:
    """Sharpen unit act(w x + b) around x_k.

    ``eps_level`` is the unit's value at x_k afterwards; by default the value
    already there is kept.  For w > 0 the zero part is [0, x_k] and c_k is fit
    on (x_k, neighbour]; for w < 0 both sides are mirrored.  ``neighbour``
    defaults to the domain edge beyond x_k.
    """
    if rho < 1.0:
        raise SharpenError("rho must be >= 1")
    if w == 0.0:
        raise SharpenError("sharpening needs a nonzero weight")
    edge = -b / w
    if w > 0 and not (0.0 < x_k <= edge + 1e-12):
        raise SharpenError(f"x_k = {x_k} outside the admissible range (0, {edge:.6g}]")
    if w < 0 and not (edge - 1e-12 <= x_k < 1.0):
        raise SharpenError(f"x_k = {x_k} outside the admissible range [{edge:.6g}, 1)")
    y_k = w * x_k + b
    current = float(kind(y_k))
    level = current if eps_level is None else float(eps_level)
    ceiling = float(kind(0.0))
    if not 0.0 < level <= ceiling + 1e-15:
        raise SharpenError(f"level {level} outside (0, act(0)]")
    g1 = y_k * (1.0 - rho)
    gamma = kind.inverse(level) - rho * y_k
    g2 = gamma - g1
    ws, bs = rho * w, rho * b + gamma
    if neighbour is None:
        neighbour = 1.0 if w > 0 else 0.0
    f = lambda x: kind(ws * np.asarray(x) + bs)
    c_k = truncated_fit(f, x_k, neighbour, m)
    lo, hi = (0.0, x_k) if w > 0 else (x_k, 1.0)
    zp = math.sqrt(quad(lambda x: float(f(x)) ** 2, lo, hi, limit=200, epsabs=1e-14)[0]) if hi > lo else 0.0
    return SharpenResult(ws, bs, rho, gamma, g1, g2, x_k, x_k + g2 / ws, level, c_k, zp)


def one_unit_error(res: SharpenResult, d_k: float, m: int, next_knot: float, kind: ActivationKind = LOGISTIC) -> float:
    """L2 distance on [0, next_knot] between lam * unit and d_k (x - x_k)_+^m, lam = d_k / c_k."""
    lam = d_k / res.c_k
    g = lambda x: lam * float(kind(res.w * x + res.b)) - d_k * max(x - res.x_k, 0.0) ** m
    val = quad(lambda x: g(x) ** 2, 0.0, next_knot, points=[res.x_k], limit=200, epsabs=1e-14)[0]
    return math.sqrt(val)


def adapted_one_unit_error(
    res: SharpenResult, d_k: float, m: int, next_knot: float, kind: ActivationKind = LOGISTIC
) -> tuple[float, float]:
    """One-unit error with the next knot moved to x_k + (next_knot - x_k) / rho.

    Keeping x_{k+1} fixed, a single sigmoid cannot match a degree-m truncated
    power to arbitrary precision; moving the knots right of x_k with the
    sharpening scale is what makes the one-unit error shrink.  c_k is refit on
    the shortened interval.  Returns (error, adapted next knot).
    """
    nk = res.x_k + (next_knot - res.x_k) / res.rho
    f = lambda x: kind(res.w * np.asarray(x) + res.b)
    c = truncated_fit(f, res.x_k, nk, m)
    adapted = SharpenResult(**{**res.__dict__, "c_k": c})
    return one_unit_error(adapted, d_k, m, nk, kind), nk
