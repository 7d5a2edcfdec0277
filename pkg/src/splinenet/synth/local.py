"""Networks that realize a Taylor polynomial near a point."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..activation import LOGISTIC, ActivationKind
from ..polyspline import Poly1D, PolyND, taylor_coefficients, taylor_nd
from ..wronskian import Realization, best_realization
from .network import TwoLayerNet, Unit


def taylor_target(
    f: Callable,
    x0: Sequence[float] | float,
    m: int,
    derivative: Callable[[int, float], float] | None = None,
) -> Poly1D | PolyND:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if len(x0) == 1:
        return Poly1D.from_taylor(taylor_coefficients(f, float(x0[0]), m, derivative), float(x0[0]))
    return taylor_nd(f, x0, m)


def realize_target(
    target: Poly1D | PolyND,
    x0: Sequence[float] | float,
    m: int,
    kind: ActivationKind = LOGISTIC,
    radius: float = 0.02,
    deltas: Sequence[float] | None = None,
) -> tuple[TwoLayerNet, Realization]:
    real = best_realization(target, x0, m, kind, radius=radius, deltas=deltas)
    units = tuple(Unit(w, b, l, kind) for (w, b), l in zip(real.schedule.units, real.lam))
    return TwoLayerNet(units), real


def local_approx(
    f: Callable,
    x0: Sequence[float] | float,
    m: int,
    kind: ActivationKind = LOGISTIC,
    radius: float = 0.02,
    derivative: Callable[[int, float], float] | None = None,
) -> TwoLayerNet:
    """C(n+m, m) units whose output matches the degree-m Taylor polynomial of f at x0."""
    net, _ = realize_target(taylor_target(f, x0, m, derivative), x0, m, kind, radius)
    return net
