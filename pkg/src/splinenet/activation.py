"""Smooth activations and derivative oracles.

Logistic and tanh derivatives are exact: the k-th derivative is a polynomial
in the activation value itself, built once per order by a short recurrence.
Custom activations only provide a value function; their derivatives come from
central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

ArrayLike = float | np.ndarray


class ActivationError(ValueError):
    """Domain or capability error raised by activation helpers."""


def _logistic(x: ArrayLike) -> ArrayLike:
    # scipy.special.expit is stable at both tails
    from scipy.special import expit

    return expit(x)


@dataclass(frozen=True)
class ActivationKind:
    """Activation tag plus value function.

    ``shift`` is subtracted from every value.  Shifting tanh by its limit at
    minus infinity turns it into a sigmoid-like unit with limit 0, which is
    how the tanh synthesis pipeline reuses the sigmoid constructions.
    """

    tag: str
    name: str = ""
    func: Callable[[ArrayLike], ArrayLike] | None = field(default=None, compare=False, repr=False)
    smoothness: int = 64
    shift: float = 0.0

    def __post_init__(self) -> None:
        if self.tag not in ("logistic", "tanh", "custom"):
            raise ActivationError(f"unknown activation tag {self.tag!r}")
        if self.tag == "custom":
            if self.func is None or not self.name:
                raise ActivationError("custom activation needs a name and a value function")
            if self.smoothness < 1:
                raise ActivationError("custom activation must declare smoothness >= 1")

    @property
    def limit_neg(self) -> float:
        """Limit of the activation at minus infinity (the constant C of tanh-like units)."""
        if self.tag == "logistic":
            base = 0.0
        elif self.tag == "tanh":
            base = -1.0
        else:
            base = float(self.func(-1e3))
        return base - self.shift

    def raw(self, x: ArrayLike) -> ArrayLike:
        if self.tag == "logistic":
            return _logistic(x)
        if self.tag == "tanh":
            return np.tanh(x)
        return self.func(x)

    def __call__(self, x: ArrayLike) -> ArrayLike:
        v = self.raw(x)
        return v - self.shift if self.shift else v

    def generalized(self) -> "ActivationKind":
        """Copy shifted so that the limit at minus infinity is zero."""
        return replace(self, shift=self.shift + self.limit_neg)

    def unshifted(self) -> "ActivationKind":
        return replace(self, shift=0.0)

    def to_tag(self) -> str:
        if self.shift:
            raise ActivationError("shifted activations are internal and have no serial tag")
        return self.tag if self.tag != "custom" else f"custom:{self.name}"

    def inverse(self, level: float) -> float:
        """Solve act(y) = level for y."""
        v = level + self.shift
        if self.tag == "logistic":
            if not 0.0 < v < 1.0:
                raise ActivationError(f"level {level} outside logistic range")
            return math.log(v / (1.0 - v))
        if self.tag == "tanh":
            if not -1.0 < v < 1.0:
                raise ActivationError(f"level {level} outside tanh range")
            return math.atanh(v)
        g = lambda y: float(self.func(y)) - v
        lo, hi = -1.0, 1.0
        for _ in range(200):
            if g(lo) <= 0.0 <= g(hi):
                return brentq(g, lo, hi, xtol=1e-14)
            lo, hi = 2 * lo, 2 * hi
        raise ActivationError(f"cannot invert {self.name} at level {level}")


LOGISTIC = ActivationKind("logistic")
TANH = ActivationKind("tanh")

_CUSTOM: dict[str, ActivationKind] = {}


def custom(name: str, func: Callable[[ArrayLike], ArrayLike], smoothness: int, check: bool = True) -> ActivationKind:
    """Register a custom activation; it must be increasing on the negative half-line."""
    kind = ActivationKind("custom", name=name, func=func, smoothness=smoothness)
    if check:
        # compactify (-inf, 0] via y = -t/(1-t), t in [0, 1)
        t = np.linspace(0.0, 0.999, 400)
        y = -t / (1.0 - t)
        vals = np.asarray(func(y[::-1]), dtype=float)
        if np.any(np.diff(vals) < -1e-12):
            raise ActivationError(f"custom activation {name!r} is not increasing on (-inf, 0]")
    _CUSTOM[name] = kind
    return kind


def from_tag(tag: str) -> ActivationKind:
    if tag == "logistic":
        return LOGISTIC
    if tag == "tanh":
        return TANH
    if tag.startswith("custom:"):
        name = tag.split(":", 1)[1]
        if name in _CUSTOM:
            return _CUSTOM[name]
        raise ActivationError(f"custom activation {name!r} is not registered")
    raise ActivationError(f"unknown activation tag {tag!r}")


def evaluate(kind: ActivationKind, x: ArrayLike) -> ArrayLike:
    if not np.all(np.isfinite(x)):
        raise ActivationError("activation input must be finite")
    return kind(x)


@lru_cache(maxsize=None)
def _value_polynomial(tag: str, order: int) -> np.ndarray:
    # d^k act / dx^k as a polynomial in s = act(x)
    factor = [0.0, 1.0, -1.0] if tag == "logistic" else [1.0, 0.0, -1.0]
    p = np.array([0.0, 1.0])
    for _ in range(order):
        p = P.polymul(P.polyder(p), factor)
    return p


@lru_cache(maxsize=None)
def stencil(order: int, accuracy: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Central finite-difference offsets and weights (Vandermonde solve)."""
    half = (order + 1) // 2 - 1 + accuracy // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    V = np.vander(offsets, len(offsets), increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    return offsets, np.linalg.solve(V, rhs)


def fd_derivative(
    func: Callable[[ArrayLike], ArrayLike],
    order: int,
    x: ArrayLike,
    h: float | None = None,
    accuracy: int = 8,
) -> ArrayLike:
    """Central finite difference of the given order.

    The default step balances truncation against roundoff for an
    ``accuracy``-order stencil: h = eps^(1/(order+accuracy)) * max(1, |x|).
    """
    if order == 0:
        return func(x)
    x = np.asarray(x, dtype=float)
    offsets, weights = stencil(order, accuracy)
    if h is None:
        h = np.finfo(float).eps ** (1.0 / (order + accuracy)) * np.maximum(1.0, np.abs(x))
    acc = np.zeros_like(x, dtype=float)
    for o, c in zip(offsets, weights):
        if c != 0.0:
            acc = acc + c * func(x + o * h)
    out = acc / np.asarray(h) ** order
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DerivativeOracle:
    kind: ActivationKind = LOGISTIC
    max_order: int = 6
    mode: str = "analytic"
    fd_step: float | None = None

    def __post_init__(self) -> None:
        if self.max_order < 1:
            raise ActivationError("max_order must be >= 1")
        if self.mode not in ("analytic", "fd"):
            raise ActivationError(f"unknown derivative mode {self.mode!r}")
        if self.mode == "analytic" and self.kind.tag == "custom":
            object.__setattr__(self, "mode", "fd")

    def derivative(self, order: int, x: ArrayLike) -> ArrayLike:
        if order < 0 or order > self.max_order:
            raise ActivationError(f"derivative order {order} outside 0..{self.max_order}")
        if order == 0:
            return self.kind(x)
        if self.mode == "analytic":
            s = self.kind.raw(x)
            return P.polyval(s, _value_polynomial(self.kind.tag, order))
        return fd_derivative(self.kind.raw, order, x, self.fd_step)


def oracle_for(kind: ActivationKind, max_order: int = 6) -> DerivativeOracle:
    return DerivativeOracle(kind, max_order=max(max_order, 1))


def derivative(oracle: DerivativeOracle, order: int, x: ArrayLike) -> ArrayLike:
    return oracle.derivative(order, x)


def composed_derivative(
    oracle: DerivativeOracle,
    alpha: int | Sequence[int],
    w: Sequence[float],
    b: float,
    x: Sequence[float],
) -> float:
    """Mixed partial of act(w.x + b) for exponent multi-index ``alpha``.

    An integer ``alpha`` means the univariate derivative of that order.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(alpha, (int, np.integer)):
        if len(w) != 1:
            raise ActivationError("integer order needs a scalar weight; pass a multi-index")
        alpha = (int(alpha),)
    alpha = tuple(int(a) for a in alpha)
    if not (len(w) == len(x) == len(alpha)):
        raise ActivationError("dimension mismatch between w, x and the multi-index")
    k = sum(alpha)
    y = float(w @ x + b)
    return float(oracle.derivative(k, y)) * float(np.prod(w ** np.asarray(alpha)))


@lru_cache(maxsize=None)
def _argmax_table(kind_key: tuple, order: int) -> float:
    kind = _KIND_KEYS[kind_key]
    ys = np.linspace(-3.0, 3.0, 6001)
    vals = np.abs(np.asarray(oracle_for(kind, max(order, 1)).derivative(order, ys), dtype=float))
    top = vals.max()
    # among near-maximal points, prefer small |y|, then negative y
    cand = ys[vals >= top * (1 - 1e-9)]
    cand = sorted(cand, key=lambda y: (round(abs(y), 6), y))
    return float(cand[0])


_KIND_KEYS: dict[tuple, ActivationKind] = {}


def peak_argument(kind: ActivationKind, order: int) -> float:
    """Argument in [-3, 3] where |act^(order)| is largest."""
    key = (kind.tag, kind.name, kind.shift)
    _KIND_KEYS[key] = kind
    return _argmax_table(key, order)
