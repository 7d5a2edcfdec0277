"""Two-layer network value type and its JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..activation import ActivationKind, from_tag


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Unit:
    w: np.ndarray
    b: float
    lam: float
    kind: ActivationKind

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.w, dtype=float)).copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "lam", float(self.lam))
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b) and np.isfinite(self.lam)):
            raise NetworkError("unit parameters must be finite")

    def activation(self, x: np.ndarray) -> np.ndarray:
        return self.kind(as_points(x, len(self.w)) @ self.w + self.b)


def as_points(x: np.ndarray | float | Sequence[float], n: int) -> np.ndarray:
    """Coerce input to shape (N, n); 1-D inputs may be flat arrays."""
    x = np.asarray(x, dtype=float)
    if n == 1 and x.ndim <= 1:
        return x.reshape(-1, 1)
    x = np.atleast_2d(x)
    if x.shape[-1] != n:
        raise NetworkError(f"points have dimension {x.shape[-1]}, network expects {n}")
    return x


@dataclass(frozen=True)
class TwoLayerNet:
    """g(x) = sum_i lam_i act_i(w_i . x + b_i) + output_bias."""

    units: tuple[Unit, ...]
    output_bias: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "units", tuple(self.units))
        if self.units and len({len(u.w) for u in self.units}) != 1:
            raise NetworkError("all units must share the input dimension")
        if not np.isfinite(self.output_bias):
            raise NetworkError("output bias must be finite")

    @property
    def n(self) -> int:
        return len(self.units[0].w) if self.units else 1

    @property
    def theta(self) -> int:
        return len(self.units)

    @property
    def W(self) -> np.ndarray:
        return np.array([u.w for u in self.units]).reshape(self.theta, self.n)

    @property
    def B(self) -> np.ndarray:
        return np.array([u.b for u in self.units])

    @property
    def L(self) -> np.ndarray:
        return np.array([u.lam for u in self.units])

    def activations(self, x: np.ndarray | float) -> np.ndarray:
        """Matrix of unit activations, shape (N, theta)."""
        X = as_points(x, self.n)
        Z = X @ self.W.T + self.B
        out = np.empty_like(Z)
        kinds = [u.kind for u in self.units]
        for kind in dict.fromkeys(kinds):
            cols = [i for i, k in enumerate(kinds) if k == kind]
            out[:, cols] = kind(Z[:, cols])
        return out

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        return self.activations(x) @ self.L + self.output_bias

    def with_lambdas(self, lam: Sequence[float]) -> "TwoLayerNet":
        lam = np.asarray(lam, dtype=float)
        if len(lam) != self.theta:
            raise NetworkError("one output weight per unit")
        return replace(self, units=tuple(replace(u, lam=float(l)) for u, l in zip(self.units, lam)))

    def with_kind(self, kind: ActivationKind) -> "TwoLayerNet":
        return replace(self, units=tuple(replace(u, kind=kind) for u in self.units))

    def append(self, *units: Unit) -> "TwoLayerNet":
        return replace(self, units=self.units + tuple(units))

    def to_json(self) -> dict:
        return {
            "units": [
                {"w": [float(v) for v in u.w], "b": u.b, "lambda": u.lam, "kind": u.kind.to_tag()}
                for u in self.units
            ],
            "output_bias": float(self.output_bias),
        }

    @staticmethod
    def from_json(doc: Mapping) -> "TwoLayerNet":
        units = [Unit(u["w"], u["b"], u["lambda"], from_tag(u.get("kind", "logistic"))) for u in doc["units"]]
        return TwoLayerNet(tuple(units), float(doc.get("output_bias", 0.0)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @staticmethod
    def load(path: str | Path) -> "TwoLayerNet":
        return TwoLayerNet.from_json(json.loads(Path(path).read_text()))


def net_from_arrays(W: np.ndarray, b: Sequence[float], lam: Sequence[float], kind: ActivationKind, output_bias: float = 0.0) -> TwoLayerNet:
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    return TwoLayerNet(tuple(Unit(w, bb, l, kind) for w, bb, l in zip(W, b, lam)), output_bias)


def l2_error(f: "callable", g: "callable", n: int = 1, samples: int = 4001) -> float:
    """Root-mean-square difference on a dense grid of [0, 1]^n (L2 norm over the unit cube)."""
    if n == 1:
        x = np.linspace(0.0, 1.0, samples)
        return float(np.sqrt(np.mean((np.asarray(f(x)) - np.asarray(g(x))) ** 2)))
    side = int(round(samples ** (1.0 / n))) if samples > 200 else 101
    axes = [np.linspace(0.0, 1.0, side)] * n
    x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    return float(np.sqrt(np.mean((np.asarray(f(x)) - np.asarray(g(x))) ** 2)))
