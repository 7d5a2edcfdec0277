"""Full-batch gradient descent for two-layer networks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .activation import LOGISTIC, ActivationKind, oracle_for
from .synth.network import TwoLayerNet, Unit, as_points


class TrainError(ValueError):
    pass


class DivergenceError(TrainError):
    def __init__(self, message: str, trace: np.ndarray, step: int) -> None:
        super().__init__(message)
        self.trace = trace
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    theta: int = 10
    lr: float = 0.05
    steps: int = 5000
    seed: int = 0
    init: tuple[float, float] = (-1.0, 1.0)
    kind: ActivationKind = LOGISTIC
    output_bias: bool = False
    # "sse" descends the sum of squares, "mse" its mean
    objective: str = "mse"

    def __post_init__(self) -> None:
        if self.theta < 1:
            raise TrainError("theta must be >= 1")
        if not self.lr >= 0:
            raise TrainError("learning rate must be non-negative")
        if self.steps < 1:
            raise TrainError("steps must be >= 1")
        lo, hi = self.init
        if not lo < hi:
            raise TrainError("init range needs lo < hi")
        if self.objective not in ("sse", "mse"):
            raise TrainError(f"unknown objective {self.objective!r}")


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    scale: float = 1.0

    def __post_init__(self) -> None:
        x = np.asarray(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.targets, dtype=float).ravel()
        if len(x) != len(y):
            raise TrainError("inputs and targets differ in length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise TrainError("dataset values must be finite")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[1]

    def __len__(self) -> int:
        return len(self.targets)

    def normalized(self) -> "Dataset":
        """Targets scaled to have maximum absolute value 1; the factor is kept in ``scale``."""
        peak = float(np.abs(self.targets).max())
        if peak == 0.0:
            return self
        return Dataset(self.inputs, self.targets / peak, self.scale * peak)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) * self.scale

    @staticmethod
    def from_function(f: Callable[[np.ndarray], np.ndarray], n: int = 1, step: float = 0.01) -> "Dataset":
        count = int(round(1.0 / step)) + 1
        g = np.linspace(0.0, 1.0, count)
        if n == 1:
            x = g[:, None]
            y = f(g)
        else:
            x = np.stack(np.meshgrid(*[g] * n, indexing="ij"), -1).reshape(-1, n)
            y = f(x)
        return Dataset(x, np.broadcast_to(np.asarray(y, dtype=float), (len(x),)).copy())

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.n)] + ["y"])
            for xi, yi in zip(self.inputs, self.targets):
                w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])

    @staticmethod
    def from_csv(path: str | Path) -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise TrainError("empty dataset file")
        header = [h.strip() for h in rows[0]]
        n = len(header) - 1
        if n < 1 or header != [f"x{i + 1}" for i in range(n)] + ["y"]:
            raise TrainError(f"dataset header must be x1,...,xn,y (got {','.join(header)})")
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, n + 1)
        return Dataset(data[:, :n], data[:, n])


def init_net(cfg: TrainConfig, n: int) -> TwoLayerNet:
    """Theta units with w, b, lambda drawn i.i.d. from U(lo, hi) with the configured seed."""
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.init
    W = rng.uniform(lo, hi, size=(cfg.theta, n))
    b = rng.uniform(lo, hi, size=cfg.theta)
    lam = rng.uniform(lo, hi, size=cfg.theta)
    return TwoLayerNet(tuple(Unit(w, bb, l, cfg.kind) for w, bb, l in zip(W, b, lam)))


def residuals(net: TwoLayerNet, data: Dataset) -> np.ndarray:
    return data.targets - net(data.inputs)


def loss(net: TwoLayerNet, data: Dataset) -> float:
    """Root of the sum of squared residuals."""
    r = residuals(net, data)
    return float(np.sqrt(r @ r))


@dataclass(frozen=True)
class Gradient:
    W: np.ndarray
    b: np.ndarray
    lam: np.ndarray
    output_bias: float


def _derivatives(net: TwoLayerNet, Z: np.ndarray) -> np.ndarray:
    out = np.empty_like(Z)
    kinds = [u.kind for u in net.units]
    for kind in dict.fromkeys(kinds):
        cols = [i for i, k in enumerate(kinds) if k == kind]
        out[:, cols] = oracle_for(kind, 1).derivative(1, Z[:, cols])
    return out


def gradient(net: TwoLayerNet, data: Dataset) -> Gradient:
    """Gradient of the sum of squared residuals by backpropagation."""
    X = as_points(data.inputs, net.n)
    Z = X @ net.W.T + net.B
    Phi = net.activations(X)
    r = Phi @ net.L + net.output_bias - data.targets
    dPhi = _derivatives(net, Z)
    delta = 2.0 * r[:, None] * dPhi * net.L  # dSSE/dz per sample and unit
    return Gradient(delta.T @ X, delta.sum(axis=0), 2.0 * Phi.T @ r, float(2.0 * r.sum()))


def _apply(net: TwoLayerNet, W: np.ndarray, b: np.ndarray, lam: np.ndarray, bias: float) -> TwoLayerNet:
    units = tuple(Unit(w, bb, l, u.kind) for w, bb, l, u in zip(W, b, lam, net.units))
    return TwoLayerNet(units, bias)


@dataclass(frozen=True)
class TrainResult:
    net: TwoLayerNet
    trace: np.ndarray = field(repr=False)

    @property
    def initial_eps(self) -> float:
        return float(self.trace[0])

    @property
    def final_eps(self) -> float:
        return float(self.trace[-1])


def train(net: TwoLayerNet, data: Dataset, cfg: TrainConfig) -> TrainResult:
    """Full-batch descent for ``cfg.steps`` steps; trace[k] is eps after k steps."""
    if data.n != net.n:
        raise TrainError(f"dataset has dimension {data.n}, network {net.n}")
    W, b, lam = net.W.copy(), net.B.copy(), net.L.copy()
    bias = float(net.output_bias)
    kinds = [u.kind for u in net.units]
    X = data.inputs
    y = data.targets
    scale = 1.0 if cfg.objective == "sse" else 1.0 / len(y)
    trace = np.empty(cfg.steps + 1)
    single = len(set(kinds)) == 1
    oracle = oracle_for(kinds[0], 1)
    # divergence is detected from the loss itself, so overflow warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(cfg.steps + 1):
            Z = X @ W.T + b
            if single:
                Phi = kinds[0](Z)
                dPhi = oracle.derivative(1, Z)
            else:
                cur = _apply(net, W, b, lam, bias)
                Phi = cur.activations(X)
                dPhi = _derivatives(cur, Z)
            r = Phi @ lam + bias - y
            eps = float(np.sqrt(r @ r))
            trace[step] = eps
            if not np.isfinite(eps):
                raise DivergenceError(f"loss became non-finite at step {step}", trace[: step + 1], step)
            if step == cfg.steps:
                break
            delta = 2.0 * scale * r[:, None] * dPhi * lam
            gW, gb, gl = delta.T @ X, delta.sum(axis=0), 2.0 * scale * (Phi.T @ r)
            W = W - cfg.lr * gW
            b = b - cfg.lr * gb
            lam = lam - cfg.lr * gl
            if cfg.output_bias:
                bias -= cfg.lr * 2.0 * scale * float(r.sum())
    return TrainResult(_apply(net, W, b, lam, bias), trace)


def write_trace(trace: Sequence[float], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "eps"])
        for k, e in enumerate(trace):
            w.writerow([k, repr(float(e))])
