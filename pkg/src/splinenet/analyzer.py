"""Forensics for trained networks: local, global, inactivated and constant-term units.

A unit's contribution is dropped on the data points of its truncated side and
the fit error is recomputed.  The zero-error point (a hyperplane offset in n-D)
is the furthest truncation that leaves the error within a relative threshold.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .synth.network import TwoLayerNet
from .trainer import Dataset


class AnalyzerError(ValueError):
    pass


class Verdict(str, Enum):
    LOCAL = "local"
    GLOBAL = "global"
    INACTIVATED = "inactivated"
    CONSTANT_TERM = "constant-term"


class SolutionMode(str, Enum):
    LOCAL_APPROXIMATION = "local"
    GLOBAL_APPROXIMATION = "global"


@dataclass(frozen=True)
class Thresholds:
    gamma1: float = 0.01
    gamma2: float = 0.01
    gamma3: float = 0.01
    gamma4: float = 0.05
    scan_step: float = 0.01

    def __post_init__(self) -> None:
        for name in ("gamma1", "gamma2", "gamma3", "gamma4", "scan_step"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise AnalyzerError(f"{name} must lie in (0, 1), got {v}")


@dataclass(frozen=True)
class UnitReport:
    index: int
    verdict: Verdict
    zero_error: float | None
    eps_baseline: float
    eps_truncated: float | None
    eps_without: float
    line: tuple[tuple[float, ...], float] | None = None
    note: str = ""

    def to_json(self) -> dict:
        line = None if self.line is None else {"w": list(self.line[0]), "b0": self.line[1]}
        z = self.zero_error if self.line is None else None
        return {"index": self.index, "verdict": self.verdict.value, "z": z, "line": line}


@dataclass(frozen=True)
class _Context:
    """Per-(net, data) quantities shared by all unit tests."""

    X: np.ndarray
    contrib: np.ndarray  # (N, theta) lambda_j phi_j(x_i)
    resid: np.ndarray  # f(x_i) - g(x_i)
    eps: float
    exact_fit: bool


def _context(net: TwoLayerNet, data: Dataset) -> _Context:
    if data.n != net.n:
        raise AnalyzerError(f"data dimension {data.n} does not match network {net.n}")
    X = data.inputs
    contrib = net.activations(X) * net.L
    resid = data.targets - contrib.sum(axis=1) - net.output_bias
    eps = float(np.sqrt(resid @ resid))
    # relative tests are meaningless at an exact fit (eps is roundoff); use an absolute floor
    floor = 1e-12 * float(np.linalg.norm(data.targets)) or 1e-300
    exact = eps <= floor
    if exact:
        eps = floor
    return _Context(X, contrib, resid, eps, exact)


def baseline_eps(net: TwoLayerNet, data: Dataset) -> float:
    r = data.targets - net(data.inputs)
    return float(np.sqrt(r @ r))


def _eps_without(ctx: _Context, i: int, mask: np.ndarray | None = None) -> float:
    extra = ctx.contrib[:, i] if mask is None else np.where(mask, ctx.contrib[:, i], 0.0)
    r = ctx.resid + extra
    return float(np.sqrt(r @ r))


def _feasible(ctx: _Context, i: int, mask: np.ndarray, gamma1: float, base: float) -> bool:
    return abs(_eps_without(ctx, i, mask) - base) < gamma1 * ctx.eps


def _base(ctx: _Context) -> float:
    return float(np.sqrt(ctx.resid @ ctx.resid))


def _scan_1d(ctx: _Context, net: TwoLayerNet, i: int, th: Thresholds) -> tuple[float | None, float | None, np.ndarray]:
    x = ctx.X[:, 0]
    w = float(net.units[i].w[0])
    count = int(round(1.0 / th.scan_step)) + 1
    grid = np.linspace(0.0, 1.0, count)
    base = _base(ctx)
    flags = np.empty(count, dtype=bool)
    eps_at = np.empty(count)
    for k, xk in enumerate(grid):
        mask = x <= xk + 1e-12 if w >= 0 else x >= xk - 1e-12
        eps_at[k] = _eps_without(ctx, i, mask)
        flags[k] = abs(eps_at[k] - base) < th.gamma1 * ctx.eps
    if not flags.any():
        return None, None, flags
    k = int(np.flatnonzero(flags).max() if w >= 0 else np.flatnonzero(flags).min())
    return float(grid[k]), float(eps_at[k]), flags


def zero_error_point(net: TwoLayerNet, unit_index: int, data: Dataset, th: Thresholds = Thresholds()) -> float | None:
    """Furthest scan point whose truncation keeps |eps' - eps| < gamma1 eps (max for w >= 0, min for w < 0)."""
    if net.n != 1:
        raise AnalyzerError("zero_error_point is one-dimensional; use zero_error_hyperplane")
    ctx = _context(net, data)
    return _scan_1d(ctx, net, unit_index, th)[0]


def feasible_set(net: TwoLayerNet, unit_index: int, data: Dataset, th: Thresholds = Thresholds()) -> np.ndarray:
    """Boolean feasibility of each scan point (1-D)."""
    ctx = _context(net, data)
    return _scan_1d(ctx, net, unit_index, th)[2]


def _cube_range(w: np.ndarray) -> tuple[float, float]:
    return float(np.minimum(w, 0.0).sum()), float(np.maximum(w, 0.0).sum())


def _scan_nd(ctx: _Context, net: TwoLayerNet, i: int, th: Thresholds, count: int = 101) -> tuple[float | None, float | None]:
    """Largest c with the truncation region {w.x <= c} feasible; returns (c, eps')."""
    w = net.units[i].w
    lo, hi = _cube_range(w)
    if hi - lo <= 0.0:
        return None, None
    proj = ctx.X @ w
    base = _base(ctx)
    best = None
    for c in np.linspace(lo, hi, count):
        mask = proj <= c + 1e-12 * (hi - lo)
        e = _eps_without(ctx, i, mask)
        if abs(e - base) < th.gamma1 * ctx.eps:
            best = (float(c), e)
    return best if best is not None else (None, None)


def zero_error_hyperplane(net: TwoLayerNet, unit_index: int, data: Dataset, th: Thresholds = Thresholds()) -> float | None:
    """Offset b0 of the zero-error hyperplane w.x + b0 = 0 (None when nothing is feasible).

    Offsets are scanned over the 101 values where the hyperplane meets the unit
    cube; the truncated side is w.x + b0 <= 0 and the reported offset is the
    one with the largest feasible truncated region.
    """
    ctx = _context(net, data)
    c, _ = _scan_nd(ctx, net, unit_index, th)
    return None if c is None else -c


def _is_constant(net: TwoLayerNet, i: int, X: np.ndarray, gamma4: float) -> tuple[bool, str]:
    u = net.units[i]
    phi = np.asarray(u.activation(X))
    M = float(phi.max())
    if M == 0.0:
        return False, "M = 0, excluded"
    corners = np.array(list(itertools.product([0.0, 1.0], repeat=net.n)))
    vals = np.asarray(u.activation(corners))
    return bool(np.all(np.abs((vals - M) / M) < gamma4)), ""


def classify_unit(net: TwoLayerNet, unit_index: int, data: Dataset, th: Thresholds = Thresholds()) -> UnitReport:
    return _classify(net, _context(net, data), unit_index, th)


def _classify(net: TwoLayerNet, ctx: _Context, i: int, th: Thresholds) -> UnitReport:
    base = _base(ctx)
    note = "exact-fit: absolute eps floor in use" if ctx.exact_fit else ""
    e2 = _eps_without(ctx, i)
    if abs(e2 - base) < th.gamma3 * ctx.eps:
        return UnitReport(i, Verdict.INACTIVATED, None, ctx.eps, None, e2, note=note)
    u = net.units[i]
    if u.kind.unshifted().to_tag() == "tanh":
        const, why = _is_constant(net, i, ctx.X, th.gamma4)
        if const:
            return UnitReport(i, Verdict.CONSTANT_TERM, None, ctx.eps, None, e2, note=note)
        note = "; ".join(v for v in (note, why) if v)
    if net.n == 1:
        z, e1, _ = _scan_1d(ctx, net, i, th)
        w = float(u.w[0])
        edge = 0.0 if w >= 0 else 1.0
        endpoint = abs(u.lam * float(u.kind(w * edge + u.b)))
        local = z is not None and 0.0 < z < 1.0 and endpoint < th.gamma2 * ctx.eps
        return UnitReport(i, Verdict.LOCAL if local else Verdict.GLOBAL, z, ctx.eps, e1, e2, note=note)
    c, e1 = _scan_nd(ctx, net, i, th)
    lo, hi = _cube_range(u.w)
    line = None
    local = False
    if c is not None:
        line = (tuple(float(v) for v in u.w), -c)
        span = hi - lo
        inside = lo + 1e-9 * span < c < hi - 1e-9 * span
        # boundary set: data within one scan step of the extreme hyperplane w.x = lo
        dist = (ctx.X @ u.w - lo) / float(np.linalg.norm(u.w))
        S = dist <= th.scan_step + 1e-12
        boundary = float(np.abs(ctx.contrib[S, i]).sum()) if S.any() else 0.0
        local = inside and boundary <= th.gamma2 * ctx.eps
    return UnitReport(i, Verdict.LOCAL if local else Verdict.GLOBAL, None if c is None else -c, ctx.eps, e1, e2, line, note)


def classify_all(net: TwoLayerNet, data: Dataset, th: Thresholds = Thresholds()) -> list[UnitReport]:
    ctx = _context(net, data)
    return [_classify(net, ctx, i, th) for i in range(net.theta)]


def constant_term_units(net: TwoLayerNet, data: Dataset, th: Thresholds = Thresholds()) -> list[int]:
    """Activated tanh units whose value at every cube corner is within gamma4 of their maximum."""
    ctx = _context(net, data)
    base = _base(ctx)
    out = []
    for i, u in enumerate(net.units):
        if u.kind.unshifted().to_tag() != "tanh":
            raise AnalyzerError("constant-term detection applies to tanh networks")
        if abs(_eps_without(ctx, i) - base) < th.gamma3 * ctx.eps:
            continue
        if _is_constant(net, i, ctx.X, th.gamma4)[0]:
            out.append(i)
    return out


def solution_mode(reports: Sequence[UnitReport]) -> SolutionMode:
    if any(r.verdict is Verdict.LOCAL for r in reports):
        return SolutionMode.GLOBAL_APPROXIMATION
    return SolutionMode.LOCAL_APPROXIMATION


def axis_alignment(w: Sequence[float]) -> float:
    """|cos| of the angle between w and its nearest coordinate axis."""
    w = np.asarray(w, dtype=float)
    return float(np.abs(w).max() / np.linalg.norm(w))


@dataclass(frozen=True)
class Analysis:
    eps: float
    mode: SolutionMode
    units: tuple[UnitReport, ...] = field(repr=False)

    def counts(self) -> dict[str, int]:
        out = {v.value: 0 for v in Verdict}
        for r in self.units:
            out[r.verdict.value] += 1
        return out

    def to_json(self) -> dict:
        return {"eps": self.eps, "mode": self.mode.value, "units": [r.to_json() for r in self.units]}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))


def analyze(net: TwoLayerNet, data: Dataset, th: Thresholds = Thresholds()) -> Analysis:
    reports = classify_all(net, data, th)
    return Analysis(baseline_eps(net, data), solution_mode(reports), tuple(reports))


def write_plot_csv(net: TwoLayerNet, data: Dataset, analysis: Analysis, path: str | Path, step: float = 0.01) -> None:
    """Long-format plot data: series in {target, output, curve, marker, line}.

    1-D: activation curves on a grid of ``step`` plus one marker row per local
    unit at its zero-error point.  n-D: the two endpoints of each local unit's
    zero-error line clipped to the unit square (2-D only) instead of curves.
    """
    n = net.n
    cols = ["series", "unit"] + [f"x{i + 1}" for i in range(n)] + ["value"]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(cols)
        for xi, yi in zip(data.inputs, data.targets):
            out.writerow(["target", ""] + [repr(float(v)) for v in xi] + [repr(float(yi))])
        g = net(data.inputs)
        for xi, gi in zip(data.inputs, g):
            out.writerow(["output", ""] + [repr(float(v)) for v in xi] + [repr(float(gi))])
        if n == 1:
            grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
            act = net.activations(grid)
            for j in range(net.theta):
                for x, v in zip(grid, act[:, j]):
                    out.writerow(["curve", j, repr(float(x)), repr(float(v))])
            for r in analysis.units:
                if r.verdict is Verdict.LOCAL and r.zero_error is not None:
                    v = float(net.units[r.index].activation(np.array([r.zero_error]))[0])
                    out.writerow(["marker", r.index, repr(r.zero_error), repr(v)])
        elif n == 2:
            for r in analysis.units:
                if r.verdict is Verdict.LOCAL and r.line is not None:
                    for p in _clip_line(np.asarray(r.line[0]), r.line[1]):
                        out.writerow(["line", r.index, repr(float(p[0])), repr(float(p[1])), ""])


def _clip_line(w: np.ndarray, b0: float) -> list[np.ndarray]:
    """Intersection points of w.x + b0 = 0 with the boundary of [0,1]^2."""
    pts = []
    for axis in (0, 1):
        other = 1 - axis
        if w[other] == 0.0:
            continue
        for t in (0.0, 1.0):
            s = -(b0 + w[axis] * t) / w[other]
            if -1e-12 <= s <= 1 + 1e-12:
                p = np.zeros(2)
                p[axis], p[other] = t, s
                if not any(np.allclose(p, q) for q in pts):
                    pts.append(p)
    return pts[:2]
