"""Standard-partition spline implementation in two and three dimensions."""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import comb
from typing import Sequence

import numpy as np

from scipy.optimize import least_squares

from ..activation import LOGISTIC, ActivationKind
from ..polyspline import StandardPartitionSpline
from ..wronskian import Diagnostics, WronskianError
from .local import realize_target
from .network import TwoLayerNet, Unit, l2_error
from .spline1d import KnotReport, SynthesisError, local_unit, refit_lambdas, tanh_constant_compensation


@dataclass(frozen=True)
class NDSynthesis:
    net: TwoLayerNet
    construction_lambda: np.ndarray
    knot_reports: tuple[tuple[int, KnotReport], ...]
    global_diagnostics: Diagnostics | None
    construction_error: float
    final_error: float
    refined: bool
    polished: bool = False

    def to_json(self) -> dict:
        return {
            "knots": [{"axis": a, **r.to_json()} for a, r in self.knot_reports],
            "global_block": self.global_diagnostics.to_json() if self.global_diagnostics else None,
            "construction_lambda": [float(v) for v in self.construction_lambda],
            "construction_error": self.construction_error,
            "final_error": self.final_error,
            "refined": self.refined,
            "polished": self.polished,
        }


def expected_units(s: StandardPartitionSpline) -> int:
    return sum(len(g) for g in s.grid) + comb(s.n + s.m, s.m)


def _build_nd(
    s: StandardPartitionSpline,
    gen: ActivationKind,
    dt: float,
    slope: float,
    level: float,
    tol: float,
    refine: bool,
    rho_max: float,
) -> NDSynthesis:
    n, m = s.n, s.m
    first = [np.concatenate([[0.0], g, [1.0]])[:2] for g in s.grid]
    centre = np.array([0.5 * (a + b) for a, b in first])
    radius = 0.5 * min(b - a for a, b in first)
    gnet, real = realize_target(s.base_piece, centre, m, gen, radius=radius, deltas=[dt])
    zeta = s.zeta
    budget = tol / (2 * zeta + 1)
    units = list(gnet.units)
    lam = list(real.lam)
    reports = []
    for axis, (g, alphas) in enumerate(zip(s.grid, s.axis_alphas)):
        edges = np.concatenate([[0.0], g, [1.0]])
        for v, k in enumerate(g):
            res = local_unit(float(k), slope, level, gen, float(alphas[v]), float(edges[v + 2]), m, budget, rho_max)
            w = np.zeros(n)
            w[axis] = res.w
            units.append(Unit(w, res.b, 0.0, gen))
            lam.append(float(alphas[v]) / res.c_k)
            reports.append((axis, KnotReport(float(k), res.rho, res.gamma, res.c_k, res.zero_part_l2)))
    net = TwoLayerNet(tuple(units)).with_lambdas(lam)
    lam_c = net.L.copy()
    err_c = l2_error(s, net, n=n)
    final, refined, err = net, False, err_c
    if refine and err_c > tol:
        cand = net.with_lambdas(refit_lambdas(net, s, n=n))
        err_r = l2_error(s, cand, n=n)
        if err_r < err_c:
            final, refined, err = cand, True, err_r
    return NDSynthesis(final, lam_c, tuple(reports), real.diagnostics, err_c, err, refined)


def _grid(n: int) -> np.ndarray:
    side = 41 if n == 2 else 13
    g = np.linspace(0.0, 1.0, side)
    return np.stack(np.meshgrid(*[g] * n, indexing="ij"), -1).reshape(-1, n)


def polish_pinned(net: TwoLayerNet, s: StandardPartitionSpline, level: float, max_nfev: int = 2000) -> TwoLayerNet:
    """Adjust unit parameters with output weights solved in closed form.

    Global units move freely.  Each local unit keeps its axis and stays pinned
    at its knot with value ``level`` there, so only its slope changes.
    """
    n = s.n
    gen = net.units[0].kind
    n_glob = comb(n + s.m, s.m)
    pins = [(a, float(k)) for a, g in enumerate(s.grid) for k in g]
    z = gen.inverse(level)
    X = _grid(n)
    y = np.asarray(s(X), dtype=float)

    def build(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        W = np.zeros((n_glob + len(pins), n))
        B = np.zeros(n_glob + len(pins))
        W[:n_glob] = p[: n_glob * n].reshape(n_glob, n)
        B[:n_glob] = p[n_glob * n : n_glob * (n + 1)]
        for i, (a, k) in enumerate(pins):
            slope = np.exp(p[n_glob * (n + 1) + i])
            W[n_glob + i, a] = slope
            B[n_glob + i] = z - slope * k
        return W, B

    def solve(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        W, B = build(p)
        Phi = gen(X @ W.T + B)
        return Phi, np.linalg.lstsq(Phi, y, rcond=None)[0]

    def resid(p: np.ndarray) -> np.ndarray:
        Phi, lam = solve(p)
        return Phi @ lam - y

    slopes = [float(np.abs(u.w).sum()) for u in net.units[n_glob:]]
    p0 = np.concatenate([net.W[:n_glob].ravel(), net.B[:n_glob], np.log(slopes)])
    # LM stalls at the evaluation cap here; scaled trust-region converges in a few hundred
    sol = least_squares(resid, p0, method="trf", x_scale="jac", max_nfev=max_nfev)
    W, B = build(sol.x)
    _, lam = solve(sol.x)
    return TwoLayerNet(tuple(Unit(w, b, l, gen) for w, b, l in zip(W, B, lam)))


# (slope multiple of 2/spacing, level, delta_t) starting points, most reliable first
_POLISH_STARTS = ((4 / 3, 0.03, 0.9), (4 / 3, 0.25, 0.5), (8 / 3, 0.25, 0.5), (8 / 3, 0.1, 0.5))


def synthesize_spline_nd(
    s: StandardPartitionSpline,
    kind: ActivationKind = LOGISTIC,
    tol: float = 1e-2,
    slope: float | None = None,
    level: float | None = None,
    deltas: Sequence[float] | None = None,
    refine: bool = True,
    polish: bool = True,
) -> NDSynthesis:
    """C(n+m, m) global units for the base piece plus one sharpened unit per grid hyperplane.

    Local unit weights follow the per-axis recurrence (alpha / c_k); when that
    misses ``tol`` the weights are re-solved by least squares on a dense grid.
    If that still misses, ``polish`` runs ``polish_pinned`` from a few starts.
    """
    gen = kind.generalized()
    spacing = min(float(np.diff(np.concatenate([[0.0], g, [1.0]])).min()) for g in s.grid)
    slope = 2.0 / spacing if slope is None else slope
    level = 0.5 * float(gen(0.0)) if level is None else level
    deltas = np.geomspace(0.9, 0.1, 8) if deltas is None else deltas
    caps = [1024.0] + ([2.0**j for j in range(0, 7)] if s.zeta > 1 else [])
    best: NDSynthesis | None = None
    last: Exception | None = None
    for cap in caps:
        for dt in deltas:
            try:
                out = _build_nd(s, gen, float(dt), slope, level, tol, refine, cap)
            except (WronskianError, SynthesisError, np.linalg.LinAlgError) as exc:
                last = exc
                continue
            if best is None or out.final_error < best.final_error:
                best = out
            if out.final_error <= tol and (cap != caps[0] or not out.refined):
                break
        if best is not None and best.final_error <= tol:
            break
    if best is None:
        raise SynthesisError(f"no global block could be realized ({last})")
    if polish and refine and best.final_error > tol and s.zeta > 1:
        for mult, lev, dt in _POLISH_STARTS:
            try:
                start = _build_nd(s, gen, dt, mult * slope / 2.0, lev, tol, True, 1.0)
                net = polish_pinned(start.net, s, lev)
            except (WronskianError, SynthesisError, np.linalg.LinAlgError, ValueError):
                continue
            err = l2_error(s, net, n=s.n)
            if err < best.final_error:
                best = replace(best, net=net, final_error=err, refined=True, polished=True)
            if best.final_error <= tol:
                break
    if kind.limit_neg != 0.0 and kind.shift == 0.0:
        best = replace(best, net=tanh_constant_compensation(best.net))
    return best


def implement_spline_nd(s: StandardPartitionSpline, kind: ActivationKind = LOGISTIC, tol: float = 1e-2) -> TwoLayerNet:
    out = synthesize_spline_nd(s, kind, tol)
    if out.final_error > tol:
        raise SynthesisError(f"tolerance {tol:g} not reached: best L2 error {out.final_error:.3g}")
    return out.net
