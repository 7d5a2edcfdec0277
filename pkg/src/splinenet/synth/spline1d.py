"""One-dimensional spline implementation and the spline-matrix system.

Each unit is approximated on every interval by a degree-m least-squares
polynomial.  Stacking the first-interval coefficients and the jumps of the
leading coefficient at each knot gives the matrix that maps output weights to
spline coefficients (first piece, then one truncated-power coefficient per
knot).  Units are masked to zero on intervals where their L2 norm is below
``eps``; for one-sided sharpened units this makes the knot block lower
triangular, so the weights follow by forward substitution.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from ..activation import LOGISTIC, TANH, ActivationKind
from ..polyspline import KnotSet1D, Poly1D, Spline1D
from ..wronskian import Diagnostics, WronskianError
from .local import realize_target
from .network import TwoLayerNet, Unit, l2_error
from .sharpen import SharpenResult, chebyshev_points, sharpen


class SynthesisError(ValueError):
    pass


class RankDeficientError(SynthesisError):
    pass


def interval_fits(func: Callable, knots: KnotSet1D, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-interval degree-m fits of ``func`` on 10(m+1) Chebyshev points.

    Returns coefficients (ascending, in x) of shape (zeta, m+1) and each fit's
    residual relative to the function's scale on that interval.
    """
    edges = knots.edges
    coeffs = np.empty((len(edges) - 1, m + 1))
    resid = np.empty(len(edges) - 1)
    for j in range(len(edges) - 1):
        lo, hi = edges[j], edges[j + 1]
        x = chebyshev_points(lo, hi, 10 * (m + 1))
        y = np.asarray(func(x), dtype=float)
        # fit in a centred variable for conditioning, then expand
        c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        local = P.polyfit((x - c) / h, y, m)
        poly = np.zeros(1)
        for k, a in enumerate(local):
            poly = P.polyadd(poly, a * P.polypow([-c / h, 1.0 / h], k))
        coeffs[j] = np.pad(poly, (0, m + 1 - len(poly)))[: m + 1]
        scale = max(np.abs(y).max(), 1e-300)
        resid[j] = float(np.abs(P.polyval(x, coeffs[j]) - y).max() / scale)
    return coeffs, resid


@lru_cache(maxsize=8)
def _gauss(samples: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(samples)


def interval_l2(func: Callable, knots: KnotSet1D, samples: int = 200) -> np.ndarray:
    edges = knots.edges
    out = np.empty(len(edges) - 1)
    x, wq = _gauss(samples)
    for j in range(len(edges) - 1):
        lo, hi = edges[j], edges[j + 1]
        xs = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        out[j] = math.sqrt(max(0.0, 0.5 * (hi - lo) * float(wq @ np.asarray(func(xs)) ** 2)))
    return out


@dataclass(frozen=True)
class SplineMatrix:
    matrix: np.ndarray
    mu: int
    m: int
    knots: KnotSet1D
    indicator: np.ndarray
    fits: np.ndarray
    residuals: np.ndarray
    flagged: tuple[tuple[int, int], ...]

    @property
    def A1(self) -> np.ndarray:
        return self.matrix[: self.m + 1, : self.mu]

    @property
    def B(self) -> np.ndarray:
        return self.matrix[: self.m + 1, self.mu :]

    @property
    def C(self) -> np.ndarray:
        return self.matrix[self.m + 1 :, : self.mu]

    @property
    def D(self) -> np.ndarray:
        return self.matrix[self.m + 1 :, self.mu :]

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.matrix))

    @property
    def cond(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def rhs(self, target: Spline1D) -> np.ndarray:
        return spline_vector(target, self.m)


def spline_vector(s: Spline1D, m: int | None = None) -> np.ndarray:
    m = s.m if m is None else m
    return np.concatenate([s.first_piece.padded(m)[: m + 1], s.alphas])


def spline_matrix(
    net: TwoLayerNet,
    knots: KnotSet1D | Sequence[float],
    m: int,
    eps: float = 1e-3,
    mu: int | None = None,
    residual_threshold: float = 1e-4,
) -> SplineMatrix:
    """Assemble the (zeta+m) x theta system from per-unit per-interval fits.

    Unit j is treated as zero on interval i when its L2 norm there is below
    ``eps``.  Rows: first-interval coefficients of x^0..x^m, then the jump of
    the x^m coefficient at each knot.  ``mu`` is the number of leading global
    units (default m+1).
    """
    if not isinstance(knots, KnotSet1D):
        knots = KnotSet1D(knots)
    zeta = knots.zeta
    mu = m + 1 if mu is None else mu
    theta = net.theta
    fits = np.empty((theta, zeta, m + 1))
    resid = np.empty((theta, zeta))
    ind = np.empty((theta, zeta), dtype=bool)
    for j, u in enumerate(net.units):
        f = lambda x, u=u: u.activation(x)
        fits[j], resid[j] = interval_fits(f, knots, m)
        ind[j] = interval_l2(f, knots) >= eps
    eff = fits * ind[:, :, None]
    A = np.zeros((zeta + m, theta))
    A[: m + 1] = eff[:, 0, :].T
    if zeta > 1:
        A[m + 1 :] = (eff[:, 1:, m] - eff[:, :-1, m]).T
    flagged = tuple((int(j), int(i)) for j, i in zip(*np.nonzero(resid > residual_threshold)))
    return SplineMatrix(A, mu, m, knots, ind, fits, resid, flagged)


def solve_spline_matrix(
    M: SplineMatrix,
    target: Spline1D,
    fixed: dict[int, float] | None = None,
) -> np.ndarray:
    """Output weights with matrix @ lam = target coefficients.

    ``fixed`` pins chosen columns to given values; the others are solved for
    (least-norm when the system is rectangular).
    """
    need = M.knots.zeta + M.m
    if M.rank < need:
        raise RankDeficientError(f"spline matrix rank {M.rank} < zeta + m = {need}")
    b = M.rhs(target)
    fixed = fixed or {}
    free = [j for j in range(M.matrix.shape[1]) if j not in fixed]
    rhs = b - sum((M.matrix[:, j] * v for j, v in fixed.items()), np.zeros_like(b))
    sub = M.matrix[:, free]
    if np.linalg.matrix_rank(sub) < need:
        raise RankDeficientError("remaining columns do not span the spline space")
    if sub.shape[0] == sub.shape[1]:
        sol = np.linalg.solve(sub, rhs)
    else:
        sol = np.linalg.lstsq(sub, rhs, rcond=None)[0]
    lam = np.empty(M.matrix.shape[1])
    lam[free] = sol
    for j, v in fixed.items():
        lam[j] = v
    return lam


def block_determinant_check(M: SplineMatrix) -> tuple[float, float]:
    """|det A| and |det A1| * prod |diag D| for a square one-sided system."""
    full = abs(float(np.linalg.det(M.matrix)))
    prod = abs(float(np.linalg.det(M.A1))) * float(np.prod(np.abs(np.diag(M.D)))) if M.D.size else abs(float(np.linalg.det(M.A1)))
    return full, prod


@dataclass(frozen=True)
class KnotReport:
    knot: float
    rho: float
    gamma: float
    c_k: float
    zero_part_l2: float

    def to_json(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class SplineSynthesis:
    net: TwoLayerNet
    construction_lambda: np.ndarray
    knot_reports: tuple[KnotReport, ...]
    global_diagnostics: Diagnostics | None
    construction_error: float
    final_error: float
    refined: bool
    eps_mask: float
    matrix: SplineMatrix | None
    limiting_knot: float | None = None

    def to_json(self) -> dict:
        return {
            "knots": [r.to_json() for r in self.knot_reports],
            "global_block": self.global_diagnostics.to_json() if self.global_diagnostics else None,
            "construction_lambda": [float(v) for v in self.construction_lambda],
            "construction_error": self.construction_error,
            "final_error": self.final_error,
            "refined": self.refined,
            "eps_mask": self.eps_mask,
            "limiting_knot": self.limiting_knot,
        }


def local_unit(
    knot: float,
    slope: float,
    level: float,
    kind: ActivationKind,
    alpha: float,
    next_edge: float,
    m: int,
    budget: float,
    rho_max: float = 1024.0,
    negative: bool = False,
) -> SharpenResult:
    """Base unit pinned at ``level`` on the knot, sharpened by the smallest
    doubling rho whose estimated zero-part contribution fits the budget."""
    w0 = -slope if negative else slope
    b0 = kind.inverse(level) - w0 * knot
    rho = 1.0
    best = None
    while rho <= rho_max:
        res = sharpen(w0, b0, knot, rho, kind=kind, m=m, neighbour=next_edge)
        best = res
        if alpha == 0.0 or abs(alpha / res.c_k) * res.zero_part_l2 <= budget:
            break
        rho *= 2.0
    return best


def _forward_weights(A: np.ndarray, b: np.ndarray, mu: int, m: int) -> np.ndarray:
    """Global block from the first-piece rows, then one local unit per knot row."""
    lam = np.zeros(A.shape[1])
    lam[:mu] = np.linalg.solve(A[: m + 1, :mu], b[: m + 1])
    for v in range(A.shape[0] - (m + 1)):
        row = m + 1 + v
        col = mu + v
        beta = A[row, col]
        if abs(beta) < 1e-14 * max(1.0, np.abs(A[row]).max()):
            raise SynthesisError(f"fitted increment of the unit at knot {v + 1} vanishes")
        gamma = A[row, :col] @ lam[:col]
        lam[col] = (b[row] - gamma) / beta
    return lam


def refit_lambdas(net: TwoLayerNet, target: Callable, n: int = 1, samples: int = 4001) -> np.ndarray:
    """Least-squares output weights against ``target`` on a dense grid."""
    if n == 1:
        x = np.linspace(0.0, 1.0, samples)
    else:
        side = 81 if n == 2 else 21
        x = np.stack(np.meshgrid(*[np.linspace(0, 1, side)] * n, indexing="ij"), -1).reshape(-1, n)
    Phi = net.activations(x)
    y = np.asarray(target(x), dtype=float) - net.output_bias
    scale = np.linalg.norm(Phi, axis=0)
    scale[scale == 0] = 1.0
    sol = np.linalg.lstsq(Phi / scale, y, rcond=None)[0]
    return sol / scale


def _build(
    s: Spline1D,
    gen: ActivationKind,
    dt: float,
    slope: float,
    level: float,
    tol: float,
    refine: bool,
    rho_max: float = 1024.0,
) -> SplineSynthesis:
    m = s.m
    knots = s.knots
    edges = knots.edges
    zeta = knots.zeta
    x0 = 0.5 * (edges[0] + edges[1])
    gnet, real = realize_target(s.first_piece, x0, m, gen, radius=0.5 * (edges[1] - edges[0]), deltas=[dt])
    budget = tol / (2 * zeta + 1)
    reports = []
    units = list(gnet.units)
    for v, k in enumerate(knots.knots):
        res = local_unit(k, slope, level, gen, float(s.alphas[v]), edges[v + 2], m, budget, rho_max)
        reports.append(KnotReport(float(k), res.rho, res.gamma, res.c_k, res.zero_part_l2))
        units.append(Unit([res.w], res.b, 0.0, gen))
    net = TwoLayerNet(tuple(units))
    mu = m + 1
    # mask each local unit exactly on the intervals left of its knot
    left = [interval_l2(lambda x, u=u: u.activation(x), knots)[: v + 1].max() for v, u in enumerate(net.units[mu:])]
    eps_mask = float(max(left) * (1.0 + 1e-9)) if left else 0.0
    M = spline_matrix(net, knots, m, eps=eps_mask, mu=mu) if zeta > 1 else None
    if M is not None:
        lam_c = _forward_weights(M.matrix, spline_vector(s), mu, m)
    else:
        lam_c = real.lam.copy()
    net = net.with_lambdas(lam_c)
    err_c = l2_error(s, net)
    final, refined, err = net, False, err_c
    if refine and err_c > tol:
        cand = net.with_lambdas(refit_lambdas(net, s))
        err_r = l2_error(s, cand)
        if err_r < err_c:
            final, refined, err = cand, True, err_r
    limiting = None
    if reports:
        worst = max(reports, key=lambda r: abs(r.zero_part_l2 * 1.0))
        limiting = worst.knot
    return SplineSynthesis(final, lam_c, tuple(reports), real.diagnostics, err_c, err, refined, eps_mask, M, limiting)


def synthesize_spline_1d(
    s: Spline1D,
    kind: ActivationKind = LOGISTIC,
    tol: float = 1e-3,
    slope: float | None = None,
    level: float | None = None,
    deltas: Sequence[float] | None = None,
    refine: bool = True,
    rho_caps: Sequence[float] | None = None,
) -> SplineSynthesis:
    """Network with (m+1) + (zeta-1) units approximating the spline.

    The global block realizes the first piece around the first interval's
    midpoint; each knot gets one sharpened unit whose weight comes from the
    compensation formula.  Several delta_t values are tried and the most
    accurate network is kept.  If the compensation weights miss ``tol``, the
    weights are re-solved by least squares on a dense grid (same units).
    When that still misses, rho is capped at 1, 2, 4, ... in turn, since very
    sharp units are hard to combine with smooth pieces; ``rho_caps`` replaces
    this schedule (``[1024]`` keeps the budget-driven sharpening only).
    Tanh-like kinds are built with the shifted activation and finished by
    ``tanh_constant_compensation``.
    """
    gen = kind.generalized()
    spacing = float(np.diff(s.knots.edges).min())
    slope = 2.0 / spacing if slope is None else slope
    level = 0.5 * float(gen(0.0)) if level is None else level
    if s.zeta == 1:
        deltas = np.geomspace(0.9, 0.05, 15) if deltas is None else deltas
    else:
        deltas = np.geomspace(0.9, 0.1, 10) if deltas is None else deltas
    best: SplineSynthesis | None = None
    last: Exception | None = None
    # budget-driven rho first; if that misses tol, cap rho (sharp units fit cubics poorly)
    if rho_caps is None:
        caps = [1024.0] + ([2.0**j for j in range(0, 7)] if s.zeta > 1 else [])
    else:
        caps = list(rho_caps)
    for cap in caps:
        for dt in deltas:
            try:
                out = _build(s, gen, float(dt), slope, level, tol, refine, cap)
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
    if kind.limit_neg != 0.0 and kind.shift == 0.0:
        best = replace(best, net=tanh_constant_compensation(best.net))
    return best


def implement_spline_1d(s: Spline1D, kind: ActivationKind = LOGISTIC, tol: float = 1e-3) -> TwoLayerNet:
    out = synthesize_spline_1d(s, kind, tol)
    if out.final_error > tol:
        raise SynthesisError(
            f"tolerance {tol:g} not reached: best L2 error {out.final_error:.3g} (limiting knot {out.limiting_knot})"
        )
    return out.net


def tanh_constant_compensation(net: TwoLayerNet, beta_bias: float = 3.0, floor: float = 1e-6) -> TwoLayerNet:
    """Swap shifted units for plain ones and add a near-constant unit for the offset.

    With psi = act - C, sum lam psi = sum lam act - C sum lam.  The appended
    unit has tiny weight, value beta ~ act(beta_bias) on [0, 1], and output
    weight (-C sum lam) / beta.
    """
    if not net.units:
        return net
    base = net.units[0].kind.unshifted()
    C = base.limit_neg
    big_c = -C * float(net.L.sum())
    beta = float(base(beta_bias))
    if abs(beta) < floor:
        raise SynthesisError("near-constant unit value below the numeric floor")
    plain = tuple(replace(u, kind=u.kind.unshifted()) for u in net.units)
    const = Unit(np.full(net.n, 1e-9), beta_bias, big_c / beta, base)
    return replace(net, units=plain + (const,))


def add_negative_unit(
    net: TwoLayerNet,
    knot: float,
    lambda_free: float,
    knots: KnotSet1D | Sequence[float] | None = None,
    m: int = 3,
    slope: float | None = None,
    level: float | None = None,
    target: Spline1D | None = None,
    method: str = "grid",
    eps: float = 1e-3,
) -> TwoLayerNet:
    """Append a unit with w < 0 whose zero part lies right of ``knot``.

    Its output weight is pinned to ``lambda_free`` and the other weights are
    re-solved so the output function is preserved: by dense least squares
    against the current output (``method="grid"``) or through the spline
    matrix against ``target`` (``method="matrix"``).
    """
    ks = None
    if knots is not None:
        ks = knots.knots if isinstance(knots, KnotSet1D) else np.asarray(knots, dtype=float)
        if not np.any(np.isclose(ks, knot)):
            raise SynthesisError("negative units must sit on an existing knot")
    kind = net.units[0].kind
    if slope is None:
        # softer than the positive local units: the others must absorb it left of the knot
        edges = np.concatenate([[0.0], ks, [1.0]]) if knots is not None else np.array([0.0, 0.2])
        slope = 1.0 / float(np.diff(edges).min())
    level = 0.2 * float(kind(0.0)) if level is None else level
    b = kind.inverse(level) + slope * knot
    neg = Unit([-slope], b, lambda_free, kind)
    new = net.append(neg)
    if method == "grid":
        base = net
        target_fn = lambda x: net(x) - lambda_free * np.asarray(neg.activation(x))
        lam = refit_lambdas(base, target_fn)
        return new.with_lambdas(np.append(lam, lambda_free))
    if method == "matrix":
        if target is None or knots is None:
            raise SynthesisError("matrix re-solve needs the knots and the target spline")
        M = spline_matrix(new, knots, m, eps=eps)
        lam = solve_spline_matrix(M, target, fixed={new.theta - 1: lambda_free})
        return new.with_lambdas(lam)
    raise SynthesisError(f"unknown re-solve method {method!r}")


def truncation_error(net: TwoLayerNet, local: dict[int, float], samples: int = 4001) -> tuple[float, float]:
    """Largest single-unit zero-part L2 and the L2 change from truncating all at once.

    ``local`` maps unit index to its zero-error point.
    """
    x = np.linspace(0.0, 1.0, samples)
    act = net.activations(x) * net.L
    total = np.zeros_like(x)
    worst = 0.0
    for i, z in local.items():
        side = x <= z if net.units[i].w[0] > 0 else x >= z
        part = np.where(side, act[:, i], 0.0)
        worst = max(worst, float(np.sqrt(np.mean(part**2))))
        total += part
    return worst, float(np.sqrt(np.mean(total**2)))
