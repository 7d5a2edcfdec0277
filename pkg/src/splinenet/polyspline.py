"""Polynomials, truncated powers and smooth splines on [0, 1]^n.

A 1-D spline of degree m is stored as its first piece plus one truncated-power
coefficient per knot:

    s(x) = p_1(x) + sum_v alpha_v (x - x_v)_+^m

which is C^(m-1) by construction.  The n-D analogue over an axis-aligned grid
adds one coefficient per grid hyperplane x_axis = j/M.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .activation import fd_derivative

ScalarFunction = Callable[[np.ndarray | float], np.ndarray | float]
ScalarField = Callable[[np.ndarray], np.ndarray | float]
MultiIndex = tuple[int, ...]


class SplineError(ValueError):
    """Invalid knots, out-of-domain points, or smoothness violations."""


def truncated_power(x: np.ndarray | float, knot: float, m: int) -> np.ndarray | float:
    """(x - knot)_+^m; for m = 0 this is the indicator of x > knot."""
    t = np.asarray(x, dtype=float) - knot
    out = np.where(t > 0.0, np.maximum(t, 0.0) ** m, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Poly1D:
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x: np.ndarray | float) -> np.ndarray | float:
        return P.polyval(x, self.coeffs)

    def deriv(self, k: int = 1) -> "Poly1D":
        if k > self.degree:
            return Poly1D([0.0])
        return Poly1D(P.polyder(self.coeffs, k))

    def padded(self, m: int) -> np.ndarray:
        out = np.zeros(max(m + 1, len(self.coeffs)))
        out[: len(self.coeffs)] = self.coeffs
        return out

    def __add__(self, other: "Poly1D") -> "Poly1D":
        return Poly1D(P.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other: "Poly1D") -> "Poly1D":
        return Poly1D(P.polysub(self.coeffs, other.coeffs))

    def taylor_at(self, x0: float) -> np.ndarray:
        """Coefficients in powers of (x - x0)."""
        return np.array(
            [float(self.deriv(k)(x0)) / math.factorial(k) for k in range(self.degree + 1)]
        )

    @staticmethod
    def from_taylor(taylor: Sequence[float], x0: float) -> "Poly1D":
        acc = np.zeros(1)
        for k, t in enumerate(taylor):
            acc = P.polyadd(acc, t * P.polypow([-x0, 1.0], k))
        return Poly1D(acc)


def taylor_coefficients(
    f: ScalarFunction,
    x0: float,
    m: int,
    derivative: Callable[[int, float], float] | None = None,
) -> np.ndarray:
    """Coefficients a_k = f^(k)(x0)/k! for k = 0..m."""
    out = np.empty(m + 1)
    for k in range(m + 1):
        if derivative is not None:
            d = derivative(k, x0)
        else:
            d = fd_derivative(f, k, float(x0)) if k else f(float(x0))
        out[k] = float(d) / math.factorial(k)
    return out


@dataclass(frozen=True)
class KnotSet1D:
    knots: np.ndarray

    def __post_init__(self) -> None:
        k = np.atleast_1d(np.asarray(self.knots, dtype=float)).copy()
        if k.ndim != 1:
            raise SplineError("knots must be a flat sequence")
        if len(k) and (k[0] <= 0.0 or k[-1] >= 1.0):
            raise SplineError("knots must lie strictly inside (0, 1)")
        if np.any(np.diff(k) <= 0.0):
            raise SplineError("knots must be strictly increasing (zero spacing is not allowed)")
        k.setflags(write=False)
        object.__setattr__(self, "knots", k)

    @staticmethod
    def uniform(pieces: int) -> "KnotSet1D":
        return KnotSet1D(np.arange(1, pieces) / pieces)

    @property
    def zeta(self) -> int:
        return len(self.knots) + 1

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[0.0], self.knots, [1.0]])

    def interval_index(self, x: np.ndarray | float) -> np.ndarray:
        # I_1 = [0, x_1], I_j = (x_{j-1}, x_j]  ->  0-based index
        return np.searchsorted(self.knots, np.asarray(x, dtype=float), side="left")


def _check_domain(x: np.ndarray, n: int = 1, tol: float = 1e-12) -> None:
    if np.any(x < -tol) or np.any(x > 1 + tol) or not np.all(np.isfinite(x)):
        raise SplineError(f"point outside the domain [0, 1]^{n}")


@dataclass(frozen=True)
class Spline1D:
    knots: KnotSet1D
    first_piece: Poly1D
    alphas: np.ndarray
    m: int

    def __post_init__(self) -> None:
        if not isinstance(self.knots, KnotSet1D):
            object.__setattr__(self, "knots", KnotSet1D(self.knots))
        if not isinstance(self.first_piece, Poly1D):
            object.__setattr__(self, "first_piece", Poly1D(self.first_piece))
        a = np.atleast_1d(np.asarray(self.alphas, dtype=float)).copy()
        if len(a) != len(self.knots.knots):
            raise SplineError("need one recurrence coefficient per knot")
        if self.first_piece.degree > self.m:
            raise SplineError("first piece degree exceeds m")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    @property
    def zeta(self) -> int:
        return self.knots.zeta

    def __call__(self, x: np.ndarray | float) -> np.ndarray | float:
        xa = np.asarray(x, dtype=float)
        _check_domain(xa)
        out = np.asarray(self.first_piece(xa), dtype=float)
        for a, k in zip(self.alphas, self.knots.knots):
            out = out + a * truncated_power(xa, k, self.m)
        return float(out) if out.ndim == 0 else out

    def pieces(self) -> list[Poly1D]:
        out = [Poly1D(self.first_piece.padded(self.m))]
        for a, k in zip(self.alphas, self.knots.knots):
            out.append(out[-1] + Poly1D(a * P.polypow([-k, 1.0], self.m)))
        return out

    def eval_by_pieces(self, x: np.ndarray | float) -> np.ndarray:
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        idx = self.knots.interval_index(xa)
        out = np.empty_like(xa)
        for j, p in enumerate(self.pieces()):
            sel = idx == j
            out[sel] = p(xa[sel])
        return out

    def jumps(self) -> np.ndarray:
        """Derivative jumps of orders 0..m at each knot (rows = knots)."""
        ps = self.pieces()
        out = np.zeros((len(self.knots.knots), self.m + 1))
        for v, k in enumerate(self.knots.knots):
            for r in range(self.m + 1):
                out[v, r] = float(ps[v + 1].deriv(r)(k) - ps[v].deriv(r)(k))
        return out

    def to_json(self) -> dict:
        return {
            "m": int(self.m),
            "knots": [float(k) for k in self.knots.knots],
            "first_piece": [float(c) for c in self.first_piece.padded(self.m)],
            "alphas": [float(a) for a in self.alphas],
        }

    @staticmethod
    def from_json(doc: Mapping) -> "Spline1D":
        return Spline1D(KnotSet1D(doc["knots"]), Poly1D(doc["first_piece"]), doc["alphas"], int(doc["m"]))


def construct_spline_from_derivative(
    f: ScalarFunction,
    m: int,
    knots: KnotSet1D | Sequence[float],
    anchor: tuple[float, float] | None = None,
    derivative: Callable[[int, float], float] | None = None,
) -> Spline1D:
    """Spline whose (m-1)-th derivative is piecewise linear in f^(m-1).

    On each interval the slope of s^(m-1) is f^(m) at the interval midpoint.
    The first piece is the degree-m Taylor polynomial of f at the first
    midpoint, shifted so that it passes through ``anchor`` (default (0, f(0))).
    Later pieces follow from C^(m-1) continuity, so the whole spline is fixed
    by the first piece and the jumps of s^(m).
    """
    if m < 1:
        raise SplineError("m must be >= 1")
    if not isinstance(knots, KnotSet1D):
        knots = KnotSet1D(knots)
    edges = knots.edges
    mids = 0.5 * (edges[:-1] + edges[1:])

    def dm(x: float) -> float:
        if derivative is not None:
            return float(derivative(m, x))
        return float(fd_derivative(f, m, float(x)))

    slopes = np.array([dm(c) for c in mids])
    if not np.all(np.isfinite(slopes)):
        raise SplineError("derivative evaluation failed (non-finite value)")
    taylor = taylor_coefficients(f, mids[0], m, derivative)
    taylor[m] = slopes[0] / math.factorial(m)
    first = Poly1D.from_taylor(taylor, mids[0])
    ax, ay = anchor if anchor is not None else (0.0, float(f(0.0)))
    first = Poly1D(first.padded(m) + np.eye(m + 1)[0] * (ay - float(first(ax))))
    alphas = np.diff(slopes) / math.factorial(m)
    return Spline1D(knots, first, alphas, m)


def term_list(n: int, m: int) -> list[MultiIndex]:
    """Multi-indices of total degree <= m: ascending degree, then descending lexicographic."""
    out: list[MultiIndex] = []
    for k in range(m + 1):
        block = [a for a in itertools.product(range(k, -1, -1), repeat=n) if sum(a) == k]
        out.extend(sorted(block, reverse=True))
    return out


def _poly_mul(a: Mapping[MultiIndex, float], b: Mapping[MultiIndex, float]) -> dict[MultiIndex, float]:
    out: dict[MultiIndex, float] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(i + j for i, j in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return out


@dataclass(frozen=True)
class PolyND:
    n: int
    m: int
    coeffs: Mapping[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: dict[MultiIndex, float] = {}
        for e, c in self.coeffs.items():
            e = tuple(int(i) for i in e)
            if len(e) != self.n:
                raise SplineError("multi-index length differs from dimension")
            if sum(e) > self.m:
                raise SplineError(f"term {e} exceeds degree {self.m}")
            clean[e] = clean.get(e, 0.0) + float(c)
        if len(clean) > math.comb(self.n + self.m, self.m):
            raise SplineError("too many coefficients for the degree")
        # canonical order keeps evaluation independent of how the terms were gathered
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    def __call__(self, x: np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for e, c in self.coeffs.items():
            term = np.full(x.shape[:-1], c)
            for j, p in enumerate(e):
                if p:
                    term = term * x[..., j] ** p
            out = out + term
        return float(out) if out.ndim == 0 else out

    def coeff(self, e: Sequence[int]) -> float:
        return self.coeffs.get(tuple(e), 0.0)

    def dense(self) -> np.ndarray:
        return np.array([self.coeff(e) for e in term_list(self.n, self.m)])

    def __add__(self, other: "PolyND") -> "PolyND":
        c = dict(self.coeffs)
        for e, v in other.coeffs.items():
            c[e] = c.get(e, 0.0) + v
        return PolyND(self.n, max(self.m, other.m), c)

    def __sub__(self, other: "PolyND") -> "PolyND":
        return self + other.scaled(-1.0)

    def scaled(self, s: float) -> "PolyND":
        return PolyND(self.n, self.m, {e: s * c for e, c in self.coeffs.items()})

    def on_line(self, x0: Sequence[float], d: Sequence[float]) -> Poly1D:
        """Univariate polynomial t -> p(x0 + t d), exact by interpolation."""
        x0 = np.asarray(x0, dtype=float)
        d = np.asarray(d, dtype=float)
        t = np.cos(np.pi * (np.arange(self.m + 1) + 0.5) / (self.m + 1))
        vals = self(x0[None, :] + t[:, None] * d[None, :])
        return Poly1D(P.polyfit(t, np.atleast_1d(vals), self.m))

    @staticmethod
    def from_dense(n: int, m: int, vec: Sequence[float]) -> "PolyND":
        return PolyND(n, m, dict(zip(term_list(n, m), map(float, vec))))

    @staticmethod
    def affine_power(w: Sequence[float], b: float, m: int, scale: float = 1.0) -> "PolyND":
        """scale * (w.x + b)^m expanded into monomials."""
        n = len(w)
        base = {tuple([0] * n): float(b)}
        for j, wj in enumerate(w):
            e = [0] * n
            e[j] = 1
            base[tuple(e)] = float(wj)
        acc: dict[MultiIndex, float] = {tuple([0] * n): float(scale)}
        for _ in range(m):
            acc = _poly_mul(acc, base)
        return PolyND(n, m, acc)


def mixed_partial(f: ScalarField, x0: Sequence[float], alpha: MultiIndex, h: float | None = None) -> float:
    """Nested central finite differences for a mixed partial derivative."""
    x0 = np.asarray(x0, dtype=float)

    def nest(j: int, point: np.ndarray) -> float:
        if j == len(alpha):
            return float(f(point))
        if alpha[j] == 0:
            return nest(j + 1, point)

        def along(t: float) -> float:
            p = point.copy()
            p[j] = t
            return nest(j + 1, p)

        return float(fd_derivative(np.vectorize(along), alpha[j], float(point[j]), h, accuracy=6))

    return nest(0, x0)


def taylor_nd(f: ScalarField, x0: Sequence[float], m: int) -> PolyND:
    """Degree-m Taylor polynomial of a field, expanded into monomials."""
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    acc = PolyND(n, m, {})
    for alpha in term_list(n, m):
        d = mixed_partial(f, x0, alpha) / float(np.prod([math.factorial(a) for a in alpha]))
        term: dict[MultiIndex, float] = {tuple([0] * n): d}
        for j, a in enumerate(alpha):
            e = [0] * n
            e[j] = 1
            lin = {tuple([0] * n): -x0[j], tuple(e): 1.0}
            for _ in range(a):
                term = _poly_mul(term, lin)
        acc = acc + PolyND(n, m, term)
    return acc


@dataclass(frozen=True)
class Hyperplane:
    """Knot {x : w.x + b = 0}, normalised so that max |w_i| = 1."""

    w: np.ndarray
    b: float

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        s = np.abs(w).max() if w.size else 0.0
        if s == 0.0:
            raise SplineError("hyperplane normal must be nonzero")
        object.__setattr__(self, "w", w / s)
        object.__setattr__(self, "b", float(self.b) / s)

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.w + self.b

    def foot(self) -> np.ndarray:
        return -self.b * self.w / (self.w @ self.w)

    def tangents(self) -> np.ndarray:
        # orthonormal basis of the hyperplane directions
        q, _ = np.linalg.qr(np.column_stack([self.w, np.eye(len(self.w))]))
        return q[:, 1 : len(self.w)].T


def recurrence_jump(
    p1: Poly1D | PolyND,
    p2: Poly1D | PolyND,
    knot: float | Hyperplane,
    m: int,
    direction: Sequence[float] | None = None,
    tol: float = 1e-6,
) -> float:
    """Coefficient c with p2 = p1 + c (x - knot)_+^m (or (w.x + b)^m in n-D).

    Raises SplineError when a derivative jump of order below m exceeds ``tol``.
    In n-D the coefficient is read off along ``direction`` (default: the normal)
    at several points of the hyperplane; it does not depend on that choice.
    """
    if isinstance(p1, Poly1D):
        q = (p2 - p1).taylor_at(float(knot))
        q = np.pad(q, (0, max(0, m + 1 - len(q))))
        scale = max(1.0, np.abs(q).max())
        if np.any(np.abs(q[:m]) > tol * scale) or np.any(np.abs(q[m + 1 :]) > tol * scale):
            raise SplineError(f"pieces are not C^{m - 1}-compatible at knot {knot}")
        return float(q[m])
    if not isinstance(knot, Hyperplane):
        raise SplineError("n-D pieces need a Hyperplane knot")
    q = p2 - p1
    d = knot.w / np.linalg.norm(knot.w) if direction is None else np.asarray(direction, dtype=float)
    wd = float(knot.w @ d)
    if abs(wd) < 1e-12:
        raise SplineError("probing direction is parallel to the hyperplane")
    foot = knot.foot()
    probes = [foot] + [foot + 0.3 * t for t in knot.tangents()]
    lams = []
    for x0 in probes:
        line = Poly1D(np.pad(q.on_line(x0, d).coeffs, (0, m + 1)))
        c = line.coeffs
        scale = max(1.0, np.abs(c).max())
        if np.any(np.abs(c[:m]) > tol * scale) or np.any(np.abs(c[m + 1 :]) > tol * scale):
            raise SplineError("pieces are not C^(m-1)-compatible across the hyperplane")
        lams.append(c[m] / wd**m)
    lam = float(np.mean(lams))
    if max(abs(v - lam) for v in lams) > tol * max(1.0, abs(lam)):
        raise SplineError("difference of pieces is not a power of the hyperplane equation")
    return lam


def directional_derivative_surface(f: ScalarField, d: Sequence[float], k: int, x: Sequence[float]) -> float:
    """k-th derivative of t -> f(x + t d) at t = 0."""
    d = np.asarray(d, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise SplineError("direction must be nonzero")
    if abs(norm - 1.0) > 1e-12:
        warnings.warn("direction normalised to unit length", stacklevel=2)
        d = d / norm
    x = np.asarray(x, dtype=float)
    g = np.vectorize(lambda t: float(f(x + t * d)))
    return float(fd_derivative(g, k, 0.0))


def _axis_knots(grid: Sequence[Sequence[float] | int]) -> list[np.ndarray]:
    out = []
    for g in grid:
        if isinstance(g, (int, np.integer)):
            if g < 1:
                raise SplineError("grid needs at least one cell per axis")
            out.append(np.arange(1, int(g)) / int(g))
        else:
            out.append(KnotSet1D(g).knots.copy())
    return out


@dataclass(frozen=True)
class StandardPartitionSpline:
    n: int
    m: int
    grid: tuple[np.ndarray, ...]
    base_piece: PolyND
    axis_alphas: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        grid = tuple(_axis_knots(self.grid))
        alphas = tuple(np.asarray(a, dtype=float) for a in self.axis_alphas)
        if len(grid) != self.n or len(alphas) != self.n:
            raise SplineError("grid and axis_alphas need one entry per axis")
        if any(len(g) != len(a) for g, a in zip(grid, alphas)):
            raise SplineError("one recurrence coefficient per grid hyperplane")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "axis_alphas", alphas)

    @property
    def cells(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*[range(len(g) + 1) for g in self.grid]))

    @property
    def zeta(self) -> int:
        return int(np.prod([len(g) + 1 for g in self.grid]))

    def hyperplanes(self) -> list[tuple[int, int, Hyperplane]]:
        out = []
        for axis, g in enumerate(self.grid):
            for j, k in enumerate(g):
                w = np.zeros(self.n)
                w[axis] = 1.0
                out.append((axis, j, Hyperplane(w, -k)))
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        _check_domain(x, self.n)
        out = np.asarray(self.base_piece(x), dtype=float)
        for axis, (g, a) in enumerate(zip(self.grid, self.axis_alphas)):
            for k, al in zip(g, a):
                out = out + al * truncated_power(x[..., axis], k, self.m)
        return float(out) if out.ndim == 0 else out

    def piece(self, cell: Sequence[int]) -> PolyND:
        acc = PolyND(self.n, self.m, dict(self.base_piece.coeffs))
        for axis, idx in enumerate(cell):
            for j in range(idx):
                w = np.zeros(self.n)
                w[axis] = 1.0
                acc = acc + PolyND.affine_power(w, -self.grid[axis][j], self.m, self.axis_alphas[axis][j])
        return acc

    def cell_of(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.column_stack([np.searchsorted(g, x[:, a], side="left") for a, g in enumerate(self.grid)])

    def eval_by_pieces(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cells = self.cell_of(x)
        out = np.empty(len(x))
        for cell in self.cells:
            sel = np.all(cells == np.asarray(cell), axis=1)
            if sel.any():
                out[sel] = self.piece(cell)(x[sel])
        return out

    def to_json(self) -> dict:
        return {
            "m": int(self.m),
            "n": int(self.n),
            "grid": [[float(k) for k in g] for g in self.grid],
            "base_piece": [[list(e), float(c)] for e, c in sorted(self.base_piece.coeffs.items())],
            "axis_alphas": [[float(v) for v in a] for a in self.axis_alphas],
        }

    @staticmethod
    def from_json(doc: Mapping) -> "StandardPartitionSpline":
        n, m = int(doc["n"]), int(doc["m"])
        base = PolyND(n, m, {tuple(e): c for e, c in doc["base_piece"]})
        return StandardPartitionSpline(n, m, tuple(doc["grid"]), base, tuple(doc["axis_alphas"]))


def construct_spline_nd(
    f: ScalarField,
    m: int,
    grid: Sequence[Sequence[float] | int],
    d: Sequence[float] | None = None,
) -> StandardPartitionSpline:
    """Standard-partition spline built axis by axis.

    The base piece is the degree-m Taylor polynomial of f at the centre of the
    first cell.  Along each axis, the line through that centre is handed to the
    1-D construction, whose recurrence coefficients become the axis alphas.
    Only axis directions are supported for ``d``.
    """
    knots = _axis_knots(grid)
    n = len(knots)
    if n not in (1, 2, 3):
        raise SplineError("construct_spline_nd supports n in {1, 2, 3}")
    if d is not None:
        d = np.asarray(d, dtype=float)
        if np.count_nonzero(d) != 1:
            raise SplineError("only axis-aligned directions are supported on standard partitions")
    centre = np.array([0.5 * (np.concatenate([[0.0], g, [1.0]])[1]) for g in knots])
    base = taylor_nd(f, centre, m)
    alphas = []
    for axis, g in enumerate(knots):
        if len(g) == 0:
            alphas.append(np.zeros(0))
            continue

        def along(t, axis=axis):
            t = np.asarray(t, dtype=float)
            pts = np.broadcast_to(centre, t.shape + (n,)).copy()
            pts[..., axis] = t
            return f(pts)

        alphas.append(construct_spline_from_derivative(along, m, g).alphas.copy())
    return StandardPartitionSpline(n, m, tuple(knots), base, tuple(alphas))


def boundary_cells(grid: Sequence[Sequence[float]]) -> list[tuple[int, ...]]:
    """Cells touching the first cell along a single axis: (M-1)n + 1 of them."""
    n = len(grid)
    out = [tuple([0] * n)]
    for axis, g in enumerate(grid):
        for j in range(1, len(g) + 1):
            c = [0] * n
            c[axis] = j
            out.append(tuple(c))
    return out


def reconstruct_from_boundary(
    pieces: Mapping[tuple[int, ...], PolyND],
    grid: Sequence[Sequence[float]],
    m: int,
) -> dict[tuple[int, ...], PolyND]:
    """Rebuild every cell's piece from the boundary pieces alone.

    Adjacent boundary pieces give each hyperplane's coefficient; the interior
    pieces then follow from summing the crossed hyperplanes' contributions.
    """
    grid = [np.asarray(g, dtype=float) for g in grid]
    n = len(grid)
    origin = tuple([0] * n)
    alphas: list[list[float]] = []
    for axis, g in enumerate(grid):
        seq = []
        for j, k in enumerate(g):
            lo = [0] * n
            hi = [0] * n
            lo[axis], hi[axis] = j, j + 1
            w = np.zeros(n)
            w[axis] = 1.0
            seq.append(recurrence_jump(pieces[tuple(lo)], pieces[tuple(hi)], Hyperplane(w, -k), m))
        alphas.append(seq)
    s = StandardPartitionSpline(n, m, tuple(grid), pieces[origin], tuple(alphas))
    return {cell: s.piece(cell) for cell in s.cells}
