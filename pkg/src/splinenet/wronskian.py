"""Generalized Wronskian matrices and weight-scaling schedules.

Rows are units, columns are derivative terms ordered by ``term_order``.
Entry (i, alpha) is act^(|alpha|)(w_i . x0 + b_i) * prod_j w_ij^alpha_j, i.e.
the mixed partial of unit i at x0.  Solving W^T lam = a, where a holds the
target's Taylor coefficients times alpha!, makes the network's Taylor
polynomial at x0 equal the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .activation import LOGISTIC, ActivationKind, oracle_for, peak_argument
from .polyspline import MultiIndex, Poly1D, PolyND, _poly_mul, term_list


class WronskianError(ValueError):
    pass


class IllConditionedError(WronskianError):
    """The matrix is numerically singular for the requested schedule."""


class ScheduleInfeasibleError(WronskianError):
    pass


@dataclass(frozen=True)
class TermOrder:
    n: int
    m: int
    terms: tuple[MultiIndex, ...] = ()

    def __post_init__(self) -> None:
        if not self.terms:
            object.__setattr__(self, "terms", tuple(term_list(self.n, self.m)))

    def __len__(self) -> int:
        return len(self.terms)

    def index(self, alpha: Sequence[int]) -> int:
        return self.terms.index(tuple(alpha))

    @staticmethod
    def precedes(a: MultiIndex, b: MultiIndex) -> bool:
        """True when a comes strictly before b."""
        if sum(a) != sum(b):
            return sum(a) < sum(b)
        return tuple(a) > tuple(b)


def term_order(n: int, m: int) -> TermOrder:
    if n < 1 or m < 0:
        raise WronskianError("need n >= 1 and m >= 0")
    return TermOrder(n, m)


@dataclass(frozen=True)
class ScalingSchedule:
    delta_t: float
    c_params: tuple[float, ...]
    weights: np.ndarray
    biases: np.ndarray
    arguments: np.ndarray
    x0: np.ndarray
    diagonal: tuple[MultiIndex, ...] = field(default=())

    @property
    def units(self) -> list[tuple[np.ndarray, float]]:
        return [(w, float(b)) for w, b in zip(self.weights, self.biases)]


def _peak(kind: ActivationKind, order: int) -> float:
    return peak_argument(kind, order)


def univariate_schedule(
    m: int,
    delta_t: float,
    c: float = 1.0,
    kind: ActivationKind = LOGISTIC,
    x0: float = 0.0,
) -> ScalingSchedule:
    """m+1 units: w_1 = dt^(1+c), w_j = dt^(1/(j-1)) for 2 <= j <= m, w_(m+1) = dt^-(m-1).

    Unit j sits at the argument where the (j-1)-th derivative of the
    activation peaks, so its diagonal entry is safely nonzero.
    """
    if not 0.0 < delta_t < 1.0:
        raise WronskianError("delta_t must lie in (0, 1)")
    if c <= 0.0:
        raise WronskianError("c must be positive")
    w = [delta_t ** (1.0 + c)]
    w += [delta_t ** (1.0 / (j - 1)) for j in range(2, m + 1)]
    if m >= 1:
        w.append(delta_t ** (-(m - 1.0)))
    w = np.array(w)
    y = np.array([_peak(kind, i) for i in range(m + 1)])
    b = y - w * x0
    return ScalingSchedule(
        delta_t, (c,), w[:, None], b, y, np.atleast_1d(float(x0)), tuple((i,) for i in range(m + 1))
    )


def _solve_exponents(alpha: MultiIndex, cap: int = 100) -> tuple[float, float]:
    """c_1 and a common c_j > c_1 for a multivariate diagonal term."""
    k = sum(alpha)
    nz = [a for a in alpha if a]
    k1 = nz[0]
    rhs = k1 / (k * (k + 1))
    c1, cj = 0.1, 0.2
    for _ in range(cap):
        cj = (rhs - c1 * k1 / (k + 1)) * k / (k - k1)
        if cj > c1 > 0.0:
            return c1, cj
        c1 /= 2.0
    raise ScheduleInfeasibleError(f"no feasible exponents for row {alpha}")


def multivariate_schedule(
    n: int,
    m: int,
    delta_t: float,
    kind: ActivationKind = LOGISTIC,
    x0: Sequence[float] | None = None,
    c: float = 1.0,
) -> ScalingSchedule:
    """One weight vector per term of the ordering.

    Single-variable rows x_mu^k use w_mu = dt^(1/k); mixed rows put
    dt^((1+c_1)/(k+1)) on their leading variable and dt^((1+c_j)/k) on the
    others, with c_j > c_1 > 0 chosen so the diagonal product is dt.  The
    first row is all dt^(1+c) and the last row puts dt^-(tau-2) on its
    variable.  Variables absent from a row's diagonal term get dt^(m+1+c) so
    they only contribute o(dt) entries.
    """
    if n < 2 or m < 0:
        raise WronskianError("multivariate schedule needs n >= 2 and m >= 0")
    if not 0.0 < delta_t < 1.0:
        raise WronskianError("delta_t must lie in (0, 1)")
    order = term_order(n, m)
    tau = len(order)
    tiny = delta_t ** (m + 1.0 + c)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    weights = np.full((tau, n), tiny)
    cs: list[float] = []
    for r, alpha in enumerate(order.terms):
        k = sum(alpha)
        nz = [j for j, a in enumerate(alpha) if a]
        if r == 0:
            weights[r, :] = delta_t ** (1.0 + c)
        elif r == tau - 1:
            weights[r, nz[0]] = delta_t ** (-(tau - 2.0))
        elif len(nz) == 1:
            weights[r, nz[0]] = delta_t ** (1.0 / k)
        else:
            c1, cj = _solve_exponents(alpha)
            cs.extend([c1, cj])
            weights[r, nz[0]] = delta_t ** ((1.0 + c1) / (k + 1))
            for j in nz[1:]:
                weights[r, j] = delta_t ** ((1.0 + cj) / k)
    y = np.array([_peak(kind, sum(a)) for a in order.terms])
    b = y - weights @ x0
    return ScalingSchedule(delta_t, tuple([c] + cs), weights, b, y, x0, order.terms)


@dataclass(frozen=True)
class WronskianMatrix:
    entries: np.ndarray
    units: tuple[tuple[np.ndarray, float], ...]
    x0: np.ndarray
    m: int
    kind: ActivationKind
    order: TermOrder


def assemble(
    units: Sequence[tuple[Sequence[float] | float, float]],
    x0: Sequence[float] | float,
    m: int,
    kind: ActivationKind = LOGISTIC,
) -> WronskianMatrix:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = len(x0)
    order = term_order(n, m)
    W = np.array([np.atleast_1d(np.asarray(w, dtype=float)) for w, _ in units])
    b = np.array([float(bb) for _, bb in units])
    if W.shape[1] != n:
        raise WronskianError("unit weight dimension differs from x0")
    if len(units) < len(order):
        raise WronskianError(f"need at least {len(order)} units for degree {m} in {n} variables")
    y = W @ x0 + b
    oracle = oracle_for(kind, max(m, 1))
    ders = np.column_stack([np.asarray(oracle.derivative(k, y), dtype=float) for k in range(m + 1)])
    E = np.empty((len(units), len(order)))
    for col, alpha in enumerate(order.terms):
        E[:, col] = ders[:, sum(alpha)] * np.prod(W ** np.asarray(alpha)[None, :], axis=1)
    units_t = tuple((W[i].copy(), float(b[i])) for i in range(len(units)))
    return WronskianMatrix(E, units_t, x0, m, kind, order)


def _shift_nd(p: PolyND, x0: np.ndarray) -> dict[MultiIndex, float]:
    """Coefficients of p in powers of (x - x0)."""
    n = p.n
    out: dict[MultiIndex, float] = {}
    for e, c in p.coeffs.items():
        term: dict[MultiIndex, float] = {tuple([0] * n): c}
        for j, pw in enumerate(e):
            unit = [0] * n
            unit[j] = 1
            lin = {tuple([0] * n): float(x0[j]), tuple(unit): 1.0}
            for _ in range(pw):
                term = _poly_mul(term, lin)
        for ee, cc in term.items():
            out[ee] = out.get(ee, 0.0) + cc
    return out


def taylor_vector(target: Poly1D | PolyND, x0: Sequence[float] | float, m: int) -> np.ndarray:
    """a_alpha = alpha! * (coefficient of (x - x0)^alpha), in term order."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    order = term_order(len(x0), m)
    if isinstance(target, Poly1D):
        if target.degree > m and np.any(target.coeffs[m + 1 :] != 0):
            raise WronskianError("target degree exceeds m")
        t = target.taylor_at(float(x0[0]))
        t = np.pad(t, (0, m + 1))[: m + 1]
        return np.array([math.factorial(k) * t[k] for k in range(m + 1)])
    if target.m > m and any(sum(e) > m and c != 0 for e, c in target.coeffs.items()):
        raise WronskianError("target degree exceeds m")
    shifted = _shift_nd(target, x0)
    return np.array(
        [shifted.get(a, 0.0) * float(np.prod([math.factorial(i) for i in a])) for a in order.terms]
    )


@dataclass(frozen=True)
class Diagnostics:
    delta_t: float
    cond_estimate: float
    residual: float
    max_abs_lambda: float

    def to_json(self) -> dict:
        return {
            "delta_t": float(self.delta_t),
            "cond_estimate": float(self.cond_estimate),
            "residual": float(self.residual),
            "max_abs_lambda": float(self.max_abs_lambda),
        }


def solve_wronskian(W: WronskianMatrix, a: np.ndarray, delta_t: float = float("nan"), cond_cap: float = 1e12) -> tuple[np.ndarray, Diagnostics]:
    A = W.entries.T
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > cond_cap:
        raise IllConditionedError(f"Wronskian condition {cond:.3g} exceeds cap {cond_cap:.1g}; try a larger delta_t")
    if A.shape[0] == A.shape[1]:
        lam = np.linalg.solve(A, a)
    else:
        lam = np.linalg.lstsq(A, a, rcond=None)[0]
    res = float(np.linalg.norm(A @ lam - a))
    return lam, Diagnostics(delta_t, cond, res, float(np.abs(lam).max()))


def realize_polynomial(
    target: Poly1D | PolyND,
    x0: Sequence[float] | float,
    schedule: ScalingSchedule,
    kind: ActivationKind = LOGISTIC,
    cond_cap: float = 1e12,
) -> tuple[np.ndarray, Diagnostics]:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    m = max(sum(t) for t in schedule.diagonal) if schedule.diagonal else 0
    W = assemble(schedule.units, x0, m, kind)
    return solve_wronskian(W, taylor_vector(target, x0, m), schedule.delta_t, cond_cap)


def network_output(units: Sequence[tuple[np.ndarray, float]], lam: np.ndarray, kind: ActivationKind, x: np.ndarray) -> np.ndarray:
    """sum_i lam_i act(w_i . x + b_i) for points x of shape (N, n)."""
    W = np.array([np.atleast_1d(w) for w, _ in units])
    b = np.array([bb for _, bb in units])
    return kind(np.atleast_2d(x) @ W.T + b) @ lam


def neighbourhood(x0: Sequence[float] | float, radius: float, count: int = 401) -> np.ndarray:
    """Sample points of the closed ball of given radius around x0."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = len(x0)
    if n == 1:
        return (x0[0] + np.linspace(-radius, radius, count))[:, None]
    rng = np.random.default_rng(0)
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    shell = radius * d[: min(count, 64)]
    return np.vstack([x0[None, :], x0 + d * r, x0 + shell])


def default_deltas() -> np.ndarray:
    return np.geomspace(0.9, 1e-3, 45)


@dataclass(frozen=True)
class Realization:
    schedule: ScalingSchedule
    lam: np.ndarray
    diagnostics: Diagnostics
    max_error: float


def best_realization(
    target: Poly1D | PolyND,
    x0: Sequence[float] | float,
    m: int,
    kind: ActivationKind = LOGISTIC,
    radius: float = 0.02,
    deltas: Sequence[float] | None = None,
    c: float = 1.0,
    cond_cap: float = 1e12,
    residual_tol: float = 1e-8,
) -> Realization:
    """Sweep delta_t and keep the candidate with the smallest error near x0.

    Candidates whose matrix is too ill-conditioned or whose relative residual
    fails are skipped.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = len(x0)
    pts = neighbourhood(x0, radius)
    ref = np.asarray(target(pts[:, 0] if n == 1 else pts), dtype=float)
    best: Realization | None = None
    last_err: Exception | None = None
    for dt in default_deltas() if deltas is None else deltas:
        try:
            sch = univariate_schedule(m, dt, c, kind, float(x0[0])) if n == 1 else multivariate_schedule(n, m, dt, kind, x0, c)
            lam, diag = realize_polynomial(target, x0, sch, kind, cond_cap)
        except WronskianError as exc:
            last_err = exc
            continue
        a = taylor_vector(target, x0, m)
        if diag.residual > residual_tol * max(1.0, float(np.abs(a).max())):
            continue
        err = float(np.abs(network_output(sch.units, lam, kind, pts) - ref).max())
        if best is None or err < best.max_error:
            best = Realization(sch, lam, diag, err)
    if best is None:
        raise IllConditionedError(f"no delta_t candidate was usable ({last_err})")
    return best


def remainder_bound(
    units: Sequence[tuple[np.ndarray, float]],
    lam: np.ndarray,
    x0: float,
    radius: float,
    m: int,
    kind: ActivationKind = LOGISTIC,
) -> float:
    """Estimate of sum_i |lam_i| * ||r_i||_2 on [x0 - radius, x0 + radius].

    r_i is the degree-m Taylor remainder of unit i, bounded through the
    sampled supremum of its (m+1)-th derivative.
    """
    oracle = oracle_for(kind, m + 1)
    xs = np.linspace(x0 - radius, x0 + radius, 2001)
    # int_{-r}^{r} |t|^(2m+2) dt = 2 r^(2m+3) / (2m+3)
    l2_power = math.sqrt(2.0 * radius ** (2 * m + 3) / (2 * m + 3))
    total = 0.0
    for (w, b), l in zip(units, lam):
        w = float(np.atleast_1d(w)[0])
        sup = float(np.abs(oracle.derivative(m + 1, w * xs + b)).max()) * abs(w) ** (m + 1)
        total += abs(l) * sup / math.factorial(m + 1) * l2_power
    return total
