"""Executable checks of the convergence theory on recorded traces.

* ``audit_monotone``: the chain ``0 <= x_k < z_k < y_k < x_{k+1} <= x*``
  and ``f(x_k) < 0`` along a two-step modified Newton trace from ``x_0 = 0``.
* ``kantorovich_check`` / ``quadratic_bound_check``: the smallness criterion
  ``c(1 + alpha) <= 1/3`` and the a-posteriori bound
  ``||x* - x_k|| < 1.32 c(1 + alpha) ||x_k - x_{k-1}||^2``.
* ``estimate_order``: observed convergence order from an error sequence.
* ``singular_diagnostics``: null/range splitting of the errors at a singular
  root (``alpha = 0``, ``c = 1``).

Floating-point comparisons use an explicit slack; strict inequalities of the
exact-arithmetic theory cannot be resolved once iterates agree to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Optional

import numpy as np

from .linalg import min_singular_direction
from .problem import NareProblem, ProblemParams, eval_f, eval_jacobian
from .solvers import SolverConfig, IterateTrace, tsmnm_solve

EPS = 2.0 ** -52
BOUND_CONSTANT = 1.32
KANTOROVICH_LIMIT = 1.0 / 3.0
USABLE_FACTOR = 1e2  # errors below USABLE_FACTOR * eps * ||x*|| are rounding noise


class AnalysisError(ValueError):
    pass


class NotSingularError(AnalysisError):
    """The Jacobian at the reference point is not numerically singular."""

    def __init__(self, sigma_min, threshold):
        super().__init__(f"Jacobian at the solution is nonsingular: sigma_min={sigma_min:.3e} > {threshold:.1e}")
        self.sigma_min = sigma_min
        self.threshold = threshold


@dataclass(frozen=True)
class Violation:
    iteration: int
    component: int
    relation: str


def _as_trace(trace):
    if isinstance(trace, IterateTrace):
        return trace
    return IterateTrace(xs=list(trace))


def audit_monotone(trace, x_ref, slack: float = 1e-12, problem: Optional[NareProblem] = None):
    """List every breach of the monotone chain in a TSMNM trace.

    Each inequality ``a < b`` is accepted when ``a < b + slack * ||x_ref||``.
    With ``problem`` given, ``f(x_k) < 0`` is also checked for every iterate
    but the last, beyond the rounding floor of evaluating ``f``.
    """
    trace = _as_trace(trace)
    x_ref = np.asarray(x_ref, dtype=float)
    tau = slack * float(np.max(np.abs(x_ref)))
    out = []

    def check(k, a, b, relation):
        for i in np.flatnonzero(~(a < b + tau)):
            out.append(Violation(k, int(i), relation))

    xs, ys, zs = trace.xs, trace.ys, trace.zs
    for k, x in enumerate(xs):
        check(k, np.zeros_like(x), x, "0 <= x_k")
        if k < len(ys) and k < len(zs) and k + 1 < len(xs):
            check(k, x, zs[k], "x_k < z_k")
            check(k, zs[k], ys[k], "z_k < y_k")
            check(k, ys[k], xs[k + 1], "y_k < x_{k+1}")
        if k >= 1:
            check(k, x, x_ref, "x_k <= x_ref")
    if problem is not None:
        for k, x in enumerate(xs[:-1]):
            fx = eval_f(problem, x)
            for i in np.flatnonzero(~(fx < _f_rounding_floor(problem, x))):
                out.append(Violation(k, int(i), "f(x_k) < 0"))
    return out


def _f_rounding_floor(problem, x):
    # standard a-priori bound for fl(u - u o (P v) - 1) with n-term dot products
    u, v = problem.split(x)
    gamma = (problem.n + 3) * EPS
    return gamma * np.concatenate([
        np.abs(u) + np.abs(u) * (problem.P @ np.abs(v)) + 1.0,
        np.abs(v) + np.abs(v) * (problem.Ptilde @ np.abs(u)) + 1.0,
    ])


@dataclass(frozen=True)
class KantorovichResult:
    satisfied: bool
    L: float
    r_lower: Optional[float]
    r_upper: Optional[float]


def kantorovich_check(params: ProblemParams, rtol: float = 4 * EPS) -> KantorovichResult:
    """Lipschitz constant ``L = c(1 + alpha)`` and the ball radii for ``x_0 = 0``.

    ``rtol`` absorbs the rounding in ``c * (1 + alpha)`` so that inputs which
    are exactly on the boundary in decimal (e.g. ``alpha=1/4, c=4/15``) count.
    """
    L = params.c * (1.0 + params.alpha)
    satisfied = L <= KANTOROVICH_LIMIT * (1.0 + rtol)
    disc = 1.0 - 2.0 * L
    if disc < 0.0:
        return KantorovichResult(satisfied, L, None, None)
    root = sqrt(disc)
    return KantorovichResult(satisfied, L, (1.0 - root) / L, (1.0 + root) / L)


def _floor(x_ref):
    return USABLE_FACTOR * EPS * float(np.max(np.abs(x_ref)))


def quadratic_bound_check(trace, x_ref, params: ProblemParams) -> float:
    """Worst ratio ``||x* - x_k|| / (1.32 L ||x_k - x_{k-1}||^2)`` over ``k >= 1``.

    Errors at rounding level contribute 0; a zero step with a resolvable
    error gives ``inf``.
    """
    xs = _as_trace(trace).xs
    if len(xs) < 2:
        raise AnalysisError("need at least two iterates")
    x_ref = np.asarray(x_ref, dtype=float)
    L = params.c * (1.0 + params.alpha)
    floor = _floor(x_ref)
    worst = 0.0
    for k in range(1, len(xs)):
        err = float(np.max(np.abs(x_ref - xs[k])))
        if err <= floor:
            continue
        step = float(np.max(np.abs(xs[k] - xs[k - 1])))
        bound = BOUND_CONSTANT * L * step * step
        worst = max(worst, err / bound if bound > 0.0 else np.inf)
    return worst


@dataclass
class OrderEstimate:
    errors: np.ndarray
    usable: np.ndarray  # indices k of errors used
    ratios: np.ndarray  # log(e_{k+1}) / log(e_k) over consecutive usable k
    order: float
    contraction: np.ndarray = field(default_factory=lambda: np.empty(0))  # e_{k+1} / e_k


def iterate_errors(trace, x_ref):
    x_ref = np.asarray(x_ref, dtype=float)
    return np.array([np.max(np.abs(x_ref - x)) for x in _as_trace(trace).xs])


def usable_indices(errors, x_ref):
    """Indices of the strictly decreasing run of errors above the rounding floor.

    The run stops at the first error that fails to decrease: past that point
    the sequence is dominated by the reference's own inaccuracy.
    """
    floor = _floor(x_ref)
    idx = []
    for k, e in enumerate(errors):
        if e <= floor or (idx and e >= errors[idx[-1]]):
            break
        idx.append(k)
    return np.array(idx, dtype=int)


def estimate_order(trace_or_errors, x_ref=None, min_points: int = 2) -> OrderEstimate:
    """Observed order from successive ratios ``log e_{k+1} / log e_k``.

    Only errors below 1 take part (the ratio is meaningless for ``e >= 1``).
    The fitted order is the median ratio over the last half of the usable run.
    """
    if x_ref is None:
        errors = np.asarray(trace_or_errors, dtype=float)
        x_ref = np.ones(1)
    else:
        errors = iterate_errors(trace_or_errors, x_ref)
    idx = usable_indices(errors, x_ref)
    idx = idx[errors[idx] < 1.0] if idx.size else idx
    if idx.size < min_points:
        raise AnalysisError(f"too few usable error values ({idx.size} < {min_points})")
    e = errors[idx]
    ratios = np.log(e[1:]) / np.log(e[:-1])
    tail = ratios[ratios.size // 2:]
    return OrderEstimate(errors=errors, usable=idx, ratios=ratios,
                         order=float(np.median(tail)), contraction=e[1:] / e[:-1])


def reference_solution(problem: NareProblem, trace=None, max_iter: int = 200):
    """Best available ``x*``: the converged TSMNM iterate, or, when the stopping
    rule cannot fire (singular root), the trace iterate of least ``||f||``."""
    if trace is None:
        report = tsmnm_solve(problem, SolverConfig("tsmnm", max_iter=max_iter, record_trace=True))
        if report.converged:
            return report.x
        trace = report.trace
    xs = _as_trace(trace).xs
    res = [np.max(np.abs(eval_f(problem, x))) for x in xs]
    return np.array(xs[int(np.argmin(res))])


@dataclass
class SingularDiagnostics:
    sigma_min: float
    null_vector: np.ndarray
    null_norms: np.ndarray  # ||P_N (x_k - x*)||_2
    range_norms: np.ndarray  # ||P_R (x_k - x*)||_2
    error_norms: np.ndarray  # ||x_k - x*||_2
    omega: float
    theta: float
    r: float
    in_K: np.ndarray
    in_W: np.ndarray

    def to_dict(self):
        return {
            "sigma_min": self.sigma_min,
            "omega": self.omega,
            "theta": self.theta,
            "r": None if np.isinf(self.r) else self.r,
            "iterates": [
                {"k": k, "null_norm": float(a), "range_norm": float(b), "error_norm": float(c),
                 "in_K": bool(ik), "in_W": bool(iw)}
                for k, (a, b, c, ik, iw) in enumerate(zip(self.null_norms, self.range_norms,
                                                          self.error_norms, self.in_K, self.in_W))
            ],
        }


def project_null(errors, null_vector):
    """Orthogonal split of error vectors (rows) along a unit null vector."""
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    coef = errors @ null_vector
    pn = coef[:, None] * null_vector[None, :]
    return pn, errors - pn


def classify(null_norms, range_norms, error_norms, omega=1.0, theta=0.5, r=np.inf):
    """Membership of each iterate in ``K(omega)`` and ``W(r, theta)``."""
    in_K = null_norms < omega * range_norms
    in_W = (error_norms < r) & (range_norms <= theta * null_norms)
    return in_K, in_W


def singular_diagnostics(problem: NareProblem, trace, x_ref, omega: float = 1.0, theta: float = 0.5,
                         r: float = np.inf, threshold: float = 1e-3) -> SingularDiagnostics:
    x_ref = np.asarray(x_ref, dtype=float)
    J = eval_jacobian(problem, x_ref).matrix()
    sigma, vec = min_singular_direction(J)
    if sigma > threshold:
        raise NotSingularError(sigma, threshold)
    E = np.array([x - x_ref for x in _as_trace(trace).xs])
    pn, pr = project_null(E, vec)
    nn = np.linalg.norm(pn, axis=1)
    rn = np.linalg.norm(pr, axis=1)
    en = np.linalg.norm(E, axis=1)
    in_K, in_W = classify(nn, rn, en, omega, theta, r)
    return SingularDiagnostics(sigma, vec, nn, rn, en, omega, theta, r, in_K, in_W)


def linear_rate_bound(theta: float, margin: float = 0.0) -> float:
    """``(1 + theta) / (2 (1 - theta)) * (1 + margin)`` (curvature term dropped)."""
    return (1.0 + theta) / (2.0 * (1.0 - theta)) * (1.0 + margin)
