"""Newton-type and fixed-point solvers for the stacked system ``f(u, v) = 0``.

Every Newton-family method solves its linear systems through the same block
elimination: ``I - G1`` is diagonal, so the u-block is eliminated and an n x n
Schur complement ``I - G2 - H2 (I - G1)^{-1} H1`` is LU-factorized for v.
Linear systems are written for the new iterate, ``J w_new = J w - f(w)``,
rather than for a correction.
"""
from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .linalg import SingularMatrixError, norm_inf
from .problem import NareProblem, eval_f, eval_jacobian

EPS = 2.0 ** -52

METHODS = ("tsmnm", "nm", "tsnm1", "tsnm2", "nsm", "fpi")
NEWTON_MAX_ITER = 200
FPI_MAX_ITER = 200_000


class SolverError(RuntimeError):
    """Numerical breakdown of an iteration."""

    kind = "solver_error"

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class SingularStepError(SolverError):
    kind = "singular_step"


class DivergenceError(SolverError):
    kind = "divergence"


class DegenerateIterateError(SolverError, ValueError):
    kind = "degenerate_iterate"


def parse_method(spec: str):
    """Split a method id such as ``"nsm(3)"``, ``"nsm3"`` or ``"tsmnm"`` into ``(name, m)``."""
    s = spec.strip().lower()
    if s == "nsm":
        return "nsm", None
    mt = re.fullmatch(r"nsm\s*\(?\s*(\d+)\s*\)?", s)
    if mt:
        m = int(mt.group(1))
        if m < 1:
            raise ValueError("NSM order m must be >= 1")
        return "nsm", m
    if s in METHODS and s != "nsm":
        return s, None
    raise ValueError(f"unknown method {spec!r}; expected one of tsmnm, nm, tsnm1, tsnm2, nsm(m), fpi")


def method_label(name: str, m: Optional[int] = None) -> str:
    return f"nsm({m})" if name == "nsm" else name


def default_max_iter(name: str) -> int:
    env = os.environ.get("NARE_MAX_ITER")
    if env:
        return int(env)
    return FPI_MAX_ITER if name == "fpi" else NEWTON_MAX_ITER


@dataclass
class SolverConfig:
    method: str = "tsmnm"
    m: Optional[int] = None
    max_iter: Optional[int] = None
    x0: Optional[np.ndarray] = None
    record_trace: bool = False

    def __post_init__(self):
        name, m = parse_method(self.method)
        if name == "nsm":
            if m is not None and self.m is not None and m != self.m:
                raise ValueError(f"conflicting NSM orders {m} and {self.m}")
            self.m = m if m is not None else self.m
            if self.m is None or int(self.m) < 1:
                raise ValueError("NSM needs an order m >= 1, e.g. 'nsm(3)'")
            self.m = int(self.m)
        else:
            self.m = None
        self.method = name
        if self.max_iter is None:
            self.max_iter = default_max_iter(name)
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    @property
    def label(self) -> str:
        return method_label(self.method, self.m)


@dataclass
class IterateTrace:
    """Iterates ``x_k`` with the optional companions ``y_k``, ``z_k``.

    ``xs`` holds ``x_0 .. x_K``; ``ys[k]``/``zs[k]`` belong to step ``k``.
    """

    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    zs: list = field(default_factory=list)

    def __len__(self):
        return len(self.xs)


@dataclass
class SolverReport:
    method: str
    iterations: int
    res_history: list
    converged: bool
    elapsed: float
    u: np.ndarray
    v: np.ndarray
    trace: Optional[IterateTrace] = None

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    @property
    def res_final(self) -> float:
        return self.res_history[-1] if self.res_history else float("nan")


def res_criterion(u_next, u_prev, v_next, v_prev, n):
    """Relative infinity-norm change of both halves, stopped at ``n * 2**-52``."""
    nu, nv = norm_inf(u_next), norm_inf(v_next)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateIterateError("iterate has a zero block; relative change undefined")
    res = max(norm_inf(np.subtract(u_next, u_prev)) / nu,
              norm_inf(np.subtract(v_next, v_prev)) / nv)
    return res, bool(res <= n * EPS)


class NewtonSystem:
    """Factorized Jacobian ``f'(w)`` ready for repeated solves."""

    def __init__(self, problem: NareProblem, w, iteration=None):
        self.n = problem.n
        self.blocks = jb = eval_jacobian(problem, w)
        d = 1.0 - jb.g1
        if np.any(~np.isfinite(d)) or np.any(d <= 1e-300):
            raise SingularStepError(f"I - G1 has a non-positive diagonal at iteration {iteration}", iteration)
        self.dinv = 1.0 / d
        S = -(jb.H2 @ (self.dinv[:, None] * jb.H1))
        S[np.diag_indices_from(S)] += 1.0 - jb.g2
        try:
            self.fact = linalg.factorize(S)
        except SingularMatrixError as exc:
            raise SingularStepError(f"singular Schur complement at iteration {iteration}: {exc}", iteration) from exc

    def solve(self, ru, rv):
        """Solve ``f'(w) [a; b] = [ru; rv]``."""
        jb = self.blocks
        b = linalg.solve(self.fact, rv + jb.H2 @ (self.dinv * ru))
        a = self.dinv * (ru + jb.H1 @ b)
        return a, b

    def update(self, x, fx, sign=-1.0):
        """Return ``x + sign * f'(w)^{-1} f(x)``."""
        n = self.n
        rhs = self.blocks.matvec(x)
        if sign < 0:
            rhs -= fx
        else:
            rhs += fx
        a, b = self.solve(rhs[:n], rhs[n:])
        return np.concatenate([a, b])


def _check_finite(x, k):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite iterate at iteration {k}", k)


class _Run:
    """Shared bookkeeping: RES history, trace, stopping."""

    def __init__(self, problem, config):
        self.problem = problem
        self.n = problem.n
        self.config = config
        x0 = np.zeros(2 * self.n) if config.x0 is None else np.array(config.x0, dtype=float)
        if x0.shape != (2 * self.n,):
            raise ValueError(f"x0 must have shape ({2 * self.n},), got {x0.shape}")
        self.x = x0
        self.res = []
        self.trace = IterateTrace(xs=[x0.copy()]) if config.record_trace else None
        self.t0 = time.perf_counter()

    def accept(self, x_new, k, y=None, z=None):
        _check_finite(x_new, k + 1)
        n = self.n
        res, stop = res_criterion(x_new[:n], self.x[:n], x_new[n:], self.x[n:], n)
        self.res.append(res)
        if self.trace is not None:
            self.trace.xs.append(x_new.copy())
            if y is not None:
                self.trace.ys.append(y.copy())
            if z is not None:
                self.trace.zs.append(z.copy())
        self.x = x_new
        return stop

    def report(self, converged):
        n = self.n
        return SolverReport(
            method=self.config.label,
            iterations=len(self.res),
            res_history=self.res,
            converged=converged,
            elapsed=time.perf_counter() - self.t0,
            u=self.x[:n].copy(),
            v=self.x[n:].copy(),
            trace=self.trace,
        )


def tsmnm_solve(problem: NareProblem, config: Optional[SolverConfig] = None) -> SolverReport:
    """Two-step modified Newton method.

    ``y_k = x_k - f'(z_{k-1})^{-1} f(x_k)``, ``z_k = (x_k + y_k)/2``,
    ``x_{k+1} = x_k - f'(z_k)^{-1} f(x_k)``, with ``z_{-1} = x_0``.  The
    factorization at ``z_k`` serves ``x_{k+1}`` and then ``y_{k+1}``.
    """
    config = config or SolverConfig("tsmnm")
    run = _Run(problem, config)
    prev = NewtonSystem(problem, run.x, iteration=0)
    for k in range(config.max_iter):
        x = run.x
        fx = eval_f(problem, x)
        y = prev.update(x, fx)
        _check_finite(y, k)
        z = 0.5 * (x + y)
        cur = NewtonSystem(problem, z, iteration=k)
        if run.accept(cur.update(x, fx), k, y=y, z=z):
            return run.report(True)
        prev = cur
    return run.report(False)


def _chord_cycle(problem, system, x, m, k):
    w = x
    for _ in range(m):
        w = system.update(w, eval_f(problem, w))
        _check_finite(w, k)
    return w


def nsm_solve(problem: NareProblem, config: SolverConfig) -> SolverReport:
    """Newton-Shamanskii: one factorization, ``m`` chord substeps per iteration."""
    m = config.m if config.m is not None else 1
    if m < 1:
        raise ValueError("NSM order m must be >= 1")
    run = _Run(problem, config)
    for k in range(config.max_iter):
        system = NewtonSystem(problem, run.x, iteration=k)
        if run.accept(_chord_cycle(problem, system, run.x, m, k), k):
            return run.report(True)
    return run.report(False)


def newton_solve(problem: NareProblem, config: Optional[SolverConfig] = None) -> SolverReport:
    config = config or SolverConfig("nm")
    run = _Run(problem, config)
    for k in range(config.max_iter):
        system = NewtonSystem(problem, run.x, iteration=k)
        if run.accept(_chord_cycle(problem, system, run.x, 1, k), k):
            return run.report(True)
    return run.report(False)


def tsnm2_solve(problem: NareProblem, config: Optional[SolverConfig] = None) -> SolverReport:
    """Classical two-step Newton: two chord steps on ``f'(x_k)``."""
    config = config or SolverConfig("tsnm2")
    run = _Run(problem, config)
    for k in range(config.max_iter):
        x = run.x
        system = NewtonSystem(problem, x, iteration=k)
        y = system.update(x, eval_f(problem, x))
        _check_finite(y, k)
        if run.accept(system.update(y, eval_f(problem, y)), k, y=y):
            return run.report(True)
    return run.report(False)


def tsnm1_solve(problem: NareProblem, config: Optional[SolverConfig] = None) -> SolverReport:
    """Two-step Newton with the plus-sign predictor ``y_k = x_k + f'(x_k)^{-1} f(x_k)``."""
    config = config or SolverConfig("tsnm1")
    run = _Run(problem, config)
    for k in range(config.max_iter):
        x = run.x
        system = NewtonSystem(problem, x, iteration=k)
        y = system.update(x, eval_f(problem, x), sign=+1.0)
        _check_finite(y, k)
        if run.accept(system.update(y, eval_f(problem, y)), k, y=y):
            return run.report(True)
    return run.report(False)


def fpi_solve(problem: NareProblem, config: Optional[SolverConfig] = None) -> SolverReport:
    """Simultaneous fixed-point sweep ``u <- u o (P v) + e``, ``v <- v o (Pt u) + e``."""
    config = config or SolverConfig("fpi")
    run = _Run(problem, config)
    n = problem.n
    P, Pt = problem.P, problem.Ptilde
    for k in range(config.max_iter):
        u, v = run.x[:n], run.x[n:]
        with np.errstate(over="ignore", invalid="ignore"):  # caught by the finite check
            x_new = np.concatenate([u * (P @ v) + 1.0, v * (Pt @ u) + 1.0])
        if run.accept(x_new, k):
            return run.report(True)
    return run.report(False)


_DISPATCH = {
    "tsmnm": tsmnm_solve,
    "nm": newton_solve,
    "tsnm1": tsnm1_solve,
    "tsnm2": tsnm2_solve,
    "nsm": nsm_solve,
    "fpi": fpi_solve,
}


def solve(problem: NareProblem, config) -> SolverReport:
    """Run the method named by ``config`` (a SolverConfig or a method id string)."""
    if isinstance(config, str):
        config = SolverConfig(config)
    return _DISPATCH[config.method](problem, config)
