"""Assembly and evaluation of the transport-theory Riccati problem.

The minimal positive solution of ``XCX - XD - AX + B = 0`` has the form
``X = T o (u v^T)``, where ``(u, v)`` solves the 2n-dimensional quadratic
system

    u = u o (P v) + e,
    v = v o (Pt u) + e.

All evaluation routines work on the stacked state ``x = [u; v]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import QuadratureRule, composite_rule


@dataclass(frozen=True)
class ProblemParams:
    alpha: float
    c: float
    n: int

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha!r}")
        if not (0.0 < self.c <= 1.0):
            raise ValueError(f"c must lie in (0, 1], got {self.c!r}")
        n = self.n
        if isinstance(n, bool) or int(n) != n or n < 4 or n % 4 != 0:
            raise ValueError(f"n must be a positive multiple of 4 (divisible by 4), got {n!r}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "n", int(n))


@dataclass(frozen=True)
class NareProblem:
    params: ProblemParams
    rule: QuadratureRule
    delta: np.ndarray
    gamma: np.ndarray
    q: np.ndarray
    P: np.ndarray
    Ptilde: np.ndarray
    T: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.params.n

    def split(self, x):
        """View ``x`` as its ``(u, v)`` halves."""
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * self.n,):
            raise ValueError(f"state must have shape ({2 * self.n},), got {x.shape}")
        return x[: self.n], x[self.n:]


@dataclass(frozen=True)
class JacobianBlocks:
    """``f'(x) = I - [[diag(g1), H1], [H2, diag(g2)]]``."""

    g1: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    g2: np.ndarray

    def matrix(self) -> np.ndarray:
        n = self.g1.size
        J = np.empty((2 * n, 2 * n))
        J[:n, :n] = 0.0
        J[n:, n:] = 0.0
        J[:n, n:] = -self.H1
        J[n:, :n] = -self.H2
        idx = np.arange(n)
        J[idx, idx] = 1.0 - self.g1
        J[n + idx, n + idx] = 1.0 - self.g2
        return J

    def matvec(self, h):
        n = self.g1.size
        hu, hv = h[:n], h[n:]
        return np.concatenate([
            (1.0 - self.g1) * hu - self.H1 @ hv,
            (1.0 - self.g2) * hv - self.H2 @ hu,
        ])


def build_problem(params: ProblemParams) -> NareProblem:
    a, c, n = params.alpha, params.c, params.n
    rule = composite_rule(n)
    w = rule.nodes
    delta = 1.0 / (c * w * (1.0 + a))
    gamma = 1.0 / (c * w * (1.0 - a))
    q = rule.weights / (2.0 * w)
    T = 1.0 / (delta[:, None] + gamma[None, :])
    P = T * q[None, :]
    Ptilde = q[None, :] / (gamma[:, None] + delta[None, :])
    for arr in (delta, gamma, q, T, P, Ptilde):
        arr.flags.writeable = False
    return NareProblem(params, rule, delta, gamma, q, P, Ptilde, T)


def eval_f(problem: NareProblem, x) -> np.ndarray:
    u, v = problem.split(x)
    return np.concatenate([
        u - u * (problem.P @ v) - 1.0,
        v - v * (problem.Ptilde @ u) - 1.0,
    ])


def eval_jacobian(problem: NareProblem, x) -> JacobianBlocks:
    u, v = problem.split(x)
    return JacobianBlocks(
        g1=problem.P @ v,
        H1=u[:, None] * problem.P,
        H2=v[:, None] * problem.Ptilde,
        g2=problem.Ptilde @ u,
    )


def bilinear_f2(problem: NareProblem, h1, h2) -> np.ndarray:
    """Constant second derivative ``f''(.)[h1, h2]`` of the quadratic map."""
    a_u, a_v = problem.split(h1)
    b_u, b_v = problem.split(h2)
    P, Pt = problem.P, problem.Ptilde
    return np.concatenate([
        -(a_u * (P @ b_v) + b_u * (P @ a_v)),
        -(a_v * (Pt @ b_u) + b_v * (Pt @ a_u)),
    ])


def reconstruct_X(problem: NareProblem, u, v) -> np.ndarray:
    return problem.T * np.outer(u, v)


def build_abcd(problem: NareProblem):
    n = problem.n
    e = np.ones(n)
    q = problem.q
    A = np.diag(problem.delta) - np.outer(e, q)
    B = np.outer(e, e)
    C = np.outer(q, q)
    D = np.diag(problem.gamma) - np.outer(q, e)
    return A, B, C, D


def nare_residual(problem: NareProblem, X) -> float:
    """Scaled residual ``||XCX - XD - AX + B||_inf / ||B||_inf``."""
    A, B, C, D = build_abcd(problem)
    R = X @ C @ X - X @ D - A @ X + B
    return float(np.linalg.norm(R, np.inf) / np.linalg.norm(B, np.inf))
