"""Composite 4-point Gauss-Legendre rule on [0, 1].

The transport model discretizes the angular variable with ``n/4`` equal
subintervals of [0, 1] and a 4-node Gauss-Legendre rule on each one.
Nodes are returned in strictly decreasing order (``w_1 > ... > w_n``).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

# Roots of P_4 are +-sqrt(3/7 -+ (2/7) sqrt(6/5)); weights are (18 +- sqrt(30))/36.
_INNER = sqrt(3.0 / 7.0 - 2.0 / 7.0 * sqrt(6.0 / 5.0))
_OUTER = sqrt(3.0 / 7.0 + 2.0 / 7.0 * sqrt(6.0 / 5.0))
_W_INNER = (18.0 + sqrt(30.0)) / 36.0
_W_OUTER = (18.0 - sqrt(30.0)) / 36.0


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size


def gauss_legendre_4():
    """Nodes and weights of the 4-point Gauss-Legendre rule on [-1, 1], ascending."""
    nodes = np.array([-_OUTER, -_INNER, _INNER, _OUTER])
    weights = np.array([_W_OUTER, _W_INNER, _W_INNER, _W_OUTER])
    return nodes, weights


def composite_rule(n: int) -> QuadratureRule:
    """Composite rule with ``n/4`` equal panels on [0, 1].

    Raises ValueError unless ``n`` is a positive multiple of 4.
    """
    if isinstance(n, bool) or int(n) != n or n < 4 or n % 4 != 0:
        raise ValueError(f"n must be a positive multiple of 4 (divisible by 4), got {n!r}")
    n = int(n)
    panels = n // 4
    g, w = gauss_legendre_4()
    h = 1.0 / panels
    left = np.arange(panels) * h
    nodes = (left[:, None] + 0.5 * h * (1.0 + g[None, :])).ravel()
    weights = np.tile(0.5 * h * w, panels)
    order = np.argsort(-nodes, kind="stable")
    nodes = nodes[order]
    weights = weights[order]
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(nodes=nodes, weights=weights)
