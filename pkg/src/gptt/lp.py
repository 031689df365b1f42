"""Phase-one simplex for conic feasibility, with Farkas certificates.

Solves ``G @ lam = v, lam >= 0`` for a ``d x m`` matrix ``G``.  Pivoting uses
Bland's rule, so the method terminates on degenerate input.  On the exact
backend the arithmetic is exact and both outcomes come with a certificate that
re-verifies by substitution:

* feasible: the coefficient vector ``lam``;
* infeasible: ``h`` with ``h @ G >= 0`` and ``h @ v < 0``.

The float backend runs the same pivots with ``tol`` as the zero test.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionMismatch
from .scalar import Backend

__all__ = ["FeasibilityResult", "conic_feasibility"]


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    coefficients: np.ndarray | None = None
    farkas: np.ndarray | None = None


def _row_op(target, factor, source, nz):
    for j in nz:
        target[j] -= factor * source[j]


def conic_feasibility(G, v, backend: Backend) -> FeasibilityResult:
    G = np.asarray(G)
    v = np.asarray(v)
    d, m = G.shape
    if v.shape != (d,):
        raise DimensionMismatch(f"vector of length {v.shape} against {d} rows")
    exact = backend.exact
    tol = backend.tol
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0

    def pos(x):
        return x > 0 if exact else x > tol

    def neg(x):
        return x < 0 if exact else x < -tol

    def nonzero(x):
        return x != 0 if exact else abs(x) > tol

    signs = [(-1 if neg(v[i]) else 1) for i in range(d)]
    width = m + d
    # tableau rows: [G | I | rhs], with row signs making rhs >= 0
    tab = []
    for i in range(d):
        s = signs[i]
        row = [s * G[i, j] for j in range(m)] + [zero] * d + [s * v[i]]
        row[m + i] = one
        tab.append(row)
    basis = [m + i for i in range(d)]
    # phase-one reduced costs: c_j - c_B B^-1 A_j
    cost = [zero] * (width + 1)
    for i in range(d):
        for j in range(m):
            cost[j] -= tab[i][j]
        cost[width] -= tab[i][width]

    while True:
        enter = next((j for j in range(m) if neg(cost[j])), None)
        if enter is None:
            break
        best = None
        for i in range(d):
            a = tab[i][enter]
            if pos(a):
                ratio = tab[i][width] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            # cannot happen in phase one: the objective is bounded below by 0
            break
        r = best[1]
        prow = tab[r]
        piv = prow[enter]
        prow[:] = [x / piv for x in prow]
        nz = [j for j in range(width + 1) if nonzero(prow[j])]
        for i in range(d):
            if i != r and nonzero(tab[i][enter]):
                _row_op(tab[i], tab[i][enter], prow, nz)
        if nonzero(cost[enter]):
            _row_op(cost, cost[enter], prow, nz)
        if not exact:
            for i in range(d):
                tab[i][enter] = zero
            prow[enter] = one
            cost[enter] = zero
        basis[r] = enter

    infeas = -cost[width]
    if pos(infeas):
        # y_k = 1 - reduced cost of artificial k; h = -S y
        y = [one - cost[m + k] for k in range(d)]
        h = np.array([-signs[k] * y[k] for k in range(d)], dtype=object if exact else float)
        return FeasibilityResult(False, farkas=h)
    lam = [zero] * m
    for i, b in enumerate(basis):
        if b < m:
            lam[b] = tab[i][width]
    coeffs = np.array(lam, dtype=object if exact else float)
    if not exact:
        coeffs = np.where(coeffs < 0, 0.0, coeffs)
    return FeasibilityResult(True, coefficients=coeffs)
