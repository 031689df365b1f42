"""Scalar backends and the small amount of exact linear algebra built on them.

Two backends exist.  The exact one stores numbers as :class:`fractions.Fraction`
inside numpy object arrays, so every sign decision is exact.  The float one
stores ``float64`` arrays and treats ``|x| <= tol`` as zero.  All geometry in the
package is written once against :class:`Backend` and runs on either.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np

from .errors import BackendMismatch, DimensionMismatch, Singular

__all__ = [
    "Backend",
    "RATIONAL",
    "f64",
    "parse_scalar",
    "format_scalar",
    "rref",
    "rank",
    "nullspace",
    "solve",
    "inverse",
    "primitive",
]


@dataclass(frozen=True)
class Backend:
    exact: bool = True
    tol: float = 1e-9

    @property
    def name(self) -> str:
        return "rational" if self.exact else "f64"

    def scalar(self, x):
        if self.exact:
            if isinstance(x, Fraction):
                return x
            if isinstance(x, str):
                return parse_scalar(x, self)
            if isinstance(x, (float, np.floating)):
                if not float(x).is_integer():
                    raise BackendMismatch(f"float {x!r} offered to the exact backend")
                return Fraction(int(x))
            return Fraction(x)
        if isinstance(x, str):
            return parse_scalar(x, self)
        return float(x)

    def array(self, data) -> np.ndarray:
        if isinstance(data, np.ndarray) and data.dtype != object and self.exact:
            if data.dtype.kind == "f":
                raise BackendMismatch("float array offered to the exact backend")
        a = np.array(data, dtype=object)
        if self.exact:
            flat = [self.scalar(x) for x in a.ravel()]
            out = np.empty(a.shape, dtype=object)
            out.ravel()[:] = flat if flat else []
            return out
        return np.array([self.scalar(x) for x in a.ravel()], dtype=float).reshape(a.shape)

    def zeros(self, shape) -> np.ndarray:
        if self.exact:
            out = np.empty(shape, dtype=object)
            out.fill(Fraction(0))
            return out
        return np.zeros(shape)

    def eye(self, n: int) -> np.ndarray:
        out = self.zeros((n, n))
        for i in range(n):
            out[i, i] = self.scalar(1)
        return out

    def is_zero(self, x) -> bool:
        return x == 0 if self.exact else abs(x) <= self.tol

    def sign(self, x) -> int:
        if self.exact:
            return (x > 0) - (x < 0)
        if abs(x) <= self.tol:
            return 0
        return 1 if x > 0 else -1

    def all_zero(self, a) -> bool:
        a = np.asarray(a)
        if self.exact:
            return all(x == 0 for x in a.ravel())
        return bool(np.all(np.abs(a) <= self.tol))

    def equal(self, a, b) -> bool:
        a, b = np.asarray(a), np.asarray(b)
        if a.shape != b.shape:
            return False
        return self.all_zero(a - b)

    def nonneg(self, a) -> bool:
        a = np.asarray(a)
        if self.exact:
            return all(x >= 0 for x in a.ravel())
        return bool(np.all(a >= -self.tol))

    def dot(self, a, b):
        return np.dot(a, b)

    def check(self, other: "Backend") -> None:
        if other.exact != self.exact:
            raise BackendMismatch(f"{self.name} vs {other.name}")


RATIONAL = Backend(True)


def f64(tol: float = 1e-9) -> Backend:
    return Backend(False, tol)


def parse_scalar(text: str, backend: Backend = RATIONAL):
    """Parse ``"p/q"``, ``"p"`` or a decimal literal."""
    text = text.strip()
    if backend.exact:
        return Fraction(text)
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def format_scalar(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _pivot_row(col, start, backend):
    if backend.exact:
        for i in range(start, len(col)):
            if col[i] != 0:
                return i
        return None
    mags = np.abs(col[start:].astype(float))
    if mags.size == 0:
        return None
    i = int(np.argmax(mags))
    return start + i if mags[i] > backend.tol else None


def rref(m, backend: Backend):
    """Reduced row echelon form; returns ``(R, pivot_columns)``."""
    a = np.array(m, dtype=object if backend.exact else float, copy=True)
    if a.ndim != 2:
        raise DimensionMismatch("rref needs a matrix")
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = _pivot_row(a[:, c], r, backend)
        if p is None:
            if not backend.exact:
                a[r:, c] = 0.0
            continue
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = a[r] / a[r, c]
        for i in range(rows):
            if i != r and not (a[i, c] == 0):
                a[i] = a[i] - a[i, c] * a[r]
        if not backend.exact:
            a[:, c] = 0.0
            a[r, c] = 1.0
        pivots.append(c)
        r += 1
    return a, pivots


_PRIME = 2147483629  # largest prime below 2**31, so products fit in int64


def _rank_mod_p(m) -> int:
    """Rank of an exact rational matrix reduced modulo a prime.

    Rows are first cleared of denominators.  The result never exceeds the
    rational rank, so a full modular rank proves full rational rank.
    """
    rows = []
    for r in m:
        den = reduce(lambda x, y: x * y // math.gcd(x, y), (x.denominator for x in r), 1)
        rows.append([(x.numerator * (den // x.denominator)) % _PRIME for x in r])
    a = np.array(rows, dtype=np.int64).reshape(m.shape)
    r = 0
    for c in range(a.shape[1]):
        if r == a.shape[0]:
            break
        nz = np.flatnonzero(a[r:, c])
        if len(nz) == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        inv = pow(int(a[r, c]), _PRIME - 2, _PRIME)
        a[r] = (a[r] * inv) % _PRIME
        below = a[r + 1 :, c].copy()
        a[r + 1 :] = (a[r + 1 :] - np.outer(below, a[r]) % _PRIME) % _PRIME
        r += 1
    return r


def rank(m, backend: Backend) -> int:
    m = np.asarray(m)
    if m.size == 0:
        return 0
    if backend.exact and m.ndim == 2:
        r = _rank_mod_p(m)
        if r == min(m.shape):
            return r
    return len(rref(m, backend)[1])


def nullspace(m, backend: Backend) -> np.ndarray:
    """Basis of the right null space, one vector per row."""
    m = np.asarray(m)
    cols = m.shape[1]
    r, pivots = rref(m, backend)
    free = [c for c in range(cols) if c not in pivots]
    basis = backend.zeros((len(free), cols))
    for k, f in enumerate(free):
        basis[k, f] = backend.scalar(1)
        for i, p in enumerate(pivots):
            basis[k, p] = -r[i, f]
    return basis


def solve(a, b, backend: Backend):
    """One solution ``x`` of ``a @ x = b`` (free variables set to zero), or None."""
    a = np.asarray(a)
    b = np.asarray(b)
    vec = b.ndim == 1
    bb = b.reshape(-1, 1) if vec else b
    n = a.shape[1]
    aug = np.concatenate([a, bb], axis=1)
    r, pivots = rref(aug, backend)
    if any(p >= n for p in pivots):
        return None
    x = backend.zeros((n, bb.shape[1]))
    for i, p in enumerate(pivots):
        x[p] = r[i, n:]
    return x[:, 0] if vec else x


def inverse(a, backend: Backend) -> np.ndarray:
    a = np.asarray(a)
    n, m = a.shape
    if n != m:
        raise DimensionMismatch("inverse of a non-square matrix")
    r, pivots = rref(np.concatenate([a, backend.eye(n)], axis=1), backend)
    if [p for p in pivots if p < n] != list(range(n)):
        raise Singular("matrix is singular")
    return r[:, n:]


def primitive(v, backend: Backend) -> np.ndarray:
    """Canonical positive rescaling of a ray direction.

    Exact: the primitive integer vector on the ray.  Float: unit max-norm.
    """
    if backend.exact:
        den = reduce(lambda x, y: x * y // math.gcd(x, y), (x.denominator for x in v), 1)
        ints = [int(x * den) for x in v]
        g = reduce(math.gcd, ints, 0)
        if g == 0:
            return backend.array(ints)
        return backend.array([Fraction(x // g) for x in ints])
    v = np.asarray(v, dtype=float)
    s = np.max(np.abs(v))
    return v / s if s > 0 else v
