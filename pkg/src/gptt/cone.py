"""Polyhedral cones: duality, membership certificates, extreme rays, order isomorphisms.

A :class:`Cone` may be known by its generators (V-representation), by the
generators of its dual cone (H-representation: ``h @ x >= 0`` for every facet
functional ``h``), or both.  Whichever side is missing is computed on demand by
the double description method and cached.  Pairing between a space and its
dual is the plain dot product on shared coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import Degenerate, DimensionMismatch, NonGenerating, Singular
from .lp import conic_feasibility
from .scalar import RATIONAL, Backend, inverse, primitive, rank, rref, solve

__all__ = [
    "Cone",
    "ConeMap",
    "Inside",
    "Outside",
    "dual_cone",
    "member",
    "minimal_generators",
    "is_order_iso",
    "extreme_rays",
    "cone_of",
]


@dataclass(frozen=True, eq=False)
class Inside:
    """Membership certificate.

    ``coefficients`` expresses the vector over the cone's generators.  When the
    cone is only known through its facets, ``slacks`` holds the (nonnegative)
    facet values instead.
    """

    coefficients: np.ndarray | None = None
    slacks: np.ndarray | None = None

    inside = True

    def __bool__(self):
        return True

    def verify(self, cone: "Cone", v) -> bool:
        b = cone.backend
        v = np.asarray(v)
        if self.coefficients is not None:
            return b.nonneg(self.coefficients) and b.equal(self.coefficients @ cone.generators, v)
        return b.nonneg(cone.facets @ v)


@dataclass(frozen=True, eq=False)
class Outside:
    """Separating functional: ``functional @ v < 0`` and nonnegative on the cone."""

    functional: np.ndarray

    inside = False

    def __bool__(self):
        return False

    def verify(self, cone: "Cone", v) -> bool:
        b = cone.backend
        if b.sign(self.functional @ np.asarray(v)) >= 0:
            return False
        return cone.dual_contains(self.functional)


def _as_rows(data, backend: Backend, dim=None) -> np.ndarray:
    if isinstance(data, np.ndarray) and data.ndim == 2 and (data.dtype == object) == backend.exact:
        a = data
    else:
        a = backend.array(data)
    if a.ndim == 1:
        a = a.reshape(1, -1) if a.size else a.reshape(0, dim or 0)
    if dim is not None and a.shape[1] != dim:
        raise DimensionMismatch(f"expected rows of length {dim}, got {a.shape[1]}")
    return a


def _sort_rows(rows: np.ndarray) -> np.ndarray:
    if len(rows) == 0:
        return rows
    order = sorted(range(len(rows)), key=lambda i: tuple(rows[i]), reverse=True)
    return rows[order]


class Cone:
    """Closed, pointed, generating polyhedral cone in ``R^dim``."""

    def __init__(self, generators=None, facets=None, backend: Backend = RATIONAL, *, dim=None):
        if generators is None and facets is None:
            raise ValueError("a cone needs generators or facets")
        self.backend = backend
        self._gens = None
        self._facs = None
        if generators is not None:
            self._gens = _as_rows(generators, backend, dim)
            dim = self._gens.shape[1]
            if any(backend.all_zero(g) for g in self._gens):
                raise Degenerate("zero vector offered as a generator")
        if facets is not None:
            self._facs = _as_rows(facets, backend, dim)
            dim = self._facs.shape[1]
            if any(backend.all_zero(h) for h in self._facs):
                raise Degenerate("zero vector offered as a facet")
        self.dim = dim
        if self._gens is not None and rank(self._gens, backend) < dim:
            raise NonGenerating("generators do not span the ambient space")
        if self._facs is not None and rank(self._facs, backend) < dim:
            raise Degenerate("facet functionals do not span: cone is not pointed")
        self._dual = None

    def __repr__(self):
        parts = []
        if self._gens is not None:
            parts.append(f"{len(self._gens)} generators")
        if self._facs is not None:
            parts.append(f"{len(self._facs)} facets")
        return f"Cone(dim={self.dim}, {', '.join(parts)}, {self.backend.name})"

    @property
    def has_generators(self) -> bool:
        return self._gens is not None

    @property
    def has_facets(self) -> bool:
        return self._facs is not None

    @property
    def generators(self) -> np.ndarray:
        if self._gens is None:
            rays = extreme_rays(self._facs, self.backend)
            if rank(rays, self.backend) < self.dim:
                raise Degenerate("facet system describes a lower-dimensional cone")
            self._set_gens(rays)
        return self._gens

    @property
    def facets(self) -> np.ndarray:
        if self._facs is None:
            rays = extreme_rays(self._gens, self.backend)
            if rank(rays, self.backend) < self.dim:
                raise Degenerate("cone is not pointed")
            self._set_facs(rays)
        return self._facs

    def _set_gens(self, rays):
        self._gens = rays
        if self._dual is not None:
            self._dual._facs = rays

    def _set_facs(self, rays):
        self._facs = rays
        if self._dual is not None:
            self._dual._gens = rays

    def dual(self) -> "Cone":
        """Dual cone sharing this cone's cached halves (no computation)."""
        if self._dual is None:
            d = Cone.__new__(Cone)
            d.backend = self.backend
            d.dim = self.dim
            d._gens = self._facs
            d._facs = self._gens
            d._dual = self
            self._dual = d
        return self._dual

    @cached_property
    def _generator_index(self):
        return {tuple(primitive(g, self.backend)): i for i, g in enumerate(self.generators)}

    # -- membership ------------------------------------------------------

    def contains(self, v) -> bool:
        v = self._vector(v)
        if self._facs is not None:
            return self._first_violation(v) is None
        return bool(self._member_by_generators(v))

    def _first_violation(self, v):
        """Index of the first facet negative on ``v``, or None."""
        vals = _facet_values(self._facs, v, self.backend)
        if vals is not None:
            neg = np.flatnonzero(vals < 0)
            return int(neg[0]) if len(neg) else None
        vals = self._facs @ v
        b = self.backend
        for i, x in enumerate(vals):
            if b.sign(x) < 0:
                return i
        return None

    def member(self, v, certify: bool = True):
        v = self._vector(v)
        b = self.backend
        if self._facs is not None:
            i = self._first_violation(v)
            if i is not None:
                return Outside(self._facs[i].copy())
            if not certify:
                return Inside()
            if self._gens is None:
                return Inside(slacks=self._facs @ v)
        return self._member_by_generators(v)

    def _member_by_generators(self, v):
        b = self.backend
        G = self.generators
        if b.all_zero(v):
            return Inside(coefficients=b.zeros(len(G)))
        if b.exact:
            i = self._generator_index.get(tuple(primitive(v, b)))
            if i is not None:
                g = G[i]
                k = next(j for j in range(self.dim) if g[j] != 0)
                lam = b.zeros(len(G))
                lam[i] = v[k] / g[k]
                return Inside(coefficients=lam)
        lam = _min_norm(G, v, b)
        if lam is not None and b.nonneg(lam) and b.equal(lam @ G, v):
            if not b.exact:
                lam = np.where(lam < 0, 0.0, lam)
            return Inside(coefficients=lam)
        res = conic_feasibility(G.T, v, b)
        if res.feasible:
            return Inside(coefficients=res.coefficients)
        return Outside(res.farkas)

    def dual_contains(self, h) -> bool:
        return self.dual().contains(h)

    def dual_member(self, h, certify: bool = True):
        return self.dual().member(h, certify)

    def _vector(self, v) -> np.ndarray:
        if not isinstance(v, np.ndarray) or (v.dtype == object) != self.backend.exact:
            v = self.backend.array(v)
        if v.shape != (self.dim,):
            raise DimensionMismatch(f"vector of shape {v.shape} in a cone of dim {self.dim}")
        return v

    def equals(self, other: "Cone") -> bool:
        """Set equality by mutual containment of generators."""
        if other.dim != self.dim:
            return False
        return all(other.contains(g) for g in self.generators) and all(
            self.contains(g) for g in other.generators
        )

    def validate(self) -> None:
        """Check pointedness: no nonzero conic combination of generators vanishes."""
        b = self.backend
        G = self.generators
        ones = b.array([1] * len(G))
        system = np.concatenate([G.T, ones.reshape(1, -1)], axis=0)
        target = b.zeros(self.dim + 1)
        target[-1] = b.scalar(1)
        if conic_feasibility(system, target, b).feasible:
            raise Degenerate("cone is not pointed")


def _min_norm(G, v, b):
    """Least-norm ``lam`` with ``lam @ G = v`` (``G`` holds generators as rows)."""
    try:
        y = solve(G.T @ G, v, b)
    except Singular:  # pragma: no cover
        return None
    if y is None:
        return None
    return G @ y


_INT_LIMIT = 1 << 24
_int_cache: dict = {}


def _int_rows(rows):
    """Integer copy of an exact row matrix (rows rescaled positively), or None if large."""
    key = id(rows)
    hit = _int_cache.get(key)
    if hit is not None and hit[0] is rows:
        return hit[1]
    out = None
    ints = [[int(x) for x in primitive(r, RATIONAL)] for r in rows]
    if all(abs(x) < _INT_LIMIT for r in ints for x in r):
        out = np.array(ints, dtype=np.int64).reshape(len(rows), -1)
    if len(_int_cache) > 256:
        _int_cache.clear()
    _int_cache[key] = (rows, out)
    return out


def _facet_values(rows, v, backend):
    """Signs-faithful facet values via int64 arithmetic when sizes allow."""
    if not backend.exact or len(rows) < 8:
        return None
    F = _int_rows(rows)
    if F is None:
        return None
    iv = primitive(v, RATIONAL)
    if any(abs(x) >= _INT_LIMIT for x in iv):
        return None
    bound = _INT_LIMIT * _INT_LIMIT * F.shape[1]
    if bound >= 1 << 62:
        return None
    return F @ np.array([int(x) for x in iv], dtype=np.int64)


def cone_of(x) -> Cone:
    """Accept a Cone or anything exposing ``.cone`` (state spaces, dual spaces)."""
    return x if isinstance(x, Cone) else x.cone


# -- double description --------------------------------------------------


def _popcount(x: int) -> int:
    return bin(x).count("1")


def extreme_rays(rows, backend: Backend) -> np.ndarray:
    """Extreme rays of ``{x : rows @ x >= 0}`` by the double description method.

    ``rows`` must have full column rank (the cone is then pointed).  Rays come
    back canonically scaled (primitive integer / unit max-norm) and sorted.
    """
    A = np.asarray(rows)
    m, d = A.shape
    _, basis_rows = rref(A.T, backend)
    if len(basis_rows) < d:
        raise NonGenerating("inequality rows do not span; the cone has a lineality space")
    if backend.exact:
        R = [tuple(int(x) for x in primitive(a, backend)) for a in A]

        def dot(a, r):
            return sum(x * y for x, y in zip(a, r) if x)

        def combine(vp, n, vn, p):
            return _int_primitive([vp * x - vn * y for x, y in zip(n, p)])

        sign = lambda x: (x > 0) - (x < 0)  # noqa: E731
        init = inverse(backend.array([R[k] for k in basis_rows]), backend)
        rays = [_int_primitive([int(x) for x in primitive(init[:, j], backend)]) for j in range(d)]
    else:
        R = [np.asarray(primitive(a, backend), dtype=float) for a in A]
        tol = backend.tol

        def dot(a, r):
            return float(a @ r)

        def combine(vp, n, vn, p):
            return primitive(vp * n - vn * p, backend)

        def sign(x):
            return 0 if abs(x) <= tol else (1 if x > 0 else -1)

        init = inverse(np.array([R[k] for k in basis_rows]), backend)
        rays = [primitive(init[:, j], backend) for j in range(d)]

    full = 0
    for k in basis_rows:
        full |= 1 << k
    zeros = [full & ~(1 << basis_rows[j]) for j in range(d)]
    done = set(basis_rows)
    for i in range(m):
        if i in done:
            continue
        a = R[i]
        vals = [dot(a, r) for r in rays]
        sg = [sign(x) for x in vals]
        pos = [j for j, s in enumerate(sg) if s > 0]
        neg = [j for j, s in enumerate(sg) if s < 0]
        new_rays, new_zeros = [], []
        for j, s in enumerate(sg):
            if s >= 0:
                new_rays.append(rays[j])
                new_zeros.append(zeros[j] | ((1 << i) if s == 0 else 0))
        for p in pos:
            for n in neg:
                common = zeros[p] & zeros[n]
                if _popcount(common) < d - 2:
                    continue
                if any(
                    k != p and k != n and (zeros[k] & common) == common for k in range(len(rays))
                ):
                    continue
                new_rays.append(combine(vals[p], rays[n], vals[n], rays[p]))
                new_zeros.append(common | (1 << i))
        rays, zeros = new_rays, new_zeros
        done.add(i)
    out = backend.array([list(r) for r in rays]) if backend.exact else np.array(rays, dtype=float)
    return _sort_rows(out.reshape(len(rays), d))


def _int_primitive(v):
    from math import gcd

    g = 0
    for x in v:
        g = gcd(g, x)
    return tuple(x // g for x in v) if g > 1 else tuple(v)


# -- operations ----------------------------------------------------------


def dual_cone(c: Cone) -> Cone:
    """The cone of functionals nonnegative on ``c``, as a minimal generator list."""
    d = c.dual()
    d.generators
    return d


def member(c: Cone, v):
    return c.member(v)


def minimal_generators(c: Cone) -> Cone:
    """Drop generators that are conic combinations of the others."""
    b = c.backend
    G = c.generators
    seen = {}
    for i, g in enumerate(G):
        seen.setdefault(tuple(primitive(g, b)), i)
    keep = sorted(seen.values())
    changed = True
    while changed:
        changed = False
        for idx in list(keep):
            others = [k for k in keep if k != idx]
            if not others:
                break
            sub = G[others]
            if rank(sub, b) < c.dim:
                continue
            if conic_feasibility(sub.T, G[idx], b).feasible:
                keep.remove(idx)
                changed = True
                break
    out = Cone(G[keep], backend=b)
    if c.has_facets:
        out._facs = c._facs
    return out


class ConeMap:
    """A matrix together with the cones it is meant to map between.

    ``domain`` and ``codomain`` may be cones or anything with a ``.cone``
    attribute; the originals are kept so that state-space aware code (norms,
    units) can use them.
    """

    def __init__(self, matrix, domain, codomain, backend: Backend | None = None):
        dom, cod = cone_of(domain), cone_of(codomain)
        self.backend = backend or dom.backend
        m = matrix if isinstance(matrix, np.ndarray) else self.backend.array(matrix)
        if m.shape != (cod.dim, dom.dim):
            raise DimensionMismatch(f"matrix {m.shape} for map {dom.dim} -> {cod.dim}")
        self.matrix = m
        self.domain = domain
        self.codomain = codomain

    def __repr__(self):
        return f"ConeMap({cone_of(self.domain).dim} -> {cone_of(self.codomain).dim})"

    def __call__(self, v):
        return self.matrix @ v

    def __matmul__(self, other: "ConeMap") -> "ConeMap":
        return ConeMap(self.matrix @ other.matrix, other.domain, self.codomain, self.backend)

    def scaled(self, k) -> "ConeMap":
        return ConeMap(self.matrix * k, self.domain, self.codomain, self.backend)

    def positivity_violation(self):
        """First domain generator whose image leaves the codomain, or None."""
        cod = cone_of(self.codomain)
        for g in cone_of(self.domain).generators:
            if not cod.contains(self.matrix @ g):
                return g
        return None

    def is_positive(self) -> bool:
        return self.positivity_violation() is None

    def inverse(self) -> "ConeMap":
        return ConeMap(inverse(self.matrix, self.backend), self.codomain, self.domain, self.backend)


def is_order_iso(m: ConeMap) -> bool:
    """Bijective, positive, with positive inverse."""
    dom, cod = cone_of(m.domain), cone_of(m.codomain)
    if dom.dim != cod.dim:
        raise DimensionMismatch("order isomorphism between spaces of different dimension")
    try:
        inv = m.inverse()
    except Singular:
        return False
    return m.is_positive() and inv.is_positive()
