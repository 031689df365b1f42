"""Abstract state spaces ``(A, u_A)``, effects, observables and a small model library."""

from __future__ import annotations

import math
import re
from itertools import permutations
from dataclasses import dataclass, field

import numpy as np

from .cone import Cone, ConeMap
from .errors import (
    BackendMismatch,
    DimensionMismatch,
    NotGenerating,
    NotInCone,
    NotPointed,
    NotPositive,
    UnitNotOne,
    UnknownModel,
)
from .scalar import (
    RATIONAL,
    Backend,
    f64,
    format_scalar,
    inverse,
    parse_scalar,
    primitive,
    rank,
    rref,
)

__all__ = [
    "StateSpace",
    "DualSpace",
    "Effect",
    "Observable",
    "Check",
    "make_state_space",
    "make_model",
    "model_families",
    "validate",
    "normalize",
    "map_norm",
    "parse_model",
    "format_model",
    "vertex_permutation_map",
    "vertex_automorphisms",
]


class StateSpace:
    """An ordered vector space with a distinguished order unit.

    ``omega_vertices`` are the normalized extreme rays (``unit @ v == 1``).
    They are supplied directly by :func:`make_state_space`; composite spaces
    derive them from their cone on first use.
    """

    def __init__(self, cone: Cone, unit, name: str = "", vertices=None):
        self.cone = cone
        self.backend = cone.backend
        self.dim = cone.dim
        self.unit = unit if isinstance(unit, np.ndarray) else self.backend.array(unit)
        if self.unit.shape != (self.dim,):
            raise DimensionMismatch("unit functional has the wrong length")
        self.name = name
        self._vertices = vertices
        self._dual_space = None

    def __repr__(self):
        return f"StateSpace({self.name or '?'}, dim={self.dim}, {self.backend.name})"

    @property
    def omega_vertices(self) -> np.ndarray:
        if self._vertices is None:
            G = self.cone.generators
            self._vertices = np.array([g / (self.unit @ g) for g in G]).reshape(G.shape)
        return self._vertices

    def dual(self) -> "DualSpace":
        if self._dual_space is None:
            self._dual_space = DualSpace(self)
        return self._dual_space

    def evaluate(self, f, v):
        return np.asarray(f) @ np.asarray(v)

    def is_state(self, v) -> bool:
        return bool(validate(self, v, "state"))

    def is_effect(self, f) -> bool:
        return bool(validate(self, f, "effect"))


class DualSpace:
    """The dual ``A*`` of a state space, sharing its coordinates."""

    def __init__(self, space: StateSpace):
        self.space = space
        self.cone = space.cone.dual()
        self.dim = space.dim
        self.backend = space.backend
        self.name = f"{space.name}*"

    def __repr__(self):
        return f"DualSpace({self.space.name or '?'})"


@dataclass(frozen=True, eq=False)
class Effect:
    space: StateSpace
    functional: np.ndarray

    def __call__(self, v):
        return self.functional @ v


@dataclass(frozen=True, eq=False)
class Observable:
    space: StateSpace
    effects: list
    labels: list = field(default_factory=list)

    def __len__(self):
        return len(self.effects)

    def __iter__(self):
        return iter(self.effects)

    def probabilities(self, v) -> list:
        return [e.functional @ v for e in self.effects]


@dataclass(frozen=True)
class Check:
    """Outcome of :func:`validate`; truthy when valid."""

    ok: bool
    reason: str = ""
    certificate: object = None

    def __bool__(self):
        return self.ok


# -- construction --------------------------------------------------------


def make_state_space(vertices, unit, name: str = "", backend: Backend = RATIONAL) -> StateSpace:
    """State space whose normalized states are the convex hull of ``vertices``."""
    V = backend.array(vertices)
    if V.ndim != 2 or len(V) == 0:
        raise DimensionMismatch("need a nonempty list of vertices")
    u = backend.array(unit)
    if u.shape != (V.shape[1],):
        raise DimensionMismatch("unit functional has the wrong length")
    for v in V:
        if not backend.is_zero(u @ v - 1):
            raise UnitNotOne(f"unit takes value {format_scalar(u @ v)} on a vertex")
    if rank(V, backend) < V.shape[1]:
        raise NotGenerating("vertices do not span the ambient space")
    cone = Cone(V, backend=backend)
    # the unit is strictly positive on every generator, so the cone is pointed;
    # enumerating facets also confirms this
    try:
        cone.facets
    except Exception as exc:  # pragma: no cover - guarded by the unit check
        raise NotPointed(str(exc)) from exc
    keep = _extreme_indices(cone)
    if len(keep) < len(V):
        cone = Cone(V[keep], facets=cone.facets, backend=backend)
    return StateSpace(cone, u, name, vertices=V[keep])


def _extreme_indices(cone: Cone) -> list:
    """Generators lying on at least ``dim - 1`` independent facets."""
    b = cone.backend
    G, F = cone.generators, cone.facets
    keep, seen = [], set()
    for i, g in enumerate(G):
        key = tuple(primitive(g, b))
        if key in seen:
            continue
        tight = [h for h in F if b.is_zero(h @ g)]
        if tight and rank(np.array(tight), b) == cone.dim - 1:
            keep.append(i)
            seen.add(key)
    return keep


_SQUARE = [[1, 0, 1], [0, 1, 1], [-1, 0, 1], [0, -1, 1]]
_TRIANGLE = [[1, 0, 1], [0, 1, 1], [-1, -1, 1]]

_FAMILIES = {
    "classical": "classical(n): the n-outcome simplex, vertices e_1..e_n, unit (1,...,1)",
    "polygon": "polygon(n): regular n-gon at height 1, unit (0,0,1)",
    "hypercube": "hypercube(d): vertices (+-1,...,+-1,1), unit e_(d+1)",
    "cross_polytope": "cross_polytope(d): vertices (+-e_i,1), unit e_(d+1)",
}


def model_families() -> dict:
    return dict(_FAMILIES)


def make_model(kind: str, n: int | None = None, backend: Backend = RATIONAL) -> StateSpace:
    """Built-in models.  ``kind`` may be ``"polygon(5)"`` or ``("polygon", 5)``."""
    if n is None:
        m = re.fullmatch(r"\s*(\w+)\s*\(\s*(\d+)\s*\)\s*", kind)
        if not m:
            raise UnknownModel(kind)
        kind, n = m.group(1), int(m.group(2))
    name = f"{kind}({n})"
    if kind == "classical":
        if n < 2:
            raise ValueError("classical(n) needs n >= 2")
        V = np.eye(n, dtype=int).tolist()
        return make_state_space(V, [1] * n, name, backend)
    if kind == "polygon":
        if n < 3:
            raise ValueError("polygon(n) needs n >= 3")
        if n == 4:
            return make_state_space(_SQUARE, [0, 0, 1], name, backend)
        if backend.exact:
            if n == 3:
                return make_state_space(_TRIANGLE, [0, 0, 1], name, backend)
            raise BackendMismatch(f"polygon({n}) has irrational vertices")
        V = [[math.cos(2 * math.pi * k / n), math.sin(2 * math.pi * k / n), 1.0] for k in range(n)]
        return make_state_space(V, [0, 0, 1], name, backend)
    if kind == "hypercube":
        if n < 1:
            raise ValueError("hypercube(d) needs d >= 1")
        V = [list(s) + [1] for s in _sign_patterns(n)]
        return make_state_space(V, [0] * n + [1], name, backend)
    if kind == "cross_polytope":
        if n < 1:
            raise ValueError("cross_polytope(d) needs d >= 1")
        V = []
        for i in range(n):
            for s in (1, -1):
                row = [0] * (n + 1)
                row[i], row[n] = s, 1
                V.append(row)
        return make_state_space(V, [0] * n + [1], name, backend)
    raise UnknownModel(kind)


def _sign_patterns(d):
    if d == 0:
        return [()]
    return [(s,) + rest for s in (1, -1) for rest in _sign_patterns(d - 1)]


# -- validation and norms ------------------------------------------------


def validate(space: StateSpace, x, role: str = "state") -> Check:
    """Check a state, effect or observable against ``space``.

    The certificate is a membership certificate (or the violated item) so
    that a caller can replay the decision.
    """
    b = space.backend
    if role == "observable":
        effects = [e.functional if isinstance(e, Effect) else e for e in x]
        total = b.zeros(space.dim)
        for i, f in enumerate(effects):
            c = validate(space, f, "effect")
            if not c:
                return Check(False, f"outcome {i}: {c.reason}", c.certificate)
            total = total + _vec(space, f)
        if not b.equal(total, space.unit):
            return Check(False, "effects do not sum to the unit", total)
        return Check(True, "", total)
    v = _vec(space, x.functional if isinstance(x, Effect) else x)
    if role == "state":
        m = space.cone.member(v)
        if not m:
            return Check(False, "not in the positive cone", m)
        if not b.is_zero(space.unit @ v - 1):
            return Check(False, "unit value is not 1", space.unit @ v)
        return Check(True, "", m)
    if role == "effect":
        lo = space.cone.dual_member(v)
        if not lo:
            return Check(False, "negative on a positive element", lo)
        hi = space.cone.dual_member(space.unit - v)
        if not hi:
            return Check(False, "exceeds the unit on a positive element", hi)
        return Check(True, "", (lo, hi))
    raise ValueError(f"unknown role {role!r}")


def _vec(space, x):
    b = space.backend
    v = x if isinstance(x, np.ndarray) and (x.dtype == object) == b.exact else b.array(x)
    if v.shape != (space.dim,):
        raise DimensionMismatch(f"vector of shape {v.shape} for a space of dim {space.dim}")
    return v


def normalize(space: StateSpace, alpha) -> np.ndarray:
    """``alpha / unit(alpha)``, with the zero vector sent to itself."""
    v = _vec(space, alpha)
    if not space.cone.contains(v):
        raise NotInCone("cannot normalize a vector outside the positive cone")
    t = space.unit @ v
    if space.backend.is_zero(t):
        return space.backend.zeros(space.dim)
    return v / t


def map_norm(m: ConeMap, kind: str = "state-to-state"):
    """Operator norm of a positive map into a state space.

    ``state-to-state`` maximises the codomain unit over the domain's
    normalized vertices; ``dual-to-state`` evaluates the codomain unit at the
    image of the domain's order unit.
    """
    if not m.is_positive():
        raise NotPositive("map norm is only defined here for positive maps")
    cod = m.codomain
    unit_b = cod.unit
    if kind == "state-to-state":
        return max(unit_b @ (m.matrix @ v) for v in m.domain.omega_vertices)
    if kind == "dual-to-state":
        dom = m.domain.space if isinstance(m.domain, DualSpace) else m.domain
        return unit_b @ (m.matrix @ dom.unit)
    raise ValueError(f"unknown norm kind {kind!r}")


# -- vertex symmetries ---------------------------------------------------


def _vertex_lookup(space: StateSpace):
    b = space.backend
    V = space.omega_vertices
    if b.exact:
        table = {tuple(v): i for i, v in enumerate(V)}
        return lambda w: table.get(tuple(w))

    def find(w):
        d = np.max(np.abs(V - np.asarray(w, dtype=float)), axis=1)
        i = int(np.argmin(d))
        return i if d[i] <= b.tol * 10 else None

    return find


def _vertex_basis(space: StateSpace) -> list:
    _, piv = rref(space.omega_vertices.T, space.backend)
    return list(piv)


def vertex_permutation_map(space: StateSpace, perm) -> np.ndarray | None:
    """Linear map sending vertex ``i`` to vertex ``perm[i]``, or None if none exists."""
    b = space.backend
    V = space.omega_vertices
    basis = _vertex_basis(space)
    src = V[basis].T
    dst = V[[perm[i] for i in basis]].T
    M = dst @ inverse(src, b)
    for i, v in enumerate(V):
        if not b.equal(M @ v, V[perm[i]]):
            return None
    return M


def vertex_automorphisms(space: StateSpace, limit: int = 5000) -> list:
    """All linear maps permuting the vertices (each is a symmetry of the space).

    Candidates are fixed by where a basis of vertices goes, so at most
    ``n!/(n-d)!`` assignments are tried; ``limit`` caps that count.
    """
    b = space.backend
    V = space.omega_vertices
    n = len(V)
    basis = _vertex_basis(space)
    inv = inverse(V[basis].T, b)
    find = _vertex_lookup(space)
    out = []
    for k, images in enumerate(permutations(range(n), len(basis))):
        if k >= limit:
            break
        M = V[list(images)].T @ inv
        hit = [find(M @ v) for v in V]
        if None not in hit and len(set(hit)) == n:
            out.append(M)
    return out


# -- text format ---------------------------------------------------------

_MODEL_RE = re.compile(r"model\s*\{(.*)\}\s*$", re.S)


def format_model(space: StateSpace) -> str:
    def vec(v):
        return "[" + ", ".join(format_scalar(x) for x in v) + "]"

    rows = ", ".join(vec(v) for v in space.omega_vertices)
    return (
        f"model {{ name: {space.name}; scalar: {space.backend.name}; dim: {space.dim}; "
        f"u: {vec(space.unit)}; omega_vertices: [{rows}] }}"
    )


def parse_model(text: str, backend: Backend | None = None) -> StateSpace:
    """Inverse of :func:`format_model`."""
    m = _MODEL_RE.fullmatch(text.strip())
    if not m:
        raise ValueError("not a model block")
    fields = parse_fields(m.group(1))
    scalar = fields.get("scalar", "rational")
    if backend is None:
        backend = RATIONAL if scalar == "rational" else f64()
    elif (scalar == "rational") != backend.exact:
        raise BackendMismatch(f"model declares {scalar}, backend is {backend.name}")
    if "u" not in fields or "omega_vertices" not in fields:
        raise ValueError("model block needs u and omega_vertices")
    u = parse_value(fields["u"], backend)
    V = parse_value(fields["omega_vertices"], backend)
    space = make_state_space(V, u, fields.get("name", ""), backend)
    if "dim" in fields and int(fields["dim"]) != space.dim:
        raise DimensionMismatch("declared dim does not match the vertices")
    return space


def parse_fields(body: str) -> dict:
    """Split ``key: value; key: value`` respecting brackets and parentheses."""
    out, depth, cur = {}, 0, []
    for ch in body + ";":
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        if ch == ";" and depth == 0:
            item = "".join(cur).strip()
            cur = []
            if not item:
                continue
            key, sep, val = item.partition(":")
            if not sep:
                raise ValueError(f"expected 'key: value', got {item!r}")
            out[key.strip()] = val.strip()
        else:
            cur.append(ch)
    if depth != 0:
        raise ValueError("unbalanced brackets")
    return out


def parse_value(text: str, backend: Backend):
    """Nested bracketed lists of scalars (``p/q`` or decimals, optionally quoted)."""
    text = text.strip()
    if text.startswith("["):
        inner = text[1:-1] if text.endswith("]") else None
        if inner is None:
            raise ValueError(f"unbalanced list {text!r}")
        parts, depth, cur = [], 0, []
        for ch in inner + ",":
            if ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
            if ch == "," and depth == 0:
                item = "".join(cur).strip()
                cur = []
                if item:
                    parts.append(parse_value(item, backend))
            else:
                cur.append(ch)
        return parts
    return parse_scalar(text.strip("\"'"), backend)
