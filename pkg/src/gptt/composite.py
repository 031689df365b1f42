"""Tensor composites of state spaces.

Coordinates of a composite are Kronecker coordinates with the leaves taken in
tree order, so a product state ``a (x) b (x) c`` is ``kron(a, kron(b, c))``.
A min node is stored by generators (all products of child generators), a max
node by facets (all products of child facets); the other half is only
computed when something asks for it.

Bipartite reshaping follows one convention throughout: for a designated
side ``J`` with complement ``K`` the element becomes a ``dim(J) x dim(K)``
matrix ``W``.  Then ``hat`` of a state is ``W.T`` (a map ``J* -> K``) and
``hat`` of an effect is ``W.T`` as well (a map ``J -> K*``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np

from .cone import Cone, ConeMap, Outside, minimal_generators
from .errors import BackendMismatch, DimensionMismatch
from .scalar import Backend, primitive
from .state_space import StateSpace, vertex_automorphisms

__all__ = [
    "TensorRecipe",
    "leaf",
    "tmin",
    "tmax",
    "parse_recipe",
    "Composite",
    "tensor",
    "explicit_composite",
    "BipartiteElement",
    "kron",
    "marginal",
    "conditional",
    "hat",
    "unhat",
    "partial_subsystem",
    "partial_evaluate",
    "Regular",
    "NotRegular",
    "check_regular",
    "bipartitions",
    "AdmissibleByConstruction",
    "NotFalsified",
    "Falsified",
    "check_admissible",
]


# -- recipes -------------------------------------------------------------


@dataclass(frozen=True)
class TensorRecipe:
    """A tree of ``min``/``max`` nodes over leaf state spaces."""

    op: str
    children: tuple = ()
    space: StateSpace | None = None

    def __post_init__(self):
        if self.op == "leaf":
            if self.space is None or self.space.dim < 2:
                raise DimensionMismatch("leaves must be state spaces of dimension >= 2")
        elif self.op in ("min", "max", "explicit"):
            if not self.children:
                raise ValueError("empty tensor node")
        else:
            raise ValueError(f"unknown node type {self.op!r}")

    @property
    def leaves(self) -> list:
        if self.op == "leaf":
            return [self.space]
        return [s for c in self.children for s in c.leaves]

    def __str__(self):
        if self.op == "leaf":
            return self.space.name or "?"
        return f"{self.op}({', '.join(str(c) for c in self.children)})"


def _as_recipe(x) -> TensorRecipe:
    if isinstance(x, TensorRecipe):
        return x
    if isinstance(x, Composite):
        if x.recipe.op == "explicit":
            raise ValueError("explicit composites cannot be nested")
        return x.recipe
    if isinstance(x, StateSpace):
        return TensorRecipe("leaf", space=x)
    raise TypeError(f"cannot use {type(x).__name__} in a tensor recipe")


def leaf(space: StateSpace) -> TensorRecipe:
    return TensorRecipe("leaf", space=space)


def tmin(*parts) -> TensorRecipe:
    return TensorRecipe("min", tuple(_as_recipe(p) for p in parts))


def tmax(*parts) -> TensorRecipe:
    return TensorRecipe("max", tuple(_as_recipe(p) for p in parts))


def parse_recipe(text: str, bindings: dict) -> TensorRecipe:
    """Parse ``min(A, max(B, C))`` with names looked up in ``bindings``."""
    tokens = [t for t in _tokenize(text)]
    pos = 0

    def expr():
        nonlocal pos
        name = tokens[pos]
        pos += 1
        if pos < len(tokens) and tokens[pos] == "(" and name in ("min", "max"):
            pos += 1
            args = [expr()]
            while tokens[pos] == ",":
                pos += 1
                args.append(expr())
            if tokens[pos] != ")":
                raise ValueError(f"expected ')' in recipe {text!r}")
            pos += 1
            return TensorRecipe(name, tuple(args))
        if name not in bindings:
            raise KeyError(name)
        return _as_recipe(bindings[name])

    try:
        out = expr()
    except IndexError:
        raise ValueError(f"truncated recipe {text!r}") from None
    if pos != len(tokens):
        raise ValueError(f"trailing input in recipe {text!r}")
    return out


def _tokenize(text):
    cur = ""
    for ch in text:
        if ch in "(),":
            if cur.strip():
                yield cur.strip()
            cur = ""
            yield ch
        elif ch.isspace():
            if cur.strip():
                yield cur.strip()
            cur = ""
        else:
            cur += ch
    if cur.strip():
        yield cur.strip()


# -- tensor products -----------------------------------------------------


def kron(*vectors) -> np.ndarray:
    """Kronecker product of vectors (works on object arrays)."""
    return reduce(lambda a, b: np.multiply.outer(a, b).ravel(), vectors)


def _products(rows_per_factor) -> np.ndarray:
    out = [kron(*combo) for combo in itertools.product(*rows_per_factor)]
    return np.array(out).reshape(len(out), -1)


class Composite(StateSpace):
    """A state space built from a :class:`TensorRecipe` (or an explicit cone)."""

    def __init__(self, recipe: TensorRecipe, cone: Cone | None = None, name: str | None = None):
        self.recipe = recipe
        self.leaves = recipe.leaves
        b = self.leaves[0].backend
        for s in self.leaves[1:]:
            if s.backend != b:
                raise BackendMismatch("leaves use different scalar backends")
        self.backend = b
        self.leaf_dims = [s.dim for s in self.leaves]
        self.dim = int(np.prod(self.leaf_dims))
        self.unit = kron(*[s.unit for s in self.leaves])
        self.name = name or str(recipe)
        self._cone = cone
        self._vertices = None
        self._dual_space = None

    def __repr__(self):
        return f"Composite({self.name}, dim={self.dim}, {self.backend.name})"

    @property
    def cone(self) -> Cone:
        if self._cone is None:
            r = self.recipe
            if r.op == "min":
                gens = _products([tensor(c).cone.generators for c in r.children])
                self._cone = Cone(gens, backend=self.backend)
            elif r.op == "max":
                facs = _products([tensor(c).cone.facets for c in r.children])
                self._cone = Cone(facets=facs, backend=self.backend)
            else:  # pragma: no cover - explicit composites are built with a cone
                raise ValueError("explicit composite without a cone")
        return self._cone

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def partial(self, J) -> StateSpace:
        return partial_subsystem(self, J)

    def product(self, *vectors) -> np.ndarray:
        return kron(*vectors)

    def element(self, tensor_, J=(0,), kind: str = "state") -> "BipartiteElement":
        return BipartiteElement(self, tuple(J), _as_vec(self, tensor_), kind)


def _as_vec(space, x):
    b = space.backend
    v = x if isinstance(x, np.ndarray) and (x.dtype == object) == b.exact else b.array(x)
    if v.shape != (space.dim,):
        raise DimensionMismatch(f"vector of shape {v.shape} for a space of dim {space.dim}")
    return v


@lru_cache(maxsize=512)
def tensor(recipe) -> StateSpace:
    """Realize a recipe.  A bare leaf realizes to the leaf space itself."""
    recipe = _as_recipe(recipe)
    if recipe.op == "leaf":
        return recipe.space
    return Composite(recipe)


def explicit_composite(leaves, generators, name: str = "explicit") -> Composite:
    """Composite ordered by the cone generated by ``generators``.

    The cone must contain every product state (checked), as a composite must.
    """
    recipe = TensorRecipe("explicit", tuple(_as_recipe(s) for s in leaves))
    b = recipe.leaves[0].backend
    cone = Cone(generators, backend=b)
    c = Composite(recipe, cone=cone, name=name)
    for combo in itertools.product(*[s.cone.generators for s in c.leaves]):
        if not cone.contains(kron(*combo)):
            raise ValueError("explicit cone misses a product state")
    return c


# -- reshaping -----------------------------------------------------------


def _complement(n, J):
    return tuple(i for i in range(n) if i not in J)


def _split(host: StateSpace, J, x) -> np.ndarray:
    """``x`` as a ``dim(J) x dim(K)`` matrix."""
    dims = host.leaf_dims
    J = tuple(J)
    K = _complement(len(dims), J)
    t = np.asarray(x).reshape(dims).transpose(J + K)
    dJ = int(np.prod([dims[i] for i in J]))
    return t.reshape(dJ, -1)


def _join(host: StateSpace, J, W) -> np.ndarray:
    dims = host.leaf_dims
    J = tuple(J)
    order = J + _complement(len(dims), J)
    t = np.asarray(W).reshape([dims[i] for i in order])
    return t.transpose(np.argsort(order)).ravel()


def _reorder(vec, dims, axes) -> np.ndarray:
    """Reorder a Kronecker vector whose factors are leaves ``axes`` into sorted leaf order."""
    t = np.asarray(vec).reshape([dims[i] for i in axes])
    return t.transpose(np.argsort(axes)).ravel()


@dataclass(frozen=True, eq=False)
class BipartiteElement:
    """A state or effect of ``host`` viewed across the cut ``J | complement``."""

    host: Composite
    J: tuple
    tensor: np.ndarray
    kind: str = "state"

    def __post_init__(self):
        if self.kind not in ("state", "effect"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if not self.J or len(self.J) >= self.host.n_leaves:
            raise ValueError("the designated side must be a nonempty proper subset of leaves")
        if self.tensor.shape != (self.host.dim,):
            raise DimensionMismatch("element does not live in the host space")

    @property
    def K(self) -> tuple:
        return _complement(self.host.n_leaves, self.J)

    @property
    def matrix(self) -> np.ndarray:
        return _split(self.host, self.J, self.tensor)

    def side(self, which: int = 0) -> StateSpace:
        return partial_subsystem(self.host, self.J if which == 0 else self.K)

    def regroup(self, J) -> "BipartiteElement":
        return BipartiteElement(self.host, tuple(J), self.tensor, self.kind)

    def hat(self) -> ConeMap:
        return hat(self)

    def is_valid(self) -> bool:
        if self.kind == "state":
            return self.host.cone.contains(self.tensor)
        return self.host.cone.dual_contains(self.tensor) and self.host.cone.dual_contains(
            self.host.unit - self.tensor
        )


def hat(x: BipartiteElement) -> ConeMap:
    """State ``omega`` to ``J* -> K``; effect ``f`` to ``J -> K*``."""
    W = x.matrix
    A, B = x.side(0), x.side(1)
    if x.kind == "state":
        return ConeMap(W.T, A.dual(), B)
    return ConeMap(W.T, A, B.dual())


def unhat(m, host: Composite, J=(0,), kind: str = "state") -> BipartiteElement:
    """Inverse of :func:`hat`."""
    M = m.matrix if isinstance(m, ConeMap) else np.asarray(m)
    J = tuple(J)
    dJ = int(np.prod([host.leaf_dims[i] for i in J]))
    if M.shape != (host.dim // dJ, dJ):
        raise DimensionMismatch(f"map of shape {M.shape} does not match the cut")
    return BipartiteElement(host, J, _join(host, J, M.T), kind)


def partial_evaluate(host: StateSpace, x, J, effect) -> np.ndarray:
    """Evaluate the complement of ``J`` against ``effect``; result lives on ``J``."""
    return _split(host, J, x) @ np.asarray(effect)


def marginal(omega: BipartiteElement, side=None) -> np.ndarray:
    """Partial evaluation against the unit of the complementary leaves."""
    J = omega.J if side is None else tuple(side)
    host = omega.host
    K = _complement(host.n_leaves, J)
    u = kron(*[host.leaves[i].unit for i in K])
    return partial_evaluate(host, omega.tensor, J, u)


def conditional(omega: BipartiteElement, f, normalized: bool = False, side=None) -> np.ndarray:
    """State of the complementary leaves after effect ``f`` on side ``J``.

    Unnormalized this is ``omega(f, .)``; normalized it is divided by the
    probability of ``f``, or is zero when that probability vanishes.
    """
    J = omega.J if side is None else tuple(side)
    host = omega.host
    fv = f.functional if hasattr(f, "functional") else np.asarray(f)
    out = _split(host, J, omega.tensor).T @ fv
    if not normalized:
        return out
    K = _complement(host.n_leaves, J)
    p = kron(*[host.leaves[i].unit for i in K]) @ out
    b = host.backend
    if b.is_zero(p):
        return b.zeros(out.shape[0])
    return out / p


# -- partial subsystems --------------------------------------------------


def _leaf_ranges(recipe: TensorRecipe):
    out, start = [], 0
    for c in recipe.children:
        n = len(c.leaves)
        out.append(range(start, start + n))
        start += n
    return out


def _partial_recipe(recipe: TensorRecipe, J: tuple):
    """Recipe for the J-partial subsystem, or None if no structural rule applies."""
    if len(J) == len(recipe.leaves):
        return recipe
    if recipe.op not in ("min", "max"):
        return None
    subs = []
    for child, rng in zip(recipe.children, _leaf_ranges(recipe)):
        Jc = tuple(j - rng.start for j in J if j in rng)
        if not Jc:
            continue
        sub = _partial_recipe(child, Jc)
        if sub is None:
            return None
        if recipe.op == "max" and len(Jc) < len(child.leaves):
            # a max node splits along children that are themselves regular
            cut = [Jc, _complement(len(child.leaves), Jc)]
            if not check_regular(tensor(child), cut):
                return None
        subs.append((child, sub))
    if len(subs) == 1:
        return subs[0][1]
    return TensorRecipe(recipe.op, tuple(s for _, s in subs))


def partial_subsystem(c: StateSpace, J) -> StateSpace:
    """The J-partial subsystem of ``c``.

    Recipes are resolved structurally: a min node restricts to the min of its
    children's partial subsystems, a max node to the max of theirs provided
    each split child is regular across the cut.  Anything else falls back to
    partially evaluating the cone's generators against products of
    complementary leaf effects.
    """
    J = tuple(sorted(set(J)))
    if not isinstance(c, Composite):
        if J != (0,):
            raise ValueError("a single state space only has the partial subsystem {0}")
        return c
    n = c.n_leaves
    if not J or J[0] < 0 or J[-1] >= n:
        raise ValueError(f"bad index set {J} for {n} leaves")
    if len(J) == n:
        return c
    return _partial_cached(c, J)


@lru_cache(maxsize=512)
def _partial_cached(c: Composite, J: tuple) -> StateSpace:
    r = _partial_recipe(c.recipe, J)
    if r is not None:
        return tensor(r)
    return _explicit_partial(c, J)


def _explicit_partial(c: Composite, J: tuple) -> StateSpace:
    b = c.backend
    K = _complement(c.n_leaves, J)
    effects = _products([c.leaves[i].cone.facets for i in K])
    seen, rows = set(), []
    for g in c.cone.generators:
        W = _split(c, J, g)
        for e in effects:
            v = W @ e
            if b.all_zero(v):
                continue
            key = tuple(primitive(v, b))
            if key not in seen:
                seen.add(key)
                rows.append(v)
    cone = minimal_generators(Cone(np.array(rows), backend=b))
    leaves = [c.leaves[i] for i in J]
    if len(leaves) == 1:
        return StateSpace(cone, leaves[0].unit, leaves[0].name)
    recipe = TensorRecipe("explicit", tuple(_as_recipe(s) for s in leaves))
    name = f"{c.name}|{''.join(str(j) for j in J)}"
    return Composite(recipe, cone=cone, name=name)


# -- regularity ----------------------------------------------------------


@dataclass(frozen=True)
class Regular:
    partition: tuple

    def __bool__(self):
        return True


@dataclass(frozen=True, eq=False)
class NotRegular:
    """A product of partial-subsystem elements that ``host`` does not accept."""

    partition: tuple
    kind: str
    element: np.ndarray
    certificate: Outside

    def __bool__(self):
        return False

    def verify(self, host: StateSpace) -> bool:
        cone = host.cone if self.kind == "state" else host.cone.dual()
        return self.certificate.verify(cone, self.element)


def bipartitions(n: int) -> list:
    """Every split of ``range(n)`` into two nonempty parts (leaf 0 on the left)."""
    out = []
    rest = list(range(1, n))
    for k in range(0, n - 1):
        for extra in itertools.combinations(rest, k):
            left = (0,) + extra
            out.append((left, _complement(n, left)))
    return out


def check_regular(c: StateSpace, partition):
    """Is ``c`` a composite of its partial subsystems on ``partition``?

    Products of generators of the parts must be states of ``c`` and products
    of facet functionals of the parts must be effects of ``c``.  By
    multilinearity this covers every product of states and effects.
    """
    parts = tuple(tuple(sorted(p)) for p in partition)
    return _regular_cached(c, parts)


@lru_cache(maxsize=512)
def _regular_cached(c, parts):
    n = c.n_leaves if isinstance(c, Composite) else 1
    flat = sorted(i for p in parts for i in p)
    if flat != list(range(n)):
        raise ValueError("partition must cover the leaves exactly once")
    if len(parts) == 1:
        return Regular(parts)
    spaces = [partial_subsystem(c, p) for p in parts]
    axes = [i for p in parts for i in p]
    dims = c.leaf_dims
    for combo in itertools.product(*[s.cone.generators for s in spaces]):
        x = _reorder(kron(*combo), dims, axes)
        m = c.cone.member(x, certify=False)
        if not m:
            return NotRegular(parts, "state", x, m)
    if len(parts) == 2 and c.cone.has_generators:
        return _effects_by_generators(c, parts, spaces)
    dual = c.cone.dual()
    for combo in itertools.product(*[s.cone.facets for s in spaces]):
        h = _reorder(kron(*combo), dims, axes)
        m = dual.member(h, certify=False)
        if not m:
            return NotRegular(parts, "effect", h, m)
    return Regular(parts)


def _effects_by_generators(c, parts, spaces):
    """Effect half of :func:`check_regular` for a host known by its generators.

    ``h1 (x) h2`` is nonnegative on every generator ``x`` of the host iff
    each partial evaluation ``x(., h2)`` lies in the other part.  Only the
    facets of the smaller part are needed; the other part is probed by
    membership, which is cheap for the product-like vectors that arise.
    """
    k = 0 if spaces[0].dim <= spaces[1].dim else 1
    small, big = spaces[k], spaces[1 - k]
    J = parts[1 - k]
    for x in c.cone.generators:
        for h2 in small.cone.facets:
            y = partial_evaluate(c, x, J, h2)
            m = big.cone.member(y)
            if not m:
                pair = (m.functional, h2) if k == 1 else (h2, m.functional)
                h = _reorder(kron(*pair), c.leaf_dims, parts[0] + parts[1])
                return NotRegular(parts, "effect", h, Outside(x))
    return Regular(parts)


# -- dynamical admissibility ---------------------------------------------


@dataclass(frozen=True)
class AdmissibleByConstruction:
    reason: str

    def __bool__(self):
        return True


@dataclass(frozen=True)
class NotFalsified:
    trials: int

    def __bool__(self):
        return True


@dataclass(frozen=True, eq=False)
class Falsified:
    maps: tuple
    state: np.ndarray
    image: np.ndarray
    certificate: Outside

    def __bool__(self):
        return False


def _effect_rays(space: StateSpace) -> list:
    """Facet functionals rescaled to peak at 1 on the vertices."""
    out = []
    for h in space.cone.facets:
        top = max(h @ v for v in space.omega_vertices)
        out.append(h / top)
    return out


def _random_weight(rng, b: Backend):
    k = int(rng.integers(1, 9))
    return b.scalar(k) / 8 if b.exact else k / 8


def _random_positive_map(space: StateSpace, autos, effects, rng) -> np.ndarray:
    """A norm-contractive positive map: weighted symmetry plus measure-and-prepare part."""
    b = space.backend
    V = space.omega_vertices
    w = _random_weight(rng, b)
    M = autos[int(rng.integers(len(autos)))] * w
    rest = 1 - w
    if not b.is_zero(rest):
        e = effects[int(rng.integers(len(effects)))]
        v = V[int(rng.integers(len(V)))]
        M = M + rest * np.multiply.outer(v, e)
    return M


def check_admissible(c: StateSpace, trials: int = 1000, seed: int = 0):
    """Stability of the composite cone under products of local positive maps.

    Recipe composites are stable by construction.  Explicit cones are probed
    with seeded random maps; a hit returns the state pushed outside.
    """
    if not isinstance(c, Composite) or c.recipe.op in ("min", "max"):
        return AdmissibleByConstruction("min and max tensor cones are stable under product maps")
    rng = np.random.default_rng(seed)
    cone = c.cone
    cone.facets  # one enumeration makes every later membership test a sign check
    autos = [vertex_automorphisms(s) for s in c.leaves]
    effects = [_effect_rays(s) for s in c.leaves]
    G = cone.generators
    for _ in range(trials):
        maps = tuple(
            _random_positive_map(s, a, e, rng) for s, a, e in zip(c.leaves, autos, effects)
        )
        T = reduce(np.kron, maps)
        for g in G:
            img = T @ g
            m = cone.member(img, certify=False)
            if not m:
                return Falsified(maps, g, img, m)
    return NotFalsified(trials)
