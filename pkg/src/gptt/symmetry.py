"""Finite group actions, equivariant self-dualities and symmetric teleportation.

A group is stored as explicit matrices with a composition table.  Given a
transitive action and an equivariant order isomorphism ``omega_hat : A* -> A``
the effects ``f_g = unhat((1/|G|) omega_hat^-1 g)`` form an observable on
``A (x) A``, and every outcome teleports with correction ``g^-1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .composite import Composite, tensor, tmax, tmin, unhat
from .cone import ConeMap, is_order_iso
from .errors import NotEquivariant, NotTransitive, UnsupportedModel
from .scalar import inverse, nullspace, rank, solve
from .state_space import Effect, Observable, StateSpace, map_norm, vertex_permutation_map
from .teleport import Deterministic, verify_deterministic

__all__ = [
    "GroupAction",
    "SelfDualityWitness",
    "SymmetricProtocol",
    "group_closure",
    "cyclic_action",
    "invariant_state",
    "fixed_subspace_dim",
    "check_equivariant",
    "equivariant_subspace",
    "equivariant_self_duality",
    "synthesize_theorem3",
]


@dataclass(frozen=True, eq=False)
class GroupAction:
    space: StateSpace
    elements: tuple
    labels: tuple
    table: tuple
    identity: int = 0

    def __len__(self):
        return len(self.elements)

    @property
    def order(self) -> int:
        return len(self.elements)

    def inverse_index(self, i: int) -> int:
        return next(j for j in range(self.order) if self.table[i][j] == self.identity)

    def dual(self, i: int) -> np.ndarray:
        """Matrix of ``(g a)(x) = a(g^-1 x)`` on ``A*``: the inverse transpose."""
        return inverse(self.elements[i], self.space.backend).T

    def orbit(self, v) -> list:
        return [g @ v for g in self.elements]

    def check(self) -> list:
        """Problems with the action (empty when it is a genuine group of symmetries)."""
        out = []
        b = self.space.backend
        s = self.space
        n = self.order
        for i, g in enumerate(self.elements):
            if not b.equal(s.unit @ g, s.unit):
                out.append(f"{self.labels[i]} does not preserve the unit")
            if not is_order_iso(ConeMap(g, s, s)):
                out.append(f"{self.labels[i]} is not an order automorphism")
        for i, j in itertools.product(range(n), repeat=2):
            k = self.table[i][j]
            if not b.equal(self.elements[i] @ self.elements[j], self.elements[k]):
                out.append(f"table entry {i}*{j} is wrong")
        for i, j, k in itertools.product(range(n), repeat=3):
            if self.table[self.table[i][j]][k] != self.table[i][self.table[j][k]]:
                out.append("table is not associative")
                return out
        return out


def _find(mats, m, b):
    for i, x in enumerate(mats):
        if b.equal(x, m):
            return i
    return None


def group_closure(space: StateSpace, generators, labels=None, limit: int = 512) -> GroupAction:
    """Close a set of matrices under composition."""
    b = space.backend
    gens = [np.asarray(g) for g in generators]
    elems = [b.eye(space.dim)]
    names = ["e"]
    frontier = [0]
    gen_names = list(labels) if labels else [f"s{i}" for i in range(len(gens))]
    while frontier:
        nxt = []
        for i in frontier:
            for g, gn in zip(gens, gen_names):
                m = g @ elems[i]
                if _find(elems, m, b) is None:
                    elems.append(m)
                    names.append(gn if names[i] == "e" else f"{gn}{names[i]}")
                    nxt.append(len(elems) - 1)
                    if len(elems) > limit:
                        raise UnsupportedModel("group closure did not terminate")
        frontier = nxt
    table = tuple(
        tuple(_find(elems, x @ y, b) for y in elems) for x in elems
    )
    return GroupAction(space, tuple(elems), tuple(names), table, 0)


def cyclic_action(space: StateSpace) -> GroupAction:
    """The cyclic group shifting the vertices ``v_i -> v_(i+1)``.

    Works for ``polygon(n)`` (rotation by ``2 pi / n``) and ``classical(n)``
    (cyclic coordinate shift) in their canonical coordinates.
    """
    b = space.backend
    n = len(space.omega_vertices)
    g = vertex_permutation_map(space, [(i + 1) % n for i in range(n)])
    if g is None:
        raise UnsupportedModel(f"{space.name} has no cyclic vertex symmetry in these coordinates")
    elems = [b.eye(space.dim)]
    for _ in range(n - 1):
        elems.append(g @ elems[-1])
    if not b.equal(g @ elems[-1], elems[0]):
        raise UnsupportedModel("vertex shift does not have order n")
    labels = tuple(f"g^{k}" for k in range(n))
    table = tuple(tuple((i + j) % n for j in range(n)) for i in range(n))
    return GroupAction(space, tuple(elems), labels, table, 0)


def _is_transitive(a: GroupAction) -> bool:
    s = a.space
    V = s.omega_vertices
    b = s.backend
    v0 = V[0]
    return all(any(b.equal(g @ v0, w) for g in a.elements) for w in V)


def fixed_subspace_dim(a: GroupAction) -> int:
    """Dimension of ``{x : g x = x for all g}``."""
    b = a.space.backend
    I = b.eye(a.space.dim)
    stacked = np.concatenate([g - I for g in a.elements], axis=0)
    return a.space.dim - rank(stacked, b)


def invariant_state(a: GroupAction) -> np.ndarray:
    """The unique invariant normalized state: the orbit average of any vertex."""
    if not _is_transitive(a):
        raise NotTransitive("the action is not transitive on the vertices")
    if fixed_subspace_dim(a) != 1:
        raise NotTransitive("the fixed subspace meets the states in more than one point")
    v0 = a.space.omega_vertices[0]
    total = sum((g @ v0 for g in a.elements[1:]), a.elements[0] @ v0)
    return total / a.order


@dataclass(frozen=True, eq=False)
class SelfDualityWitness:
    """An order isomorphism ``A* -> A``."""

    omega_hat: ConeMap
    normalized: bool = True

    @property
    def matrix(self) -> np.ndarray:
        return self.omega_hat.matrix


def check_equivariant(w, a: GroupAction) -> bool:
    """``g omega_hat = omega_hat g*`` for every element."""
    W = w.matrix if hasattr(w, "matrix") else np.asarray(w)
    b = a.space.backend
    return all(b.equal(g @ W, W @ a.dual(i)) for i, g in enumerate(a.elements))


def equivariant_subspace(a: GroupAction) -> list:
    """Basis of the matrices ``W`` with ``g W = W g*`` for all ``g``."""
    s = a.space
    b = s.backend
    d = s.dim
    I = b.eye(d)
    # vec(g W - W h) = (g (x) I - I (x) h^T) vec(W) with row-major vec
    blocks = [np.kron(g, I) - np.kron(I, a.dual(i).T) for i, g in enumerate(a.elements)]
    basis = nullspace(np.concatenate(blocks, axis=0), b)
    return [row.reshape(d, d) for row in basis]


def _candidates(a: GroupAction, basis, trials, seed):
    b = a.space.backend
    # an order isomorphism sends extreme rays to extreme rays, so first try
    # the maps taking the first dual generator to each vertex
    d0 = a.space.cone.facets[0]
    M = np.array([E @ d0 for E in basis]).T
    for v in a.space.omega_vertices:
        c = solve(M, v, b)
        if c is not None:
            yield sum((ci * E for ci, E in zip(c, basis)), b.zeros(basis[0].shape))
    yield from basis
    for x, y in itertools.combinations(basis, 2):
        yield x + y
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        c = rng.integers(-8, 9, size=len(basis))
        yield sum((b.scalar(int(ci)) * E for ci, E in zip(c, basis)), b.zeros(basis[0].shape))


def equivariant_self_duality(
    space: StateSpace, a: GroupAction, trials: int = 256, seed: int = 0
) -> SelfDualityWitness | None:
    """Search the equivariant maps for an order isomorphism ``A* -> A``.

    Candidates are the equivariant maps sending the first dual generator to
    a vertex, the basis of the equivariant subspace, pairwise sums of basis
    elements, then seeded random integer combinations.  The first hit is scaled so ``unit(W u) = 1``.
    """
    b = space.backend
    basis = equivariant_subspace(a)
    if not basis:
        return None
    dual = space.dual()
    for W in _candidates(a, basis, trials, seed):
        if b.all_zero(W):
            continue
        for sign in (1, -1):
            m = ConeMap(W * sign, dual, space)
            if is_order_iso(m):
                t = space.unit @ (m.matrix @ space.unit)
                return SelfDualityWitness(ConeMap(m.matrix / t, dual, space), True)
    return None


@dataclass(frozen=True, eq=False)
class SymmetricProtocol:
    """Output of :func:`synthesize_theorem3`."""

    observable: Observable
    state: object
    host: Composite
    corrections: tuple
    invariant: np.ndarray
    result: Deterministic


def synthesize_theorem3(space: StateSpace, a: GroupAction, w: SelfDualityWitness) -> SymmetricProtocol:
    """Deterministic teleportation on ``A (x)min (A (x)max A)``.

    Outcome ``g`` has ``f_hat_g = (1/|G|) omega_hat^-1 g``; the channel is
    ``omega = unhat(omega_hat)``.  The construction's side conditions are all
    re-checked: the effects sum to ``u (x) u``, ``omega_hat(u)`` is the
    invariant state and every outcome classifies as Strong.
    """
    b = space.backend
    if not check_equivariant(w, a):
        raise NotEquivariant("witness does not intertwine the action with its dual")
    omega_o = invariant_state(a)
    W = w.matrix
    dual = space.dual()
    if not is_order_iso(ConeMap(W, dual, space)):
        raise NotEquivariant("witness is not an order isomorphism")
    if not b.is_zero(map_norm(ConeMap(W, dual, space), "dual-to-state") - 1):
        raise NotEquivariant("witness is not normalized")
    if not b.equal(W @ space.unit, omega_o):
        raise NotEquivariant("witness does not send the unit to the invariant state")
    phi = inverse(W, b)
    pair = tensor(tmin(space, space))
    channel_host = tensor(tmax(space, space))
    n = a.order
    effects, labels = [], []
    for g, label in zip(a.elements, a.labels):
        f = unhat(phi @ g / n, pair, (0,), "effect")
        effects.append(Effect(pair, f.tensor))
        labels.append(label)
    total = sum((e.functional for e in effects[1:]), effects[0].functional)
    if not b.equal(total, pair.unit):
        raise NotEquivariant("effects do not sum to the unit")
    E = Observable(pair, effects, labels)
    omega = unhat(W, channel_host, (0,), "state")
    eta = ConeMap(b.eye(space.dim), space, space)
    result = verify_deterministic(E, omega, eta)
    if not result:
        raise NotEquivariant(f"outcome {result.index} is not a strong protocol")
    host = tensor(tmin(space, tmax(space, space)))
    return SymmetricProtocol(E, omega, host, result.corrections, omega_o, result)
