"""Entanglement swapping on four-partite composites.

Leaves are ordered ``[A1, A2, B1, B2]``.  Alice holds ``A1 A2`` and measures
an effect ``f`` there; ``mu`` lives on ``A1 B1`` and ``omega`` on ``A2 B2``.
Conditioning on ``f`` pivots the pair into a state of ``B1 B2`` whose map
``B1* -> B2`` is ``omega_hat f_hat mu_hat^T``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .composite import (
    BipartiteElement,
    Composite,
    kron,
    partial_subsystem,
    tensor,
    tmin,
    unhat,
)
from .cone import ConeMap, Outside, is_order_iso
from .errors import DimensionMismatch, NotAChannel
from .scalar import inverse, rank

__all__ = [
    "SwapScenario",
    "pivot",
    "pivot_direct",
    "teleport_through",
    "transported",
    "effect_to_state",
    "NoWitnessFound",
    "NotRegularSwap",
    "audit_nonregularity",
    "SelfDualityClosure",
    "product_witness",
    "check_product_witness",
]


@dataclass(frozen=True, eq=False)
class SwapScenario:
    mu: BipartiteElement
    omega: BipartiteElement
    f: BipartiteElement

    def __post_init__(self):
        dA1, dB1 = self.mu.matrix.shape
        dA2, dB2 = self.omega.matrix.shape
        if self.f.matrix.shape != (dA1, dA2):
            raise DimensionMismatch("effect does not act on the A wings of mu and omega")

    @property
    def B1(self):
        return self.mu.side(1)

    @property
    def B2(self):
        return self.omega.side(1)

    def target_host(self) -> Composite:
        return tensor(tmin(self.B1, self.B2))

    def validate(self) -> list:
        out = []
        if not self.mu.is_valid():
            out.append("mu is not a state")
        if not self.omega.is_valid():
            out.append("omega is not a state")
        if not self.f.is_valid():
            out.append("f is not an effect")
        return out


def pivot(
    s: SwapScenario, host: Composite | None = None, J=(0,), check: bool = False
) -> BipartiteElement:
    """The conditional element of ``B1 B2``: its hat is ``omega_hat f_hat mu_hat^T``.

    ``J`` names the leaf of ``host`` holding ``B1``.  With ``check`` the
    result is compared against direct evaluation of the four-partite
    product on every product of ``B1``, ``B2`` facets.
    """
    M = s.omega.matrix.T @ s.f.matrix.T @ s.mu.matrix
    host = host or s.target_host()
    out = unhat(M, host, J, "state")
    if check:
        b = host.backend
        W = out.matrix
        for h1, h2 in itertools.product(s.B1.cone.facets, s.B2.cone.facets):
            if not b.is_zero(h1 @ W @ h2 - pivot_direct(s, kron(h1, h2))):
                raise AssertionError("pivot disagrees with the four-partite evaluation")
    return out


def pivot_direct(s: SwapScenario, g) -> object:
    """``(f (x) g)(mu (x) omega)`` with the wings matched leaf by leaf."""
    m, w, f = s.mu.matrix, s.omega.matrix, s.f.matrix
    G = np.asarray(g).reshape(m.shape[1], w.shape[1])
    total = None
    for a1, a2 in itertools.product(range(m.shape[0]), range(w.shape[0])):
        if f[a1, a2] == 0:
            continue
        term = f[a1, a2] * (m[a1] @ G @ w[a2])
        total = term if total is None else total + term
    return 0 if total is None else total


def transported(mu: BipartiteElement, eta: ConeMap, host: Composite) -> BipartiteElement:
    """``mu`` with its first wing carried by ``eta`` into the second slot of ``host``.

    The element of ``B1 B2`` whose ``B1`` wing is ``mu``'s second wing and
    whose ``B2`` wing is ``eta`` applied to ``mu``'s first wing.
    """
    return unhat(eta.matrix @ mu.matrix, host, (0,), "state")


def teleport_through(s: SwapScenario, eta: ConeMap, host: Composite | None = None):
    """Normalized pivoted state and the outcome probability.

    Requires ``omega_hat f_hat = k eta`` for some ``k > 0``; the result is then
    exactly :func:`transported` applied to ``mu``.
    """
    b = s.mu.host.backend
    C = s.omega.matrix.T @ s.f.matrix.T
    E = eta.matrix
    i, j = next(((i, j) for i in range(E.shape[0]) for j in range(E.shape[1]) if not b.is_zero(E[i, j])))
    k = C[i, j] / E[i, j]
    if b.sign(k) <= 0 or not b.equal(C, E * k):
        raise NotAChannel("omega_hat f_hat is not a positive multiple of eta")
    out = pivot(s, host)
    p = out.host.unit @ out.tensor
    if b.is_zero(p):
        raise NotAChannel("the outcome has probability zero")
    return BipartiteElement(out.host, out.J, out.tensor / p, "state"), p


def effect_to_state(f: BipartiteElement, w1, w2, host: Composite | None = None) -> BipartiteElement:
    """Turn an effect on ``A1 A2`` into an element of ``B1 B2`` through two self-dualities.

    ``w1 : A1* -> B1`` and ``w2 : A2* -> B2``; the result's hat is
    ``w2 f_hat w1^T``.  Injectivity of ``f -> result`` is checked on a basis.
    """
    W1 = w1.matrix if hasattr(w1, "matrix") else np.asarray(w1)
    W2 = w2.matrix if hasattr(w2, "matrix") else np.asarray(w2)
    b = f.host.backend
    F = f.matrix
    if F.shape != (W1.shape[1], W2.shape[1]):
        raise DimensionMismatch("witnesses do not match the effect")
    if rank(np.kron(W1, W2), b) < W1.shape[1] * W2.shape[1]:
        raise DimensionMismatch("effect-to-state map is not injective")
    if host is None:
        B1 = w1.omega_hat.codomain if hasattr(w1, "omega_hat") else f.side(0)
        B2 = w2.omega_hat.codomain if hasattr(w2, "omega_hat") else f.side(1)
        host = tensor(tmin(B1, B2))
    return unhat(W2 @ F.T @ W1.T, host, (0,), "state")


@dataclass(frozen=True)
class SelfDualityClosure:
    """Outcome of testing a product witness ``eta_A (x) eta_B`` on a bipartite host.

    ``order_iso``: the witness is an order isomorphism ``host* -> host``.
    ``inverse_positive``: its inverse is a positive bipartite form, i.e. an
    unnormalized effect on two copies of the host.  ``image_in_max`` records
    whether the image at least lands in the host cone.
    """

    order_iso: bool
    inverse_positive: bool
    image_in_host: bool
    reason: str = ""

    def __bool__(self):
        return self.order_iso and self.inverse_positive


def product_witness(w_a, w_b) -> np.ndarray:
    """``eta_A (x) eta_B`` as a matrix on Kronecker coordinates."""
    A = w_a.matrix if hasattr(w_a, "matrix") else np.asarray(w_a)
    B = w_b.matrix if hasattr(w_b, "matrix") else np.asarray(w_b)
    return np.kron(A, B)


def check_product_witness(w_a, w_b, host: Composite) -> SelfDualityClosure:
    """Test the product of two self-duality witnesses on ``host``."""
    b = host.backend
    M = product_witness(w_a, w_b)
    if M.shape != (host.dim, host.dim) or rank(M, b) < host.dim:
        return SelfDualityClosure(False, False, False, "product witness is not invertible")
    dual = host.cone.dual()
    image_ok = all(host.cone.contains(M @ h) for h in dual.generators)
    iso = image_ok and is_order_iso(ConeMap(M, host.dual(), host))
    Minv = inverse(M, b)
    inv_pos = all(dual.contains(Minv @ g) for g in host.cone.generators)
    reasons = []
    if not image_ok:
        reasons.append("dual generators leave the host cone")
    elif not iso:
        reasons.append("the inverse is not positive")
    if not inv_pos:
        reasons.append("the inverse is not a positive bipartite form")
    return SelfDualityClosure(iso, inv_pos, image_ok, "; ".join(reasons))


@dataclass(frozen=True)
class NoWitnessFound:
    reason: str

    def __bool__(self):
        return True


@dataclass(frozen=True, eq=False)
class NotRegularSwap:
    """A pivoted state outside the ``B1 B2`` partial subsystem."""

    pivoted: np.ndarray
    certificate: Outside
    space: object
    mu: np.ndarray
    omega: np.ndarray
    f: np.ndarray

    def __bool__(self):
        return False

    def verify(self) -> bool:
        return self.certificate.verify(self.space.cone, self.pivoted)


def audit_nonregularity(c: Composite, pairing=((0, 2), (1, 3))):
    """Look for a swap that a regular composite could not produce.

    An entangled state ``mu`` of the ``A1 B1`` partial subsystem is pivoted
    through a teleportation channel on ``A1 A2 B2``.  A regular composite
    would keep the result inside the ``B1 B2`` partial subsystem; landing
    outside refutes regularity.  Failing to find the ingredients proves
    nothing and is reported as such.
    """
    if not isinstance(c, Composite) or c.n_leaves != 4:
        raise ValueError("audit needs a four-leaf composite")
    (a1, b1), (a2, b2) = pairing
    leaves = c.leaves
    b = c.backend
    A1, A2, B1, B2 = leaves[a1], leaves[a2], leaves[b1], leaves[b2]
    # partial subsystems list their leaves in increasing order
    S1 = partial_subsystem(c, (a1, b1))
    S2 = partial_subsystem(c, (a2, b2))
    A = partial_subsystem(c, (a1, a2))
    T = partial_subsystem(c, (b1, b2))
    side = lambda x, y: (0,) if x < y else (1,)  # noqa: E731

    sep = tensor(tmin(A1, B1))
    mu = None
    for g in S1.cone.generators:
        el = BipartiteElement(S1, side(a1, b1), g, "state")
        if not sep.cone.contains(_flat(el.matrix)):
            mu = el
            break
    if mu is None:
        return NoWitnessFound("the A1 B1 subsystem has no entangled generator")
    if A1.dim != B2.dim or not A1.cone.equals(B2.cone):
        return NoWitnessFound("A1 and B2 are not the same model")
    eta = ConeMap(b.eye(A1.dim), A1, B2)
    omega = None
    for g in S2.cone.generators:
        el = BipartiteElement(S2, side(a2, b2), g, "state")
        W = el.matrix.T
        if rank(W, b) == A2.dim and is_order_iso(ConeMap(W, A2.dual(), B2)):
            omega = el
            break
    if omega is None:
        return NoWitnessFound("the A2 B2 subsystem has no state whose hat is an order isomorphism")
    F_hat = inverse(omega.matrix.T, b) @ eta.matrix
    f = unhat(F_hat, A, side(a1, a2), "effect")
    top = max(f.tensor @ v for v in A.omega_vertices)
    f = BipartiteElement(A, f.J, f.tensor / top, "effect")
    if not f.is_valid():
        return NoWitnessFound("could not scale the channel effect into the effect cone")
    s = SwapScenario(mu, omega, f)
    out = pivot(s, host=T, J=side(b1, b2))
    m = T.cone.member(out.tensor)
    if m:
        return NoWitnessFound("the pivoted state stays inside the B1 B2 subsystem")
    return NotRegularSwap(out.tensor, m, T, mu.tensor, omega.tensor, f.tensor)


def _flat(W) -> np.ndarray:
    return np.asarray(W).ravel()
