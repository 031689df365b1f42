"""Conclusive and strong teleportation: remote evaluation, classification,
strengthening, compressions and deterministic protocols.

A candidate protocol is an effect ``f`` on ``A1 A2``, a state ``omega`` on
``A2 B`` and a reference isomorphism ``eta : A1 -> B``.  Everything is
decided from the single map ``mu = hat(omega) @ hat(f) : A1 -> B``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .composite import (
    BipartiteElement,
    Composite,
    conditional,
    kron,
    tensor,
    tmax,
    tmin,
    unhat,
)
from .cone import ConeMap, is_order_iso
from .errors import DimensionMismatch, NotConclusive, NotPositive, RangeMismatch, Singular
from .scalar import inverse, rank
from .state_space import Observable, StateSpace

__all__ = [
    "ProtocolCandidate",
    "ProtocolVerdict",
    "Compression",
    "Deterministic",
    "Fails",
    "remote_evaluate",
    "classify",
    "strengthen",
    "compression_of",
    "protocol_from_compression",
    "verify_deterministic",
    "is_isomorphism",
]


def is_isomorphism(m: ConeMap) -> bool:
    """Order isomorphism that also carries the domain unit to the codomain unit."""
    if not is_order_iso(m):
        return False
    b = m.backend
    return b.equal(m.codomain.unit @ m.matrix, m.domain.unit)


@dataclass(frozen=True, eq=False)
class ProtocolCandidate:
    f: BipartiteElement
    omega: BipartiteElement
    eta: ConeMap
    host: StateSpace | None = None

    def __post_init__(self):
        if self.f.kind != "effect" or self.omega.kind != "state":
            raise ValueError("need an effect on A1A2 and a state on A2B")
        if self.f.matrix.shape[1] != self.omega.matrix.shape[0]:
            raise DimensionMismatch("the effect and the state do not share A2")

    @classmethod
    def from_maps(cls, f_hat, omega_hat, A1, A2, B, eta=None, f_host=None, omega_host=None):
        """Build a candidate from the two operators ``f_hat : A1 -> A2*`` and ``omega_hat : A2* -> B``.

        By default ``f`` lives on ``A1 (x)min A2`` and ``omega`` on ``A2 (x)max B``,
        the two halves of the host ``A1 (x)min (A2 (x)max B)``.
        """
        b = A1.backend
        f_hat = _mat(f_hat, b)
        omega_hat = _mat(omega_hat, b)
        f_host = f_host or tensor(tmin(A1, A2))
        omega_host = omega_host or tensor(tmax(A2, B))
        if eta is None:
            eta = ConeMap(b.eye(A1.dim), A1, B)
        elif not isinstance(eta, ConeMap):
            eta = ConeMap(_mat(eta, b), A1, B)
        f = unhat(f_hat, f_host, (0,), "effect")
        w = unhat(omega_hat, omega_host, (0,), "state")
        return cls(f, w, eta)

    @property
    def A1(self) -> StateSpace:
        return self.f.side(0)

    @property
    def A2(self) -> StateSpace:
        return self.f.side(1)

    @property
    def B(self) -> StateSpace:
        return self.omega.side(1)

    @property
    def f_hat(self) -> np.ndarray:
        return self.f.matrix.T

    @property
    def omega_hat(self) -> np.ndarray:
        return self.omega.matrix.T

    @property
    def mu(self) -> ConeMap:
        return ConeMap(self.omega_hat @ self.f_hat, self.A1, self.B)

    def validate(self) -> list:
        """Problems with the candidate (empty when valid)."""
        out = []
        if not is_isomorphism(self.eta):
            out.append("eta is not a unit-preserving order isomorphism")
        if not self.f.is_valid():
            out.append("f is not an effect of its host")
        if not self.omega.is_valid():
            out.append("omega is not a positive element of its host")
        return out


@dataclass(frozen=True, eq=False)
class ProtocolVerdict:
    """Classification result.

    ``scale`` is ``s`` for Conclusive and ``k`` for Strong.  ``probabilities``
    lists the chance of ``f`` on each vertex of ``A1`` and ``per_state_success``
    the factor ``t`` with ``tau(normalize(mu(a))) = t * eta(a)``.
    """

    kind: str
    mu: ConeMap
    correction: ConeMap | None = None
    scale: object = None
    per_state_success: tuple = ()
    probabilities: tuple = ()
    reason: str = ""

    def __bool__(self):
        return self.kind != "NotTP"

    @property
    def is_strong(self) -> bool:
        return self.kind == "Strong"


def _mat(m, b):
    if isinstance(m, ConeMap):
        return m.matrix
    if isinstance(m, np.ndarray) and (m.dtype == object) == b.exact:
        return m
    return b.array(m)


def remote_evaluate(alpha, f: BipartiteElement, omega: BipartiteElement, check: bool = False):
    """Conditional state on ``B`` of ``alpha (x) omega`` given ``f``: ``omega_hat(f_hat(alpha))``.

    With ``check`` the same vector is also computed by conditioning the
    tripartite product state directly and the two are compared.
    """
    b = omega.host.backend
    a = _vec(alpha, b)
    out = omega.matrix.T @ (f.matrix.T @ a)
    if check:
        other = remote_evaluate_direct(a, f, omega)
        if not b.equal(out, other):
            raise AssertionError("remote evaluation disagrees with direct conditioning")
    return out


def remote_evaluate_direct(alpha, f: BipartiteElement, omega: BipartiteElement):
    """Condition ``alpha (x) omega`` on ``f`` through the tripartite composite."""
    A1 = f.side(0)
    host = _triple_host(A1, omega.host)
    J = tuple(range(1 + len(omega.J)))
    x = host.element(kron(_vec(alpha, host.backend), omega.tensor), J, "state")
    return conditional(x, f.tensor)


def _triple_host(A1, omega_host):
    return tensor(tmin(A1, omega_host))


def _vec(x, b):
    if isinstance(x, np.ndarray) and (x.dtype == object) == b.exact:
        return x
    return b.array(x)


def classify(p: ProtocolCandidate) -> ProtocolVerdict:
    """Decide NotTP / Conclusive / Strong for a candidate protocol."""
    mu = p.mu
    A1, B = p.A1, p.B
    b = A1.backend
    M = mu.matrix
    V = A1.omega_vertices
    probs = tuple(B.unit @ (M @ v) for v in V)
    if A1.dim != B.dim or rank(M, b) < A1.dim:
        return ProtocolVerdict("NotTP", mu, probabilities=probs, reason="mu is not invertible")
    if not is_order_iso(mu):
        return ProtocolVerdict("NotTP", mu, probabilities=probs, reason="mu is not an order isomorphism")
    M_inv = inverse(M, b)
    eta = p.eta.matrix
    k = probs[0]
    if all(b.equal(x, k) for x in probs):
        scaled = ConeMap(M / k, A1, B)
        if is_isomorphism(scaled):
            tau = ConeMap(eta @ (M_inv * k), B, B)
            ones = tuple(b.scalar(1) for _ in V)
            return ProtocolVerdict("Strong", mu, tau, k, ones, probs)
    norm_inv = max(A1.unit @ (M_inv @ w) for w in B.omega_vertices)
    s = 1 / norm_inv
    tau = ConeMap(eta @ M_inv * s, B, B)
    t = tuple(s / x for x in probs)
    return ProtocolVerdict("Conclusive", mu, tau, s, t, probs)


def strengthen(p: ProtocolCandidate, v: ProtocolVerdict | None = None) -> BipartiteElement:
    """Fold the correction into the channel state: ``omega_hat' = tau omega_hat / ||tau omega_hat||``."""
    v = v or classify(p)
    if not v:
        raise NotConclusive("only conclusive protocols can be strengthened")
    T = v.correction.matrix @ p.omega_hat
    A2 = p.A2
    norm = p.B.unit @ (T @ A2.unit)
    return unhat(T / norm, p.omega.host, p.omega.J, "state")


@dataclass(frozen=True, eq=False)
class Compression:
    """A positive idempotent map on ``A2*``."""

    map: ConeMap
    range_dim: int

    @property
    def matrix(self) -> np.ndarray:
        return self.map.matrix

    def is_idempotent(self) -> bool:
        P = self.matrix
        return self.map.backend.equal(P @ P, P)


def compression_of(p: ProtocolCandidate, v: ProtocolVerdict | None = None) -> Compression:
    """``(1/scale) f_hat eta^-1 tau omega_hat``, the compression of ``A2*`` onto ``Ran(f_hat)``."""
    v = v or classify(p)
    if not v:
        raise NotConclusive("no compression for a protocol that is not conclusive")
    b = p.A1.backend
    eta_inv = inverse(p.eta.matrix, b)
    P = p.f_hat @ eta_inv @ v.correction.matrix @ p.omega_hat / v.scale
    dual = p.A2.dual()
    return Compression(ConeMap(P, dual, dual), rank(P, b))


def _left_inverse(F, b):
    """``(F^T F)^-1 F^T`` for a matrix with independent columns."""
    try:
        return inverse(F.T @ F, b) @ F.T
    except Singular:
        raise RangeMismatch("f_hat is not injective") from None


def protocol_from_compression(
    f: BipartiteElement, P: Compression, eta: ConeMap, omega_host: Composite | None = None
) -> BipartiteElement:
    """Channel state making ``f`` a strong, correction-free protocol through ``P``."""
    b = f.host.backend
    A1, A2 = f.side(0), f.side(1)
    F = f.matrix.T
    Pm = P.matrix
    r = rank(F, b)
    if not (r == rank(Pm, b) == rank(np.concatenate([F, Pm], axis=1), b)):
        raise RangeMismatch("the range of f_hat differs from the range of the compression")
    if r < A1.dim:
        raise RangeMismatch("f_hat is not injective")
    if not b.equal(Pm @ F, F):
        raise RangeMismatch("the compression does not fix the range of f_hat")
    L = _left_inverse(F, b)
    dual = A2.cone.dual()
    for g in A1.cone.generators:
        if not dual.contains(F @ g):
            raise NotPositive("f_hat is not positive")
    for h in A2.cone.facets:
        if not A1.cone.contains(L @ (Pm @ h)):
            raise NotPositive("f_hat is not an order isomorphism onto the compression range")
    alpha_o = L @ (Pm @ A2.unit)
    W = eta.matrix @ L @ Pm / (A1.unit @ alpha_o)
    host = omega_host or tensor(tmax(A2, eta.codomain))
    return unhat(W, host, (0,), "state")


@dataclass(frozen=True, eq=False)
class Deterministic:
    corrections: tuple
    verdicts: tuple

    def __bool__(self):
        return True


@dataclass(frozen=True, eq=False)
class Fails:
    index: int
    verdict: ProtocolVerdict

    def __bool__(self):
        return False


def verify_deterministic(E: Observable, omega: BipartiteElement, eta: ConeMap, J=(0,)):
    """Every outcome of ``E`` must give a strong protocol with the same channel ``omega``."""
    verdicts = []
    for i, e in enumerate(E.effects):
        fv = e.functional if hasattr(e, "functional") else e
        f = E.space.element(fv, J, "effect")
        v = classify(ProtocolCandidate(f, omega, eta))
        if not v.is_strong:
            return Fails(i, v)
        verdicts.append(v)
    return Deterministic(tuple(v.correction for v in verdicts), tuple(verdicts))

