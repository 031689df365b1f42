import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gptt import ConeMap, check_regular, is_order_iso, make_model, minimal_generators, tensor, tmax, tmin, unhat
from gptt.composite import bipartitions, kron, partial_subsystem
from gptt.scalar import RATIONAL as R
from gptt.state_space import map_norm
from gptt.swap import (
    NoWitnessFound,
    SwapScenario,
    audit_nonregularity,
    check_product_witness,
    effect_to_state,
    pivot,
    pivot_direct,
    teleport_through,
    transported,
)

from conftest import PHI, W_PR


def _scenario(A, mu_hat, om_hat, f_hat):
    mx = tensor(tmax(A, A))
    mn = tensor(tmin(A, A))
    return SwapScenario(unhat(mu_hat, mx), unhat(om_hat, mx), unhat(f_hat, mn, (0,), "effect"))


def test_pivot_pure_tensors(SQ):
    V = SQ.omega_vertices
    H = [h / 2 for h in SQ.cone.facets]
    mx, mn = tensor(tmax(SQ, SQ)), tensor(tmin(SQ, SQ))
    b1, g1, b2, g2 = V[0], V[1], V[2], V[3]
    a, b = H[0], H[1]
    s = SwapScenario(mx.element(kron(b1, g1)), mx.element(kron(b2, g2)), mn.element(kron(a, b), kind="effect"))
    out = pivot(s, check=True)
    assert R.equal(out.tensor, (a @ b1) * (b @ b2) * kron(g1, g2))


def test_square_chain_pivot(SQ, mn):
    s = _scenario(SQ, W_PR, W_PR, PHI / 4)
    out = pivot(s, check=True)
    M = ConeMap(out.matrix.T, SQ.dual(), SQ)
    assert map_norm(M, "dual-to-state") == R.scalar("1/4")
    assert not mn.cone.member(out.tensor * 4)


def test_teleport_through_examples(SQ, C2, mn):
    eta = ConeMap(R.eye(3), SQ, SQ)
    s = _scenario(SQ, W_PR, W_PR, PHI / 4)
    st_, p = teleport_through(s, eta)
    assert p == R.scalar("1/4")
    assert R.equal(st_.tensor, transported(s.mu, eta, st_.host).tensor)
    assert not mn.cone.member(st_.tensor)
    # a product state is carried over unchanged
    a, b = SQ.omega_vertices[0], SQ.omega_vertices[1]
    mx = tensor(tmax(SQ, SQ))
    s2 = SwapScenario(mx.element(kron(a, b)), s.omega, s.f)
    st2, p2 = teleport_through(s2, eta)
    assert p2 == R.scalar("1/4") and R.equal(st2.tensor, kron(b, a))
    # classical correlated bits through the classical bit protocol
    I = R.eye(2)
    s3 = _scenario(C2, I / 2, I / 2, I)
    st3, p3 = teleport_through(s3, ConeMap(I, C2, C2))
    assert p3 == R.scalar("1/2")
    assert R.equal(st3.tensor, s3.mu.tensor)


def test_effect_to_state_examples(SQ, C2, mn):
    pair = tensor(tmin(C2, C2))
    uu = pair.element(kron(C2.unit, C2.unit), kind="effect")
    x = effect_to_state(uu, R.eye(2), R.eye(2))
    assert x.host.unit @ x.tensor == 4
    f = unhat(PHI / 4, mn, (0,), "effect")
    y = effect_to_state(f, W_PR, W_PR)
    assert not mn.cone.member(y.tensor)
    assert mn.unit @ y.tensor <= 1
    z = effect_to_state(mn.element(R.zeros(9), kind="effect"), W_PR, W_PR)
    assert R.all_zero(z.tensor)


def test_audit_examples(SQ, C2):
    P = tmin(SQ, SQ)
    r = audit_nonregularity(tensor(tmax(P, P)))
    assert not r and r.verify()
    assert R.sign(r.certificate.functional @ r.pivoted) < 0
    Q = tmin(C2, C2)
    assert isinstance(audit_nonregularity(tensor(tmax(Q, Q))), NoWitnessFound)
    c = tensor(tmin(SQ, tmax(SQ, SQ), C2))
    assert isinstance(audit_nonregularity(c), NoWitnessFound)
    assert all(check_regular(c, p) for p in bipartitions(4))


def test_channel_from_synthesis_acts_as_identity(SQ):
    # omega_hat f_hat = (1/4) id, so the pivoted map is mu's own map scaled by 1/4
    eta = ConeMap(R.eye(3), SQ, SQ)
    for mu_hat in [W_PR, R.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]]) @ W_PR]:
        s = _scenario(SQ, mu_hat, W_PR, PHI / 4)
        out = pivot(s)
        assert R.equal(out.matrix, mu_hat / 4)
        assert R.equal(out.tensor * 4, transported(s.mu, eta, out.host).tensor)


def _random_element(space, rng, kind):
    if kind == "state":
        G = space.cone.generators
    else:
        G = space.cone.dual().generators
    w = rng.integers(0, 4, size=len(G))
    if not w.any():
        w[0] = 1
    return sum((int(x) * g for x, g in zip(w, G)), space.backend.zeros(space.dim))


@given(st.integers(0, 100_000), st.sampled_from(["classical(2)", "classical(3)", "polygon(4)"]))
@settings(max_examples=40, deadline=None)
def test_pivot_matches_direct_evaluation_on_facet_products(seed, name):
    A = make_model(name)
    rng = np.random.default_rng(seed)
    mx, mn = tensor(tmax(A, A)), tensor(tmin(A, A))
    s = SwapScenario(
        mx.element(_random_element(mx, rng, "state")),
        mx.element(_random_element(mx, rng, "state")),
        mn.element(_random_element(mn, rng, "effect"), kind="effect"),
    )
    W = pivot(s).matrix
    for h1, h2 in itertools.product(A.cone.facets, A.cone.facets):
        assert h1 @ W @ h2 == pivot_direct(s, kron(h1, h2))


def test_product_witness_closure(SQ, C2):
    I = R.eye(2)
    for host in [tensor(tmin(C2, C2)), tensor(tmax(C2, C2))]:
        assert check_product_witness(I, I, host)
    # squares: the product witness maps the dual of the min cone onto the max cone
    # and vice versa, so it is a self-duality of neither
    mn, mx = tensor(tmin(SQ, SQ)), tensor(tmax(SQ, SQ))
    r_min = check_product_witness(W_PR, W_PR, mn)
    r_max = check_product_witness(W_PR, W_PR, mx)
    assert not r_min and not r_max
    K = np.kron(W_PR, W_PR)
    assert is_order_iso(ConeMap(K, mn.dual(), mx))
    assert is_order_iso(ConeMap(K, mx.dual(), mn))
    # no order isomorphism can exist: the cones have different numbers of extreme rays
    assert len(mn.cone.dual().generators) == 24
    assert len(minimal_generators(mn.cone).generators) == 16
