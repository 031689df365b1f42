import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gptt import (
    ConeMap,
    classify,
    cyclic_action,
    equivariant_self_duality,
    invariant_state,
    is_order_iso,
    make_model,
    remote_evaluate,
    synthesize_theorem3,
)
from gptt.errors import NotTransitive
from gptt.scalar import RATIONAL as R
from gptt.scalar import inverse
from gptt.symmetry import (
    SelfDualityWitness,
    check_equivariant,
    fixed_subspace_dim,
    group_closure,
)
from gptt.teleport import ProtocolCandidate

from conftest import PHI, ROT, W_PR, float_model, random_state


def test_square_action(SQ):
    a = cyclic_action(SQ)
    assert a.order == 4
    assert R.equal(a.elements[1], ROT)
    assert not a.check()


def test_classical_action(C3):
    a = cyclic_action(C3)
    assert a.order == 3
    for g in a.elements:
        assert sorted(map(tuple, g.tolist())) == sorted(map(tuple, R.eye(3).tolist()))


def test_pentagon_action_closes():
    P = float_model("polygon(5)")
    a = cyclic_action(P)
    assert a.order == 5
    assert np.allclose(np.linalg.matrix_power(np.asarray(a.elements[1], float), 5), np.eye(3), atol=1e-9)


def test_elements_permute_vertices():
    for name in ["polygon(4)", "classical(3)", "classical(4)"]:
        s = make_model(name)
        a = cyclic_action(s)
        V = [tuple(v) for v in s.omega_vertices]
        for g in a.elements:
            assert sorted(tuple(g @ np.array(v, dtype=object)) for v in V) == sorted(V)
            assert R.equal(s.unit @ g, s.unit)
            assert is_order_iso(ConeMap(g, s, s))


def test_invariant_states(SQ):
    assert R.equal(invariant_state(cyclic_action(SQ)), R.array([0, 0, 1]))
    for n in (2, 3, 4):
        c = make_model(f"classical({n})")
        assert R.equal(invariant_state(cyclic_action(c)), R.array([R.scalar(1) / n] * n))
    P = float_model("polygon(5)")
    assert np.allclose(invariant_state(cyclic_action(P)).astype(float), [0, 0, 1], atol=1e-9)


def test_invariant_state_needs_transitivity(SQ):
    half = group_closure(SQ, [ROT @ ROT])
    with pytest.raises(NotTransitive):
        invariant_state(half)


def test_fixed_subspace_is_a_line(SQ):
    assert fixed_subspace_dim(cyclic_action(SQ)) == 1
    for n in (2, 3, 5):
        assert fixed_subspace_dim(cyclic_action(make_model(f"classical({n})"))) == 1


def test_equivariance_examples(SQ):
    a = cyclic_action(SQ)
    assert check_equivariant(W_PR, a)
    swap = R.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]])
    dihedral = group_closure(SQ, [ROT, swap])
    assert dihedral.order == 8
    assert not check_equivariant(W_PR, dihedral)
    trivial = group_closure(SQ, [])
    assert check_equivariant(R.array([[5, 1, 0], [2, 3, 0], [0, 0, 1]]), trivial)


def test_witness_search(SQ):
    w = equivariant_self_duality(SQ, cyclic_action(SQ))
    assert R.equal(w.matrix, W_PR)
    assert R.equal(inverse(w.matrix, R), PHI)
    # PHI sends each vertex to a dual generator
    duals = {tuple(h) for h in SQ.cone.dual().generators}
    assert all(tuple(PHI @ v) in duals for v in SQ.omega_vertices)
    for n in (2, 3, 4):
        c = make_model(f"classical({n})")
        w = equivariant_self_duality(c, cyclic_action(c))
        assert R.equal(w.matrix, R.eye(n) / n)


def test_pentagon_witness_is_polar_scaling():
    P = float_model("polygon(5)")
    w = equivariant_self_duality(P, cyclic_action(P))
    assert w is not None
    assert is_order_iso(ConeMap(w.matrix, P.dual(), P))
    # the dual of an odd regular polygon is already a scaled copy, so no rotation is needed
    c = np.cos(np.pi / 5)
    assert np.allclose(np.asarray(w.matrix, float), np.diag([c, c, 1]), atol=1e-9)


def test_square_synthesis(SQ):
    a = cyclic_action(SQ)
    out = synthesize_theorem3(SQ, a, equivariant_self_duality(SQ, a))
    assert len(out.observable) == 4
    total = sum((e.functional for e in out.observable.effects[1:]), out.observable.effects[0].functional)
    assert R.equal(total, out.observable.space.unit)
    for g, e, tau in zip(a.elements, out.observable.effects, out.corrections):
        f_hat = out.observable.space.element(e.functional, (0,), "effect").matrix.T
        assert R.equal(f_hat, PHI @ g / 4)
        assert R.equal(W_PR @ f_hat, g / 4)
        assert R.equal(tau.matrix, inverse(g, R))


def test_classical_one_time_pad(C3):
    a = cyclic_action(C3)
    out = synthesize_theorem3(C3, a, equivariant_self_duality(C3, a))
    assert len(out.observable) == 3
    for i, tau in enumerate(out.corrections):
        assert R.equal(tau.matrix, a.elements[a.inverse_index(i)])


@pytest.mark.parametrize("n", [5, 6, 7, 8])
def test_float_polygons(n):
    P = float_model(f"polygon({n})")
    a = cyclic_action(P)
    out = synthesize_theorem3(P, a, equivariant_self_duality(P, a))
    rng = np.random.default_rng(n)
    for _ in range(5):
        alpha = random_state(P, rng)
        for e, g, tau in zip(out.observable.effects, a.elements, out.corrections):
            f = out.observable.space.element(e.functional, (0,), "effect")
            cond = remote_evaluate(alpha, f, out.state)
            p = P.unit @ cond
            assert abs(p - 1 / n) < 1e-9
            assert np.allclose(tau.matrix @ (cond / p), alpha, atol=1e-9)


def test_every_outcome_is_strong_with_inverse_correction(SQ):
    a = cyclic_action(SQ)
    w = equivariant_self_duality(SQ, a)
    out = synthesize_theorem3(SQ, a, w)
    for i, e in enumerate(out.observable.effects):
        f = out.observable.space.element(e.functional, (0,), "effect")
        v = classify(ProtocolCandidate(f, out.state, ConeMap(R.eye(3), SQ, SQ)))
        assert v.kind == "Strong" and v.scale == R.scalar("1/4")
        assert R.equal(v.correction.matrix, a.elements[a.inverse_index(i)])


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_synthesized_protocol_teleports_random_states(seed):
    SQ = make_model("polygon(4)")
    a = cyclic_action(SQ)
    out = synthesize_theorem3(SQ, a, SelfDualityWitness(ConeMap(W_PR, SQ.dual(), SQ)))
    alpha = random_state(SQ, np.random.default_rng(seed))
    for e, g, tau in zip(out.observable.effects, a.elements, out.corrections):
        f = out.observable.space.element(e.functional, (0,), "effect")
        cond = remote_evaluate(alpha, f, out.state)
        assert SQ.unit @ cond == R.scalar("1/4")
        assert R.equal(cond * 4, g @ alpha)
        assert R.equal(tau.matrix @ (cond * 4), alpha)
