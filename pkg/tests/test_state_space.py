import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gptt import ConeMap, is_order_iso, make_model, make_state_space, model_families, tensor, tmax, tmin, validate
from gptt.cone import minimal_generators
from gptt.errors import BackendMismatch, NotGenerating, UnitNotOne, UnknownModel
from gptt.scalar import RATIONAL as R
from gptt.scalar import inverse
from gptt.state_space import (
    Effect,
    format_model,
    map_norm,
    normalize,
    parse_model,
    vertex_automorphisms,
)

from conftest import ROT, W_PR, float_model, random_state

EXACT = ["classical(2)", "classical(3)", "polygon(3)", "polygon(4)", "hypercube(2)", "cross_polytope(3)"]


def test_square_model(SQ):
    s = make_state_space([[1, 0, 1], [0, 1, 1], [-1, 0, 1], [0, -1, 1]], [0, 0, 1], "SQ")
    assert s.cone.equals(SQ.cone)
    assert SQ.dim == 3 and len(SQ.omega_vertices) == 4


def test_classical_models():
    c3 = make_state_space(np.eye(3, dtype=int).tolist(), [1, 1, 1])
    assert c3.cone.equals(make_model("classical(3)").cone)
    bit = make_state_space([[1, 1], [-1, 1]], [0, 1])
    assert len(bit.omega_vertices) == 2


def test_construction_errors():
    with pytest.raises(UnitNotOne):
        make_state_space([[1, 0, 1], [0, 1, 2], [-1, 0, 1]], [0, 0, 1])
    with pytest.raises(NotGenerating):
        make_state_space([[1, 0, 1], [-1, 0, 1]], [0, 0, 1])
    with pytest.raises(UnknownModel):
        make_model("sphere(3)")
    with pytest.raises(BackendMismatch):
        make_model("polygon(5)")


def test_triangle_is_classical(C3):
    tri = make_model("polygon(3)")
    # the linear map carrying vertices to vertices is an order isomorphism
    V, E = tri.omega_vertices, C3.omega_vertices
    T = E.T @ inverse(V.T, R)
    assert is_order_iso(ConeMap(T, tri, C3))
    assert R.equal(C3.unit @ T, tri.unit)


def test_validate_examples(SQ):
    assert validate(SQ, [0, 0, 1], "state")
    e_side = R.array(["1/2", "1/2", "1/2"])
    assert validate(SQ, e_side, "effect")
    assert [e_side @ v for v in SQ.omega_vertices] == [1, 1, 0, 0]
    assert validate(SQ, [e_side, SQ.unit - e_side], "observable")
    bad = validate(SQ, [2, 0, 1], "state")
    assert not bad and bad.certificate.verify(SQ.cone, R.array([2, 0, 1]))
    assert not validate(SQ, [0, 0, 2], "state")
    assert not validate(SQ, R.array([1, 1, 1]), "effect")


def test_normalize_examples(SQ):
    assert R.equal(normalize(SQ, [2, 0, 2]), R.array([1, 0, 1]))
    assert R.all_zero(normalize(SQ, [0, 0, 0]))
    assert R.equal(normalize(SQ, [0, 0, 5]), R.array([0, 0, 1]))


def test_map_norm_examples(SQ):
    assert map_norm(ConeMap(R.eye(3), SQ, SQ)) == 1
    assert map_norm(ConeMap(W_PR, SQ.dual(), SQ), "dual-to-state") == 1
    assert map_norm(ConeMap(ROT / 4, SQ, SQ)) == R.scalar("1/4")


@pytest.mark.parametrize("name", EXACT)
def test_vertices_and_dual_generators_validate(name):
    s = make_model(name)
    for v in s.omega_vertices:
        assert validate(s, v, "state")
    for h in s.cone.facets:
        top = max(h @ v for v in s.omega_vertices)
        assert validate(s, h / top, "effect")


@pytest.mark.parametrize("name", EXACT)
def test_model_text_round_trip(name):
    s = make_model(name)
    text = format_model(s)
    back = parse_model(text)
    assert format_model(back) == text
    assert back.cone.equals(s.cone)


def test_model_families_lists_four():
    assert set(model_families()) == {"classical", "polygon", "hypercube", "cross_polytope"}


@given(st.integers(0, 10_000), st.sampled_from(["polygon(4)", "classical(3)", "hypercube(2)"]))
@settings(max_examples=40, deadline=None)
def test_normalize_is_idempotent(seed, name):
    s = make_model(name)
    rng = np.random.default_rng(seed)
    a = random_state(s, rng) * int(rng.integers(1, 7))
    n = normalize(s, a)
    assert s.unit @ n == 1
    assert R.equal(normalize(s, n), n)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_map_norm_is_submultiplicative(seed):
    s = make_model("polygon(4)")
    autos = vertex_automorphisms(s)
    rng = np.random.default_rng(seed)

    def rand_map():
        g = autos[int(rng.integers(len(autos)))]
        w = R.scalar(int(rng.integers(1, 5))) / 4
        v = s.omega_vertices[int(rng.integers(4))]
        e = s.cone.facets[int(rng.integers(4))] / 2
        return ConeMap(w * g + np.multiply.outer(v, e) * int(rng.integers(0, 3)), s, s)

    m1, m2 = rand_map(), rand_map()
    assert map_norm(m1 @ m2) <= map_norm(m1) * map_norm(m2)


@pytest.mark.parametrize("n", [2, 3])
def test_classical_min_equals_max(n, SQ):
    C = make_model(f"classical({n})")
    for A, B in [(C, SQ), (SQ, C), (C, C)]:
        lo = minimal_generators(tensor(tmin(A, B)).cone)
        hi = tensor(tmax(A, B)).cone
        assert lo.equals(hi)


def test_float_polygon():
    s = float_model("polygon(6)")
    assert len(s.omega_vertices) == 6
    for v in s.omega_vertices:
        assert validate(s, v, "state")
