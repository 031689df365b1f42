import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gptt import (
    ConeMap,
    bipartitions,
    check_admissible,
    check_regular,
    explicit_composite,
    hat,
    is_order_iso,
    make_model,
    parse_recipe,
    partial_subsystem,
    tensor,
    tmax,
    tmin,
    unhat,
)
from gptt.composite import (
    AdmissibleByConstruction,
    Falsified,
    _effects_by_generators,
    _reorder,
    kron,
    conditional,
    marginal,
    partial_evaluate,
)
from gptt.cone import Cone, minimal_generators
from gptt.scalar import RATIONAL as R

from conftest import PHI, W_PR, random_state
from oracles import fm_facets, extreme_rays_of_generators


def test_min_square_has_16_extreme_generators(mn):
    gens = minimal_generators(mn.cone).generators
    assert len(gens) == 16
    assert len(extreme_rays_of_generators(gens.tolist(), sorted(fm_facets(gens.tolist())))) == 16


def test_max_square_has_24_rays(mx):
    assert len(mx.cone.generators) == 24
    products = [kron(a, b) for a, b in itertools.product(*[mx.leaves[0].omega_vertices] * 2)]
    rays = {tuple(r) for r in mx.cone.generators}
    # 16 product rays plus 8 entangled ones
    from gptt.scalar import primitive

    prods = {tuple(primitive(p, R)) for p in products}
    assert len(prods & {tuple(primitive(np.array(r, dtype=object), R)) for r in rays}) == 16


def test_classical_min_max_coincide(C2):
    assert tensor(tmin(C2, C2)).cone.equals(tensor(tmax(C2, C2)).cone)


def test_marginals(SQ, C2, omega_pr):
    a, b = SQ.omega_vertices[0], SQ.omega_vertices[1]
    pt = tensor(tmin(SQ, SQ)).element(kron(a, b))
    assert R.equal(marginal(pt, (0,)), a)
    assert R.equal(marginal(omega_pr, (0,)), R.array([0, 0, 1]))
    assert R.equal(marginal(omega_pr, (1,)), R.array([0, 0, 1]))
    e1, e2 = C2.omega_vertices
    corr = tensor(tmin(C2, C2)).element((kron(e1, e1) + kron(e2, e2)) / 2)
    assert R.equal(marginal(corr, (0,)), R.array(["1/2", "1/2"]))


def test_conditionals(SQ, mn, omega_pr, f_e):
    a, b = SQ.omega_vertices[0], SQ.omega_vertices[1]
    eff = R.array(["1/2", "1/2", "1/2"])
    pt = mn.element(kron(a, b))
    assert R.equal(conditional(pt, eff), (eff @ a) * b)
    # alpha (x) omega_PR on SQ (min) (SQ max SQ), conditioned on f_e over the first two leaves
    host = tensor(tmin(SQ, tmax(SQ, SQ)))
    for alpha in SQ.omega_vertices:
        x = host.element(kron(alpha, omega_pr.tensor), (0, 1))
        assert R.equal(conditional(x, f_e.tensor), alpha / 4)
        assert R.equal(conditional(x, f_e.tensor, normalized=True), alpha)
    zero_effect = R.array([0, 0, 0])
    assert R.all_zero(conditional(pt, R.array([1, 0, 1]) * 0 + zero_effect, normalized=True))


def test_hat_unhat(SQ, C2, omega_pr, mn):
    a, b = SQ.omega_vertices[0], SQ.omega_vertices[2]
    pt = mn.element(kron(a, b))
    f = R.array(["1/2", "1/2", "1/2"])
    assert R.equal(hat(pt)(f), (f @ a) * b)
    assert R.equal(hat(omega_pr).matrix, W_PR)
    assert is_order_iso(hat(omega_pr))
    el = unhat(R.eye(2) / 2, tensor(tmax(C2, C2)))
    e1, e2 = C2.omega_vertices
    assert R.equal(el.tensor, (kron(e1, e1) + kron(e2, e2)) / 2)
    assert R.equal(unhat(hat(omega_pr), omega_pr.host).tensor, omega_pr.tensor)


def test_partial_subsystem_examples(SQ):
    c1 = tensor(tmin(SQ, tmax(SQ, SQ)))
    assert partial_subsystem(c1, (0, 1)).cone.equals(tensor(tmin(SQ, SQ)).cone)
    c2 = tensor(tmax(tmin(SQ, SQ), SQ))
    assert partial_subsystem(c2, (1, 2)).cone.equals(tensor(tmax(SQ, SQ)).cone)
    assert partial_subsystem(c1, (0,)) is SQ


@pytest.fixture(scope="module")
def tripartites(SQ, C2):
    return [
        tensor(tmin(SQ, tmax(SQ, SQ))),
        tensor(tmax(tmin(SQ, SQ), SQ)),
        tensor(tmin(SQ, SQ, SQ)),
        tensor(tmax(SQ, SQ, SQ)),
        tensor(tmin(C2, tmax(C2, SQ))),
        tensor(tmax(tmin(C2, SQ), C2)),
    ]


def test_regularity_verdicts(tripartites):
    for c in tripartites:
        for p in bipartitions(3):
            assert check_regular(c, p), (c, p)
        assert check_regular(c, [(0,), (1,), (2,)])


def test_four_partite_not_regular(SQ):
    P = tmin(SQ, SQ)
    c = tensor(tmax(P, P))
    r = check_regular(c, [(0, 2), (1, 3)])
    assert not r
    assert r.verify(c)


def test_nested_partials_agree(tripartites):
    for c in tripartites:
        for J in [(0, 1), (1, 2), (0, 2)]:
            PJ = partial_subsystem(c, J)
            for k in range(2):
                K = (J[k],)
                assert partial_subsystem(PJ, (k,)).cone.equals(partial_subsystem(c, K).cone)


def _unit_marginals(c, J):
    K = [i for i in range(c.n_leaves) if i not in J]
    u = kron(*[c.leaves[i].unit for i in K])
    return [partial_evaluate(c, g, J, u) for g in c.cone.generators]


@pytest.mark.parametrize("idx", [0, 2, 4])
def test_partials_are_unit_marginals(tripartites, idx):
    c = tripartites[idx]
    for J in [(0, 1), (1, 2), (0, 2)]:
        P = partial_subsystem(c, J)
        margs = [m for m in _unit_marginals(c, J) if not R.all_zero(m)]
        hull = Cone(margs, backend=R)
        assert hull.equals(P.cone)


def test_partials_are_regular(tripartites):
    for c in tripartites:
        for J in [(0, 1), (1, 2), (0, 2)]:
            P = partial_subsystem(c, J)
            assert check_regular(P, [(0,), (1,)])


def _effects_by_facet_products(c, parts):
    spaces = [partial_subsystem(c, p) for p in parts]
    dual = c.cone.dual()
    axes = [i for p in parts for i in p]
    return all(
        dual.contains(_reorder(kron(*combo), c.leaf_dims, axes))
        for combo in itertools.product(*[s.cone.facets for s in spaces])
    )


def test_effect_check_by_generators_matches_facet_products(SQ, C2):
    hosts = [tensor(tmin(C2, tmax(C2, SQ))), tensor(tmin(SQ, SQ, C2)), tensor(tmin(SQ, tmax(SQ, C2)))]
    for c in hosts:
        for p in bipartitions(3):
            spaces = [partial_subsystem(c, q) for q in p]
            fast = _effects_by_generators(c, p, spaces)
            assert bool(fast) == _effects_by_facet_products(c, p), p


def test_max_effects_match_min_of_duals(SQ):
    c = tensor(tmax(SQ, SQ))
    dual_min = Cone(
        [kron(a, b) for a, b in itertools.product(SQ.cone.facets, SQ.cone.facets)], backend=R
    )
    rng = np.random.default_rng(5)
    for _ in range(40):
        h = R.array(rng.integers(-3, 4, size=9).tolist())
        assert c.cone.dual_contains(h) == dual_min.contains(h)


def test_parse_recipe(SQ):
    r = parse_recipe("min(A, max(B, C))", {"A": SQ, "B": SQ, "C": SQ})
    assert str(r).startswith("min(")
    assert tensor(r).cone.equals(tensor(tmin(SQ, tmax(SQ, SQ))).cone)
    with pytest.raises(KeyError):
        parse_recipe("min(A, D)", {"A": SQ})


def test_admissibility(SQ, mn, omega_pr):
    assert isinstance(check_admissible(mn), AdmissibleByConstruction)
    assert isinstance(check_admissible(tensor(tmax(SQ, SQ))), AdmissibleByConstruction)
    gens = list(minimal_generators(mn.cone).generators) + [omega_pr.tensor]
    ex = explicit_composite([SQ, SQ], gens)
    r = check_admissible(ex, trials=1000, seed=0)
    assert isinstance(r, Falsified)
    assert r.certificate.verify(ex.cone, r.image)
    T = np.kron(*r.maps)
    assert R.equal(T @ r.state, r.image)


@given(st.integers(0, 10_000))
@settings(max_examples=8, deadline=None)
def test_product_of_states_is_a_state(seed):
    SQ = make_model("polygon(4)")
    rng = np.random.default_rng(seed)
    a, b, c = (random_state(SQ, rng) for _ in range(3))
    for host in [tensor(tmin(SQ, tmax(SQ, SQ))), tensor(tmax(tmin(SQ, SQ), SQ))]:
        assert host.cone.contains(kron(a, b, c))
