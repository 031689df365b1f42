import itertools
from fractions import Fraction

import numpy as np
import pytest

from gptt import RATIONAL, make_model, tensor, tmax, tmin, unhat
from gptt.scalar import f64

R = RATIONAL


def frac(*xs):
    return R.array(list(xs))


# the square's pairing-dual witness (x,y,z) -> ((x+y)/2, (y-x)/2, z) and its inverse
W_PR = R.array([["1/2", "1/2", 0], ["-1/2", "1/2", 0], [0, 0, 1]])
PHI = R.array([[1, -1, 0], [1, 1, 0], [0, 0, 1]])
ROT = R.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]])


@pytest.fixture(scope="session")
def SQ():
    return make_model("polygon(4)")


@pytest.fixture(scope="session")
def C2():
    return make_model("classical(2)")


@pytest.fixture(scope="session")
def C3():
    return make_model("classical(3)")


@pytest.fixture(scope="session")
def mn(SQ):
    return tensor(tmin(SQ, SQ))


@pytest.fixture(scope="session")
def mx(SQ):
    return tensor(tmax(SQ, SQ))


@pytest.fixture(scope="session")
def omega_pr(mx):
    return unhat(W_PR, mx)


@pytest.fixture(scope="session")
def f_e(mn):
    return unhat(PHI / 4, mn, (0,), "effect")


def random_state(space, rng, interior=True):
    """Seeded rational mixture of the vertices with strictly positive weights."""
    V = space.omega_vertices
    w = rng.integers(1, 10, size=len(V)) if interior else rng.integers(0, 10, size=len(V))
    if w.sum() == 0:
        w[0] = 1
    b = space.backend
    tot = int(w.sum())
    if b.exact:
        return sum((Fraction(int(x), tot) * v for x, v in zip(w, V)), b.zeros(space.dim))
    return sum((x / tot * v for x, v in zip(w, V)), b.zeros(space.dim))


def float_model(name):
    return make_model(name, backend=f64())


def pairs(xs):
    return itertools.product(xs, xs)


def to_float(a):
    return np.asarray(a, dtype=float)
