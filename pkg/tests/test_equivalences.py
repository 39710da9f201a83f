from fractions import Fraction

import numpy as np
import pytest

from mmlab import equivalences as eq
from mmlab import labels as la
from mmlab.rng import hash_index, stream

SHAPES = [(3, 1, 2), (2, 2, 2), (3, 2, 2), (2, 1, 3)]


@pytest.mark.parametrize("delta,r,L", SHAPES)
def test_exact_suite(delta, r, L):
    results = eq.run_exact(delta, r, L, seed=3)
    assert [x.name for x in results] == list(eq.EXACT_NAMES)
    for x in results:
        assert x.passed, (x.name, x.lhs, x.rhs, x.detail)
        assert x.method == "exact"
        assert isinstance(x.lhs, Fraction) and x.abs_diff == 0


def test_exact_suite_independent_of_seed():
    for seed in range(3):
        assert all(x.passed for x in eq.run_exact(3, 1, 2, seed=seed))


def test_exact_negative_control():
    # a map that copies coordinate 0 over coordinate 1 does not preserve the uniform law
    codec = la.Codec(2, 5)
    X = hash_index(np.arange(codec.count), seed=1)
    w = codec.decode(np.arange(codec.count))
    m = np.array([0, 0, 2, 3, 4])
    lhs = Fraction(int(X[codec.encode(w[:, m])].sum()), codec.count)
    rhs = Fraction(int(X.sum()), codec.count)
    assert lhs != rhs


@pytest.mark.parametrize("delta,r", [(3, 1), (2, 2)])
def test_continuous_suite(delta, r):
    results = eq.run_continuous(delta, r, n=100_000, seed=5)
    assert len(results) == 6
    for x in results:
        assert x.method == "welch"
        assert x.passed, (x.name, x.detail)


def test_continuous_negative_control():
    rng = stream(0, "negative")
    X = eq._test_var(5, rng)
    y = rng.random((200_000, 5))
    dup = y[:, [0, 0, 2, 3, 4]]
    res = eq._welch("dup", X(dup), X(rng.random((200_000, 5))), 1e-3)
    assert not res.passed


def test_continuous_unknown():
    with pytest.raises(ValueError):
        eq.continuous("nope", 2, 1, n=10)
