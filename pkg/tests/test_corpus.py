from fractions import Fraction

import pytest

from mmlab import algorithms as al
from mmlab import corpus
from mmlab import labels as la


def test_standard_corpus_certified_and_symmetric():
    c = corpus.standard(n_random=2)
    assert {"greedy_d2_L2", "lift_greedy_d3_L2", "random_d3_r2_L2_1"} <= set(c)
    for name, f in c.items():
        assert f.status == "verified_exhaustive", name
        assert al.is_reversal_symmetric(f), name


def test_random_certified_deterministic():
    a = corpus.random_certified(la.Shape(3, 1), 2, seed=5)
    b = corpus.random_certified(la.Shape(3, 1), 2, seed=5)
    assert (a.table == b.table).all()


@pytest.mark.parametrize("symmetric", [True, False])
def test_random_certified_maximal(symmetric):
    # without skipping, no further flower can be added (with its reversal, when symmetric)
    sh, L = la.Shape(2, 2), 2
    f = corpus.random_certified(sh, L, seed=1, symmetric=symmetric)
    rev = al.reversal_index(sh, L)
    for k in range(len(f.table)):
        if f.table[k]:
            continue
        bits = f.table.copy()
        bits[k] = True
        if symmetric:
            bits[rev[k]] = True
        assert not al.verify_matching_certified(al.table_algorithm(sh, L, bits)).passed


def test_certified_subsets_smallest_shape():
    subsets = corpus.certified_subsets(la.Shape(2, 1), 2)
    # the empty table, greedy (0; 1, 1) and its mirror image (1; 0, 0)
    assert sorted(int(f.table.nonzero()[0].sum()) if f.table.any() else -1 for f in subsets) == [-1, 3, 4]
    assert min(al.survival_probability(f).exact for f in subsets) == Fraction(3, 4)
