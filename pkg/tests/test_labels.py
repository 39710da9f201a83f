import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmlab import labels as la
from mmlab.errors import CapacityError, ConstraintError, DomainError, StructuralError
from mmlab.rng import stream

D2 = la.LabelModel.discrete(2)
D3 = la.LabelModel.discrete(3)
D16 = la.LabelModel.discrete(16)
CONT = la.LabelModel.continuous()

SHAPES = [(2, 1), (2, 2), (3, 1), (3, 2), (4, 1), (2, 3)]


def flower(delta, r, labels, model=D16):
    return la.Flower(la.Shape(delta, r), model, np.asarray(labels, dtype=model.dtype))


def nbhd(delta, r, labels, model=D16):
    return la.Neighborhood(la.Shape(delta, r), model, np.asarray(labels, dtype=model.dtype))


# -- shapes and layout ------------------------------------------------------


def test_lengths():
    assert la.flower_len(2, 1) == 3
    assert la.flower_len(3, 2) == 1 + 2 * (2 + 4)
    assert la.nbhd_len(3, 2) == 3 * (1 + 2)
    assert la.nbhd_len(2, 0) == 0
    assert la.flower_len(5, 0) == 1


def test_bad_shape():
    with pytest.raises(StructuralError):
        la.Shape(1, 1)
    with pytest.raises(StructuralError):
        la.Shape(3, -1)


def test_wrong_length_rejected():
    with pytest.raises(StructuralError):
        flower(2, 1, [1, 2])


def test_discrete_range_checked():
    with pytest.raises(StructuralError):
        flower(2, 1, [0, 1, 2], D2)


# -- permutations -------------------------------------------------------------


def test_special_perm():
    assert la.special_perm(1, 4) == (1, 2, 3, 4)
    assert la.special_perm(3, 3) == (3, 2, 1)
    for delta in (2, 3, 5):
        s2 = la.special_perm(2, delta)
        assert la.compose(s2, s2) == la.identity_perm(delta)


def test_perm_inverse():
    for p in la.all_perms(4):
        assert la.compose(p, la.inverse(p)) == la.identity_perm(4)


# -- operations -------------------------------------------------------------


def test_shuffle_examples():
    z = nbhd(2, 1, [1, 2])
    assert la.shuffle(la.identity_perm(2), z) == z
    assert la.shuffle(la.special_perm(2, 2), z).labels.tolist() == [2, 1]
    z3 = nbhd(3, 1, [1, 2, 3])  # a, b, c
    assert la.shuffle((2, 3, 1), z3).labels.tolist() == [3, 1, 2]


def test_shuffle_matches_definition_bruteforce():
    # out block sigma(i) holds input block i, at every depth
    for delta, r in [(3, 2), (4, 1), (2, 3)]:
        sh = la.Shape(delta, r)
        z = np.arange(sh.nbhd_len)
        for sigma in la.all_perms(delta):
            out = z[la.shuffle_map(delta, r, sigma)]
            for s in range(1, r + 1):
                for i in range(1, delta + 1):
                    assert (out[sh.nbhd_block(s, sigma[i - 1])] == z[sh.nbhd_block(s, i)]).all()


def test_end_examples():
    w = flower(2, 1, [1, 2, 3])
    assert la.end("A", w).labels.tolist() == [1, 2]
    assert la.end("B", w).labels.tolist() == [1.0, 3.0]


def test_res_examples():
    z = nbhd(2, 1, [1, 2])
    assert la.res(1, z).labels.tolist() == [1]
    assert la.res(2, z).labels.tolist() == [2]
    # Delta = 3, r = 2: res_2 of the identity labeling
    z = nbhd(3, 2, np.arange(9))
    assert la.res(2, z).labels.tolist() == [1, 0, 2, 5, 6]


def test_res_domain():
    with pytest.raises(DomainError):
        la.res(1, nbhd(2, 0, []))
    with pytest.raises(DomainError):
        la.res(3, nbhd(2, 1, [1, 2]))


def test_reverse_examples():
    w = flower(2, 1, [1, 2, 3])
    assert la.reverse(w).labels.tolist() == [1, 3, 2]
    pal = flower(2, 1, [1, 2, 2])
    assert la.reverse(pal) == pal


def test_project_examples():
    assert la.project(nbhd(2, 1, [1, 2])).labels.shape == (0,)
    assert la.project(nbhd(2, 2, [1, 2, 3, 4])).labels.tolist() == [1, 2]


def test_glue_example():
    x = nbhd(2, 0, [])
    y = la.glue(x, [flower(2, 0, [5]), flower(2, 0, [7])])
    assert y.labels.tolist() == [5, 7]
    assert la.res(1, y).labels.tolist() == [5]
    assert la.res(2, y).labels.tolist() == [7]


def test_glue_rejects_mismatch():
    x = nbhd(2, 1, [1, 2])
    z1 = flower(2, 1, [1, 2, 3])  # end_A = (1, 2) = x
    z2 = flower(2, 1, [1, 2, 3])  # end_A should be (2, 1)
    with pytest.raises(ConstraintError):
        la.glue(x, [z1, z2])
    with pytest.raises(StructuralError):
        la.glue(x, [z1])


def test_scatter_conflict():
    m = np.array([0, 1])
    with pytest.raises(ConstraintError):
        la.scatter(2, [(m, np.array([1, 2])), (np.array([1]), np.array([3]))], np.int64)
    with pytest.raises(ConstraintError):
        la.scatter(3, [(m, np.array([1, 2]))], np.int64)


# -- exhaustive round trips -------------------------------------------------


@pytest.mark.parametrize("delta,r,L", [(2, 1, 3), (2, 2, 2), (3, 1, 2), (3, 2, 2)])
def test_round_trips_exhaustive(delta, r, L):
    """res_i(glue(x, z)) = z_i and glue(project(y), res(y)) = y over all y."""
    model = la.LabelModel.discrete(L)
    sh = la.Shape(delta, r)
    ys = la.enumerate_space("neighborhood", sh, model).all()
    parts = [(la.res_map(delta, r, i), ys[:, la.res_map(delta, r, i)]) for i in range(1, delta + 1)]
    assert np.array_equal(la.scatter(sh.nbhd_len, parts, ys.dtype), ys)
    # spot-check the object-level path on a subsample
    for row in ys[:: max(1, len(ys) // 50)]:
        y = la.Neighborhood(sh, model, row)
        zs = [la.res(i, y) for i in range(1, delta + 1)]
        g = la.glue(la.project(y), zs)
        assert g == y
        assert all(la.res(i, g) == zs[i - 1] for i in range(1, delta + 1))
        assert la.project(g) == la.project(y)


@given(st.sampled_from(SHAPES), st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_algebra_identities(shape, seed):
    delta, r = shape
    rng = stream(seed)
    sh = la.Shape(delta, r)
    w = la.sample_uniform("flower", sh, CONT, rng)
    z = la.sample_uniform("neighborhood", sh, CONT, rng)
    assert la.reverse(la.reverse(w)) == w
    assert la.end("B", w) == la.end("A", la.reverse(w))
    assert la.join_ends(la.end("A", w), la.end("B", w)) == w
    sigma = la.all_perms(delta)[seed % len(la.all_perms(delta))]
    tau = la.all_perms(delta)[(seed // 7) % len(la.all_perms(delta))]
    assert la.shuffle(sigma, la.shuffle(tau, z)) == la.shuffle(la.compose(sigma, tau), z)
    for i in range(1, delta + 1):
        assert la.res(i, z) == la.res(1, la.shuffle(la.special_perm(i, delta), z))
        # the direction-i edge of z seen from its far end
        assert la.end("A", la.res(i, z)) == la.project(la.shuffle(la.special_perm(i, delta), z))


# -- incidence --------------------------------------------------------------


def test_zero_flowers_incident():
    a, b = flower(3, 0, [1]), flower(3, 0, [7])
    assert la.incident(a, b) is not None


def test_reverse_not_incident():
    for labels in itertools.permutations(range(3)):
        w = flower(2, 1, labels, D3)
        assert la.incident(w, la.reverse(w)) is None
        assert la.incident(w, w) is None


def test_two_directions_incident():
    x = nbhd(3, 1, [1, 2, 3])
    w1 = la.sample_cond_end("A", la.shuffle(la.special_perm(1, 3), x), stream(1))
    w2 = la.sample_cond_end("A", la.shuffle(la.special_perm(2, 3), x), stream(2))
    wit = la.incident(w1, w2)
    assert wit is not None and wit.sigma[0] != 1
    assert la.end(wit.v, w1) == la.shuffle(wit.sigma, la.end(wit.v_prime, w2))


# -- sampling ---------------------------------------------------------------


def test_uniform_flower_frequencies():
    sh = la.Shape(2, 1)
    draws = la.sample_uniform("flower", sh, D2, stream(3), size=100_000)
    counts = Counter(la.Codec(2, 3).encode(draws).tolist())
    assert len(counts) == 8
    sd = np.sqrt(100_000 * (1 / 8) * (7 / 8))
    for c in counts.values():
        assert abs(c - 100_000 / 8) < 4 * sd


def test_sampling_deterministic():
    sh = la.Shape(3, 2)
    a = la.sample_uniform("flower", sh, CONT, stream(5, "x"))
    b = la.sample_uniform("flower", sh, CONT, stream(5, "x"))
    assert a == b


def test_cond_res_and_end():
    x = flower(2, 0, [0.25], CONT)
    zs = la.sample_cond_res(1, x, stream(0), size=1000)
    assert (zs[:, 0] == 0.25).all() and np.ptp(zs[:, 1]) > 0.9
    y = nbhd(2, 1, [0.3, 0.6], CONT)
    ws = la.sample_cond_end("A", y, stream(0), size=1000)
    assert (ws[:, :2] == [0.3, 0.6]).all() and np.ptp(ws[:, 2]) > 0.9


def test_enumerate_cond():
    x = flower(3, 1, [0, 1, 0, 1, 1], D2)
    zs = la.enumerate_cond_res(2, x)
    assert len(zs) == 2 ** (la.nbhd_len(3, 2) - 5)
    assert (zs[:, la.res_map(3, 2, 2)] == x.labels).all()
    assert len(np.unique(zs, axis=0)) == len(zs)


# -- enumeration and codecs -------------------------------------------------


def test_codec_round_trip():
    c = la.Codec(3, 5)
    idx = np.arange(c.count)
    assert np.array_equal(c.encode(c.decode(idx)), idx)
    assert c.decode(1).tolist() == [0, 0, 0, 0, 1]


def test_codec_weights():
    c = la.Codec(2, 3)
    m = la.shuffle_map(3, 1, (2, 3, 1))
    x = c.decode(np.arange(8))
    assert np.array_equal(x @ c.weights(m, 3), c.encode(x[:, m]))


def test_enumeration_budget():
    with pytest.raises(CapacityError) as exc:
        la.enumerate_space("flower", la.Shape(3, 2), D3, budget=1000)
    assert exc.value.needed == 3**13


def test_enumeration_budget_env(monkeypatch):
    monkeypatch.setenv("MMLL_BUDGET", "10")
    with pytest.raises(CapacityError):
        la.enumerate_space("flower", la.Shape(2, 1), D3)


def test_enumeration_iter_and_partition():
    e = la.enumerate_space("neighborhood", la.Shape(2, 1), D3)
    items = list(e)
    assert len(items) == 9 and items[5] == e.decode(5)
    assert e.encode(items[7]) == 7
    parts = e.partition(4)
    assert parts[0][0] == 0 and parts[-1][1] == 9


def test_continuous_enumeration_refused():
    with pytest.raises(DomainError):
        la.enumerate_space("flower", la.Shape(2, 1), CONT)


# -- serialization ----------------------------------------------------------


@pytest.mark.parametrize("model", [D3, CONT])
def test_serialization_round_trip(model):
    sh = la.Shape(3, 2)
    for space in ("flower", "neighborhood"):
        obj = la.sample_uniform(space, sh, model, stream(11))
        assert la.from_bytes(la.to_bytes(obj)) == obj
        assert la.from_json(la.to_json(obj)) == obj


def test_bad_header():
    with pytest.raises(StructuralError):
        la.from_bytes(b"XXXX" + bytes(20))
