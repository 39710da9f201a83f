"""Labeled r-flowers and r-neighborhoods of the Delta-regular tree.

A flower is stored as one flat label vector in the order

    [w_0, flat(w_1A), flat(w_1B), ..., flat(w_rA), flat(w_rB)]

and a neighborhood as

    [flat(z_11), ..., flat(z_1D), flat(z_21), ..., flat(z_rD)]

where an element of S_s flattens its (Delta - 1) children of S_{s-1} left to
right.  Every operation of the algebra (end, res, shuffle, reverse, project)
only moves labels around, so each one is represented by an integer index map
``m`` with ``out = labels[..., m]``.  The maps are computed once per shape and
cached; batched application is plain numpy fancy indexing.
"""

from __future__ import annotations

import itertools
import json
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConstraintError, DomainError, StructuralError, check_budget
from .rng import as_generator

SIDES = ("A", "B")


def other_side(v):
    return "B" if v == "A" else "A"


def _check_side(v):
    if v not in SIDES:
        raise StructuralError(f"side must be 'A' or 'B', got {v!r}")


# ---------------------------------------------------------------------------
# label models and shapes


@dataclass(frozen=True)
class LabelModel:
    """Discrete(L) labels are integers in [0, L); continuous labels are reals in [0, 1]."""

    L: Optional[int] = None

    def __post_init__(self):
        if self.L is not None and int(self.L) < 2:
            raise StructuralError(f"alphabet size must be >= 2, got {self.L}")

    @classmethod
    def discrete(cls, L):
        return cls(int(L))

    @classmethod
    def continuous(cls):
        return cls(None)

    @property
    def is_discrete(self):
        return self.L is not None

    @property
    def dtype(self):
        return np.int64 if self.is_discrete else np.float64

    def sample(self, rng, size):
        rng = as_generator(rng)
        if self.is_discrete:
            return rng.integers(0, self.L, size=size, dtype=np.int64)
        return rng.random(size)

    def validate(self, labels):
        labels = np.asarray(labels)
        if labels.size == 0:
            return
        if self.is_discrete:
            if not np.all(labels == np.round(labels)) or labels.min() < 0 or labels.max() >= self.L:
                raise StructuralError(f"labels must be integers in [0, {self.L})")
        elif labels.min() < 0 or labels.max() > 1 or np.isnan(labels).any():
            raise StructuralError("continuous labels must lie in [0, 1]")

    def to_json(self):
        return {"discrete": self.L} if self.is_discrete else "continuous"

    @classmethod
    def from_json(cls, obj):
        if obj == "continuous":
            return cls.continuous()
        if isinstance(obj, dict) and "discrete" in obj:
            return cls.discrete(obj["discrete"])
        raise StructuralError(f"unknown label model {obj!r}")

    def __str__(self):
        return f"Discrete({self.L})" if self.is_discrete else "Continuous"


@dataclass(frozen=True)
class Shape:
    """Degree ``delta`` and radius ``radius`` with the derived coordinate layout."""

    delta: int
    radius: int

    def __post_init__(self):
        if int(self.delta) < 2:
            raise StructuralError(f"delta must be >= 2, got {self.delta}")
        if int(self.radius) < 0:
            raise StructuralError(f"radius must be >= 0, got {self.radius}")

    def s_len(self, s):
        """Number of labels in an element of S_s."""
        return (self.delta - 1) ** s

    @property
    def flower_len(self):
        return flower_len(self.delta, self.radius)

    @property
    def nbhd_len(self):
        return nbhd_len(self.delta, self.radius)

    def with_radius(self, r):
        return Shape(self.delta, r)

    def flower_row(self, s, side):
        """Slice of row w_{s,side} (s >= 1) inside the flat flower vector."""
        _check_side(side)
        if not 1 <= s <= self.radius:
            raise StructuralError(f"row {s} outside radius {self.radius}")
        off = 1 + 2 * sum(self.s_len(t) for t in range(1, s))
        if side == "B":
            off += self.s_len(s)
        return slice(off, off + self.s_len(s))

    def nbhd_block(self, s, i):
        """Slice of block z_{s,i} (an element of S_{s-1}) inside the flat neighborhood."""
        if not 1 <= s <= self.radius or not 1 <= i <= self.delta:
            raise StructuralError(f"block ({s},{i}) outside shape {self}")
        off = sum(self.delta * self.s_len(t - 1) for t in range(1, s))
        off += (i - 1) * self.s_len(s - 1)
        return slice(off, off + self.s_len(s - 1))


def flower_len(delta, r):
    return 1 + 2 * sum((delta - 1) ** s for s in range(1, r + 1))


def nbhd_len(delta, r):
    return delta * sum((delta - 1) ** (s - 1) for s in range(1, r + 1))


def _child(sl, s, i, delta):
    """Slice of child i (1-based) inside an S_s element stored at slice ``sl``."""
    size = (delta - 1) ** (s - 1)
    start = sl.start + (i - 1) * size
    return slice(start, start + size)


# ---------------------------------------------------------------------------
# labeled objects


class _Labeled:
    kind = ""

    def __init__(self, shape, model, labels):
        if not isinstance(shape, Shape):
            shape = Shape(*shape)
        raw = np.asarray(labels).reshape(-1)
        if raw.shape[0] != self._expected_len(shape):
            raise StructuralError(
                f"{self.kind} of shape {shape} needs {self._expected_len(shape)} labels, got {raw.shape[0]}"
            )
        model.validate(raw)
        arr = np.array(raw, dtype=model.dtype)
        arr.setflags(write=False)
        self.shape = shape
        self.model = model
        self.labels = arr

    @staticmethod
    def _expected_len(shape):
        raise NotImplementedError

    @property
    def delta(self):
        return self.shape.delta

    @property
    def radius(self):
        return self.shape.radius

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.shape == other.shape
            and self.model == other.model
            and np.array_equal(self.labels, other.labels)
        )

    def __hash__(self):
        return hash((self.kind, self.shape, self.model, self.labels.tobytes()))

    def __len__(self):
        return self.labels.shape[0]

    def __repr__(self):
        return f"{type(self).__name__}(delta={self.delta}, radius={self.radius}, labels={self.labels.tolist()})"


class Flower(_Labeled):
    kind = "flower"

    @staticmethod
    def _expected_len(shape):
        return shape.flower_len

    @property
    def center(self):
        return self.labels[0]

    def row(self, s, side):
        return self.labels[self.shape.flower_row(s, side)]


class Neighborhood(_Labeled):
    kind = "neighborhood"

    @staticmethod
    def _expected_len(shape):
        return shape.nbhd_len

    def block(self, s, i):
        return self.labels[self.shape.nbhd_block(s, i)]


def _same_kind(obj, cls, name):
    if not isinstance(obj, cls):
        raise StructuralError(f"{name} expects a {cls.__name__}, got {type(obj).__name__}")


# ---------------------------------------------------------------------------
# permutations of [delta], stored as tuples of images (sigma[i-1] = sigma(i))


def check_perm(sigma, delta):
    sigma = tuple(int(s) for s in sigma)
    if sorted(sigma) != list(range(1, delta + 1)):
        raise StructuralError(f"{sigma} is not a permutation of 1..{delta}")
    return sigma


def identity_perm(delta):
    return tuple(range(1, delta + 1))


def special_perm(i, delta):
    """sigma_i: swap 1 and i, fix everything else."""
    if not 1 <= i <= delta:
        raise DomainError(f"direction {i} outside 1..{delta}")
    img = list(range(1, delta + 1))
    img[0], img[i - 1] = i, 1
    return tuple(img)


def compose(sigma, tau):
    """(sigma o tau)(i) = sigma(tau(i))."""
    return tuple(sigma[t - 1] for t in tau)


def inverse(sigma):
    inv = [0] * len(sigma)
    for i, s in enumerate(sigma, start=1):
        inv[s - 1] = i
    return tuple(inv)


def all_perms(delta):
    return [tuple(p) for p in itertools.permutations(range(1, delta + 1))]


# ---------------------------------------------------------------------------
# index maps


def _frozen(arr):
    arr = np.asarray(arr, dtype=np.int64)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def end_map(delta, r, side):
    """Map from an r-flower to its side-v endpoint r-neighborhood."""
    _check_side(side)
    sh = Shape(delta, r)
    u = other_side(side)
    out = np.empty(sh.nbhd_len, dtype=np.int64)
    pos = np.arange(sh.flower_len)
    for s in range(1, r + 1):
        if s == 1:
            out[sh.nbhd_block(1, 1)] = 0
        else:
            out[sh.nbhd_block(s, 1)] = pos[sh.flower_row(s - 1, u)]
        row = sh.flower_row(s, side)
        for i in range(1, delta):
            out[sh.nbhd_block(s, i + 1)] = pos[_child(row, s, i, delta)]
    return _frozen(out)


@lru_cache(maxsize=None)
def res1_map(delta, r):
    """Map from an r-neighborhood to the (r-1)-flower of its direction-1 edge."""
    if r < 1:
        raise DomainError("res is undefined on the empty neighborhood")
    sh = Shape(delta, r)
    fl = Shape(delta, r - 1)
    pos = np.arange(sh.nbhd_len)
    out = np.empty(fl.flower_len, dtype=np.int64)
    out[0] = pos[sh.nbhd_block(1, 1)][0]
    for s in range(1, r):
        out[fl.flower_row(s, "B")] = pos[sh.nbhd_block(s + 1, 1)]
        row = fl.flower_row(s, "A")
        for i in range(1, delta):
            out[_child(row, s, i, delta)] = pos[sh.nbhd_block(s, i + 1)]
    return _frozen(out)


@lru_cache(maxsize=None)
def shuffle_map(delta, r, sigma):
    """Map for shuffle(sigma): out_{s, sigma(i)} = z_{s, i}."""
    sigma = check_perm(sigma, delta)
    sh = Shape(delta, r)
    pos = np.arange(sh.nbhd_len)
    out = np.empty(sh.nbhd_len, dtype=np.int64)
    for s in range(1, r + 1):
        for i in range(1, delta + 1):
            out[sh.nbhd_block(s, sigma[i - 1])] = pos[sh.nbhd_block(s, i)]
    return _frozen(out)


@lru_cache(maxsize=None)
def res_map(delta, r, i):
    """Map for res_i = res_1 o shuffle(sigma_i)."""
    return _frozen(shuffle_map(delta, r, special_perm(i, delta))[res1_map(delta, r)])


@lru_cache(maxsize=None)
def reverse_map(delta, r):
    sh = Shape(delta, r)
    out = np.arange(sh.flower_len)
    for s in range(1, r + 1):
        a, b = sh.flower_row(s, "A"), sh.flower_row(s, "B")
        out[a], out[b] = np.arange(b.start, b.stop), np.arange(a.start, a.stop)
    return _frozen(out)


@lru_cache(maxsize=None)
def project_map(delta, r):
    """Map for proj = end_A o res_1, from radius r to radius r - 1."""
    if r < 1:
        raise DomainError("project is undefined on the empty neighborhood")
    return _frozen(res1_map(delta, r)[end_map(delta, r - 1, "A")])


def _complement(n, m):
    mask = np.ones(n, dtype=bool)
    mask[m] = False
    return _frozen(np.flatnonzero(mask))


@lru_cache(maxsize=None)
def cond_res_free(delta, r, i):
    """Neighborhood coordinates left free once res_i(z) is pinned."""
    return _complement(nbhd_len(delta, r), res_map(delta, r, i))


@lru_cache(maxsize=None)
def cond_end_free(delta, r, side):
    """Flower coordinates left free once end_v(w) is pinned (the other side's deepest row)."""
    return _complement(flower_len(delta, r), end_map(delta, r, side))


def apply_map(labels, m):
    """Apply an index map to one label vector or a batch of them (last axis)."""
    return np.asarray(labels)[..., m]


def scatter(length, parts, dtype):
    """Build vectors from (map, values) pieces; values may be batched.

    Raises ConstraintError if two pieces disagree on a coordinate or if a
    coordinate is left unset.
    """
    batch = np.broadcast_shapes(*(np.asarray(v).shape[:-1] for _, v in parts))
    out = np.zeros(batch + (length,), dtype=dtype)
    seen = np.zeros(length, dtype=bool)
    for k, (m, vals) in enumerate(parts):
        vals = np.broadcast_to(np.asarray(vals, dtype=dtype), batch + (len(m),))
        overlap = seen[m]
        if overlap.any():
            if not np.array_equal(out[..., m[overlap]], vals[..., overlap]):
                raise ConstraintError(f"piece {k} disagrees with earlier pieces")
        out[..., m] = vals
        seen[m] = True
    if not seen.all():
        raise ConstraintError("scatter left coordinates unset")
    return out


# ---------------------------------------------------------------------------
# single-object operations


def shuffle(sigma, z):
    _same_kind(z, Neighborhood, "shuffle")
    m = shuffle_map(z.delta, z.radius, check_perm(sigma, z.delta))
    return Neighborhood(z.shape, z.model, z.labels[m])


def end(v, w):
    _same_kind(w, Flower, "end")
    _check_side(v)
    return Neighborhood(w.shape, w.model, w.labels[end_map(w.delta, w.radius, v)])


def res(i, z):
    _same_kind(z, Neighborhood, "res")
    if z.radius < 1:
        raise DomainError("res is undefined on the empty neighborhood")
    if not 1 <= i <= z.delta:
        raise DomainError(f"direction {i} outside 1..{z.delta}")
    return Flower(z.shape.with_radius(z.radius - 1), z.model, z.labels[res_map(z.delta, z.radius, i)])


def reverse(w):
    _same_kind(w, Flower, "reverse")
    return Flower(w.shape, w.model, w.labels[reverse_map(w.delta, w.radius)])


def project(z):
    _same_kind(z, Neighborhood, "project")
    if z.radius < 1:
        raise DomainError("project is undefined on the empty neighborhood")
    return Neighborhood(z.shape.with_radius(z.radius - 1), z.model, z.labels[project_map(z.delta, z.radius)])


def glue(x, parts):
    """The unique r-neighborhood y with res_i(y) = parts[i-1] for every i."""
    _same_kind(x, Neighborhood, "glue")
    delta, r = x.delta, x.radius + 1
    if len(parts) != delta:
        raise StructuralError(f"glue needs {delta} flowers, got {len(parts)}")
    for i, z in enumerate(parts, start=1):
        _same_kind(z, Flower, "glue")
        if z.shape != x.shape or z.model != x.model:
            raise StructuralError(f"flower {i} has shape {z.shape}, expected {x.shape}")
        if not end("A", z) == shuffle(special_perm(i, delta), x):
            raise ConstraintError(f"end_A(z_{i}) != sigma_{i}(x)")
    pieces = [(res_map(delta, r, i), z.labels) for i, z in enumerate(parts, start=1)]
    try:
        labels = scatter(nbhd_len(delta, r), pieces, x.model.dtype)
    except ConstraintError as exc:  # pragma: no cover - excluded by the check above
        raise ConstraintError(f"glue pieces inconsistent: {exc}") from exc
    return Neighborhood(Shape(delta, r), x.model, labels)


def join_ends(z_a, z_b):
    """The unique r-flower y with end_A(y) = z_a and end_B(y) = z_b."""
    _same_kind(z_a, Neighborhood, "join_ends")
    _same_kind(z_b, Neighborhood, "join_ends")
    sh = z_a.shape
    pieces = [(end_map(sh.delta, sh.radius, "A"), z_a.labels), (end_map(sh.delta, sh.radius, "B"), z_b.labels)]
    return Flower(sh, z_a.model, scatter(sh.flower_len, pieces, z_a.model.dtype))


class Witness(NamedTuple):
    """end_v(w) = shuffle(sigma, end_{v'}(w')) with sigma(1) != 1."""

    v: str
    v_prime: str
    sigma: tuple


def incident(w, w2):
    """Return an incidence witness (v, v', sigma) or None."""
    _same_kind(w, Flower, "incident")
    _same_kind(w2, Flower, "incident")
    if w.shape != w2.shape:
        raise StructuralError(f"shape mismatch {w.shape} vs {w2.shape}")
    for v in SIDES:
        a = end(v, w).labels
        for v2 in SIDES:
            b = end(v2, w2).labels
            for sigma in all_perms(w.delta):
                if sigma[0] == 1:
                    continue
                if np.array_equal(a, b[shuffle_map(w.delta, w.radius, sigma)]):
                    return Witness(v, v2, sigma)
    return None


# ---------------------------------------------------------------------------
# conditional construction and sampling


def _check_r(x, cls, name, min_r=0):
    _same_kind(x, cls, name)
    if x.radius < min_r:
        raise DomainError(f"{name} needs radius >= {min_r}")


def cond_res_fill(i, x, free):
    """Neighborhoods z of radius r(x)+1 with res_i(z) = x and the given free labels (batched)."""
    _check_r(x, Flower, "cond_res")
    delta, r = x.delta, x.radius + 1
    pieces = [(res_map(delta, r, i), x.labels), (cond_res_free(delta, r, i), free)]
    return scatter(nbhd_len(delta, r), pieces, x.model.dtype)


def cond_end_fill(v, x, free):
    """Flowers w of radius r(x) with end_v(w) = x and the given free labels (batched)."""
    _check_r(x, Neighborhood, "cond_end")
    _check_side(v)
    delta, r = x.delta, x.radius
    pieces = [(end_map(delta, r, v), x.labels), (cond_end_free(delta, r, v), free)]
    return scatter(flower_len(delta, r), pieces, x.model.dtype)


def sample_uniform(space, shape, model, rng, size=None):
    """Uniform element of F_r (space='flower') or R_r (space='neighborhood').

    With ``size`` set, returns a label array of shape (size, len) instead.
    """
    n = _space_len(space, shape)
    if size is None:
        labels = model.sample(rng, n)
        return (Flower if space == "flower" else Neighborhood)(shape, model, labels)
    return model.sample(rng, (size, n))


def sample_cond_res(i, x, rng, size=None):
    n = len(cond_res_free(x.delta, x.radius + 1, i))
    free = x.model.sample(rng, n if size is None else (size, n))
    labels = cond_res_fill(i, x, free)
    if size is None:
        return Neighborhood(x.shape.with_radius(x.radius + 1), x.model, labels)
    return labels


def sample_cond_end(v, x, rng, size=None):
    n = len(cond_end_free(x.delta, x.radius, v))
    free = x.model.sample(rng, n if size is None else (size, n))
    labels = cond_end_fill(v, x, free)
    if size is None:
        return Flower(x.shape, x.model, labels)
    return labels


# ---------------------------------------------------------------------------
# enumeration


def _space_len(space, shape):
    if space == "flower":
        return shape.flower_len
    if space == "neighborhood":
        return shape.nbhd_len
    raise StructuralError(f"unknown space {space!r}")


class Codec:
    """Lexicographic mixed-radix codec: the first coordinate is most significant."""

    def __init__(self, L, length):
        self.L = int(L)
        self.length = int(length)
        self.count = self.L**self.length
        if self.count >= 2**62:
            raise StructuralError(f"index space {self.count} does not fit in int64")
        self.powers = self.L ** np.arange(self.length - 1, -1, -1, dtype=np.int64)

    def encode(self, labels):
        return np.asarray(labels, dtype=np.int64) @ self.powers

    def decode(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return (idx[..., None] // self.powers) % self.L

    def weights(self, m, n):
        """Vector W with encode(labels[..., m]) = labels @ W for vectors of length n."""
        w = np.zeros(n, dtype=np.int64)
        w[m] = self.powers
        return w


class Enumeration:
    """All elements of F_r or R_r under Discrete(L), in canonical index order."""

    def __init__(self, space, shape, model, budget=None):
        if not model.is_discrete:
            raise DomainError("enumeration needs a Discrete label model")
        self.space = space
        self.shape = shape
        self.model = model
        self.length = _space_len(space, shape)
        self.count = check_budget(model.L**self.length, budget)
        self.codec = Codec(model.L, self.length)

    def __len__(self):
        return self.count

    def block(self, start=0, stop=None):
        stop = self.count if stop is None else min(stop, self.count)
        return self.codec.decode(np.arange(start, stop, dtype=np.int64))

    def all(self):
        return self.block()

    def chunks(self, size=1 << 18):
        for start in range(0, self.count, size):
            yield start, self.block(start, start + size)

    def partition(self, parts):
        """Split [0, count) into ``parts`` contiguous index ranges."""
        edges = np.linspace(0, self.count, parts + 1).astype(np.int64)
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    def encode(self, elem):
        return int(self.codec.encode(elem.labels))

    def decode(self, idx):
        cls = Flower if self.space == "flower" else Neighborhood
        return cls(self.shape, self.model, self.codec.decode(int(idx)))

    def __iter__(self):
        for _, block in self.chunks(4096):
            for row in block:
                yield (Flower if self.space == "flower" else Neighborhood)(self.shape, self.model, row)


def enumerate_space(space, shape, model, budget=None):
    return Enumeration(space, shape, model, budget)


def enumerate_cond_res(i, x, budget=None):
    """All completions z with res_i(z) = x, as a label array."""
    n = len(cond_res_free(x.delta, x.radius + 1, i))
    check_budget(x.model.L**n, budget)
    free = Codec(x.model.L, n).decode(np.arange(x.model.L**n))
    return cond_res_fill(i, x, free)


def enumerate_cond_end(v, x, budget=None):
    """All completions w with end_v(w) = x, as a label array."""
    n = len(cond_end_free(x.delta, x.radius, v))
    check_budget(x.model.L**n, budget)
    free = Codec(x.model.L, n).decode(np.arange(x.model.L**n))
    return cond_end_fill(v, x, free)


# ---------------------------------------------------------------------------
# serialization

MAGIC = b"MMLL"
VERSION = 1
_HEADER = struct.Struct("<4sHHHBBI")


def to_json(obj):
    return {
        "kind": obj.kind,
        "delta": obj.delta,
        "radius": obj.radius,
        "model": obj.model.to_json(),
        "labels": obj.labels.tolist(),
    }


def from_json(data):
    if isinstance(data, str):
        data = json.loads(data)
    model = LabelModel.from_json(data["model"])
    cls = Neighborhood if data.get("kind") == "neighborhood" else Flower
    return cls(Shape(data["delta"], data["radius"]), model, data["labels"])


def to_bytes(obj):
    """16-byte header, then u16 per discrete label or f64 per continuous label (little-endian)."""
    tag = 1 if obj.model.is_discrete else 2
    kind = 0 if obj.kind == "flower" else 1
    head = _HEADER.pack(MAGIC, VERSION, obj.delta, obj.radius, tag, kind, obj.model.L or 0)
    body = obj.labels.astype("<u2" if tag == 1 else "<f8").tobytes()
    return head + body


def from_bytes(buf):
    if len(buf) < _HEADER.size:
        raise StructuralError("buffer shorter than header")
    magic, version, delta, radius, tag, kind, L = _HEADER.unpack_from(buf)
    if magic != MAGIC or version != VERSION:
        raise StructuralError("not an MMLL label file")
    model = LabelModel.discrete(L) if tag == 1 else LabelModel.continuous()
    labels = np.frombuffer(buf, dtype="<u2" if tag == 1 else "<f8", offset=_HEADER.size)
    cls = Flower if kind == 0 else Neighborhood
    return cls(Shape(delta, radius), model, labels)
