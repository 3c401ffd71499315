"""Coordinate-list sparse tensors with labeled modes.

A :class:`SparseTensor` holds an ``(nnz, ndim)`` integer coordinate array
and an ``(nnz,)`` value array in insertion order. Nothing here ever
materializes the dense tensor.

Randomness (``split``) uses numpy's ``default_rng`` (PCG64 bit generator)
seeded with the caller's integer seed, so a given seed always produces the
same partition.

Text format
-----------
::

    #format tensorprop-sptensor 1
    #shape 3,3,8,8
    #kinds element,element,count,count
    #labels mode=0: Au,Br,Cl
    #labels mode=1: Au,Br,Cl
    #labels mode=2: 1,2,3,4,5,6,7,8
    #labels mode=3: 1,2,3,4,5,6,7,8
    #config {"tensorize": {...}}
    0,1,0,4,1.2999999999999998
    ...

The ``#config`` line is optional provenance and is ignored on load.

One body line per entry: the mode indices followed by the value printed
with 17 significant digits.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, fmt_float, parse_header
from .errors import BoundsError, ConfigError, DatasetError, ShapeError

ELEMENT = "element"
COUNT = "count"
MODE_KINDS = (ELEMENT, COUNT)
DEDUP_POLICIES = ("mean", "first", "drop_all")


@dataclass(frozen=True)
class Shape:
    """Tensor extents plus a semantic tag (``element`` or ``count``) per mode."""

    dims: tuple
    mode_kinds: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        kinds = tuple(self.mode_kinds)
        if len(dims) != len(kinds):
            raise ShapeError(f"{len(dims)} dims but {len(kinds)} mode kinds")
        if len(dims) < 2:
            raise ShapeError("a tensor needs at least 2 modes")
        if any(d < 1 for d in dims):
            raise ShapeError(f"all extents must be >= 1, got {dims}")
        bad = [k for k in kinds if k not in MODE_KINDS]
        if bad:
            raise ShapeError(f"unknown mode kind(s) {bad}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "mode_kinds", kinds)

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def size(self):
        """Number of cells of the (never materialized) dense tensor."""
        out = 1
        for d in self.dims:
            out *= d
        return out

    def modes_of_kind(self, kind):
        return tuple(n for n, k in enumerate(self.mode_kinds) if k == kind)


@dataclass(frozen=True)
class IndexMap:
    """Per-mode bijection between string labels and indices ``0..extent-1``."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(tuple(str(x) for x in mode) for mode in self.labels)
        lookup = []
        for n, mode in enumerate(labels):
            table = {lab: i for i, lab in enumerate(mode)}
            if len(table) != len(mode):
                raise ConfigError(f"duplicate labels in mode {n}")
            for lab in mode:
                if "," in lab or "\n" in lab or not lab:
                    raise ConfigError(f"illegal label {lab!r} in mode {n}")
            lookup.append(table)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_lookup", tuple(lookup))

    @classmethod
    def default(cls, shape):
        """Element modes get ``"0".."I-1"``; count modes get ``"1".."I"``."""
        labels = []
        for d, kind in zip(shape.dims, shape.mode_kinds):
            start = 1 if kind == COUNT else 0
            labels.append(tuple(str(i + start) for i in range(d)))
        return cls(tuple(labels))

    def check(self, shape):
        if len(self.labels) != shape.ndim:
            raise ShapeError(f"index map has {len(self.labels)} modes, shape has {shape.ndim}")
        for n, (mode, d, kind) in enumerate(zip(self.labels, shape.dims, shape.mode_kinds)):
            if len(mode) != d:
                raise ShapeError(f"mode {n}: {len(mode)} labels for extent {d}")
            if kind == COUNT:
                for lab in mode:
                    try:
                        int(lab)
                    except ValueError:
                        raise ShapeError(f"count mode {n} label {lab!r} is not an integer") from None

    def index(self, mode, label):
        try:
            return self._lookup[mode][str(label)]
        except KeyError:
            raise KeyError(f"label {label!r} not in mode {mode}") from None

    def label(self, mode, index):
        return self.labels[mode][index]

    def decode(self, coord):
        return tuple(self.labels[n][int(i)] for n, i in enumerate(coord))


@dataclass(frozen=True)
class DedupReport:
    policy: str
    entries_in: int
    entries_out: int
    duplicated_coordinates: int
    entries_removed: int

    def as_dict(self):
        return dict(self.__dict__)


class SparseTensor:
    """Immutable COO tensor: shape, index map, coordinates and values.

    Parameters
    ----------
    shape : Shape
    coords : array_like of int, shape (nnz, ndim), optional
    values : array_like of float, shape (nnz,), optional
    index_map : IndexMap, optional
        Defaults to :meth:`IndexMap.default`.
    """

    def __init__(self, shape, coords=None, values=None, index_map=None):
        if not isinstance(shape, Shape):
            raise TypeError("shape must be a Shape")
        n = shape.ndim
        if coords is None or np.size(coords) == 0:
            coords = np.empty((0, n), dtype=np.int64)
        coords = np.array(coords, dtype=np.int64, copy=True)
        if coords.ndim != 2 or coords.shape[1] != n:
            raise ShapeError(f"coords must have shape (nnz, {n}), got {coords.shape}")
        values = np.array([] if values is None else values, dtype=np.float64, copy=True).reshape(-1)
        if coords.shape[0] != values.shape[0]:
            raise ShapeError(f"{coords.shape[0]} coordinates but {values.shape[0]} values")
        _check_bounds(coords, shape.dims)
        index_map = IndexMap.default(shape) if index_map is None else index_map
        index_map.check(shape)
        coords.flags.writeable = False
        values.flags.writeable = False
        self.shape = shape
        self.index_map = index_map
        self.coords = coords
        self.values = values

    @property
    def nnz(self):
        return int(self.values.shape[0])

    def __len__(self):
        return self.nnz

    def __repr__(self):
        return f"SparseTensor(dims={self.shape.dims}, nnz={self.nnz})"

    def entries(self):
        for c, v in zip(self.coords, self.values):
            yield tuple(int(i) for i in c), float(v)

    def take(self, idx):
        """New tensor with the entries at positions ``idx`` (same shape/labels)."""
        idx = np.asarray(idx, dtype=np.int64)
        return SparseTensor(self.shape, self.coords[idx], self.values[idx], self.index_map)

    def with_values(self, values):
        return SparseTensor(self.shape, self.coords, values, self.index_map)

    def has_distinct_coords(self):
        if self.nnz < 2:
            return True
        return np.unique(self.coords, axis=0).shape[0] == self.nnz

    def coord_set(self):
        return {tuple(int(i) for i in c) for c in self.coords}

    def insert(self, coord, value):
        return insert(self, coord, value)

    # -- text serialization -------------------------------------------------

    def to_text(self, config=None):
        """Text form; ``config`` (a JSON-able dict) is embedded as a ``#config`` line."""
        lines = [
            "#format tensorprop-sptensor 1",
            "#shape " + ",".join(str(d) for d in self.shape.dims),
            "#kinds " + ",".join(self.shape.mode_kinds),
        ]
        for n, labs in enumerate(self.index_map.labels):
            lines.append(f"#labels mode={n}: " + ",".join(labs))
        if config is not None:
            lines.append("#config " + json.dumps(config, sort_keys=True))
        for c, v in zip(self.coords.tolist(), self.values.tolist()):
            lines.append(",".join(str(i) for i in c) + "," + fmt_float(v))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        headers, body = parse_header(text.splitlines())
        dims = kinds = None
        labels = {}
        for key, value in headers:
            if key == "format":
                if not value.startswith("tensorprop-sptensor"):
                    raise DatasetError(f"not a sparse tensor file: {value!r}")
            elif key == "shape":
                dims = tuple(int(x) for x in value.split(","))
            elif key == "kinds":
                kinds = tuple(value.split(","))
            elif key == "labels":
                head, _, labs = value.partition(": ")
                if not head.startswith("mode="):
                    raise DatasetError(f"malformed labels header {value!r}")
                labels[int(head[5:])] = tuple(labs.split(",")) if labs else ()
            elif key == "config":
                pass  # provenance only
            else:
                raise DatasetError(f"unknown header #{key}")
        if dims is None or kinds is None:
            raise DatasetError("missing #shape or #kinds header")
        shape = Shape(dims, kinds)
        index_map = None
        if labels:
            if sorted(labels) != list(range(shape.ndim)):
                raise DatasetError("labels must be given for every mode")
            index_map = IndexMap(tuple(labels[n] for n in range(shape.ndim)))
        n = shape.ndim
        coords = np.empty((len(body), n), dtype=np.int64)
        values = np.empty(len(body), dtype=np.float64)
        for row, line in enumerate(body):
            parts = line.split(",")
            if len(parts) != n + 1:
                raise DatasetError(f"entry line {row} has {len(parts)} fields, expected {n + 1}")
            coords[row] = [int(p) for p in parts[:n]]
            values[row] = float(parts[n])
        return cls(shape, coords, values, index_map)

    def save(self, path, config=None):
        atomic_write_text(path, self.to_text(config))

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise DatasetError(f"cannot read tensor file {path}: {exc}") from exc
        return cls.from_text(text)


def _check_bounds(coords, dims):
    if coords.shape[0] == 0:
        return
    for n, d in enumerate(dims):
        col = coords[:, n]
        bad = np.flatnonzero((col < 0) | (col >= d))
        if bad.size:
            raise BoundsError(n, int(col[bad[0]]), d)


def check_coord(coord, shape):
    """Validate a single coordinate against ``shape``; returns it as a tuple."""
    coord = tuple(int(i) for i in coord)
    if len(coord) != shape.ndim:
        raise ShapeError(f"coordinate has {len(coord)} indices, tensor has {shape.ndim} modes")
    for n, (i, d) in enumerate(zip(coord, shape.dims)):
        if not 0 <= i < d:
            raise BoundsError(n, i, d)
    return coord


def insert(tensor, coord, value):
    """Return a new tensor with ``(coord, value)`` appended.

    Duplicates are allowed; call :func:`dedup` to resolve them.
    """
    coord = check_coord(coord, tensor.shape)
    coords = np.vstack([tensor.coords, np.asarray(coord, dtype=np.int64)[None, :]])
    values = np.append(tensor.values, float(value))
    return SparseTensor(tensor.shape, coords, values, tensor.index_map)


def dedup(tensor, policy="mean"):
    """Collapse repeated coordinates.

    Parameters
    ----------
    tensor : SparseTensor
    policy : {'mean', 'first', 'drop_all'}
        ``mean`` averages each duplicate group, ``first`` keeps the
        first-inserted value, ``drop_all`` removes every coordinate that
        occurs more than once.

    Returns
    -------
    (SparseTensor, DedupReport)
        Surviving coordinates keep the order of their first occurrence.
    """
    if policy not in DEDUP_POLICIES:
        raise ConfigError(f"unknown dedup policy {policy!r}; expected one of {DEDUP_POLICIES}")
    nnz = tensor.nnz
    if nnz == 0:
        return tensor, DedupReport(policy, 0, 0, 0, 0)
    _, first, inverse, counts = np.unique(
        tensor.coords, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    n_dup_groups = int(np.count_nonzero(counts > 1))
    if n_dup_groups == 0:
        return tensor, DedupReport(policy, nnz, nnz, 0, 0)

    order = np.argsort(first, kind="stable")
    if policy == "mean":
        sums = np.bincount(inverse, weights=tensor.values, minlength=counts.size)
        values = sums[order] / counts[order]
        keep = first[order]
    elif policy == "first":
        keep = first[order]
        values = tensor.values[keep]
    else:
        order = order[counts[order] == 1]
        keep = first[order]
        values = tensor.values[keep]
    out = SparseTensor(tensor.shape, tensor.coords[keep], values, tensor.index_map)
    report = DedupReport(policy, nnz, out.nnz, n_dup_groups, nnz - out.nnz)
    return out, report


def split(tensor, train_count, seed):
    """Uniformly sample ``train_count`` entries for training; the rest is test.

    The tensor must already be deduplicated, otherwise the same
    coordinate could land on both sides.
    """
    nnz = tensor.nnz
    if not isinstance(train_count, (int, np.integer)) or not 0 < train_count < nnz:
        raise ConfigError(f"train_count must satisfy 0 < train_count < {nnz}, got {train_count}")
    if not tensor.has_distinct_coords():
        raise ConfigError("split requires a deduplicated tensor (repeated coordinates found)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(nnz)
    train_idx = np.sort(perm[:train_count])
    test_idx = np.sort(perm[train_count:])
    return tensor.take(train_idx), tensor.take(test_idx)


def density(tensor):
    """Fraction of cells observed: distinct-entry count / product of extents."""
    if tensor.nnz == 0:
        return 0.0
    distinct = np.unique(tensor.coords, axis=0).shape[0]
    return distinct / tensor.shape.size
