"""Planted low-rank tensors and formula datasets with known ground truth."""

import itertools

import numpy as np

from .sptensor import COUNT, ELEMENT, Shape, SparseTensor
from .tensorize import ELEMENTS, Composition


def all_coords(dims):
    return np.array(list(itertools.product(*[range(d) for d in dims])), dtype=np.int64)


def cp_values(factors, coords):
    out = np.ones((coords.shape[0], factors[0].shape[1]))
    for n, f in enumerate(factors):
        out *= f[coords[:, n]]
    return out.sum(axis=1)


def planted_cp(dims, rank, seed=0, kinds=None, standardize=True, low=-1.0, high=1.0):
    """Fully observed CP tensor with factors drawn from ``U[low, high]``.

    Returns ``(tensor, factors)``. With ``standardize`` the values are
    z-scored over all cells (the factors then describe the raw values).
    """
    rng = np.random.default_rng(seed)
    factors = [rng.uniform(low, high, size=(d, rank)) for d in dims]
    coords = all_coords(dims)
    values = cp_values(factors, coords)
    if standardize:
        values = (values - values.mean()) / values.std()
    if kinds is None:
        half = len(dims) // 2
        kinds = (ELEMENT,) * (len(dims) - half) + (COUNT,) * half
    return SparseTensor(Shape(dims, kinds), coords, values), factors


def observe(tensor, fraction, seed=0):
    """Uniformly sampled subset holding ``round(fraction * nnz)`` entries."""
    k = int(round(fraction * tensor.nnz))
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(tensor.nnz, size=k, replace=False))
    return tensor.take(idx)


def formula_records(n_elements=12, max_count=6, rank=3, fraction=0.5, noise=0.0, seed=0):
    """Binary-compound ``(formula, value)`` records from a planted CP model.

    Elements are the first ``n_elements`` symbols of the periodic table;
    only canonical (sorted) element pairs are generated, so every record
    maps to a distinct tensor cell.
    """
    rng = np.random.default_rng(seed)
    symbols = sorted(ELEMENTS[:n_elements])
    dims = (n_elements, n_elements, max_count, max_count)
    factors = [rng.uniform(-1.0, 1.0, size=(d, rank)) for d in dims]
    cells = [
        (i, j, a, b)
        for i in range(n_elements)
        for j in range(i + 1, n_elements)
        for a in range(max_count)
        for b in range(max_count)
    ]
    k = int(round(fraction * len(cells)))
    pick = np.sort(rng.choice(len(cells), size=k, replace=False))
    coords = np.array([cells[p] for p in pick], dtype=np.int64)
    values = cp_values(factors, coords) + noise * rng.standard_normal(k)
    records = []
    for (i, j, a, b), v in zip(coords.tolist(), values.tolist()):
        comp = Composition(((symbols[i], a + 1), (symbols[j], b + 1)))
        records.append((comp.formula(), float(v)))
    return records


def write_formula_csv(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("formula,value\n")
        for formula, value in records:
            fh.write(f"{formula},{format(value, '.17g')}\n")
