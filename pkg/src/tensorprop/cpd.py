"""CP tensor completion trained on observed entries only.

The model predicts a cell as the sum over ``rank`` components of the
product of one factor-matrix row per mode. Training minimizes, per
minibatch ``B`` of standardized targets ``t``::

    mean_B (pred - t)**2
      + l2 * sum_n ||U_n||**2
      + smooth_lambda * sum_{n in ordinal_modes} sum_i ||U_n[i+1] - U_n[i]||**2

with Adam. ``smooth_lambda = 0`` is plain CPD; a positive value gives the
smoothness-regularized variant (CPD-S), which by default smooths only the
atom-count modes.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import training
from ._io import atomic_write_text, matrix_lines, read_matrix
from .checkpoint import header_lines, read_model_header
from .errors import BoundsError, ConfigError, DatasetError, ShapeError, StateError
from .sptensor import COUNT, IndexMap, Shape, check_coord


@dataclass(frozen=True)
class CPTrainConfig:
    rank: int = 8
    learning_rate: float = 1e-2
    epochs: int = 200
    batch_size: int = 256
    l2: float = 1e-4
    smooth_lambda: float = 0.0
    ordinal_modes: tuple = None  # None -> every count-kind mode
    seed: int = 0
    init_scale: float = None  # None -> 0.3 / sqrt(rank)
    patience: int = None
    center: bool = True  # False: value_mean fixed at 0, targets only scaled
    lr_decay: float = 1.0  # per-epoch multiplicative learning-rate decay
    reg_scale: str = "sum"  # "sum": regularizers / n_train; "mean": added per batch at full weight

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ConfigError("rank must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.l2 < 0 or self.smooth_lambda < 0:
            raise ConfigError("l2 and smooth_lambda must be >= 0")
        if self.init_scale is not None and self.init_scale < 0:
            raise ConfigError("init_scale must be >= 0")
        if self.reg_scale not in ("sum", "mean"):
            raise ConfigError(f"reg_scale must be 'sum' or 'mean', got {self.reg_scale!r}")
        if self.ordinal_modes is not None:
            object.__setattr__(self, "ordinal_modes", tuple(sorted(int(m) for m in self.ordinal_modes)))

    @property
    def resolved_init_scale(self):
        return 0.3 / np.sqrt(self.rank) if self.init_scale is None else self.init_scale

    def resolve_ordinal_modes(self, shape):
        if self.ordinal_modes is None:
            return shape.modes_of_kind(COUNT)
        bad = [m for m in self.ordinal_modes if not 0 <= m < shape.ndim]
        if bad:
            raise ConfigError(f"ordinal_modes {bad} are not modes of a {shape.ndim}-mode tensor")
        return self.ordinal_modes

    def as_dict(self):
        d = asdict(self)
        d["ordinal_modes"] = None if self.ordinal_modes is None else list(self.ordinal_modes)
        return d


@dataclass
class CPModel:
    """Factor matrices (one ``I_n x rank`` array per mode) plus target stats."""

    shape: Shape
    factors: list
    value_mean: float = 0.0
    value_std: float = 0.0
    stats_bound: bool = False
    index_map: IndexMap = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.factors) != self.shape.ndim:
            raise ShapeError(f"{len(self.factors)} factors for a {self.shape.ndim}-mode shape")
        ranks = {f.shape[1] for f in self.factors}
        if len(ranks) != 1:
            raise ShapeError(f"factors disagree on rank: {sorted(ranks)}")
        for n, (f, d) in enumerate(zip(self.factors, self.shape.dims)):
            if f.shape[0] != d:
                raise ShapeError(f"factor {n} has {f.shape[0]} rows, mode extent is {d}")

    @property
    def rank(self):
        return self.factors[0].shape[1]


def init_model(shape, cfg):
    """Factors drawn i.i.d. from ``U[-init_scale, init_scale]``."""
    rng = training.init_rng(cfg.seed)
    scale = cfg.resolved_init_scale
    factors = [rng.uniform(-scale, scale, size=(d, cfg.rank)) for d in shape.dims]
    if scale == 0:
        factors = [np.zeros_like(f) for f in factors]
    return CPModel(shape, factors)


def _as_coords(model, coords):
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[None, :]
    if coords.shape[1] != model.shape.ndim:
        raise ShapeError(f"coordinates have {coords.shape[1]} modes, model has {model.shape.ndim}")
    for n, d in enumerate(model.shape.dims):
        col = coords[:, n]
        bad = np.flatnonzero((col < 0) | (col >= d))
        if bad.size:
            raise BoundsError(n, int(col[bad[0]]), d)
    return coords


def _raw(factors, coords):
    out = np.ones((coords.shape[0], factors[0].shape[1]))
    for n, f in enumerate(factors):
        out *= f[coords[:, n]]
    return out.sum(axis=1)


def predict_raw(model, coord):
    """Standardized-scale prediction at one coordinate."""
    coord = check_coord(coord, model.shape)
    return float(_raw(model.factors, np.asarray([coord], dtype=np.int64))[0])


def predict_raw_many(model, coords):
    return _raw(model.factors, _as_coords(model, coords))


def _destandardize(model, raw):
    if not model.stats_bound:
        raise StateError("model has no target statistics; train it first")
    return model.value_mean + model.value_std * raw


def predict(model, coord):
    coord = check_coord(coord, model.shape)
    return float(_destandardize(model, _raw(model.factors, np.asarray([coord], dtype=np.int64)))[0])


def predict_many(model, coords):
    return _destandardize(model, predict_raw_many(model, coords))


def smoothness_penalty(model, ordinal_modes):
    """Sum of squared differences between adjacent rows of each ordinal factor."""
    factors = model.factors if isinstance(model, CPModel) else model
    total = 0.0
    for n in ordinal_modes:
        d = np.diff(factors[n], axis=0)
        total += float(np.sum(d * d))
    return total


def _scatter_rows(idx, vals, n_rows):
    out = np.empty((n_rows, vals.shape[1]))
    for r in range(vals.shape[1]):
        out[:, r] = np.bincount(idx, weights=vals[:, r], minlength=n_rows)
    return out


def objective(factors, coords, targets, l2=0.0, smooth_lambda=0.0, ordinal_modes=(), reg_weight=1.0):
    """Batch objective and its gradient with respect to every factor.

    Parameters
    ----------
    factors : list of ndarray
    coords : ndarray of int, shape (batch, ndim)
    targets : ndarray, shape (batch,)
        Standardized target values.
    reg_weight : float
        Multiplier on both regularizers. Training passes ``1 / n_train``
        under ``reg_scale="sum"``, which makes the batch objective an
        unbiased estimate of ``(sum of squared errors + penalties) / n_train``.

    Returns
    -------
    (float, list of ndarray)
    """
    b = coords.shape[0]
    n_modes = len(factors)
    rows = [f[coords[:, n]] for n, f in enumerate(factors)]
    # prefix[n] = prod_{m<n} rows[m]; suffix[n] = prod_{m>=n} rows[m]
    prefix = [np.ones_like(rows[0])]
    for n in range(n_modes):
        prefix.append(prefix[-1] * rows[n])
    suffix = [None] * (n_modes + 1)
    suffix[n_modes] = np.ones_like(rows[0])
    for n in range(n_modes - 1, -1, -1):
        suffix[n] = suffix[n + 1] * rows[n]
    resid = prefix[n_modes].sum(axis=1) - targets
    loss = float(resid @ resid) / b
    coef = (2.0 / b) * resid[:, None]

    l2 = l2 * reg_weight
    smooth_lambda = smooth_lambda * reg_weight
    grads = []
    for n, f in enumerate(factors):
        g = _scatter_rows(coords[:, n], coef * prefix[n] * suffix[n + 1], f.shape[0])
        if l2:
            g += 2.0 * l2 * f
            loss += l2 * float(np.sum(f * f))
        grads.append(g)
    if smooth_lambda:
        for n in ordinal_modes:
            d = np.diff(factors[n], axis=0)
            loss += smooth_lambda * float(np.sum(d * d))
            grads[n][:-1] -= 2.0 * smooth_lambda * d
            grads[n][1:] += 2.0 * smooth_lambda * d
    return loss, grads


def train(model, train_tensor, cfg, val=None):
    """Fit ``model`` to the entries of ``train_tensor``.

    Returns a new :class:`CPModel` and a :class:`TrainReport`. The input
    model is not modified.
    """
    if train_tensor.nnz == 0:
        raise DatasetError("training tensor is empty")
    if train_tensor.shape.dims != model.shape.dims:
        raise ShapeError(f"training tensor dims {train_tensor.shape.dims} != model dims {model.shape.dims}")
    if not train_tensor.has_distinct_coords():
        raise ConfigError("training tensor must be deduplicated")
    if model.rank != cfg.rank:
        raise ConfigError(f"model rank {model.rank} != config rank {cfg.rank}")
    ordinal = cfg.resolve_ordinal_modes(model.shape)
    mean, std = training.target_stats(train_tensor.values, cfg.center)
    targets = (train_tensor.values - mean) / std
    coords = train_tensor.coords

    reg_weight = 1.0 / train_tensor.nnz if cfg.reg_scale == "sum" else 1.0

    def loss_and_grad(params, c, t):
        return objective(params, c, t, cfg.l2, cfg.smooth_lambda, ordinal, reg_weight)

    val_fn = None
    if val is not None and val.nnz:
        def val_fn(params):
            pred = mean + std * _raw(params, val.coords)
            return float(np.mean(np.abs(pred - val.values)))

    params, report = training.fit_adam(
        [f.copy() for f in model.factors],
        loss_and_grad,
        coords,
        targets,
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
        patience=cfg.patience,
        val_mae=val_fn,
        lr_decay=cfg.lr_decay,
    )
    out = CPModel(
        model.shape,
        params,
        mean,
        std,
        True,
        train_tensor.index_map,
        dict(model.meta, config=cfg.as_dict()),
    )
    return out, report


def fit(train_tensor, cfg, val=None):
    """Initialize and train in one call."""
    return train(init_model(train_tensor.shape, cfg), train_tensor, cfg, val)


# -- checkpoints ---------------------------------------------------------------


def to_text(model):
    lines = ["#format tensorprop-cpd 1"]
    lines += header_lines(model)
    lines.append(f"#rank {model.rank}")
    for n, f in enumerate(model.factors):
        lines.append(f"#factor {n} {f.shape[0]} {f.shape[1]}")
        lines += matrix_lines(f)
    return "\n".join(lines) + "\n"


def from_text(text):
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or not lines[0].startswith("#format tensorprop-cpd"):
        raise DatasetError("not a CP checkpoint")
    head, pos = read_model_header(lines, 1)
    factors = []
    while pos < len(lines):
        key, *rest = lines[pos][1:].split()
        if key != "factor":
            raise DatasetError(f"unexpected line {lines[pos]!r}")
        rows, cols = int(rest[1]), int(rest[2])
        f, pos = read_matrix(lines, pos + 1, rows, cols)
        factors.append(f)
    return CPModel(
        head["shape"],
        factors,
        head["value_mean"],
        head["value_std"],
        head["stats_bound"],
        head["index_map"],
        head["meta"],
    )


def save(model, path):
    atomic_write_text(path, to_text(model))


def load(path):
    return from_text(Path(path).read_text(encoding="utf-8"))
