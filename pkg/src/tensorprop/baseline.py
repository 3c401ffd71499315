"""Non-tensor baseline: an MLP on one-hot encoded coordinates."""

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import training
from ._io import atomic_write_text
from .checkpoint import header_lines, read_model_header
from .errors import BoundsError, ConfigError, DatasetError, ShapeError, StateError
from .neural import DenseNet, backward, forward, init_net, net_from_lines, net_to_lines
from .sptensor import IndexMap, Shape, check_coord


class OneHotEncoder:
    """Concatenated per-mode one-hot vectors; width is the sum of extents."""

    def __init__(self, shape):
        self.shape = shape
        self.offsets = np.concatenate([[0], np.cumsum(shape.dims)[:-1]]).astype(np.int64)
        self.total_width = int(sum(shape.dims))

    def encode(self, coord):
        coord = check_coord(coord, self.shape)
        return self.encode_many(np.asarray([coord]))[0]

    def encode_many(self, coords):
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim != 2 or coords.shape[1] != self.shape.ndim:
            raise ShapeError(f"expected coordinates of shape (batch, {self.shape.ndim})")
        for n, d in enumerate(self.shape.dims):
            col = coords[:, n]
            bad = np.flatnonzero((col < 0) | (col >= d))
            if bad.size:
                raise BoundsError(n, int(col[bad[0]]), d)
        x = np.zeros((coords.shape[0], self.total_width))
        rows = np.arange(coords.shape[0])
        for n in range(self.shape.ndim):
            x[rows, self.offsets[n] + coords[:, n]] = 1.0
        return x


def encode(coord, shape):
    return OneHotEncoder(shape).encode(coord)


@dataclass(frozen=True)
class MLPTrainConfig:
    hidden: tuple = (64, 64)
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 256
    l2: float = 1e-4
    seed: int = 0
    patience: int = None

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if any(h < 1 for h in self.hidden):
            raise ConfigError("hidden widths must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")

    def as_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class MLPRegressor:
    shape: Shape
    net: DenseNet
    value_mean: float = 0.0
    value_std: float = 0.0
    stats_bound: bool = False
    index_map: IndexMap = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.encoder = OneHotEncoder(self.shape)
        if self.net.n_in != self.encoder.total_width or self.net.n_out != 1:
            raise ShapeError(
                f"network maps {self.net.n_in}->{self.net.n_out}, "
                f"encoder width is {self.encoder.total_width}"
            )


def init_model(shape, cfg):
    rng = training.init_rng(cfg.seed)
    width = int(sum(shape.dims))
    return MLPRegressor(shape, init_net((width, *cfg.hidden, 1), rng))


def objective(net, x, targets, l2=0.0):
    """Mean squared error (+ L2 on weight matrices) and gradients in ``net.params()`` order."""
    b = x.shape[0]
    y, tape = forward(net, x)
    resid = y[:, 0] - targets
    loss = float(resid @ resid) / b
    grads, _ = backward(net, tape, (2.0 / b) * resid[:, None])
    if l2:
        params = net.params()
        for k in range(0, len(params), 2):
            grads[k] = grads[k] + 2.0 * l2 * params[k]
            loss += l2 * float(np.sum(params[k] * params[k]))
    return loss, grads


def predict_raw_many(model, coords):
    y, _ = forward(model.net, model.encoder.encode_many(np.atleast_2d(coords)))
    return y[:, 0]


def predict_many(model, coords):
    if not model.stats_bound:
        raise StateError("model has no target statistics; train it first")
    return model.value_mean + model.value_std * predict_raw_many(model, coords)


def mlp_predict(model, coord):
    coord = check_coord(coord, model.shape)
    return float(predict_many(model, [coord])[0])


def mlp_train(train_tensor, cfg, val=None, model=None):
    """Train an MLP on one-hot coordinates; returns ``(MLPRegressor, TrainReport)``."""
    if train_tensor.nnz == 0:
        raise DatasetError("training tensor is empty")
    if not train_tensor.has_distinct_coords():
        raise ConfigError("training tensor must be deduplicated")
    model = init_model(train_tensor.shape, cfg) if model is None else model
    if train_tensor.shape.dims != model.shape.dims:
        raise ShapeError(f"training tensor dims {train_tensor.shape.dims} != model dims {model.shape.dims}")
    mean, std = training.target_stats(train_tensor.values)
    targets = (train_tensor.values - mean) / std
    encoder = model.encoder
    base = model.net

    def loss_and_grad(params, c, t):
        return objective(base.with_params(params), encoder.encode_many(c), t, cfg.l2)

    val_fn = None
    if val is not None and val.nnz:
        xv = encoder.encode_many(val.coords)

        def val_fn(params):
            y, _ = forward(base.with_params(params), xv)
            return float(np.mean(np.abs(mean + std * y[:, 0] - val.values)))

    params, report = training.fit_adam(
        [p.copy() for p in base.params()],
        loss_and_grad,
        train_tensor.coords,
        targets,
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
        patience=cfg.patience,
        val_mae=val_fn,
    )
    out = MLPRegressor(
        model.shape,
        base.with_params(params),
        mean,
        std,
        True,
        train_tensor.index_map,
        dict(model.meta, config=cfg.as_dict()),
    )
    return out, report


fit = mlp_train


# -- checkpoints ---------------------------------------------------------------


def to_text(model):
    lines = ["#format tensorprop-mlp 1"] + header_lines(model) + net_to_lines(model.net)
    return "\n".join(lines) + "\n"


def from_text(text):
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or not lines[0].startswith("#format tensorprop-mlp"):
        raise DatasetError("not an MLP checkpoint")
    head, pos = read_model_header(lines, 1)
    net, _ = net_from_lines(lines, pos)
    return MLPRegressor(
        head["shape"],
        net,
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
