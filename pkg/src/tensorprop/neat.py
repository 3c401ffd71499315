"""Neural additive tensor completion.

Like CP, the prediction is a sum of ``components`` terms, but each term is
a small relu network instead of a multilinear product::

    pred(i_1..i_N) = mean + std * sum_r net_r([E_1[i_1, r], ..., E_N[i_N, r]])

where ``E_n[i, r]`` is a length-``embed_dim`` embedding of index ``i`` of
mode ``n`` for component ``r``. Each ``net_r`` has one hidden relu layer
of width ``hidden`` and a scalar identity head.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import training
from ._io import atomic_write_text, matrix_lines, read_matrix
from .checkpoint import header_lines, read_model_header
from .errors import BoundsError, ConfigError, DatasetError, ShapeError, StateError
from .neural import backward, forward, init_net, net_from_lines, net_to_lines
from .sptensor import IndexMap, Shape, check_coord


@dataclass(frozen=True)
class NeatTrainConfig:
    components: int = 8
    embed_dim: int = 4
    hidden: int = 16
    learning_rate: float = 1e-3
    epochs: int = 300
    batch_size: int = 256
    l2: float = 1e-4
    seed: int = 0
    init_scale: float = 0.5
    patience: int = None

    def __post_init__(self):
        if min(self.components, self.embed_dim, self.hidden) < 1:
            raise ConfigError("components, embed_dim and hidden must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.l2 < 0 or self.init_scale < 0:
            raise ConfigError("l2 and init_scale must be >= 0")

    def as_dict(self):
        return asdict(self)


@dataclass
class NeatModel:
    """Per-mode embeddings of shape ``(I_n, components, embed_dim)`` plus one net per component."""

    shape: Shape
    embeddings: list
    nets: list
    value_mean: float = 0.0
    value_std: float = 0.0
    stats_bound: bool = False
    index_map: IndexMap = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.embeddings) != self.shape.ndim:
            raise ShapeError(f"{len(self.embeddings)} embedding tables for {self.shape.ndim} modes")
        r, d = self.embeddings[0].shape[1:]
        for n, (e, dim) in enumerate(zip(self.embeddings, self.shape.dims)):
            if e.shape != (dim, r, d):
                raise ShapeError(f"embedding {n} has shape {e.shape}, expected {(dim, r, d)}")
        if len(self.nets) != r:
            raise ShapeError(f"{len(self.nets)} component nets for {r} components")
        for net in self.nets:
            if net.n_in != self.shape.ndim * d or net.n_out != 1:
                raise ShapeError("component nets must map N*embed_dim inputs to 1 output")

    @property
    def components(self):
        return self.embeddings[0].shape[1]

    @property
    def embed_dim(self):
        return self.embeddings[0].shape[2]

    def params(self):
        out = list(self.embeddings)
        for net in self.nets:
            out.extend(net.params())
        return out

    def with_params(self, params):
        n_modes = self.shape.ndim
        per_net = len(self.nets[0].params())
        nets = [
            net.with_params(params[n_modes + k * per_net : n_modes + (k + 1) * per_net])
            for k, net in enumerate(self.nets)
        ]
        return NeatModel(
            self.shape,
            list(params[:n_modes]),
            nets,
            self.value_mean,
            self.value_std,
            self.stats_bound,
            self.index_map,
            self.meta,
        )


def init_model(shape, cfg):
    rng = training.init_rng(cfg.seed)
    emb = [
        rng.uniform(-cfg.init_scale, cfg.init_scale, size=(d, cfg.components, cfg.embed_dim))
        for d in shape.dims
    ]
    nets = [
        init_net((shape.ndim * cfg.embed_dim, cfg.hidden, 1), rng) for _ in range(cfg.components)
    ]
    return NeatModel(shape, emb, nets)


def _check_coords(shape, coords):
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[None, :]
    if coords.shape[1] != shape.ndim:
        raise ShapeError(f"coordinates have {coords.shape[1]} modes, model has {shape.ndim}")
    for n, d in enumerate(shape.dims):
        col = coords[:, n]
        bad = np.flatnonzero((col < 0) | (col >= d))
        if bad.size:
            raise BoundsError(n, int(col[bad[0]]), d)
    return coords


def _component_inputs(embeddings, coords):
    # (batch, components, N * d): row r is the concatenated input of net r
    gathered = [e[coords[:, n]] for n, e in enumerate(embeddings)]
    return np.concatenate(gathered, axis=2)


def component_outputs(model, coords):
    """Standardized output of every component, shape ``(batch, components)``."""
    coords = _check_coords(model.shape, coords)
    x = _component_inputs(model.embeddings, coords)
    out = np.empty((coords.shape[0], model.components))
    for r, net in enumerate(model.nets):
        y, _ = forward(net, x[:, r, :])
        out[:, r] = y[:, 0]
    return out


def predict_raw_many(model, coords):
    return component_outputs(model, coords).sum(axis=1)


def predict_many(model, coords):
    if not model.stats_bound:
        raise StateError("model has no target statistics; train it first")
    return model.value_mean + model.value_std * predict_raw_many(model, coords)


def neat_predict(model, coord):
    coord = check_coord(coord, model.shape)
    return float(predict_many(model, [coord])[0])


def objective(model, coords, targets, l2=0.0):
    """Mean squared standardized error plus L2, with gradients in ``model.params()`` order.

    L2 covers embeddings and weight matrices, not biases.
    """
    b = coords.shape[0]
    d = model.embed_dim
    x = _component_inputs(model.embeddings, coords)
    pred = np.zeros(b)
    tapes = []
    for r, net in enumerate(model.nets):
        y, tape = forward(net, x[:, r, :])
        pred += y[:, 0]
        tapes.append(tape)
    resid = pred - targets
    loss = float(resid @ resid) / b
    upstream = (2.0 / b) * resid[:, None]

    g_inputs = np.empty_like(x)
    net_grads = []
    for r, (net, tape) in enumerate(zip(model.nets, tapes)):
        g_params, g_inputs[:, r, :] = backward(net, tape, upstream)
        if l2:
            for k in range(0, len(g_params), 2):
                w = net.layers[k // 2].weights
                g_params[k] = g_params[k] + 2.0 * l2 * w
                loss += l2 * float(np.sum(w * w))
        net_grads.extend(g_params)

    # scatter-add each mode's slice of the input gradient into its embedding rows
    emb_grads = []
    width = model.components * d
    cols = np.arange(width)
    for n, e in enumerate(model.embeddings):
        g = g_inputs[:, :, n * d : (n + 1) * d].reshape(b, width)
        flat = (coords[:, n, None] * width + cols).ravel()
        summed = np.bincount(flat, weights=g.ravel(), minlength=e.size)
        emb_grads.append(summed.reshape(e.shape))
    if l2:
        for n, e in enumerate(model.embeddings):
            emb_grads[n] += 2.0 * l2 * e
            loss += l2 * float(np.sum(e * e))
    return loss, emb_grads + net_grads


def neat_train(model, train_tensor, cfg, val=None):
    """Fit a NeAT model with minibatch Adam; returns ``(NeatModel, TrainReport)``."""
    if train_tensor.nnz == 0:
        raise DatasetError("training tensor is empty")
    if train_tensor.shape.dims != model.shape.dims:
        raise ShapeError(f"training tensor dims {train_tensor.shape.dims} != model dims {model.shape.dims}")
    if not train_tensor.has_distinct_coords():
        raise ConfigError("training tensor must be deduplicated")
    mean, std = training.target_stats(train_tensor.values)
    targets = (train_tensor.values - mean) / std

    def loss_and_grad(params, c, t):
        return objective(model.with_params(params), c, t, cfg.l2)

    val_fn = None
    if val is not None and val.nnz:
        def val_fn(params):
            pred = mean + std * predict_raw_many(model.with_params(params), val.coords)
            return float(np.mean(np.abs(pred - val.values)))

    params, report = training.fit_adam(
        [p.copy() for p in model.params()],
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
    out = model.with_params(params)
    out.value_mean, out.value_std, out.stats_bound = mean, std, True
    out.index_map = train_tensor.index_map
    out.meta = dict(model.meta, config=cfg.as_dict())
    return out, report


def fit(train_tensor, cfg, val=None):
    return neat_train(init_model(train_tensor.shape, cfg), train_tensor, cfg, val)


# -- checkpoints ---------------------------------------------------------------


def to_text(model):
    n_modes = model.shape.ndim
    hidden = model.nets[0].layers[0].n_out
    lines = ["#format tensorprop-neat 1"]
    lines += header_lines(model)
    lines.append(
        f"#arch N={n_modes},R={model.components},d={model.embed_dim},h={hidden}"
    )
    for n, e in enumerate(model.embeddings):
        lines.append(f"#embedding {n} {e.shape[0]} {e.shape[1]} {e.shape[2]}")
        lines += matrix_lines(e.reshape(e.shape[0], -1))
    for r, net in enumerate(model.nets):
        lines.append(f"#component {r}")
        lines += net_to_lines(net)
    return "\n".join(lines) + "\n"


def from_text(text):
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or not lines[0].startswith("#format tensorprop-neat"):
        raise DatasetError("not a NeAT checkpoint")
    head, pos = read_model_header(lines, 1)
    embeddings, nets = [], []
    while pos < len(lines):
        key, *rest = lines[pos][1:].split()
        if key == "embedding":
            rows, r, d = (int(x) for x in rest[1:])
            mat, pos = read_matrix(lines, pos + 1, rows, r * d)
            embeddings.append(mat.reshape(rows, r, d))
        elif key == "component":
            net, pos = net_from_lines(lines, pos + 1)
            nets.append(net)
        else:
            raise DatasetError(f"unexpected line {lines[pos]!r}")
    return NeatModel(
        head["shape"],
        embeddings,
        nets,
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
