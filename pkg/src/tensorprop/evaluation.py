"""Evaluation protocol: MAE over repeated seeded splits, sample dumps, size sweeps.

Every iteration ``i`` of an experiment uses seed ``base_seed + i`` both for
the train/test split and for model initialization/shuffling. The dataset
is always deduplicated before it is split, so no coordinate can appear on
both sides.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import baseline, cpd, neat
from ._io import atomic_write_text, fmt_float
from .errors import ConfigError, TensorPropError
from .sptensor import COUNT, ELEMENT, dedup, split
from .tensorize import TensorizeConfig, decode_formula, tensorize_csv

MODEL_KINDS = ("cpd", "cpd_s", "neat", "mlp")
EXTERNAL_KINDS = ("hgb", "xgb")
CPD_S_DEFAULT_LAMBDA = 0.1

# Train/test sizes per task and the published MAE on deduplicated data for each
# model, kept for side-by-side reporting only.
TASK_PRESETS = {
    "task1": {
        "property": "total magnetization",
        "train_count": 100000,
        "test_count": 50000,
        "reference_mae": {"cpd": 1.179, "cpd_s": 1.254, "neat": 0.907, "hgb": 1.018, "xgb": 1.212, "mlp": 1.403},
    },
    "task2": {
        "property": "formation energy",
        "train_count": 45000,
        "test_count": 4213,
        "reference_mae": {"cpd": 0.344, "cpd_s": 0.369, "neat": 0.277, "hgb": 0.280, "xgb": 0.643, "mlp": 0.677},
    },
    "task3": {
        "property": "band gap",
        "train_count": 45000,
        "test_count": 4213,
        "reference_mae": {"cpd": 0.467, "cpd_s": 0.487, "neat": 0.456, "hgb": 0.774, "xgb": 0.618, "mlp": 0.709},
    },
    "task4": {
        "property": "band gap",
        "train_count": 1500,
        "test_count": 759,
        "reference_mae": {"cpd": 0.428, "cpd_s": 0.396, "neat": 0.426, "hgb": 0.560, "xgb": 0.454, "mlp": 0.567},
        "flag_mae": {"cpd_s": 0.55},
    },
}


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    mae: float
    rmse: float
    count: int


def mae(pairs):
    """Mean absolute error of ``(y, y_hat)`` pairs."""
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("mae of an empty sequence")
    arr = arr.reshape(-1, 2)
    return float(np.mean(np.abs(arr[:, 0] - arr[:, 1])))


def metrics(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.size == 0:
        raise ValueError("y and y_hat must be non-empty and of equal length")
    resid = y - y_hat
    return Metrics(float(np.mean(np.abs(resid))), float(np.sqrt(np.mean(resid * resid))), int(y.size))


# -- model dispatch ------------------------------------------------------------


def build_config(kind, options=None, seed=0):
    """Training config for ``kind`` from a plain dict of overrides."""
    options = dict(options or {})
    options.pop("seed", None)
    try:
        if kind == "cpd":
            return cpd.CPTrainConfig(seed=seed, **options)
        if kind == "cpd_s":
            options.setdefault("smooth_lambda", CPD_S_DEFAULT_LAMBDA)
            cfg = cpd.CPTrainConfig(seed=seed, **options)
            if cfg.smooth_lambda <= 0:
                raise ConfigError("cpd_s needs smooth_lambda > 0")
            return cfg
        if kind == "neat":
            return neat.NeatTrainConfig(seed=seed, **options)
        if kind == "mlp":
            return baseline.MLPTrainConfig(seed=seed, **options)
    except TypeError as exc:
        raise ConfigError(f"bad option for model {kind!r}: {exc}") from None
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def default_trainer(kind, train, options, seed, val=None):
    """Fit a model of ``kind``; returns ``(model, TrainReport)``."""
    cfg = build_config(kind, options, seed)
    if kind in ("cpd", "cpd_s"):
        return cpd.fit(train, cfg, val)
    if kind == "neat":
        return neat.fit(train, cfg, val)
    return baseline.mlp_train(train, cfg, val)


def predict_model(model, coords):
    """Vectorized predictions for any model kind (or any object with ``predict_many``)."""
    if isinstance(model, cpd.CPModel):
        return cpd.predict_many(model, coords)
    if isinstance(model, neat.NeatModel):
        return neat.predict_many(model, coords)
    if isinstance(model, baseline.MLPRegressor):
        return baseline.predict_many(model, coords)
    return np.asarray(model.predict_many(coords), dtype=np.float64)


# -- experiments ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    model_kind: str
    train_count: int
    model_config: dict = field(default_factory=dict)
    iterations: int = 5
    base_seed: int = 0
    dataset: str = None
    tensorize: TensorizeConfig = field(default_factory=TensorizeConfig)

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be >= 0")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model_kind!r}")


@dataclass
class ResultRow:
    model_kind: str
    maes: list
    rmses: list
    seconds: list
    seeds: list
    train_count: int
    test_count: int
    last_model: object = field(default=None, repr=False, compare=False)
    last_test: object = field(default=None, repr=False, compare=False)

    @property
    def mean_mae(self):
        return float(np.mean(self.maes))

    @property
    def std_mae(self):
        # population std over iterations
        return float(np.std(self.maes))

    @property
    def mean_rmse(self):
        return float(np.mean(self.rmses))

    @property
    def mean_seconds(self):
        return float(np.mean(self.seconds))

    def as_dict(self):
        return {
            "model": self.model_kind,
            "train_count": self.train_count,
            "test_count": self.test_count,
            "seeds": list(self.seeds),
            "mae_per_iteration": list(self.maes),
            "mean_mae": self.mean_mae,
            "std_mae": self.std_mae,
            "mean_rmse": self.mean_rmse,
            "train_seconds": list(self.seconds),
            "mean_train_seconds": self.mean_seconds,
        }


def load_dataset(cfg):
    tensor, report = tensorize_csv(cfg.dataset, cfg.tensorize)
    return tensor, report


def _disjoint(train, test):
    a = set(map(tuple, train.coords.tolist()))
    return not any(c in a for c in map(tuple, test.coords.tolist()))


def run_experiment(cfg, tensor=None, trainer=default_trainer):
    """Train and evaluate ``cfg.model_kind`` on ``cfg.iterations`` seeded splits.

    ``tensor`` overrides ``cfg.dataset``. ``trainer(kind, train, options,
    seed)`` must return ``(model, report)`` where ``report`` has a
    ``seconds`` attribute; it defaults to the built-in models.
    """
    if tensor is None:
        if cfg.dataset is None:
            raise ConfigError("experiment needs a dataset path or a tensor")
        tensor, _ = load_dataset(cfg)
    tensor, _ = dedup(tensor, cfg.tensorize.dedup_policy)
    row = ResultRow(cfg.model_kind, [], [], [], [], cfg.train_count, tensor.nnz - cfg.train_count)
    for i in range(cfg.iterations):
        seed = cfg.base_seed + i
        try:
            train, test = split(tensor, cfg.train_count, seed)
            if not _disjoint(train, test):
                raise AssertionError(f"iteration {i}: train and test share coordinates")
            model, report = trainer(cfg.model_kind, train, cfg.model_config, seed)
            m = metrics(test.values, predict_model(model, test.coords))
        except TensorPropError as exc:
            exc.iteration = i
            if exc.args:
                exc.args = (f"iteration {i}: {exc.args[0]}",) + exc.args[1:]
            raise
        row.maes.append(m.mae)
        row.rmses.append(m.rmse)
        row.seconds.append(float(report.seconds))
        row.seeds.append(seed)
        row.last_model, row.last_test = model, test
    return row


@dataclass(frozen=True)
class SamplePrediction:
    label: str
    coord: tuple
    y: float
    y_hat: float


def _label(coord, index_map, shape):
    kinds = shape.mode_kinds
    half = len(kinds) // 2
    if len(kinds) % 2 == 0 and kinds[:half] == (ELEMENT,) * half and kinds[half:] == (COUNT,) * half:
        return decode_formula(coord, index_map)
    return "|".join(index_map.decode(coord))


def sample_predictions(model, test, k, seed):
    """``k`` test entries drawn without replacement, with decoded labels and both values."""
    if not 0 < k <= test.nnz:
        raise ValueError(f"k must satisfy 0 < k <= {test.nnz}, got {k}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(test.nnz, size=k, replace=False)
    coords = test.coords[idx]
    preds = predict_model(model, coords)
    out = []
    for c, y, p in zip(coords.tolist(), test.values[idx].tolist(), preds.tolist()):
        out.append(SamplePrediction(_label(c, test.index_map, test.shape), tuple(c), y, float(p)))
    return out


@dataclass(frozen=True)
class SweepRow:
    model_kind: str
    size: int
    mean_mae: float
    mean_seconds: float


def efficiency_sweep(cfg, train_sizes, tensor=None, trainer=default_trainer):
    """MAE and training time of ``cfg.model_kind`` per training-set size (ascending)."""
    if tensor is None:
        tensor, _ = load_dataset(cfg)
    tensor, _ = dedup(tensor, cfg.tensorize.dedup_policy)
    sizes = sorted(set(int(s) for s in train_sizes))
    if not sizes:
        raise ConfigError("no training sizes given")
    bad = [s for s in sizes if not 0 < s < tensor.nnz]
    if bad:
        raise ConfigError(f"train sizes {bad} not in (0, {tensor.nnz})")
    rows = []
    for size in sizes:
        sub = ExperimentConfig(
            cfg.model_kind, size, cfg.model_config, cfg.iterations, cfg.base_seed, cfg.dataset, cfg.tensorize
        )
        res = run_experiment(sub, tensor, trainer)
        rows.append(SweepRow(cfg.model_kind, size, res.mean_mae, res.mean_seconds))
    return rows


# -- output files --------------------------------------------------------------

RESULT_COLUMNS = (
    "model",
    "source",
    "train_count",
    "test_count",
    "iterations",
    "seeds",
    "mae_per_iteration",
    "mean_mae",
    "std_mae",
    "mean_rmse",
    "reference_mae",
    "flagged",
    "mean_train_seconds",
)
TIMING_COLUMNS = ("mean_train_seconds",)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def results_table(rows, reference=None, flags=None, external=EXTERNAL_KINDS):
    """Rows of ``results.csv``; external models get labeled empty cells."""
    reference = reference or {}
    flags = flags or {}
    table = []
    for r in rows:
        ref = reference.get(r.model_kind)
        limit = flags.get(r.model_kind)
        table.append([
            r.model_kind,
            "tensorprop",
            r.train_count,
            r.test_count,
            len(r.maes),
            ";".join(str(s) for s in r.seeds),
            ";".join(fmt_float(x) for x in r.maes),
            fmt_float(r.mean_mae),
            fmt_float(r.std_mae),
            fmt_float(r.mean_rmse),
            "" if ref is None else fmt_float(ref),
            "" if limit is None else str(r.mean_mae > limit).lower(),
            fmt_float(r.mean_seconds),
        ])
    for kind in external:
        ref = reference.get(kind)
        table.append([kind, "external", "", "", "", "", "", "", "", "", "" if ref is None else fmt_float(ref), "", ""])
    return table


def write_results_csv(path, rows, reference=None, flags=None):
    atomic_write_text(path, _csv_text(RESULT_COLUMNS, results_table(rows, reference, flags)))


def write_samples_csv(path, samples_by_model):
    table = []
    for kind, samples in samples_by_model.items():
        for s in samples:
            table.append([kind, s.label, ";".join(str(i) for i in s.coord), fmt_float(s.y), fmt_float(s.y_hat)])
    atomic_write_text(path, _csv_text(("model", "label", "coord", "y", "y_hat"), table))


def write_sweep_csv(path, sweep_rows):
    table = [[r.model_kind, r.size, fmt_float(r.mean_mae), fmt_float(r.mean_seconds)] for r in sweep_rows]
    atomic_write_text(path, _csv_text(("model", "size", "mae", "seconds"), table))


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
