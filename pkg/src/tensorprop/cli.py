"""Command-line interface.

Subcommands::

    tensorprop tensorize data.csv -o tensor.txt [--report skip.json]
    tensorprop train tensor.txt -o model.ckpt --model cpd_s [--set rank=8 ...]
    tensorprop predict model.ckpt AuBr5
    tensorprop benchmark run.json
    tensorprop sweep run.json --sizes 500,2000,8000

Exit codes: 0 success, 2 bad configuration, 3 dataset/input error,
4 training divergence, 1 anything else. On failure a JSON object
``{"error": ..., "message": ..., "exit_code": ...}`` is written to stderr.

Run configuration (JSON, unknown keys rejected)::

    {
      "dataset": "band_gap.csv",      # formula,value CSV or a tensor file
      "preset": "task4",              # optional: fills train_count
      "train_count": 1500,
      "iterations": 5,
      "base_seed": 0,
      "samples_k": 5,
      "output_dir": "results",
      "tensorize": {"arity": 2, "max_count": 8, ...},
      "models": {"cpd": {}, "cpd_s": {"smooth_lambda": 0.1}},
      "sweep_sizes": [500, 2000, 8000]
    }
"""

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, baseline, cpd, neat
from ._io import atomic_write_text
from .checkpoint import load_model
from .errors import (
    BoundsError,
    ConfigError,
    DatasetError,
    DivergenceError,
    ParseError,
    ShapeError,
    TensorPropError,
)
from .evaluation import (
    MODEL_KINDS,
    TASK_PRESETS,
    ExperimentConfig,
    build_config,
    default_trainer,
    efficiency_sweep,
    predict_model,
    run_experiment,
    sample_predictions,
    write_json,
    write_results_csv,
    write_samples_csv,
    write_sweep_csv,
)
from .sptensor import COUNT, SparseTensor
from .tensorize import TensorizeConfig, coordinate_of, parse_formula, tensorize_csv

EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_DIVERGENCE = 4

RUN_KEYS = {
    "dataset",
    "preset",
    "train_count",
    "iterations",
    "base_seed",
    "samples_k",
    "output_dir",
    "tensorize",
    "models",
    "sweep_sizes",
}
TENSORIZE_KEYS = set(TensorizeConfig.__dataclass_fields__)


@dataclass
class RunConfig:
    dataset: str
    train_count: int
    preset: str = None
    iterations: int = 5
    base_seed: int = 0
    samples_k: int = 5
    output_dir: str = "results"
    tensorize: TensorizeConfig = field(default_factory=TensorizeConfig)
    models: dict = field(default_factory=lambda: {k: {} for k in MODEL_KINDS})
    sweep_sizes: list = None

    @classmethod
    def from_dict(cls, raw, base_dir=None):
        if not isinstance(raw, dict):
            raise ConfigError("run config must be a JSON object")
        unknown = set(raw) - RUN_KEYS
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        raw = dict(raw)
        preset = raw.get("preset")
        if preset is not None:
            if preset not in TASK_PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(TASK_PRESETS)}")
            raw.setdefault("train_count", TASK_PRESETS[preset]["train_count"])
        for key in ("dataset", "train_count"):
            if key not in raw:
                raise ConfigError(f"run config needs {key!r}")
        tz = raw.get("tensorize", {})
        if not isinstance(tz, dict) or set(tz) - TENSORIZE_KEYS:
            raise ConfigError(f"unknown tensorize keys: {sorted(set(tz) - TENSORIZE_KEYS)}")
        models = raw.get("models", {k: {} for k in MODEL_KINDS})
        if not isinstance(models, dict) or not models:
            raise ConfigError("models must be a non-empty object mapping kind -> options")
        for kind, opts in models.items():
            if kind not in MODEL_KINDS:
                raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
            if not isinstance(opts, dict):
                raise ConfigError(f"options for {kind!r} must be an object")
            build_config(kind, opts)  # validates option names and values
        dataset = raw["dataset"]
        if base_dir is not None and not Path(dataset).is_absolute():
            dataset = str(Path(base_dir) / dataset)
        for key in ("train_count", "iterations", "base_seed", "samples_k"):
            if key in raw and (not isinstance(raw[key], int) or isinstance(raw[key], bool)):
                raise ConfigError(f"{key} must be an integer")
        cfg = cls(
            dataset=dataset,
            train_count=raw["train_count"],
            preset=preset,
            iterations=raw.get("iterations", 5),
            base_seed=raw.get("base_seed", 0),
            samples_k=raw.get("samples_k", 5),
            output_dir=raw.get("output_dir", "results"),
            tensorize=TensorizeConfig(**tz),
            models={k: dict(v) for k, v in models.items()},
            sweep_sizes=raw.get("sweep_sizes"),
        )
        if cfg.iterations < 1 or cfg.base_seed < 0 or cfg.samples_k < 0:
            raise ConfigError("iterations must be >= 1, base_seed >= 0, samples_k >= 0")
        return cfg

    @classmethod
    def load(cls, path):
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read run config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"run config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw, base_dir=Path(path).parent)

    def resolved(self):
        """Fully resolved config echo (output location excluded)."""
        return {
            "dataset": self.dataset,
            "preset": self.preset,
            "train_count": self.train_count,
            "iterations": self.iterations,
            "base_seed": self.base_seed,
            "seeds": [self.base_seed + i for i in range(self.iterations)],
            "samples_k": self.samples_k,
            "tensorize": self.tensorize.as_dict(),
            "models": {k: build_config(k, v, self.base_seed).as_dict() for k, v in self.models.items()},
            "sweep_sizes": self.sweep_sizes,
        }

    def experiment(self, kind):
        return ExperimentConfig(
            kind, self.train_count, self.models[kind], self.iterations, self.base_seed, self.dataset, self.tensorize
        )


def load_dataset(path, tz_cfg):
    """A ``formula,value`` CSV or a serialized tensor; returns ``(tensor, skip_report_dict)``."""
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as exc:
        raise DatasetError(f"cannot open dataset {path}: {exc}") from exc
    if first.startswith("#format tensorprop-sptensor"):
        return SparseTensor.load(path), None
    tensor, report = tensorize_csv(path, tz_cfg)
    return tensor, report.as_dict()


def _config_comment(cfg):
    return "# config: " + json.dumps(cfg, sort_keys=True) + "\n"


def _prepend(path, line):
    path = Path(path)
    atomic_write_text(path, line + path.read_text(encoding="utf-8"))


# -- subcommands ---------------------------------------------------------------


def cmd_tensorize(args):
    tz = TensorizeConfig(
        arity=args.arity,
        max_count=args.max_count,
        count_policy=args.count_policy,
        noninteger_policy=args.noninteger_policy,
        dedup_policy=args.dedup_policy,
        validate_symbols=not args.no_validate_symbols,
    )
    tensor, report = tensorize_csv(args.input, tz)
    tensor.save(args.output, {"input": str(args.input), "tensorize": tz.as_dict()})
    out = {"output": str(args.output), "nnz": tensor.nnz, "dims": list(tensor.shape.dims),
           "tensorize": tz.as_dict(), "skip_report": report.as_dict()}
    if args.report:
        write_json(args.report, out)
    if args.json:
        print(json.dumps(out, sort_keys=True))
    return 0


def _parse_sets(pairs):
    options = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        try:
            options[key] = json.loads(value)
        except json.JSONDecodeError:
            options[key] = value
    return options


def cmd_train(args):
    options = {}
    if args.config:
        try:
            options = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read model config {args.config}: {exc}") from exc
        if not isinstance(options, dict):
            raise ConfigError("model config must be a JSON object")
    options.update(_parse_sets(args.set))
    tensor = SparseTensor.load(args.tensor)
    model, report = default_trainer(args.model, tensor, options, args.seed)
    model.meta = dict(model.meta, kind=args.model, seed=args.seed)
    module = {"cpd": cpd, "cpd_s": cpd, "neat": neat, "mlp": baseline}[args.model]
    module.save(model, args.output)
    out = {"model": args.model, "seed": args.seed, "checkpoint": str(args.output),
           "config": build_config(args.model, options, args.seed).as_dict(), "train_report": report.as_dict()}
    if args.report:
        write_json(args.report, out)
    else:
        print(json.dumps(out, sort_keys=True))
    return 0


def cmd_predict(args):
    _, model = load_model(args.checkpoint)
    shape = model.shape
    if model.index_map is None:
        raise DatasetError("checkpoint has no labels; cannot map a formula to a coordinate")
    arity = len(shape.modes_of_kind(COUNT))
    if arity == 0 or shape.ndim != 2 * arity:
        raise DatasetError("checkpoint does not describe a formula tensor")
    tz = TensorizeConfig(arity=arity, max_count=shape.dims[arity])
    comp = parse_formula(args.formula)
    try:
        coord = coordinate_of(comp, model.index_map, tz)
    except KeyError as exc:
        raise DatasetError(f"element not seen in training data: {exc}") from None
    if not isinstance(coord, tuple):
        raise DatasetError(f"formula {args.formula!r} cannot be encoded: {coord.value}")
    print(format(float(predict_model(model, [coord])[0]), ".17g"))
    return 0


def run_benchmark(cfg, output_dir=None):
    """Run every configured model; writes results.csv, samples.csv, report.json."""
    out_dir = Path(output_dir or cfg.output_dir)
    tensor, skip = load_dataset(cfg.dataset, cfg.tensorize)
    preset = TASK_PRESETS.get(cfg.preset, {})
    rows, samples = [], {}
    for kind in cfg.models:
        row = run_experiment(cfg.experiment(kind), tensor)
        rows.append(row)
        if cfg.samples_k:
            k = min(cfg.samples_k, row.last_test.nnz)
            samples[kind] = sample_predictions(row.last_model, row.last_test, k, row.seeds[-1])
    echo = cfg.resolved()
    write_results_csv(out_dir / "results.csv", rows, preset.get("reference_mae"), preset.get("flag_mae"))
    _prepend(out_dir / "results.csv", _config_comment(echo))
    write_samples_csv(out_dir / "samples.csv", samples)
    _prepend(out_dir / "samples.csv", _config_comment(echo))
    report = {
        "version": __version__,
        "config": echo,
        "output_dir": str(out_dir),
        "skip_report": skip,
        "dataset_entries": tensor.nnz,
        "results": [r.as_dict() for r in rows],
    }
    if preset:
        report["preset"] = {k: v for k, v in preset.items()}
    write_json(out_dir / "report.json", report)
    return rows, report


def cmd_benchmark(args):
    cfg = RunConfig.load(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    rows, _ = run_benchmark(cfg)
    for r in rows:
        print(f"{r.model_kind}\tmean_mae={r.mean_mae:.6g}\tstd={r.std_mae:.3g}")
    return 0


def run_sweep(cfg, sizes, output_dir=None):
    out_dir = Path(output_dir or cfg.output_dir)
    tensor, _ = load_dataset(cfg.dataset, cfg.tensorize)
    rows = []
    for kind in cfg.models:
        rows.extend(efficiency_sweep(cfg.experiment(kind), sizes, tensor))
    echo = dict(cfg.resolved(), sweep_sizes=sorted(set(sizes)))
    write_sweep_csv(out_dir / "sweep.csv", rows)
    _prepend(out_dir / "sweep.csv", _config_comment(echo))
    return rows


def cmd_sweep(args):
    cfg = RunConfig.load(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.sizes:
        try:
            sizes = [int(s) for s in args.sizes.split(",")]
        except ValueError:
            raise ConfigError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    elif cfg.sweep_sizes:
        sizes = list(cfg.sweep_sizes)
    else:
        raise ConfigError("no sweep sizes: pass --sizes or set sweep_sizes in the config")
    for r in run_sweep(cfg, sizes):
        print(f"{r.model_kind}\t{r.size}\tmae={r.mean_mae:.6g}\tseconds={r.mean_seconds:.3g}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="tensorprop", description="Tensor completion for composition-based property prediction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tensorize", help="encode a formula,value CSV as a sparse tensor file")
    t.add_argument("input")
    t.add_argument("-o", "--output", required=True)
    t.add_argument("--arity", type=int, default=2)
    t.add_argument("--max-count", type=int, default=8)
    t.add_argument("--count-policy", choices=("skip", "clip"), default="skip")
    t.add_argument("--noninteger-policy", choices=("skip", "round"), default="skip")
    t.add_argument("--dedup-policy", choices=("mean", "first", "drop_all"), default="mean")
    t.add_argument("--no-validate-symbols", action="store_true")
    t.add_argument("--report", help="write the skip report JSON here")
    t.add_argument("--json", action="store_true", help="print the skip report JSON to stdout")
    t.set_defaults(func=cmd_tensorize)

    tr = sub.add_parser("train", help="train one model on a tensor file")
    tr.add_argument("tensor")
    tr.add_argument("-o", "--output", required=True)
    tr.add_argument("--model", choices=MODEL_KINDS, default="cpd")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--config", help="JSON file of model options")
    tr.add_argument("--set", action="append", metavar="KEY=VALUE", help="model option override (JSON value)")
    tr.add_argument("--report", help="write the train report JSON here instead of stdout")
    tr.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict the property of a formula from a checkpoint")
    pr.add_argument("checkpoint")
    pr.add_argument("formula")
    pr.set_defaults(func=cmd_predict)

    b = sub.add_parser("benchmark", help="repeated-split MAE for every configured model")
    b.add_argument("config")
    b.add_argument("--output-dir")
    b.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("sweep", help="MAE and train time versus training-set size")
    s.add_argument("config")
    s.add_argument("--sizes", help="comma-separated training sizes")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_sweep)
    return p


def _exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, (DatasetError, ParseError, BoundsError, ShapeError)):
        return EXIT_DATASET
    return 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TensorPropError as exc:
        code = _exit_code(exc)
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
