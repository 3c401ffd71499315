"""Header block shared by the CP, NeAT and MLP checkpoint files.

Every checkpoint starts with ``#format tensorprop-<kind> 1`` followed by
``#shape``, ``#kinds``, optional ``#labels mode=k: ...`` lines, a ``#meta``
JSON line (training config echo, tensorize config) and the target
statistics. Model-specific sections follow. Floats are written with 17
significant digits so that a reload reproduces predictions bit for bit.
"""

import json
from pathlib import Path

from ._io import fmt_float, tensor_header_lines
from .errors import DatasetError
from .sptensor import IndexMap, Shape

KINDS = ("cpd", "neat", "mlp")


def header_lines(model):
    lines = tensor_header_lines(model.shape, model.index_map)
    lines.append("#meta " + json.dumps(model.meta, sort_keys=True))
    lines.append(f"#stats_bound {int(model.stats_bound)}")
    lines.append("#value_mean " + fmt_float(model.value_mean))
    lines.append("#value_std " + fmt_float(model.value_std))
    return lines


def read_model_header(lines, pos):
    """Parse header lines from ``lines[pos]`` on; returns ``(fields, next_pos)``.

    Stops at the first ``#`` line whose key is not a known header key.
    """
    dims = kinds = None
    labels = {}
    head = {"meta": {}, "stats_bound": False, "value_mean": 0.0, "value_std": 0.0}
    while pos < len(lines) and lines[pos].startswith("#"):
        key, _, value = lines[pos][1:].partition(" ")
        if key == "shape":
            dims = tuple(int(x) for x in value.split(","))
        elif key == "kinds":
            kinds = tuple(value.split(","))
        elif key == "labels":
            mode, _, labs = value.partition(": ")
            labels[int(mode[5:])] = tuple(labs.split(","))
        elif key == "meta":
            head["meta"] = json.loads(value)
        elif key == "stats_bound":
            head["stats_bound"] = bool(int(value))
        elif key in ("value_mean", "value_std"):
            head[key] = float(value)
        elif key in ("rank", "arch"):
            head[key] = value
        else:
            break
        pos += 1
    if dims is None or kinds is None:
        raise DatasetError("checkpoint lacks #shape/#kinds")
    head["shape"] = Shape(dims, kinds)
    head["index_map"] = IndexMap(tuple(labels[n] for n in range(len(dims)))) if labels else None
    return head, pos


def checkpoint_kind(text):
    first = text.split("\n", 1)[0]
    for kind in KINDS:
        if first.startswith(f"#format tensorprop-{kind} "):
            return kind
    raise DatasetError(f"unrecognized checkpoint format line {first!r}")


def load_model(path):
    """Load any checkpoint; returns ``(kind, model)``."""
    from . import baseline, cpd, neat

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read checkpoint {path}: {exc}") from exc
    kind = checkpoint_kind(text)
    module = {"cpd": cpd, "neat": neat, "mlp": baseline}[kind]
    return kind, module.from_text(text)
