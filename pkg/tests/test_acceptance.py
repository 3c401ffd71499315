"""Acceptance gate. Each test prints one PASS/FAIL line for its criterion.

Run standalone with ``pytest tests/test_acceptance.py -v -s``; the lines
are also repeated in the terminal summary of a normal pytest run.
Criterion 10 needs a user-supplied band-gap CSV named by the
``TENSORPROP_TASK4_CSV`` environment variable and is skipped otherwise.
"""

import json
import os
import time

import numpy as np
import pytest
from helpers import ACCEPTANCE_LINES, fd_check, verdict

from tensorprop import baseline, cli, cpd, neat
from tensorprop import evaluation as ev
from tensorprop.cpd import CPTrainConfig
from tensorprop.neat import NeatTrainConfig
from tensorprop.neural import init_net
from tensorprop.sptensor import COUNT, ELEMENT, Shape, SparseTensor, split
from tensorprop.synthetic import all_coords, formula_records, planted_cp, write_formula_csv
from tensorprop.tensorize import TensorizeConfig, coordinate_of, make_index_map, parse_formula, tensorize

# tolerances
RECOVERY_FRACTION = 0.05
RECOVERY_SECONDS = 60.0
EXACT_REL_ERR = 1e-3
EXACT_SECONDS = 10.0
FD_STEP = 1e-5
FD_REL_ERR = 1e-4
SMOOTH_LAMBDA = 10.0
SMOOTH_MAE_RATIO = 2.0
MAE_REL = 1e-12
REDUNDANCY_SEEDS = 100
SWEEP_SIZES = (500, 2000, 8000)
SWEEP_SECONDS = 300.0
TASK4_FLAG = 0.55

PLANTED_DIMS = (15, 15, 10, 10)
PLANTED_RANK = 3
PLANTED_SEED = 0
OBSERVED = int(round(0.2 * np.prod(PLANTED_DIMS)))


@pytest.fixture(scope="module")
def planted_split():
    tensor, _ = planted_cp(PLANTED_DIMS, PLANTED_RANK, seed=PLANTED_SEED)
    return split(tensor, OBSERVED, seed=PLANTED_SEED)


def _held_out_mae(model, test):
    return float(np.mean(np.abs(cpd.predict_many(model, test.coords) - test.values)))


@pytest.fixture(scope="module")
def unregularized(planted_split):
    train, test = planted_split
    start = time.perf_counter()
    model, _ = cpd.fit(train, CPTrainConfig(rank=PLANTED_RANK))
    return model, _held_out_mae(model, test), time.perf_counter() - start


def test_criterion_1_synthetic_cp_recovery(planted_split, unregularized):
    _, test = planted_split
    _, err, seconds = unregularized
    limit = RECOVERY_FRACTION * float(test.values.std())
    ok = err <= limit and seconds <= RECOVERY_SECONDS
    verdict(1, ok, f"held-out MAE {err:.4g} <= {limit:.4g} (0.05 std); {seconds:.1f}s <= 60s")


def test_criterion_2_exact_rank_one_fit():
    # factors bounded away from zero keep the relative error well defined
    tensor, _ = planted_cp((6, 6, 5, 5), 1, seed=0, standardize=False, low=0.5, high=1.5)
    start = time.perf_counter()
    model, _ = cpd.fit(tensor, CPTrainConfig(rank=1, l2=0.0, center=False))
    seconds = time.perf_counter() - start
    rel = np.abs(cpd.predict_many(model, tensor.coords) - tensor.values) / np.abs(tensor.values)
    ok = rel.max() < EXACT_REL_ERR and seconds <= EXACT_SECONDS
    verdict(2, ok, f"max relative error {rel.max():.3g} < 1e-3; {seconds:.2f}s <= 10s")


def _cpd_case(rng):
    dims = tuple(rng.integers(2, 5, size=4))
    rank = int(rng.integers(1, 3))
    factors = [rng.normal(size=(d, rank)) for d in dims]
    coords = np.stack([rng.integers(0, d, 8) for d in dims], axis=1)
    targets = rng.normal(size=8)
    return fd_check(
        lambda p: cpd.objective(p, coords, targets, 0.01, 0.5, (2, 3), 1.0), factors, FD_STEP
    )


def _neat_case(rng):
    dims = tuple(int(d) for d in rng.integers(2, 5, size=4))
    shape = Shape(dims, (ELEMENT, ELEMENT, COUNT, COUNT))
    cfg = NeatTrainConfig(
        components=int(rng.integers(1, 3)),
        embed_dim=int(rng.integers(1, 3)),
        hidden=int(rng.integers(1, 4)),
        init_scale=1.0,
        seed=int(rng.integers(1000)),
    )
    model = neat.init_model(shape, cfg)
    model = model.with_params([p + rng.normal(0, 0.3, p.shape) for p in model.params()])
    coords = all_coords(dims)[rng.choice(int(np.prod(dims)), 8, replace=False)]
    targets = rng.normal(size=8)
    return fd_check(
        lambda p: neat.objective(model.with_params(p), coords, targets, 0.01), model.params(), FD_STEP
    )


def _mlp_case(rng):
    dims = tuple(int(d) for d in rng.integers(2, 5, size=4))
    shape = Shape(dims, (ELEMENT, ELEMENT, COUNT, COUNT))
    net = init_net((sum(dims), int(rng.integers(1, 4)), 1), rng)
    net = net.with_params([p + rng.normal(0, 0.3, p.shape) for p in net.params()])
    x = baseline.OneHotEncoder(shape).encode_many(all_coords(dims)[rng.choice(int(np.prod(dims)), 8, replace=False)])
    targets = rng.normal(size=8)
    return fd_check(lambda p: baseline.objective(net.with_params(p), x, targets, 0.01), net.params(), FD_STEP)


def test_criterion_3_gradient_checks():
    rng = np.random.default_rng(2024)
    worst = {
        "cpd": max(_cpd_case(rng) for _ in range(5)),
        "neat": max(_neat_case(rng) for _ in range(5)),
        "mlp": max(_mlp_case(rng) for _ in range(5)),
    }
    ok = all(v < FD_REL_ERR for v in worst.values())
    detail = ", ".join(f"{k} {v:.2g}" for k, v in worst.items())
    verdict(3, ok, f"max relative FD error ({detail}) < 1e-4")


def test_criterion_4_smoothness_effect(planted_split, unregularized):
    train, test = planted_split
    plain, plain_mae, _ = unregularized
    smooth, _ = cpd.fit(train, CPTrainConfig(rank=PLANTED_RANK, smooth_lambda=SMOOTH_LAMBDA))
    smooth_mae = _held_out_mae(smooth, test)
    modes = train.shape.modes_of_kind(COUNT)
    s_plain = cpd.smoothness_penalty(plain, modes)
    s_smooth = cpd.smoothness_penalty(smooth, modes)
    ok = s_smooth < s_plain and smooth_mae <= SMOOTH_MAE_RATIO * plain_mae
    verdict(
        4,
        ok,
        f"penalty {s_smooth:.4g} < {s_plain:.4g}; MAE {smooth_mae:.4g} <= 2 x {plain_mae:.4g}",
    )


def test_criterion_5_mae():
    exact = ev.mae([(1, 2), (3, 5)]) == 1.5
    rng = np.random.default_rng(5)
    worst_t = worst_h = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 50))
        y, p = rng.normal(size=n), rng.normal(size=n)
        c, a = rng.normal() * 10, rng.uniform(0.1, 10)
        base = ev.mae(zip(y, p))
        worst_t = max(worst_t, abs(ev.mae(zip(y + c, p + c)) - base) / base)
        worst_h = max(worst_h, abs(ev.mae(zip(a * y, a * p)) - a * base) / (a * base))
    ok = exact and worst_t <= MAE_REL and worst_h <= MAE_REL
    verdict(5, ok, f"mae example exact={exact}; translation {worst_t:.2g}, homogeneity {worst_h:.2g} <= 1e-12")


def test_criterion_6_tensorization():
    cfg = TensorizeConfig()
    maps = make_index_map(["Au", "Br", "Cl", "Na"], cfg)
    coord = coordinate_of(parse_formula("AuBr5"), maps, cfg)
    expected = (maps.index(0, "Au"), maps.index(1, "Br"), 0, 4)
    permuted = coordinate_of(parse_formula("Br5Au"), maps, cfg) == coord

    records = formula_records(n_elements=8, max_count=4, seed=1)
    injected = [("", 1.0), ("Xx3", 1.0), ("Au(Br)2", 1.0), ("FeO2Al", 1.0), ("Na", 1.0), ("NaCl9", 1.0), ("Na1.5Cl", 1.0)]
    _, rep = tensorize(records + injected, TensorizeConfig(max_count=4))
    conserved = rep.encoded + rep.total_skipped == rep.ingested == len(records) + len(injected)
    counted = rep.skipped == {"parse_error": 3, "wrong_arity": 2, "count_overflow": 1, "noninteger_count": 1}
    ok = coord == expected and permuted and conserved and counted
    verdict(6, ok, f"AuBr5 -> {coord} (expected {expected}); permutation invariant={permuted}; conservation={conserved and counted}")


class _MeanModel:
    def __init__(self, value):
        self.value = value

    def predict_many(self, coords):
        return np.full(len(coords), self.value)


class _NoTiming:
    seconds = 0.0


def test_criterion_7_dedup_before_split():
    # adversarial corpus: every coordinate repeated, some many times, with conflicting values
    shape = Shape((3, 3, 2, 2), (ELEMENT, ELEMENT, COUNT, COUNT))
    cells = all_coords(shape.dims)[:20]
    rng = np.random.default_rng(7)
    reps = rng.integers(2, 6, size=len(cells))
    coords = np.repeat(cells, reps, axis=0)
    order = rng.permutation(len(coords))
    raw = SparseTensor(shape, coords[order], rng.normal(size=len(coords)))
    leaks = 0
    seen = {}

    def spy(kind, train, options, seed, val=None):
        seen["train"] = train
        return _MeanModel(float(train.values.mean())), _NoTiming()

    for seed in range(REDUNDANCY_SEEDS):
        row = ev.run_experiment(ev.ExperimentConfig("cpd", 12, iterations=1, base_seed=seed), raw, spy)
        if seen["train"].coord_set() & row.last_test.coord_set():
            leaks += 1
    verdict(7, leaks == 0, f"{leaks} of {REDUNDANCY_SEEDS} seeds placed a coordinate in both train and test")


def _strip_timing(text):
    lines = text.splitlines()
    header = lines[1].split(",")
    drop = [header.index(c) for c in ev.TIMING_COLUMNS]
    return [[f for i, f in enumerate(ln.split(",")) if i not in drop] for ln in lines]


def test_criterion_8_benchmark_determinism(tmp_path):
    data = tmp_path / "data.csv"
    write_formula_csv(data, formula_records(n_elements=10, max_count=5, noise=0.05, seed=3))
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "dataset": data.name,
        "train_count": 400,
        "iterations": 2,
        "tensorize": {"max_count": 5},
        "models": {"cpd": {"epochs": 50}, "cpd_s": {"epochs": 50}, "neat": {"epochs": 20}, "mlp": {"epochs": 20}},
    }))
    outputs = []
    for name in ("a", "b"):
        assert cli.main(["benchmark", str(cfg), "--output-dir", str(tmp_path / name)]) == 0
        outputs.append(_strip_timing((tmp_path / name / "results.csv").read_text()))
    same = outputs[0] == outputs[1]
    verdict(8, same, "results.csv identical across two runs (timing column excluded)")


def test_criterion_9_efficiency_sweep(tmp_path):
    tensor, _ = planted_cp(PLANTED_DIMS, PLANTED_RANK, seed=1)
    data = tmp_path / "planted.txt"
    tensor.save(data)
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "dataset": data.name,
        "train_count": SWEEP_SIZES[-1],
        "iterations": 1,
        "models": {k: {} for k in ev.MODEL_KINDS},
    }))
    start = time.perf_counter()
    code = cli.main(["sweep", str(cfg), "--sizes", ",".join(map(str, SWEEP_SIZES)), "--output-dir", str(tmp_path)])
    seconds = time.perf_counter() - start
    lines = (tmp_path / "sweep.csv").read_text().splitlines()[2:]
    rows = {(r.split(",")[0], int(r.split(",")[1])): float(r.split(",")[2]) for r in lines}
    one_per_pair = len(lines) == len(rows) == len(ev.MODEL_KINDS) * len(SWEEP_SIZES)
    one_per_pair = one_per_pair and set(rows) == {(k, s) for k in ev.MODEL_KINDS for s in SWEEP_SIZES}
    small, large = rows.get(("cpd", SWEEP_SIZES[0])), rows.get(("cpd", SWEEP_SIZES[-1]))
    ok = code == 0 and one_per_pair and large <= small and seconds <= SWEEP_SECONDS
    verdict(9, ok, f"{len(lines)} rows; cpd MAE {large:.4g} @8000 <= {small:.4g} @500; {seconds:.0f}s <= 300s")


@pytest.mark.skipif(not os.environ.get("TENSORPROP_TASK4_CSV"), reason="set TENSORPROP_TASK4_CSV to a band-gap CSV")
def test_criterion_10_task4_report(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "dataset": os.path.abspath(os.environ["TENSORPROP_TASK4_CSV"]),
        "preset": "task4",
        "models": {"cpd_s": {}},
    }))
    code = cli.main(["benchmark", str(cfg), "--output-dir", str(tmp_path)])
    report = json.loads((tmp_path / "report.json").read_text())
    mae = report["results"][0]["mean_mae"]
    flagged = mae > TASK4_FLAG
    ok = code == 0 and (tmp_path / "results.csv").exists() and len(report["results"][0]["mae_per_iteration"]) == 5
    verdict(10, ok, f"cpd_s mean MAE {mae:.4g} (reference 0.396){' FLAGGED > 0.55' if flagged else ''}")


def test_criterion_10_skip_line():
    if not os.environ.get("TENSORPROP_TASK4_CSV"):
        ACCEPTANCE_LINES.append("SKIP criterion 10: no user-supplied band-gap CSV (TENSORPROP_TASK4_CSV unset)")
        print(ACCEPTANCE_LINES[-1])
