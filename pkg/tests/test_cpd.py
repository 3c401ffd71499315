import numpy as np
import pytest
from helpers import fd_check

from tensorprop import cpd
from tensorprop.cpd import CPModel, CPTrainConfig, objective, smoothness_penalty
from tensorprop.errors import ConfigError, DivergenceError, StateError
from tensorprop.sptensor import COUNT, ELEMENT, Shape, SparseTensor
from tensorprop.synthetic import observe, planted_cp


def _instance(seed, dims=(4, 3, 4, 2), rank=2, batch=12):
    rng = np.random.default_rng(seed)
    factors = [rng.normal(size=(d, rank)) for d in dims]
    coords = np.stack([rng.integers(0, d, batch) for d in dims], axis=1)
    return factors, coords, rng.normal(size=batch)


@pytest.mark.parametrize("seed", range(5))
def test_objective_gradient(seed):
    factors, coords, targets = _instance(seed)

    def loss(params):
        return objective(params, coords, targets, l2=0.03, smooth_lambda=0.7, ordinal_modes=(2, 3), reg_weight=0.5)

    assert fd_check(loss, factors) < 1e-4


def test_smoothness_penalty_example():
    f = [np.zeros((2, 1)), np.array([[0.0], [1.0], [3.0]])]
    assert smoothness_penalty(f, (1,)) == 5.0
    assert smoothness_penalty(f, ()) == 0.0


def test_smoothness_penalty_additive_over_modes():
    rng = np.random.default_rng(0)
    f = [rng.normal(size=(d, 3)) for d in (4, 5, 6)]
    total = smoothness_penalty(f, (0, 2))
    assert total == pytest.approx(smoothness_penalty(f, (0,)) + smoothness_penalty(f, (2,)), rel=1e-12)
    shifted = [f[0] + 7.0, f[1], f[2]]
    assert smoothness_penalty(shifted, (0,)) == pytest.approx(smoothness_penalty(f, (0,)), rel=1e-10)


def test_predict_is_sum_of_rank_one_products():
    shape = Shape((2, 3), (ELEMENT, COUNT))
    a = np.array([[1.0, 2.0], [0.0, -1.0]])
    b = np.array([[1.0, 0.5], [2.0, 1.0], [3.0, 0.0]])
    m = CPModel(shape, [a, b], value_mean=10.0, value_std=2.0, stats_bound=True)
    assert cpd.predict_raw(m, (0, 1)) == 1 * 2 + 2 * 1
    assert cpd.predict(m, (0, 1)) == 10.0 + 2.0 * 4.0
    np.testing.assert_array_equal(cpd.predict_many(m, [(0, 1), (1, 0)]), [18.0, 9.0])


def test_untrained_model_has_no_stats():
    shape = Shape((2, 2), (ELEMENT, COUNT))
    m = cpd.init_model(shape, CPTrainConfig(rank=2))
    with pytest.raises(StateError):
        cpd.predict(m, (0, 0))


def _toy(seed=0):
    tensor, _ = planted_cp((5, 5, 4, 4), 2, seed=seed)
    return observe(tensor, 0.6, seed=seed)


def test_training_is_deterministic():
    t = _toy()
    cfg = CPTrainConfig(rank=2, epochs=5)
    m1, r1 = cpd.fit(t, cfg)
    m2, r2 = cpd.fit(t, cfg)
    assert r1.snapshot_id == r2.snapshot_id
    assert r1.losses == r2.losses
    m3, r3 = cpd.fit(t, CPTrainConfig(rank=2, epochs=5, seed=1))
    assert r3.snapshot_id != r1.snapshot_id


def test_zero_epochs_returns_initial_factors():
    t = _toy()
    cfg = CPTrainConfig(rank=2, epochs=0)
    init = cpd.init_model(t.shape, cfg)
    m, rep = cpd.train(init, t, cfg)
    assert rep.epochs_run == 0
    for a, b in zip(init.factors, m.factors):
        np.testing.assert_array_equal(a, b)
    assert m.value_mean == pytest.approx(t.values.mean())


def test_shift_of_targets_moves_only_the_mean():
    t = _toy()
    cfg = CPTrainConfig(rank=2, epochs=3)
    m1, _ = cpd.fit(t, cfg)
    m2, _ = cpd.fit(t.with_values(t.values + 100.0), cfg)
    np.testing.assert_allclose(cpd.predict_many(m2, t.coords) - 100.0, cpd.predict_many(m1, t.coords), atol=1e-9)


def test_training_reduces_loss():
    _, rep = cpd.fit(_toy(), CPTrainConfig(rank=2, epochs=40, batch_size=16))
    assert rep.losses[-1] < 0.5 * rep.losses[0]


def test_divergence_is_reported():
    with pytest.raises(DivergenceError):
        cpd.fit(_toy(), CPTrainConfig(rank=2, epochs=20, learning_rate=1e100))


def test_duplicated_training_tensor_rejected():
    shape = Shape((2, 2), (ELEMENT, COUNT))
    t = SparseTensor(shape, [(0, 0), (0, 0)], [1.0, 2.0])
    with pytest.raises(ConfigError):
        cpd.fit(t, CPTrainConfig(rank=1))


def test_early_stopping_restores_best():
    t = _toy()
    val = observe(planted_cp((5, 5, 4, 4), 2, seed=0)[0], 0.3, seed=9)
    m, rep = cpd.fit(t, CPTrainConfig(rank=2, epochs=200, patience=3), val)
    assert rep.best_epoch is not None
    assert rep.val_mae[rep.best_epoch] == min(rep.val_mae)
    pred = cpd.predict_many(m, val.coords)
    assert np.mean(np.abs(pred - val.values)) == pytest.approx(min(rep.val_mae), rel=1e-12)


def test_checkpoint_round_trip_is_bitwise(tmp_path):
    m, _ = cpd.fit(_toy(), CPTrainConfig(rank=2, epochs=2, smooth_lambda=0.1))
    path = tmp_path / "m.ckpt"
    cpd.save(m, path)
    back = cpd.load(path)
    for a, b in zip(m.factors, back.factors):
        assert a.tobytes() == b.tobytes()
    assert (back.value_mean, back.value_std, back.stats_bound) == (m.value_mean, m.value_std, True)
    assert back.meta["config"]["smooth_lambda"] == 0.1
    coords = _toy().coords
    assert cpd.predict_many(back, coords).tobytes() == cpd.predict_many(m, coords).tobytes()
