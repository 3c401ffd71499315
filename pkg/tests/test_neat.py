import numpy as np
import pytest
from helpers import fd_check

from tensorprop import neat
from tensorprop.errors import StateError
from tensorprop.neat import NeatModel, NeatTrainConfig
from tensorprop.neural import DenseNet, Layer
from tensorprop.sptensor import COUNT, ELEMENT, Shape, SparseTensor, split
from tensorprop.synthetic import all_coords, observe, planted_cp

SHAPE = Shape((4, 3, 2, 3), (ELEMENT, ELEMENT, COUNT, COUNT))


def _model(seed, components=2, d=2, h=3):
    cfg = NeatTrainConfig(components=components, embed_dim=d, hidden=h, seed=seed, init_scale=1.0)
    m = neat.init_model(SHAPE, cfg)
    rng = np.random.default_rng(seed + 100)
    # nonzero biases so every parameter is exercised
    return m.with_params([p + rng.normal(0, 0.3, p.shape) for p in m.params()])


def _scalar_eval(model, coord):
    """Direct loop implementation of the model equation."""
    total = 0.0
    for r, net in enumerate(model.nets):
        x = np.concatenate([model.embeddings[n][coord[n], r] for n in range(len(coord))])
        w1, b1 = net.layers[0].weights, net.layers[0].bias
        w2, b2 = net.layers[1].weights, net.layers[1].bias
        hidden = [max(0.0, sum(w1[j, i] * x[i] for i in range(len(x))) + b1[j]) for j in range(len(b1))]
        total += sum(w2[0, j] * hidden[j] for j in range(len(hidden))) + b2[0]
    return total


def test_matches_scalar_evaluator():
    m = _model(0)
    coords = all_coords(SHAPE.dims)
    fast = neat.predict_raw_many(m, coords)
    slow = [_scalar_eval(m, c) for c in coords.tolist()]
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-12)


def test_zero_heads_predict_the_mean():
    m = _model(1)
    nets = [
        DenseNet((net.layers[0], Layer(np.zeros_like(net.layers[1].weights), np.zeros(1))))
        for net in m.nets
    ]
    z = NeatModel(SHAPE, m.embeddings, nets, value_mean=2.5, value_std=3.0, stats_bound=True)
    np.testing.assert_array_equal(neat.predict_many(z, all_coords(SHAPE.dims)), 2.5)


def test_components_are_additive():
    m = _model(2, components=3)
    coords = all_coords(SHAPE.dims)
    parts = neat.component_outputs(m, coords)
    for r in range(3):
        single = NeatModel(SHAPE, [e[:, r : r + 1] for e in m.embeddings], [m.nets[r]])
        np.testing.assert_allclose(neat.predict_raw_many(single, coords), parts[:, r], rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(parts.sum(axis=1), neat.predict_raw_many(m, coords), rtol=1e-13)


@pytest.mark.parametrize("seed", range(4))
def test_objective_gradient(seed):
    m = _model(seed)
    rng = np.random.default_rng(seed)
    coords = all_coords(SHAPE.dims)[rng.choice(72, 10, replace=False)]
    targets = rng.normal(size=10)

    def loss(params):
        return neat.objective(m.with_params(params), coords, targets, l2=0.05)

    assert fd_check(loss, m.params()) < 1e-4


def test_embedding_gradient_is_row_local():
    m = _model(3)
    coords = np.array([[0, 1, 0, 2], [0, 2, 1, 2]])
    _, grads = neat.objective(m, coords, np.array([1.0, -1.0]), l2=0.0)
    for n, g in enumerate(grads[: SHAPE.ndim]):
        untouched = sorted(set(range(SHAPE.dims[n])) - set(coords[:, n].tolist()))
        assert np.all(g[untouched] == 0)


def test_untrained_model_has_no_stats():
    with pytest.raises(StateError):
        neat.neat_predict(_model(0), (0, 0, 0, 0))


def test_deterministic_training_and_checkpoint(tmp_path):
    t = observe(planted_cp((4, 3, 2, 3), 2, seed=0)[0], 0.7, seed=0)
    cfg = NeatTrainConfig(components=2, embed_dim=2, hidden=4, epochs=5, batch_size=8)
    m1, r1 = neat.fit(t, cfg)
    m2, r2 = neat.fit(t, cfg)
    assert r1.snapshot_id == r2.snapshot_id
    path = tmp_path / "n.ckpt"
    neat.save(m1, path)
    back = neat.load(path)
    for a, b in zip(m1.params(), back.params()):
        assert a.tobytes() == b.tobytes()
    coords = all_coords(t.shape.dims)
    assert neat.predict_many(back, coords).tobytes() == neat.predict_many(m1, coords).tobytes()


def test_recovers_a_neat_teacher():
    """A default-size student generalizes to unseen cells of a small NeAT teacher."""
    dims = (8, 8, 6, 6)
    shape = Shape(dims, (ELEMENT, ELEMENT, COUNT, COUNT))
    teacher = neat.init_model(shape, NeatTrainConfig(components=2, embed_dim=2, hidden=4, init_scale=1.0, seed=7))
    coords = all_coords(dims)
    values = neat.predict_raw_many(teacher, coords)
    full = SparseTensor(shape, coords, values)
    train, test = split(full, full.nnz // 2, seed=1)
    cfg = NeatTrainConfig(l2=1e-3, learning_rate=3e-3, seed=0)
    student, _ = neat.fit(train, cfg)
    err = np.mean(np.abs(neat.predict_many(student, test.coords) - test.values))
    assert err < 0.1 * test.values.std()
