import numpy as np
import pytest
from helpers import fd_check

from tensorprop import baseline
from tensorprop.baseline import MLPTrainConfig, OneHotEncoder, encode
from tensorprop.errors import BoundsError
from tensorprop.neural import init_net
from tensorprop.sptensor import COUNT, ELEMENT, Shape
from tensorprop.synthetic import all_coords, observe, planted_cp

SHAPE = Shape((3, 3, 2, 2), (ELEMENT, ELEMENT, COUNT, COUNT))


def test_encode_examples():
    assert encode((0, 2, 1, 0), SHAPE).tolist() == [1, 0, 0, 0, 0, 1, 0, 1, 1, 0]
    assert encode((2, 0, 0, 1), SHAPE).tolist() == [0, 0, 1, 1, 0, 0, 1, 0, 0, 1]
    with pytest.raises(BoundsError):
        encode((3, 0, 0, 0), SHAPE)


def test_encode_many_has_one_hot_per_mode():
    x = OneHotEncoder(SHAPE).encode_many(all_coords(SHAPE.dims))
    assert x.shape == (36, 10)
    np.testing.assert_array_equal(x.sum(axis=1), 4)
    assert len({tuple(r) for r in x.tolist()}) == 36


@pytest.mark.parametrize("seed", range(3))
def test_objective_gradient(seed):
    rng = np.random.default_rng(seed)
    net = init_net((10, 3, 2, 1), rng)
    net = net.with_params([p + rng.normal(0, 0.2, p.shape) for p in net.params()])
    x = OneHotEncoder(SHAPE).encode_many(all_coords(SHAPE.dims)[rng.choice(36, 8, replace=False)])
    t = rng.normal(size=8)

    def loss(params):
        return baseline.objective(net.with_params(params), x, t, l2=0.02)

    assert fd_check(loss, net.params()) < 1e-4


def test_deterministic_training_and_checkpoint(tmp_path):
    t = observe(planted_cp(SHAPE.dims, 2, seed=0)[0], 0.8, seed=0)
    cfg = MLPTrainConfig(hidden=(8,), epochs=10, batch_size=8)
    m1, r1 = baseline.mlp_train(t, cfg)
    m2, r2 = baseline.mlp_train(t, cfg)
    assert r1.snapshot_id == r2.snapshot_id
    assert r1.losses[-1] < r1.losses[0]
    path = tmp_path / "m.ckpt"
    baseline.save(m1, path)
    back = baseline.load(path)
    coords = all_coords(SHAPE.dims)
    assert baseline.predict_many(back, coords).tobytes() == baseline.predict_many(m1, coords).tobytes()
    assert baseline.mlp_predict(m1, (0, 0, 0, 0)) == baseline.predict_many(m1, [(0, 0, 0, 0)])[0]
