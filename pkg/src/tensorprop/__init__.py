"""Tensor completion for composition-based materials property prediction.

Materials are encoded as cells of a sparse higher-order tensor: for binary
compounds, modes 0 and 1 index the two elements and modes 2 and 3 their
atom counts, so ``AuBr5`` is the cell ``(Au, Br, 1, 5)``. Unobserved cells
are predicted with CP decomposition (optionally smoothness-regularized over
the count modes) or a neural additive tensor model, and compared against
an MLP on one-hot coordinates.

Basic example
-------------

.. code:: python

    from tensorprop import tensorize, cpd, sptensor

    tensor, skipped = tensorize.tensorize([("AuBr5", 1.3), ("NaCl", 5.0), ...])
    train, test = sptensor.split(tensor, train_count=1500, seed=0)
    model, report = cpd.fit(train, cpd.CPTrainConfig(rank=8, smooth_lambda=0.1))
    cpd.predict_many(model, test.coords)
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BoundsError,
    ConfigError,
    DatasetError,
    DivergenceError,
    ParseError,
    ShapeError,
    StateError,
    TensorPropError,
)
from .sptensor import IndexMap, Shape, SparseTensor, dedup, density, insert, split  # noqa: F401
from .tensorize import Composition, TensorizeConfig, parse_formula  # noqa: F401
