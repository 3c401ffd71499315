"""Minibatch Adam loop shared by the CP, NeAT and MLP trainers."""

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError
from .neural import AdamState, adam_step

STD_FLOOR = 1e-12


@dataclass
class TrainReport:
    losses: list = field(default_factory=list)
    val_mae: list = field(default_factory=list)
    seconds: float = 0.0
    epochs_run: int = 0
    snapshot_id: str = ""
    best_epoch: int = None

    def as_dict(self):
        return {
            "losses": [float(x) for x in self.losses],
            "val_mae": [float(x) for x in self.val_mae],
            "seconds": float(self.seconds),
            "epochs_run": int(self.epochs_run),
            "snapshot_id": self.snapshot_id,
            "best_epoch": self.best_epoch,
        }


def target_stats(values, center=True):
    """Mean and (population) standard deviation, std floored at 1e-12.

    With ``center=False`` the mean is reported as 0 and the scale is the
    root-mean-square of the values.
    """
    values = np.asarray(values, dtype=np.float64)
    if center:
        mean = float(values.mean())
        std = float(values.std())
    else:
        mean = 0.0
        std = float(np.sqrt(np.mean(values * values)))
    return mean, max(std, STD_FLOOR)


def snapshot_id(params):
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def check_seed(seed):
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def shuffle_rng(seed):
    # stream 1 of the seed; stream 0 is used for parameter init
    return np.random.default_rng([check_seed(seed), 1])


def init_rng(seed):
    return np.random.default_rng([check_seed(seed), 0])


def fit_adam(
    params,
    loss_and_grad,
    coords,
    targets,
    *,
    learning_rate,
    epochs,
    batch_size,
    seed,
    patience=None,
    val_mae=None,
    lr_decay=1.0,
):
    """Run ``epochs`` passes of shuffled minibatch Adam.

    ``loss_and_grad(params, coords, targets)`` returns the batch objective
    and its gradient list. ``val_mae(params)``, if given, is evaluated
    after every epoch; with ``patience`` set, training stops once it has
    not improved for that many epochs and the best parameters are restored.
    """
    if learning_rate <= 0:
        raise ConfigError("learning_rate must be > 0")
    if epochs < 0 or batch_size < 1:
        raise ConfigError("epochs must be >= 0 and batch_size >= 1")
    if patience is not None and patience < 1:
        raise ConfigError("patience must be a positive integer")
    n = len(targets)
    rng = shuffle_rng(seed)
    state = AdamState.create(params, learning_rate)
    report = TrainReport()
    best = (np.inf, params, None)
    wait = 0
    start = time.perf_counter()
    for epoch in range(epochs):
        state.learning_rate = learning_rate * lr_decay**epoch
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = perm[lo : lo + batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                # overflow surfaces as a non-finite loss below
                loss, grads = loss_and_grad(params, coords[idx], targets[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, learning_rate)
            with np.errstate(over="ignore", invalid="ignore"):
                params, state = adam_step(params, grads, state)
            total += loss * len(idx)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss) or not all(np.all(np.isfinite(p)) for p in params):
            raise DivergenceError(epoch, learning_rate)
        report.losses.append(float(epoch_loss))
        report.epochs_run = epoch + 1
        if val_mae is not None:
            score = float(val_mae(params))
            report.val_mae.append(score)
            if score < best[0]:
                best = (score, params, epoch)
                wait = 0
            else:
                wait += 1
            if patience is not None and wait >= patience:
                break
    if patience is not None and best[2] is not None:
        params = best[1]
        report.best_epoch = best[2]
    report.seconds = time.perf_counter() - start
    report.snapshot_id = snapshot_id(params)
    return params, report
