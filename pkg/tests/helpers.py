"""Shared test utilities."""

import numpy as np


def fd_check(loss_fn, params, step=1e-5):
    """Largest relative error between analytic and central-difference gradients.

    ``loss_fn(params)`` returns ``(loss, grads)``. Relative error is taken
    per coordinate as ``|a - n| / max(|a|, |n|, 1e-6)``.
    """
    _, grads = loss_fn(params)
    worst = 0.0
    for k, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[k][idx] += step
            minus[k][idx] -= step
            num = (loss_fn(plus)[0] - loss_fn(minus)[0]) / (2 * step)
            ana = grads[k][idx]
            denom = max(abs(ana), abs(num), 1e-6)
            worst = max(worst, abs(ana - num) / denom)
    return worst


ACCEPTANCE_LINES = []


def verdict(number, ok, detail):
    """Record and print one acceptance line, then assert it."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
