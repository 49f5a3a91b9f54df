"""Central finite differences in extended precision, with its own forward pass."""

import numpy as np


def ld_forward_loss(weights, biases, x, y):
    a = np.asarray(x, dtype=np.longdouble)
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w.T + b
        if i == len(weights) - 1:
            p = 1 / (1 + np.exp(-z[:, 0]))
            break
        a = np.maximum(z, 0)
    y = np.asarray(y, dtype=np.longdouble)
    return np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p)))


def random_network(rng, sizes):
    ws = [rng.normal(0, 1 / np.sqrt(i), size=(o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
    bs = [rng.normal(0, 0.5, size=o) for o in sizes[1:]]
    return ws, bs


def numeric_gradient(weights, biases, x, y, which, index, h=1e-5):
    """d loss / d param at (which, index); which = 2*layer (+1 for bias)."""
    ws = [w.astype(np.longdouble) for w in weights]
    bs = [b.astype(np.longdouble) for b in biases]
    target = (ws if which % 2 == 0 else bs)[which // 2]
    orig = target[index]
    target[index] = orig + h
    up = ld_forward_loss(ws, bs, x, y)
    target[index] = orig - h
    down = ld_forward_loss(ws, bs, x, y)
    target[index] = orig
    return float((up - down) / (2 * h))


def relative_error(a, n):
    return abs(a - n) / max(abs(a), abs(n), 1e-300)
