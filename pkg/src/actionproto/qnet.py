"""Small ReLU multilayer perceptron with hand-written backprop and Adam."""

from __future__ import annotations

import numpy as np


class QNetwork:
    """Fully connected net ``sizes[0] -> ... -> sizes[-1]``.

    Hidden layers use ReLU, the output layer is linear. Weights are stored as
    ``(fan_in, fan_out)`` matrices so a batch of row vectors is mapped by
    ``x @ W + b``.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                # He-uniform, as commonly used for ReLU nets
                lim = np.sqrt(6.0 / fan_in)
                w = rng.uniform(-lim, lim, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "QNetwork":
        net = QNetwork.__new__(QNetwork)
        net.sizes = self.sizes
        net.weights = [w.copy() for w in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net

    def load_from(self, other: "QNetwork") -> None:
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    def forward(self, obs, cache: list | None = None) -> np.ndarray:
        x = np.asarray(obs, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if cache is not None:
                cache.append(x)
            x = x @ w + b
            if i < last:
                x = np.maximum(x, 0.0)
        return x[0] if single else x


def mlp_forward(net: QNetwork, obs) -> np.ndarray:
    return net.forward(obs)


def td_loss(net: QNetwork, obs, actions, targets) -> float:
    q = net.forward(obs)
    err = q[np.arange(len(q)), actions] - targets
    return float(np.mean(err ** 2))


def mlp_gradient(net: QNetwork, obs, actions, targets) -> list[np.ndarray]:
    """Gradient of ``mean((Q(obs)[action] - target)^2)`` for every parameter.

    Returned in the order of :meth:`QNetwork.params`.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    actions = np.asarray(actions, dtype=int)
    targets = np.asarray(targets, dtype=float)
    n = len(obs)
    cache: list[np.ndarray] = []
    q = net.forward(obs, cache)
    rows = np.arange(n)
    delta = np.zeros_like(q)
    delta[rows, actions] = 2.0 * (q[rows, actions] - targets) / n

    grads: list[np.ndarray] = []
    for i in range(len(net.weights) - 1, -1, -1):
        x = cache[i]
        grads.append(delta.sum(axis=0))  # bias
        grads.append(x.T @ delta)  # weight
        if i > 0:
            # cache[i] is the ReLU output of layer i-1; its derivative is (x > 0)
            delta = (delta @ net.weights[i].T) * (x > 0)
    grads.reverse()
    return grads


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
