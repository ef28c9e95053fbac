"""Small dense ReLU networks trained with Adam, implemented on numpy.

Everything runs in float64 with explicitly seeded generators so that a
trained network is a pure function of (data, architecture, seed).  The
backward pass is written out by hand; tests check it against finite
differences, so keep the forward and backward code in exact lockstep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingDivergedError

FULL_BATCH_LIMIT = 1024
MINI_BATCH_SIZE = 256
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer plan: input width, hidden widths (all ReLU), linear scalar output."""

    n_inputs: int
    hidden_widths: tuple = (64, 64, 64, 64)

    def __post_init__(self):
        if self.n_inputs < 1 or len(self.hidden_widths) < 1:
            raise ConfigError("network needs at least one input and one hidden layer")
        if any(w < 1 for w in self.hidden_widths):
            raise ConfigError("hidden widths must be positive")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))

    @property
    def layer_sizes(self):
        return (self.n_inputs, *self.hidden_widths, 1)


class Mlp:
    """Weights and biases for one network, plus forward/backward passes."""

    def __init__(self, arch: MlpArchitecture, rng: np.random.Generator):
        self.arch = arch
        sizes = arch.layer_sizes
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            std = np.sqrt(2.0 / (fan_in + fan_out))
            self.weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    def parameters(self):
        return self.weights + self.biases

    def forward(self, x, keep_activations: bool = False):
        """Network output for input rows ``x``; shape (n,)."""
        a = np.atleast_2d(np.asarray(x, dtype=np.float64))
        activations = [a]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = z if i == last else np.maximum(z, 0.0)
            activations.append(a)
        out = a[:, 0]
        if keep_activations:
            return out, activations
        return out

    def backprop_gradient(self, x, y):
        """Mean-squared-error loss and its gradient for each weight and bias.

        Returns (loss, grads) with grads ordered as self.parameters().
        """
        y = np.asarray(y, dtype=np.float64).ravel()
        out, acts = self.forward(x, keep_activations=True)
        n = y.size
        resid = out - y
        loss = float(np.mean(resid**2))
        delta = (2.0 / n) * resid[:, None]
        w_grads = [None] * len(self.weights)
        b_grads = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            w_grads[i] = acts[i].T @ delta
            b_grads[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        return loss, w_grads + b_grads


@dataclass
class AdamSettings:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    decay_every: int = 0       # halve the learning rate every k epochs; 0 disables
    history: list = field(default_factory=list, repr=False)


def train_mlp(
    model: Mlp,
    x,
    y,
    epochs: int,
    rng: np.random.Generator,
    settings: AdamSettings | None = None,
    member: int | None = None,
) -> Mlp:
    """Adam on the mean-squared error, in place; returns the model.

    Uses full-batch steps up to FULL_BATCH_LIMIT training points and
    shuffled mini-batches of MINI_BATCH_SIZE beyond that.
    """
    settings = settings or AdamSettings()
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.size:
        raise ConfigError("training inputs and outputs disagree in length")
    n = y.size
    params = model.parameters()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    loss_ceiling = DIVERGENCE_FACTOR * max(float(np.mean(y**2)), 1.0)
    step = 0
    lr = settings.learning_rate
    for epoch in range(epochs):
        if settings.decay_every and epoch and epoch % settings.decay_every == 0:
            lr *= 0.5
        if n <= FULL_BATCH_LIMIT:
            batches = [(x, y)]
        else:
            order = rng.permutation(n)
            batches = [
                (x[order[i : i + MINI_BATCH_SIZE]], y[order[i : i + MINI_BATCH_SIZE]])
                for i in range(0, n, MINI_BATCH_SIZE)
            ]
        epoch_loss = 0.0
        for bx, by in batches:
            loss, grads = model.backprop_gradient(bx, by)
            epoch_loss += loss * by.size
            step += 1
            scale = lr * np.sqrt(1.0 - settings.beta2**step) / (1.0 - settings.beta1**step)
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= settings.beta1
                mi += (1.0 - settings.beta1) * g
                vi *= settings.beta2
                vi += (1.0 - settings.beta2) * g**2
                p -= scale * mi / (np.sqrt(vi) + settings.epsilon)
        epoch_loss /= n
        settings.history.append(epoch_loss)
        if not np.isfinite(epoch_loss) or epoch_loss > loss_ceiling:
            raise TrainingDivergedError(
                f"loss {epoch_loss:g} exceeded ceiling at epoch {epoch}", member=member
            )
    return model
