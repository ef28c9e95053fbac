"""Deep ensembles: N independently initialized networks on shared data.

The ensemble mean is the surrogate prediction and the sample variance
across members (ddof=1) is the epistemic-uncertainty proxy.  Inputs and
outputs are standardized per dimension before training; the normalizer is
refit on every call so retraining on a grown dataset stays self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import seeded_rng
from .errors import ConfigError, InsufficientDataError, ModelStateError
from .nn import AdamSettings, Mlp, MlpArchitecture, train_mlp


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension affine map to zero mean, unit spread."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, values) -> "Normalizer":
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        mean = values.mean(axis=0)
        scale = values.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, values):
        return (np.atleast_2d(np.asarray(values, dtype=np.float64)) - self.mean) / self.scale

    def inverse(self, values):
        return np.asarray(values) * self.scale + self.mean


class EnsembleModel:
    """Trained ensemble exposing mean and member-spread variance."""

    def __init__(self, members, x_norm: Normalizer, y_norm: Normalizer):
        if len(members) < 2:
            raise ConfigError("an ensemble needs at least 2 members")
        self.members = list(members)
        self.x_norm = x_norm
        self.y_norm = y_norm
        self.is_trained = True

    @property
    def n_members(self) -> int:
        return len(self.members)

    def member_predictions(self, x) -> np.ndarray:
        """(n_members, n_points) predictions in original output units."""
        xt = self.x_norm.transform(x)
        raw = np.stack([member.forward(xt) for member in self.members])
        return self.y_norm.inverse(raw[..., None])[..., 0]

    def predict(self, x):
        """Ensemble mean and across-member sample variance (ddof=1)."""
        preds = self.member_predictions(x)
        return preds.mean(axis=0), preds.var(axis=0, ddof=1)

    def predict_mean(self, x):
        return self.member_predictions(x).mean(axis=0)

    def save(self, path) -> None:
        arrays = {
            "x_norm_mean": self.x_norm.mean,
            "x_norm_scale": self.x_norm.scale,
            "y_norm_mean": self.y_norm.mean,
            "y_norm_scale": self.y_norm.scale,
            "n_members": np.array(self.n_members),
            "hidden_widths": np.array(self.members[0].arch.hidden_widths),
            "n_inputs": np.array(self.members[0].arch.n_inputs),
        }
        for m, member in enumerate(self.members):
            for i, (w, b) in enumerate(zip(member.weights, member.biases)):
                arrays[f"w_{m}_{i}"] = w
                arrays[f"b_{m}_{i}"] = b
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "EnsembleModel":
        with np.load(path) as data:
            arch = MlpArchitecture(int(data["n_inputs"]), tuple(data["hidden_widths"]))
            members = []
            for m in range(int(data["n_members"])):
                member = Mlp(arch, np.random.default_rng(0))
                member.weights = [
                    data[f"w_{m}_{i}"] for i in range(len(member.weights))
                ]
                member.biases = [data[f"b_{m}_{i}"] for i in range(len(member.biases))]
                members.append(member)
            x_norm = Normalizer(data["x_norm_mean"], data["x_norm_scale"])
            y_norm = Normalizer(data["y_norm_mean"], data["y_norm_scale"])
        if not members:
            raise ModelStateError("checkpoint holds no ensemble members")
        return cls(members, x_norm, y_norm)


def train_ensemble(
    x,
    y,
    n_members: int,
    arch: MlpArchitecture,
    epochs: int,
    seed: int,
    settings: AdamSettings | None = None,
    stream_label: str = "ensemble",
) -> EnsembleModel:
    """Train ``n_members`` networks from scratch on the same data.

    Member m draws its init and batch shuffles from an independent stream
    keyed by (seed, stream_label, m), so results do not depend on training
    order and are bit-reproducible.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size < 2:
        raise InsufficientDataError("ensemble training requires at least 2 samples")
    if x.shape[1] != arch.n_inputs:
        raise ConfigError("data dimension does not match the architecture")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ConfigError("ensemble training data must be finite")
    x_norm = Normalizer.fit(x)
    y_norm = Normalizer.fit(y[:, None])
    xt = x_norm.transform(x)
    yt = y_norm.transform(y[:, None])[:, 0]
    members = []
    for m in range(n_members):
        rng = seeded_rng(seed, f"{stream_label}-member-{m}")
        member = Mlp(arch, rng)
        member_settings = AdamSettings(
            learning_rate=(settings or AdamSettings()).learning_rate,
            beta1=(settings or AdamSettings()).beta1,
            beta2=(settings or AdamSettings()).beta2,
            epsilon=(settings or AdamSettings()).epsilon,
            decay_every=(settings or AdamSettings()).decay_every,
        )
        train_mlp(member, xt, yt, epochs, rng, member_settings, member=m)
        members.append(member)
    return EnsembleModel(members, x_norm, y_norm)
