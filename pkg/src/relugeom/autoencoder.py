"""ReLU autoencoders for point clouds, with geometric diagnostics.

:class:`ReluAutoencoder` follows the scikit-learn transformer protocol:
``transform`` encodes, ``inverse_transform`` decodes. Training minimizes the
mean squared reconstruction error ``(1/k) sum ||x - ψ(φ(x))||^2`` with Adam
on shuffled mini-batches; everything is seeded from ``random_state``.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DimensionError, TrainingDivergedError, check_points
from .manifolds import PointCloud, Polyline
from .net import (AdamState, Mlp, TrainConfig, _adam_update, _chain_forward, _mse_and_grads,
                  as_arch, compose, forward, init_mlp)


@dataclass
class TrainReport:
    final_loss: float
    epoch_losses: list[float]
    seed: int
    config: dict
    wall_time: float
    encoder_arch: list[int] = field(default_factory=list)
    decoder_arch: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _seeds(random_state: int):
    enc, dec, shuffle = np.random.SeedSequence(random_state).generate_state(3)
    return int(enc), int(dec), int(shuffle)


class ReluAutoencoder(TransformerMixin, BaseEstimator):
    """Encoder/decoder pair of ReLU MLPs trained by Adam on reconstruction MSE.

    Parameters
    ----------
    encoder_widths : sequence of int
        ``(ambient, hidden..., latent)``. The latent layer is linear.
    decoder_widths : sequence of int, optional
        Defaults to the mirror image of ``encoder_widths``.
    batch_size : int, optional
        Defaults to ``min(256, n_samples)``.
    """

    def __init__(self, encoder_widths=(2, 32, 32, 32, 1), decoder_widths=None,
                 learning_rate=1e-3, epochs=100, batch_size=None, beta1=0.9,
                 beta2=0.999, eps=1e-8, weight_decay=0.0, random_state=0):
        self.encoder_widths = encoder_widths
        self.decoder_widths = decoder_widths
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.random_state = random_state

    def _archs(self):
        enc = as_arch(self.encoder_widths)
        dec = as_arch(self.decoder_widths if self.decoder_widths is not None
                      else tuple(reversed(enc.widths)))
        if enc.output_dim != dec.input_dim:
            raise DimensionError("encoder output and decoder input widths differ")
        if enc.input_dim != dec.output_dim:
            raise DimensionError("decoder must map back to the ambient dimension")
        return enc, dec

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                           batch_size=self.batch_size, seed=self.random_state,
                           beta1=self.beta1, beta2=self.beta2, eps=self.eps,
                           weight_decay=self.weight_decay)

    def fit(self, X, y=None):
        start = time.perf_counter()
        enc_arch, dec_arch = self._archs()
        X = check_points(X, enc_arch.input_dim)
        cfg = self.train_config()
        n = X.shape[0]
        batch = min(256, n) if cfg.batch_size is None else int(cfg.batch_size)
        if batch < 1:
            raise ValueError("batch_size must be >= 1")

        enc_seed, dec_seed, shuffle_seed = _seeds(cfg.seed)
        encoder = init_mlp(enc_arch, enc_seed)
        decoder = init_mlp(dec_arch, dec_seed)
        params = [p.copy() for p in encoder.params() + decoder.params()]
        flags = ([True] * (encoder.n_layers - 1) + [False]
                 + [True] * (decoder.n_layers - 1) + [False])
        state = AdamState.zeros_like(params)
        rng = np.random.default_rng(shuffle_seed)

        losses = []
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            for s in range(0, n, batch):
                idx = order[s:s + batch]
                layers = list(zip(params[0::2], params[1::2]))
                loss, grads = _mse_and_grads(layers, flags, X[idx], X[idx])
                if not np.isfinite(loss):
                    raise TrainingDivergedError(epoch)
                _adam_update(params, grads, state, cfg)
            Y, _, _ = _chain_forward(list(zip(params[0::2], params[1::2])), flags, X)
            epoch_loss = float(np.mean(np.sum((X - Y) ** 2, axis=1)))
            if not np.isfinite(epoch_loss):
                raise TrainingDivergedError(epoch)
            losses.append(epoch_loss)

        k = 2 * encoder.n_layers
        self.encoder_ = encoder.with_params(params[:k])
        self.decoder_ = decoder.with_params(params[k:])
        self.loss_curve_ = losses
        self.n_features_in_ = enc_arch.input_dim
        final = self.reconstruction_error(X)
        self.report_ = TrainReport(
            final_loss=final, epoch_losses=losses, seed=cfg.seed,
            config=asdict(cfg) | {"batch_size": batch}, wall_time=time.perf_counter() - start,
            encoder_arch=list(enc_arch.widths), decoder_arch=list(dec_arch.widths))
        return self

    # transformer protocol ------------------------------------------------
    def transform(self, X):
        check_is_fitted(self, "encoder_")
        return forward(self.encoder_, check_points(X, self.encoder_.arch.input_dim))

    def inverse_transform(self, Z):
        check_is_fitted(self, "decoder_")
        return forward(self.decoder_, check_points(Z, self.decoder_.arch.input_dim, name="Z"))

    encode = transform
    decode = inverse_transform

    def reconstruct(self, X):
        return self.inverse_transform(self.transform(X))

    def reconstruction_error(self, X) -> float:
        """``(1/k) sum ||x - reconstruct(x)||^2``."""
        X = check_points(X, self.encoder_.arch.input_dim)
        R = X - self.reconstruct(X)
        return float(np.mean(np.sum(R * R, axis=1)))

    def score(self, X, y=None):
        return -self.reconstruction_error(X)

    @property
    def latent_dim(self) -> int:
        check_is_fitted(self, "encoder_")
        return self.encoder_.arch.output_dim

    def composed(self) -> Mlp:
        """ψ∘φ as one network; its activation pattern has φ's pattern as prefix."""
        check_is_fitted(self, "encoder_")
        return compose(self.encoder_, self.decoder_)

    # persistence ---------------------------------------------------------
    def to_dict(self) -> dict:
        check_is_fitted(self, "encoder_")
        return {
            "format": "relugeom.autoencoder",
            "version": 1,
            "params": self.get_params(),
            "encoder": self.encoder_.to_dict(),
            "decoder": self.decoder_.to_dict(),
            "loss_curve": list(self.loss_curve_),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReluAutoencoder":
        if data.get("format") != "relugeom.autoencoder":
            raise ValueError("not a relugeom autoencoder document")
        params = dict(data["params"])
        for key in ("encoder_widths", "decoder_widths"):
            if params.get(key) is not None:
                params[key] = tuple(params[key])
        ae = cls(**params)
        ae.encoder_ = Mlp.from_dict(data["encoder"])
        ae.decoder_ = Mlp.from_dict(data["decoder"])
        ae.loss_curve_ = list(data.get("loss_curve", []))
        ae.n_features_in_ = ae.encoder_.arch.input_dim
        return ae

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ReluAutoencoder":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def train(data, enc_arch, dec_arch, cfg: TrainConfig):
    """Fit an autoencoder; returns ``(ReluAutoencoder, TrainReport)``."""
    X = data.points if isinstance(data, PointCloud) else data
    enc_arch, dec_arch = as_arch(enc_arch), as_arch(dec_arch)
    if enc_arch.input_dim != np.shape(X)[1] or dec_arch.output_dim != np.shape(X)[1]:
        raise DimensionError("architectures do not match the data dimension")
    ae = ReluAutoencoder(enc_arch.widths, dec_arch.widths, learning_rate=cfg.learning_rate,
                         epochs=cfg.epochs, batch_size=cfg.batch_size, beta1=cfg.beta1,
                         beta2=cfg.beta2, eps=cfg.eps, weight_decay=cfg.weight_decay,
                         random_state=cfg.seed)
    ae.fit(X)
    return ae, ae.report_


# ---------------------------------------------------------------------------
# diagnostics


def homeomorphism_check_curve(ae: ReluAutoencoder, polyline: Polyline):
    """Is the encoder a homeomorphism from the sampled curve onto its image?

    For a 1-d latent this holds exactly when codes are strictly monotone in
    the curve parameter. Returns ``(ok, violations)`` where violations counts
    adjacent pairs that are tied or go against the majority direction.
    """
    if polyline.params is None:
        raise ValueError("polyline has no parameters to order the samples by")
    if ae.latent_dim != 1:
        raise DimensionError("the exact curve check needs a 1-d latent space")
    order = np.argsort(polyline.params, kind="stable")
    z = ae.transform(polyline.vertices[order])[:, 0]
    d = np.diff(z)
    violations = int(min(np.count_nonzero(d <= 0), np.count_nonzero(d >= 0)))
    return violations == 0, violations


def injectivity_proxy(ae: ReluAutoencoder, X) -> tuple[bool, float]:
    """Smallest latent distance between codes of distinct samples (> 0 passes).

    A weak stand-in for a homeomorphism check on surfaces; it only detects
    exact collisions among the given samples.
    """
    X = np.unique(check_points(X, ae.n_features_in_), axis=0)
    if len(X) < 2:
        return True, float("inf")
    Z = ae.transform(X)
    dist, _ = cKDTree(Z).query(Z, k=2)
    gap = float(dist[:, 1].min())
    return gap > 0.0, gap


def hausdorff(a, b, chunk: int = 256) -> float:
    """Symmetric Hausdorff distance between two finite point sets (brute force)."""
    A = a.points if isinstance(a, PointCloud) else check_points(a, name="a")
    B = b.points if isinstance(b, PointCloud) else check_points(b, name="b")
    if A.shape[1] != B.shape[1]:
        raise DimensionError("point sets live in different dimensions")
    return max(_directed(A, B, chunk), _directed(B, A, chunk))


def _directed(P, Q, chunk):
    worst = 0.0
    for s in range(0, len(P), chunk):
        diff = P[s:s + chunk, None, :] - Q[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        worst = max(worst, float(d.min(axis=1).max()))
    return worst


def denoise(ae: ReluAutoencoder, noisy):
    """Project noisy samples onto the reconstructed manifold.

    Returns ``(projected, displacement)`` with per-point displacement norms.
    """
    X = check_points(noisy, ae.n_features_in_)
    projected = ae.reconstruct(X)
    return projected, np.linalg.norm(projected - X, axis=1)


def curve_distance(points, polyline: Polyline) -> np.ndarray:
    """Distance from each point to the nearest segment of ``polyline``."""
    P = check_points(points, polyline.dim)
    A = polyline.vertices[:-1] if not polyline.closed else polyline.vertices
    S = polyline.segments()
    ss = np.einsum("ij,ij->i", S, S)
    out = np.empty(len(P))
    for i, p in enumerate(P):
        t = np.clip(((p - A) * S).sum(axis=1) / ss, 0.0, 1.0)
        out[i] = np.sqrt(np.min(np.sum((A + t[:, None] * S - p) ** 2, axis=1)))
    return out
