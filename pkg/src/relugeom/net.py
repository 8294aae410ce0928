"""Dense ReLU multilayer perceptrons in float64 numpy.

Hidden layers apply ReLU after their affine map; the last layer is affine
only. A pre-activation of exactly zero counts as inactive everywhere
(forward, activation patterns and the ReLU subgradient), so sampling and
exact enumeration agree on boundaries.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._validation import ArchitectureError, DimensionError, check_points

FORMAT_VERSION = 1


@dataclass(frozen=True)
class NetworkArch:
    """Layer widths ``(w_0, w_1, ..., w_k, w_{k+1})`` with ``k >= 1``."""

    widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 3:
            raise ArchitectureError(
                f"need input, at least one hidden layer and output; got {widths}")
        if any(w < 1 for w in widths):
            raise ArchitectureError(f"all widths must be >= 1; got {widths}")
        object.__setattr__(self, "widths", widths)

    @classmethod
    def parse(cls, text: str) -> "NetworkArch":
        """Parse ``"2,16,16,1"``."""
        try:
            widths = tuple(int(tok) for tok in text.split(","))
        except ValueError:
            raise ArchitectureError(f"cannot parse architecture {text!r}") from None
        return cls(widths)

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.widths[1:-1]

    @property
    def size(self) -> int:
        """Number of hidden neurons."""
        return sum(self.hidden)

    def __str__(self):
        return ",".join(map(str, self.widths))


def as_arch(arch) -> NetworkArch:
    if isinstance(arch, NetworkArch):
        return arch
    if isinstance(arch, str):
        return NetworkArch.parse(arch)
    return NetworkArch(tuple(arch))


@dataclass(frozen=True)
class Mlp:
    """ReLU network parameters; ``weights[i]`` has shape (w_{i+1}, w_i)."""

    arch: NetworkArch
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        widths = self.arch.widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ArchitectureError("layer count does not match architecture")
        ws, bs = [], []
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            W = np.array(W, dtype=np.float64)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if W.shape != (widths[i + 1], widths[i]) or b.shape != (widths[i + 1],):
                raise ArchitectureError(
                    f"layer {i + 1}: weight {W.shape} / bias {b.shape} do not "
                    f"match widths {widths[i]} -> {widths[i + 1]}")
            W.flags.writeable = False
            b.flags.writeable = False
            ws.append(W)
            bs.append(b)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list[np.ndarray]:
        """Flat parameter list ``[W1, b1, W2, b2, ...]``."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def with_params(self, params: Sequence[np.ndarray]) -> "Mlp":
        return replace(self, weights=tuple(params[0::2]), biases=tuple(params[1::2]))

    def __call__(self, X):
        return forward(self, X)

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "relugeom.mlp",
            "version": FORMAT_VERSION,
            "arch": list(self.arch.widths),
            "layers": [
                {"weight": W.tolist(), "bias": b.tolist()}
                for W, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Mlp":
        if data.get("format") != "relugeom.mlp":
            raise ValueError("not a relugeom mlp document")
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported mlp format version {data.get('version')}")
        layers = data["layers"]
        return cls(
            NetworkArch(tuple(data["arch"])),
            tuple(np.array(layer["weight"], dtype=np.float64).reshape(
                len(layer["bias"]), -1) for layer in layers),
            tuple(np.array(layer["bias"], dtype=np.float64) for layer in layers),
        )

    def save(self, path) -> None:
        # json writes floats with repr(), which round-trips doubles exactly
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Mlp":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_mlp(arch, seed: int = 0) -> Mlp:
    """Gaussian weights with variance 1/fan-in, zero biases."""
    arch = as_arch(arch)
    rng = np.random.default_rng(seed)
    widths = arch.widths
    weights = tuple(
        rng.standard_normal((widths[i + 1], widths[i])) / np.sqrt(widths[i])
        for i in range(len(widths) - 1)
    )
    biases = tuple(np.zeros(widths[i + 1]) for i in range(len(widths) - 1))
    return Mlp(arch, weights, biases)


def relu(z):
    return np.maximum(z, 0.0)


def _as_batch(mlp: Mlp, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = check_points(x[None, :] if single else x, mlp.arch.input_dim)
    return X, single


def forward(mlp: Mlp, x):
    """Evaluate the network on one point (1-d) or a batch (2-d, one row each)."""
    X, single = _as_batch(mlp, x)
    last = mlp.n_layers - 1
    for i, (W, b) in enumerate(zip(mlp.weights, mlp.biases)):
        X = X @ W.T + b
        if i < last:
            X = relu(X)
    return X[0] if single else X


def preactivations(mlp: Mlp, x) -> list[np.ndarray]:
    """Hidden-layer pre-activations, one (n, w_l) array per hidden layer."""
    X, _ = _as_batch(mlp, x)
    out = []
    for W, b in zip(mlp.weights[:-1], mlp.biases[:-1]):
        Z = X @ W.T + b
        out.append(Z)
        X = relu(Z)
    return out


@dataclass(frozen=True)
class ActivationPattern:
    """Per hidden layer, which neurons have strictly positive pre-activation."""

    layers: tuple[tuple[bool, ...], ...]
    _bits: tuple[bool, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        layers = tuple(tuple(bool(v) for v in layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "_bits", tuple(v for layer in layers for v in layer))

    @classmethod
    def from_bits(cls, bits, arch: NetworkArch) -> "ActivationPattern":
        bits = [bool(v) for v in np.asarray(bits).reshape(-1)]
        if len(bits) != arch.size:
            raise DimensionError(f"pattern has {len(bits)} bits, network has {arch.size}")
        layers, start = [], 0
        for w in arch.hidden:
            layers.append(bits[start:start + w])
            start += w
        return cls(tuple(layers))

    @property
    def bits(self) -> tuple[bool, ...]:
        return self._bits

    def key(self) -> str:
        """Compact string id, e.g. ``"0110|10"``."""
        return "|".join("".join("1" if v else "0" for v in layer) for layer in self.layers)

    def is_prefix_of(self, other: "ActivationPattern") -> bool:
        n = len(self.layers)
        return other.layers[:n] == self.layers

    def __len__(self):
        return len(self._bits)


def activation_patterns(mlp: Mlp, X) -> np.ndarray:
    """Boolean matrix (n, size): all hidden activation bits for each row of X."""
    Z = preactivations(mlp, X)
    return np.concatenate([z > 0 for z in Z], axis=1)


def activation_pattern(mlp: Mlp, x) -> ActivationPattern:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("activation_pattern takes a single point; "
                             "use activation_patterns for batches")
    bits = activation_patterns(mlp, x[None, :])[0]
    return ActivationPattern.from_bits(bits, mlp.arch)


# ---------------------------------------------------------------------------
# gradients and optimization


def _chain_forward(layers, relu_flags, X):
    """Forward pass keeping every pre-activation for backprop."""
    inputs, pre = [], []
    for (W, b), act in zip(layers, relu_flags):
        inputs.append(X)
        Z = X @ W.T + b
        pre.append(Z)
        X = relu(Z) if act else Z
    return X, inputs, pre


def _chain_backward(layers, relu_flags, inputs, pre, dY):
    grads = [None] * (2 * len(layers))
    dZ = dY
    for i in range(len(layers) - 1, -1, -1):
        if relu_flags[i]:
            dZ = dZ * (pre[i] > 0)
        grads[2 * i] = dZ.T @ inputs[i]
        grads[2 * i + 1] = dZ.sum(axis=0)
        if i > 0:
            dZ = dZ @ layers[i][0]
    return grads


def _mse_and_grads(layers, relu_flags, X, T):
    Y, inputs, pre = _chain_forward(layers, relu_flags, X)
    R = Y - T
    loss = float(np.einsum("ij,ij->", R, R) / X.shape[0])
    grads = _chain_backward(layers, relu_flags, inputs, pre, (2.0 / X.shape[0]) * R)
    return loss, grads


def backprop_mse(mlp: Mlp, X, T):
    """Loss ``mean_j ||f(x_j) - t_j||^2`` and its gradient.

    Returns ``(loss, grads)`` where ``grads`` is ``[dW1, db1, dW2, db2, ...]``
    in the order of :meth:`Mlp.params`.
    """
    X = check_points(X, mlp.arch.input_dim)
    T = check_points(T, mlp.arch.output_dim, name="T")
    if X.shape[0] != T.shape[0]:
        raise DimensionError("inputs and targets differ in length")
    layers = list(zip(mlp.weights, mlp.biases))
    flags = [True] * (mlp.n_layers - 1) + [False]
    return _mse_and_grads(layers, flags, X, T)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int | None = None  # None: min(256, n)
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class AdamState:
    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def _adam_update(params, grads, state: AdamState, cfg: TrainConfig):
    """In-place Adam step on ``params`` (list of writable arrays)."""
    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if cfg.weight_decay:
            g = g + cfg.weight_decay * p
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def adam_step(mlp: Mlp, grads, state: AdamState | None, cfg: TrainConfig):
    """One Adam update; returns ``(new_mlp, new_state)`` and leaves inputs untouched."""
    params = [p.copy() for p in mlp.params()]
    if state is None:
        state = AdamState.zeros_like(params)
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise DimensionError("gradient does not match parameter shapes")
    if len(state.m) != len(params) or any(m.shape != p.shape for m, p in zip(state.m, params)):
        raise DimensionError("optimizer state does not match parameter shapes")
    state = AdamState(state.step, [m.copy() for m in state.m], [v.copy() for v in state.v])
    _adam_update(params, grads, state, cfg)
    return mlp.with_params(params), state


def compose(inner: Mlp, outer: Mlp) -> Mlp:
    """The network ``outer ∘ inner`` as a single Mlp.

    ``inner``'s final affine layer is folded into ``outer``'s first layer, so
    the hidden neurons of the result are inner's followed by outer's and its
    activation patterns carry inner's pattern as a prefix.
    """
    if inner.arch.output_dim != outer.arch.input_dim:
        raise DimensionError(
            f"cannot compose: {inner.arch.output_dim} outputs into {outer.arch.input_dim} inputs")
    W_last, b_last = inner.weights[-1], inner.biases[-1]
    W_first, b_first = outer.weights[0], outer.biases[0]
    weights = inner.weights[:-1] + (W_first @ W_last,) + outer.weights[1:]
    biases = inner.biases[:-1] + (W_first @ b_last + b_first,) + outer.biases[1:]
    widths = inner.arch.widths[:-1] + outer.arch.widths[1:]
    return Mlp(NetworkArch(widths), weights, biases)
