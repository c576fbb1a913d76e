"""Two-layer fully connected scorer with hand-written backprop and Adam.

Layout: ``X -> FC-1 -> ReLU -> dropout -> FC-2 -> sigmoid``. The post-ReLU,
pre-dropout FC-1 activations ``R`` are what the clustering step reads.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .core import RngHandle, as_rng

PARAM_NAMES = ("W1", "b1", "W2", "b2")

_SCORE_LO = np.finfo(np.float64).tiny
_SCORE_HI = np.nextafter(1.0, 0.0)


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Model:
    W1: np.ndarray  # D x H1
    b1: np.ndarray  # H1
    W2: np.ndarray  # H1 x 1
    b2: np.ndarray  # shape (1,)
    dropout_rate: float = 0.0

    @property
    def input_dim(self) -> int:
        return int(self.W1.shape[0])

    @property
    def hidden_width(self) -> int:
        return int(self.W1.shape[1])

    def params(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def with_params(self, params: dict[str, np.ndarray]) -> "Model":
        return replace(self, **{n: params[n] for n in PARAM_NAMES})

    def check(self) -> None:
        d, h = self.W1.shape
        if h < 1 or d < 1:
            raise ShapeMismatch(f"bad W1 shape {self.W1.shape}")
        want = {"b1": (h,), "W2": (h, 1), "b2": (1,)}
        for n, shape in want.items():
            if getattr(self, n).shape != shape:
                raise ShapeMismatch(f"{n} has shape {getattr(self, n).shape}, expected {shape}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class ForwardCache:
    X: np.ndarray
    Z1: np.ndarray
    R: np.ndarray  # post-ReLU, pre-dropout
    mask: np.ndarray  # inverted-dropout mask, entries 0 or 1/(1-p)
    A1: np.ndarray
    z2: np.ndarray
    scores: np.ndarray


@dataclass
class Gradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}


def init_model(input_dim: int, hidden_width: int, dropout_rate: float = 0.0, rng=None) -> Model:
    """Glorot-uniform weights and zero biases, deterministic in ``rng``."""
    if input_dim < 1 or hidden_width < 1:
        raise ValueError(f"dimensions must be >= 1, got D={input_dim}, H1={hidden_width}")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
    gen = as_rng(rng).generator()
    lim1 = np.sqrt(6.0 / (input_dim + hidden_width))
    lim2 = np.sqrt(6.0 / (hidden_width + 1))
    W1 = gen.uniform(-lim1, lim1, size=(input_dim, hidden_width))
    W2 = gen.uniform(-lim2, lim2, size=(hidden_width, 1))
    return Model(W1, np.zeros(hidden_width), W2, np.zeros(1), float(dropout_rate))


def zero_model(input_dim: int, hidden_width: int, dropout_rate: float = 0.0) -> Model:
    return Model(
        np.zeros((input_dim, hidden_width)),
        np.zeros(hidden_width),
        np.zeros((hidden_width, 1)),
        np.zeros(1),
        float(dropout_rate),
    )


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    # keep scores strictly inside (0, 1) even where the logistic saturates
    return np.clip(out, _SCORE_LO, _SCORE_HI)


def forward(model: Model, X, rng: RngHandle | None = None, train: bool = False) -> ForwardCache:
    """Score every row of ``X``.

    ``train=True`` applies inverted dropout with a mask drawn from ``rng``;
    otherwise dropout is the identity.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeMismatch(f"input shape {X.shape} does not match model input dim {model.input_dim}")
    Z1 = X @ model.W1 + model.b1
    R = np.maximum(Z1, 0.0)
    p = model.dropout_rate
    if train and p > 0.0:
        if rng is None:
            raise ValueError("train-mode forward with dropout needs an rng")
        keep = as_rng(rng).generator().random(R.shape) >= p
        mask = keep / (1.0 - p)
    else:
        mask = np.ones_like(R)
    A1 = R * mask
    z2 = (A1 @ model.W2)[:, 0] + model.b2[0]
    return ForwardCache(X, Z1, R, mask, A1, z2, sigmoid(z2))


def predict(model: Model, X) -> np.ndarray:
    return forward(model, X).scores


def backward(model: Model, cache: ForwardCache, dL_dscores, dL_dR=None) -> Gradients:
    """Gradients of a scalar loss given its partials w.r.t. scores and ``R``.

    ``dL_dR`` joins after the ReLU output and skips the dropout mask, since
    clustering reads ``R`` before dropout.
    """
    m, h = cache.R.shape
    if cache.X.shape[1] != model.input_dim or h != model.hidden_width:
        raise ShapeMismatch("forward cache was produced by a model of different shape")
    g = np.asarray(dL_dscores, dtype=np.float64).reshape(-1)
    if g.shape != (m,):
        raise ShapeMismatch(f"dL/dscores has shape {g.shape}, expected ({m},)")

    s = cache.scores
    dz2 = g * s * (1.0 - s)
    dW2 = cache.A1.T @ dz2[:, None]
    db2 = np.array([dz2.sum()])
    dR = (dz2[:, None] @ model.W2.T) * cache.mask
    if dL_dR is not None:
        dL_dR = np.asarray(dL_dR, dtype=np.float64)
        if dL_dR.shape != (m, h):
            raise ShapeMismatch(f"dL/dR has shape {dL_dR.shape}, expected {(m, h)}")
        dR = dR + dL_dR
    dZ1 = dR * (cache.Z1 > 0.0)
    dW1 = cache.X.T @ dZ1
    db1 = dZ1.sum(axis=0)
    return Gradients(dW1, db1, dW2, db2)


# --------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_adam(model: Model, learning_rate: float = 5e-5, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    zeros = {n: np.zeros_like(p) for n, p in model.params().items()}
    return AdamState(learning_rate, beta1, beta2, eps, 0, zeros, {n: z.copy() for n, z in zeros.items()})


def adam_step(model: Model, grads: Gradients, state: AdamState) -> tuple[Model, AdamState]:
    """One bias-corrected Adam update; returns new model and state objects."""
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in model.params().items():
        g = getattr(grads, name)
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ShapeMismatch(f"gradient/state for {name} does not match parameter shape {p.shape}")
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        new_params[name] = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v
    new_state = AdamState(state.learning_rate, b1, b2, state.eps, t, new_m, new_v)
    return model.with_params(new_params), new_state


# --------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = b"SRCK"
CHECKPOINT_VERSION = 1
_CK_HEADER = struct.Struct("<4sHHII")  # magic, version, flags, D, H1
_CK_SCALARS = struct.Struct("<dQdddd")  # dropout, t, lr, beta1, beta2, eps


class CheckpointError(ValueError):
    pass


def _param_shapes(d: int, h: int) -> dict[str, tuple[int, ...]]:
    return {"W1": (d, h), "b1": (h,), "W2": (h, 1), "b2": (1,)}


def save_checkpoint(path, model: Model, state: AdamState | None = None) -> None:
    """Write model parameters and Adam state, all float64 little-endian."""
    model.check()
    if state is None:
        state = init_adam(model)
    d, h = model.W1.shape
    chunks = [
        _CK_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, 0, d, h),
        _CK_SCALARS.pack(model.dropout_rate, state.t, state.learning_rate, state.beta1, state.beta2, state.eps),
    ]
    for group in (model.params(), state.m, state.v):
        for n in PARAM_NAMES:
            chunks.append(np.ascontiguousarray(group[n], dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path) -> tuple[Model, AdamState]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CK_HEADER.size + _CK_SCALARS.size:
        raise CheckpointError(f"{path}: truncated checkpoint header")
    magic, version, _flags, d, h = _CK_HEADER.unpack_from(raw, 0)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    dropout, t, lr, beta1, beta2, eps = _CK_SCALARS.unpack_from(raw, _CK_HEADER.size)
    shapes = _param_shapes(d, h)
    need = 3 * sum(int(np.prod(s)) for s in shapes.values()) * 8
    offset = _CK_HEADER.size + _CK_SCALARS.size
    if len(raw) - offset != need:
        raise CheckpointError(f"{path}: payload is {len(raw) - offset} bytes, expected {need}")
    groups = []
    for _ in range(3):
        g = {}
        for n in PARAM_NAMES:
            count = int(np.prod(shapes[n]))
            g[n] = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shapes[n]).astype(np.float64)
            offset += count * 8
        groups.append(g)
    params, m, v = groups
    model = Model(params["W1"], params["b1"], params["W2"], params["b2"], dropout)
    model.check()
    return model, AdamState(lr, beta1, beta2, eps, int(t), m, v)
