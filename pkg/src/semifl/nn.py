"""Minimal neural-network engine in numpy.

Two fixed architectures are supported:

* ``cnn`` -- conv(5x5, 1->10) / ReLU / maxpool(2x2) / conv(5x5, 10->20) /
  ReLU / maxpool(2x2) / fc(320->50) / ReLU / fc(50->10)
* ``mlp`` -- fc(784->64) / ReLU / fc(64->10)

Parameters are float32; training is plain minibatch SGD on softmax
cross-entropy.  All randomness comes from generators passed in by the
caller, so every function here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ARCHITECTURES = ("cnn", "mlp")


@dataclass(frozen=True, eq=False)
class LayerParams:
    """One layer: a weight array and a bias vector."""

    name: str
    weights: np.ndarray
    bias: np.ndarray


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Immutable parameter set for one model, tagged with its architecture."""

    arch: str
    layers: tuple[LayerParams, ...]

    def layer(self, name: str) -> LayerParams:
        for lp in self.layers:
            if lp.name == name:
                return lp
        raise KeyError(name)

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0].weights.dtype

    def num_params(self) -> int:
        return sum(lp.weights.size + lp.bias.size for lp in self.layers)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            self.arch,
            tuple(
                LayerParams(lp.name, lp.weights.astype(dtype), lp.bias.astype(dtype))
                for lp in self.layers
            ),
        )


@dataclass(frozen=True)
class LocalTrainConfig:
    """Hyperparameters for one client's local training pass."""

    epochs: int = 5
    batch_size: int = 20
    learning_rate: float = 0.01

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")


# ---------------------------------------------------------------------------
# initialisation


def _uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_mlp(seed: int, in_dim: int = 784, hidden: int = 64, out_dim: int = 10,
             dtype=np.float32) -> ModelParams:
    """Fan-in uniform init (U[-1/sqrt(fan_in), 1/sqrt(fan_in)]), zero biases."""
    rng = np.random.default_rng(seed)
    layers = (
        LayerParams("fc1", _uniform(rng, (hidden, in_dim), in_dim, dtype),
                    np.zeros(hidden, dtype=dtype)),
        LayerParams("fc2", _uniform(rng, (out_dim, hidden), hidden, dtype),
                    np.zeros(out_dim, dtype=dtype)),
    )
    return ModelParams("mlp", layers)


def init_cnn(seed: int, conv1: int = 10, conv2: int = 20, hidden: int = 50,
             image_size: int = 28, out_dim: int = 10, dtype=np.float32) -> ModelParams:
    """CNN init; ``image_size`` controls the fc3 input width (4x4 tiles at 28)."""
    side = ((image_size - 4) // 2 - 4) // 2  # two valid 5x5 convs, two 2x2 pools
    if side < 1 or (image_size - 4) % 2 or ((image_size - 4) // 2 - 4) % 2:
        raise ValueError(f"image_size {image_size} does not fit the conv/pool stack")
    fc3_in = conv2 * side * side
    rng = np.random.default_rng(seed)
    layers = (
        LayerParams("conv1", _uniform(rng, (conv1, 1, 5, 5), 1 * 5 * 5, dtype),
                    np.zeros(conv1, dtype=dtype)),
        LayerParams("conv2", _uniform(rng, (conv2, conv1, 5, 5), conv1 * 5 * 5, dtype),
                    np.zeros(conv2, dtype=dtype)),
        LayerParams("fc3", _uniform(rng, (hidden, fc3_in), fc3_in, dtype),
                    np.zeros(hidden, dtype=dtype)),
        LayerParams("fc4", _uniform(rng, (out_dim, hidden), hidden, dtype),
                    np.zeros(out_dim, dtype=dtype)),
    )
    return ModelParams("cnn", layers)


def init_model(arch: str, seed: int) -> ModelParams:
    """Build a freshly initialised model of the given architecture."""
    if arch == "mlp":
        return init_mlp(seed)
    if arch == "cnn":
        return init_cnn(seed)
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")


# ---------------------------------------------------------------------------
# primitive ops


def _relu(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mask = z > 0
    return z * mask, mask


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Valid 5x5 convolution via im2col.  Returns (out, cols) with cols kept
    for the backward pass.  x: (B,Cin,H,W), w: (Cout,Cin,KH,KW)."""
    bsz, cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    oh, ow = h - kh + 1, wid - kw + 1
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))  # (B,Cin,OH,OW,KH,KW)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(bsz * oh * ow, cin * kh * kw)
    out = cols @ w.reshape(cout, -1).T + b
    out = out.reshape(bsz, oh, ow, cout).transpose(0, 3, 1, 2)
    return out, cols


def _conv2d_backward(dout: np.ndarray, cols: np.ndarray, w: np.ndarray,
                     x_shape, need_dx: bool):
    bsz, cout, oh, ow = dout.shape
    _, cin, h, wid = x_shape
    kh, kw = w.shape[2], w.shape[3]
    dmat = dout.transpose(0, 2, 3, 1).reshape(bsz * oh * ow, cout)
    dw = (dmat.T @ cols).reshape(w.shape)
    db = dmat.sum(axis=0)
    dx = None
    if need_dx:
        dcols = (dmat @ w.reshape(cout, -1)).reshape(bsz, oh, ow, cin, kh, kw)
        dcols = dcols.transpose(0, 3, 1, 2, 4, 5)  # (B,Cin,OH,OW,KH,KW)
        dx = np.zeros(x_shape, dtype=dout.dtype)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + oh, j:j + ow] += dcols[:, :, :, :, i, j]
    return dw, db, dx


def _maxpool2(x: np.ndarray):
    """2x2 max pooling, stride 2.  Ties resolve to the first (row-major) cell."""
    bsz, ch, h, wid = x.shape
    tiles = x.reshape(bsz, ch, h // 2, 2, wid // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = tiles.reshape(bsz, ch, h // 2, wid // 2, 4)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _maxpool2_backward(dout: np.ndarray, idx: np.ndarray, x_shape):
    bsz, ch, h, wid = x_shape
    dflat = np.zeros((bsz, ch, h // 2, wid // 2, 4), dtype=dout.dtype)
    np.put_along_axis(dflat, idx[..., None], dout[..., None], axis=-1)
    return dflat.reshape(bsz, ch, h // 2, wid // 2, 2, 2) \
                .transpose(0, 1, 2, 4, 3, 5).reshape(x_shape)


def _softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    bsz = logits.shape[0]
    rows = np.arange(bsz)
    loss = -logp[rows, labels].mean()
    dlogits = np.exp(logp)
    dlogits[rows, labels] -= 1
    dlogits /= bsz
    return float(loss), dlogits


# ---------------------------------------------------------------------------
# forward / backward


def _as_model_input(model: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Check/adapt a batch for the model.  The mlp accepts (B, D) or image
    batches (B, 1, H, W), which it flattens; the cnn requires (B, 1, H, W)."""
    if model.arch == "mlp":
        if inputs.ndim == 4:
            inputs = inputs.reshape(inputs.shape[0], -1)
        if inputs.ndim != 2 or inputs.shape[1] != model.layer("fc1").weights.shape[1]:
            raise ValueError(
                f"mlp expects (B, {model.layer('fc1').weights.shape[1]}) inputs, "
                f"got shape {inputs.shape}")
        return inputs
    if inputs.ndim != 4 or inputs.shape[1] != model.layer("conv1").weights.shape[1]:
        raise ValueError(f"cnn expects (B, 1, H, W) inputs, got shape {inputs.shape}")
    return inputs


def _forward_cached(model: ModelParams, x: np.ndarray):
    """Forward pass returning (logits, cache-for-backward)."""
    if model.arch == "mlp":
        (w1, b1), (w2, b2) = [(l.weights, l.bias) for l in model.layers]
        z1 = x @ w1.T + b1
        a1, m1 = _relu(z1)
        logits = a1 @ w2.T + b2
        return logits, (x, a1, m1)

    (w1, b1), (w2, b2), (w3, b3), (w4, b4) = [(l.weights, l.bias) for l in model.layers]
    z1, cols1 = _conv2d(x, w1, b1)
    a1, m1 = _relu(z1)
    p1, i1 = _maxpool2(a1)
    z2, cols2 = _conv2d(p1, w2, b2)
    a2, m2 = _relu(z2)
    p2, i2 = _maxpool2(a2)
    flat = p2.reshape(p2.shape[0], -1)
    if flat.shape[1] != w3.shape[1]:
        raise ValueError(
            f"input spatial size yields {flat.shape[1]} features, fc3 expects {w3.shape[1]}")
    z3 = flat @ w3.T + b3
    a3, m3 = _relu(z3)
    logits = a3 @ w4.T + b4
    cache = (x, cols1, a1, m1, i1, p1, cols2, a2, m2, i2, p2, flat, a3, m3)
    return logits, cache


def forward(model: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Compute class logits, shape (B, 10)."""
    x = _as_model_input(model, inputs)
    logits, _ = _forward_cached(model, x)
    return logits


def loss_and_grads(model: ModelParams, inputs: np.ndarray,
                   labels: np.ndarray) -> tuple[float, ModelParams]:
    """Mean softmax cross-entropy over the batch and its parameter gradients.

    The returned gradients mirror ``model``'s structure layer for layer.
    """
    x = _as_model_input(model, inputs)
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != x.shape[0]:
        raise ValueError(f"labels shape {labels.shape} does not match batch {x.shape[0]}")
    logits, cache = _forward_cached(model, x)
    loss, dlogits = _softmax_cross_entropy(logits, labels)

    if model.arch == "mlp":
        xin, a1, m1 = cache
        w2 = model.layer("fc2").weights
        dw2 = dlogits.T @ a1
        db2 = dlogits.sum(axis=0)
        dz1 = (dlogits @ w2) * m1
        dw1 = dz1.T @ xin
        db1 = dz1.sum(axis=0)
        grads = (LayerParams("fc1", dw1, db1), LayerParams("fc2", dw2, db2))
        return loss, ModelParams("mlp", grads)

    xin, cols1, a1, m1, i1, p1, cols2, a2, m2, i2, p2, flat, a3, m3 = cache
    w1 = model.layer("conv1").weights
    w2 = model.layer("conv2").weights
    w3 = model.layer("fc3").weights
    w4 = model.layer("fc4").weights

    dw4 = dlogits.T @ a3
    db4 = dlogits.sum(axis=0)
    dz3 = (dlogits @ w4) * m3
    dw3 = dz3.T @ flat
    db3 = dz3.sum(axis=0)
    dp2 = (dz3 @ w3).reshape(p2.shape)
    dz2 = _maxpool2_backward(dp2, i2, a2.shape) * m2
    dw2, db2, dp1 = _conv2d_backward(dz2, cols2, w2, p1.shape, need_dx=True)
    dz1 = _maxpool2_backward(dp1, i1, a1.shape) * m1
    dw1, db1, _ = _conv2d_backward(dz1, cols1, w1, xin.shape, need_dx=False)
    grads = (
        LayerParams("conv1", dw1, db1),
        LayerParams("conv2", dw2, db2),
        LayerParams("fc3", dw3, db3),
        LayerParams("fc4", dw4, db4),
    )
    return loss, ModelParams("cnn", grads)


# ---------------------------------------------------------------------------
# updates


def _check_aligned(a: ModelParams, b: ModelParams):
    if a.arch != b.arch or len(a.layers) != len(b.layers):
        raise ValueError(f"model mismatch: {a.arch}/{len(a.layers)} layers vs "
                         f"{b.arch}/{len(b.layers)}")
    for la, lb in zip(a.layers, b.layers):
        if la.weights.shape != lb.weights.shape or la.bias.shape != lb.bias.shape:
            raise ValueError(f"layer {la.name}: shape mismatch "
                             f"{la.weights.shape} vs {lb.weights.shape}")


def sgd_step(model: ModelParams, grads: ModelParams, lr: float) -> ModelParams:
    """One vanilla SGD update, ``w - lr * g``.  lr == 0 returns the model unchanged."""
    _check_aligned(model, grads)
    if lr == 0:
        return model
    layers = tuple(
        LayerParams(lp.name, lp.weights - lr * gp.weights, lp.bias - lr * gp.bias)
        for lp, gp in zip(model.layers, grads.layers)
    )
    return ModelParams(model.arch, layers)


def combine(a: float, m1: ModelParams, b: float, m2: ModelParams) -> ModelParams:
    """Layer-wise linear combination a*m1 + b*m2."""
    _check_aligned(m1, m2)
    layers = tuple(
        LayerParams(l1.name, a * l1.weights + b * l2.weights, a * l1.bias + b * l2.bias)
        for l1, l2 in zip(m1.layers, m2.layers)
    )
    return ModelParams(m1.arch, layers)


def train_local(model: ModelParams, images: np.ndarray, labels: np.ndarray,
                cfg: LocalTrainConfig, rng: np.random.Generator) -> ModelParams:
    """Minibatch SGD over the given examples for ``cfg.epochs`` epochs."""
    return train_local_with_loss(model, images, labels, cfg, rng)[0]


def train_local_with_loss(model: ModelParams, images: np.ndarray, labels: np.ndarray,
                          cfg: LocalTrainConfig,
                          rng: np.random.Generator) -> tuple[ModelParams, float]:
    """Like :func:`train_local` but also returns the mean per-step training loss.

    Each epoch reshuffles the example order; a trailing partial batch is kept.
    When the whole set fits in one batch the source order is used as-is, so a
    full-batch epoch is exactly one plain gradient-descent step.
    """
    n = labels.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    x = _as_model_input(model, images)
    bsz = cfg.batch_size
    n_batches = -(-n // bsz)  # ceil
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if n_batches > 1 else np.arange(n)
        for s in range(n_batches):
            take = order[s * bsz:(s + 1) * bsz]
            loss, grads = loss_and_grads(model, x[take], labels[take])
            model = sgd_step(model, grads, cfg.learning_rate)
            losses.append(loss)
    return model, float(np.mean(losses))


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(model: ModelParams, inputs: np.ndarray, labels: np.ndarray,
               step: float = 1e-3) -> float:
    """Max relative error between analytic grads and a central-difference oracle.

    The finite differences are evaluated on a float64 shadow copy of the
    model; relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
    """
    _, grads = loss_and_grads(model, inputs, labels)
    shadow = model.astype(np.float64)
    x64 = _as_model_input(shadow, np.asarray(inputs, dtype=np.float64))
    labels = np.asarray(labels)

    def loss_at(m: ModelParams) -> float:
        logits, _ = _forward_cached(m, x64)
        return _softmax_cross_entropy(logits, labels)[0]

    worst = 0.0
    for li, lp in enumerate(shadow.layers):
        for field in ("weights", "bias"):
            arr = getattr(lp, field)
            analytic = getattr(grads.layers[li], field)
            flat = arr.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + step
                up = loss_at(shadow)
                flat[i] = keep - step
                down = loss_at(shadow)
                flat[i] = keep
                numeric = (up - down) / (2 * step)
                a = float(analytic.reshape(-1)[i])
                rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, rel)
    return worst
