"""Dense feedforward ReLU networks over flat parameter vectors.

Everything downstream (kernel assembly, trainers, acquisition scores)
builds on the exact per-sample gradients computed here, so this module
keeps the parameter layout explicit: one flat float64 vector, layer by
layer, each layer's weight matrix flattened row-major and followed by
its bias when biases are enabled.

Conventions fixed here and relied on everywhere else:
  - loss is L = 1/2 * sum_i sum_c (f_c(x_i) - y_ic)^2 (the 1/2 stays),
  - ReLU subgradient at exactly 0 is 0,
  - all arithmetic in float64,
  - fan-in scaling (pre-activations divided by sqrt(fan_in)) when
    ntk_parameterization is set; biases enter unscaled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of a small dense ReLU classifier.

    hidden_widths may be empty, in which case the model degenerates to a
    linear map f(x) = Wx; the linear model is exactly solvable and is
    used as a reference instance by several tests.

    num_classes == 1 means scalar regression: targets are the class
    index as a float and predictions threshold the output at 0.5.
    """

    input_dim: int
    hidden_widths: tuple = ()
    num_classes: int = 2
    activation: str = "relu"
    init_scale: float = 1.0
    ntk_parameterization: bool = True
    use_bias: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError(f"hidden widths must be positive, got {self.hidden_widths}")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be positive, got {self.num_classes}")
        if self.activation != "relu":
            raise ValueError(f"only relu is supported, got {self.activation!r}")
        if not self.init_scale >= 0:
            raise ValueError(f"init_scale must be nonnegative, got {self.init_scale}")

    @property
    def layer_dims(self):
        """(out, in) shape of each weight matrix, input to output."""
        chain = (self.input_dim, *self.hidden_widths, self.num_classes)
        return tuple((chain[i + 1], chain[i]) for i in range(len(chain) - 1))

    @property
    def num_layers(self):
        return len(self.layer_dims)

    @property
    def layer_offsets(self):
        """(start, length) of each layer's slice in the flat vector."""
        offsets = []
        start = 0
        for out_dim, in_dim in self.layer_dims:
            length = out_dim * in_dim + (out_dim if self.use_bias else 0)
            offsets.append((start, length))
            start += length
        return tuple(offsets)

    @property
    def num_params(self):
        start, length = self.layer_offsets[-1]
        return start + length


@dataclass
class ParamVector:
    """Flat trainable parameters plus the per-layer slice map."""

    values: np.ndarray
    layer_offsets: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("parameter vector must be 1-D")
        pos = 0
        for start, length in self.layer_offsets:
            if start != pos or length < 0:
                raise ValueError("layer offsets must partition the vector exactly")
            pos += length
        if pos != self.values.size:
            raise ValueError(
                f"offsets cover {pos} entries but vector has {self.values.size}"
            )

    @property
    def size(self):
        return self.values.size

    @property
    def last_layer_range(self):
        return self.layer_offsets[-1]

    def layer(self, index):
        start, length = self.layer_offsets[index]
        return self.values[start : start + length]

    def copy(self):
        return ParamVector(self.values.copy(), self.layer_offsets)

    def with_values(self, values):
        return ParamVector(np.asarray(values, dtype=np.float64), self.layer_offsets)


@dataclass
class Jacobian:
    """Per-sample output gradient d f(x) / d theta, one row per class."""

    values: np.ndarray  # (C, P) row-major
    scope: str  # "full" or "last_layer"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("jacobian must be a 2-D matrix")
        if self.scope not in ("full", "last_layer"):
            raise ValueError(f"unknown scope {self.scope!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("jacobian has non-finite entries")

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]


def _unpack(params: ParamVector, spec: NetworkSpec):
    """Views of the flat vector as per-layer (W, b) pairs. No copies."""
    layers = []
    for (start, length), (out_dim, in_dim) in zip(spec.layer_offsets, spec.layer_dims):
        chunk = params.values[start : start + length]
        w = chunk[: out_dim * in_dim].reshape(out_dim, in_dim)
        b = chunk[out_dim * in_dim :] if spec.use_bias else None
        layers.append((w, b))
    return layers


def _layer_scale(spec: NetworkSpec, layer_index):
    if not spec.ntk_parameterization:
        return 1.0
    fan_in = spec.layer_dims[layer_index][1]
    return 1.0 / np.sqrt(fan_in)


def init_network(spec: NetworkSpec, seed: int) -> ParamVector:
    """Draw all parameters i.i.d. standard normal times init_scale."""
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(spec.num_params) * spec.init_scale
    return ParamVector(values, spec.layer_offsets)


def _forward_trace(params: ParamVector, spec: NetworkSpec, X):
    """Forward pass keeping post-activations and ReLU masks for backprop.

    Returns (activations, masks, outputs) where activations[l] is the
    input to layer l (so activations[0] is X) and masks[l] is the strict
    positivity indicator of hidden layer l's pre-activation.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ValueError(
            f"expected inputs of shape (n, {spec.input_dim}), got {X.shape}"
        )
    layers = _unpack(params, spec)
    activations = [X]
    masks = []
    h = X
    for l, (w, b) in enumerate(layers):
        g = (h @ w.T) * _layer_scale(spec, l)
        if b is not None:
            g = g + b
        if l < spec.num_layers - 1:
            mask = g > 0.0  # subgradient at 0 is 0
            h = np.where(mask, g, 0.0)
            masks.append(mask)
            activations.append(h)
        else:
            h = g
    return activations, masks, h


def forward_batch(params: ParamVector, spec: NetworkSpec, X) -> np.ndarray:
    """Network outputs for a batch, shape (n, C)."""
    return _forward_trace(params, spec, X)[2]


def forward(params: ParamVector, spec: NetworkSpec, x) -> np.ndarray:
    """Network output for a single input, shape (C,)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward takes a single input vector; use forward_batch")
    return forward_batch(params, spec, x[None, :])[0]


def jacobian_layer_blocks(params: ParamVector, spec: NetworkSpec, X, scope="full"):
    """Yield (layer_index, block) with block shape (n, C, P_layer).

    Blocks come out last layer first. Consumers that only need
    inner products (kernel assembly) accumulate per block and never
    materialize the full (n, C, P) array for wide nets.
    """
    if scope not in ("full", "last_layer"):
        raise ValueError(f"unknown scope {scope!r}")
    activations, masks, _ = _forward_trace(params, spec, X)
    layers = _unpack(params, spec)
    n = activations[0].shape[0]
    # back[:, c, :] is d f_c / d (pre-activation of current layer)
    back = np.broadcast_to(np.eye(spec.num_classes), (n, spec.num_classes, spec.num_classes)).copy()
    for l in range(spec.num_layers - 1, -1, -1):
        w, b = layers[l]
        scale = _layer_scale(spec, l)
        h_in = activations[l]  # (n, in_dim)
        dw = scale * np.einsum("nco,ni->ncoi", back, h_in)
        out_dim, in_dim = spec.layer_dims[l]
        if spec.use_bias:
            block = np.concatenate(
                [dw.reshape(n, spec.num_classes, out_dim * in_dim), back], axis=2
            )
        else:
            block = dw.reshape(n, spec.num_classes, out_dim * in_dim)
        yield l, block
        if scope == "last_layer":
            return
        if l > 0:
            back = np.einsum("nco,oi->nci", back, scale * w) * masks[l - 1][:, None, :]


def jacobian_batch(params: ParamVector, spec: NetworkSpec, X, scope="full") -> np.ndarray:
    """Stacked per-sample Jacobians, shape (n, C, P_scope)."""
    blocks = dict(jacobian_layer_blocks(params, spec, X, scope))
    if scope == "last_layer":
        return blocks[spec.num_layers - 1]
    ordered = [blocks[l] for l in range(spec.num_layers)]
    return np.concatenate(ordered, axis=2)


def jacobian(params: ParamVector, spec: NetworkSpec, x, scope="full") -> Jacobian:
    """Exact reverse-mode Jacobian of f at a single input."""
    x = np.asarray(x, dtype=np.float64)
    values = jacobian_batch(params, spec, x[None, :], scope)[0]
    return Jacobian(values, scope)


def finite_diff_jacobian(params: ParamVector, spec: NetworkSpec, x, h: float) -> Jacobian:
    """Central-difference Jacobian, the oracle for gradient checks."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    base = params.values
    cols = []
    for i in range(base.size):
        shift = np.zeros_like(base)
        shift[i] = h
        f_plus = forward(params.with_values(base + shift), spec, x)
        f_minus = forward(params.with_values(base - shift), spec, x)
        cols.append((f_plus - f_minus) / (2.0 * h))
    values = np.stack(cols, axis=1) if cols else np.zeros((spec.num_classes, 0))
    return Jacobian(values, "full")


def vjp_batch(params: ParamVector, spec: NetworkSpec, X, cotangents) -> np.ndarray:
    """Flat gradient of sum_i cotangents[i] . f(x_i) with respect to theta."""
    cot = np.asarray(cotangents, dtype=np.float64)
    activations, masks, _ = _forward_trace(params, spec, X)
    if cot.shape != (activations[0].shape[0], spec.num_classes):
        raise ValueError(f"cotangent shape {cot.shape} does not match outputs")
    layers = _unpack(params, spec)
    grad = np.zeros(spec.num_params)
    a = cot  # (n, d_l): running adjoint of pre-activations
    for l in range(spec.num_layers - 1, -1, -1):
        w, b = layers[l]
        scale = _layer_scale(spec, l)
        start, length = spec.layer_offsets[l]
        out_dim, in_dim = spec.layer_dims[l]
        gw = scale * (a.T @ activations[l])
        grad[start : start + out_dim * in_dim] = gw.ravel()
        if spec.use_bias:
            grad[start + out_dim * in_dim : start + length] = a.sum(axis=0)
        if l > 0:
            a = (a @ (scale * w)) * masks[l - 1]
    return grad


def mse_loss(outputs, targets) -> float:
    """L = 1/2 * sum of squared residuals (summed, not averaged)."""
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if outputs.shape != targets.shape:
        raise ValueError(f"shape mismatch: outputs {outputs.shape}, targets {targets.shape}")
    diff = outputs - targets
    return 0.5 * float(np.sum(diff * diff))


def grad_mse(params: ParamVector, spec: NetworkSpec, X, Y) -> np.ndarray:
    """Exact flat gradient of mse_loss(forward_batch(X), Y)."""
    Y = np.asarray(Y, dtype=np.float64)
    out = forward_batch(params, spec, X)
    if out.shape != Y.shape:
        raise ValueError(f"shape mismatch: outputs {out.shape}, targets {Y.shape}")
    return vjp_batch(params, spec, X, out - Y)


def one_hot(labels, num_classes: int) -> np.ndarray:
    """Targets in {0,1}; for num_classes == 1 the class index is the target."""
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes == 1:
        return labels.astype(np.float64)[:, None]
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    targets = np.zeros((labels.size, num_classes))
    targets[np.arange(labels.size), labels] = 1.0
    return targets


def softmax(logits) -> np.ndarray:
    """Row-wise stable softmax at temperature 1."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=-1, keepdims=True)


def predict_classes(params: ParamVector, spec: NetworkSpec, X) -> np.ndarray:
    out = forward_batch(params, spec, X)
    if spec.num_classes == 1:
        return (out[:, 0] >= 0.5).astype(np.int64)
    return np.argmax(out, axis=1)


def accuracy(params: ParamVector, spec: NetworkSpec, X, labels) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        return float("nan")
    return float(np.mean(predict_classes(params, spec, X) == labels))
