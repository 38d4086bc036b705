"""Minimal deterministic feedforward trainer.

Supports fully-connected nets and small same-padded convnets with ReLU,
softmax cross-entropy, SGD with momentum + L2 weight decay, and cosine
learning-rate decay. All state lives in a flat float64 parameter vector
so runs are bitwise reproducible given (arch, seed, data, config).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from currlab.nn.backend import kernels


@dataclass(frozen=True)
class ArchSpec:
    """Architecture description; parameter count is a pure function of it.

    kind="mlp": layer_widths = (in, hidden..., num_classes).
    kind="small_conv": in_shape = (C,H,W); conv_channels per conv layer
    (same padding, odd kernel_size), pool[i] applies 2x2/2 max pooling
    after layer i; a final dense layer maps to num_classes.
    """

    kind: str
    num_classes: int
    layer_widths: tuple = ()
    conv_channels: tuple = ()
    kernel_size: int = 3
    pool: tuple = ()
    in_shape: tuple = ()
    activation: str = "relu"

    def __post_init__(self):
        if self.kind not in ("mlp", "small_conv"):
            raise ValueError(f"unknown arch kind {self.kind!r}")
        if self.activation != "relu":
            raise ValueError("only relu activation is supported")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.kind == "mlp":
            if len(self.layer_widths) < 2:
                raise ValueError("mlp needs at least input and output widths")
            if any(w < 1 for w in self.layer_widths):
                raise ValueError("all layer widths must be >= 1")
            if self.layer_widths[-1] != self.num_classes:
                raise ValueError("last layer width must equal num_classes")
        else:
            if not self.conv_channels or any(c < 1 for c in self.conv_channels):
                raise ValueError("conv_channels must be positive")
            if self.kernel_size < 1 or self.kernel_size % 2 == 0:
                raise ValueError("kernel_size must be odd and >= 1")
            if len(self.in_shape) != 3:
                raise ValueError("small_conv requires in_shape = (C, H, W)")
            pool = self.pool or (False,) * len(self.conv_channels)
            if len(pool) != len(self.conv_channels):
                raise ValueError("pool flags must match conv_channels length")
            h, w = self.in_shape[1], self.in_shape[2]
            for p in pool:
                if p:
                    if h % 2 or w % 2:
                        raise ValueError("pooled spatial dims must be even")
                    h, w = h // 2, w // 2

    @property
    def input_dim(self):
        if self.kind == "mlp":
            return self.layer_widths[0]
        c, h, w = self.in_shape
        return c * h * w


def _layout(arch):
    """List of (name, shape, fan_in) for every parameter tensor, in order."""
    out = []
    if arch.kind == "mlp":
        ws = arch.layer_widths
        for i in range(len(ws) - 1):
            out.append((f"W{i}", (ws[i], ws[i + 1]), ws[i]))
            out.append((f"b{i}", (ws[i + 1],), ws[i]))
        return out
    cin, h, w = arch.in_shape
    k = arch.kernel_size
    pool = arch.pool or (False,) * len(arch.conv_channels)
    for i, cout in enumerate(arch.conv_channels):
        out.append((f"W{i}", (cout, cin, k, k), cin * k * k))
        out.append((f"b{i}", (cout,), cin * k * k))
        cin = cout
        if pool[i]:
            h, w = h // 2, w // 2
    flat = cin * h * w
    out.append(("Wfc", (flat, arch.num_classes), flat))
    out.append(("bfc", (arch.num_classes,), flat))
    return out


def param_count(arch):
    return sum(int(np.prod(shape)) for _, shape, _ in _layout(arch))


@dataclass
class Model:
    arch: ArchSpec
    params: np.ndarray
    init_seed: int

    def views(self):
        """Per-tensor views into the flat parameter vector."""
        out = {}
        off = 0
        for name, shape, _ in _layout(self.arch):
            n = int(np.prod(shape))
            out[name] = self.params[off:off + n].reshape(shape)
            off += n
        return out

    def copy(self):
        return Model(self.arch, self.params.copy(), self.init_seed)


@dataclass
class OptimizerState:
    momentum_buffer: np.ndarray
    momentum_coefficient: float = 0.9
    weight_decay: float = 5e-5
    base_lr: float = 0.1

    @classmethod
    def for_model(cls, model, momentum=0.9, weight_decay=5e-5, base_lr=0.1):
        return cls(np.zeros_like(model.params), momentum, weight_decay, base_lr)


@dataclass
class Batch:
    example_ids: np.ndarray
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        n = len(self.example_ids)
        if n < 1 or len(self.inputs) != n or len(self.labels) != n:
            raise ValueError("ids/inputs/labels must share leading length >= 1")


def init_model(arch, seed):
    """Fan-in-scaled uniform init: weights ~ U(+-sqrt(6/fan_in)), biases 0.

    Tensors are drawn in layout order from a single seeded generator, so
    identical (arch, seed) gives bitwise-identical parameters.
    """
    rng = np.random.default_rng(seed)
    parts = []
    for name, shape, fan_in in _layout(arch):
        n = int(np.prod(shape))
        if name.startswith("b"):
            parts.append(np.zeros(n))
        else:
            lim = math.sqrt(6.0 / fan_in)
            parts.append(rng.uniform(-lim, lim, size=n))
    return Model(arch, np.concatenate(parts), seed)


def _shape_input(arch, x):
    x = np.asarray(x, dtype=np.float64)
    if arch.kind == "mlp":
        x = x.reshape(len(x), -1)
        if x.shape[1] != arch.layer_widths[0]:
            raise ValueError(
                f"input dim {x.shape[1]} != arch input {arch.layer_widths[0]}")
        return x
    want = arch.in_shape
    if x.ndim == 2:
        if x.shape[1] != int(np.prod(want)):
            raise ValueError(f"flat input dim {x.shape[1]} != prod{want}")
        return x.reshape((len(x),) + want)
    if x.shape[1:] != want:
        raise ValueError(f"input shape {x.shape[1:]} != arch in_shape {want}")
    return x


def _forward_cached(model, x):
    """Run the net, returning (logits, cache-for-backward)."""
    arch = model.arch
    v = model.views()
    x = _shape_input(arch, x)
    cache = {"x0": x}
    if arch.kind == "mlp":
        acts = [x]
        h = x
        nl = len(arch.layer_widths) - 1
        for i in range(nl):
            z = h @ v[f"W{i}"] + v[f"b{i}"]
            if i < nl - 1:
                h = np.maximum(z, 0.0)
                acts.append(h)
            else:
                h = z
        cache["acts"] = acts
        return h, cache
    K = kernels()
    pool = arch.pool or (False,) * len(arch.conv_channels)
    h = x
    convs = []
    for i in range(len(arch.conv_channels)):
        z = K.conv2d_forward(h, v[f"W{i}"], v[f"b{i}"])
        a = np.maximum(z, 0.0)
        entry = {"inp": h, "z": z, "act": a}
        if pool[i]:
            p, arg = K.maxpool2_forward(a)
            entry["arg"], entry["hw"] = arg, a.shape[2:]
            h = p
        else:
            h = a
        entry["out"] = h
        convs.append(entry)
    flat = h.reshape(len(h), -1)
    logits = flat @ v["Wfc"] + v["bfc"]
    cache["convs"], cache["flat"] = convs, flat
    return logits, cache


def forward(model, batch):
    """Logits for a batch; pure function of (model, batch)."""
    x = batch.inputs if isinstance(batch, Batch) else batch
    logits, _ = _forward_cached(model, x)
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logits")
    return logits


def _log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax_xent(logits, labels):
    """(mean_loss, per_example_losses, dlogits-of-mean-loss)."""
    B = len(logits)
    logp = _log_softmax(logits)
    losses = -logp[np.arange(B), labels]
    dlogits = np.exp(logp)
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    return losses.mean(), losses, dlogits


def loss_and_grad(model, batch):
    """Mean softmax cross-entropy + reverse-mode gradient over all params."""
    x = batch.inputs if isinstance(batch, Batch) else batch[0]
    y = batch.labels if isinstance(batch, Batch) else batch[1]
    y = np.asarray(y)
    logits, cache = _forward_cached(model, x)
    mean_loss, losses, dlogits = softmax_xent(logits, y)

    arch = model.arch
    v = model.views()
    grad = np.zeros_like(model.params)
    gv = Model(arch, grad, model.init_seed).views()

    if arch.kind == "mlp":
        acts = cache["acts"]
        nl = len(arch.layer_widths) - 1
        d = dlogits
        for i in range(nl - 1, -1, -1):
            gv[f"W{i}"][...] = acts[i].T @ d
            gv[f"b{i}"][...] = d.sum(axis=0)
            if i > 0:
                d = (d @ v[f"W{i}"].T) * (acts[i] > 0.0)
        return mean_loss, losses, grad

    K = kernels()
    flat = cache["flat"]
    gv["Wfc"][...] = flat.T @ dlogits
    gv["bfc"][...] = dlogits.sum(axis=0)
    d = (dlogits @ v["Wfc"].T).reshape(cache["convs"][-1]["out"].shape)
    for i in range(len(arch.conv_channels) - 1, -1, -1):
        e = cache["convs"][i]
        if "arg" in e:
            d = K.maxpool2_backward(e["arg"], np.ascontiguousarray(d), *e["hw"])
        d = d * (e["z"] > 0.0)
        d, dw, db = K.conv2d_backward(e["inp"], v[f"W{i}"], np.ascontiguousarray(d))
        gv[f"W{i}"][...] = dw
        gv[f"b{i}"][...] = db
    return mean_loss, losses, grad


def sgd_step(model, opt, grad, lr):
    """v <- mu*v + (grad + wd*theta); theta <- theta - lr*v (in place)."""
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient")
    buf = opt.momentum_buffer
    buf *= opt.momentum_coefficient
    buf += grad + opt.weight_decay * model.params
    model.params -= lr * buf
    return model, opt


def cosine_lr(t, T, eta0):
    """lr(t) = eta0 * 0.5 * (1 + cos(pi*(t-1)/T)) for step t in [1, T]."""
    if not 1 <= t <= T:
        raise ValueError(f"step {t} outside [1, {T}]")
    return eta0 * 0.5 * (1.0 + math.cos(math.pi * (t - 1) / T))


def evaluate(model, dataset, batch_size=512):
    """(accuracy, mean_loss, per_example_correct, per_example_loss).

    `dataset` is anything with .inputs and .labels arrays (nonempty).
    """
    inputs, labels = np.asarray(dataset.inputs), np.asarray(dataset.labels)
    n = len(inputs)
    if n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    correct = np.zeros(n, dtype=bool)
    losses = np.zeros(n)
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        logits, _ = _forward_cached(model, inputs[lo:hi])
        logp = _log_softmax(logits)
        y = labels[lo:hi]
        losses[lo:hi] = -logp[np.arange(hi - lo), y]
        correct[lo:hi] = logits.argmax(axis=1) == y
    return correct.mean(), losses.mean(), correct, losses
