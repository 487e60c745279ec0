"""Small two-stage convolutional classifier with hand-written backprop.

Architecture, applied to a rows x cols x channels input:

    conv 3x3, 32 filters, same padding, ReLU
    4x4 max pool
    conv 3x3, 64 filters, same padding, ReLU
    4x4 max pool
    global average pool
    dense to n_classes, softmax

Convolutions run as im2col + matmul; their gradients use the standard
identities (dW from the cached patch matrix, dX as a same-padded correlation
with the spatially flipped, channel-swapped kernels). Max-pool routes the
incoming gradient to the first maximum in row-major window order, so ties
break deterministically.

Parameters are stored float32 (checkpoints round-trip bit-exactly); all
arithmetic is carried out in float64 so finite-difference gradient checks and
training are well conditioned. Adam moment state is float64 as well.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import errors
from .features import FeatureTensor

CHECKPOINT_MAGIC = b"FCM1"

# serialization order of the parameter dict
PARAM_ORDER = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense_w", "dense_b")

_EVAL_CHUNK = 16  # bounds the im2col working set during inference


@dataclass(frozen=True)
class CnnConfig:
    """Network shape. The 32x32x1 reduction exists for fast gradient checks."""

    height: int = 256
    width: int = 256
    channels: int = 2
    conv1_filters: int = 32
    conv2_filters: int = 64
    kernel: int = 3
    pool: int = 4
    n_classes: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.channels not in (1, 2):
            raise ValueError(f"channels must be 1 or 2, got {self.channels}")
        if self.kernel % 2 != 1 or self.kernel < 1:
            raise ValueError(f"kernel must be odd for same padding, got {self.kernel}")
        if self.pool < 1:
            raise ValueError(f"pool must be >= 1, got {self.pool}")
        span = self.pool * self.pool
        if self.height % span or self.width % span:
            raise ValueError(
                f"height/width must be divisible by pool^2={span}, got {self.height}x{self.width}"
            )
        if self.n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.n_classes}")
        if self.conv1_filters < 1 or self.conv2_filters < 1:
            raise ValueError("filter counts must be positive")

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        k = self.kernel
        return {
            "conv1_w": (k, k, self.channels, self.conv1_filters),
            "conv1_b": (self.conv1_filters,),
            "conv2_w": (k, k, self.conv1_filters, self.conv2_filters),
            "conv2_b": (self.conv2_filters,),
            "dense_w": (self.conv2_filters, self.n_classes),
            "dense_b": (self.n_classes,),
        }


@dataclass
class CnnModel:
    config: CnnConfig
    params: dict[str, np.ndarray]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 25
    batch_size: int = 8
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass(frozen=True)
class EvalReport:
    """Accuracy plus a confusion matrix (rows true class, columns predicted)."""

    condition: str
    accuracy: float
    confusion: np.ndarray

    @property
    def n_examples(self) -> int:
        return int(self.confusion.sum())


def init_model(config: CnnConfig) -> CnnModel:
    """He-uniform weights (limit sqrt(6/fan_in)) and zero biases."""
    rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in config.param_shapes().items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape, dtype=np.float32)
            continue
        fan_in = int(np.prod(shape[:-1]))
        limit = np.sqrt(6.0 / fan_in)
        params[name] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
    return CnnModel(config=config, params=params)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padded stride-1 correlation. Returns output and the patch matrix."""
    n, h, wd, cin = x.shape
    k = w.shape[0]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # (n, h, wd, cin, k, k)
    cols = win.reshape(n * h * wd, cin * k * k)
    wmat = w.transpose(2, 0, 1, 3).reshape(cin * k * k, -1)
    out = (cols @ wmat + b).reshape(n, h, wd, -1)
    return out, cols


def _conv_backward(dout: np.ndarray, cols: np.ndarray, x_shape, w: np.ndarray, need_dx: bool = True):
    n, h, wd, cin = x_shape
    k, _, _, cout = w.shape
    dmat = dout.reshape(n * h * wd, cout)
    dw = (cols.T @ dmat).reshape(cin, k, k, cout).transpose(1, 2, 0, 3)
    db = dmat.sum(axis=0)
    dx = None
    if need_dx:
        # correlation with rot180 kernels, input/output channels swapped
        w_back = w[::-1, ::-1].transpose(0, 1, 3, 2)
        dx, _ = _conv_forward(dout, w_back, np.zeros(cin))
    return dw, db, dx


def _maxpool_forward(x: np.ndarray, p: int):
    n, h, w, c = x.shape
    hp, wp = h // p, w // p
    windows = (
        x.reshape(n, hp, p, wp, p, c).transpose(0, 1, 3, 2, 4, 5).reshape(n, hp, wp, p * p, c)
    )
    idx = windows.argmax(axis=3)  # first max in row-major window order
    out = np.take_along_axis(windows, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return out, idx


def _maxpool_backward(dout: np.ndarray, idx: np.ndarray, p: int, x_shape) -> np.ndarray:
    n, h, w, c = x_shape
    hp, wp = h // p, w // p
    dwin = np.zeros((n, hp, wp, p * p, c))
    np.put_along_axis(dwin, idx[:, :, :, None, :], dout[:, :, :, None, :], axis=3)
    return dwin.reshape(n, hp, wp, p, p, c).transpose(0, 1, 3, 2, 4, 5).reshape(n, h, w, c)


def _forward_batch(model: CnnModel, x: np.ndarray, keep_cache: bool = False):
    cfg = model.config
    pr = {k: v.astype(np.float64) for k, v in model.params.items()}
    z1, cols1 = _conv_forward(x, pr["conv1_w"], pr["conv1_b"])
    a1 = np.maximum(z1, 0.0)
    p1, idx1 = _maxpool_forward(a1, cfg.pool)
    z2, cols2 = _conv_forward(p1, pr["conv2_w"], pr["conv2_b"])
    a2 = np.maximum(z2, 0.0)
    p2, idx2 = _maxpool_forward(a2, cfg.pool)
    gap = p2.mean(axis=(1, 2))
    logits = gap @ pr["dense_w"] + pr["dense_b"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(log_probs)
    if not keep_cache:
        return probs, log_probs, None
    cache = {
        "x": x, "params": pr,
        "z1": z1, "cols1": cols1, "idx1": idx1, "p1": p1,
        "z2": z2, "cols2": cols2, "idx2": idx2, "p2": p2,
        "gap": gap,
    }
    return probs, log_probs, cache


def _backward_batch(model: CnnModel, cache: dict, probs: np.ndarray, targets: np.ndarray):
    cfg = model.config
    n = probs.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    grads: dict[str, np.ndarray] = {}
    grads["dense_w"] = cache["gap"].T @ dlogits
    grads["dense_b"] = dlogits.sum(axis=0)
    dgap = dlogits @ cache["params"]["dense_w"].T
    _, h2, w2, _ = cache["p2"].shape
    dp2 = np.broadcast_to(dgap[:, None, None, :] / (h2 * w2), cache["p2"].shape)
    da2 = _maxpool_backward(dp2, cache["idx2"], cfg.pool, cache["z2"].shape)
    dz2 = da2 * (cache["z2"] > 0)
    grads["conv2_w"], grads["conv2_b"], dp1 = _conv_backward(
        dz2, cache["cols2"], cache["p1"].shape, cache["params"]["conv2_w"]
    )
    da1 = _maxpool_backward(dp1, cache["idx1"], cfg.pool, cache["z1"].shape)
    dz1 = da1 * (cache["z1"] > 0)
    grads["conv1_w"], grads["conv1_b"], _ = _conv_backward(
        dz1, cache["cols1"], cache["x"].shape, cache["params"]["conv1_w"], need_dx=False
    )
    return grads


def _as_input(x, config: CnnConfig) -> np.ndarray:
    if isinstance(x, FeatureTensor):
        x = x.data
    x = np.asarray(x, dtype=np.float64)
    want = (config.height, config.width, config.channels)
    if x.shape != want:
        raise errors.ShapeMismatch(f"input shape {x.shape}, model expects {want}")
    return x


def forward(model: CnnModel, x) -> np.ndarray:
    """Class probabilities for one input (sum to 1 within 1e-12)."""
    xb = _as_input(x, model.config)[None]
    probs, _, _ = _forward_batch(model, xb)
    return probs[0]


def loss(model: CnnModel, x, target: int) -> float:
    """Cross-entropy -log p(target) for one input."""
    _check_target(target, model.config.n_classes)
    xb = _as_input(x, model.config)[None]
    _, log_probs, _ = _forward_batch(model, xb)
    return float(-log_probs[0, target])


def backward(model: CnnModel, x, target: int) -> dict[str, np.ndarray]:
    """Cross-entropy gradients for every parameter, same shapes as params."""
    _check_target(target, model.config.n_classes)
    xb = _as_input(x, model.config)[None]
    probs, _, cache = _forward_batch(model, xb, keep_cache=True)
    return _backward_batch(model, cache, probs, np.array([target]))


def _check_target(target: int, n_classes: int) -> None:
    if not 0 <= target < n_classes:
        raise ValueError(f"target {target} outside [0, {n_classes})")


def _stack_dataset(dataset, config: CnnConfig):
    if len(dataset) == 0:
        raise errors.EmptyDataset("dataset has no examples")
    xs = np.empty((len(dataset), config.height, config.width, config.channels), dtype=np.float32)
    ys = np.empty(len(dataset), dtype=np.int64)
    for i, (x, y) in enumerate(dataset):
        _check_target(int(y), config.n_classes)
        xs[i] = _as_input(x, config)
        ys[i] = int(y)
    return xs, ys


def train(model: CnnModel, dataset, cfg: TrainConfig) -> tuple[CnnModel, list[float]]:
    """Adam / cross-entropy training; returns a trained copy and loss history.

    The incoming model is not mutated. Identical data, config, and seeds give
    bit-identical parameters. history[i] is the mean per-example loss of
    epoch i.
    """
    xs, ys = _stack_dataset(dataset, model.config)
    out = CnnModel(config=model.config, params={k: v.copy() for k, v in model.params.items()})
    m_state = {k: np.zeros(v.shape, dtype=np.float64) for k, v in out.params.items()}
    v_state = {k: np.zeros(v.shape, dtype=np.float64) for k, v in out.params.items()}
    rng = np.random.default_rng(cfg.seed)
    history: list[float] = []
    step = 0
    n = len(ys)
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            xb = xs[batch].astype(np.float64)
            yb = ys[batch]
            probs, log_probs, cache = _forward_batch(out, xb, keep_cache=True)
            epoch_loss += float(-log_probs[np.arange(len(batch)), yb].sum())
            grads = _backward_batch(out, cache, probs, yb)
            step += 1
            for name, g in grads.items():
                m_state[name] = cfg.beta1 * m_state[name] + (1 - cfg.beta1) * g
                v_state[name] = cfg.beta2 * v_state[name] + (1 - cfg.beta2) * g * g
                m_hat = m_state[name] / (1 - cfg.beta1**step)
                v_hat = v_state[name] / (1 - cfg.beta2**step)
                updated = out.params[name].astype(np.float64) - cfg.learning_rate * m_hat / (
                    np.sqrt(v_hat) + cfg.epsilon
                )
                out.params[name] = updated.astype(np.float32)
        history.append(epoch_loss / n)
    return out, history


def evaluate(model: CnnModel, dataset, condition: str = "clean") -> EvalReport:
    """Argmax classification over a labeled dataset."""
    xs, ys = _stack_dataset(dataset, model.config)
    n_classes = model.config.n_classes
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for start in range(0, len(ys), _EVAL_CHUNK):
        xb = xs[start : start + _EVAL_CHUNK].astype(np.float64)
        probs, _, _ = _forward_batch(model, xb)
        preds = probs.argmax(axis=1)
        for t, p in zip(ys[start : start + _EVAL_CHUNK], preds):
            confusion[t, p] += 1
    accuracy = float(np.trace(confusion) / confusion.sum())
    return EvalReport(condition=condition, accuracy=accuracy, confusion=confusion)


def save_model(path, model: CnnModel) -> None:
    """Checkpoint: magic, uint32 LE config-JSON length, config JSON, float32 params."""
    blob = json.dumps(dataclasses.asdict(model.config), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in PARAM_ORDER:
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f4").tobytes())


def load_model(path) -> CnnModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise errors.BadMagic(f"{path}: expected {CHECKPOINT_MAGIC!r}, found {magic!r}")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise errors.ShapeMismatch(f"{path}: truncated header")
        (blob_len,) = struct.unpack("<I", raw_len)
        blob = fh.read(blob_len)
        if len(blob) != blob_len:
            raise errors.ShapeMismatch(f"{path}: truncated config block")
        config = CnnConfig(**json.loads(blob.decode("utf-8")))
        params: dict[str, np.ndarray] = {}
        for name, shape in ((n, config.param_shapes()[n]) for n in PARAM_ORDER):
            count = int(np.prod(shape))
            raw = fh.read(count * 4)
            if len(raw) != count * 4:
                raise errors.ShapeMismatch(f"{path}: truncated while reading {name}")
            params[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        trailing = fh.read(1)
    if trailing:
        raise errors.ShapeMismatch(f"{path}: trailing bytes after parameters")
    return CnnModel(config=config, params=params)
