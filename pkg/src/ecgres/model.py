"""The residual 1D CNN: architecture assembly, training loop, checkpoints.

Layer graph (default config, lengths in parentheses):

    input (1x180)
      -> Conv(18, k3, s2, p1) + ReLU        (90)
      -> MaxPool(2, 2)                      (45)
      -> Conv(18, k3, s2, p1) + ReLU        (23)
      -> MaxPool(2, 2, ceil)                (12)
      -> [ Conv(18, k7, s2, p3) + ReLU -> Conv(18, k7, s1, p3) ]   (6)
         + Conv(18, k1, s2) projection shortcut
      -> ReLU -> Flatten (108) -> Dense(64) + ReLU -> Dense(5)
"""
from __future__ import annotations

import io
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import CheckpointError, ConfigError, NumericError, ShapeError
from .segment import DatasetSplit, segments_to_arrays
from .wfdb_io import BeatClass


@dataclass(frozen=True)
class ModelConfig:
    input_length: int = 180
    conv_filters: int = 18
    conv_kernel: int = 3
    conv_stride: int = 2
    pool_window: int = 2
    pool_stride: int = 2
    res_kernel: int = 7
    res_stride: int = 2
    res_filters: int = 18
    fc_hidden: int = 64
    num_classes: int = 5
    seed: int = 0

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    learning_rate: float = 0.001
    shuffle_seed: int = 0
    optimizer: str = "adam"  # "adam" | "sgd"
    eval_each_epoch: bool = False


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float | None
    seconds: float


@dataclass
class TrainLog:
    epochs: list[EpochStats] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,test_acc,seconds"]
        for e in self.epochs:
            test = "" if e.test_accuracy is None else f"{e.test_accuracy:.6f}"
            lines.append(
                f"{e.epoch},{e.train_loss:.6f},{e.train_accuracy:.6f},{test},{e.seconds:.3f}"
            )
        return "\n".join(lines) + "\n"


class Model:
    """Parameter container plus the hand-chained forward/backward pass."""

    def __init__(self, config: ModelConfig):
        self.config = config
        c = config
        pad = c.conv_kernel // 2
        res_pad = c.res_kernel // 2
        rng = np.random.default_rng(c.seed)

        length = c.input_length
        chain = [length]

        def advance(kernel, stride, padding):
            nonlocal length
            length = nn.conv_out_length(length, kernel, stride, padding)
            chain.append(length)

        self.conv1 = nn.Conv1d(1, c.conv_filters, c.conv_kernel, c.conv_stride, pad, rng)
        advance(c.conv_kernel, c.conv_stride, pad)
        self.relu1 = nn.ReLU()
        self.pool1 = nn.MaxPool1d(c.pool_window, c.pool_stride, ceil_mode=True)
        length = -(-(length - c.pool_window) // c.pool_stride) + 1 if length >= c.pool_window else 0
        chain.append(length)

        self.conv2 = nn.Conv1d(c.conv_filters, c.conv_filters, c.conv_kernel, c.conv_stride, pad, rng)
        advance(c.conv_kernel, c.conv_stride, pad)
        self.relu2 = nn.ReLU()
        self.pool2 = nn.MaxPool1d(c.pool_window, c.pool_stride, ceil_mode=True)
        length = -(-(length - c.pool_window) // c.pool_stride) + 1 if length >= c.pool_window else 0
        chain.append(length)

        self.res_conv1 = nn.Conv1d(c.conv_filters, c.res_filters, c.res_kernel, c.res_stride, res_pad, rng)
        self.res_relu = nn.ReLU()
        self.res_conv2 = nn.Conv1d(c.res_filters, c.res_filters, c.res_kernel, 1, res_pad, rng)
        self.res_proj = nn.Conv1d(c.conv_filters, c.res_filters, 1, c.res_stride, 0, rng)
        advance(c.res_kernel, c.res_stride, res_pad)
        self.relu3 = nn.ReLU()

        if min(chain) <= 0:
            raise ConfigError(f"layer length chain collapses: {chain}")
        self.length_chain = chain
        self.flat_features = c.res_filters * length

        self.fc1 = nn.Dense(self.flat_features, c.fc_hidden, rng)
        self.relu4 = nn.ReLU()
        self.fc2 = nn.Dense(c.fc_hidden, c.num_classes, rng)

        self._named = {
            "conv1": self.conv1, "conv2": self.conv2,
            "res_conv1": self.res_conv1, "res_conv2": self.res_conv2,
            "res_proj": self.res_proj, "fc1": self.fc1, "fc2": self.fc2,
        }

    def params(self) -> dict[str, np.ndarray]:
        return {
            f"{lname}.{pname}": arr
            for lname, layer in self._named.items()
            for pname, arr in layer.params.items()
        }

    def grads(self) -> dict[str, np.ndarray]:
        return {
            f"{lname}.{pname}": arr
            for lname, layer in self._named.items()
            for pname, arr in layer.grads.items()
        }

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.config.input_length:
            raise ShapeError(
                f"expected (batch, 1, {self.config.input_length}), got {x.shape}"
            )
        nn.check_finite(x, "model input")
        x = x.astype(np.float64, copy=False)
        h = self.pool1.forward(self.relu1.forward(self.conv1.forward(x)))
        h = self.pool2.forward(self.relu2.forward(self.conv2.forward(h)))
        main = self.res_conv2.forward(self.res_relu.forward(self.res_conv1.forward(h)))
        short = self.res_proj.forward(h)
        r = self.relu3.forward(nn.residual_add(main, short))
        self._res_shape = r.shape
        flat = r.reshape(r.shape[0], -1)
        return self.fc2.forward(self.relu4.forward(self.fc1.forward(flat)))

    def backward(self, grad_logits: np.ndarray) -> None:
        g = self.fc1.backward(self.relu4.backward(self.fc2.backward(grad_logits)))
        g = self.relu3.backward(g.reshape(self._res_shape))
        g_main = self.res_conv1.backward(
            self.res_relu.backward(self.res_conv2.backward(g))
        )
        g_short = self.res_proj.backward(g)
        g = g_main + g_short
        g = self.conv2.backward(self.relu2.backward(self.pool2.backward(g)))
        g = self.conv1.backward(self.relu1.backward(self.pool1.backward(g)))


def build_model(config: ModelConfig = ModelConfig()) -> Model:
    return Model(config)


def evaluate_accuracy(model: Model, x: np.ndarray, labels: np.ndarray,
                      batch_size: int = 256) -> float:
    correct = 0
    for i in range(0, len(x), batch_size):
        logits = model.forward(x[i : i + batch_size])
        correct += int((logits.argmax(axis=1) == labels[i : i + batch_size]).sum())
    return correct / len(x)


def predict_batch(model: Model, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(predicted class ids, per-class probabilities)."""
    logits = model.forward(x)
    probs = nn.softmax(logits)
    return probs.argmax(axis=1), probs


def predict(model: Model, segment) -> tuple[BeatClass, np.ndarray]:
    samples = np.asarray(segment.samples if hasattr(segment, "samples") else segment,
                         dtype=np.float32)
    pred, probs = predict_batch(model, samples[None, None, :])
    return BeatClass(int(pred[0])), probs[0]


def train(model: Model, split: DatasetSplit, tc: TrainConfig = TrainConfig(),
          verbose: bool = False) -> TrainLog:
    if not split.train:
        raise ConfigError("empty training set")
    x_train, y_train = segments_to_arrays(split.train)
    x_test, y_test = (segments_to_arrays(split.test) if split.test else (None, None))

    if tc.optimizer == "adam":
        opt = nn.Adam(lr=tc.learning_rate)
    elif tc.optimizer == "sgd":
        opt = nn.Sgd(lr=tc.learning_rate)
    else:
        raise ConfigError(f"unknown optimizer {tc.optimizer!r}")

    rng = np.random.default_rng(tc.shuffle_seed)
    log = TrainLog()
    n = len(x_train)
    for epoch in range(1, tc.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        losses = []
        correct = 0
        for start in range(0, n, tc.batch_size):
            idx = order[start : start + tc.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            logits = model.forward(xb)
            try:
                loss, probs, grad = nn.softmax_cross_entropy(logits, yb)
                if not np.isfinite(loss):
                    raise NumericError("non-finite loss")
            except NumericError as e:
                raise NumericError(
                    f"epoch {epoch}, batch {start // tc.batch_size}: {e}"
                ) from e
            model.backward(grad)
            opt.step(model.params(), model.grads())
            losses.append(loss)
            correct += int((logits.argmax(axis=1) == yb).sum())
        test_acc = None
        if tc.eval_each_epoch and x_test is not None:
            test_acc = evaluate_accuracy(model, x_test, y_test)
        stats = EpochStats(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            train_accuracy=correct / n,
            test_accuracy=test_acc,
            seconds=time.perf_counter() - t0,
        )
        log.epochs.append(stats)
        if verbose:
            extra = "" if test_acc is None else f"  test_acc={test_acc:.4f}"
            print(
                f"epoch {epoch:4d}/{tc.epochs}  loss={stats.train_loss:.4f}  "
                f"train_acc={stats.train_accuracy:.4f}{extra}  "
                f"({stats.seconds:.1f}s)",
                flush=True,
            )
    return log


# --- checkpoint file: magic "ECGM", version u16, u32-length config text block
#     ("key=value\n" lines), then per tensor: u16 name length + name, u8 rank,
#     u32 dims, little-endian float32 data ---

CHECKPOINT_MAGIC = b"ECGM"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: Model, path) -> None:
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<H", CHECKPOINT_VERSION))
    cfg = "".join(f"{k}={v}\n" for k, v in model.config.to_dict().items()).encode()
    buf.write(struct.pack("<I", len(cfg)))
    buf.write(cfg)
    for name, arr in model.params().items():
        nb = name.encode()
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", arr.ndim))
        for d in arr.shape:
            buf.write(struct.pack("<I", d))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> Model:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    try:
        (version,) = struct.unpack_from("<H", data, 4)
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (cfg_len,) = struct.unpack_from("<I", data, 6)
        pos = 10
        cfg_text = data[pos : pos + cfg_len].decode()
        pos += cfg_len
        fields = {}
        for line in cfg_text.splitlines():
            k, v = line.split("=", 1)
            fields[k] = int(v)
        model = Model(ModelConfig(**fields))
        params = model.params()
        seen = set()
        while pos < len(data):
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + name_len].decode()
            pos += name_len
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
            if arr.size != count:
                raise CheckpointError(f"{path}: truncated tensor {name}")
            pos += 4 * count
            if name not in params:
                raise CheckpointError(f"{path}: unknown tensor {name}")
            if tuple(shape) != params[name].shape:
                raise CheckpointError(
                    f"{path}: tensor {name} shape {tuple(shape)} does not match "
                    f"model shape {params[name].shape}"
                )
            params[name][...] = arr.reshape(shape)
            seen.add(name)
        missing = set(params) - seen
        if missing:
            raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")
    except (struct.error, ValueError, TypeError) as e:
        raise CheckpointError(f"{path}: corrupt checkpoint ({e})") from e
    return model
