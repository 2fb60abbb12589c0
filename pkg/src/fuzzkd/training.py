"""Teacher-to-student distillation harness and the GA fitness proxy.

The teacher is either a trained network or a synthetic oracle that emits a
distribution with a controlled confidence level (handy for pinning the
fuzzy weights in tests). Students come from a fixed pool of 12 candidate
architectures addressed by the first gene of a GA genome.

Training is a plain minibatch loop: forward the student, ask the teacher
for logits, evaluate the configured distillation loss, backpropagate its
analytic logit gradient, and step SGD or Adam. Everything is seeded and
single-threaded, so runs are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses
from .checkpoint import Checkpoint
from .datasets import largest_remainder
from .fuzzy import FuzzyEngine
from .losses import DistillConfig
from .nets import Network, NetworkSpec
from .seeding import subrng


class TrainingError(ValueError):
    """Raised on invalid configs or datasets."""


class TrainingDiverged(RuntimeError):
    """Non-finite loss; carries the epoch and batch where it happened."""

    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class InvalidGenome(ValueError):
    """Genome does not decode to a buildable student for this data."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.001
    batch_size: int = 64
    optimizer: str = "adam"  # adam | sgd
    split: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int = 0
    distill: DistillConfig = DistillConfig()

    def __post_init__(self):
        if self.epochs < 0:
            raise TrainingError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0.0:
            raise TrainingError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise TrainingError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise TrainingError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        s = self.split
        if len(s) != 3 or any(x < 0 for x in s) or abs(sum(s) - 1.0) > 1e-9:
            raise TrainingError(f"split must be 3 ratios summing to 1, got {s}")


class SyntheticTeacher:
    """Oracle teacher: the target class gets a fixed probability mass.

    Targets come from the labels passed alongside each batch, or from
    nearest-center assignment when `centers` is set.
    """

    mode = "synthetic"

    def __init__(self, n_classes: int, confidence: float = 0.9, centers=None):
        if n_classes < 2:
            raise TrainingError(f"need >= 2 classes, got {n_classes}")
        if not (1.0 / n_classes) <= confidence <= 1.0:
            raise TrainingError(
                f"confidence must lie in [1/{n_classes}, 1], got {confidence}"
            )
        self.n_classes = n_classes
        self.confidence = confidence
        self.centers = None if centers is None else np.asarray(centers, dtype=np.float64)

    def logits(self, x, y=None) -> np.ndarray:
        x = np.asarray(x)
        n = x.shape[0]
        if y is not None:
            targets = np.asarray(y, dtype=np.int64)
        elif self.centers is not None:
            flat = x.reshape(n, -1).astype(np.float64)
            d2 = ((flat[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
            targets = d2.argmin(axis=1)
        else:
            raise TrainingError("synthetic teacher needs labels or centers")
        k = self.n_classes
        off = (1.0 - self.confidence) / (k - 1)
        p = np.full((n, k), off)
        p[np.arange(n), targets] = self.confidence
        return np.log(np.clip(p, 1e-12, None))


class NetworkTeacher:
    """A trained network used as the instructor."""

    mode = "trained_network"

    def __init__(self, net: Network):
        self.net = net

    def logits(self, x, y=None) -> np.ndarray:
        return self.net.forward(x)


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict, grads: dict) -> None:
        for name, p in params.items():
            g = grads[name].astype(np.float64)
            p[...] = (p.astype(np.float64) - self.lr * g).astype(p.dtype)


class _Adam:
    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        for name, p in params.items():
            g = grads[name].astype(np.float64)
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m[...] = self.b1 * m + (1 - self.b1) * g
            v[...] = self.b2 * v + (1 - self.b2) * g * g
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            p[...] = (
                p.astype(np.float64) - self.lr * mhat / (np.sqrt(vhat) + self.eps)
            ).astype(p.dtype)


def _make_optimizer(cfg: TrainConfig):
    return _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else _Sgd(cfg.learning_rate)


def stratified_split_indices(y, ratios, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Per-class shuffled train/valid/test index sets, largest-remainder sized."""
    y = np.asarray(y, dtype=np.int64)
    parts: dict[str, list[int]] = {"train": [], "valid": [], "test": []}
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        sizes = largest_remainder(len(idx), ratios)
        offset = 0
        for name, size in zip(("train", "valid", "test"), sizes):
            parts[name].extend(idx[offset:offset + size].tolist())
            offset += size
    return {name: np.sort(np.array(ids, dtype=np.int64)) for name, ids in parts.items()}


def make_blobs(
    n_samples: int = 600, n_classes: int = 3, spread: float = 0.8, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Well-separated 2-D Gaussian clusters, one per class."""
    rng = subrng(seed, "blobs")
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    centers = 4.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    sizes = largest_remainder(n_samples, [1.0 / n_classes] * n_classes)
    xs, ys = [], []
    for cls, size in enumerate(sizes):
        xs.append(centers[cls] + spread * rng.standard_normal((size, 2)))
        ys.append(np.full(size, cls, dtype=np.int64))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


def blob_centers(n_classes: int = 3) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    return 4.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def accuracy(net: Network, x, y) -> float:
    return float((net.predict(x) == np.asarray(y)).mean())


def _spec_metadata(spec: NetworkSpec) -> dict:
    return {
        "kind": spec.kind,
        "input_shape": list(spec.input_shape),
        "n_classes": spec.n_classes,
        "hidden": list(spec.hidden),
        "conv_channels": spec.conv_channels,
        "ds_channels": spec.ds_channels,
    }


def spec_from_metadata(meta: dict) -> NetworkSpec:
    try:
        return NetworkSpec(
            kind=meta["kind"],
            input_shape=tuple(meta["input_shape"]),
            n_classes=int(meta["n_classes"]),
            hidden=tuple(meta["hidden"]),
            conv_channels=int(meta["conv_channels"]),
            ds_channels=int(meta["ds_channels"]),
        )
    except KeyError as exc:
        raise TrainingError(f"checkpoint metadata missing {exc}") from exc


def network_from_checkpoint(ckpt: Checkpoint, dtype=np.float32) -> Network:
    net = Network(spec_from_metadata(ckpt.metadata), seed=0, dtype=dtype)
    net.load_tensors(ckpt.tensors)
    return net


def train_distill(
    teacher,
    student_spec: NetworkSpec,
    data: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    engine: FuzzyEngine | None = None,
) -> tuple[Checkpoint, list[dict]]:
    """Distill the teacher into a fresh student network.

    Returns the best-validation checkpoint and a per-epoch history with
    losses, accuracies and the fuzzy-weight statistics for the epoch.
    """
    x, y = data
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0 or len(x) != len(y):
        raise TrainingError(f"bad dataset: {len(x)} samples, {len(y)} labels")
    if cfg.distill.weight_mode != "static" and engine is None:
        engine = FuzzyEngine()

    split_rng = subrng(cfg.seed, "split")
    parts = stratified_split_indices(y, cfg.split, split_rng)
    xtr, ytr = x[parts["train"]], y[parts["train"]]
    xva, yva = x[parts["valid"]], y[parts["valid"]]
    if len(xtr) == 0:
        raise TrainingError("empty training split")

    train_rng = subrng(cfg.seed, "train")
    student = Network(student_spec, seed=int(train_rng.integers(2 ** 31)))
    optimizer = _make_optimizer(cfg)

    def val_stats() -> tuple[float | None, float | None]:
        if len(xva) == 0:
            return None, None
        logits = student.forward(xva)
        breakdown = losses.compute_loss(
            logits, teacher.logits(xva, yva), yva, cfg.distill, engine
        )
        return breakdown.total, float((logits.argmax(axis=1) == yva).mean())

    def snapshot(epoch: int, val_acc: float) -> Checkpoint:
        tensors = {name: arr.copy() for name, arr in student.tensors().items()}
        meta = dict(_spec_metadata(student_spec))
        meta.update({"epoch": epoch, "val_accuracy": val_acc, "format": "fuzzkd-student"})
        return Checkpoint(tensors, meta)

    val_loss, val_acc = val_stats()
    best_acc = val_acc if val_acc is not None else -1.0
    best = snapshot(0, val_acc)
    history: list[dict] = []

    for epoch in range(cfg.epochs):
        perm = train_rng.permutation(len(xtr))
        loss_sum = 0.0
        seen = 0
        weight_sum = 0.0
        weight_hist = np.zeros(10, dtype=np.int64)
        for bstart in range(0, len(perm), cfg.batch_size):
            batch = perm[bstart:bstart + cfg.batch_size]
            xb, yb = xtr[batch], ytr[batch]
            zs = student.forward(xb)
            zt = teacher.logits(xb, yb)
            breakdown = losses.compute_loss(zs, zt, yb, cfg.distill, engine)
            if not math.isfinite(breakdown.total):
                raise TrainingDiverged(epoch, bstart // cfg.batch_size, breakdown.total)
            grad = losses.loss_gradients(zs, zt, yb, cfg.distill, engine)
            student.backward(grad)
            optimizer.step(student.tensors(), student.grad_tensors())
            loss_sum += breakdown.total * len(batch)
            seen += len(batch)
            weight_sum += float(breakdown.per_sample_weights.sum())
            bins = np.clip(
                (breakdown.per_sample_weights * 10).astype(np.int64), 0, 9
            )
            weight_hist += np.bincount(bins, minlength=10)
        val_loss, val_acc = val_stats()
        history.append({
            "epoch": epoch,
            "train_loss": loss_sum / seen,
            "train_accuracy": accuracy(student, xtr, ytr),
            "val_loss": val_loss,
            "val_accuracy": val_acc,
            "fuzzy_weight_mean": weight_sum / seen,
            "fuzzy_weight_hist": weight_hist.tolist(),
        })
        if val_acc is not None and val_acc > best_acc:
            best_acc = val_acc
            best = snapshot(epoch + 1, val_acc)

    return best, history


# Candidate students for the GA search: 10 dense widths and 2 micro-CNNs.
POOL_MLP_HIDDEN: tuple[tuple[int, ...], ...] = (
    (8,), (16,), (32,), (64,), (128,), (2,), (4,), (16, 8), (32, 16), (64, 32),
)
POOL_CNN_CHANNELS: tuple[tuple[int, int], ...] = ((4, 8), (8, 16))
POOL_SIZE = len(POOL_MLP_HIDDEN) + len(POOL_CNN_CHANNELS)
LR_CHOICES = (0.01, 0.003, 0.001)
PARAM_PENALTY = 0.1


def student_genome_spec():
    from .ga import GenomeSpec

    return GenomeSpec(((0, POOL_SIZE - 1), (0, len(LR_CHOICES) - 1)))


def decode_genome(genome, data_shape: tuple[int, ...], n_classes: int):
    """Genome -> (NetworkSpec, learning rate, flatten-input flag).

    data_shape is the per-sample shape: (d,) for vectors, (h, w) for
    images. MLP candidates flatten image inputs; micro-CNNs need 2-D data.
    """
    genes = [int(g) for g in np.asarray(genome).reshape(-1)]
    if not genes:
        raise InvalidGenome("empty genome")
    idx = genes[0]
    if not 0 <= idx < POOL_SIZE:
        raise InvalidGenome(f"candidate index {idx} outside pool of {POOL_SIZE}")
    if len(genes) > 1:
        if not 0 <= genes[1] < len(LR_CHOICES):
            raise InvalidGenome(f"learning-rate gene {genes[1]} outside choices")
        lr = LR_CHOICES[genes[1]]
    else:
        lr = LR_CHOICES[-1]
    if idx < len(POOL_MLP_HIDDEN):
        d = int(np.prod(data_shape))
        spec = NetworkSpec("mlp", (d,), n_classes, hidden=POOL_MLP_HIDDEN[idx])
        return spec, lr, len(data_shape) > 1
    if len(data_shape) != 2:
        raise InvalidGenome("micro_cnn candidates need 2-D image samples")
    conv_c, ds_c = POOL_CNN_CHANNELS[idx - len(POOL_MLP_HIDDEN)]
    spec = NetworkSpec(
        "micro_cnn", tuple(data_shape), n_classes, conv_channels=conv_c, ds_channels=ds_c
    )
    return spec, lr, False


def pool_max_params(data_shape: tuple[int, ...], n_classes: int) -> int:
    """Largest parameter count over the candidates buildable on this data."""
    counts = []
    for idx in range(POOL_SIZE):
        try:
            spec, _, _ = decode_genome([idx], data_shape, n_classes)
        except InvalidGenome:
            continue
        counts.append(Network(spec, seed=0).n_params())
    return max(counts)


def quick_fitness(
    genome,
    data: tuple[np.ndarray, np.ndarray],
    budget_epochs: int = 5,
    base_cfg: TrainConfig | None = None,
    teacher=None,
    engine: FuzzyEngine | None = None,
) -> float:
    """GA fitness proxy: short-budget validation accuracy minus a size
    penalty of PARAM_PENALTY * (params / params_max)."""
    x, y = data
    x = np.asarray(x)
    data_shape = x.shape[1:]
    n_classes = int(np.asarray(y).max()) + 1
    spec, lr, flatten = decode_genome(genome, data_shape, n_classes)
    if flatten:
        x = x.reshape(len(x), -1)
    cfg = replace(
        base_cfg if base_cfg is not None else TrainConfig(),
        epochs=budget_epochs, learning_rate=lr,
    )
    if teacher is None:
        teacher = SyntheticTeacher(n_classes, confidence=0.9)
    ckpt, _ = train_distill(teacher, spec, (x, y), cfg, engine)
    if ckpt.metadata["val_accuracy"] is None:
        raise TrainingError("validation split is empty; cannot score fitness")
    val_acc = float(ckpt.metadata["val_accuracy"])
    size_ratio = Network(spec, seed=0).n_params() / pool_max_params(data_shape, n_classes)
    return val_acc - PARAM_PENALTY * size_ratio
