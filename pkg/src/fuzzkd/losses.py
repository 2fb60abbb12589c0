"""Distillation losses: tempered softmax, CE, KL, and their gradients.

The static loss balances a hard-label cross-entropy term against a
temperature-softened teacher/student KL term with one fixed weight. The
fuzzy loss replaces the fixed balance with a per-sample weight produced by
the fuzzy engine from the teacher's unsoftened distribution.

All functions are pure and operate on float64 numpy arrays. Logits may be
a single vector (K,) or a batch (N, K); batch reduction is the arithmetic
mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fuzzy import FuzzyEngine

PROB_FLOOR = 1e-12  # applied before every log


class LossDomainError(ValueError):
    """Raised on invalid shapes, temperatures or label indices."""


@dataclass(frozen=True)
class ProbVector:
    """A normalized distribution (or batch of them) plus the T that made it."""

    probs: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim not in (1, 2):
            raise LossDomainError(f"probs must be 1-D or 2-D, got shape {p.shape}")
        if np.any(p < -1e-12):
            raise LossDomainError("negative probability component")
        sums = p.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise LossDomainError("probabilities do not sum to 1 within 1e-9")

    @property
    def n_classes(self) -> int:
        return self.probs.shape[-1]


@dataclass(frozen=True)
class DistillConfig:
    """Loss hyperparameters. weight_mode picks static vs fuzzy balancing."""

    fixed_weight: float = 0.1
    temperature: float = 2.0
    balance_v: float = 0.5
    weight_mode: str = "static"  # static | fuzzy_mamdani | fuzzy_weighted_sum

    def __post_init__(self):
        if not 0.0 <= self.fixed_weight <= 1.0:
            raise LossDomainError(f"fixed_weight must be in [0, 1], got {self.fixed_weight}")
        if self.temperature <= 0.0:
            raise LossDomainError(f"temperature must be > 0, got {self.temperature}")
        if not 0.0 <= self.balance_v <= 1.0:
            raise LossDomainError(f"balance_v must be in [0, 1], got {self.balance_v}")
        if self.weight_mode not in ("static", "fuzzy_mamdani", "fuzzy_weighted_sum"):
            raise LossDomainError(f"unknown weight_mode {self.weight_mode!r}")

    @property
    def fuzzy_method(self) -> str:
        if self.weight_mode == "fuzzy_mamdani":
            return "mamdani"
        if self.weight_mode == "fuzzy_weighted_sum":
            return "weighted_sum"
        raise LossDomainError(f"weight_mode {self.weight_mode!r} is not fuzzy")


@dataclass(frozen=True)
class LossBreakdown:
    """Total loss and the pieces it recomposes from.

    ce_term is the mean hard-label cross-entropy. kd_term is the softened
    KL side as it enters the total: for the static loss the mean T^2-scaled
    KL, for the fuzzy loss the mean of (per-sample weight x T^2-scaled KL).
    """

    total: float
    ce_term: float
    kd_term: float
    fuzzy_weight: float
    per_sample_weights: np.ndarray


def _as_batch(logits, name: str) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.shape[1] < 2:
        raise LossDomainError(f"{name} must be (K,) or (N, K) with K >= 2, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise LossDomainError(f"{name} contains non-finite values")
    return z


def _label_indices(labels, n: int, k: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim == 2:  # one-hot
        if y.shape != (n, k):
            raise LossDomainError(f"one-hot labels shape {y.shape} != ({n}, {k})")
        y = y.argmax(axis=1)
    y = y.astype(np.int64).reshape(-1)
    if y.shape[0] != n:
        raise LossDomainError(f"expected {n} labels, got {y.shape[0]}")
    if np.any(y < 0) or np.any(y >= k):
        raise LossDomainError(f"label index out of range for {k} classes")
    return y


def softmax_t(logits, temperature: float) -> ProbVector:
    """Temperature-softened softmax with max-subtraction for stability."""
    if temperature <= 0.0:
        raise LossDomainError(f"temperature must be > 0, got {temperature}")
    z = np.asarray(logits, dtype=np.float64)
    squeeze = z.ndim == 1
    zb = _as_batch(z, "logits") / temperature
    zb = zb - zb.max(axis=1, keepdims=True)
    e = np.exp(zb)
    p = e / e.sum(axis=1, keepdims=True)
    return ProbVector(p[0] if squeeze else p, temperature)


def cross_entropy(labels, p: ProbVector) -> float:
    """Mean -ln p[true class] over the batch, probabilities floored at 1e-12."""
    probs = p.probs if p.probs.ndim == 2 else p.probs[None, :]
    n, k = probs.shape
    if n == 0:
        raise LossDomainError("empty batch")
    y = _label_indices(labels, n, k)
    picked = np.maximum(probs[np.arange(n), y], PROB_FLOOR)
    return float(-np.log(picked).mean())


def kl_divergence(p: ProbVector, q: ProbVector) -> float:
    """Mean KL(p || q) over the batch; p-zero terms drop, q floored at 1e-12."""
    if p.n_classes != q.n_classes:
        raise LossDomainError(
            f"class count mismatch: {p.n_classes} vs {q.n_classes}"
        )
    if p.temperature != q.temperature:
        raise LossDomainError(
            f"temperature mismatch: {p.temperature} vs {q.temperature}"
        )
    pa = p.probs if p.probs.ndim == 2 else p.probs[None, :]
    qa = q.probs if q.probs.ndim == 2 else q.probs[None, :]
    if pa.shape != qa.shape:
        raise LossDomainError(f"shape mismatch: {pa.shape} vs {qa.shape}")
    qa = np.maximum(qa, PROB_FLOOR)
    terms = np.where(pa > 0.0, pa * (np.log(np.maximum(pa, PROB_FLOOR)) - np.log(qa)), 0.0)
    return float(terms.sum(axis=1).mean())


def _per_sample_kd(student: np.ndarray, teacher: np.ndarray, t: float) -> np.ndarray:
    """T^2-scaled KL(teacher_T || student_T) per sample."""
    pt = softmax_t(teacher, t).probs
    ps = np.maximum(softmax_t(student, t).probs, PROB_FLOOR)
    terms = np.where(pt > 0.0, pt * (np.log(np.maximum(pt, PROB_FLOOR)) - np.log(ps)), 0.0)
    return t * t * terms.sum(axis=1)


def _per_sample_ce(student: np.ndarray, y: np.ndarray) -> np.ndarray:
    p1 = softmax_t(student, 1.0).probs
    picked = np.maximum(p1[np.arange(len(y)), y], PROB_FLOOR)
    return -np.log(picked)


def kd_loss_static(student_logits, teacher_logits, labels, cfg: DistillConfig) -> LossBreakdown:
    """Fixed-weight loss: w * CE(hard) + (1 - w) * T^2 * KL(teacher || student)."""
    zs = _as_batch(student_logits, "student_logits")
    zt = _as_batch(teacher_logits, "teacher_logits")
    if zs.shape != zt.shape:
        raise LossDomainError(f"logit shape mismatch: {zs.shape} vs {zt.shape}")
    y = _label_indices(labels, zs.shape[0], zs.shape[1])
    w = cfg.fixed_weight
    ce = float(_per_sample_ce(zs, y).mean())
    kd = float(_per_sample_kd(zs, zt, cfg.temperature).mean())
    total = w * ce + (1.0 - w) * kd
    weights = np.full(zs.shape[0], w)
    return LossBreakdown(total, ce, kd, w, weights)


def fuzzy_sample_weights(teacher_logits, cfg: DistillConfig, engine: FuzzyEngine) -> np.ndarray:
    """Per-sample fuzzy weights from the teacher's unsoftened distributions."""
    zt = _as_batch(teacher_logits, "teacher_logits")
    pt1 = softmax_t(zt, 1.0).probs
    method = cfg.fuzzy_method
    return np.array(
        [engine.weight_from_distribution(row, method).weight for row in pt1]
    )


def kd_loss_fuzzy(
    student_logits, teacher_logits, labels, cfg: DistillConfig, engine: FuzzyEngine
) -> LossBreakdown:
    """Fuzzy-balanced loss: mean of v * (w_i * KD_i) + (1 - v) * CE_i.

    w_i comes from the fuzzy engine applied to the teacher's T=1
    distribution for sample i, so it is a constant w.r.t. the student.
    """
    zs = _as_batch(student_logits, "student_logits")
    zt = _as_batch(teacher_logits, "teacher_logits")
    if zs.shape != zt.shape:
        raise LossDomainError(f"logit shape mismatch: {zs.shape} vs {zt.shape}")
    y = _label_indices(labels, zs.shape[0], zs.shape[1])
    v = cfg.balance_v
    weights = fuzzy_sample_weights(zt, cfg, engine)
    ce_i = _per_sample_ce(zs, y)
    kd_i = _per_sample_kd(zs, zt, cfg.temperature)
    ce = float(ce_i.mean())
    kd_weighted = float((weights * kd_i).mean())
    total = v * kd_weighted + (1.0 - v) * ce
    return LossBreakdown(total, ce, kd_weighted, float(weights.mean()), weights)


def compute_loss(
    student_logits, teacher_logits, labels, cfg: DistillConfig,
    engine: FuzzyEngine | None = None,
) -> LossBreakdown:
    """Dispatch on cfg.weight_mode; fuzzy modes require an engine."""
    if cfg.weight_mode == "static":
        return kd_loss_static(student_logits, teacher_logits, labels, cfg)
    if engine is None:
        raise LossDomainError("fuzzy weight modes require a FuzzyEngine")
    return kd_loss_fuzzy(student_logits, teacher_logits, labels, cfg, engine)


def loss_gradients(
    student_logits, teacher_logits, labels, cfg: DistillConfig,
    engine: FuzzyEngine | None = None,
) -> np.ndarray:
    """Analytic gradient of the active total loss w.r.t. student logits.

    Per-sample fuzzy weights depend only on teacher outputs and are treated
    as constants. Gradients of the batch mean, so each row is scaled 1/N.
    """
    zs = _as_batch(student_logits, "student_logits")
    zt = _as_batch(teacher_logits, "teacher_logits")
    if zs.shape != zt.shape:
        raise LossDomainError(f"logit shape mismatch: {zs.shape} vs {zt.shape}")
    n, k = zs.shape
    y = _label_indices(labels, n, k)
    t = cfg.temperature

    p1 = softmax_t(zs, 1.0).probs
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0
    grad_ce = (p1 - onehot) / n  # d(mean CE)/d(logits)

    ps_t = softmax_t(zs, t).probs
    pt_t = softmax_t(zt, t).probs
    grad_kd = t * (ps_t - pt_t) / n  # d(mean T^2 KL)/d(logits)

    if cfg.weight_mode == "static":
        w = cfg.fixed_weight
        grad = w * grad_ce + (1.0 - w) * grad_kd
    else:
        if engine is None:
            raise LossDomainError("fuzzy weight modes require a FuzzyEngine")
        weights = fuzzy_sample_weights(zt, cfg, engine)
        v = cfg.balance_v
        grad = v * weights[:, None] * grad_kd + (1.0 - v) * grad_ce

    squeeze = np.asarray(student_logits).ndim == 1
    return grad[0] if squeeze else grad
