"""Verdict prediction: fused features, focal loss, a linear softmax model.

Features concatenate the post embedding with the mean of the sampled
context embeddings (zero block when the context is empty), so the context
route and the post-only baseline share one architecture. Training is
mini-batch Adam on focal loss with an analytic gradient; gamma=0 recovers
alpha-weighted cross-entropy exactly.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import stdtr

from .embed import EmbeddingMatrix
from .sampler import ContextSet

logger = logging.getLogger(__name__)

# class index 0 is the majority class; prediction ties resolve to it
LABELS = ("NTA", "YTA")
_LABEL_INDEX = {lab: i for i, lab in enumerate(LABELS)}


class ModelFileError(ValueError):
    """Bad model file: checksum mismatch or malformed container."""


def _label_index(label) -> int:
    if isinstance(label, str):
        try:
            return _LABEL_INDEX[label]
        except KeyError:
            raise ValueError(f"unknown label {label!r}; expected one of {LABELS}")
    idx = int(label)
    if idx not in (0, 1):
        raise ValueError(f"label index must be 0 or 1, got {label}")
    return idx


@dataclass
class FeatureVector:
    """[post embedding ‖ mean context embedding], both d-dimensional."""

    post_part: np.ndarray
    context_part: np.ndarray

    def __post_init__(self):
        self.post_part = np.asarray(self.post_part, dtype=np.float64)
        self.context_part = np.asarray(self.context_part, dtype=np.float64)
        if self.post_part.shape != self.context_part.shape:
            raise ValueError(
                f"post part {self.post_part.shape} != context part "
                f"{self.context_part.shape}")

    @property
    def fused(self) -> np.ndarray:
        return np.concatenate([self.post_part, self.context_part])


def build_features(post_emb: np.ndarray, context: ContextSet,
                   embeddings: EmbeddingMatrix | None = None,
                   embed_fn=None) -> FeatureVector:
    """Fuse a post embedding with the mean of its context embeddings.

    Comment items resolve against the matrix (or embed_fn as fallback);
    sentence items always go through embed_fn. If every context vector is
    unit norm the mean is re-normalized to unit, keeping the two feature
    blocks on the same scale; an empty context yields an exact zero block.
    """
    post_emb = np.asarray(post_emb, dtype=np.float64)
    if not context.items:
        return FeatureVector(post_emb, np.zeros_like(post_emb))
    vectors = []
    for item in context.items:
        if item.unit == "comment" and embeddings is not None and item.source_comment_id in embeddings:
            vec = embeddings.row(item.source_comment_id)
        elif embed_fn is not None:
            vec = embed_fn(item.text)
        else:
            raise ValueError(
                f"cannot resolve a vector for context item {item.source_comment_id!r}")
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != post_emb.shape:
            raise ValueError(f"context dim {vec.shape} != post dim {post_emb.shape}")
        vectors.append(vec)
    stacked = np.vstack(vectors)
    mean = stacked.mean(axis=0)
    norms = np.linalg.norm(stacked, axis=1)
    nonzero = norms > 0.0
    all_unit = bool(nonzero.all() and np.abs(norms - 1.0).max() <= 1e-3)
    mean_norm = float(np.linalg.norm(mean))
    if all_unit and mean_norm > 0.0:
        mean = mean / mean_norm
    return FeatureVector(post_emb, mean)


def focal_loss(logits, label, gamma: float = 2.0, alpha=(0.5, 0.5)):
    """Focal loss and its exact gradient with respect to the logits.

    FL = -alpha_t (1 - p_t)^gamma log p_t with p = softmax(logits) and t
    the true class. gamma=0 reduces to alpha-weighted cross-entropy. The
    gradient handles p_t -> 1 (its limit is 0) without blowing up.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.shape != (2,):
        raise ValueError(f"expected two logits, got shape {z.shape}")
    if not np.isfinite(z).all():
        raise ValueError("logits must be finite")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (2,) or (alpha <= 0).any():
        raise ValueError("alpha must be two positive weights")
    t = _label_index(label)

    zmax = z.max()
    logp = z - (zmax + math.log(np.exp(z - zmax).sum()))
    p = np.exp(logp)
    pt, log_pt = p[t], logp[t]
    one_minus = 1.0 - pt
    at = alpha[t]

    loss = -at * one_minus ** gamma * log_pt
    if gamma == 0.0:
        coeff = 1.0
    elif one_minus == 0.0:
        coeff = 0.0  # limit of (1-p)^g - g p (1-p)^{g-1} log p as p -> 1
    else:
        coeff = one_minus ** gamma - gamma * pt * one_minus ** (gamma - 1.0) * log_pt
    onehot = np.zeros(2)
    onehot[t] = 1.0
    grad = at * coeff * (p - onehot)
    return float(loss), grad


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 1e-3
    focal_gamma: float = 2.0
    # None derives inverse class frequency from the training set
    focal_alpha: tuple[float, float] | None = None
    batch_size: int = 32
    runs: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.focal_gamma < 0:
            raise ValueError("focal_gamma must be >= 0")


@dataclass
class ModelParams:
    weights: np.ndarray  # (2, feature_dim)
    bias: np.ndarray  # (2,)
    gamma: float
    alpha: tuple[float, float]
    seed: int
    epochs: int
    learning_rate: float
    # mean training loss after each epoch
    loss_history: list[float] = field(default_factory=list)


def _inverse_frequency_alpha(y: np.ndarray) -> tuple[float, float]:
    counts = np.bincount(y, minlength=2)
    if (counts == 0).any():
        raise ValueError(
            "training set lacks a class; pass focal_alpha explicitly")
    n = float(len(y))
    return (n / (2.0 * counts[0]), n / (2.0 * counts[1]))


def _as_xy(dataset) -> tuple[np.ndarray, np.ndarray]:
    feats, labels = [], []
    for fv, label in dataset:
        feats.append(fv.fused if isinstance(fv, FeatureVector) else np.asarray(fv, dtype=np.float64))
        labels.append(_label_index(label))
    if not feats:
        raise ValueError("empty training set")
    X = np.vstack(feats)
    y = np.array(labels, dtype=np.int64)
    return X, y


def train(dataset, cfg: TrainConfig) -> ModelParams:
    """Mini-batch Adam on focal loss from zero-initialized parameters.

    dataset: iterable of (FeatureVector | ndarray, label). Deterministic
    for a fixed config seed; learning_rate 0 leaves the zero parameters
    untouched by construction.
    """
    X, y = _as_xy(dataset)
    n, dim = X.shape
    alpha = cfg.focal_alpha or _inverse_frequency_alpha(y)
    alpha_arr = np.asarray(alpha, dtype=np.float64)
    gamma = float(cfg.focal_gamma)

    W = np.zeros((2, dim))
    b = np.zeros(2)
    mW = np.zeros_like(W); vW = np.zeros_like(W)
    mb = np.zeros_like(b); vb = np.zeros_like(b)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    onehot = np.zeros((n, 2))
    onehot[np.arange(n), y] = 1.0
    alpha_t = alpha_arr[y]

    rng = np.random.default_rng(cfg.seed)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            Xb, yb = X[idx], y[idx]
            zb = Xb @ W.T + b
            zmax = zb.max(axis=1, keepdims=True)
            logp = zb - (zmax + np.log(np.exp(zb - zmax).sum(axis=1, keepdims=True)))
            p = np.exp(logp)
            pt = p[np.arange(len(idx)), yb]
            log_pt = logp[np.arange(len(idx)), yb]
            one_minus = 1.0 - pt
            if gamma == 0.0:
                coeff = np.ones_like(pt)
            else:
                coeff = np.zeros_like(pt)
                live = one_minus > 0.0
                coeff[live] = (
                    one_minus[live] ** gamma
                    - gamma * pt[live] * one_minus[live] ** (gamma - 1.0) * log_pt[live]
                )
            losses = -alpha_t[idx] * one_minus ** gamma * log_pt
            epoch_loss += float(losses.sum())
            gz = (alpha_t[idx] * coeff)[:, None] * (p - onehot[idx]) / len(idx)
            gW = gz.T @ Xb
            gb = gz.sum(axis=0)

            step += 1
            for param, grad, m, v in ((W, gW, mW, vW), (b, gb, mb, vb)):
                m *= beta1; m += (1 - beta1) * grad
                v *= beta2; v += (1 - beta2) * grad ** 2
                mhat = m / (1 - beta1 ** step)
                vhat = v / (1 - beta2 ** step)
                param -= cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
        history.append(epoch_loss / n)
        logger.debug("epoch %d: mean loss %.6f", epoch + 1, history[-1])

    return ModelParams(
        weights=W, bias=b, gamma=gamma, alpha=(float(alpha[0]), float(alpha[1])),
        seed=cfg.seed, epochs=cfg.epochs, learning_rate=cfg.learning_rate,
        loss_history=history,
    )


def predict(params: ModelParams, features) -> tuple[str, np.ndarray]:
    """Predicted label and class probabilities; exact ties go to NTA."""
    x = features.fused if isinstance(features, FeatureVector) else np.asarray(features, dtype=np.float64)
    z = params.weights @ x + params.bias
    zmax = z.max()
    p = np.exp(z - zmax)
    p /= p.sum()
    # argmax returns the first (NTA) index on exact ties
    return LABELS[int(np.argmax(p))], p


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    n: int
    accuracy: float
    macro_f1: float
    per_class: dict[str, ClassMetrics]
    # 1/0 per test example, aligned with the dataset order; feeds the
    # example-level significance test
    correctness: np.ndarray | None = None
    per_run: list["EvalReport"] | None = None

    @classmethod
    def from_runs(cls, runs: list["EvalReport"]) -> "EvalReport":
        """Mean-aggregate repeated evaluations of the same test set."""
        if not runs:
            raise ValueError("no runs to aggregate")
        per_class = {}
        for lab in LABELS:
            per_class[lab] = ClassMetrics(
                precision=float(np.mean([r.per_class[lab].precision for r in runs])),
                recall=float(np.mean([r.per_class[lab].recall for r in runs])),
                f1=float(np.mean([r.per_class[lab].f1 for r in runs])),
                support=runs[0].per_class[lab].support,
            )
        return cls(
            n=runs[0].n,
            accuracy=float(np.mean([r.accuracy for r in runs])),
            macro_f1=float(np.mean([r.macro_f1 for r in runs])),
            per_class=per_class,
            correctness=None,
            per_run=list(runs),
        )


def compute_report(y_true, y_pred) -> EvalReport:
    """Accuracy, per-class precision/recall/F1, and macro F1.

    Zero denominators score 0; a class absent from both truth and
    predictions contributes F1 = 0 to the macro average, with a warning.
    """
    import warnings as _warnings

    yt = np.array([_label_index(v) for v in y_true], dtype=np.int64)
    yp = np.array([_label_index(v) for v in y_pred], dtype=np.int64)
    if yt.shape != yp.shape or yt.size == 0:
        raise ValueError("y_true and y_pred must be equal-length and non-empty")
    correctness = (yt == yp).astype(np.int64)
    per_class: dict[str, ClassMetrics] = {}
    f1s = []
    for idx, lab in enumerate(LABELS):
        tp = int(((yp == idx) & (yt == idx)).sum())
        fp = int(((yp == idx) & (yt != idx)).sum())
        fn = int(((yp != idx) & (yt == idx)).sum())
        support = int((yt == idx).sum())
        if support == 0 and tp + fp == 0:
            _warnings.warn(f"class {lab} absent from truth and predictions; F1 = 0")
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[lab] = ClassMetrics(precision, recall, f1, support)
        f1s.append(f1)
    return EvalReport(
        n=int(yt.size),
        accuracy=float(correctness.mean()),
        macro_f1=float(np.mean(f1s)),
        per_class=per_class,
        correctness=correctness,
    )


def evaluate(params: ModelParams, test) -> EvalReport:
    """Run the model over (features, label) pairs and score it."""
    y_true, y_pred = [], []
    for fv, label in test:
        y_true.append(_label_index(label))
        y_pred.append(_LABEL_INDEX[predict(params, fv)[0]])
    return compute_report(y_true, y_pred)


def significance_test(correct_a, correct_b) -> tuple[float, float]:
    """Welch's two-sample t-test over per-example correctness indicators.

    Returns (t, two-sided p) with Welch-Satterthwaite degrees of freedom.
    Conventions: two zero-variance samples give (0, 1) when the means are
    equal and (±inf, 0) otherwise. Needs at least two examples per side.
    """
    a = np.asarray(correct_a, dtype=np.float64)
    b = np.asarray(correct_b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size < 2 or b.size < 2:
        raise ValueError("need at least two observations per sample")
    na, nb = a.size, b.size
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    if va == 0.0 and vb == 0.0:
        if ma == mb:
            return 0.0, 1.0
        return math.copysign(math.inf, ma - mb), 0.0
    se2 = va / na + vb / nb
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = 2.0 * float(stdtr(df, -abs(t)))
    return t, min(1.0, max(0.0, p))


# ---------------------------------------------------------------------------
# serialization

def save_model(params: ModelParams, path) -> None:
    """Text container: JSON header, base64 little-endian float64 weights and
    bias, trailing checksum line."""
    header = {
        "feature_dim": int(params.weights.shape[1]),
        "gamma": params.gamma,
        "alpha": list(params.alpha),
        "seed": params.seed,
        "epochs": params.epochs,
        "learning_rate": params.learning_rate,
        "loss_history": params.loss_history,
    }
    wbytes = np.ascontiguousarray(params.weights, dtype="<f8").tobytes()
    bbytes = np.ascontiguousarray(params.bias, dtype="<f8").tobytes()
    body = (
        json.dumps(header, sort_keys=True) + "\n"
        + base64.b64encode(wbytes).decode("ascii") + "\n"
        + base64.b64encode(bbytes).decode("ascii") + "\n"
    )
    digest = hashlib.blake2b(body.encode("utf-8"), digest_size=8).hexdigest()
    Path(path).write_text(body + f"checksum {digest}\n", encoding="utf-8")


def load_model(path) -> ModelParams:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) != 4 or not lines[3].startswith("checksum "):
        raise ModelFileError(f"{path}: malformed model file")
    body = "\n".join(lines[:3]) + "\n"
    declared = lines[3].split(" ", 1)[1].strip()
    if hashlib.blake2b(body.encode("utf-8"), digest_size=8).hexdigest() != declared:
        raise ModelFileError(f"{path}: checksum mismatch")
    header = json.loads(lines[0])
    dim = int(header["feature_dim"])
    weights = np.frombuffer(base64.b64decode(lines[1]), dtype="<f8").reshape(2, dim).copy()
    bias = np.frombuffer(base64.b64decode(lines[2]), dtype="<f8").copy()
    return ModelParams(
        weights=weights, bias=bias, gamma=float(header["gamma"]),
        alpha=tuple(header["alpha"]), seed=int(header["seed"]),
        epochs=int(header["epochs"]), learning_rate=float(header["learning_rate"]),
        loss_history=list(header["loss_history"]),
    )
