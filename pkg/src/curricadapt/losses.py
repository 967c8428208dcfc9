"""Objective functions: classification, domain and pair-clustering terms.

The adversarial trade-off factor ``lam`` scales the *reported* domain
term. Gradients returned here are with respect to the raw head outputs
and carry no ``lam``: the discriminator descends the unscaled domain
loss, and the feature extractor receives the reversed, lam-scaled signal
through the gradient reversal layer. That split mirrors how the min-max
is actually optimised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_EPS = 1e-12


@dataclass
class LossConfig:
    lam: float = 1.0
    beta: float = 2.0
    margin: float = 2.0
    ecl_weight: float = 1.0

    def __post_init__(self):
        if self.lam < 0 or self.beta < 1 or self.margin <= 0 or self.ecl_weight < 0:
            raise ValueError("invalid loss configuration")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """-log softmax(logits)[label] with max-subtraction; returns (loss, grad)."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    if not 0 <= label < logits.shape[-1]:
        raise ValueError("label out of range")
    z = logits - logits.max()
    lse = np.log(np.exp(z).sum())
    grad = softmax(logits)
    grad[label] -= 1.0
    return float(lse - z[label]), grad


def binary_cross_entropy(prob: float, domain_label: int) -> tuple[float, float]:
    """-(d log p + (1-d) log(1-p)) on the clamped probability; (loss, dloss/dp)."""
    if domain_label not in (0, 1):
        raise ValueError("domain label must be 0 or 1")
    p = min(max(float(prob), PROB_EPS), 1.0 - PROB_EPS)
    if domain_label == 1:
        return -np.log(p), -1.0 / p
    return -np.log1p(-p), 1.0 / (1.0 - p)


def mean_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch-mean cross-entropy and its gradient on the logit matrix."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    n = logits.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label out of range")
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    loss = (lse - z[np.arange(n), labels]).mean()
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def mean_domain_bce(probs: np.ndarray, domain_label: int,
                    weights: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Weighted batch mean of the binary cross-entropy against one domain label.

    The mean is sum(w_i * L_i) / n; gradients are with respect to the raw
    probabilities and use the clamped values.
    """
    p = np.asarray(probs, dtype=np.float64).ravel()
    n = p.size
    if n == 0:
        raise ValueError("empty batch")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    if domain_label == 1:
        loss = -(w * np.log(pc)).sum() / n
        grad = -(w / pc) / n
    elif domain_label == 0:
        loss = -(w * np.log1p(-pc)).sum() / n
        grad = (w / (1.0 - pc)) / n
    else:
        raise ValueError("domain label must be 0 or 1")
    return float(loss), grad.reshape(np.asarray(probs).shape)


@dataclass
class LossResult:
    """Scalar terms plus gradients on the head outputs.

    ``domain`` is the reported lam-scaled value; the gradient arrays are
    seeds for backpropagation and exclude lam (see module docstring).
    """

    total: float
    cls_source: float
    cls_target: float
    domain: float
    grad_source_logits: np.ndarray
    grad_target_logits: np.ndarray | None
    grad_domain_source: np.ndarray
    grad_domain_target: np.ndarray
    no_labeled_targets: bool = False


def j1_loss(source_logits, source_labels, source_dprob, target_dprob,
            cfg: LossConfig, d_source: int = 1, d_target: int = 0) -> LossResult:
    """Warm-up objective: source cross-entropy plus the adversarial term.

    total = mean CE(source) + lam * (mean BCE(source, 1) + mean BCE(target, 0))
    """
    cls, grad_cls = mean_cross_entropy(source_logits, source_labels)
    dom_s, grad_ds = mean_domain_bce(source_dprob, d_source)
    dom_t, grad_dt = mean_domain_bce(target_dprob, d_target)
    domain = cfg.lam * (dom_s + dom_t)
    return LossResult(
        total=cls + domain,
        cls_source=cls,
        cls_target=0.0,
        domain=domain,
        grad_source_logits=grad_cls,
        grad_target_logits=None,
        grad_domain_source=grad_ds,
        grad_domain_target=grad_dt,
    )


def j2_loss(source_logits, source_labels, target_logits, pseudo_labels,
            newly_added, source_dprob, target_dprob, cfg: LossConfig,
            d_source: int = 1, d_target: int = 0) -> LossResult:
    """Staged objective: warm-up terms plus pseudo-labeled target
    classification, with the domain loss of newly added target samples
    amplified by beta.

    ``newly_added`` is a boolean mask over the target batch marking the
    subset activated at the current stage. Targets without a pseudo-label
    (label < 0) are excluded from the classification term; if none are
    labeled that term is 0 and ``no_labeled_targets`` is set.
    """
    cls_s, grad_cls_s = mean_cross_entropy(source_logits, source_labels)

    pl = np.asarray(pseudo_labels, dtype=int)
    target_logits = np.asarray(target_logits, dtype=np.float64)
    labeled = pl >= 0
    grad_cls_t = np.zeros_like(target_logits)
    if labeled.any():
        cls_t, g = mean_cross_entropy(target_logits[labeled], pl[labeled])
        grad_cls_t[labeled] = g
        no_labeled = False
    else:
        cls_t, no_labeled = 0.0, True

    new = np.asarray(newly_added, dtype=bool)
    if new.shape[0] != pl.shape[0]:
        raise ValueError("newly_added mask length must match the target batch")
    weights = np.where(new, cfg.beta, 1.0)
    dom_s, grad_ds = mean_domain_bce(source_dprob, d_source)
    dom_t, grad_dt = mean_domain_bce(target_dprob, d_target, weights)
    domain = cfg.lam * (dom_s + dom_t)
    return LossResult(
        total=cls_s + cls_t + domain,
        cls_source=cls_s,
        cls_target=float(cls_t),
        domain=domain,
        grad_source_logits=grad_cls_s,
        grad_target_logits=grad_cls_t,
        grad_domain_source=grad_ds,
        grad_domain_target=grad_dt,
        no_labeled_targets=no_labeled,
    )


def ecl_loss(h: np.ndarray, labels: np.ndarray, cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Pairwise clustering term on target-head outputs before softmax.

    Same-class pairs contribute squared distance; cross-class pairs a
    squared hinge max(0, margin - distance). The value is the mean over
    all unordered in-batch pairs times ecl_weight. Gradient is 0 at the
    hinge kink and at coincident cross-class pairs.
    """
    h = np.asarray(h, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    b = h.shape[0]
    if b < 2:
        return 0.0, np.zeros_like(h)
    diff = h[:, None, :] - h[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(b, dtype=bool)

    dist = np.sqrt(sq)
    hinge = np.maximum(0.0, cfg.margin - dist)
    pair_loss = np.where(same, sq, hinge**2)
    n_pairs = b * (b - 1) // 2
    scale = cfg.ecl_weight / n_pairs
    value = 0.5 * pair_loss[off].sum() * scale

    # d/dh_i: same-class 2*(h_i - h_j); cross-class -2*hinge/dist * (h_i - h_j)
    with np.errstate(divide="ignore", invalid="ignore"):
        cross_coef = np.where(dist > 0.0, -2.0 * hinge / dist, 0.0)
    coef = np.where(same, 2.0, cross_coef)
    coef[~off] = 0.0
    grad = (coef[:, :, None] * diff).sum(axis=1) * scale
    return float(value), grad
