"""Loss terms: relation cross-entropy, supervised-attention KLD, and
entropy regularization of the pooling attention.

Every operation returns its value together with exact gradients; the batch
composition at the bottom wires them into a single backward pass through
the encoder.  All reductions over a batch are means, accumulated in a fixed
order so repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import encoder as enc

MODES = ("baseline", "asp", "saib", "asp_saib")
_MODE_ALIASES = {
    "baseline": "baseline",
    "asp": "asp",
    "+asp": "asp",
    "saib": "saib",
    "+saib": "saib",
    "asp_saib": "asp_saib",
    "+asp+saib": "asp_saib",
}


def canonical_mode(mode):
    key = mode.strip().lower()
    if key not in _MODE_ALIASES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return _MODE_ALIASES[key]


@dataclass
class AspConfig:
    lambda_asp: float = 1.0
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.lambda_asp < 0:
            raise ValueError("lambda_asp must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


@dataclass
class LossBreakdown:
    l_re: float
    l_asp: float
    l_ib: float
    total: float


class NonFiniteLossError(RuntimeError):
    def __init__(self, term, value):
        super().__init__(f"loss term {term} is non-finite: {value}")
        self.term = term


def total_loss(l_re, l_asp, l_ib) -> LossBreakdown:
    for term, value in (("l_re", l_re), ("l_asp", l_asp), ("l_ib", l_ib)):
        if not np.isfinite(value):
            raise NonFiniteLossError(term, value)
    return LossBreakdown(l_re=l_re, l_asp=l_asp, l_ib=l_ib, total=l_re + l_asp + l_ib)


def asp_loss(alpha_avg, Q, q, cfg: AspConfig):
    """KLD pulling the masked averaged attention toward the label distribution.

    alpha_avg, Q, q: (B, n).  The attention is masked in Hadamard manner
    with Q, epsilon-smoothed, and compared against the equally smoothed
    label distribution as KLD(q_s || a_s).  The masked side is NOT
    renormalized: its missing mass is exactly the attention sitting on
    unmarked positions, so minimizing this loss migrates attention mass
    onto the marked positions instead of merely reshaping it among them.
    Both sides share the smoothing denominator 1 + n*eps, which makes the
    loss exactly zero when the masked attention equals q and non-negative
    otherwise (the masked side is a sub-distribution).

    Rows whose masked attention sums to exactly zero fall back to
    uniform-over-marked positions (constant in alpha, so their gradient is
    zero) and are counted.

    Returns (mean loss, gradient w.r.t. alpha_avg, fallback count).
    """
    alpha_avg = np.atleast_2d(np.asarray(alpha_avg, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    B, n = alpha_avg.shape
    eps = cfg.epsilon
    m = alpha_avg * Q
    s = m.sum(axis=1, keepdims=True)
    fallback = (s == 0.0).ravel()
    a = np.where(fallback[:, None], Q / Q.sum(axis=1, keepdims=True) + eps, m + eps) / (
        1.0 + n * eps
    )
    qs = (q + eps) / (1.0 + n * eps)
    kld = (qs * np.log(qs / a)).sum(axis=1)
    loss = cfg.lambda_asp * kld.mean()
    d_alpha = -cfg.lambda_asp / B * qs * Q / (m + eps)
    d_alpha[fallback] = 0.0
    return loss, d_alpha, int(fallback.sum())


def saib_attention(features, sentiment_feature, W, b):
    """Pooling attention over per-token scores of [token : sentiment] pairs.

    features: (B, n, d); sentiment_feature: (B, d); W: (2d,); b: (1,).
    Returns (alpha (B, n), scores (B, n)).
    """
    features = np.asarray(features, dtype=np.float64)
    d = features.shape[-1]
    scores = features @ W[:d] + (sentiment_feature @ W[d:])[:, None] + b[0]
    alpha = np.exp(scores - scores.max(axis=1, keepdims=True))
    alpha /= alpha.sum(axis=1, keepdims=True)
    return alpha, scores


def saib_attention_backward(d_alpha, alpha, features, sentiment_feature, W):
    """Backprop through the pooling softmax and linear scoring.

    Returns (d_features, d_sentiment_feature, dW, db).
    """
    d = features.shape[-1]
    d_scores = alpha * (d_alpha - (d_alpha * alpha).sum(axis=1, keepdims=True))
    dW = np.concatenate(
        [
            np.einsum("bn,bnd->d", d_scores, features),
            d_scores.sum(axis=1) @ sentiment_feature,
        ]
    )
    db = np.array([d_scores.sum()])
    d_features = d_scores[:, :, None] * W[:d]
    d_sentiment = d_scores.sum(axis=1)[:, None] * W[d:]
    return d_features, d_sentiment, dW, db


def entropy(alpha):
    """Shannon entropy per row with 0*log 0 := 0."""
    alpha = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(alpha > 0, alpha * np.log(np.where(alpha > 0, alpha, 1.0)), 0.0)
    return -term.sum(axis=1)


def saib_entropy_loss(alpha):
    """Mean attention entropy and its gradient w.r.t. alpha (B, n)."""
    alpha = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    B = alpha.shape[0]
    loss = entropy(alpha).mean()
    with np.errstate(divide="ignore"):
        d_alpha = np.where(alpha > 0, -(np.log(np.where(alpha > 0, alpha, 1.0)) + 1.0), 0.0) / B
    return loss, d_alpha


def re_loss(pooled, Wc, bc, gold):
    """Softmax cross-entropy over relations from the pooled feature.

    pooled: (B, d); gold: (B,) int labels.
    Returns (mean loss, d_pooled, dWc, dbc, probs).
    """
    pooled = np.atleast_2d(np.asarray(pooled, dtype=np.float64))
    gold = np.atleast_1d(np.asarray(gold, dtype=np.int64))
    B = pooled.shape[0]
    logits = pooled @ Wc + bc
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):  # P[gold]=0 yields inf, caught upstream
        loss = -np.log(probs[np.arange(B), gold]).mean()
    d_logits = probs.copy()
    d_logits[np.arange(B), gold] -= 1.0
    d_logits /= B
    dWc = pooled.T @ d_logits
    dbc = d_logits.sum(axis=0)
    d_pooled = d_logits @ Wc.T
    return loss, d_pooled, dWc, dbc, probs


@dataclass
class BatchResult:
    breakdown: LossBreakdown
    grads: dict
    probs: np.ndarray  # (B, R)
    alpha_ib: np.ndarray  # (B, n)
    alpha_avg: np.ndarray  # (B, n)
    asp_fallbacks: int


def mode_terms(mode):
    """Loss terms a training mode contributes to the total."""
    return {
        "baseline": ("re",),
        "asp": ("re", "asp"),
        "saib": ("re", "ib"),
        "asp_saib": ("re", "asp", "ib"),
    }[canonical_mode(mode)]


def batch_losses(state, ids, Q, q, gold, mode, asp_cfg: AspConfig, terms=None,
                 value_only=False) -> BatchResult:
    """Joint forward/backward over one same-length batch.

    mode selects which auxiliary terms contribute; the SAIB pooling head is
    always the classifier input, only its entropy penalty is gated.  An
    explicit ``terms`` subset overrides the mode (used by gradient checks
    to isolate a single loss term).
    """
    terms = mode_terms(mode) if terms is None else tuple(terms)
    cfg = state.config
    p = state.params
    fwd = enc.forward(state, ids)
    B, n, d = fwd.features.shape

    alpha_ib, _ = saib_attention(fwd.features, fwd.sentiment_feature, p["saib.W"], p["saib.b"])
    pooled = np.einsum("bn,bnd->bd", alpha_ib, fwd.features)
    l_re, d_pooled, dWc, dbc, probs = re_loss(pooled, p["clf.W"], p["clf.b"], gold)

    d_alpha_ib = np.zeros_like(alpha_ib)
    d_features = np.zeros_like(fwd.features)
    if "re" in terms:
        d_alpha_ib += np.einsum("bd,bnd->bn", d_pooled, fwd.features)
        d_features += alpha_ib[:, :, None] * d_pooled[:, None, :]
    else:
        l_re, dWc, dbc = 0.0, np.zeros_like(dWc), np.zeros_like(dbc)

    l_ib = 0.0
    if "ib" in terms:
        l_ib, d_alpha_ent = saib_entropy_loss(alpha_ib)
        d_alpha_ib = d_alpha_ib + d_alpha_ent

    df, d_sen, dW_saib, db_saib = saib_attention_backward(
        d_alpha_ib, alpha_ib, fwd.features, fwd.sentiment_feature, p["saib.W"]
    )
    d_features = d_features + df
    d_features[:, 0, :] += d_sen

    alpha_avg = enc.average_attention(fwd.attention, cfg.last_k, cfg.attn_axis)
    l_asp = 0.0
    d_attention = None
    fallbacks = 0
    if "asp" in terms:
        l_asp, d_alpha_avg, fallbacks = asp_loss(alpha_avg, Q, q, asp_cfg)
        d_attention = enc.average_attention_backward(
            d_alpha_avg, cfg.layers, cfg.last_k, cfg.heads, n, cfg.attn_axis
        )

    breakdown = total_loss(float(l_re), float(l_asp), float(l_ib))
    if value_only:
        grads = {}
    else:
        grads = enc.backward(state, fwd, d_features, d_attention)
        grads["saib.W"] += dW_saib
        grads["saib.b"] += db_saib
        grads["clf.W"] += dWc
        grads["clf.b"] += dbc
    return BatchResult(
        breakdown=breakdown,
        grads=grads,
        probs=probs,
        alpha_ib=alpha_ib,
        alpha_avg=alpha_avg,
        asp_fallbacks=fallbacks,
    )
