"""Deterministic multi-task training loop and gradient-verification harness.

Determinism contract: identical config + seed produce bit-identical
parameters and byte-identical metrics CSV on repeated runs.  All shuffling
uses the config seed; batches hold same-length sequences so no padding or
masking is needed.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import encoder as enc
from . import objectives, pipeline, sentiment
from .corpus import ConfigError
from .labels import VARIANTS


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16
    lr: float = 1e-3
    optimizer: str = "adam"  # "sgd" | "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    mode: str = "asp_saib"  # baseline | asp | saib | asp_saib
    isl_variant: str = "ISL"  # EPL | SPL | ISL
    lambda_asp: float = 1.0
    asp_epsilon: float = 1e-8
    attn_axis: str = "received"
    alternate_tasks: bool = False  # alternate RE and ASP batches instead of joint sum
    layers: int = 4
    heads: int = 4
    d_model: int = 64
    d_ff: int = 128
    max_len: int = 64
    last_k: int = 3

    def __post_init__(self):
        self.mode = objectives.canonical_mode(self.mode)
        if self.isl_variant not in VARIANTS:
            raise ConfigError(f"isl_variant must be one of {VARIANTS}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be sgd|adam, got {self.optimizer!r}")
        for name in ("epochs", "batch_size", "lr"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    def encoder_config(self, vocab_size, n_relations):
        return enc.EncoderConfig(
            layers=self.layers,
            heads=self.heads,
            d_model=self.d_model,
            d_ff=self.d_ff,
            max_len=self.max_len,
            vocab_size=vocab_size,
            n_relations=n_relations,
            last_k=self.last_k,
            attn_axis=self.attn_axis,
        )


@dataclass
class RunRecord:
    config: dict
    epoch_losses: list[dict]  # per epoch: mean l_re/l_asp/l_ib/total
    metrics_rows: list[str]  # CSV lines incl. header
    checkpoint_path: str | None
    wall_time: float
    asp_fallbacks: int
    state: enc.ModelState


class TrainDivergenceError(RuntimeError):
    def __init__(self, step, term):
        super().__init__(f"non-finite loss term {term} at step {step}")
        self.step = step
        self.term = term


class SgdOptimizer:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for name, g in grads.items():
            params[name] -= self.lr * g


class AdamOptimizer:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m += (1 - b1) * (g - m)
            v += (1 - b2) * (g * g - v)
            mhat = m / (1 - b1**self.t)
            vhat = v / (1 - b2**self.t)
            params[name] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "sgd":
        return SgdOptimizer(config.lr)
    return AdamOptimizer(config.lr, config.beta1, config.beta2, config.adam_eps)


def encode_prepared(state, prepared):
    """Token ids, label indicators, and gold index per prepared instance."""
    rel_to_idx = {r: i for i, r in enumerate(state.relations)}
    out = []
    for pi in prepared:
        ids = enc.encode_tokens(state, [t.surface for t in pi.augmented.tokens])
        out.append((ids, pi.signal.Q, pi.signal.q, rel_to_idx[pi.raw.relation]))
    return out


def make_batches(encoded, batch_size, rng):
    """Seeded shuffle, then greedy same-length grouping in arrival order."""
    order = list(range(len(encoded)))
    rng.shuffle(order)
    buckets = {}
    batches = []
    for idx in order:
        n = len(encoded[idx][0])
        bucket = buckets.setdefault(n, [])
        bucket.append(idx)
        if len(bucket) == batch_size:
            batches.append(bucket[:])
            bucket.clear()
    for n in sorted(buckets):
        if buckets[n]:
            batches.append(buckets[n])
    return batches


def _collate(encoded, batch):
    ids = np.stack([encoded[i][0] for i in batch])
    Q = np.stack([encoded[i][1] for i in batch])
    q = np.stack([encoded[i][2] for i in batch])
    gold = np.array([encoded[i][3] for i in batch], dtype=np.int64)
    return ids, Q, q, gold


def init_from_config(config: TrainConfig, prepared_train, relations):
    vocab = enc.build_vocab([pi.augmented for pi in prepared_train])
    return enc.init_state(
        config.encoder_config(len(vocab), len(relations)), vocab, config.seed, relations
    )


def train(config: TrainConfig, splits, relations, lexicon=None, checkpoint_path=None,
          metrics_path=None, epoch_hook=None) -> RunRecord:
    """Train on splits["train"]; splits is {name: [Instance]} of raw instances.

    epoch_hook(epoch, state) runs after each epoch (and once before epoch 0
    with epoch=-1) for attention-mass tracking and similar probes.
    """
    t0 = time.perf_counter()
    lexicon = lexicon or sentiment.load_lexicon()
    prepared, _ = pipeline.annotate(splits["train"], lexicon, config.isl_variant)
    state = init_from_config(config, prepared, relations)
    encoded = encode_prepared(state, prepared)
    asp_cfg = objectives.AspConfig(lambda_asp=config.lambda_asp, epsilon=config.asp_epsilon)
    optimizer = make_optimizer(config)
    rows = ["step,l_re,l_asp,l_ib,total"]
    epoch_losses = []
    step = 0
    fallbacks = 0
    if epoch_hook is not None:
        epoch_hook(-1, state)
    for epoch in range(config.epochs):
        rng = random.Random(f"{config.seed}:{epoch}")
        sums = np.zeros(4)
        n_batches = 0
        for batch in make_batches(encoded, config.batch_size, rng):
            ids, Q, q, gold = _collate(encoded, batch)
            terms = _step_terms(config, step)
            try:
                result = objectives.batch_losses(
                    state, ids, Q, q, gold, config.mode, asp_cfg, terms=terms
                )
            except objectives.NonFiniteLossError as exc:
                raise TrainDivergenceError(step, exc.term) from exc
            optimizer.step(state.params, result.grads)
            b = result.breakdown
            rows.append(f"{step},{b.l_re:.6f},{b.l_asp:.6f},{b.l_ib:.6f},{b.total:.6f}")
            sums += (b.l_re, b.l_asp, b.l_ib, b.total)
            fallbacks += result.asp_fallbacks
            n_batches += 1
            step += 1
        means = sums / max(n_batches, 1)
        epoch_losses.append(
            {"epoch": epoch, "l_re": means[0], "l_asp": means[1], "l_ib": means[2],
             "total": means[3]}
        )
        if epoch_hook is not None:
            epoch_hook(epoch, state)
    if metrics_path is not None:
        with open(metrics_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(rows) + "\n")
    if checkpoint_path is not None:
        enc.save_checkpoint(state, checkpoint_path)
    return RunRecord(
        config=asdict(config),
        epoch_losses=epoch_losses,
        metrics_rows=rows,
        checkpoint_path=str(checkpoint_path) if checkpoint_path else None,
        wall_time=time.perf_counter() - t0,
        asp_fallbacks=fallbacks,
        state=state,
    )


def _step_terms(config, step):
    """Joint sum by default; optional alternation between RE and ASP batches."""
    if not config.alternate_tasks:
        return None  # mode's full term set
    terms = objectives.mode_terms(config.mode)
    if "asp" not in terms:
        return None
    re_terms = tuple(t for t in terms if t != "asp")
    return re_terms if step % 2 == 0 else ("asp",)


# ---------------------------------------------------------------------------
# Gradient verification

FD_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-4


@dataclass
class GradCheckEntry:
    term: str
    block: str
    max_rel_err: float
    coords_checked: int
    kinks_skipped: int = 0

    @property
    def passed(self):
        return self.max_rel_err < GRADCHECK_TOLERANCE


@dataclass
class GradCheckReport:
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    @property
    def max_rel_err(self):
        return max((e.max_rel_err for e in self.entries), default=0.0)

    def failures(self):
        return [e for e in self.entries if not e.passed]


def _loss_value(state, ids, Q, q, gold, term, asp_cfg):
    result = objectives.batch_losses(
        state, ids, Q, q, gold, "asp_saib", asp_cfg, terms=term, value_only=True
    )
    return result.breakdown.total


def _relu_pattern(state, ids):
    """Sign pattern of every feed-forward pre-activation, for kink detection."""
    fwd = enc.forward(state, ids)
    return tuple((layer["f1"] > 0).tobytes() for layer in fwd.cache["layers"])


def gradcheck_batch(state, ids, Q, q, gold, asp_cfg=None, max_coords_per_block=40,
                    analytic_override=None) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Checks each loss term in isolation plus their sum.  Coordinates are
    subsampled with an even deterministic stride when a block exceeds
    ``max_coords_per_block`` (pass None to check everything).
    ``analytic_override`` lets tests corrupt a gradient block (negative
    control).

    Central differences are undefined across a ReLU kink: when a
    pre-activation sits within the step of zero, the two probe points lie
    on different linear pieces and their slope estimate matches neither
    piece (the analytic subgradient is still exact).  Coordinates whose
    mismatch coincides with a change in the ReLU sign pattern between the
    two probes are therefore skipped and counted in ``kinks_skipped``
    instead of reported as errors.
    """
    asp_cfg = asp_cfg or objectives.AspConfig()
    report = GradCheckReport()
    term_sets = {"l_re": ("re",), "l_asp": ("asp",), "l_ib": ("ib",),
                 "total": ("re", "asp", "ib")}
    for term_name, terms in term_sets.items():
        analytic = objectives.batch_losses(
            state, ids, Q, q, gold, "asp_saib", asp_cfg, terms=terms
        ).grads
        if analytic_override is not None:
            analytic = analytic_override(term_name, analytic)
        for block, grad in analytic.items():
            flat = grad.reshape(-1)
            size = flat.size
            if size == 0:
                continue
            if max_coords_per_block is not None and size > max_coords_per_block:
                coords = np.linspace(0, size - 1, max_coords_per_block).astype(int)
                coords = np.unique(coords)
            else:
                coords = np.arange(size)
            pflat = state.params[block].reshape(-1)
            max_err = 0.0
            kinks = 0
            checked = 0
            for c in coords:
                orig = pflat[c]
                pflat[c] = orig + FD_STEP
                up = _loss_value(state, ids, Q, q, gold, terms, asp_cfg)
                pflat[c] = orig - FD_STEP
                down = _loss_value(state, ids, Q, q, gold, terms, asp_cfg)
                pflat[c] = orig
                fd = (up - down) / (2 * FD_STEP)
                a = flat[c]
                err = abs(a - fd) / max(abs(a), abs(fd), 1e-3)
                if err >= GRADCHECK_TOLERANCE:
                    pflat[c] = orig + FD_STEP
                    pattern_up = _relu_pattern(state, ids)
                    pflat[c] = orig - FD_STEP
                    pattern_down = _relu_pattern(state, ids)
                    pflat[c] = orig
                    if pattern_up != pattern_down:
                        kinks += 1
                        continue
                checked += 1
                max_err = max(max_err, err)
            report.entries.append(
                GradCheckEntry(term_name, block, max_err, checked, kinks)
            )
    return report


def gradcheck(config: TrainConfig, instances, relations, lexicon=None,
              max_coords_per_block=40) -> GradCheckReport:
    """Run the finite-difference suite on a sample of instances."""
    lexicon = lexicon or sentiment.load_lexicon()
    prepared, _ = pipeline.annotate(instances, lexicon, config.isl_variant)
    state = init_from_config(config, prepared, relations)
    encoded = encode_prepared(state, prepared)
    asp_cfg = objectives.AspConfig(lambda_asp=config.lambda_asp, epsilon=config.asp_epsilon)
    merged = GradCheckReport()
    for ids, Q, q, gold in encoded:
        rep = gradcheck_batch(
            state, ids[None, :], Q[None, :], q[None, :], np.array([gold]),
            asp_cfg, max_coords_per_block,
        )
        merged.entries.extend(rep.entries)
    return merged
