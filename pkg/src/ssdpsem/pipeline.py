"""Preprocessing glue: sentiment tagging, token insertion, SDP extraction,
and supervisory-signal construction for whole instance lists.

Signals are deterministic functions of static inputs, so they are built
once here and cached on the instance records.
"""

from __future__ import annotations

from dataclasses import dataclass, field


from . import labels, sentiment, syntax
from .corpus import Instance


@dataclass
class AnnotateStats:
    instances: int = 0
    sdp_fallbacks: int = 0  # disconnected entity pairs
    fragments: int = 0
    tag_stats: sentiment.TagStats = field(default_factory=sentiment.TagStats)


@dataclass
class PreparedInstance:
    raw: Instance
    augmented: Instance  # sentiment token prepended, indices re-based
    tag: sentiment.SentimentTag
    sdp_positions: list[int]  # augmented indices
    signal: labels.IslSignal


def annotate_instance(inst, lexicon, variant, stats=None) -> PreparedInstance:
    tag = sentiment.classify(inst, lexicon, stats.tag_stats if stats else None)
    sdp, _, _ = syntax.sdp_for_instance(inst)
    augmented = sentiment.insert_sentiment_token(inst, tag)
    sdp_positions = sentiment.shift_positions(sdp.token_set)
    signal = labels.build_signal(augmented, sdp_positions, variant)
    augmented.isl = labels.signal_to_json(signal)
    if stats is not None:
        stats.instances += 1
        stats.sdp_fallbacks += int(sdp.fallback)
        stats.fragments += int(inst.fragmented)
    return PreparedInstance(
        raw=inst, augmented=augmented, tag=tag, sdp_positions=sdp_positions, signal=signal
    )


def annotate(instances, lexicon, variant) -> tuple[list[PreparedInstance], AnnotateStats]:
    stats = AnnotateStats()
    return [annotate_instance(i, lexicon, variant, stats) for i in instances], stats
