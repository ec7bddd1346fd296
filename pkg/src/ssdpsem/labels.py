"""Supervisory position labels over the augmented token sequence.

Three nested variants:
  EPL  marks every entity-span position,
  SPL  additionally marks the shortest-dependency-path token set,
  ISL  additionally marks the sentiment-token position (index 0).

Q is the binary indicator; q = Q / sum(Q) is the supervision distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Instance

VARIANTS = ("EPL", "SPL", "ISL")


@dataclass
class IslSignal:
    variant: str
    Q: np.ndarray  # binary, length n'
    q: np.ndarray  # Q / sum(Q)

    @property
    def positions(self):
        return [int(i) for i in np.flatnonzero(self.Q)]


def build_signal(augmented: Instance, sdp_positions, variant: str) -> IslSignal:
    """Construct the indicator over an augmented (sentiment-inserted) instance.

    ``sdp_positions`` must already be re-based to augmented indices.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown signal variant {variant!r}")
    n = len(augmented.tokens)
    Q = np.zeros(n, dtype=np.float64)
    Q[augmented.subj[0] : augmented.subj[1] + 1] = 1.0
    Q[augmented.obj[0] : augmented.obj[1] + 1] = 1.0
    if variant in ("SPL", "ISL"):
        for p in sdp_positions:
            if not 0 <= p < n:
                raise ValueError(f"SDP position {p} outside augmented length {n}")
            Q[p] = 1.0
    if variant == "ISL":
        Q[0] = 1.0
    q = Q / Q.sum()
    return IslSignal(variant=variant, Q=Q, q=q)


def signal_to_json(signal: IslSignal) -> dict:
    return {"variant": signal.variant, "Q": [int(v) for v in signal.Q]}


def signal_from_json(rec: dict) -> IslSignal:
    Q = np.asarray(rec["Q"], dtype=np.float64)
    return IslSignal(variant=rec["variant"], Q=Q, q=Q / Q.sum())
