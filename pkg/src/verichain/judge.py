"""Rule-based verdict judge over parsed reasoning chains.

A chain is Refuted as soon as any subclaim block is Refuted; it is
Supported only when every block is Supported. The judge is defined only
on parsed chains; malformed text has no verdict and is handled upstream.
"""

from __future__ import annotations

from .grammar import ReasoningChain
from .model import Verdict


def judge(chain: ReasoningChain) -> Verdict:
    """Fold block statuses with AND: any Refuted block refutes the claim."""
    for block in chain.blocks:
        if block.status is Verdict.REFUTED:
            return Verdict.REFUTED
    return Verdict.SUPPORTED
