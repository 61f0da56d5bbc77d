"""Reproducible random streams indexed by ``(seed, index)``."""

from __future__ import annotations

import random

import numpy as np


def stream(seed: int, index: int) -> random.Random:
    """Independent generator for item ``index`` (a trial or a run) of ``seed``."""
    words = np.random.SeedSequence([int(seed), int(index)]).generate_state(2, dtype=np.uint32)
    return random.Random((int(words[0]) << 32) | int(words[1]))
