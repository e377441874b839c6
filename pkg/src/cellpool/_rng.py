"""Counter-based random substreams.

Every stream is a Philox generator keyed by the user seed plus integer
labels (chunk index, purpose, frame, ...), so any draw can be reproduced
without replaying the draws that came before it.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *labels: int) -> np.random.Generator:
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, labels)])
    return np.random.Generator(np.random.Philox(key))
