"""Counter-based seed expansion: one global seed, independent per-trial streams."""
from __future__ import annotations

import numpy as np


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Generator for ``trial`` that does not depend on how many other trials ran or in what order."""
    if seed < 0 or trial < 0 or stream < 0:
        raise ValueError("seed, trial and stream must be non-negative")
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, stream, trial]))
