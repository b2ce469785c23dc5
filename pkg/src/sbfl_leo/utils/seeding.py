from __future__ import annotations
import numpy as np

# Stream tags, so that independent consumers never share a random stream.
CONSTELLATION = 1
PARTITION = 2
CLUSTERING = 3
INIT_MODEL = 4
LOCAL_TRAIN = 5
MINER_SCORE = 6
HEAD_SCORE = 7
ATTACK = 8
KEYS = 9


def derive_seed(seed: int, *keys: int) -> int:
    """Stable 32-bit seed for (seed, *keys); order of calls elsewhere never matters."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
