# utils/rng.py
"""
Deterministic seed derivation. Every stochastic step gets its own child seed
derived from a base seed and a path of names/indices, so results never depend
on the order in which workers pick up tasks.
"""
import hashlib
from typing import Union

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_seed(base_seed: int, *parts: Union[int, str]) -> int:
    """
    Maps (base_seed, parts...) to a stable unsigned 64-bit seed.
    """
    text = ":".join([str(int(base_seed) & _MASK64)] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big", signed=False)


def make_rng(seed: int, *parts: Union[int, str]) -> np.random.Generator:
    """
    Returns a PCG64 generator for the stream named by `parts` under `seed`.
    With no parts the seed is used as is.
    """
    child = derive_seed(seed, *parts) if parts else int(seed) & _MASK64
    return np.random.Generator(np.random.PCG64(child))
