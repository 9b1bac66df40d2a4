import zlib

import numpy as np


def substream(seed, name):
    """Generator for the named substream of ``seed``.

    Streams with different names are statistically independent, and the
    mapping is stable across processes (no reliance on ``hash``).
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))


def spawn(seed, name, n):
    key = zlib.crc32(name.encode("utf-8"))
    children = np.random.SeedSequence([int(seed), key]).spawn(n)
    return [np.random.default_rng(c) for c in children]
