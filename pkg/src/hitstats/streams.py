"""Seeded random streams and the deterministic worker map.

Every simulated sample draws from its own generator, derived from
``(seed, tag, index)`` through :class:`numpy.random.SeedSequence`.  Results
therefore do not depend on how samples are split between workers.
"""

import os
import zlib
from concurrent.futures import ProcessPoolExecutor

import numpy as np


def tag_key(tag):
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed, tag, index=0):
    """Generator for sample ``index`` of the run ``(seed, tag)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(tag_key(tag), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def random_bits(rng, nbits):
    """Uniform non-negative integer below ``2**nbits``."""
    nbytes = (nbits + 7) // 8
    return int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - nbits)


def default_workers():
    return os.cpu_count() or 1


def _chunks(n, workers):
    size = max(1, -(-n // (4 * workers)))
    return [range(lo, min(n, lo + size)) for lo in range(0, n, size)]


def indexed_map(fn, n, workers=1, args=()):
    """Evaluate ``fn(indices, *args)`` over contiguous index chunks.

    ``fn`` returns a list with one entry per index; the concatenation is
    returned in index order whatever the worker count.
    """
    if n == 0:
        return []
    workers = max(1, int(workers))
    if workers == 1:
        return list(fn(range(n), *args))
    chunks = _chunks(n, workers)
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, c, *args) for c in chunks]
        for f in futures:
            out.extend(f.result())
    return out
